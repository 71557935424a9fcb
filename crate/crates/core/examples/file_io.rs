//! Writes a tensor and an observation mask to the binary formats and reads
//! them back.

use cp_enr::io::{load_mask, load_tensor, save_mask, save_tensor};
use cp_enr::*;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("cp-enr-file-io");
    std::fs::create_dir_all(&dir)?;
    let t = DenseTensor::from_fn(Shape::new(vec![4, 3, 2])?, |i| (100 * i[0] + 10 * i[1] + i[2]) as f64)?;
    let m = sample_mask(t.shape(), 0.5, 11)?;
    save_tensor(dir.join("t.tnsr"), &t)?;
    save_mask(dir.join("m.mask"), &m)?;

    let t2 = load_tensor(dir.join("t.tnsr"))?;
    let m2 = load_mask(dir.join("m.mask"))?;
    println!("tensor {} round trip: {}", t.shape(), t2 == t);
    println!("mask with {} entries round trip: {}", m.count(), m2 == m);
    println!("mode-1 unfolding:\n{}", unfold(&t2, 1)?);
    Ok(())
}
