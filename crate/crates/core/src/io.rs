//! Binary tensor (`TNSR`) and observation mask (`MASK`) files.
//!
//! Both start with a 4-byte magic, a version byte (1), the order `d` as a
//! little-endian `u32` and `d` little-endian `u32` dimensions. A tensor file
//! then holds every entry as a little-endian `f64`, first index fastest. A
//! mask file holds the observed count as a `u64` followed by that many
//! strictly increasing `u64` linear offsets.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{EnrError, Result};
use crate::tensor::{DenseTensor, ObservationMask, Shape};

pub const TENSOR_MAGIC: &[u8; 4] = b"TNSR";
pub const MASK_MAGIC: &[u8; 4] = b"MASK";
pub const VERSION: u8 = 1;

fn write_header(w: &mut impl Write, magic: &[u8; 4], shape: &Shape) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&[VERSION])?;
    w.write_all(&u32_of(shape.order())?.to_le_bytes())?;
    for &n in shape.dims() {
        w.write_all(&u32_of(n)?.to_le_bytes())?;
    }
    Ok(())
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| EnrError::Format(format!("{n} does not fit in 32 bits")))
}

fn read_array<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EnrError::Format(format!("truncated file while reading {what}")),
        _ => EnrError::Io(e),
    })?;
    Ok(buf)
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<Shape> {
    let got: [u8; 4] = read_array(r, "magic")?;
    if &got != magic {
        return Err(EnrError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let [version] = read_array::<1>(r, "version")?;
    if version != VERSION {
        return Err(EnrError::Format(format!("unsupported version {version}")));
    }
    let order = u32::from_le_bytes(read_array(r, "order")?) as usize;
    if !(2..=64).contains(&order) {
        return Err(EnrError::Format(format!("unsupported order {order}")));
    }
    let dims = (0..order)
        .map(|_| read_array(r, "dimensions").map(|b| u32::from_le_bytes(b) as usize))
        .collect::<Result<Vec<_>>>()?;
    Shape::new(dims).map_err(|e| EnrError::Format(e.to_string()))
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(()),
        _ => Err(EnrError::Format("trailing bytes after payload".into())),
    }
}

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    write_header(w, TENSOR_MAGIC, t.shape())?;
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<DenseTensor> {
    let shape = read_header(r, TENSOR_MAGIC)?;
    let mut data = Vec::with_capacity(shape.len().min(1 << 24));
    for _ in 0..shape.len() {
        data.push(f64::from_le_bytes(read_array(r, "tensor data")?));
    }
    expect_eof(r)?;
    DenseTensor::new(shape, data)
}

pub fn write_mask(w: &mut impl Write, m: &ObservationMask) -> Result<()> {
    write_header(w, MASK_MAGIC, m.shape())?;
    w.write_all(&(m.count() as u64).to_le_bytes())?;
    for &o in m.offsets() {
        w.write_all(&(o as u64).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_mask(r: &mut impl Read) -> Result<ObservationMask> {
    let shape = read_header(r, MASK_MAGIC)?;
    let count = u64::from_le_bytes(read_array(r, "mask count")?);
    if count > shape.len() as u64 {
        return Err(EnrError::Format(format!("mask count {count} exceeds tensor size {}", shape.len())));
    }
    let mut offsets = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let o = u64::from_le_bytes(read_array(r, "mask offsets")?);
        if offsets.last().is_some_and(|&prev| o as usize <= prev) {
            return Err(EnrError::Format("mask offsets must be strictly increasing".into()));
        }
        offsets.push(o as usize);
    }
    expect_eof(r)?;
    ObservationMask::from_offsets(shape, offsets).map_err(|e| EnrError::Format(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}

pub fn save_mask(path: impl AsRef<Path>, m: &ObservationMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mask(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<ObservationMask> {
    read_mask(&mut BufReader::new(File::open(path)?))
}
