//! Runs a small λ sweep from a config string and prints the CSV report.

use cp_enr::harness::{parse_config, run_experiment};

fn main() -> cp_enr::Result<()> {
    let spec = parse_config(
        "task = lrtc\n\
         shape = 15x15x15\n\
         rank = 3\n\
         k = 6\n\
         missing_rate = 0.6\n\
         seeds = 0..3\n\
         lambda_min = 0.1\n\
         lambda_max = 100\n\
         lambda_points = 5\n\
         timing = false\n",
    )?;
    let report = run_experiment(&spec)?;
    print!("{}", report.to_csv());
    if let Some(best) = report.best() {
        println!("# best λ = {} (mean error {:.4})", best.lambda, best.mean_error);
    }
    Ok(())
}
