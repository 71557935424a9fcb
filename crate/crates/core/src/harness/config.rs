use std::str::FromStr;

use super::{log_grid, ExperimentSpec, Task};
use crate::error::{EnrError, Result};
use crate::regularizers::parse_ratio;
use crate::tensor::Shape;

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| EnrError::Config(format!("{key}: cannot parse '{v}': {e}")))
}

fn real(key: &str, v: &str) -> Result<f64> {
    if v.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    parse_ratio(v).ok_or_else(|| EnrError::Config(format!("{key}: '{v}' is not a number")))
}

fn list<T>(key: &str, v: &str, mut item: impl FnMut(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| item(key, s)).collect()
}

fn seeds(v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (value("seeds", a.trim())?, value("seeds", b.trim())?);
        return Ok((a..b).collect());
    }
    list("seeds", v, value)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(EnrError::Config(format!("{key}: '{v}' is not a boolean"))),
    }
}

/// Parses a flat `key = value` experiment description.
///
/// Blank lines and text after `#` are ignored. `task` picks the defaults
/// ([`ExperimentSpec::lrtc_default`] or [`ExperimentSpec::trpca_default`])
/// and may appear anywhere; every other key overrides one field. The λ grid
/// is either an explicit `lambdas = a, b, c` list or built from
/// `lambda_min`, `lambda_max` and `lambda_points`. Unknown or repeated keys
/// are errors.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| EnrError::Config(format!("line {}: expected key=value", no + 1)))?;
        let k = k.trim().to_ascii_lowercase().replace('-', "_");
        if pairs.iter().any(|(_, seen, _)| *seen == k) {
            return Err(EnrError::Config(format!("line {}: duplicate key '{k}'", no + 1)));
        }
        pairs.push((no + 1, k, v.trim().to_string()));
    }

    let task = match pairs.iter().find(|(_, k, _)| k == "task") {
        Some((_, _, v)) => v.parse::<Task>()?,
        None => Task::Lrtc,
    };
    let mut spec = match task {
        Task::Lrtc => ExperimentSpec::lrtc_default(),
        Task::Trpca => ExperimentSpec::trpca_default(),
    };
    let (mut lo, mut hi, mut points) = (0.01, 500.0, 20usize);
    let mut explicit_grid = false;

    for (no, k, v) in &pairs {
        let v = v.as_str();
        let at = |e: EnrError| EnrError::Config(format!("line {no}: {e}"));
        let r: Result<()> = (|| {
            match k.as_str() {
                "task" => {}
                "shape" => {
                    let dims = v
                        .split(['x', ',', '*'])
                        .map(|s| value::<usize>("shape", s.trim()))
                        .collect::<Result<Vec<_>>>()?;
                    spec.shape = Shape::new(dims)?;
                }
                "rank" | "r" => spec.rank = value(k, v)?,
                "k" | "k_init" => spec.k_init = value(k, v)?,
                "noise" | "noise_level" => spec.noise = real(k, v)?,
                "missing_rate" | "density" | "sparse_density" | "rate" => spec.rate = real(k, v)?,
                "weights" => spec.weights = v.parse()?,
                "corruption" => spec.corruption = v.parse()?,
                "reg" | "regularizer" => spec.regularizer = v.parse()?,
                "solver" => spec.solver = v.parse()?,
                "rho" => spec.rho = real(k, v)?,
                "delta" => spec.delta = real(k, v)?,
                "lambda_e" => spec.lambda_e = real(k, v)?,
                "mu" => spec.mu = real(k, v)?,
                "q" => spec.q = Some(real(k, v)?),
                "tmax" | "t_max" => spec.t_max = value(k, v)?,
                "conv_tol" => spec.conv_tol = real(k, v)?,
                "prune_tol" => spec.prune_tol = real(k, v)?,
                "seeds" => spec.seeds = seeds(v)?,
                "lambdas" | "lambda" => {
                    spec.lambdas = list(k, v, real)?;
                    explicit_grid = true;
                }
                "lambda_min" => lo = real(k, v)?,
                "lambda_max" => hi = real(k, v)?,
                "lambda_points" => points = value(k, v)?,
                "psnr_peak" => spec.psnr_peak = real(k, v)?,
                "timing" => spec.timing = boolean(k, v)?,
                other => return Err(EnrError::Config(format!("unknown key '{other}'"))),
            }
            Ok(())
        })();
        r.map_err(at)?;
    }
    let grid_keys =
        pairs.iter().any(|(_, k, _)| matches!(k.as_str(), "lambda_min" | "lambda_max" | "lambda_points"));
    if explicit_grid && grid_keys {
        return Err(EnrError::Config(
            "give either lambdas or lambda_min/lambda_max/lambda_points, not both".into(),
        ));
    }
    if !explicit_grid {
        if !(lo > 0.0 && hi >= lo) {
            return Err(EnrError::Config(format!("bad λ range [{lo}, {hi}]")));
        }
        spec.lambdas = log_grid(lo, hi, points);
    }
    spec.validate()?;
    Ok(spec)
}
