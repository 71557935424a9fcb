use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Corruption, ExperimentSpec, Task, WeightsMode};
use crate::error::{EnrError, Result};
use crate::tensor::{
    cp_reconstruct, rng_from_seed, sample_mask, sample_offsets, DenseTensor, FactorSet, Matrix,
    ObservationMask,
};

// keeps the mask stream independent of the tensor stream for the same seed
const MASK_STREAM: u64 = 0x6d61_736b;

/// A synthetic completion problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LrtcData {
    pub truth: DenseTensor,
    pub observed: DenseTensor,
    pub mask: ObservationMask,
}

/// A synthetic robust PCA problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrpcaData {
    pub truth: DenseTensor,
    pub corrupted: DenseTensor,
    /// `corrupted − truth − dense noise`; zero off the corrupted entries.
    pub sparse: DenseTensor,
}

/// Component weights: all ones, or `i/r` for `i = 1..=r`.
pub fn component_weights(mode: WeightsMode, r: usize) -> Vec<f64> {
    match mode {
        WeightsMode::Unit => vec![1.0; r],
        WeightsMode::Linear => (1..=r).map(|i| i as f64 / r as f64).collect(),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn low_rank_truth(spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    let w = component_weights(spec.weights, spec.rank);
    let mut factors: Vec<Matrix> =
        spec.shape.dims().iter().map(|&n| Matrix::from_fn(n, spec.rank, |_, _| normal(rng))).collect();
    for (mut col, wi) in factors[0].column_iter_mut().zip(&w) {
        col *= *wi;
    }
    Ok(cp_reconstruct(&FactorSet::new(factors)?))
}

fn add_noise(t: &DenseTensor, level: f64, rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    if level == 0.0 {
        return Ok(t.clone());
    }
    let sd = level * t.std_dev();
    let data = t.data().iter().map(|v| v + sd * normal(rng)).collect();
    DenseTensor::new(t.shape().clone(), data)
}

fn check_task(spec: &ExperimentSpec, want: Task) -> Result<()> {
    if spec.task != want {
        return Err(EnrError::Config(format!("expected a {want} experiment, got {}", spec.task)));
    }
    spec.validate()
}

/// Sum of `rank` weighted outer products of standard-normal vectors, plus
/// Gaussian noise of standard deviation `noise·σ` (σ the population standard
/// deviation of the clean entries), observed on a uniform random subset of
/// `round((1 − missing_rate)·N)` entries.
pub fn gen_lrtc_data(spec: &ExperimentSpec, seed: u64) -> Result<LrtcData> {
    check_task(spec, Task::Lrtc)?;
    let mut rng = rng_from_seed(seed);
    let truth = low_rank_truth(spec, &mut rng)?;
    let observed = add_noise(&truth, spec.noise, &mut rng)?;
    let mask = sample_mask(&spec.shape, spec.rate, seed ^ MASK_STREAM)?;
    Ok(LrtcData { truth, observed, mask })
}

/// Low-rank truth and dense noise as in [`gen_lrtc_data`], plus
/// `round(density·N)` uniformly placed corrupted entries drawn from a normal
/// with standard deviation σ. Additive corruption adds the draw; replacement
/// overwrites the noisy entry with it.
pub fn gen_trpca_data(spec: &ExperimentSpec, seed: u64) -> Result<TrpcaData> {
    check_task(spec, Task::Trpca)?;
    let mut rng = rng_from_seed(seed);
    let truth = low_rank_truth(spec, &mut rng)?;
    let noisy = add_noise(&truth, spec.noise, &mut rng)?;
    let sigma = truth.std_dev();
    let total = spec.shape.len();
    let count = (spec.rate * total as f64).round() as usize;
    let mut offsets = sample_offsets(total, count, &mut rng);
    offsets.sort_unstable();
    let mut corrupted = noisy.data().to_vec();
    let mut sparse = vec![0.0; total];
    for &o in &offsets {
        let draw = sigma * normal(&mut rng);
        let new = match spec.corruption {
            Corruption::Additive => corrupted[o] + draw,
            Corruption::Replace => draw,
        };
        sparse[o] = new - corrupted[o];
        corrupted[o] = new;
    }
    Ok(TrpcaData {
        truth,
        corrupted: DenseTensor::new(spec.shape.clone(), corrupted)?,
        sparse: DenseTensor::new(spec.shape.clone(), sparse)?,
    })
}
