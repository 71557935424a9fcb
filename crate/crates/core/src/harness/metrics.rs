use crate::error::{EnrError, Result};
use crate::tensor::{DenseTensor, ObservationMask};

/// Quality of one recovery run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub relative_error: f64,
    pub psnr: Option<f64>,
    pub wall_time: f64,
    pub final_rank: usize,
}

fn same_shape(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(EnrError::ShapeMismatch {
            expected: a.shape().dims().to_vec(),
            actual: b.shape().dims().to_vec(),
        });
    }
    Ok(())
}

/// `‖truth − estimate‖_F / ‖truth‖_F`.
///
/// With `observed` given, both norms run over the entries *not* in the mask,
/// so completion is scored on what was hidden from the solver.
pub fn relative_error(
    truth: &DenseTensor,
    estimate: &DenseTensor,
    observed: Option<&ObservationMask>,
) -> Result<f64> {
    same_shape(truth, estimate)?;
    if let Some(m) = observed {
        if m.shape() != truth.shape() {
            return Err(EnrError::ShapeMismatch {
                expected: truth.shape().dims().to_vec(),
                actual: m.shape().dims().to_vec(),
            });
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    let mut next_obs = observed.map(|m| m.offsets().iter().peekable());
    for (i, (t, e)) in truth.data().iter().zip(estimate.data()).enumerate() {
        if let Some(it) = next_obs.as_mut() {
            if it.peek() == Some(&&i) {
                it.next();
                continue;
            }
        }
        num += (t - e) * (t - e);
        den += t * t;
    }
    if den == 0.0 {
        return Err(EnrError::ZeroDenominator("relative error: truth is zero on the evaluated entries"));
    }
    Ok((num / den).sqrt())
}

/// `10·log10(peak² / MSE)`; infinite when the estimate is exact.
pub fn psnr(truth: &DenseTensor, estimate: &DenseTensor, peak: f64) -> Result<f64> {
    same_shape(truth, estimate)?;
    let n = truth.data().len() as f64;
    let mse = truth.data().iter().zip(estimate.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn t(v: &[f64]) -> DenseTensor {
        DenseTensor::new(Shape::new(vec![v.len(), 1]).unwrap(), v.to_vec()).unwrap()
    }

    #[test]
    fn relative_error_cases() {
        let truth = t(&[3.0, 4.0]);
        assert_eq!(relative_error(&truth, &truth, None).unwrap(), 0.0);
        assert_eq!(relative_error(&truth, &t(&[0.0, 0.0]), None).unwrap(), 1.0);
        assert!((relative_error(&truth, &t(&[0.0, 4.0]), None).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn masked_entries_are_skipped() {
        let truth = t(&[3.0, 4.0, 100.0]);
        let est = t(&[0.0, 4.0, -7.0]);
        let m = ObservationMask::from_offsets(truth.shape().clone(), vec![2]).unwrap();
        assert!((relative_error(&truth, &est, Some(&m)).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_truth_is_an_error() {
        let z = t(&[0.0, 0.0]);
        assert!(matches!(relative_error(&z, &t(&[1.0, 0.0]), None), Err(EnrError::ZeroDenominator(_))));
    }

    #[test]
    fn psnr_cases() {
        let a = t(&[0.0, 0.0]);
        assert_eq!(psnr(&a, &t(&[1.0, -1.0]), 1.0).unwrap(), 0.0);
        assert!((psnr(&a, &t(&[0.1, 0.1]), 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }
}
