use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterVector;
use crate::posterior::PosteriorEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub ess: f64,
    /// Set when the trace is constant; `ess` is then the trace length.
    pub zero_variance: bool,
}

/// ESS of `statistic` evaluated along the ensemble.
pub fn effective_sample_size<F>(ensemble: &PosteriorEnsemble, statistic: F) -> Result<EssEstimate>
where
    F: Fn(&ParameterVector) -> f64,
{
    let trace: Vec<f64> = ensemble.draws.iter().map(statistic).collect();
    ess_of_trace(&trace)
}

/// Geyer's initial monotone sequence estimator. Autocovariances use the
/// biased `1/K` normalization, computed by FFT. The result lies in `[1, K]`.
pub fn ess_of_trace(trace: &[f64]) -> Result<EssEstimate> {
    let k = trace.len();
    if k < 10 {
        return Err(Error::Precondition(format!(
            "effective sample size needs at least 10 draws, got {k}"
        )));
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("trace contains non-finite values".into()));
    }
    let acov = autocovariance(trace);
    if acov[0] <= 0.0 || trace.iter().all(|&v| v == trace[0]) {
        return Ok(EssEstimate {
            ess: k as f64,
            zero_variance: true,
        });
    }
    let rho = |t: usize| if t < k { acov[t] / acov[0] } else { 0.0 };

    let mut sum = 0.0;
    let mut previous = f64::INFINITY;
    let mut m = 0;
    while 2 * m < k {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        sum += pair;
        previous = pair;
        m += 1;
    }
    let tau = -1.0 + 2.0 * sum;
    let ess = if tau > 0.0 { k as f64 / tau } else { k as f64 };
    Ok(EssEstimate {
        ess: ess.clamp(1.0, k as f64),
        zero_variance: false,
    })
}

fn autocovariance(trace: &[f64]) -> Vec<f64> {
    let k = trace.len();
    let mean = trace.iter().sum::<f64>() / k as f64;
    let size = (2 * k).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = trace
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in &mut buf {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * k as f64);
    buf[..k].iter().map(|z| z.re * scale).collect()
}

/// Standard error of the mean of `values` by non-overlapping batch means.
pub fn batch_means_se(values: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || values.len() < batches {
        return Err(Error::Precondition(format!(
            "batch means need at least 2 batches and one value per batch (got {} values, {batches} batches)",
            values.len()
        )));
    }
    let size = values.len() / batches;
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((var / batches as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn white_noise_ess_is_close_to_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let est = ess_of_trace(&trace).unwrap();
        assert!((est.ess / 5000.0 - 1.0).abs() < 0.2, "ess {}", est.ess);
    }

    #[test]
    fn strongly_correlated_trace_has_tiny_ess() {
        let trace: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        let est = ess_of_trace(&trace).unwrap();
        assert!(est.ess < 20.0, "ess {}", est.ess);
        let steps: Vec<f64> = (0..2000)
            .map(|i| if i < 1000 { 0.0 } else { 1.0 })
            .collect();
        assert!(ess_of_trace(&steps).unwrap().ess < 10.0);
    }

    #[test]
    fn alternating_trace_is_capped_at_length() {
        let trace: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let est = ess_of_trace(&trace).unwrap();
        assert_eq!(est.ess, 1000.0);
        assert!(!est.zero_variance);
    }

    #[test]
    fn constant_trace_flags_zero_variance() {
        let est = ess_of_trace(&[2.5; 50]).unwrap();
        assert_eq!(est.ess, 50.0);
        assert!(est.zero_variance);
    }

    #[test]
    fn short_trace_rejected() {
        assert!(matches!(
            ess_of_trace(&[1.0; 9]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // AR(1) with φ = 0.8 has ESS/K = (1 − φ)/(1 + φ) = 1/9.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let trace: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = 0.8 * x + z;
                x
            })
            .collect();
        let ratio = ess_of_trace(&trace).unwrap().ess / trace.len() as f64;
        assert!((ratio - 1.0 / 9.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn fft_autocovariance_matches_direct_sum() {
        let trace = [0.3, -1.2, 2.0, 0.7, 0.1, -0.4, 1.1];
        let acov = autocovariance(&trace);
        let mean = trace.iter().sum::<f64>() / 7.0;
        for (t, a) in acov.iter().enumerate() {
            let direct: f64 = (0..7 - t)
                .map(|i| (trace[i] - mean) * (trace[i + t] - mean))
                .sum::<f64>()
                / 7.0;
            assert!((a - direct).abs() < 1e-12);
        }
    }
}
