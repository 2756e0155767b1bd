use std::f64::consts::PI;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundParameter, DataLikelihood, Dataset, Model, TrueDistribution};
use crate::zoo::standard_normal;

/// Gaussian location family `N(x; w, σ²I_d)` with prior `∝ exp(-c‖w‖²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularGaussianConfig {
    pub d: usize,
    pub sigma: f64,
    pub mu0: Vec<f64>,
    pub prior_scale: f64,
    /// Noise level of the truth; defaults to `sigma` (well specified).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_sigma: Option<f64>,
}

impl RegularGaussianConfig {
    pub fn well_specified(d: usize, sigma: f64, prior_scale: f64) -> Self {
        Self {
            d,
            sigma,
            mu0: vec![0.0; d],
            prior_scale,
            true_sigma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if let Some(ts) = self.true_sigma {
            if !(ts > 0.0 && ts.is_finite()) {
                return Err(Error::Config(format!(
                    "true_sigma must be positive, got {ts}"
                )));
            }
        }
        if self.mu0.len() != self.d {
            return Err(Error::Config(format!(
                "mu0 has {} entries, expected d = {}",
                self.mu0.len(),
                self.d
            )));
        }
        if self.mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mu0 must be finite".into()));
        }
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::Config(format!(
                "prior_scale must be positive, got {}",
                self.prior_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct GaussianTruth {
    mu0: Vec<f64>,
    sigma: f64,
    log_norm: f64,
}

impl TrueDistribution for GaussianTruth {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - sq_dist(x, &self.mu0) / (2.0 * self.sigma * self.sigma)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.mu0
            .iter()
            .map(|m| m + self.sigma * standard_normal(rng))
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub struct RegularGaussianModel {
    cfg: RegularGaussianConfig,
    log_norm: f64,
    truth: GaussianTruth,
}

impl RegularGaussianModel {
    pub fn config(&self) -> &RegularGaussianConfig {
        &self.cfg
    }

    fn well_specified(&self) -> bool {
        self.truth.sigma == self.cfg.sigma
    }
}

pub fn make_regular_gaussian(cfg: RegularGaussianConfig) -> Result<RegularGaussianModel> {
    cfg.validate()?;
    let d = cfg.d as f64;
    let true_sigma = cfg.true_sigma.unwrap_or(cfg.sigma);
    let truth = GaussianTruth {
        mu0: cfg.mu0.clone(),
        sigma: true_sigma,
        log_norm: -0.5 * d * (2.0 * PI * true_sigma * true_sigma).ln(),
    };
    Ok(RegularGaussianModel {
        log_norm: -0.5 * d * (2.0 * PI * cfg.sigma * cfg.sigma).ln(),
        cfg,
        truth,
    })
}

struct GaussianBound<'a> {
    model: &'a RegularGaussianModel,
    w: &'a [f64],
}

impl BoundParameter for GaussianBound<'_> {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.model.log_density(x, self.w)
    }

    fn log_density_ratio(&self, x: &[f64]) -> f64 {
        let m = self.model;
        if m.well_specified() {
            (sq_dist(x, self.w) - sq_dist(x, &m.truth.mu0)) / (2.0 * m.cfg.sigma * m.cfg.sigma)
        } else {
            m.truth.log_density(x) - m.log_density(x, self.w)
        }
    }
}

/// Sufficient statistics `Σx` and `Σ‖x‖²`.
struct GaussianLikelihood<'a> {
    model: &'a RegularGaussianModel,
    n: f64,
    sum: Vec<f64>,
    sum_sq: f64,
}

impl DataLikelihood for GaussianLikelihood<'_> {
    fn total(&self, w: &[f64]) -> f64 {
        let cross: f64 = w.iter().zip(&self.sum).map(|(a, b)| a * b).sum();
        let ww: f64 = w.iter().map(|v| v * v).sum();
        let rss = self.sum_sq - 2.0 * cross + self.n * ww;
        let var = self.model.cfg.sigma * self.model.cfg.sigma;
        self.n * self.model.log_norm - rss / (2.0 * var)
    }
}

impl Model for RegularGaussianModel {
    fn name(&self) -> &str {
        "regular_gaussian"
    }

    fn dim(&self) -> usize {
        self.cfg.d
    }

    fn sample_dim(&self) -> usize {
        self.cfg.d
    }

    fn log_density(&self, x: &[f64], w: &[f64]) -> f64 {
        self.log_norm - sq_dist(x, w) / (2.0 * self.cfg.sigma * self.cfg.sigma)
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        -self.cfg.prior_scale * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let sd = (0.5 / self.cfg.prior_scale).sqrt();
        (0..self.cfg.d).map(|_| sd * standard_normal(rng)).collect()
    }

    fn truth(&self) -> Option<&dyn TrueDistribution> {
        Some(&self.truth)
    }

    fn log_density_ratio(&self, x: &[f64], w: &[f64]) -> Result<f64> {
        Ok(self.bind(w).log_density_ratio(x))
    }

    /// Sample mean jittered on the posterior scale `σ/√n`.
    fn initial_point(&self, data: &Dataset, rng: &mut dyn RngCore) -> Vec<f64> {
        let n = data.n() as f64;
        let jitter = self.cfg.sigma / n.sqrt();
        (0..self.cfg.d)
            .map(|j| {
                let mean = data.iter().map(|x| x[j]).sum::<f64>() / n;
                mean + jitter * standard_normal(rng)
            })
            .collect()
    }

    fn bind<'a>(&'a self, w: &'a [f64]) -> Box<dyn BoundParameter + 'a> {
        Box::new(GaussianBound { model: self, w })
    }

    fn likelihood<'a>(&'a self, data: &'a Dataset) -> Box<dyn DataLikelihood + 'a> {
        let mut sum = vec![0.0; self.cfg.d];
        let mut sum_sq = 0.0;
        for x in data.iter() {
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
            sum_sq += x.iter().map(|v| v * v).sum::<f64>();
        }
        Box::new(GaussianLikelihood {
            model: self,
            n: data.n() as f64,
            sum,
            sum_sq,
        })
    }

    fn describe(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "type": "regular_gaussian",
            "d": self.cfg.d,
            "sigma": self.cfg.sigma,
            "mu0": self.cfg.mu0,
            "prior_scale": self.cfg.prior_scale,
        });
        if let Some(ts) = self.cfg.true_sigma {
            v["true_sigma"] = ts.into();
        }
        v
    }
}
