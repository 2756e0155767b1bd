//! Coin model with a Beta prior. The tempered posterior stays in the Beta
//! family, which gives exact oracles for the sampler and the estimators.

use rand::RngCore;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::model::{BoundParameter, DataLikelihood, Dataset, Model, TrueDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBetaConfig {
    pub p0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl BernoulliBetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::Config(format!(
                "p0 must lie in (0, 1), got {}",
                self.p0
            )));
        }
        if !(self.a0 > 0.0 && self.b0 > 0.0 && self.a0.is_finite() && self.b0.is_finite()) {
            return Err(Error::Config(format!(
                "Beta prior shapes must be positive, got a0={}, b0={}",
                self.a0, self.b0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct CoinTruth {
    p0: f64,
}

impl TrueDistribution for CoinTruth {
    fn log_density(&self, x: &[f64]) -> f64 {
        coin_log_density(x[0], self.p0)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        vec![if u < self.p0 { 1.0 } else { 0.0 }]
    }
}

fn coin_log_density(x: f64, w: f64) -> f64 {
    if !(w > 0.0 && w < 1.0) {
        return f64::NEG_INFINITY;
    }
    if x == 1.0 {
        w.ln()
    } else if x == 0.0 {
        (-w).ln_1p()
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone)]
pub struct BernoulliBetaModel {
    cfg: BernoulliBetaConfig,
    truth: CoinTruth,
}

impl BernoulliBetaModel {
    pub fn config(&self) -> &BernoulliBetaConfig {
        &self.cfg
    }
}

pub fn make_bernoulli_beta(cfg: BernoulliBetaConfig) -> Result<BernoulliBetaModel> {
    cfg.validate()?;
    Ok(BernoulliBetaModel {
        truth: CoinTruth { p0: cfg.p0 },
        cfg,
    })
}

struct CoinLikelihood {
    ones: f64,
    zeros: f64,
    invalid: bool,
}

impl DataLikelihood for CoinLikelihood {
    fn total(&self, w: &[f64]) -> f64 {
        if self.invalid {
            return f64::NAN;
        }
        let w = w[0];
        if !(w > 0.0 && w < 1.0) {
            return f64::NEG_INFINITY;
        }
        self.ones * w.ln() + self.zeros * (-w).ln_1p()
    }
}

impl Model for BernoulliBetaModel {
    fn name(&self) -> &str {
        "bernoulli_beta"
    }

    fn dim(&self) -> usize {
        1
    }

    fn sample_dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64], w: &[f64]) -> f64 {
        coin_log_density(x[0], w[0])
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        let w = w[0];
        if !(w > 0.0 && w < 1.0) {
            return f64::NEG_INFINITY;
        }
        (self.cfg.a0 - 1.0) * w.ln() + (self.cfg.b0 - 1.0) * (-w).ln_1p()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let beta = Beta::new(self.cfg.a0, self.cfg.b0).expect("validated shapes");
        loop {
            let w: f64 = beta.sample(rng);
            if w > 0.0 && w < 1.0 {
                return vec![w];
            }
        }
    }

    fn truth(&self) -> Option<&dyn TrueDistribution> {
        Some(&self.truth)
    }

    fn likelihood<'a>(&'a self, data: &'a Dataset) -> Box<dyn DataLikelihood + 'a> {
        let mut ones = 0.0;
        let mut zeros = 0.0;
        let mut invalid = false;
        for x in data.iter() {
            match x[0] {
                1.0 => ones += 1.0,
                0.0 => zeros += 1.0,
                _ => invalid = true,
            }
        }
        Box::new(CoinLikelihood {
            ones,
            zeros,
            invalid,
        })
    }

    fn bind<'a>(&'a self, w: &'a [f64]) -> Box<dyn BoundParameter + 'a> {
        Box::new(CoinBound {
            p0: self.cfg.p0,
            w: w[0],
        })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "type": "bernoulli_beta",
            "p0": self.cfg.p0,
            "a0": self.cfg.a0,
            "b0": self.cfg.b0,
        })
    }
}

struct CoinBound {
    p0: f64,
    w: f64,
}

impl BoundParameter for CoinBound {
    fn log_density(&self, x: &[f64]) -> f64 {
        coin_log_density(x[0], self.w)
    }

    fn log_density_ratio(&self, x: &[f64]) -> f64 {
        coin_log_density(x[0], self.p0) - coin_log_density(x[0], self.w)
    }
}

/// Number of ones and the sample size; non-binary data is a domain error.
pub fn count_ones(data: &Dataset) -> Result<(usize, usize)> {
    if data.sample_dim() != 1 {
        return Err(Error::Domain(format!(
            "coin data must be one-dimensional, got width {}",
            data.sample_dim()
        )));
    }
    let mut ones = 0;
    for (i, x) in data.iter().enumerate() {
        match x[0] {
            1.0 => ones += 1,
            0.0 => {}
            v => return Err(Error::Domain(format!("sample {i} is {v}, expected 0 or 1"))),
        }
    }
    Ok((ones, data.n()))
}

/// Shapes of the tempered posterior `Beta(a0 + βk, b0 + β(n − k))`.
pub fn tempered_beta_posterior(
    cfg: &BernoulliBetaConfig,
    ones: usize,
    n: usize,
    beta: f64,
) -> (f64, f64) {
    (
        cfg.a0 + beta * ones as f64,
        cfg.b0 + beta * (n - ones) as f64,
    )
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Precondition(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// Exact `BL_t` from the closed-form posterior predictive: `E_w[p(1|w)]` is the
/// posterior mean of `w`.
pub fn exact_bayes_training_loss_bernoulli(
    data: &Dataset,
    cfg: &BernoulliBetaConfig,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let (k, n) = count_ones(data)?;
    let (a, b) = tempered_beta_posterior(cfg, k, n, beta);
    let mean = a / (a + b);
    let kf = k as f64;
    let mf = (n - k) as f64;
    Ok(-(kf * mean.ln() + mf * (1.0 - mean).ln()) / n as f64)
}

/// Exact `GL_t` using `E[log w] = ψ(a) − ψ(a+b)`.
pub fn exact_gibbs_training_loss_bernoulli(
    data: &Dataset,
    cfg: &BernoulliBetaConfig,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let (k, n) = count_ones(data)?;
    let (a, b) = tempered_beta_posterior(cfg, k, n, beta);
    let e_log_w = digamma(a) - digamma(a + b);
    let e_log_1mw = digamma(b) - digamma(a + b);
    Ok(-(k as f64 * e_log_w + (n - k) as f64 * e_log_1mw) / n as f64)
}

/// Exact functional variance using `Var[log w] = ψ₁(a) − ψ₁(a+b)`.
pub fn exact_functional_variance_bernoulli(
    data: &Dataset,
    cfg: &BernoulliBetaConfig,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let (k, n) = count_ones(data)?;
    let (a, b) = tempered_beta_posterior(cfg, k, n, beta);
    let var_log_w = trigamma(a) - trigamma(a + b);
    let var_log_1mw = trigamma(b) - trigamma(a + b);
    Ok((k as f64 * var_log_w + (n - k) as f64 * var_log_1mw) / n as f64)
}

/// Trigamma `ψ₁(x)` for `x > 0`: upward recurrence then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/2x² + Σ B₂ₖ/x^(2k+1)
    let series = inv
        * (1.0
            + inv * 0.5
            + inv2
                * (1.0 / 6.0
                    + inv2
                        * (-1.0 / 30.0
                            + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * 5.0 / 66.0)))));
    acc + series
}
