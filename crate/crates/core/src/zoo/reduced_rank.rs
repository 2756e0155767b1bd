//! Reduced rank regression `x₂ = B·A·x₁ + ε`.
//!
//! Parameter layout: `w = [A (H×N1, row-major), B (N2×H, row-major)]`, so
//! `d = H·(N1 + N2)` and the regression matrix is `C = B·A` (N2×N1).
//! Inputs are `x₁ ~ N(0, I)`; that factor is shared by the model and the
//! truth and cancels from every log density ratio.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundParameter, DataLikelihood, Dataset, Model, TrueDistribution};
use crate::zoo::standard_normal;

/// Relative tolerance used when checking the rank of `B₀A₀`.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedRankConfig {
    pub n1: usize,
    pub n2: usize,
    /// Model rank `H`.
    pub h: usize,
    /// True rank `H₀`.
    pub h0: usize,
    pub sigma: f64,
    /// Coefficient `c` in the prior `∝ exp(-c(‖A‖² + ‖B‖²))`.
    pub prior_scale: f64,
    /// True `A₀` (H₀×N1, row-major).
    pub a0: Vec<f64>,
    /// True `B₀` (N2×H₀, row-major).
    pub b0: Vec<f64>,
}

impl ReducedRankConfig {
    /// Draws `A₀, B₀` as Gaussian factors of rank `h0` and rescales them so the
    /// nonzero singular values of `B₀A₀` span `[0.5, 1.5]`. The result is a
    /// balanced factorization `A₀ = S^½Vᵀ`, `B₀ = US^½`.
    pub fn with_random_truth(
        n1: usize,
        n2: usize,
        h: usize,
        h0: usize,
        sigma: f64,
        prior_scale: f64,
        truth_seed: u64,
    ) -> Result<Self> {
        if h0 > n1.min(n2) || n1 == 0 || n2 == 0 {
            return Err(Error::Config(format!(
                "true rank H0={h0} must be at most min(N1, N2) = {}",
                n1.min(n2)
            )));
        }
        let (a0, b0) = if h0 == 0 {
            (Vec::new(), Vec::new())
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(truth_seed);
            let b = DMatrix::<f64>::from_fn(n2, h0, |_, _| StandardNormal.sample(&mut rng));
            let a = DMatrix::<f64>::from_fn(h0, n1, |_, _| StandardNormal.sample(&mut rng));
            let svd = (&b * &a).svd(true, true);
            let u = svd.u.expect("u requested");
            let v_t = svd.v_t.expect("v_t requested");
            let s = &svd.singular_values;
            let (smax, smin) = (s[0], s[h0 - 1]);
            let scaled: Vec<f64> = (0..h0)
                .map(|i| {
                    if h0 == 1 || smax - smin <= f64::EPSILON * smax {
                        1.0
                    } else {
                        0.5 + (s[i] - smin) / (smax - smin)
                    }
                })
                .collect();
            let mut a0 = vec![0.0; h0 * n1];
            let mut b0 = vec![0.0; n2 * h0];
            for k in 0..h0 {
                let root = scaled[k].sqrt();
                for j in 0..n1 {
                    a0[k * n1 + j] = root * v_t[(k, j)];
                }
                for i in 0..n2 {
                    b0[i * h0 + k] = root * u[(i, k)];
                }
            }
            (a0, b0)
        };
        let cfg = Self {
            n1,
            n2,
            h,
            h0,
            sigma,
            prior_scale,
            a0,
            b0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let max_rank = self.n1.min(self.n2);
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("N1 and N2 must be positive".into()));
        }
        if self.h == 0 || self.h > max_rank {
            return Err(Error::Config(format!(
                "model rank H={} must lie in 1..={max_rank}",
                self.h
            )));
        }
        if self.h0 > max_rank {
            return Err(Error::Config(format!(
                "true rank H0={} exceeds min(N1, N2) = {max_rank}",
                self.h0
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::Config(format!(
                "prior_scale must be positive, got {}",
                self.prior_scale
            )));
        }
        if self.a0.len() != self.h0 * self.n1 {
            return Err(Error::Config(format!(
                "A0 has {} entries, expected H0*N1 = {}",
                self.a0.len(),
                self.h0 * self.n1
            )));
        }
        if self.b0.len() != self.n2 * self.h0 {
            return Err(Error::Config(format!(
                "B0 has {} entries, expected N2*H0 = {}",
                self.b0.len(),
                self.n2 * self.h0
            )));
        }
        if self.a0.iter().chain(&self.b0).any(|v| !v.is_finite()) {
            return Err(Error::Config("A0 and B0 must be finite".into()));
        }
        let c0 = matmul(&self.b0, &self.a0, self.n2, self.h0, self.n1);
        let svd = DMatrix::from_row_slice(self.n2, self.n1, &c0).svd(false, false);
        let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| top > 0.0 && s > RANK_TOL * top)
            .count();
        if rank != self.h0 {
            return Err(Error::Config(format!(
                "rank(B0*A0) = {rank} but H0 = {}",
                self.h0
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.h * (self.n1 + self.n2)
    }
}

/// Row-major `(r×k)·(k×c)`.
fn matmul(left: &[f64], right: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for m in 0..k {
            let l = left[i * k + m];
            if l == 0.0 {
                continue;
            }
            let row = &right[m * c..(m + 1) * c];
            for (o, &v) in out[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o += l * v;
            }
        }
    }
    out
}

/// `‖x₂ − C·x₁‖²` for row-major `C` (N2×N1).
fn squared_residual(c: &[f64], x1: &[f64], x2: &[f64]) -> f64 {
    let n1 = x1.len();
    x2.iter()
        .enumerate()
        .map(|(i, &y)| {
            let pred: f64 = c[i * n1..(i + 1) * n1]
                .iter()
                .zip(x1)
                .map(|(a, b)| a * b)
                .sum();
            let r = y - pred;
            r * r
        })
        .sum()
}

fn log_std_normal(x: &[f64]) -> f64 {
    -0.5 * x.iter().map(|v| v * v).sum::<f64>() - 0.5 * x.len() as f64 * (2.0 * PI).ln()
}

#[derive(Debug, Clone)]
struct RrrTruth {
    n1: usize,
    n2: usize,
    sigma: f64,
    c0: Vec<f64>,
    log_norm: f64,
    inv_two_var: f64,
}

impl TrueDistribution for RrrTruth {
    fn log_density(&self, x: &[f64]) -> f64 {
        let (x1, x2) = x.split_at(self.n1);
        log_std_normal(x1) + self.log_norm - squared_residual(&self.c0, x1, x2) * self.inv_two_var
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n1 + self.n2);
        for _ in 0..self.n1 {
            x.push(StandardNormal.sample(rng));
        }
        for i in 0..self.n2 {
            let mean: f64 = self.c0[i * self.n1..(i + 1) * self.n1]
                .iter()
                .zip(&x[..self.n1])
                .map(|(a, b)| a * b)
                .sum();
            let noise: f64 = StandardNormal.sample(rng);
            x.push(mean + self.sigma * noise);
        }
        x
    }
}

/// The reduced rank regression machine with its true distribution.
#[derive(Debug, Clone)]
pub struct ReducedRankModel {
    cfg: ReducedRankConfig,
    truth: RrrTruth,
}

impl ReducedRankModel {
    pub fn config(&self) -> &ReducedRankConfig {
        &self.cfg
    }

    /// True regression matrix `C₀ = B₀A₀` (N2×N1, row-major).
    pub fn true_product(&self) -> &[f64] {
        &self.truth.c0
    }

    /// `C = B·A` for a parameter vector in this model's layout.
    pub fn product(&self, w: &[f64]) -> Vec<f64> {
        let ReducedRankConfig { n1, n2, h, .. } = self.cfg;
        let (a, b) = w.split_at(h * n1);
        matmul(b, a, n2, h, n1)
    }

    /// `(A₀, B₀)` zero-padded to the model rank; `None` when `H < H₀`.
    pub fn true_parameter(&self) -> Option<Vec<f64>> {
        let ReducedRankConfig { n1, n2, h, h0, .. } = self.cfg;
        if h < h0 {
            return None;
        }
        let mut w = vec![0.0; self.cfg.dim()];
        w[..h0 * n1].copy_from_slice(&self.cfg.a0);
        for i in 0..n2 {
            for k in 0..h0 {
                w[h * n1 + i * h + k] = self.cfg.b0[i * h0 + k];
            }
        }
        Some(w)
    }

    /// `K(w) = E_x₁‖(C − C₀)x₁‖²/(2σ²) = ‖C − C₀‖²_F/(2σ²)` for standard normal inputs.
    pub fn kl_divergence(&self, w: &[f64]) -> f64 {
        let c = self.product(w);
        c.iter()
            .zip(&self.truth.c0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            * self.truth.inv_two_var
    }
}

/// Builds the reduced rank regression model after validating the configuration.
pub fn make_reduced_rank(cfg: ReducedRankConfig) -> Result<ReducedRankModel> {
    cfg.validate()?;
    let c0 = matmul(&cfg.b0, &cfg.a0, cfg.n2, cfg.h0, cfg.n1);
    let var = cfg.sigma * cfg.sigma;
    let truth = RrrTruth {
        n1: cfg.n1,
        n2: cfg.n2,
        sigma: cfg.sigma,
        c0,
        log_norm: -0.5 * cfg.n2 as f64 * (2.0 * PI * var).ln(),
        inv_two_var: 0.5 / var,
    };
    Ok(ReducedRankModel { cfg, truth })
}

struct RrrBound<'a> {
    model: &'a ReducedRankModel,
    c: Vec<f64>,
}

impl BoundParameter for RrrBound<'_> {
    fn log_density(&self, x: &[f64]) -> f64 {
        let t = &self.model.truth;
        let (x1, x2) = x.split_at(t.n1);
        log_std_normal(x1) + t.log_norm - squared_residual(&self.c, x1, x2) * t.inv_two_var
    }

    fn log_density_ratio(&self, x: &[f64]) -> f64 {
        let t = &self.model.truth;
        let (x1, x2) = x.split_at(t.n1);
        (squared_residual(&self.c, x1, x2) - squared_residual(&t.c0, x1, x2)) * t.inv_two_var
    }
}

/// Sufficient statistics `Σx₁x₁ᵀ`, `Σx₂x₁ᵀ`, `Σ‖x₂‖²`.
struct RrrLikelihood<'a> {
    model: &'a ReducedRankModel,
    s11: Vec<f64>,
    s21: Vec<f64>,
    s22: f64,
    constant: f64,
}

impl<'a> RrrLikelihood<'a> {
    fn new(model: &'a ReducedRankModel, data: &Dataset) -> Self {
        let (n1, n2) = (model.cfg.n1, model.cfg.n2);
        let mut s11 = vec![0.0; n1 * n1];
        let mut s21 = vec![0.0; n2 * n1];
        let mut s22 = 0.0;
        let mut constant = 0.0;
        for x in data.iter() {
            let (x1, x2) = x.split_at(n1);
            for i in 0..n1 {
                for j in 0..n1 {
                    s11[i * n1 + j] += x1[i] * x1[j];
                }
            }
            for i in 0..n2 {
                for j in 0..n1 {
                    s21[i * n1 + j] += x2[i] * x1[j];
                }
                s22 += x2[i] * x2[i];
            }
            constant += log_std_normal(x1) + model.truth.log_norm;
        }
        Self {
            model,
            s11,
            s21,
            s22,
            constant,
        }
    }
}

impl DataLikelihood for RrrLikelihood<'_> {
    fn total(&self, w: &[f64]) -> f64 {
        let n1 = self.model.cfg.n1;
        let c = self.model.product(w);
        // Σ‖x₂ − Cx₁‖² = Σ‖x₂‖² − 2⟨C, S21⟩ + ⟨C·S11, C⟩
        let cs11 = matmul(&c, &self.s11, self.model.cfg.n2, n1, n1);
        let cross: f64 = c.iter().zip(&self.s21).map(|(a, b)| a * b).sum();
        let quad: f64 = c.iter().zip(&cs11).map(|(a, b)| a * b).sum();
        let rss = self.s22 - 2.0 * cross + quad;
        self.constant - rss * self.model.truth.inv_two_var
    }
}

impl Model for ReducedRankModel {
    fn name(&self) -> &str {
        "reduced_rank"
    }

    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn sample_dim(&self) -> usize {
        self.cfg.n1 + self.cfg.n2
    }

    fn log_density(&self, x: &[f64], w: &[f64]) -> f64 {
        self.bind(w).log_density(x)
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        -self.cfg.prior_scale * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let sd = (0.5 / self.cfg.prior_scale).sqrt();
        (0..self.dim()).map(|_| sd * standard_normal(rng)).collect()
    }

    fn truth(&self) -> Option<&dyn TrueDistribution> {
        Some(&self.truth)
    }

    fn log_density_ratio(&self, x: &[f64], w: &[f64]) -> Result<f64> {
        Ok(self.bind(w).log_density_ratio(x))
    }

    /// Balanced rank-H truncation of the least-squares fit `Ĉ = S21·S11⁻¹`,
    /// jittered on the posterior scale `σ/√n`.
    fn initial_point(&self, data: &Dataset, rng: &mut dyn RngCore) -> Vec<f64> {
        let ReducedRankConfig { n1, n2, h, .. } = self.cfg;
        let stats = RrrLikelihood::new(self, data);
        let s11 = DMatrix::from_row_slice(n1, n1, &stats.s11);
        let s21 = DMatrix::from_row_slice(n2, n1, &stats.s21);
        let Some(s11_inv) = s11.try_inverse() else {
            return self.sample_prior(rng);
        };
        let svd = (s21 * s11_inv).svd(true, true);
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            return self.sample_prior(rng);
        };
        let jitter = self.cfg.sigma / (data.n() as f64).sqrt();
        let mut w = vec![0.0; self.dim()];
        for k in 0..h {
            let root = svd.singular_values[k].sqrt();
            for j in 0..n1 {
                w[k * n1 + j] = root * v_t[(k, j)];
            }
            for i in 0..n2 {
                w[h * n1 + i * h + k] = root * u[(i, k)];
            }
        }
        for v in &mut w {
            *v += jitter * standard_normal(rng);
        }
        w
    }

    fn bind<'a>(&'a self, w: &'a [f64]) -> Box<dyn BoundParameter + 'a> {
        Box::new(RrrBound {
            model: self,
            c: self.product(w),
        })
    }

    fn likelihood<'a>(&'a self, data: &'a Dataset) -> Box<dyn DataLikelihood + 'a> {
        Box::new(RrrLikelihood::new(self, data))
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "type": "reduced_rank",
            "N1": self.cfg.n1,
            "N2": self.cfg.n2,
            "H": self.cfg.h,
            "H0": self.cfg.h0,
            "sigma": self.cfg.sigma,
            "prior_scale": self.cfg.prior_scale,
            "A0": self.cfg.a0,
            "B0": self.cfg.b0,
        })
    }
}
