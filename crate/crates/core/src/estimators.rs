//! Bayes and Gibbs errors and losses, functional variance, WAIC and the
//! learning-coefficient estimators, all computed from a posterior ensemble.
//!
//! Conventions, with `E_w` the ensemble average over `K` draws:
//!
//! ```text
//! BL_t = −(1/n) Σⱼ log E_w[p(Xⱼ|w)]        B_t = (1/n) Σⱼ −log E_w[e^{−f(Xⱼ,w)}]
//! GL_t = −(1/n) Σⱼ E_w[log p(Xⱼ|w)]        G_t = (1/n) Σⱼ E_w[f(Xⱼ,w)]
//! V    = (1/n) Σⱼ Var_w[log p(Xⱼ|w)]
//! ```
//!
//! Generalization quantities replace the training average by a held-out
//! Monte Carlo test set. Errors are evaluated through `f(x, w)` directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{require_truth, BoundParameter, Dataset, Model};
use crate::posterior::PosteriorEnsemble;

/// `log((1/K) Σ exp(vₖ))`, stabilized by the maximum.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance, two-pass and shifted by the first value so that a
/// constant sequence gives exactly 0.
fn variance(values: &[f64]) -> f64 {
    let shift = values[0];
    let m = values.iter().map(|v| v - shift).sum::<f64>() / values.len() as f64;
    values
        .iter()
        .map(|v| (v - shift - m) * (v - shift - m))
        .sum::<f64>()
        / values.len() as f64
}

fn standard_error(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return f64::NAN;
    }
    (variance(values) * m as f64 / (m - 1) as f64 / m as f64).sqrt()
}

/// Per-(datum, draw) log densities and, when available, log density ratios.
/// Stored datum-major: entry `j*K + k`.
struct PointwiseTable {
    draws: usize,
    log_p: Vec<f64>,
    ratio: Option<Vec<f64>>,
}

impl PointwiseTable {
    fn build(
        ensemble: &PosteriorEnsemble,
        model: &dyn Model,
        data: &Dataset,
        with_ratio: bool,
    ) -> Result<Self> {
        let k = ensemble.len();
        let n = data.n();
        let mut log_p = vec![0.0; n * k];
        let mut ratio = with_ratio.then(|| vec![0.0; n * k]);
        for (d, w) in ensemble.draws.iter().enumerate() {
            let bound = model.bind(w);
            for (j, x) in data.iter().enumerate() {
                log_p[j * k + d] = bound.log_density(x);
                if let Some(r) = ratio.as_mut() {
                    r[j * k + d] = bound.log_density_ratio(x);
                }
            }
        }
        let table = Self {
            draws: k,
            log_p,
            ratio,
        };
        table.check_finite()?;
        Ok(table)
    }

    fn check_finite(&self) -> Result<()> {
        let bad = |v: &Vec<f64>| v.iter().position(|x| x.is_nan());
        if let Some(i) = bad(&self.log_p) {
            return Err(Error::Data(format!(
                "log density is NaN for datum {} under draw {}",
                i / self.draws,
                i % self.draws
            )));
        }
        if let Some(i) = self.ratio.as_ref().and_then(bad) {
            return Err(Error::Data(format!(
                "log density ratio is NaN for datum {} under draw {}",
                i / self.draws,
                i % self.draws
            )));
        }
        Ok(())
    }

    fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.log_p.chunks_exact(self.draws)
    }

    fn ratio_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.ratio
            .as_ref()
            .expect("table built with ratios")
            .chunks_exact(self.draws)
    }

    fn bayes_loss(&self) -> f64 {
        -mean(&self.rows().map(log_mean_exp).collect::<Vec<_>>())
    }

    fn gibbs_loss(&self) -> f64 {
        -mean(&self.log_p)
    }

    fn functional_variance(&self) -> f64 {
        mean(&self.rows().map(variance).collect::<Vec<_>>())
    }

    fn bayes_error(&self) -> f64 {
        mean(
            &self
                .ratio_rows()
                .map(bayes_pointwise_error)
                .collect::<Vec<_>>(),
        )
    }

    fn gibbs_error(&self) -> f64 {
        mean(self.ratio.as_ref().expect("table built with ratios"))
    }
}

/// `−log E_w[e^{−f}]` at one datum.
fn bayes_pointwise_error(ratios: &[f64]) -> f64 {
    let neg: Vec<f64> = ratios.iter().map(|f| -f).collect();
    -log_mean_exp(&neg)
}

fn check_nonempty(ensemble: &PosteriorEnsemble) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::Precondition("posterior ensemble is empty".into()));
    }
    Ok(())
}

fn check_provenance(ensemble: &PosteriorEnsemble, test: &Dataset) -> Result<()> {
    if test.seed() == ensemble.data_seed {
        return Err(Error::Provenance(format!(
            "test data has the same seed tag ({}) as the training data",
            test.seed()
        )));
    }
    Ok(())
}

/// `BL_t = −(1/n) Σⱼ log[(1/K) Σₖ p(xⱼ|wₖ)]`.
pub fn bayes_training_loss(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    data: &Dataset,
) -> Result<f64> {
    check_nonempty(ensemble)?;
    Ok(PointwiseTable::build(ensemble, model, data, false)?.bayes_loss())
}

/// `GL_t = −(1/nK) Σⱼ Σₖ log p(xⱼ|wₖ)`.
pub fn gibbs_training_loss(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    data: &Dataset,
) -> Result<f64> {
    check_nonempty(ensemble)?;
    Ok(PointwiseTable::build(ensemble, model, data, false)?.gibbs_loss())
}

/// `V = (1/n) Σⱼ Var_w[log p(xⱼ|w)]` with the population (`1/K`) variance.
pub fn functional_variance(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    data: &Dataset,
) -> Result<f64> {
    if ensemble.len() < 2 {
        return Err(Error::UndefinedVariance(
            "functional variance needs at least two draws".into(),
        ));
    }
    Ok(PointwiseTable::build(ensemble, model, data, false)?.functional_variance())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationLosses {
    pub bayes: f64,
    pub gibbs: f64,
    pub bayes_se: f64,
    pub gibbs_se: f64,
}

/// Monte Carlo `BL_g` and `GL_g` over an independent test set.
pub fn generalization_losses(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    test: &Dataset,
) -> Result<GeneralizationLosses> {
    check_provenance(ensemble, test)?;
    generalization_losses_unchecked(ensemble, model, test)
}

/// As [`generalization_losses`] without the provenance check.
pub fn generalization_losses_unchecked(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    test: &Dataset,
) -> Result<GeneralizationLosses> {
    check_nonempty(ensemble)?;
    let pass = TestPass::run(ensemble, model, test, false)?;
    Ok(GeneralizationLosses {
        bayes: mean(&pass.bayes_loss),
        gibbs: mean(&pass.gibbs_loss),
        bayes_se: standard_error(&pass.bayes_loss),
        gibbs_se: standard_error(&pass.gibbs_loss),
    })
}

/// Per-test-point Bayes/Gibbs losses and errors.
struct TestPass {
    bayes_loss: Vec<f64>,
    gibbs_loss: Vec<f64>,
    bayes_error: Vec<f64>,
    gibbs_error: Vec<f64>,
}

impl TestPass {
    fn run(
        ensemble: &PosteriorEnsemble,
        model: &dyn Model,
        test: &Dataset,
        with_ratio: bool,
    ) -> Result<Self> {
        let bound: Vec<Box<dyn BoundParameter + '_>> =
            ensemble.draws.iter().map(|w| model.bind(w)).collect();
        let m = test.n();
        let mut out = Self {
            bayes_loss: Vec::with_capacity(m),
            gibbs_loss: Vec::with_capacity(m),
            bayes_error: Vec::with_capacity(if with_ratio { m } else { 0 }),
            gibbs_error: Vec::with_capacity(if with_ratio { m } else { 0 }),
        };
        let mut log_p = vec![0.0; bound.len()];
        let mut neg_f = vec![0.0; bound.len()];
        for (i, x) in test.iter().enumerate() {
            for (k, b) in bound.iter().enumerate() {
                log_p[k] = b.log_density(x);
                if with_ratio {
                    neg_f[k] = -b.log_density_ratio(x);
                }
            }
            if log_p.iter().chain(neg_f.iter()).any(|v| v.is_nan()) {
                return Err(Error::Data(format!("NaN log density at test point {i}")));
            }
            out.bayes_loss.push(-log_mean_exp(&log_p));
            out.gibbs_loss.push(-mean(&log_p));
            if with_ratio {
                out.bayes_error.push(-log_mean_exp(&neg_f));
                out.gibbs_error.push(-mean(&neg_f));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourErrors {
    pub bg: f64,
    pub bt: f64,
    pub gg: f64,
    pub gt: f64,
    pub bg_se: f64,
    pub gg_se: f64,
}

/// Bayes/Gibbs generalization and training errors.
pub fn four_errors(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    data: &Dataset,
    test: &Dataset,
) -> Result<FourErrors> {
    require_truth(model)?;
    check_nonempty(ensemble)?;
    check_provenance(ensemble, test)?;
    let table = PointwiseTable::build(ensemble, model, data, true)?;
    let pass = TestPass::run(ensemble, model, test, true)?;
    Ok(FourErrors {
        bg: mean(&pass.bayes_error),
        bt: table.bayes_error(),
        gg: mean(&pass.gibbs_error),
        gt: table.gibbs_error(),
        bg_se: standard_error(&pass.bayes_error),
        gg_se: standard_error(&pass.gibbs_error),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    /// `BL_t + 2β(GL_t − BL_t)`
    pub waic1: f64,
    /// `GL_t + 2β(GL_t − BL_t)`
    pub waic2: f64,
    /// `BL_t + βV`
    pub waic1_variance_form: f64,
    /// `GL_t + βV`
    pub waic2_variance_form: f64,
}

pub fn waic(blt: f64, glt: f64, v: f64, beta: f64) -> Result<Waic> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::Precondition(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let gap = 2.0 * beta * (glt - blt);
    Ok(Waic {
        waic1: blt + gap,
        waic2: glt + gap,
        waic1_variance_form: blt + beta * v,
        waic2_variance_form: glt + beta * v,
    })
}

/// `BL_t − GL_t + V/2`: magnitude of the departure from the asymptotic theory.
pub fn waic3(blt: f64, glt: f64, v: f64) -> f64 {
    blt - glt + 0.5 * v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaNu {
    /// `β n (G_g + G_t) / 2`
    pub lambda_hat: f64,
    /// `β (n G_t + ν̂/β)`, from `E[G_t*] = λ/β − ν`; needs no test set.
    pub lambda_hat_train: f64,
    /// `β n (G_t − B_t)`
    pub nu_hat: f64,
}

pub fn lambda_nu_hat(bt: f64, gt: f64, gg: f64, beta: f64, n: usize) -> Result<LambdaNu> {
    if n == 0 || beta.is_nan() || beta <= 0.0 {
        return Err(Error::Precondition(format!(
            "need n ≥ 1 and beta > 0, got n={n}, beta={beta}"
        )));
    }
    let n = n as f64;
    let nu_hat = beta * n * (gt - bt);
    Ok(LambdaNu {
        lambda_hat: beta * n * (gg + gt) / 2.0,
        lambda_hat_train: beta * n * gt + beta * nu_hat,
        nu_hat,
    })
}

/// The linear map taking `(E[B_t*], E[G_t*])` to `(E[B_g*], E[G_g*])`.
pub fn corollary_matrix(beta: f64) -> [[f64; 2]; 2] {
    let tb = 2.0 * beta;
    [[1.0 - tb, tb], [-tb, 1.0 + tb]]
}

/// Predicted `(B_g, G_g)` from `(B_t, G_t)`; inputs in the same (×n) units.
pub fn predict_generalization(bt: f64, gt: f64, beta: f64) -> (f64, f64) {
    let m = corollary_matrix(beta);
    (m[0][0] * bt + m[0][1] * gt, m[1][0] * bt + m[1][1] * gt)
}

/// One trial's worth of estimates. Field names follow the report schema.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n: usize,
    pub beta: f64,
    pub Bg: f64,
    pub Bt: f64,
    pub Gg: f64,
    pub Gt: f64,
    pub BLg: f64,
    pub BLt: f64,
    pub GLg: f64,
    pub GLt: f64,
    pub V: f64,
    pub waic1: f64,
    pub waic1_variance_form: f64,
    pub waic2: f64,
    pub waic3: f64,
    pub lambda_hat: f64,
    pub lambda_hat_train: f64,
    pub nu_hat: f64,
    pub mc_se_Bg: f64,
    pub mc_se_Gg: f64,
    /// `−(1/n) Σⱼ log q(Xⱼ)` on the training data.
    pub entropy_train: f64,
    /// `waic1 − entropy_train`, comparable with `Bg`.
    pub waic1_excess: f64,
    pub accept_rate: f64,
    pub warnings: String,
}

impl ErrorReport {
    /// Names of the numeric fields, in serialization order.
    pub const METRICS: [&'static str; 21] = [
        "Bg",
        "Bt",
        "Gg",
        "Gt",
        "BLg",
        "BLt",
        "GLg",
        "GLt",
        "V",
        "waic1",
        "waic1_variance_form",
        "waic2",
        "waic3",
        "lambda_hat",
        "lambda_hat_train",
        "nu_hat",
        "mc_se_Bg",
        "mc_se_Gg",
        "entropy_train",
        "waic1_excess",
        "accept_rate",
    ];

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "Bg" => self.Bg,
            "Bt" => self.Bt,
            "Gg" => self.Gg,
            "Gt" => self.Gt,
            "BLg" => self.BLg,
            "BLt" => self.BLt,
            "GLg" => self.GLg,
            "GLt" => self.GLt,
            "V" => self.V,
            "waic1" => self.waic1,
            "waic1_variance_form" => self.waic1_variance_form,
            "waic2" => self.waic2,
            "waic3" => self.waic3,
            "lambda_hat" => self.lambda_hat,
            "lambda_hat_train" => self.lambda_hat_train,
            "nu_hat" => self.nu_hat,
            "mc_se_Bg" => self.mc_se_Bg,
            "mc_se_Gg" => self.mc_se_Gg,
            "entropy_train" => self.entropy_train,
            "waic1_excess" => self.waic1_excess,
            "accept_rate" => self.accept_rate,
            _ => return None,
        })
    }
}

/// All estimates for one ensemble in two passes (training, test).
pub fn evaluate(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    data: &Dataset,
    test: &Dataset,
) -> Result<ErrorReport> {
    let truth = require_truth(model)?;
    check_nonempty(ensemble)?;
    check_provenance(ensemble, test)?;
    let beta = ensemble.beta;
    let n = data.n();

    let table = PointwiseTable::build(ensemble, model, data, true)?;
    let blt = table.bayes_loss();
    let glt = table.gibbs_loss();
    let v = if ensemble.len() >= 2 {
        table.functional_variance()
    } else {
        0.0
    };
    let bt = table.bayes_error();
    let gt = table.gibbs_error();

    let pass = TestPass::run(ensemble, model, test, true)?;
    let bg = mean(&pass.bayes_error);
    let gg = mean(&pass.gibbs_error);

    let w = waic(blt, glt, v, beta)?;
    let ln = lambda_nu_hat(bt, gt, gg, beta, n)?;
    let entropy = -data.iter().map(|x| truth.log_density(x)).sum::<f64>() / n as f64;

    Ok(ErrorReport {
        n,
        beta,
        Bg: bg,
        Bt: bt,
        Gg: gg,
        Gt: gt,
        BLg: mean(&pass.bayes_loss),
        BLt: blt,
        GLg: mean(&pass.gibbs_loss),
        GLt: glt,
        V: v,
        waic1: w.waic1,
        waic1_variance_form: w.waic1_variance_form,
        waic2: w.waic2,
        waic3: waic3(blt, glt, v),
        lambda_hat: ln.lambda_hat,
        lambda_hat_train: ln.lambda_hat_train,
        nu_hat: ln.nu_hat,
        mc_se_Bg: standard_error(&pass.bayes_error),
        mc_se_Gg: standard_error(&pass.gibbs_error),
        entropy_train: entropy,
        waic1_excess: w.waic1 - entropy,
        accept_rate: ensemble.accept_rate,
        warnings: ensemble
            .warnings
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("; "),
    })
}

/// Truth-free training summary, the quantities a practitioner can compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n: usize,
    pub beta: f64,
    pub blt: f64,
    pub glt: f64,
    pub v: f64,
    pub waic: Waic,
    pub waic3: f64,
    /// `β n (GL_t − BL_t)`, equal to `β n (G_t − B_t)`.
    pub nu_hat: f64,
}

pub fn training_summary(
    ensemble: &PosteriorEnsemble,
    model: &dyn Model,
    data: &Dataset,
) -> Result<TrainingSummary> {
    check_nonempty(ensemble)?;
    let beta = ensemble.beta;
    let table = PointwiseTable::build(ensemble, model, data, false)?;
    let blt = table.bayes_loss();
    let glt = table.gibbs_loss();
    let v = if ensemble.len() >= 2 {
        table.functional_variance()
    } else {
        0.0
    };
    Ok(TrainingSummary {
        n: data.n(),
        beta,
        blt,
        glt,
        v,
        waic: waic(blt, glt, v, beta)?,
        waic3: waic3(blt, glt, v),
        nu_hat: beta * data.n() as f64 * (glt - blt),
    })
}
