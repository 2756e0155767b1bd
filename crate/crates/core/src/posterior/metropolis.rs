use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dim, Dataset, Model, ParameterVector};

/// Accepted steps between full recomputations of the cached log posterior.
const REFRESH_EVERY: u64 = 1000;
/// Robbins–Monro gain exponent; gains `(t+1)^-0.6` diminish during burn-in.
const ADAPT_EXPONENT: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub keep: usize,
    pub step_scale: f64,
    pub adapt: bool,
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    /// 5000 burn-in steps, then one draw every 200 steps until 2000 are kept.
    fn default() -> Self {
        Self {
            burn_in: 5000,
            thin: 200,
            keep: 2000,
            step_scale: 0.01,
            adapt: true,
            target_accept: 0.30,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("mcmc.thin must be at least 1".into()));
        }
        if self.keep == 0 {
            return Err(Error::Config("mcmc.keep must be at least 1".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::Config(format!(
                "mcmc.step_scale must be positive, got {}",
                self.step_scale
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "mcmc.target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.burn_in + self.thin * self.keep
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplerWarning {
    LowAcceptance(f64),
    HighAcceptance(f64),
}

impl std::fmt::Display for SamplerWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplerWarning::LowAcceptance(r) => write!(f, "acceptance rate {r:.4} below 0.01"),
            SamplerWarning::HighAcceptance(r) => write!(f, "acceptance rate {r:.4} above 0.99"),
        }
    }
}

/// Draws approximating the tempered posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub draws: Vec<ParameterVector>,
    pub beta: f64,
    /// Acceptance fraction over the post-burn-in steps.
    pub accept_rate: f64,
    /// Unnormalized `log φ(w) + β Σ log p(xᵢ|w)` of each retained draw.
    pub log_post_trace: Vec<f64>,
    pub config: McmcConfig,
    /// Step scale in effect after burn-in adaptation.
    pub final_step_scale: f64,
    /// Seed tag of the training data the chain conditioned on.
    pub data_seed: u64,
    pub warnings: Vec<SamplerWarning>,
}

impl PosteriorEnsemble {
    /// Builds an ensemble from explicit draws (e.g. exact posterior samples).
    pub fn from_draws(draws: Vec<ParameterVector>, beta: f64, data_seed: u64) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Precondition(
                "an ensemble needs at least one draw".into(),
            ));
        }
        let k = draws.len();
        Ok(Self {
            draws,
            beta,
            accept_rate: 1.0,
            log_post_trace: vec![f64::NAN; k],
            config: McmcConfig {
                burn_in: 0,
                thin: 1,
                keep: k,
                ..McmcConfig::default()
            },
            final_step_scale: f64::NAN,
            data_seed,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Writes one row per draw (`w1..wd`) and a JSON sidecar with beta,
    /// configuration and acceptance rate.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let d = self.draws[0].len();
        let header: Vec<String> = (1..=d).map(|i| format!("w{i}")).collect();
        writer.write_record(&header)?;
        for w in &self.draws {
            writer.write_record(w.iter().map(|v| v.to_string()))?;
        }
        writer.flush()?;
        let meta = serde_json::json!({
            "beta": self.beta,
            "accept_rate": self.accept_rate,
            "final_step_scale": self.final_step_scale,
            "data_seed": self.data_seed,
            "config": self.config,
            "warnings": self.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        });
        let mut name = path.as_os_str().to_owned();
        name.push(".meta.json");
        std::fs::write(
            std::path::PathBuf::from(name),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        Ok(())
    }
}

/// Random-walk Metropolis with an isotropic Gaussian proposal on the whole
/// parameter vector. When `cfg.adapt` is set the log step size follows a
/// Robbins–Monro recursion toward `cfg.target_accept` during burn-in and is
/// frozen afterwards.
pub fn metropolis_sample(
    model: &dyn Model,
    data: &Dataset,
    beta: f64,
    cfg: &McmcConfig,
) -> Result<PosteriorEnsemble> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Precondition(format!(
            "beta must be positive, got {beta}"
        )));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let likelihood = model.likelihood(data);
    let log_post = |w: &[f64]| -> f64 {
        let prior = model.log_prior(w);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        prior + beta * likelihood.total(w)
    };

    let mut state = model.initial_point(data, &mut rng);
    check_dim(model, &state)?;
    let mut current = log_post(&state);
    if !current.is_finite() {
        return Err(Error::Initialization(format!(
            "log posterior at the initial point is {current}"
        )));
    }

    let d = state.len();
    let mut log_step = cfg.step_scale.ln();
    let mut proposal = vec![0.0; d];
    let mut draws = Vec::with_capacity(cfg.keep);
    let mut trace = Vec::with_capacity(cfg.keep);
    let mut accepted_after_burn_in = 0usize;
    let mut accepted_total = 0u64;

    for t in 0..cfg.total_steps() {
        let step = log_step.exp();
        for (p, s) in proposal.iter_mut().zip(&state) {
            let z: f64 = rng.sample(StandardNormal);
            *p = s + step * z;
        }
        let candidate = log_post(&proposal);
        let u: f64 = rng.random();
        // NaN candidates compare false and are rejected.
        let accept = u.ln() < candidate - current;
        if accept {
            std::mem::swap(&mut state, &mut proposal);
            current = candidate;
            accepted_total += 1;
            if accepted_total.is_multiple_of(REFRESH_EVERY) {
                current = log_post(&state);
            }
        }
        if t < cfg.burn_in {
            if cfg.adapt {
                let gain = (t as f64 + 1.0).powf(-ADAPT_EXPONENT);
                log_step += gain * (f64::from(u8::from(accept)) - cfg.target_accept);
            }
        } else {
            if accept {
                accepted_after_burn_in += 1;
            }
            if (t - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
                draws.push(ParameterVector::new(state.clone())?);
                trace.push(current);
            }
        }
    }

    let accept_rate = accepted_after_burn_in as f64 / (cfg.thin * cfg.keep) as f64;
    let mut warnings = Vec::new();
    if accept_rate < 0.01 {
        warnings.push(SamplerWarning::LowAcceptance(accept_rate));
    } else if accept_rate > 0.99 {
        warnings.push(SamplerWarning::HighAcceptance(accept_rate));
    }

    Ok(PosteriorEnsemble {
        draws,
        beta,
        accept_rate,
        log_post_trace: trace,
        config: cfg.clone(),
        final_step_scale: log_step.exp(),
        data_seed: data.seed(),
        warnings,
    })
}
