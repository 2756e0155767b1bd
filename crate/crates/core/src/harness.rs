//! Config-driven experiments: repeated trials, aggregation and report files.
//!
//! Configs are TOML with dotted keys, e.g.
//!
//! ```toml
//! n = 500
//! beta = 1.0
//! trials = 25
//! master_seed = 1
//! output_dir = "out/h3"
//!
//! [model]
//! type = "reduced_rank"
//! N1 = 6
//! N2 = 6
//! H = 3
//! H0 = 3
//! sigma = 0.1
//! prior_scale = 2e-5
//!
//! [mcmc]
//! burn_in = 5000
//! thin = 200
//! keep = 2000
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{evaluate, ErrorReport};
use crate::model::{sample_dataset, Model};
use crate::posterior::{metropolis_sample, McmcConfig};
use crate::theory::rrr_learning_coefficient;
use crate::zoo::{
    make_bernoulli_beta, make_reduced_rank, make_regular_gaussian, BernoulliBetaConfig,
    ReducedRankConfig, RegularGaussianConfig,
};

pub const DEFAULT_TEST_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    ReducedRank(ReducedRankConfig),
    RegularGaussian(RegularGaussianConfig),
    BernoulliBeta(BernoulliBetaConfig),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn Model>> {
        Ok(match self {
            ModelSpec::ReducedRank(c) => Box::new(make_reduced_rank(c.clone())?),
            ModelSpec::RegularGaussian(c) => Box::new(make_regular_gaussian(c.clone())?),
            ModelSpec::BernoulliBeta(c) => Box::new(make_bernoulli_beta(c.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub test_size: usize,
    pub beta: f64,
    pub trials: usize,
    /// `mcmc.seed` is ignored; each trial derives its own.
    pub mcmc: McmcConfig,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
}

/// Stream identifiers mixed into per-trial seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Train = 1,
    Test = 2,
    Mcmc = 3,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(master ⊕ splitmix64(trial)) ⊕ stream)`.
pub fn trial_seed(master_seed: u64, trial_index: usize, stream: SeedStream) -> u64 {
    let trial = splitmix64(master_seed ^ splitmix64(trial_index as u64));
    splitmix64(trial ^ stream as u64)
}

type Flat = BTreeMap<String, toml::Value>;

fn flatten(prefix: &str, table: &toml::Table, out: &mut Flat) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses `key=value`; the value is TOML, or a bare string if it is not.
fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))?;
    let key = key.trim().to_string();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{raw}` has an empty key")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

struct Keys {
    flat: Flat,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.flat.remove(key)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(f)),
            Some(toml::Value::Integer(i)) => Ok(Some(i as f64)),
            Some(other) => Err(type_error(key, "a number", &other)),
        }
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(other) => Err(type_error(key, "a non-negative integer", &other)),
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        Ok(self.uint(key)?.map(|v| v as usize))
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(b)),
            Some(other) => Err(type_error(key, "a boolean", &other)),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(type_error(key, "a string", &other)),
        }
    }

    /// A numeric array, flattening one level of nesting (matrix rows).
    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        fn push(key: &str, v: &toml::Value, out: &mut Vec<f64>, depth: usize) -> Result<()> {
            match v {
                toml::Value::Float(f) => out.push(*f),
                toml::Value::Integer(i) => out.push(*i as f64),
                toml::Value::Array(items) if depth < 2 => {
                    for item in items {
                        push(key, item, out, depth + 1)?;
                    }
                }
                other => return Err(type_error(key, "a numeric array", other)),
            }
            Ok(())
        }
        match &v {
            toml::Value::Array(_) => push(key, &v, &mut out, 0)?,
            other => return Err(type_error(key, "a numeric array", other)),
        }
        Ok(Some(out))
    }

    fn required<T>(key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn finish(self) -> Result<()> {
        match self.flat.into_keys().next() {
            Some(k) => Err(Error::UnknownKey(k)),
            None => Ok(()),
        }
    }
}

fn type_error(key: &str, expected: &str, got: &toml::Value) -> Error {
    Error::Config(format!("`{key}` must be {expected}, got `{got}`"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        let mut flat = Flat::new();
        flatten("", &table, &mut flat);
        for raw in overrides {
            let (k, v) = parse_override(raw)?;
            flat.insert(k, v);
        }
        Self::from_flat(flat)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides)
    }

    fn from_flat(flat: Flat) -> Result<Self> {
        let mut k = Keys { flat };
        let defaults = McmcConfig::default();
        let mcmc = McmcConfig {
            burn_in: k.usize("mcmc.burn_in")?.unwrap_or(defaults.burn_in),
            thin: k.usize("mcmc.thin")?.unwrap_or(defaults.thin),
            keep: k.usize("mcmc.keep")?.unwrap_or(defaults.keep),
            step_scale: k.float("mcmc.step_scale")?.unwrap_or(defaults.step_scale),
            adapt: k.boolean("mcmc.adapt")?.unwrap_or(defaults.adapt),
            target_accept: k
                .float("mcmc.target_accept")?
                .unwrap_or(defaults.target_accept),
            seed: 0,
        };
        let master_seed = k.uint("master_seed")?.unwrap_or(0);
        let model = Self::model_from_keys(&mut k, master_seed)?;
        let cfg = Self {
            n: Keys::required("n", k.usize("n")?)?,
            test_size: k.usize("test_size")?.unwrap_or(DEFAULT_TEST_SIZE),
            beta: k.float("beta")?.unwrap_or(1.0),
            trials: k.usize("trials")?.unwrap_or(1),
            output_dir: k.string("output_dir")?.map(PathBuf::from),
            mcmc,
            master_seed,
            model,
        };
        k.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn model_from_keys(k: &mut Keys, master_seed: u64) -> Result<ModelSpec> {
        let kind = Keys::required("model.type", k.string("model.type")?)?;
        match kind.as_str() {
            "reduced_rank" => {
                let n1 = Keys::required("model.N1", k.usize("model.N1")?)?;
                let n2 = Keys::required("model.N2", k.usize("model.N2")?)?;
                let h = Keys::required("model.H", k.usize("model.H")?)?;
                let h0 = Keys::required("model.H0", k.usize("model.H0")?)?;
                let sigma = k.float("model.sigma")?.unwrap_or(0.1);
                let prior_scale = k.float("model.prior_scale")?.unwrap_or(2e-5);
                let truth_seed = k.uint("model.truth_seed")?.unwrap_or(master_seed);
                let a0 = k.floats("model.A0")?;
                let b0 = k.floats("model.B0")?;
                let cfg = match (a0, b0) {
                    (Some(a0), Some(b0)) => {
                        let cfg = ReducedRankConfig {
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
                        cfg
                    }
                    (None, None) => {
                        ReducedRankConfig::with_random_truth(n1, n2, h, h0, sigma, prior_scale, truth_seed)?
                    }
                    _ => {
                        return Err(Error::Config(
                            "model.A0 and model.B0 must be given together".into(),
                        ))
                    }
                };
                Ok(ModelSpec::ReducedRank(cfg))
            }
            "regular_gaussian" => {
                let d = Keys::required("model.d", k.usize("model.d")?)?;
                let sigma = k.float("model.sigma")?.unwrap_or(1.0);
                let prior_scale = k.float("model.prior_scale")?.unwrap_or(1e-3);
                let mu0 = k.floats("model.mu0")?.unwrap_or_else(|| vec![0.0; d]);
                let true_sigma = k.float("model.true_sigma")?;
                let cfg = RegularGaussianConfig {
                    d,
                    sigma,
                    mu0,
                    prior_scale,
                    true_sigma,
                };
                cfg.validate()?;
                Ok(ModelSpec::RegularGaussian(cfg))
            }
            "bernoulli_beta" => {
                let cfg = BernoulliBetaConfig {
                    p0: Keys::required("model.p0", k.float("model.p0")?)?,
                    a0: k.float("model.a0")?.unwrap_or(1.0),
                    b0: k.float("model.b0")?.unwrap_or(1.0),
                };
                cfg.validate()?;
                Ok(ModelSpec::BernoulliBeta(cfg))
            }
            other => Err(Error::Config(format!(
                "unknown model.type `{other}` (expected reduced_rank, regular_gaussian or bernoulli_beta)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.test_size == 0 {
            return Err(Error::Config("test_size must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.mcmc.validate()
    }

    pub fn seed(&self, trial_index: usize, stream: SeedStream) -> u64 {
        trial_seed(self.master_seed, trial_index, stream)
    }
}

/// Runs one trial: fresh training and test sets, one chain, one report.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: usize) -> Result<ErrorReport> {
    let model = cfg.model.build()?;
    run_trial_with(cfg, model.as_ref(), trial_index)
}

fn run_trial_with(
    cfg: &ExperimentConfig,
    model: &dyn Model,
    trial_index: usize,
) -> Result<ErrorReport> {
    let train = sample_dataset(model, cfg.n, cfg.seed(trial_index, SeedStream::Train))?;
    let test = sample_dataset(
        model,
        cfg.test_size,
        cfg.seed(trial_index, SeedStream::Test),
    )?;
    let mcmc = McmcConfig {
        seed: cfg.seed(trial_index, SeedStream::Mcmc),
        ..cfg.mcmc.clone()
    };
    let ensemble = metropolis_sample(model, &train, cfg.beta, &mcmc)?;
    evaluate(&ensemble, model, &train, &test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation across trials; 0 for a single trial.
    pub std: f64,
    /// `std / √trials`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentAggregate {
    pub trials: usize,
    pub single_trial: bool,
    pub failures: Vec<TrialFailure>,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub config: ExperimentConfig,
    #[serde(skip)]
    pub reports: Vec<ErrorReport>,
}

impl ExperimentAggregate {
    pub fn from_reports(
        config: ExperimentConfig,
        reports: Vec<ErrorReport>,
        failures: Vec<TrialFailure>,
    ) -> Self {
        let t = reports.len();
        let metrics = ErrorReport::METRICS
            .iter()
            .map(|&name| {
                let values: Vec<f64> = reports
                    .iter()
                    .map(|r| r.metric(name).expect("known metric"))
                    .collect();
                (name.to_string(), summarize(&values))
            })
            .collect();
        Self {
            trials: t,
            single_trial: t == 1,
            failures,
            metrics,
            config,
            reports,
        }
    }

    pub fn mean(&self, metric: &str) -> f64 {
        self.metrics.get(metric).map_or(f64::NAN, |m| m.mean)
    }

    pub fn std(&self, metric: &str) -> f64 {
        self.metrics.get(metric).map_or(f64::NAN, |m| m.std)
    }

    pub fn se(&self, metric: &str) -> f64 {
        self.metrics.get(metric).map_or(f64::NAN, |m| m.se)
    }

    /// Writes `trials.csv`, `aggregate.csv` and `aggregate.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut trials = csv::Writer::from_path(dir.join("trials.csv"))?;
        for r in &self.reports {
            trials.serialize(r)?;
        }
        trials.flush()?;

        let mut agg = csv::Writer::from_path(dir.join("aggregate.csv"))?;
        agg.write_record(["metric", "mean", "std", "se"])?;
        for (name, m) in &self.metrics {
            agg.write_record([
                name.clone(),
                m.mean.to_string(),
                m.std.to_string(),
                m.se.to_string(),
            ])?;
        }
        agg.flush()?;

        let mut json = BufWriter::new(File::create(dir.join("aggregate.json"))?);
        serde_json::to_writer_pretty(&mut json, self)?;
        json.write_all(b"\n")?;
        Ok(())
    }
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    let t = values.len();
    if t == 0 {
        return MetricSummary {
            mean: f64::NAN,
            std: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    let std = if t > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64).sqrt()
    } else {
        0.0
    };
    MetricSummary {
        mean,
        std,
        se: std / (t as f64).sqrt(),
    }
}

/// Runs every trial (in parallel), aggregates the completed ones and writes
/// the report files when `output_dir` is set. Fails only if no trial completes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentAggregate> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let outcomes: Vec<Result<ErrorReport>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial_with(cfg, model.as_ref(), i))
        .collect();
    let mut reports = Vec::with_capacity(cfg.trials);
    let mut failures = Vec::new();
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(TrialFailure {
                trial,
                error: e.to_string(),
            }),
        }
    }
    if reports.is_empty() {
        return Err(Error::Data(format!(
            "all {} trials failed; first error: {}",
            cfg.trials, failures[0].error
        )));
    }
    let agg = ExperimentAggregate::from_reports(cfg.clone(), reports, failures);
    if let Some(dir) = &cfg.output_dir {
        agg.write(dir)?;
    }
    Ok(agg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    pub se: f64,
    pub passed: bool,
}

impl Residual {
    fn from_values(values: &[f64]) -> Self {
        let s = summarize(values);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let allowance = if s.se > 0.0 {
            3.0 * s.se
        } else {
            1e-12 * scale
        };
        Self {
            value: s.mean,
            se: s.se,
            passed: s.mean.abs() <= allowance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEquationCheck {
    /// `mean(B_g − B_t) − 2β·mean(G_t − B_t)`
    pub bayes: Residual,
    /// `mean(G_g − G_t) − 2β·mean(G_t − B_t)`
    pub gibbs: Residual,
    /// `mean[(G_g − B_g) − (G_t − B_t)]`
    pub conservation: Residual,
}

impl StateEquationCheck {
    pub fn all_passed(&self) -> bool {
        self.bayes.passed && self.gibbs.passed && self.conservation.passed
    }
}

pub fn verify_state_equations(agg: &ExperimentAggregate, beta: f64) -> Result<StateEquationCheck> {
    verify_reports(&agg.reports, beta)
}

/// State-equation residuals over per-trial reports; the SE of each residual is
/// the across-trial standard error of its per-trial value.
pub fn verify_reports(reports: &[ErrorReport], beta: f64) -> Result<StateEquationCheck> {
    if reports.len() < 2 {
        return Err(Error::Precondition(format!(
            "state equations need at least 2 trials, got {}",
            reports.len()
        )));
    }
    let per = |f: &dyn Fn(&ErrorReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let gap = |r: &ErrorReport| 2.0 * beta * (r.Gt - r.Bt);
    Ok(StateEquationCheck {
        bayes: Residual::from_values(&per(&|r| (r.Bg - r.Bt) - gap(r))),
        gibbs: Residual::from_values(&per(&|r| (r.Gg - r.Gt) - gap(r))),
        conservation: Residual::from_values(&per(&|r| (r.Gg - r.Bg) - (r.Gt - r.Bt))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    #[serde(rename = "H")]
    pub h: usize,
    /// Empty when the model cannot realize the truth.
    pub theory_lambda_over_n: Option<f64>,
    #[serde(rename = "mean_Bg")]
    pub mean_bg: f64,
    #[serde(rename = "std_Bg")]
    pub std_bg: f64,
    #[serde(rename = "mean_WAIC1_excess")]
    pub mean_waic1_excess: f64,
    #[serde(rename = "std_WAIC1_excess")]
    pub std_waic1_excess: f64,
}

#[derive(Debug, Clone)]
pub struct Table1Result {
    pub rows: Vec<Table1Row>,
    pub aggregates: Vec<ExperimentAggregate>,
}

/// Runs a reduced rank experiment for each model rank in `ranks`, all sharing
/// the base config's truth. Per-rank outputs go to `<output_dir>/H<h>/`, and
/// the summary to `<output_dir>/table1.csv`.
pub fn run_table1(base: &ExperimentConfig, ranks: &[usize]) -> Result<Table1Result> {
    let ModelSpec::ReducedRank(rr) = &base.model else {
        return Err(Error::Config(
            "table1 needs model.type = \"reduced_rank\"".into(),
        ));
    };
    let mut rows = Vec::with_capacity(ranks.len());
    let mut aggregates = Vec::with_capacity(ranks.len());
    for &h in ranks {
        let mut model = rr.clone();
        model.h = h;
        let cfg = ExperimentConfig {
            model: ModelSpec::ReducedRank(model.clone()),
            output_dir: base.output_dir.as_ref().map(|d| d.join(format!("H{h}"))),
            ..base.clone()
        };
        let agg = run_experiment(&cfg)?;
        let theory = match rrr_learning_coefficient(model.n1, model.n2, model.h0, h) {
            Ok(l) => Some(l / base.n as f64),
            Err(Error::Unsupported(_)) | Err(Error::OutOfRegime(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(Table1Row {
            h,
            theory_lambda_over_n: theory,
            mean_bg: agg.mean("Bg"),
            std_bg: agg.std("Bg"),
            mean_waic1_excess: agg.mean("waic1_excess"),
            std_waic1_excess: agg.std("waic1_excess"),
        });
        aggregates.push(agg);
    }
    if let Some(dir) = &base.output_dir {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("table1.csv"))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(Table1Result { rows, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::regular_reference;

    const COIN: &str = r#"
        n = 20
        test_size = 1000
        trials = 3
        master_seed = 9
        [model]
        type = "bernoulli_beta"
        p0 = 0.3
        [mcmc]
        burn_in = 500
        thin = 2
        keep = 500
        step_scale = 0.2
    "#;

    fn overrides(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_config_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(COIN, &[]).unwrap();
        assert_eq!(cfg.n, 20);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.mcmc.keep, 500);
        assert_eq!(cfg.mcmc.target_accept, McmcConfig::default().target_accept);
        assert!(matches!(cfg.model, ModelSpec::BernoulliBeta(ref c) if c.p0 == 0.3 && c.a0 == 1.0));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml_str(COIN, &overrides(&["model.Nx=3"])).unwrap_err();
        assert!(
            matches!(err, Error::UnknownKey(ref k) if k == "model.Nx"),
            "{err}"
        );
        let err = ExperimentConfig::from_toml_str(&format!("{COIN}\nbogus = 1"), &[]).unwrap_err();
        assert!(matches!(err, Error::UnknownKey(ref k) if k == "mcmc.bogus"));
    }

    #[test]
    fn overrides_replace_values() {
        let cfg = ExperimentConfig::from_toml_str(
            COIN,
            &overrides(&["beta=0.5", "mcmc.adapt=false", "output_dir=out/x"]),
        )
        .unwrap();
        assert_eq!(cfg.beta, 0.5);
        assert!(!cfg.mcmc.adapt);
        assert_eq!(cfg.output_dir, Some(PathBuf::from("out/x")));
        assert!(matches!(
            ExperimentConfig::from_toml_str(COIN, &overrides(&["trials"])),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str(COIN, &overrides(&["trials=0"])),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str(COIN, &overrides(&["n=\"many\""])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reduced_rank_truth_from_seed_or_matrices() {
        let text = r#"
            n = 50
            [model]
            type = "reduced_rank"
            N1 = 3
            N2 = 2
            H = 2
            H0 = 1
        "#;
        let a = ExperimentConfig::from_toml_str(text, &overrides(&["model.truth_seed=4"])).unwrap();
        let b = ExperimentConfig::from_toml_str(text, &overrides(&["model.truth_seed=4"])).unwrap();
        assert_eq!(a, b);
        let explicit = ExperimentConfig::from_toml_str(
            text,
            &overrides(&["model.A0=[[1.0, 0.0, 0.0]]", "model.B0=[[1.0], [0.5]]"]),
        )
        .unwrap();
        let ModelSpec::ReducedRank(rr) = explicit.model else {
            panic!()
        };
        assert_eq!(rr.a0, vec![1.0, 0.0, 0.0]);
        assert_eq!(rr.b0, vec![1.0, 0.5]);
        assert!(
            ExperimentConfig::from_toml_str(text, &overrides(&["model.A0=[1.0, 0.0, 0.0]"]))
                .is_err()
        );
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let s = |t, st| trial_seed(7, t, st);
        assert_eq!(s(3, SeedStream::Train), trial_seed(7, 3, SeedStream::Train));
        let all = [
            s(0, SeedStream::Train),
            s(0, SeedStream::Test),
            s(0, SeedStream::Mcmc),
            s(1, SeedStream::Train),
        ];
        for i in 0..all.len() {
            for j in 0..i {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = ExperimentConfig::from_toml_str(COIN, &[]).unwrap();
        assert_eq!(run_trial(&cfg, 1).unwrap(), run_trial(&cfg, 1).unwrap());
        assert_ne!(run_trial(&cfg, 1).unwrap(), run_trial(&cfg, 2).unwrap());
    }

    #[test]
    fn single_trial_has_zero_std() {
        let cfg = ExperimentConfig::from_toml_str(COIN, &overrides(&["trials=1"])).unwrap();
        let agg = run_experiment(&cfg).unwrap();
        assert!(agg.single_trial);
        assert_eq!(agg.std("Bg"), 0.0);
        assert!(verify_state_equations(&agg, 1.0).is_err());
    }

    #[test]
    fn aggregate_mean_is_exact_and_files_reproduce() {
        let dir = tempfile::tempdir().unwrap();
        let out = |sub: &str| {
            let path = dir.path().join(sub);
            let cfg = ExperimentConfig::from_toml_str(
                COIN,
                &overrides(&[&format!("output_dir={}", path.display())]),
            )
            .unwrap();
            (run_experiment(&cfg).unwrap(), path)
        };
        let (agg, p1) = out("a");
        let direct = agg.reports.iter().map(|r| r.BLt).sum::<f64>() / agg.reports.len() as f64;
        assert_eq!(agg.mean("BLt"), direct);
        let (_, p2) = out("b");
        for f in ["trials.csv", "aggregate.csv"] {
            assert_eq!(
                fs::read(p1.join(f)).unwrap(),
                fs::read(p2.join(f)).unwrap(),
                "{f}"
            );
        }
        let j1 = fs::read_to_string(p1.join("aggregate.json")).unwrap();
        let j2 = fs::read_to_string(p2.join("aggregate.json")).unwrap();
        assert_eq!(
            j1.replace(&p1.display().to_string(), ""),
            j2.replace(&p2.display().to_string(), "")
        );
        let lines = fs::read_to_string(p1.join("trials.csv"))
            .unwrap()
            .lines()
            .count();
        assert_eq!(lines, 4);
    }

    fn fake_report(bg: f64, bt: f64, gg: f64, gt: f64) -> ErrorReport {
        let cfg = ExperimentConfig::from_toml_str(COIN, &overrides(&["trials=1"])).unwrap();
        let mut r = run_trial(&cfg, 0).unwrap();
        r.Bg = bg;
        r.Bt = bt;
        r.Gg = gg;
        r.Gt = gt;
        r
    }

    #[test]
    fn state_equations_on_exact_inputs() {
        let r = regular_reference(2, 1.0).unwrap();
        let report = fake_report(r.bg_star, r.bt_star, r.gg_star, r.gt_star);
        let check = verify_reports(&[report.clone(), report], 1.0).unwrap();
        assert_eq!(check.bayes.value, 0.0);
        assert_eq!(check.gibbs.value, 0.0);
        assert_eq!(check.conservation.value, 0.0);
        assert!(check.all_passed());

        // Bg − Bt = 2 and Gt − Bt = 1 at β = 1.
        let a = fake_report(2.0, 0.0, 3.0, 1.0);
        let check = verify_reports(&[a.clone(), a], 1.0).unwrap();
        assert_eq!(check.bayes.value, 0.0);

        let off = fake_report(3.0, 0.0, 3.0, 1.0);
        let check = verify_reports(&[off.clone(), off], 1.0).unwrap();
        assert!(!check.bayes.passed);
    }

    #[test]
    fn table1_requires_reduced_rank() {
        let cfg = ExperimentConfig::from_toml_str(COIN, &[]).unwrap();
        assert!(matches!(run_table1(&cfg, &[1]), Err(Error::Config(_))));
    }
}
