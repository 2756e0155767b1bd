//! Model abstraction, datasets and the log density ratio primitive.
//!
//! A [`Model`] is a parametric density `p(x|w)` together with a log-prior and,
//! when the generating distribution is known, a [`TrueDistribution`] `q(x)`.
//! Everything is kept in log space. The discrepancy between truth and model is
//! always evaluated through `f(x, w) = log q(x) - log p(x|w)` so that factors
//! shared by `q` and `p` cancel analytically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `w` in parameter space. The layout is model specific and fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("parameter entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One observation `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sample(Vec<f64>);

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("sample entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Sample {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An ordered i.i.d. sample tagged with the seed of the generator that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    seed: u64,
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub n: usize,
    pub model: serde_json::Value,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, seed: u64) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Precondition(
                "a dataset needs at least one sample".into(),
            ));
        };
        let width = first.len();
        if let Some(i) = samples.iter().position(|s| s.len() != width) {
            return Err(Error::Data(format!(
                "sample {i} has length {} but sample 0 has length {width}",
                samples[i].len()
            )));
        }
        Ok(Self { samples, seed })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Dimension `N` of each observation.
    pub fn sample_dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.as_slice())
    }

    /// Writes the samples as CSV with header `x1..xN`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let header: Vec<String> = (1..=self.sample_dim()).map(|i| format!("x{i}")).collect();
        writer.write_record(&header)?;
        for s in &self.samples {
            writer.write_record(s.iter().map(|v| v.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Writes the CSV plus a JSON sidecar (`<path>.meta.json`) holding seed, n
    /// and the generating model configuration.
    pub fn write_with_meta(&self, path: &Path, model: serde_json::Value) -> Result<()> {
        self.write_csv(path)?;
        let meta = DatasetMeta {
            seed: self.seed,
            n: self.n(),
            model,
        };
        let mut file = BufWriter::new(File::create(meta_path(path))?);
        serde_json::to_writer_pretty(&mut file, &meta)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a dataset CSV. The seed comes from the sidecar when present,
    /// otherwise `fallback_seed` is used as the provenance tag.
    pub fn read_csv(path: &Path, fallback_seed: u64) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
        let headers = reader.headers()?.clone();
        for (i, h) in headers.iter().enumerate() {
            if h.trim() != format!("x{}", i + 1) {
                return Err(Error::Data(format!(
                    "column {} is named `{h}`, expected `x{}`",
                    i + 1,
                    i + 1
                )));
            }
        }
        let mut samples = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| {
                        Error::Data(format!("row {}: cannot parse `{v}`: {e}", row + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push(Sample::new(values)?);
        }
        let seed = match File::open(meta_path(path)) {
            Ok(file) => {
                let meta: DatasetMeta = serde_json::from_reader(BufReader::new(file))?;
                meta.seed
            }
            Err(_) => fallback_seed,
        };
        Dataset::new(samples, seed)
    }
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    name.into()
}

/// The data-generating distribution `q(x)`.
pub trait TrueDistribution: Send + Sync {
    fn log_density(&self, x: &[f64]) -> f64;

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Model evaluation with per-parameter precomputation done once.
pub trait BoundParameter {
    /// `log p(x|w)`.
    fn log_density(&self, x: &[f64]) -> f64;

    /// `f(x, w) = log q(x) - log p(x|w)`. Only meaningful when the model has a
    /// truth; callers check [`Model::truth`] first.
    fn log_density_ratio(&self, x: &[f64]) -> f64;
}

/// `Σᵢ log p(xᵢ|w)` over a fixed dataset, evaluated many times by samplers.
pub trait DataLikelihood: Send + Sync {
    fn total(&self, w: &[f64]) -> f64;
}

/// A parametric density `p(x|w)` with prior `φ(w)`.
pub trait Model: Send + Sync {
    /// Short identifier used in reports.
    fn name(&self) -> &str;

    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Observation dimension `N`.
    fn sample_dim(&self) -> usize;

    fn log_density(&self, x: &[f64], w: &[f64]) -> f64;

    /// Unnormalized log prior; `-inf` outside the support.
    fn log_prior(&self, w: &[f64]) -> f64;

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn truth(&self) -> Option<&dyn TrueDistribution> {
        None
    }

    /// `f(x, w)`; models override this when factors of `q` and `p` cancel.
    fn log_density_ratio(&self, x: &[f64], w: &[f64]) -> Result<f64> {
        let truth = require_truth(self)?;
        Ok(truth.log_density(x) - self.log_density(x, w))
    }

    /// Starting point for posterior sampling.
    fn initial_point(&self, _data: &Dataset, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample_prior(rng)
    }

    fn bind<'a>(&'a self, w: &'a [f64]) -> Box<dyn BoundParameter + 'a> {
        Box::new(GenericBound { model: self, w })
    }

    fn likelihood<'a>(&'a self, data: &'a Dataset) -> Box<dyn DataLikelihood + 'a> {
        Box::new(PointwiseLikelihood { model: self, data })
    }

    /// Configuration echo for sidecars and reports.
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "name": self.name(), "dim": self.dim() })
    }
}

pub(crate) fn require_truth<M: Model + ?Sized>(model: &M) -> Result<&dyn TrueDistribution> {
    model.truth().ok_or_else(|| {
        Error::Unsupported(format!(
            "model `{}` has no true distribution; the log density ratio is unavailable",
            model.name()
        ))
    })
}

struct GenericBound<'a, M: ?Sized> {
    model: &'a M,
    w: &'a [f64],
}

impl<M: Model + ?Sized> BoundParameter for GenericBound<'_, M> {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.model.log_density(x, self.w)
    }

    fn log_density_ratio(&self, x: &[f64]) -> f64 {
        match self.model.truth() {
            Some(t) => t.log_density(x) - self.model.log_density(x, self.w),
            None => f64::NAN,
        }
    }
}

struct PointwiseLikelihood<'a, M: ?Sized> {
    model: &'a M,
    data: &'a Dataset,
}

impl<M: Model + ?Sized> DataLikelihood for PointwiseLikelihood<'_, M> {
    fn total(&self, w: &[f64]) -> f64 {
        self.data.iter().map(|x| self.model.log_density(x, w)).sum()
    }
}

/// `f(x, w) = log q(x) - log p(x|w)`.
pub fn log_density_ratio(model: &dyn Model, x: &Sample, w: &ParameterVector) -> Result<f64> {
    if x.len() != model.sample_dim() {
        return Err(Error::Domain(format!(
            "sample has length {}, model expects {}",
            x.len(),
            model.sample_dim()
        )));
    }
    check_dim(model, w)?;
    model.log_density_ratio(x, w)
}

pub(crate) fn check_dim(model: &dyn Model, w: &[f64]) -> Result<()> {
    if w.len() != model.dim() {
        return Err(Error::Domain(format!(
            "parameter has length {}, model `{}` has dimension {}",
            w.len(),
            model.name(),
            model.dim()
        )));
    }
    Ok(())
}

/// Draws `n` i.i.d. samples from the model's true distribution.
///
/// The stream is a ChaCha8 generator seeded with `seed`, so the result is
/// bit-reproducible for a given model configuration.
pub fn sample_dataset(model: &dyn Model, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Precondition(
            "dataset size n must be at least 1".into(),
        ));
    }
    let truth = model.truth().ok_or_else(|| {
        Error::Unsupported(format!("model `{}` has no true sampler", model.name()))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| Sample::new(truth.sample(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        assert!(ParameterVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![f64::INFINITY]).is_err());
        assert!(ParameterVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            Dataset::new(vec![], 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ragged_dataset_is_rejected() {
        let samples = vec![
            Sample::new(vec![1.0]).unwrap(),
            Sample::new(vec![1.0, 2.0]).unwrap(),
        ];
        assert!(matches!(Dataset::new(samples, 0), Err(Error::Data(_))));
    }
}
