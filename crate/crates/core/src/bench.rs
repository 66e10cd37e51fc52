//! Monte Carlo accuracy/timing benchmark of the estimators.
//!
//! Every `(model, T, replication)` cell draws one dataset from a child seed of
//! the master seed; all requested estimators see that same dataset. Results
//! are keyed by replication index, so the output does not depend on thread
//! scheduling.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::linalg::Matrix;
use crate::ml::MlConfig;
use crate::model::{structural_to_reduced, ReducedParams, StructuralParams};
use crate::simulate::{child_seed, difference, preset, simulate, SimulationSpec};

pub const DEFAULT_REPLICATIONS: usize = 100;

/// Relative Frobenius error `‖X̂ − X‖_F / ‖X‖_F`.
pub fn rmse(estimate: &Matrix, truth: &Matrix) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            got: estimate.nrows(),
        });
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok((estimate - truth).norm() / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(u32),
    Custom { name: String, params: StructuralParams },
}

impl ModelSpec {
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Preset(id) => id.to_string(),
            ModelSpec::Custom { name, .. } => name.clone(),
        }
    }

    pub fn params(&self) -> Result<StructuralParams> {
        match self {
            ModelSpec::Preset(id) => preset(*id),
            ModelSpec::Custom { params, .. } => Ok(params.clone()),
        }
    }

    /// Seed coordinate: the preset number, or `1000 + position` for custom models.
    fn seed_key(&self, position: usize) -> u64 {
        match self {
            ModelSpec::Preset(id) => u64::from(*id),
            ModelSpec::Custom { .. } => 1000 + position as u64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelSpec>,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Substitute the sample-moment estimate when the aggregation estimator fails.
    #[serde(default)]
    pub fallback: bool,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_reps() -> usize {
    DEFAULT_REPLICATIONS
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Invalid("replications must be at least 1".into()));
        }
        if self.models.is_empty() || self.sample_sizes.is_empty() || self.estimators.is_empty() {
            return Err(Error::Invalid("need at least one model, sample size and estimator".into()));
        }
        if let Some(t) = self.sample_sizes.iter().find(|&&t| t < 21) {
            return Err(Error::Invalid(format!("sample size {t} is below the minimum of 21")));
        }
        if let Some(e) = self.estimators.iter().find(|e| **e == Estimator::True) {
            return Err(Error::Invalid(format!("estimator {e} cannot be benchmarked")));
        }
        for m in &self.models {
            m.params()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Theta,
    SigmaU,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Theta => "theta",
            Target::SigmaU => "sigma_u",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub model: String,
    #[serde(rename = "T")]
    pub sample_size: usize,
    pub estimator: Estimator,
    pub target: Target,
    /// Mean relative RMSE over successful replications.
    pub mean_rmse: f64,
    /// Sample standard deviation of the per-replication RMSEs over `√successes`.
    pub std_error: f64,
    /// Mean wall-clock seconds per fit (estimation only).
    pub mean_elapsed: f64,
    pub failures: usize,
    /// Replications where the sample-moment fallback stood in.
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
struct FitOutcome {
    rmse_theta: Option<f64>,
    rmse_sigma: Option<f64>,
    elapsed: f64,
    fallback: bool,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_cell(
    params: &StructuralParams,
    truth: &ReducedParams,
    len: usize,
    seed: u64,
    estimators: &[Estimator],
    ml: &MlConfig,
    fallback: bool,
) -> Result<Vec<FitOutcome>> {
    let levels = simulate(&SimulationSpec::new(params.clone(), len, seed))?;
    let z = difference(&levels)?;
    Ok(estimators
        .iter()
        .map(|est| {
            let start = Instant::now();
            let fitted = est.fit(&z, ml, fallback);
            let elapsed = start.elapsed().as_secs_f64();
            match fitted {
                Ok((r, fb)) => FitOutcome {
                    rmse_theta: rmse(&r.theta, &truth.theta).ok(),
                    rmse_sigma: rmse(&r.sigma_u, &truth.sigma_u).ok(),
                    elapsed,
                    fallback: fb,
                },
                Err(_) => FitOutcome {
                    rmse_theta: None,
                    rmse_sigma: None,
                    elapsed,
                    fallback: false,
                },
            }
        })
        .collect())
}

/// Runs the sweep. Sample size `T` is the number of simulated level
/// observations; estimators see the `T − 1` differences.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let ml = MlConfig::default();
    let work = || -> Result<Vec<BenchmarkRow>> {
        let mut rows = Vec::new();
        for (pos, model) in cfg.models.iter().enumerate() {
            let params = model.params()?;
            let truth = structural_to_reduced(&params)?;
            for &len in &cfg.sample_sizes {
                let outcomes: Vec<Vec<FitOutcome>> = (0..cfg.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = child_seed(cfg.master_seed, &[model.seed_key(pos), len as u64, rep as u64]);
                        run_cell(&params, &truth, len, seed, &cfg.estimators, &ml, cfg.fallback)
                    })
                    .collect::<Result<_>>()?;
                for (k, &est) in cfg.estimators.iter().enumerate() {
                    let cells: Vec<&FitOutcome> = outcomes.iter().map(|o| &o[k]).collect();
                    let failures = cells.iter().filter(|c| c.rmse_theta.is_none()).count();
                    let fallbacks = cells.iter().filter(|c| c.fallback).count();
                    let mean_elapsed = cells.iter().map(|c| c.elapsed).sum::<f64>() / cells.len() as f64;
                    for target in [Target::Theta, Target::SigmaU] {
                        let vals: Vec<f64> = cells
                            .iter()
                            .filter_map(|c| match target {
                                Target::Theta => c.rmse_theta,
                                Target::SigmaU => c.rmse_sigma,
                            })
                            .collect();
                        let (mean_rmse, std_error) = mean_and_se(&vals);
                        rows.push(BenchmarkRow {
                            model: model.label(),
                            sample_size: len,
                            estimator: est,
                            target,
                            mean_rmse,
                            std_error,
                            mean_elapsed,
                            failures,
                            fallbacks,
                        });
                    }
                }
            }
        }
        Ok(rows)
    };

    let rows = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(BenchmarkResult { rows })
}

impl BenchmarkResult {
    pub fn find(&self, model: &str, len: usize, est: Estimator, target: Target) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.sample_size == len && r.estimator == est && r.target == target)
    }

    /// Accuracy CSV. Wall-clock columns are left out so that identical
    /// configurations produce identical files; see [`Self::write_timing_csv`].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "T", "estimator", "target", "mean_rmse", "std_error", "failures", "fallbacks"])?;
        for r in &self.rows {
            out.write_record([
                r.model.clone(),
                r.sample_size.to_string(),
                r.estimator.to_string(),
                r.target.as_str().to_string(),
                r.mean_rmse.to_string(),
                r.std_error.to_string(),
                r.failures.to_string(),
                r.fallbacks.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "T", "estimator", "mean_elapsed_seconds"])?;
        for r in self.rows.iter().filter(|r| r.target == Target::Theta) {
            out.write_record([
                r.model.clone(),
                r.sample_size.to_string(),
                r.estimator.to_string(),
                r.mean_elapsed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Human-readable table, RMSE multiplied by 1000 and rounded to 2 decimals.
    pub fn render_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>6} {:<6} {:>12} {:>12} {:>12} {:>9}\n",
            "model", "T", "est", "Theta x1000", "Sigma x1000", "time (s)", "failures"
        );
        for r in self.rows.iter().filter(|r| r.target == Target::Theta) {
            let sigma = self
                .find(&r.model, r.sample_size, r.estimator, Target::SigmaU)
                .map_or(f64::NAN, |x| x.mean_rmse);
            s.push_str(&format!(
                "{:<8} {:>6} {:<6} {:>12.2} {:>12.2} {:>12.4} {:>9}\n",
                r.model,
                r.sample_size,
                r.estimator.as_str(),
                r.mean_rmse * 1000.0,
                sigma * 1000.0,
                r.mean_elapsed,
                r.failures
            ));
        }
        s
    }
}
