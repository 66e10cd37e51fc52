//! EWMA forecasting `ŷ_{t+1} = (I − Θ)y_t + Θŷ_t` and the one-step-ahead
//! forecast experiment.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::linalg::{check_square, spectral_radius, Matrix};
use crate::ml::MlConfig;
use crate::model::{structural_to_reduced, StructuralParams};
use crate::series::SeriesMatrix;
use crate::simulate::{child_seed, difference, simulate, SimulationSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastState {
    theta: Matrix,
    /// Forecast of the next observation; `None` until the first one is seen.
    y_hat: Option<DVector<f64>>,
}

impl ForecastState {
    pub fn new(theta: Matrix) -> Result<Self> {
        check_square(&theta)?;
        let radius = spectral_radius(&theta)?;
        if radius >= 1.0 {
            return Err(Error::NotInvertible { radius });
        }
        Ok(ForecastState { theta, y_hat: None })
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn y_hat(&self) -> Option<&DVector<f64>> {
        self.y_hat.as_ref()
    }

    /// Absorbs observation `y_t`. Before any observation the forecast of
    /// `y_t` is taken to be `y_t` itself, so the first update returns `y_1`.
    pub fn update(&mut self, y: &[f64]) -> Result<&DVector<f64>> {
        let n = self.theta.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let y = DVector::from_column_slice(y);
        let prev = self.y_hat.take().unwrap_or_else(|| y.clone());
        let next = &y + &self.theta * (prev - &y);
        Ok(self.y_hat.insert(next))
    }
}

/// Pure form of [`ForecastState::update`].
pub fn forecast_next(state: &ForecastState, y_observed: &[f64]) -> Result<ForecastState> {
    let mut s = state.clone();
    s.update(y_observed)?;
    Ok(s)
}

/// Runs the recursion over every row of `levels` and returns `ŷ_{T+1}`.
pub fn forecast_after(theta: &Matrix, levels: &SeriesMatrix) -> Result<Vec<f64>> {
    if levels.rows() == 0 {
        return Err(Error::Invalid("no observations to forecast from".into()));
    }
    let mut state = ForecastState::new(theta.clone())?;
    for row in levels.row_iter() {
        state.update(row)?;
    }
    Ok(state.y_hat.expect("at least one update").as_slice().to_vec())
}

#[derive(Debug, Clone)]
pub struct ForecastExperimentConfig {
    pub params: StructuralParams,
    /// Used for seeding and labelling.
    pub model_key: u64,
    /// Observations per replication; the last one is predicted.
    pub len: usize,
    pub replications: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    pub ml: MlConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastRecord {
    pub replication: usize,
    pub estimator: Estimator,
    /// `y_T − ŷ_T` per component, or the failure reason.
    pub outcome: std::result::Result<Vec<f64>, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersionSummary {
    pub estimator: Estimator,
    pub component: usize,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone)]
pub struct ForecastExperiment {
    pub records: Vec<ForecastRecord>,
    pub dim: usize,
}

/// Simulates `len` observations per replication, fits each estimator on the
/// first `len − 1`, and records the error of the forecast of the last one.
pub fn forecast_experiment(cfg: &ForecastExperimentConfig) -> Result<ForecastExperiment> {
    if cfg.len < 50 {
        return Err(Error::Invalid(format!("forecast experiment needs T >= 50, got {}", cfg.len)));
    }
    if cfg.replications == 0 || cfg.estimators.is_empty() {
        return Err(Error::Invalid("need at least one replication and one estimator".into()));
    }
    if let Some(bad) = cfg.estimators.iter().find(|e| **e == Estimator::Mom) {
        return Err(Error::Invalid(format!("estimator {bad} is not part of the forecast experiment")));
    }
    let truth = structural_to_reduced(&cfg.params)?;
    let n = cfg.params.dim();

    let per_rep: Vec<Vec<ForecastRecord>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = child_seed(cfg.seed, &[cfg.model_key, cfg.len as u64, rep as u64]);
            let levels = simulate(&SimulationSpec::new(cfg.params.clone(), cfg.len, seed))?;
            let history = levels.head(cfg.len - 1);
            let z = difference(&history)?;
            let last = levels.row(cfg.len - 1);
            Ok(cfg
                .estimators
                .iter()
                .map(|&est| {
                    let theta = match est {
                        Estimator::True => Ok(truth.theta.clone()),
                        other => other.fit(&z, &cfg.ml, false).map(|(r, _)| r.theta),
                    };
                    let outcome = theta
                        .and_then(|th| forecast_after(&th, &history))
                        .map(|f| last.iter().zip(&f).map(|(y, p)| y - p).collect())
                        .map_err(|e| e.to_string());
                    ForecastRecord {
                        replication: rep,
                        estimator: est,
                        outcome,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    Ok(ForecastExperiment {
        records: per_rep.into_iter().flatten().collect(),
        dim: n,
    })
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ForecastExperiment {
    pub fn errors(&self, estimator: Estimator, component: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.estimator == estimator)
            .filter_map(|r| r.outcome.as_ref().ok().map(|e| e[component]))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn summary(&self) -> Vec<DispersionSummary> {
        let mut ests: Vec<Estimator> = self.records.iter().map(|r| r.estimator).collect();
        ests.sort();
        ests.dedup();
        let mut out = Vec::new();
        for est in ests {
            for c in 0..self.dim {
                let mut e = self.errors(est, c);
                let count = e.len();
                let mean = e.iter().sum::<f64>() / count as f64;
                let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count as f64 - 1.0);
                e.sort_by(f64::total_cmp);
                out.push(DispersionSummary {
                    estimator: est,
                    component: c + 1,
                    count,
                    mean,
                    std_dev: var.sqrt(),
                    std_error: (var / count as f64).sqrt(),
                    iqr: quantile(&e, 0.75) - quantile(&e, 0.25),
                });
            }
        }
        out
    }

    /// Tidy CSV: `replication,estimator,component,error,reason`. Failed fits
    /// get one row with empty `component`/`error` and the failure reason.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replication", "estimator", "component", "error", "reason"])?;
        for r in &self.records {
            match &r.outcome {
                Ok(errs) => {
                    for (c, e) in errs.iter().enumerate() {
                        out.write_record([
                            r.replication.to_string(),
                            r.estimator.to_string(),
                            (c + 1).to_string(),
                            e.to_string(),
                            String::new(),
                        ])?;
                    }
                }
                Err(reason) => out.write_record([
                    r.replication.to_string(),
                    r.estimator.to_string(),
                    String::new(),
                    String::new(),
                    reason.clone(),
                ])?,
            }
        }
        out.flush()?;
        Ok(())
    }
}
