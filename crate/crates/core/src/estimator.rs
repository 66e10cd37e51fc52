use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{meta_fit, mom_fit};
use crate::ml::{ml_fit, MlConfig};
use crate::model::ReducedParams;
use crate::series::SeriesMatrix;

/// Estimators selectable from the benchmark, the forecast experiment and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Meta,
    Ml,
    Mom,
    /// The exact parameters of the generating model (forecast experiment only).
    True,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Meta => "meta",
            Estimator::Ml => "ml",
            Estimator::Mom => "mom",
            Estimator::True => "true",
        }
    }

    /// Fits reduced parameters from differenced data. `fallback` substitutes
    /// the sample-moment estimate when the aggregation estimator fails; the
    /// returned flag says whether that happened.
    pub fn fit(self, z: &SeriesMatrix, ml: &MlConfig, fallback: bool) -> Result<(ReducedParams, bool)> {
        match self {
            Estimator::Meta => match meta_fit(z) {
                Ok(rep) => Ok((rep.reduced, false)),
                Err(e) if fallback => mom_fit(z).map(|r| (r, true)).map_err(|_| e),
                Err(e) => Err(e),
            },
            Estimator::Ml => ml_fit(z, ml).map(|f| (f.reduced, false)),
            Estimator::Mom => mom_fit(z).map(|r| (r, false)),
            Estimator::True => Err(Error::Invalid(
                "the 'true' estimator needs the generating model and cannot fit data".into(),
            )),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "meta" => Ok(Estimator::Meta),
            "ml" => Ok(Estimator::Ml),
            "mom" => Ok(Estimator::Mom),
            "true" => Ok(Estimator::True),
            other => Err(Error::Invalid(format!(
                "unknown estimator {other:?} (expected meta, ml, mom or true)"
            ))),
        }
    }
}
