//! Textual descriptors used on the command line and in config files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{MvgError, Result};
use crate::mechanisms::PrecisionAllocation;

/// How the precision budget is split over the noise directions.
///
/// Grammar: `uniform` | `binary:TAU:I,J,...` | `w1,w2,...`.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    Uniform,
    /// Share `tau` split equally over `favored`, the rest equally over the others.
    Binary {
        tau: f64,
        favored: Vec<usize>,
    },
    Explicit(Vec<f64>),
}

impl ThetaSpec {
    pub fn allocation(&self, m: usize) -> Result<PrecisionAllocation> {
        match self {
            ThetaSpec::Uniform => PrecisionAllocation::uniform(m),
            ThetaSpec::Binary { tau, favored } => PrecisionAllocation::binary(m, *tau, favored),
            ThetaSpec::Explicit(w) => {
                if w.len() != m {
                    return Err(MvgError::Config(format!(
                        "theta has {} entries but the query has {m} directions",
                        w.len()
                    )));
                }
                PrecisionAllocation::new(w.clone())
            }
        }
    }

    /// Number of directions singled out, used as `k` when deriving private
    /// directions.
    pub fn favored_count(&self) -> Option<usize> {
        match self {
            ThetaSpec::Binary { favored, .. } => Some(favored.len()),
            _ => None,
        }
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| MvgError::Config(format!("cannot parse {t:?} as {what}")))
        })
        .collect()
}

impl FromStr for ThetaSpec {
    type Err = MvgError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(ThetaSpec::Uniform);
        }
        if let Some(rest) = s.strip_prefix("binary:") {
            let (tau, idx) = rest.split_once(':').ok_or_else(|| {
                MvgError::Config(format!("expected binary:TAU:I,J,..., got {s:?}"))
            })?;
            let tau: f64 = tau
                .trim()
                .parse()
                .map_err(|_| MvgError::Config(format!("cannot parse tau {tau:?}")))?;
            if !(tau > 0.0 && tau < 1.0) {
                return Err(MvgError::Config(format!(
                    "tau must be in (0, 1), got {tau}"
                )));
            }
            return Ok(ThetaSpec::Binary {
                tau,
                favored: parse_list(idx, "an index")?,
            });
        }
        Ok(ThetaSpec::Explicit(parse_list(s, "a weight")?))
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        match self {
            ThetaSpec::Uniform => f.write_str("uniform"),
            ThetaSpec::Binary { tau, favored } => {
                write!(
                    f,
                    "binary:{tau}:{}",
                    join(favored.iter().map(|i| i.to_string()).collect())
                )
            }
            ThetaSpec::Explicit(w) => f.write_str(&join(w.iter().map(|x| x.to_string()).collect())),
        }
    }
}

/// Where the noise directions W_Σ come from.
///
/// Grammar: `standard` | `dp:FRACTION` | any other string is a CSV path.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionsSource {
    /// Standard basis e₁, …, e_m.
    Standard,
    /// Dense m×m orthonormal matrix, columns are directions.
    File(PathBuf),
    /// Spend this fraction of (ε, δ) on private principal directions.
    DpDerived(f64),
}

impl FromStr for DirectionsSource {
    type Err = MvgError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "standard" {
            return Ok(Self::Standard);
        }
        if let Some(frac) = s.strip_prefix("dp:") {
            let f: f64 = frac
                .parse()
                .map_err(|_| MvgError::Config(format!("cannot parse budget fraction {frac:?}")))?;
            if !(f > 0.0 && f < 1.0) {
                return Err(MvgError::Config(format!(
                    "budget fraction must be in (0, 1), got {f}"
                )));
            }
            return Ok(Self::DpDerived(f));
        }
        if s.is_empty() {
            return Err(MvgError::Config("empty directions source".into()));
        }
        Ok(Self::File(PathBuf::from(s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    MvgUnimodal,
    MvgEquimodal,
    GaussianIid,
    LaplaceIid,
    /// No noise; the reference value every mechanism is compared against.
    NonPrivate,
}

impl Mechanism {
    pub fn is_mvg(&self) -> bool {
        matches!(self, Mechanism::MvgUnimodal | Mechanism::MvgEquimodal)
    }
}

impl FromStr for Mechanism {
    type Err = MvgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mvg-uni" => Ok(Self::MvgUnimodal),
            "mvg-equi" => Ok(Self::MvgEquimodal),
            "gauss" => Ok(Self::GaussianIid),
            "laplace" => Ok(Self::LaplaceIid),
            "none" => Ok(Self::NonPrivate),
            other => Err(MvgError::Config(format!(
                "unknown mechanism {other:?} (expected mvg-uni, mvg-equi, gauss, laplace, none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseExperiment {
    /// Identity query on the training records, ridge RMSE on held-out records.
    Regression,
    /// Covariance query, Δρ of the leading principal component.
    FirstPc,
    /// Identity query, RSS of the covariance estimated from perturbed data.
    CovarianceEstimation,
}

impl BaseExperiment {
    pub fn metric_name(&self) -> &'static str {
        match self {
            Self::Regression => "RMSE",
            Self::FirstPc => "delta_rho",
            Self::CovarianceEstimation => "RSS",
        }
    }
}

impl FromStr for BaseExperiment {
    type Err = MvgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "firstpc" => Ok(Self::FirstPc),
            "covest" => Ok(Self::CovarianceEstimation),
            other => Err(MvgError::Config(format!(
                "unknown experiment {other:?} (expected regression, firstpc, covest, ablation)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Single(BaseExperiment),
    /// Rerun `base` once per allocation in `variants`.
    DirectionAblation {
        base: BaseExperiment,
        variants: Vec<ThetaSpec>,
    },
}
