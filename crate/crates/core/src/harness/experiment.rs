//! Experiment orchestration: query construction, per-trial perturbation,
//! evaluation, and aggregation into [`EvalReport`]s.
//!
//! Trial `t` uses the stream seeded with `seed + t` (wrapping), so results
//! are reproducible and independent of trial order.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use super::csv_io::{load_csv_matrix, load_dense_matrix};
use super::spec::{BaseExperiment, DirectionsSource, Experiment, Mechanism, ThetaSpec};
use crate::budget::{check_condition, PrivacyParams, QueryKind, QuerySpec};
use crate::error::{MvgError, Result};
use crate::mechanisms::{
    derive_directions_dp, gaussian_iid_baseline, laplace_iid_baseline, mvg_equimodal, mvg_unimodal,
    PrecisionAllocation,
};
use crate::metrics::{
    delta_rho, first_principal_component, ridge_regression_rmse, rss, EvalReport,
};
use crate::sampler::{check_orthonormal, RandomStream};
use crate::sensitivity::{
    covariance_l1_sensitivity, covariance_sensitivity, gamma_covariance, gamma_identity,
    identity_l1_sensitivity, identity_sensitivity, DataBounds,
};

/// Share of records (in file order) used as the private training set in
/// the regression experiment; the rest is the clean test set.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.72;
pub const DEFAULT_RIDGE: f64 = 0.1;
/// Budget share spent on private directions in the two-stage MVG pipeline.
pub const DEFAULT_DP_DIRECTIONS_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dataset_path: PathBuf,
    pub has_header: bool,
    /// Every data entry (features and regression targets) lies in [lo, hi].
    pub lo: f64,
    pub hi: f64,
    pub epsilon: f64,
    /// Defaults to 1/N for N private records.
    pub delta: Option<f64>,
    pub mechanism: Mechanism,
    pub theta: ThetaSpec,
    pub directions: DirectionsSource,
    pub trials: usize,
    pub seed: u64,
    pub ridge: f64,
    pub train_fraction: f64,
}

impl ExperimentConfig {
    pub fn new(
        experiment: Experiment,
        mechanism: Mechanism,
        lo: f64,
        hi: f64,
        epsilon: f64,
    ) -> Self {
        Self {
            experiment,
            dataset_path: PathBuf::new(),
            has_header: true,
            lo,
            hi,
            epsilon,
            delta: None,
            mechanism,
            theta: ThetaSpec::Uniform,
            directions: DirectionsSource::Standard,
            trials: 100,
            seed: 0,
            ridge: DEFAULT_RIDGE,
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

/// Loads `cfg.dataset_path` and runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    let loaded = load_csv_matrix(&cfg.dataset_path, cfg.has_header)?;
    run_on_data(cfg, &loaded.matrix)
}

/// Runs the configured experiment on an in-memory `M × N` dataset (one
/// record per column). For regression the last row holds the targets.
pub fn run_on_data(cfg: &ExperimentConfig, data: &DMatrix<f64>) -> Result<Vec<EvalReport>> {
    if cfg.trials == 0 {
        return Err(MvgError::Config("trials must be >= 1".into()));
    }
    let (base, variants): (BaseExperiment, Vec<(String, &ThetaSpec)>) = match &cfg.experiment {
        Experiment::Single(b) => (*b, vec![(b.metric_name().to_string(), &cfg.theta)]),
        Experiment::DirectionAblation { base, variants } => {
            if variants.is_empty() {
                return Err(MvgError::Config(
                    "ablation needs at least one variant".into(),
                ));
            }
            (
                *base,
                variants
                    .iter()
                    .map(|v| (format!("{}[{v}]", base.metric_name()), v))
                    .collect(),
            )
        }
    };
    let setup = Setup::new(cfg, base, data)?;
    let plans = variants
        .iter()
        .map(|(name, theta)| Ok((name, setup.allocation(theta)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(plans.len());
    for (name, alloc) in plans {
        let values = (0..cfg.trials)
            .map(|t| {
                let mut stream = RandomStream::new(cfg.seed.wrapping_add(t as u64));
                setup.trial(&alloc, &mut stream)
            })
            .collect::<Result<Vec<f64>>>()?;
        reports.push(EvalReport::from_samples(name.clone(), &values)?);
    }
    Ok(reports)
}

/// One release of the identity or covariance query on `data`, using the
/// stream seeded with `cfg.seed`. `cfg.experiment` is ignored.
pub fn perturb_query(
    cfg: &ExperimentConfig,
    data: &DMatrix<f64>,
    kind: QueryKind,
) -> Result<DMatrix<f64>> {
    let base = match kind {
        QueryKind::Identity => BaseExperiment::CovarianceEstimation,
        QueryKind::Covariance => BaseExperiment::FirstPc,
        QueryKind::Custom => {
            return Err(MvgError::Config(
                "only identity and covariance queries can be perturbed".into(),
            ))
        }
    };
    let setup = Setup::new(cfg, base, data)?;
    let alloc = setup.allocation(&cfg.theta)?;
    setup.perturb(&alloc, &mut RandomStream::new(cfg.seed))
}

/// Everything fixed across trials, validated before any sampling.
struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    base: BaseExperiment,
    /// Records entering the private query.
    private: DMatrix<f64>,
    private_bounds: DataBounds,
    query_value: DMatrix<f64>,
    query: QuerySpec,
    privacy: PrivacyParams,
    l1_sensitivity: f64,
    fixed_directions: Option<DMatrix<f64>>,
    /// Regression only: clean held-out records.
    test: Option<DMatrix<f64>>,
    /// FirstPc and covariance estimation: the true covariance.
    s_bar: Option<DMatrix<f64>>,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ExperimentConfig, base: BaseExperiment, data: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = data.shape();
        if m == 0 || n == 0 {
            return Err(MvgError::Format("dataset is empty".into()));
        }
        // Bounds audit: the declared box must dominate every loaded value.
        let full_bounds =
            DataBounds::new(m, n, cfg.lo, cfg.hi).map_err(|e| MvgError::Config(e.to_string()))?;
        if let Some((k, x)) = data
            .iter()
            .enumerate()
            .find(|(_, x)| !full_bounds.contains(**x))
        {
            return Err(MvgError::ContractViolation(format!(
                "record {}, feature {}: value {x} outside declared bounds [{}, {}]",
                k / m,
                k % m,
                cfg.lo,
                cfg.hi
            )));
        }
        if !cfg.mechanism.is_mvg() && cfg.directions != DirectionsSource::Standard {
            return Err(MvgError::Config(format!(
                "noise directions only apply to MVG mechanisms, not {:?}",
                cfg.mechanism
            )));
        }

        let (private, test) = match base {
            BaseExperiment::Regression => {
                if m < 2 {
                    return Err(MvgError::Config(
                        "regression needs at least one feature and a target".into(),
                    ));
                }
                if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
                    return Err(MvgError::Config(format!(
                        "train fraction must be in (0, 1), got {}",
                        cfg.train_fraction
                    )));
                }
                let n_train = ((n as f64 * cfg.train_fraction).round() as usize)
                    .clamp(1, n.saturating_sub(1));
                if n < 2 {
                    return Err(MvgError::Config(
                        "regression needs at least two records".into(),
                    ));
                }
                (
                    data.columns(0, n_train).into_owned(),
                    Some(data.columns(n_train, n - n_train).into_owned()),
                )
            }
            _ => (data.clone(), None),
        };
        let private_bounds = full_bounds.with_samples(private.ncols())?;
        let delta = cfg.delta.unwrap_or(1.0 / private.ncols() as f64);
        let privacy = PrivacyParams::new(cfg.epsilon, delta)?;

        let (query_value, query, l1_sensitivity, s_bar) = match base {
            BaseExperiment::FirstPc => {
                let cov = &private * private.transpose() / private.ncols() as f64;
                let q = QuerySpec::new(
                    m,
                    m,
                    covariance_sensitivity(&private_bounds),
                    gamma_covariance(&private_bounds),
                    QueryKind::Covariance,
                )?;
                (
                    cov.clone(),
                    q,
                    covariance_l1_sensitivity(&private_bounds),
                    Some(cov),
                )
            }
            BaseExperiment::Regression | BaseExperiment::CovarianceEstimation => {
                let q = QuerySpec::new(
                    m,
                    private.ncols(),
                    identity_sensitivity(&private_bounds),
                    gamma_identity(&private_bounds),
                    QueryKind::Identity,
                )?;
                let s_bar = (base == BaseExperiment::CovarianceEstimation)
                    .then(|| &private * private.transpose() / private.ncols() as f64);
                (
                    private.clone(),
                    q,
                    identity_l1_sensitivity(&private_bounds),
                    s_bar,
                )
            }
        };

        if cfg.mechanism == Mechanism::MvgEquimodal && query.m() != query.n() {
            return Err(MvgError::Config(format!(
                "equi-modal noise needs a square query; the {base:?} query is {}x{}",
                query.m(),
                query.n()
            )));
        }

        let fixed_directions = match &cfg.directions {
            DirectionsSource::Standard => Some(DMatrix::identity(m, m)),
            DirectionsSource::File(path) => {
                let w = load_dense_matrix(path)?;
                if w.shape() != (m, m) {
                    return Err(MvgError::Config(format!(
                        "directions file is {:?}, expected {m}x{m}",
                        w.shape()
                    )));
                }
                check_orthonormal("directions file", &w)?;
                Some(w)
            }
            DirectionsSource::DpDerived(_) => None,
        };

        Ok(Self {
            cfg,
            base,
            private,
            private_bounds,
            query_value,
            query,
            privacy,
            l1_sensitivity,
            fixed_directions,
            test,
            s_bar,
        })
    }

    fn allocation(&self, theta: &ThetaSpec) -> Result<PrecisionAllocation> {
        theta.allocation(self.query.m()).map_err(|e| match e {
            MvgError::Allocation(msg) => MvgError::Config(msg),
            other => other,
        })
    }

    fn perturb(
        &self,
        alloc: &PrecisionAllocation,
        stream: &mut RandomStream,
    ) -> Result<DMatrix<f64>> {
        let (q, p) = (&self.query, &self.privacy);
        match self.cfg.mechanism {
            Mechanism::NonPrivate => Ok(self.query_value.clone()),
            Mechanism::GaussianIid => gaussian_iid_baseline(&self.query_value, q, p, stream),
            Mechanism::LaplaceIid => laplace_iid_baseline(
                &self.query_value,
                q,
                p.epsilon(),
                self.l1_sensitivity,
                stream,
            ),
            Mechanism::MvgUnimodal | Mechanism::MvgEquimodal => {
                let (w, spend) = match (&self.fixed_directions, &self.cfg.directions) {
                    (Some(w), _) => (w.clone(), *p),
                    (None, DirectionsSource::DpDerived(f)) => {
                        let k = alloc_k(&self.cfg.theta, q.m());
                        let w = derive_directions_dp(
                            &self.private,
                            &self.private_bounds,
                            &p.scaled(*f)?,
                            k,
                            stream,
                        )?;
                        // simple additive composition over the two stages
                        (w, p.scaled(1.0 - f)?)
                    }
                    (None, _) => unreachable!("fixed directions resolved in Setup::new"),
                };
                let result = if self.cfg.mechanism == Mechanism::MvgUnimodal {
                    mvg_unimodal(&self.query_value, q, &spend, alloc, &w, stream)?
                } else {
                    mvg_equimodal(&self.query_value, q, &spend, alloc, &w, stream)?
                };
                // Budget audit on every trial.
                let check = check_condition(&result.design, q, &spend)?;
                if !check.holds {
                    return Err(MvgError::ConditionFailed {
                        lhs: check.lhs,
                        rhs: check.rhs,
                    });
                }
                Ok(result.output)
            }
        }
    }

    fn trial(&self, alloc: &PrecisionAllocation, stream: &mut RandomStream) -> Result<f64> {
        let released = self.perturb(alloc, stream)?;
        match self.base {
            BaseExperiment::Regression => {
                let test = self.test.as_ref().expect("regression has a test split");
                let last = released.nrows() - 1;
                let features = released.rows(0, last).into_owned();
                let targets: DVector<f64> = released.row(last).transpose();
                let test_x = test.rows(0, last).into_owned();
                let test_y: DVector<f64> = test.row(last).transpose();
                ridge_regression_rmse(&features, &targets, &test_x, &test_y, self.cfg.ridge)
            }
            BaseExperiment::FirstPc => {
                let v = first_principal_component(&released)?;
                delta_rho(&v, self.s_bar.as_ref().expect("first-PC has S̄"))
            }
            BaseExperiment::CovarianceEstimation => {
                let mut s_tilde = &released * released.transpose() / released.ncols() as f64;
                s_tilde = (&s_tilde + s_tilde.transpose()) * 0.5;
                rss(
                    &s_tilde,
                    self.s_bar.as_ref().expect("covariance estimation has S̄"),
                )
            }
        }
    }
}

fn alloc_k(theta: &ThetaSpec, m: usize) -> usize {
    theta.favored_count().unwrap_or(m).clamp(1, m)
}
