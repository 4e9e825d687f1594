//! The MVG mechanism with unimodal and equi-modal directional noise, the
//! i.i.d. Gaussian and Laplace baselines, and a differentially private way
//! of choosing noise directions.
//!
//! Both MVG variants spend a precision budget `P` across the orthonormal
//! directions in `W_Σ`: direction `i` receives precision `pᵢ = θᵢ P` and
//! therefore noise variance `σᵢ(Σ) = 1/√pᵢ`. The unimodal variant fixes
//! `Ψ = I_n` (directional noise along rows only); for column-directional
//! noise, transpose the query before and after the call.

use log::warn;
use nalgebra::DMatrix;

use crate::budget::{
    check_condition, precision_budget_equimodal, precision_budget_unimodal, zeta, BudgetReport,
    PrivacyParams, QuerySpec,
};
use crate::error::{MvgError, Result};
use crate::metrics::sorted_eigen;
use crate::sampler::{
    check_orthonormal, sample_standard_matrix, transform_standard, NoiseDesign, RandomStream,
};
use crate::sensitivity::{covariance_sensitivity, DataBounds};

/// Smallest share a direction may receive after normalisation.
pub const THETA_FLOOR: f64 = 1e-6;
/// Relative slack on the caller's γ claim.
const GAMMA_RTOL: f64 = 1e-9;

/// Normalised share θ of the precision budget per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAllocation {
    theta: Vec<f64>,
}

impl PrecisionAllocation {
    /// Normalises `weights` to sum to one. Every direction must get a
    /// strictly positive share; tiny shares are raised to [`THETA_FLOOR`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MvgError::Allocation(
                "allocation must have at least one entry".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(MvgError::Allocation(format!(
                "every direction needs a positive share, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        let mut theta: Vec<f64> = weights
            .iter()
            .map(|w| (w / total).max(THETA_FLOOR))
            .collect();
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= total);
        Ok(Self { theta })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0; m])
    }

    /// Share `tau` split equally over `favored`, the rest split equally over
    /// the remaining directions.
    pub fn binary(m: usize, tau: f64, favored: &[usize]) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(MvgError::Allocation(format!(
                "tau must be in (0, 1), got {tau}"
            )));
        }
        if favored.is_empty() {
            return Err(MvgError::Allocation(
                "binary allocation needs favored directions".into(),
            ));
        }
        let mut is_fav = vec![false; m];
        for &i in favored {
            if i >= m {
                return Err(MvgError::Allocation(format!(
                    "favored index {i} out of range 0..{m}"
                )));
            }
            if is_fav[i] {
                return Err(MvgError::Allocation(format!(
                    "favored index {i} listed twice"
                )));
            }
            is_fav[i] = true;
        }
        let k = favored.len();
        if k == m {
            return Self::uniform(m);
        }
        let (fav, rest) = (tau / k as f64, (1.0 - tau) / (m - k) as f64);
        Self::new(is_fav.iter().map(|&f| if f { fav } else { rest }).collect())
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Mechanism output together with everything needed to audit or replay it.
#[derive(Debug, Clone)]
pub struct PerturbResult {
    pub output: DMatrix<f64>,
    pub design: NoiseDesign,
    pub budget: BudgetReport,
    pub privacy: PrivacyParams,
    pub query: QuerySpec,
    pub seed: u64,
}

fn check_query_value(query_value: &DMatrix<f64>, q: &QuerySpec) -> Result<()> {
    if query_value.shape() != (q.m(), q.n()) {
        return Err(MvgError::Shape(format!(
            "query value is {:?} but the query spec says {}x{}",
            query_value.shape(),
            q.m(),
            q.n()
        )));
    }
    let norm = query_value.norm();
    if norm > q.gamma() * (1.0 + GAMMA_RTOL) {
        return Err(MvgError::ContractViolation(format!(
            "query value has Frobenius norm {norm}, above the declared gamma {}",
            q.gamma()
        )));
    }
    Ok(())
}

fn directional_variances(
    budget: &BudgetReport,
    theta: &PrecisionAllocation,
    w_sigma: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    if theta.len() != w_sigma.nrows() {
        return Err(MvgError::Shape(format!(
            "allocation has {} entries for {} directions",
            theta.len(),
            w_sigma.nrows()
        )));
    }
    check_orthonormal("w_sigma", w_sigma)?;
    Ok(theta
        .theta()
        .iter()
        .map(|t| 1.0 / (t * budget.precision_budget).sqrt())
        .collect())
}

/// Noise design of the unimodal algorithm: `Ψ = I_n`, `Σᵢ 1/σᵢ(Σ)² = P`.
pub fn unimodal_design(
    q: &QuerySpec,
    p: &PrivacyParams,
    theta: &PrecisionAllocation,
    w_sigma: &DMatrix<f64>,
) -> Result<(NoiseDesign, BudgetReport)> {
    let budget = precision_budget_unimodal(q, p)?;
    let lambda = directional_variances(&budget, theta, w_sigma)?;
    let design = NoiseDesign::new(
        w_sigma.clone(),
        lambda,
        DMatrix::identity(q.n(), q.n()),
        vec![1.0; q.n()],
    )?;
    Ok((design, budget))
}

/// Noise design of the equi-modal algorithm: `Ψ = Σ`, `Σᵢ 1/σᵢ(Σ)² = P`.
pub fn equimodal_design(
    q: &QuerySpec,
    p: &PrivacyParams,
    theta: &PrecisionAllocation,
    w_sigma: &DMatrix<f64>,
) -> Result<(NoiseDesign, BudgetReport)> {
    let budget = precision_budget_equimodal(q, p)?;
    let lambda = directional_variances(&budget, theta, w_sigma)?;
    let design = NoiseDesign::new(w_sigma.clone(), lambda.clone(), w_sigma.clone(), lambda)?;
    Ok((design, budget))
}

fn perturb(
    query_value: &DMatrix<f64>,
    q: &QuerySpec,
    p: &PrivacyParams,
    design: NoiseDesign,
    budget: BudgetReport,
    stream: &mut RandomStream,
) -> Result<PerturbResult> {
    let check = check_condition(&design, q, p)?;
    if !check.holds {
        return Err(MvgError::ConditionFailed {
            lhs: check.lhs,
            rhs: check.rhs,
        });
    }
    let standard = sample_standard_matrix(stream, q.m(), q.n())?;
    let noise = transform_standard(&design, &standard)?;
    Ok(PerturbResult {
        output: query_value + noise,
        design,
        budget,
        privacy: *p,
        query: *q,
        seed: stream.seed(),
    })
}

/// MVG mechanism with unimodal directional noise (`Ψ = I_n`).
pub fn mvg_unimodal(
    query_value: &DMatrix<f64>,
    q: &QuerySpec,
    p: &PrivacyParams,
    theta: &PrecisionAllocation,
    w_sigma: &DMatrix<f64>,
    stream: &mut RandomStream,
) -> Result<PerturbResult> {
    check_query_value(query_value, q)?;
    let (design, budget) = unimodal_design(q, p, theta, w_sigma)?;
    perturb(query_value, q, p, design, budget, stream)
}

/// MVG mechanism with equi-modal directional noise (`Ψ = Σ`), meant for
/// symmetric square queries. Asymmetric input only triggers a warning.
pub fn mvg_equimodal(
    query_value: &DMatrix<f64>,
    q: &QuerySpec,
    p: &PrivacyParams,
    theta: &PrecisionAllocation,
    w_sigma: &DMatrix<f64>,
    stream: &mut RandomStream,
) -> Result<PerturbResult> {
    if q.m() != q.n() {
        return Err(MvgError::Shape(format!(
            "equi-modal noise needs a square query, got {}x{}",
            q.m(),
            q.n()
        )));
    }
    check_query_value(query_value, q)?;
    let asym = (query_value - query_value.transpose()).amax();
    if asym > 1e-8 {
        warn!("equi-modal noise applied to an asymmetric query value (max |A - A^T| = {asym:e})");
    }
    let (design, budget) = equimodal_design(q, p, theta, w_sigma)?;
    perturb(query_value, q, p, design, budget, stream)
}

/// Classic Gaussian-mechanism scale `s₂ √(2 ln(1.25/δ)) / ε` (valid for ε ≤ 1).
pub fn gaussian_sigma(l2_sensitivity: f64, p: &PrivacyParams) -> f64 {
    l2_sensitivity * (2.0 * (1.25 / p.delta()).ln()).sqrt() / p.epsilon()
}

/// Adds i.i.d. N(0, σ²) noise to every entry, σ from [`gaussian_sigma`].
pub fn gaussian_iid_baseline(
    query_value: &DMatrix<f64>,
    q: &QuerySpec,
    p: &PrivacyParams,
    stream: &mut RandomStream,
) -> Result<DMatrix<f64>> {
    check_query_value(query_value, q)?;
    if p.epsilon() > 1.0 {
        warn!(
            "Gaussian baseline used with epsilon = {} > 1, outside the classic bound",
            p.epsilon()
        );
    }
    let sigma = gaussian_sigma(q.sensitivity(), p);
    let standard = sample_standard_matrix(stream, q.m(), q.n())?;
    Ok(query_value + standard * sigma)
}

fn laplace_draw(stream: &mut RandomStream, scale: f64) -> f64 {
    loop {
        let u = stream.uniform() - 0.5;
        if u != -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// Adds i.i.d. Laplace noise with scale `l1_sensitivity / ε` to every entry.
pub fn laplace_iid_baseline(
    query_value: &DMatrix<f64>,
    q: &QuerySpec,
    epsilon: f64,
    l1_sensitivity: f64,
    stream: &mut RandomStream,
) -> Result<DMatrix<f64>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(MvgError::Domain(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if !(l1_sensitivity.is_finite() && l1_sensitivity > 0.0) {
        return Err(MvgError::Domain(format!(
            "L1 sensitivity must be > 0, got {l1_sensitivity}"
        )));
    }
    check_query_value(query_value, q)?;
    let scale = l1_sensitivity / epsilon;
    let mut out = query_value.clone();
    // column-major, same traversal as the normal sampler
    for x in out.iter_mut() {
        *x += laplace_draw(stream, scale);
    }
    Ok(out)
}

/// Noise directions from a Gaussian-mechanism release of the covariance
/// `XXᵀ/N`: the perturbed matrix is eigendecomposed and its eigenvectors
/// returned as columns, largest eigenvalue first. The first `k` columns are
/// the private principal directions; the rest complete the basis.
///
/// Spends the whole of `budget` under the Gaussian baseline's guarantee.
pub fn derive_directions_dp(
    data: &DMatrix<f64>,
    bounds: &DataBounds,
    budget: &PrivacyParams,
    k: usize,
    stream: &mut RandomStream,
) -> Result<DMatrix<f64>> {
    let (m, n) = data.shape();
    if k == 0 || k > m {
        return Err(MvgError::Shape(format!(
            "k = {k} directions requested from {m} features"
        )));
    }
    if bounds.num_features() != m || bounds.num_samples() != n {
        return Err(MvgError::Shape(format!(
            "bounds describe {}x{} data, got {m}x{n}",
            bounds.num_features(),
            bounds.num_samples()
        )));
    }
    if let Some(x) = data.iter().find(|x| !bounds.contains(**x)) {
        return Err(MvgError::ContractViolation(format!(
            "value {x} outside declared bounds [{}, {}]",
            bounds.lo(),
            bounds.hi()
        )));
    }
    let cov = data * data.transpose() / n as f64;
    let sigma = gaussian_sigma(covariance_sensitivity(bounds), budget);
    let raw = sample_standard_matrix(stream, m, m)?;
    let mut noisy = cov;
    for j in 0..m {
        for i in 0..=j {
            let e = raw[(i, j)] * sigma;
            noisy[(i, j)] += e;
            if i != j {
                noisy[(j, i)] += e;
            }
        }
    }
    let (_, vectors) = sorted_eigen(&noisy);
    Ok(vectors)
}

/// Monte Carlo evaluation of the privacy-loss trace inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicCheck {
    /// Among trials with ‖N‖_F² ≤ ζ(δ)², the fraction whose trace is ≤ 2ε.
    pub conditional_pass_rate: f64,
    /// Fraction of trials with ‖N‖_F² ≤ ζ(δ)².
    pub r1_rate: f64,
    pub trials: usize,
    /// Largest trace value seen inside the concentration event.
    pub max_trace: f64,
}

fn inverse_from_factors(w: &DMatrix<f64>, lambda: &[f64]) -> DMatrix<f64> {
    let mut scaled = w.clone();
    for (j, l) in lambda.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / l);
    }
    scaled * w.transpose()
}

fn argmin(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Draws `trials` noise matrices and evaluates
/// `tr[Ψ⁻¹YᵀΣ⁻¹Δ + Ψ⁻¹ΔᵀΣ⁻¹Y + Ψ⁻¹f₂ᵀΣ⁻¹f₂ − Ψ⁻¹f₁ᵀΣ⁻¹f₁] ≤ 2ε`
/// for `Y = f₁ + Z` on a synthetic neighboring pair: `f₁ = γ·E`,
/// `Δ = f₁ − f₂ = s₂·E`, with `E = u vᵀ` built from the least-noisy row and
/// column directions of the design. The design is not required to satisfy
/// the sufficient condition, so violating designs can be inspected too.
pub fn mvg_verify_characteristic(
    q: &QuerySpec,
    p: &PrivacyParams,
    design: &NoiseDesign,
    trials: usize,
    stream: &mut RandomStream,
) -> Result<CharacteristicCheck> {
    if trials == 0 {
        return Err(MvgError::Config("need at least one trial".into()));
    }
    if design.m() != q.m() || design.n() != q.n() {
        return Err(MvgError::Shape(format!(
            "design is {}x{} but query is {}x{}",
            design.m(),
            design.n(),
            q.m(),
            q.n()
        )));
    }
    let sigma_inv = inverse_from_factors(design.w_sigma(), design.lambda_sigma());
    let psi_inv = inverse_from_factors(design.w_psi(), design.lambda_psi());
    let u = design
        .w_sigma()
        .column(argmin(design.lambda_sigma()))
        .into_owned();
    let v = design
        .w_psi()
        .column(argmin(design.lambda_psi()))
        .into_owned();
    let e = &u * v.transpose();
    let f1 = &e * q.gamma();
    let delta_q = &e * q.sensitivity();
    let f2 = &f1 - &delta_q;

    let quad =
        |a: &DMatrix<f64>, b: &DMatrix<f64>| (&psi_inv * a.transpose() * &sigma_inv * b).trace();
    let fixed = quad(&f2, &f2) - quad(&f1, &f1);
    let z = zeta(p.delta(), q.m(), q.n())?;
    let radius = z * z;
    let bound = 2.0 * p.epsilon();

    let (mut in_r1, mut passed) = (0usize, 0usize);
    let mut max_trace = f64::NEG_INFINITY;
    for _ in 0..trials {
        let standard = sample_standard_matrix(stream, q.m(), q.n())?;
        if standard.norm_squared() > radius {
            continue;
        }
        in_r1 += 1;
        let y = &f1 + transform_standard(design, &standard)?;
        let t = quad(&y, &delta_q) + quad(&delta_q, &y) + fixed;
        max_trace = max_trace.max(t);
        if t <= bound {
            passed += 1;
        }
    }
    Ok(CharacteristicCheck {
        conditional_pass_rate: if in_r1 == 0 {
            1.0
        } else {
            passed as f64 / in_r1 as f64
        },
        r1_rate: in_r1 as f64 / trials as f64,
        trials,
        max_trace,
    })
}
