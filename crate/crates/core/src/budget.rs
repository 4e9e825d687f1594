//! Closed-form privacy quantities for the MVG mechanism.
//!
//! The sufficient condition for (ε, δ)-differential privacy is
//!
//! ```text
//! ‖σ(Σ⁻¹)‖₂ · ‖σ(Ψ⁻¹)‖₂  ≤  φ*²,   φ* = (−β + √(β² + 8αε)) / (2α)
//! α = (H_r + H_{r,1/2}) γ² + 2 H_r γ s₂
//! β = 2 (mn)^{1/4} H_r s₂ ζ(δ)
//! ζ(δ) = 2 √(−mn ln δ) − 2 ln δ + mn
//! ```
//!
//! where r = min(m, n), γ bounds ‖f(X)‖_F and s₂ is the L2-sensitivity.
//! Everything here is a pure function of its arguments.

use crate::error::{MvgError, Result};
use crate::sampler::NoiseDesign;

/// Relative slack allowed on `lhs ≤ rhs` to absorb floating-point error.
pub const CONDITION_RTOL: f64 = 1e-9;

/// (ε, δ) pair. δ must lie strictly inside (0, 1): the mechanism cannot give
/// a pure ε guarantee, since ζ(δ) needs ln δ < 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MvgError::Domain(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if delta == 0.0 {
            return Err(MvgError::Domain(
                "delta = 0 requested; the MVG mechanism only offers (epsilon, delta) guarantees \
                 with 0 < delta < 1"
                    .into(),
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(MvgError::Domain(format!(
                "delta must be in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The slice `(fraction·ε, fraction·δ)` of this budget.
    pub fn scaled(&self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(MvgError::Domain(format!(
                "budget fraction must be in (0, 1], got {fraction}"
            )));
        }
        Self::new(self.epsilon * fraction, self.delta * fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Identity,
    Covariance,
    Custom,
}

/// Shape and norm bounds of a matrix-valued query f(X) ∈ ℝ^{m×n}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySpec {
    m: usize,
    n: usize,
    sensitivity: f64,
    gamma: f64,
    kind: QueryKind,
}

impl QuerySpec {
    pub fn new(m: usize, n: usize, sensitivity: f64, gamma: f64, kind: QueryKind) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(MvgError::Shape(format!(
                "query dimensions must be positive, got {m}x{n}"
            )));
        }
        if !(sensitivity.is_finite() && sensitivity > 0.0) {
            return Err(MvgError::Domain(format!(
                "sensitivity must be > 0, got {sensitivity}"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(MvgError::Domain(format!("gamma must be > 0, got {gamma}")));
        }
        if sensitivity > 2.0 * gamma {
            return Err(MvgError::Domain(format!(
                "sensitivity {sensitivity} exceeds 2*gamma = {}; impossible for a query bounded by gamma",
                2.0 * gamma
            )));
        }
        Ok(Self {
            m,
            n,
            sensitivity,
            gamma,
            kind,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// r = min(m, n).
    pub fn r(&self) -> usize {
        self.m.min(self.n)
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> QueryKind {
        self.kind
    }

    /// Same bounds, with rows and columns swapped.
    pub fn transposed(&self) -> Self {
        Self {
            m: self.n,
            n: self.m,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// Ψ = I_n, directional noise on rows only.
    Unimodal,
    /// Ψ = Σ.
    EquiModal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub h_r: f64,
    pub h_r_half: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi_max: f64,
    pub precision_budget: f64,
    pub mode: BudgetMode,
}

/// (H_r, H_{r,1/2}) = (Σ 1/i, Σ 1/√i) for i = 1..=r.
pub fn harmonic_numbers(r: usize) -> Result<(f64, f64)> {
    if r == 0 {
        return Err(MvgError::Domain("harmonic numbers need r >= 1".into()));
    }
    // smallest terms first
    let (mut h, mut h_half) = (0.0, 0.0);
    for i in (1..=r).rev() {
        let x = i as f64;
        h += 1.0 / x;
        h_half += 1.0 / x.sqrt();
    }
    Ok((h, h_half))
}

/// Laurent-Massart radius ζ(δ) = 2√(−mn ln δ) − 2 ln δ + mn (natural log).
pub fn zeta(delta: f64, m: usize, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MvgError::Domain(format!(
            "zeta needs delta in (0, 1), got {delta}"
        )));
    }
    if m == 0 || n == 0 {
        return Err(MvgError::Shape(format!(
            "zeta needs positive dimensions, got {m}x{n}"
        )));
    }
    let mn = (m * n) as f64;
    let ln_d = delta.ln();
    Ok(2.0 * (-mn * ln_d).sqrt() - 2.0 * ln_d + mn)
}

pub fn alpha_beta(q: &QuerySpec, p: &PrivacyParams) -> Result<(f64, f64)> {
    let (h_r, h_r_half) = harmonic_numbers(q.r())?;
    let z = zeta(p.delta(), q.m(), q.n())?;
    Ok(alpha_beta_from(q, h_r, h_r_half, z))
}

fn alpha_beta_from(q: &QuerySpec, h_r: f64, h_r_half: f64, z: f64) -> (f64, f64) {
    let (g, s) = (q.gamma(), q.sensitivity());
    let alpha = (h_r + h_r_half) * g * g + 2.0 * h_r * g * s;
    let mn = (q.m() * q.n()) as f64;
    let beta = 2.0 * mn.powf(0.25) * h_r * s * z;
    (alpha, beta)
}

/// Positive root of αφ² + βφ − 2ε = 0.
pub fn phi_bound(alpha: f64, beta: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("epsilon", epsilon)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(MvgError::Domain(format!(
                "phi_bound needs {name} > 0, got {v}"
            )));
        }
    }
    // Same root as (−β + √(β² + 8αε)) / 2α, without the cancellation when β² ≫ 8αε.
    let disc = (beta * beta + 8.0 * alpha * epsilon).sqrt();
    Ok(4.0 * epsilon / (beta + disc))
}

/// Outcome of evaluating the sufficient condition on a concrete design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub holds: bool,
    /// ‖σ(Σ⁻¹)‖₂ · ‖σ(Ψ⁻¹)‖₂
    pub lhs: f64,
    /// φ*²
    pub rhs: f64,
}

impl ConditionCheck {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

pub fn check_condition(
    design: &NoiseDesign,
    q: &QuerySpec,
    p: &PrivacyParams,
) -> Result<ConditionCheck> {
    if design.m() != q.m() || design.n() != q.n() {
        return Err(MvgError::Shape(format!(
            "design is {}x{} but query is {}x{}",
            design.m(),
            design.n(),
            q.m(),
            q.n()
        )));
    }
    let inv_norm = |lambda: &[f64]| -> Result<f64> {
        let mut acc = 0.0;
        for &l in lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(MvgError::DegenerateDesign(format!(
                    "singular value {l} is not strictly positive"
                )));
            }
            acc += 1.0 / (l * l);
        }
        Ok(acc.sqrt())
    };
    let lhs = inv_norm(design.lambda_sigma())? * inv_norm(design.lambda_psi())?;
    let (alpha, beta) = alpha_beta(q, p)?;
    let phi = phi_bound(alpha, beta, p.epsilon())?;
    let rhs = phi * phi;
    Ok(ConditionCheck {
        holds: lhs <= rhs * (1.0 + CONDITION_RTOL),
        lhs,
        rhs,
    })
}

fn report(q: &QuerySpec, p: &PrivacyParams, mode: BudgetMode) -> Result<BudgetReport> {
    let (h_r, h_r_half) = harmonic_numbers(q.r())?;
    let z = zeta(p.delta(), q.m(), q.n())?;
    let (alpha, beta) = alpha_beta_from(q, h_r, h_r_half, z);
    let phi_max = phi_bound(alpha, beta, p.epsilon())?;
    let precision_budget = match mode {
        BudgetMode::Unimodal => phi_max.powi(4) / q.n() as f64,
        BudgetMode::EquiModal => phi_max * phi_max,
    };
    Ok(BudgetReport {
        h_r,
        h_r_half,
        zeta: z,
        alpha,
        beta,
        phi_max,
        precision_budget,
        mode,
    })
}

/// Precision budget with Ψ = I_n: Σᵢ 1/σᵢ(Σ)² ≤ φ*⁴ / n.
pub fn precision_budget_unimodal(q: &QuerySpec, p: &PrivacyParams) -> Result<BudgetReport> {
    report(q, p, BudgetMode::Unimodal)
}

/// Precision budget with Ψ = Σ (square queries only): Σᵢ 1/σᵢ(Σ)² ≤ φ*².
pub fn precision_budget_equimodal(q: &QuerySpec, p: &PrivacyParams) -> Result<BudgetReport> {
    if q.m() != q.n() {
        return Err(MvgError::Shape(format!(
            "equi-modal noise needs a square query, got {}x{}",
            q.m(),
            q.n()
        )));
    }
    report(q, p, BudgetMode::EquiModal)
}
