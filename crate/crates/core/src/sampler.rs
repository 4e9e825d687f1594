//! Sampling from the zero-mean matrix-variate Gaussian MVG(0, Σ, Ψ).
//!
//! A draw is the affine image `Z = B_Σ · N · B_Ψᵀ` of an i.i.d. standard
//! normal matrix `N`, with `B_Σ = W_Σ Λ_Σ^{1/2}` and `B_Ψ = W_Ψ Λ_Ψ^{1/2}`
//! taken from the eigen/singular decompositions `Σ = W_Σ Λ_Σ W_Σᵀ`. A
//! Cholesky factor would serve equally well; the factored form is kept so the
//! same `(W, Λ)` objects drive both the budget check and the sampler.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{MvgError, Result};

/// Elementwise tolerance on `WᵀW = I`.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Dense covariances with an eigenvalue below this are rejected.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Seeded source of standard-normal and uniform variates.
///
/// Generator: ChaCha20 (`rand_chacha`) seeded with `seed_from_u64`; normals
/// come from `rand_distr::StandardNormal` (ziggurat). Identical seeds give
/// bit-identical sequences within this implementation.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Seed the stream was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Factored covariance pair `Σ = W_Σ diag(λ_Σ) W_Σᵀ`, `Ψ = W_Ψ diag(λ_Ψ) W_Ψᵀ`.
///
/// Columns of `W_Σ` are the row-noise directions and `λ_Σ[i]` is the noise
/// variance along column `i`; likewise for Ψ on the column side.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDesign {
    w_sigma: DMatrix<f64>,
    lambda_sigma: Vec<f64>,
    w_psi: DMatrix<f64>,
    lambda_psi: Vec<f64>,
}

fn check_factor(name: &str, w: &DMatrix<f64>, lambda: &[f64]) -> Result<()> {
    if !w.is_square() || w.nrows() != lambda.len() || w.nrows() == 0 {
        return Err(MvgError::Shape(format!(
            "{name}: direction matrix is {}x{} with {} variances",
            w.nrows(),
            w.ncols(),
            lambda.len()
        )));
    }
    if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(MvgError::DegenerateDesign(format!(
            "{name}: variance {l} is not positive"
        )));
    }
    check_orthonormal(name, w)
}

pub(crate) fn check_orthonormal(name: &str, w: &DMatrix<f64>) -> Result<()> {
    if !w.is_square() {
        return Err(MvgError::Shape(format!(
            "{name}: direction matrix must be square"
        )));
    }
    let gram = w.transpose() * w;
    for ((i, j), g) in gram
        .iter()
        .enumerate()
        .map(|(k, g)| ((k % w.ncols(), k / w.ncols()), g))
    {
        let target = if i == j { 1.0 } else { 0.0 };
        if (g - target).abs() > ORTHONORMAL_TOL {
            return Err(MvgError::DegenerateDesign(format!(
                "{name}: directions are not orthonormal (WᵀW[{i},{j}] = {g})"
            )));
        }
    }
    Ok(())
}

impl NoiseDesign {
    pub fn new(
        w_sigma: DMatrix<f64>,
        lambda_sigma: Vec<f64>,
        w_psi: DMatrix<f64>,
        lambda_psi: Vec<f64>,
    ) -> Result<Self> {
        check_factor("sigma", &w_sigma, &lambda_sigma)?;
        check_factor("psi", &w_psi, &lambda_psi)?;
        Ok(Self {
            w_sigma,
            lambda_sigma,
            w_psi,
            lambda_psi,
        })
    }

    /// Σ = s·I_m, Ψ = p·I_n.
    pub fn isotropic(m: usize, n: usize, sigma_scale: f64, psi_scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(m, m),
            vec![sigma_scale; m],
            DMatrix::identity(n, n),
            vec![psi_scale; n],
        )
    }

    /// Build a design from dense symmetric positive-definite Σ and Ψ.
    pub fn from_dense(sigma: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<Self> {
        let (w_sigma, lambda_sigma) = factor_dense("sigma", sigma)?;
        let (w_psi, lambda_psi) = factor_dense("psi", psi)?;
        Self::new(w_sigma, lambda_sigma, w_psi, lambda_psi)
    }

    pub fn m(&self) -> usize {
        self.lambda_sigma.len()
    }

    pub fn n(&self) -> usize {
        self.lambda_psi.len()
    }

    pub fn w_sigma(&self) -> &DMatrix<f64> {
        &self.w_sigma
    }

    pub fn lambda_sigma(&self) -> &[f64] {
        &self.lambda_sigma
    }

    pub fn w_psi(&self) -> &DMatrix<f64> {
        &self.w_psi
    }

    pub fn lambda_psi(&self) -> &[f64] {
        &self.lambda_psi
    }

    /// Row-wise covariance Σ.
    pub fn sigma(&self) -> DMatrix<f64> {
        reconstruct(&self.w_sigma, &self.lambda_sigma)
    }

    /// Column-wise covariance Ψ.
    pub fn psi(&self) -> DMatrix<f64> {
        reconstruct(&self.w_psi, &self.lambda_psi)
    }

    /// Design for the transposed draw: (Ψ, Σ).
    pub fn transposed(&self) -> Self {
        Self {
            w_sigma: self.w_psi.clone(),
            lambda_sigma: self.lambda_psi.clone(),
            w_psi: self.w_sigma.clone(),
            lambda_psi: self.lambda_sigma.clone(),
        }
    }
}

fn reconstruct(w: &DMatrix<f64>, lambda: &[f64]) -> DMatrix<f64> {
    let mut scaled = w.clone();
    for (j, l) in lambda.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*l);
    }
    let mut out = scaled * w.transpose();
    // exact symmetry
    for i in 0..out.nrows() {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn factor_dense(name: &str, a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(MvgError::Shape(format!(
            "{name}: covariance must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(MvgError::DegenerateDesign(format!(
                    "{name}: covariance is not symmetric"
                )));
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    if let Some(l) = eig.eigenvalues.iter().find(|l| **l < EIGENVALUE_FLOOR) {
        return Err(MvgError::DegenerateDesign(format!(
            "{name}: eigenvalue {l} below floor {EIGENVALUE_FLOOR}"
        )));
    }
    Ok((eig.eigenvectors, eig.eigenvalues.iter().copied().collect()))
}

/// m×n matrix of i.i.d. N(0, 1) draws, filled in column-major order
/// (the order of vec(N)).
pub fn sample_standard_matrix(
    stream: &mut RandomStream,
    m: usize,
    n: usize,
) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(MvgError::Shape(format!("cannot sample a {m}x{n} matrix")));
    }
    let data: Vec<f64> = (0..m * n).map(|_| stream.standard_normal()).collect();
    Ok(DMatrix::from_vec(m, n, data))
}

/// Square-root factors with `B_Σ B_Σᵀ = Σ` and `B_Ψ B_Ψᵀ = Ψ`.
pub fn factor_design(design: &NoiseDesign) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok((
        root_factor(&design.w_sigma, &design.lambda_sigma)?,
        root_factor(&design.w_psi, &design.lambda_psi)?,
    ))
}

fn root_factor(w: &DMatrix<f64>, lambda: &[f64]) -> Result<DMatrix<f64>> {
    let mut b = w.clone();
    for (j, l) in lambda.iter().enumerate() {
        if !(l.is_finite() && *l > 0.0) {
            return Err(MvgError::DegenerateDesign(format!(
                "variance {l} is not positive"
            )));
        }
        b.column_mut(j).scale_mut(l.sqrt());
    }
    Ok(b)
}

/// Maps a standard-normal draw to `B_Σ · N · B_Ψᵀ`.
pub fn transform_standard(design: &NoiseDesign, standard: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if standard.shape() != (design.m(), design.n()) {
        return Err(MvgError::Shape(format!(
            "standard draw is {:?}, design is {}x{}",
            standard.shape(),
            design.m(),
            design.n()
        )));
    }
    let (b_sigma, b_psi) = factor_design(design)?;
    Ok(b_sigma * standard * b_psi.transpose())
}

pub fn sample_mvg(stream: &mut RandomStream, design: &NoiseDesign) -> Result<DMatrix<f64>> {
    let standard = sample_standard_matrix(stream, design.m(), design.n())?;
    transform_standard(design, &standard)
}
