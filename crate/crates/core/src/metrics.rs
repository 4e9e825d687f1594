//! Utility metrics: captured variance, Δρ, RSS over principal components,
//! and test RMSE of a linear ridge regressor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{MvgError, Result};

const UNIT_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalues in (−dust, 0) are treated as exact zeros.
pub const NEGATIVE_DUST: f64 = 1e-10;

/// Mean metric value over repeated trials with a normal-approximation 95% CI.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric_name: String,
    pub mean: f64,
    pub ci95_half_width: f64,
    pub trials: usize,
}

impl EvalReport {
    /// `ci95 = 1.96 · s / √k` with the unbiased sample std `s`; a single
    /// trial has no spread estimate and reports 0.
    pub fn from_samples(metric_name: impl Into<String>, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(MvgError::Config("cannot summarise zero trials".into()));
        }
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let ci95_half_width = if k < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            1.96 * var.sqrt() / (k as f64).sqrt()
        };
        Ok(Self {
            metric_name: metric_name.into(),
            mean,
            ci95_half_width,
            trials: k,
        })
    }
}

fn check_symmetric(name: &str, s: &DMatrix<f64>) -> Result<()> {
    if !s.is_square() {
        return Err(MvgError::Shape(format!(
            "{name} must be square, got {:?}",
            s.shape()
        )));
    }
    let tol = SYMMETRY_TOL * s.amax().max(1.0);
    for i in 0..s.nrows() {
        for j in 0..i {
            if (s[(i, j)] - s[(j, i)]).abs() > tol {
                return Err(MvgError::ContractViolation(format!(
                    "{name} is not symmetric"
                )));
            }
        }
    }
    Ok(())
}

/// Eigenpairs of a symmetric matrix in descending eigenvalue order; equal
/// eigenvalues keep the solver's index order. Column `i` of the returned
/// matrix pairs with eigenvalue `i`.
pub fn sorted_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order
        .iter()
        .map(|&i| {
            let l = eig.eigenvalues[i];
            if l < 0.0 && l > -NEGATIVE_DUST {
                0.0
            } else {
                l
            }
        })
        .collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Leading eigenvector of the symmetric part `(S + Sᵀ)/2`.
pub fn first_principal_component(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !s.is_square() {
        return Err(MvgError::Shape(format!(
            "expected a square matrix, got {:?}",
            s.shape()
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let (_, vectors) = sorted_eigen(&sym);
    Ok(vectors.column(0).into_owned())
}

/// ρ = vᵀ S̄ v.
pub fn captured_variance(v: &DVector<f64>, s_bar: &DMatrix<f64>) -> Result<f64> {
    check_symmetric("s_bar", s_bar)?;
    if v.len() != s_bar.nrows() {
        return Err(MvgError::Shape(format!(
            "vector has length {} but matrix is {}x{}",
            v.len(),
            s_bar.nrows(),
            s_bar.ncols()
        )));
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(MvgError::ContractViolation(format!(
            "v must be a unit vector, |v| = {norm}"
        )));
    }
    Ok((v.transpose() * s_bar * v)[(0, 0)])
}

/// Δρ(v) = λ₁(S̄) − vᵀ S̄ v, clamped at zero.
pub fn delta_rho(v: &DVector<f64>, s_bar: &DMatrix<f64>) -> Result<f64> {
    let rho = captured_variance(v, s_bar)?;
    let (values, _) = sorted_eigen(s_bar);
    Ok((values[0] - rho).max(0.0))
}

/// Σᵢ (λᵢ(S̄) − ṽᵢᵀ S̄ ṽᵢ)², pairing the i-th largest eigenvalue of S̄ with
/// the i-th principal direction of S̃.
pub fn rss(s_tilde: &DMatrix<f64>, s_bar: &DMatrix<f64>) -> Result<f64> {
    if s_tilde.shape() != s_bar.shape() {
        return Err(MvgError::Shape(format!(
            "s_tilde is {:?} but s_bar is {:?}",
            s_tilde.shape(),
            s_bar.shape()
        )));
    }
    check_symmetric("s_tilde", s_tilde)?;
    check_symmetric("s_bar", s_bar)?;
    let (lambda, _) = sorted_eigen(s_bar);
    let (_, v_tilde) = sorted_eigen(s_tilde);
    let mut acc = 0.0;
    for (i, l) in lambda.iter().enumerate() {
        let v = v_tilde.column(i);
        let rho = (v.transpose() * s_bar * v)[(0, 0)];
        acc += (l - rho).powi(2);
    }
    Ok(acc)
}

/// Closed-form ridge fit `w = (XXᵀ + reg·I)⁻¹ X y` (no intercept) on the
/// training columns, scored by RMSE on the test columns.
pub fn ridge_regression_rmse(
    train_x: &DMatrix<f64>,
    train_y: &DVector<f64>,
    test_x: &DMatrix<f64>,
    test_y: &DVector<f64>,
    reg: f64,
) -> Result<f64> {
    if !(reg.is_finite() && reg > 0.0) {
        return Err(MvgError::Domain(format!(
            "ridge regularisation must be > 0, got {reg}"
        )));
    }
    if train_x.ncols() != train_y.len() || test_x.ncols() != test_y.len() {
        return Err(MvgError::Shape(
            "feature columns and targets disagree in length".into(),
        ));
    }
    if train_x.nrows() != test_x.nrows() {
        return Err(MvgError::Shape(
            "train and test feature counts differ".into(),
        ));
    }
    if test_y.is_empty() {
        return Err(MvgError::Shape("empty test set".into()));
    }
    let d = train_x.nrows();
    let gram = train_x * train_x.transpose() + DMatrix::identity(d, d) * reg;
    let rhs = train_x * train_y;
    let w = gram
        .cholesky()
        .ok_or_else(|| MvgError::Domain("ridge normal equations are not positive definite".into()))?
        .solve(&rhs);
    let pred = test_x.transpose() * w;
    let mse = (pred - test_y).norm_squared() / test_y.len() as f64;
    Ok(mse.sqrt())
}
