//! Conditional Gaussian moments and the block-inverse identity behind the
//! orthant covariance.
//!
//! For a zero-mean Gaussian with covariance `R`, the law of coordinate `i`
//! given coordinates `0..i` is `N(b_iᵀ v_{0..i}, σ_i²)` with
//! `b_i = R_{0..i,0..i}⁻¹ R_{0..i,i}` and `σ_i² = R_ii - R_{0..i,i}ᵀ b_i`.
//! [`ConditionalMoments`] walks `i = 0, 1, ...` keeping the inverse of the
//! leading block up to date with a rank-one block update, so each step costs
//! O(i²) instead of a fresh factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::CovarianceBundle;

/// Relative floor on a conditional variance: `σ_i² > VARIANCE_FLOOR · R_ii`.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Moments of coordinate `dim` conditioned on coordinates `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    dim: usize,
    /// `R_{0..dim, 0..dim}⁻¹`
    q_inv: DMatrix<f64>,
    b: DVector<f64>,
    cond_var: f64,
}

fn check_square(r: &DMatrix<f64>) -> Result<()> {
    if !r.is_square() || r.nrows() == 0 {
        return Err(Error::invalid(format!(
            "covariance must be square and non-empty, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

fn checked_variance(dim: usize, var: f64, diag: f64) -> Result<f64> {
    let floor = VARIANCE_FLOOR * diag;
    if !(var > floor) || !var.is_finite() {
        return Err(Error::degenerate(
            Some(dim),
            format!("conditional variance {var:e} is not above the floor {floor:e}"),
        ));
    }
    Ok(var)
}

impl ConditionalMoments {
    /// State for the first coordinate: no conditioning, `σ_0² = R_00`.
    pub fn start(r: &DMatrix<f64>) -> Result<Self> {
        check_square(r)?;
        let r00 = r[(0, 0)];
        if !(r00 > 0.0) || !r00.is_finite() {
            return Err(Error::degenerate(
                Some(0),
                format!("leading variance {r00:e} is not positive"),
            ));
        }
        Ok(Self {
            dim: 0,
            q_inv: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            cond_var: r00,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q_inv(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn cond_var(&self) -> f64 {
        self.cond_var
    }

    /// Inverse of the leading `(dim+1)×(dim+1)` block of `R`:
    /// `[[Q + b bᵀ/σ², -b/σ²], [-bᵀ/σ², 1/σ²]]`.
    pub fn extended_inverse(&self) -> DMatrix<f64> {
        let d = self.dim;
        let inv_var = 1.0 / self.cond_var;
        let mut q = DMatrix::zeros(d + 1, d + 1);
        for j in 0..d {
            let bj = self.b[j] * inv_var;
            for i in 0..=j {
                let v = self.q_inv[(i, j)] + self.b[i] * bj;
                q[(i, j)] = v;
            }
            q[(j, d)] = -bj;
        }
        q[(d, d)] = inv_var;
        // upper triangle only, mirrored: symmetric bit for bit
        q.fill_lower_triangle_with_upper_triangle();
        q
    }

    /// Moves to coordinate `dim + 1`.
    pub fn advance(&self, r: &DMatrix<f64>) -> Result<Self> {
        let next = self.dim + 1;
        if r.nrows() <= next || !r.is_square() {
            return Err(Error::invalid(format!(
                "covariance of size {} has no coordinate {next}",
                r.nrows()
            )));
        }
        let q_inv = self.extended_inverse();
        let col = r.column(next).rows(0, next).into_owned();
        let mut b = &q_inv * &col;
        // one refinement step against the exact block keeps the chained
        // inverse from accumulating rounding error on ill-conditioned R
        let residual = &col - r.view((0, 0), (next, next)) * &b;
        b += &q_inv * residual;
        let var = r[(next, next)] - col.dot(&b);
        let cond_var = checked_variance(next, var, r[(next, next)])?;
        Ok(Self {
            dim: next,
            q_inv,
            b,
            cond_var,
        })
    }
}

pub fn advance_moments(state: &ConditionalMoments, r: &DMatrix<f64>) -> Result<ConditionalMoments> {
    state.advance(r)
}

/// `(b_dim, σ_dim²)` from a fresh Cholesky factorization of the leading block.
/// Independent of the recursion in [`ConditionalMoments`].
pub fn direct_moments(r: &DMatrix<f64>, dim: usize) -> Result<(DVector<f64>, f64)> {
    check_square(r)?;
    if dim == 0 || dim >= r.nrows() {
        return Err(Error::invalid(format!("dimension {dim} outside 1..{}", r.nrows())));
    }
    let lead = r.view((0, 0), (dim, dim)).into_owned();
    let col = r.view((0, dim), (dim, 1)).into_owned();
    let chol = lead
        .cholesky()
        .ok_or_else(|| Error::degenerate(Some(dim), "leading block is not positive definite"))?;
    let b = chol.solve(&col).column(0).into_owned();
    let var = r[(dim, dim)] - col.column(0).dot(&b);
    Ok((b, checked_variance(dim, var, r[(dim, dim)])?))
}

fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::degenerate(None, format!("{what} is not positive definite")))
}

/// Intermediate quantities of the reduction from the `2N+2`-dimensional
/// integral to the `N+1`-dimensional orthant integral for one test pattern.
#[derive(Debug, Clone)]
pub struct BlockInverseWorkspace {
    /// `Σ⁻¹ Σ_X*`
    pub a: DVector<f64>,
    /// `Σ_** - Σ_X*ᵀ Σ⁻¹ Σ_X*`
    pub sigma_star_sq: f64,
    /// `diag(1, y_1, ..., y_N)`
    pub a12: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    /// `I - A12 A22⁻¹ A12`
    pub a_mat: DMatrix<f64>,
    /// `σ*² + 1 + aᵀ (I + Σ⁻¹)⁻¹ a`
    pub q: f64,
}

impl BlockInverseWorkspace {
    pub fn build(bundle: &CovarianceBundle, labels: &[i8], test_index: usize) -> Result<Self> {
        let n = bundle.n_train();
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {n} training patterns",
                labels.len()
            )));
        }
        if test_index >= bundle.n_test() {
            return Err(Error::invalid(format!(
                "test index {test_index} out of {}",
                bundle.n_test()
            )));
        }
        let sigma_inv = spd_inverse(&bundle.sigma, "training covariance")?;
        let cross = bundle.cross.column(test_index).into_owned();
        let a = &sigma_inv * &cross;
        let sigma_star_sq = bundle.test[(test_index, test_index)] - cross.dot(&a);
        if !(sigma_star_sq > 0.0) {
            return Err(Error::degenerate(
                None,
                format!("test conditional variance {sigma_star_sq:e} is not positive"),
            ));
        }

        let mut a12 = DMatrix::zeros(n + 1, n + 1);
        a12[(0, 0)] = 1.0;
        for (i, &y) in labels.iter().enumerate() {
            a12[(i + 1, i + 1)] = f64::from(y);
        }

        let s = 1.0 / sigma_star_sq;
        let mut a22 = DMatrix::zeros(n + 1, n + 1);
        a22[(0, 0)] = 1.0 + s;
        for i in 0..n {
            a22[(0, i + 1)] = -a[i] * s;
            a22[(i + 1, 0)] = -a[i] * s;
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                a22[(i + 1, j + 1)] = id + sigma_inv[(i, j)] + a[i] * a[j] * s;
            }
        }
        let a22_inv = spd_inverse(&a22, "A22")?;
        let a_mat = DMatrix::identity(n + 1, n + 1) - &a12 * a22_inv * &a12;

        let mut i_plus_sigma_inv = sigma_inv;
        for i in 0..n {
            i_plus_sigma_inv[(i, i)] += 1.0;
        }
        let chol = i_plus_sigma_inv
            .cholesky()
            .ok_or_else(|| Error::degenerate(None, "I + Σ⁻¹ is not positive definite"))?;
        let q = sigma_star_sq + 1.0 + a.dot(&chol.solve(&a));

        Ok(Self {
            a,
            sigma_star_sq,
            a12,
            a22,
            a_mat,
            q,
        })
    }
}

/// Orthant covariance for one test pattern, test coordinate first:
/// `I + A12 Σ' A12`.
pub fn orthant_covariance(bundle: &CovarianceBundle, labels: &[i8], test_index: usize) -> DMatrix<f64> {
    let n = bundle.n_train();
    let composite = bundle.composite(test_index);
    let sign = |k: usize| if k == 0 { 1.0 } else { f64::from(labels[k - 1]) };
    DMatrix::from_fn(n + 1, n + 1, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id + sign(i) * composite[(i, j)] * sign(j)
    })
}

/// Largest entry of `|A·R - I|` where `A` comes from the latent-variable
/// reduction and `R = I + A12 Σ' A12`. Zero up to rounding when the
/// reduction is consistent.
pub fn verify_block_inverse_identity(bundle: &CovarianceBundle, labels: &[i8], test_index: usize) -> Result<f64> {
    let ws = BlockInverseWorkspace::build(bundle, labels, test_index)?;
    let r = orthant_covariance(bundle, labels, test_index);
    let n = r.nrows();
    let residual = ws.a_mat * r - DMatrix::identity(n, n);
    Ok(residual.amax())
}
