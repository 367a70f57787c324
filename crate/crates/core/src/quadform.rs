//! Quadratic forms and the two block-quadratic minimization kernels.
//!
//! For a symmetric positive definite `G = [Gxx Gxu; Gux Guu]` the Schur
//! complement `P = Gxx - Gxu Guu⁻¹ Gux` is both
//!
//! * the minimum of `QF(G, (x, u))` over vectors `u` (attained at
//!   `u = -Guu⁻¹ Gux x`), and
//! * the minimum of `tr(G cov(X, q(X)))` over zero-mean maps `q`
//!   (attained by the linear map `q(X) = -Guu⁻¹ Gux (X - E[X])`).
//!
//! All solves against `Guu` go through a Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on the minimum eigenvalue used by the PD and PSD tests.
pub const PD_TOL: f64 = 1e-9;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`; `+inf` for an empty matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn check_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let min_eig = min_eigenvalue(m);
    if min_eig > PD_TOL {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { what: what.to_string(), min_eig })
    }
}

pub fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let min_eig = min_eigenvalue(m);
    if min_eig >= -PD_TOL {
        Ok(())
    } else {
        Err(Error::NotPsd { what: what.to_string(), min_eig })
    }
}

/// Solves `M Y = rhs` for symmetric PD `M`. An empty `M` yields an empty `Y`.
pub fn pd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() || m.nrows() != rhs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve with {}x{} system and {}x{} right-hand side",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, rhs.ncols()));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularBlock(format!("{}x{} block has no Cholesky factor", m.nrows(), m.ncols())))?;
    Ok(chol.solve(rhs))
}

/// `xᵀ G x`.
pub fn quad_form(g: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    if g.nrows() != x.len() || g.ncols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "quadratic form of {}x{} matrix with vector of length {}",
            g.nrows(),
            g.ncols(),
            x.len()
        )));
    }
    Ok(x.dot(&(g * x)))
}

/// A symmetric PD matrix split into an `X` block (first `split` coordinates)
/// and a `U` block (the rest).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedPd {
    g: DMatrix<f64>,
    split: usize,
}

impl PartitionedPd {
    pub fn new(g: DMatrix<f64>, split: usize) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", g.nrows(), g.ncols())));
        }
        if split > g.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "split index {split} exceeds dimension {}",
                g.nrows()
            )));
        }
        let g = symmetrize(&g);
        check_pd(&g, "G")?;
        Ok(Self { g, split })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn x_dim(&self) -> usize {
        self.split
    }

    pub fn u_dim(&self) -> usize {
        self.g.nrows() - self.split
    }

    pub fn xx(&self) -> DMatrix<f64> {
        self.g.view((0, 0), (self.split, self.split)).into_owned()
    }

    pub fn ux(&self) -> DMatrix<f64> {
        self.g.view((self.split, 0), (self.u_dim(), self.split)).into_owned()
    }

    pub fn uu(&self) -> DMatrix<f64> {
        self.g.view((self.split, self.split), (self.u_dim(), self.u_dim())).into_owned()
    }

    /// `-Guu⁻¹ Gux`, the `u_dim × x_dim` minimizing gain.
    pub fn minimizing_gain(&self) -> Result<DMatrix<f64>> {
        Ok(-pd_solve(&self.uu(), &self.ux())?)
    }
}

/// `Gxx - Gxu Guu⁻¹ Gux`, symmetrized.
pub fn schur_complement(pg: &PartitionedPd) -> Result<DMatrix<f64>> {
    let gain = pg.minimizing_gain()?;
    // Gxx + Gxu (-Guu⁻¹ Gux)
    let p = pg.xx() + pg.ux().transpose() * gain;
    Ok(symmetrize(&p))
}

/// Minimizes `QF(G, (x, u))` over `u`. Returns the minimizer and the minimum.
pub fn min_vector(pg: &PartitionedPd, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if x.len() != pg.x_dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for X block of size {}",
            x.len(),
            pg.x_dim()
        )));
    }
    let u_star = pg.minimizing_gain()? * x;
    let value = quad_form(&schur_complement(pg)?, x)?;
    Ok((u_star, value))
}

/// Minimizes `tr(G cov(X, q(X)))` over zero-mean maps `q` for `X` with
/// covariance `cov_x`. Returns the gain of the optimal map `x ↦ gain (x - μ)`
/// and the minimum `tr(P cov_x)`.
pub fn min_functional(pg: &PartitionedPd, cov_x: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if cov_x.nrows() != pg.x_dim() || cov_x.ncols() != pg.x_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} covariance for X block of size {}",
            cov_x.nrows(),
            cov_x.ncols(),
            pg.x_dim()
        )));
    }
    let gain = pg.minimizing_gain()?;
    let value = (schur_complement(pg)? * cov_x).trace();
    Ok((gain, value))
}
