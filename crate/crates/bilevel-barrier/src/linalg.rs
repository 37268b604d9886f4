//! Minimal dense linear algebra: row-major matrices, SPD solves, eigenvalue
//! lower-bound probes. Everything here is small and dense on purpose; the
//! problems this crate targets have a few dozen variables at most.

use crate::{Error, Result};

/// Lower-level and upper-level iterates are plain `Vec<f64>`.
pub type Vector = Vec<f64>;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    /// `v * v^T` scaled by `alpha`.
    pub fn outer(u: &[f64], v: &[f64], alpha: f64) -> Self {
        let mut m = Matrix::zeros(u.len(), v.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                m[(i, j)] = alpha * u[i] * v[j];
            }
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest absolute entry; used to scale tolerances.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vector {
        assert_eq!(self.cols, v.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = dot(row, v);
        }
        out
    }

    /// Spectral-norm upper bound via the Frobenius norm; cheap and sufficient
    /// for the Lipschitz spot checks.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// ---- vector helpers ----

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `a + alpha * b`.
pub fn axpy(a: &[f64], alpha: f64, b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + alpha * y).collect()
}

pub fn scaled(a: &[f64], alpha: f64) -> Vector {
    a.iter().map(|x| alpha * x).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows, got: a.cols });
    }
    let tol = 1e-10 * (1.0 + a.max_abs());
    let asym = a.asymmetry();
    if asym > tol {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Cholesky factorization `A = L L^T`. Returns the lower factor, or `None`
/// when a pivot drops below `pivot_floor`.
fn cholesky(a: &Matrix, pivot_floor: f64) -> Option<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= pivot_floor {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

fn forward_backward(l: &Matrix, b: &[f64]) -> Vector {
    let n = l.rows;
    // L z = b
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    // L^T x = z
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve `A x = b` for symmetric positive definite `A`.
///
/// Uses Cholesky with diagonal jitter escalation (1e-12 up to 1e-6, scaled by
/// the largest diagonal entry) when the bare factorization fails: the callers
/// work with barrier Hessians that are positive definite in exact arithmetic,
/// so a failed factorization signals roundoff, not rank deficiency. Two steps
/// of iterative refinement polish the residual.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vector> {
    check_symmetric(a)?;
    if a.rows != b.len() {
        return Err(Error::DimensionMismatch { expected: a.rows, got: b.len() });
    }
    let scale = a.max_abs().max(1.0);
    let mut jitter = 0.0;
    let l = loop {
        let mut aj = a.clone();
        if jitter > 0.0 {
            for i in 0..aj.rows {
                aj[(i, i)] += jitter * scale;
            }
        }
        if let Some(l) = cholesky(&aj, 0.0) {
            break l;
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 100.0 };
        if jitter > 1e-6 {
            return Err(Error::NotPositiveDefinite);
        }
    };
    let mut x = forward_backward(&l, b);
    // Iterative refinement against the unjittered matrix.
    for _ in 0..2 {
        let r = sub(b, &a.matvec(&x));
        let dx = forward_backward(&l, &r);
        x = add(&x, &dx);
    }
    Ok(x)
}

/// True iff `A - mu * I` is positive semidefinite within tolerance 1e-10.
///
/// Probed by attempting a Cholesky factorization of the shifted matrix with a
/// tolerance-sized diagonal lift, so eigenvalues equal to `mu` (pivots near
/// zero) still pass.
pub fn min_eig_lower_bound(a: &Matrix, mu: f64) -> Result<bool> {
    check_symmetric(a)?;
    let scale = a.max_abs().max(mu.abs()).max(1.0);
    let lift = 1e-10 * scale;
    let mut shifted = a.clone();
    for i in 0..shifted.rows {
        shifted[(i, i)] += lift - mu;
    }
    Ok(cholesky(&shifted, 0.0).is_some())
}
