//! Orthogonal matching pursuit with a fixed arithmetic order.
//!
//! Correlations are evaluated column by column in index order, ties go to the
//! lowest index, and the least-squares refit uses an incrementally grown
//! Cholesky factor of the selected Gram matrix. Two runs on the same inputs
//! produce the same bits on any thread count, which the codec relies on:
//! coefficients are never transmitted, so encoder and decoder must agree.

/// Column-major dense matrix view.
#[derive(Debug, Clone, Copy)]
pub struct ColumnMatrix<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl<'a> ColumnMatrix<'a> {
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        ColumnMatrix { rows, cols, data }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &'a [f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Result of one pursuit.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutput {
    /// Selected columns in selection order.
    pub atoms: Vec<usize>,
    /// Least-squares coefficients aligned with `atoms`.
    pub coeffs: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm before the first selection and after each accepted one.
    pub history: Vec<f64>,
}

/// Relative pivot below which a new column is treated as dependent on the
/// selected set.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Greedy pursuit of `y` over the columns of `a`, stopping once
/// `||residual|| <= tol` or `max_atoms` columns are selected.
///
/// A zero measurement yields an empty plan. A candidate whose pivot collapses
/// (numerically dependent on the selected set) or that fails to reduce the
/// residual is dropped and the pursuit stops.
pub fn omp(a: ColumnMatrix<'_>, y: &[f64], tol: f64, max_atoms: usize) -> OmpOutput {
    assert_eq!(y.len(), a.rows, "measurement length");
    let y_norm = norm(y);
    let mut out = OmpOutput {
        atoms: Vec::new(),
        coeffs: Vec::new(),
        residual: y.to_vec(),
        residual_norm: y_norm,
        history: vec![y_norm],
    };
    if y_norm == 0.0 {
        return out;
    }

    let mut selected = vec![false; a.cols];
    // Row-major lower-triangular Cholesky factor, row i has i+1 entries.
    let mut chol: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    while out.atoms.len() < max_atoms.min(a.cols) && out.residual_norm > tol {
        let mut best = None;
        let mut best_abs = 0.0;
        for j in 0..a.cols {
            if selected[j] {
                continue;
            }
            let c = dot(a.col(j), &out.residual).abs();
            if c > best_abs {
                best_abs = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        if best_abs <= f64::EPSILON * y_norm {
            break;
        }

        let aj = a.col(j);
        let gram: Vec<f64> = out.atoms.iter().map(|&i| dot(a.col(i), aj)).collect();
        let w = forward_solve(&chol, &gram);
        let diag = dot(aj, aj);
        let pivot = diag - dot(&w, &w);
        if !(pivot > PIVOT_TOLERANCE * diag) {
            break;
        }
        let mut row = w;
        row.push(pivot.sqrt());

        chol.push(row);
        rhs.push(dot(aj, y));
        let x = cholesky_solve(&chol, &rhs);

        let mut residual = y.to_vec();
        for (&i, &c) in out.atoms.iter().chain(std::iter::once(&j)).zip(&x) {
            for (r, &v) in residual.iter_mut().zip(a.col(i)) {
                *r -= c * v;
            }
        }
        let r_norm = norm(&residual);
        if !(r_norm < out.residual_norm) {
            chol.pop();
            rhs.pop();
            break;
        }

        selected[j] = true;
        out.atoms.push(j);
        out.coeffs = x;
        out.residual = residual;
        out.residual_norm = r_norm;
        out.history.push(r_norm);
    }
    out
}

fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(b.len());
    for (i, row) in l.iter().enumerate() {
        let mut s = b[i];
        for k in 0..i {
            s -= row[k] * x[k];
        }
        x.push(s / row[i]);
    }
    x
}

/// Solves `L L^T x = b`.
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let z = forward_solve(l, b);
    let n = z.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}
