//! Dense linear-algebra helpers over nalgebra.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis (as columns) of the span of `vectors`, by modified
/// Gram–Schmidt with reorthogonalization. Vectors whose residual norm falls
/// below `tol` times their original norm are treated as dependent.
pub fn orthonormal_span(vectors: &[Vec<f64>], dim: usize, tol: f64) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = DVector::from_column_slice(v);
        let n0 = w.norm();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n > tol * n0 {
            basis.push(w / n);
        }
    }
    if basis.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(&basis)
}

/// Indices of a maximal linearly independent subset of `vectors`, greedy in order.
pub fn independent_subset(vectors: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut picked = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let mut w = DVector::from_column_slice(v);
        let n0 = w.norm();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n > tol * n0 {
            basis.push(w / n);
            picked.push(i);
        }
    }
    picked
}

/// Symmetric eigenvalues in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = 0.5 * (m + m.transpose());
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Solve a square system by LU; `None` when singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

pub fn outer(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| v[i] * v[j])
}
