//! Dense Hermitian eigensolvers with reproducible eigenvector phases.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::pauli::{check_dense, OperatorSum, C64};

/// Components smaller than this are skipped when fixing eigenvector phases.
const PHASE_FLOOR: f64 = 1e-8;
/// Eigenvalues closer than this are treated as one degenerate group.
const TIE_TOL: f64 = 1e-10;

/// Eigenvalues of a Hermitian Pauli sum in ascending order.
pub fn eigenvalues(op: &OperatorSum, max_sites: usize) -> Result<Vec<f64>> {
    if !op.is_hermitian() {
        return Err(Error::Domain("eigenvalues require a Hermitian operator".into()));
    }
    check_dense(op.n_sites(), max_sites)?;
    if let Some(m) = op.to_dense_real(max_sites)? {
        let ev = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Domain(format!("eigenvalue solver failed: {e:?}")))?;
        return Ok(sorted(ev));
    }
    let m = op.to_dense_with_limit(max_sites)?;
    let ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Domain(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(sorted(ev))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Full eigendecomposition of a Hermitian Pauli sum.
///
/// Returns ascending energies and a matrix whose columns are the
/// eigenvectors, each rotated so that its first significant component is
/// real and positive.
pub fn eigh(op: &OperatorSum, max_sites: usize) -> Result<(Vec<f64>, Mat<C64>)> {
    if !op.is_hermitian() {
        return Err(Error::Domain("eigendecomposition requires a Hermitian operator".into()));
    }
    check_dense(op.n_sites(), max_sites)?;
    if let Some(m) = op.to_dense_real(max_sites)? {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Domain(format!("eigen solver failed: {e:?}")))?;
        let s = evd.S();
        let u = evd.U();
        let n = m.nrows();
        let energies: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let vecs = Mat::<C64>::from_fn(n, n, |i, j| C64::new(u[(i, j)], 0.0));
        return Ok(canonicalize(energies, vecs));
    }
    let m = op.to_dense_with_limit(max_sites)?;
    eigh_dense(&m)
}

/// Eigendecomposition of a dense Hermitian matrix.
pub fn eigh_dense(m: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Domain(format!("eigen solver failed: {e:?}")))?;
    let s = evd.S();
    let n = m.nrows();
    let energies: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    Ok(canonicalize(energies, evd.U().to_owned()))
}

/// Eigendecomposition of a dense real symmetric matrix.
pub fn eigh_real(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Domain(format!("eigen solver failed: {e:?}")))?;
    let s = evd.S();
    let n = m.nrows();
    Ok(((0..n).map(|i| s[i]).collect(), evd.U().to_owned()))
}

fn first_significant(v: &Mat<C64>, col: usize) -> usize {
    (0..v.nrows()).find(|&i| v[(i, col)].norm() > PHASE_FLOOR).unwrap_or(0)
}

fn canonicalize(energies: Vec<f64>, mut vecs: Mat<C64>) -> (Vec<f64>, Mat<C64>) {
    let n = energies.len();
    for j in 0..n {
        let k = first_significant(&vecs, j);
        let p = vecs[(k, j)];
        if p.norm() > 0.0 {
            let phase = p.conj() / p.norm();
            for i in 0..n {
                vecs[(i, j)] *= phase;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && energies[order[end]] - energies[order[start]] < TIE_TOL {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| (first_significant(&vecs, c), c));
        start = end;
    }
    let e = order.iter().map(|&i| energies[i]).collect();
    let v = Mat::<C64>::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    (e, v)
}
