//! Dense kernels used by the sketch and regression stages.
//!
//! [`small_svd`] is a one-sided (Hestenes) Jacobi SVD; it is accurate to
//! working precision on the small `s x t` sketches the pipeline produces.
//! [`truncated_svd`] is used only for evaluation against the optimum and is
//! backed by nalgebra's bidiagonal SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin SVD `M = left * diag(values) * right^T` with `values` sorted descending.
///
/// `left` is `rows x p` and `right` is `cols x p` with `p = min(rows, cols)`;
/// both have orthonormal columns, including those paired with zero values.
#[derive(Debug, Clone)]
pub struct Svd {
    pub values: Vec<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (j, s) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

pub fn small_svd(m: &DMatrix<f64>) -> Result<Svd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "svd input".into() });
    }
    if m.is_empty() {
        return Err(Error::Empty("svd input"));
    }
    if m.nrows() >= m.ncols() {
        Ok(jacobi_tall(m.clone()))
    } else {
        let t = jacobi_tall(m.transpose());
        Ok(Svd { values: t.values, left: t.right, right: t.left })
    }
}

fn jacobi_tall(mut a: DMatrix<f64>) -> Svd {
    let (rows, cols) = a.shape();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let tol = f64::EPSILON * (rows as f64).sqrt();
    // Columns below this are rounding noise; rotating them never converges.
    let floor = f64::EPSILON * f64::EPSILON * a.norm_squared();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = {
                    let cp = a.column(p);
                    let cq = a.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || alpha.min(beta) <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let smax = norms[order[0]];
    let cutoff = smax * f64::EPSILON * rows.max(cols) as f64;
    let mut left = DMatrix::zeros(rows, cols);
    let mut right = DMatrix::zeros(cols, cols);
    let mut values = Vec::with_capacity(cols);
    let mut deficient = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        right.set_column(dst, &v.column(src));
        let s = norms[src];
        if s > cutoff && s > 0.0 {
            left.set_column(dst, &(a.column(src) / s));
            values.push(s);
        } else {
            deficient.push(dst);
            values.push(s);
        }
    }
    if !deficient.is_empty() {
        let kept: Vec<usize> = (0..cols).filter(|j| !deficient.contains(j)).collect();
        let basis = complete_basis(&left, &kept, rows, deficient.len());
        for (slot, col) in deficient.iter().zip(basis) {
            left.set_column(*slot, &col);
        }
    }
    Svd { values, left, right }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// `count` unit vectors orthogonal to the given columns of `m` and to each other,
/// drawn from the standard basis by Gram-Schmidt.
fn complete_basis(m: &DMatrix<f64>, kept: &[usize], dim: usize, count: usize) -> Vec<nalgebra::DVector<f64>> {
    let mut basis: Vec<nalgebra::DVector<f64>> = kept.iter().map(|&j| m.column(j).into_owned()).collect();
    let mut out = Vec::with_capacity(count);
    for e in 0..dim {
        if out.len() == count {
            break;
        }
        let mut cand = nalgebra::DVector::zeros(dim);
        cand[e] = 1.0;
        if let Some(unit) = orthogonalize(cand, &basis) {
            basis.push(unit.clone());
            out.push(unit);
        }
    }
    out
}

/// Two passes of classical Gram-Schmidt against `basis`; `None` if nothing independent remains.
fn orthogonalize(mut x: nalgebra::DVector<f64>, basis: &[nalgebra::DVector<f64>]) -> Option<nalgebra::DVector<f64>> {
    let before = x.norm();
    if before == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let d = b.dot(&x);
            x.axpy(-d, b, 1.0);
        }
    }
    let after = x.norm();
    (after > 1e-10 * before).then(|| x / after)
}

/// Orthonormalizes `candidates` (as rows of length `dim`) in order, dropping
/// dependent ones, and pads to `k` rows with standard-basis completion.
pub fn orthonormal_rows(candidates: &[Vec<f64>], k: usize, dim: usize) -> DMatrix<f64> {
    assert!(k <= dim, "cannot fit {k} orthonormal rows in dimension {dim}");
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(k);
    for c in candidates {
        if basis.len() == k {
            break;
        }
        if c.iter().all(|v| v.is_finite()) {
            if let Some(u) = orthogonalize(nalgebra::DVector::from_column_slice(c), &basis) {
                basis.push(u);
            }
        }
    }
    for e in 0..dim {
        if basis.len() == k {
            break;
        }
        let mut cand = nalgebra::DVector::zeros(dim);
        cand[e] = 1.0;
        if let Some(u) = orthogonalize(cand, &basis) {
            basis.push(u);
        }
    }
    let mut out = DMatrix::zeros(k, dim);
    for (i, b) in basis.iter().enumerate() {
        out.set_row(i, &b.transpose());
    }
    out
}

/// Moore-Penrose pseudo-inverse via [`small_svd`], discarding values below
/// `rcond * sigma_max`.
pub fn pseudo_inverse(m: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    let svd = small_svd(m)?;
    let cutoff = svd.values.first().copied().unwrap_or(0.0) * rcond;
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (j, &s) in svd.values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (svd.right.column(j) / s) * svd.left.column(j).transpose();
        }
    }
    Ok(out)
}

/// Max-abs deviation of `U U^T` from the identity.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let gram = u * u.transpose();
    let id = DMatrix::<f64>::identity(u.nrows(), u.nrows());
    (gram - id).amax()
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// `||A - V U||_F^2`.
pub fn residual_sq(a: &DMatrix<f64>, v: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    frobenius_sq(&(a - v * u))
}

/// Best rank-`k` factors `(U_k * Sigma_k, V_k^T)` of a dense matrix.
pub fn truncated_svd(a: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "svd input".into() });
    }
    let p = a.nrows().min(a.ncols());
    if k > p {
        return Err(Error::invalid(format!("rank {k} exceeds min dimension {p}")));
    }
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]).then(x.cmp(&y)));
    let mut left = DMatrix::zeros(a.nrows(), k);
    let mut right = DMatrix::zeros(k, a.ncols());
    for (dst, &src) in order.iter().take(k).enumerate() {
        left.set_column(dst, &(u.column(src) * svd.singular_values[src]));
        right.set_row(dst, &vt.row(src));
    }
    Ok((left, right))
}
