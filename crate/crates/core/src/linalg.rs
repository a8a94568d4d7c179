//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::DVector;

use crate::{CMatrix, C64};

/// Singular value decomposition with descending singular values and thin
/// factors: `m = u * diag(s) * v^H`, `u` is rows x k, `v` is cols x k,
/// `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMatrix,
    pub singular_values: DVector<f64>,
    pub v: CMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// nalgebra's bidiagonalizing SVD returns inconsistent factors for a sizeable
/// fraction of rank-deficient complex inputs (the sparse channels here are
/// exactly that), so the factorization is done by Jacobi rotations instead.
pub fn thin_svd(m: &CMatrix) -> ThinSvd {
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.adjoint());
        return ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    if m.nrows() > m.ncols() {
        // rotate the small triangular factor instead of the tall matrix
        let (q, r) = m.clone().qr().unpack();
        let inner = jacobi_svd(&r);
        return ThinSvd {
            u: q * inner.u,
            singular_values: inner.singular_values,
            v: inner.v,
        };
    }
    jacobi_svd(m)
}

fn jacobi_svd(m: &CMatrix) -> ThinSvd {
    let (rows, k) = m.shape();
    let mut a = m.clone();
    let mut v = CMatrix::identity(k, k);
    let tol = f64::EPSILON * rows as f64;
    // pairs of columns that are both rounding noise are left alone; their
    // relative orthogonality never settles and does not matter
    let noise = (f64::EPSILON * frobenius_sq(m).sqrt()).powi(2);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (cp, cq) = column_pair(a.as_mut_slice(), rows, p, q);
                let alpha: f64 = cp.iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cq.iter().map(|z| z.norm_sqr()).sum();
                if alpha.max(beta) <= noise {
                    continue;
                }
                let gamma: C64 = cp.iter().zip(cq.iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s, phase);
                let (vp, vq) = column_pair(v.as_mut_slice(), k, p, q);
                rotate(vp, vq, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let floor = smax * f64::EPSILON * rows as f64;

    let mut u = CMatrix::zeros(rows, k);
    let mut v_sorted = CMatrix::zeros(k, k);
    let mut s = DVector::zeros(k);
    let mut filled = 0;
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > floor {
            u.set_column(dst, &(a.column(src) / C64::from(norms[src])));
            filled = dst + 1;
        }
    }
    // left vectors of (numerically) zero singular values: any orthonormal
    // completion will do
    if filled < k {
        // Householder QR of [U_filled | I]: the trailing columns of Q are
        // orthogonal to the filled ones
        let mut padded = CMatrix::zeros(rows, filled + rows);
        padded.columns_mut(0, filled).copy_from(&u.columns(0, filled));
        padded.columns_mut(filled, rows).fill_with_identity();
        let q = padded.qr().q();
        u.columns_mut(filled, k - filled).copy_from(&q.columns(filled, k - filled));
    }
    ThinSvd {
        u,
        singular_values: s,
        v: v_sorted,
    }
}

/// Columns `p < q` of a column-major buffer with `rows` rows.
fn column_pair(data: &mut [C64], rows: usize, p: usize, q: usize) -> (&mut [C64], &mut [C64]) {
    let (head, tail) = data.split_at_mut(q * rows);
    (&mut head[p * rows..(p + 1) * rows], &mut tail[..rows])
}

/// Applies the plane rotation that orthogonalizes columns `x` and `y`, where
/// `phase` is the unit-modulus phase of `<x, y>`.
fn rotate(x: &mut [C64], y: &mut [C64], c: f64, s: f64, phase: C64) {
    let back = phase.conj();
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let u = *xi;
        let w = *yi * back;
        *xi = u * c - w * s;
        *yi = (u * s + w * c) * phase;
    }
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `log det(m)` (natural log) for a Hermitian positive-definite matrix, or
/// `None` when the Cholesky factorization breaks down.
pub fn hermitian_logdet(m: &CMatrix) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Relative singular-value cut-off below which columns count as dependent.
/// A uniform grid over the whole circle holds pairs `theta`, `pi - theta`
/// whose steering vectors agree up to rounding; the cut-off has to sit well
/// above that rounding so such pairs are treated as one direction.
pub const RANK_RTOL: f64 = 1e-10;

/// Least-squares solution of `a x = b` through the pseudoinverse. The flag is
/// set when `a` has numerically dependent columns.
pub fn least_squares(a: &CMatrix, b: &CMatrix) -> (CMatrix, bool) {
    let svd = thin_svd(a);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * RANK_RTOL;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let rank_deficient = rank < a.ncols();
    // x = V * diag(1/s) * U^H * b over the retained singular values
    let mut uh_b = svd.u.adjoint() * b;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > tol { 1.0 / s } else { 0.0 };
        uh_b.row_mut(i).scale_mut(inv);
    }
    (&svd.v * uh_b, rank_deficient)
}

/// Horizontal concatenation of matrices with equal row counts.
pub fn hstack(parts: &[CMatrix], rows: usize) -> CMatrix {
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (rows, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    out
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Squared Euclidean norm of each row.
pub fn row_energy(m: &CMatrix) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Inner product `a^H b` of two equally sized slices.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
