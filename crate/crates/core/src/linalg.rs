//! Dense complex linear algebra helpers shared by every module.
//!
//! Vectorization is column-stacking throughout: `vec(X)[i + j*n] = X[i, j]`,
//! so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use ndarray::{s, Array1, Array2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, Inverse, JobSvd, SVDDC, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = Array2<C64>;
pub type Vector = Array1<C64>;

/// Relative singular-value threshold for every rank decision.
pub const RANK_REL: f64 = 1e-9;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn zeros(m: usize, n: usize) -> Mat {
    Mat::zeros((m, n))
}

pub fn eye(n: usize) -> Mat {
    Mat::eye(n)
}

pub fn dagger(a: &Mat) -> Mat {
    a.t().mapv(|z| z.conj())
}

pub fn conj(a: &Mat) -> Mat {
    a.mapv(|z| z.conj())
}

pub fn transpose(a: &Mat) -> Mat {
    a.t().to_owned()
}

pub fn mm(a: &Mat, b: &Mat) -> Mat {
    a.dot(b)
}

pub fn mm3(a: &Mat, b: &Mat, c: &Mat) -> Mat {
    a.dot(&b.dot(c))
}

pub fn scale(a: &Mat, s: C64) -> Mat {
    a.mapv(|z| z * s)
}

pub fn trace(a: &Mat) -> C64 {
    a.diag().sum()
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a.dot(b) - b.dot(a)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (am, an) = a.dim();
    let (bm, bn) = b.dim();
    let mut out = zeros(am * bm, an * bn);
    for i in 0..am {
        for j in 0..an {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            let mut blk = out.slice_mut(s![i * bm..(i + 1) * bm, j * bn..(j + 1) * bn]);
            blk.zip_mut_with(b, |o, &x| *o = aij * x);
        }
    }
    out
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[Mat]) -> Mat {
    let m: usize = blocks.iter().map(|b| b.nrows()).sum();
    let n: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(m, n);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.slice_mut(s![r0..r0 + b.nrows(), c0..c0 + b.ncols()]).assign(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

pub fn vec_cols(a: &Mat) -> Vector {
    let (m, n) = a.dim();
    let mut v = Vector::zeros(m * n);
    for j in 0..n {
        for i in 0..m {
            v[i + j * m] = a[(i, j)];
        }
    }
    v
}

pub fn unvec(v: &Vector, m: usize) -> Mat {
    let n = v.len() / m;
    let mut a = zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            a[(i, j)] = v[i + j * m];
        }
    }
    a
}

/// Hilbert-Schmidt inner product `Tr(a* b)`, linear in the second slot.
pub fn hs_inner(a: &Mat, b: &Mat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn vdot(a: &Vector, b: &Vector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn fro_norm(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vnorm(a: &Vector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermitian_part(a: &Mat) -> Mat {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

pub fn is_hermitian(a: &Mat, tol: f64) -> bool {
    max_abs(&(a - &dagger(a))) <= tol
}

/// Column-major copy. LAPACK wrappers mishandle complex row-major input
/// (eigenvectors come back conjugated), so every decomposition goes through this.
pub(crate) fn fortran(a: &Mat) -> Mat {
    let mut f = Mat::zeros(a.raw_dim().f());
    f.assign(a);
    f
}

pub(crate) fn svd_full(a: &Mat) -> Result<(Mat, Array1<f64>, Mat)> {
    let (u, s, vt) = fortran(a).svd(true, true).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok((u.unwrap(), s, vt.unwrap()))
}

pub fn singular_values(a: &Mat) -> Result<Array1<f64>> {
    if a.is_empty() {
        return Ok(Array1::zeros(0));
    }
    let (_, s, _) = fortran(a).svd(false, false).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(s)
}

/// Operator (spectral) norm.
pub fn op_norm(a: &Mat) -> Result<f64> {
    Ok(singular_values(a)?.iter().cloned().fold(0.0, f64::max))
}

/// Trace-class norm.
pub fn nuclear_norm(a: &Mat) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}

/// Eigen-decomposition of a Hermitian matrix, ascending eigenvalues.
pub fn eigh(a: &Mat) -> Result<(Array1<f64>, Mat)> {
    if a.is_empty() {
        return Ok((Array1::zeros(0), zeros(0, 0)));
    }
    fortran(&hermitian_part(a)).eigh(UPLO::Upper).map_err(|e| Error::Linalg(e.to_string()))
}

pub fn eigvalsh(a: &Mat) -> Result<Array1<f64>> {
    Ok(eigh(a)?.0)
}

pub fn min_eigenvalue(a: &Mat) -> Result<f64> {
    Ok(eigvalsh(a)?.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// `f(a)` for Hermitian `a` through its spectral decomposition.
pub fn herm_fn(a: &Mat, f: impl Fn(f64) -> C64) -> Result<Mat> {
    let (w, u) = eigh(a)?;
    let n = w.len();
    let mut fu = u.clone();
    for j in 0..n {
        let fj = f(w[j]);
        fu.column_mut(j).mapv_inplace(|z| z * fj);
    }
    Ok(fu.dot(&dagger(&u)))
}

pub fn sqrtm_psd(a: &Mat) -> Result<Mat> {
    herm_fn(a, |x| r(x.max(0.0).sqrt()))
}

pub fn inv_sqrtm_pd(a: &Mat) -> Result<Mat> {
    herm_fn(a, |x| r(1.0 / x.sqrt()))
}

pub fn logm_pd(a: &Mat) -> Result<Mat> {
    herm_fn(a, |x| r(x.ln()))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    fortran(a).inv().map_err(|e| Error::Linalg(e.to_string()))
}

/// `exp(i t h)` for Hermitian `h`.
pub fn unitary_flow(h: &Mat, t: f64) -> Result<Mat> {
    herm_fn(h, |x| C64::from_polar(1.0, t * x))
}

/// Null space of `a` as orthonormal columns. A singular value counts as
/// zero when it is at most `rel * max(σ_max, floor)`.
pub fn null_space_with(a: &Mat, rel: f64, floor: f64) -> Result<(Mat, Array1<f64>)> {
    let (m, n) = a.dim();
    if n == 0 {
        return Ok((zeros(0, 0), Array1::zeros(0)));
    }
    if m == 0 {
        return Ok((eye(n), Array1::zeros(0)));
    }
    let (_, s, vt) = svd_full(a)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let thr = rel * smax.max(floor);
    let rank = s.iter().filter(|&&x| x > thr).count();
    let ns = dagger(&vt.slice(s![rank.., ..]).to_owned());
    Ok((ns, s))
}

pub fn null_space(a: &Mat) -> Result<Mat> {
    Ok(null_space_with(a, RANK_REL, 1.0)?.0)
}

/// Orthonormal basis (columns) for the span of the columns of `a`.
pub fn orth(a: &Mat) -> Result<Mat> {
    orth_with(a, RANK_REL, 0.0)
}

pub fn orth_with(a: &Mat, rel: f64, floor: f64) -> Result<Mat> {
    let (m, n) = a.dim();
    if n == 0 || m == 0 {
        return Ok(zeros(m, 0));
    }
    let (u, s, _) = fortran(a)
        .svddc(JobSvd::Some)
        .map_err(|e| Error::Linalg(e.to_string()))?;
    let u = u.expect("left vectors requested");
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let thr = (rel * smax).max(floor).max(1e-300);
    let rank = s.iter().filter(|&&x| x > thr).count();
    Ok(u.slice(s![.., ..rank]).to_owned())
}

pub fn rank(a: &Mat) -> Result<usize> {
    Ok(orth(a)?.ncols())
}

/// Stack vectors as columns.
pub fn columns(vs: &[Vector], dim: usize) -> Mat {
    let mut a = zeros(dim, vs.len());
    for (j, v) in vs.iter().enumerate() {
        a.column_mut(j).assign(v);
    }
    a
}

pub fn column_vecs(a: &Mat) -> Vec<Vector> {
    a.axis_iter(Axis(1)).map(|c| c.to_owned()).collect()
}

/// Hilbert-Schmidt-orthonormal basis for the span of a list of matrices.
pub fn orth_matrices(ms: &[Mat]) -> Result<Vec<Mat>> {
    if ms.is_empty() {
        return Ok(vec![]);
    }
    let (m, n) = ms[0].dim();
    let vs: Vec<Vector> = ms.iter().map(vec_cols).collect();
    let q = orth(&columns(&vs, m * n))?;
    Ok(column_vecs(&q).iter().map(|v| unvec(v, m)).collect())
}

/// Residual of orthogonally projecting `x` onto an orthonormal matrix basis.
pub fn span_residual(basis: &[Mat], x: &Mat) -> f64 {
    let mut rem = x.clone();
    for b in basis {
        let k = hs_inner(b, x);
        rem.zip_mut_with(b, |r, &bb| *r -= k * bb);
    }
    fro_norm(&rem)
}

pub fn project_onto(basis: &[Mat], x: &Mat) -> Mat {
    let mut out = zeros(x.nrows(), x.ncols());
    for b in basis {
        let k = hs_inner(b, x);
        out.zip_mut_with(b, |o, &bb| *o += k * bb);
    }
    out
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases. Returns 1 when the dimensions differ.
pub fn subspace_sin(u: &Mat, v: &Mat) -> Result<f64> {
    if u.ncols() != v.ncols() {
        return Ok(1.0);
    }
    if u.ncols() == 0 {
        return Ok(0.0);
    }
    let proj = u.dot(&dagger(u).dot(v));
    op_norm(&(v - &proj))
}

/// Vectors stacked as rows of a tall system: row-block concatenation.
pub fn vstack(blocks: &[Mat]) -> Mat {
    let n = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let m: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(m, n);
    let mut r0 = 0;
    for b in blocks {
        out.slice_mut(s![r0..r0 + b.nrows(), ..]).assign(b);
        r0 += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[Mat]) -> Mat {
    let m = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let n: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(m, n);
    let mut c0 = 0;
    for b in blocks {
        out.slice_mut(s![.., c0..c0 + b.ncols()]).assign(b);
        c0 += b.ncols();
    }
    out
}

/// Matrix of the superoperator `X ↦ Σ A_k X B_k` in the column-stacking
/// convention.
pub fn superop_from_pairs(pairs: &[(Mat, Mat)]) -> Mat {
    let d = pairs[0].0.nrows();
    let mut s = zeros(d * d, d * d);
    for (a, b) in pairs {
        s = s + kron(&transpose(b), a);
    }
    s
}

/// Entropy of a spectrum summing to one. Eigenvalues below `1e-12` of the
/// largest are dropped and the rest renormalized, so a rank-one spectrum gives
/// exactly zero.
pub fn spectral_entropy(eigs: impl IntoIterator<Item = f64>) -> f64 {
    let eigs: Vec<f64> = eigs.into_iter().collect();
    let top = eigs.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0.0;
    }
    let kept: Vec<f64> = eigs.into_iter().filter(|&l| l > 1e-12 * top).collect();
    let total: f64 = kept.iter().sum();
    let h: f64 = kept
        .iter()
        .map(|&l| l / total)
        .filter(|&l| l < 1.0)
        .map(|l| -l * l.ln())
        .sum();
    h.max(0.0)
}

pub fn basis_unit(n: usize, i: usize, j: usize) -> Mat {
    let mut e = zeros(n, n);
    e[(i, j)] = ONE;
    e
}

pub fn pauli_x() -> Mat {
    ndarray::array![[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> Mat {
    ndarray::array![[ZERO, -I], [I, ZERO]]
}

pub fn pauli_z() -> Mat {
    ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompositions_of_complex_row_major_input() {
        let mut rng = crate::random::rng(1);
        let a = crate::random::hermitian(&mut rng, 5);
        let (w, v) = eigh(&a).unwrap();
        let d = Mat::from_diag(&w.mapv(r));
        assert!(fro_norm(&(a.dot(&v) - v.dot(&d))) < 1e-12);
        let g = crate::random::ginibre(&mut rng, 4, 6);
        let (u, s, vt) = svd_full(&g).unwrap();
        let mut sig = zeros(4, 6);
        for k in 0..4 {
            sig[(k, k)] = r(s[k]);
        }
        assert!(fro_norm(&(u.dot(&sig).dot(&vt) - &g)) < 1e-12);
        let sq = crate::random::ginibre(&mut rng, 4, 4);
        assert!(fro_norm(&(inverse(&sq).unwrap().dot(&sq) - eye(4))) < 1e-12);
        let q = crate::random::haar_unitary(&mut rng, 4);
        assert!(fro_norm(&(dagger(&q).dot(&q) - eye(4))) < 1e-12);
    }

    #[test]
    fn vec_convention_matches_kron() {
        let a = ndarray::array![[c(1.0, 0.5), r(2.0)], [r(0.0), c(0.0, -1.0)]];
        let b = ndarray::array![[r(3.0), c(1.0, 1.0)], [r(-1.0), r(0.5)]];
        let x = ndarray::array![[r(0.3), c(0.1, 0.2)], [c(-0.7, 0.0), r(1.1)]];
        let lhs = vec_cols(&a.dot(&x).dot(&b));
        let rhs = kron(&transpose(&b), &a).dot(&vec_cols(&x));
        assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn null_space_of_projector() {
        let p = ndarray::array![[ONE, ZERO], [ZERO, ZERO]];
        let ns = null_space(&p).unwrap();
        assert_eq!(ns.ncols(), 1);
        assert!(ns[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn subspace_sine_detects_rotation() {
        let u = ndarray::array![[ONE], [ZERO]];
        let v = ndarray::array![[r(0.6)], [r(0.8)]];
        assert!((subspace_sin(&u, &v).unwrap() - 0.8).abs() < 1e-12);
    }
}
