//! Harmonic operators, Cesàro expectations and the boundary algebra.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::algebra::{center, GnsSpace, Subalgebra, TracialAlgebra};
use crate::concrete::Wedderburn;
use crate::error::{Error, Result};
use crate::hyperstate::{
    classify, opposite_superop, poisson_superop, Classification, Hyperstate, Superoperator,
};
use crate::linalg::*;
use crate::random;

/// Singular values of P − id inside (null threshold, this] are ambiguous.
pub const GAP_REL: f64 = 1e-6;

/// Fix(P) with an orthonormal basis of D×D operators.
#[derive(Clone, Debug)]
pub struct HarmonicSpace {
    gns: Arc<GnsSpace>,
    basis: Vec<Mat>,
    /// Largest ‖L(b) − proj(L(b))‖ over the GNS basis.
    pub contains_m_residual: f64,
    /// Smallest singular value of P − id that was kept as non-null.
    pub spectral_gap: f64,
}

impl HarmonicSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    pub fn gns(&self) -> &Arc<GnsSpace> {
        &self.gns
    }

    pub fn contains_m(&self) -> bool {
        self.contains_m_residual <= 1e-8
    }

    /// Basis as orthonormal columns of vectorized operators.
    pub fn columns(&self) -> Mat {
        let vs: Vec<Vector> = self.basis.iter().map(vec_cols).collect();
        columns(&vs, self.gns.dim() * self.gns.dim())
    }
}

/// Right and left null spaces of P − id, with the gap check.
fn fixed_and_cofixed(p: &Superoperator) -> Result<(Mat, Mat, f64)> {
    fixed_and_cofixed_matrix(p.matrix())
}

fn fixed_and_cofixed_matrix(s: &Mat) -> Result<(Mat, Mat, f64)> {
    let n = s.nrows();
    let a = s - &eye(n);
    let (u, s, vt) = crate::linalg::svd_full(&a)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let floor = smax.max(1.0);
    let thr = RANK_REL * floor;
    let rank = s.iter().filter(|&&x| x > thr).count();
    let gap = if rank > 0 { s[rank - 1] } else { f64::INFINITY };
    if gap <= GAP_REL * floor {
        return Err(Error::SpectralGap {
            gap,
            threshold: thr,
        });
    }
    let right = dagger(&vt.slice(ndarray::s![rank.., ..]).to_owned());
    let left = u.slice(ndarray::s![.., rank..]).to_owned();
    Ok((right, left, gap))
}

pub fn fixed_space(p: &Superoperator) -> Result<HarmonicSpace> {
    let (right, _, gap) = fixed_and_cofixed(p)?;
    Ok(harmonic_from_columns(p.gns().clone(), &right, gap))
}

fn harmonic_from_columns(gns: Arc<GnsSpace>, cols: &Mat, gap: f64) -> HarmonicSpace {
    let dd = gns.dim();
    let basis: Vec<Mat> = column_vecs(cols).iter().map(|v| unvec(v, dd)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..dd {
        let l = gns.left(&gns.basis_element(k));
        worst = worst.max(span_residual(&basis, &l) / fro_norm(&l).max(1e-300));
    }
    HarmonicSpace {
        gns,
        basis,
        contains_m_residual: worst,
        spectral_gap: gap,
    }
}

/// Spectral projection onto Fix(P) along the complementary invariant subspace.
pub fn cesaro_expectation(p: &Superoperator) -> Result<Superoperator> {
    Ok(Superoperator::from_matrix(p.gns().clone(), spectral_projection(p.matrix())?))
}

/// Eigenvalue-one spectral projection of a power-bounded matrix.
pub fn spectral_projection(s: &Mat) -> Result<Mat> {
    let (u, w, _) = fixed_and_cofixed_matrix(s)?;
    let m = dagger(&w).dot(&u);
    Ok(u.dot(&inverse(&m)?).dot(&dagger(&w)))
}

/// (1/N) Σ_{n=1}^N P^n, kept as an independent oracle for the expectation.
pub fn cesaro_average(p: &Superoperator, n: usize) -> Superoperator {
    let dim = p.matrix().nrows();
    let mut acc = zeros(dim, dim);
    let mut pow = eye(dim);
    for _ in 0..n {
        pow = p.matrix().dot(&pow);
        acc = acc + &pow;
    }
    Superoperator::from_matrix(p.gns().clone(), acc.mapv(|z| z / n as f64))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExpectationResiduals {
    pub idempotence: f64,
    pub unital: f64,
    pub choi_min_eigenvalue: f64,
    pub absorbs_p: f64,
    pub range: f64,
}

pub fn expectation_residuals(
    p: &Superoperator,
    e: &Superoperator,
    har: &HarmonicSpace,
) -> Result<ExpectationResiduals> {
    let em = e.matrix();
    let pm = p.matrix();
    let mut range: f64 = 0.0;
    for b in har.basis() {
        range = range.max(fro_norm(&(e.apply(b) - b)));
    }
    Ok(ExpectationResiduals {
        idempotence: fro_norm(&(em.dot(em) - em)),
        unital: e.unital_residual(),
        choi_min_eigenvalue: e.choi_min_eigenvalue()?,
        absorbs_p: fro_norm(&(em.dot(pm) - em)).max(fro_norm(&(pm.dot(em) - em))),
        range,
    })
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct BoundaryResiduals {
    pub associativity: f64,
    pub involution: f64,
    pub positivity: f64,
    pub idempotence: f64,
    pub unital: f64,
    pub choi_min_eigenvalue: f64,
    pub stationarity: f64,
    pub block_decomposition: f64,
}

/// Fix(P_φ) with the Choi-Effros product x·y = E(xy).
pub struct BoundaryAlgebra {
    pub harmonic: HarmonicSpace,
    pub expectation: Superoperator,
    /// Basis orthonormal for ⟨a, b⟩ = Tr(E(b*a)).
    pub basis: Vec<Mat>,
    /// Left regular representation of `basis` in the same coordinates.
    pub rep: Vec<Mat>,
    pub wedderburn: Wedderburn,
    pub center_dim: usize,
    /// ζ(b) = ⟨b 1̂, 1̂⟩ on `basis`.
    pub stationary: Vec<C64>,
    pub faithful: bool,
    pub faithful_min_eigenvalue: f64,
    pub residuals: BoundaryResiduals,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryReport {
    pub harmonic_dim: usize,
    pub boundary_blocks: Vec<usize>,
    pub center_dim: usize,
    pub stationary_state_faithful: bool,
    pub residuals: BoundaryResiduals,
}

/// C*-axiom residuals above this abort construction.
pub const CSTAR_TOL: f64 = 1e-8;

impl BoundaryAlgebra {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn report(&self) -> BoundaryReport {
        BoundaryReport {
            harmonic_dim: self.harmonic.dim(),
            boundary_blocks: self.wedderburn.blocks.clone(),
            center_dim: self.center_dim,
            stationary_state_faithful: self.faithful,
            residuals: self.residuals,
        }
    }

    pub fn product(&self, x: &Mat, y: &Mat) -> Mat {
        self.expectation.apply(&x.dot(y))
    }

    /// Coordinates of a harmonic operator in `basis`.
    pub fn coords(&self, x: &Mat) -> Vector {
        let omega = self.omega();
        Vector::from_iter(
            self.basis
                .iter()
                .map(|f| trace(&omega.dot(&dagger(f)).dot(x))),
        )
    }

    pub fn from_coords(&self, v: &Vector) -> Mat {
        let dd = self.harmonic.gns().dim();
        let mut x = zeros(dd, dd);
        for (f, &k) in self.basis.iter().zip(v.iter()) {
            x.zip_mut_with(f, |o, &y| *o += k * y);
        }
        x
    }

    /// Ω = E†(1), so that Tr(E(x)) = Tr(Ω x).
    pub fn omega(&self) -> Mat {
        self.expectation.apply_dual(&eye(self.harmonic.gns().dim()))
    }

    /// Structure representation of a harmonic operator.
    pub fn represent(&self, x: &Mat) -> Mat {
        let v = self.coords(x);
        let d = self.dim();
        let mut out = zeros(d, d);
        for (r, &k) in self.rep.iter().zip(v.iter()) {
            out.zip_mut_with(r, |o, &y| *o += k * y);
        }
        out
    }
}

pub fn boundary_build(phi: &Hyperstate) -> Result<BoundaryAlgebra> {
    let p = poisson_superop(phi);
    boundary_from_superop(&p, Some(phi))
}

pub fn boundary_from_superop(p: &Superoperator, phi: Option<&Hyperstate>) -> Result<BoundaryAlgebra> {
    let gns = p.gns().clone();
    let dd = gns.dim();
    let harmonic = fixed_space(p)?;
    let e = cesaro_expectation(p)?;
    let eres = expectation_residuals(p, &e, &harmonic)?;
    let omega = e.apply_dual(&eye(dd));
    let h = harmonic.basis();
    let d = h.len();
    // Gram matrix of the faithful functional Tr∘E
    let mut g = zeros(d, d);
    for i in 0..d {
        let oh = omega.dot(&dagger(&h[i]));
        for j in 0..d {
            g[(i, j)] = trace(&oh.dot(&h[j]));
        }
    }
    let g = hermitian_part(&g);
    let gmin = min_eigenvalue(&g)?;
    if gmin <= 1e-12 {
        return Err(Error::CStarAxiom {
            axiom: "faithfulness of Tr∘E",
            residual: gmin,
        });
    }
    let gis = inv_sqrtm_pd(&g)?;
    let basis: Vec<Mat> = (0..d)
        .map(|j| {
            let mut f = zeros(dd, dd);
            for i in 0..d {
                let k = gis[(i, j)];
                f.zip_mut_with(&h[i], |o, &y| *o += k * y);
            }
            f
        })
        .collect();
    let coeffs = |x: &Mat| -> Vector {
        Vector::from_iter(basis.iter().map(|f| trace(&omega.dot(&dagger(f)).dot(x))))
    };
    // rep[i][:, j] = coords of f_i · f_j
    let mut rep = vec![zeros(d, d); d];
    let mut products = vec![Vec::with_capacity(d); d];
    for i in 0..d {
        for j in 0..d {
            let prod = e.apply(&basis[i].dot(&basis[j]));
            rep[i].column_mut(j).assign(&coeffs(&prod));
            products[i].push(prod);
        }
    }
    let mut res = BoundaryResiduals {
        idempotence: eres.idempotence,
        unital: eres.unital,
        choi_min_eigenvalue: eres.choi_min_eigenvalue,
        ..Default::default()
    };
    // associativity: rep(f_i) rep(f_j) = Σ_k c_ijk rep(f_k)
    let mut rng = random::rng(0xa550c);
    let pairs: Vec<(usize, usize)> = if d <= 48 {
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect()
    } else {
        (0..2000).map(|_| (rng.random_range(0..d), rng.random_range(0..d))).collect()
    };
    for &(i, j) in &pairs {
        let lhs = rep[i].dot(&rep[j]);
        let mut rhs = zeros(d, d);
        for k in 0..d {
            let cijk = rep[i][(k, j)];
            rhs.zip_mut_with(&rep[k], |o, &y| *o += cijk * y);
        }
        res.associativity = res.associativity.max(fro_norm(&(lhs - rhs)));
        let inv = fro_norm(&(dagger(&products[i][j]) - e.apply(&dagger(&basis[j]).dot(&dagger(&basis[i])))));
        res.involution = res.involution.max(inv);
    }
    // *-representation and positivity of x·x*
    for i in 0..d {
        let adj = coeffs(&dagger(&basis[i]));
        let mut r_adj = zeros(d, d);
        for k in 0..d {
            r_adj.zip_mut_with(&rep[k], |o, &y| *o += adj[k] * y);
        }
        res.involution = res.involution.max(fro_norm(&(r_adj - dagger(&rep[i]))));
    }
    for _ in 0..d.clamp(4, 16) {
        let v = random::gaussian_vector(&mut rng, d);
        let mut x = zeros(d, d);
        for k in 0..d {
            x.zip_mut_with(&rep[k], |o, &y| *o += v[k] * y);
        }
        let xx = x.dot(&dagger(&x));
        let scale = vnorm(&v).powi(2).max(1.0);
        res.positivity = res.positivity.max((-min_eigenvalue(&xx)? / scale).max(0.0));
    }
    // center under the product, from structure constants
    let mut sys = zeros(d * d, d);
    for i in 0..d {
        let ci = rep[i].clone();
        for j in 0..d {
            for k in 0..d {
                // (f_i·f_j − f_j·f_i)_k
                sys[(j * d + k, i)] = ci[(k, j)] - rep[j][(k, i)];
            }
        }
    }
    let zns = null_space(&sys)?;
    let center_dim = zns.ncols();
    let center_elems: Vec<Mat> = column_vecs(&zns)
        .iter()
        .map(|v| {
            let mut x = zeros(d, d);
            for k in 0..d {
                x.zip_mut_with(&rep[k], |o, &y| *o += v[k] * y);
            }
            x
        })
        .collect();
    let wedderburn = wedderburn_from_center(&rep, &center_elems)?;
    for r in &rep {
        res.block_decomposition = res.block_decomposition.max(wedderburn.residual(r));
    }
    // stationary state ζ(b) = ⟨b 1̂, 1̂⟩
    let one = gns.one_hat();
    let stationary: Vec<C64> = basis.iter().map(|f| vdot(&one, &f.dot(&one))).collect();
    let mut zg = zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            // ζ(f_i* · f_j)
            let x = e.apply(&dagger(&basis[i]).dot(&basis[j]));
            zg[(i, j)] = vdot(&one, &x.dot(&one));
        }
    }
    let faithful_min_eigenvalue = min_eigenvalue(&zg)?;
    let zscale = eigvalsh(&zg)?.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let faithful = faithful_min_eigenvalue > 1e-10 * zscale;
    if let Some(phi) = phi {
        let pphi = poisson_superop(phi);
        for f in &basis {
            let a = vdot(&one, &pphi.apply(f).dot(&one));
            let b = vdot(&one, &f.dot(&one));
            res.stationarity = res.stationarity.max((a - b).norm());
        }
    }
    for (name, r) in [
        ("associativity", res.associativity),
        ("involution", res.involution),
        ("positivity", res.positivity),
        ("idempotence", res.idempotence),
    ] {
        if r > CSTAR_TOL {
            return Err(Error::CStarAxiom {
                axiom: name,
                residual: r,
            });
        }
    }
    Ok(BoundaryAlgebra {
        harmonic,
        expectation: e,
        basis,
        rep,
        wedderburn,
        center_dim,
        stationary,
        faithful,
        faithful_min_eigenvalue,
        residuals: res,
    })
}

/// Block decomposition of the structure representation given its center.
fn wedderburn_from_center(rep: &[Mat], center_elems: &[Mat]) -> Result<Wedderburn> {
    let d = rep.len();
    let alg = crate::concrete::ConcreteAlgebra::from_parts(rep.to_vec(), d);
    alg.wedderburn_with_center(center_elems)
}

/// Elements b of the boundary with b·L(x) = L(x)·b for all x ∈ M.
#[derive(Clone, Debug, Serialize)]
pub struct RelativeCommutant {
    pub dim: usize,
    pub center_dim: usize,
    pub equals_center: bool,
}

pub fn relative_commutant(b: &BoundaryAlgebra) -> Result<RelativeCommutant> {
    let gns = b.harmonic.gns();
    let d = b.dim();
    let dm = gns.dim();
    let mut sys = zeros(d * dm, d);
    for k in 0..dm {
        let lx = gns.left(&gns.basis_element(k));
        let ell = b.coords(&lx);
        let rx = b.represent(&lx);
        for i in 0..d {
            // f_i·L(x) − L(x)·f_i
            let col = b.rep[i].dot(&ell) - rx.column(i).to_owned();
            sys.slice_mut(ndarray::s![k * d..(k + 1) * d, i]).assign(&col);
        }
    }
    let dim = null_space(&sys)?.ncols();
    let center_dim = gns.algebra().blocks().len();
    Ok(RelativeCommutant {
        dim,
        center_dim,
        equals_center: dim == center_dim,
    })
}

/// L(Z(M)) as orthonormal vectorized columns.
pub fn center_columns(gns: &GnsSpace) -> Result<Mat> {
    let z: Subalgebra = center(gns)?;
    let vs: Vec<Vector> = z.basis().iter().map(|x| vec_cols(&gns.left(x))).collect();
    orth(&columns(&vs, gns.dim() * gns.dim()))
}

#[derive(Clone, Debug, Serialize)]
pub struct DoubleErgodicity {
    pub intersection_dim: usize,
    pub center_dim: usize,
    pub subspace_sin: f64,
    /// Residual of L(Z(M)) inside the intersection (unconditional inclusion).
    pub contains_center_residual: f64,
    pub equals_center: bool,
}

/// Fix(P_φ) ∩ Fix(P_φ°) compared with L(Z(M)); no precondition.
pub fn harmonic_intersection(phi: &Hyperstate) -> Result<DoubleErgodicity> {
    let gns = phi.gns().clone();
    let n = gns.dim() * gns.dim();
    let p = poisson_superop(phi);
    let po = opposite_superop(phi)?;
    let sys = vstack(&[p.matrix() - &eye(n), po.matrix() - &eye(n)]);
    let inter = null_space(&sys)?;
    let zc = center_columns(&gns)?;
    let proj = inter.dot(&dagger(&inter).dot(&zc));
    let contains = if zc.ncols() > 0 { op_norm(&(&zc - &proj))? } else { 0.0 };
    let sin = subspace_sin(&zc, &inter)?;
    Ok(DoubleErgodicity {
        intersection_dim: inter.ncols(),
        center_dim: zc.ncols(),
        subspace_sin: sin,
        contains_center_residual: contains,
        equals_center: inter.ncols() == zc.ncols() && sin <= 1e-8,
    })
}

pub(crate) fn require_regular_strong(phi: &Hyperstate, op: &'static str) -> Result<Classification> {
    let cl = classify(phi)?;
    if !(cl.regular && cl.strongly_generating) {
        return Err(Error::Precondition {
            op,
            report: serde_json::to_string(&cl).unwrap_or_default(),
        });
    }
    Ok(cl)
}

pub fn double_ergodicity(phi: &Hyperstate) -> Result<DoubleErgodicity> {
    require_regular_strong(phi, "double_ergodicity")?;
    harmonic_intersection(phi)
}

#[derive(Clone, Debug)]
pub struct MvResult {
    pub value: Mat,
    pub center_residual: f64,
    pub commutation_residual: f64,
    /// λ with value = λ·1 when M is a factor.
    pub scalar: Option<C64>,
    pub scalar_residual: Option<f64>,
}

/// Both Cesàro expectations, reusable across many operators.
pub struct MvProjector {
    gns: Arc<GnsSpace>,
    e: Superoperator,
    eo: Superoperator,
    center: Mat,
}

impl MvProjector {
    pub fn new(phi: &Hyperstate) -> Result<Self> {
        require_regular_strong(phi, "mv_project")?;
        let gns = phi.gns().clone();
        Ok(Self {
            e: cesaro_expectation(&poisson_superop(phi))?,
            eo: cesaro_expectation(&opposite_superop(phi)?)?,
            center: center_columns(&gns)?,
            gns,
        })
    }

    pub fn project(&self, t: &Mat) -> MvResult {
        let dd = self.gns.dim();
        let value = self.eo.apply(&self.e.apply(t));
        let v = vec_cols(&value);
        let proj = self.center.dot(&dagger(&self.center).dot(&v));
        let center_residual = vnorm(&(&v - &proj));
        let mut commutation_residual: f64 = 0.0;
        for k in 0..dd {
            let l = self.gns.left(&self.gns.basis_element(k));
            commutation_residual = commutation_residual.max(fro_norm(&commutator(&l, &value)));
        }
        let (scalar, scalar_residual) = if self.gns.algebra().is_factor() {
            let lam = trace(&value) / dd as f64;
            (Some(lam), Some(fro_norm(&(&value - &eye(dd).mapv(|z| z * lam)))))
        } else {
            (None, None)
        };
        MvResult {
            value,
            center_residual,
            commutation_residual,
            scalar,
            scalar_residual,
        }
    }
}

pub fn mv_project(phi: &Hyperstate, t: &Mat) -> Result<MvResult> {
    Ok(MvProjector::new(phi)?.project(t))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    /// Pools two independent runs.
    pub fn pool(&self, other: &Self) -> Self {
        let (n1, n2) = (self.samples as f64, other.samples as f64);
        let n = n1 + n2;
        let mean = (self.mean * n1 + other.mean * n2) / n;
        // second moments, recovered from the standard errors
        let m1 = self.std_error.powi(2) * n1 + self.mean.powi(2);
        let m2 = other.std_error.powi(2) * n2 + other.mean.powi(2);
        let var = ((m1 * n1 + m2 * n2) / n - mean * mean).max(0.0);
        Self {
            mean,
            std_error: (var / n).sqrt(),
            samples: self.samples + other.samples,
        }
    }
}

/// Averages ⟨T ξ, ξ⟩ over ξ = (w* v*)^ with w, v random words in a unitary
/// family; word lengths are uniform in [len, 2·len] to average over periods.
pub fn mv_monte_carlo(
    gns: &GnsSpace,
    unitaries: &[Mat],
    weights: &[f64],
    t: &Mat,
    samples: usize,
    len: usize,
    seed: u64,
) -> MonteCarloEstimate {
    let mut rng = random::rng(seed);
    let total: f64 = weights.iter().sum();
    let cdf: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect();
    let d = gns.algebra().rep_dim();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let (mut acc, mut tmp) = (eye(d), zeros(d, d));
    let id = eye(d);
    // product of a random word, accumulated in place
    let draw = |rng: &mut random::Rng64, n: usize, acc: &mut Mat, tmp: &mut Mat| {
        acc.assign(&id);
        for _ in 0..n {
            let u: f64 = rng.random();
            let k = cdf.partition_point(|&c| c < u).min(unitaries.len() - 1);
            ndarray::linalg::general_mat_mul(one, &*acc, &unitaries[k], zero, tmp);
            std::mem::swap(acc, tmp);
        }
    };
    let mut w = eye(d);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let a = rng.random_range(len..=2 * len);
        let b = rng.random_range(len..=2 * len);
        draw(&mut rng, a, &mut w, &mut tmp);
        draw(&mut rng, b, &mut acc, &mut tmp);
        // (vw)* = w* v*
        ndarray::linalg::general_mat_mul(one, &acc, &w, zero, &mut tmp);
        let xi = gns.hat(&dagger(&tmp));
        let val = vdot(&xi, &t.dot(&xi)).re;
        s1 += val;
        s2 += val * val;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    }
}

#[derive(Clone, Debug)]
pub struct DerivationResult {
    pub c: Mat,
    pub z: Mat,
    pub commutator_residual: f64,
    pub c_norm: f64,
    /// max_{n ≤ 64} ‖T − (P°)^n T‖ when asserted.
    pub bound: Option<f64>,
}

/// Splits T = c + z with z = E°(T) projected onto L(Z(M)).
pub fn derivation_inner_part(phi: &Hyperstate, t: &Mat, unitary_family: bool) -> Result<DerivationResult> {
    require_regular_strong(phi, "derivation_inner_part")?;
    let gns = phi.gns().clone();
    let dd = gns.dim();
    let po = opposite_superop(phi)?;
    let eo = cesaro_expectation(&po)?;
    let zc = center_columns(&gns)?;
    let ev = vec_cols(&eo.apply(t));
    let z = unvec(&zc.dot(&dagger(&zc).dot(&ev)), dd);
    let c = t - &z;
    let mut commutator_residual: f64 = 0.0;
    for k in 0..dd {
        let l = gns.left(&gns.basis_element(k));
        commutator_residual =
            commutator_residual.max(fro_norm(&(commutator(&l, &c) - commutator(&l, t))));
    }
    let p = poisson_superop(phi);
    let harmonic = fro_norm(&(p.apply(t) - t)) <= 1e-9 * fro_norm(t).max(1.0);
    let bound = if unitary_family && harmonic {
        let mut b: f64 = 0.0;
        let mut cur = t.clone();
        for _ in 0..64 {
            cur = po.apply(&cur);
            b = b.max(op_norm(&(t - &cur))?);
        }
        Some(b)
    } else {
        None
    };
    Ok(DerivationResult {
        c_norm: op_norm(&c)?,
        c,
        z,
        commutator_residual,
        bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    Decays,
    NoDecay,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct FoguelReport {
    /// norms[p][n−1] = ‖[L(x_p), A_n]‖₁.
    pub norms: Vec<Vec<f64>>,
    pub final_norm: f64,
    pub harmonic_dim: usize,
    pub algebra_dim: usize,
    pub decay: Decay,
    pub harmonic_equals_m: bool,
    /// None when the decay side is inconclusive.
    pub agree: Option<bool>,
}

pub fn foguel_test(psi: &Hyperstate, probes: &[Mat], n_max: usize) -> Result<FoguelReport> {
    let gns = psi.gns().clone();
    let lazy = psi.mix(&Hyperstate::identity(gns.clone()), 0.5)?;
    let p = poisson_superop(&lazy);
    let ls: Vec<Mat> = probes.iter().map(|x| gns.left(x)).collect();
    let mut norms = vec![Vec::with_capacity(n_max); probes.len()];
    let mut a = gns.vacuum_projection();
    for _ in 0..n_max {
        a = p.apply_dual(&a);
        for (k, l) in ls.iter().enumerate() {
            norms[k].push(nuclear_norm(&commutator(l, &a))?);
        }
    }
    let final_norm = norms
        .iter()
        .filter_map(|v| v.last().copied())
        .fold(0.0, f64::max);
    let decay = if final_norm < 1e-6 {
        Decay::Decays
    } else if final_norm > 1e-2 {
        Decay::NoDecay
    } else {
        Decay::Inconclusive
    };
    let har = fixed_space(&p)?;
    let harmonic_equals_m = har.dim() == gns.dim() && har.contains_m();
    let agree = match decay {
        Decay::Inconclusive => None,
        d => Some((d == Decay::Decays) == harmonic_equals_m),
    };
    Ok(FoguelReport {
        norms,
        final_norm,
        harmonic_dim: har.dim(),
        algebra_dim: gns.dim(),
        decay,
        harmonic_equals_m,
        agree,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorSplit {
    pub dim_product: usize,
    pub dim_first: usize,
    pub dim_second: usize,
    pub equal: bool,
    pub subspace_sin: f64,
}

/// Permutation from L²(M₁)⊗L²(M₂) (Kronecker order) to L²(M₁⊗M₂).
pub fn tensor_gns_permutation(m1: &TracialAlgebra, m2: &TracialAlgebra) -> Vec<usize> {
    let g1 = GnsSpace::new(m1.clone());
    let g2 = GnsSpace::new(m2.clone());
    let prod = GnsSpace::new(m1.tensor(m2));
    let d2 = g2.dim();
    let mut perm = vec![0; g1.dim() * d2];
    let nb2 = m2.blocks().len();
    for (i, &n) in m1.blocks().iter().enumerate() {
        for (j, &m) in m2.blocks().iter().enumerate() {
            let blk = i * nb2 + j;
            for a in 0..n {
                for c in 0..n {
                    for b in 0..m {
                        for dcol in 0..m {
                            let t = g1.index(i, a, c) * d2 + g2.index(j, b, dcol);
                            perm[t] = prod.index(blk, a * m + b, c * m + dcol);
                        }
                    }
                }
            }
        }
    }
    perm
}

/// The product hyperstate with family {z_i ⊗ w_j}.
pub fn product_hyperstate(phi1: &Hyperstate, phi2: &Hyperstate) -> Result<Hyperstate> {
    let m1 = phi1.gns().algebra();
    let m2 = phi2.gns().algebra();
    let gns = GnsSpace::new(m1.tensor(m2));
    let mut fam = Vec::new();
    for z in &phi1.standard_form().family {
        for w in &phi2.standard_form().family {
            fam.push(m1.tensor_element(m2, z, w));
        }
    }
    Hyperstate::from_family(gns, &fam)
}

pub fn tensor_split_check(phi1: &Hyperstate, phi2: &Hyperstate) -> Result<TensorSplit> {
    require_regular_strong(phi1, "tensor_split_check")?;
    require_regular_strong(phi2, "tensor_split_check")?;
    let prod = product_hyperstate(phi1, phi2)?;
    let h1 = fixed_space(&poisson_superop(phi1))?;
    let h2 = fixed_space(&poisson_superop(phi2))?;
    let hp = fixed_space(&poisson_superop(&prod))?;
    let perm = tensor_gns_permutation(phi1.gns().algebra(), phi2.gns().algebra());
    let dp = prod.gns().dim();
    let mut vs = Vec::new();
    for a in h1.basis() {
        for b in h2.basis() {
            let k = kron(a, b);
            let mut t = zeros(dp, dp);
            for (x, &px) in perm.iter().enumerate() {
                for (y, &py) in perm.iter().enumerate() {
                    t[(px, py)] = k[(x, y)];
                }
            }
            vs.push(vec_cols(&t));
        }
    }
    let split = orth(&columns(&vs, dp * dp))?;
    let sin = subspace_sin(&hp.columns(), &split)?;
    Ok(TensorSplit {
        dim_product: hp.dim(),
        dim_first: h1.dim(),
        dim_second: h2.dim(),
        equal: hp.dim() == h1.dim() * h2.dim() && sin <= 1e-8,
        subspace_sin: sin,
    })
}

/// Draws a random operator on L²(M,τ).
pub fn random_operator(gns: &GnsSpace, rng: &mut impl Rng) -> Mat {
    random::ginibre(rng, gns.dim(), gns.dim())
}
