//! Iterated Stinespring dilation of a u.c.p. map on a concrete algebra, the
//! truncated Bhat endomorphism, and compression of fixed points.
//!
//! Stage n carries H_n, an isometry V_n: H_{n−1} → H_n, a representation
//! π_n of A_{n−1} on H_n, the algebra A_n generated by π_n(A_{n−1}) and
//! V_n A_{n−1} V_n*, and φ_n(x) = π_n(V_n* x V_n) on A_n.

use rand::Rng;
use serde::Serialize;

use crate::concrete::{span_closure, ConcreteAlgebra};
use crate::error::{invalid, Error, Result};
use crate::hyperstate::Hyperstate;
use crate::linalg::*;
use crate::random;

pub const DEFAULT_DIM_CAP: usize = 4096;
/// Stage algebras are materialized as bases up to this Hilbert dimension.
pub const ALGEBRA_SPACE_CAP: usize = 32;
const UNITAL_TOL: f64 = 1e-10;
const INVARIANCE_TOL: f64 = 1e-10;
const CHOI_TOL: f64 = 1e-10;
const CP_TOL: f64 = 1e-9;
const SAMPLES: usize = 6;
const SEED: u64 = 0xb4a7;

/// A unital *-algebra on C^d known through generators, and through an
/// orthonormal basis when d is small enough.
#[derive(Clone, Debug)]
pub struct StageAlgebra {
    space_dim: usize,
    generators: Vec<Mat>,
    basis: Option<ConcreteAlgebra>,
}

impl StageAlgebra {
    pub fn from_concrete(a: ConcreteAlgebra) -> Self {
        let generators = a.basis().to_vec();
        Self {
            space_dim: a.space_dim(),
            generators,
            basis: Some(a),
        }
    }

    fn generated(space_dim: usize, generators: Vec<Mat>) -> Result<Self> {
        let basis = if space_dim <= ALGEBRA_SPACE_CAP {
            Some(ConcreteAlgebra::bicommutant(&generators, space_dim)?)
        } else {
            None
        };
        Ok(Self {
            space_dim,
            generators,
            basis,
        })
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn generators(&self) -> &[Mat] {
        &self.generators
    }

    pub fn basis(&self) -> Option<&ConcreteAlgebra> {
        self.basis.as_ref()
    }

    pub fn dim(&self) -> Option<usize> {
        self.basis.as_ref().map(|b| b.dim())
    }

    /// Random element: a Gaussian combination of basis elements, or of short
    /// words in the generators when no basis is kept.
    pub fn sample(&self, rng: &mut impl Rng) -> Mat {
        let d = self.space_dim;
        let mut x = zeros(d, d);
        match &self.basis {
            Some(b) => {
                for e in b.basis() {
                    x = x + scale(e, random::gaussian(rng));
                }
            }
            None => {
                x = x + scale(&eye(d), random::gaussian(rng));
                for _ in 0..8 {
                    let len = rng.random_range(1..=3);
                    let mut w = eye(d);
                    for _ in 0..len {
                        let g = &self.generators[rng.random_range(0..self.generators.len())];
                        w = if rng.random_bool(0.5) { w.dot(g) } else { w.dot(&dagger(g)) };
                    }
                    let n = fro_norm(&w).max(1e-300);
                    x = x + scale(&w, random::gaussian(rng) / n);
                }
            }
        }
        x
    }

    /// Relative distance from the algebra, when a basis is kept.
    pub fn membership(&self, x: &Mat) -> Option<f64> {
        let n = fro_norm(x).max(1e-300);
        self.basis.as_ref().map(|b| b.membership_residual(x) / n)
    }
}

#[derive(Clone, Debug)]
enum Action {
    /// x ↦ Σ K* x K.
    Kraus(Vec<Mat>),
    /// Column-stacking matrix on M_d.
    Superoperator(Mat),
}

/// Unital completely positive map of a concrete algebra into itself.
#[derive(Clone, Debug)]
pub struct UcpMap {
    algebra: StageAlgebra,
    action: Action,
}

impl UcpMap {
    /// x ↦ Σ K* x K restricted to `algebra`.
    pub fn from_kraus(algebra: ConcreteAlgebra, kraus: Vec<Mat>) -> Result<Self> {
        let d = algebra.space_dim();
        if kraus.is_empty() {
            return Err(invalid("kraus", "empty family"));
        }
        if kraus.iter().any(|k| k.dim() != (d, d)) {
            return Err(invalid("kraus", format!("operators must be {d}×{d}")));
        }
        Self {
            algebra: StageAlgebra::from_concrete(algebra),
            action: Action::Kraus(kraus),
        }
        .validated()
    }

    pub fn from_superoperator(algebra: ConcreteAlgebra, s: Mat) -> Result<Self> {
        let d = algebra.space_dim();
        if s.dim() != (d * d, d * d) {
            return Err(invalid("superoperator", format!("must be {0}×{0}", d * d)));
        }
        let map = Self {
            algebra: StageAlgebra::from_concrete(algebra),
            action: Action::Superoperator(s),
        };
        let low = min_eigenvalue(&hermitian_part(&map.choi()))?;
        if low < -CHOI_TOL {
            return Err(Error::CpViolation { min_eigenvalue: low });
        }
        map.validated()
    }

    /// As [`Self::from_superoperator`] without the Choi check; the Gram
    /// matrix of a Stinespring step still refuses maps that are not CP.
    pub fn from_superoperator_unchecked(algebra: ConcreteAlgebra, s: Mat) -> Result<Self> {
        let d = algebra.space_dim();
        if s.dim() != (d * d, d * d) {
            return Err(invalid("superoperator", format!("must be {0}×{0}", d * d)));
        }
        Self {
            algebra: StageAlgebra::from_concrete(algebra),
            action: Action::Superoperator(s),
        }
        .validated()
    }

    pub fn identity(algebra: ConcreteAlgebra) -> Self {
        let d = algebra.space_dim();
        Self {
            algebra: StageAlgebra::from_concrete(algebra),
            action: Action::Kraus(vec![eye(d)]),
        }
    }

    /// x ↦ Tr(x)/d · 1 on M_d.
    pub fn trace_expectation(d: usize) -> Self {
        let s = 1.0 / (d as f64).sqrt();
        let mut kraus = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                kraus.push(basis_unit(d, i, j).mapv(|z| z * s));
            }
        }
        Self {
            algebra: StageAlgebra::from_concrete(ConcreteAlgebra::full(d)),
            action: Action::Kraus(kraus),
        }
    }

    /// The Poisson transform of φ on B(L²(M,τ)).
    pub fn poisson(phi: &Hyperstate) -> Result<Self> {
        let gns = phi.gns();
        let kraus = phi
            .standard_form()
            .family
            .iter()
            .map(|z| gns.right(&dagger(z)))
            .collect();
        Self::from_kraus(ConcreteAlgebra::full(gns.dim()), kraus)
    }

    fn validated(self) -> Result<Self> {
        let d = self.space_dim();
        let unital = fro_norm(&(self.apply(&eye(d)) - eye(d)));
        if unital > UNITAL_TOL {
            return Err(invalid("map", format!("not unital: ‖φ(1) − 1‖ = {unital:.3e}")));
        }
        let mut worst: f64 = 0.0;
        for b in self.algebra.generators() {
            worst = worst.max(self.algebra.membership(&self.apply(b)).unwrap_or(0.0));
        }
        if worst > INVARIANCE_TOL {
            return Err(invalid("map", format!("does not preserve the algebra: residual {worst:.3e}")));
        }
        Ok(self)
    }

    pub fn algebra(&self) -> &StageAlgebra {
        &self.algebra
    }

    pub fn space_dim(&self) -> usize {
        self.algebra.space_dim
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        match &self.action {
            Action::Kraus(ks) => {
                let mut out = zeros(x.nrows(), x.ncols());
                for k in ks {
                    out = out + mm3(&dagger(k), x, k);
                }
                out
            }
            Action::Superoperator(s) => unvec(&s.dot(&vec_cols(x)), self.space_dim()),
        }
    }

    pub fn power(&self, x: &Mat, k: usize) -> Mat {
        (0..k).fold(x.clone(), |y, _| self.apply(&y))
    }

    /// Σ E_ij ⊗ φ(E_ij).
    pub fn choi(&self) -> Mat {
        let d = self.space_dim();
        let mut ch = zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let f = self.apply(&basis_unit(d, i, j));
                for k in 0..d {
                    for l in 0..d {
                        ch[(i * d + k, j * d + l)] = f[(k, l)];
                    }
                }
            }
        }
        ch
    }

    /// Kraus operators, read off the Choi matrix when the map was given as a
    /// superoperator.
    pub fn kraus(&self) -> Result<Vec<Mat>> {
        match &self.action {
            Action::Kraus(ks) => Ok(ks.clone()),
            Action::Superoperator(_) => {
                let d = self.space_dim();
                let (w, u) = eigh(&self.choi())?;
                let top = w.iter().cloned().fold(0.0, f64::max);
                let mut out = Vec::new();
                for (p, &l) in w.iter().enumerate() {
                    if l <= RANK_REL * top {
                        continue;
                    }
                    // φ(x) = Σ A x A* with A[k,i] = √λ v[i d + k]; K = A*.
                    let s = l.sqrt();
                    let a = Mat::from_shape_fn((d, d), |(k, i)| u[(i * d + k, p)] * s);
                    out.push(dagger(&a));
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Representation {
    /// π(x) = Q*(1_r ⊗ x)Q.
    Ampliation { frame: Mat, copies: usize },
    /// π(x) = Σ ⟨b_k, x⟩ π(b_k).
    OnBasis { basis: Vec<Mat>, images: Vec<Mat> },
}

impl Representation {
    fn apply(&self, x: &Mat) -> Mat {
        match self {
            Representation::Ampliation { frame, copies } => {
                dagger(frame).dot(&ampliate(x, frame, *copies))
            }
            Representation::OnBasis { basis, images } => {
                let (m, n) = images[0].dim();
                let mut out = zeros(m, n);
                for (b, im) in basis.iter().zip(images) {
                    out = out + scale(im, hs_inner(b, x));
                }
                out
            }
        }
    }

    /// ω with Tr π(z) = Tr(z ω) on the domain algebra.
    fn trace_density(&self) -> Mat {
        match self {
            Representation::Ampliation { frame, copies } => {
                let d = frame.nrows() / copies;
                let mut w = zeros(d, d);
                for i in 0..*copies {
                    let qi = frame.slice(ndarray::s![i * d..(i + 1) * d, ..]).to_owned();
                    w = w + qi.dot(&dagger(&qi));
                }
                w
            }
            Representation::OnBasis { basis, images } => {
                let d = basis[0].nrows();
                let mut w = zeros(d, d);
                for (b, im) in basis.iter().zip(images) {
                    w = w + scale(&dagger(b), trace(im));
                }
                w
            }
        }
    }
}

/// (1_r ⊗ x) q for q with r stacked blocks of d rows.
fn ampliate(x: &Mat, q: &Mat, copies: usize) -> Mat {
    let d = x.nrows();
    let mut out = zeros(q.nrows(), q.ncols());
    for i in 0..copies {
        let blk = q.slice(ndarray::s![i * d..(i + 1) * d, ..]);
        out.slice_mut(ndarray::s![i * d..(i + 1) * d, ..]).assign(&x.dot(&blk));
    }
    out
}

/// Smallest subspace containing the range of `start` and invariant under
/// 1_r ⊗ g for every generator and its adjoint.
fn cyclic_subspace(start: &Mat, gens: &[Mat], copies: usize) -> Result<Mat> {
    let mut q = orth(start)?;
    let mut fresh = q.clone();
    let limit = q.nrows();
    while fresh.ncols() > 0 && q.ncols() < limit {
        let mut parts = Vec::with_capacity(2 * gens.len());
        for g in gens {
            parts.push(ampliate(g, &fresh, copies));
            parts.push(ampliate(&dagger(g), &fresh, copies));
        }
        let mut cand = hstack(&parts);
        let size = cand.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for _ in 0..2 {
            cand = &cand - &q.dot(&dagger(&q).dot(&cand));
        }
        fresh = orth_with(&cand, 0.0, RANK_REL * size.max(1e-300))?;
        if fresh.ncols() > 0 {
            q = hstack(&[q, fresh.clone()]);
        }
    }
    Ok(q)
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StageResiduals {
    /// ‖V*V − 1‖.
    pub isometry: f64,
    /// π unital, multiplicative and *-preserving on samples.
    pub homomorphism: f64,
    /// (a) V*π(x)V = φ_{n−1}(x).
    pub compression: f64,
    /// (b) V*A_nV ⊆ A_{n−1}; needs a basis of A_{n−1}.
    pub corner: Option<f64>,
    /// (b) with both bases kept: dim V*A_nV = dim A_{n−1}.
    pub corner_dim_match: Option<bool>,
    /// (c) φ_n(π(x)) = π(φ_{n−1}(x)).
    pub intertwining: f64,
    /// H_n minus the dimension of [A_n V H_{n−1}]; zero means central support 1.
    pub central_support_deficiency: usize,
    /// Products and adjoints of sampled elements stay in the kept basis of A_n.
    pub algebra_closure: Option<f64>,
}

impl StageResiduals {
    pub fn worst(&self) -> f64 {
        [
            self.isometry,
            self.homomorphism,
            self.compression,
            self.corner.unwrap_or(0.0),
            self.intertwining,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// One step of the iterated Stinespring construction.
#[derive(Clone, Debug)]
pub struct DilationStage {
    pub index: usize,
    pub dim: usize,
    /// Size of the space the quotient was taken in.
    pub ambient_dim: usize,
    v: Mat,
    pi: Representation,
    phi: UcpMap,
    pub residuals: StageResiduals,
}

impl DilationStage {
    pub fn v(&self) -> &Mat {
        &self.v
    }

    pub fn pi(&self, x: &Mat) -> Mat {
        self.pi.apply(x)
    }

    pub fn phi(&self) -> &UcpMap {
        &self.phi
    }

    pub fn algebra(&self) -> &StageAlgebra {
        self.phi.algebra()
    }
}

/// Stinespring step through the Gram matrix ⟨a⊗ξ, b⊗η⟩ = ⟨φ(b*a)ξ, η⟩ on
/// A ⊗ H, quotiented by its null space.
pub fn stinespring_step(phi: &UcpMap) -> Result<DilationStage> {
    gram_step(phi, 1, DEFAULT_DIM_CAP, &mut random::rng(SEED))
}

fn gram_step(phi: &UcpMap, index: usize, dim_cap: usize, rng: &mut impl Rng) -> Result<DilationStage> {
    let alg = phi.algebra().basis().ok_or(Error::Precondition {
        op: "stinespring_step",
        report: "the algebra has no materialized basis".into(),
    })?;
    let b = alg.basis();
    let (m, d) = (b.len(), alg.space_dim());
    if m * d > dim_cap {
        return Err(Error::DimensionCap { needed: m * d, cap: dim_cap });
    }
    let mut g = zeros(m * d, m * d);
    for l in 0..m {
        let bl = dagger(&b[l]);
        for k in 0..m {
            let f = phi.apply(&bl.dot(&b[k]));
            for i in 0..d {
                for j in 0..d {
                    g[(l * d + i, k * d + j)] = f[(i, j)];
                }
            }
        }
    }
    let (w, u) = eigh(&g)?;
    let top = w.iter().cloned().fold(0.0, f64::max);
    if w[0] < -CP_TOL * top.max(1.0) {
        return Err(Error::CpViolation { min_eigenvalue: w[0] });
    }
    let kept: Vec<usize> = (0..w.len()).filter(|&p| w[p] > RANK_REL * top).collect();
    let r = kept.len();
    // Q = Λ^{1/2} U*, Q⁺ = U Λ^{-1/2}.
    let mut q = zeros(r, m * d);
    let mut q_plus = zeros(m * d, r);
    for (row, &p) in kept.iter().enumerate() {
        let s = w[p].sqrt();
        for c in 0..m * d {
            q[(row, c)] = u[(c, p)].conj() * s;
            q_plus[(c, row)] = u[(c, p)] / s;
        }
    }
    let one = eye(d);
    let alpha: Vec<C64> = b.iter().map(|bl| hs_inner(bl, &one)).collect();
    let mut v = zeros(r, d);
    for j in 0..d {
        for l in 0..m {
            let col = q.column(l * d + j).to_owned();
            let mut vj = v.column_mut(j);
            vj.zip_mut_with(&col, |o, &x| *o += alpha[l] * x);
        }
    }
    let left = |x: &Mat| -> Mat {
        let mx = Mat::from_shape_fn((m, m), |(l, k)| hs_inner(&b[l], &x.dot(&b[k])));
        q.dot(&kron(&mx, &one)).dot(&q_plus)
    };
    let images: Vec<Mat> = b.iter().map(left).collect();
    let pi = Representation::OnBasis {
        basis: b.to_vec(),
        images,
    };
    let mut s = zeros(r * r, r * r);
    for a in 0..r {
        for c in 0..r {
            let e = basis_unit(r, a, c);
            let y = pi.apply(&mm3(&dagger(&v), &e, &v));
            s.column_mut(a + c * r).assign(&vec_cols(&y));
        }
    }
    finish_stage(phi, index, m * d, v, pi, Action::Superoperator(s), rng)
}

/// Stinespring step on the Kraus realization: H_new is the cyclic subspace
/// of (1_r ⊗ A)(K_1 ξ, …, K_r ξ) inside C^r ⊗ H, which is isometric to the
/// Gram quotient. The Kraus rank of φ_n stays r.
fn kraus_step(phi: &UcpMap, index: usize, dim_cap: usize, rng: &mut impl Rng) -> Result<DilationStage> {
    let ks = phi.kraus()?;
    let r = ks.len();
    let d = phi.space_dim();
    if r * d > dim_cap {
        return Err(Error::DimensionCap { needed: r * d, cap: dim_cap });
    }
    let stacked = vstack(&ks);
    let frame = cyclic_subspace(&stacked, phi.algebra().generators(), r)?;
    let v = dagger(&frame).dot(&stacked);
    let next: Vec<Mat> = (0..r)
        .map(|i| v.dot(&frame.slice(ndarray::s![i * d..(i + 1) * d, ..])))
        .collect();
    let pi = Representation::Ampliation { frame, copies: r };
    finish_stage(phi, index, r * d, v, pi, Action::Kraus(next), rng)
}

fn finish_stage(
    prev: &UcpMap,
    index: usize,
    ambient_dim: usize,
    v: Mat,
    pi: Representation,
    action: Action,
    rng: &mut impl Rng,
) -> Result<DilationStage> {
    let dim = v.nrows();
    let vd = dagger(&v);
    let mut gens: Vec<Mat> = prev.algebra().generators().iter().map(|g| pi.apply(g)).collect();
    gens.extend(prev.algebra().generators().iter().map(|g| mm3(&v, g, &vd)));
    gens.push(v.dot(&vd));
    let algebra = StageAlgebra::generated(dim, gens)?;
    let phi = UcpMap { algebra, action };
    let mut stage = DilationStage {
        index,
        dim,
        ambient_dim,
        v,
        pi,
        phi,
        residuals: StageResiduals::default(),
    };
    stage.residuals = stage_residuals(prev, &stage, rng)?;
    Ok(stage)
}

fn rel(a: &Mat, b: &Mat, scale: f64) -> f64 {
    fro_norm(&(a - b)) / scale.max(1e-300)
}

fn stage_residuals(prev: &UcpMap, st: &DilationStage, rng: &mut impl Rng) -> Result<StageResiduals> {
    let v = &st.v;
    let vd = dagger(v);
    let d0 = prev.space_dim();
    let mut xs: Vec<Mat> = prev.algebra().generators().to_vec();
    xs.extend((0..SAMPLES).map(|_| prev.algebra().sample(rng)));

    let mut out = StageResiduals {
        isometry: fro_norm(&(vd.dot(v) - eye(d0))),
        homomorphism: fro_norm(&(st.pi(&eye(d0)) - eye(st.dim))),
        ..Default::default()
    };
    for x in &xs {
        let nx = fro_norm(x);
        let px = st.pi(x);
        out.homomorphism = out.homomorphism.max(rel(&st.pi(&dagger(x)), &dagger(&px), nx));
        for y in xs.iter().take(SAMPLES) {
            let s = nx * fro_norm(y);
            out.homomorphism = out.homomorphism.max(rel(&st.pi(&x.dot(y)), &px.dot(&st.pi(y)), s));
        }
        out.compression = out.compression.max(rel(&mm3(&vd, &px, v), &prev.apply(x), nx));
        out.intertwining = out
            .intertwining
            .max(rel(&st.phi.apply(&px), &st.pi(&prev.apply(x)), nx));
    }

    let ys: Vec<Mat> = match st.algebra().basis() {
        Some(b) => b.basis().to_vec(),
        None => (0..SAMPLES).map(|_| st.algebra().sample(rng)).collect(),
    };
    let corners: Vec<Mat> = ys.iter().map(|y| mm3(&vd, y, v)).collect();
    if prev.algebra().basis().is_some() {
        let mut worst: f64 = 0.0;
        for c in &corners {
            worst = worst.max(prev.algebra().membership(c).unwrap_or(0.0));
        }
        out.corner = Some(worst);
        if let (Some(_), Some(dim0)) = (st.algebra().basis(), prev.algebra().dim()) {
            out.corner_dim_match = Some(orth_matrices(&corners)?.len() == dim0);
        }
    }

    let reach = cyclic_subspace(v, st.algebra().generators(), 1)?;
    out.central_support_deficiency = st.dim - reach.ncols();

    if let Some(b) = st.algebra().basis() {
        let mut worst: f64 = 0.0;
        for _ in 0..SAMPLES {
            let x = st.algebra().sample(rng);
            let y = st.algebra().sample(rng);
            let s = fro_norm(&x) * fro_norm(&y);
            worst = worst.max(b.membership_residual(&x.dot(&y)) / s.max(1e-300));
            worst = worst.max(b.membership_residual(&dagger(&x)) / fro_norm(&x).max(1e-300));
        }
        out.algebra_closure = Some(worst);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub index: usize,
    pub dim: usize,
    pub ambient_dim: usize,
    pub algebra_dim: Option<usize>,
    pub residuals: StageResiduals,
}

/// Relations between stage n and stage n+1.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinkReport {
    pub from: usize,
    /// (d) π_{n+1}(V_n x V_n*) = V_{n+1} π_n(x) V_{n+1}*.
    pub bimodule: f64,
    /// π_{n+1}(V_nV_n*) ≤ V_{n+1}V_{n+1}*.
    pub monotone: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DilationReport {
    pub requested_depth: usize,
    pub achieved_depth: usize,
    pub dim_cap: usize,
    pub truncation: Option<String>,
    pub stages: Vec<StageReport>,
    pub links: Vec<LinkReport>,
    /// ‖φ₀^k(x) − W*α^k(WxW*)W‖ relative, for k = 0..=depth.
    pub bhat: Vec<f64>,
    /// α^k(WW*) ≤ α^{k+1}(WW*) inside the last stage.
    pub projections_increasing: f64,
}

impl DilationReport {
    pub fn worst(&self) -> f64 {
        let s = self.stages.iter().map(|s| s.residuals.worst());
        let l = self.links.iter().flat_map(|l| [l.bimodule, l.monotone]);
        s.chain(l)
            .chain(self.bhat.iter().copied())
            .chain([self.projections_increasing])
            .fold(0.0, f64::max)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.dim).collect()
    }
}

/// Stages 1..=N over a base map, with N possibly short of the request.
#[derive(Clone, Debug)]
pub struct Dilation {
    base: UcpMap,
    stages: Vec<DilationStage>,
    pub report: DilationReport,
}

impl Dilation {
    pub fn base(&self) -> &UcpMap {
        &self.base
    }

    pub fn stages(&self) -> &[DilationStage] {
        &self.stages
    }

    /// The map on A_n; n = 0 is the base.
    pub fn map(&self, n: usize) -> &UcpMap {
        if n == 0 {
            &self.base
        } else {
            &self.stages[n - 1].phi
        }
    }

    /// W_{m→n} = V_n ⋯ V_{m+1}.
    pub fn embedding(&self, m: usize, n: usize) -> Mat {
        let mut w = eye(self.map(m).space_dim());
        for st in &self.stages[m..n] {
            w = st.v.dot(&w);
        }
        w
    }

    /// π_k ∘ ⋯ ∘ π_1.
    pub fn represent(&self, x: &Mat, k: usize) -> Mat {
        self.stages[..k].iter().fold(x.clone(), |y, st| st.pi(&y))
    }
}

/// Iterates the Stinespring step up to `depth`. Hitting `dim_cap` ends the
/// iteration early and records the achieved depth.
pub fn bhat_dilate(phi0: &UcpMap, depth: usize, dim_cap: usize) -> Result<Dilation> {
    if depth == 0 {
        return Err(invalid("depth", "must be at least 1"));
    }
    let mut rng = random::rng(SEED);
    let mut stages: Vec<DilationStage> = Vec::new();
    let mut truncation = None;
    for n in 1..=depth {
        let prev = stages.last().map(|s| &s.phi).unwrap_or(phi0);
        match kraus_step(prev, n, dim_cap, &mut rng) {
            Ok(st) => stages.push(st),
            Err(Error::DimensionCap { needed, cap }) => {
                truncation = Some(format!("stage {n} needs dimension {needed} > cap {cap}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut dil = Dilation {
        base: phi0.clone(),
        stages,
        report: DilationReport {
            requested_depth: depth,
            achieved_depth: 0,
            dim_cap,
            truncation,
            stages: vec![],
            links: vec![],
            bhat: vec![],
            projections_increasing: 0.0,
        },
    };
    dil.report = dilation_report(&dil, depth, dim_cap, dil.report.truncation.clone(), &mut rng)?;
    Ok(dil)
}

fn dilation_report(
    dil: &Dilation,
    depth: usize,
    dim_cap: usize,
    truncation: Option<String>,
    rng: &mut impl Rng,
) -> Result<DilationReport> {
    let n = dil.stages.len();
    let stages = dil
        .stages
        .iter()
        .map(|s| StageReport {
            index: s.index,
            dim: s.dim,
            ambient_dim: s.ambient_dim,
            algebra_dim: s.algebra().dim(),
            residuals: s.residuals,
        })
        .collect();

    let mut links = Vec::new();
    for k in 0..n.saturating_sub(1) {
        let (a, b) = (&dil.stages[k], &dil.stages[k + 1]);
        let prev = dil.map(k).algebra();
        let (va, vb) = (&a.v, &b.v);
        let mut bimodule: f64 = 0.0;
        let mut xs: Vec<Mat> = prev.generators().to_vec();
        xs.extend((0..SAMPLES).map(|_| prev.sample(rng)));
        for x in &xs {
            let lhs = b.pi(&mm3(va, x, &dagger(va)));
            let rhs = mm3(vb, &a.pi(x), &dagger(vb));
            bimodule = bimodule.max(rel(&lhs, &rhs, fro_norm(x)));
        }
        let p = b.pi(&va.dot(&dagger(va)));
        let q = vb.dot(&dagger(vb));
        let monotone = fro_norm(&(q.dot(&p) - &p))
            .max(fro_norm(&(p.dot(&p) - &p)))
            .max(fro_norm(&(&p - &dagger(&p))));
        links.push(LinkReport {
            from: k + 1,
            bimodule,
            monotone,
        });
    }

    let mut bhat = vec![0.0; n + 1];
    let mut projections_increasing: f64 = 0.0;
    if n > 0 {
        let w0 = dil.embedding(0, n);
        let w0d = dagger(&w0);
        let outer: Vec<Mat> = (0..=n).map(|k| dil.embedding(k, n)).collect();
        for _ in 0..SAMPLES {
            let x = dil.base.algebra().sample(rng);
            let nx = fro_norm(&x);
            for (k, wk) in outer.iter().enumerate() {
                let lifted = mm3(wk, &dil.represent(&x, k), &dagger(wk));
                let got = mm3(&w0d, &lifted, &w0);
                bhat[k] = f64::max(bhat[k], rel(&got, &dil.base.power(&x, k), nx));
            }
        }
        let ps: Vec<Mat> = outer.iter().map(|w| w.dot(&dagger(w))).collect();
        for k in 0..n {
            let r = fro_norm(&(ps[k + 1].dot(&ps[k]) - &ps[k]));
            projections_increasing = projections_increasing.max(r);
        }
    }
    Ok(DilationReport {
        requested_depth: depth,
        achieved_depth: n,
        dim_cap,
        truncation,
        stages,
        links,
        bhat,
        projections_increasing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HarStability {
    /// dim Fix(φ_n) for n = 0..=N; `None` where the stage could not be solved.
    pub dims: Vec<Option<usize>>,
    /// ‖φ_n(x) − x‖ on the computed fixed points.
    pub fixed_residual: f64,
    /// π_n maps Fix(φ_{n−1}) into Fix(φ_n).
    pub into_residual: f64,
    /// V_n* x V_n lies in Fix(φ_{n−1}) for x ∈ Fix(φ_n).
    pub compression_residual: f64,
    /// The compressions span Fix(φ_{n−1}).
    pub onto_residual: f64,
    /// |‖V*xV‖ − ‖x‖| / ‖x‖ in operator norm on sampled fixed points.
    pub isometry_residual: f64,
    pub stable: bool,
    pub detail: Option<String>,
}

fn combine(coefs: ndarray::ArrayView1<C64>, basis: &[Mat]) -> Mat {
    let d = basis[0].nrows();
    let mut x = zeros(d, d);
    for (c, b) in coefs.iter().zip(basis) {
        x.zip_mut_with(b, |o, &y| *o += c * y);
    }
    x
}

fn fixed_points_base(phi: &UcpMap) -> Result<Vec<Mat>> {
    let b = phi.algebra().basis().expect("base algebra is materialized").basis();
    let m = b.len();
    let mut a = zeros(m, m);
    for (l, bl) in b.iter().enumerate() {
        let f = phi.apply(bl);
        for (k, bk) in b.iter().enumerate() {
            a[(k, l)] = hs_inner(bk, &f);
        }
    }
    let ns = null_space(&(a - eye(m)))?;
    Ok((0..ns.ncols()).map(|j| combine(ns.column(j), b)).collect())
}

/// Fix(φ_n) inside π_n(A_{n−1}): φ_n has range π_n(A_{n−1}), and
/// φ_n(π_n(y)) = π_n(φ_{n−1}(y)), so x = π_n(y) is fixed iff
/// (φ_{n−1}(y) − y) ω^{1/2} = 0 with ω the trace density of π_n.
fn fixed_points_stage(prev: &UcpMap, st: &DilationStage) -> Result<Option<Vec<Mat>>> {
    let Some(alg) = prev.algebra().basis() else {
        return Ok(None);
    };
    let b = alg.basis();
    let s = sqrtm_psd(&hermitian_part(&st.pi.trace_density()))?;
    let d = alg.space_dim();
    let cols: Vec<Vector> = b
        .iter()
        .map(|bk| vec_cols(&(prev.apply(bk) - bk).dot(&s)))
        .collect();
    let ns = null_space(&columns(&cols, d * d))?;
    let ys: Vec<Mat> = (0..ns.ncols()).map(|j| combine(ns.column(j), b)).collect();
    if ys.is_empty() {
        return Ok(Some(vec![]));
    }
    // Drop the part of the solution space killed by π_n.
    let img: Vec<Vector> = ys.iter().map(|y| vec_cols(&y.dot(&s))).collect();
    let (_, sv, vt) = svd_full(&columns(&img, d * d))?;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let r = sv.iter().filter(|&&x| x > RANK_REL * top.max(1.0)).count();
    let w = dagger(&vt);
    Ok(Some(
        (0..r).map(|i| st.pi(&combine(w.column(i), &ys))).collect(),
    ))
}

/// Fixed spaces along the dilation: computes dim Fix(φ_n) at each stage and
/// checks that π_n and compression by V_n move fixed points back and forth.
pub fn har_stability_check(dil: &Dilation) -> Result<HarStability> {
    if dil.stages.is_empty() {
        return Err(Error::Precondition {
            op: "har_stability_check",
            report: "needs at least one dilation stage".into(),
        });
    }
    let mut rng = random::rng(SEED ^ 0xf1);
    let mut fixed: Vec<Vec<Mat>> = vec![fixed_points_base(&dil.base)?];
    let mut dims = vec![Some(fixed[0].len())];
    let mut detail = None;
    for (k, st) in dil.stages.iter().enumerate() {
        match fixed_points_stage(dil.map(k), st)? {
            Some(f) => {
                dims.push(Some(f.len()));
                fixed.push(f);
            }
            None => {
                dims.push(None);
                detail = Some(format!("stage {} skipped: A_{k} has no basis", k + 1));
                break;
            }
        }
    }

    let mut out = HarStability {
        dims: dims.clone(),
        fixed_residual: 0.0,
        into_residual: 0.0,
        compression_residual: 0.0,
        onto_residual: 0.0,
        isometry_residual: 0.0,
        stable: false,
        detail,
    };
    for (n, f) in fixed.iter().enumerate() {
        let map = dil.map(n);
        for x in f {
            out.fixed_residual = out.fixed_residual.max(rel(&map.apply(x), x, fro_norm(x)));
        }
        if n == 0 {
            continue;
        }
        let st = &dil.stages[n - 1];
        let prev = dil.map(n - 1);
        let vd = dagger(&st.v);
        for y in &fixed[n - 1] {
            let py = st.pi(y);
            out.into_residual = out.into_residual.max(rel(&map.apply(&py), &py, fro_norm(y)));
        }
        let comps: Vec<Mat> = f.iter().map(|x| mm3(&vd, x, &st.v)).collect();
        for (c, x) in comps.iter().zip(f) {
            out.compression_residual = out.compression_residual.max(rel(&prev.apply(c), c, fro_norm(x)));
        }
        if !comps.is_empty() {
            let basis = orth_matrices(&comps)?;
            for y in &fixed[n - 1] {
                out.onto_residual = out.onto_residual.max(span_residual(&basis, y) / fro_norm(y));
            }
        } else if !fixed[n - 1].is_empty() {
            out.onto_residual = 1.0;
        }
        let mut samples: Vec<Mat> = f.to_vec();
        if !f.is_empty() {
            for _ in 0..SAMPLES {
                let mut x = zeros(st.dim, st.dim);
                for e in f {
                    x = x + scale(e, random::gaussian(&mut rng));
                }
                samples.push(x);
            }
        }
        for x in &samples {
            let nx = op_norm(x)?;
            let nc = op_norm(&mm3(&vd, x, &st.v))?;
            out.isometry_residual = out.isometry_residual.max((nx - nc).abs() / nx.max(1e-300));
        }
    }
    let known: Vec<usize> = dims.iter().flatten().copied().collect();
    out.stable = known.windows(2).all(|w| w[0] == w[1]);
    if !out.stable {
        out.detail = Some(format!("fixed-space dimensions change across stages: {dims:?}"));
    }
    Ok(out)
}

/// Both sides of V* ·*-alg(VBV*, A)· V = *-alg(B, V*AV) for an isometry
/// V: C^h → C^k, B generated in M_h and A generated in M_k.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpanIdentity {
    pub lhs_dim: usize,
    pub rhs_dim: usize,
    pub residual: f64,
}

pub fn lemma_span_identity(v: &Mat, b_gens: &[Mat], a_gens: &[Mat]) -> Result<SpanIdentity> {
    let (k, h) = v.dim();
    let vd = dagger(v);
    let iso = fro_norm(&(vd.dot(v) - eye(h)));
    if iso > 1e-10 {
        return Err(invalid("v", format!("not an isometry: ‖V*V − 1‖ = {iso:.3e}")));
    }
    let mut outer: Vec<Mat> = b_gens.iter().map(|b| mm3(v, b, &vd)).collect();
    outer.extend(a_gens.iter().cloned());
    let big = span_closure(&outer, k, true);
    let lhs = orth_matrices(&big.iter().map(|x| mm3(&vd, x, v)).collect::<Vec<_>>())?;

    let a_span = span_closure(a_gens, k, true);
    let mut inner: Vec<Mat> = b_gens.to_vec();
    inner.extend(a_span.iter().map(|a| mm3(&vd, a, v)));
    let rhs = span_closure(&inner, h, true);

    let mut residual: f64 = 0.0;
    for x in &lhs {
        residual = residual.max(span_residual(&rhs, x));
    }
    for x in &rhs {
        residual = residual.max(span_residual(&lhs, x));
    }
    Ok(SpanIdentity {
        lhs_dim: lhs.len(),
        rhs_dim: rhs.len(),
        residual,
    })
}
