//! Entropy of hyperstates, and Furstenberg-type entropy of an inclusion
//! M ⊂ A with a faithful hyperstate ζ, computed from modular data.
//!
//! L²(A,ζ) is realized as block-diagonal matrices with the Hilbert-Schmidt
//! inner product through a·1_ζ ↦ a ρ^{1/2}.

use ndarray::Array1;
use serde::Serialize;

use crate::algebra::{GnsSpace, TracialAlgebra};
use crate::concrete::cluster;
use crate::error::{invalid, Error, Result};
use crate::harmonic::{require_regular_strong, spectral_projection, BoundaryAlgebra};
use crate::hyperstate::{convolution_power, convolve, Hyperstate};
use crate::linalg::*;
use crate::random;

pub const EMBEDDING_TOL: f64 = 1e-10;
pub const STATE_TOL: f64 = 1e-10;
pub const CONDITION_CAP: f64 = 1e12;
pub const ROUTE_TOL: f64 = 1e-8;
pub const FLOW_STEP: f64 = 1e-4;
pub const STATIONARY_TOL: f64 = 1e-9;

/// H(φ) = −Tr(A_φ log A_φ); the weight formula is checked against it.
pub fn vn_entropy(phi: &Hyperstate) -> Result<f64> {
    let by_density = spectral_entropy(eigvalsh(phi.density())?.iter().copied());
    let by_weights = spectral_entropy(phi.standard_form().weights.iter().copied());
    if (by_density - by_weights).abs() > 1e-10 {
        return Err(Error::RouteDisagreement {
            what: "entropy from density vs standard-form weights",
            a: by_density,
            b: by_weights,
        });
    }
    Ok(by_density)
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropySequence {
    /// values[n−1] = H(φ^{*n}).
    pub values: Vec<f64>,
    /// min_n H(φ^{*n})/n.
    pub h_estimate: f64,
    /// max over m+n ≤ N of H(φ^{*(m+n)}) − H(φ^{*m}) − H(φ^{*n}).
    pub subadditivity_excess: f64,
}

pub fn entropy_sequence(phi: &Hyperstate, n: usize) -> Result<EntropySequence> {
    require_regular(phi)?;
    let mut values = Vec::with_capacity(n);
    let mut cur = phi.clone();
    for k in 1..=n {
        if k > 1 {
            cur = convolve(&cur, phi)?;
        }
        values.push(vn_entropy(&cur)?);
    }
    let h_estimate = values
        .iter()
        .enumerate()
        .map(|(k, h)| h / (k + 1) as f64)
        .fold(f64::INFINITY, f64::min);
    let mut excess = f64::NEG_INFINITY;
    for a in 1..=n {
        for b in 1..=n - a {
            excess = excess.max(values[a + b - 1] - values[a - 1] - values[b - 1]);
        }
    }
    Ok(EntropySequence {
        values,
        h_estimate: if n == 0 { 0.0 } else { h_estimate },
        subadditivity_excess: if excess.is_finite() { excess } else { 0.0 },
    })
}

fn require_regular(phi: &Hyperstate) -> Result<()> {
    let residual = phi.standard_form().regularity_residual();
    if residual > 1e-10 {
        return Err(Error::NotRegular { residual });
    }
    Ok(())
}

/// Block shape of a multi-matrix algebra with row-major coordinates.
#[derive(Clone, Debug, PartialEq)]
struct Shape {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
}

impl Shape {
    fn new(blocks: &[usize]) -> Self {
        let mut offsets = Vec::new();
        let mut o = 0;
        for &n in blocks {
            offsets.push(o);
            o += n;
        }
        Self {
            blocks: blocks.to_vec(),
            offsets,
        }
    }

    fn rep_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    /// (block, row, col) in coordinate order.
    fn units(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (j, &n) in self.blocks.iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    out.push((j, r, c));
                }
            }
        }
        out
    }

    fn unit(&self, j: usize, r: usize, c: usize) -> Mat {
        let mut e = zeros(self.rep_dim(), self.rep_dim());
        e[(self.offsets[j] + r, self.offsets[j] + c)] = ONE;
        e
    }

    fn coords(&self, x: &Mat) -> Vector {
        let mut v = Vector::zeros(self.dim());
        for (k, (j, r, c)) in self.units().into_iter().enumerate() {
            v[k] = x[(self.offsets[j] + r, self.offsets[j] + c)];
        }
        v
    }

    fn from_coords(&self, v: &Vector) -> Mat {
        let mut x = zeros(self.rep_dim(), self.rep_dim());
        for (k, (j, r, c)) in self.units().into_iter().enumerate() {
            x[(self.offsets[j] + r, self.offsets[j] + c)] = v[k];
        }
        x
    }

    fn off_block_residual(&self, x: &Mat) -> f64 {
        fro_norm(&(x - &self.from_coords(&self.coords(x))))
    }

    fn blockwise(&self, x: &Mat) -> Vec<Mat> {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .map(|(&n, &o)| x.slice(ndarray::s![o..o + n, o..o + n]).to_owned())
            .collect()
    }

    /// Coordinate matrix of ξ ↦ a ξ b for block-diagonal a, b.
    fn sandwich(&self, a: &Mat, b: &Mat) -> Mat {
        let parts: Vec<Mat> = self
            .blockwise(a)
            .iter()
            .zip(self.blockwise(b))
            .map(|(x, y)| kron(x, &transpose(&y)))
            .collect();
        direct_sum(&parts)
    }

    /// Orthonormal basis of the Hermitian elements, as a real vector space.
    fn hermitian_basis(&self) -> Vec<Mat> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::new();
        for (j, &n) in self.blocks.iter().enumerate() {
            for a in 0..n {
                out.push(self.unit(j, a, a));
                for b in a + 1..n {
                    let e = self.unit(j, a, b);
                    let et = self.unit(j, b, a);
                    out.push((&e + &et).mapv(|z| z * s));
                    out.push((&e - &et).mapv(|z| z * c(0.0, s)));
                }
            }
        }
        out
    }
}

/// A unital *-embedding ι: M → A into a multi-matrix algebra.
#[derive(Clone, Debug)]
pub struct Inclusion {
    m: TracialAlgebra,
    shape: Shape,
    /// ι of M's matrix units, in M's GNS index order.
    units: Vec<Mat>,
    /// Tr_A(ι(p)) for a minimal projection p of each block of M.
    multiplicities: Vec<usize>,
}

impl Inclusion {
    pub fn new(m: TracialAlgebra, a_blocks: Vec<usize>, units: Vec<Mat>) -> Result<Self> {
        if a_blocks.is_empty() || a_blocks.contains(&0) {
            return Err(invalid("inclusion.ambient", "blocks must be positive"));
        }
        let shape = Shape::new(&a_blocks);
        let da = shape.rep_dim();
        let mu = m.units();
        if units.len() != mu.len() {
            return Err(invalid(
                "inclusion.embedding",
                format!("expected {} unit images, got {}", mu.len(), units.len()),
            ));
        }
        let mut worst: f64 = 0.0;
        for u in &units {
            if u.dim() != (da, da) {
                return Err(invalid("inclusion.embedding", "unit image has wrong shape"));
            }
            worst = worst.max(shape.off_block_residual(u));
        }
        let idx = |b: usize, r: usize, c: usize| {
            mu.iter().position(|&t| t == (b, r, c)).expect("matrix unit")
        };
        let mut sum = zeros(da, da);
        for (k, &(b, r, c)) in mu.iter().enumerate() {
            worst = worst.max(fro_norm(&(dagger(&units[k]) - &units[idx(b, c, r)])));
            if r == c {
                sum = sum + &units[k];
            }
            for (l, &(b2, r2, c2)) in mu.iter().enumerate() {
                let prod = units[k].dot(&units[l]);
                let expected = if b == b2 && c == r2 {
                    units[idx(b, r, c2)].clone()
                } else {
                    zeros(da, da)
                };
                worst = worst.max(fro_norm(&(prod - expected)));
            }
        }
        worst = worst.max(fro_norm(&(sum - eye(da))));
        if worst > EMBEDDING_TOL {
            return Err(invalid(
                "inclusion.embedding",
                format!("not a unital *-homomorphism (residual {worst:.3e})"),
            ));
        }
        let multiplicities = (0..m.blocks().len())
            .map(|b| trace(&units[idx(b, 0, 0)]).re.round() as usize)
            .collect();
        Ok(Self {
            m,
            shape,
            units,
            multiplicities,
        })
    }

    /// A = M with ι = id.
    pub fn identity(m: &TracialAlgebra) -> Self {
        let units = m.units().into_iter().map(|(b, r, c)| m.unit(b, r, c)).collect();
        Self::new(m.clone(), m.blocks().to_vec(), units).expect("identity embedding")
    }

    /// A = B(L²(M,τ)) with ι = L.
    pub fn gns(gns: &GnsSpace) -> Self {
        let m = gns.algebra();
        let units = m
            .units()
            .into_iter()
            .map(|(b, r, c)| gns.left(&m.unit(b, r, c)))
            .collect();
        Self::new(m.clone(), vec![gns.dim()], units).expect("GNS embedding")
    }

    /// Standard embedding: A-block j holds ⊕_i x_i ⊗ 1_{mult[j][i]}.
    pub fn with_multiplicities(m: &TracialAlgebra, a_blocks: Vec<usize>, mult: &[Vec<usize>]) -> Result<Self> {
        if mult.len() != a_blocks.len() || mult.iter().any(|row| row.len() != m.blocks().len()) {
            return Err(invalid(
                "inclusion.embedding.multiplicities",
                "matrix must be (ambient blocks) × (algebra blocks)",
            ));
        }
        for (j, row) in mult.iter().enumerate() {
            let size: usize = row.iter().zip(m.blocks()).map(|(k, n)| k * n).sum();
            if size != a_blocks[j] {
                return Err(invalid(
                    "inclusion.embedding.multiplicities",
                    format!("ambient block {j} has size {} but multiplicities fill {size}", a_blocks[j]),
                ));
            }
        }
        let shape = Shape::new(&a_blocks);
        let da = shape.rep_dim();
        let units = m
            .units()
            .into_iter()
            .map(|(i, r, c)| {
                let mut e = zeros(da, da);
                for (j, row) in mult.iter().enumerate() {
                    let mut o = shape.offsets[j];
                    for (i2, (&k, &n)) in row.iter().zip(m.blocks()).enumerate() {
                        if i2 == i {
                            for t in 0..k {
                                e[(o + r * k + t, o + c * k + t)] = ONE;
                            }
                        }
                        o += k * n;
                    }
                }
                e
            })
            .collect();
        Self::new(m.clone(), a_blocks, units)
    }

    pub fn algebra(&self) -> &TracialAlgebra {
        &self.m
    }

    pub fn ambient_blocks(&self) -> &[usize] {
        &self.shape.blocks
    }

    pub fn ambient_rep_dim(&self) -> usize {
        self.shape.rep_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn embed(&self, x: &Mat) -> Mat {
        let da = self.shape.rep_dim();
        let mut out = zeros(da, da);
        let offs = self.m.offsets();
        for ((b, r, c), u) in self.m.units().into_iter().zip(&self.units) {
            let k = x[(offs[b] + r, offs[b] + c)];
            if k != ZERO {
                out.zip_mut_with(u, |o, &y| *o += k * y);
            }
        }
        out
    }

    /// ι(Σ (w_i/c_i) p_i), which restricts to τ.
    pub fn default_rho(&self) -> Mat {
        let parts: Vec<Mat> = self
            .m
            .blocks()
            .iter()
            .zip(self.m.weights())
            .zip(&self.multiplicities)
            .map(|((&n, &w), &c)| eye(n).mapv(|z| z * (w / c as f64)))
            .collect();
        self.embed(&direct_sum(&parts))
    }

    /// Hermitian block-diagonal elements of A, real-orthonormal basis.
    pub fn hermitian_basis(&self) -> Vec<Mat> {
        self.shape.hermitian_basis()
    }

    /// ρ ↦ Σ ι(z_n)* ρ ι(z_n), the density of φ ∗ ζ.
    pub fn convolution_map(&self, phi: &Hyperstate) -> Result<Mat> {
        self.check_algebra(phi)?;
        let iz: Vec<Mat> = phi
            .standard_form()
            .family
            .iter()
            .map(|z| self.embed(z))
            .collect();
        let mut f = zeros(self.shape.dim(), self.shape.dim());
        for z in &iz {
            f = f + self.shape.sandwich(&dagger(z), z);
        }
        Ok(f)
    }

    fn check_algebra(&self, phi: &Hyperstate) -> Result<()> {
        if phi.gns().algebra() != &self.m {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }
}

/// An inclusion together with a faithful hyperstate ζ = Tr_A(ρ ·).
#[derive(Clone, Debug)]
pub struct InclusionState {
    inclusion: Inclusion,
    rho: Mat,
    sqrt_rho: Mat,
    log_rho: Mat,
    condition: f64,
}

impl InclusionState {
    pub fn new(inclusion: Inclusion, rho: Mat) -> Result<Self> {
        let shape = &inclusion.shape;
        let da = shape.rep_dim();
        if rho.dim() != (da, da) {
            return Err(invalid("inclusion.rho", format!("expected a {da}×{da} matrix")));
        }
        if shape.off_block_residual(&rho) > STATE_TOL {
            return Err(invalid("inclusion.rho", "not block-diagonal in the ambient algebra"));
        }
        if !is_hermitian(&rho, STATE_TOL) {
            return Err(invalid("inclusion.rho", "not Hermitian"));
        }
        let rho = hermitian_part(&rho);
        let w = eigvalsh(&rho)?;
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.iter().cloned().fold(0.0, f64::max);
        if lo <= 0.0 {
            return Err(invalid(
                "inclusion.rho",
                format!("not positive definite (minimal eigenvalue {lo:.3e})"),
            ));
        }
        let condition = hi / lo;
        if condition > CONDITION_CAP {
            return Err(Error::IllConditioned { condition });
        }
        let tr = trace(&rho).re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(invalid("inclusion.rho", format!("trace {tr} is not 1")));
        }
        let m = inclusion.m.clone();
        let mut worst: f64 = 0.0;
        for ((b, r, cc), u) in m.units().into_iter().zip(&inclusion.units) {
            let z = trace(&rho.dot(u));
            let t = m.tau(&m.unit(b, r, cc));
            worst = worst.max((z - t).norm());
        }
        if worst > STATE_TOL {
            return Err(invalid(
                "inclusion.rho",
                format!("ζ∘ι differs from τ by {worst:.3e}"),
            ));
        }
        Ok(Self {
            sqrt_rho: sqrtm_psd(&rho)?,
            log_rho: logm_pd(&rho)?,
            inclusion,
            rho,
            condition,
        })
    }

    pub fn with_default_rho(inclusion: Inclusion) -> Result<Self> {
        let rho = inclusion.default_rho();
        Self::new(inclusion, rho)
    }

    pub fn inclusion(&self) -> &Inclusion {
        &self.inclusion
    }

    pub fn rho(&self) -> &Mat {
        &self.rho
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn zeta(&self, a: &Mat) -> C64 {
        trace(&self.rho.dot(a))
    }

    /// Coordinates of a·1_ζ.
    pub fn vector(&self, a: &Mat) -> Vector {
        self.inclusion.shape.coords(&a.dot(&self.sqrt_rho))
    }

    pub fn vacuum(&self) -> Vector {
        self.inclusion.shape.coords(&self.sqrt_rho)
    }

    /// Isometry L²(M,τ) → L²(A,ζ), x̂ ↦ ι(x)1_ζ, in M's GNS basis.
    pub fn isometry(&self) -> Mat {
        let gns = GnsSpace::new(self.inclusion.m.clone());
        let cols: Vec<Vector> = (0..gns.dim())
            .map(|k| self.vector(&self.inclusion.embed(&gns.basis_element(k))))
            .collect();
        columns(&cols, self.inclusion.shape.dim())
    }

    /// The projection e onto ι(M)1_ζ.
    pub fn e_projection(&self) -> Mat {
        let v = self.isometry();
        v.dot(&dagger(&v))
    }

    pub fn entropy(&self) -> Result<f64> {
        Ok(spectral_entropy(eigvalsh(&self.rho)?.iter().copied()))
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ModularResiduals {
    /// ‖S*S − Δ‖ with S built from a ↦ a* on matrix units.
    pub delta_from_s: f64,
    /// ‖J² − 1‖ for J = SΔ^{-1/2}.
    pub j_involution: f64,
    /// ‖J*J − 1‖.
    pub j_isometry: f64,
    /// ‖Δ1_ζ − 1_ζ‖.
    pub vacuum: f64,
    pub min_eigenvalue: f64,
    /// ‖σ_t(ab) − σ_t(a)σ_t(b)‖ at t = 0.37 on random pairs.
    pub flow_multiplicative: f64,
    /// |ζ(σ_t(a)) − ζ(a)| on the same samples.
    pub flow_invariance: f64,
    /// ‖log Δ − ad(log ρ)‖.
    pub log_delta: f64,
}

/// Tomita-Takesaki data of ζ in the coordinates of L²(A,ζ).
#[derive(Clone, Debug)]
pub struct ModularData {
    pub delta: Mat,
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Mat,
    pub log_delta: Mat,
    /// S v = s_matrix · conj(v).
    pub s_matrix: Mat,
    /// J v = j_matrix · conj(v).
    pub j_matrix: Mat,
    pub residuals: ModularResiduals,
}

pub fn modular_data(state: &InclusionState) -> Result<ModularData> {
    let shape = &state.inclusion.shape;
    let rho = &state.rho;
    let rho_inv = inverse(rho)?;
    let delta = shape.sandwich(rho, &rho_inv);
    let log_delta = shape.sandwich(&state.log_rho, &eye(shape.rep_dim()))
        - shape.sandwich(&eye(shape.rep_dim()), &state.log_rho);
    let (eigenvalues, eigenvectors) = eigh(&delta)?;
    let min_eigenvalue = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eigenvalue <= 0.0 {
        return Err(Error::Linalg("modular operator is not positive".into()));
    }
    let log_spec = herm_fn(&delta, |x| r(x.ln()))?;

    // S(a ρ^{1/2}) = a* ρ^{1/2}, built column by column on matrix units
    let sr_inv = inv_sqrtm_pd(rho)?;
    let sr = &state.sqrt_rho;
    let n = shape.dim();
    let mut s_matrix = zeros(n, n);
    for (k, (j, rr, cc)) in shape.units().into_iter().enumerate() {
        let e = shape.unit(j, rr, cc);
        let img = mm3(&sr_inv, &dagger(&e), sr);
        s_matrix.column_mut(k).assign(&shape.coords(&img));
    }
    let delta_s = conj(&dagger(&s_matrix).dot(&s_matrix));
    let d_inv_half = herm_fn(&delta, |x| r(1.0 / x.sqrt()))?;
    let j_matrix = s_matrix.dot(&conj(&d_inv_half));
    let one = state.vacuum();

    let mut rng = random::rng(0x0d17a);
    let t = 0.37;
    let ut = unitary_flow(&state.log_rho, t)?;
    let flow = |a: &Mat| mm3(&ut, a, &dagger(&ut));
    let (mut mult, mut inv): (f64, f64) = (0.0, 0.0);
    for _ in 0..4 {
        let a = random_block(shape, &mut rng);
        let b = random_block(shape, &mut rng);
        mult = mult.max(fro_norm(&(flow(&a.dot(&b)) - flow(&a).dot(&flow(&b)))));
        inv = inv.max((state.zeta(&flow(&a)) - state.zeta(&a)).norm());
    }
    let residuals = ModularResiduals {
        delta_from_s: fro_norm(&(&delta_s - &delta)),
        j_involution: fro_norm(&(j_matrix.dot(&conj(&j_matrix)) - eye(n))),
        j_isometry: fro_norm(&(dagger(&j_matrix).dot(&j_matrix) - eye(n))),
        vacuum: vnorm(&(delta.dot(&one) - &one)),
        min_eigenvalue,
        flow_multiplicative: mult,
        flow_invariance: inv,
        log_delta: fro_norm(&(&log_spec - &log_delta)),
    };
    Ok(ModularData {
        delta,
        eigenvalues,
        eigenvectors,
        log_delta,
        s_matrix,
        j_matrix,
        residuals,
    })
}

fn random_block(shape: &Shape, rng: &mut random::Rng64) -> Mat {
    shape.from_coords(&random::gaussian_vector(rng, shape.dim()))
}

#[derive(Clone, Debug, Serialize)]
pub struct FurstenbergEntropy {
    pub value: f64,
    /// −Σ_λ log λ · φ(e E(λ) e).
    pub spectral: f64,
    /// −Σ_n ζ(ι(z_n)[log ρ, ι(z_n*)]).
    pub commutator: f64,
    /// i·d/dt Σ ζ(ι(z_n) σ_t(ι(z_n*))) at 0 by central difference.
    pub flow: f64,
    pub imaginary_part: f64,
    /// (n, value with Δ truncated to [1/n, n]).
    pub truncations: Vec<(f64, f64)>,
}

pub fn furstenberg_entropy(phi: &Hyperstate, state: &InclusionState) -> Result<FurstenbergEntropy> {
    let inc = &state.inclusion;
    inc.check_algebra(phi)?;
    let md = modular_data(state)?;
    let v = state.isometry();
    let a_phi = phi.density();

    // spectral route
    let clusters = cluster(&md.eigenvalues, 1e-10);
    let mut spectral_parts = Vec::new();
    for &(s, e) in &clusters {
        let q = md.eigenvectors.slice(ndarray::s![.., s..e]).to_owned();
        let vq = dagger(&v).dot(&q);
        let weight = trace(&a_phi.dot(&vq.dot(&dagger(&vq)))).re;
        let lam = md.eigenvalues.slice(ndarray::s![s..e]).mean().unwrap_or(1.0);
        spectral_parts.push((lam, weight));
    }
    let spectral: f64 = spectral_parts.iter().map(|(l, w)| -l.ln() * w).sum();
    let lmax = spectral_parts.iter().map(|p| p.0.max(1.0 / p.0)).fold(1.0, f64::max);
    let mut truncations = Vec::new();
    let mut nn = 1.0;
    loop {
        let val: f64 = spectral_parts
            .iter()
            .filter(|(l, _)| *l >= 1.0 / nn && *l <= nn)
            .map(|(l, w)| -l.ln() * w)
            .sum();
        truncations.push((nn, val));
        if nn >= lmax {
            break;
        }
        nn *= 2.0;
    }

    // commutator route
    let fam: Vec<Mat> = phi.standard_form().family.iter().map(|z| inc.embed(z)).collect();
    let mut comm = ZERO;
    for z in &fam {
        comm -= state.zeta(&z.dot(&commutator(&state.log_rho, &dagger(z))));
    }

    // finite-difference flow
    let f = |t: f64| -> Result<C64> {
        let u = unitary_flow(&state.log_rho, t)?;
        let mut s = ZERO;
        for z in &fam {
            s += state.zeta(&z.dot(&mm3(&u, &dagger(z), &dagger(&u))));
        }
        Ok(s)
    };
    let flow = (I * (f(FLOW_STEP)? - f(-FLOW_STEP)?) / (2.0 * FLOW_STEP)).re;

    if (spectral - comm.re).abs() > ROUTE_TOL * comm.re.abs().max(1.0) {
        return Err(Error::RouteDisagreement {
            what: "Furstenberg entropy, spectral vs commutator",
            a: spectral,
            b: comm.re,
        });
    }
    Ok(FurstenbergEntropy {
        value: comm.re,
        spectral,
        commutator: comm.re,
        flow,
        imaginary_part: comm.im,
        truncations,
    })
}

#[derive(Clone, Debug)]
pub struct StationaryState {
    pub rho: Mat,
    /// ‖F(ρ) − ρ‖ with F the density map of φ ∗ ·.
    pub residual: f64,
    /// Dimension of the affine family of stationary states.
    pub free_dimension: usize,
    pub entropy: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

/// ‖density(φ ∗ ζ) − ρ‖.
pub fn stationarity_residual(phi: &Hyperstate, state: &InclusionState) -> Result<f64> {
    let inc = &state.inclusion;
    let f = inc.convolution_map(phi)?;
    let v = inc.shape.coords(&state.rho);
    Ok(vnorm(&(f.dot(&v) - &v)))
}

/// Stationary ρ of maximal entropy among those restricting to τ.
pub fn stationary_state_solve(phi: &Hyperstate, inc: &Inclusion) -> Result<StationaryState> {
    require_regular(phi)?;
    let shape = &inc.shape;
    let f = inc.convolution_map(phi)?;
    let n = shape.dim();
    let e = spectral_projection(&f)?;
    let rho1 = hermitian_part(&shape.from_coords(&e.dot(&shape.coords(&inc.default_rho()))));

    // Hermitian directions in Fix(F) invisible to ζ∘ι
    let herm = shape.hermitian_basis();
    let constraints: Vec<Mat> = inc.units.clone();
    let rows = herm.len() + 2 * constraints.len();
    let mut sys = zeros(rows, herm.len());
    let id = eye(n);
    for (m, h) in herm.iter().enumerate() {
        let img = shape.from_coords(&(&f - &id).dot(&shape.coords(h)));
        for (k, g) in herm.iter().enumerate() {
            sys[(k, m)] = r(hs_inner(g, &img).re);
        }
        for (k, u) in constraints.iter().enumerate() {
            let z = trace(&h.dot(u));
            sys[(herm.len() + 2 * k, m)] = r(z.re);
            sys[(herm.len() + 2 * k + 1, m)] = r(z.im);
        }
    }
    let null = null_space(&sys)?;
    let dirs: Vec<Mat> = column_vecs(&null)
        .iter()
        .map(|col| {
            let mut d = zeros(shape.rep_dim(), shape.rep_dim());
            for (k, h) in herm.iter().enumerate() {
                d.zip_mut_with(h, |o, &y| *o += col[k].re * y);
            }
            d
        })
        .collect();

    let (rho, iterations) = if dirs.is_empty() {
        (rho1, 0)
    } else {
        maximize_entropy(&rho1, &dirs)?
    };
    let min_eigenvalue = min_eigenvalue(&rho)?;
    let v = shape.coords(&rho);
    let residual = vnorm(&(f.dot(&v) - &v));
    if min_eigenvalue <= 1e-12 {
        return Err(Error::NoFaithfulStationary {
            min_eigenvalue,
            rho: Box::new(rho),
        });
    }
    Ok(StationaryState {
        entropy: spectral_entropy(eigvalsh(&rho)?.iter().copied()),
        rho,
        residual,
        free_dimension: dirs.len(),
        min_eigenvalue,
        iterations,
    })
}

/// Projected gradient ascent of −Tr ρ log ρ along `dirs`, staying positive.
fn maximize_entropy(start: &Mat, dirs: &[Mat]) -> Result<(Mat, usize)> {
    let entropy = |x: &Mat| -> Result<Option<f64>> {
        let w = eigvalsh(x)?;
        if w.iter().any(|&l| l <= 0.0) {
            return Ok(None);
        }
        Ok(Some(spectral_entropy(w.iter().copied())))
    };
    let mut rho = start.clone();
    // move into the interior if the Cesàro point is singular
    if entropy(&rho)?.is_none() {
        let k = dirs.len() as f64;
        let mut best = None;
        for d in dirs {
            for sign in [1.0, -1.0] {
                let mut t = 1.0;
                for _ in 0..40 {
                    let cand = &rho + &d.mapv(|z| z * (sign * t / k));
                    if let Some(h) = entropy(&cand)? {
                        if best.as_ref().map_or(true, |(bh, _)| h > *bh) {
                            best = Some((h, cand));
                        }
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        if let Some((_, cand)) = best {
            rho = cand;
        }
    }
    let Some(mut h) = entropy(&rho)? else {
        return Ok((rho, 0));
    };
    let mut iters = 0;
    for it in 0..2000 {
        iters = it + 1;
        let lg = logm_pd(&rho)?;
        let mut grad = zeros(rho.nrows(), rho.ncols());
        for d in dirs {
            let g = -hs_inner(d, &lg).re;
            grad.zip_mut_with(d, |o, &y| *o += y * g);
        }
        let gn = fro_norm(&grad);
        if gn < 1e-12 {
            break;
        }
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-14 {
            let cand = &rho + &grad.mapv(|z| z * t);
            if let Some(hc) = entropy(&cand)? {
                if hc >= h + 1e-4 * t * gn * gn {
                    rho = cand;
                    h = hc;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((hermitian_part(&rho), iters))
}

/// Oracle: Cesàro average of ρ ↦ F(ρ) iterated from the default ρ.
pub fn cesaro_stationary(phi: &Hyperstate, inc: &Inclusion, steps: usize) -> Result<Mat> {
    let f = inc.convolution_map(phi)?;
    let mut v = inc.shape.coords(&inc.default_rho());
    let mut acc = Vector::zeros(v.len());
    for _ in 0..steps {
        v = f.dot(&v);
        acc = acc + &v;
    }
    Ok(hermitian_part(&inc.shape.from_coords(&acc.mapv(|z| z / steps as f64))))
}

#[derive(Clone, Debug, Serialize)]
pub struct AdditivityReport {
    pub h_phi: f64,
    pub h_psi: f64,
    pub h_convolution: f64,
    pub additivity_residual: f64,
    /// (n, h_{ψ^{*n}}, n·h_ψ).
    pub powers: Vec<(usize, f64, f64)>,
    pub power_residual: f64,
    pub stationarity_residual: f64,
}

pub fn entropy_additivity_check(
    phi: &Hyperstate,
    psi: &Hyperstate,
    state: &InclusionState,
    n_max: usize,
) -> Result<AdditivityReport> {
    require_regular(psi)?;
    let stationarity_residual = stationarity_residual(psi, state)?;
    if stationarity_residual > STATIONARY_TOL {
        return Err(Error::NotStationary {
            residual: stationarity_residual,
        });
    }
    let h_phi = furstenberg_entropy(phi, state)?.value;
    let h_psi = furstenberg_entropy(psi, state)?.value;
    let h_convolution = furstenberg_entropy(&convolve(phi, psi)?, state)?.value;
    let mut powers = Vec::new();
    let mut power_residual: f64 = 0.0;
    for n in 1..=n_max {
        let hn = furstenberg_entropy(&convolution_power(psi, n)?, state)?.value;
        power_residual = power_residual.max((hn - n as f64 * h_psi).abs());
        powers.push((n, hn, n as f64 * h_psi));
    }
    Ok(AdditivityReport {
        h_phi,
        h_psi,
        h_convolution,
        additivity_residual: (h_convolution - h_phi - h_psi).abs(),
        powers,
        power_residual,
        stationarity_residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub furstenberg: f64,
    pub entropy: f64,
    pub nonnegative: bool,
    pub below_entropy: bool,
    pub stationary: bool,
    /// min_n H(φ^{*n})/n, only when ζ is φ-stationary.
    pub asymptotic_bound: Option<f64>,
    pub below_asymptotic: Option<bool>,
}

pub fn entropy_bounds_check(phi: &Hyperstate, state: &InclusionState, n_max: usize) -> Result<BoundsReport> {
    let h = furstenberg_entropy(phi, state)?.value;
    let big_h = vn_entropy(phi)?;
    let regular = phi.standard_form().regularity_residual() <= 1e-10;
    let stationary = regular && stationarity_residual(phi, state)? <= STATIONARY_TOL;
    let asymptotic_bound = if stationary {
        Some(entropy_sequence(phi, n_max.max(1))?.h_estimate)
    } else {
        None
    };
    Ok(BoundsReport {
        furstenberg: h,
        entropy: big_h,
        nonnegative: h >= -1e-10,
        below_entropy: h <= big_h + 1e-10,
        stationary,
        below_asymptotic: asymptotic_bound.map(|b| h <= b + 1e-10),
        asymptotic_bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub furstenberg: f64,
    /// ⟨T1_ζ, 1_ζ⟩ through the bimodule action with the modular J.
    pub pairing: f64,
    /// Σ Tr(ρ^{1/2} a_k* ρ^{1/2} a_k).
    pub pairing_oracle: f64,
    /// −2 log⟨T1_ζ, 1_ζ⟩.
    pub bound: f64,
    pub contraction: bool,
    pub holds: bool,
}

pub fn entropy_gap_bound(phi: &Hyperstate, state: &InclusionState) -> Result<GapReport> {
    let inc = &state.inclusion;
    inc.check_algebra(phi)?;
    let sf = phi.standard_form();
    let residual = sf.regularity_residual().max(sf.partition_residual());
    if residual > 1e-10 {
        return Err(Error::NotBiNormalized { residual });
    }
    let md = modular_data(state)?;
    let shape = &inc.shape;
    let idn = eye(shape.rep_dim());
    let left = |b: &Mat| shape.sandwich(b, &idn);
    let cj = &md.j_matrix;
    // ξ·b = J b* J ξ
    let right = |b: &Mat| cj.dot(&conj(&left(&dagger(b)))).dot(&conj(cj));
    let one = state.vacuum();
    let mut t1 = Vector::zeros(one.len());
    let mut oracle = ZERO;
    for z in &sf.family {
        let a = inc.embed(z);
        t1 = t1 + left(&dagger(&a)).dot(&right(&a).dot(&one));
        oracle += trace(&mm3(&state.sqrt_rho, &dagger(&a), &state.sqrt_rho).dot(&a));
    }
    let pairing = vdot(&one, &t1);
    if (pairing - oracle).norm() > 1e-10 {
        return Err(Error::RouteDisagreement {
            what: "⟨T1,1⟩, bimodule vs trace formula",
            a: pairing.re,
            b: oracle.re,
        });
    }
    let h = furstenberg_entropy(phi, state)?.value;
    let bound = -2.0 * pairing.re.ln();
    Ok(GapReport {
        furstenberg: h,
        pairing: pairing.re,
        pairing_oracle: oracle.re,
        bound,
        contraction: pairing.re <= 1.0 + 1e-10 && pairing.re >= -1e-10,
        holds: h >= bound - 1e-8,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroEntropyReport {
    pub furstenberg: f64,
    pub harmonic_dim: usize,
    pub algebra_dim: usize,
    pub boundary_blocks: Vec<usize>,
    pub zero_entropy: bool,
    pub harmonic_equals_m: bool,
    pub agree: bool,
}

/// Realizes M ⊂ B_φ in block form and compares h = 0 with Har = M.
pub fn zero_entropy_check(phi: &Hyperstate, boundary: &BoundaryAlgebra) -> Result<ZeroEntropyReport> {
    require_regular_strong(phi, "zero_entropy_check")?;
    if !boundary.faithful {
        return Err(Error::Precondition {
            op: "zero_entropy_check",
            report: format!(
                "stationary state on the boundary is not faithful (minimal Gram eigenvalue {:.3e})",
                boundary.faithful_min_eigenvalue
            ),
        });
    }
    let state = boundary_inclusion(phi, boundary)?;
    let h = furstenberg_entropy(phi, &state)?.value;
    let gns = phi.gns();
    let harmonic_equals_m = boundary.harmonic.dim() == gns.dim() && boundary.harmonic.contains_m();
    let zero_entropy = h.abs() <= 1e-8;
    Ok(ZeroEntropyReport {
        furstenberg: h,
        harmonic_dim: boundary.harmonic.dim(),
        algebra_dim: gns.dim(),
        boundary_blocks: boundary.wedderburn.blocks.clone(),
        zero_entropy,
        harmonic_equals_m,
        agree: zero_entropy == harmonic_equals_m,
    })
}

/// M ⊂ B_φ ≅ ⊕ M_{m_j} with ζ(b) = ⟨b1̂, 1̂⟩.
pub fn boundary_inclusion(phi: &Hyperstate, boundary: &BoundaryAlgebra) -> Result<InclusionState> {
    let gns = phi.gns();
    let m = gns.algebra();
    let wb = &boundary.wedderburn;
    let phi_of = |x: &Mat| direct_sum(&wb.to_blocks(&boundary.represent(x)));
    let units: Vec<Mat> = m
        .units()
        .into_iter()
        .map(|(b, rr, cc)| phi_of(&gns.left(&m.unit(b, rr, cc))))
        .collect();
    let inc = Inclusion::new(m.clone(), wb.blocks.clone(), units)?;
    // Tr(ρ Φ(f_i)) = ζ(f_i)
    let shape = &inc.shape;
    let d = boundary.dim();
    let mut sys = zeros(d, shape.dim());
    for (i, f) in boundary.basis.iter().enumerate() {
        let img = phi_of(f);
        for (k, (j, rr, cc)) in shape.units().into_iter().enumerate() {
            sys[(i, k)] = img[(shape.offsets[j] + cc, shape.offsets[j] + rr)];
        }
    }
    let rhs = Vector::from_vec(boundary.stationary.clone());
    let sol = inverse(&sys)?.dot(&rhs);
    let rho = hermitian_part(&shape.from_coords(&sol));
    InclusionState::new(inc, rho)
}
