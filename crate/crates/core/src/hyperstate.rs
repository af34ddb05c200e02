//! Hyperstates on B(L²(M,τ)), standard forms, Poisson transforms and convolution.

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::algebra::{generated_subalgebra, outer, GnsSpace};
use crate::error::{Error, Result};
use crate::linalg::*;

/// Residual tolerance for normalization and regularity.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Eigenvalues of A_φ below this fraction of the largest are dropped.
pub const DENSITY_RANK_REL: f64 = 1e-12;

/// The canonical Kraus family of a hyperstate.
#[derive(Clone, Debug)]
pub struct StandardForm {
    pub family: Vec<Mat>,
    /// ‖z_n‖₂², which are the eigenvalues of A_φ.
    pub weights: Vec<f64>,
}

impl StandardForm {
    pub fn len(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_empty()
    }

    /// ‖Σ z_n* z_n − 1‖₂ (Frobenius).
    pub fn partition_residual(&self) -> f64 {
        let d = self.family[0].nrows();
        let mut s = -eye(d);
        for z in &self.family {
            s = s + dagger(z).dot(z);
        }
        fro_norm(&s)
    }

    /// ‖Σ z_n z_n* − 1‖₂ (Frobenius).
    pub fn regularity_residual(&self) -> f64 {
        let d = self.family[0].nrows();
        let mut s = -eye(d);
        for z in &self.family {
            s = s + z.dot(&dagger(z));
        }
        fro_norm(&s)
    }
}

/// Density of the vector functional T ↦ ⟨T (x*)^, (x*)^⟩.
pub fn contribution(gns: &GnsSpace, x: &Mat) -> Mat {
    let v = gns.hat(&dagger(x));
    outer(&v, &v)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HyperstateResiduals {
    pub hermitian: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    /// max over basis x of |Tr(A L(x)) − τ(x)|.
    pub extension: f64,
}

impl HyperstateResiduals {
    pub fn worst(&self) -> f64 {
        self.hermitian
            .max((-self.min_eigenvalue).max(0.0))
            .max(self.trace)
            .max(self.extension)
    }
}

/// A state on B(L²(M,τ)) that restricts to τ on L(M).
#[derive(Debug)]
pub struct Hyperstate {
    gns: Arc<GnsSpace>,
    density: Mat,
    standard: OnceLock<StandardForm>,
}

impl Clone for Hyperstate {
    fn clone(&self) -> Self {
        let standard = OnceLock::new();
        if let Some(sf) = self.standard.get() {
            let _ = standard.set(sf.clone());
        }
        Self {
            gns: self.gns.clone(),
            density: self.density.clone(),
            standard,
        }
    }
}

impl Hyperstate {
    /// Validating constructor; tolerance 1e-9 on every hyperstate condition.
    pub fn from_density(gns: Arc<GnsSpace>, density: Mat) -> Result<Self> {
        let h = Self::from_density_unchecked(gns, density)?;
        let res = h.residuals()?;
        let (reason, r) = if res.hermitian > 1e-9 {
            ("density is not Hermitian", res.hermitian)
        } else if res.min_eigenvalue < -1e-9 {
            ("density is not positive", -res.min_eigenvalue)
        } else if res.trace > 1e-9 {
            ("density trace differs from 1", res.trace)
        } else if res.extension > 1e-9 {
            ("restriction to M differs from τ", res.extension)
        } else {
            return Ok(h);
        };
        Err(Error::InvalidHyperstate {
            reason: reason.into(),
            residual: r,
        })
    }

    pub fn from_density_unchecked(gns: Arc<GnsSpace>, density: Mat) -> Result<Self> {
        let dd = gns.dim();
        if density.dim() != (dd, dd) {
            return Err(crate::error::invalid(
                "density",
                format!("expected {dd}×{dd}, got {}×{}", density.nrows(), density.ncols()),
            ));
        }
        Ok(Self {
            gns,
            density,
            standard: OnceLock::new(),
        })
    }

    /// φ(T) = Σ w ⟨T (x*)^, (x*)^⟩ for a family with Σ w x*x = 1.
    pub fn from_kraus(gns: Arc<GnsSpace>, family: &[(Mat, f64)]) -> Result<Self> {
        let alg = gns.algebra();
        if family.is_empty() {
            return Err(crate::error::invalid("kraus", "family is empty"));
        }
        let d = alg.rep_dim();
        let mut norm = -eye(d);
        let mut dens = zeros(gns.dim(), gns.dim());
        for (i, (x, w)) in family.iter().enumerate() {
            alg.check_element(x, &format!("kraus[{i}].matrix"))?;
            if !(*w > 0.0) || !w.is_finite() {
                return Err(crate::error::invalid(
                    format!("kraus[{i}].weight"),
                    format!("weight must be positive, got {w}"),
                ));
            }
            norm = norm + dagger(x).dot(x).mapv(|z| z * *w);
            dens = dens + contribution(&gns, x).mapv(|z| z * *w);
        }
        let residual = fro_norm(&norm);
        if residual > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { residual });
        }
        Self::from_density_unchecked(gns, dens)
    }

    /// Family with unit weights.
    pub fn from_family(gns: Arc<GnsSpace>, zs: &[Mat]) -> Result<Self> {
        let fam: Vec<(Mat, f64)> = zs.iter().map(|z| (z.clone(), 1.0)).collect();
        Self::from_kraus(gns, &fam)
    }

    /// φ_e(T) = ⟨T 1̂, 1̂⟩.
    pub fn identity(gns: Arc<GnsSpace>) -> Self {
        let p = gns.vacuum_projection();
        Self::from_density_unchecked(gns, p).expect("square density")
    }

    pub fn gns(&self) -> &Arc<GnsSpace> {
        &self.gns
    }

    pub fn density(&self) -> &Mat {
        &self.density
    }

    pub fn same_space(&self, other: &Hyperstate) -> bool {
        Arc::ptr_eq(&self.gns, &other.gns) || *self.gns == *other.gns
    }

    pub fn evaluate(&self, t: &Mat) -> C64 {
        // Tr(A T)
        let mut s = ZERO;
        for i in 0..t.nrows() {
            for k in 0..t.ncols() {
                s += self.density[(i, k)] * t[(k, i)];
            }
        }
        s
    }

    pub fn residuals(&self) -> Result<HyperstateResiduals> {
        let alg = self.gns.algebra();
        let hermitian = max_abs(&(&self.density - &dagger(&self.density)));
        let min_eigenvalue = min_eigenvalue(&self.density)?;
        let trace = (trace(&self.density) - ONE).norm();
        let mut extension: f64 = 0.0;
        for k in 0..self.gns.dim() {
            let b = self.gns.basis_element(k);
            let v = self.evaluate(&self.gns.left(&b));
            extension = extension.max((v - alg.tau(&b)).norm());
        }
        Ok(HyperstateResiduals {
            hermitian,
            min_eigenvalue,
            trace,
            extension,
        })
    }

    /// Convex combination t·self + (1−t)·other.
    pub fn mix(&self, other: &Hyperstate, t: f64) -> Result<Hyperstate> {
        if !self.same_space(other) {
            return Err(Error::SpaceMismatch);
        }
        let a = self.density.mapv(|z| z * t) + other.density.mapv(|z| z * (1.0 - t));
        Hyperstate::from_density_unchecked(self.gns.clone(), a)
    }

    pub fn standard_form(&self) -> &StandardForm {
        self.standard.get_or_init(|| standard_form_of(&self.gns, &self.density))
    }
}

fn standard_form_of(gns: &GnsSpace, density: &Mat) -> StandardForm {
    let (w, u) = eigh(density).expect("Hermitian eigensolver");
    let lmax = w.iter().cloned().fold(0.0, f64::max);
    let mut family = Vec::new();
    let mut weights = Vec::new();
    for k in (0..w.len()).rev() {
        if w[k] <= DENSITY_RANK_REL * lmax || w[k] <= 0.0 {
            continue;
        }
        let y = gns.unhat(&u.column(k).to_owned());
        family.push(dagger(&y).mapv(|z| z * w[k].sqrt()));
        weights.push(w[k]);
    }
    StandardForm { family, weights }
}

/// ‖A_φ − Σ contribution(z_n)‖ for the computed standard form.
pub fn reconstruction_residual(phi: &Hyperstate) -> f64 {
    let gns = phi.gns();
    let mut a = phi.density().clone();
    for z in &phi.standard_form().family {
        a = a - contribution(gns, z);
    }
    fro_norm(&a)
}

/// Largest |τ(z_m z_n*)| for m ≠ n.
pub fn orthogonality_residual(phi: &Hyperstate) -> f64 {
    let alg = phi.gns().algebra();
    let f = &phi.standard_form().family;
    let mut worst: f64 = 0.0;
    for (m, zm) in f.iter().enumerate() {
        for (n, zn) in f.iter().enumerate() {
            if m != n {
                worst = worst.max(alg.tau(&zm.dot(&dagger(zn))).norm());
            }
        }
    }
    worst
}

/// Verified properties of a superoperator.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Certificates {
    pub unital_residual: Option<f64>,
    pub choi_min_eigenvalue: Option<f64>,
    pub bimodular_residual: Option<f64>,
}

/// Linear map on B(L²(M,τ)) as a D²×D² matrix on column-stacked operators.
#[derive(Clone, Debug)]
pub struct Superoperator {
    gns: Arc<GnsSpace>,
    matrix: Mat,
    pub certificates: Certificates,
}

impl Superoperator {
    pub fn from_matrix(gns: Arc<GnsSpace>, matrix: Mat) -> Self {
        Self {
            gns,
            matrix,
            certificates: Certificates::default(),
        }
    }

    /// T ↦ Σ A_k T B_k.
    pub fn from_pairs(gns: Arc<GnsSpace>, pairs: &[(Mat, Mat)]) -> Self {
        let m = superop_from_pairs(pairs);
        Self::from_matrix(gns, m)
    }

    pub fn identity(gns: Arc<GnsSpace>) -> Self {
        let d = gns.dim();
        Self::from_matrix(gns, eye(d * d))
    }

    pub fn gns(&self) -> &Arc<GnsSpace> {
        &self.gns
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.gns.dim()
    }

    pub fn apply(&self, t: &Mat) -> Mat {
        unvec(&self.matrix.dot(&vec_cols(t)), self.dim())
    }

    /// self ∘ other.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Self::from_matrix(self.gns.clone(), self.matrix.dot(&other.matrix))
    }

    /// Hilbert-Schmidt adjoint.
    pub fn dual(&self) -> Superoperator {
        Self::from_matrix(self.gns.clone(), dagger(&self.matrix))
    }

    pub fn apply_dual(&self, t: &Mat) -> Mat {
        let v = vec_cols(t);
        let mut out = Vector::zeros(v.len());
        for (j, col) in self.matrix.columns().into_iter().enumerate() {
            out[j] = col.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        }
        unvec(&out, self.dim())
    }

    /// Σ E_ij ⊗ P(E_ij).
    pub fn choi(&self) -> Mat {
        let d = self.dim();
        let mut ch = zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let col = self.matrix.column(i + j * d);
                for k in 0..d {
                    for l in 0..d {
                        ch[(i * d + k, j * d + l)] = col[k + l * d];
                    }
                }
            }
        }
        ch
    }

    pub fn unital_residual(&self) -> f64 {
        let i = eye(self.dim());
        fro_norm(&(self.apply(&i) - i))
    }

    pub fn trace_preservation_residual(&self) -> f64 {
        let i = eye(self.dim());
        fro_norm(&(self.apply_dual(&i) - i))
    }

    pub fn choi_min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.choi())
    }

    /// max over basis a of ‖[S, L(a) ⊗ side]‖ for left and right multiplication.
    pub fn bimodular_residual(&self) -> f64 {
        let d = self.dim();
        let id = eye(d);
        let mut worst: f64 = 0.0;
        for k in 0..d {
            let l = self.gns.left(&self.gns.basis_element(k));
            // T ↦ L(a) T and T ↦ T L(a)
            let lm = kron(&id, &l);
            let rm = kron(&transpose(&l), &id);
            worst = worst.max(fro_norm(&commutator(&self.matrix, &lm)));
            worst = worst.max(fro_norm(&commutator(&self.matrix, &rm)));
        }
        worst
    }

    pub fn certify(mut self) -> Result<Self> {
        self.certificates = Certificates {
            unital_residual: Some(self.unital_residual()),
            choi_min_eigenvalue: Some(self.choi_min_eigenvalue()?),
            bimodular_residual: Some(self.bimodular_residual()),
        };
        Ok(self)
    }

    pub fn distance(&self, other: &Superoperator) -> f64 {
        fro_norm(&(&self.matrix - &other.matrix))
    }
}

/// P_φ(T) = Σ (J z_n* J) T (J z_n J) = Σ R(z_n) T R(z_n*).
pub fn poisson_superop(phi: &Hyperstate) -> Superoperator {
    let gns = phi.gns();
    let pairs: Vec<(Mat, Mat)> = phi
        .standard_form()
        .family
        .iter()
        .map(|z| (gns.right(z), gns.right(&dagger(z))))
        .collect();
    Superoperator::from_pairs(gns.clone(), &pairs)
}

/// P_φ°(T) = Σ L(z_n) T L(z_n*); requires regularity.
pub fn opposite_superop(phi: &Hyperstate) -> Result<Superoperator> {
    let sf = phi.standard_form();
    let residual = sf.regularity_residual();
    if residual > NORMALIZATION_TOL {
        return Err(Error::NotRegular { residual });
    }
    let gns = phi.gns();
    let pairs: Vec<(Mat, Mat)> = sf
        .family
        .iter()
        .map(|z| (gns.left(z), gns.left(&dagger(z))))
        .collect();
    Ok(Superoperator::from_pairs(gns.clone(), &pairs))
}

/// φ ∗ ψ, whose Poisson transform is P_φ ∘ P_ψ.
pub fn convolve(phi: &Hyperstate, psi: &Hyperstate) -> Result<Hyperstate> {
    if !phi.same_space(psi) {
        return Err(Error::SpaceMismatch);
    }
    let gns = phi.gns().clone();
    let p1 = gns.vacuum_projection();
    // (P_φ P_ψ)†(P_1̂) = P_ψ†(P_φ†(P_1̂))
    let a = poisson_superop(psi).apply_dual(&poisson_superop(phi).apply_dual(&p1));
    Hyperstate::from_density_unchecked(gns, hermitian_part(&a))
}

/// n-fold convolution power (n ≥ 1), by repeated application of P_φ†.
pub fn convolution_power(phi: &Hyperstate, n: usize) -> Result<Hyperstate> {
    let gns = phi.gns().clone();
    let p = poisson_superop(phi);
    let mut a = gns.vacuum_projection();
    for _ in 0..n {
        a = p.apply_dual(&a);
    }
    Hyperstate::from_density_unchecked(gns, hermitian_part(&a))
}

/// φ*(T) = φ(J T* J), with standard family {z_n*}.
pub fn conjugate(phi: &Hyperstate) -> Result<Hyperstate> {
    let sf = phi.standard_form();
    let residual = sf.regularity_residual();
    if residual > NORMALIZATION_TOL {
        return Err(Error::NotRegular { residual });
    }
    let gns = phi.gns();
    let mut a = zeros(gns.dim(), gns.dim());
    for z in &sf.family {
        a = a + contribution(gns, &dagger(z));
    }
    Hyperstate::from_density_unchecked(gns.clone(), a)
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub regular: bool,
    pub generating: bool,
    pub strongly_generating: bool,
    pub symmetric: bool,
    pub regularity_residual: f64,
    pub generated_dim: usize,
    pub strongly_generated_dim: usize,
    pub algebra_dim: usize,
    pub symmetry_residual: Option<f64>,
}

pub fn classify(phi: &Hyperstate) -> Result<Classification> {
    let gns = phi.gns();
    let sf = phi.standard_form();
    let regularity_residual = sf.regularity_residual();
    let regular = regularity_residual <= NORMALIZATION_TOL;
    let generated_dim = generated_subalgebra(gns, &sf.family, true)?.dim();
    let strongly_generated_dim = generated_subalgebra(gns, &sf.family, false)?.dim();
    let algebra_dim = gns.dim();
    let symmetry_residual = if regular {
        Some(max_abs(&(conjugate(phi)?.density() - phi.density())))
    } else {
        None
    };
    Ok(Classification {
        regular,
        generating: generated_dim == algebra_dim,
        strongly_generating: strongly_generated_dim == algebra_dim,
        symmetric: symmetry_residual.is_some_and(|r| r <= NORMALIZATION_TOL),
        regularity_residual,
        generated_dim,
        strongly_generated_dim,
        algebra_dim,
        symmetry_residual,
    })
}

/// max over basis y of |⟨P_φ(R(y)) 1̂, 1̂⟩ − τ(y)|: trace preservation on M′.
pub fn commutant_trace_residual(phi: &Hyperstate) -> f64 {
    let gns = phi.gns();
    let p = poisson_superop(phi);
    let one = gns.one_hat();
    let mut worst: f64 = 0.0;
    for k in 0..gns.dim() {
        let y = gns.basis_element(k);
        let img = p.apply(&gns.right(&y));
        let v = vdot(&one, &img.dot(&one));
        worst = worst.max((v - gns.algebra().tau(&y)).norm());
    }
    worst
}
