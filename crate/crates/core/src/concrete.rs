//! Concrete unital *-subalgebras of M_d and their block decomposition.

use crate::error::{Error, Result};
use crate::linalg::*;
use crate::random;

const SEED: u64 = 0x5eed_a1b2;

/// Unital span closure of words in `gens` (and their adjoints when `star`).
/// Returns a Hilbert-Schmidt orthonormal basis. Stops after `d²` additions.
pub fn span_closure(gens: &[Mat], d: usize, star: bool) -> Vec<Mat> {
    let mut letters: Vec<Mat> = gens.to_vec();
    if star {
        letters.extend(gens.iter().map(dagger));
    }
    let mut basis: Vec<Mat> = Vec::new();
    let mut frontier: Vec<Mat> = Vec::new();
    let push = |cand: Mat, basis: &mut Vec<Mat>| -> Option<Mat> {
        let n0 = fro_norm(&cand);
        if n0 == 0.0 || basis.len() >= d * d {
            return None;
        }
        let mut v = cand;
        for _ in 0..2 {
            for b in basis.iter() {
                let k = hs_inner(b, &v);
                v.zip_mut_with(b, |x, &y| *x -= k * y);
            }
        }
        let n1 = fro_norm(&v);
        if n1 <= RANK_REL * n0 {
            return None;
        }
        let v = v.mapv(|z| z / n1);
        basis.push(v.clone());
        Some(v)
    };
    if let Some(v) = push(eye(d), &mut basis) {
        frontier.push(v);
    }
    for g in &letters {
        if let Some(v) = push(g.clone(), &mut basis) {
            frontier.push(v);
        }
    }
    while !frontier.is_empty() && basis.len() < d * d {
        let mut next = Vec::new();
        for f in &frontier {
            for g in &letters {
                if let Some(v) = push(f.dot(g), &mut basis) {
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    basis
}

/// Commutant of a set of d×d matrices and their adjoints, as an orthonormal
/// list.
///
/// Any Hermitian h in the generated algebra has a commutant containing the
/// answer, and {h}′ is block diagonal over the eigenspaces of h. The solve
/// runs in those block coordinates, so a generic h keeps it small. Merging
/// nearby eigenvalues only enlarges the search space.
pub fn commutant(gens: &[Mat], d: usize) -> Result<Vec<Mat>> {
    let gs: Vec<Mat> = gens
        .iter()
        .filter(|g| fro_norm(g) > 0.0)
        .map(|g| g.mapv(|z| z / fro_norm(g)))
        .collect();
    let mut rng = random::rng(SEED ^ 0xc0);
    let mut h = zeros(d, d);
    for g in &gs {
        let t = random::uniform(&mut rng, -1.0, 1.0);
        let u = random::uniform(&mut rng, -1.0, 1.0);
        h = h + hermitian_part(g).mapv(|z| z * t) + hermitian_part(&scale(g, I)).mapv(|z| z * u);
    }
    let (w, u) = eigh(&h)?;
    let mut pairs = Vec::new();
    for (a, b) in cluster(&w, COMMUTANT_CLUSTER) {
        for i in a..b {
            for j in a..b {
                pairs.push((i, j));
            }
        }
    }
    // Gram of Y ↦ ([Y, g])_g over the units u_i u_j*, in the eigenbasis of h:
    // ⟨[e_ij, g], [e_kl, g]⟩ = δ_ik (gg*)_lj + δ_jl (g*g)_ik − g_ik ḡ_jl − ḡ_ki g_lj.
    let m = pairs.len();
    let mut gram = zeros(m, m);
    let ud = dagger(&u);
    for g in &gs {
        let gt = mm3(&ud, g, &u);
        let ggh = gt.dot(&dagger(&gt));
        let ghg = dagger(&gt).dot(&gt);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for (q, &(k, l)) in pairs.iter().enumerate() {
                let mut v = -gt[(i, k)] * gt[(j, l)].conj() - gt[(k, i)].conj() * gt[(l, j)];
                if i == k {
                    v += ggh[(l, j)];
                }
                if j == l {
                    v += ghg[(i, k)];
                }
                gram[(p, q)] += v;
            }
        }
    }
    let (ev, vecs) = eigh(&gram)?;
    let top = ev.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut out = Vec::new();
    for (col, &e) in ev.iter().enumerate() {
        if e > COMMUTANT_REL * top {
            continue;
        }
        let mut y = zeros(d, d);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            y[(i, j)] = vecs[(p, col)];
        }
        out.push(mm3(&u, &y, &ud));
    }
    Ok(out)
}

const COMMUTANT_REL: f64 = 1e-10;
const COMMUTANT_CLUSTER: f64 = 1e-6;

/// A unital *-subalgebra of M_d given by an orthonormal basis.
#[derive(Clone, Debug)]
pub struct ConcreteAlgebra {
    d: usize,
    basis: Vec<Mat>,
    gens: Vec<Mat>,
}

impl ConcreteAlgebra {
    pub fn generated_by(gens: &[Mat], d: usize) -> Self {
        let basis = span_closure(gens, d, true);
        let mut g: Vec<Mat> = gens.to_vec();
        g.extend(gens.iter().map(dagger));
        Self { d, basis, gens: g }
    }

    /// Takes a spanning set that is already closed under products and adjoints.
    pub fn from_spanning(span: &[Mat], d: usize) -> Result<Self> {
        let basis = orth_matrices(span)?;
        let a = Self {
            d,
            gens: basis.clone(),
            basis,
        };
        let closure = a.closure_residual();
        if closure > 1e-8 {
            return Err(invalid_span(closure));
        }
        Ok(a)
    }

    /// Trusts the caller that `basis` spans a unital *-algebra.
    pub fn from_parts(basis: Vec<Mat>, d: usize) -> Self {
        Self {
            d,
            gens: basis.clone(),
            basis,
        }
    }

    pub fn full(d: usize) -> Self {
        let mut basis = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                basis.push(basis_unit(d, i, j));
            }
        }
        Self {
            d,
            gens: basis.clone(),
            basis,
        }
    }

    /// The unital *-algebra generated by `gens`, computed as a bicommutant:
    /// the commutant C is split into blocks M_n ⊗ 1_m, and the algebra is the
    /// sum of the 1_n ⊗ M_m. Cheaper than word closure once the algebra is large.
    pub fn bicommutant(gens: &[Mat], d: usize) -> Result<Self> {
        let inner = Self::from_parts(commutant(gens, d)?, d);
        let wb = inner.wedderburn()?;
        let mut basis = Vec::new();
        for ((&n, &m), w) in wb.blocks.iter().zip(&wb.multiplicities).zip(&wb.isometries) {
            let s = 1.0 / (n as f64).sqrt();
            for i in 0..m {
                for j in 0..m {
                    let e = kron(&eye(n), &basis_unit(m, i, j));
                    basis.push(mm3(w, &e, &dagger(w)).mapv(|z| z * s));
                }
            }
        }
        let mut g: Vec<Mat> = gens.to_vec();
        g.extend(gens.iter().map(dagger));
        Ok(Self { d, basis, gens: g })
    }

    pub fn space_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    pub fn generators(&self) -> &[Mat] {
        &self.gens
    }

    pub fn membership_residual(&self, x: &Mat) -> f64 {
        span_residual(&self.basis, x)
    }

    pub fn project(&self, x: &Mat) -> Mat {
        project_onto(&self.basis, x)
    }

    /// Largest residual of products and adjoints of basis elements leaving the span.
    pub fn closure_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.basis {
            worst = worst.max(self.membership_residual(&dagger(a)));
            for b in &self.basis {
                worst = worst.max(self.membership_residual(&a.dot(b)));
            }
        }
        worst
    }

    /// Center A ∩ A′ as an orthonormal list.
    pub fn center(&self) -> Result<Vec<Mat>> {
        let n = self.basis.len();
        let d2 = self.d * self.d;
        let mut sys = zeros(d2 * self.gens.len(), n);
        for (i, a) in self.basis.iter().enumerate() {
            for (j, g) in self.gens.iter().enumerate() {
                let v = vec_cols(&commutator(a, g));
                sys.slice_mut(ndarray::s![j * d2..(j + 1) * d2, i]).assign(&v);
            }
        }
        let ns = null_space(&sys)?;
        let elems: Vec<Mat> = column_vecs(&ns)
            .iter()
            .map(|coef| {
                let mut x = zeros(self.d, self.d);
                for (k, b) in self.basis.iter().enumerate() {
                    x.zip_mut_with(b, |o, &y| *o += coef[k] * y);
                }
                x
            })
            .collect();
        orth_matrices(&elems)
    }

    /// Block decomposition A ≅ ⊕ M_{n_j} with multiplicities m_j.
    pub fn wedderburn(&self) -> Result<Wedderburn> {
        self.wedderburn_with_center(&self.center()?)
    }

    /// As [`Self::wedderburn`], with the center supplied by the caller.
    pub fn wedderburn_with_center(&self, center: &[Mat]) -> Result<Wedderburn> {
        let mut herm_center = Vec::new();
        for z in center {
            herm_center.push(hermitian_part(z));
            herm_center.push(hermitian_part(&scale(z, c(0.0, -1.0))));
        }
        let mut rng = random::rng(SEED);
        for _attempt in 0..8 {
            let mut cgen = zeros(self.d, self.d);
            for h in &herm_center {
                let t = random::uniform(&mut rng, -1.0, 1.0);
                cgen = cgen + h.mapv(|z| z * t);
            }
            let (w, u) = eigh(&cgen)?;
            let clusters = cluster(&w, 1e-7);
            let mut parts = Vec::new();
            let mut ok = true;
            for cl in &clusters {
                let uj = u.slice(ndarray::s![.., cl.0..cl.1]).to_owned();
                match self.block_part(&uj, &mut rng) {
                    Some(p) => parts.push((p, w[cl.0])),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && parts.iter().map(|p| p.0 .0 * p.0 .0).sum::<usize>() == self.dim() {
                parts.sort_by(|a, b| {
                    (a.0 .0, a.0 .1)
                        .cmp(&(b.0 .0, b.0 .1))
                        .then(a.1.partial_cmp(&b.1).unwrap())
                });
                return Ok(Wedderburn {
                    blocks: parts.iter().map(|p| p.0 .0).collect(),
                    multiplicities: parts.iter().map(|p| p.0 .1).collect(),
                    isometries: parts.into_iter().map(|p| p.0 .2).collect(),
                });
            }
        }
        Err(Error::Linalg(
            "block decomposition did not separate the center".into(),
        ))
    }

    /// Isometry for one central summand spanned by the columns of `uj`.
    fn block_part(&self, uj: &Mat, rng: &mut random::Rng64) -> Option<(usize, usize, Mat)> {
        let r = uj.ncols();
        let ujh = dagger(uj);
        let comp: Vec<Mat> = self.basis.iter().map(|a| ujh.dot(a).dot(uj)).collect();
        let comp = orth_matrices(&comp).ok()?;
        let dim = comp.len();
        let n = (dim as f64).sqrt().round() as usize;
        if n * n != dim || n == 0 || r % n != 0 {
            return None;
        }
        let m = r / n;
        let mut h = zeros(r, r);
        let mut g = zeros(r, r);
        for a in &comp {
            let t = random::uniform(rng, -1.0, 1.0);
            h = h + hermitian_part(a).mapv(|z| z * t);
            let s = random::gaussian(rng);
            g = g + a.mapv(|z| z * s);
        }
        let (w, f) = eigh(&h).ok()?;
        let cl = cluster(&w, 1e-7);
        if cl.len() != n || cl.iter().any(|(a, b)| b - a != m) {
            return None;
        }
        let fk: Vec<Mat> = cl
            .iter()
            .map(|(a, b)| f.slice(ndarray::s![.., *a..*b]).to_owned())
            .collect();
        let f1h = dagger(&fk[0]);
        let mut cols = vec![fk[0].clone()];
        for k in 1..n {
            let gk = f1h.dot(&g).dot(&fk[k]);
            let mag = (fro_norm(&gk).powi(2) / m as f64).sqrt();
            if mag < 1e-8 {
                return None;
            }
            let uk = gk.mapv(|z| z / mag);
            cols.push(fk[k].dot(&dagger(&uk)));
        }
        let w = uj.dot(&hstack(&cols));
        Some((n, m, w))
    }
}

fn invalid_span(residual: f64) -> Error {
    crate::error::invalid(
        "algebra",
        format!("span is not closed under product and adjoint (residual {residual:.3e})"),
    )
}

/// Groups ascending eigenvalues into clusters `[start, end)`.
pub fn cluster(w: &ndarray::Array1<f64>, rel: f64) -> Vec<(usize, usize)> {
    let scale = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=w.len() {
        if i == w.len() || w[i] - w[i - 1] > rel * scale {
            out.push((start, i));
            start = i;
        }
    }
    out
}

/// Explicit *-isomorphism from a concrete algebra to block form.
#[derive(Clone, Debug)]
pub struct Wedderburn {
    pub blocks: Vec<usize>,
    pub multiplicities: Vec<usize>,
    /// Per block, a `d × n_j m_j` isometry with `W* a W = Φ_j(a) ⊗ 1_{m_j}`.
    pub isometries: Vec<Mat>,
}

impl Wedderburn {
    pub fn to_blocks(&self, a: &Mat) -> Vec<Mat> {
        self.isometries
            .iter()
            .zip(self.blocks.iter().zip(&self.multiplicities))
            .map(|(w, (&n, &m))| {
                let big = dagger(w).dot(a).dot(w);
                let mut x = zeros(n, n);
                for k in 0..n {
                    for l in 0..n {
                        let mut s = ZERO;
                        for rr in 0..m {
                            s += big[(k * m + rr, l * m + rr)];
                        }
                        x[(k, l)] = s / m as f64;
                    }
                }
                x
            })
            .collect()
    }

    pub fn to_block_diag(&self, a: &Mat) -> Mat {
        direct_sum(&self.to_blocks(a))
    }

    pub fn from_blocks(&self, xs: &[Mat]) -> Mat {
        let d = self.isometries[0].nrows();
        let mut out = zeros(d, d);
        for ((w, x), &m) in self.isometries.iter().zip(xs).zip(&self.multiplicities) {
            let big = kron(x, &eye(m));
            out = out + w.dot(&big).dot(&dagger(w));
        }
        out
    }

    /// ‖W* a W − Φ(a) ⊗ 1‖ summed over blocks.
    pub fn residual(&self, a: &Mat) -> f64 {
        let xs = self.to_blocks(a);
        self.isometries
            .iter()
            .zip(xs.iter().zip(&self.multiplicities))
            .map(|(w, (x, &m))| fro_norm(&(dagger(w).dot(a).dot(w) - kron(x, &eye(m)))))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_of_single_projection_is_diagonal() {
        let p = basis_unit(2, 0, 0);
        let b = span_closure(&[p], 2, true);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn wedderburn_of_amplified_matrix_algebra() {
        // M_2 ⊗ 1_3 ⊕ C acting on C^7
        let mut gens = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                gens.push(direct_sum(&[kron(&basis_unit(2, i, j), &eye(3)), zeros(1, 1)]));
            }
        }
        gens.push(direct_sum(&[zeros(6, 6), eye(1)]));
        let a = ConcreteAlgebra::generated_by(&gens, 7);
        assert_eq!(a.dim(), 5);
        let w = a.wedderburn().unwrap();
        assert_eq!(w.blocks, vec![1, 2]);
        assert_eq!(w.multiplicities, vec![1, 3]);
        for b in a.basis() {
            assert!(w.residual(b) < 1e-10);
            assert!(fro_norm(&(w.from_blocks(&w.to_blocks(b)) - b)) < 1e-10);
        }
        let x = &a.basis()[1];
        let y = &a.basis()[3];
        let lhs = w.to_block_diag(&x.dot(y));
        let rhs = w.to_block_diag(x).dot(&w.to_block_diag(y));
        assert!(fro_norm(&(lhs - rhs)) < 1e-10);
    }
}
