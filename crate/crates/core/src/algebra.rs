//! Multi-matrix tracial algebras, GNS spaces, subalgebras and group algebras.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concrete::{span_closure, ConcreteAlgebra};
use crate::error::{invalid, Error, Result};
use crate::linalg::*;
use crate::random;

/// How block weights are supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Explicit(Vec<f64>),
    Named(WeightRule),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// All weights equal, rescaled so that τ(1) = 1.
    Uniform,
}

/// ⊕ M_{n_i} with τ(x) = Σ w_i Tr(x_i). Elements are block-diagonal
/// `d × d` matrices, `d = Σ n_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TracialAlgebra {
    blocks: Vec<usize>,
    weights: Vec<f64>,
    offsets: Vec<usize>,
    d: usize,
}

impl TracialAlgebra {
    pub fn new(blocks: Vec<usize>, weights: Weights) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("blocks", "at least one block is required"));
        }
        if let Some(i) = blocks.iter().position(|&n| n == 0) {
            return Err(invalid(format!("blocks[{i}]"), "block sizes must be positive"));
        }
        let weights = match weights {
            Weights::Named(WeightRule::Uniform) => {
                let total: usize = blocks.iter().sum();
                vec![1.0 / total as f64; blocks.len()]
            }
            Weights::Explicit(w) => {
                if w.len() != blocks.len() {
                    return Err(invalid(
                        "weights",
                        format!("expected {} weights, got {}", blocks.len(), w.len()),
                    ));
                }
                if let Some(i) = w.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(invalid(format!("weights[{i}]"), "weights must be positive"));
                }
                let s: f64 = w.iter().zip(&blocks).map(|(w, &n)| w * n as f64).sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(invalid(
                        "weights",
                        format!("Σ w_i n_i = {s} ≠ 1"),
                    ));
                }
                w
            }
        };
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut acc = 0;
        for &n in &blocks {
            offsets.push(acc);
            acc += n;
        }
        Ok(Self {
            blocks,
            weights,
            offsets,
            d: acc,
        })
    }

    pub fn uniform(blocks: Vec<usize>) -> Self {
        Self::new(blocks, Weights::Named(WeightRule::Uniform)).expect("positive sizes")
    }

    /// Rescales arbitrary positive weights so that Σ w_i n_i = 1.
    pub fn rescaled(blocks: Vec<usize>, weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().zip(&blocks).map(|(w, &n)| w * n as f64).sum();
        Self::new(blocks, Weights::Explicit(weights.iter().map(|w| w / s).collect()))
    }

    pub fn full_matrix(n: usize) -> Self {
        Self::uniform(vec![n])
    }

    pub fn abelian(k: usize) -> Self {
        Self::uniform(vec![1; k])
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Size of the block-diagonal matrices representing elements.
    pub fn rep_dim(&self) -> usize {
        self.d
    }

    /// Vector-space dimension Σ n_i².
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.blocks.iter().all(|&n| n == 1)
    }

    pub fn is_factor(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn identity(&self) -> Mat {
        eye(self.d)
    }

    pub fn unit(&self, block: usize, i: usize, j: usize) -> Mat {
        let o = self.offsets[block];
        basis_unit(self.d, o + i, o + j)
    }

    /// Matrix units in canonical order: block, then row, then column.
    pub fn units(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.dim());
        for (b, &n) in self.blocks.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    out.push((b, i, j));
                }
            }
        }
        out
    }

    pub fn block(&self, x: &Mat, b: usize) -> Mat {
        let o = self.offsets[b];
        let n = self.blocks[b];
        x.slice(ndarray::s![o..o + n, o..o + n]).to_owned()
    }

    pub fn from_blocks(&self, xs: &[Mat]) -> Mat {
        direct_sum(xs)
    }

    /// Frobenius norm of the entries outside the diagonal blocks.
    pub fn off_block_residual(&self, x: &Mat) -> f64 {
        if x.dim() != (self.d, self.d) {
            return f64::INFINITY;
        }
        let mut compressed = x.clone();
        for b in 0..self.blocks.len() {
            let o = self.offsets[b];
            let n = self.blocks[b];
            compressed.slice_mut(ndarray::s![o..o + n, o..o + n]).fill(ZERO);
        }
        fro_norm(&compressed)
    }

    pub fn check_element(&self, x: &Mat, field: &str) -> Result<()> {
        if x.dim() != (self.d, self.d) {
            return Err(invalid(
                field,
                format!("expected a {0}×{0} matrix, got {1}×{2}", self.d, x.nrows(), x.ncols()),
            ));
        }
        let r = self.off_block_residual(x);
        if r > 1e-12 {
            return Err(invalid(field, format!("not block diagonal (off-block norm {r:.3e})")));
        }
        Ok(())
    }

    pub fn tau(&self, x: &Mat) -> C64 {
        let mut t = ZERO;
        for (b, (&n, &w)) in self.blocks.iter().zip(&self.weights).enumerate() {
            let o = self.offsets[b];
            for i in 0..n {
                t += x[(o + i, o + i)] * w;
            }
        }
        t
    }

    pub fn inner(&self, x: &Mat, y: &Mat) -> C64 {
        self.tau(&dagger(y).dot(x))
    }

    pub fn norm2(&self, x: &Mat) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// Product algebra with blocks ordered (i, j) i-major and weights w_i v_j.
    pub fn tensor(&self, other: &TracialAlgebra) -> TracialAlgebra {
        let mut blocks = Vec::new();
        let mut weights = Vec::new();
        for (&n, &w) in self.blocks.iter().zip(&self.weights) {
            for (&m, &v) in other.blocks.iter().zip(&other.weights) {
                blocks.push(n * m);
                weights.push(w * v);
            }
        }
        TracialAlgebra::new(blocks, Weights::Explicit(weights)).expect("product of valid traces")
    }

    /// x ⊗ y as an element of `self.tensor(other)`.
    pub fn tensor_element(&self, other: &TracialAlgebra, x: &Mat, y: &Mat) -> Mat {
        let mut parts = Vec::new();
        for i in 0..self.blocks.len() {
            for j in 0..other.blocks.len() {
                parts.push(kron(&self.block(x, i), &other.block(y, j)));
            }
        }
        direct_sum(&parts)
    }

    pub fn random_element(&self, rng: &mut impl Rng) -> Mat {
        let parts: Vec<Mat> = self.blocks.iter().map(|&n| random::ginibre(rng, n, n)).collect();
        direct_sum(&parts)
    }

    pub fn random_unitary(&self, rng: &mut impl Rng) -> Mat {
        let parts: Vec<Mat> = self.blocks.iter().map(|&n| random::haar_unitary(rng, n)).collect();
        direct_sum(&parts)
    }

    pub fn random_hermitian(&self, rng: &mut impl Rng) -> Mat {
        hermitian_part(&self.random_element(rng))
    }
}

/// GNS data of (M, τ) in the orthonormal basis e^{(i)}_{rc} / √w_i.
#[derive(Debug)]
pub struct GnsSpace {
    alg: TracialAlgebra,
    dim: usize,
    gns_offsets: Vec<usize>,
    j_perm: Vec<usize>,
}

impl PartialEq for GnsSpace {
    fn eq(&self, other: &Self) -> bool {
        self.alg == other.alg
    }
}

impl GnsSpace {
    pub fn new(alg: TracialAlgebra) -> Arc<Self> {
        let mut gns_offsets = Vec::new();
        let mut acc = 0;
        for &n in alg.blocks() {
            gns_offsets.push(acc);
            acc += n * n;
        }
        let mut j_perm = vec![0; acc];
        for (b, &n) in alg.blocks().iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    j_perm[gns_offsets[b] + r * n + c] = gns_offsets[b] + c * n + r;
                }
            }
        }
        Arc::new(Self {
            alg,
            dim: acc,
            gns_offsets,
            j_perm,
        })
    }

    pub fn algebra(&self) -> &TracialAlgebra {
        &self.alg
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn index(&self, block: usize, r: usize, c: usize) -> usize {
        self.gns_offsets[block] + r * self.alg.blocks()[block] + c
    }

    pub fn basis_element(&self, k: usize) -> Mat {
        let (b, r, c) = self.unit_of(k);
        self.alg.unit(b, r, c).mapv(|z| z / self.alg.weights()[b].sqrt())
    }

    pub fn basis(&self) -> Vec<Mat> {
        (0..self.dim).map(|k| self.basis_element(k)).collect()
    }

    pub fn unit_of(&self, k: usize) -> (usize, usize, usize) {
        let b = self.gns_offsets.partition_point(|&o| o <= k) - 1;
        let n = self.alg.blocks()[b];
        let rem = k - self.gns_offsets[b];
        (b, rem / n, rem % n)
    }

    pub fn hat(&self, x: &Mat) -> Vector {
        let mut v = Vector::zeros(self.dim);
        for (b, &n) in self.alg.blocks().iter().enumerate() {
            let o = self.alg.offsets()[b];
            let sw = self.alg.weights()[b].sqrt();
            for r in 0..n {
                for c in 0..n {
                    v[self.index(b, r, c)] = x[(o + r, o + c)] * sw;
                }
            }
        }
        v
    }

    pub fn unhat(&self, v: &Vector) -> Mat {
        let d = self.alg.rep_dim();
        let mut x = zeros(d, d);
        for (b, &n) in self.alg.blocks().iter().enumerate() {
            let o = self.alg.offsets()[b];
            let sw = self.alg.weights()[b].sqrt();
            for r in 0..n {
                for c in 0..n {
                    x[(o + r, o + c)] = v[self.index(b, r, c)] / sw;
                }
            }
        }
        x
    }

    pub fn one_hat(&self) -> Vector {
        self.hat(&self.alg.identity())
    }

    /// Rank-one projection onto 1̂.
    pub fn vacuum_projection(&self) -> Mat {
        let v = self.one_hat();
        outer(&v, &v)
    }

    /// L(x): ŷ ↦ (xy)^.
    pub fn left(&self, x: &Mat) -> Mat {
        let mut l = zeros(self.dim, self.dim);
        for (b, &n) in self.alg.blocks().iter().enumerate() {
            let o = self.alg.offsets()[b];
            for r in 0..n {
                for a in 0..n {
                    let xra = x[(o + r, o + a)];
                    if xra == ZERO {
                        continue;
                    }
                    for c in 0..n {
                        l[(self.index(b, r, c), self.index(b, a, c))] = xra;
                    }
                }
            }
        }
        l
    }

    /// R(x): ŷ ↦ (yx)^.
    pub fn right(&self, x: &Mat) -> Mat {
        let mut m = zeros(self.dim, self.dim);
        for (b, &n) in self.alg.blocks().iter().enumerate() {
            let o = self.alg.offsets()[b];
            for c in 0..n {
                for s in 0..n {
                    let xcs = x[(o + c, o + s)];
                    if xcs == ZERO {
                        continue;
                    }
                    for a in 0..n {
                        m[(self.index(b, a, s), self.index(b, a, c))] = xcs;
                    }
                }
            }
        }
        m
    }

    /// The real permutation C with J(v) = C·v̄.
    pub fn j_matrix(&self) -> Mat {
        let mut c = zeros(self.dim, self.dim);
        for (k, &p) in self.j_perm.iter().enumerate() {
            c[(p, k)] = ONE;
        }
        c
    }

    pub fn apply_j(&self, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for (k, &p) in self.j_perm.iter().enumerate() {
            out[p] = v[k].conj();
        }
        out
    }

    /// J T J as a complex-linear operator.
    pub fn conj_by_j(&self, t: &Mat) -> Mat {
        let mut out = zeros(self.dim, self.dim);
        for (k, &pk) in self.j_perm.iter().enumerate() {
            for (l, &pl) in self.j_perm.iter().enumerate() {
                out[(pk, pl)] = t[(k, l)].conj();
            }
        }
        out
    }
}

pub fn outer(a: &Vector, b: &Vector) -> Mat {
    let n = a.len();
    let m = b.len();
    Mat::from_shape_fn((n, m), |(i, j)| a[i] * b[j].conj())
}

/// A unital subalgebra N ⊆ M with τ-orthonormal basis and projection e_N.
#[derive(Clone, Debug)]
pub struct Subalgebra {
    basis: Vec<Mat>,
    projection: Mat,
    star_closed: bool,
}

impl Subalgebra {
    fn from_hats(gns: &GnsSpace, hats: &[Vector]) -> Result<Self> {
        let q = orth(&columns(hats, gns.dim()))?;
        let basis: Vec<Mat> = column_vecs(&q).iter().map(|v| gns.unhat(v)).collect();
        let projection = q.dot(&dagger(&q));
        let star_closed = basis.iter().all(|b| {
            let h = gns.hat(&dagger(b));
            vnorm(&(&h - &projection.dot(&h))) <= 1e-9
        });
        Ok(Self {
            basis,
            projection,
            star_closed,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    pub fn projection(&self) -> &Mat {
        &self.projection
    }

    pub fn is_star_closed(&self) -> bool {
        self.star_closed
    }

    pub fn expectation(&self, alg: &TracialAlgebra, x: &Mat) -> Mat {
        let mut out = zeros(x.nrows(), x.ncols());
        for b in &self.basis {
            let k = alg.inner(x, b);
            out.zip_mut_with(b, |o, &y| *o += k * y);
        }
        out
    }

    pub fn residual(&self, alg: &TracialAlgebra, x: &Mat) -> f64 {
        alg.norm2(&(x - &self.expectation(alg, x)))
    }
}

/// Z(M) by the null space of the stacked commutator system.
pub fn center(gns: &GnsSpace) -> Result<Subalgebra> {
    let basis = gns.basis();
    let dd = gns.dim();
    let mut sys = zeros(dd * dd, dd);
    for (k, bk) in basis.iter().enumerate() {
        for (l, bl) in basis.iter().enumerate() {
            let h = gns.hat(&commutator(bk, bl));
            sys.slice_mut(ndarray::s![l * dd..(l + 1) * dd, k]).assign(&h);
        }
    }
    let ns = null_space(&sys)?;
    Subalgebra::from_hats(gns, &column_vecs(&ns))
}

/// Span of words in `gens` together with 1, adjoining adjoints when `star_closed`.
pub fn generated_subalgebra(gns: &GnsSpace, gens: &[Mat], star_closed: bool) -> Result<Subalgebra> {
    let alg = gns.algebra();
    for (i, g) in gens.iter().enumerate() {
        alg.check_element(g, &format!("generator {i}"))?;
    }
    let span = span_closure(gens, alg.rep_dim(), star_closed);
    let hats: Vec<Vector> = span.iter().map(|x| gns.hat(x)).collect();
    Subalgebra::from_hats(gns, &hats)
}

/// τ-preserving conditional expectation onto a unital *-subalgebra.
pub struct ConditionalExpectation {
    alg: TracialAlgebra,
    sub: Subalgebra,
}

impl ConditionalExpectation {
    pub fn apply(&self, x: &Mat) -> Mat {
        self.sub.expectation(&self.alg, x)
    }

    pub fn subalgebra(&self) -> &Subalgebra {
        &self.sub
    }
}

pub fn conditional_expectation(gns: &GnsSpace, sub: &Subalgebra) -> Result<ConditionalExpectation> {
    let alg = gns.algebra();
    if !sub.is_star_closed() {
        return Err(invalid("subalgebra", "not closed under adjoint"));
    }
    if sub.residual(alg, &alg.identity()) > 1e-9 {
        return Err(invalid("subalgebra", "does not contain the unit"));
    }
    Ok(ConditionalExpectation {
        alg: alg.clone(),
        sub: sub.clone(),
    })
}

/// Group algebra L(Γ) decomposed into blocks, with the images u_γ.
#[derive(Clone, Debug)]
pub struct GroupAlgebra {
    pub algebra: TracialAlgebra,
    pub unitaries: Vec<Mat>,
    pub identity: usize,
    pub inverses: Vec<usize>,
}

pub fn validate_group_table(table: &[Vec<usize>]) -> Result<(usize, Vec<usize>)> {
    let n = table.len();
    if n == 0 {
        return Err(Error::GroupTable("empty table".into()));
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != n {
            return Err(Error::GroupTable(format!("row {i} has length {}", row.len())));
        }
        if let Some(&bad) = row.iter().find(|&&x| x >= n) {
            return Err(Error::GroupTable(format!("entry {bad} in row {i} out of range")));
        }
    }
    let e = (0..n)
        .find(|&g| (0..n).all(|h| table[g][h] == h && table[h][g] == h))
        .ok_or_else(|| Error::GroupTable("no identity element".into()))?;
    let mut inv = vec![0; n];
    for g in 0..n {
        inv[g] = (0..n)
            .find(|&h| table[g][h] == e && table[h][g] == e)
            .ok_or_else(|| Error::GroupTable(format!("element {g} has no inverse")))?;
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if table[table[a][b]][c] != table[a][table[b][c]] {
                    return Err(Error::GroupTable(format!(
                        "associativity fails at ({a}, {b}, {c})"
                    )));
                }
            }
        }
    }
    Ok((e, inv))
}

pub fn group_algebra(table: &[Vec<usize>]) -> Result<GroupAlgebra> {
    let (e, inverses) = validate_group_table(table)?;
    let n = table.len();
    let lambda: Vec<Mat> = (0..n)
        .map(|g| {
            let mut m = zeros(n, n);
            for h in 0..n {
                m[(table[g][h], h)] = ONE;
            }
            m
        })
        .collect();
    let conc = ConcreteAlgebra::from_spanning(&lambda, n)?;
    let wb = conc.wedderburn()?;
    let weights: Vec<f64> = wb.multiplicities.iter().map(|&m| m as f64 / n as f64).collect();
    let algebra = TracialAlgebra::new(wb.blocks.clone(), Weights::Explicit(weights))?;
    let unitaries = lambda.iter().map(|l| wb.to_block_diag(l)).collect();
    Ok(GroupAlgebra {
        algebra,
        unitaries,
        identity: e,
        inverses,
    })
}

/// Multiplication tables of small groups used by the generators.
pub fn cyclic_table(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect()
}

pub fn symmetric3_table() -> Vec<Vec<usize>> {
    // permutations of {0,1,2} in lexicographic order, composed as (a∘b)(x) = a(b(x))
    let perms: Vec<[usize; 3]> = vec![
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
    perms
        .iter()
        .map(|a| {
            perms
                .iter()
                .map(|b| idx([a[b[0]], a[b[1]], a[b[2]]]))
                .collect()
        })
        .collect()
}
