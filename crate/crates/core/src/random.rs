//! Seeded random matrices for generators, probes and tests.

use ndarray_linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, dagger, hermitian_part, Mat, Vector, C64};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre(rng: &mut impl Rng, m: usize, n: usize) -> Mat {
    Mat::from_shape_fn((m, n), |_| gaussian(rng))
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_shape_fn(n, |_| gaussian(rng))
}

pub fn hermitian(rng: &mut impl Rng, n: usize) -> Mat {
    hermitian_part(&ginibre(rng, n, n))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase fix.
pub fn haar_unitary(rng: &mut impl Rng, n: usize) -> Mat {
    let g = crate::linalg::fortran(&ginibre(rng, n, n));
    let (q, rr) = g.qr().expect("QR of a square Gaussian matrix");
    let mut q = q;
    for j in 0..n {
        let d = rr[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        q.column_mut(j).mapv_inplace(|z| z * ph);
    }
    q
}

/// Random density matrix of full rank.
pub fn density(rng: &mut impl Rng, n: usize) -> Mat {
    let g = ginibre(rng, n, n);
    let p = g.dot(&dagger(&g));
    let t = crate::linalg::trace(&p);
    p.mapv(|z| z / t)
}

pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
