#![allow(dead_code)]

use std::sync::Arc;

use ncpb_core::algebra::{GnsSpace, TracialAlgebra};
use ncpb_core::hyperstate::Hyperstate;
use ncpb_core::linalg::*;
use ncpb_core::random;
use rand::Rng;

pub fn c2() -> Arc<GnsSpace> {
    GnsSpace::new(TracialAlgebra::abelian(2))
}

pub fn m2() -> Arc<GnsSpace> {
    GnsSpace::new(TracialAlgebra::full_matrix(2))
}

pub fn m3() -> Arc<GnsSpace> {
    GnsSpace::new(TracialAlgebra::full_matrix(3))
}

pub fn m2_plus_c() -> Arc<GnsSpace> {
    GnsSpace::new(TracialAlgebra::uniform(vec![2, 1]))
}

/// ℂ² with the two minimal projections, unit weights.
pub fn e2(g: &Arc<GnsSpace>) -> Hyperstate {
    let m = g.algebra();
    Hyperstate::from_kraus(g.clone(), &[(m.unit(0, 0, 0), 1.0), (m.unit(1, 0, 0), 1.0)]).unwrap()
}

/// {1, X, Z}/√3 on M₂.
pub fn pauli(g: &Arc<GnsSpace>) -> Hyperstate {
    let w = 1.0 / 3.0;
    Hyperstate::from_kraus(g.clone(), &[(eye(2), w), (pauli_x(), w), (pauli_z(), w)]).unwrap()
}

/// {1/√2, X/√2} on M₂.
pub fn non_generating(g: &Arc<GnsSpace>) -> Hyperstate {
    Hyperstate::from_kraus(g.clone(), &[(eye(2), 0.5), (pauli_x(), 0.5)]).unwrap()
}

/// Random family normalized by (Σ x*x)^{-1/2}; generally not regular.
pub fn random_hyperstate(g: &Arc<GnsSpace>, rng: &mut impl Rng, k: usize) -> Hyperstate {
    let m = g.algebra();
    let xs: Vec<Mat> = (0..k).map(|_| m.random_element(rng)).collect();
    let mut s = zeros(m.rep_dim(), m.rep_dim());
    for x in &xs {
        s = s + dagger(x).dot(x);
    }
    let si = inv_sqrtm_pd(&s).unwrap();
    let fam: Vec<Mat> = xs.iter().map(|x| x.dot(&si)).collect();
    Hyperstate::from_family(g.clone(), &fam).unwrap()
}

/// Random unitaries with random probability weights; regular.
pub fn random_regular(g: &Arc<GnsSpace>, rng: &mut impl Rng, k: usize) -> Hyperstate {
    let m = g.algebra();
    let ws: Vec<f64> = (0..k).map(|_| random::uniform(rng, 0.2, 1.0)).collect();
    let tot: f64 = ws.iter().sum();
    let fam: Vec<(Mat, f64)> = ws
        .iter()
        .map(|w| (m.random_unitary(rng), w / tot))
        .collect();
    Hyperstate::from_kraus(g.clone(), &fam).unwrap()
}

/// Symmetric unitary family {u, u*, v, v*} with equal weights.
pub fn random_symmetric(g: &Arc<GnsSpace>, rng: &mut impl Rng) -> Hyperstate {
    let m = g.algebra();
    let u = m.random_unitary(rng);
    let v = m.random_unitary(rng);
    let fam = vec![
        (u.clone(), 0.25),
        (dagger(&u), 0.25),
        (v.clone(), 0.25),
        (dagger(&v), 0.25),
    ];
    Hyperstate::from_kraus(g.clone(), &fam).unwrap()
}

pub fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
    fro_norm(&(a - b)) <= tol
}
