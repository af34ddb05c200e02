//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use ncpb_core::algebra::{GnsSpace, TracialAlgebra};
use ncpb_core::hyperstate::Hyperstate;
use ncpb_core::linalg::{dagger, eye, pauli_x, pauli_z, Mat, C64};

/// {1, X, Z}/√3 on M₂.
pub fn pauli() -> Hyperstate {
    let g = GnsSpace::new(TracialAlgebra::full_matrix(2));
    let w = 1.0 / 3.0;
    Hyperstate::from_kraus(g, &[(eye(2), w), (pauli_x(), w), (pauli_z(), w)]).unwrap()
}

/// Shift and clock with their adjoints on M_n.
pub fn weyl(n: usize) -> Hyperstate {
    let g: Arc<GnsSpace> = GnsSpace::new(TracialAlgebra::full_matrix(n));
    let w = C64::from_polar(1.0, std::f64::consts::TAU / n as f64);
    let shift = Mat::from_shape_fn((n, n), |(i, j)| if i == (j + 1) % n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    let clock = Mat::from_shape_fn((n, n), |(i, j)| if i == j { w.powu(i as u32) } else { C64::new(0.0, 0.0) });
    let fam = [
        (dagger(&shift), 0.25),
        (shift, 0.25),
        (dagger(&clock), 0.25),
        (clock, 0.25),
    ];
    Hyperstate::from_kraus(g, &fam).unwrap()
}
