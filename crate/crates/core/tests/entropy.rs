mod common;

use ncpb_core::algebra::{GnsSpace, TracialAlgebra};
use ncpb_core::entropy::*;
use ncpb_core::harmonic::boundary_build;
use ncpb_core::hyperstate::*;
use ncpb_core::linalg::*;
use ncpb_core::random;
use ncpb_core::Error;
use proptest::prelude::*;

const LN2: f64 = std::f64::consts::LN_2;

/// diag ℂ² ⊂ M₂.
fn diagonal_inclusion() -> Inclusion {
    Inclusion::with_multiplicities(&TracialAlgebra::abelian(2), vec![2], &[vec![1, 1]]).unwrap()
}

fn coherent_rho(cr: f64, ci: f64) -> Mat {
    ndarray::array![[r(0.5), c(cr, ci)], [c(cr, -ci), r(0.5)]]
}

fn e2_coherent(cr: f64) -> (Hyperstate, InclusionState) {
    let inc = diagonal_inclusion();
    let phi = common::e2(&GnsSpace::new(inc.algebra().clone()));
    (phi, InclusionState::new(inc, coherent_rho(cr, 0.0)).unwrap())
}

/// M₂ ⊂ B(L²(M₂)) with ρ = ¼ + c·X⊗Z, stationary for {1, X}/√2.
fn m4_state(cc: f64) -> (std::sync::Arc<GnsSpace>, InclusionState) {
    let g = common::m2();
    let inc = Inclusion::gns(&g);
    let rho = eye(4).mapv(|z| z * 0.25) + kron(&pauli_x(), &pauli_z()).mapv(|z| z * cc);
    (g.clone(), InclusionState::new(inc, rho).unwrap())
}

#[test]
fn entropy_examples() {
    let g = common::m2();
    assert_eq!(vn_entropy(&Hyperstate::identity(g.clone())).unwrap(), 0.0);
    assert!((vn_entropy(&common::e2(&common::c2())).unwrap() - LN2).abs() < 1e-10);
    assert!((vn_entropy(&common::pauli(&g)).unwrap() - 3f64.ln()).abs() < 1e-10);
    assert!((vn_entropy(&common::non_generating(&g)).unwrap() - LN2).abs() < 1e-10);
}

#[test]
fn entropy_vanishes_only_for_rank_one() {
    let mut rng = random::rng(1);
    let g = common::m2_plus_c();
    let phi = common::random_hyperstate(&g, &mut rng, 2);
    assert!(vn_entropy(&phi).unwrap() > 1e-6);
    let m = g.algebra();
    let u = m.random_unitary(&mut rng);
    let single = Hyperstate::from_kraus(g.clone(), &[(u, 1.0)]).unwrap();
    assert!(vn_entropy(&single).unwrap().abs() < 1e-12);
}

#[test]
fn entropy_sequence_examples() {
    let g = common::m2();
    let s = entropy_sequence(&Hyperstate::identity(g.clone()), 5).unwrap();
    assert!(s.values.iter().all(|&h| h.abs() < 1e-12));
    assert!(s.h_estimate.abs() < 1e-12);
    let s = entropy_sequence(&common::e2(&common::c2()), 8).unwrap();
    assert!(s.values.iter().all(|&h| h <= LN2 + 1e-12));
    assert!(s.h_estimate <= LN2 / 8.0 + 1e-12);
    assert!(s.subadditivity_excess <= 1e-9);
    let s = entropy_sequence(&common::pauli(&g), 10).unwrap();
    assert!(s.values.iter().all(|&h| h <= (4f64).ln() + 1e-12));
    assert!(s.h_estimate <= (4f64).ln() / 10.0 + 1e-12);
    let mut rng = random::rng(3);
    let non = common::random_hyperstate(&g, &mut rng, 2);
    assert!(matches!(entropy_sequence(&non, 3), Err(Error::NotRegular { .. })));
}

#[test]
fn subadditivity_on_random_regular_pairs() {
    let mut rng = random::rng(50);
    let spaces = [common::c2(), common::m2(), common::m2_plus_c()];
    for k in 0..50 {
        let g = &spaces[k % 3];
        let phi = common::random_hyperstate(g, &mut rng, 1 + k % 3);
        let psi = common::random_regular(g, &mut rng, 2 + k % 2);
        let h = vn_entropy(&convolve(&phi, &psi).unwrap()).unwrap();
        let bound = vn_entropy(&phi).unwrap() + vn_entropy(&psi).unwrap();
        assert!(h <= bound + 1e-9, "{h} > {bound}");
    }
}

#[test]
fn inclusion_examples() {
    let m = TracialAlgebra::uniform(vec![2, 1]);
    let st = InclusionState::with_default_rho(Inclusion::identity(&m)).unwrap();
    let e = st.e_projection();
    assert!(common::close(&e, &eye(5), 1e-12));
    let st = InclusionState::new(diagonal_inclusion(), eye(2).mapv(|z| z * 0.5)).unwrap();
    let md = modular_data(&st).unwrap();
    assert!(common::close(&md.delta, &eye(4), 1e-12));
    assert!(fro_norm(&md.log_delta) < 1e-12);
    let (_, st) = e2_coherent(0.3);
    let md = modular_data(&st).unwrap();
    assert!(fro_norm(&(&md.delta - &eye(4))) > 0.1);
}

#[test]
fn inclusion_validation() {
    let inc = diagonal_inclusion();
    // |c| = ½ is singular
    assert!(InclusionState::new(inc.clone(), coherent_rho(0.5, 0.0)).is_err());
    // ζ∘ι ≠ τ
    let bad = ndarray::array![[r(0.7), ZERO], [ZERO, r(0.3)]];
    assert!(matches!(
        InclusionState::new(inc.clone(), bad),
        Err(Error::Validation { .. })
    ));
    // condition number cap
    let m = TracialAlgebra::abelian(1);
    let one = Inclusion::with_multiplicities(&m, vec![2], &[vec![2]]).unwrap();
    let ill = ndarray::array![[r(1.0 - 1e-14), ZERO], [ZERO, r(1e-14)]];
    assert!(matches!(
        InclusionState::new(one, ill),
        Err(Error::IllConditioned { .. })
    ));
    // not a homomorphism
    let m2 = TracialAlgebra::abelian(2);
    let units = vec![eye(2), eye(2)];
    assert!(Inclusion::new(m2, vec![2], units).is_err());
}

#[test]
fn modular_spectrum_of_diagonal_density() {
    let m = TracialAlgebra::abelian(1);
    let inc = Inclusion::with_multiplicities(&m, vec![2], &[vec![2]]).unwrap();
    let p = 0.3;
    let rho = ndarray::array![[r(p), ZERO], [ZERO, r(1.0 - p)]];
    let st = InclusionState::new(inc, rho).unwrap();
    let md = modular_data(&st).unwrap();
    let mut got: Vec<f64> = md.eigenvalues.to_vec();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut want = vec![1.0, 1.0, p / (1.0 - p), (1.0 - p) / p];
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn modular_invariants_on_random_states() {
    let mut rng = random::rng(8);
    let m = TracialAlgebra::abelian(1);
    let inc = Inclusion::with_multiplicities(&m, vec![2], &[vec![2]]).unwrap();
    let inc2 = Inclusion::new(
        m.clone(),
        vec![2, 1],
        vec![eye(3)],
    )
    .unwrap();
    for inc in [inc, inc2] {
        for _ in 0..5 {
            let d = inc.ambient_rep_dim();
            let mut rho = random::density(&mut rng, d);
            // keep it block-diagonal
            if inc.ambient_blocks().len() > 1 {
                for i in 0..d {
                    for j in 0..d {
                        if (i < 2) != (j < 2) {
                            rho[(i, j)] = ZERO;
                        }
                    }
                }
                let t = trace(&rho);
                rho.mapv_inplace(|z| z / t);
            }
            let st = InclusionState::new(inc.clone(), rho).unwrap();
            let r = modular_data(&st).unwrap().residuals;
            assert!(r.delta_from_s < 1e-9, "{r:?}");
            assert!(r.j_involution < 1e-9 && r.j_isometry < 1e-9);
            assert!(r.vacuum < 1e-12 && r.min_eigenvalue > 0.0);
            assert!(r.flow_multiplicative < 1e-10 && r.flow_invariance < 1e-10);
            assert!(r.log_delta < 1e-9);
        }
    }
}

#[test]
fn j_is_the_adjoint_map() {
    let (_, st) = e2_coherent(0.3);
    let md = modular_data(&st).unwrap();
    // J(a ρ^{1/2}) = ρ^{1/2} a*
    let mut rng = random::rng(2);
    let a = random::ginibre(&mut rng, 2, 2);
    let v = st.vector(&a);
    let jv = md.j_matrix.dot(&v.mapv(|z| z.conj()));
    let sr = sqrtm_psd(st.rho()).unwrap();
    let expected = sr.dot(&dagger(&a));
    let got = ndarray::Array2::from_shape_vec((2, 2), jv.to_vec()).unwrap();
    assert!(common::close(&got, &expected, 1e-10));
}

#[test]
fn furstenberg_vanishes_for_tracial_states() {
    let inc = diagonal_inclusion();
    let st = InclusionState::new(inc.clone(), eye(2).mapv(|z| z * 0.5)).unwrap();
    let phi = common::e2(&GnsSpace::new(inc.algebra().clone()));
    let h = furstenberg_entropy(&phi, &st).unwrap();
    assert!(h.value.abs() < 1e-12 && h.spectral.abs() < 1e-12);
    // φ_e gives zero for any ζ
    let (_, st) = e2_coherent(0.3);
    let e = Hyperstate::identity(GnsSpace::new(inc.algebra().clone()));
    assert!(furstenberg_entropy(&e, &st).unwrap().value.abs() < 1e-12);
}

#[test]
fn furstenberg_routes_agree_on_coherent_state() {
    let (phi, st) = e2_coherent(0.3);
    let h = furstenberg_entropy(&phi, &st).unwrap();
    assert!(h.value > 0.1);
    assert!((h.spectral - h.commutator).abs() < 1e-8);
    assert!((h.flow - h.commutator).abs() < 1e-6);
    assert!(h.imaginary_part.abs() < 1e-12);
    assert!((h.truncations.last().unwrap().1 - h.spectral).abs() < 1e-12);
    // −Σ ⟨log Δ ι(z*)1, ι(z*)1⟩ with log Δ from the functional calculus
    let md = modular_data(&st).unwrap();
    let log_delta = herm_fn(&md.delta, |x| r(x.ln())).unwrap();
    let mut lemma = 0.0;
    for z in &phi.standard_form().family {
        let v = st.vector(&st.inclusion().embed(&dagger(z)));
        lemma -= vdot(&v, &log_delta.dot(&v)).re;
    }
    assert!((lemma - h.value).abs() < 1e-10);
}

#[test]
fn furstenberg_is_nonnegative_on_random_inclusions() {
    let mut rng = random::rng(19);
    let g = common::m2();
    for _ in 0..10 {
        let phi = common::random_hyperstate(&g, &mut rng, 3);
        let (_, st) = m4_state(random::uniform(&mut rng, -0.24, 0.24));
        let h = furstenberg_entropy(&phi, &st).unwrap();
        assert!(h.value >= -1e-10);
        assert!((h.spectral - h.commutator).abs() < 1e-8);
        assert!((h.flow - h.commutator).abs() < 1e-6);
    }
}

#[test]
fn stationary_state_examples() {
    // A = M: τ itself
    let m = TracialAlgebra::rescaled(vec![2, 1], &[0.3, 0.4]).unwrap();
    let g = GnsSpace::new(m.clone());
    let mut rng = random::rng(4);
    let phi = common::random_regular(&g, &mut rng, 3);
    let s = stationary_state_solve(&phi, &Inclusion::identity(&m)).unwrap();
    assert!(common::close(&s.rho, &Inclusion::identity(&m).default_rho(), 1e-9));
    assert!(s.residual < 1e-9);

    // A = B(L²(M)): compare with the Cesàro oracle when the solution is unique
    let inc = Inclusion::gns(&g);
    let s = stationary_state_solve(&phi, &inc).unwrap();
    assert!(s.residual < 1e-9);
    let st = InclusionState::new(inc.clone(), s.rho.clone()).unwrap();
    assert!(stationarity_residual(&phi, &st).unwrap() < 1e-9);
    if s.free_dimension == 0 {
        let oracle = cesaro_stationary(&phi, &inc, 20_000).unwrap();
        assert!(common::close(&s.rho, &oracle, 1e-3));
    }

    // E2 on diag ℂ² ⊂ M₂: the pinching fixes the diagonal only
    let inc = diagonal_inclusion();
    let phi = common::e2(&GnsSpace::new(inc.algebra().clone()));
    let s = stationary_state_solve(&phi, &inc).unwrap();
    assert!(s.residual < 1e-9);
    assert!(common::close(&s.rho, &eye(2).mapv(|z| z * 0.5), 1e-10));
}

#[test]
fn stationary_selection_maximizes_entropy() {
    let g = common::m2();
    let psi = common::non_generating(&g);
    let inc = Inclusion::gns(&g);
    let s = stationary_state_solve(&psi, &inc).unwrap();
    assert!(s.free_dimension > 0);
    assert!(s.residual < 1e-9);
    // the maximally mixed state is stationary and admissible
    assert!((s.entropy - 4f64.ln()).abs() < 1e-8);
    let (_, other) = m4_state(0.2);
    assert!(stationarity_residual(&psi, &other).unwrap() < 1e-12);
    assert!(other.entropy().unwrap() < s.entropy);
}

#[test]
fn stationary_solve_requires_regularity() {
    let mut rng = random::rng(6);
    let g = common::m2();
    let phi = common::random_hyperstate(&g, &mut rng, 2);
    assert!(matches!(
        stationary_state_solve(&phi, &Inclusion::gns(&g)),
        Err(Error::NotRegular { .. })
    ));
}

#[test]
fn additivity_under_stationarity() {
    let (g, st) = m4_state(0.2);
    let psi = common::non_generating(&g);
    let phi = common::pauli(&g);
    let rep = entropy_additivity_check(&phi, &psi, &st, 4).unwrap();
    assert!(rep.h_phi > 1e-3);
    assert!(rep.additivity_residual < 1e-7, "{rep:?}");
    assert!(rep.power_residual < 1e-7);
    let mut rng = random::rng(10);
    for _ in 0..5 {
        let phi = common::random_hyperstate(&g, &mut rng, 3);
        let rep = entropy_additivity_check(&phi, &psi, &st, 2).unwrap();
        assert!(rep.additivity_residual < 1e-7);
    }
    // E2 with its solved stationary state
    let inc = diagonal_inclusion();
    let e2 = common::e2(&GnsSpace::new(inc.algebra().clone()));
    let s = stationary_state_solve(&e2, &inc).unwrap();
    let st = InclusionState::new(inc, s.rho).unwrap();
    let rep = entropy_additivity_check(&e2, &e2, &st, 4).unwrap();
    assert!(rep.additivity_residual < 1e-7 && rep.power_residual < 1e-7);
}

#[test]
fn additivity_refuses_non_stationary_state() {
    let (phi, st) = e2_coherent(0.3);
    assert!(matches!(
        entropy_additivity_check(&phi, &phi, &st, 2),
        Err(Error::NotStationary { .. })
    ));
}

#[test]
fn entropy_bounds() {
    let inc = diagonal_inclusion();
    let e = Hyperstate::identity(GnsSpace::new(inc.algebra().clone()));
    let st = InclusionState::new(inc, coherent_rho(0.3, 0.0)).unwrap();
    let b = entropy_bounds_check(&e, &st, 4).unwrap();
    assert!(b.furstenberg.abs() < 1e-12 && b.entropy == 0.0 && b.below_entropy);
    let (phi, st) = e2_coherent(0.3);
    let b = entropy_bounds_check(&phi, &st, 4).unwrap();
    assert!(b.nonnegative && b.below_entropy && !b.stationary);
    let (g, st) = m4_state(0.2);
    let b = entropy_bounds_check(&common::non_generating(&g), &st, 6).unwrap();
    assert!(b.stationary && b.below_asymptotic == Some(true));
}

#[test]
fn entropy_bound_fails_for_strong_coherence() {
    // without stationarity the Furstenberg entropy can exceed H(φ)
    let (phi, st) = e2_coherent(0.45);
    let b = entropy_bounds_check(&phi, &st, 2).unwrap();
    assert!(b.nonnegative);
    assert!(b.furstenberg > LN2);
    assert!(!b.below_entropy);
}

#[test]
fn gap_inequality() {
    let inc = diagonal_inclusion();
    let st = InclusionState::new(inc.clone(), eye(2).mapv(|z| z * 0.5)).unwrap();
    let phi = common::e2(&GnsSpace::new(inc.algebra().clone()));
    let gr = entropy_gap_bound(&phi, &st).unwrap();
    assert!((gr.pairing - 1.0).abs() < 1e-12 && gr.bound.abs() < 1e-12 && gr.holds);
    for (cr, ci) in [(0.3, 0.0), (0.1, 0.25), (-0.2, -0.2)] {
        let st = InclusionState::new(inc.clone(), coherent_rho(cr, ci)).unwrap();
        let gr = entropy_gap_bound(&phi, &st).unwrap();
        assert!(gr.contraction && gr.holds, "{gr:?}");
        assert!((gr.pairing - gr.pairing_oracle).abs() < 1e-10);
        let u = ndarray::array![[ONE, ZERO], [ZERO, c(0.0, 1.0)]];
        let single = Hyperstate::from_kraus(phi.gns().clone(), &[(u, 1.0)]).unwrap();
        let gr = entropy_gap_bound(&single, &st).unwrap();
        assert!(gr.contraction && gr.holds, "{gr:?}");
    }
    let (g, st) = m4_state(0.2);
    let gr = entropy_gap_bound(&common::pauli(&g), &st).unwrap();
    assert!(gr.contraction && gr.holds);
}

#[test]
fn gap_requires_bi_normalized_family() {
    let mut rng = random::rng(7);
    let (g, st) = m4_state(0.1);
    let phi = common::random_hyperstate(&g, &mut rng, 2);
    assert!(matches!(entropy_gap_bound(&phi, &st), Err(Error::NotBiNormalized { .. })));
}

#[test]
fn zero_entropy_on_strongly_generating_walks() {
    let g = common::m2();
    let phi = common::pauli(&g);
    let b = boundary_build(&phi).unwrap();
    let z = zero_entropy_check(&phi, &b).unwrap();
    assert!(z.zero_entropy && z.harmonic_equals_m && z.agree);
    let gc = common::c2();
    let phi = common::e2(&gc);
    let b = boundary_build(&phi).unwrap();
    let z = zero_entropy_check(&phi, &b).unwrap();
    assert!(z.zero_entropy && z.harmonic_equals_m && z.agree);
    let mut rng = random::rng(12);
    let gm = common::m2_plus_c();
    let phi = common::random_symmetric(&gm, &mut rng);
    let b = boundary_build(&phi).unwrap();
    let z = zero_entropy_check(&phi, &b).unwrap();
    assert!(z.furstenberg.abs() <= 1e-8 && z.agree);
}

#[test]
fn zero_entropy_excludes_non_generating() {
    let g = common::m2();
    let phi = common::non_generating(&g);
    let b = boundary_build(&phi).unwrap();
    assert!(matches!(zero_entropy_check(&phi, &b), Err(Error::Precondition { .. })));
}

#[test]
fn boundary_inclusion_restricts_to_trace() {
    let g = common::m2();
    let phi = common::pauli(&g);
    let b = boundary_build(&phi).unwrap();
    let st = boundary_inclusion(&phi, &b).unwrap();
    assert_eq!(st.inclusion().ambient_blocks(), &[2]);
    let h = furstenberg_entropy(&phi, &st).unwrap();
    assert!(h.value.abs() < 1e-8);
}

#[test]
fn boundary_inclusion_needs_faithful_state() {
    let g = common::m2();
    let phi = common::non_generating(&g);
    let b = boundary_build(&phi).unwrap();
    assert!(!b.faithful);
    assert!(boundary_inclusion(&phi, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn furstenberg_dual_route(seed in any::<u64>(), cr in -0.45f64..0.45, ci in -0.2f64..0.2) {
        prop_assume!(cr * cr + ci * ci < 0.2);
        let inc = diagonal_inclusion();
        let st = InclusionState::new(inc.clone(), coherent_rho(cr, ci)).unwrap();
        let g = GnsSpace::new(inc.algebra().clone());
        let mut rng = random::rng(seed);
        let phi = common::random_hyperstate(&g, &mut rng, 2);
        let h = furstenberg_entropy(&phi, &st).unwrap();
        prop_assert!(h.value >= -1e-10);
        prop_assert!((h.spectral - h.commutator).abs() < 1e-8);
    }
}
