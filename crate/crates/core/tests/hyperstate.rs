mod common;

use std::sync::Arc;

use ncpb_core::algebra::GnsSpace;
use ncpb_core::hyperstate::*;
use ncpb_core::linalg::*;
use ncpb_core::random;
use ncpb_core::Error;
use proptest::prelude::*;

fn spaces() -> Vec<Arc<GnsSpace>> {
    vec![common::c2(), common::m2(), common::m2_plus_c()]
}

fn span_of(ms: &[Mat], d: usize) -> Mat {
    let vs: Vec<Vector> = ms.iter().map(vec_cols).collect();
    orth(&columns(&vs, d * d)).unwrap()
}

#[test]
fn identity_hyperstate_is_vacuum() {
    for g in spaces() {
        let phi = Hyperstate::from_kraus(g.clone(), &[(g.algebra().identity(), 1.0)]).unwrap();
        assert!(common::close(phi.density(), &g.vacuum_projection(), 1e-14));
        let sf = phi.standard_form();
        assert_eq!(sf.len(), 1);
        assert!(common::close(&sf.family[0], &g.algebra().identity(), 1e-12) || {
            // any unimodular phase is allowed
            let z = sf.family[0][(0, 0)];
            (z.norm() - 1.0).abs() < 1e-12
        });
        assert!((sf.weights[0] - 1.0).abs() < 1e-12);
        let p = poisson_superop(&phi);
        assert!(p.distance(&Superoperator::identity(g.clone())) < 1e-12);
        let po = opposite_superop(&phi).unwrap();
        assert!(po.distance(&Superoperator::identity(g.clone())) < 1e-12);
    }
}

#[test]
fn e2_density_is_half_identity() {
    let g = common::c2();
    let phi = common::e2(&g);
    assert!(common::close(phi.density(), &eye(2).mapv(|z| z * 0.5), 1e-14));
    let sf = phi.standard_form();
    assert_eq!(sf.len(), 2);
    let m = g.algebra();
    let expected = span_of(&[m.unit(0, 0, 0), m.unit(1, 0, 0)], 2);
    assert!(subspace_sin(&span_of(&sf.family, 2), &expected).unwrap() < 1e-12);
    for w in &sf.weights {
        assert!((w - 0.5).abs() < 1e-12);
    }
}

#[test]
fn non_generating_density_has_two_halves() {
    let g = common::m2();
    let phi = common::non_generating(&g);
    let w = eigvalsh(phi.density()).unwrap();
    let big: Vec<f64> = w.iter().cloned().filter(|x| x.abs() > 1e-12).collect();
    assert_eq!(big.len(), 2);
    for x in big {
        assert!((x - 0.5).abs() < 1e-12);
    }
}

#[test]
fn normalization_failure_carries_residual() {
    let g = common::m2();
    let err = Hyperstate::from_kraus(g.clone(), &[(eye(2), 0.5)]).unwrap_err();
    match err {
        Error::NotNormalized { residual } => assert!((residual - 0.5 * 2f64.sqrt()).abs() < 1e-12),
        e => panic!("unexpected {e:?}"),
    }
    assert!(Hyperstate::from_kraus(g.clone(), &[(eye(2), -1.0)]).is_err());
}

#[test]
fn invalid_density_is_rejected() {
    let g = common::m2();
    // trace one, positive, but does not extend τ
    let mut a = zeros(4, 4);
    a[(1, 1)] = ONE;
    assert!(matches!(
        Hyperstate::from_density(g.clone(), a),
        Err(Error::InvalidHyperstate { .. })
    ));
}

#[test]
fn correspondence_on_random_hyperstates() {
    let mut rng = random::rng(2024);
    for g in spaces() {
        for _ in 0..12 {
            let phi = common::random_hyperstate(&g, &mut rng, 3);
            let p = poisson_superop(&phi);
            let one = g.one_hat();
            for _ in 0..3 {
                let t = random::ginibre(&mut rng, g.dim(), g.dim());
                let lhs = vdot(&one, &p.apply(&t).dot(&one));
                assert!((lhs - phi.evaluate(&t)).norm() < 1e-10);
            }
            // ⟨P(T)ŷ, ẑ⟩ = φ(z*Ty)
            let m = g.algebra();
            let y = m.random_element(&mut rng);
            let z = m.random_element(&mut rng);
            let t = random::ginibre(&mut rng, g.dim(), g.dim());
            let lhs = vdot(&g.hat(&z), &p.apply(&t).dot(&g.hat(&y)));
            let rhs = phi.evaluate(&g.left(&dagger(&z)).dot(&t).dot(&g.left(&y)));
            assert!((lhs - rhs).norm() < 1e-10);
            assert!(p.bimodular_residual() < 1e-10);
            assert!(p.unital_residual() < 1e-10);
            assert!(p.choi_min_eigenvalue().unwrap() > -1e-10);
            for k in 0..m.dim() {
                let l = g.left(&g.basis_element(k));
                assert!(common::close(&p.apply(&l), &l, 1e-10));
            }
        }
    }
}

#[test]
fn bimodularity_on_random_operators() {
    let mut rng = random::rng(9);
    let g = common::m2_plus_c();
    let phi = common::random_hyperstate(&g, &mut rng, 4);
    let p = poisson_superop(&phi);
    let m = g.algebra();
    for _ in 0..5 {
        let a = g.left(&m.random_element(&mut rng));
        let b = g.left(&m.random_element(&mut rng));
        let t = random::ginibre(&mut rng, g.dim(), g.dim());
        let lhs = p.apply(&mm3(&a, &t, &b));
        let rhs = mm3(&a, &p.apply(&t), &b);
        assert!(common::close(&lhs, &rhs, 1e-10));
    }
}

#[test]
fn standard_form_round_trip() {
    let mut rng = random::rng(77);
    for g in spaces() {
        for _ in 0..10 {
            let phi = common::random_hyperstate(&g, &mut rng, 3);
            assert!(reconstruction_residual(&phi) < 1e-10);
            assert!(phi.standard_form().partition_residual() < 1e-10);
            assert!(orthogonality_residual(&phi) < 1e-10);
            let w = &phi.standard_form().weights;
            assert!(w.windows(2).all(|p| p[0] >= p[1] - 1e-15));
        }
    }
}

#[test]
fn standard_form_of_regular_m2_hyperstate() {
    let mut rng = random::rng(3);
    let g = common::m2();
    let phi = common::random_regular(&g, &mut rng, 3);
    let sf = phi.standard_form();
    let mut rebuilt = zeros(4, 4);
    for z in &sf.family {
        rebuilt = rebuilt + contribution(&g, z);
    }
    assert!(common::close(&rebuilt, phi.density(), 1e-10));
    // Kraus family and standard family define the same density
    let again = Hyperstate::from_family(g.clone(), &sf.family).unwrap();
    assert!(common::close(again.density(), phi.density(), 1e-10));
}

#[test]
fn opposite_commutes_with_poisson() {
    let g = common::c2();
    let phi = common::e2(&g);
    let p = poisson_superop(&phi);
    let po = opposite_superop(&phi).unwrap();
    assert!(fro_norm(&commutator(p.matrix(), po.matrix())) < 1e-10);
    let m = g.algebra();
    let expected = Superoperator::from_pairs(
        g.clone(),
        &[
            (g.left(&m.unit(0, 0, 0)), g.left(&m.unit(0, 0, 0))),
            (g.left(&m.unit(1, 0, 0)), g.left(&m.unit(1, 0, 0))),
        ],
    );
    assert!(po.distance(&expected) < 1e-12);

    let mut rng = random::rng(41);
    let g = common::m2();
    for _ in 0..5 {
        let phi = common::random_regular(&g, &mut rng, 3);
        let eta = common::random_hyperstate(&g, &mut rng, 2);
        let po = opposite_superop(&phi).unwrap();
        let pe = poisson_superop(&eta);
        assert!(fro_norm(&commutator(po.matrix(), pe.matrix())) < 1e-10);
    }
}

#[test]
fn opposite_requires_regularity() {
    let mut rng = random::rng(8);
    let g = common::m2();
    let phi = common::random_hyperstate(&g, &mut rng, 2);
    assert!(!classify(&phi).unwrap().regular);
    assert!(matches!(opposite_superop(&phi), Err(Error::NotRegular { .. })));
    assert!(conjugate(&phi).is_err());
}

#[test]
fn convolution_monoid() {
    let mut rng = random::rng(12);
    let g = common::m2_plus_c();
    let e = Hyperstate::identity(g.clone());
    let phi = common::random_hyperstate(&g, &mut rng, 2);
    let psi = common::random_hyperstate(&g, &mut rng, 3);
    let eta = common::random_regular(&g, &mut rng, 2);
    assert!(common::close(convolve(&e, &psi).unwrap().density(), psi.density(), 1e-12));
    assert!(common::close(convolve(&phi, &e).unwrap().density(), phi.density(), 1e-12));
    let left = convolve(&convolve(&phi, &psi).unwrap(), &eta).unwrap();
    let right = convolve(&phi, &convolve(&psi, &eta).unwrap()).unwrap();
    assert!(common::close(left.density(), right.density(), 1e-10));
    // P_{φ∗ψ} = P_φ ∘ P_ψ
    let conv = poisson_superop(&convolve(&phi, &psi).unwrap());
    let comp = poisson_superop(&phi).compose(&poisson_superop(&psi));
    assert!(conv.distance(&comp) < 1e-10);
    // powers
    let p3 = convolution_power(&phi, 3).unwrap();
    let direct = convolve(&phi, &convolve(&phi, &phi).unwrap()).unwrap();
    assert!(common::close(p3.density(), &direct.density().clone(), 1e-10));
}

#[test]
fn self_convolution_matches_double_sum() {
    let mut rng = random::rng(4);
    let g = common::m2();
    let m = g.algebra();
    let bs: Vec<Mat> = (0..3).map(|_| m.random_unitary(&mut rng)).collect();
    let mu = [0.5, 0.3, 0.2];
    let fam: Vec<(Mat, f64)> = bs.iter().cloned().zip(mu).collect();
    let phi = Hyperstate::from_kraus(g.clone(), &fam).unwrap();
    let conv = convolve(&phi, &phi).unwrap();
    let vac = g.vacuum_projection();
    let mut a = zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            let x = g.left(&bs[j].dot(&bs[i]));
            a = a + mm3(&dagger(&x), &vac, &x).mapv(|z| z * mu[i] * mu[j]);
        }
    }
    assert!(common::close(conv.density(), &a, 1e-10));
    let mut w1 = eigvalsh(conv.density()).unwrap().to_vec();
    let mut w2: Vec<f64> = conv.standard_form().weights.clone();
    w1.retain(|x| *x > 1e-12);
    w1.sort_by(|a, b| b.partial_cmp(a).unwrap());
    w2.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(w1.len(), w2.len());
    for (a, b) in w1.iter().zip(&w2) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn conjugate_examples() {
    let g = common::m2();
    let e = Hyperstate::identity(g.clone());
    assert!(common::close(conjugate(&e).unwrap().density(), e.density(), 1e-12));
    let gc = common::c2();
    let phi = common::e2(&gc);
    assert!(common::close(conjugate(&phi).unwrap().density(), phi.density(), 1e-12));

    let mut rng = random::rng(31);
    let m = g.algebra();
    let u = m.random_unitary(&mut rng);
    let v = m.random_unitary(&mut rng);
    let phi = Hyperstate::from_kraus(g.clone(), &[(u.clone(), 0.5), (v.clone(), 0.5)]).unwrap();
    let star = Hyperstate::from_kraus(g.clone(), &[(dagger(&u), 0.5), (dagger(&v), 0.5)]).unwrap();
    let conj_phi = conjugate(&phi).unwrap();
    assert!(common::close(conj_phi.density(), star.density(), 1e-10));
    assert!(common::close(conjugate(&conj_phi).unwrap().density(), phi.density(), 1e-10));
    // φ*(T) = φ(JT*J)
    let t = random::ginibre(&mut rng, 4, 4);
    let lhs = conj_phi.evaluate(&t);
    let rhs = phi.evaluate(&g.conj_by_j(&dagger(&t)));
    assert!((lhs - rhs).norm() < 1e-10);
}

#[test]
fn classify_examples() {
    let g = common::m2();
    let c = classify(&Hyperstate::identity(g.clone())).unwrap();
    assert!(c.regular && !c.generating && !c.strongly_generating && c.symmetric);
    let c1 = GnsSpace::new(ncpb_core::TracialAlgebra::abelian(1));
    let c = classify(&Hyperstate::identity(c1)).unwrap();
    assert!(c.generating && c.strongly_generating);

    let gc = common::c2();
    let c = classify(&common::e2(&gc)).unwrap();
    assert!(c.regular && c.generating && c.strongly_generating && c.symmetric);

    let c = classify(&common::non_generating(&g)).unwrap();
    assert!(c.regular && !c.generating && !c.strongly_generating);
    assert_eq!(c.generated_dim, 2);

    let c = classify(&common::pauli(&g)).unwrap();
    assert!(c.regular && c.generating && c.strongly_generating && c.symmetric);
}

#[test]
fn nilpotent_and_diagonal_families() {
    let g = common::m2();
    let n = basis_unit(2, 0, 1);
    let nd = basis_unit(2, 1, 0);
    let phi = Hyperstate::from_kraus(g.clone(), &[(n, 1.0), (nd, 1.0)]).unwrap();
    let cl = classify(&phi).unwrap();
    assert!(cl.regular && cl.generating && cl.strongly_generating);
    // a diagonal unitary only reaches the diagonal
    let u = ndarray::array![[c(0.0, 1.0), ZERO], [ZERO, ONE]];
    let phi = Hyperstate::from_kraus(g.clone(), &[(u, 1.0)]).unwrap();
    let cl = classify(&phi).unwrap();
    assert!(cl.regular && !cl.generating && cl.generated_dim == 2);
}

#[test]
fn regularity_matches_commutant_trace() {
    let mut rng = random::rng(55);
    for g in spaces() {
        let reg = common::random_regular(&g, &mut rng, 3);
        assert!(classify(&reg).unwrap().regular);
        assert!(commutant_trace_residual(&reg) < 1e-10);
        let non = common::random_hyperstate(&g, &mut rng, 3);
        let c = classify(&non).unwrap();
        assert_eq!(c.regular, commutant_trace_residual(&non) < 1e-10);
    }
}

#[test]
fn distinct_densities_give_distinct_transforms() {
    let mut rng = random::rng(60);
    let g = common::m2();
    let a = common::random_hyperstate(&g, &mut rng, 2);
    let b = common::random_hyperstate(&g, &mut rng, 2);
    assert!(fro_norm(&(a.density() - b.density())) > 1e-3);
    assert!(poisson_superop(&a).distance(&poisson_superop(&b)) > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hyperstate_invariants(seed in any::<u64>(), which in 0usize..3, k in 1usize..4) {
        let g = spaces()[which].clone();
        let mut rng = random::rng(seed);
        let phi = common::random_hyperstate(&g, &mut rng, k);
        let res = phi.residuals().unwrap();
        prop_assert!(res.worst() < 1e-10);
        prop_assert!(reconstruction_residual(&phi) < 1e-10);
        let p = poisson_superop(&phi);
        let t = random::ginibre(&mut rng, g.dim(), g.dim());
        let one = g.one_hat();
        prop_assert!((vdot(&one, &p.apply(&t).dot(&one)) - phi.evaluate(&t)).norm() < 1e-10);
    }

    #[test]
    fn mixtures_stay_hyperstates(seed in any::<u64>(), t in 0.0f64..1.0) {
        let g = common::m2_plus_c();
        let mut rng = random::rng(seed);
        let a = common::random_hyperstate(&g, &mut rng, 2);
        let b = common::random_regular(&g, &mut rng, 2);
        let mix = a.mix(&b, t).unwrap();
        prop_assert!(mix.residuals().unwrap().worst() < 1e-10);
    }
}
