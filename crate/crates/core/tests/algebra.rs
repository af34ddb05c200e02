mod common;

use ncpb_core::algebra::*;
use ncpb_core::linalg::*;
use ncpb_core::random;
use proptest::prelude::*;

#[test]
fn one_dimensional_algebra() {
    let m = TracialAlgebra::new(vec![1], Weights::Explicit(vec![1.0])).unwrap();
    let g = GnsSpace::new(m);
    assert_eq!(g.dim(), 1);
    let x = ndarray::array![[c(0.3, -2.0)]];
    assert!(common::close(&g.left(&x), &x, 1e-15));
    assert!(common::close(&g.right(&x), &x, 1e-15));
    let v = ndarray::array![c(1.0, 2.0)];
    assert_eq!(g.apply_j(&v)[0], c(1.0, -2.0));
}

#[test]
fn c2_gns_is_diagonal() {
    let g = common::c2();
    let m = g.algebra();
    assert!((m.weights()[0] - 0.5).abs() < 1e-15);
    let x = m.from_blocks(&[ndarray::array![[c(2.0, 1.0)]], ndarray::array![[r(-3.0)]]]);
    let l = g.left(&x);
    let expected = ndarray::array![[c(2.0, 1.0), ZERO], [ZERO, r(-3.0)]];
    assert!(common::close(&l, &expected, 1e-15));
    assert!(common::close(&g.right(&x), &expected, 1e-15));
    assert!(common::close(&g.j_matrix(), &eye(2), 1e-15));
    assert!((m.tau(&x) - c(-0.5, 0.5)).norm() < 1e-15);
}

#[test]
fn factor_trace_is_normalized() {
    let m = TracialAlgebra::new(vec![2], Weights::Explicit(vec![0.5])).unwrap();
    assert!((m.tau(&m.identity()).re - 1.0).abs() < 1e-15);
}

fn gns_invariants(g: &GnsSpace) {
    let m = g.algebra();
    let mut rng = random::rng(11);
    let x = m.random_element(&mut rng);
    let y = m.random_element(&mut rng);
    let tol = 1e-12;
    assert!(common::close(&g.left(&x.dot(&y)), &g.left(&x).dot(&g.left(&y)), tol));
    assert!(common::close(&g.left(&dagger(&x)), &dagger(&g.left(&x)), tol));
    assert!(common::close(&g.right(&x.dot(&y)), &g.right(&y).dot(&g.right(&x)), tol));
    assert!(fro_norm(&commutator(&g.left(&x), &g.right(&y))) < tol);
    assert!(common::close(&g.conj_by_j(&g.left(&x)), &g.right(&dagger(&x)), tol));
    let v = random::gaussian_vector(&mut rng, g.dim());
    let w = random::gaussian_vector(&mut rng, g.dim());
    assert!(vnorm(&(g.apply_j(&g.apply_j(&v)) - &v)) < tol);
    assert!((vdot(&g.apply_j(&w), &g.apply_j(&v)) - vdot(&v, &w)).norm() < tol);
    assert!(vnorm(&(g.apply_j(&g.hat(&x)) - g.hat(&dagger(&x)))) < tol);
    // J as (C, conjugate)
    let cj = g.j_matrix();
    assert!(vnorm(&(cj.dot(&v.mapv(|z| z.conj())) - g.apply_j(&v))) < tol);
    // unital, and L(x)1̂ = x̂
    assert!(common::close(&g.left(&m.identity()), &eye(g.dim()), tol));
    assert!(vnorm(&(g.left(&x).dot(&g.one_hat()) - g.hat(&x))) < tol);
    // orthonormal basis
    for k in 0..g.dim() {
        for l in 0..g.dim() {
            let ip = m.inner(&g.basis_element(k), &g.basis_element(l));
            let expected = if k == l { 1.0 } else { 0.0 };
            assert!((ip - r(expected)).norm() < tol);
        }
    }
}

#[test]
fn gns_invariants_on_several_algebras() {
    for blocks in [vec![1], vec![1, 1], vec![2], vec![2, 1], vec![2, 3]] {
        gns_invariants(&GnsSpace::new(TracialAlgebra::uniform(blocks)));
    }
    gns_invariants(&GnsSpace::new(TracialAlgebra::rescaled(vec![2, 1], &[0.1, 0.7]).unwrap()));
}

#[test]
fn right_representation_is_commutant() {
    for blocks in [vec![2], vec![2, 1]] {
        let g = GnsSpace::new(TracialAlgebra::uniform(blocks));
        let dd = g.dim();
        // solve [L(b_k), Y] = 0
        let mut rows = Vec::new();
        for k in 0..dd {
            let l = g.left(&g.basis_element(k));
            rows.push(kron(&eye(dd), &l) - kron(&transpose(&l), &eye(dd)));
        }
        let ns = null_space(&vstack(&rows)).unwrap();
        let rs: Vec<Vector> = (0..dd).map(|k| vec_cols(&g.right(&g.basis_element(k)))).collect();
        let rspan = orth(&columns(&rs, dd * dd)).unwrap();
        assert_eq!(ns.ncols(), rspan.ncols());
        assert!(subspace_sin(&ns, &rspan).unwrap() < 1e-10);
    }
}

#[test]
fn center_dimensions() {
    assert_eq!(center(&common::m2()).unwrap().dim(), 1);
    assert_eq!(center(&common::c2()).unwrap().dim(), 2);
    let g = GnsSpace::new(TracialAlgebra::uniform(vec![2, 3]));
    let z = center(&g).unwrap();
    assert_eq!(z.dim(), 2);
    for b in z.basis() {
        for k in 0..g.dim() {
            assert!(fro_norm(&commutator(b, &g.basis_element(k))) < 1e-10);
        }
    }
}

#[test]
fn generated_subalgebra_examples() {
    let g = common::m2();
    assert_eq!(generated_subalgebra(&g, &[eye(2)], true).unwrap().dim(), 1);
    assert_eq!(generated_subalgebra(&g, &[pauli_x(), pauli_z()], false).unwrap().dim(), 4);
    let diag = generated_subalgebra(&g, &[basis_unit(2, 0, 0)], true).unwrap();
    assert_eq!(diag.dim(), 2);
    assert!(diag.is_star_closed());
    // non-star closure of a nilpotent stays small
    let n = generated_subalgebra(&g, &[basis_unit(2, 0, 1)], false).unwrap();
    assert_eq!(n.dim(), 2);
    assert!(!n.is_star_closed());
    assert_eq!(generated_subalgebra(&g, &[basis_unit(2, 0, 1)], true).unwrap().dim(), 4);
}

#[test]
fn conditional_expectation_examples() {
    let g = common::m2();
    let m = g.algebra();
    let mut rng = random::rng(5);
    let x = m.random_element(&mut rng);
    let full = generated_subalgebra(&g, &[pauli_x(), pauli_z()], true).unwrap();
    let e = conditional_expectation(&g, &full).unwrap();
    assert!(common::close(&e.apply(&x), &x, 1e-12));
    let diag = generated_subalgebra(&g, &[basis_unit(2, 0, 0)], true).unwrap();
    let e = conditional_expectation(&g, &diag).unwrap();
    let ex = e.apply(&x);
    assert!(ex[(0, 1)].norm() < 1e-12 && ex[(1, 0)].norm() < 1e-12);
    assert!((ex[(0, 0)] - x[(0, 0)]).norm() < 1e-12);
    let scalars = generated_subalgebra(&g, &[eye(2)], true).unwrap();
    let e = conditional_expectation(&g, &scalars).unwrap();
    assert!(common::close(&e.apply(&x), &eye(2).mapv(|z| z * m.tau(&x)), 1e-12));
    let nil = generated_subalgebra(&g, &[basis_unit(2, 0, 1)], false).unwrap();
    assert!(conditional_expectation(&g, &nil).is_err());
}

#[test]
fn conditional_expectation_properties() {
    let g = GnsSpace::new(TracialAlgebra::uniform(vec![2, 3]));
    let m = g.algebra();
    let mut rng = random::rng(6);
    let n = generated_subalgebra(&g, &[m.random_hermitian(&mut rng)], true).unwrap();
    let e = conditional_expectation(&g, &n).unwrap();
    for _ in 0..10 {
        let x = m.random_element(&mut rng);
        let ex = e.apply(&x);
        assert!(common::close(&e.apply(&ex), &ex, 1e-10));
        assert!((m.tau(&ex) - m.tau(&x)).norm() < 1e-10);
        assert!(m.norm2(&ex) <= m.norm2(&x) + 1e-12);
        // e_N L(x) e_N = L(E_N x) e_N
        let p = n.projection();
        let lhs = p.dot(&g.left(&x)).dot(p);
        let rhs = g.left(&ex).dot(p);
        assert!(common::close(&lhs, &rhs, 1e-10));
    }
    assert!(common::close(&e.apply(&m.identity()), &m.identity(), 1e-10));
}

#[test]
fn group_algebra_z2() {
    let ga = group_algebra(&cyclic_table(2)).unwrap();
    assert_eq!(ga.algebra.blocks(), &[1, 1]);
    let g = GnsSpace::new(ga.algebra.clone());
    let m = g.algebra();
    for a in 0..2 {
        for b in 0..2 {
            let ip = m.inner(&ga.unitaries[a], &ga.unitaries[b]);
            assert!((ip - r(if a == b { 1.0 } else { 0.0 })).norm() < 1e-12);
        }
    }
    // the generator has spectrum {1, -1}
    let w = eigvalsh(&ga.unitaries[1]).unwrap();
    assert!((w[0] + 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
}

#[test]
fn group_algebra_trivial_and_s3() {
    let triv = group_algebra(&[vec![0]]).unwrap();
    assert_eq!(triv.algebra.blocks(), &[1]);
    let table = symmetric3_table();
    let ga = group_algebra(&table).unwrap();
    assert_eq!(ga.algebra.dim(), 6);
    assert_eq!(ga.algebra.blocks(), &[1, 1, 2]);
    let g = GnsSpace::new(ga.algebra.clone());
    assert_eq!(center(&g).unwrap().dim(), 3);
    let m = g.algebra();
    for a in 0..6 {
        assert!(common::close(&ga.unitaries[a].dot(&dagger(&ga.unitaries[a])), &m.identity(), 1e-10));
        for b in 0..6 {
            let prod = ga.unitaries[a].dot(&ga.unitaries[b]);
            assert!(common::close(&prod, &ga.unitaries[table[a][b]], 1e-10));
            let ip = m.inner(&ga.unitaries[a], &ga.unitaries[b]);
            assert!((ip - r(if a == b { 1.0 } else { 0.0 })).norm() < 1e-10);
        }
    }
}

#[test]
fn invalid_group_tables() {
    assert!(group_algebra(&[vec![0, 1], vec![0, 1]]).is_err());
    assert!(group_algebra(&[vec![0, 2], vec![1, 0]]).is_err());
    assert!(group_algebra(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_tracial(seed in any::<u64>(), which in 0usize..4) {
        let blocks = [vec![1, 1], vec![2], vec![2, 1], vec![3, 1, 2]][which].clone();
        let m = TracialAlgebra::uniform(blocks);
        let mut rng = random::rng(seed);
        let x = m.random_element(&mut rng);
        let y = m.random_element(&mut rng);
        prop_assert!((m.tau(&x.dot(&y)) - m.tau(&y.dot(&x))).norm() < 1e-12);
        prop_assert!(m.tau(&dagger(&x).dot(&x)).re > 0.0);
    }

    #[test]
    fn j_intertwines_left_and_right(seed in any::<u64>()) {
        let g = GnsSpace::new(TracialAlgebra::uniform(vec![2, 1]));
        let mut rng = random::rng(seed);
        let x = g.algebra().random_element(&mut rng);
        prop_assert!(common::close(&g.conj_by_j(&g.left(&x)), &g.right(&dagger(&x)), 1e-12));
    }
}
