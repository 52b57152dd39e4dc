use num_bigint::{BigInt, BigUint};
use zcobs_core::arith::Prime;
use zcobs_core::corpus::{
    bipyramid, fixture, fixtures, run_all, torus7, triangulated_fiber, two_component, TETRAHEDRON,
};
use zcobs_core::fiber::{
    degree_vector, delta_matrix, load_special_fiber, restriction_classes, SpecialFiber,
};
use zcobs_core::kulikov::{
    classify_kulikov, consonance_solve, consonance_solve_with, euler_check, is_sphere,
    minus_one_form_check, replay, triple_point_check, verify_certificate, Conclusion, K3Error,
    KulikovType, SolverOptions, Step,
};
use zcobs_core::obstruction::{compute_obstruction, Status};
use zcobs_core::par::Execution;

fn load(name: &str) -> SpecialFiber {
    fixture(name).unwrap().load().unwrap()
}

fn ints(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn chain(g: &zcobs_core::groups::FiniteAbelianGroup) -> Vec<u64> {
    g.chain().iter().map(|d| u64::try_from(d).unwrap()).collect()
}

fn from_doc(doc: &zcobs_core::document::FiberDocument) -> SpecialFiber {
    SpecialFiber::from_document(doc).unwrap()
}

#[test]
fn every_fixture_matches_its_expectation() {
    for exec in [Execution::Sequential, Execution::Parallel] {
        for outcome in run_all(exec) {
            assert!(outcome.pass, "{outcome}");
        }
    }
}

#[test]
fn every_fiber_fixture_round_trips() {
    for fx in fixtures().iter().filter(|f| f.is_fiber()) {
        let f = fx.load().unwrap();
        let again = load_special_fiber(&f.to_json()).unwrap();
        assert_eq!(f, again, "{}", fx.name);
        assert_eq!(again.to_json(), f.to_json());
    }
}

#[test]
fn quartic_k3_shape() {
    let f = load("quartic_k3");
    assert_eq!(f.components.len(), 9);
    assert_eq!(f.multiplicities(), ints(&[2, 1, 1, 1, 1, 1, 1, 1, 1]));
    let g = f.dual_complex();
    assert_eq!((g.vertices.len(), g.edges.len(), g.faces.len()), (9, 8, 0));
    assert_eq!(g.degree(0), 8);
    assert!((1..9).all(|v| g.neighbours(v) == vec![0]));
}

#[test]
fn quartic_k3_diagonal_class_is_half_the_boundary() {
    let f = load("quartic_k3");
    let r = &restriction_classes(&f).unwrap()[0];
    // Σ over the eight double curves on S of their classes, halved and negated.
    let mut sum = vec![BigInt::from(0); f.components[0].lattice_rank()];
    for d in &f.double_curves {
        for (s, x) in sum.iter_mut().zip(d.class_on(0).unwrap()) {
            *s += x;
        }
    }
    let two = BigInt::from(2);
    assert!(sum.iter().all(|x: &BigInt| (x % &two) == BigInt::from(0)));
    let half: Vec<BigInt> = sum.iter().map(|x: &BigInt| -(x / &two)).collect();
    assert_eq!(r.column(0), half);
}

#[test]
fn quartic_k3_is_not_semistable() {
    assert!(matches!(
        classify_kulikov(&load("quartic_k3")),
        Err(K3Error::NonSemistable { component }) if component == "S"
    ));
}

#[test]
fn persson_pairings_are_even() {
    let f = load("persson");
    let d = delta_matrix(&f).unwrap();
    assert!(d.matrix.mul_vec(&d.multiplicities).iter().all(|x| *x == BigInt::from(0)));
    let pairings: Vec<BigInt> = f.components[0]
        .curves
        .iter()
        .map(|c| f.components[0].pair(c, &f.double_curves[0].class_in_left))
        .collect();
    let g = pairings
        .iter()
        .fold(BigInt::from(0), |acc, x| num_integer::Integer::gcd(&acc, x));
    assert_eq!(g, BigInt::from(2));
}

#[test]
fn persson_report() {
    let r = compute_obstruction(&load("persson")).unwrap();
    assert_eq!(chain(&r.homology.finite_part), vec![2]);
    assert_eq!(r.status, Status::Exact);
    assert_eq!(r.per_prime.len(), 1);
    assert_eq!(chain(&r.per_prime[&BigUint::from(2u32)]), vec![2]);
    for p in [3u64, 5, 7] {
        assert!(r.ell_part(&Prime::try_from(p).unwrap()).is_trivial());
    }
}

#[test]
fn degree_vectors_sum_to_zero_with_multiplicities() {
    for fx in fixtures().iter().filter(|f| f.is_fiber()) {
        let f = fx.load().unwrap();
        let m = f.multiplicities();
        for c in &f.components {
            for curve in &c.curves {
                let deg = degree_vector(&f, &c.id, curve).unwrap();
                let total: BigInt = deg.iter().zip(&m).map(|(d, m)| d * m).sum();
                assert_eq!(total, BigInt::from(0), "{} {}", fx.name, c.id);
            }
        }
    }
}

#[test]
fn degree_vector_on_two_components_and_good_reduction() {
    let f = load("two_component");
    assert_eq!(degree_vector(&f, "A1", &ints(&[1, 0, 0])).unwrap(), ints(&[2, -2]));
    let g = load("good_reduction");
    assert_eq!(degree_vector(&g, "X0", &ints(&[5])).unwrap(), ints(&[0]));
}

#[test]
fn two_component_family_builder() {
    let f = from_doc(&two_component("f", &[3, 9], &[3, 15]));
    let r = compute_obstruction(&f).unwrap();
    assert_eq!(chain(&r.homology.finite_part), vec![3]);
}

#[test]
fn dual_complex_of_tetrahedron() {
    let g = load("tetrahedron_typeIII").dual_complex();
    assert_eq!((g.vertices.len(), g.edges.len(), g.faces.len()), (4, 6, 4));
}

#[test]
fn sphere_recognition() {
    assert!(is_sphere(&load("tetrahedron_typeIII").dual_complex()).is_yes());
    assert!(is_sphere(&load("octahedron_typeIII").dual_complex()).is_yes());
    let torus = from_doc(&triangulated_fiber("torus", &torus7()));
    let g = torus.dual_complex();
    assert_eq!(g.euler_characteristic(), 0);
    assert!(!is_sphere(&g).is_yes());
    assert!(!is_sphere(&load("two_component").dual_complex()).is_yes());
}

#[test]
fn euler_identity() {
    for name in ["tetrahedron_typeIII", "octahedron_typeIII"] {
        let e = euler_check(&load(name)).unwrap();
        assert_eq!(e.value, 12);
        assert!(e.pass && e.degree_mismatches.is_empty());
    }
    let hex = euler_check(&from_doc(&triangulated_fiber("torus", &torus7()))).unwrap();
    assert_eq!(hex.value, 0);
    assert!(!hex.pass);
    assert!(matches!(
        euler_check(&load("two_component")),
        Err(K3Error::MissingCycleData { .. })
    ));
}

#[test]
fn euler_sum_is_twelve_on_every_bipyramid() {
    for k in 3..=9 {
        let f = from_doc(&triangulated_fiber("b", &bipyramid(k)));
        assert!(is_sphere(&f.dual_complex()).is_yes());
        assert_eq!(euler_check(&f).unwrap().value, 12, "k={k}");
    }
}

#[test]
fn classification_of_fixtures() {
    assert_eq!(classify_kulikov(&load("typeII_chain")).unwrap().kind, KulikovType::II);
    assert_eq!(
        classify_kulikov(&load("tetrahedron_typeIII")).unwrap().kind,
        KulikovType::III
    );
    assert_eq!(classify_kulikov(&load("good_reduction")).unwrap().kind, KulikovType::I);
    assert!(matches!(
        classify_kulikov(&load("persson")),
        Err(K3Error::NotKulikov(_))
    ));
    assert!(matches!(
        classify_kulikov(&from_doc(&triangulated_fiber("torus", &torus7()))),
        Err(K3Error::NotKulikov(_))
    ));
}

#[test]
fn minus_one_form() {
    assert!(minus_one_form_check(&load("tetrahedron_typeIII")).unwrap().is_empty());
    let big = from_doc(&triangulated_fiber("b7", &bipyramid(7)));
    let v = minus_one_form_check(&big).unwrap();
    assert_eq!(v.len(), 2);
    assert!(v.iter().all(|x| x.branch.is_none() && x.message.contains("at most 6")));
    assert!(matches!(consonance_solve(&big), Err(K3Error::NotMinusOneForm(_))));
}

#[test]
fn minus_two_branch_is_a_violation() {
    let mut doc = triangulated_fiber("tet", &TETRAHEDRON);
    doc.components[0].anticanonical_cycle.as_mut().unwrap().branches[0].self_intersection =
        Some(BigInt::from(-2).into());
    // Supplied value contradicts the lattice value.
    let v = minus_one_form_check(&from_doc(&doc)).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].component.as_str(), v[0].branch), ("V0", Some(0)));

    // Branch without a double curve and with a supplied square of −2.
    let mut doc = triangulated_fiber("tet", &TETRAHEDRON);
    let b = &mut doc.components[0].anticanonical_cycle.as_mut().unwrap().branches[0];
    b.edge = None;
    b.self_intersection = Some(BigInt::from(-2).into());
    let v = minus_one_form_check(&from_doc(&doc)).unwrap();
    assert_eq!(v.len(), 1);
    assert!(v[0].message.contains("-2"));
}

#[test]
fn branch_square_must_be_known() {
    let mut doc = triangulated_fiber("tet", &TETRAHEDRON);
    let b = &mut doc.components[0].anticanonical_cycle.as_mut().unwrap().branches[0];
    b.edge = None;
    b.self_intersection = None;
    assert!(matches!(
        minus_one_form_check(&from_doc(&doc)),
        Err(K3Error::MissingSelfIntersection { .. })
    ));
}

#[test]
fn triple_point_formula() {
    for r in triple_point_check(&load("typeII_chain")) {
        assert!(r.pass && r.triple_points == 0, "{r:?}");
        assert_eq!(&r.left_square + &r.right_square, BigInt::from(0));
    }
    for r in triple_point_check(&load("tetrahedron_typeIII")) {
        assert!(r.pass);
        assert_eq!(
            (r.left_square.clone(), r.right_square.clone(), r.triple_points),
            (BigInt::from(-1), BigInt::from(-1), 2)
        );
    }
    for r in triple_point_check(&load("two_component")) {
        assert!(r.pass);
    }
    let mut doc = two_component("bad", &[1], &[1]);
    doc.components[1].gram[0][0] = BigInt::from(3).into();
    let r = triple_point_check(&from_doc(&doc));
    assert!(!r[0].pass);
    assert_eq!(r[0].right_square, BigInt::from(3));
}

#[test]
fn type_ii_certificate() {
    let f = load("typeII_chain");
    let cert = consonance_solve(&f).unwrap();
    assert!(cert.is_all_equal());
    assert_eq!(cert.steps.len(), 2);
    assert!(matches!(&cert.steps[0], Step::Anchor { component, .. } if component == "A0"));
    assert!(matches!(&cert.steps[1], Step::ChainRecurrence { component, .. } if component == "A1"));
    assert_eq!(replay(&f, &cert).unwrap(), Conclusion::AllEqual);
    assert!(compute_obstruction(&f).unwrap().is_trivial());
}

#[test]
fn type_ii_without_anchor_never_concludes() {
    let mut doc = load("typeII_chain").to_document();
    doc.components[0].anchored_end = None;
    let f = from_doc(&doc);
    assert_eq!(consonance_solve(&f), Err(K3Error::NoAnchor));
    let opts = SolverOptions {
        allow_missing_anchor: true,
    };
    match consonance_solve_with(&f, opts) {
        Err(K3Error::Stuck {
            frontier,
            certificate,
        }) => {
            assert_eq!(frontier, vec!["A1", "A2"]);
            assert!(!certificate.is_all_equal());
            assert!(verify_certificate(&f, &certificate));
        }
        other => panic!("expected Stuck, got {other:?}"),
    }
    // The linear solutions λᵢ = i·μ satisfy the interior recurrence.
    for mu in 1..5i64 {
        let lambda: Vec<i64> = (0..3).map(|i| i * mu).collect();
        assert_eq!(lambda[2], 2 * lambda[1] - lambda[0]);
    }
}

#[test]
fn type_ii_anchor_at_far_end() {
    let mut doc = load("typeII_chain").to_document();
    doc.components[2].anchored_end = Some(true);
    assert_eq!(consonance_solve(&from_doc(&doc)), Err(K3Error::AmbiguousAnchor));
    doc.components[0].anchored_end = None;
    let cert = consonance_solve(&from_doc(&doc)).unwrap();
    assert!(matches!(&cert.steps[0], Step::Anchor { component, .. } if component == "A2"));
}

#[test]
fn type_iii_certificates() {
    for name in ["tetrahedron_typeIII", "octahedron_typeIII"] {
        let f = load(name);
        let cert = consonance_solve(&f).unwrap();
        assert!(cert.is_all_equal());
        assert_eq!(cert.seed.as_deref(), Some("V0"));
        assert!(matches!(&cert.steps[0], Step::SeedBySmallN { component, .. } if component == "V0"));
        assert!(verify_certificate(&f, &cert));
        assert!(compute_obstruction(&f).unwrap().is_trivial());
    }
}

#[test]
fn all_hexagon_sphere_like_input_has_no_seed() {
    // Torus triangulation: not a sphere, so classification refuses it first.
    let f = from_doc(&triangulated_fiber("torus", &torus7()));
    assert!(matches!(consonance_solve(&f), Err(K3Error::NotKulikov(_))));
}

#[test]
fn deleting_cycle_data_is_reported() {
    let mut doc = triangulated_fiber("tet", &TETRAHEDRON);
    doc.components[2].anticanonical_cycle = None;
    let f = from_doc(&doc);
    assert!(matches!(
        consonance_solve(&f),
        Err(K3Error::MissingCycleData { component }) if component == "V2"
    ));
}

#[test]
fn tampered_certificates_fail_replay() {
    // On the tetrahedron the seed alone reaches every component.
    let f = load("tetrahedron_typeIII");
    let mut cert = consonance_solve(&f).unwrap();
    assert_eq!(cert.steps.len(), 1);
    cert.steps.clear();
    assert!(!verify_certificate(&f, &cert));

    let f = load("octahedron_typeIII");
    let mut cert = consonance_solve(&f).unwrap();
    assert!(cert.steps.len() > 1);
    cert.steps.remove(0);
    assert!(replay(&f, &cert).is_err());
    let mut cert = consonance_solve(&f).unwrap();
    cert.steps.truncate(1);
    assert!(!verify_certificate(&f, &cert));

    let g = load("typeII_chain");
    let mut cert = consonance_solve(&g).unwrap();
    cert.steps.remove(0);
    assert!(replay(&g, &cert).is_err());
}

#[test]
fn certificates_serialize_deterministically() {
    let f = load("octahedron_typeIII");
    let a = consonance_solve(&f).unwrap().to_json();
    let b = consonance_solve(&f).unwrap().to_json();
    assert_eq!(a, b);
    let back: zcobs_core::kulikov::ConsonanceCertificate = serde_json::from_str(&a).unwrap();
    assert!(verify_certificate(&f, &back));
}
