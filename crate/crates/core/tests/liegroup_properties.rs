use lieflow::liegroup::{
    discrete_group, mat_exp, mat_log, mollweide_project, polar_rotation, quaternion_to_matrix, sample_prior,
    GroupKind, SubgroupName,
};
use lieflow::rng::substream;
use lieflow::{AlgebraElement, Error, GroupElement, GroupSpec};
use proptest::prelude::*;

/// An algebra element of Frobenius norm `radius` in the direction of `raw`.
fn algebra(spec: GroupSpec, raw: &[f64], radius: f64) -> AlgebraElement {
    let a = AlgebraElement::from_coeffs(spec, &raw[..spec.algebra_dim]).unwrap();
    if a.norm() < 1e-9 {
        AlgebraElement::zero(spec)
    } else {
        a.scale(radius / a.norm())
    }
}

#[test]
fn exp_log_round_trip_on_prior_samples() {
    for kind in GroupKind::ALL {
        let spec = GroupSpec::new(kind);
        let mut rng = substream(21, kind as u64);
        let mut checked = 0;
        for _ in 0..1000 {
            let g = sample_prior(spec, &mut rng);
            match mat_log(&g) {
                Ok(a) => {
                    let back = mat_exp(&a).unwrap();
                    assert!(back.distance(&g) <= 1e-8, "{kind}: {}", back.distance(&g));
                    checked += 1;
                }
                Err(Error::CutLocus { .. } | Error::LogDomain { .. }) => {}
                Err(e) => panic!("{kind}: {e}"),
            }
        }
        assert!(checked > 900, "{kind}: only {checked} in-domain draws");
    }
}

#[test]
fn every_finite_table_is_a_group() {
    for name in [SubgroupName::C4, SubgroupName::D4, SubgroupName::Tet, SubgroupName::Oct, SubgroupName::Ico] {
        let table = discrete_group(name);
        table.verify().unwrap();
        let order = table.elements.len();
        let expected = match name {
            SubgroupName::C4 => 4,
            SubgroupName::D4 => 8,
            SubgroupName::Tet => 12,
            SubgroupName::Oct => 24,
            SubgroupName::Ico => 60,
            SubgroupName::SO2AroundZ => unreachable!(),
        };
        assert_eq!(order, expected, "{name:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn one_parameter_subgroup_law(
        kind in prop::sample::select(GroupKind::ALL.to_vec()),
        raw in prop::collection::vec(-1.0f64..1.0, 8),
        r in 0.0f64..3.0,
        s in -1.0f64..1.0,
        t in -1.0f64..1.0,
    ) {
        let spec = GroupSpec::new(kind);
        let a = algebra(spec, &raw, r);
        prop_assert!(a.norm() <= 3.0 + 1e-12);
        let lhs = mat_exp(&a.scale(s)).unwrap().compose(&mat_exp(&a.scale(t)).unwrap());
        let rhs = mat_exp(&a.scale(s + t)).unwrap();
        prop_assert!(lhs.distance(&rhs) <= 1e-9, "{}", lhs.distance(&rhs));
    }

    #[test]
    fn polar_rotation_is_left_rotation_invariant(
        q in prop::collection::vec(-1.0f64..1.0, 4),
        raw in prop::collection::vec(-1.0f64..1.0, 8),
        planar in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(qn > 1e-3);
        let (rot, g) = if planar {
            let theta = q[0] * std::f64::consts::PI;
            let r = GroupElement::from_real(GroupSpec::GL2R_PLUS, lieflow::liegroup::rotation_2d(theta)).unwrap();
            let g = sample_prior(GroupSpec::GL2R_PLUS, &mut substream(seed, 0));
            (r, g)
        } else {
            let r = quaternion_to_matrix([q[0] / qn, q[1] / qn, q[2] / qn, q[3] / qn]);
            let r = GroupElement::from_real(GroupSpec::SO3, r).unwrap();
            let g = mat_exp(&algebra(GroupSpec::SO3, &raw, 2.0)).unwrap();
            (r, g)
        };
        let spec = rot.spec();
        let lhs = polar_rotation(&rot.compose(&g)).unwrap().embed(spec).unwrap();
        let rhs = rot.compose(&polar_rotation(&g).unwrap().embed(spec).unwrap());
        prop_assert!(lhs.distance(&rhs) <= 1e-8, "{}", lhs.distance(&rhs));
    }

    #[test]
    fn mollweide_is_odd_in_longitude(
        lon in -std::f64::consts::PI..std::f64::consts::PI,
        lat in -std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2,
    ) {
        let (u, v) = mollweide_project(lon, lat);
        let (u2, v2) = mollweide_project(-lon, lat);
        prop_assert!((u + u2).abs() < 1e-12);
        prop_assert!((v - v2).abs() < 1e-12);
    }
}
