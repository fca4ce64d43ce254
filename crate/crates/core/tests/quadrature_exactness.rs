use ncfem_core::quadrature::{get_rule, multi_indices, simplex_monomial_integral, EntityKind};

fn integrate(kind: EntityKind, degree: usize, alpha: &[usize]) -> f64 {
    let rule = get_rule(kind, degree).unwrap();
    rule.iter().map(|(p, w)| w * p.iter().zip(alpha).map(|(l, &a)| l.powi(a as i32)).product::<f64>()).sum()
}

#[test]
fn every_rule_integrates_every_monomial_up_to_its_degree() {
    for (kind, parts, max) in [(EntityKind::Edge, 2, 15), (EntityKind::Triangle, 3, 10), (EntityKind::Tet, 4, 12)] {
        for degree in 0..=max {
            let mut worst: f64 = 0.0;
            for alpha in multi_indices(parts, degree) {
                let exact = simplex_monomial_integral(&alpha);
                worst = worst.max((integrate(kind, degree, &alpha) - exact).abs() / exact);
            }
            assert!(worst <= 1e-12, "{kind:?} degree {degree}: relative error {worst:e}");
        }
    }
}

#[test]
fn weights_sum_to_one() {
    for kind in [EntityKind::Edge, EntityKind::Triangle, EntityKind::Tet] {
        for degree in 0..=10 {
            let s: f64 = get_rule(kind, degree).unwrap().weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "{kind:?} {degree}: {s}");
        }
    }
}

#[test]
fn unsupported_degree_is_a_capability_error() {
    assert!(matches!(get_rule(EntityKind::Tet, 13), Err(ncfem_core::FemError::Capability(_))));
    assert!(matches!(get_rule(EntityKind::Triangle, 11), Err(ncfem_core::FemError::Capability(_))));
}
