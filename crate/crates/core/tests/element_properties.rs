use nalgebra::DMatrix;
use proptest::prelude::*;

use ncfem_core::elements::{apply_dofs, local_nodal_basis, unisolvence_check, BasisField, ElementKind, UNISOLVENCE_LIMIT};
use ncfem_core::mesh::TetGeometry;
use ncfem_core::Vec3;

const KINDS: [ElementKind; 6] =
    [ElementKind::LagrangeP2, ElementKind::Nedelec2, ElementKind::Rt0, ElementKind::P0, ElementKind::PhiNc, ElementKind::WNc];

/// Perturbed regular tetrahedron; perturbations of at most 0.3 keep it shape regular.
fn tet() -> impl Strategy<Value = TetGeometry> {
    (prop::array::uniform12(-0.3f64..0.3), 0.1f64..3.0, prop::array::uniform3(-5.0f64..5.0), Just([0usize, 1, 2, 3]).prop_shuffle())
        .prop_map(|(d, s, shift, ids)| {
            let base = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
            let v = std::array::from_fn(|i| {
                Vec3::new(base[i][0] + d[3 * i], base[i][1] + d[3 * i + 1], base[i][2] + d[3 * i + 2]) * s + Vec3::from(shift)
            });
            TetGeometry::new(0, v, [ids[0], ids[1], ids[2], ids[3]]).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elements_are_unisolvent(g in tet()) {
        for kind in KINDS {
            let cond = unisolvence_check(kind, &g).unwrap();
            prop_assert!(cond < UNISOLVENCE_LIMIT, "{:?}: {}", kind, cond);
        }
    }

    #[test]
    fn nodal_basis_is_dual_to_dofs(g in tet()) {
        for kind in KINDS {
            let basis = local_nodal_basis(kind, &g, 0).unwrap();
            let m = apply_dofs(kind, &g, &BasisField { basis: &basis, geom: &g }).unwrap();
            let gap = (&m - DMatrix::identity(m.nrows(), m.ncols())).amax();
            prop_assert!(gap < 1e-9, "{:?}: {}", kind, gap);
        }
    }
}

#[test]
fn flat_tet_is_rejected() {
    let v = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
    assert!(TetGeometry::new(0, v, [0, 1, 2, 3]).is_err());
}
