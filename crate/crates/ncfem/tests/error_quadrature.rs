//! Reported errors must not be dominated by the quadrature used to compute them.

use ncfem::solver::{decoupled_solve, Method, SolverConfig};
use ncfem::study::solution_errors;
use ncfem_core::assembly::Discretization;
use ncfem_core::errors::{compute_error, ErrorKind};
use ncfem_core::interp::FeFunction;
use ncfem_core::manufactured::{layer_case_fields, smooth_case_fields};
use ncfem_core::mesh::build_unit_cube_mesh;
use ncfem_core::SpaceTag;

#[test]
fn degree_eight_and_ten_agree_on_n4() {
    let d = Discretization::new(build_unit_cube_mesh(4).unwrap()).unwrap();
    for (eps, case, method) in [(1e-4, smooth_case_fields(1e-4), Method::Interp), (1e-6, layer_case_fields(), Method::NoInterp)] {
        let sol = decoupled_solve(&case.f, &d, &SolverConfig { epsilon: eps, method, ..Default::default() }).unwrap();
        let e8 = solution_errors(&d, &sol, &case, 8).unwrap();
        let e10 = solution_errors(&d, &sol, &case, 10).unwrap();
        for (a, b) in e8.iter().zip(&e10) {
            assert!((a - b).abs() <= 1e-3 * b, "{e8:?} vs {e10:?}");
        }
    }
}

#[test]
fn zero_function_has_the_norm_of_u0() {
    let d = Discretization::new(build_unit_cube_mesh(2).unwrap()).unwrap();
    let zero = FeFunction::zeros(&d, SpaceTag::Grad);
    let e = compute_error(ErrorKind::L2Scalar, &d, &zero, &layer_case_fields().u, 8).unwrap();
    assert!((e - 0.125f64.sqrt()).abs() < 1e-6, "{e}");
}
