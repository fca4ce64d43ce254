use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ncfem::solver::{decoupled_solve, solve_cg, solve_saddle, solve_spd, Method, SaddleBlocks, SolverConfig, SpdSolver};
use ncfem::verify::check_solution_identities;
use ncfem_core::assembly::{assemble_bilinear, assemble_load, Discretization, FormKind, LoadData, LoadKind, QuadDegrees};
use ncfem_core::manufactured::{layer_case_fields, smooth_case_fields};
use ncfem_core::mesh::build_unit_cube_mesh;
use ncfem_core::sparse::{norm2, CsrMatrix};
use ncfem_core::SpaceTag;

fn disc(n: usize) -> Discretization {
    Discretization::new(build_unit_cube_mesh(n).unwrap()).unwrap()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    norm2(&r) / norm2(b)
}

#[test]
fn p2_poisson_reaches_tolerance() {
    let d = disc(2);
    let q = QuadDegrees::default();
    let k = assemble_bilinear(FormKind::PoissonP2, &d, 0.0, &q).unwrap().matrix;
    let f = layer_case_fields().f;
    let b = assemble_load(LoadKind::FVsP2, &d, LoadData::Field(&f), &q).unwrap();
    for spd_solver in [SpdSolver::Cg, SpdSolver::Direct] {
        let (x, stats) = solve_spd(&k, &b, &SolverConfig { spd_solver, ..Default::default() }).unwrap();
        assert!(relative_residual(&k, &x, &b) <= 1e-12, "{spd_solver:?} {stats:?}");
    }
}

/// Builds the right-hand side from a known solution and recovers it.
#[test]
fn saddle_recovers_manufactured_solution() {
    let d = disc(2);
    let q = QuadDegrees::default();
    let eps = 1e-2;
    let a = assemble_bilinear(FormKind::InterpA, &d, eps, &q).unwrap().matrix;
    let c = assemble_bilinear(FormKind::CurlCoupling, &d, eps, &q).unwrap().matrix;
    let dv = assemble_bilinear(FormKind::DivCoupling, &d, eps, &q).unwrap().matrix;
    let vol = d.cell_volumes();
    let blocks = SaddleBlocks { a: &a, c: &c, d: &dv, mean_weights: &vol };
    let (nphi, nq, np) = blocks.sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi: Vec<f64> = (0..nphi).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda: Vec<f64> = (0..nq).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = lambda.iter().zip(&vol).map(|(l, v)| l * v).sum::<f64>() / vol.iter().sum::<f64>();
    lambda.iter_mut().for_each(|l| *l -= mean);
    let p: Vec<f64> = (0..np).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x: Vec<f64> = phi.iter().chain(&lambda).chain(&p).copied().chain([0.0]).collect();
    let rhs = blocks.matrix().mul_vec(&x);
    let sol = solve_saddle(&blocks, &rhs[..nphi], &rhs[nphi..nphi + nq], &rhs[nphi + nq..nphi + nq + np], &SolverConfig::default()).unwrap();
    let gap = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap(&sol.phi, &phi) <= 1e-8, "phi off by {}", gap(&sol.phi, &phi));
    assert!(gap(&sol.lambda, &lambda) <= 1e-8);
    assert!(gap(&sol.p, &p) <= 1e-8);
    assert!(sol.stats.relative_residual <= 1e-10);
}

#[test]
fn tiny_epsilon_factorizes() {
    let d = disc(2);
    let case = layer_case_fields();
    let cfg = SolverConfig { epsilon: 1e-10, ..Default::default() };
    let sol = decoupled_solve(&case.f, &d, &cfg).unwrap();
    assert!(sol.diagnostics.saddle.relative_residual <= 1e-10, "{:?}", sol.diagnostics.saddle);
    let ids = check_solution_identities(&d, &sol, "eps=1e-10").unwrap();
    assert!(ids.iter().all(|e| e.passed()), "{ids:#?}");
}

#[test]
fn identities_hold_for_both_methods() {
    let d = disc(4);
    for (method, count) in [(Method::Interp, 5), (Method::NoInterp, 2)] {
        let cfg = SolverConfig { epsilon: 1.0, method, ..Default::default() };
        let sol = decoupled_solve(&smooth_case_fields(1.0).f, &d, &cfg).unwrap();
        let ids = check_solution_identities(&d, &sol, method.name()).unwrap();
        assert_eq!(ids.len(), count);
        assert!(ids.iter().all(|e| e.passed()), "{ids:#?}");
    }
}

#[test]
fn stage_failures_are_annotated() {
    let d = disc(2);
    let cfg = SolverConfig { max_cg_iterations: 2, ..Default::default() };
    let err = decoupled_solve(&layer_case_fields().f, &d, &cfg).unwrap_err().to_string();
    assert!(err.contains("poisson for w") && err.contains("last residuals"), "{err}");
    let bad = SolverConfig { epsilon: -1.0, ..Default::default() };
    assert_eq!(decoupled_solve(&layer_case_fields().f, &d, &bad).unwrap_err().exit_code(), 2);
}

#[test]
fn dof_counts_match_interior_entities() {
    let d = disc(2);
    let c = d.mesh.interior_counts();
    assert_eq!(d.ndofs(SpaceTag::Phi), 2 * c.edges + c.faces);
    assert_eq!(d.ndofs(SpaceTag::W), c.vertices + c.edges + c.faces);
    assert_eq!(d.ndofs(SpaceTag::Div), c.faces);
}

fn tridiagonal(diag: &[f64]) -> CsrMatrix {
    let n = diag.len();
    let rows = (0..n)
        .map(|i| {
            let mut r = Vec::new();
            if i > 0 {
                r.push((i - 1, -1.0));
            }
            r.push((i, diag[i]));
            if i + 1 < n {
                r.push((i + 1, -1.0));
            }
            r
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Diagonally dominant tridiagonal systems: both SPD solvers agree.
    #[test]
    fn spd_solvers_agree(diag in prop::collection::vec(2.0f64..10.0, 1..40), seed in any::<u64>()) {
        let a = tridiagonal(&diag);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..diag.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assume!(norm2(&b) > 1e-3);
        let (x_cg, _) = solve_cg(&a, &b, 1e-13, 1000).unwrap();
        let (x_direct, _) = solve_spd(&a, &b, &SolverConfig { spd_solver: SpdSolver::Direct, ..Default::default() }).unwrap();
        let gap = x_cg.iter().zip(&x_direct).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-10 * norm2(&x_direct).max(1.0));
    }
}
