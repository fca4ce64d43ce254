//! Numerical certification of the discrete complex and of solved systems.
//!
//! Every check produces a [`CheckEntry`] carrying the measured quantity and
//! the tolerance it was held to. Failing checks are entries, not errors.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ncfem_core::assembly::{assemble_bilinear, Discretization, FormKind, QuadDegrees};
use ncfem_core::elements::{apply_dofs, unisolvence_check, BasisField, CurlOf, ElementKind, GradientOf};
use ncfem_core::interp::{diff_operator_matrix, interpolate_with, FeFunction, OperatorKind};
use ncfem_core::manufactured::AnalyticField;
use ncfem_core::mesh::{build_unit_cube_mesh, TetGeometry};
use ncfem_core::quadrature::{get_rule, EntityKind};
use ncfem_core::elements::DofQuadrature;
use ncfem_core::sparse::{norm2, CsrMatrix};
use ncfem_core::{FemError, SpaceTag, Vec3};

use crate::error::Result;
use crate::solver::{solve_spd, DecoupledSolution, Method, SolverConfig, SpdSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub level: Option<usize>,
    pub status: Status,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckEntry {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: impl Into<String>, level: Option<usize>, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        let status = if measured.is_finite() && measured <= tolerance { Status::Pass } else { Status::Fail };
        CheckEntry { name: name.into(), level, status, measured, tolerance, detail: detail.into() }
    }

    /// Passes when two integers agree; `measured` is their difference.
    pub fn equal(name: impl Into<String>, level: Option<usize>, got: usize, want: usize) -> Self {
        let status = if got == want { Status::Pass } else { Status::Fail };
        let diff = (got as f64 - want as f64).abs();
        CheckEntry { name: name.into(), level, status, measured: diff, tolerance: 0.0, detail: format!("got {got}, expected {want}") }
    }

    pub fn skipped(name: impl Into<String>, level: Option<usize>, reason: impl Into<String>) -> Self {
        CheckEntry { name: name.into(), level, status: Status::Skipped, measured: f64::NAN, tolerance: f64::NAN, detail: reason.into() }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CertificationReport {
    pub entries: Vec<CheckEntry>,
    /// Wall time; left out in reproducible runs.
    pub seconds: Option<f64>,
}

impl CertificationReport {
    pub fn extend(&mut self, entries: impl IntoIterator<Item = CheckEntry>) {
        self.entries.extend(entries);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(CheckEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let level = e.level.map(|n| format!("n={n}")).unwrap_or_else(|| "-".into());
            let status = match e.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            let _ = writeln!(s, "{status} {:<52} {level:<5} measured {:<12.4e} tol {:<10.1e} {}", e.name, e.measured, e.tolerance, e.detail);
        }
        let passed = self.entries.iter().filter(|e| e.status == Status::Pass).count();
        let failed = self.failures().count();
        let _ = writeln!(s, "{passed} passed, {failed} failed, {} skipped", self.entries.len() - passed - failed);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Finest mesh level on which the dense rank checks run.
pub const DENSE_RANK_MAX_LEVEL: usize = 2;

fn rank(m: &CsrMatrix) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.to_dense().singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&s| s > 1e-8 * smax).count()
}

/// Composition, injectivity and rank identities of `W -> Phi -> V^div -> Q`.
pub fn check_complex(disc: &Discretization, level: usize) -> Result<Vec<CheckEntry>> {
    let grad = diff_operator_matrix(OperatorKind::Grad, disc)?.matrix;
    let curl = diff_operator_matrix(OperatorKind::Curl, disc)?.matrix;
    let div = diff_operator_matrix(OperatorKind::Div, disc)?.matrix;
    let lv = Some(level);
    let mut out = vec![
        CheckEntry::at_most("curl . grad = 0", lv, curl.matmul(&grad).max_abs(), 1e-12, "max entry of the sparse product"),
        CheckEntry::at_most("div . curl = 0", lv, div.matmul(&curl).max_abs(), 1e-12, "max entry of the sparse product"),
    ];
    if level > DENSE_RANK_MAX_LEVEL {
        let cols = grad.ncols().max(curl.ncols()).max(div.ncols());
        return Err(FemError::Capability(format!(
            "dense rank checks are limited to n <= {DENSE_RANK_MAX_LEVEL}; n={level} would need SVDs with {cols} columns"
        ))
        .into());
    }
    let c = disc.mesh.interior_counts();
    let (rg, rc, rd) = (rank(&grad), rank(&curl), rank(&div));
    out.push(CheckEntry::equal("rank(grad) = dim W_h", lv, rg, disc.ndofs(SpaceTag::W)));
    out.push(CheckEntry::equal("rank(curl) = |E_int| - |V_int|", lv, rc, c.edges - c.vertices));
    out.push(CheckEntry::equal("rank(curl) = dim Phi_h - dim W_h", lv, rc, disc.ndofs(SpaceTag::Phi) - disc.ndofs(SpaceTag::W)));
    out.push(CheckEntry::equal("rank(div) = dim Q_h - 1", lv, rd, disc.ndofs(SpaceTag::Q) - 1));
    out.push(CheckEntry::equal("nullity(div) = rank(curl)", lv, disc.ndofs(SpaceTag::Div) - rd, rc));
    Ok(out)
}

/// `x^a y^b z^c` with its gradient.
fn scalar_monomial(a: u32, b: u32, c: u32) -> AnalyticField {
    fn p(x: f64, k: u32) -> f64 {
        if k == 0 { 1.0 } else { x.powi(k as i32) }
    }
    fn dp(x: f64, k: u32) -> f64 {
        if k == 0 { 0.0 } else { k as f64 * p(x, k - 1) }
    }
    AnalyticField::scalar(format!("x^{a} y^{b} z^{c}"), move |x| p(x[0], a) * p(x[1], b) * p(x[2], c)).with_gradient(move |x| {
        Vec3::new(dp(x[0], a) * p(x[1], b) * p(x[2], c), p(x[0], a) * dp(x[1], b) * p(x[2], c), p(x[0], a) * p(x[1], b) * dp(x[2], c))
    })
}

/// Exponents of all monomials in three variables of degree at most `d`.
pub fn exponents(d: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for s in 0..=d {
        for a in (0..=s).rev() {
            for b in (0..=s - a).rev() {
                out.push((a, b, s - a - b));
            }
        }
    }
    out
}

/// Scalar `P3` basis of monomials.
pub fn p3_scalar_basis() -> Vec<AnalyticField> {
    exponents(3).into_iter().map(|(a, b, c)| scalar_monomial(a, b, c)).collect()
}

/// Vector `P3` basis: each scalar monomial in each component, with Jacobians.
pub fn p3_vector_basis() -> Vec<AnalyticField> {
    let mut out = Vec::new();
    for m in p3_scalar_basis() {
        for k in 0..3 {
            let (v, g) = (m.clone(), m.clone());
            let field = AnalyticField::vector(format!("{} e{k}", m.tag), move |x| {
                let mut r = Vec3::zeros();
                r[k] = v.value(x).expect("value");
                r
            })
            .with_jacobian(move |x| {
                let gr = g.gradient(x).expect("gradient");
                let mut j = Matrix3::zeros();
                j.set_row(k, &gr.transpose());
                j
            });
            out.push(field);
        }
    }
    out
}

fn column(m: &DMatrix<f64>) -> DVector<f64> {
    m.column(0).into_owned()
}

fn relative_gap(got: &DVector<f64>, want: &DVector<f64>) -> f64 {
    (got - want).amax() / want.amax().max(1.0)
}

/// Shape-regular tetrahedra: perturbed regular tets with random scale,
/// rotation-free translation and quality `6 sqrt(2) V / l_max^3 >= 0.2`.
pub fn random_tets(count: usize, seed: u64) -> Vec<TetGeometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, -1.0, -1.0), Vec3::new(-1.0, 1.0, -1.0), Vec3::new(-1.0, -1.0, 1.0)];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let scale = rng.gen_range(0.05..2.0);
        let shift = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let v = base.map(|b| (b + Vec3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4))) * scale + shift);
        let mut ids = [0usize, 1, 2, 3];
        for i in (1..4).rev() {
            ids.swap(i, rng.gen_range(0..=i));
        }
        let Ok(g) = TetGeometry::new(out.len(), v, ids) else { continue };
        let lmax = g.edge_lengths.iter().cloned().fold(0.0, f64::max);
        if 6.0 * 2f64.sqrt() * g.volume / lmax.powi(3) >= 0.2 {
            out.push(g);
        }
    }
    out
}

/// Largest condition number of the `Phi` and `W` DoF matrices over random tets.
pub fn check_unisolvence(count: usize, seed: u64) -> Vec<CheckEntry> {
    [ElementKind::PhiNc, ElementKind::WNc]
        .into_iter()
        .map(|kind| {
            let mut worst: f64 = 0.0;
            let mut failures = 0;
            for g in random_tets(count, seed) {
                match unisolvence_check(kind, &g) {
                    Ok(c) => worst = worst.max(c),
                    Err(_) => failures += 1,
                }
            }
            let measured = if failures > 0 { f64::INFINITY } else { worst };
            CheckEntry::at_most(
                format!("{kind:?} unisolvent on {count} random tets"),
                None,
                measured,
                ncfem_core::elements::UNISOLVENCE_LIMIT,
                format!("largest 1-norm condition number; {failures} singular"),
            )
        })
        .collect()
}

/// Per-element commuting identities on one tet, as the largest relative gap.
fn local_commuting(g: &TetGeometry, label: usize) -> Result<[f64; 3]> {
    let w = ncfem_core::elements::local_nodal_basis(ElementKind::WNc, g, label)?;
    let phi = ncfem_core::elements::local_nodal_basis(ElementKind::PhiNc, g, label)?;
    let wf = BasisField { basis: &w, geom: g };
    let pf = BasisField { basis: &phi, geom: g };
    let grad_w_dofs = apply_dofs(ElementKind::PhiNc, g, &GradientOf(&wf))?;
    let curl_phi_dofs = apply_dofs(ElementKind::Rt0, g, &CurlOf(&pf))?;
    let nd_phi_dofs = apply_dofs(ElementKind::Nedelec2, g, &pf)?;
    let mut gaps = [0.0f64; 3];
    for v in p3_scalar_basis() {
        let iw = column(&apply_dofs(ElementKind::WNc, g, &v)?);
        let lhs = &grad_w_dofs * iw;
        let rhs = column(&apply_dofs(ElementKind::PhiNc, g, &v.gradient_field()?)?);
        gaps[0] = gaps[0].max(relative_gap(&lhs, &rhs));
    }
    for v in p3_vector_basis() {
        let ip = column(&apply_dofs(ElementKind::PhiNc, g, &v)?);
        let lhs = &curl_phi_dofs * &ip;
        let rhs = column(&apply_dofs(ElementKind::Rt0, g, &v.curl_field()?)?);
        gaps[1] = gaps[1].max(relative_gap(&lhs, &rhs));
        let lhs = &nd_phi_dofs * &ip;
        let rhs = column(&apply_dofs(ElementKind::Nedelec2, g, &v)?);
        gaps[2] = gaps[2].max(relative_gap(&lhs, &rhs));
    }
    Ok(gaps)
}

/// `b(x) = x(1-x) y(1-y) z(1-z)`, which has zero boundary DoFs in every space.
fn cube_bubble() -> AnalyticField {
    let q = |t: f64| t * (1.0 - t);
    let dq = |t: f64| 1.0 - 2.0 * t;
    AnalyticField::scalar("cube bubble", move |x| q(x[0]) * q(x[1]) * q(x[2]))
        .with_gradient(move |x| Vec3::new(dq(x[0]) * q(x[1]) * q(x[2]), q(x[0]) * dq(x[1]) * q(x[2]), q(x[0]) * q(x[1]) * dq(x[2])))
        .with_hessian(move |x| {
            let (v, d) = ([q(x[0]), q(x[1]), q(x[2])], [dq(x[0]), dq(x[1]), dq(x[2])]);
            Matrix3::from_fn(|i, j| {
                (0..3)
                    .map(|k| match ((k == i) as u8 + (k == j) as u8, i == j) {
                        (0, _) => v[k],
                        (1, _) => d[k],
                        _ => -2.0,
                    })
                    .product()
            })
        })
}

/// Commuting identities on `P3` fields per element, then globally on a mesh.
pub fn check_commuting(disc: &Discretization, level: usize, random: usize, seed: u64) -> Result<Vec<CheckEntry>> {
    let mut tets = vec![TetGeometry::reference()];
    tets.extend(random_tets(random, seed));
    tets.extend(disc.geometry.iter().take(6).cloned());
    let mut gaps = [0.0f64; 3];
    for (i, g) in tets.iter().enumerate() {
        let l = local_commuting(g, i)?;
        for k in 0..3 {
            gaps[k] = gaps[k].max(l[k]);
        }
    }
    let count = tets.len();
    let mut out = vec![
        CheckEntry::at_most("local grad(I^W v) = I^Phi(grad v)", None, gaps[0], 1e-10, format!("P3 basis on {count} tets")),
        CheckEntry::at_most("local curl(I^Phi v) = I^RT(curl v)", None, gaps[1], 1e-10, format!("P3 basis on {count} tets")),
        CheckEntry::at_most("local ind(I^Phi v) = I^ND v", None, gaps[2], 1e-10, format!("P3 basis on {count} tets")),
    ];

    // Global identities on fields with vanishing boundary DoFs. The bubble has
    // degree 6, so the DoF integrals use raised quadrature.
    let q = DofQuadrature { edge: 9, triangle: 9, tet: 10 };
    let b = cube_bubble();
    let grad = diff_operator_matrix(OperatorKind::Grad, disc)?;
    let iw = interpolate_with(disc, SpaceTag::W, &b, q)?;
    let lhs = grad.apply(&iw)?;
    let rhs = interpolate_with(disc, SpaceTag::Phi, &b.gradient_field()?, q)?;
    out.push(CheckEntry::at_most("global Grad I^W b = I^Phi grad b", Some(level), max_gap(&lhs, &rhs), 1e-10, "interior DoFs"));

    let dir = Vec3::new(1.0, -2.0, 0.5);
    let bb = b.clone();
    let hb = b.clone();
    let v = AnalyticField::vector("bubble * d", move |x| dir * bb.value(x).expect("value")).with_jacobian(move |x| {
        let g = hb.gradient(x).expect("gradient");
        dir * g.transpose()
    });
    let curl = diff_operator_matrix(OperatorKind::Curl, disc)?;
    let ip = interpolate_with(disc, SpaceTag::Phi, &v, q)?;
    let lhs = curl.apply(&ip)?;
    let rhs = interpolate_with(disc, SpaceTag::Div, &v.curl_field()?, q)?;
    out.push(CheckEntry::at_most("global Curl I^Phi v = I^RT curl v", Some(level), max_gap(&lhs, &rhs), 1e-10, "interior DoFs"));
    let ind = diff_operator_matrix(OperatorKind::Ind, disc)?;
    let lhs = ind.apply(&ip)?;
    let rhs = interpolate_with(disc, SpaceTag::Nd, &v, q)?;
    out.push(CheckEntry::at_most("global Ind I^Phi v = I^ND v", Some(level), max_gap(&lhs, &rhs), 1e-10, "interior DoFs"));
    Ok(out)
}

fn max_gap(a: &FeFunction, b: &FeFunction) -> f64 {
    let scale = b.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.coeffs.iter().zip(&b.coeffs).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Largest `|int_F [psi]|` over interior faces for random `psi` in `Phi_h`.
pub fn weak_continuity_defect(disc: &Discretization, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = get_rule(EntityKind::Triangle, 4)?;
    let mesh = &disc.mesh;
    let bases = (0..disc.num_tets()).map(|t| disc.local_basis(SpaceTag::Phi, t)).collect::<ncfem_core::error::Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let coeffs: Vec<f64> = (0..disc.ndofs(SpaceTag::Phi)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let psi = FeFunction::new(disc, SpaceTag::Phi, coeffs)?;
        let locals: Vec<Vec<f64>> = (0..disc.num_tets()).map(|t| psi.local_coeffs(disc, t)).collect();
        for (f, &(t1, t2)) in mesh.face_tets.iter().enumerate() {
            let Some(t2) = t2 else { continue };
            let [a, b, c] = mesh.faces[f].map(|v| mesh.vertices[v]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            let mut jump = Vec3::zeros();
            for (p, w) in rule.iter() {
                let x = a * p[0] + b * p[1] + c * p[2];
                for (t, sign) in [(t1, 1.0), (t2, -1.0)] {
                    let g = &disc.geometry[t];
                    let basis = &bases[t];
                    let (mut o, mut s) = basis.new_buffers();
                    basis.eval(g, &g.barycentric(&x), &mut o, &mut s);
                    for (j, cj) in locals[t].iter().enumerate() {
                        jump += Vec3::new(o.values[3 * j], o.values[3 * j + 1], o.values[3 * j + 2]) * (sign * w * area * cj);
                    }
                }
            }
            worst = worst.max(jump.amax());
        }
    }
    Ok(worst)
}

pub fn check_weak_continuity(disc: &Discretization, level: usize, samples: usize, seed: u64) -> Result<CheckEntry> {
    let d = weak_continuity_defect(disc, samples, seed)?;
    Ok(CheckEntry::at_most("weak continuity of Phi_h", Some(level), d, 1e-10, format!("max |int_F [psi]| over {samples} random psi")))
}

/// Subdivision count of a structured cube mesh with `6 n^3` tets.
pub fn cube_level(disc: &Discretization) -> usize {
    ((disc.num_tets() / 6) as f64).cbrt().round() as usize
}

fn volume_weighted_norm(disc: &Discretization, cellwise: &[f64]) -> f64 {
    disc.geometry.iter().zip(cellwise).map(|(g, v)| g.volume * v * v).sum::<f64>().sqrt()
}

fn energy_norm(m: &CsrMatrix, x: &[f64]) -> f64 {
    let mx = m.mul_vec(x);
    x.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// The identities that hold for a computed solution.
///
/// All four norms are compared with `1e-8` times the data scale, the larger of
/// the load vector norms and `||grad w_h||_0`.
pub fn check_solution_identities(disc: &Discretization, sol: &DecoupledSolution, label: &str) -> Result<Vec<CheckEntry>> {
    let q = QuadDegrees::default();
    let level = Some(cube_level(disc));
    let k = assemble_bilinear(FormKind::PoissonP2, disc, 0.0, &q)?.matrix;
    let scale = sol.diagnostics.rhs_scale.max(energy_norm(&k, &sol.w.coeffs));
    let tol = 1e-8 * scale;
    let name = |s: &str| format!("{label}: {s}");
    let mut out = vec![CheckEntry::at_most(name("||lambda_h||_0"), level, volume_weighted_norm(disc, &sol.lambda.coeffs), tol, format!("scale {scale:.3e}"))];

    let curl = diff_operator_matrix(OperatorKind::Curl, disc)?.apply(&sol.phi)?;
    let rt_mass = assemble_bilinear(FormKind::RtMass, disc, 0.0, &q)?.matrix;
    out.push(CheckEntry::at_most(name("||curl phi_h||_0"), level, energy_norm(&rt_mass, &curl.coeffs), tol, ""));

    if sol.method == Method::Interp {
        let div = diff_operator_matrix(OperatorKind::Div, disc)?.apply(&sol.p)?;
        out.push(CheckEntry::at_most(name("||div p_h||_0"), level, volume_weighted_norm(disc, &div.coeffs), tol, ""));
        let ind = diff_operator_matrix(OperatorKind::Ind, disc)?.apply(&sol.phi)?;
        let gu = diff_operator_matrix(OperatorKind::GradP2, disc)?.apply(&sol.u)?;
        let diff: Vec<f64> = ind.coeffs.iter().zip(&gu.coeffs).map(|(a, b)| a - b).collect();
        let nd_mass = assemble_bilinear(FormKind::NdMass, disc, 0.0, &q)?.matrix;
        out.push(CheckEntry::at_most(name("||I^ND phi_h - grad u_h||_0"), level, energy_norm(&nd_mass, &diff), tol, ""));
        out.push(in_gradient_range(disc, &sol.phi, &name("phi_h in grad W_h"), level)?);
    }
    Ok(out)
}

/// Least-squares residual of `grad w = phi` relative to `|phi|`.
fn in_gradient_range(disc: &Discretization, phi: &FeFunction, name: &str, level: Option<usize>) -> Result<CheckEntry> {
    let g = diff_operator_matrix(OperatorKind::Grad, disc)?.matrix;
    let gt = g.transpose();
    let normal = gt.matmul(&g);
    let rhs = gt.mul_vec(&phi.coeffs);
    let cfg = SolverConfig { spd_solver: SpdSolver::Direct, spd_tol: 1e-12, ..Default::default() };
    let (w, _) = solve_spd(&normal, &rhs, &cfg)?;
    let gw = g.mul_vec(&w);
    let r: Vec<f64> = gw.iter().zip(&phi.coeffs).map(|(a, b)| a - b).collect();
    let rel = norm2(&r) / norm2(&phi.coeffs).max(1e-300);
    Ok(CheckEntry::at_most(name, level, rel, 1e-8, "relative least-squares residual"))
}

fn dense_spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Discrete inf-sup constant of `b_h` for one `epsilon`, by a dense
/// generalized eigenproblem. The trial norm is `||.||_{eps,h}` on `Phi_h`
/// and `L^2` on `Q_h`; the test norm is the `H(div)` norm.
pub fn infsup_constant(disc: &Discretization, epsilon: f64) -> Result<Option<f64>> {
    let q = QuadDegrees::default();
    let a = assemble_bilinear(FormKind::InterpA, disc, epsilon, &q)?.matrix.to_dense();
    let c = assemble_bilinear(FormKind::CurlCoupling, disc, epsilon, &q)?.matrix.to_dense();
    let d = assemble_bilinear(FormKind::DivCoupling, disc, epsilon, &q)?.matrix.to_dense();
    let mq = assemble_bilinear(FormKind::QMass, disc, epsilon, &q)?.matrix.to_dense();
    let mrt = assemble_bilinear(FormKind::RtMass, disc, epsilon, &q)?.matrix.to_dense();
    let divop = diff_operator_matrix(OperatorKind::Div, disc)?.matrix.to_dense();
    let (nphi, nq, nrt) = (a.nrows(), mq.nrows(), mrt.nrows());
    let mut nx = DMatrix::zeros(nphi + nq, nphi + nq);
    nx.view_mut((0, 0), (nphi, nphi)).copy_from(&a);
    nx.view_mut((nphi, nphi), (nq, nq)).copy_from(&mq);
    let mut b = DMatrix::zeros(nphi + nq, nrt);
    b.view_mut((0, 0), (nphi, nrt)).copy_from(&c);
    b.view_mut((nphi, 0), (nq, nrt)).copy_from(&(-d.transpose()));
    let Some(x) = dense_spd_solve(&nx, &b) else { return Ok(None) };
    let s = b.transpose() * x;
    let nqn = &mrt + divop.transpose() * &mq * &divop;
    let Some(chol) = nqn.cholesky() else { return Ok(None) };
    let l = chol.l();
    let Some(linv) = l.clone().try_inverse() else { return Ok(None) };
    let t = &linv * s * linv.transpose();
    let t = (&t + t.transpose()) * 0.5;
    let min = t.symmetric_eigenvalues().min();
    Ok(Some(min.max(0.0).sqrt()))
}

/// `beta_h` for each `epsilon` on the meshes `n = 1, 2`.
pub fn check_infsup(epsilons: &[f64]) -> Result<Vec<CheckEntry>> {
    let discs = [1, 2].map(|n| build_unit_cube_mesh(n).and_then(Discretization::new));
    let mut out = Vec::new();
    for &eps in epsilons {
        let mut betas = Vec::new();
        for (n, d) in [1usize, 2].into_iter().zip(&discs) {
            let d = d.as_ref().map_err(|e| e.clone())?;
            match infsup_constant(d, eps)? {
                Some(beta) => {
                    out.push(CheckEntry {
                        name: format!("inf-sup beta_h > 0, eps={eps:e}"),
                        level: Some(n),
                        status: if beta > 1e-8 { Status::Pass } else { Status::Fail },
                        measured: beta,
                        tolerance: 1e-8,
                        detail: "lower bound".into(),
                    });
                    betas.push(beta);
                }
                None => out.push(CheckEntry::skipped(format!("inf-sup beta_h, eps={eps:e}"), Some(n), "dense eigen solve failed")),
            }
        }
        if let [b1, b2] = betas[..] {
            let var = (b1 - b2).abs() / b1.max(b2);
            out.push(CheckEntry::at_most(format!("inf-sup stable n=1 to n=2, eps={eps:e}"), None, var, 0.5, "relative change"));
        }
    }
    Ok(out)
}

/// Times a closure and returns its result with the elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(n: usize) -> Discretization {
        Discretization::new(build_unit_cube_mesh(n).unwrap()).unwrap()
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(p3_scalar_basis().len(), 20);
        assert_eq!(p3_vector_basis().len(), 60);
        assert_eq!(exponents(2).len(), 10);
    }

    #[test]
    fn complex_on_one_cube() {
        let entries = check_complex(&disc(1), 1).unwrap();
        assert!(entries.iter().all(CheckEntry::passed), "{entries:#?}");
        let rc = entries.iter().find(|e| e.name.starts_with("rank(curl) = |E_int|")).unwrap();
        assert_eq!(rc.detail, "got 1, expected 1");
    }

    #[test]
    fn dense_rank_refuses_large_meshes() {
        assert!(matches!(check_complex(&disc(4), 4), Err(crate::Error::Fem(FemError::Capability(_)))));
    }

    #[test]
    fn commuting_on_small_mesh() {
        let entries = check_commuting(&disc(2), 2, 3, 7).unwrap();
        assert!(entries.iter().all(CheckEntry::passed), "{entries:#?}");
    }

    #[test]
    fn sign_flip_breaks_weak_continuity() {
        let d = disc(2);
        assert!(check_weak_continuity(&d, 2, 5, 1).unwrap().passed());
        let mut mesh = d.mesh.clone();
        let (t, f) = (0..mesh.tets.len())
            .flat_map(|t| (0..4).map(move |f| (t, f)))
            .find(|&(t, f)| !mesh.boundary_faces[mesh.tet_faces[t][f]])
            .unwrap();
        mesh.tet_face_signs[t][f] *= -1;
        let bad = Discretization::new(mesh).unwrap();
        assert!(!check_weak_continuity(&bad, 2, 5, 1).unwrap().passed());
    }

    #[test]
    fn unisolvence_on_random_tets() {
        assert!(check_unisolvence(20, 3).iter().all(CheckEntry::passed));
    }

    #[test]
    fn random_tets_are_deterministic_and_regular() {
        let a = random_tets(5, 11);
        let b = random_tets(5, 11);
        assert_eq!(a.iter().map(|g| g.volume).collect::<Vec<_>>(), b.iter().map(|g| g.volume).collect::<Vec<_>>());
    }

    #[test]
    fn discrete_norm_on_face_only_fields() {
        // Zero edge DoFs means I^ND psi = 0, so ||psi||_{eps,h}^2 = eps^2 |psi|_{1,h}^2.
        let d = disc(2);
        let q = QuadDegrees::default();
        let eps = 0.3;
        let a = assemble_bilinear(FormKind::InterpA, &d, eps, &q).unwrap().matrix;
        let k = assemble_bilinear(FormKind::PhiStiffness, &d, eps, &q).unwrap().matrix;
        let map = d.dofmap(SpaceTag::Phi);
        let psi: Vec<f64> = (0..map.ndofs())
            .map(|g| match map.provenance(g).entity {
                ncfem_core::assembly::Entity::Face(_) => 1.0 + (g % 3) as f64,
                _ => 0.0,
            })
            .collect();
        let lhs = energy_norm(&a, &psi);
        let rhs = eps * energy_norm(&k, &psi);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn infsup_positive_on_one_cube() {
        let b = infsup_constant(&disc(1), 1.0).unwrap().unwrap();
        assert!(b > 1e-8, "{b}");
    }

    #[test]
    fn report_text_and_json() {
        let mut r = CertificationReport::default();
        r.extend([CheckEntry::at_most("a", Some(1), 0.5, 1.0, ""), CheckEntry::skipped("b", None, "off")]);
        assert!(r.all_passed());
        assert!(r.to_text().contains("1 passed, 0 failed, 1 skipped"));
        assert!(r.to_json().contains("\"status\": \"skipped\""));
        r.extend([CheckEntry::equal("c", None, 2, 3)]);
        assert!(!r.all_passed());
    }
}
