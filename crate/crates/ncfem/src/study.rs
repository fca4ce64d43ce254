//! Convergence studies and certification runs driven by a declarative config.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use ncfem_core::assembly::{Discretization, QuadDegrees};
use ncfem_core::errors::{compute_error, err_phi, ConvergenceReport, ConvergenceRow, ErrorKind};
use ncfem_core::manufactured::{layer_case_fields, smooth_case_fields, ManufacturedCase};
use ncfem_core::mesh::build_unit_cube_mesh;
use ncfem_core::SpaceTag;

use crate::error::{Error, Result};
use crate::report;
use crate::solver::{decoupled_solve, DecoupledSolution, Method, SolverConfig, SpdSolver};
use crate::verify::{self, CertificationReport, CheckEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestCase {
    /// `u = sin^2(pi x) sin^2(pi y) sin^2(pi z)`, exact for every epsilon.
    Smooth,
    /// Source of the reduced problem; errors are measured against `u0`.
    Layer,
}

impl TestCase {
    pub fn name(self) -> &'static str {
        match self {
            TestCase::Smooth => "smooth",
            TestCase::Layer => "layer",
        }
    }

    pub fn fields(self, epsilon: f64) -> ManufacturedCase {
        match self {
            TestCase::Smooth => smooth_case_fields(epsilon),
            TestCase::Layer => layer_case_fields(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Interp,
    NoInterp,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Interp => vec![Method::Interp],
            MethodChoice::NoInterp => vec![Method::NoInterp],
            MethodChoice::Both => vec![Method::Interp, Method::NoInterp],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub spd_solver: SpdSolver,
    pub spd_tol: f64,
    pub saddle_tol: f64,
    pub max_cg_iterations: usize,
    pub saddle_regularization: f64,
    pub max_refinement_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSettings {
            spd_solver: s.spd_solver,
            spd_tol: s.spd_tol,
            saddle_tol: s.saddle_tol,
            max_cg_iterations: s.max_cg_iterations,
            saddle_regularization: s.saddle_regularization,
            max_refinement_steps: s.max_refinement_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    /// Mesh levels of the structural checks; dense ranks need `n <= 2`.
    pub levels: Vec<usize>,
    pub random_tets: usize,
    pub continuity_samples: usize,
    pub infsup: bool,
    pub infsup_epsilons: Vec<f64>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { levels: vec![1, 2], random_tets: 100, continuity_samples: 20, infsup: false, infsup_epsilons: vec![1.0, 1e-3, 1e-6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub test: TestCase,
    pub epsilons: Vec<f64>,
    pub levels: Vec<usize>,
    pub method: MethodChoice,
    pub solver: SolverSettings,
    /// Degree of the tet rule used for error integrals.
    pub quad_degree: usize,
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub seed: u64,
    /// Single-threaded and free of wall-clock output.
    pub serial: bool,
    pub verify: VerifySettings,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            test: TestCase::Smooth,
            epsilons: vec![1.0, 1e-1, 1e-4],
            levels: vec![4, 8, 16],
            method: MethodChoice::Interp,
            solver: SolverSettings::default(),
            quad_degree: 8,
            out: None,
            formats: vec![Format::Csv, Format::Markdown],
            seed: 20240611,
            serial: true,
            verify: VerifySettings::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("levels: at least one mesh level is required".into()));
        }
        for (i, &n) in self.levels.iter().enumerate() {
            if !n.is_power_of_two() {
                return Err(Error::Config(format!("levels: {n} is not a power of two")));
            }
            if i > 0 && n <= self.levels[i - 1] {
                return Err(Error::Config(format!("levels: must be strictly increasing, {n} follows {}", self.levels[i - 1])));
            }
        }
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilons: at least one value is required".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("epsilons: {e} is not a positive number")));
        }
        if self.quad_degree == 0 {
            return Err(Error::Config("quad_degree: must be at least 1".into()));
        }
        if let Some(n) = self.verify.levels.iter().find(|&&n| n == 0) {
            return Err(Error::Config(format!("verify.levels: {n} is not a valid mesh level")));
        }
        self.solver_config(self.epsilons[0], Method::Interp).validate()
    }

    pub fn solver_config(&self, epsilon: f64, method: Method) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            epsilon,
            method,
            spd_solver: s.spd_solver,
            spd_tol: s.spd_tol,
            saddle_tol: s.saddle_tol,
            max_cg_iterations: s.max_cg_iterations,
            saddle_regularization: s.saddle_regularization,
            max_refinement_steps: s.max_refinement_steps,
            quad: QuadDegrees { error: self.quad_degree, ..QuadDegrees::default() },
            serial: self.serial,
        }
    }
}

/// One solved configuration with its error row.
pub struct CaseRun {
    pub disc: Discretization,
    pub solution: DecoupledSolution,
    pub row: ConvergenceRow,
    /// Solution identities; checked for the interpolated method only.
    pub identities: Vec<CheckEntry>,
}

pub fn run_label(test: TestCase, method: Method, epsilon: f64, n: usize) -> String {
    format!("{}/{}/eps={epsilon:e}/n={n}", test.name(), method.name())
}

/// Errors of a solution. `err_phi` is `Err` for the interpolated method and
/// `Err_0` for the plain one.
pub fn solution_errors(disc: &Discretization, sol: &DecoupledSolution, case: &ManufacturedCase, degree: usize) -> Result<[f64; 3]> {
    let l2_kind = match sol.method {
        Method::Interp => ErrorKind::L2VsInd,
        Method::NoInterp => ErrorKind::L2Vector,
    };
    let semi = compute_error(ErrorKind::BrokenH1SemiVector, disc, &sol.phi, &case.phi, degree)?;
    let l2 = compute_error(l2_kind, disc, &sol.phi, &case.phi, degree)?;
    let u_l2 = compute_error(ErrorKind::L2Scalar, disc, &sol.u, &case.u, degree)?;
    let u_h1 = compute_error(ErrorKind::H1SemiScalar, disc, &sol.u, &case.u, degree)?;
    Ok([err_phi(sol.epsilon, semi, l2), u_l2, u_h1])
}

pub fn run_case(cfg: &StudyConfig, method: Method, epsilon: f64, n: usize) -> Result<CaseRun> {
    let start = Instant::now();
    let disc = Discretization::new(build_unit_cube_mesh(n)?)?;
    let case = cfg.test.fields(epsilon);
    let solution = decoupled_solve(&case.f, &disc, &cfg.solver_config(epsilon, method))?;
    let solve_seconds = start.elapsed().as_secs_f64();
    let [err_phi, err_u_l2, err_u_h1] = solution_errors(&disc, &solution, &case, cfg.quad_degree)?;
    let grad = disc.ndofs(SpaceTag::Grad);
    let row = ConvergenceRow {
        test: cfg.test.name().into(),
        method: method.name().into(),
        epsilon,
        n,
        h: 1.0 / n as f64,
        dof_phi: disc.ndofs(SpaceTag::Phi),
        dof_total: solution.diagnostics.saddle.size + 2 * grad,
        err_phi,
        rate_phi: None,
        err_u_l2,
        rate_u_l2: None,
        err_u_h1,
        rate_u_h1: None,
        solve_seconds,
    };
    let identities = match method {
        Method::Interp => verify::check_solution_identities(&disc, &solution, &run_label(cfg.test, method, epsilon, n))?,
        Method::NoInterp => Vec::new(),
    };
    Ok(CaseRun { disc, solution, row, identities })
}

#[derive(Debug, Default)]
pub struct StudyOutcome {
    pub report: ConvergenceReport,
    /// Run label and message of each failed run.
    pub failures: Vec<(String, String)>,
}

impl StudyOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every `(method, epsilon, n)` of the config in order. A failed run is
/// recorded and the remaining runs continue.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let mut out = StudyOutcome::default();
    for method in cfg.method.methods() {
        for &eps in &cfg.epsilons {
            for &n in &cfg.levels {
                let label = run_label(cfg.test, method, eps, n);
                match run_case(cfg, method, eps, n) {
                    Ok(run) => {
                        for e in run.identities.iter().filter(|e| !e.passed()) {
                            out.failures.push((label.clone(), format!("{} is {:e}, above {:e}", e.name, e.measured, e.tolerance)));
                        }
                        out.report.rows.push(run.row);
                    }
                    Err(e) => out.failures.push((label, e.to_string())),
                }
            }
        }
    }
    if let Err(e) = out.report.fill_rates() {
        out.failures.push(("rates".into(), e.to_string()));
    }
    Ok(out)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

/// Writes `study.{csv,md,json}` for the requested formats into `cfg.out`.
pub fn write_study(cfg: &StudyConfig, outcome: &StudyOutcome) -> Result<Vec<PathBuf>> {
    let Some(dir) = &cfg.out else { return Ok(Vec::new()) };
    let timing = !cfg.serial;
    cfg.formats
        .iter()
        .map(|f| match f {
            Format::Csv => write_file(dir, "study.csv", &report::to_csv(&outcome.report, timing)),
            Format::Markdown => write_file(dir, "study.md", &report::to_markdown(&outcome.report, timing)),
            Format::Json => write_file(dir, "study.json", &report::to_json(&outcome.report, &outcome.failures, timing)),
        })
        .collect()
}

/// The certification suite: unisolvence, complex, commuting diagrams, weak
/// continuity with its sign-flip control, solution identities and, when
/// enabled, the inf-sup estimate.
pub fn run_verify(cfg: &StudyConfig) -> Result<CertificationReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rep = CertificationReport::default();
    rep.extend(verify::check_unisolvence(cfg.verify.random_tets, cfg.seed));
    for &n in &cfg.verify.levels {
        let disc = Discretization::new(build_unit_cube_mesh(n)?)?;
        match verify::check_complex(&disc, n) {
            Ok(entries) => rep.extend(entries),
            Err(e) => rep.extend([CheckEntry::skipped("dense rank checks", Some(n), e.to_string())]),
        }
        rep.extend(verify::check_commuting(&disc, n, 5, cfg.seed)?);
        rep.extend([verify::check_weak_continuity(&disc, n, cfg.verify.continuity_samples, cfg.seed)?]);
        rep.extend([sign_flip_control(&disc, n, cfg)?]);
    }
    if let Some(&n) = cfg.verify.levels.iter().max() {
        for method in cfg.method.methods() {
            for &eps in &cfg.epsilons {
                let label = run_label(cfg.test, method, eps, n);
                match run_case(cfg, method, eps, n) {
                    Ok(run) if method == Method::Interp => rep.extend(run.identities),
                    Ok(run) => rep.extend(verify::check_solution_identities(&run.disc, &run.solution, &label)?),
                    Err(e) => rep.extend([CheckEntry::at_most(format!("{label}: solve"), Some(n), f64::INFINITY, 0.0, e.to_string())]),
                }
            }
        }
    }
    if cfg.verify.infsup {
        rep.extend(verify::check_infsup(&cfg.verify.infsup_epsilons)?);
    } else {
        rep.extend([CheckEntry::skipped("inf-sup estimate", None, "disabled; pass --infsup")]);
    }
    if !cfg.serial {
        rep.seconds = Some(start.elapsed().as_secs_f64());
    }
    Ok(rep)
}

/// Flips the orientation of one interior face inside one cell and confirms
/// that the weak continuity check notices.
fn sign_flip_control(disc: &Discretization, n: usize, cfg: &StudyConfig) -> Result<CheckEntry> {
    let mesh = &disc.mesh;
    let target = (0..mesh.tets.len()).flat_map(|t| (0..4).map(move |f| (t, f))).find(|&(t, f)| !mesh.boundary_faces[mesh.tet_faces[t][f]]);
    let Some((t, f)) = target else {
        return Ok(CheckEntry::skipped("sign flip detected by weak continuity", Some(n), "mesh has no interior face"));
    };
    let mut corrupted = mesh.clone();
    corrupted.tet_face_signs[t][f] *= -1;
    let bad = Discretization::new(corrupted)?;
    let defect = verify::weak_continuity_defect(&bad, cfg.verify.continuity_samples, cfg.seed)?;
    let status = if defect > 1e-10 { verify::Status::Pass } else { verify::Status::Fail };
    Ok(CheckEntry {
        name: "sign flip detected by weak continuity".into(),
        level: Some(n),
        status,
        measured: defect,
        tolerance: 1e-10,
        detail: format!("face {f} of tet {t} flipped; defect must exceed the tolerance"),
    })
}

/// Writes `verify.txt` and `verify.json` into `cfg.out`.
pub fn write_verify(cfg: &StudyConfig, rep: &CertificationReport) -> Result<Vec<PathBuf>> {
    let Some(dir) = &cfg.out else { return Ok(Vec::new()) };
    Ok(vec![write_file(dir, "verify.txt", &rep.to_text())?, write_file(dir, "verify.json", &rep.to_json())?])
}
