//! Linear solvers and the two decoupled methods.

use std::time::Instant;

use faer::sparse::{SparseColMat, Triplet};
use faer::linalg::solvers::Solve;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::{Conj, Mat, Par, Side};
use serde::{Deserialize, Serialize};

use ncfem_core::assembly::{assemble_bilinear, assemble_load, Discretization, FormKind, LoadData, LoadKind, QuadDegrees};
use ncfem_core::interp::FeFunction;
use ncfem_core::manufactured::AnalyticField;
use ncfem_core::sparse::{norm2, CsrMatrix};
use ncfem_core::SpaceTag;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Nedelec interpolation in the mass term and both loads.
    Interp,
    /// Plain `L^2` products of the enriched field.
    NoInterp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Interp => "interp",
            Method::NoInterp => "nointerp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpdSolver {
    Cg,
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub method: Method,
    pub spd_solver: SpdSolver,
    /// Relative residual for SPD solves.
    pub spd_tol: f64,
    /// Relative residual the saddle solve must reach after refinement.
    pub saddle_tol: f64,
    pub max_cg_iterations: usize,
    /// Diagonal shift of the multiplier block during factorization, relative to the equilibrated matrix.
    pub saddle_regularization: f64,
    pub max_refinement_steps: usize,
    pub quad: QuadDegrees,
    /// Runs every stage on one thread.
    pub serial: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1.0,
            method: Method::Interp,
            spd_solver: SpdSolver::Cg,
            spd_tol: 1e-12,
            saddle_tol: 1e-10,
            max_cg_iterations: 20_000,
            saddle_regularization: 1e-8,
            max_refinement_steps: 30,
            quad: QuadDegrees::default(),
            serial: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be a nonnegative number, got {}", self.epsilon)));
        }
        for (name, tol) in [("spd_tol", self.spd_tol), ("saddle_tol", self.saddle_tol)] {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpdStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SaddleStats {
    pub size: usize,
    pub nnz: usize,
    pub factor_nnz: usize,
    pub residual_before_refinement: f64,
    pub refinement_steps: usize,
    pub relative_residual: f64,
    /// Ratio of the largest to the smallest equilibration factor.
    pub scaling_spread: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub poisson_w: SpdStats,
    pub saddle: SaddleStats,
    pub poisson_u: SpdStats,
    /// Euclidean norm of the stage loads; the scale for the solution identities.
    pub rhs_scale: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledSolution {
    pub method: Method,
    pub epsilon: f64,
    pub w: FeFunction,
    pub phi: FeFunction,
    pub p: FeFunction,
    pub lambda: FeFunction,
    pub u: FeFunction,
    pub diagnostics: Diagnostics,
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| q - p).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &t).map_err(|e| Error::Solver(format!("sparse conversion: {e:?}")))
}

fn column(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

/// Conjugate gradients with a diagonal preconditioner.
pub fn solve_cg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SpdStats)> {
    let n = b.len();
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok((vec![0.0; n], SpdStats::default()));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Solver(format!("matrix is not positive definite (p^T A p = {pap:e} at iteration {it})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / nb;
        history.push(rel);
        if rel <= tol {
            let stats = SpdStats { iterations: it, relative_residual: relative_residual(a, &x, b) };
            return Ok((x, stats));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let tail: Vec<String> = history.iter().rev().take(5).rev().map(|v| format!("{v:.3e}")).collect();
    Err(Error::Solver(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations; last residuals [{}]",
        tail.join(", ")
    )))
}

/// Solves an SPD system with the solver chosen in `config`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SpdStats)> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::Solver(format!("shape mismatch: {}x{} matrix, {} rhs", a.nrows(), a.ncols(), b.len())));
    }
    match config.spd_solver {
        SpdSolver::Cg => solve_cg(a, b, config.spd_tol, config.max_cg_iterations),
        SpdSolver::Direct => {
            let llt = to_faer(a)?.sp_cholesky(Side::Lower).map_err(|e| Error::Solver(format!("Cholesky failed: {e:?}")))?;
            let sol = llt.solve(column(b));
            let x: Vec<f64> = (0..b.len()).map(|i| sol[(i, 0)]).collect();
            let rel = relative_residual(a, &x, b);
            if !(rel <= config.spd_tol.max(1e-10)) {
                return Err(Error::Solver(format!("direct SPD solve left relative residual {rel:e}")));
            }
            Ok((x, SpdStats { iterations: 1, relative_residual: rel }))
        }
    }
}

/// Blocks of the saddle system for `(phi, lambda, p)`.
///
/// The assembled matrix is
/// `[[A, 0, C], [0, 0, -D^T], [C^T, -D, 0]]` bordered by one extra row and
/// column that pin the mean of `lambda` through `mean_weights`.
pub struct SaddleBlocks<'a> {
    pub a: &'a CsrMatrix,
    /// `Phi_h x V_h^div`.
    pub c: &'a CsrMatrix,
    /// `V_h^div x Q_h`.
    pub d: &'a CsrMatrix,
    pub mean_weights: &'a [f64],
}

impl SaddleBlocks<'_> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.d.ncols(), self.c.ncols())
    }

    fn check(&self) -> Result<()> {
        let (nphi, nq, np) = self.sizes();
        let ok = self.a.ncols() == nphi && self.c.nrows() == nphi && self.d.nrows() == np && self.mean_weights.len() == nq;
        if ok {
            Ok(())
        } else {
            Err(Error::Solver("saddle blocks have inconsistent shapes".into()))
        }
    }

    pub fn matrix(&self) -> CsrMatrix {
        let (nphi, nq, np) = self.sizes();
        let n = nphi + nq + np + 1;
        let (oq, op, om) = (nphi, nphi + nq, nphi + nq + np);
        let ct = self.c.transpose();
        let dt = self.d.transpose();
        let w = CsrMatrix::from_rows(1, self.mean_weights.iter().map(|&v| vec![(0, v)]).collect());
        let wt = w.transpose();
        CsrMatrix::from_blocks(
            n,
            n,
            &[
                (0, 0, self.a, 1.0),
                (0, op, self.c, 1.0),
                (oq, op, &dt, -1.0),
                (op, 0, &ct, 1.0),
                (op, oq, self.d, -1.0),
                (oq, om, &w, 1.0),
                (om, oq, &wt, 1.0),
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub stats: SaddleStats,
}

/// Symmetric equilibration `S K S` with `S` from a few Ruiz sweeps on the row maxima.
fn equilibrate(k: &CsrMatrix) -> Vec<f64> {
    let n = k.nrows();
    let mut s = vec![1.0; n];
    for _ in 0..8 {
        let mut rmax = vec![0.0f64; n];
        for (r, c, v) in k.triplets() {
            rmax[r] = rmax[r].max((s[r] * v * s[c]).abs());
        }
        for i in 0..n {
            if rmax[i] > 0.0 {
                s[i] /= rmax[i].sqrt();
            }
        }
    }
    s
}

/// Sparse `L D L^T` of a quasi-definite perturbation of the saddle matrix.
///
/// Zero diagonal entries become `sign * delta`, which makes the matrix
/// quasi-definite so that every symmetric ordering is admissible without
/// pivoting. Pivots that still come out with the wrong sign are replaced by
/// `sign * delta`.
/// Refinement against the unperturbed matrix removes the perturbation.
struct QuasiDefinite {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl QuasiDefinite {
    fn factorize(k: &CsrMatrix, signs: &[i8], delta: f64) -> Result<Self> {
        let n = k.nrows();
        let mut lower: Vec<Triplet<usize, usize, f64>> =
            k.triplets().filter(|&(r, c, _)| r >= c).map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        lower.extend(signs.iter().enumerate().filter(|(i, _)| k.get(*i, *i) == 0.0).map(|(i, &s)| Triplet::new(i, i, f64::from(s) * delta)));
        let a = SparseColMat::try_new_from_triplets(n, n, &lower).map_err(|e| Error::Solver(format!("sparse conversion: {e:?}")))?;
        let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Lower, SymmetricOrdering::Amd, CholeskySymbolicParams::default())
            .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(signs),
            dynamic_regularization_delta: delta,
            dynamic_regularization_epsilon: delta * 1e-3,
        };
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        let info = symbolic
            .factorize_numeric_ldlt(&mut values, a.as_ref(), Side::Lower, regularization, Par::Seq, MemStack::new(&mut mem), Default::default())
            .map(|_| ())
            .map_err(|e| Error::Solver(format!("saddle factorization failed (singular system?): {e:?}")));
        info?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("saddle factorization produced non-finite entries (singular system?)".into()));
        }
        Ok(QuasiDefinite { symbolic, values })
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let n = rhs.len();
        let f = LdltRef::new(&self.symbolic, &self.values);
        let mut x = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        f.solve_in_place_with_conj(Conj::No, x.as_mut(), Par::Seq, MemStack::new(&mut mem));
        (0..n).map(|i| x[(i, 0)]).collect()
    }
}

/// Symmetric indefinite factorization of the equilibrated saddle system followed by one refinement step.
pub fn solve_saddle(blocks: &SaddleBlocks<'_>, rhs_phi: &[f64], rhs_lambda: &[f64], rhs_p: &[f64], config: &SolverConfig) -> Result<SaddleSolution> {
    blocks.check()?;
    let (nphi, nq, np) = blocks.sizes();
    if rhs_phi.len() != nphi || rhs_lambda.len() != nq || rhs_p.len() != np {
        return Err(Error::Solver("saddle right-hand side has the wrong length".into()));
    }
    let k = blocks.matrix();
    let n = k.nrows();
    let mut b = Vec::with_capacity(n);
    b.extend_from_slice(rhs_phi);
    b.extend_from_slice(rhs_lambda);
    b.extend_from_slice(rhs_p);
    b.push(0.0);
    if norm2(&b) == 0.0 {
        let stats = SaddleStats { size: n, nnz: k.nnz(), ..Default::default() };
        return Ok(SaddleSolution { phi: vec![0.0; nphi], lambda: vec![0.0; nq], p: vec![0.0; np], stats });
    }
    let s = equilibrate(&k);
    let mut scaled = k.clone();
    {
        let (rp, ci) = (scaled.row_ptr().to_vec(), scaled.col_idx().to_vec());
        let vals = scaled.values_mut();
        for r in 0..n {
            for idx in rp[r]..rp[r + 1] {
                vals[idx] *= s[r] * s[ci[idx]];
            }
        }
    }
    // (phi, lambda) form the positive block, (p, mean multiplier) the negative one.
    let mut signs = vec![-1i8; n];
    signs[..nphi + nq].iter_mut().for_each(|v| *v = 1);
    let factor = QuasiDefinite::factorize(&scaled, &signs, config.saddle_regularization)?;
    let solve_scaled = |rhs: &[f64]| -> Vec<f64> {
        let y = factor.solve((0..n).map(|i| s[i] * rhs[i]).collect());
        (0..n).map(|i| s[i] * y[i]).collect()
    };
    let mut x = solve_scaled(&b);
    let before = relative_residual(&k, &x, &b);
    let mut rel = before;
    let mut steps = 0;
    // Refine until well below the tolerance or until the residual stalls.
    while steps < config.max_refinement_steps && rel > config.saddle_tol * 1e-3 {
        let kx = k.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&kx).map(|(p, q)| p - q).collect();
        let dx = solve_scaled(&r);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let next = relative_residual(&k, &trial, &b);
        steps += 1;
        if !(next < rel) {
            break;
        }
        x = trial;
        rel = next;
        if next > 0.5 * rel && steps > 1 && rel <= config.saddle_tol {
            break;
        }
    }
    if !rel.is_finite() || rel > config.saddle_tol {
        return Err(Error::Solver(format!("saddle residual {rel:e} after refinement exceeds {:e}", config.saddle_tol)));
    }
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let stats = SaddleStats { size: n, nnz: k.nnz(), residual_before_refinement: before, relative_residual: rel, refinement_steps: steps, factor_nnz: factor.values.len(), scaling_spread: smax / smin };
    Ok(SaddleSolution {
        phi: x[..nphi].to_vec(),
        lambda: x[nphi..nphi + nq].to_vec(),
        p: x[nphi + nq..nphi + nq + np].to_vec(),
        stats,
    })
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })
}

/// Runs the four stages of the decoupled method for the source `f`.
pub fn decoupled_solve(f: &AnalyticField, disc: &Discretization, config: &SolverConfig) -> Result<DecoupledSolution> {
    config.validate()?;
    let start = Instant::now();
    let eps = config.epsilon;
    let q = &config.quad;
    let (a_kind, c_kind, w_load, u_load) = match config.method {
        Method::Interp => (FormKind::InterpA, FormKind::CurlCoupling, LoadKind::GradwVsIndphi, LoadKind::IndphiVsGradP2),
        Method::NoInterp => (FormKind::NoInterpA, FormKind::CurlCouplingDirect, LoadKind::GradwVsPhi, LoadKind::PhiVsGradP2),
    };

    let k = assemble_bilinear(FormKind::PoissonP2, disc, eps, q)?.matrix;
    let fw = assemble_load(LoadKind::FVsP2, disc, LoadData::Field(f), q)?;
    let (w, poisson_w) = stage("poisson for w", solve_spd(&k, &fw, config))?;
    let w = FeFunction::new(disc, SpaceTag::Grad, w)?;

    let a = assemble_bilinear(a_kind, disc, eps, q)?.matrix;
    let c = assemble_bilinear(c_kind, disc, eps, q)?.matrix;
    let d = assemble_bilinear(FormKind::DivCoupling, disc, eps, q)?.matrix;
    let vol = disc.cell_volumes();
    let blocks = SaddleBlocks { a: &a, c: &c, d: &d, mean_weights: &vol };
    let g = assemble_load(w_load, disc, LoadData::Function(&w), q)?;
    let (nq, np) = (disc.ndofs(SpaceTag::Q), disc.ndofs(SpaceTag::Div));
    let sol = stage("saddle system", solve_saddle(&blocks, &g, &vec![0.0; nq], &vec![0.0; np], config))?;
    let phi = FeFunction::new(disc, SpaceTag::Phi, sol.phi)?;

    let fu = assemble_load(u_load, disc, LoadData::Function(&phi), q)?;
    let (u, poisson_u) = stage("poisson for u", solve_spd(&k, &fu, config))?;

    let rhs_scale = norm2(&fw).max(norm2(&g)).max(norm2(&fu));
    let diagnostics = Diagnostics { poisson_w, saddle: sol.stats, poisson_u, rhs_scale, seconds: start.elapsed().as_secs_f64() };
    Ok(DecoupledSolution {
        method: config.method,
        epsilon: eps,
        w,
        phi,
        p: FeFunction::new(disc, SpaceTag::Div, sol.p)?,
        lambda: FeFunction::new(disc, SpaceTag::Q, sol.lambda)?,
        u: FeFunction::new(disc, SpaceTag::Grad, u)?,
        diagnostics,
    })
}
