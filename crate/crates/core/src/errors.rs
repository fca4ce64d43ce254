//! Error functionals against exact fields, and observed convergence rates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::assembly::{Discretization, Tabulation};
use crate::elements::Arity;
use crate::error::{FemError, Result};
use crate::interp::FeFunction;
use crate::manufactured::AnalyticField;
use crate::quadrature::{get_rule, EntityKind};
use crate::SpaceTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// `||u - u_h||_0` for scalar functions.
    L2Scalar,
    /// `|u - u_h|_{1,h}` for scalar functions.
    H1SemiScalar,
    /// `|phi - phi_h|_{1,h}`, comparing elementwise Jacobians.
    BrokenH1SemiVector,
    /// `||phi - I^ND phi_h||_0`.
    L2VsInd,
    /// `||phi - phi_h||_0`.
    L2Vector,
}

/// Computes one error norm with a tetrahedral rule of the given degree.
pub fn compute_error(kind: ErrorKind, disc: &Discretization, fe: &FeFunction, exact: &AnalyticField, degree: usize) -> Result<f64> {
    let want = match kind {
        ErrorKind::L2Scalar | ErrorKind::H1SemiScalar => Arity::Scalar,
        _ => Arity::Vector,
    };
    if fe.space.element().arity() != want || exact.arity != want {
        return Err(FemError::Integrity(format!("{kind:?} cannot compare {} with field `{}`", fe.space.name(), exact.tag)));
    }
    // The Nedelec interpolant of a Phi_h function keeps its leading edge DoFs.
    let eval_space = match (kind, fe.space) {
        (ErrorKind::L2VsInd, SpaceTag::Phi | SpaceTag::Nd) => SpaceTag::Nd,
        (ErrorKind::L2VsInd, other) => {
            return Err(FemError::Integrity(format!("no Nedelec interpolant defined on {}", other.name())))
        }
        (_, s) => s,
    };
    let rule = get_rule(EntityKind::Tet, degree)?;
    let mut total = 0.0;
    let mut buf = [0.0; 9];
    for t in 0..disc.num_tets() {
        let g = &disc.geometry[t];
        let basis = disc.local_basis(eval_space, t)?;
        let tab = Tabulation::new(&basis, g, &rule);
        let local = fe.local_coeffs(disc, t);
        let c = &local[..tab.dim];
        for q in 0..tab.nq() {
            let x = g.point(&tab.points[q]);
            let sq = match kind {
                ErrorKind::L2Scalar => {
                    tab.combine_value(q, c, &mut buf[..1]);
                    Float::powi(exact.value(&x)? - buf[0], 2)
                }
                ErrorKind::H1SemiScalar => {
                    tab.combine_deriv(q, c, &mut buf[..3]);
                    let e = exact.gradient(&x)?;
                    (0..3).map(|k| Float::powi(e[k] - buf[k], 2)).sum()
                }
                ErrorKind::BrokenH1SemiVector => {
                    tab.combine_deriv(q, c, &mut buf);
                    let e = exact.jacobian(&x)?;
                    (0..9).map(|k| Float::powi(e[(k / 3, k % 3)] - buf[k], 2)).sum()
                }
                ErrorKind::L2VsInd | ErrorKind::L2Vector => {
                    tab.combine_value(q, c, &mut buf[..3]);
                    let e = exact.vector_value(&x)?;
                    (0..3).map(|k| Float::powi(e[k] - buf[k], 2)).sum()
                }
            };
            total += tab.weights[q] * sq;
        }
    }
    Ok(Float::sqrt(total.max(0.0)))
}

/// `(eps^2 |.|_{1,h}^2 + ||.||_0^2)^{1/2}`.
pub fn err_phi(epsilon: f64, broken_h1: f64, l2: f64) -> f64 {
    Float::sqrt(epsilon * epsilon * broken_h1 * broken_h1 + l2 * l2)
}

/// `log2(e_k / e_{k+1})` between consecutive levels; the first level has no rate.
///
/// Levels must halve the mesh size.
pub fn convergence_rates(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() {
        return Err(FemError::InvalidArgument("one mesh size per error is required".into()));
    }
    for w in hs.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(FemError::InvalidArgument(format!("levels must halve h, got {} then {}", w[0], w[1])));
        }
    }
    let mut out = vec![None; errors.len()];
    for k in 1..errors.len() {
        out[k] = Some(Float::log2(errors[k - 1] / errors[k]));
    }
    Ok(out)
}

/// One solved configuration of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub test: String,
    pub method: String,
    pub epsilon: f64,
    pub n: usize,
    pub h: f64,
    pub dof_phi: usize,
    pub dof_total: usize,
    pub err_phi: f64,
    pub rate_phi: Option<f64>,
    pub err_u_l2: f64,
    pub rate_u_l2: Option<f64>,
    pub err_u_h1: f64,
    pub rate_u_h1: Option<f64>,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Fills the rate columns within each `(test, method, epsilon)` series, in row order.
    pub fn fill_rates(&mut self) -> Result<()> {
        let mut done = vec![false; self.rows.len()];
        for start in 0..self.rows.len() {
            if done[start] {
                continue;
            }
            let key = (self.rows[start].test.clone(), self.rows[start].method.clone(), self.rows[start].epsilon);
            let idx: Vec<usize> = (start..self.rows.len())
                .filter(|&i| (self.rows[i].test.clone(), self.rows[i].method.clone(), self.rows[i].epsilon) == key)
                .collect();
            let hs: Vec<f64> = idx.iter().map(|&i| self.rows[i].h).collect();
            let col = |f: fn(&ConvergenceRow) -> f64| idx.iter().map(|&i| f(&self.rows[i])).collect::<Vec<_>>();
            let rp = convergence_rates(&col(|r| r.err_phi), &hs)?;
            let rl = convergence_rates(&col(|r| r.err_u_l2), &hs)?;
            let rh = convergence_rates(&col(|r| r.err_u_h1), &hs)?;
            for (k, &i) in idx.iter().enumerate() {
                let r = &mut self.rows[i];
                r.rate_phi = rp[k];
                r.rate_u_l2 = rl[k];
                r.rate_u_h1 = rh[k];
                done[i] = true;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::layer_case_fields;
    use crate::mesh::build_unit_cube_mesh;
    use crate::Vec3;

    #[test]
    fn rates() {
        let r = convergence_rates(&[4e-2, 1e-2], &[0.5, 0.25]).unwrap();
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 2.0).abs() < 1e-14);
        assert!(convergence_rates(&[1.0, 0.5], &[0.5, 0.3]).is_err());
    }

    #[test]
    fn published_rate_columns_from_values() {
        // Smooth case, eps = 1, Err(phi) on n = 4, 8, 16, 32.
        let e = [7.862e0, 4.924e0, 2.776e0, 1.466e0];
        let h = [0.25, 0.125, 0.0625, 0.03125];
        let r = convergence_rates(&e, &h).unwrap();
        for (got, want) in r[1..].iter().zip([0.68, 0.83, 0.92]) {
            assert!((got.unwrap() - want).abs() < 0.006);
        }
        // Layer case without the Nedelec map, Err0(phi0).
        let e = [5.475e-1, 3.643e-1, 2.527e-1, 1.777e-1];
        let r = convergence_rates(&e, &h).unwrap();
        for (got, want) in r[1..].iter().zip([0.59, 0.53, 0.51]) {
            assert!((got.unwrap() - want).abs() < 0.006);
        }
    }

    #[test]
    fn zero_function_gives_norm_of_exact() {
        let d = Discretization::new(build_unit_cube_mesh(4).unwrap()).unwrap();
        let l = layer_case_fields();
        let zero = FeFunction::zeros(&d, SpaceTag::Grad);
        let e = compute_error(ErrorKind::L2Scalar, &d, &zero, &l.u, 8).unwrap();
        assert!((e - (0.125f64).sqrt()).abs() < 1e-5, "{e}");
    }

    #[test]
    fn function_inside_space_has_no_error() {
        let d = Discretization::new(build_unit_cube_mesh(2).unwrap()).unwrap();
        let c = AnalyticField::scalar("c", |_: &Vec3| 1.75).with_gradient(|_| Vec3::zeros());
        let f = FeFunction::new(&d, SpaceTag::Q, vec![1.75; d.num_tets()]).unwrap();
        assert!(compute_error(ErrorKind::L2Scalar, &d, &f, &c, 8).unwrap() < 1e-12);
        assert!(compute_error(ErrorKind::H1SemiScalar, &d, &f, &c, 8).unwrap() < 1e-12);
        let v = AnalyticField::vector("v", |x: &Vec3| *x);
        assert!(matches!(compute_error(ErrorKind::L2Scalar, &d, &f, &v, 8), Err(FemError::Integrity(_))));
    }

    #[test]
    fn report_rates_by_series() {
        let row = |eps: f64, n: usize, e: f64| ConvergenceRow {
            test: "smooth".into(),
            method: "interp".into(),
            epsilon: eps,
            n,
            h: 3f64.sqrt() / n as f64,
            dof_phi: 0,
            dof_total: 0,
            err_phi: e,
            rate_phi: None,
            err_u_l2: e,
            rate_u_l2: None,
            err_u_h1: e,
            rate_u_h1: None,
            solve_seconds: 0.0,
        };
        let mut rep = ConvergenceReport { rows: vec![row(1.0, 4, 1.0), row(1.0, 8, 0.25), row(0.1, 4, 1.0), row(0.1, 8, 0.5)] };
        rep.fill_rates().unwrap();
        assert!((rep.rows[1].rate_phi.unwrap() - 2.0).abs() < 1e-14);
        assert!((rep.rows[3].rate_phi.unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(rep.rows[2].rate_phi, None);
    }
}
