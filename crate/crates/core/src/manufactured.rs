//! Closed-form fields for the two model problems and a finite-difference oracle.
//!
//! Smooth case: `u = S(x) S(y) S(z)` with `S(t) = sin^2(pi t)`, which satisfies
//! the clamped conditions `u = du/dn = 0` on the cube boundary, and
//! `f = eps^2 bilaplacian(u) - laplacian(u)`.
//!
//! Layer case: errors are measured against the reduced solution
//! `u0 = sin(pi x) sin(pi y) sin(pi z)` with `f = -laplacian(u0) = 3 pi^2 u0`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};

use nalgebra::Matrix3;
use num_traits::Float;

use crate::elements::{Arity, LocalField};
use crate::error::{FemError, Result};
use crate::Vec3;

type ScalarFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&Vec3) -> Matrix3<f64> + Send + Sync>;

/// A scalar or vector field given by closures, with whatever derivatives are known.
#[derive(Clone)]
pub struct AnalyticField {
    pub tag: String,
    pub arity: Arity,
    scalar: Option<ScalarFn>,
    vector: Option<VectorFn>,
    gradient: Option<VectorFn>,
    hessian: Option<MatrixFn>,
    laplacian: Option<ScalarFn>,
    bilaplacian: Option<ScalarFn>,
    jacobian: Option<MatrixFn>,
}

impl core::fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("AnalyticField").field("tag", &self.tag).field("arity", &self.arity).finish_non_exhaustive()
    }
}

fn missing(tag: &str, what: &str) -> FemError {
    FemError::Capability(format!("field `{tag}` does not provide its {what}"))
}

impl AnalyticField {
    pub fn scalar(tag: impl Into<String>, f: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        AnalyticField {
            tag: tag.into(),
            arity: Arity::Scalar,
            scalar: Some(Arc::new(f)),
            vector: None,
            gradient: None,
            hessian: None,
            laplacian: None,
            bilaplacian: None,
            jacobian: None,
        }
    }

    pub fn vector(tag: impl Into<String>, f: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        AnalyticField { arity: Arity::Vector, scalar: None, vector: Some(Arc::new(f)), ..Self::scalar(tag, |_| 0.0) }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&Vec3) -> Matrix3<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn with_laplacian(mut self, l: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Arc::new(l));
        self
    }

    pub fn with_bilaplacian(mut self, b: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        self.bilaplacian = Some(Arc::new(b));
        self
    }

    pub fn with_jacobian(mut self, j: impl Fn(&Vec3) -> Matrix3<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn value(&self, x: &Vec3) -> Result<f64> {
        self.scalar.as_ref().map(|f| f(x)).ok_or_else(|| missing(&self.tag, "scalar value"))
    }

    pub fn vector_value(&self, x: &Vec3) -> Result<Vec3> {
        self.vector.as_ref().map(|f| f(x)).ok_or_else(|| missing(&self.tag, "vector value"))
    }

    pub fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        self.gradient.as_ref().map(|f| f(x)).ok_or_else(|| missing(&self.tag, "gradient"))
    }

    pub fn hessian(&self, x: &Vec3) -> Result<Matrix3<f64>> {
        self.hessian.as_ref().map(|f| f(x)).ok_or_else(|| missing(&self.tag, "Hessian"))
    }

    pub fn laplacian(&self, x: &Vec3) -> Result<f64> {
        if let Some(l) = &self.laplacian {
            return Ok(l(x));
        }
        self.hessian(x).map(|h| h.trace()).map_err(|_| missing(&self.tag, "Laplacian"))
    }

    pub fn bilaplacian(&self, x: &Vec3) -> Result<f64> {
        self.bilaplacian.as_ref().map(|f| f(x)).ok_or_else(|| missing(&self.tag, "bi-Laplacian"))
    }

    pub fn jacobian(&self, x: &Vec3) -> Result<Matrix3<f64>> {
        self.jacobian.as_ref().map(|f| f(x)).ok_or_else(|| missing(&self.tag, "Jacobian"))
    }

    pub fn curl(&self, x: &Vec3) -> Result<Vec3> {
        let j = self.jacobian(x)?;
        Ok(Vec3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)]))
    }

    /// `grad u` as a vector field; its Jacobian is the Hessian when known.
    pub fn gradient_field(&self) -> Result<AnalyticField> {
        let g = self.gradient.clone().ok_or_else(|| missing(&self.tag, "gradient"))?;
        let mut out = AnalyticField::vector(format!("grad {}", self.tag), move |x| g(x));
        out.jacobian = self.hessian.clone();
        Ok(out)
    }

    /// `curl v` as a vector field without derivative data.
    pub fn curl_field(&self) -> Result<AnalyticField> {
        let j = self.jacobian.clone().ok_or_else(|| missing(&self.tag, "Jacobian"))?;
        Ok(AnalyticField::vector(format!("curl {}", self.tag), move |x| {
            let j = j(x);
            Vec3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
        }))
    }
}

impl LocalField for AnalyticField {
    fn arity(&self) -> Arity {
        self.arity
    }
    fn values(&self, x: &Vec3, _bary: &[f64; 4], out: &mut [f64]) -> Result<()> {
        match self.arity {
            Arity::Scalar => out[0] = self.value(x)?,
            Arity::Vector => out[..3].copy_from_slice(self.vector_value(x)?.as_slice()),
        }
        Ok(())
    }
    fn gradients(&self, x: &Vec3, _bary: &[f64; 4], out: &mut [Vec3]) -> Result<()> {
        out[0] = self.gradient(x)?;
        Ok(())
    }
    fn jacobians(&self, x: &Vec3, _bary: &[f64; 4], out: &mut [Matrix3<f64>]) -> Result<()> {
        out[0] = self.jacobian(x)?;
        Ok(())
    }
}

/// Exact solution data of one model problem.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    /// Scalar solution (or reduced solution in the layer case).
    pub u: AnalyticField,
    /// `grad u` with its Jacobian.
    pub phi: AnalyticField,
    /// Right-hand side.
    pub f: AnalyticField,
}

const PI: f64 = core::f64::consts::PI;

// Derivatives of S(t) = sin^2(pi t), orders 0 to 4.
fn s_derivs(t: f64) -> [f64; 5] {
    let s = Float::sin(PI * t);
    let (s2, c2) = (Float::sin(2.0 * PI * t), Float::cos(2.0 * PI * t));
    [s * s, PI * s2, 2.0 * PI * PI * c2, -4.0 * PI * PI * PI * s2, -8.0 * PI.powi(4) * c2]
}

fn smooth_laplacian(x: &Vec3) -> f64 {
    let [a, b, c] = [s_derivs(x[0]), s_derivs(x[1]), s_derivs(x[2])];
    a[2] * b[0] * c[0] + a[0] * b[2] * c[0] + a[0] * b[0] * c[2]
}

fn smooth_bilaplacian(x: &Vec3) -> f64 {
    let [a, b, c] = [s_derivs(x[0]), s_derivs(x[1]), s_derivs(x[2])];
    a[4] * b[0] * c[0]
        + a[0] * b[4] * c[0]
        + a[0] * b[0] * c[4]
        + 2.0 * (a[2] * b[2] * c[0] + a[2] * b[0] * c[2] + a[0] * b[2] * c[2])
}

fn smooth_gradient(x: &Vec3) -> Vec3 {
    let [a, b, c] = [s_derivs(x[0]), s_derivs(x[1]), s_derivs(x[2])];
    Vec3::new(a[1] * b[0] * c[0], a[0] * b[1] * c[0], a[0] * b[0] * c[1])
}

fn smooth_hessian(x: &Vec3) -> Matrix3<f64> {
    let d = [s_derivs(x[0]), s_derivs(x[1]), s_derivs(x[2])];
    // d^2 u / dx_i dx_j = prod_k S^(m_k)(x_k), m_k = [k == i] + [k == j].
    Matrix3::from_fn(|i, j| (0..3).map(|k| d[k][(k == i) as usize + (k == j) as usize]).product())
}

/// Smooth case with `u = sin^2(pi x) sin^2(pi y) sin^2(pi z)`.
pub fn smooth_case_fields(epsilon: f64) -> ManufacturedCase {
    let u = AnalyticField::scalar("u", |x| s_derivs(x[0])[0] * s_derivs(x[1])[0] * s_derivs(x[2])[0])
        .with_gradient(smooth_gradient)
        .with_hessian(smooth_hessian)
        .with_laplacian(smooth_laplacian)
        .with_bilaplacian(smooth_bilaplacian);
    let phi = u.gradient_field().expect("gradient provided");
    let e2 = epsilon * epsilon;
    let f = AnalyticField::scalar("f", move |x| e2 * smooth_bilaplacian(x) - smooth_laplacian(x));
    ManufacturedCase { u, phi, f }
}

fn sines(x: &Vec3) -> ([f64; 3], [f64; 3]) {
    let s = [Float::sin(PI * x[0]), Float::sin(PI * x[1]), Float::sin(PI * x[2])];
    let c = [Float::cos(PI * x[0]), Float::cos(PI * x[1]), Float::cos(PI * x[2])];
    (s, c)
}

/// Layer case: reduced solution `u0 = sin(pi x) sin(pi y) sin(pi z)`, `f = 3 pi^2 u0`.
pub fn layer_case_fields() -> ManufacturedCase {
    let u0 = |x: &Vec3| {
        let (s, _) = sines(x);
        s[0] * s[1] * s[2]
    };
    let u = AnalyticField::scalar("u0", u0)
        .with_gradient(|x| {
            let (s, c) = sines(x);
            Vec3::new(c[0] * s[1] * s[2], s[0] * c[1] * s[2], s[0] * s[1] * c[2]) * PI
        })
        .with_hessian(|x| {
            let (s, c) = sines(x);
            Matrix3::from_fn(|i, j| {
                let p: f64 = (0..3).map(|k| if k == i || k == j { if i == j { -s[k] } else { c[k] } } else { s[k] }).product();
                PI * PI * p
            })
        })
        .with_laplacian(move |x| -3.0 * PI * PI * u0(x))
        .with_bilaplacian(move |x| 9.0 * PI.powi(4) * u0(x));
    let phi = u.gradient_field().expect("gradient provided");
    let f = AnalyticField::scalar("f", move |x| 3.0 * PI * PI * u0(x));
    ManufacturedCase { u, phi, f }
}

/// Which provided derivative the finite-difference oracle checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdCheck {
    /// Scalar gradient against differences of the value.
    Gradient,
    /// Scalar Hessian against differences of the gradient.
    Hessian,
    /// Vector Jacobian against differences of the value.
    Jacobian,
    /// Laplacian against second differences of the value.
    Laplacian,
    /// Bi-Laplacian against nested second differences of the value.
    Bilaplacian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub check: String,
    pub points: usize,
    pub step: f64,
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Step used for first and second differences of provided derivatives.
pub const FD_STEP: f64 = 1e-4;
/// Nested second differences amplify rounding by `step^-4`, so they use a coarser step.
pub const FD_NESTED_STEP: f64 = 1e-2;
/// Deviations are measured relative to `max(|exact|, FD_FLOOR * max_samples |exact|)`
/// so that samples near a zero of the exact quantity do not dominate.
pub const FD_FLOOR: f64 = 1e-2;

fn d1(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, axis: usize, h: f64) -> f64 {
    let e = Vec3::ith(axis, h);
    (-f(&(x + 2.0 * e)) + 8.0 * f(&(x + e)) - 8.0 * f(&(x - e)) + f(&(x - 2.0 * e))) / (12.0 * h)
}

fn d2(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, axis: usize, h: f64) -> f64 {
    let e = Vec3::ith(axis, h);
    (-f(&(x + 2.0 * e)) + 16.0 * f(&(x + e)) - 30.0 * f(x) + 16.0 * f(&(x - e)) - f(&(x - 2.0 * e))) / (12.0 * h * h)
}

fn fd_laplacian(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, h: f64) -> f64 {
    (0..3).map(|a| d2(f, x, a, h)).sum()
}

/// Nested fourth-order stencil for the bi-Laplacian.
pub fn fd_bilaplacian(f: &dyn Fn(&Vec3) -> f64, x: &Vec3, h: f64) -> f64 {
    let lap = |y: &Vec3| fd_laplacian(f, y, h);
    fd_laplacian(&lap, x, h)
}

/// `eps^2 bilaplacian(u) - laplacian(u)` by finite differences of `u` alone.
pub fn fd_source(u: &AnalyticField, epsilon: f64, x: &Vec3) -> Result<f64> {
    let value = |y: &Vec3| u.value(y).unwrap_or(f64::NAN);
    u.value(x)?;
    Ok(epsilon * epsilon * fd_bilaplacian(&value, x, FD_NESTED_STEP) - fd_laplacian(&value, x, FD_STEP))
}

fn relative_deviation(exact: &[f64], approx: &[f64]) -> f64 {
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = FD_FLOOR * scale;
    exact
        .iter()
        .zip(approx)
        .map(|(e, a)| (e - a).abs() / e.abs().max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn report(check: String, points: usize, step: f64, exact: &[f64], approx: &[f64], tolerance: f64) -> FdReport {
    let dev = relative_deviation(exact, approx);
    FdReport { check, points, step, max_relative_deviation: dev, tolerance, passed: dev <= tolerance }
}

/// Compares a provided derivative of `field` against finite differences at the
/// given points. Components are compared entrywise.
pub fn fd_validate(field: &AnalyticField, check: FdCheck, points: &[Vec3], tolerance: f64) -> Result<FdReport> {
    let mut exact = Vec::new();
    let mut approx = Vec::new();
    let value = |y: &Vec3| field.value(y).unwrap_or(f64::NAN);
    let mut step = FD_STEP;
    for x in points {
        match check {
            FdCheck::Gradient => {
                let g = field.gradient(x)?;
                field.value(x)?;
                for a in 0..3 {
                    exact.push(g[a]);
                    approx.push(d1(&value, x, a, FD_STEP));
                }
            }
            FdCheck::Hessian => {
                let h = field.hessian(x)?;
                field.gradient(x)?;
                for r in 0..3 {
                    let gr = |y: &Vec3| field.gradient(y).map(|g| g[r]).unwrap_or(f64::NAN);
                    for c in 0..3 {
                        exact.push(h[(r, c)]);
                        approx.push(d1(&gr, x, c, FD_STEP));
                    }
                }
            }
            FdCheck::Jacobian => {
                let j = field.jacobian(x)?;
                field.vector_value(x)?;
                for r in 0..3 {
                    let vr = |y: &Vec3| field.vector_value(y).map(|v| v[r]).unwrap_or(f64::NAN);
                    for c in 0..3 {
                        exact.push(j[(r, c)]);
                        approx.push(d1(&vr, x, c, FD_STEP));
                    }
                }
            }
            FdCheck::Laplacian => {
                exact.push(field.laplacian(x)?);
                field.value(x)?;
                approx.push(fd_laplacian(&value, x, FD_STEP));
            }
            FdCheck::Bilaplacian => {
                exact.push(field.bilaplacian(x)?);
                field.value(x)?;
                approx.push(fd_bilaplacian(&value, x, FD_NESTED_STEP));
                step = FD_NESTED_STEP;
            }
        }
    }
    Ok(report(format!("{} {:?}", field.tag, check), points.len(), step, &exact, &approx, tolerance))
}

/// Compares a source term `f` against `eps^2 bilaplacian(u) - laplacian(u)`
/// computed by finite differences of `u`.
pub fn fd_validate_source(u: &AnalyticField, f: &AnalyticField, epsilon: f64, points: &[Vec3], tolerance: f64) -> Result<FdReport> {
    let mut exact = vec![0.0; points.len()];
    let mut approx = vec![0.0; points.len()];
    for (k, x) in points.iter().enumerate() {
        exact[k] = f.value(x)?;
        approx[k] = fd_source(u, epsilon, x)?;
    }
    Ok(report(format!("{} source eps={epsilon:e}", f.tag), points.len(), FD_NESTED_STEP, &exact, &approx, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points() -> Vec<Vec3> {
        // A fixed scatter of interior points (golden-ratio sequence).
        let g = [0.618_033_988_75, 0.754_877_666_25, 0.569_840_290_998];
        (1..=50)
            .map(|k| {
                let t = k as f64;
                Vec3::new((0.1 + g[0] * t) % 0.8 + 0.1, (0.1 + g[1] * t) % 0.8 + 0.1, (0.1 + g[2] * t) % 0.8 + 0.1)
            })
            .collect()
    }

    #[test]
    fn worked_values() {
        let c = Vec3::new(0.5, 0.5, 0.5);
        let s = smooth_case_fields(1e-4);
        assert!((s.u.value(&c).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.u.gradient(&c).unwrap().norm() < 1e-14);
        let l = layer_case_fields();
        assert!((l.f.value(&c).unwrap() - 3.0 * PI * PI).abs() < 1e-12);
        assert!(l.u.gradient(&c).unwrap().norm() < 1e-14);
        assert!(l.u.value(&Vec3::new(0.0, 0.3, 0.7)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn smooth_derivatives_pass_oracle() {
        let s = smooth_case_fields(1.0);
        let pts = points();
        for check in [FdCheck::Gradient, FdCheck::Hessian, FdCheck::Laplacian] {
            let r = fd_validate(&s.u, check, &pts, 1e-6).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(fd_validate(&s.phi, FdCheck::Jacobian, &pts, 1e-6).unwrap().passed);
        let r = fd_validate(&s.u, FdCheck::Bilaplacian, &pts, 1e-5).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn layer_derivatives_pass_oracle() {
        let l = layer_case_fields();
        let pts = points();
        for check in [FdCheck::Gradient, FdCheck::Hessian, FdCheck::Laplacian] {
            assert!(fd_validate(&l.u, check, &pts, 1e-6).unwrap().passed);
        }
        assert!(fd_validate_source(&l.u, &l.f, 0.0, &pts, 1e-6).unwrap().passed);
    }

    #[test]
    fn source_matches_oracle() {
        for eps in [1.0, 1e-1, 1e-4] {
            let s = smooth_case_fields(eps);
            let r = fd_validate_source(&s.u, &s.f, eps, &points(), 1e-5).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn corrupted_derivative_fails_oracle() {
        let s = smooth_case_fields(1.0);
        let bad = s.u.clone().with_gradient(|x| {
            let mut g = smooth_gradient(x);
            g[1] = -g[1];
            g
        });
        assert!(!fd_validate(&bad, FdCheck::Gradient, &points(), 1e-6).unwrap().passed);
    }

    #[test]
    fn clamped_boundary_conditions() {
        let s = smooth_case_fields(1.0);
        for i in 0..=10 {
            for j in 0..=10 {
                let (a, b) = (i as f64 / 10.0, j as f64 / 10.0);
                for x in [
                    Vec3::new(0.0, a, b),
                    Vec3::new(1.0, a, b),
                    Vec3::new(a, 0.0, b),
                    Vec3::new(a, 1.0, b),
                    Vec3::new(a, b, 0.0),
                    Vec3::new(a, b, 1.0),
                ] {
                    assert!(s.u.value(&x).unwrap().abs() < 1e-12);
                    assert!(s.u.gradient(&x).unwrap().norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn missing_derivative_is_reported() {
        let f = AnalyticField::scalar("bare", |x| x[0]);
        assert!(matches!(f.gradient(&Vec3::zeros()), Err(FemError::Capability(_))));
        assert!(fd_validate(&f, FdCheck::Gradient, &points(), 1e-6).is_err());
    }
}
