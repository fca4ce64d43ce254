//! The six local elements and their nodal bases.
//!
//! Shape spaces are spanned by fixed barycentric monomials; nodal bases are
//! obtained by inverting the matrix of degrees of freedom applied to those
//! monomials. All orientation-dependent functionals (edge tangents, edge moment
//! weights, face normals) use the global conventions of [`crate::mesh`], so a
//! DoF computed from either side of a shared entity has the same value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{FemError, Result};
use crate::mesh::TetGeometry;
use crate::quadrature::{get_rule, EntityKind, QuadratureRule};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    LagrangeP2,
    Nedelec2,
    Rt0,
    P0,
    PhiNc,
    WNc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Scalar,
    Vector,
}

impl Arity {
    pub fn components(self) -> usize {
        match self {
            Arity::Scalar => 1,
            Arity::Vector => 3,
        }
    }
}

/// Number of DoFs attached to each vertex, edge, face and to the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub per_vertex: usize,
    pub per_edge: usize,
    pub per_face: usize,
    pub per_cell: usize,
}

impl DofLayout {
    pub fn total(&self) -> usize {
        4 * self.per_vertex + 6 * self.per_edge + 4 * self.per_face + self.per_cell
    }
}

/// The functional behind one local DoF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofFunctional {
    /// Point value at a local vertex.
    VertexValue(usize),
    /// Integral over a local edge.
    EdgeIntegral(usize),
    /// `int_e (v . t_e) lambda_k ds`, `k` the local vertex that is first (0) or
    /// second (1) in global order along the edge.
    EdgeMoment(usize, usize),
    /// `int_F v . n_F dS`.
    FaceFlux(usize),
    /// `int_F grad v . n_F dS`.
    FaceNormalDerivative(usize),
    /// Mean value over the cell.
    CellMean,
}

impl ElementKind {
    pub const ALL: [ElementKind; 6] = [
        ElementKind::LagrangeP2,
        ElementKind::Nedelec2,
        ElementKind::Rt0,
        ElementKind::P0,
        ElementKind::PhiNc,
        ElementKind::WNc,
    ];

    pub fn dim(self) -> usize {
        match self {
            ElementKind::LagrangeP2 => 10,
            ElementKind::Nedelec2 => 12,
            ElementKind::Rt0 => 4,
            ElementKind::P0 => 1,
            ElementKind::PhiNc => 16,
            ElementKind::WNc => 14,
        }
    }

    pub fn arity(self) -> Arity {
        match self {
            ElementKind::LagrangeP2 | ElementKind::P0 | ElementKind::WNc => Arity::Scalar,
            _ => Arity::Vector,
        }
    }

    pub fn layout(self) -> DofLayout {
        let l = |per_vertex, per_edge, per_face, per_cell| DofLayout { per_vertex, per_edge, per_face, per_cell };
        match self {
            ElementKind::LagrangeP2 => l(1, 1, 0, 0),
            ElementKind::Nedelec2 => l(0, 2, 0, 0),
            ElementKind::Rt0 => l(0, 0, 1, 0),
            ElementKind::P0 => l(0, 0, 0, 1),
            ElementKind::PhiNc => l(0, 2, 1, 0),
            ElementKind::WNc => l(1, 1, 1, 0),
        }
    }

    /// Local DoFs in entity-major order: vertices, edges, faces, cell.
    pub fn functionals(self) -> Vec<DofFunctional> {
        use DofFunctional as D;
        let mut out = Vec::with_capacity(self.dim());
        match self {
            ElementKind::LagrangeP2 => {
                out.extend((0..4).map(D::VertexValue));
                out.extend((0..6).map(D::EdgeIntegral));
            }
            ElementKind::WNc => {
                out.extend((0..4).map(D::VertexValue));
                out.extend((0..6).map(D::EdgeIntegral));
                out.extend((0..4).map(D::FaceNormalDerivative));
            }
            ElementKind::Nedelec2 => out.extend((0..6).flat_map(|e| [D::EdgeMoment(e, 0), D::EdgeMoment(e, 1)])),
            ElementKind::PhiNc => {
                out.extend((0..6).flat_map(|e| [D::EdgeMoment(e, 0), D::EdgeMoment(e, 1)]));
                out.extend((0..4).map(D::FaceFlux));
            }
            ElementKind::Rt0 => out.extend((0..4).map(D::FaceFlux)),
            ElementKind::P0 => out.push(D::CellMean),
        }
        out
    }
}

// Exponents of the barycentric monomials spanning P2.
const P2_EXPONENTS: [[i32; 4]; 10] = [
    [2, 0, 0, 0],
    [0, 2, 0, 0],
    [0, 0, 2, 0],
    [0, 0, 0, 2],
    [1, 1, 0, 0],
    [1, 0, 1, 0],
    [1, 0, 0, 1],
    [0, 1, 1, 0],
    [0, 1, 0, 1],
    [0, 0, 1, 1],
];

// b_T * lambda_i.
const BUBBLE_EXPONENTS: [[i32; 4]; 4] = [[2, 1, 1, 1], [1, 2, 1, 1], [1, 1, 2, 1], [1, 1, 1, 2]];

fn bary_pow(l: &[f64; 4], a: [i32; 4]) -> f64 {
    let mut v = 1.0;
    for m in 0..4 {
        match a[m] {
            0 => {}
            e if e < 0 => return 0.0,
            e => v *= powi(l[m], e),
        }
    }
    v
}

fn powi(x: f64, e: i32) -> f64 {
    (0..e).fold(1.0, |acc, _| acc * x)
}

fn mono_value(l: &[f64; 4], a: [i32; 4]) -> f64 {
    bary_pow(l, a)
}

fn mono_gradient(g: &[Vec3; 4], l: &[f64; 4], a: [i32; 4]) -> Vec3 {
    let mut out = Vec3::zeros();
    for m in 0..4 {
        if a[m] > 0 {
            let mut b = a;
            b[m] -= 1;
            out += g[m] * (a[m] as f64 * bary_pow(l, b));
        }
    }
    out
}

fn mono_hessian(g: &[Vec3; 4], l: &[f64; 4], a: [i32; 4]) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for m in 0..4 {
        for n in 0..4 {
            let c = if m == n { a[m] * (a[m] - 1) } else { a[m] * a[n] };
            if c == 0 {
                continue;
            }
            let mut b = a;
            b[m] -= 1;
            b[n] -= 1;
            out += g[m] * g[n].transpose() * (c as f64 * bary_pow(l, b));
        }
    }
    out
}

fn scalar_exponent(kind: ElementKind, j: usize) -> [i32; 4] {
    match kind {
        ElementKind::P0 => [0; 4],
        ElementKind::LagrangeP2 => P2_EXPONENTS[j],
        ElementKind::WNc if j < 10 => P2_EXPONENTS[j],
        ElementKind::WNc => BUBBLE_EXPONENTS[j - 10],
        _ => unreachable!("vector element"),
    }
}

/// Writes shape monomial values into `values` (`dim * components` entries,
/// component-minor) and first derivatives into `derivs` when given: gradients
/// (3 per monomial) for scalar kinds, row-major Jacobians `d v_k / d x_l`
/// (9 per monomial) for vector kinds.
pub fn eval_monomials(kind: ElementKind, geom: &TetGeometry, l: &[f64; 4], values: &mut [f64], derivs: Option<&mut [f64]>) {
    let g = &geom.grad_lambda;
    let dim = kind.dim();
    match kind.arity() {
        Arity::Scalar => {
            for j in 0..dim {
                values[j] = mono_value(l, scalar_exponent(kind, j));
            }
            if let Some(d) = derivs {
                for j in 0..dim {
                    let gr = mono_gradient(g, l, scalar_exponent(kind, j));
                    d[3 * j..3 * j + 3].copy_from_slice(gr.as_slice());
                }
            }
        }
        Arity::Vector => {
            let mut jac = [Matrix3::zeros(); 16];
            let mut val = [Vec3::zeros(); 16];
            match kind {
                ElementKind::Nedelec2 | ElementKind::PhiNc => {
                    for i in 0..4 {
                        for k in 0..3 {
                            val[3 * i + k][k] = l[i];
                            jac[3 * i + k].set_row(k, &g[i].transpose());
                        }
                    }
                    if kind == ElementKind::PhiNc {
                        for i in 0..4 {
                            val[12 + i] = mono_gradient(g, l, BUBBLE_EXPONENTS[i]);
                            jac[12 + i] = mono_hessian(g, l, BUBBLE_EXPONENTS[i]);
                        }
                    }
                }
                ElementKind::Rt0 => {
                    for k in 0..3 {
                        val[k][k] = 1.0;
                    }
                    val[3] = geom.point(l) - geom.centroid();
                    jac[3] = Matrix3::identity();
                }
                _ => unreachable!("scalar element"),
            }
            for j in 0..dim {
                values[3 * j..3 * j + 3].copy_from_slice(val[j].as_slice());
            }
            if let Some(d) = derivs {
                for j in 0..dim {
                    let m = &jac[j];
                    for r in 0..3 {
                        for c in 0..3 {
                            d[9 * j + 3 * r + c] = m[(r, c)];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeQuantity {
    Values,
    Gradients,
    Curls,
}

/// Shape monomials of `kind` evaluated at a barycentric point. Rows index the
/// monomials; columns hold the value components, the gradient (scalar kinds)
/// or the row-major Jacobian (vector kinds), or the curl.
pub fn eval_shape_basis(kind: ElementKind, geom: &TetGeometry, point: &[f64; 4], what: ShapeQuantity) -> Result<DMatrix<f64>> {
    let dim = kind.dim();
    let comps = kind.arity().components();
    let mut values = vec![0.0; dim * comps];
    let mut derivs = vec![0.0; dim * comps * 3];
    if what == ShapeQuantity::Curls && kind.arity() == Arity::Scalar {
        return Err(FemError::Capability(format!("curl of the scalar element {kind:?}")));
    }
    eval_monomials(kind, geom, point, &mut values, Some(&mut derivs));
    Ok(match what {
        ShapeQuantity::Values => DMatrix::from_row_slice(dim, comps, &values),
        ShapeQuantity::Gradients => DMatrix::from_row_slice(dim, 3 * comps, &derivs),
        ShapeQuantity::Curls => DMatrix::from_fn(dim, 3, |j, c| {
            let d = &derivs[9 * j..9 * j + 9];
            curl_from_jacobian(d)[c]
        }),
    })
}

/// Curl of a vector field from its row-major Jacobian.
pub fn curl_from_jacobian(d: &[f64]) -> Vec3 {
    Vec3::new(d[7] - d[5], d[2] - d[6], d[3] - d[1])
}

/// A family of functions that DoF functionals can be applied to.
///
/// Values are written flat: one entry per function for scalar families, three
/// per function for vector families.
pub trait LocalField {
    fn count(&self) -> usize {
        1
    }
    fn arity(&self) -> Arity;
    fn values(&self, x: &Vec3, bary: &[f64; 4], out: &mut [f64]) -> Result<()>;
    /// Gradients of scalar families.
    fn gradients(&self, x: &Vec3, bary: &[f64; 4], out: &mut [Vec3]) -> Result<()> {
        let _ = (x, bary, out);
        Err(FemError::Capability("field does not provide gradients".into()))
    }
    /// Jacobians `d v_k / d x_l` of vector families.
    fn jacobians(&self, x: &Vec3, bary: &[f64; 4], out: &mut [Matrix3<f64>]) -> Result<()> {
        let _ = (x, bary, out);
        Err(FemError::Capability("field does not provide Jacobians".into()))
    }
}

/// The shape monomials of an element on one tet.
pub struct Monomials<'a> {
    pub kind: ElementKind,
    pub geom: &'a TetGeometry,
}

impl LocalField for Monomials<'_> {
    fn count(&self) -> usize {
        self.kind.dim()
    }
    fn arity(&self) -> Arity {
        self.kind.arity()
    }
    fn values(&self, _x: &Vec3, bary: &[f64; 4], out: &mut [f64]) -> Result<()> {
        eval_monomials(self.kind, self.geom, bary, out, None);
        Ok(())
    }
    fn gradients(&self, _x: &Vec3, bary: &[f64; 4], out: &mut [Vec3]) -> Result<()> {
        if self.kind.arity() != Arity::Scalar {
            return Err(FemError::Capability("gradients of a vector element".into()));
        }
        let dim = self.kind.dim();
        let mut vals = [0.0; 16];
        let mut d = [0.0; 48];
        eval_monomials(self.kind, self.geom, bary, &mut vals[..dim], Some(&mut d[..3 * dim]));
        for (j, o) in out.iter_mut().enumerate().take(dim) {
            *o = Vec3::new(d[3 * j], d[3 * j + 1], d[3 * j + 2]);
        }
        Ok(())
    }
    fn jacobians(&self, _x: &Vec3, bary: &[f64; 4], out: &mut [Matrix3<f64>]) -> Result<()> {
        if self.kind.arity() != Arity::Vector {
            return Err(FemError::Capability("Jacobians of a scalar element".into()));
        }
        let dim = self.kind.dim();
        let mut vals = [0.0; 48];
        let mut d = [0.0; 144];
        eval_monomials(self.kind, self.geom, bary, &mut vals[..3 * dim], Some(&mut d[..9 * dim]));
        for (j, o) in out.iter_mut().enumerate().take(dim) {
            *o = Matrix3::from_row_slice(&d[9 * j..9 * j + 9]);
        }
        Ok(())
    }
}

/// Quadrature degrees used to evaluate DoF functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofQuadrature {
    pub edge: usize,
    pub triangle: usize,
    pub tet: usize,
}

impl Default for DofQuadrature {
    fn default() -> Self {
        DofQuadrature { edge: 5, triangle: 4, tet: 8 }
    }
}

struct DofRules {
    edge: QuadratureRule,
    triangle: QuadratureRule,
    tet: QuadratureRule,
}

impl DofRules {
    fn new(q: DofQuadrature) -> Result<Self> {
        Ok(DofRules {
            edge: get_rule(EntityKind::Edge, q.edge)?,
            triangle: get_rule(EntityKind::Triangle, q.triangle)?,
            tet: get_rule(EntityKind::Tet, q.tet)?,
        })
    }
}

/// Applies every DoF functional of `kind` to every function of `field`; the
/// result has one row per DoF and one column per function.
pub fn apply_dofs(kind: ElementKind, geom: &TetGeometry, field: &dyn LocalField) -> Result<DMatrix<f64>> {
    apply_dofs_with(kind, geom, field, DofQuadrature::default())
}

pub fn apply_dofs_with(kind: ElementKind, geom: &TetGeometry, field: &dyn LocalField, q: DofQuadrature) -> Result<DMatrix<f64>> {
    if field.arity() != kind.arity() {
        return Err(FemError::Integrity(format!("{kind:?} DoFs applied to a field of arity {:?}", field.arity())));
    }
    let rules = DofRules::new(q)?;
    let count = field.count();
    let comps = kind.arity().components();
    let mut vals = vec![0.0; count * comps];
    let mut grads = vec![Vec3::zeros(); count];
    let functionals = kind.functionals();
    let mut out = DMatrix::zeros(functionals.len(), count);

    for (i, f) in functionals.iter().enumerate() {
        let mut row = vec![0.0; count];
        match *f {
            DofFunctional::VertexValue(v) => {
                let mut l = [0.0; 4];
                l[v] = 1.0;
                field.values(&geom.vertices[v], &l, &mut vals)?;
                row.copy_from_slice(&vals);
            }
            DofFunctional::EdgeIntegral(e) | DofFunctional::EdgeMoment(e, _) => {
                let [a, b] = geom.edge_vertices(e);
                let len = geom.edge_lengths[e];
                let t = geom.edge_tangents[e];
                for (p, w) in rules.edge.iter() {
                    let mut l = [0.0; 4];
                    l[a] = p[0];
                    l[b] = p[1];
                    field.values(&geom.point(&l), &l, &mut vals)?;
                    match *f {
                        DofFunctional::EdgeIntegral(_) => {
                            for (r, v) in row.iter_mut().zip(&vals) {
                                *r += w * len * v;
                            }
                        }
                        DofFunctional::EdgeMoment(_, k) => {
                            let weight = w * len * p[k];
                            for (j, r) in row.iter_mut().enumerate() {
                                *r += weight * (t[0] * vals[3 * j] + t[1] * vals[3 * j + 1] + t[2] * vals[3 * j + 2]);
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            }
            DofFunctional::FaceFlux(fc) | DofFunctional::FaceNormalDerivative(fc) => {
                let vs = geom.face_vertices(fc);
                let n = geom.global_normal(fc);
                let area = geom.face_areas[fc];
                for (p, w) in rules.triangle.iter() {
                    let mut l = [0.0; 4];
                    for (m, &v) in vs.iter().enumerate() {
                        l[v] = p[m];
                    }
                    let x = geom.point(&l);
                    if let DofFunctional::FaceFlux(_) = f {
                        field.values(&x, &l, &mut vals)?;
                        for (j, r) in row.iter_mut().enumerate() {
                            *r += w * area * (n[0] * vals[3 * j] + n[1] * vals[3 * j + 1] + n[2] * vals[3 * j + 2]);
                        }
                    } else {
                        field.gradients(&x, &l, &mut grads)?;
                        for (r, gr) in row.iter_mut().zip(&grads) {
                            *r += w * area * gr.dot(&n);
                        }
                    }
                }
            }
            DofFunctional::CellMean => {
                for (l, w) in rules.tet.tet_points() {
                    field.values(&geom.point(&l), &l, &mut vals)?;
                    for (r, v) in row.iter_mut().zip(&vals) {
                        *r += w * v;
                    }
                }
            }
        }
        for (j, r) in row.into_iter().enumerate() {
            out[(i, j)] = r;
        }
    }
    Ok(out)
}

/// Condition number above which a DoF matrix is treated as singular.
pub const UNISOLVENCE_LIMIT: f64 = 1e13;

/// Nodal basis of one element on one tet: column `j` holds the monomial
/// coefficients of the basis function dual to DoF `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    pub kind: ElementKind,
    pub tet: usize,
    pub coeffs: DMatrix<f64>,
}

/// Generalized Vandermonde matrix `V[i][j] = DoF_i(monomial_j)`.
pub fn dof_matrix(kind: ElementKind, geom: &TetGeometry) -> Result<DMatrix<f64>> {
    apply_dofs(kind, geom, &Monomials { kind, geom })
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn invert_dof_matrix(kind: ElementKind, v: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let nv = norm1(&v);
    match v.lu().try_inverse() {
        Some(inv) => {
            let cond = nv * norm1(&inv);
            if cond.is_finite() && cond < UNISOLVENCE_LIMIT {
                Ok((inv, cond))
            } else {
                Err(FemError::Unisolvence { kind, condition: cond })
            }
        }
        None => Err(FemError::Unisolvence { kind, condition: f64::INFINITY }),
    }
}

pub fn local_nodal_basis(kind: ElementKind, geom: &TetGeometry, tet: usize) -> Result<LocalBasis> {
    let (coeffs, _) = invert_dof_matrix(kind, dof_matrix(kind, geom)?)?;
    Ok(LocalBasis { kind, tet, coeffs })
}

/// 1-norm condition number of the DoF matrix.
pub fn unisolvence_check(kind: ElementKind, geom: &TetGeometry) -> Result<f64> {
    invert_dof_matrix(kind, dof_matrix(kind, geom)?).map(|(_, c)| c)
}

/// Values and first derivatives of a nodal basis at one point, laid out like
/// [`eval_monomials`].
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl LocalBasis {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Evaluates all nodal basis functions at a barycentric point.
    pub fn eval(&self, geom: &TetGeometry, l: &[f64; 4], out: &mut BasisValues, scratch: &mut BasisValues) {
        let dim = self.dim();
        let comps = self.kind.arity().components();
        scratch.values.resize(dim * comps, 0.0);
        scratch.derivs.resize(dim * comps * 3, 0.0);
        out.values.resize(dim * comps, 0.0);
        out.derivs.resize(dim * comps * 3, 0.0);
        eval_monomials(self.kind, geom, l, &mut scratch.values, Some(&mut scratch.derivs));
        combine(&self.coeffs, &scratch.values, comps, &mut out.values);
        combine(&self.coeffs, &scratch.derivs, 3 * comps, &mut out.derivs);
    }

    pub fn new_buffers(&self) -> (BasisValues, BasisValues) {
        let empty = || BasisValues { values: Vec::new(), derivs: Vec::new() };
        (empty(), empty())
    }

    /// Coefficients, in this basis, of a function whose local DoF values are given.
    pub fn dof_values_to_monomials(&self, dofs: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|m| (0..self.dim()).map(|j| self.coeffs[(m, j)] * dofs[j]).sum()).collect()
    }
}

// out[j*w + c] = sum_m C[m][j] * mono[m*w + c]
fn combine(c: &DMatrix<f64>, mono: &[f64], width: usize, out: &mut [f64]) {
    let dim = c.nrows();
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..dim {
        let o = &mut out[j * width..(j + 1) * width];
        for m in 0..dim {
            let cm = c[(m, j)];
            if cm == 0.0 {
                continue;
            }
            let src = &mono[m * width..(m + 1) * width];
            for (a, b) in o.iter_mut().zip(src) {
                *a += cm * b;
            }
        }
    }
}

/// The nodal basis functions of one element, as a [`LocalField`].
pub struct BasisField<'a> {
    pub basis: &'a LocalBasis,
    pub geom: &'a TetGeometry,
}

impl LocalField for BasisField<'_> {
    fn count(&self) -> usize {
        self.basis.dim()
    }
    fn arity(&self) -> Arity {
        self.basis.kind.arity()
    }
    fn values(&self, _x: &Vec3, bary: &[f64; 4], out: &mut [f64]) -> Result<()> {
        let (mut o, mut s) = self.basis.new_buffers();
        self.basis.eval(self.geom, bary, &mut o, &mut s);
        out.copy_from_slice(&o.values);
        Ok(())
    }
    fn gradients(&self, _x: &Vec3, bary: &[f64; 4], out: &mut [Vec3]) -> Result<()> {
        if self.basis.kind.arity() != Arity::Scalar {
            return Err(FemError::Capability("gradients of a vector element".into()));
        }
        let (mut o, mut s) = self.basis.new_buffers();
        self.basis.eval(self.geom, bary, &mut o, &mut s);
        for (j, g) in out.iter_mut().enumerate() {
            *g = Vec3::new(o.derivs[3 * j], o.derivs[3 * j + 1], o.derivs[3 * j + 2]);
        }
        Ok(())
    }
    fn jacobians(&self, _x: &Vec3, bary: &[f64; 4], out: &mut [Matrix3<f64>]) -> Result<()> {
        if self.basis.kind.arity() != Arity::Vector {
            return Err(FemError::Capability("Jacobians of a scalar element".into()));
        }
        let (mut o, mut s) = self.basis.new_buffers();
        self.basis.eval(self.geom, bary, &mut o, &mut s);
        for (j, m) in out.iter_mut().enumerate() {
            *m = Matrix3::from_row_slice(&o.derivs[9 * j..9 * j + 9]);
        }
        Ok(())
    }
}

/// Gradients of a scalar family viewed as a vector family.
pub struct GradientOf<'a>(pub &'a dyn LocalField);

impl LocalField for GradientOf<'_> {
    fn count(&self) -> usize {
        self.0.count()
    }
    fn arity(&self) -> Arity {
        Arity::Vector
    }
    fn values(&self, x: &Vec3, bary: &[f64; 4], out: &mut [f64]) -> Result<()> {
        let mut g = vec![Vec3::zeros(); self.0.count()];
        self.0.gradients(x, bary, &mut g)?;
        for (j, v) in g.iter().enumerate() {
            out[3 * j..3 * j + 3].copy_from_slice(v.as_slice());
        }
        Ok(())
    }
}

/// Curls of a vector family.
pub struct CurlOf<'a>(pub &'a dyn LocalField);

impl LocalField for CurlOf<'_> {
    fn count(&self) -> usize {
        self.0.count()
    }
    fn arity(&self) -> Arity {
        Arity::Vector
    }
    fn values(&self, x: &Vec3, bary: &[f64; 4], out: &mut [f64]) -> Result<()> {
        let mut j = vec![Matrix3::zeros(); self.0.count()];
        self.0.jacobians(x, bary, &mut j)?;
        for (k, m) in j.iter().enumerate() {
            let c = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
            out[3 * k..3 * k + 3].copy_from_slice(c.as_slice());
        }
        Ok(())
    }
}

/// Divergences of a vector family.
pub struct DivOf<'a>(pub &'a dyn LocalField);

impl LocalField for DivOf<'_> {
    fn count(&self) -> usize {
        self.0.count()
    }
    fn arity(&self) -> Arity {
        Arity::Scalar
    }
    fn values(&self, x: &Vec3, bary: &[f64; 4], out: &mut [f64]) -> Result<()> {
        let mut j = vec![Matrix3::zeros(); self.0.count()];
        self.0.jacobians(x, bary, &mut j)?;
        for (o, m) in out.iter_mut().zip(&j) {
            *o = m.trace();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> TetGeometry {
        let v = [
            Vec3::new(0.1, 0.0, 0.2),
            Vec3::new(1.2, 0.3, 0.0),
            Vec3::new(0.2, 0.9, 0.1),
            Vec3::new(0.4, 0.3, 1.1),
        ];
        TetGeometry::new(0, v, [7, 2, 5, 3]).unwrap()
    }

    #[test]
    fn layouts_match_dimensions() {
        for kind in ElementKind::ALL {
            assert_eq!(kind.layout().total(), kind.dim());
            assert_eq!(kind.functionals().len(), kind.dim());
        }
    }

    #[test]
    fn bubble_gradient_at_barycenter() {
        let g = skewed();
        let m = eval_shape_basis(ElementKind::PhiNc, &g, &[0.25; 4], ShapeQuantity::Values).unwrap();
        for i in 0..4 {
            let v = Vec3::new(m[(12 + i, 0)], m[(12 + i, 1)], m[(12 + i, 2)]);
            assert!((v - g.grad_lambda[i] / 256.0).norm() < 1e-15);
        }
    }

    #[test]
    fn phi_curls_are_constant() {
        let g = skewed();
        let a = eval_shape_basis(ElementKind::PhiNc, &g, &[0.1, 0.2, 0.3, 0.4], ShapeQuantity::Curls).unwrap();
        let b = eval_shape_basis(ElementKind::PhiNc, &g, &[0.7, 0.1, 0.1, 0.1], ShapeQuantity::Curls).unwrap();
        assert!((a - b).amax() < 1e-12);
        assert!(eval_shape_basis(ElementKind::WNc, &g, &[0.25; 4], ShapeQuantity::Curls).is_err());
    }

    #[test]
    fn p0_value_is_one() {
        let m = eval_shape_basis(ElementKind::P0, &skewed(), &[0.3, 0.3, 0.2, 0.2], ShapeQuantity::Values).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
    }

    #[test]
    fn enrichment_has_no_edge_moments() {
        let g = skewed();
        let v = dof_matrix(ElementKind::PhiNc, &g).unwrap();
        for i in 0..12 {
            for j in 12..16 {
                assert!(v[(i, j)].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kronecker_property() {
        let g = skewed();
        for kind in ElementKind::ALL {
            let basis = local_nodal_basis(kind, &g, 0).unwrap();
            let d = apply_dofs(kind, &g, &BasisField { basis: &basis, geom: &g }).unwrap();
            let err = (d - DMatrix::identity(kind.dim(), kind.dim())).amax();
            assert!(err < 1e-10, "{kind:?}: {err}");
        }
    }

    #[test]
    fn reference_condition_numbers() {
        let g = TetGeometry::reference();
        let phi = unisolvence_check(ElementKind::PhiNc, &g).unwrap();
        let rt = unisolvence_check(ElementKind::Rt0, &g).unwrap();
        assert!(phi < 1e6, "{phi}");
        assert!(rt < 1e3, "{rt}");
    }

    #[test]
    fn w_dofs_of_one() {
        struct One;
        impl LocalField for One {
            fn arity(&self) -> Arity {
                Arity::Scalar
            }
            fn values(&self, _: &Vec3, _: &[f64; 4], out: &mut [f64]) -> Result<()> {
                out[0] = 1.0;
                Ok(())
            }
            fn gradients(&self, _: &Vec3, _: &[f64; 4], out: &mut [Vec3]) -> Result<()> {
                out[0] = Vec3::zeros();
                Ok(())
            }
        }
        let g = skewed();
        let d = apply_dofs(ElementKind::WNc, &g, &One).unwrap();
        for i in 0..4 {
            assert!((d[(i, 0)] - 1.0).abs() < 1e-15);
            assert!(d[(10 + i, 0)].abs() < 1e-15);
        }
        for e in 0..6 {
            assert!((d[(4 + e, 0)] - g.edge_lengths[e]).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_gradients_is_a_capability_error() {
        struct ValueOnly;
        impl LocalField for ValueOnly {
            fn arity(&self) -> Arity {
                Arity::Scalar
            }
            fn values(&self, _: &Vec3, _: &[f64; 4], out: &mut [f64]) -> Result<()> {
                out[0] = 1.0;
                Ok(())
            }
        }
        let r = apply_dofs(ElementKind::WNc, &skewed(), &ValueOnly);
        assert!(matches!(r, Err(FemError::Capability(_))));
        assert!(apply_dofs(ElementKind::LagrangeP2, &skewed(), &ValueOnly).is_ok());
    }
}
