//! Discrete functions, canonical interpolation and the operator matrices of the complex.
//!
//! Operator rows are filled from the first tet that contains the DoF's
//! entity. The values do not depend on that choice: each DoF of a derivative
//! only involves DoFs on the closure of its own entity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::assembly::Discretization;
use crate::elements::{apply_dofs, apply_dofs_with, BasisField, CurlOf, DivOf, DofQuadrature, ElementKind, GradientOf, LocalField};
use crate::error::{FemError, Result};
use crate::mesh::TetGeometry;
use crate::sparse::CsrMatrix;
use crate::SpaceTag;

/// Coefficients of a discrete field over the interior DoFs of one space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub space: SpaceTag,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(disc: &Discretization, space: SpaceTag) -> Self {
        FeFunction { space, coeffs: vec![0.0; disc.ndofs(space)] }
    }

    pub fn new(disc: &Discretization, space: SpaceTag, coeffs: Vec<f64>) -> Result<Self> {
        let n = disc.ndofs(space);
        if coeffs.len() != n {
            return Err(FemError::Integrity(format!(
                "{} coefficients given for {} with {n} DoFs",
                coeffs.len(),
                space.name()
            )));
        }
        Ok(FeFunction { space, coeffs })
    }

    /// Local DoF values on tet `t`, zero for boundary DoFs.
    pub fn local_coeffs(&self, disc: &Discretization, t: usize) -> Vec<f64> {
        let map = disc.dofmap(self.space);
        let mut out = vec![0.0; map.local_dim()];
        map.gather(t, &self.coeffs, &mut out);
        out
    }
}

/// Interpolates through the DoFs of `space`. Every interior DoF is set once,
/// from the first tet containing it. On `Q_h` the elementwise means are shifted
/// to zero global mean.
pub fn canonical_interpolate(disc: &Discretization, space: SpaceTag, field: &dyn LocalField) -> Result<FeFunction> {
    interpolate_with(disc, space, field, DofQuadrature::default())
}

pub fn interpolate_with(disc: &Discretization, space: SpaceTag, field: &dyn LocalField, q: DofQuadrature) -> Result<FeFunction> {
    if space == SpaceTag::Q {
        let mut means = cell_means(disc, field, q)?;
        zero_mean_shift(disc, &mut means);
        return Ok(FeFunction { space, coeffs: means });
    }
    let map = disc.dofmap(space);
    let mut coeffs = vec![0.0; map.ndofs()];
    let mut set = vec![false; map.ndofs()];
    for t in 0..disc.num_tets() {
        let dofs = map.cell_dofs(t);
        if dofs.iter().all(|d| d.map_or(true, |g| set[g])) {
            continue;
        }
        let vals = apply_dofs_with(space.element(), &disc.geometry[t], field, q)?;
        for (i, d) in dofs.iter().enumerate() {
            if let Some(g) = *d {
                if !set[g] {
                    coeffs[g] = vals[(i, 0)];
                    set[g] = true;
                }
            }
        }
    }
    Ok(FeFunction { space, coeffs })
}

/// Elementwise means of a scalar field, without the zero-mean shift.
pub fn cell_means(disc: &Discretization, field: &dyn LocalField, q: DofQuadrature) -> Result<Vec<f64>> {
    (0..disc.num_tets())
        .map(|t| apply_dofs_with(ElementKind::P0, &disc.geometry[t], field, q).map(|m| m[(0, 0)]))
        .collect()
}

/// Subtracts the volume-weighted mean from piecewise constant coefficients.
pub fn zero_mean_shift(disc: &Discretization, coeffs: &mut [f64]) {
    let vols = disc.cell_volumes();
    let total: f64 = vols.iter().sum();
    let mean = coeffs.iter().zip(&vols).map(|(c, v)| c * v).sum::<f64>() / total;
    coeffs.iter_mut().for_each(|c| *c -= mean);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `W_h -> Phi_h`.
    Grad,
    /// `Phi_h -> V_h^div`.
    Curl,
    /// `V_h^div -> Q_h`.
    Div,
    /// Nedelec interpolation `Phi_h -> V_h^ND`.
    Ind,
    /// Lagrange interpolation `W_h -> V_h^grad`.
    IGrad,
    /// `V_h^grad -> V_h^ND`.
    GradP2,
    /// `V_h^ND -> V_h^div`.
    CurlNd,
}

impl OperatorKind {
    pub fn spaces(self) -> (SpaceTag, SpaceTag) {
        use SpaceTag::*;
        match self {
            OperatorKind::Grad => (W, Phi),
            OperatorKind::Curl => (Phi, Div),
            OperatorKind::Div => (Div, Q),
            OperatorKind::Ind => (Phi, Nd),
            OperatorKind::IGrad => (W, Grad),
            OperatorKind::GradP2 => (Grad, Nd),
            OperatorKind::CurlNd => (Nd, Div),
        }
    }
}

/// A linear map between two global spaces, acting on coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: CsrMatrix,
    pub domain: SpaceTag,
    pub codomain: SpaceTag,
    pub kind: OperatorKind,
}

impl OperatorMatrix {
    pub fn apply(&self, f: &FeFunction) -> Result<FeFunction> {
        if f.space != self.domain {
            return Err(FemError::Integrity(format!(
                "{:?} acts on {} but was given a function in {}",
                self.kind,
                self.domain.name(),
                f.space.name()
            )));
        }
        Ok(FeFunction { space: self.codomain, coeffs: self.matrix.mul_vec(&f.coeffs) })
    }
}

/// Relative size below which local operator entries are rounding noise.
const DROP_TOLERANCE: f64 = 1e-12;

fn owner_rows<F>(disc: &Discretization, domain: SpaceTag, codomain: SpaceTag, mut local: F) -> Result<CsrMatrix>
where
    F: FnMut(usize, &TetGeometry) -> Result<DMatrix<f64>>,
{
    let dmap = disc.dofmap(domain);
    let cmap = disc.dofmap(codomain);
    disc.check_same_mesh(dmap, cmap)?;
    let mut rows: Vec<Option<Vec<(usize, f64)>>> = vec![None; cmap.ndofs()];
    for t in 0..disc.num_tets() {
        let cdofs = cmap.cell_dofs(t);
        if cdofs.iter().all(|d| d.map_or(true, |g| rows[g].is_some())) {
            continue;
        }
        let m = local(t, &disc.geometry[t])?;
        let scale = m.amax();
        for (i, d) in cdofs.iter().enumerate() {
            let Some(g) = *d else { continue };
            if rows[g].is_some() {
                continue;
            }
            let mut row: Vec<(usize, f64)> = dmap
                .cell_dofs(t)
                .iter()
                .enumerate()
                .filter_map(|(j, dj)| dj.map(|gj| (gj, m[(i, j)])))
                .filter(|(_, v)| v.abs() > DROP_TOLERANCE * scale)
                .collect();
            row.sort_unstable_by_key(|e| e.0);
            rows[g] = Some(row);
        }
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(g, r)| r.ok_or_else(|| FemError::Integrity(format!("{} DoF {g} is not owned by any tet", codomain.name()))))
        .collect::<Result<Vec<_>>>()?;
    Ok(CsrMatrix::from_rows(dmap.ndofs(), rows))
}

/// Selection matrix for DoFs that two spaces share on the same entities.
fn selection(disc: &Discretization, domain: SpaceTag, codomain: SpaceTag) -> Result<CsrMatrix> {
    let dmap = disc.dofmap(domain);
    let cmap = disc.dofmap(codomain);
    disc.check_same_mesh(dmap, cmap)?;
    let pairs = [
        (&cmap.vertex_offsets, &dmap.vertex_offsets, codomain.element().layout().per_vertex),
        (&cmap.edge_offsets, &dmap.edge_offsets, codomain.element().layout().per_edge),
        (&cmap.face_offsets, &dmap.face_offsets, codomain.element().layout().per_face),
    ];
    let mut rows = vec![Vec::new(); cmap.ndofs()];
    for (coffs, doffs, per) in pairs {
        for (c, d) in coffs.iter().zip(doffs.iter()) {
            if let (Some(c), Some(d)) = (c, d) {
                for k in 0..per {
                    rows[c + k].push((d + k, 1.0));
                }
            }
        }
    }
    Ok(CsrMatrix::from_rows(dmap.ndofs(), rows))
}

pub fn diff_operator_matrix(kind: OperatorKind, disc: &Discretization) -> Result<OperatorMatrix> {
    let (domain, codomain) = kind.spaces();
    let local_derivative = |t: usize, g: &TetGeometry| -> Result<DMatrix<f64>> {
        let basis = disc.local_basis(domain, t)?;
        let field = BasisField { basis: &basis, geom: g };
        match kind {
            OperatorKind::Grad | OperatorKind::GradP2 => apply_dofs(codomain.element(), g, &GradientOf(&field)),
            OperatorKind::Curl | OperatorKind::CurlNd => apply_dofs(codomain.element(), g, &CurlOf(&field)),
            OperatorKind::Div => apply_dofs(codomain.element(), g, &DivOf(&field)),
            OperatorKind::Ind | OperatorKind::IGrad => unreachable!("selection operators"),
        }
    };
    let matrix = match kind {
        OperatorKind::Ind | OperatorKind::IGrad => selection(disc, domain, codomain)?,
        _ => owner_rows(disc, domain, codomain, local_derivative)?,
    };
    Ok(OperatorMatrix { matrix, domain, codomain, kind })
}

/// The Nedelec interpolation computed by quadrature from the nodal basis of
/// `Phi_h`; it must coincide with the selection built by [`diff_operator_matrix`].
pub fn ind_by_quadrature(disc: &Discretization) -> Result<CsrMatrix> {
    owner_rows(disc, SpaceTag::Phi, SpaceTag::Nd, |t, g| {
        let basis = disc.local_basis(SpaceTag::Phi, t)?;
        apply_dofs(ElementKind::Nedelec2, g, &BasisField { basis: &basis, geom: g })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::AnalyticField;
    use crate::mesh::build_unit_cube_mesh;
    use crate::Vec3;

    fn disc(n: usize) -> Discretization {
        Discretization::new(build_unit_cube_mesh(n).unwrap()).unwrap()
    }

    #[test]
    fn complex_products_vanish() {
        let d = disc(2);
        let grad = diff_operator_matrix(OperatorKind::Grad, &d).unwrap();
        let curl = diff_operator_matrix(OperatorKind::Curl, &d).unwrap();
        let div = diff_operator_matrix(OperatorKind::Div, &d).unwrap();
        assert!(curl.matrix.matmul(&grad.matrix).max_abs() <= 1e-12);
        assert!(div.matrix.matmul(&curl.matrix).max_abs() <= 1e-12);
    }

    #[test]
    fn ind_is_selection() {
        let d = disc(2);
        let sel = diff_operator_matrix(OperatorKind::Ind, &d).unwrap().matrix;
        let quad = ind_by_quadrature(&d).unwrap();
        assert!(sel.add(1.0, &quad, -1.0).max_abs() < 1e-12);
        assert_eq!(sel.nnz(), d.ndofs(SpaceTag::Nd));
    }

    #[test]
    fn constant_interpolation() {
        let d = disc(2);
        let c = AnalyticField::scalar("c", |_| 2.5);
        let means = cell_means(&d, &c, DofQuadrature::default()).unwrap();
        assert!(means.iter().all(|m| (m - 2.5).abs() < 1e-14));
        let q = canonical_interpolate(&d, SpaceTag::Q, &c).unwrap();
        assert!(q.coeffs.iter().all(|m| m.abs() < 1e-14));
    }

    #[test]
    fn linear_vector_field_is_reproduced() {
        // A global P1 field lies in Phi_h locally; interior DoFs of its
        // interpolant must reproduce it on interior tets.
        let d = disc(2);
        let v = AnalyticField::vector("v", |x| Vec3::new(x[1] - 0.5, 2.0 * x[2], -x[0] + 0.25 * x[1]))
            .with_jacobian(|_| nalgebra::Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 2.0, -1.0, 0.25, 0.0));
        let f = canonical_interpolate(&d, SpaceTag::Phi, &v).unwrap();
        for t in 0..d.num_tets() {
            if d.dofmap(SpaceTag::Phi).cell_dofs(t).iter().any(|x| x.is_none()) {
                continue;
            }
            let g = &d.geometry[t];
            let direct = apply_dofs(ElementKind::PhiNc, g, &v).unwrap();
            let local = f.local_coeffs(&d, t);
            for i in 0..16 {
                assert!((direct[(i, 0)] - local[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wrong_space_is_rejected() {
        let d = disc(1);
        let grad = diff_operator_matrix(OperatorKind::Grad, &d).unwrap();
        let f = FeFunction::zeros(&d, SpaceTag::Phi);
        assert!(matches!(grad.apply(&f), Err(FemError::Integrity(_))));
    }
}
