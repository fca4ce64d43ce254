//! Global DoF numbering, bilinear forms and load vectors.
//!
//! Boundary conditions are imposed structurally: DoFs on boundary entities
//! are simply not numbered. Global numbering is entity-major (vertices, then
//! edges, then faces, then cells) in ascending entity id.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::elements::{local_nodal_basis, ElementKind, LocalBasis};
use crate::error::{FemError, Result};
use crate::interp::FeFunction;
use crate::manufactured::AnalyticField;
use crate::mesh::{SimplicialMesh, TetGeometry};
use crate::quadrature::{get_rule, EntityKind, QuadratureRule};
use crate::sparse::CsrMatrix;
use crate::SpaceTag;

/// Mesh entity a global DoF is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Edge(usize),
    Face(usize),
    Cell(usize),
}

/// Where a global DoF comes from: its entity and its index among that entity's DoFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofProvenance {
    pub entity: Entity,
    pub index: usize,
}

/// Cheap fingerprint used to detect operators built on different meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshSignature {
    pub vertices: usize,
    pub tets: usize,
    pub checksum: u64,
}

impl MeshSignature {
    pub fn of(mesh: &SimplicialMesh) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for tet in &mesh.tets {
            for &v in tet {
                h = (h ^ v as u64).wrapping_mul(0x0100_0000_01b3);
            }
        }
        MeshSignature { vertices: mesh.vertices.len(), tets: mesh.tets.len(), checksum: h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub space: SpaceTag,
    pub kind: ElementKind,
    pub mesh: MeshSignature,
    ndofs: usize,
    local_dim: usize,
    /// First global DoF on each vertex, edge, face and cell; `None` on the boundary.
    pub vertex_offsets: Vec<Option<usize>>,
    pub edge_offsets: Vec<Option<usize>>,
    pub face_offsets: Vec<Option<usize>>,
    pub cell_offsets: Vec<Option<usize>>,
    cell_dofs: Vec<Option<usize>>,
    signs: Vec<i8>,
    provenance: Vec<DofProvenance>,
}

impl DofMap {
    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// Global index of every local DoF of tet `t`; `None` marks boundary DoFs.
    pub fn cell_dofs(&self, t: usize) -> &[Option<usize>] {
        &self.cell_dofs[t * self.local_dim..(t + 1) * self.local_dim]
    }

    /// Orientation of the entity carrying each local DoF of tet `t` relative to
    /// the global convention: the local edge direction `(a, b)` against the
    /// global tangent, the outward normal against the global normal, `+1` for
    /// unoriented entities.
    pub fn signs(&self, t: usize) -> &[i8] {
        &self.signs[t * self.local_dim..(t + 1) * self.local_dim]
    }

    pub fn provenance(&self, dof: usize) -> DofProvenance {
        self.provenance[dof]
    }

    /// Number of local DoFs across all tets that are eliminated by the boundary condition.
    pub fn boundary_local_count(&self) -> usize {
        self.cell_dofs.iter().filter(|d| d.is_none()).count()
    }

    /// Local DoF values of a global coefficient vector on tet `t` (zero on the boundary).
    pub fn gather(&self, t: usize, coeffs: &[f64], out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(self.cell_dofs(t)) {
            *o = d.map_or(0.0, |g| coeffs[g]);
        }
    }
}

pub fn build_dof_map(space: SpaceTag, mesh: &SimplicialMesh) -> Result<DofMap> {
    let kind = space.element();
    let layout = kind.layout();
    let c = mesh.counts();
    if mesh.boundary_vertices.len() != c.vertices
        || mesh.boundary_edges.len() != c.edges
        || mesh.boundary_faces.len() != c.faces
        || mesh.face_tets.len() != c.faces
    {
        return Err(FemError::MeshIntegrity("boundary classification is missing or stale".into()));
    }
    let mut ndofs = 0;
    let mut provenance = Vec::new();
    let mut number = |flags: &[bool], per: usize, make: fn(usize) -> Entity| -> Vec<Option<usize>> {
        flags
            .iter()
            .enumerate()
            .map(|(i, &boundary)| {
                if boundary || per == 0 {
                    return None;
                }
                let first = ndofs;
                for k in 0..per {
                    provenance.push(DofProvenance { entity: make(i), index: k });
                }
                ndofs += per;
                Some(first)
            })
            .collect()
    };
    let vertex_offsets = number(&mesh.boundary_vertices, layout.per_vertex, Entity::Vertex);
    let edge_offsets = number(&mesh.boundary_edges, layout.per_edge, Entity::Edge);
    let face_offsets = number(&mesh.boundary_faces, layout.per_face, Entity::Face);
    let cell_offsets = number(&vec![false; c.tets], layout.per_cell, Entity::Cell);

    let local_dim = kind.dim();
    let mut cell_dofs = Vec::with_capacity(c.tets * local_dim);
    let mut signs = Vec::with_capacity(c.tets * local_dim);
    for t in 0..c.tets {
        let tet = &mesh.tets[t];
        for v in 0..4 {
            for k in 0..layout.per_vertex {
                cell_dofs.push(vertex_offsets[tet[v]].map(|o| o + k));
                signs.push(1);
            }
        }
        for e in 0..6 {
            for k in 0..layout.per_edge {
                cell_dofs.push(edge_offsets[mesh.tet_edges[t][e]].map(|o| o + k));
                signs.push(mesh.tet_edge_signs[t][e]);
            }
        }
        for f in 0..4 {
            for k in 0..layout.per_face {
                cell_dofs.push(face_offsets[mesh.tet_faces[t][f]].map(|o| o + k));
                signs.push(mesh.tet_face_signs[t][f]);
            }
        }
        for k in 0..layout.per_cell {
            cell_dofs.push(cell_offsets[t].map(|o| o + k));
            signs.push(1);
        }
    }
    Ok(DofMap {
        space,
        kind,
        mesh: MeshSignature::of(mesh),
        ndofs,
        local_dim,
        vertex_offsets,
        edge_offsets,
        face_offsets,
        cell_offsets,
        cell_dofs,
        signs,
        provenance,
    })
}

/// A mesh together with its element geometry and the DoF maps of all six spaces.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: SimplicialMesh,
    pub geometry: Vec<TetGeometry>,
    dofmaps: Vec<DofMap>,
}

impl Discretization {
    pub fn new(mesh: SimplicialMesh) -> Result<Self> {
        let geometry = (0..mesh.tets.len()).map(|t| mesh.tet_geometry(t)).collect::<Result<Vec<_>>>()?;
        let dofmaps = SpaceTag::ALL.iter().map(|&s| build_dof_map(s, &mesh)).collect::<Result<Vec<_>>>()?;
        Ok(Discretization { mesh, geometry, dofmaps })
    }

    pub fn dofmap(&self, space: SpaceTag) -> &DofMap {
        &self.dofmaps[SpaceTag::ALL.iter().position(|&s| s == space).expect("every space has a map")]
    }

    pub fn ndofs(&self, space: SpaceTag) -> usize {
        self.dofmap(space).ndofs()
    }

    pub fn num_tets(&self) -> usize {
        self.mesh.tets.len()
    }

    pub fn local_basis(&self, space: SpaceTag, t: usize) -> Result<LocalBasis> {
        local_nodal_basis(space.element(), &self.geometry[t], t)
    }

    /// Sum of cell volumes per tet, i.e. the weights of the zero-mean constraint on `Q_h`.
    pub fn cell_volumes(&self) -> Vec<f64> {
        self.geometry.iter().map(|g| g.volume).collect()
    }

    pub fn check_same_mesh(&self, a: &DofMap, b: &DofMap) -> Result<()> {
        let own = MeshSignature::of(&self.mesh);
        if a.mesh != own || b.mesh != own {
            return Err(FemError::Integrity(format!(
                "DoF maps for {} and {} were built on a different mesh",
                a.space.name(),
                b.space.name()
            )));
        }
        Ok(())
    }
}

/// A nodal basis tabulated at the points of a tetrahedral rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub dim: usize,
    pub comps: usize,
    pub points: Vec<[f64; 4]>,
    /// Rule weights times the cell volume.
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl Tabulation {
    pub fn new(basis: &LocalBasis, geom: &TetGeometry, rule: &QuadratureRule) -> Self {
        let dim = basis.dim();
        let comps = basis.kind.arity().components();
        let mut t = Tabulation {
            dim,
            comps,
            points: Vec::with_capacity(rule.len()),
            weights: Vec::with_capacity(rule.len()),
            values: Vec::with_capacity(rule.len() * dim * comps),
            derivs: Vec::with_capacity(rule.len() * dim * comps * 3),
        };
        let (mut out, mut scratch) = basis.new_buffers();
        for (l, w) in rule.tet_points() {
            basis.eval(geom, &l, &mut out, &mut scratch);
            t.points.push(l);
            t.weights.push(w * geom.volume);
            t.values.extend_from_slice(&out.values);
            t.derivs.extend_from_slice(&out.derivs);
        }
        t
    }

    pub fn nq(&self) -> usize {
        self.weights.len()
    }

    pub fn value(&self, q: usize, j: usize) -> &[f64] {
        let w = self.comps;
        let base = q * self.dim * w;
        &self.values[base + j * w..base + (j + 1) * w]
    }

    pub fn deriv(&self, q: usize, j: usize) -> &[f64] {
        let w = 3 * self.comps;
        let base = q * self.dim * w;
        &self.derivs[base + j * w..base + (j + 1) * w]
    }

    /// Value at point `q` of the function with local coefficients `c`.
    pub fn combine_value(&self, q: usize, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &cj) in c.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.value(q, j)) {
                *o += cj * v;
            }
        }
    }

    pub fn combine_deriv(&self, q: usize, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &cj) in c.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.deriv(q, j)) {
                *o += cj * v;
            }
        }
    }
}

/// Curl of a vector function from its row-major Jacobian.
pub(crate) fn curl9(d: &[f64]) -> [f64; 3] {
    [d[7] - d[5], d[2] - d[6], d[3] - d[1]]
}

/// Tetrahedral quadrature degrees used by assembly and error evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadDegrees {
    /// Broken gradient products of the enriched vector element.
    pub stiffness: usize,
    /// Products of piecewise linear vector fields (Nedelec masses, curl couplings).
    pub low: usize,
    /// Mass products of the enriched vector element.
    pub phi_mass: usize,
    /// Loads with a trigonometric right-hand side.
    pub load: usize,
    /// Error integrals.
    pub error: usize,
}

impl Default for QuadDegrees {
    fn default() -> Self {
        QuadDegrees { stiffness: 8, low: 2, phi_mass: 8, load: 10, error: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// `(grad u, grad v)` on the quadratic Lagrange space.
    PoissonP2,
    /// Broken `(grad phi, grad psi)` on `Phi_h`.
    PhiStiffness,
    /// `(I^ND phi, I^ND psi)` on `Phi_h`.
    IndMass,
    /// `(phi, psi)` on `Phi_h`.
    PhiMass,
    /// `(curl I^ND psi, q)`, rows `Phi_h`, columns `V_h^div`.
    CurlCoupling,
    /// `(curl psi, q)` with the broken curl of `Phi_h` itself.
    CurlCouplingDirect,
    /// `(div q, mu)`, rows `V_h^div`, columns `Q_h`.
    DivCoupling,
    /// `(p, q)` on `V_h^div`.
    RtMass,
    /// `(u, v)` on `V_h^ND`.
    NdMass,
    /// `(lambda, mu)` on `Q_h`.
    QMass,
    /// `eps^2 (grad phi, grad psi) + (I^ND phi, I^ND psi)`.
    InterpA,
    /// `eps^2 (grad phi, grad psi) + (phi, psi)`.
    NoInterpA,
}

impl FormKind {
    pub fn spaces(self) -> (SpaceTag, SpaceTag) {
        use SpaceTag::*;
        match self {
            FormKind::PoissonP2 => (Grad, Grad),
            FormKind::PhiStiffness | FormKind::IndMass | FormKind::PhiMass | FormKind::InterpA | FormKind::NoInterpA => (Phi, Phi),
            FormKind::CurlCoupling | FormKind::CurlCouplingDirect => (Phi, Div),
            FormKind::DivCoupling => (Div, Q),
            FormKind::RtMass => (Div, Div),
            FormKind::NdMass => (Nd, Nd),
            FormKind::QMass => (Q, Q),
        }
    }

    pub fn is_symmetric(self) -> bool {
        let (r, c) = self.spaces();
        r == c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledForm {
    pub matrix: CsrMatrix,
    pub row_space: SpaceTag,
    pub col_space: SpaceTag,
    pub kind: FormKind,
    pub epsilon: Option<f64>,
}

fn tet_rule(degree: usize) -> Result<QuadratureRule> {
    get_rule(EntityKind::Tet, degree)
}

/// Runs an element loop and scatters dense local matrices into a global sparse matrix.
fn assemble_with<F>(disc: &Discretization, rows: SpaceTag, cols: SpaceTag, symmetric: bool, mut local: F) -> Result<CsrMatrix>
where
    F: FnMut(usize, &TetGeometry, &mut DMatrix<f64>) -> Result<()>,
{
    let rmap = disc.dofmap(rows);
    let cmap = disc.dofmap(cols);
    disc.check_same_mesh(rmap, cmap)?;
    let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(disc.num_tets() * rmap.local_dim() * cmap.local_dim());
    let mut m = DMatrix::zeros(rmap.local_dim(), cmap.local_dim());
    for t in 0..disc.num_tets() {
        m.fill(0.0);
        local(t, &disc.geometry[t], &mut m)?;
        if symmetric {
            let mt = m.transpose();
            m += mt;
            m *= 0.5;
        }
        for (i, gi) in rmap.cell_dofs(t).iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in cmap.cell_dofs(t).iter().enumerate() {
                if let Some(gj) = *gj {
                    triplets.push((gi as u32, gj as u32, m[(i, j)]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(rmap.ndofs(), cmap.ndofs(), &mut triplets))
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Local Gram matrix of `tab` with itself over the value (`derivs = false`) or
/// derivative (`derivs = true`) components, written into the top-left block of `m`.
fn local_gram(tab: &Tabulation, derivs: bool, m: &mut DMatrix<f64>) {
    for q in 0..tab.nq() {
        let w = tab.weights[q];
        for i in 0..tab.dim {
            let a = if derivs { tab.deriv(q, i) } else { tab.value(q, i) };
            for j in i..tab.dim {
                let b = if derivs { tab.deriv(q, j) } else { tab.value(q, j) };
                let v = w * dot_slices(a, b);
                m[(i, j)] += v;
                if i != j {
                    m[(j, i)] += v;
                }
            }
        }
    }
}

pub fn assemble_bilinear(kind: FormKind, disc: &Discretization, epsilon: f64, quad: &QuadDegrees) -> Result<AssembledForm> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(FemError::InvalidArgument(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    let (row_space, col_space) = kind.spaces();
    let sym = kind.is_symmetric();
    let matrix = match kind {
        FormKind::InterpA | FormKind::NoInterpA => {
            let k = assemble_bilinear(FormKind::PhiStiffness, disc, epsilon, quad)?.matrix;
            let mass = if kind == FormKind::InterpA { FormKind::IndMass } else { FormKind::PhiMass };
            let m = assemble_bilinear(mass, disc, epsilon, quad)?.matrix;
            k.add(epsilon * epsilon, &m, 1.0)
        }
        FormKind::PoissonP2 | FormKind::PhiStiffness | FormKind::PhiMass | FormKind::RtMass | FormKind::NdMass => {
            let degree = match kind {
                FormKind::PhiStiffness => quad.stiffness,
                FormKind::PhiMass => quad.phi_mass,
                _ => quad.low.max(2),
            };
            let rule = tet_rule(degree)?;
            let derivs = matches!(kind, FormKind::PoissonP2 | FormKind::PhiStiffness);
            assemble_with(disc, row_space, col_space, sym, |t, g, m| {
                let tab = Tabulation::new(&disc.local_basis(row_space, t)?, g, &rule);
                local_gram(&tab, derivs, m);
                Ok(())
            })?
        }
        FormKind::IndMass => {
            let rule = tet_rule(quad.low.max(2))?;
            assemble_with(disc, row_space, col_space, sym, |t, g, m| {
                // The Nedelec interpolant keeps exactly the twelve edge DoFs, which
                // come first in both local orderings.
                let tab = Tabulation::new(&disc.local_basis(SpaceTag::Nd, t)?, g, &rule);
                local_gram(&tab, false, m);
                Ok(())
            })?
        }
        FormKind::QMass => CsrMatrix::diagonal_matrix(&disc.cell_volumes()),
        FormKind::CurlCoupling | FormKind::CurlCouplingDirect => {
            let rule = tet_rule(quad.low.max(2))?;
            let src = if kind == FormKind::CurlCoupling { SpaceTag::Nd } else { SpaceTag::Phi };
            assemble_with(disc, row_space, col_space, false, |t, g, m| {
                let a = Tabulation::new(&disc.local_basis(src, t)?, g, &rule);
                let b = Tabulation::new(&disc.local_basis(SpaceTag::Div, t)?, g, &rule);
                for q in 0..a.nq() {
                    for i in 0..a.dim {
                        let c = curl9(a.deriv(q, i));
                        for j in 0..b.dim {
                            m[(i, j)] += a.weights[q] * dot_slices(&c, b.value(q, j));
                        }
                    }
                }
                Ok(())
            })?
        }
        FormKind::DivCoupling => assemble_with(disc, row_space, col_space, false, |t, g, m| {
            let basis = disc.local_basis(SpaceTag::Div, t)?;
            let tab = Tabulation::new(&basis, g, &tet_rule(0)?);
            for i in 0..4 {
                let d = tab.deriv(0, i);
                m[(i, 0)] = (d[0] + d[4] + d[8]) * g.volume;
            }
            Ok(())
        })?,
    };
    Ok(AssembledForm { matrix, row_space, col_space, kind, epsilon: Some(epsilon) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    /// `(f, v)` for `v` in the quadratic Lagrange space.
    FVsP2,
    /// `(grad w_h, I^ND psi)` for `psi` in `Phi_h`.
    GradwVsIndphi,
    /// `(grad w_h, psi)` for `psi` in `Phi_h`.
    GradwVsPhi,
    /// `(I^ND phi_h, grad chi)` for `chi` in the quadratic Lagrange space.
    IndphiVsGradP2,
    /// `(phi_h, grad chi)` for `chi` in the quadratic Lagrange space.
    PhiVsGradP2,
}

pub enum LoadData<'a> {
    Field(&'a AnalyticField),
    Function(&'a FeFunction),
}

fn expect_function<'a>(data: &LoadData<'a>, space: SpaceTag, kind: LoadKind) -> Result<&'a FeFunction> {
    match data {
        LoadData::Function(f) if f.space == space => Ok(f),
        LoadData::Function(f) => Err(FemError::Integrity(format!(
            "{kind:?} needs a function in {} but got one in {}",
            space.name(),
            f.space.name()
        ))),
        LoadData::Field(_) => Err(FemError::Integrity(format!("{kind:?} needs a discrete function"))),
    }
}

/// Scatters local load vectors into a global one.
fn assemble_vector<F>(disc: &Discretization, space: SpaceTag, mut local: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, &TetGeometry, &mut [f64]) -> Result<()>,
{
    let map = disc.dofmap(space);
    let mut out = vec![0.0; map.ndofs()];
    let mut buf = vec![0.0; map.local_dim()];
    for t in 0..disc.num_tets() {
        buf.iter_mut().for_each(|v| *v = 0.0);
        local(t, &disc.geometry[t], &mut buf)?;
        for (v, g) in buf.iter().zip(map.cell_dofs(t)) {
            if let Some(g) = g {
                out[*g] += v;
            }
        }
    }
    Ok(out)
}

pub fn assemble_load(kind: LoadKind, disc: &Discretization, data: LoadData<'_>, quad: &QuadDegrees) -> Result<Vec<f64>> {
    match kind {
        LoadKind::FVsP2 => {
            let LoadData::Field(f) = data else {
                return Err(FemError::Integrity("the source load needs an analytic field".into()));
            };
            let rule = tet_rule(quad.load)?;
            assemble_vector(disc, SpaceTag::Grad, |t, g, out| {
                let tab = Tabulation::new(&disc.local_basis(SpaceTag::Grad, t)?, g, &rule);
                for q in 0..tab.nq() {
                    let fx = f.value(&g.point(&tab.points[q]))? * tab.weights[q];
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += fx * tab.value(q, j)[0];
                    }
                }
                Ok(())
            })
        }
        LoadKind::GradwVsIndphi | LoadKind::GradwVsPhi => {
            let w = expect_function(&data, SpaceTag::Grad, kind)?;
            let (test, degree) = if kind == LoadKind::GradwVsIndphi {
                (SpaceTag::Nd, quad.low.max(2))
            } else {
                (SpaceTag::Phi, quad.phi_mass)
            };
            let rule = tet_rule(degree)?;
            let wmap = disc.dofmap(SpaceTag::Grad);
            let mut wl = vec![0.0; wmap.local_dim()];
            let mut gw = [0.0; 3];
            assemble_vector(disc, SpaceTag::Phi, |t, g, out| {
                wmap.gather(t, &w.coeffs, &mut wl);
                let wt = Tabulation::new(&disc.local_basis(SpaceTag::Grad, t)?, g, &rule);
                let pt = Tabulation::new(&disc.local_basis(test, t)?, g, &rule);
                for q in 0..rule.len() {
                    wt.combine_deriv(q, &wl, &mut gw);
                    for j in 0..pt.dim {
                        out[j] += pt.weights[q] * dot_slices(&gw, pt.value(q, j));
                    }
                }
                Ok(())
            })
        }
        LoadKind::IndphiVsGradP2 | LoadKind::PhiVsGradP2 => {
            let phi = expect_function(&data, SpaceTag::Phi, kind)?;
            let (src, degree) = if kind == LoadKind::IndphiVsGradP2 {
                (SpaceTag::Nd, quad.low.max(2))
            } else {
                (SpaceTag::Phi, quad.phi_mass)
            };
            let rule = tet_rule(degree)?;
            let pmap = disc.dofmap(SpaceTag::Phi);
            let mut pl = vec![0.0; pmap.local_dim()];
            let mut v = [0.0; 3];
            assemble_vector(disc, SpaceTag::Grad, |t, g, out| {
                pmap.gather(t, &phi.coeffs, &mut pl);
                let st = Tabulation::new(&disc.local_basis(src, t)?, g, &rule);
                let ct = Tabulation::new(&disc.local_basis(SpaceTag::Grad, t)?, g, &rule);
                // For the Nedelec source only the leading edge DoFs are used.
                let coeffs = &pl[..st.dim];
                for q in 0..rule.len() {
                    st.combine_value(q, coeffs, &mut v);
                    for j in 0..ct.dim {
                        out[j] += ct.weights[q] * dot_slices(&v, ct.deriv(q, j));
                    }
                }
                Ok(())
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_cube_mesh;

    fn disc(n: usize) -> Discretization {
        Discretization::new(build_unit_cube_mesh(n).unwrap()).unwrap()
    }

    #[test]
    fn dimensions_on_one_cube() {
        let d = disc(1);
        assert_eq!(d.ndofs(SpaceTag::Phi), 8);
        assert_eq!(d.ndofs(SpaceTag::W), 7);
        assert_eq!(d.ndofs(SpaceTag::Q), 6);
        assert_eq!(d.ndofs(SpaceTag::Div), 6);
        assert_eq!(d.ndofs(SpaceTag::Nd), 2);
        assert_eq!(d.ndofs(SpaceTag::Grad), 1);
    }

    #[test]
    fn dimension_formulas() {
        for n in 1..=3 {
            let d = disc(n);
            let c = d.mesh.interior_counts();
            assert_eq!(d.ndofs(SpaceTag::Phi), 2 * c.edges + c.faces);
            assert_eq!(d.ndofs(SpaceTag::W), c.vertices + c.edges + c.faces);
            assert_eq!(d.ndofs(SpaceTag::Grad), c.vertices + c.edges);
            assert_eq!(d.ndofs(SpaceTag::Nd), 2 * c.edges);
            assert_eq!(d.ndofs(SpaceTag::Div), c.faces);
            assert_eq!(d.ndofs(SpaceTag::Q), c.tets);
        }
    }

    #[test]
    fn numbering_is_entity_major() {
        let d = disc(2);
        let m = d.dofmap(SpaceTag::W);
        let kinds: Vec<u8> = (0..m.ndofs())
            .map(|g| match m.provenance(g).entity {
                Entity::Vertex(_) => 0,
                Entity::Edge(_) => 1,
                Entity::Face(_) => 2,
                Entity::Cell(_) => 3,
            })
            .collect();
        assert!(kinds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn negative_epsilon_rejected() {
        let d = disc(1);
        let r = assemble_bilinear(FormKind::InterpA, &d, -1.0, &QuadDegrees::default());
        assert!(matches!(r, Err(FemError::InvalidArgument(_))));
    }

    #[test]
    fn symmetric_forms() {
        let d = disc(2);
        let q = QuadDegrees::default();
        for kind in [FormKind::PoissonP2, FormKind::PhiStiffness, FormKind::IndMass, FormKind::PhiMass] {
            let m = assemble_bilinear(kind, &d, 1.0, &q).unwrap().matrix;
            assert!(m.asymmetry() <= 1e-12 * m.max_abs(), "{kind:?}");
        }
    }
}
