//! Lagrange finite elements for the coupled complex boundary formulation.
//!
//! The complex state and adjoint use P1 elements. The real forward problem that
//! generates synthetic measurements supports P1 and P2.

mod forward;
pub mod norms;
mod profile;
pub mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use forward::{
    assemble_ccbm_state, solve_adjoint, solve_ccbm_state, solve_forward_real, solve_real_general, CcbmSolver,
    RealProblem, RealSolution, SparseComplexSystem,
};
pub use profile::{gamma_u_vertices, BoundaryProfile};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshId, Region};

/// Piecewise-constant tissue parameters, indexed by [`Region`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalCoefficients {
    /// Thermal conductivity (W/(m °C)), `[tumor, healthy]`.
    pub sigma: [f64; 2],
    /// Perfusion coefficient (W/(m³ °C)), `[tumor, healthy]`.
    pub perfusion: [f64; 2],
    /// Source `Q` of `−∇·(σ∇u) + k u = Q` (W/m³), `[tumor, healthy]`.
    pub source: [f64; 2],
    /// Skin heat transfer coefficient (W/(m² °C)).
    pub alpha: f64,
    /// Ambient temperature (°C).
    pub t_a: f64,
    /// Core body temperature on the bottom edge (°C).
    pub t_b: f64,
}

impl Default for PhysicalCoefficients {
    fn default() -> Self {
        Self::breast_tissue()
    }
}

impl PhysicalCoefficients {
    /// Breast tissue with a tumor; metabolic heat 42000 / 4200 W/m³.
    pub fn breast_tissue() -> Self {
        Self::from_metabolic([0.75, 0.5], [7992.4, 1998.1], [42000.0, 4200.0], 10.0, 25.0, 37.0)
    }

    /// Build from the Pennes form `−∇·(σ∇u) + k (u − T_b) = q`.
    ///
    /// The stored source is `Q = q + k T_b`, the right-hand side of `−∇·(σ∇u) + k u = Q`.
    pub fn from_metabolic(sigma: [f64; 2], perfusion: [f64; 2], q: [f64; 2], alpha: f64, t_a: f64, t_b: f64) -> Self {
        Self {
            sigma,
            perfusion,
            source: [q[0] + perfusion[0] * t_b, q[1] + perfusion[1] * t_b],
            alpha,
            t_a,
            t_b,
        }
    }

    /// Same parameters in both regions.
    pub fn uniform(sigma: f64, perfusion: f64, source: f64, alpha: f64, t_a: f64, t_b: f64) -> Self {
        Self {
            sigma: [sigma; 2],
            perfusion: [perfusion; 2],
            source: [source; 2],
            alpha,
            t_a,
            t_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.sigma.iter().chain(&self.perfusion).chain([&self.alpha]);
        for &v in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "conductivity, perfusion and alpha must be positive, got {v}"
                )));
            }
        }
        for &v in self.source.iter().chain([&self.t_a, &self.t_b]) {
            if !v.is_finite() {
                return Err(Error::invalid("non-finite coefficient"));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, r: Region) -> f64 {
        self.sigma[r.index()]
    }

    pub fn k(&self, r: Region) -> f64 {
        self.perfusion[r.index()]
    }

    pub fn q(&self, r: Region) -> f64 {
        self.source[r.index()]
    }
}

/// Real value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub mesh_id: MeshId,
}

/// Complex value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexNodalField {
    pub values: Vec<Complex64>,
    pub mesh_id: MeshId,
}

impl NodalField {
    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_field(self.values.len(), self.mesh_id, mesh)
    }
}

impl ComplexNodalField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); mesh.num_vertices()],
            mesh_id: mesh.id(),
        }
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_field(self.values.len(), self.mesh_id, mesh)?;
        if self.values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Mismatch("field has non-finite entries".into()));
        }
        Ok(())
    }
}

fn check_field(len: usize, id: MeshId, mesh: &Mesh) -> Result<()> {
    if id != mesh.id() {
        return Err(Error::Mismatch(format!(
            "field belongs to mesh {id:?}, not {:?}",
            mesh.id()
        )));
    }
    if len != mesh.num_vertices() {
        return Err(Error::Mismatch(format!(
            "field has {len} values for {} vertices",
            mesh.num_vertices()
        )));
    }
    Ok(())
}

/// Correspondence between mesh vertices and free (non-Dirichlet) unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    free_of_vertex: Vec<Option<usize>>,
    vertex_of_free: Vec<usize>,
}

impl DofMap {
    pub fn p1(mesh: &Mesh) -> Self {
        Self::from_mask((0..mesh.num_vertices()).map(|v| mesh.is_dirichlet_vertex(v)))
    }

    pub(crate) fn from_mask(fixed: impl Iterator<Item = bool>) -> Self {
        let mut free_of_vertex = Vec::new();
        let mut vertex_of_free = Vec::new();
        for (v, f) in fixed.enumerate() {
            if f {
                free_of_vertex.push(None);
            } else {
                free_of_vertex.push(Some(vertex_of_free.len()));
                vertex_of_free.push(v);
            }
        }
        Self {
            free_of_vertex,
            vertex_of_free,
        }
    }

    pub fn num_free(&self) -> usize {
        self.vertex_of_free.len()
    }

    pub fn num_total(&self) -> usize {
        self.free_of_vertex.len()
    }

    pub fn free(&self, vertex: usize) -> Option<usize> {
        self.free_of_vertex[vertex]
    }

    pub fn vertex(&self, free: usize) -> usize {
        self.vertex_of_free[free]
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.vertex_of_free
    }
}

/// Element stiffness `∫ ∇λ_i·∇λ_j` and mass `∫ λ_i λ_j` on a P1 triangle.
pub(crate) fn p1_local(grad: &[[f64; 2]; 3], area: f64) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let mut s = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = area * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (s, m)
}

/// P1 gradient of a nodal field on one cell.
#[inline]
pub(crate) fn cell_gradient<T: crate::linalg::Scalar>(grad: &[[f64; 2]; 3], v: [T; 3]) -> [T; 2] {
    let mut g = [T::zero(); 2];
    for i in 0..3 {
        g[0] += v[i] * T::from_real(grad[i][0]);
        g[1] += v[i] * T::from_real(grad[i][1]);
    }
    g
}

/// `∫_Ω u v` for P1 fields given by nodal values, using the exact mass matrix.
pub fn p1_mass_inner(mesh: &Mesh, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (k, c) in mesh.cells().iter().enumerate() {
        let a = mesh.cell_area(k);
        let su: f64 = c.iter().map(|&i| u[i]).sum();
        let sv: f64 = c.iter().map(|&i| v[i]).sum();
        let d: f64 = c.iter().map(|&i| u[i] * v[i]).sum();
        acc += a / 12.0 * (d + su * sv);
    }
    acc
}
