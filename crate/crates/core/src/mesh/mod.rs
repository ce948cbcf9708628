//! Triangulations of the tissue rectangle with an embedded inclusion.
//!
//! A [`Mesh`] is immutable once built. Every operation that moves vertices or
//! changes connectivity returns a new mesh with a fresh [`MeshId`], so nodal
//! fields can detect that they were computed on a different mesh.

mod build;
pub mod io;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use build::{build_rect_mesh, build_rect_mesh_with, remesh, MeshOptions};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Default clearance between the inclusion and the outer boundary (m).
pub const DEFAULT_CLEARANCE: f64 = 0.002;

/// Minimum `a_K / h_K` below which the optimizer remeshes on demand.
pub const REMESH_QUALITY_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Tumor = 0,
    Healthy = 1,
}

impl Region {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Region::Tumor),
            1 => Some(Region::Healthy),
            _ => None,
        }
    }
}

/// Tag of an outer boundary edge: skin (top), lateral walls, or body core (bottom).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    GammaU = 0,
    GammaW = 1,
    GammaB = 2,
}

impl BoundaryTag {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(BoundaryTag::GammaU),
            1 => Some(BoundaryTag::GammaW),
            2 => Some(BoundaryTag::GammaB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeshId(u64);

impl MeshId {
    fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        MeshId(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

/// Per-vertex 2-vectors (m); used for descent directions and mesh velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub vectors: Vec<[f64; 2]>,
    pub mesh_id: MeshId,
}

impl DeformationField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            vectors: vec![[0.0; 2]; mesh.num_vertices()],
            mesh_id: mesh.id(),
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let vectors = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &p)| if mesh.is_boundary_vertex(i) { [0.0; 2] } else { f(p) })
            .collect();
        Self {
            vectors,
            mesh_id: mesh.id(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vectors: self.vectors.iter().map(|v| [s * v[0], s * v[1]]).collect(),
            mesh_id: self.mesh_id,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.vectors.len() != mesh.num_vertices() {
            return Err(Error::Mismatch(format!(
                "deformation has {} vectors, mesh has {} vertices",
                self.vectors.len(),
                mesh.num_vertices()
            )));
        }
        Ok(())
    }
}

/// Geometry of a single triangle, derived from its edge matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    /// `E = [x1 - x0, x2 - x0]`, stored row-major (`edge_matrix[r][c]` = component r of edge c).
    pub edge_matrix: [[f64; 2]; 2],
    /// `E^{-T}`; its columns are the gradients of the barycentric coordinates 1 and 2.
    pub inv_edge_matrix_transposed: [[f64; 2]; 2],
    /// Gradients of all three barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    /// Longest side.
    pub h_k: f64,
    /// Minimum height.
    pub a_k: f64,
    pub area: f64,
    pub signed_area: f64,
}

impl ElementGeometry {
    pub fn from_points(p: [Point; 3]) -> Result<Self> {
        let e = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        let h_k = geometry::dist(p[0], p[1])
            .max(geometry::dist(p[1], p[2]))
            .max(geometry::dist(p[2], p[0]));
        if det.abs() <= 1e-14 * h_k * h_k || !det.is_finite() {
            return Err(Error::DegenerateCell {
                cell: usize::MAX,
                area: det / 2.0,
            });
        }
        // E^{-1} = adj(E)/det, and E^{-T} is its transpose
        let inv = [[e[1][1] / det, -e[0][1] / det], [-e[1][0] / det, e[0][0] / det]];
        let inv_t = [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]];
        let g1 = inv[0];
        let g2 = inv[1];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        let grad_lambda = [g0, g1, g2];
        let a_k = grad_lambda
            .iter()
            .map(|g| 1.0 / g[0].hypot(g[1]))
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            edge_matrix: e,
            inv_edge_matrix_transposed: inv_t,
            grad_lambda,
            h_k,
            a_k,
            area: det.abs() / 2.0,
            signed_area: det / 2.0,
        })
    }

    /// Spectral norm of `E^{-1}`.
    pub fn inv_edge_matrix_norm(&self) -> f64 {
        spectral_norm(self.inv_edge_matrix_transposed)
    }
}

/// Largest singular value of a 2x2 matrix.
pub fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let s1 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
    ((s1 + disc) / 2.0).sqrt()
}

/// Summary statistics of element shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshStats {
    pub h_max: f64,
    pub h_min: f64,
    pub min_a_k: f64,
    pub max_h_over_a: f64,
    pub min_quality: f64,
}

/// Interior or boundary edge with the cells on either side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeInfo {
    pub vertices: [usize; 2],
    pub cells: [Option<usize>; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    id: MeshId,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    cell_region: Vec<Region>,
    boundary_edges: Vec<BoundaryEdge>,
    interface_edges: Vec<[usize; 2]>,
    interface_loops: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    dirichlet_vertex: Vec<bool>,
    interface_vertex: Vec<bool>,
}

impl PartialEq for Mesh {
    /// Geometric and topological equality; the identity tag is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.cells == other.cells
            && self.cell_region == other.cell_region
            && self.boundary_edges == other.boundary_edges
            && self.interface_edges == other.interface_edges
            && self.interface_loops == other.interface_loops
    }
}

impl Mesh {
    /// Assemble a mesh from raw parts and validate it.
    ///
    /// Cells with negative orientation are rejected rather than flipped; interface
    /// loops are recovered by chaining `interface_edges`.
    pub fn from_parts(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        cell_region: Vec<Region>,
        boundary_edges: Vec<BoundaryEdge>,
        interface_edges: Vec<[usize; 2]>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if cell_region.len() != cells.len() {
            return Err(Error::InvalidMesh("cell_region length mismatch".into()));
        }
        for (k, c) in cells.iter().enumerate() {
            if c.iter().any(|&v| v >= nv) || c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
                return Err(Error::InvalidMesh(format!("cell {k} has invalid vertices")));
            }
        }
        for e in boundary_edges
            .iter()
            .map(|e| e.vertices)
            .chain(interface_edges.iter().copied())
        {
            if e.iter().any(|&v| v >= nv) || e[0] == e[1] {
                return Err(Error::InvalidMesh(format!("edge {e:?} has invalid vertices")));
            }
        }
        let interface_loops = chain_loops(&interface_edges)?;
        let mut boundary_vertex = vec![false; nv];
        let mut dirichlet_vertex = vec![false; nv];
        for e in &boundary_edges {
            for &v in &e.vertices {
                boundary_vertex[v] = true;
                if e.tag == BoundaryTag::GammaB {
                    dirichlet_vertex[v] = true;
                }
            }
        }
        let mut interface_vertex = vec![false; nv];
        for e in &interface_edges {
            interface_vertex[e[0]] = true;
            interface_vertex[e[1]] = true;
        }
        let mesh = Self {
            id: MeshId::fresh(),
            vertices,
            cells,
            cell_region,
            boundary_edges,
            interface_edges,
            interface_loops,
            boundary_vertex,
            dirichlet_vertex,
            interface_vertex,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        for k in 0..self.cells.len() {
            let a = self.signed_area(k);
            if !(a > 0.0) {
                return Err(Error::DegenerateCell { cell: k, area: a });
            }
        }
        let edges = self.edge_map();
        for e in &self.boundary_edges {
            match edges.get(&key(e.vertices)) {
                Some(c) if c[1].is_none() => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary edge {:?} is not a mesh boundary edge",
                        e.vertices
                    )))
                }
            }
        }
        let n_boundary = edges.values().filter(|c| c[1].is_none()).count();
        if n_boundary != self.boundary_edges.len() {
            return Err(Error::InvalidMesh(format!(
                "{} boundary edges tagged but mesh has {}",
                self.boundary_edges.len(),
                n_boundary
            )));
        }
        for e in &self.interface_edges {
            match edges.get(&key(*e)) {
                Some([Some(a), Some(b)]) if self.cell_region[*a] != self.cell_region[*b] => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "interface edge {e:?} does not separate the regions"
                    )))
                }
            }
        }
        // every region-changing edge must be tagged as interface
        let tagged: std::collections::HashSet<[usize; 2]> = self.interface_edges.iter().map(|&e| key(e)).collect();
        for (k, c) in &edges {
            if let [Some(a), Some(b)] = c {
                if self.cell_region[*a] != self.cell_region[*b] && !tagged.contains(k) {
                    return Err(Error::InvalidMesh(format!(
                        "edge {k:?} separates regions but is not an interface edge"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell_region(&self) -> &[Region] {
        &self.cell_region
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.interface_edges
    }

    /// Ordered vertex cycles tracing each inclusion boundary.
    pub fn interface_loops(&self) -> &[Vec<usize>] {
        &self.interface_loops
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_dirichlet_vertex(&self, v: usize) -> bool {
        self.dirichlet_vertex[v]
    }

    pub fn is_interface_vertex(&self, v: usize) -> bool {
        self.interface_vertex[v]
    }

    pub fn cell_points(&self, k: usize) -> [Point; 3] {
        let c = self.cells[k];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        let p = self.cell_points(k);
        geometry::orient(p[0], p[1], p[2]) / 2.0
    }

    pub fn cell_area(&self, k: usize) -> f64 {
        self.signed_area(k).abs()
    }

    pub fn element_geometry(&self, k: usize) -> Result<ElementGeometry> {
        if k >= self.cells.len() {
            return Err(Error::invalid(format!("cell index {k} out of range")));
        }
        ElementGeometry::from_points(self.cell_points(k)).map_err(|e| match e {
            Error::DegenerateCell { area, .. } => Error::DegenerateCell { cell: k, area },
            other => other,
        })
    }

    /// Geometry of every cell; panics only if the mesh invariants were broken.
    pub fn geometries(&self) -> Vec<ElementGeometry> {
        (0..self.num_cells())
            .map(|k| self.element_geometry(k).expect("valid mesh has no degenerate cells"))
            .collect()
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|k| self.cell_area(k)).sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.num_cells())
            .filter(|&k| self.cell_region[k] == region)
            .map(|k| self.cell_area(k))
            .sum()
    }

    pub fn interface_polygons(&self) -> Vec<Vec<Point>> {
        self.interface_loops
            .iter()
            .map(|l| l.iter().map(|&v| self.vertices[v]).collect())
            .collect()
    }

    /// Smallest distance from an interface vertex to the outer boundary box.
    pub fn interface_clearance(&self) -> f64 {
        let (lo, hi) = self.bounds();
        self.interface_loops
            .iter()
            .flatten()
            .map(|&v| {
                let p = self.vertices[v];
                (p[0] - lo[0]).min(hi[0] - p[0]).min(p[1] - lo[1]).min(hi[1] - p[1])
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn stats(&self) -> MeshStats {
        let mut s = MeshStats {
            h_max: 0.0,
            h_min: f64::INFINITY,
            min_a_k: f64::INFINITY,
            max_h_over_a: 0.0,
            min_quality: f64::INFINITY,
        };
        for g in self.geometries() {
            s.h_max = s.h_max.max(g.h_k);
            s.h_min = s.h_min.min(g.h_k);
            s.min_a_k = s.min_a_k.min(g.a_k);
            s.max_h_over_a = s.max_h_over_a.max(g.h_k / g.a_k);
            s.min_quality = s.min_quality.min(g.a_k / g.h_k);
        }
        s
    }

    fn edge_map(&self) -> HashMap<[usize; 2], [Option<usize>; 2]> {
        let mut map: HashMap<[usize; 2], [Option<usize>; 2]> = HashMap::with_capacity(3 * self.cells.len());
        for (k, c) in self.cells.iter().enumerate() {
            for i in 0..3 {
                let e = key([c[i], c[(i + 1) % 3]]);
                let slot = map.entry(e).or_insert([None, None]);
                if slot[0].is_none() {
                    slot[0] = Some(k);
                } else {
                    slot[1] = Some(k);
                }
            }
        }
        map
    }

    /// All edges in a deterministic order.
    pub fn edges(&self) -> Vec<EdgeInfo> {
        let mut out: Vec<EdgeInfo> = self
            .edge_map()
            .into_iter()
            .map(|(vertices, cells)| EdgeInfo { vertices, cells })
            .collect();
        out.sort_by_key(|e| e.vertices);
        out
    }

    /// Vertex-to-vertex adjacency, sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.num_vertices()];
        for c in &self.cells {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        nb[c[i]].push(c[j]);
                    }
                }
            }
        }
        for l in &mut nb {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }

    fn with_vertices(&self, vertices: Vec<Point>) -> Self {
        Self {
            id: MeshId::fresh(),
            vertices,
            ..self.clone()
        }
    }

    /// Move every vertex by `t * field`, keeping connectivity.
    ///
    /// The field must vanish on the outer boundary. Returns
    /// [`Error::Inversion`] if any cell would lose positive orientation.
    pub fn deform(&self, field: &DeformationField, t: f64) -> Result<Mesh> {
        field.check(self)?;
        for (i, v) in field.vectors.iter().enumerate() {
            if self.boundary_vertex[i] && (v[0] != 0.0 || v[1] != 0.0) {
                return Err(Error::invalid(format!(
                    "deformation field does not vanish on boundary vertex {i}"
                )));
            }
        }
        let vertices: Vec<Point> = self
            .vertices
            .iter()
            .zip(&field.vectors)
            .map(|(p, v)| [p[0] + t * v[0], p[1] + t * v[1]])
            .collect();
        let out = self.with_vertices(vertices);
        for k in 0..out.num_cells() {
            let a = out.signed_area(k);
            let p = out.cell_points(k);
            let h = geometry::dist(p[0], p[1]).max(geometry::dist(p[1], p[2]));
            if !(a > 1e-12 * h * h) {
                return Err(Error::Inversion { cell: k, area: a });
            }
        }
        Ok(out)
    }

    /// Uniform red refinement: each triangle is split into four.
    ///
    /// Returns the refined mesh together with the parent cell of each new cell.
    pub fn refine_uniform(&self) -> (Mesh, Vec<usize>) {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *midpoint.entry(key([a, b])).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]);
                vertices.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(4 * self.num_cells());
        let mut regions = Vec::with_capacity(4 * self.num_cells());
        let mut parent = Vec::with_capacity(4 * self.num_cells());
        for (k, c) in self.cells.iter().enumerate() {
            let m01 = mid(c[0], c[1], &mut vertices);
            let m12 = mid(c[1], c[2], &mut vertices);
            let m20 = mid(c[2], c[0], &mut vertices);
            for child in [[c[0], m01, m20], [m01, c[1], m12], [m20, m12, c[2]], [m01, m12, m20]] {
                cells.push(child);
                regions.push(self.cell_region[k]);
                parent.push(k);
            }
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let m = midpoint[&key(e.vertices)];
            boundary_edges.push(BoundaryEdge {
                vertices: [e.vertices[0], m],
                tag: e.tag,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [m, e.vertices[1]],
                tag: e.tag,
            });
        }
        let mut interface_edges = Vec::with_capacity(2 * self.interface_edges.len());
        for l in &self.interface_loops {
            for i in 0..l.len() {
                let (a, b) = (l[i], l[(i + 1) % l.len()]);
                let m = midpoint[&key([a, b])];
                interface_edges.push([a, m]);
                interface_edges.push([m, b]);
            }
        }
        let mesh = Mesh::from_parts(vertices, cells, regions, boundary_edges, interface_edges)
            .expect("refinement of a valid mesh is valid");
        (mesh, parent)
    }
}

#[inline]
pub(crate) fn key(e: [usize; 2]) -> [usize; 2] {
    if e[0] < e[1] {
        e
    } else {
        [e[1], e[0]]
    }
}

/// Chain directed interface edges into closed loops, preserving edge order.
fn chain_loops(edges: &[[usize; 2]]) -> Result<Vec<Vec<usize>>> {
    let mut next: HashMap<usize, usize> = HashMap::with_capacity(edges.len());
    for e in edges {
        if next.insert(e[0], e[1]).is_some() {
            return Err(Error::InvalidMesh(format!(
                "interface vertex {} starts two edges",
                e[0]
            )));
        }
    }
    let mut used = vec![false; edges.len()];
    let index: HashMap<usize, usize> = edges.iter().enumerate().map(|(i, e)| (e[0], i)).collect();
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let first = edges[start][0];
        let mut l = vec![first];
        let mut cur = start;
        loop {
            used[cur] = true;
            let nxt = edges[cur][1];
            if nxt == first {
                break;
            }
            l.push(nxt);
            cur = *index
                .get(&nxt)
                .ok_or_else(|| Error::InvalidMesh(format!("interface loop is open at vertex {nxt}")))?;
            if used[cur] {
                return Err(Error::InvalidMesh("interface edges do not form simple loops".into()));
            }
        }
        loops.push(l);
    }
    Ok(loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_right_triangle_geometry() {
        let g = ElementGeometry::from_points([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.edge_matrix, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.area, 0.5);
        assert!((g.h_k - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.a_k - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_is_an_error() {
        let r = ElementGeometry::from_points([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(matches!(r, Err(Error::DegenerateCell { .. })));
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        assert!((spectral_norm([[3.0, 0.0], [0.0, -5.0]]) - 5.0).abs() < 1e-14);
        assert!((spectral_norm([[0.0, 2.0], [0.0, 0.0]]) - 2.0).abs() < 1e-14);
    }

    fn tri() -> impl Strategy<Value = [Point; 3]> {
        prop::array::uniform3(prop::array::uniform2(-1.0f64..1.0)).prop_filter("non-degenerate", |p| {
            let h = geometry::dist(p[0], p[1])
                .max(geometry::dist(p[1], p[2]))
                .max(geometry::dist(p[0], p[2]));
            geometry::orient(p[0], p[1], p[2]).abs() > 1e-3 * h * h
        })
    }

    proptest! {
        #[test]
        fn barycentric_identities(p in tri()) {
            let g = ElementGeometry::from_points(p).unwrap();
            let s = [
                g.grad_lambda.iter().map(|v| v[0]).sum::<f64>(),
                g.grad_lambda.iter().map(|v| v[1]).sum::<f64>(),
            ];
            let scale = g.grad_lambda.iter().map(|v| v[0].abs() + v[1].abs()).sum::<f64>();
            prop_assert!(s[0].abs() <= 1e-12 * scale && s[1].abs() <= 1e-12 * scale);
            // partition of unity at the three-point quadrature nodes
            for q in [[2.0/3.0, 1.0/6.0], [1.0/6.0, 2.0/3.0], [1.0/6.0, 1.0/6.0]] {
                let x = [
                    p[0][0] + g.edge_matrix[0][0] * q[0] + g.edge_matrix[0][1] * q[1],
                    p[0][1] + g.edge_matrix[1][0] * q[0] + g.edge_matrix[1][1] * q[1],
                ];
                let lam: f64 = (0..3).map(|i| {
                    let xi = p[i];
                    let gi = g.grad_lambda[i];
                    1.0 + gi[0] * (x[0] - xi[0]) + gi[1] * (x[1] - xi[1])
                }).sum::<f64>();
                prop_assert!((lam - 1.0).abs() <= 1e-13 * scale * g.h_k);
            }
            // E E^{-1} = I
            let e = g.edge_matrix;
            let it = g.inv_edge_matrix_transposed;
            for r in 0..2 {
                for c in 0..2 {
                    let v = e[r][0] * it[c][0] + e[r][1] * it[c][1];
                    let want = if r == c { 1.0 } else { 0.0 };
                    prop_assert!((v - want).abs() < 1e-9);
                }
            }
            prop_assert!(g.inv_edge_matrix_norm() <= 2f64.sqrt() / g.a_k * (1.0 + 1e-12));
            prop_assert!((g.area - g.signed_area.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn chained_loops_follow_edge_order() {
        let loops = chain_loops(&[[3, 4], [4, 5], [5, 3]]).unwrap();
        assert_eq!(loops, vec![vec![3, 4, 5]]);
        assert!(chain_loops(&[[0, 1], [1, 2]]).is_err());
    }
}
