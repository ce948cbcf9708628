use std::collections::HashMap;

use num_complex::Complex64;

use super::profile::{arc_position, BoundaryProfile};
use super::quadrature::{gauss3, TRI_DEG4};
use super::{p1_local, ComplexNodalField, DofMap, NodalField, PhysicalCoefficients};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{norm2, CsrMatrix, LdltFactor, Scalar, TripletBuilder};
use crate::mesh::{key, BoundaryTag, ElementGeometry, Mesh, MeshId, Region};

const RESIDUAL_TOL: f64 = 1e-10;

/// Coupled complex system restricted to free unknowns.
#[derive(Debug, Clone)]
pub struct SparseComplexSystem {
    pub matrix: CsrMatrix<Complex64>,
    pub rhs: Vec<Complex64>,
    pub dof_map: DofMap,
    /// Value imposed on Dirichlet vertices.
    pub dirichlet_value: f64,
    mesh_id: MeshId,
}

impl SparseComplexSystem {
    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }
}

/// Full `nv × nv` matrix `σ-stiffness + k-mass + robin · Γu-mass`.
fn assemble_full<T: Scalar>(mesh: &Mesh, coeffs: &PhysicalCoefficients, robin: T) -> CsrMatrix<T> {
    let nv = mesh.num_vertices();
    let mut b = TripletBuilder::with_capacity(nv, 9 * mesh.num_cells() + 4 * mesh.boundary_edges().len());
    for (k, g) in mesh.geometries().iter().enumerate() {
        let c = mesh.cells()[k];
        let r = mesh.cell_region()[k];
        let (s, m) = p1_local(&g.grad_lambda, g.area);
        let (sigma, kk) = (coeffs.sigma(r), coeffs.k(r));
        for i in 0..3 {
            for j in 0..3 {
                b.add(c[i], c[j], T::from_real(sigma * s[i][j] + kk * m[i][j]));
            }
        }
    }
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::GammaU) {
        let [a, c] = e.vertices;
        let l = crate::geometry::dist(mesh.vertices()[a], mesh.vertices()[c]);
        b.add(a, a, robin * T::from_real(l / 3.0));
        b.add(c, c, robin * T::from_real(l / 3.0));
        b.add(a, c, robin * T::from_real(l / 6.0));
        b.add(c, a, robin * T::from_real(l / 6.0));
    }
    b.build()
}

/// `∫ Q φ_i + α T_a ∫_Γu φ_i + i ∫_Γu h φ_i` with `h` taken as its P1 interpolant.
/// The skin term `∫ h ψ̄` integrates the measured profile exactly, so every
/// sample contributes even when it falls inside a mesh edge.
fn ccbm_load(mesh: &Mesh, coeffs: &PhysicalCoefficients, h: &BoundaryProfile) -> Vec<Complex64> {
    let mut l = vec![Complex64::new(0.0, 0.0); mesh.num_vertices()];
    for (k, c) in mesh.cells().iter().enumerate() {
        let q = coeffs.q(mesh.cell_region()[k]) * mesh.cell_area(k) / 3.0;
        for &v in c {
            l[v].re += q;
        }
    }
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::GammaU) {
        let [a, c] = e.vertices;
        let len = crate::geometry::dist(mesh.vertices()[a], mesh.vertices()[c]);
        l[a].re += coeffs.alpha * coeffs.t_a * len / 2.0;
        l[c].re += coeffs.alpha * coeffs.t_a * len / 2.0;
        let (xa, xc) = (arc_position(mesh, a), arc_position(mesh, c));
        let (lo, hi) = if xa < xc { (a, c) } else { (c, a) };
        // profile integrals are in arc position; rescale to the edge length
        let w = len / (xc - xa).abs();
        let m = h.edge_moments(xa.min(xc), xa.max(xc));
        l[lo].im += w * m[0];
        l[hi].im += w * m[1];
    }
    l
}

fn has_gamma_u(mesh: &Mesh) -> Result<()> {
    if mesh.boundary_edges().iter().any(|e| e.tag == BoundaryTag::GammaU) {
        Ok(())
    } else {
        Err(Error::InvalidMesh("mesh has no skin (Gamma_u) edges".into()))
    }
}

fn eliminate<T: Scalar>(full: &CsrMatrix<T>, load: &[T], dofs: &DofMap, lift: &[T]) -> (CsrMatrix<T>, Vec<T>) {
    let a = full.submatrix(dofs.free_vertices());
    let al = full.mul_vec(lift);
    let rhs = dofs.free_vertices().iter().map(|&v| load[v] - al[v]).collect();
    (a, rhs)
}

pub fn assemble_ccbm_state(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    h: &BoundaryProfile,
) -> Result<SparseComplexSystem> {
    coeffs.validate()?;
    has_gamma_u(mesh)?;
    let full = assemble_full(mesh, coeffs, Complex64::new(coeffs.alpha, 1.0));
    let load = ccbm_load(mesh, coeffs, h);
    let dof_map = DofMap::p1(mesh);
    let lift: Vec<Complex64> = (0..mesh.num_vertices())
        .map(|v| {
            if mesh.is_dirichlet_vertex(v) {
                Complex64::new(coeffs.t_b, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let (matrix, rhs) = eliminate(&full, &load, &dof_map, &lift);
    Ok(SparseComplexSystem {
        matrix,
        rhs,
        dof_map,
        dirichlet_value: coeffs.t_b,
        mesh_id: mesh.id(),
    })
}

fn relative_residual<T: Scalar>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<T> = ax.iter().zip(b).map(|(&p, &q)| q - p).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Factorized state operator, reused for the adjoint and material-derivative solves.
#[derive(Debug)]
pub struct CcbmSolver {
    system: SparseComplexSystem,
    factor: LdltFactor<Complex64>,
}

impl CcbmSolver {
    pub fn new(system: SparseComplexSystem) -> Result<Self> {
        let factor = LdltFactor::new(&system.matrix)?;
        Ok(Self { system, factor })
    }

    pub fn assemble(mesh: &Mesh, coeffs: &PhysicalCoefficients, h: &BoundaryProfile) -> Result<Self> {
        Self::new(assemble_ccbm_state(mesh, coeffs, h)?)
    }

    pub fn system(&self) -> &SparseComplexSystem {
        &self.system
    }

    /// Solve `A x = b` on free unknowns with one step of iterative refinement.
    pub fn solve_free(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let a = &self.system.matrix;
        let mut x = self.factor.solve(b);
        let ax = a.mul_vec(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        for (xi, di) in x.iter_mut().zip(self.factor.solve(&r)) {
            *xi += di;
        }
        let res = relative_residual(a, &x, b);
        if !(res <= RESIDUAL_TOL) {
            return Err(Error::Residual(res));
        }
        Ok(x)
    }

    /// Solve `conj(A) x = b`, the adjoint operator.
    pub fn solve_conjugate_free(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let bc: Vec<Complex64> = b.iter().map(|z| z.conj()).collect();
        Ok(self.solve_free(&bc)?.into_iter().map(|z| z.conj()).collect())
    }

    /// Scatter free values into a vertex field with `dirichlet` on fixed vertices.
    pub fn expand(&self, free: &[Complex64], dirichlet: Complex64) -> ComplexNodalField {
        let dm = &self.system.dof_map;
        let values = (0..dm.num_total())
            .map(|v| match dm.free(v) {
                Some(i) => free[i],
                None => dirichlet,
            })
            .collect();
        ComplexNodalField {
            values,
            mesh_id: self.system.mesh_id,
        }
    }

    /// Restrict a vertex load to the free unknowns.
    pub fn restrict(&self, full: &[Complex64]) -> Vec<Complex64> {
        self.system.dof_map.free_vertices().iter().map(|&v| full[v]).collect()
    }

    pub fn state(&self) -> Result<ComplexNodalField> {
        let x = self.solve_free(&self.system.rhs)?;
        Ok(self.expand(&x, Complex64::new(self.system.dirichlet_value, 0.0)))
    }

    /// Adjoint solution for the source `∫ Im(u) v̄`.
    pub fn adjoint(&self, mesh: &Mesh, u: &ComplexNodalField) -> Result<ComplexNodalField> {
        u.check(mesh)?;
        if mesh.id() != self.system.mesh_id {
            return Err(Error::Mismatch("solver was assembled on a different mesh".into()));
        }
        let f = adjoint_load(mesh, &u.im());
        let b = self.restrict(&f);
        if b.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(ComplexNodalField::zeros(mesh));
        }
        let x = self.solve_conjugate_free(&b)?;
        Ok(self.expand(&x, Complex64::new(0.0, 0.0)))
    }
}

/// `∫ u_im φ_i` for every vertex.
pub(crate) fn adjoint_load(mesh: &Mesh, u_im: &[f64]) -> Vec<Complex64> {
    let mut f = vec![Complex64::new(0.0, 0.0); mesh.num_vertices()];
    for (k, c) in mesh.cells().iter().enumerate() {
        let a = mesh.cell_area(k);
        let s: f64 = c.iter().map(|&v| u_im[v]).sum();
        for &v in c {
            f[v].re += a / 12.0 * (u_im[v] + s);
        }
    }
    f
}

pub fn solve_ccbm_state(system: &SparseComplexSystem) -> Result<ComplexNodalField> {
    CcbmSolver::new(system.clone())?.state()
}

/// Adjoint state; assembles and factors the operator afresh.
pub fn solve_adjoint(mesh: &Mesh, coeffs: &PhysicalCoefficients, u: &ComplexNodalField) -> Result<ComplexNodalField> {
    u.check(mesh)?;
    let zero = BoundaryProfile::new(vec![(f64::MIN, 0.0), (f64::MAX, 0.0)])?;
    CcbmSolver::assemble(mesh, coeffs, &zero)?.adjoint(mesh, u)
}

/// A scalar elliptic problem `−∇·(σ∇u) + k u = f` with Robin, flux and Dirichlet data.
///
/// On the skin `−σ ∂ₙu = α u − g`, on the lateral walls `−σ ∂ₙu = q`, and on the
/// bottom `u = u_D`.
pub trait RealProblem {
    fn sigma(&self, region: Region) -> f64;
    fn k(&self, region: Region) -> f64;
    fn source(&self, x: Point, region: Region) -> f64;
    fn alpha(&self) -> f64;
    fn robin_data(&self, x: Point) -> f64;
    fn wall_flux(&self, _x: Point) -> f64 {
        0.0
    }
    fn dirichlet(&self, x: Point) -> f64;
}

impl RealProblem for PhysicalCoefficients {
    fn sigma(&self, region: Region) -> f64 {
        PhysicalCoefficients::sigma(self, region)
    }
    fn k(&self, region: Region) -> f64 {
        PhysicalCoefficients::k(self, region)
    }
    fn source(&self, _x: Point, region: Region) -> f64 {
        self.q(region)
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn robin_data(&self, _x: Point) -> f64 {
        self.alpha * self.t_a
    }
    fn dirichlet(&self, _x: Point) -> f64 {
        self.t_b
    }
}

/// P1 or P2 solution of a [`RealProblem`].
#[derive(Debug, Clone)]
pub struct RealSolution {
    pub order: u8,
    /// Vertex values followed (for P2) by edge-midpoint values.
    pub dofs: Vec<f64>,
    edge_dof: HashMap<[usize; 2], usize>,
    mesh_id: MeshId,
}

impl RealSolution {
    pub fn vertex_field(&self, mesh: &Mesh) -> NodalField {
        NodalField {
            values: self.dofs[..mesh.num_vertices()].to_vec(),
            mesh_id: self.mesh_id,
        }
    }

    fn local_dofs(&self, mesh: &Mesh, k: usize) -> ([usize; 6], usize) {
        local_dofs(mesh, k, self.order, &self.edge_dof)
    }

    /// Value and gradient at barycentric point `lam` of cell `k`.
    pub fn eval(&self, mesh: &Mesh, k: usize, g: &ElementGeometry, lam: [f64; 3]) -> (f64, [f64; 2]) {
        let (d, n) = self.local_dofs(mesh, k);
        let (phi, grad) = basis(self.order, g, lam);
        let mut v = 0.0;
        let mut gr = [0.0; 2];
        for i in 0..n {
            let c = self.dofs[d[i]];
            v += c * phi[i];
            gr[0] += c * grad[i][0];
            gr[1] += c * grad[i][1];
        }
        (v, gr)
    }
}

fn local_dofs(mesh: &Mesh, k: usize, order: u8, edge_dof: &HashMap<[usize; 2], usize>) -> ([usize; 6], usize) {
    let c = mesh.cells()[k];
    if order == 1 {
        return ([c[0], c[1], c[2], 0, 0, 0], 3);
    }
    let e = |a: usize, b: usize| edge_dof[&key([a, b])];
    ([c[0], c[1], c[2], e(c[0], c[1]), e(c[1], c[2]), e(c[2], c[0])], 6)
}

/// Lagrange basis values and gradients at a barycentric point.
fn basis(order: u8, g: &ElementGeometry, l: [f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
    let gl = &g.grad_lambda;
    let mut phi = [0.0; 6];
    let mut grad = [[0.0; 2]; 6];
    if order == 1 {
        phi[..3].copy_from_slice(&l);
        grad[..3].copy_from_slice(gl);
        return (phi, grad);
    }
    for i in 0..3 {
        phi[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        grad[i] = [s * gl[i][0], s * gl[i][1]];
    }
    for (m, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        phi[3 + m] = 4.0 * l[i] * l[j];
        grad[3 + m] = [
            4.0 * (l[i] * gl[j][0] + l[j] * gl[i][0]),
            4.0 * (l[i] * gl[j][1] + l[j] * gl[i][1]),
        ];
    }
    (phi, grad)
}

/// 1D basis along an edge parametrized by `t ∈ [0, 1]`: ends then midpoint.
fn edge_basis(order: u8, t: f64) -> ([f64; 3], usize) {
    if order == 1 {
        ([1.0 - t, t, 0.0], 2)
    } else {
        (
            [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)],
            3,
        )
    }
}

/// Solve a [`RealProblem`] with P1 (`order = 1`) or P2 (`order = 2`) elements.
pub fn solve_real_general<P: RealProblem>(mesh: &Mesh, problem: &P, order: u8) -> Result<RealSolution> {
    if order != 1 && order != 2 {
        return Err(Error::invalid(format!("element order must be 1 or 2, got {order}")));
    }
    has_gamma_u(mesh)?;
    let nv = mesh.num_vertices();
    let mut edge_dof = HashMap::new();
    let mut node_pos: Vec<Point> = mesh.vertices().to_vec();
    if order == 2 {
        for e in mesh.edges() {
            edge_dof.insert(e.vertices, node_pos.len());
            let (p, q) = (mesh.vertices()[e.vertices[0]], mesh.vertices()[e.vertices[1]]);
            node_pos.push([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]);
        }
    }
    let n = node_pos.len();
    let mut fixed = vec![false; n];
    for v in 0..nv {
        fixed[v] = mesh.is_dirichlet_vertex(v);
    }
    let edge_nodes =
        |e: [usize; 2]| -> [usize; 3] { [e[0], e[1], if order == 2 { edge_dof[&key(e)] } else { usize::MAX }] };
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::GammaB) {
        if order == 2 {
            fixed[edge_nodes(e.vertices)[2]] = true;
        }
    }

    let nloc = if order == 1 { 3 } else { 6 };
    let mut b = TripletBuilder::with_capacity(n, nloc * nloc * mesh.num_cells());
    let mut load = vec![0.0; n];
    for (k, g) in mesh.geometries().iter().enumerate() {
        let r = mesh.cell_region()[k];
        let (sigma, kk) = (problem.sigma(r), problem.k(r));
        let (d, _) = local_dofs(mesh, k, order, &edge_dof);
        let p = mesh.cell_points(k);
        let mut ke = [[0.0; 6]; 6];
        let mut fe = [0.0; 6];
        for (lam, w) in TRI_DEG4 {
            let (phi, grad) = basis(order, g, lam);
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let f = problem.source(x, r);
            let wa = w * g.area;
            for i in 0..nloc {
                fe[i] += wa * f * phi[i];
                for j in 0..nloc {
                    ke[i][j] +=
                        wa * (sigma * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]) + kk * phi[i] * phi[j]);
                }
            }
        }
        for i in 0..nloc {
            load[d[i]] += fe[i];
            for j in 0..nloc {
                b.add(d[i], d[j], ke[i][j]);
            }
        }
    }
    let alpha = problem.alpha();
    for e in mesh.boundary_edges() {
        if e.tag == BoundaryTag::GammaB {
            continue;
        }
        let nodes = edge_nodes(e.vertices);
        let (pa, pb) = (mesh.vertices()[e.vertices[0]], mesh.vertices()[e.vertices[1]]);
        let len = crate::geometry::dist(pa, pb);
        for (t, w) in gauss3() {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let (phi, m) = edge_basis(order, t);
            let wl = w * len;
            let data = match e.tag {
                BoundaryTag::GammaU => problem.robin_data(x),
                _ => -problem.wall_flux(x),
            };
            for i in 0..m {
                load[nodes[i]] += wl * data * phi[i];
                if e.tag == BoundaryTag::GammaU {
                    for j in 0..m {
                        b.add(nodes[i], nodes[j], wl * alpha * phi[i] * phi[j]);
                    }
                }
            }
        }
    }
    let full = b.build();
    let dofs = DofMap::from_mask(fixed.iter().copied());
    let lift: Vec<f64> = (0..n)
        .map(|i| if fixed[i] { problem.dirichlet(node_pos[i]) } else { 0.0 })
        .collect();
    let (a, rhs) = eliminate(&full, &load, &dofs, &lift);
    let factor = LdltFactor::new(&a)?;
    let mut x = factor.solve(&rhs);
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
    for (xi, di) in x.iter_mut().zip(factor.solve(&r)) {
        *xi += di;
    }
    let res = relative_residual(&a, &x, &rhs);
    if !(res <= RESIDUAL_TOL) {
        return Err(Error::Residual(res));
    }
    let mut values = lift;
    for (i, &v) in dofs.free_vertices().iter().enumerate() {
        values[v] = x[i];
    }
    Ok(RealSolution {
        order,
        dofs: values,
        edge_dof,
        mesh_id: mesh.id(),
    })
}

/// Temperature field of the tissue model and its skin trace.
pub fn solve_forward_real(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    order: u8,
) -> Result<(NodalField, BoundaryProfile)> {
    coeffs.validate()?;
    let sol = solve_real_general(mesh, coeffs, order)?;
    let field = sol.vertex_field(mesh);
    let profile = BoundaryProfile::from_trace(mesh, &field.values)?;
    Ok((field, profile))
}
