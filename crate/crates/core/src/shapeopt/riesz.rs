use crate::error::{Error, Result};
use crate::fem::{p1_local, DofMap};
use crate::linalg::{CsrMatrix, LdltFactor, TripletBuilder};
use crate::mesh::{DeformationField, Mesh};

use super::gradient::ShapeGradient;

/// Scalar matrix of `b(·,·)` for one vector component, on all vertices.
///
/// `b(θ, φ) = c_b ∫_Ω (∇θ:∇φ + θ·φ) + (1 − c_b) ∫_{∂Ω₀} ∇_τθ : ∇_τφ`; on a
/// straight interface edge of length `L` the tangential part has stiffness `1/L`.
pub fn riesz_matrix(mesh: &Mesh, c_b: f64) -> CsrMatrix<f64> {
    let mut b = TripletBuilder::with_capacity(mesh.num_vertices(), 9 * mesh.num_cells());
    for (k, g) in mesh.geometries().iter().enumerate() {
        let c = mesh.cells()[k];
        let (s, m) = p1_local(&g.grad_lambda, g.area);
        for i in 0..3 {
            for j in 0..3 {
                b.add(c[i], c[j], c_b * (s[i][j] + m[i][j]));
            }
        }
    }
    if c_b < 1.0 {
        for e in mesh.interface_edges() {
            let len = crate::geometry::dist(mesh.vertices()[e[0]], mesh.vertices()[e[1]]);
            let w = (1.0 - c_b) / len;
            b.add(e[0], e[0], w);
            b.add(e[1], e[1], w);
            b.add(e[0], e[1], -w);
            b.add(e[1], e[0], -w);
        }
    }
    b.build()
}

/// `b(θ, θ)` for a deformation field.
pub fn riesz_energy(mesh: &Mesh, c_b: f64, theta: &DeformationField) -> Result<f64> {
    theta.check(mesh)?;
    let a = riesz_matrix(mesh, c_b);
    let mut e = 0.0;
    for m in 0..2 {
        let x: Vec<f64> = theta.vectors.iter().map(|v| v[m]).collect();
        e += crate::linalg::dot(&a.mul_vec(&x), &x);
    }
    Ok(e)
}

/// Sobolev descent direction: `b(θ, φ) = −dJ[φ]` for all `φ` vanishing on `∂Ω`.
///
/// Returns the field and `b(θ, θ)`.
pub fn riesz_descent_field(mesh: &Mesh, gradient: &ShapeGradient, c_b: f64) -> Result<(DeformationField, f64)> {
    if !(c_b > 0.0 && c_b <= 1.0) {
        return Err(Error::invalid(format!("c_b must lie in (0, 1], got {c_b}")));
    }
    if gradient.mesh_id != mesh.id() {
        return Err(Error::Mismatch("gradient belongs to another mesh".into()));
    }
    let dofs = DofMap::from_mask((0..mesh.num_vertices()).map(|v| mesh.is_boundary_vertex(v)));
    let full = riesz_matrix(mesh, c_b);
    let a = full.submatrix(dofs.free_vertices());
    let factor = LdltFactor::new(&a)?;
    let mut theta = DeformationField::zeros(mesh);
    let mut energy = 0.0;
    for m in 0..2 {
        let rhs: Vec<f64> = dofs.free_vertices().iter().map(|&v| -gradient.values[v][m]).collect();
        if rhs.iter().all(|&x| x == 0.0) {
            continue;
        }
        let x = factor.solve(&rhs);
        for (i, &v) in dofs.free_vertices().iter().enumerate() {
            theta.vectors[v][m] = x[i];
        }
        energy += crate::linalg::dot(&a.mul_vec(&x), &x);
    }
    Ok((theta, energy))
}
