use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{cell_gradient, BoundaryProfile, ComplexNodalField, PhysicalCoefficients};
use crate::mesh::{BoundaryTag, DeformationField, Mesh, MeshId, Region};

/// Values of the cost functionals on one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveReport {
    /// `½ ∫_Ω (Im u)²`.
    #[serde(rename = "J")]
    pub j: f64,
    /// `½ ∫_Γu (Re u − h)²`.
    #[serde(rename = "J_LS")]
    pub j_ls: f64,
    /// Inclusion area.
    pub vol: f64,
    pub rho: f64,
    /// `J + J_LS`.
    pub combined: f64,
}

impl ObjectiveReport {
    /// `J + ρ·vol`, the quantity the line search decreases.
    pub fn penalized(&self) -> f64 {
        self.j + self.rho * self.vol
    }
}

pub fn objective(mesh: &Mesh, u: &ComplexNodalField, h: &BoundaryProfile, rho: f64) -> Result<ObjectiveReport> {
    u.check(mesh)?;
    let im = u.im();
    let j = 0.5 * crate::fem::p1_mass_inner(mesh, &im, &im);
    let mut j_ls = 0.0;
    for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::GammaU) {
        let [a, b] = e.vertices;
        let (xa, xb) = (mesh.vertices()[a][0], mesh.vertices()[b][0]);
        let (ua, ub) = (u.values[a].re, u.values[b].re);
        let w = crate::geometry::dist(mesh.vertices()[a], mesh.vertices()[b]) / (xb - xa).abs();
        j_ls += 0.5
            * w
            * if xa < xb {
                h.edge_misfit(xa, xb, ua, ub)
            } else {
                h.edge_misfit(xb, xa, ub, ua)
            };
    }
    let vol = mesh.region_area(Region::Tumor);
    Ok(ObjectiveReport {
        j,
        j_ls,
        vol,
        rho,
        combined: j + j_ls,
    })
}

/// Per-vertex representation of a linear functional on deformation fields:
/// `dJ[θ] = Σ_i g_i · θ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGradient {
    pub values: Vec<[f64; 2]>,
    pub mesh_id: MeshId,
}

impl ShapeGradient {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![[0.0; 2]; mesh.num_vertices()],
            mesh_id: mesh.id(),
        }
    }

    pub fn apply(&self, theta: &DeformationField) -> Result<f64> {
        if theta.mesh_id != self.mesh_id || theta.vectors.len() != self.values.len() {
            return Err(Error::Mismatch(
                "gradient and deformation live on different meshes".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&theta.vectors)
            .map(|(g, t)| g[0] * t[0] + g[1] * t[1])
            .sum())
    }

    pub fn add_scaled(&mut self, other: &ShapeGradient, s: f64) -> Result<()> {
        if other.mesh_id != self.mesh_id {
            return Err(Error::Mismatch("gradients live on different meshes".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a[0] += s * b[0];
            a[1] += s * b[1];
        }
        Ok(())
    }

    /// Largest entry modulus over vertices that may move.
    pub fn interior_sup(&self, mesh: &Mesh) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| !mesh.is_boundary_vertex(*i))
            .map(|(_, g)| g[0].hypot(g[1]))
            .fold(0.0, f64::max)
    }
}

/// Cellwise data shared by both evaluations of the shape derivative.
struct CellTerms {
    grad_u: [Complex64; 2],
    grad_p_conj: [Complex64; 2],
    /// `∫_K (Im u)²`
    im_sq: f64,
    /// `∫_K u p̄`
    u_pbar: Complex64,
    /// `∫_K p̄`
    pbar: Complex64,
}

fn cell_terms(
    mesh: &Mesh,
    k: usize,
    grad: &[[f64; 2]; 3],
    area: f64,
    u: &ComplexNodalField,
    p: &ComplexNodalField,
) -> CellTerms {
    let c = mesh.cells()[k];
    let uv = [u.values[c[0]], u.values[c[1]], u.values[c[2]]];
    let pv = [p.values[c[0]].conj(), p.values[c[1]].conj(), p.values[c[2]].conj()];
    let grad_u = cell_gradient(grad, uv);
    let grad_p_conj = cell_gradient(grad, pv);
    let si: f64 = uv.iter().map(|z| z.im).sum();
    let di: f64 = uv.iter().map(|z| z.im * z.im).sum();
    let su: Complex64 = uv.iter().sum();
    let sp: Complex64 = pv.iter().sum();
    let dup: Complex64 = uv.iter().zip(&pv).map(|(a, b)| a * b).sum();
    CellTerms {
        grad_u,
        grad_p_conj,
        im_sq: area / 12.0 * (di + si * si),
        u_pbar: area / 12.0 * (dup + su * sp),
        pbar: area / 3.0 * sp,
    }
}

fn check_pair(mesh: &Mesh, u: &ComplexNodalField, p: &ComplexNodalField) -> Result<()> {
    u.check(mesh)?;
    p.check(mesh)
}

/// Discrete shape gradient of `J` as a per-vertex vector.
///
/// For `θ = e_m λ_i` on a cell, `div θ = ∂_m λ_i` and the transformation matrix
/// `A = div θ I − Dθ − Dθᵀ` gives
/// `∇u·A∇p̄ = ∂_mλ_i (∇u·∇p̄) − ∂_m u (∇λ_i·∇p̄) − (∇λ_i·∇u) ∂_m p̄`.
pub fn shape_gradient(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    u: &ComplexNodalField,
    p: &ComplexNodalField,
) -> Result<ShapeGradient> {
    check_pair(mesh, u, p)?;
    let mut g = ShapeGradient::zeros(mesh);
    for (k, geo) in mesh.geometries().iter().enumerate() {
        let r = mesh.cell_region()[k];
        let t = cell_terms(mesh, k, &geo.grad_lambda, geo.area, u, p);
        let (sigma, kk, q) = (coeffs.sigma(r), coeffs.k(r), coeffs.q(r));
        let gu_gp = t.grad_u[0] * t.grad_p_conj[0] + t.grad_u[1] * t.grad_p_conj[1];
        let c = mesh.cells()[k];
        for i in 0..3 {
            let gl = geo.grad_lambda[i];
            let gl_gp = t.grad_p_conj[0] * gl[0] + t.grad_p_conj[1] * gl[1];
            let gl_gu = t.grad_u[0] * gl[0] + t.grad_u[1] * gl[1];
            for m in 0..2 {
                let div = gl[m];
                let a_term = div * gu_gp - t.grad_u[m] * gl_gp - gl_gu * t.grad_p_conj[m];
                let lag = sigma * geo.area * a_term + div * (kk * t.u_pbar - q * t.pbar);
                g.values[c[i]][m] += 0.5 * div * t.im_sq - lag.im;
            }
        }
    }
    Ok(g)
}

/// `dJ[θ]` by direct per-cell evaluation of the five volume terms.
pub fn shape_derivative(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    u: &ComplexNodalField,
    p: &ComplexNodalField,
    theta: &DeformationField,
) -> Result<f64> {
    check_pair(mesh, u, p)?;
    theta.check(mesh)?;
    let mut total = 0.0;
    for (k, geo) in mesh.geometries().iter().enumerate() {
        let r = mesh.cell_region()[k];
        let c = mesh.cells()[k];
        let t = cell_terms(mesh, k, &geo.grad_lambda, geo.area, u, p);
        // (Dθ)_{mj} = ∂_j θ_m
        let mut d = [[0.0; 2]; 2];
        for i in 0..3 {
            let th = theta.vectors[c[i]];
            for m in 0..2 {
                for j in 0..2 {
                    d[m][j] += th[m] * geo.grad_lambda[i][j];
                }
            }
        }
        let div = d[0][0] + d[1][1];
        let (gu, gp) = (t.grad_u, t.grad_p_conj);
        let mut a_form = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                let a_ab = if a == b { div } else { 0.0 } - d[a][b] - d[b][a];
                a_form += gu[a] * a_ab * gp[b];
            }
        }
        let term_j = 0.5 * div * t.im_sq;
        let term_sigma = coeffs.sigma(r) * geo.area * a_form;
        let term_k = div * coeffs.k(r) * t.u_pbar;
        let term_q = div * coeffs.q(r) * t.pbar;
        total += term_j - (term_sigma + term_k - term_q).im;
    }
    Ok(total)
}

/// Gradient of `ρ |Ω₀|`: `ρ ∫_{Ω₀} div θ`.
pub fn volume_gradient(mesh: &Mesh, rho: f64) -> Result<ShapeGradient> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be non-negative, got {rho}")));
    }
    let mut g = ShapeGradient::zeros(mesh);
    for (k, geo) in mesh.geometries().iter().enumerate() {
        if mesh.cell_region()[k] != Region::Tumor {
            continue;
        }
        let c = mesh.cells()[k];
        for i in 0..3 {
            for m in 0..2 {
                g.values[c[i]][m] += rho * geo.area * geo.grad_lambda[i][m];
            }
        }
    }
    Ok(g)
}

/// Weight that makes the volume penalty equal `(β − 1) J`.
pub fn balance_rho(j: f64, vol: f64, beta: f64) -> Result<f64> {
    if !(vol > 0.0) {
        return Err(Error::invalid(format!("inclusion volume must be positive, got {vol}")));
    }
    if !(beta > 1.0) {
        return Err(Error::invalid(format!("beta must exceed 1, got {beta}")));
    }
    let target = (beta - 1.0) * j;
    let rho = target / vol;
    // pick the neighbouring float that makes the identity hold exactly when one exists
    let best = [rho, rho.next_up(), rho.next_down()]
        .into_iter()
        .min_by(|a, b| (target - a * vol).abs().total_cmp(&(target - b * vol).abs()))
        .unwrap_or(rho);
    Ok(best)
}
