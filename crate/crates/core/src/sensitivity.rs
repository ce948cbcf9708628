//! Sensitivity of the discrete state to mesh motion.
//!
//! Moving the vertices with velocity `Ẋ` changes the state at rate `u̇_h`,
//! the material derivative. It solves the state system with a right-hand
//! side built from the cellwise edge-matrix rates `Ė_K`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::norms::{h1_norm_complex, h1_seminorm, h1_seminorm_complex};
use crate::fem::{cell_gradient, BoundaryProfile, CcbmSolver, ComplexNodalField, PhysicalCoefficients};
use crate::geometry::Point;
use crate::mesh::{DeformationField, Mesh, MeshStats};
use crate::shapeopt::{riesz_descent_field, shape_gradient};

/// Nodal mesh velocity, zero on `∂Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshVelocity {
    pub field: DeformationField,
    /// Sampled from a Lipschitz field rather than drawn as nodal noise.
    pub smooth: bool,
}

impl MeshVelocity {
    pub fn smooth(mesh: &Mesh, f: impl Fn(Point) -> [f64; 2]) -> Self {
        Self {
            field: DeformationField::from_fn(mesh, f),
            smooth: true,
        }
    }

    /// `dir · (1 − |x − c|²/R²)²` inside the disc of radius `R`, zero outside.
    pub fn bump(mesh: &Mesh, center: Point, radius: f64, dir: [f64; 2]) -> Self {
        Self::smooth(mesh, |p| {
            let r2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
            let w = if r2 < 1.0 { (1.0 - r2).powi(2) } else { 0.0 };
            [w * dir[0], w * dir[1]]
        })
    }

    /// Independent uniform nodal vectors in `[−1, 1]²`, scaled to unit sup norm.
    pub fn rough(mesh: &Mesh, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = DeformationField::zeros(mesh);
        for (i, v) in field.vectors.iter_mut().enumerate() {
            let draw = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            if !mesh.is_boundary_vertex(i) {
                *v = draw;
            }
        }
        let s = field.sup_norm();
        if s > 0.0 {
            field = field.scaled(1.0 / s);
        }
        Self { field, smooth: false }
    }

    pub fn kind(&self) -> &'static str {
        if self.smooth {
            "smooth"
        } else {
            "rough"
        }
    }
}

/// `Ė_K`: columns are the velocity differences along the two cell edges from vertex 0.
pub fn edge_matrix_rate(mesh: &Mesh, k: usize, v: &DeformationField) -> [[f64; 2]; 2] {
    let c = mesh.cells()[k];
    let (v0, v1, v2) = (v.vectors[c[0]], v.vectors[c[1]], v.vectors[c[2]]);
    [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]]
}

/// Velocity Jacobian on cell `k`, `(∇Ẋ)_{mj} = ∂_j Ẋ_m = (Ė_K E_K⁻¹)_{mj}`.
fn velocity_jacobian(grad: &[[f64; 2]; 3], c: [usize; 3], v: &DeformationField) -> [[f64; 2]; 2] {
    let mut d = [[0.0; 2]; 2];
    for i in 0..3 {
        let vi = v.vectors[c[i]];
        for m in 0..2 {
            for j in 0..2 {
                d[m][j] += vi[m] * grad[i][j];
            }
        }
    }
    d
}

/// Material derivative of the state under mesh velocity `v`.
///
/// `solver` must be the factored state operator on `mesh` and `u` its solution.
pub fn material_derivative(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    solver: &CcbmSolver,
    u: &ComplexNodalField,
    v: &MeshVelocity,
) -> Result<ComplexNodalField> {
    u.check(mesh)?;
    v.field.check(mesh)?;
    if solver.system().mesh_id() != mesh.id() {
        return Err(Error::Mismatch("solver was assembled on a different mesh".into()));
    }
    for (i, x) in v.field.vectors.iter().enumerate() {
        if mesh.is_boundary_vertex(i) && (x[0] != 0.0 || x[1] != 0.0) {
            return Err(Error::invalid(format!(
                "mesh velocity does not vanish on boundary vertex {i}"
            )));
        }
    }
    let mut f = vec![Complex64::new(0.0, 0.0); mesh.num_vertices()];
    for (k, g) in mesh.geometries().iter().enumerate() {
        let c = mesh.cells()[k];
        let r = mesh.cell_region()[k];
        let (sigma, kk, q) = (coeffs.sigma(r), coeffs.k(r), coeffs.q(r));
        let d = velocity_jacobian(&g.grad_lambda, c, &v.field);
        let div = d[0][0] + d[1][1];
        if d.iter().flatten().all(|&x| x == 0.0) {
            continue;
        }
        let uv = [u.values[c[0]], u.values[c[1]], u.values[c[2]]];
        let gu = cell_gradient(&g.grad_lambda, uv);
        let su: Complex64 = uv.iter().sum();
        // (D + Dᵀ) ∇u
        let sym = [
            gu[0] * (2.0 * d[0][0]) + gu[1] * (d[0][1] + d[1][0]),
            gu[0] * (d[0][1] + d[1][0]) + gu[1] * (2.0 * d[1][1]),
        ];
        for j in 0..3 {
            let gl = g.grad_lambda[j];
            let stiff_sym = sym[0] * gl[0] + sym[1] * gl[1];
            let stiff = gu[0] * gl[0] + gu[1] * gl[1];
            let mass = g.area / 12.0 * (uv[j] + su);
            let lag = sigma * g.area * stiff + kk * mass - q * g.area / 3.0;
            f[c[j]] += sigma * g.area * stiff_sym - lag * div;
        }
    }
    let b = solver.restrict(&f);
    if b.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(ComplexNodalField::zeros(mesh));
    }
    let x = solver.solve_free(&b)?;
    Ok(solver.expand(&x, Complex64::new(0.0, 0.0)))
}

/// One step of the finite-difference oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdEntry {
    pub t: f64,
    /// `‖(u_h(t) − u_h)/t − u̇_h‖_{H¹}`; `None` when the deformed mesh inverts.
    pub error: Option<f64>,
}

/// Compare `u̇_h` against difference quotients on meshes moved by `t·v`.
///
/// The deformed mesh keeps connectivity, so the pullback is nodal identification.
pub fn fd_oracle(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    h: &BoundaryProfile,
    v: &MeshVelocity,
    t_list: &[f64],
) -> Result<Vec<FdEntry>> {
    let solver = CcbmSolver::assemble(mesh, coeffs, h)?;
    let u = solver.state()?;
    let udot = material_derivative(mesh, coeffs, &solver, &u, v)?;
    fd_errors(mesh, coeffs, h, v, &u, &udot, t_list)
}

fn fd_errors(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    h: &BoundaryProfile,
    v: &MeshVelocity,
    u: &ComplexNodalField,
    udot: &ComplexNodalField,
    t_list: &[f64],
) -> Result<Vec<FdEntry>> {
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let moved = match mesh.deform(&v.field, t) {
            Ok(m) => m,
            Err(Error::Inversion { .. }) => {
                out.push(FdEntry { t, error: None });
                continue;
            }
            Err(e) => return Err(e),
        };
        let ut = CcbmSolver::assemble(&moved, coeffs, h)?.state()?;
        let diff: Vec<Complex64> = ut
            .values
            .iter()
            .zip(&u.values)
            .zip(&udot.values)
            .map(|((a, b), d)| (a - b) / t - d)
            .collect();
        // the quotient lives on the reference mesh by nodal identification
        out.push(FdEntry {
            t,
            error: Some(h1_norm_complex(mesh, &diff)),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub level: usize,
    pub kind: &'static str,
    /// `‖∇u̇_h‖_{L²}`.
    pub grad_norm: f64,
    pub fd_errors: Vec<FdEntry>,
    pub mesh_stats: MeshStats,
}

/// Material-derivative norms and oracle errors for a smooth and a rough
/// velocity on each mesh of a refinement family.
pub fn stability_sweep(
    meshes: &[Mesh],
    coeffs: &PhysicalCoefficients,
    h: &BoundaryProfile,
    smooth: impl Fn(&Mesh) -> MeshVelocity,
    rough_seed: u64,
    t_list: &[f64],
) -> Result<Vec<SensitivityReport>> {
    let mut out = Vec::new();
    for (level, mesh) in meshes.iter().enumerate() {
        let solver = CcbmSolver::assemble(mesh, coeffs, h)?;
        let u = solver.state()?;
        for v in [
            smooth(mesh),
            MeshVelocity::rough(mesh, rough_seed.wrapping_add(level as u64)),
        ] {
            let udot = material_derivative(mesh, coeffs, &solver, &u, &v)?;
            out.push(SensitivityReport {
                level,
                kind: v.kind(),
                grad_norm: h1_seminorm_complex(mesh, &udot.values),
                fd_errors: fd_errors(mesh, coeffs, h, &v, &u, &udot, t_list)?,
                mesh_stats: mesh.stats(),
            });
        }
    }
    Ok(out)
}

/// `sensitivity.csv`, one row per report and step.
pub fn write_sensitivity_csv<W: Write>(reports: &[SensitivityReport], mut w: W) -> Result<()> {
    writeln!(
        w,
        "mesh_level,h_max,min_aK,max_hK_over_aK,field_kind,t,fd_error,grad_norm"
    )?;
    for r in reports {
        let s = &r.mesh_stats;
        for e in &r.fd_errors {
            let err = e.error.map(|x| format!("{x:?}")).unwrap_or_else(|| "inverted".into());
            writeln!(
                w,
                "{},{:?},{:?},{:?},{},{:?},{},{:?}",
                r.level, s.h_max, s.min_a_k, s.max_h_over_a, r.kind, e.t, err, r.grad_norm
            )?;
        }
    }
    Ok(())
}

/// Descent-field stability for one `(mesh, c_b, δ)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CbEffectRow {
    pub level: usize,
    pub c_b: f64,
    pub delta: f64,
    /// `‖∇θ‖_{L²}` of the descent field scaled to unit sup norm.
    pub theta_grad_norm: f64,
    /// `‖∇u̇_h‖_{L²}` under that field.
    pub material_grad_norm: f64,
}

/// One Riesz solve per mesh, `c_b` and noisy profile.
///
/// `profiles` pairs each noise level with its measurement.
pub fn cb_effect_sweep(
    meshes: &[Mesh],
    coeffs: &PhysicalCoefficients,
    c_b: &[f64],
    profiles: &[(f64, BoundaryProfile)],
) -> Result<Vec<CbEffectRow>> {
    let mut out = Vec::new();
    for (level, mesh) in meshes.iter().enumerate() {
        for (delta, h) in profiles {
            let solver = CcbmSolver::assemble(mesh, coeffs, h)?;
            let u = solver.state()?;
            let p = solver.adjoint(mesh, &u)?;
            let g = shape_gradient(mesh, coeffs, &u, &p)?;
            for &cb in c_b {
                let (theta, _) = riesz_descent_field(mesh, &g, cb)?;
                let s = theta.sup_norm();
                let theta = if s > 0.0 { theta.scaled(1.0 / s) } else { theta };
                let grad2: f64 = (0..2)
                    .map(|m| {
                        let comp: Vec<f64> = theta.vectors.iter().map(|x| x[m]).collect();
                        h1_seminorm(mesh, &comp).powi(2)
                    })
                    .sum();
                let v = MeshVelocity {
                    field: theta,
                    smooth: true,
                };
                let udot = material_derivative(mesh, coeffs, &solver, &u, &v)?;
                out.push(CbEffectRow {
                    level,
                    c_b: cb,
                    delta: *delta,
                    theta_grad_norm: grad2.sqrt(),
                    material_grad_norm: h1_seminorm_complex(mesh, &udot.values),
                });
            }
        }
    }
    Ok(out)
}

/// `max/min` of a metric over mesh levels for fixed `(c_b, δ)`.
pub fn spread_over_levels(rows: &[CbEffectRow], c_b: f64, delta: f64, metric: impl Fn(&CbEffectRow) -> f64) -> f64 {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.c_b == c_b && r.delta == delta)
        .map(metric)
        .collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(l, u), &x| (l.min(x), u.max(x)));
    hi / lo
}
