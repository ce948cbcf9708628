//! Integral norms of finite-element fields.

use num_complex::Complex64;

use super::quadrature::TRI_DEG4;
use super::{cell_gradient, RealSolution};
use crate::geometry::Point;
use crate::mesh::Mesh;

/// `‖u‖_{L²(Ω)}` of a real P1 field.
pub fn l2_norm(mesh: &Mesh, u: &[f64]) -> f64 {
    super::p1_mass_inner(mesh, u, u).max(0.0).sqrt()
}

/// `‖u‖_{L²(Ω)}` of a complex P1 field.
pub fn l2_norm_complex(mesh: &Mesh, u: &[Complex64]) -> f64 {
    let re: Vec<f64> = u.iter().map(|z| z.re).collect();
    let im: Vec<f64> = u.iter().map(|z| z.im).collect();
    (super::p1_mass_inner(mesh, &re, &re) + super::p1_mass_inner(mesh, &im, &im))
        .max(0.0)
        .sqrt()
}

/// `‖∇u‖_{L²(Ω)}` of a complex P1 field.
pub fn h1_seminorm_complex(mesh: &Mesh, u: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for (k, g) in mesh.geometries().iter().enumerate() {
        let c = mesh.cells()[k];
        let gr = cell_gradient(&g.grad_lambda, [u[c[0]], u[c[1]], u[c[2]]]);
        acc += g.area * (gr[0].norm_sqr() + gr[1].norm_sqr());
    }
    acc.sqrt()
}

/// `‖∇u‖_{L²(Ω)}` of a real P1 field.
pub fn h1_seminorm(mesh: &Mesh, u: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (k, g) in mesh.geometries().iter().enumerate() {
        let c = mesh.cells()[k];
        let gr = cell_gradient(&g.grad_lambda, [u[c[0]], u[c[1]], u[c[2]]]);
        acc += g.area * (gr[0] * gr[0] + gr[1] * gr[1]);
    }
    acc.sqrt()
}

/// Full `H¹` norm of a complex P1 field.
pub fn h1_norm_complex(mesh: &Mesh, u: &[Complex64]) -> f64 {
    l2_norm_complex(mesh, u).hypot(h1_seminorm_complex(mesh, u))
}

/// `L²` and `H¹`-seminorm errors of a discrete solution against an exact one.
///
/// `exact` returns the value and gradient at a point. Integration uses a
/// degree-4 rule per cell.
pub fn errors_against(mesh: &Mesh, sol: &RealSolution, exact: impl Fn(Point) -> (f64, [f64; 2])) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (k, g) in mesh.geometries().iter().enumerate() {
        let p = mesh.cell_points(k);
        for (lam, w) in TRI_DEG4 {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let (uh, gh) = sol.eval(mesh, k, g, lam);
            let (u, gu) = exact(x);
            l2 += w * g.area * (uh - u).powi(2);
            h1 += w * g.area * ((gh[0] - gu[0]).powi(2) + (gh[1] - gu[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}
