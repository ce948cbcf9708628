mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thermoshape::fem::{solve_forward_real, CcbmSolver};
use thermoshape::shapeopt::{
    balance_rho, objective, riesz_descent_field, riesz_energy, shape_derivative, shape_gradient, volume_gradient,
    ShapeGradient,
};
use thermoshape::{BoundaryProfile, DeformationField, Mesh, PhysicalCoefficients, Region};

fn measurement(center: [f64; 2], r: f64) -> BoundaryProfile {
    let fine = data_mesh(center, r, 0.001);
    solve_forward_real(&fine, &PhysicalCoefficients::default(), 2)
        .unwrap()
        .1
}

fn cost(mesh: &Mesh, h: &BoundaryProfile) -> f64 {
    let u = CcbmSolver::assemble(mesh, &PhysicalCoefficients::default(), h)
        .unwrap()
        .state()
        .unwrap();
    objective(mesh, &u, h, 0.0).unwrap().j
}

/// Low-frequency field vanishing on the rectangle boundary, scaled to unit sup norm.
fn smooth_field(mesh: &Mesh, rng: &mut ChaCha8Rng) -> DeformationField {
    let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = DeformationField::from_fn(mesh, |p| {
        let (sx, sy) = ((PI * p[0] / W).sin(), (PI * p[1] / H).sin());
        let (cx, cy) = ((PI * p[0] / W).cos(), (PI * p[1] / H).cos());
        let b = sx * sy;
        [
            b * (c[0] + c[1] * cx + c[2] * cy + c[3] * cx * cy),
            b * (c[4] + c[5] * cx + c[6] * cy + c[7] * cx * cy),
        ]
    });
    let s = f.sup_norm();
    f.scaled(1.0 / s)
}

struct Setup {
    mesh: Mesh,
    h: BoundaryProfile,
    coeffs: PhysicalCoefficients,
}

fn displaced() -> Setup {
    Setup {
        mesh: disc_mesh([0.046, 0.01], 0.005, 0.003),
        h: measurement([0.045, 0.02], 0.005),
        coeffs: PhysicalCoefficients::default(),
    }
}

fn gradient_at(
    s: &Setup,
) -> (
    ShapeGradient,
    thermoshape::ComplexNodalField,
    thermoshape::ComplexNodalField,
) {
    let solver = CcbmSolver::assemble(&s.mesh, &s.coeffs, &s.h).unwrap();
    let u = solver.state().unwrap();
    let p = solver.adjoint(&s.mesh, &u).unwrap();
    (shape_gradient(&s.mesh, &s.coeffs, &u, &p).unwrap(), u, p)
}

#[test]
fn shape_derivative_matches_central_differences() {
    let s = displaced();
    let (g, u, p) = gradient_at(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = 1e-6;
    for _ in 0..5 {
        let theta = smooth_field(&s.mesh, &mut rng);
        let dj = shape_derivative(&s.mesh, &s.coeffs, &u, &p, &theta).unwrap();
        let plus = cost(&s.mesh.deform(&theta, t).unwrap(), &s.h);
        let minus = cost(&s.mesh.deform(&theta, -t).unwrap(), &s.h);
        let fd = (plus - minus) / (2.0 * t);
        assert!(rel(dj, fd) <= 1e-3, "dJ={dj:e} fd={fd:e}");
        assert!(rel(g.apply(&theta).unwrap(), dj) <= 1e-10);
    }
}

#[test]
fn forward_differences_converge_at_first_order() {
    let s = displaced();
    let (_, u, p) = gradient_at(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let theta = smooth_field(&s.mesh, &mut rng);
    let dj = shape_derivative(&s.mesh, &s.coeffs, &u, &p, &theta).unwrap();
    let j0 = cost(&s.mesh, &s.h);
    let ts = [1e-4, 1e-5, 1e-6, 1e-7];
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let fd = (cost(&s.mesh.deform(&theta, t).unwrap(), &s.h) - j0) / t;
            (t.ln(), (fd - dj).abs().ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}, {pts:?}");
}

#[test]
fn descent_identity_holds() {
    let s = displaced();
    let (mut g, _, _) = gradient_at(&s);
    g.add_scaled(&volume_gradient(&s.mesh, 3e-5).unwrap(), 1.0).unwrap();
    for cb in [0.2, 0.5, 1.0] {
        let (theta, b) = riesz_descent_field(&s.mesh, &g, cb).unwrap();
        let dj = g.apply(&theta).unwrap();
        assert!(dj < 0.0);
        assert!((b + dj).abs() <= 1e-10 * b, "b={b:e} dJ={dj:e}");
        assert!(rel(riesz_energy(&s.mesh, cb, &theta).unwrap(), b) < 1e-10);
    }
}

#[test]
fn zero_gradient_gives_zero_field() {
    let mesh = disc_mesh([0.045, 0.015], 0.004, 0.004);
    let (theta, b) = riesz_descent_field(&mesh, &ShapeGradient::zeros(&mesh), 0.5).unwrap();
    assert_eq!(b, 0.0);
    assert_eq!(theta.sup_norm(), 0.0);
}

#[test]
fn full_h1_weight_drops_interface_term() {
    let s = displaced();
    let (g, _, _) = gradient_at(&s);
    let (theta, _) = riesz_descent_field(&s.mesh, &g, 1.0).unwrap();
    let a = riesz_energy(&s.mesh, 1.0, &theta).unwrap();
    let near = riesz_energy(&s.mesh, 1.0 - 1e-14, &theta).unwrap();
    assert!((a - near).abs() <= 1e-12 * a.max(1.0));
}

#[test]
fn volume_gradient_checks() {
    let mesh = disc_mesh([0.045, 0.015], 0.005, 0.003);
    let rho = 2.5;
    let g = volume_gradient(&mesh, rho).unwrap();
    let vol = mesh.region_area(Region::Tumor);
    let constant = DeformationField::from_fn(&mesh, |_| [1.0, -0.5]);
    let c = g.apply(&constant).unwrap();
    // from_fn zeroes boundary vertices; the inclusion is away from them
    assert!(c.abs() <= 1e-12 * rho * vol, "{c:e}");
    let identity = DeformationField::from_fn(&mesh, |p| p);
    assert!(rel(g.apply(&identity).unwrap(), rho * 2.0 * vol) < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = smooth_field(&mesh, &mut rng);
    let t = 1e-6;
    let vp = mesh.deform(&theta, t).unwrap().region_area(Region::Tumor);
    let vm = mesh.deform(&theta, -t).unwrap().region_area(Region::Tumor);
    let fd = rho * (vp - vm) / (2.0 * t);
    assert!(rel(g.apply(&theta).unwrap(), fd) <= 1e-3);
}

#[test]
fn balance_rho_is_exact() {
    assert_eq!(balance_rho(0.0, 0.3, 2.0).unwrap(), 0.0);
    assert_eq!(balance_rho(0.5, 0.25, 2.0).unwrap(), 2.0);
    assert!(balance_rho(1.0, 0.0, 2.0).is_err());
    assert!(balance_rho(1.0, 1.0, 1.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut exact = 0;
    for _ in 0..1000 {
        let j = rng.random_range(1e-8..1e-3);
        let vol = rng.random_range(1e-6..1e-4);
        let beta = rng.random_range(1.1..4.0);
        let rho = balance_rho(j, vol, beta).unwrap();
        let res = (beta - 1.0) * j - rho * vol;
        if res == 0.0 {
            exact += 1;
        }
        assert!(res.abs() <= f64::EPSILON * (beta - 1.0) * j, "{res:e}");
    }
    assert!(exact > 900, "{exact}");
}

#[test]
fn exact_inclusion_has_much_smaller_cost() {
    let h = measurement([0.045, 0.02], 0.005);
    let exact = cost(&disc_mesh([0.045, 0.02], 0.005, 0.003), &h);
    let off = cost(&disc_mesh([0.046, 0.01], 0.005, 0.003), &h);
    assert!(off >= 10.0 * exact, "{exact:e} {off:e}");
}

#[test]
fn stationarity_at_exact_inclusion() {
    let c = PhysicalCoefficients::default();
    let h = measurement([0.045, 0.02], 0.005);
    let norm = |mesh: Mesh| {
        let s = Setup {
            mesh,
            h: h.clone(),
            coeffs: c,
        };
        let (g, _, _) = gradient_at(&s);
        riesz_descent_field(&s.mesh, &g, 0.5).unwrap().1.sqrt()
    };
    let at = norm(disc_mesh([0.045, 0.02], 0.005, 0.003));
    let away = norm(disc_mesh([0.045, 0.015], 0.005, 0.003));
    assert!(at <= 0.1 * away, "{at:e} {away:e}");
}
