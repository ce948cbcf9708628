mod common;

use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoshape::fem::norms::{errors_against, l2_norm, l2_norm_complex};
use thermoshape::fem::{
    assemble_ccbm_state, solve_adjoint, solve_ccbm_state, solve_forward_real, solve_real_general, CcbmSolver,
    RealProblem,
};
use thermoshape::geometry::Point;
use thermoshape::linalg::CsrMatrix;
use thermoshape::mesh::{BoundaryEdge, BoundaryTag};
use thermoshape::{BoundaryProfile, Mesh, PhysicalCoefficients, Region};

fn flat_profile(v: f64) -> BoundaryProfile {
    BoundaryProfile::new(vec![(0.0, v), (W, v)]).unwrap()
}

fn quad_form(a: &CsrMatrix<Complex64>, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    // Σ conj(y_i) A_ij x_j
    let ax = a.mul_vec(x);
    ax.iter().zip(y).map(|(p, q)| p * q.conj()).sum()
}

#[test]
fn constant_coefficients_reproduce_constant_solution() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let c = PhysicalCoefficients::uniform(0.5, 2000.0, 2000.0 * 37.0, 10.0, 37.0, 37.0);
    for order in [1, 2] {
        let (u, prof) = solve_forward_real(&mesh, &c, order).unwrap();
        let worst = u.values.iter().map(|v| (v - 37.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "order {order}: {worst}");
        assert!(prof.values().all(|v| (v - 37.0).abs() < 1e-9));
    }
}

#[test]
fn skin_profile_peaks_above_the_tumor() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.002);
    let (_, prof) = solve_forward_real(&mesh, &PhysicalCoefficients::default(), 2).unwrap();
    let (xmax, _) = prof
        .samples()
        .iter()
        .copied()
        .fold((0.0, f64::NEG_INFINITY), |a, s| if s.1 > a.1 { s } else { a });
    assert!((xmax - 0.045).abs() < 0.004, "peak at {xmax}");
}

/// `u* = T_b + sin(πx/W) y²` with uniform coefficients.
struct Manufactured {
    sigma: f64,
    k: f64,
    alpha: f64,
    t_b: f64,
}

impl Manufactured {
    fn exact(&self, x: Point) -> (f64, [f64; 2]) {
        let w = std::f64::consts::PI / W;
        let s = (w * x[0]).sin();
        let c = (w * x[0]).cos();
        (self.t_b + s * x[1] * x[1], [w * c * x[1] * x[1], 2.0 * s * x[1]])
    }
}

impl RealProblem for Manufactured {
    fn sigma(&self, _: Region) -> f64 {
        self.sigma
    }
    fn k(&self, _: Region) -> f64 {
        self.k
    }
    fn source(&self, x: Point, _: Region) -> f64 {
        let w = std::f64::consts::PI / W;
        let s = (w * x[0]).sin();
        let lap = -w * w * s * x[1] * x[1] + 2.0 * s;
        -self.sigma * lap + self.k * self.exact(x).0
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn robin_data(&self, x: Point) -> f64 {
        let (u, g) = self.exact(x);
        self.alpha * u + self.sigma * g[1]
    }
    fn wall_flux(&self, x: Point) -> f64 {
        let (_, g) = self.exact(x);
        let n = if x[0] < W / 2.0 { -1.0 } else { 1.0 };
        -self.sigma * g[0] * n
    }
    fn dirichlet(&self, x: Point) -> f64 {
        self.exact(x).0
    }
}

fn refinement_errors(order: u8) -> Vec<(f64, f64)> {
    let p = Manufactured {
        sigma: 0.5,
        k: 2000.0,
        alpha: 10.0,
        t_b: 37.0,
    };
    let mut mesh = disc_mesh([0.045, 0.015], 0.006, 0.006);
    let mut out = Vec::new();
    for _ in 0..3 {
        let sol = solve_real_general(&mesh, &p, order).unwrap();
        out.push(errors_against(&mesh, &sol, |x| p.exact(x)));
        mesh = mesh.refine_uniform().0;
    }
    out
}

#[test]
fn p1_manufactured_rates() {
    let e = refinement_errors(1);
    for w in e.windows(2) {
        let h1 = w[0].1 / w[1].1;
        let l2 = w[0].0 / w[1].0;
        assert!((h1 - 2.0).abs() <= 0.3, "H1 ratio {h1}");
        assert!(l2 > 3.4, "L2 ratio {l2}");
    }
}

#[test]
fn p2_manufactured_rates() {
    let e = refinement_errors(2);
    for w in e.windows(2) {
        let h1 = w[0].1 / w[1].1;
        assert!(h1 > 3.4, "P2 H1 ratio {h1}");
    }
    let p1 = refinement_errors(1);
    assert!(e[2].1 < p1[2].1 / 10.0);
}

#[test]
fn single_triangle_entries() {
    let mesh = Mesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        vec![Region::Healthy],
        vec![
            BoundaryEdge {
                vertices: [0, 1],
                tag: BoundaryTag::GammaB,
            },
            BoundaryEdge {
                vertices: [1, 2],
                tag: BoundaryTag::GammaU,
            },
            BoundaryEdge {
                vertices: [2, 0],
                tag: BoundaryTag::GammaW,
            },
        ],
        vec![],
    )
    .unwrap();
    let c = PhysicalCoefficients::uniform(1.0, 1.0, 1.0, 1.0, 1.0, 0.0);
    let h = BoundaryProfile::new(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
    let sys = assemble_ccbm_state(&mesh, &c, &h).unwrap();
    assert_eq!(sys.matrix.dim(), 1);
    let l = 2f64.sqrt();
    // stiffness ½·|∇λ₂|² + mass |K|/6 + (α+i)·L/3
    let want = Complex64::new(0.5 + 1.0 / 12.0 + l / 3.0, l / 3.0);
    assert!((sys.matrix.get(0, 0) - want).norm() < 1e-15);
    // Q|K|/3 + α T_a L/2 + i h L/2
    let rhs = Complex64::new(1.0 / 6.0 + l / 2.0, l / 2.0);
    assert!((sys.rhs[0] - rhs).norm() < 1e-15);
}

#[test]
fn homogeneous_data_gives_zero_state() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.004);
    let c = PhysicalCoefficients {
        source: [0.0; 2],
        t_a: 0.0,
        t_b: 0.0,
        ..Default::default()
    };
    let sys = assemble_ccbm_state(&mesh, &c, &flat_profile(0.0)).unwrap();
    assert!(sys.rhs.iter().all(|z| z.norm() == 0.0));
    let u = solve_ccbm_state(&sys).unwrap();
    assert!(u.values.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn coercivity_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mins = Vec::new();
    let mut mesh = disc_mesh([0.045, 0.02], 0.005, 0.004);
    for _ in 0..3 {
        let sys = assemble_ccbm_state(&mesh, &PhysicalCoefficients::default(), &flat_profile(30.0)).unwrap();
        let n = sys.matrix.dim();
        let mut lo = f64::INFINITY;
        for _ in 0..100 {
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let q = quad_form(&sys.matrix, &x, &x).re;
            let nn: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            lo = lo.min(q / nn);
        }
        assert!(lo > 0.0);
        mins.push(lo);
        mesh = mesh.refine_uniform().0;
    }
    let spread = mins.iter().cloned().fold(0.0, f64::max) / mins.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 3.0, "{mins:?}");
}

#[test]
fn dirichlet_trace_is_exact_and_residual_small() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let c = PhysicalCoefficients::default();
    let sys = assemble_ccbm_state(&mesh, &c, &flat_profile(28.0)).unwrap();
    let u = solve_ccbm_state(&sys).unwrap();
    for v in 0..mesh.num_vertices() {
        if mesh.is_dirichlet_vertex(v) {
            assert_eq!(u.values[v], Complex64::new(37.0, 0.0));
        }
    }
    let free: Vec<Complex64> = sys.dof_map.free_vertices().iter().map(|&v| u.values[v]).collect();
    let r: f64 = sys
        .matrix
        .mul_vec(&free)
        .iter()
        .zip(&sys.rhs)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let nb: f64 = sys.rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(r / nb <= 1e-10);
}

#[test]
fn data_scaling_is_linear() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let c = PhysicalCoefficients {
        t_b: 0.0,
        ..Default::default()
    };
    let u1 = solve_ccbm_state(&assemble_ccbm_state(&mesh, &c, &flat_profile(3.0)).unwrap()).unwrap();
    let mut c2 = c;
    c2.source = [2.0 * c.source[0], 2.0 * c.source[1]];
    c2.t_a = 2.0 * c.t_a;
    let u2 = solve_ccbm_state(&assemble_ccbm_state(&mesh, &c2, &flat_profile(6.0)).unwrap()).unwrap();
    let n1 = l2_norm_complex(&mesh, &u1.values);
    let n2 = l2_norm_complex(&mesh, &u2.values);
    assert!(rel(n2, 2.0 * n1) < 1e-10);
}

#[test]
fn negating_skin_data_negates_the_state() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let c = PhysicalCoefficients {
        source: [0.0; 2],
        t_a: 0.0,
        t_b: 0.0,
        ..Default::default()
    };
    let h = BoundaryProfile::new(vec![(0.0, 1.0), (0.05, 2.0), (W, 0.5)]).unwrap();
    let solver = CcbmSolver::assemble(&mesh, &c, &h).unwrap();
    let u = solver.state().unwrap();
    let neg = h.map_values(|_, v| -v);
    let un = solve_ccbm_state(&assemble_ccbm_state(&mesh, &c, &neg).unwrap()).unwrap();
    for (a, b) in u.values.iter().zip(&un.values) {
        assert!((a + b).norm() <= 1e-12 * a.norm().max(1e-300));
    }
    // conj(A) conj(u) = conj(b): the conjugate operator maps conjugated data to the conjugate state
    let b = solver.system().rhs.clone();
    let x = solver
        .solve_conjugate_free(&b.iter().map(|z| z.conj()).collect::<Vec<_>>())
        .unwrap();
    for (xi, &v) in x.iter().zip(solver.system().dof_map.free_vertices()) {
        assert!((xi - u.values[v].conj()).norm() <= 1e-10 * u.values[v].norm().max(1e-12));
    }
}

fn state_and_adjoint(
    mesh: &Mesh,
) -> (
    CcbmSolver,
    thermoshape::ComplexNodalField,
    thermoshape::ComplexNodalField,
) {
    let c = PhysicalCoefficients::default();
    let h = BoundaryProfile::new(vec![(0.0, 26.0), (0.04, 27.5), (W, 26.5)]).unwrap();
    let solver = CcbmSolver::assemble(mesh, &c, &h).unwrap();
    let u = solver.state().unwrap();
    let p = solver.adjoint(mesh, &u).unwrap();
    (solver, u, p)
}

#[test]
fn adjoint_galerkin_residual_vanishes() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let (solver, u, p) = state_and_adjoint(&mesh);
    let dm = &solver.system().dof_map;
    let pf: Vec<Complex64> = dm.free_vertices().iter().map(|&v| p.values[v]).collect();
    let conj_a = solver.system().matrix.map(|z| z.conj());
    let lhs = conj_a.mul_vec(&pf);
    let im = u.im();
    let ones_mass = thermoshape::fem::p1_mass_inner(&mesh, &im, &vec![1.0; mesh.num_vertices()]);
    let scale = ones_mass.abs().max(1e-300);
    for (i, &v) in dm.free_vertices().iter().enumerate() {
        let mut e = vec![0.0; mesh.num_vertices()];
        e[v] = 1.0;
        let f = thermoshape::fem::p1_mass_inner(&mesh, &im, &e);
        assert!((lhs[i] - f).norm() <= 1e-10 * scale, "row {i}");
    }
    assert!(p
        .values
        .iter()
        .enumerate()
        .all(|(v, z)| !mesh.is_dirichlet_vertex(v) || z.norm() == 0.0));
    let p2 = solve_adjoint(&mesh, &PhysicalCoefficients::default(), &u).unwrap();
    for (a, b) in p.values.iter().zip(&p2.values) {
        assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-20));
    }
}

#[test]
fn adjoint_pairing_matches_cost_derivative() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let (solver, u, p) = state_and_adjoint(&mesh);
    let dm = &solver.system().dof_map;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let im = u.im();
    for _ in 0..5 {
        let w: Vec<Complex64> = (0..mesh.num_vertices())
            .map(|v| {
                if mesh.is_dirichlet_vertex(v) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }
            })
            .collect();
        let wf: Vec<Complex64> = dm.free_vertices().iter().map(|&v| w[v]).collect();
        let pf: Vec<Complex64> = dm.free_vertices().iter().map(|&v| p.values[v]).collect();
        // a(w, p) = Σ conj(p_i) A_ij w_j
        let lag = quad_form(&solver.system().matrix, &wf, &pf).im;
        let wi: Vec<f64> = w.iter().map(|z| z.im).collect();
        let direct = thermoshape::fem::p1_mass_inner(&mesh, &im, &wi);
        assert!(rel(lag, direct) < 1e-9, "{lag} vs {direct}");
    }
}

#[test]
fn zero_imaginary_part_gives_zero_adjoint() {
    let mesh = disc_mesh([0.045, 0.02], 0.005, 0.004);
    let c = PhysicalCoefficients::default();
    let solver = CcbmSolver::assemble(&mesh, &c, &flat_profile(25.0)).unwrap();
    let mut u = solver.state().unwrap();
    for z in &mut u.values {
        z.im = 0.0;
    }
    let p = solver.adjoint(&mesh, &u).unwrap();
    assert!(p.values.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn exact_inclusion_data_is_nearly_consistent() {
    let c = PhysicalCoefficients::default();
    let fine = data_mesh([0.045, 0.02], 0.005, 0.001);
    let (_, h) = solve_forward_real(&fine, &c, 2).unwrap();
    let mut mesh = disc_mesh([0.045, 0.02], 0.005, 0.003);
    let mut ratios = Vec::new();
    for _ in 0..2 {
        let u = CcbmSolver::assemble(&mesh, &c, &h).unwrap().state().unwrap();
        ratios.push(l2_norm(&mesh, &u.im()) / l2_norm(&mesh, &u.re()));
        mesh = mesh.refine_uniform().0;
    }
    assert!(ratios[0] <= 0.05, "{ratios:?}");
    assert!(ratios[1] < ratios[0], "{ratios:?}");
}
