//! Residual a-posteriori indicators for the complex state, its adjoint and the objective.
//!
//! Cell residuals are exact for P1 fields with piecewise-constant data, so
//! `div(σ∇u_h)` drops out and only the reaction term remains. Edge residuals
//! split interior flux jumps evenly between the two neighbours.

use std::collections::HashMap;
use std::io::Write;

use log::warn;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::quadrature::gauss2;
use crate::fem::{cell_gradient, BoundaryProfile, CcbmSolver, ComplexNodalField, PhysicalCoefficients};
use crate::geometry::{dist, Point};
use crate::mesh::{key, BoundaryTag, ElementGeometry, Mesh, Region};

/// Per-cell indicators with their root-sum-square totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSet {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub xi: Vec<f64>,
    /// `None` when every `μ_K` vanishes; `ξ` then equals `η`.
    pub kappa: Option<f64>,
    pub eta_global: f64,
    pub mu_global: f64,
    pub xi_global: f64,
}

pub fn root_sum_squares(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Which residual to form.
#[derive(Clone, Copy)]
enum Kind<'a> {
    State(&'a BoundaryProfile),
    /// Source is the imaginary part of the state.
    Adjoint(&'a ComplexNodalField),
}

struct Context<'a> {
    mesh: &'a Mesh,
    coeffs: &'a PhysicalCoefficients,
    geo: Vec<ElementGeometry>,
    /// `σ_K ∇w_K` per cell.
    flux: Vec<[Complex64; 2]>,
    w: &'a ComplexNodalField,
    tags: HashMap<[usize; 2], BoundaryTag>,
    kind: Kind<'a>,
}

impl<'a> Context<'a> {
    fn new(mesh: &'a Mesh, coeffs: &'a PhysicalCoefficients, w: &'a ComplexNodalField, kind: Kind<'a>) -> Result<Self> {
        w.check(mesh)?;
        if let Kind::Adjoint(u) = kind {
            u.check(mesh)?;
        }
        let geo = mesh.geometries();
        let flux = geo
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let c = mesh.cells()[k];
                let s = coeffs.sigma(mesh.cell_region()[k]);
                let gr = cell_gradient(&g.grad_lambda, [w.values[c[0]], w.values[c[1]], w.values[c[2]]]);
                [gr[0] * s, gr[1] * s]
            })
            .collect();
        let tags = mesh.boundary_edges().iter().map(|e| (key(e.vertices), e.tag)).collect();
        Ok(Self {
            mesh,
            coeffs,
            geo,
            flux,
            w,
            tags,
            kind,
        })
    }

    /// Cell residual at a vertex of cell `k`: `Q − k u` or `uⁱ − k p`.
    fn cell_residual(&self, k: usize, v: usize) -> Complex64 {
        let r = self.mesh.cell_region()[k];
        let src = match self.kind {
            Kind::State(_) => Complex64::new(self.coeffs.q(r), 0.0),
            Kind::Adjoint(u) => Complex64::new(u.values[v].im, 0.0),
        };
        src - self.w.values[v] * self.coeffs.k(r)
    }

    /// `h_K² ∫_K |R_K|²`, exact for the linear residual.
    fn cell_term(&self, k: usize) -> f64 {
        let c = self.mesh.cells()[k];
        let r = [0, 1, 2].map(|i| self.cell_residual(k, c[i]));
        let g = &self.geo[k];
        // edge-midpoint rule, exact for quadratics
        let s: f64 = (0..3).map(|i| (0.5 * (r[i] + r[(i + 1) % 3])).norm_sqr()).sum();
        g.h_k * g.h_k * g.area / 3.0 * s
    }

    /// Unit normal of edge `e` pointing out of cell `k`.
    fn outward_normal(&self, k: usize, e: [usize; 2]) -> [f64; 2] {
        let p = self.mesh.vertices();
        let (a, b) = (p[e[0]], p[e[1]]);
        let len = dist(a, b);
        let mut n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        let opp = self.mesh.cells()[k]
            .into_iter()
            .find(|v| !e.contains(v))
            .expect("triangle");
        let o = p[opp];
        if (o[0] - a[0]) * n[0] + (o[1] - a[1]) * n[1] > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    fn normal_flux(&self, k: usize, n: [f64; 2]) -> Complex64 {
        self.flux[k][0] * n[0] + self.flux[k][1] * n[1]
    }

    /// Jump `σ_k ∂ₙw_k − σ_j ∂ₙw_j` across an interior edge, normal out of `k`.
    fn jump_from(&self, k: usize, j: usize, e: [usize; 2]) -> Complex64 {
        let n = self.outward_normal(k, e);
        self.normal_flux(k, n) - self.normal_flux(j, n)
    }

    /// Robin residual on the skin as a linear function of position: values at the
    /// two endpoints, excluding the measured-profile term.
    fn skin_linear(&self, k: usize, e: [usize; 2]) -> [Complex64; 2] {
        let an = self.normal_flux(k, self.outward_normal(k, e));
        let alpha = self.coeffs.alpha;
        e.map(|v| {
            let w = self.w.values[v];
            match self.kind {
                // −σ∂ₙu − α(u − T_a) − i u; the `+ i h` part is handled separately
                Kind::State(_) => -an - (w - self.coeffs.t_a) * alpha - Complex64::i() * w,
                // −σ∂ₙp − αp + i p
                Kind::Adjoint(_) => -an - w * alpha + Complex64::i() * w,
            }
        })
    }

    /// `h_γ ∫_γ |J_γ|²` for every cell touching edge `e`.
    fn edge_terms(&self, e: [usize; 2], cells: [Option<usize>; 2]) -> Result<Vec<(usize, f64)>> {
        let len = dist(self.mesh.vertices()[e[0]], self.mesh.vertices()[e[1]]);
        match (cells, self.tags.get(&key(e))) {
            ([Some(a), Some(b)], None) => {
                let j = 0.5 * self.jump_from(a, b, e);
                let t = len * len * j.norm_sqr();
                Ok(vec![(a, t), (b, t)])
            }
            ([Some(k), None], Some(tag)) | ([None, Some(k)], Some(tag)) => {
                let t = match tag {
                    BoundaryTag::GammaB => 0.0,
                    BoundaryTag::GammaW => len * len * self.normal_flux(k, self.outward_normal(k, e)).norm_sqr(),
                    BoundaryTag::GammaU => len * self.skin_integral(k, e, len),
                };
                Ok(vec![(k, t)])
            }
            _ => Err(Error::InvalidMesh(format!(
                "edge {e:?} has inconsistent neighbours or boundary tag"
            ))),
        }
    }

    /// `∫_γ |J_γ|²` on a skin edge.
    fn skin_integral(&self, k: usize, e: [usize; 2], len: f64) -> f64 {
        let l = self.skin_linear(k, e);
        let gauss = |f: &dyn Fn(Complex64) -> f64| -> f64 {
            gauss2()
                .iter()
                .map(|&(s, wt)| wt * len * f(l[0] * (1.0 - s) + l[1] * s))
                .sum()
        };
        match self.kind {
            Kind::Adjoint(_) => gauss(&|z| z.norm_sqr()),
            Kind::State(h) => {
                // imaginary part is `h − g` with `g` linear; integrate it exactly against the profile
                let re = gauss(&|z| z.re * z.re);
                let p = self.mesh.vertices();
                let (xa, xb) = (p[e[0]][0], p[e[1]][0]);
                let wgt = len / (xb - xa).abs();
                let (ga, gb) = (-l[0].im, -l[1].im);
                let im = if xa < xb {
                    h.edge_misfit(xa, xb, ga, gb)
                } else {
                    h.edge_misfit(xb, xa, gb, ga)
                };
                re + wgt * im
            }
        }
    }

    fn indicators(&self) -> Result<Vec<f64>> {
        let mut sq: Vec<f64> = (0..self.mesh.num_cells()).map(|k| self.cell_term(k)).collect();
        for edge in self.mesh.edges() {
            for (k, t) in self.edge_terms(edge.vertices, edge.cells)? {
                sq[k] += t;
            }
        }
        Ok(sq.into_iter().map(f64::sqrt).collect())
    }

    /// `Σ_K ∫_K R φ_i + Σ_γ ∫_γ J φ_i` with full interior jumps; equals the
    /// discrete residual `l(φ_i) − a(w_h, φ_i)`.
    fn residual_functional(&self) -> Result<Vec<Complex64>> {
        let nv = self.mesh.num_vertices();
        let mut r = vec![Complex64::new(0.0, 0.0); nv];
        for (k, g) in self.geo.iter().enumerate() {
            let c = self.mesh.cells()[k];
            let res = [0, 1, 2].map(|i| self.cell_residual(k, c[i]));
            let sum: Complex64 = res.iter().sum();
            for i in 0..3 {
                r[c[i]] += (res[i] + sum) * (g.area / 12.0);
            }
        }
        for edge in self.mesh.edges() {
            let e = edge.vertices;
            let len = dist(self.mesh.vertices()[e[0]], self.mesh.vertices()[e[1]]);
            let tag = self.tags.get(&key(e));
            let k = edge.cells[0].or(edge.cells[1]).expect("edge without cells");
            let l = match (edge.cells, tag) {
                ([Some(a), Some(b)], None) => {
                    let j = -self.jump_from(a, b, e);
                    [j, j]
                }
                (_, Some(BoundaryTag::GammaB)) => continue,
                (_, Some(BoundaryTag::GammaW)) => {
                    let j = -self.normal_flux(k, self.outward_normal(k, e));
                    [j, j]
                }
                (_, Some(BoundaryTag::GammaU)) => self.skin_linear(k, e),
                _ => return Err(Error::InvalidMesh(format!("edge {e:?} has inconsistent neighbours"))),
            };
            r[e[0]] += (l[0] * 2.0 + l[1]) * (len / 6.0);
            r[e[1]] += (l[0] + l[1] * 2.0) * (len / 6.0);
            if let (Kind::State(h), Some(BoundaryTag::GammaU)) = (self.kind, tag) {
                let (xa, xb) = (self.mesh.vertices()[e[0]][0], self.mesh.vertices()[e[1]][0]);
                let wgt = len / (xb - xa).abs();
                let (lo, hi) = if xa < xb { (e[0], e[1]) } else { (e[1], e[0]) };
                let m = h.edge_moments(xa.min(xb), xa.max(xb));
                r[lo].im += wgt * m[0];
                r[hi].im += wgt * m[1];
            }
        }
        Ok(r)
    }
}

/// `η_K` for a state `u_h` computed with skin data `h`.
pub fn state_indicators(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    u: &ComplexNodalField,
    h: &BoundaryProfile,
) -> Result<Vec<f64>> {
    Context::new(mesh, coeffs, u, Kind::State(h))?.indicators()
}

/// `μ_K` for an adjoint `p_h` driven by the state `u_h`.
pub fn adjoint_indicators(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    p: &ComplexNodalField,
    u: &ComplexNodalField,
) -> Result<Vec<f64>> {
    Context::new(mesh, coeffs, p, Kind::Adjoint(u))?.indicators()
}

/// Residual functional of the state tested against every P1 hat function.
pub fn state_residual_functional(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    u: &ComplexNodalField,
    h: &BoundaryProfile,
) -> Result<Vec<Complex64>> {
    Context::new(mesh, coeffs, u, Kind::State(h))?.residual_functional()
}

pub fn adjoint_residual_functional(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    p: &ComplexNodalField,
    u: &ComplexNodalField,
) -> Result<Vec<Complex64>> {
    Context::new(mesh, coeffs, p, Kind::Adjoint(u))?.residual_functional()
}

/// Interface jump on edge `e` seen from cell `from` towards `to`, before the modulus.
pub fn interface_jump(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    w: &ComplexNodalField,
    from: usize,
    to: usize,
    e: [usize; 2],
) -> Result<Complex64> {
    let ctx = Context::new(mesh, coeffs, w, Kind::Adjoint(w))?;
    // the normal is fixed by the first cell of the edge so both sides share it
    let edge = mesh
        .edges()
        .into_iter()
        .find(|x| x.vertices == key(e))
        .ok_or_else(|| Error::invalid(format!("no edge {e:?}")))?;
    let first = edge.cells[0].ok_or_else(|| Error::InvalidMesh(format!("edge {e:?} lacks a cell")))?;
    if !edge.cells.contains(&Some(from)) || !edge.cells.contains(&Some(to)) || from == to {
        return Err(Error::invalid(format!("cells {from} and {to} do not share edge {e:?}")));
    }
    let n = ctx.outward_normal(first, key(e));
    Ok(ctx.normal_flux(from, n) - ctx.normal_flux(to, n))
}

/// `ξ_K = (κ/2 η_K² + μ_K²/(2κ))^{1/2}` with `κ = max η / max μ`.
pub fn objective_indicators(eta: &[f64], mu: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
    if eta.len() != mu.len() {
        return Err(Error::Mismatch(format!(
            "{} state and {} adjoint indicators",
            eta.len(),
            mu.len()
        )));
    }
    let max_eta = eta.iter().copied().fold(0.0, f64::max);
    let max_mu = mu.iter().copied().fold(0.0, f64::max);
    if max_mu <= 0.0 {
        warn!("adjoint indicators vanish; marking on the state indicator alone");
        return Ok((eta.to_vec(), None));
    }
    let kappa = max_eta / max_mu;
    if kappa == 0.0 {
        warn!("state indicators vanish; marking on the adjoint indicator alone");
        return Ok((mu.to_vec(), None));
    }
    let xi = eta
        .iter()
        .zip(mu)
        .map(|(e, m)| (0.5 * kappa * e * e + 0.5 / kappa * m * m).sqrt())
        .collect();
    Ok((xi, Some(kappa)))
}

/// State, adjoint and objective indicators on one mesh.
pub fn estimate(mesh: &Mesh, coeffs: &PhysicalCoefficients, h: &BoundaryProfile) -> Result<IndicatorSet> {
    let solver = CcbmSolver::assemble(mesh, coeffs, h)?;
    let u = solver.state()?;
    let p = solver.adjoint(mesh, &u)?;
    indicator_set(mesh, coeffs, &u, &p, h)
}

pub fn indicator_set(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    u: &ComplexNodalField,
    p: &ComplexNodalField,
    h: &BoundaryProfile,
) -> Result<IndicatorSet> {
    let eta = state_indicators(mesh, coeffs, u, h)?;
    let mu = adjoint_indicators(mesh, coeffs, p, u)?;
    let (xi, kappa) = objective_indicators(&eta, &mu)?;
    Ok(IndicatorSet {
        eta_global: root_sum_squares(&eta),
        mu_global: root_sum_squares(&mu),
        xi_global: root_sum_squares(&xi),
        eta,
        mu,
        xi,
        kappa,
    })
}

/// Dörfler marking: the smallest set of cells whose `ξ_K²` reach `fraction` of
/// the total, largest first with ties broken by index. Returned in index order.
pub fn mark_cells(xi: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "marking fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if xi.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid("indicators must be finite and non-negative"));
    }
    let mut order: Vec<usize> = (0..xi.len()).collect();
    order.sort_by(|&a, &b| xi[b].total_cmp(&xi[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&k| xi[k] * xi[k]).sum();
    let target = fraction * total;
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for k in order {
        if acc >= target || xi[k] == 0.0 {
            break;
        }
        acc += xi[k] * xi[k];
        marked.push(k);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Cells with at least one vertex on the inclusion boundary.
pub fn touches_interface(mesh: &Mesh) -> Vec<bool> {
    mesh.cells()
        .iter()
        .map(|c| c.iter().any(|&v| mesh.is_interface_vertex(v)))
        .collect()
}

pub fn write_indicators_csv<W: Write>(mesh: &Mesh, set: &IndicatorSet, mut w: W) -> Result<()> {
    writeln!(w, "cell_id,region,eta,mu,xi,touches_interface")?;
    let touch = touches_interface(mesh);
    for k in 0..mesh.num_cells() {
        let region = match mesh.cell_region()[k] {
            Region::Tumor => "tumor",
            Region::Healthy => "healthy",
        };
        writeln!(
            w,
            "{k},{region},{:?},{:?},{:?},{}",
            set.eta[k], set.mu[k], set.xi[k], touch[k]
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSummary {
    pub cells: usize,
    pub eta_global: f64,
    pub mu_global: f64,
    pub xi_global: f64,
    pub kappa: Option<f64>,
    pub h_max: f64,
    /// Fraction of the top decile of `η_K` cells that touch the interface.
    pub top_decile_interface_fraction: f64,
}

impl IndicatorSummary {
    pub fn new(mesh: &Mesh, set: &IndicatorSet) -> Self {
        Self {
            cells: mesh.num_cells(),
            eta_global: set.eta_global,
            mu_global: set.mu_global,
            xi_global: set.xi_global,
            kappa: set.kappa,
            h_max: mesh.stats().h_max,
            top_decile_interface_fraction: top_decile_interface_fraction(mesh, &set.eta),
        }
    }
}

pub fn top_decile_interface_fraction(mesh: &Mesh, eta: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let n = eta.len().div_ceil(10).max(1);
    let touch = touches_interface(mesh);
    order[..n].iter().filter(|&&k| touch[k]).count() as f64 / n as f64
}

/// Local `H¹(K)` error of `u_h` against a reference evaluated at points.
///
/// `reference(x)` returns the value and gradient; integrated with a
/// degree-4 rule on each cell.
pub fn local_h1_errors(
    mesh: &Mesh,
    u: &[Complex64],
    reference: impl Fn(Point, usize) -> (Complex64, [Complex64; 2]),
) -> Vec<f64> {
    use crate::fem::quadrature::TRI_DEG4;
    mesh.geometries()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let c = mesh.cells()[k];
            let p = mesh.cell_points(k);
            let uv = [u[c[0]], u[c[1]], u[c[2]]];
            let gu = cell_gradient(&g.grad_lambda, uv);
            let mut s = 0.0;
            for &(lam, wt) in TRI_DEG4.iter() {
                let x = [
                    lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                    lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
                ];
                let uh = uv[0] * lam[0] + uv[1] * lam[1] + uv[2] * lam[2];
                let (r, gr) = reference(x, k);
                s += wt * ((r - uh).norm_sqr() + (gr[0] - gu[0]).norm_sqr() + (gr[1] - gu[1]).norm_sqr());
            }
            (s * g.area).sqrt()
        })
        .collect()
}
