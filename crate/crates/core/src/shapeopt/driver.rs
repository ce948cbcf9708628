use log::{debug, info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{BoundaryProfile, CcbmSolver, ComplexNodalField, PhysicalCoefficients};
use crate::mesh::{remesh, DeformationField, Mesh};

use super::gradient::{balance_rho, objective, shape_gradient, volume_gradient, ObjectiveReport};
use super::riesz::riesz_descent_field;
use super::{OptConfig, RhoMode};

/// One accepted (or final, rejected) iteration of the descent loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Functionals on the mesh at the start of the iteration, with the `ρ` used.
    pub report: ObjectiveReport,
    /// Accepted step; `0` when the line search was exhausted.
    pub t: f64,
    /// First trial step `s·J/√b(θ,θ)`.
    pub t0: f64,
    /// `√b(θ,θ)` of the descent field.
    pub grad_norm: f64,
    pub j_pen_old: f64,
    /// Penalized objective after the step; equal to `j_pen_old` if rejected.
    pub j_pen_new: f64,
    pub trials: usize,
    pub remeshed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stagnation,
    TMin,
    #[serde(rename = "K_max")]
    KMax,
    /// A numerical error stopped the loop; the last mesh in the trace is valid.
    Failed,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Stagnation => "stagnation",
            Termination::TMin => "t_min",
            Termination::KMax => "K_max",
            Termination::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub history: Vec<IterationRecord>,
    /// `(iteration, mesh)` pairs: the initial mesh, every remesh and the final mesh.
    pub snapshots: Vec<(usize, Mesh)>,
    pub final_mesh: Mesh,
    /// Functionals on `final_mesh`, with the last `ρ` in use.
    pub final_report: ObjectiveReport,
    pub termination: Termination,
    pub failure: Option<String>,
}

impl Reconstruction {
    /// Final inclusion boundaries.
    pub fn final_interface(&self) -> Vec<Vec<crate::Point>> {
        self.final_mesh.interface_polygons()
    }
}

/// Mesh together with its factored state operator and state.
struct Iterate {
    mesh: Mesh,
    solver: CcbmSolver,
    u: ComplexNodalField,
}

impl Iterate {
    fn new(mesh: Mesh, coeffs: &PhysicalCoefficients, h: &BoundaryProfile) -> Result<Self> {
        let solver = CcbmSolver::assemble(&mesh, coeffs, h)?;
        let u = solver.state()?;
        Ok(Self { mesh, solver, u })
    }
}

pub enum LineSearchOutcome {
    Accepted {
        t: f64,
        mesh: Box<Mesh>,
        report: ObjectiveReport,
        trials: usize,
    },
    /// The step fell below `t_min` without an admissible decrease.
    Exhausted { trials: usize },
}

/// Backtracking along `θ` from `t₀ = s·J/√b(θ,θ)`.
///
/// A trial is rejected when a cell inverts, when the inclusion comes closer
/// than `cfg.clearance` to `∂Ω`, or when `J + ρ·vol` does not decrease.
pub fn line_search(
    mesh: &Mesh,
    coeffs: &PhysicalCoefficients,
    h: &BoundaryProfile,
    theta: &DeformationField,
    b_energy: f64,
    current: &ObjectiveReport,
    cfg: &OptConfig,
) -> Result<(f64, LineSearchOutcome)> {
    let t0 = initial_step(current.j, b_energy, cfg.s);
    if !(t0 > 0.0 && t0.is_finite()) {
        return Ok((t0, LineSearchOutcome::Exhausted { trials: 0 }));
    }
    let old = current.penalized();
    let mut t = t0;
    let mut trials = 0;
    while t >= cfg.t_min {
        trials += 1;
        match mesh.deform(theta, t) {
            Ok(trial) if trial.interface_clearance() >= cfg.clearance => {
                let solver = CcbmSolver::assemble(&trial, coeffs, h)?;
                let u = solver.state()?;
                let report = objective(&trial, &u, h, current.rho)?;
                debug!("trial t={t:.3e} J_pen={:.6e} (old {old:.6e})", report.penalized());
                if report.penalized() < old {
                    return Ok((
                        t0,
                        LineSearchOutcome::Accepted {
                            t,
                            mesh: Box::new(trial),
                            report,
                            trials,
                        },
                    ));
                }
            }
            Ok(_) => debug!("trial t={t:.3e} violates clearance"),
            Err(Error::Inversion { cell, .. }) => debug!("trial t={t:.3e} inverts cell {cell}"),
            Err(e) => return Err(e),
        }
        t *= 0.5;
    }
    Ok((t0, LineSearchOutcome::Exhausted { trials }))
}

/// `s·J/√b`.
pub(crate) fn initial_step(j: f64, b_energy: f64, s: f64) -> f64 {
    if b_energy > 0.0 {
        s * j / b_energy.sqrt()
    } else {
        0.0
    }
}

/// Reconstruct the inclusion from a skin profile, starting from the inclusion in `mesh0`.
///
/// Only invalid configuration or an unusable initial mesh produce `Err`;
/// later numerical failures end the loop with [`Termination::Failed`] and keep
/// the last good iterate.
pub fn reconstruct(
    mesh0: &Mesh,
    coeffs: &PhysicalCoefficients,
    h: &BoundaryProfile,
    cfg: &OptConfig,
) -> Result<Reconstruction> {
    cfg.validate()?;
    coeffs.validate()?;
    if mesh0.interface_loops().is_empty() {
        return Err(Error::invalid("initial mesh has no inclusion"));
    }
    let clearance = mesh0.interface_clearance();
    if clearance < cfg.clearance {
        return Err(Error::Clearance {
            distance: clearance,
            required: cfg.clearance,
        });
    }
    let mut it = Iterate::new(mesh0.clone(), coeffs, h)?;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut snapshots = vec![(0, mesh0.clone())];
    let mut combined = Vec::new();
    let mut since_remesh = 0;
    let mut rho = initial_rho(cfg);
    let mut failure = None;
    let mut termination = Termination::KMax;

    for iter in 0..cfg.k_max {
        let step = (|| -> Result<(IterationRecord, Option<Mesh>)> {
            let mut report = objective(&it.mesh, &it.u, h, 0.0)?;
            rho = match cfg.rho_mode {
                RhoMode::Fixed(r) => r,
                RhoMode::Balancing(beta) => balance_rho(report.j, report.vol, beta)?,
            };
            report.rho = rho;
            let p = it.solver.adjoint(&it.mesh, &it.u)?;
            let mut g = shape_gradient(&it.mesh, coeffs, &it.u, &p)?;
            if rho > 0.0 {
                g.add_scaled(&volume_gradient(&it.mesh, rho)?, 1.0)?;
            }
            let (theta, b) = riesz_descent_field(&it.mesh, &g, cfg.c_b)?;
            let (t0, outcome) = line_search(&it.mesh, coeffs, h, &theta, b, &report, cfg)?;
            let mut rec = IterationRecord {
                iter,
                report,
                t: 0.0,
                t0,
                grad_norm: b.max(0.0).sqrt(),
                j_pen_old: report.penalized(),
                j_pen_new: report.penalized(),
                trials: 0,
                remeshed: false,
            };
            match outcome {
                LineSearchOutcome::Accepted {
                    t,
                    mesh,
                    report: new,
                    trials,
                } => {
                    rec.t = t;
                    rec.j_pen_new = new.penalized();
                    rec.trials = trials;
                    Ok((rec, Some(*mesh)))
                }
                LineSearchOutcome::Exhausted { trials } => {
                    rec.trials = trials;
                    Ok((rec, None))
                }
            }
        })();

        let (mut rec, next) = match step {
            Ok(v) => v,
            Err(e) => {
                warn!("iteration {iter} failed: {e}");
                failure = Some(e.to_string());
                termination = Termination::Failed;
                break;
            }
        };
        combined.push(rec.report.combined);
        info!(
            "iter {iter}: J={:.6e} J_LS={:.6e} vol={:.6e} rho={:.3e} t={:.3e} |theta|_b={:.3e}",
            rec.report.j, rec.report.j_ls, rec.report.vol, rec.report.rho, rec.t, rec.grad_norm
        );
        let Some(mut mesh) = next else {
            history.push(rec);
            termination = Termination::TMin;
            break;
        };
        since_remesh += 1;
        let periodic = cfg.remesh_every > 0 && since_remesh >= cfg.remesh_every;
        if periodic || mesh.stats().min_quality < cfg.remesh_quality {
            match remesh(&mesh) {
                Ok(m) => {
                    mesh = m;
                    rec.remeshed = true;
                    since_remesh = 0;
                    snapshots.push((iter + 1, mesh.clone()));
                }
                Err(e) => warn!("remesh after iteration {iter} failed, keeping the deformed mesh: {e}"),
            }
        }
        history.push(rec);
        match Iterate::new(mesh, coeffs, h) {
            Ok(next) => it = next,
            Err(e) => {
                warn!("state solve after iteration {iter} failed: {e}");
                failure = Some(e.to_string());
                termination = Termination::Failed;
                break;
            }
        }
        if stagnated(&combined, cfg.stagnation_window, cfg.stagnation_tol) {
            termination = Termination::Stagnation;
            break;
        }
    }

    let final_report = objective(&it.mesh, &it.u, h, rho)?;
    if snapshots.last().map(|(_, m)| m != &it.mesh).unwrap_or(true) {
        snapshots.push((history.len(), it.mesh.clone()));
    }
    Ok(Reconstruction {
        history,
        snapshots,
        final_mesh: it.mesh,
        final_report,
        termination,
        failure,
    })
}

fn initial_rho(cfg: &OptConfig) -> f64 {
    match cfg.rho_mode {
        RhoMode::Fixed(r) => r,
        RhoMode::Balancing(_) => 0.0,
    }
}

/// Relative decrease of the last value against the one `window` entries back.
fn stagnated(values: &[f64], window: usize, tol: f64) -> bool {
    let n = values.len();
    if n <= window {
        return false;
    }
    let (old, new) = (values[n - 1 - window], values[n - 1]);
    (old - new) / old.abs().max(f64::MIN_POSITIVE) < tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stagnation_needs_a_full_window() {
        assert!(!stagnated(&[1.0, 1.0, 1.0], 5, 1e-6));
        assert!(stagnated(&[1.0; 6], 5, 1e-6));
        assert!(!stagnated(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5], 5, 1e-6));
    }

    #[test]
    fn initial_step_formula() {
        assert_eq!(initial_step(2.0, 16.0, 0.5), 0.25);
        assert_eq!(initial_step(1.0, 0.0, 0.5), 0.0);
    }
}
