use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thermoshape::datagen::{measure, ExperimentSpec, Measurement};
use thermoshape::estimators::{estimate, mark_cells, write_indicators_csv, IndicatorSummary};
use thermoshape::fem::{solve_forward_real, CcbmSolver};
use thermoshape::geometry::centroid;
use thermoshape::mesh::build_rect_mesh;
use thermoshape::mesh::io::{write_vtk, VtkData};
use thermoshape::sensitivity::{cb_effect_sweep, stability_sweep, write_sensitivity_csv, MeshVelocity};
use thermoshape::shapeopt::{reconstruct, write_reconstruction, Summary, Termination};
use thermoshape::{BoundaryProfile, Mesh};

use crate::config::{thread_cap, Command, RunConfig};
use crate::error::{CliError, CliResult};

/// What a command reports on stdout.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: &'static str,
    pub output_dir: PathBuf,
    pub message: String,
}

pub fn execute(cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    cfg.write_manifest()?;
    let dir = &cfg.output_dir;
    let message = match cfg.command {
        Command::Forward => forward(&cfg.spec, dir)?,
        Command::Reconstruct => reconstruct_one(&cfg.spec, dir)?.1,
        Command::Sensitivity => sensitivity(cfg, dir)?,
        Command::Estimate => estimate_cmd(&cfg.spec, dir)?,
        Command::Sweep => sweep(cfg, dir)?,
    };
    Ok(Outcome {
        command: cfg.command.as_str(),
        output_dir: dir.clone(),
        message,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_profile(h: &BoundaryProfile, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    h.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn forward(spec: &ExperimentSpec, dir: &Path) -> CliResult<String> {
    let fine = spec.fine_mesh()?;
    let (field, _) = solve_forward_real(&fine, &spec.coeffs, spec.forward_order)?;
    let m = measure(spec)?;
    write_profile(&m.noisy, &dir.join("profile.csv"))?;
    write_profile(&m.clean, &dir.join("profile_clean.csv"))?;
    let mut w = create(&dir.join("field.vtk"))?;
    write_vtk(&fine, &[VtkData::PointReal("temperature", &field.values)], &mut w)?;
    w.flush()?;
    Ok(format!(
        "{} skin samples, noise std {:.3e}, {} fine cells",
        m.noisy.len(),
        m.noise_std,
        fine.num_cells()
    ))
}

/// Measurement, initial guess and reconstruction for one experiment.
pub fn reconstruct_one(spec: &ExperimentSpec, dir: &Path) -> CliResult<(Summary, String)> {
    let m = measure(spec)?;
    reconstruct_from(spec, &m, dir)
}

fn reconstruct_from(spec: &ExperimentSpec, m: &Measurement, dir: &Path) -> CliResult<(Summary, String)> {
    std::fs::create_dir_all(dir)?;
    write_profile(&m.noisy, &dir.join("profile.csv"))?;
    let guess = spec.initial_guess(&m.noisy)?;
    let mesh0 = spec.guess_mesh(&guess)?;
    let rec = reconstruct(&mesh0, &spec.coeffs, &m.noisy, &spec.opt)?;
    let exact = spec.exact_polygons();
    let summary = write_reconstruction(&rec, dir, Some(&exact))?;
    write_state_vtk(&rec.final_mesh, spec, &m.noisy, &dir.join("final_state.vtk"))?;
    if rec.termination == Termination::Failed {
        return Err(CliError::numerical(
            rec.failure.unwrap_or_else(|| "reconstruction failed".into()),
        ));
    }
    let msg = format!(
        "termination {} after {} iterations, J = {:.4e}, hausdorff {:.4e}",
        summary.termination.as_str(),
        summary.iterations,
        summary.final_report.j,
        summary.hausdorff.unwrap_or(f64::NAN)
    );
    Ok((summary, msg))
}

fn write_state_vtk(mesh: &Mesh, spec: &ExperimentSpec, h: &BoundaryProfile, path: &Path) -> CliResult<()> {
    let u = CcbmSolver::assemble(mesh, &spec.coeffs, h)?.state()?;
    let mut w = create(path)?;
    write_vtk(mesh, &[VtkData::PointComplex("u", &u.values)], &mut w)?;
    w.flush()?;
    Ok(())
}

/// Bump velocity centred on the first inclusion and vanishing well inside the domain.
fn smooth_velocity(spec: &ExperimentSpec) -> impl Fn(&Mesh) -> MeshVelocity {
    let poly = &spec.exact_polygons()[0];
    let c = centroid(poly);
    let [w, h] = spec.domain;
    let wall = c[0].min(w - c[0]).min(c[1]).min(h - c[1]);
    let radius = 0.9 * wall;
    move |mesh: &Mesh| MeshVelocity::bump(mesh, c, radius, [0.8, 0.6])
}

fn sensitivity(cfg: &RunConfig, dir: &Path) -> CliResult<String> {
    let spec = &cfg.spec;
    let plan = cfg
        .sensitivity
        .as_ref()
        .ok_or_else(|| CliError::config("missing sensitivity plan"))?;
    let exact = spec.exact_polygons();
    let meshes = plan
        .mesh_h
        .iter()
        .map(|&h| build_rect_mesh(spec.domain[0], spec.domain[1], &exact, h))
        .collect::<Result<Vec<_>, _>>()?;
    let m = measure(spec)?;
    let reports = stability_sweep(
        &meshes,
        &spec.coeffs,
        &m.noisy,
        smooth_velocity(spec),
        plan.rough_seed,
        &plan.t_list,
    )?;
    let mut w = create(&dir.join("sensitivity.csv"))?;
    write_sensitivity_csv(&reports, &mut w)?;
    w.flush()?;

    let mut profiles = Vec::new();
    for &d in &plan.delta {
        let mut s = spec.clone();
        s.delta = d;
        profiles.push((d, measure(&s)?.noisy));
    }
    let guess = spec.initial_guess(&m.noisy)?;
    let guess_meshes = plan
        .mesh_h
        .iter()
        .map(|&h| build_rect_mesh(spec.domain[0], spec.domain[1], std::slice::from_ref(&guess.polygon), h))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = cb_effect_sweep(&guess_meshes, &spec.coeffs, &plan.c_b, &profiles)?;
    let mut w = create(&dir.join("cb_sweep.csv"))?;
    writeln!(w, "mesh_level,c_b,delta,theta_grad_norm,material_grad_norm")?;
    for r in &rows {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?}",
            r.level, r.c_b, r.delta, r.theta_grad_norm, r.material_grad_norm
        )?;
    }
    w.flush()?;

    let norms = |kind: &str| -> Vec<String> {
        reports
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| format!("{:.4e}", r.grad_norm))
            .collect()
    };
    Ok(format!(
        "smooth |grad u'| [{}], rough |grad u'| [{}]",
        norms("smooth").join(", "),
        norms("rough").join(", ")
    ))
}

#[derive(Serialize)]
struct EstimateReport {
    #[serde(flatten)]
    summary: IndicatorSummary,
    /// Dörfler fraction used for `marked`.
    marking_fraction: f64,
    marked: Vec<usize>,
}

const MARKING_FRACTION: f64 = 0.5;

fn estimate_cmd(spec: &ExperimentSpec, dir: &Path) -> CliResult<String> {
    let m = measure(spec)?;
    let guess = spec.initial_guess(&m.noisy)?;
    let mesh = spec.guess_mesh(&guess)?;
    let set = estimate(&mesh, &spec.coeffs, &m.noisy)?;
    let mut w = create(&dir.join("indicators.csv"))?;
    write_indicators_csv(&mesh, &set, &mut w)?;
    w.flush()?;
    let marked = mark_cells(&set.xi, MARKING_FRACTION)?;
    let report = EstimateReport {
        summary: IndicatorSummary::new(&mesh, &set),
        marking_fraction: MARKING_FRACTION,
        marked,
    };
    write_json(&report, &dir.join("indicators.json"))?;
    Ok(format!(
        "eta {:.4e}, mu {:.4e}, xi {:.4e}, {} of {} cells marked",
        set.eta_global,
        set.mu_global,
        set.xi_global,
        report.marked.len(),
        mesh.num_cells()
    ))
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rank: usize,
    pub r0: f64,
    pub delta: f64,
    pub c_b: f64,
    pub final_j: f64,
    pub final_penalized: f64,
    pub hausdorff: f64,
    pub iterations: usize,
    pub termination: &'static str,
    pub dir: String,
}

fn point_dir(r0: f64, delta: f64, c_b: f64) -> String {
    format!("r0_{r0}_delta_{delta}_cb_{c_b}")
}

/// Run every grid point, each in its own subdirectory, and rank by final `J`.
pub fn sweep_rows(cfg: &RunConfig, dir: &Path) -> CliResult<Vec<SweepRow>> {
    let grid = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("missing sweep grid"))?;
    let mut deltas = grid.delta.clone();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let measurements = deltas
        .iter()
        .map(|&d| {
            let mut s = cfg.spec.clone();
            s.delta = d;
            measure(&s).map(|m| (d, m))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let job = |&(r0, delta, c_b): &(f64, f64, f64)| -> CliResult<SweepRow> {
        let mut spec = cfg.spec.clone();
        spec.guess.r0 = r0;
        spec.delta = delta;
        spec.opt.c_b = c_b;
        let m = &measurements.iter().find(|(d, _)| *d == delta).expect("measured").1;
        let sub = point_dir(r0, delta, c_b);
        let (summary, _) = reconstruct_from(&spec, m, &dir.join(&sub))?;
        Ok(SweepRow {
            rank: 0,
            r0,
            delta,
            c_b,
            final_j: summary.final_report.j,
            final_penalized: summary.final_report.penalized(),
            hausdorff: summary.hausdorff.unwrap_or(f64::NAN),
            iterations: summary.iterations,
            termination: summary.termination.as_str(),
            dir: sub,
        })
    };
    let points = grid.points();
    let results: Vec<CliResult<SweepRow>> = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(e.to_string()))?
            .install(|| points.par_iter().map(job).collect()),
        None => points.par_iter().map(job).collect(),
    };
    let mut rows = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    rows.sort_by(|a, b| a.final_j.total_cmp(&b.final_j));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{:>4} {:>8} {:>6} {:>8} {:>12} {:>12} {:>11} {:>5} {:>11}\n",
        "rank", "r0", "delta", "c_b", "J", "J+rho*vol", "hausdorff", "iter", "termination"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>4} {:>8} {:>6} {:>8} {:>12.4e} {:>12.4e} {:>11.4e} {:>5} {:>11}\n",
            r.rank, r.r0, r.delta, r.c_b, r.final_j, r.final_penalized, r.hausdorff, r.iterations, r.termination
        ));
    }
    s
}

fn sweep(cfg: &RunConfig, dir: &Path) -> CliResult<String> {
    let rows = sweep_rows(cfg, dir)?;
    let mut w = create(&dir.join("sweep.csv"))?;
    writeln!(
        w,
        "rank,r0,delta,c_b,final_J,final_penalized,hausdorff,iterations,termination,dir"
    )?;
    for r in &rows {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{}",
            r.rank, r.r0, r.delta, r.c_b, r.final_j, r.final_penalized, r.hausdorff, r.iterations, r.termination, r.dir
        )?;
    }
    w.flush()?;
    Ok(sweep_table(&rows))
}
