use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{hausdorff_sets, Point};
use crate::mesh::io::write_mesh;

use super::driver::{IterationRecord, Reconstruction, Termination};
use super::gradient::ObjectiveReport;

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub termination: Termination,
    pub iterations: usize,
    #[serde(rename = "final")]
    pub final_report: ObjectiveReport,
    pub initial: Option<ObjectiveReport>,
    /// Hausdorff distance to the exact inclusion, when it is known.
    pub hausdorff: Option<f64>,
    pub final_interface: Vec<Vec<Point>>,
    pub failure: Option<String>,
    pub snapshots: Vec<String>,
}

impl Summary {
    pub fn new(rec: &Reconstruction, exact: Option<&[Vec<Point>]>) -> Self {
        let final_interface = rec.final_interface();
        let hausdorff = exact.map(|e| hausdorff_sets(&final_interface, e, 1e-5));
        Self {
            termination: rec.termination,
            iterations: rec.history.len(),
            final_report: rec.final_report,
            initial: rec.history.first().map(|r| r.report),
            hausdorff,
            final_interface,
            failure: rec.failure.clone(),
            snapshots: rec.snapshots.iter().map(|(i, _)| snapshot_name(*i)).collect(),
        }
    }
}

fn snapshot_name(iter: usize) -> String {
    format!("mesh_{iter:04}.msh")
}

/// `iter,J,J_LS,vol,rho,t,grad_norm`, floats in shortest round-trip form.
pub fn write_history<W: Write>(history: &[IterationRecord], mut w: W) -> Result<()> {
    writeln!(w, "iter,J,J_LS,vol,rho,t,grad_norm")?;
    for r in history {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.iter, r.report.j, r.report.j_ls, r.report.vol, r.report.rho, r.t, r.grad_norm
        )?;
    }
    Ok(())
}

/// Write `history.csv`, the mesh snapshots and `summary.json` into `dir`.
pub fn write_reconstruction(rec: &Reconstruction, dir: &Path, exact: Option<&[Vec<Point>]>) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    write_history(&rec.history, BufWriter::new(File::create(dir.join("history.csv"))?))?;
    for (iter, mesh) in &rec.snapshots {
        write_mesh(mesh, BufWriter::new(File::create(dir.join(snapshot_name(*iter)))?))?;
    }
    let summary = Summary::new(rec, exact);
    let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    Ok(summary)
}
