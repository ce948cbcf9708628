use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thermoshape::datagen::{builtin, ExperimentSpec};
use thermoshape::shapeopt::RhoMode;

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "run_manifest.json";
pub const THREADS_ENV: &str = "THERMOSHAPE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "thermoshape",
    version,
    about = "Bioheat inclusion identification experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Synthetic skin measurement: profile CSV and temperature field VTK.
    Forward(RunArgs),
    /// Shape reconstruction from the synthetic measurement.
    Reconstruct(RunArgs),
    /// Material-derivative stability over mesh refinement and c_b.
    Sensitivity(RunArgs),
    /// A-posteriori indicators on the initial-guess mesh.
    Estimate(RunArgs),
    /// Reconstructions over an r0 × delta × c_b grid, ranked by final cost.
    Sweep(RunArgs),
    /// Re-execute a run from its manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Built-in experiment name or path to a JSON experiment file.
    #[arg(long, default_value = "test1")]
    pub spec: String,
    /// Initial-guess radius; comma-separated for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub r0: Vec<f64>,
    /// Relative noise level; comma-separated for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Riesz blend in (0, 1]; comma-separated for `sweep` and `sensitivity`.
    #[arg(long, value_delimiter = ',')]
    pub cb: Vec<f64>,
    /// Balancing parameter; selects the balancing rule for ρ.
    #[arg(long, conflicts_with = "rho")]
    pub beta: Option<f64>,
    /// Fixed volume weight.
    #[arg(long)]
    pub rho: Option<f64>,
    /// First-trial step scale.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Forward,
    Reconstruct,
    Sensitivity,
    Estimate,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Reconstruct => "reconstruct",
            Command::Sensitivity => "sensitivity",
            Command::Estimate => "estimate",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub r0: Vec<f64>,
    pub delta: Vec<f64>,
    pub c_b: Vec<f64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.r0.len() * self.delta.len() * self.c_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(r0, delta, c_b)` in row-major order.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &r in &self.r0 {
            for &d in &self.delta {
                for &c in &self.c_b {
                    out.push((r, d, c));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPlan {
    /// Target mesh sizes, coarsest first.
    pub mesh_h: Vec<f64>,
    pub t_list: Vec<f64>,
    pub c_b: Vec<f64>,
    pub delta: Vec<f64>,
    /// Seed of the rough velocity on the coarsest mesh.
    pub rough_seed: u64,
}

/// Every effective parameter of a run; written as `run_manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool_version: String,
    pub command: Command,
    /// Experiment after all overrides.
    pub spec: ExperimentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityPlan>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

fn load_spec(name: &str) -> CliResult<ExperimentSpec> {
    if let Some(s) = builtin(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(CliError::config(format!(
            "`{name}` is neither a built-in experiment nor a file"
        )));
    }
    let text = std::fs::read_to_string(path)?;
    ExperimentSpec::from_json_str(&text).map_err(CliError::from)
}

fn single(name: &str, v: &[f64]) -> CliResult<Option<f64>> {
    match v {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ => Err(CliError::config(format!("--{name} takes one value for this command"))),
    }
}

impl RunConfig {
    /// Apply the flags to the named experiment and validate before any solve.
    pub fn from_args(command: Command, a: &RunArgs) -> CliResult<Self> {
        let mut spec = load_spec(&a.spec)?;
        let grid_cmd = command == Command::Sweep;
        if !grid_cmd {
            if let Some(r) = single("r0", &a.r0)? {
                spec.guess.r0 = r;
            }
            if let Some(d) = single("delta", &a.delta)? {
                spec.delta = d;
            }
        }
        if !grid_cmd && command != Command::Sensitivity {
            if let Some(c) = single("cb", &a.cb)? {
                spec.opt.c_b = c;
            }
        }
        if let Some(b) = a.beta {
            spec.opt.rho_mode = RhoMode::Balancing(b);
        }
        if let Some(r) = a.rho {
            spec.opt.rho_mode = RhoMode::Fixed(r);
        }
        if let Some(s) = a.s {
            spec.opt.s = s;
        }
        if let Some(k) = a.kmax {
            spec.opt.k_max = k;
        }
        if let Some(seed) = a.seed {
            spec.seed = seed;
        }
        spec.opt.noise_seed = spec.seed;

        let sweep = grid_cmd.then(|| SweepGrid {
            r0: if a.r0.is_empty() {
                vec![spec.guess.r0]
            } else {
                a.r0.clone()
            },
            delta: if a.delta.is_empty() {
                vec![spec.delta]
            } else {
                a.delta.clone()
            },
            c_b: if a.cb.is_empty() {
                vec![spec.opt.c_b]
            } else {
                a.cb.clone()
            },
        });
        let sensitivity = (command == Command::Sensitivity).then(|| {
            let mut delta = vec![0.0];
            if spec.delta > 0.0 {
                delta.push(spec.delta);
            }
            SensitivityPlan {
                mesh_h: vec![2.0 * spec.coarse_h, spec.coarse_h, 0.5 * spec.coarse_h],
                t_list: vec![1e-4, 1e-5, 1e-6],
                c_b: if a.cb.is_empty() {
                    vec![1e-5, 0.5, 1.0]
                } else {
                    a.cb.clone()
                },
                delta,
                rough_seed: spec.seed,
            }
        });
        let cfg = Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command,
            spec,
            sweep,
            sensitivity,
            output_dir: a.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.spec.validate()?;
        if let Some(g) = &self.sweep {
            if g.is_empty() {
                return Err(CliError::config("sweep grid is empty"));
            }
            for (r, d, c) in g.points() {
                let mut s = self.spec.clone();
                s.guess.r0 = r;
                s.delta = d;
                s.opt.c_b = c;
                s.validate()?;
            }
        }
        if let Some(p) = &self.sensitivity {
            if p.mesh_h.len() < 2 || p.mesh_h.iter().any(|h| !(*h > 0.0)) {
                return Err(CliError::config("sensitivity needs at least two positive mesh sizes"));
            }
            if p.t_list.iter().any(|t| !(*t > 0.0)) {
                return Err(CliError::config("sensitivity steps must be positive"));
            }
            if p.c_b.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
                return Err(CliError::config("c_b must lie in (0, 1]"));
            }
            if p.delta.iter().any(|d| !(*d >= 0.0)) {
                return Err(CliError::config("noise levels must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn read_manifest(path: &Path, output_dir: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        cfg.output_dir = output_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_manifest(&self) -> CliResult<()> {
        let dir = &self.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(self.output_dir.join(MANIFEST), text)?;
        Ok(())
    }
}

/// Worker count from `THERMOSHAPE_THREADS`, if set.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}
