//! Synthetic skin measurements and the built-in experiments.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{solve_forward_real, BoundaryProfile, PhysicalCoefficients};
use crate::geometry::{circle_polygon, Point};
use crate::mesh::{build_rect_mesh, build_rect_mesh_with, Mesh, MeshOptions};
use crate::shapeopt::{init_guess_from_profile, InitialGuess, OptConfig, RhoMode};

/// Vertices used to discretize exact parametric inclusions.
pub const EXACT_RESOLUTION: usize = 128;
/// Vertices of the initial-guess circle.
pub const GUESS_RESOLUTION: usize = 64;

const FINE_PHASE: [f64; 2] = [0.7, 0.55];
const FINE_ANGLE: f64 = 0.013;

/// Inclusion geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Shape {
    Circle {
        center: Point,
        radius: f64,
    },
    /// `r(φ) = r0 (1 + a cos(m φ))` around `center`.
    Polar {
        center: Point,
        r0: f64,
        a: f64,
        m: u32,
        #[serde(default)]
        rotation: f64,
    },
    Polygon {
        vertices: Vec<Point>,
    },
}

impl Shape {
    /// Counter-clockwise polygon; the angular offset keeps fine data meshes
    /// from sharing vertices with reconstruction meshes.
    pub fn polygon(&self, n: usize, angle: f64) -> Vec<Point> {
        match self {
            Shape::Circle { center, radius } => circle_polygon(*center, *radius, n, angle),
            Shape::Polar {
                center,
                r0,
                a,
                m,
                rotation,
            } => (0..n)
                .map(|i| {
                    let phi = angle + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let r = r0 * (1.0 + a * (*m as f64 * (phi - rotation)).cos());
                    [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
                })
                .collect(),
            Shape::Polygon { vertices } => crate::geometry::ccw(vertices),
        }
    }
}

/// Initial inclusion for a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuessSpec {
    pub r0: f64,
    /// Depth of the center below the skin.
    pub depth: f64,
    /// Horizontal center; `None` takes the peak of the fitted profile.
    pub center_x: Option<f64>,
}

impl Default for GuessSpec {
    fn default() -> Self {
        Self {
            r0: 0.005,
            depth: 0.02,
            center_x: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    /// `[width, height]` of the tissue rectangle (m).
    pub domain: [f64; 2],
    pub exact_inclusions: Vec<Shape>,
    #[serde(default)]
    pub coeffs: PhysicalCoefficients,
    /// Relative noise level.
    pub delta: f64,
    pub seed: u64,
    pub fine_h: f64,
    pub coarse_h: f64,
    #[serde(default = "default_order")]
    pub forward_order: u8,
    #[serde(default)]
    pub guess: GuessSpec,
    #[serde(default)]
    pub opt: OptConfig,
}

fn default_order() -> u8 {
    2
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.domain[0] > 0.0 && self.domain[1] > 0.0) {
            return Err(Error::invalid("domain dimensions must be positive"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        if !(self.fine_h > 0.0 && self.fine_h < self.coarse_h) {
            return Err(Error::invalid(format!(
                "fine_h ({}) must be positive and below coarse_h ({})",
                self.fine_h, self.coarse_h
            )));
        }
        if !matches!(self.forward_order, 1 | 2) {
            return Err(Error::invalid(format!(
                "forward order must be 1 or 2, got {}",
                self.forward_order
            )));
        }
        if self.exact_inclusions.is_empty() {
            return Err(Error::invalid("at least one exact inclusion is required"));
        }
        if !(self.guess.r0 > 0.0 && self.guess.depth > 0.0) {
            return Err(Error::invalid("guess radius and depth must be positive"));
        }
        self.coeffs.validate()?;
        self.opt.validate()
    }

    pub fn exact_polygons(&self) -> Vec<Vec<Point>> {
        self.exact_inclusions
            .iter()
            .map(|s| s.polygon(EXACT_RESOLUTION, 0.0))
            .collect()
    }

    /// Fine data mesh with a lattice and boundary sampling offset from the coarse meshes.
    pub fn fine_mesh(&self) -> Result<Mesh> {
        let loops: Vec<Vec<Point>> = self
            .exact_inclusions
            .iter()
            .map(|s| s.polygon(EXACT_RESOLUTION, FINE_ANGLE))
            .collect();
        let opts = MeshOptions {
            lattice_phase: FINE_PHASE,
            ..MeshOptions::default()
        };
        build_rect_mesh_with(self.domain[0], self.domain[1], &loops, self.fine_h, &opts)
    }

    /// Coarse mesh containing the exact inclusions.
    pub fn exact_mesh(&self) -> Result<Mesh> {
        build_rect_mesh(self.domain[0], self.domain[1], &self.exact_polygons(), self.coarse_h)
    }

    /// Circle from `guess`, centered under the profile peak unless `center_x` is set.
    pub fn initial_guess(&self, h: &BoundaryProfile) -> Result<InitialGuess> {
        let top = self.domain[1];
        let mut g = init_guess_from_profile(h, self.guess.depth, self.guess.r0, top, GUESS_RESOLUTION)?;
        if let Some(x) = self.guess.center_x {
            g.center[0] = x;
            g.polygon = circle_polygon(g.center, g.radius, GUESS_RESOLUTION, 0.0);
        }
        Ok(g)
    }

    pub fn guess_mesh(&self, guess: &InitialGuess) -> Result<Mesh> {
        build_rect_mesh(
            self.domain[0],
            self.domain[1],
            std::slice::from_ref(&guess.polygon),
            self.coarse_h,
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Noiseless trace, the standard-normal draws and the noisy profile.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub clean: BoundaryProfile,
    /// One draw per sample, in arc-position order.
    pub z: Vec<f64>,
    pub noisy: BoundaryProfile,
    /// `δ ‖h‖_∞`.
    pub noise_std: f64,
}

pub fn generate_measurement(spec: &ExperimentSpec) -> Result<BoundaryProfile> {
    Ok(measure(spec)?.noisy)
}

/// Forward solve on the fine mesh followed by seeded Gaussian noise of
/// standard deviation `δ ‖h‖_∞` on every skin vertex.
pub fn measure(spec: &ExperimentSpec) -> Result<Measurement> {
    spec.validate()?;
    let fine = spec.fine_mesh()?;
    let (_, clean) = solve_forward_real(&fine, &spec.coeffs, spec.forward_order)?;
    Ok(add_noise(clean, spec.delta, spec.seed))
}

pub fn add_noise(clean: BoundaryProfile, delta: f64, seed: u64) -> Measurement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..clean.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise_std = delta * clean.sup_norm();
    let noisy = clean.map_values(|i, v| v + noise_std * z[i]);
    Measurement {
        clean,
        z,
        noisy,
        noise_std,
    }
}

fn circle_spec(name: &str, center: Point, radius: f64) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        domain: [0.09, 0.03],
        exact_inclusions: vec![Shape::Circle { center, radius }],
        coeffs: PhysicalCoefficients::default(),
        delta: 0.01,
        seed: 20240601,
        fine_h: 0.001,
        coarse_h: 0.002,
        forward_order: 2,
        guess: GuessSpec::default(),
        opt: OptConfig::default(),
    }
}

/// Named experiments: two circles at different depths, four star-shaped
/// targets and a two-inclusion case.
pub fn builtin_experiments() -> Vec<ExperimentSpec> {
    let mut out = vec![circle_spec("test1_shallow_circle", [0.045, 0.020], 0.005)];

    let mut t2 = circle_spec("test2_deep_small_circle", [0.045, 0.015], 0.003);
    t2.guess.r0 = 0.003;
    t2.guess.center_x = Some(0.046);
    t2.opt.rho_mode = RhoMode::Balancing(2.0);
    out.push(t2);

    let shapes = [
        ("a", 0.15, 2, 0.0),
        ("b", 0.4, 2, 0.0),
        ("c", 0.2, 3, 0.5),
        ("d", 0.12, 4, 0.3),
    ];
    for (tag, a, m, rotation) in shapes {
        let mut s = circle_spec(&format!("test3_nonconvex_{tag}"), [0.045, 0.015], 0.005);
        s.exact_inclusions = vec![Shape::Polar {
            center: [0.045, 0.015],
            r0: 0.005,
            a,
            m,
            rotation,
        }];
        s.guess = GuessSpec {
            r0: 0.003,
            depth: 0.015,
            center_x: None,
        };
        s.opt.c_b = 1.0;
        out.push(s);
    }

    let mut multi = circle_spec("multi2_circles", [0.03, 0.018], 0.004);
    multi.exact_inclusions.push(Shape::Circle {
        center: [0.06, 0.016],
        radius: 0.004,
    });
    out.push(multi);
    out
}

pub fn builtin(name: &str) -> Option<ExperimentSpec> {
    let short = match name {
        "test1" => "test1_shallow_circle",
        "test2" => "test2_deep_small_circle",
        other => other,
    };
    builtin_experiments().into_iter().find(|s| s.name == short)
}
