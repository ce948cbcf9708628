use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Temperature samples along the skin boundary, ordered by arc position.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    samples: Vec<(f64, f64)>,
}

impl BoundaryProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a boundary profile needs at least two samples"));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(format!(
                    "arc positions must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(Error::invalid("non-finite profile sample"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().map(f64::abs).fold(0.0, f64::max)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Piecewise-linear interpolation, constant beyond the end samples.
    pub fn at(&self, s: f64) -> f64 {
        let n = self.samples.len();
        if s <= self.samples[0].0 {
            return self.samples[0].1;
        }
        if s >= self.samples[n - 1].0 {
            return self.samples[n - 1].1;
        }
        let i = self.samples.partition_point(|p| p.0 <= s);
        let (a, b) = (self.samples[i - 1], self.samples[i]);
        let t = (s - a.0) / (b.0 - a.0);
        a.1 + t * (b.1 - a.1)
    }

    /// Simpson sums over the pieces of `[x0, x1]` on which the profile is linear.
    fn integrate_pieces(&self, x0: f64, x1: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let lo = self.samples.partition_point(|p| p.0 <= x0);
        let hi = self.samples.partition_point(|p| p.0 < x1);
        let inner = self.samples[lo.min(hi)..hi].iter().map(|p| p.0);
        let mut acc = 0.0;
        let mut a = x0;
        for b in inner.chain(std::iter::once(x1)) {
            if b > a {
                let m = 0.5 * (a + b);
                acc += (b - a) / 6.0 * (f(a, self.at(a)) + 4.0 * f(m, self.at(m)) + f(b, self.at(b)));
                a = b;
            }
        }
        acc
    }

    /// `∫ h λ₀` and `∫ h λ₁` over `[x0, x1]`, with `λ₀, λ₁` the linear hats
    /// of the interval; exact for the piecewise-linear profile.
    pub fn edge_moments(&self, x0: f64, x1: f64) -> [f64; 2] {
        let len = x1 - x0;
        [
            self.integrate_pieces(x0, x1, |x, h| h * (x1 - x) / len),
            self.integrate_pieces(x0, x1, |x, h| h * (x - x0) / len),
        ]
    }

    /// `∫ (g − h)²` over `[x0, x1]` for `g` linear from `g0` to `g1`; exact.
    pub fn edge_misfit(&self, x0: f64, x1: f64, g0: f64, g1: f64) -> f64 {
        let len = x1 - x0;
        self.integrate_pieces(x0, x1, |x, h| {
            let g = g0 + (g1 - g0) * (x - x0) / len;
            (g - h) * (g - h)
        })
    }

    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(i, &(s, v))| (s, f(i, v)))
                .collect(),
        }
    }

    /// Trace of a nodal field on the skin, one sample per skin vertex.
    pub fn from_trace(mesh: &Mesh, values: &[f64]) -> Result<Self> {
        let verts = gamma_u_vertices(mesh);
        Self::new(verts.iter().map(|&v| (arc_position(mesh, v), values[v])).collect())
    }

    /// Interpolated values at every vertex; zero away from the skin.
    pub fn on_mesh(&self, mesh: &Mesh) -> Vec<f64> {
        let mut out = vec![0.0; mesh.num_vertices()];
        for v in gamma_u_vertices(mesh) {
            out[v] = self.at(arc_position(mesh, v));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::from("arc_position_m,temperature_C\n");
        for (x, v) in &self.samples {
            s.push_str(&format!("{x:?},{v:?}\n"));
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let mut field = || -> Result<f64> {
                it.next()
                    .and_then(|f| f.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line: i + 1,
                        message: format!("expected two numbers, got `{line}`"),
                    })
            };
            let s = field()?;
            let v = field()?;
            samples.push((s, v));
        }
        Self::new(samples)
    }
}

/// Arc position along the skin edge, measured from its left end.
pub(crate) fn arc_position(mesh: &Mesh, v: usize) -> f64 {
    mesh.vertices()[v][0]
}

/// Skin vertices sorted by arc position.
pub fn gamma_u_vertices(mesh: &Mesh) -> Vec<usize> {
    let mut v: Vec<usize> = mesh
        .boundary_edges()
        .iter()
        .filter(|e| e.tag == BoundaryTag::GammaU)
        .flat_map(|e| e.vertices)
        .collect();
    v.sort_unstable();
    v.dedup();
    v.sort_by(|&a, &b| arc_position(mesh, a).total_cmp(&arc_position(mesh, b)));
    v
}
