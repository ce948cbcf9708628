use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::BoundaryProfile;
use crate::geometry::{circle_polygon, Point};

const DEGREE: usize = 11;
const GRID: usize = 4001;

/// Circle placed under the peak of a fitted skin profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialGuess {
    pub center: Point,
    pub radius: f64,
    pub polygon: Vec<Point>,
    /// Arc position and value of the fitted maximum.
    pub peak: (f64, f64),
    /// Set when the profile had no usable peak and the midpoint was used.
    pub flat: bool,
}

/// Degree-11 least-squares fit of the profile, centered at the arg-max.
///
/// The fit uses a Chebyshev basis on the profile span mapped to `[-1, 1]`.
/// Ties in the arg-max go to the smallest arc position. The circle center
/// lies `depth` below `top`, and the polygon has `n` vertices.
pub fn init_guess_from_profile(h: &BoundaryProfile, depth: f64, r0: f64, top: f64, n: usize) -> Result<InitialGuess> {
    if h.len() < DEGREE + 1 {
        return Err(Error::invalid(format!(
            "profile has {} samples, the fit needs at least {}",
            h.len(),
            DEGREE + 1
        )));
    }
    if !(r0 > 0.0 && depth > 0.0) {
        return Err(Error::invalid("radius and depth must be positive"));
    }
    let (a, b) = h.span();
    let xs: Vec<f64> = h.positions().collect();
    let ys: Vec<f64> = h.values().collect();
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &y| (l.min(y), u.max(y)));
    let scale = ys.iter().fold(1.0_f64, |m, y| m.max(y.abs()));
    let midpoint = 0.5 * (a + b);
    let (peak, flat) = if hi - lo <= 1e-12 * scale {
        warn!("flat skin profile, placing the initial guess at the midpoint");
        ((midpoint, hi), true)
    } else {
        let coef = fit(&xs, &ys, a, b)?;
        let mut best = (a, f64::NEG_INFINITY);
        for i in 0..GRID {
            let x = a + (b - a) * i as f64 / (GRID - 1) as f64;
            let v = chebyshev_eval(&coef, to_unit(x, a, b));
            if v > best.1 {
                best = (x, v);
            }
        }
        (best, false)
    };
    let center = [peak.0, top - depth];
    Ok(InitialGuess {
        center,
        radius: r0,
        polygon: circle_polygon(center, r0, n, 0.0),
        peak,
        flat,
    })
}

fn to_unit(x: f64, a: f64, b: f64) -> f64 {
    (2.0 * x - a - b) / (b - a)
}

fn fit(xs: &[f64], ys: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    let mut design = DMatrix::zeros(xs.len(), DEGREE + 1);
    for (i, &x) in xs.iter().enumerate() {
        let z = to_unit(x, a, b);
        let (mut t0, mut t1) = (1.0, z);
        design[(i, 0)] = t0;
        design[(i, 1)] = t1;
        for j in 2..=DEGREE {
            let t2 = 2.0 * z * t1 - t0;
            design[(i, j)] = t2;
            t0 = t1;
            t1 = t2;
        }
    }
    let rhs = DVector::from_column_slice(ys);
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::invalid(format!("polynomial fit failed: {e}")))?;
    Ok(coef.iter().copied().collect())
}

/// Clenshaw evaluation of `Σ c_j T_j(z)`.
fn chebyshev_eval(c: &[f64], z: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &cj in c.iter().skip(1).rev() {
        let b0 = 2.0 * z * b1 - b2 + cj;
        b2 = b1;
        b1 = b0;
    }
    c[0] + z * b1 - b2
}
