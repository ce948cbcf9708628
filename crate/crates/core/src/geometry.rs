//! Planar polygon utilities.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Twice the signed area of triangle (a, b, c); positive when counter-clockwise.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>() * 0.5
}

pub fn perimeter(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| dist(poly[i], poly[(i + 1) % n])).sum()
}

pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let a = signed_area(poly);
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let c = cross(p, q);
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

pub fn point_polygon_distance(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub(crate) fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0 && c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Check that a closed polygon is simple and non-degenerate.
pub fn validate_simple_polygon(poly: &[Point]) -> Result<()> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::DegeneratePolygon(format!("{n} vertices")));
    }
    let scale = poly
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    if signed_area(poly).abs() <= 1e-12 * scale * scale {
        return Err(Error::DegeneratePolygon("zero area".into()));
    }
    for i in 0..n {
        if dist(poly[i], poly[(i + 1) % n]) <= 1e-14 * scale {
            return Err(Error::DegeneratePolygon(format!("repeated vertex {i}")));
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            // adjacent segments share an endpoint
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(Error::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

/// Counter-clockwise copy of a polygon.
pub fn ccw(poly: &[Point]) -> Vec<Point> {
    let mut out = poly.to_vec();
    if signed_area(&out) < 0.0 {
        out.reverse();
    }
    out
}

/// Regular `n`-gon approximating a circle; the first vertex sits at angle `phase`.
pub fn circle_polygon(center: Point, radius: f64, n: usize, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let a = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

/// Symmetric Hausdorff distance between two closed polylines.
///
/// Edges are sampled so that the result is exact up to `resolution`.
pub fn hausdorff(a: &[Point], b: &[Point], resolution: f64) -> f64 {
    hausdorff_sets(&[a.to_vec()], &[b.to_vec()], resolution)
}

/// Symmetric Hausdorff distance between two unions of closed polylines.
pub fn hausdorff_sets(a: &[Vec<Point>], b: &[Vec<Point>], resolution: f64) -> f64 {
    directed_sets(a, b, resolution).max(directed_sets(b, a, resolution))
}

fn directed_sets(from: &[Vec<Point>], to: &[Vec<Point>], resolution: f64) -> f64 {
    let mut worst = 0.0f64;
    for poly in from {
        let n = poly.len();
        for i in 0..n {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            let steps = ((dist(p, q) / resolution).ceil() as usize).max(1);
            for s in 0..steps {
                let t = s as f64 / steps as f64;
                let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                let d = to
                    .iter()
                    .map(|l| point_polygon_distance(x, l))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
            }
        }
    }
    worst
}
