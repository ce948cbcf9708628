use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{BoundaryEdge, BoundaryTag, Mesh, Region, DEFAULT_CLEARANCE};
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Knobs for the point generator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshOptions {
    /// Minimum distance between the inclusion and the outer boundary (m).
    pub clearance: f64,
    /// Offset of the interior hexagonal lattice, as a fraction of the mesh size.
    /// Different phases give non-nested meshes of the same size.
    pub lattice_phase: [f64; 2],
    /// Split interface edges longer than 1.5 h.
    pub subdivide_interface: bool,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            clearance: DEFAULT_CLEARANCE,
            lattice_phase: [0.381_966_0, 0.236_068_0],
            subdivide_interface: true,
        }
    }
}

/// Triangulate `[0, width] x [0, height]` with the given inclusions as interface loops.
///
/// Bottom edge is tagged Dirichlet, top edge is the measured skin, the
/// lateral edges are adiabatic.
pub fn build_rect_mesh(width: f64, height: f64, inclusions: &[Vec<Point>], target_h: f64) -> Result<Mesh> {
    build_rect_mesh_with(width, height, inclusions, target_h, &MeshOptions::default())
}

pub fn build_rect_mesh_with(
    width: f64,
    height: f64,
    inclusions: &[Vec<Point>],
    target_h: f64,
    opts: &MeshOptions,
) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::invalid(format!(
            "domain {width} x {height} is not a positive rectangle"
        )));
    }
    if !(target_h > 0.0 && target_h < width.min(height)) {
        return Err(Error::invalid(format!("target_h {target_h} out of range")));
    }
    if inclusions.is_empty() {
        return Err(Error::invalid("at least one inclusion is required"));
    }
    let mut loops = Vec::with_capacity(inclusions.len());
    for poly in inclusions {
        geometry::validate_simple_polygon(poly)?;
        let poly = geometry::ccw(poly);
        let d = poly
            .iter()
            .map(|p| p[0].min(width - p[0]).min(p[1]).min(height - p[1]))
            .fold(f64::INFINITY, f64::min);
        if d < opts.clearance {
            return Err(Error::Clearance {
                distance: d,
                required: opts.clearance,
            });
        }
        loops.push(if opts.subdivide_interface {
            subdivide(&poly, 1.5 * target_h)
        } else {
            poly
        });
    }
    check_disjoint(&loops)?;

    let nx = (width / target_h).ceil() as usize;
    let ny = (height / target_h).ceil() as usize;
    let mut points = Vec::with_capacity(2 * (nx + ny));
    let mut tags = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        points.push([width * i as f64 / nx as f64, 0.0]);
        tags.push(BoundaryTag::GammaB);
    }
    for j in 0..ny {
        points.push([width, height * j as f64 / ny as f64]);
        tags.push(BoundaryTag::GammaW);
    }
    for i in 0..nx {
        points.push([width * (nx - i) as f64 / nx as f64, height]);
        tags.push(BoundaryTag::GammaU);
    }
    for j in 0..ny {
        points.push([0.0, height * (ny - j) as f64 / ny as f64]);
        tags.push(BoundaryTag::GammaW);
    }
    let n = points.len();
    let boundary: Vec<BoundaryEdge> = (0..n)
        .map(|i| BoundaryEdge {
            vertices: [i, (i + 1) % n],
            tag: tags[i],
        })
        .collect();
    triangulate(points, boundary, &loops, target_h, opts.lattice_phase)
}

/// Re-triangulate the current geometry, keeping every boundary and interface vertex in place.
///
/// The mesh size is the mean outer boundary edge length.
pub fn remesh(mesh: &Mesh) -> Result<Mesh> {
    remesh_with(mesh, MeshOptions::default().lattice_phase)
}

pub(crate) fn remesh_with(mesh: &Mesh, lattice_phase: [f64; 2]) -> Result<Mesh> {
    let loops = mesh.interface_polygons();
    for l in &loops {
        geometry::validate_simple_polygon(l)?;
    }
    check_disjoint(&loops)?;
    let mut map = vec![usize::MAX; mesh.num_vertices()];
    let mut points = Vec::new();
    for e in mesh.boundary_edges() {
        for &v in &e.vertices {
            if map[v] == usize::MAX {
                map[v] = points.len();
                points.push(mesh.vertices()[v]);
            }
        }
    }
    let boundary: Vec<BoundaryEdge> = mesh
        .boundary_edges()
        .iter()
        .map(|e| BoundaryEdge {
            vertices: [map[e.vertices[0]], map[e.vertices[1]]],
            tag: e.tag,
        })
        .collect();
    let h = mesh
        .boundary_edges()
        .iter()
        .map(|e| geometry::dist(mesh.vertices()[e.vertices[0]], mesh.vertices()[e.vertices[1]]))
        .sum::<f64>()
        / mesh.boundary_edges().len() as f64;
    triangulate(points, boundary, &loops, h, lattice_phase)
}

fn subdivide(poly: &[Point], max_len: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let k = (geometry::dist(p, q) / max_len).ceil().max(1.0) as usize;
        for s in 0..k {
            let t = s as f64 / k as f64;
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn check_disjoint(loops: &[Vec<Point>]) -> Result<()> {
    for a in 0..loops.len() {
        for b in (a + 1)..loops.len() {
            let (la, lb) = (&loops[a], &loops[b]);
            if geometry::point_in_polygon(la[0], lb) || geometry::point_in_polygon(lb[0], la) {
                return Err(Error::invalid(format!("inclusions {a} and {b} are nested")));
            }
            for i in 0..la.len() {
                for j in 0..lb.len() {
                    if geometry::segments_intersect(la[i], la[(i + 1) % la.len()], lb[j], lb[(j + 1) % lb.len()]) {
                        return Err(Error::invalid(format!("inclusions {a} and {b} intersect")));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Constrained Delaunay triangulation of boundary points, interface loops and a hex lattice.
///
/// Vertex order in the result: boundary points, then loops, then grading and lattice points.
fn triangulate(
    boundary_points: Vec<Point>,
    boundary: Vec<BoundaryEdge>,
    loops: &[Vec<Point>],
    h: f64,
    phase: [f64; 2],
) -> Result<Mesh> {
    let mut points = boundary_points;
    let (lo, hi) = bounds(&points);
    let mut interface_edges = Vec::new();
    for l in loops {
        let base = points.len();
        points.extend_from_slice(l);
        for i in 0..l.len() {
            interface_edges.push([base + i, base + (i + 1) % l.len()]);
        }
    }

    let graded = grading_points(loops, h, lo, hi);
    points.extend_from_slice(&graded);

    let dy = h * 3f64.sqrt() / 2.0;
    let keep = 0.55 * h;
    let mut j = 0usize;
    loop {
        let y = lo[1] + (phase[1] + j as f64) * dy;
        if y > hi[1] {
            break;
        }
        let shift = if j % 2 == 1 { 0.5 } else { 0.0 };
        let mut i = 0usize;
        loop {
            let x = lo[0] + (phase[0] + shift + i as f64) * h;
            if x > hi[0] {
                break;
            }
            let p = [x, y];
            let wall = (x - lo[0]).min(hi[0] - x).min(y - lo[1]).min(hi[1] - y);
            if wall >= keep
                && loops.iter().all(|l| geometry::point_polygon_distance(p, l) >= keep)
                && graded.iter().all(|&g| geometry::dist(p, g) >= keep)
            {
                points.push(p);
            }
            i += 1;
        }
        j += 1;
    }

    let constraints: Vec<[usize; 2]> = boundary
        .iter()
        .map(|e| e.vertices)
        .chain(interface_edges.iter().copied())
        .collect();
    let spade_points: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(spade_points, constraints)
            .map_err(|e| Error::InvalidMesh(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::InvalidMesh("duplicate points in triangulation input".into()));
    }

    let mut cells = Vec::with_capacity(cdt.num_inner_faces());
    let mut regions = Vec::with_capacity(cdt.num_inner_faces());
    for f in cdt.inner_faces() {
        let v = f.vertices().map(|v| v.fix().index());
        let mut c = [v[0], v[1], v[2]];
        if geometry::orient(points[c[0]], points[c[1]], points[c[2]]) < 0.0 {
            c.swap(1, 2);
        }
        let g = [
            (points[c[0]][0] + points[c[1]][0] + points[c[2]][0]) / 3.0,
            (points[c[0]][1] + points[c[1]][1] + points[c[2]][1]) / 3.0,
        ];
        let region = if loops.iter().any(|l| geometry::point_in_polygon(g, l)) {
            Region::Tumor
        } else {
            Region::Healthy
        };
        cells.push(c);
        regions.push(region);
    }
    Mesh::from_parts(points, cells, regions, boundary, interface_edges)
}

/// Offset rings around interface loops whose vertex spacing is finer than `h`.
///
/// Ring spacing grows geometrically away from the loop until it reaches `h`,
/// so the lattice never meets the interface with a sudden size jump.
fn grading_points(loops: &[Vec<Point>], h: f64, lo: Point, hi: Point) -> Vec<Point> {
    const GROWTH: f64 = 1.5;
    let mut out: Vec<(Point, f64)> = Vec::new();
    for l in loops {
        let n = l.len();
        let s0 = geometry::perimeter(l) / n as f64;
        let normals: Vec<Point> = (0..n)
            .map(|i| {
                let a = l[(i + n - 1) % n];
                let b = l[(i + 1) % n];
                let t = geometry::sub(b, a);
                let len = t[0].hypot(t[1]);
                [t[1] / len, -t[0] / len]
            })
            .collect();
        for side in [1.0, -1.0] {
            let mut spacing = s0 * GROWTH;
            let mut d = 0.866 * s0;
            while spacing < 0.9 * h {
                let ring: Vec<Point> = (0..n)
                    .map(|i| [l[i][0] + side * d * normals[i][0], l[i][1] + side * d * normals[i][1]])
                    .collect();
                for q in resample(&ring, spacing) {
                    let wall = (q[0] - lo[0]).min(hi[0] - q[0]).min(q[1] - lo[1]).min(hi[1] - q[1]);
                    if wall < 0.5 * spacing
                        || loops.iter().any(|m| geometry::point_polygon_distance(q, m) < 0.7 * d)
                        || out.iter().any(|&(p, sp)| geometry::dist(p, q) < 0.6 * spacing.max(sp))
                    {
                        continue;
                    }
                    out.push((q, spacing));
                }
                d += 0.866 * spacing;
                spacing *= GROWTH;
            }
        }
    }
    out.into_iter().map(|(p, _)| p).collect()
}

/// Points spaced evenly (at most `spacing`) along a closed polyline.
fn resample(poly: &[Point], spacing: f64) -> Vec<Point> {
    let n = poly.len();
    let total = geometry::perimeter(poly);
    let m = ((total / spacing).round() as usize).max(3);
    let step = total / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..m {
        let s = k as f64 * step;
        loop {
            let len = geometry::dist(poly[seg], poly[(seg + 1) % n]);
            if s <= seg_start + len || seg == n - 1 {
                let t = if len > 0.0 {
                    ((s - seg_start) / len).min(1.0)
                } else {
                    0.0
                };
                let (a, b) = (poly[seg], poly[(seg + 1) % n]);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                break;
            }
            seg_start += len;
            seg += 1;
        }
    }
    out
}

fn bounds(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}
