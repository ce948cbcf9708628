//! Plain-text mesh format and legacy VTK output.
//!
//! The text format is a header line `nv nc nb ni` followed by `nv` vertex
//! lines `x y`, `nc` cell lines `v0 v1 v2 region`, `nb` boundary edge lines
//! `v0 v1 tag` and `ni` interface edge lines `v0 v1`. Floats are written in
//! shortest round-trip form, so write/read/write is byte-identical.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{BoundaryEdge, BoundaryTag, Mesh, Region};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    w.write_all(mesh_to_string(mesh).as_bytes())?;
    Ok(())
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {} {}",
        mesh.num_vertices(),
        mesh.num_cells(),
        mesh.boundary_edges().len(),
        mesh.interface_edges().len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for (c, r) in mesh.cells().iter().zip(mesh.cell_region()) {
        let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], r.index());
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag as usize);
    }
    for e in mesh.interface_edges() {
        let _ = writeln!(s, "{} {}", e[0], e[1]);
    }
    s
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<Mesh> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l.split_whitespace().map(str::to_owned).collect())),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let (n, h) = next("header")?;
    let counts: Vec<usize> = parse_fields(n, &h, 4)?;
    let (nv, nc, nb, ni) = (counts[0], counts[1], counts[2], counts[3]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, f) = next("vertex")?;
        let xy: Vec<f64> = parse_fields(n, &f, 2)?;
        if !xy.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                line: n,
                message: "non-finite coordinate".into(),
            });
        }
        vertices.push([xy[0], xy[1]]);
    }
    let mut cells = Vec::with_capacity(nc);
    let mut regions = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (n, f) = next("cell")?;
        let c: Vec<usize> = parse_fields(n, &f, 4)?;
        cells.push([c[0], c[1], c[2]]);
        regions.push(Region::from_index(c[3]).ok_or_else(|| Error::Parse {
            line: n,
            message: format!("unknown region {}", c[3]),
        })?);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (n, f) = next("boundary edge")?;
        let e: Vec<usize> = parse_fields(n, &f, 3)?;
        boundary.push(BoundaryEdge {
            vertices: [e[0], e[1]],
            tag: BoundaryTag::from_index(e[2]).ok_or_else(|| Error::Parse {
                line: n,
                message: format!("unknown boundary tag {}", e[2]),
            })?,
        });
    }
    let mut interface = Vec::with_capacity(ni);
    for _ in 0..ni {
        let (n, f) = next("interface edge")?;
        let e: Vec<usize> = parse_fields(n, &f, 2)?;
        interface.push([e[0], e[1]]);
    }
    if let Ok((n, _)) = next("") {
        return Err(Error::Parse {
            line: n,
            message: "trailing content".into(),
        });
    }
    Mesh::from_parts(vertices, cells, regions, boundary, interface)
}

fn parse_fields<T: std::str::FromStr>(line: usize, fields: &[String], want: usize) -> Result<Vec<T>> {
    if fields.len() != want {
        return Err(Error::Parse {
            line,
            message: format!("expected {want} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{f}`"),
            })
        })
        .collect()
}

/// Nodal or cellwise data attached to a VTK file.
pub enum VtkData<'a> {
    PointReal(&'a str, &'a [f64]),
    PointComplex(&'a str, &'a [Complex64]),
    CellReal(&'a str, &'a [f64]),
    PointVector(&'a str, &'a [[f64; 2]]),
}

/// Legacy ASCII VTK unstructured grid with the region as cell data.
pub fn write_vtk<W: Write>(mesh: &Mesh, data: &[VtkData<'_>], mut w: W) -> Result<()> {
    let nv = mesh.num_vertices();
    let nc = mesh.num_cells();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\nthermoshape mesh\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(s, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in mesh.cells() {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {nc}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for r in mesh.cell_region() {
        let _ = writeln!(s, "{}", r.index());
    }
    for d in data {
        if let VtkData::CellReal(name, v) = d {
            check_len(name, v.len(), nc)?;
            scalars(&mut s, name, v.iter().copied());
        }
    }
    let has_point = data.iter().any(|d| !matches!(d, VtkData::CellReal(..)));
    if has_point {
        let _ = writeln!(s, "POINT_DATA {nv}");
    }
    for d in data {
        match d {
            VtkData::PointReal(name, v) => {
                check_len(name, v.len(), nv)?;
                scalars(&mut s, name, v.iter().copied());
            }
            VtkData::PointComplex(name, v) => {
                check_len(name, v.len(), nv)?;
                scalars(&mut s, &format!("{name}_re"), v.iter().map(|z| z.re));
                scalars(&mut s, &format!("{name}_im"), v.iter().map(|z| z.im));
            }
            VtkData::PointVector(name, v) => {
                check_len(name, v.len(), nv)?;
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v.iter() {
                    let _ = writeln!(s, "{:?} {:?} 0", x[0], x[1]);
                }
            }
            VtkData::CellReal(..) => {}
        }
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Mismatch(format!("`{name}` has {got} values, expected {want}")));
    }
    Ok(())
}

fn scalars(s: &mut String, name: &str, values: impl Iterator<Item = f64>) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(s, "{v:?}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_polygon;
    use crate::mesh::build_rect_mesh;

    #[test]
    fn round_trip_is_exact() {
        let m = build_rect_mesh(0.09, 0.03, &[circle_polygon([0.045, 0.015], 0.004, 40, 0.1)], 0.003).unwrap();
        let text = mesh_to_string(&m);
        let back = read_mesh(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(mesh_to_string(&back), text);
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = read_mesh("3 1 3 0\n0 0\n1 0\nfoo 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn vtk_contains_fields() {
        let m = build_rect_mesh(0.09, 0.03, &[circle_polygon([0.045, 0.015], 0.004, 24, 0.0)], 0.005).unwrap();
        let u: Vec<Complex64> = vec![Complex64::new(1.0, 2.0); m.num_vertices()];
        let mut buf = Vec::new();
        write_vtk(&m, &[VtkData::PointComplex("u", &u)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("SCALARS u_re double 1"));
        assert!(s.contains("SCALARS u_im double 1"));
        assert!(s.contains(&format!("CELL_TYPES {}", m.num_cells())));
    }
}
