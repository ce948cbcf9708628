#![allow(dead_code)]

use thermoshape::geometry::circle_polygon;
use thermoshape::mesh::{build_rect_mesh, build_rect_mesh_with, MeshOptions};
use thermoshape::Mesh;

pub const W: f64 = 0.09;
pub const H: f64 = 0.03;

pub fn disc_mesh(center: [f64; 2], r: f64, h: f64) -> Mesh {
    build_rect_mesh(W, H, &[circle_polygon(center, r, 64, 0.0)], h).unwrap()
}

/// Finer, differently phased mesh for synthetic data.
pub fn data_mesh(center: [f64; 2], r: f64, h: f64) -> Mesh {
    let opts = MeshOptions {
        lattice_phase: [0.7, 0.55],
        ..MeshOptions::default()
    };
    build_rect_mesh_with(W, H, &[circle_polygon(center, r, 128, 0.013)], h, &opts).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
