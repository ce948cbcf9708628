use thermoshape::datagen::{add_noise, builtin, builtin_experiments, generate_measurement, measure, ExperimentSpec};
use thermoshape::BoundaryProfile;

fn csv(h: &BoundaryProfile) -> Vec<u8> {
    let mut out = Vec::new();
    h.write_csv(&mut out).unwrap();
    out
}

#[test]
fn zero_noise_returns_the_clean_trace() {
    let mut spec = builtin("test1").unwrap();
    spec.delta = 0.0;
    let m = measure(&spec).unwrap();
    assert_eq!(m.noisy, m.clean);
    assert_eq!(generate_measurement(&spec).unwrap(), m.clean);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let spec = builtin("test1").unwrap();
    let a = csv(&generate_measurement(&spec).unwrap());
    let b = csv(&generate_measurement(&spec).unwrap());
    assert_eq!(a, b);
    let mut other = spec.clone();
    other.seed += 1;
    assert_ne!(csv(&generate_measurement(&other).unwrap()), a);
}

#[test]
fn noise_std_matches_the_level() {
    let n = 10_000;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            (x, 30.0 + 3.0 * (std::f64::consts::PI * x).sin())
        })
        .collect();
    let clean = BoundaryProfile::new(samples).unwrap();
    let m = add_noise(clean.clone(), 0.01, 20240601);
    let diff: Vec<f64> = m.noisy.values().zip(clean.values()).map(|(a, b)| a - b).collect();
    let mean = diff.iter().sum::<f64>() / n as f64;
    let var = diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let target = 0.01 * clean.sup_norm();
    assert!(
        (var.sqrt() - target).abs() <= 0.05 * target,
        "{} vs {target}",
        var.sqrt()
    );
    assert_eq!(m.noise_std, target);
}

#[test]
fn noise_is_linear_in_the_draw() {
    let spec = builtin("test1").unwrap();
    let mut quiet = spec.clone();
    quiet.delta = 0.0;
    let clean = measure(&quiet).unwrap().clean;
    let m = measure(&spec).unwrap();
    let scale = spec.delta * clean.sup_norm();
    for ((c, z), v) in clean.values().zip(&m.z).zip(m.noisy.values()) {
        assert!((c + scale * z - v).abs() <= 1e-13 * v.abs());
    }
}

#[test]
fn data_and_reconstruction_meshes_do_not_nest() {
    for spec in [builtin("test1").unwrap(), builtin("test2").unwrap()] {
        let fine = spec.fine_mesh().unwrap();
        let h = measure(&spec).unwrap().noisy;
        let coarse = [
            spec.exact_mesh().unwrap(),
            spec.guess_mesh(&spec.initial_guess(&h).unwrap()).unwrap(),
        ];
        let interior: Vec<usize> = (0..fine.num_vertices())
            .filter(|&v| !fine.is_boundary_vertex(v))
            .collect();
        let stride = (interior.len() / 100).max(1);
        let sampled: Vec<_> = interior
            .iter()
            .step_by(stride)
            .take(100)
            .map(|&v| fine.vertices()[v])
            .collect();
        assert_eq!(sampled.len(), 100);
        for mesh in &coarse {
            for p in &sampled {
                let nearest = mesh
                    .vertices()
                    .iter()
                    .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest > 1e-9, "shared vertex {p:?} in {}", spec.name);
            }
        }
    }
}

#[test]
fn builtin_set_is_complete_and_valid() {
    let names: Vec<String> = builtin_experiments().into_iter().map(|s| s.name).collect();
    for want in [
        "test1_shallow_circle",
        "test2_deep_small_circle",
        "test3_nonconvex_a",
        "test3_nonconvex_b",
        "test3_nonconvex_c",
        "test3_nonconvex_d",
        "multi2_circles",
    ] {
        assert!(names.iter().any(|n| n == want), "{want}");
    }
    for s in builtin_experiments() {
        s.validate().unwrap();
        assert!(s.fine_h < s.coarse_h);
    }
}

#[test]
fn spec_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    let spec = builtin("test3_nonconvex_c").unwrap();
    std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    assert_eq!(ExperimentSpec::read(&path).unwrap(), spec);
    std::fs::write(&path, r#"{"name":"x"}"#).unwrap();
    assert!(ExperimentSpec::read(&path).is_err());
}

#[test]
fn profile_csv_round_trips() {
    let h = generate_measurement(&builtin("test2").unwrap()).unwrap();
    let back = BoundaryProfile::read_csv(std::io::Cursor::new(csv(&h))).unwrap();
    assert_eq!(back.len(), h.len());
    for (a, b) in back.samples().iter().zip(h.samples()) {
        assert_eq!(a, b);
    }
}
