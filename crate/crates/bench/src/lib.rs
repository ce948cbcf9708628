//! Shared fixtures for the benchmarks.

use thermoshape::datagen::{builtin, measure, ExperimentSpec};
use thermoshape::{BoundaryProfile, Mesh};

/// The test-1 experiment, its noisy measurement and the initial-guess mesh.
pub struct Fixture {
    pub spec: ExperimentSpec,
    pub h: BoundaryProfile,
    pub mesh: Mesh,
}

impl Fixture {
    pub fn test1() -> Self {
        let spec = builtin("test1").expect("built-in experiment");
        let h = measure(&spec).expect("measurement").noisy;
        let guess = spec.initial_guess(&h).expect("initial guess");
        let mesh = spec.guess_mesh(&guess).expect("guess mesh");
        Self { spec, h, mesh }
    }
}
