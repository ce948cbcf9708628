//! Quadrature rules in barycentric coordinates; weights sum to one.

/// Edge-midpoint rule, exact for quadratics on triangles.
pub const TRI_MIDPOINT: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const A1: f64 = 0.445_948_490_915_965;
const B1: f64 = 0.108_103_018_168_070;
const W1: f64 = 0.223_381_589_678_011;
const A2: f64 = 0.091_576_213_509_771;
const B2: f64 = 0.816_847_572_980_459;
const W2: f64 = 0.109_951_743_655_322;

/// Six-point rule, exact for polynomials of degree 4 on triangles.
pub const TRI_DEG4: [([f64; 3], f64); 6] = [
    ([A1, A1, B1], W1),
    ([A1, B1, A1], W1),
    ([B1, A1, A1], W1),
    ([A2, A2, B2], W2),
    ([A2, B2, A2], W2),
    ([B2, A2, A2], W2),
];

/// Three-point Gauss rule on `[0, 1]`, exact for degree 5.
pub fn gauss3() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

/// Two-point Gauss rule on `[0, 1]`, exact for degree 3.
pub fn gauss2() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}
