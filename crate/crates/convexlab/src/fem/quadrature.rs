//! Triangle and edge quadrature rules (barycentric points, weights summing
//! to one; multiply by the triangle area / edge length).

/// Three-midpoint rule, exact for polynomials of degree 2.
pub const MIDPOINT3: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Six-point rule, exact for polynomials of degree 4.
pub const DUNAVANT6: [([f64; 3], f64); 6] = [
    (
        [0.816_847_572_980_459, 0.091_576_213_509_771, 0.091_576_213_509_771],
        0.109_951_743_655_322,
    ),
    (
        [0.091_576_213_509_771, 0.816_847_572_980_459, 0.091_576_213_509_771],
        0.109_951_743_655_322,
    ),
    (
        [0.091_576_213_509_771, 0.091_576_213_509_771, 0.816_847_572_980_459],
        0.109_951_743_655_322,
    ),
    (
        [0.108_103_018_168_070, 0.445_948_490_915_965, 0.445_948_490_915_965],
        0.223_381_589_678_011,
    ),
    (
        [0.445_948_490_915_965, 0.108_103_018_168_070, 0.445_948_490_915_965],
        0.223_381_589_678_011,
    ),
    (
        [0.445_948_490_915_965, 0.445_948_490_915_965, 0.108_103_018_168_070],
        0.223_381_589_678_011,
    ),
];

/// Simpson rule on an edge parametrized by `s in [0, 1]`, exact for cubics.
pub const SIMPSON: [(f64, f64); 3] =
    [(0.0, 1.0 / 6.0), (0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0)];
