//! Shared fixtures for the criterion benches.

use momray_core::johnop::sample_points;
use momray_core::GaussField;

/// Seeded random field with three Gaussian terms per component.
pub fn field(m: usize, n: usize) -> GaussField {
    GaussField::random(m, n, 42, 3).expect("valid random field parameters")
}

/// Seeded off-manifold sample points.
pub fn points(n: usize, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    sample_points(n, count, 42)
}
