//! Shared fixtures for the kernel benchmarks.

use step2heat::{GroupPoint, GroupSpec};

/// Deterministic spread of `n` points with coordinates in (-1, 1).
pub fn sample_points(spec: &GroupSpec, n: usize) -> Vec<GroupPoint> {
    let dim = spec.m() + spec.k();
    (0..n)
        .map(|i| {
            let c: Vec<f64> = (0..dim)
                .map(|j| (((i * dim + j) as f64 + 0.5) * 0.618_033_988_75).fract() * 2.0 - 1.0)
                .collect();
            GroupPoint::new(c[..spec.m()].to_vec(), c[spec.m()..].to_vec())
        })
        .collect()
}
