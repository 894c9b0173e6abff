//! `A(lambda) = -J(lambda)^2` and the even matrix functions of its square root.
//!
//! Everything is computed from one symmetric eigendecomposition of `A`;
//! functions of `sqrt(A)` are applied to the square roots of its eigenvalues,
//! so the kernel of `A` is handled by the value of each function at zero.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::quadrature::sphere_rule;

/// `A(lambda) = J(lambda)^T J(lambda) = -J(lambda)^2`.
pub fn a_of(spec: &GroupSpec, lambda: &[f64]) -> DMatrix<f64> {
    let j = spec.j_of(lambda);
    j.transpose() * &j
}

/// Eigendecomposition of `A(lambda)` with cached profile values.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: Vec<f64>,
    /// Eigenvalues of `A`, ascending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub sqrt_eigenvalues: Vec<f64>,
    pub j_values: Vec<f64>,
    pub x_coth_values: Vec<f64>,
    pub det_j: f64,
}

/// Decomposes a symmetric positive semidefinite matrix.
pub fn spectral_of_psd(a: &DMatrix<f64>, lambda: Vec<f64>) -> Result<SpectralData> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Eigen("matrix is not square".into()));
    }
    let asym = (a - a.transpose()).amax();
    let scale = a.amax().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::Eigen(format!("input is not symmetric (asymmetry {asym:e})")));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mu = eig.eigenvalues[i];
        if mu < -1e-12 * scale {
            return Err(Error::Eigen(format!("negative eigenvalue {mu:e} of a PSD matrix")));
        }
        // rounding noise on Ker A is flushed so that functions of sqrt(A) see an exact zero
        let noise = 16.0 * f64::EPSILON * n as f64 * a.amax();
        eigenvalues.push(if mu <= noise { 0.0 } else { mu });
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }
    let sqrt_eigenvalues: Vec<f64> = eigenvalues.iter().map(|mu| mu.sqrt()).collect();
    let j_values: Vec<f64> = sqrt_eigenvalues.iter().map(|&x| j_scalar(x)).collect();
    let x_coth_values = sqrt_eigenvalues.iter().map(|&x| x_coth(x)).collect();
    let det_j = j_values.iter().product();
    Ok(SpectralData {
        lambda,
        eigenvalues,
        eigenvectors,
        sqrt_eigenvalues,
        j_values,
        x_coth_values,
        det_j,
    })
}

/// Eigendecomposition of `A(lambda)`.
pub fn spectral(spec: &GroupSpec, lambda: &[f64]) -> Result<SpectralData> {
    spectral_of_psd(&a_of(spec, lambda), lambda.to_vec())
}

/// `j(x) = x / sinh x`, with `j(0) = 1`.
pub fn j_scalar(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    } else if x > 20.0 {
        // x / sinh x = 2x e^{-x} / (1 - e^{-2x})
        2.0 * x * (-x).exp() / (1.0 - (-2.0 * x).exp())
    } else {
        x / x.sinh()
    }
}

/// `x coth x = j(x) cosh(x)`, with value 1 at zero.
pub fn x_coth(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 3.0 - x2 * x2 / 45.0
    } else {
        x / x.tanh()
    }
}

/// `sinh(x) / x = 1 / j(x)`.
pub fn sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `V diag(f(sqrt(mu_i))) V^T`.
pub fn even_apply<F: Fn(f64) -> f64>(sd: &SpectralData, f: F) -> DMatrix<f64> {
    let v = &sd.eigenvectors;
    let n = v.nrows();
    let mut scaled = v.clone();
    for (c, &x) in sd.sqrt_eigenvalues.iter().enumerate() {
        let fx = f(x);
        for r in 0..n {
            scaled[(r, c)] *= fx;
        }
    }
    scaled * v.transpose()
}

/// `det j(sqrt(A(lambda))) = prod_i j(sqrt(mu_i))`.
pub fn det_j_sqrt_a(sd: &SpectralData) -> f64 {
    sd.det_j
}

/// Lower bound `k0` with `sqrt(A(lambda))` having two eigenvalues `>= k0 |lambda|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub k0: f64,
    pub sample_count: usize,
    pub safety_factor: f64,
    /// The sphere minimum before the safety factor is applied.
    pub raw_minimum: f64,
}

pub const DEFAULT_SAFETY_FACTOR: f64 = 0.9;

fn second_largest_root(spec: &GroupSpec, omega: &[f64]) -> f64 {
    let a = a_of(spec, omega);
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[ev.len() - 2].max(0.0).sqrt()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Minimizes the second-largest eigenvalue of `sqrt(A(omega))` over the unit
/// sphere: product-rule sampling followed by a compass search around the best
/// sample.
pub fn estimate_k0(spec: &GroupSpec, samples: usize) -> Result<DecayEstimate> {
    estimate_k0_with(spec, samples, DEFAULT_SAFETY_FACTOR)
}

pub fn estimate_k0_with(spec: &GroupSpec, samples: usize, safety_factor: f64) -> Result<DecayEstimate> {
    if samples < 64 {
        return Err(Error::InvalidArgument(format!(
            "k0 estimate needs at least 64 samples, got {samples}"
        )));
    }
    if !(safety_factor > 0.0 && safety_factor <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor must lie in (0, 1], got {safety_factor}"
        )));
    }
    let k = spec.k();
    let mut n = 2;
    let dirs = loop {
        let d = sphere_rule(k, n, true);
        if d.len() >= samples || k == 1 || n > 4096 {
            break d;
        }
        n += 2;
    };
    let mut count = dirs.len();
    let (mut best, mut best_val) = dirs
        .iter()
        .map(|d| (d.omega.clone(), second_largest_root(spec, &d.omega)))
        .fold((vec![], f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });

    if k > 1 {
        let mut step = std::f64::consts::PI / n as f64;
        while step > 1e-7 {
            let mut improved = false;
            for axis in 0..k {
                for sign in [1.0, -1.0] {
                    let mut trial = best.clone();
                    trial[axis] += sign * step;
                    let trial = normalized(&trial);
                    let val = second_largest_root(spec, &trial);
                    count += 1;
                    if val < best_val {
                        best = trial;
                        best_val = val;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    if !(best_val > 0.0) {
        return Err(Error::Validation(
            "A(lambda) has fewer than two positive eigenvalues on the sphere".into(),
        ));
    }
    Ok(DecayEstimate {
        k0: safety_factor * best_val,
        sample_count: count,
        safety_factor,
        raw_minimum: best_val,
    })
}

/// Largest eigenvalue of `sqrt(A(omega))` over a sphere sample (used to size
/// quadrature panels).
pub fn max_root_on_sphere(spec: &GroupSpec) -> f64 {
    let dirs = sphere_rule(spec.k(), 12, true);
    dirs.iter()
        .map(|d| {
            let ev = SymmetricEigen::new(a_of(spec, &d.omega)).eigenvalues;
            ev.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T>(a: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].modulus()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = T::from_real(0.5f64.powi(squarings as i32));
    let x = a * scale;
    let mut term = DMatrix::<T>::identity(n, n);
    let mut sum = term.clone();
    for i in 1..=20 {
        term = &term * &x * T::from_real(1.0 / i as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Memo of spectral data keyed by the exact bits of `lambda`.
///
/// Confined to one evaluation context; not shared between threads.
#[derive(Debug, Default)]
pub struct SpectralCache {
    map: HashMap<Vec<u64>, Arc<SpectralData>>,
}

impl SpectralCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, spec: &GroupSpec, lambda: &[f64]) -> Result<Arc<SpectralData>> {
        let key: Vec<u64> = lambda.iter().map(|x| x.to_bits()).collect();
        if let Some(sd) = self.map.get(&key) {
            return Ok(sd.clone());
        }
        let sd = Arc::new(spectral(spec, lambda)?);
        self.map.insert(key, sd.clone());
        Ok(sd)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
