//! Heat kernel of a step-two Carnot group, written as an integral over the
//! vertical frequency `lambda in R^k`.
//!
//! The integral is taken in polar coordinates `lambda = r omega`. Because
//! `A(r omega) = r^2 A(omega)`, one eigendecomposition per direction serves the
//! whole ray, so the radial profiles are tabulated once per direction and
//! reused across evaluation points. The real part is integrated over the
//! half-sphere `omega_0 > 0` (the integrand is conjugate-symmetric); a
//! coarser full-sphere pass gives the error estimate and the imaginary
//! residue.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::{GroupPoint, GroupSpec};
use crate::matrix_functions::{a_of, estimate_k0, j_scalar, max_root_on_sphere, spectral, spectral_of_psd, x_coth};
use crate::quadrature::{adaptive_gk15, composite_gauss_legendre, sphere_area, sphere_rule};
use crate::special::gauge;

const RADIAL_ORDER: usize = 16;
const SCAN_SAMPLES: usize = 256;
const MAX_CACHED_GRIDS: usize = 24;
/// Fraction of the diagonal scale below which errors are absolute.
const VALUE_FLOOR: f64 = 1e-3;
const PROFILE_MARGIN: f64 = 1e3;

/// Quadrature rule over the frequency space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Radial composite Gauss–Legendre times a hyperspherical product rule.
    #[default]
    Spherical,
    /// Cartesian composite Gauss–Legendre on the cube `[-R, R]^k`.
    TensorGauss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    /// Decay constant; estimated from the group when `None`.
    pub k0: Option<f64>,
    pub rel_tol: f64,
    /// Forces the truncation radius; chosen from the tail bound when `None`.
    pub truncation_radius: Option<f64>,
    /// Floor for the number of polar nodes (and per-dimension nodes per panel group).
    pub nodes_per_dim: usize,
    pub max_refinements: usize,
    pub method: Method,
    /// Node budget per pass; exceeding it reports `TimeTooSmall`.
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            k0: None,
            rel_tol: 1e-10,
            truncation_radius: None,
            nodes_per_dim: 8,
            max_refinements: 4,
            method: Method::Spherical,
            max_nodes: 20_000_000,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 0.1) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must lie in (0, 0.1], got {}",
                self.rel_tol
            )));
        }
        if self.nodes_per_dim < 8 {
            return Err(Error::InvalidArgument(format!(
                "nodes_per_dim must be at least 8, got {}",
                self.nodes_per_dim
            )));
        }
        if let Some(k0) = self.k0 {
            if !(k0 > 0.0) {
                return Err(Error::InvalidArgument(format!("k0 must be positive, got {k0}")));
            }
        }
        if let Some(r) = self.truncation_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "truncation radius must be positive, got {r}"
                )));
            }
        }
        if self.max_nodes == 0 {
            return Err(Error::InvalidArgument("max_nodes must be positive".into()));
        }
        Ok(())
    }
}

/// A kernel value with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    /// Magnitude of the imaginary part left by the full-domain pass.
    pub imag_residue: f64,
    pub est_error: f64,
}

/// Resolution of one quadrature pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    /// Polar node count of the sphere rule (ignored for `k = 1`).
    pub angular: usize,
    /// Radial panels (per half-axis for the tensor rule).
    pub panels: usize,
    pub radius: f64,
}

fn ladder_values() -> impl Iterator<Item = usize> {
    [1usize, 2, 3].into_iter().chain((2..40).flat_map(|e| {
        let p = 1usize << e;
        [p, p + p / 2]
    }))
}

pub(crate) fn ladder_ceil(x: f64) -> usize {
    ladder_values().find(|&v| v as f64 >= x).unwrap_or(usize::MAX / 4)
}

fn ladder_next(v: usize) -> usize {
    ladder_values().find(|&w| w > v).unwrap_or(v * 2)
}

fn ladder_prev(v: usize) -> usize {
    ladder_values().take_while(|&w| w < v).last().unwrap_or(1)
}

impl Plan {
    fn coarser(self, k: usize) -> Plan {
        Plan {
            angular: if k == 1 {
                self.angular
            } else {
                ladder_prev(self.angular).max(4)
            },
            panels: ladder_prev(self.panels).max(1),
            radius: self.radius,
        }
    }

    fn finer(self, k: usize) -> Plan {
        Plan {
            angular: if k == 1 {
                self.angular
            } else {
                ladder_next(self.angular)
            },
            panels: ladder_next(self.panels),
            radius: self.radius,
        }
    }

    fn direction_count(&self, k: usize, half: bool) -> usize {
        let n = self.angular;
        let full = match k {
            1 => 2,
            2 => 2 * n,
            _ => 2 * n.pow(k as u32 - 1),
        };
        if half {
            full / 2
        } else {
            full
        }
    }

    fn node_count(&self, k: usize, half: bool, method: Method) -> usize {
        let per_axis = self.panels * RADIAL_ORDER;
        match method {
            Method::Spherical => self.direction_count(k, half) * per_axis,
            Method::TensorGauss => {
                let first = if half { per_axis } else { 2 * per_axis };
                first * (2 * per_axis).pow(k as u32 - 1)
            }
        }
    }
}

/// `2^k (4 pi t)^{-(m/2 + k)}`.
pub fn prefactor(m: usize, k: usize, t: f64) -> f64 {
    prefactor_with_exponent(k, m as f64 / 2.0 + k as f64, t)
}

pub(crate) fn prefactor_with_exponent(k: usize, exponent: f64, t: f64) -> f64 {
    2f64.powi(k as i32) * (-exponent * (4.0 * PI * t).ln()).exp()
}

/// Phase coefficients `b_l = tau_l - sigma_l + <J_l zeta, z>/2`, so that the
/// phase is `<b, lambda>/t`.
pub fn phase_vector(spec: &GroupSpec, g: &GroupPoint, gp: &GroupPoint) -> Vec<f64> {
    let br = spec.bracket(&gp.z, &g.z);
    (0..spec.k()).map(|l| gp.sigma[l] - g.sigma[l] + 0.5 * br[l]).collect()
}

fn check_points(spec: &GroupSpec, g: &GroupPoint, gp: &GroupPoint, t: f64) -> Result<()> {
    for p in [g, gp] {
        if p.z.len() != spec.m() || p.sigma.len() != spec.k() {
            return Err(Error::Dimension(format!(
                "point has dimensions ({}, {}), group has ({}, {})",
                p.z.len(),
                p.sigma.len(),
                spec.m(),
                spec.k()
            )));
        }
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t must be positive and finite, got {t}"
        )));
    }
    Ok(())
}

/// The complex integrand at one frequency `lambda`.
pub fn integrand(spec: &GroupSpec, g: &GroupPoint, gp: &GroupPoint, t: f64, lambda: &[f64]) -> Result<Complex64> {
    check_points(spec, g, gp, t)?;
    if lambda.len() != spec.k() {
        return Err(Error::Dimension(format!("lambda must have length {}", spec.k())));
    }
    let b = phase_vector(spec, g, gp);
    let phase: f64 = b.iter().zip(lambda).map(|(x, y)| x * y).sum::<f64>() / t;
    let sd = spectral(spec, lambda)?;
    let d: Vec<f64> = g.z.iter().zip(&gp.z).map(|(a, b)| a - b).collect();
    let v = &sd.eigenvectors;
    let mut form = 0.0;
    for i in 0..spec.m() {
        let c: f64 = (0..spec.m()).map(|s| v[(s, i)] * d[s]).sum();
        form += sd.x_coth_values[i] * c * c;
    }
    let modulus = sd.det_j.sqrt() * (-form / (4.0 * t)).exp();
    Ok(Complex64::from_polar(modulus, phase))
}

/// Result in units where the Gaussian factor at `lambda = 0` is removed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reduced {
    pub value: f64,
    pub est_error: f64,
    pub imag: f64,
    pub plan: Plan,
}

/// `|S^{k-1}| int_R^inf r^{k-1} j(rate r)^power dr`.
pub(crate) fn envelope_tail(k: usize, rate: f64, power: f64, radius: f64) -> f64 {
    let len = 90.0 / (rate * power.min(1.0));
    let panels = ((len * rate / 2.0).ceil() as usize).max(4);
    let (x, w) = composite_gauss_legendre(radius, radius + len, panels, RADIAL_ORDER);
    let s: f64 = x
        .iter()
        .zip(&w)
        .map(|(&r, &w)| w * r.powi(k as i32 - 1) * j_scalar(rate * r).powf(power))
        .sum();
    sphere_area(k) * s
}

/// Smallest radius whose tail is at most `target`.
pub(crate) fn radius_for_tail(k: usize, rate: f64, power: f64, target: f64) -> f64 {
    let mut hi = 1.0 / rate;
    while envelope_tail(k, rate, power, hi) > target {
        hi *= 2.0;
        if hi > 1e6 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if envelope_tail(k, rate, power, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Rounds a radius up to `r_max 2^{-j/4}` so that nearby points share grids.
fn quantize_radius(r: f64, r_max: f64) -> f64 {
    if r >= r_max {
        return r_max;
    }
    let j = (4.0 * (r_max / r).log2()).floor();
    (r_max * 2f64.powf(-j / 4.0)).min(r_max)
}

/// First scan radius beyond which `scale * int env` stays below `target`.
fn scan_radius(samples: &[f64], step: f64, scale: f64, target: f64) -> f64 {
    let mut tail = 0.0;
    for i in (1..samples.len()).rev() {
        tail += 0.5 * (samples[i] + samples[i - 1]) * step * scale;
        if tail > target {
            return i as f64 * step;
        }
    }
    step
}

fn budget_error(t: f64, k: usize, nodes: usize, budget: usize) -> Error {
    let ratio = nodes as f64 / budget as f64;
    Error::TimeTooSmall {
        t,
        t_min: t * ratio.powf(1.0 / k as f64),
    }
}

/// Shared refinement driver: a full-domain pass at the coarse plan, then
/// half-domain passes at increasing resolution until two consecutive values
/// agree to `rel_tol * max(|value|, VALUE_FLOOR * scale)`.
fn refine<F>(
    cfg: &QuadratureConfig,
    k: usize,
    t: f64,
    first: Plan,
    scale: f64,
    tail: f64,
    mut pass: F,
) -> Result<Reduced>
where
    F: FnMut(&Plan, bool) -> Result<(f64, f64)>,
{
    // relative to the value, floored at a fraction of the diagonal scale
    let target = |v: f64| cfg.rel_tol * v.abs().max(VALUE_FLOOR * scale);
    let coarse = first.coarser(k);
    let nodes = coarse.node_count(k, false, cfg.method);
    if nodes > cfg.max_nodes {
        return Err(budget_error(t, k, nodes, cfg.max_nodes));
    }
    let (mut prev, imag) = pass(&coarse, false)?;
    let mut plan = first;
    let mut est = f64::INFINITY;
    for _ in 0..=cfg.max_refinements {
        let nodes = plan.node_count(k, true, cfg.method);
        if nodes > cfg.max_nodes {
            return Err(budget_error(t, k, nodes, cfg.max_nodes));
        }
        let (value, _) = pass(&plan, true)?;
        est = (value - prev).abs();
        if est <= target(value) {
            return Ok(Reduced {
                value,
                est_error: est + tail,
                imag: imag.abs(),
                plan,
            });
        }
        prev = value;
        plan = plan.finer(k);
    }
    Err(Error::NonConvergence {
        what: "frequency quadrature",
        est_error: est / scale,
        target: cfg.rel_tol,
    })
}

fn radial_nodes(radius: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    composite_gauss_legendre(0.0, radius, panels, RADIAL_ORDER)
}

/// Eigendata of `A(omega)` for one direction of a sphere rule.
#[derive(Debug, Clone)]
struct DirSpectral {
    omega: Vec<f64>,
    weight: f64,
    /// Eigenvectors as rows, row-major `m x m`.
    vt: Vec<f64>,
    nu: Vec<f64>,
}

/// Tabulated integrand factors for one plan.
#[derive(Debug)]
struct PreparedGrid {
    /// Per direction: unit vector, eigenvector rows, range of nodes.
    dirs: Vec<(Vec<f64>, Vec<f64>, usize, usize)>,
    r: Vec<f64>,
    amp: Vec<f64>,
    /// `x coth x - 1` at `r nu_i`, `m` values per node.
    xc: Vec<f64>,
}

type GridKey = (usize, usize, u64, bool, bool);
/// Direction-set index and hemisphere flag.
type DirKey = (usize, bool);
/// Unit directions with their angular weights.
type WeightedDirs = Vec<(Vec<f64>, f64)>;

/// Kernel evaluation context for one group. Holds caches, so it is neither
/// `Sync` nor meant to be shared: give each worker its own.
pub struct KernelEvaluator {
    spec: GroupSpec,
    cfg: QuadratureConfig,
    k0: f64,
    s_max: f64,
    /// `|S| int r^{k-1} j(s_max r)^{m/2} dr`, a lower bound of the diagonal integral.
    d_lower: f64,
    r_tail: f64,
    tail_bound: f64,
    scan_step: f64,
    /// Per scan direction: eigenvector rows, then per sample `amp` and `x coth - 1`.
    scan: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    directions: RefCell<HashMap<DirKey, Rc<Vec<DirSpectral>>>>,
    grids: RefCell<HashMap<GridKey, Rc<PreparedGrid>>>,
    diagonal: RefCell<Option<f64>>,
    profile: RefCell<Option<ProfileEvaluator>>,
}

impl std::fmt::Debug for KernelEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelEvaluator")
            .field("group", &self.spec.name())
            .field("k0", &self.k0)
            .field("radius", &self.r_tail)
            .finish()
    }
}

fn direction_spectra(spec: &GroupSpec, n: usize, half: bool) -> Result<Vec<DirSpectral>> {
    sphere_rule(spec.k(), n, half)
        .into_iter()
        .map(|d| {
            let sd = spectral_of_psd(&a_of(spec, &d.omega), d.omega.clone())?;
            let m = spec.m();
            let mut vt = vec![0.0; m * m];
            for i in 0..m {
                for s in 0..m {
                    vt[i * m + s] = sd.eigenvectors[(s, i)];
                }
            }
            Ok(DirSpectral {
                omega: d.omega,
                weight: d.weight,
                vt,
                nu: sd.sqrt_eigenvalues,
            })
        })
        .collect()
}

impl KernelEvaluator {
    pub fn new(spec: &GroupSpec, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let k = spec.k();
        let m = spec.m();
        let k0 = match cfg.k0 {
            Some(k0) => k0,
            None => estimate_k0(spec, 256)?.k0,
        };
        let s_max = max_root_on_sphere(spec).max(k0);
        let d_lower = envelope_tail(k, s_max, m as f64 / 2.0, 0.0);
        // det j(sqrt A)^{1/2} <= j(k0 |lambda|): two eigenvalues exceed k0 |lambda|
        let target = 0.1 * cfg.rel_tol * d_lower;
        let (r_tail, tail_bound) = match cfg.truncation_radius {
            Some(r) => {
                let tail = envelope_tail(k, k0, 1.0, r);
                if tail > target {
                    return Err(Error::TruncationTooSmall {
                        radius: r,
                        tail: tail / d_lower,
                        target: cfg.rel_tol,
                    });
                }
                (r, tail)
            }
            None => {
                let r = radius_for_tail(k, k0, 1.0, target);
                (r, envelope_tail(k, k0, 1.0, r))
            }
        };
        let scan_step = r_tail / SCAN_SAMPLES as f64;
        let scan = direction_spectra(spec, 8, true)?
            .into_iter()
            .map(|d| {
                let mut amp = Vec::with_capacity(SCAN_SAMPLES + 1);
                let mut xc = Vec::with_capacity((SCAN_SAMPLES + 1) * m);
                for s in 0..=SCAN_SAMPLES {
                    let r = s as f64 * scan_step;
                    let det: f64 = d.nu.iter().map(|&nu| j_scalar(r * nu)).product();
                    amp.push(r.powi(k as i32 - 1) * det.sqrt());
                    xc.extend(d.nu.iter().map(|&nu| x_coth(r * nu) - 1.0));
                }
                (d.vt, amp, xc)
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            cfg,
            k0,
            s_max,
            d_lower,
            r_tail,
            tail_bound,
            scan_step,
            scan,
            directions: RefCell::new(HashMap::new()),
            grids: RefCell::new(HashMap::new()),
            diagonal: RefCell::new(None),
            profile: RefCell::new(None),
        })
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Radius so that the discarded tail is below the tolerance.
    pub fn truncation_radius(&self) -> f64 {
        self.r_tail
    }

    fn dirs(&self, n: usize, half: bool) -> Result<Rc<Vec<DirSpectral>>> {
        let key = (if self.spec.k() == 1 { 0 } else { n }, half);
        if let Some(d) = self.directions.borrow().get(&key) {
            return Ok(d.clone());
        }
        let d = Rc::new(direction_spectra(&self.spec, n, half)?);
        self.directions.borrow_mut().insert(key, d.clone());
        Ok(d)
    }

    fn grid(&self, plan: &Plan, half: bool) -> Result<Rc<PreparedGrid>> {
        let tensor = self.cfg.method == Method::TensorGauss;
        let key = (plan.angular, plan.panels, plan.radius.to_bits(), half, tensor);
        if let Some(g) = self.grids.borrow().get(&key) {
            return Ok(g.clone());
        }
        let grid = Rc::new(if tensor {
            self.build_tensor(plan, half)?
        } else {
            self.build_spherical(plan, half)?
        });
        let mut grids = self.grids.borrow_mut();
        if grids.len() >= MAX_CACHED_GRIDS {
            grids.clear();
        }
        grids.insert(key, grid.clone());
        Ok(grid)
    }

    fn build_spherical(&self, plan: &Plan, half: bool) -> Result<PreparedGrid> {
        let k = self.spec.k();
        let m = self.spec.m();
        let dirs = self.dirs(plan.angular, half)?;
        let (rs, ws) = radial_nodes(plan.radius, plan.panels);
        let n_nodes = dirs.len() * rs.len();
        let mut grid = PreparedGrid {
            dirs: Vec::with_capacity(dirs.len()),
            r: Vec::with_capacity(n_nodes),
            amp: Vec::with_capacity(n_nodes),
            xc: Vec::with_capacity(n_nodes * m),
        };
        for d in dirs.iter() {
            let start = grid.r.len();
            for (&r, &w) in rs.iter().zip(&ws) {
                let det: f64 = d.nu.iter().map(|&nu| j_scalar(r * nu)).product();
                grid.r.push(r);
                grid.amp.push(d.weight * w * r.powi(k as i32 - 1) * det.sqrt());
                grid.xc.extend(d.nu.iter().map(|&nu| x_coth(r * nu) - 1.0));
            }
            grid.dirs.push((d.omega.clone(), d.vt.clone(), start, rs.len()));
        }
        Ok(grid)
    }

    fn build_tensor(&self, plan: &Plan, half: bool) -> Result<PreparedGrid> {
        let k = self.spec.k();
        let m = self.spec.m();
        let r = plan.radius;
        let first = if half {
            composite_gauss_legendre(0.0, r, plan.panels, RADIAL_ORDER)
        } else {
            composite_gauss_legendre(-r, r, 2 * plan.panels, RADIAL_ORDER)
        };
        let other = composite_gauss_legendre(-r, r, 2 * plan.panels, RADIAL_ORDER);
        let weight_factor = if half { 2.0 } else { 1.0 };
        let mut grid = PreparedGrid {
            dirs: Vec::new(),
            r: Vec::new(),
            amp: Vec::new(),
            xc: Vec::new(),
        };
        let mut idx = vec![0usize; k];
        loop {
            let mut lambda = Vec::with_capacity(k);
            let mut w = weight_factor;
            for (axis, &i) in idx.iter().enumerate() {
                let (x, wx) = if axis == 0 { &first } else { &other };
                lambda.push(x[i]);
                w *= wx[i];
            }
            let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sd = spectral_of_psd(&a_of(&self.spec, &lambda), lambda.clone())?;
            let mut vt = vec![0.0; m * m];
            for i in 0..m {
                for s in 0..m {
                    vt[i * m + s] = sd.eigenvectors[(s, i)];
                }
            }
            let start = grid.r.len();
            grid.r.push(norm);
            grid.amp.push(w * sd.det_j.sqrt());
            grid.xc.extend(sd.x_coth_values.iter().map(|x| x - 1.0));
            let omega = lambda.iter().map(|x| x / norm).collect();
            grid.dirs.push((omega, vt, start, 1));

            let mut axis = 0;
            loop {
                if axis == k {
                    return Ok(grid);
                }
                idx[axis] += 1;
                let len = if axis == 0 { first.0.len() } else { other.0.len() };
                if idx[axis] < len {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }

    /// One pass in reduced units: returns the real and imaginary sums.
    fn pass(&self, grid: &PreparedGrid, d: &[f64], b: &[f64], t: f64, want_imag: bool) -> (f64, f64) {
        let m = self.spec.m();
        let four_t = 4.0 * t;
        let moving = d.iter().any(|&x| x != 0.0);
        let mut c2 = vec![0.0; m];
        let (mut re, mut im) = (0.0, 0.0);
        for (omega, vt, start, len) in &grid.dirs {
            let a: f64 = omega.iter().zip(b).map(|(o, b)| o * b).sum::<f64>() / t;
            if moving {
                for i in 0..m {
                    let c: f64 = (0..m).map(|s| vt[i * m + s] * d[s]).sum();
                    c2[i] = c * c / four_t;
                }
            }
            for node in *start..start + len {
                let mut env = grid.amp[node];
                if moving {
                    let xc = &grid.xc[node * m..node * m + m];
                    let expo: f64 = c2.iter().zip(xc).map(|(c, x)| c * x).sum();
                    if expo > 700.0 {
                        continue;
                    }
                    env *= (-expo).exp();
                }
                let phase = grid.r[node] * a;
                if want_imag {
                    let (s, c) = phase.sin_cos();
                    re += env * c;
                    im += env * s;
                } else if a == 0.0 {
                    re += env;
                } else {
                    re += env * phase.cos();
                }
            }
        }
        (re, im)
    }

    /// Radius beyond which the sampled envelope is negligible.
    fn effective_radius(&self, d: &[f64], t: f64) -> f64 {
        let m = self.spec.m();
        let moving = d.iter().any(|&x| x != 0.0);
        let mut env = vec![0.0f64; SCAN_SAMPLES + 1];
        let mut c2 = vec![0.0; m];
        for (vt, amp, xc) in &self.scan {
            if moving {
                for i in 0..m {
                    let c: f64 = (0..m).map(|s| vt[i * m + s] * d[s]).sum();
                    c2[i] = c * c / (4.0 * t);
                }
            }
            for s in 0..=SCAN_SAMPLES {
                let expo: f64 = if moving {
                    c2.iter().zip(&xc[s * m..s * m + m]).map(|(c, x)| c * x).sum()
                } else {
                    0.0
                };
                env[s] = env[s].max(amp[s] * (-expo).exp());
            }
        }
        let k = self.spec.k();
        // safety factor for the finite direction sample
        let scale = if k == 1 { 2.0 } else { 10.0 * sphere_area(k) };
        let r = scan_radius(&env, self.scan_step, scale, 0.1 * self.cfg.rel_tol * self.d_lower);
        quantize_radius(r.max(2.0 * self.scan_step), self.r_tail)
    }

    fn initial_plan(&self, d: &[f64], b: &[f64], t: f64) -> Plan {
        let radius = if self.cfg.truncation_radius.is_some() {
            self.r_tail
        } else {
            self.effective_radius(d, t)
        };
        let d2: f64 = d.iter().map(|x| x * x).sum();
        let w = b.iter().map(|x| x * x).sum::<f64>().sqrt() / t;
        let g = d2 * self.s_max / (4.0 * t);
        let mut h = 4.0 / self.s_max;
        if w > 0.0 {
            h = h.min(6.0 / w);
        }
        if g > 0.0 {
            h = h.min(12.0 / g);
        }
        let angular = 0.55 * radius * w + 0.3 * (radius * g).min(60.0) + 12.0;
        Plan {
            angular: ladder_ceil(angular.max(self.cfg.nodes_per_dim as f64)),
            panels: ladder_ceil(radius / h),
            radius,
        }
    }

    fn reduced(&self, g: &GroupPoint, gp: &GroupPoint, t: f64) -> Result<(Reduced, f64)> {
        check_points(&self.spec, g, gp, t)?;
        let d: Vec<f64> = g.z.iter().zip(&gp.z).map(|(a, b)| a - b).collect();
        let b = phase_vector(&self.spec, g, gp);
        let plan = self.initial_plan(&d, &b, t);
        let red = refine(
            &self.cfg,
            self.spec.k(),
            t,
            plan,
            self.d_lower,
            self.tail_bound,
            |p, half| {
                let grid = self.grid(p, half)?;
                Ok(self.pass(&grid, &d, &b, t, !half))
            },
        )?;
        let d2: f64 = d.iter().map(|x| x * x).sum();
        Ok((red, (-d2 / (4.0 * t)).exp()))
    }

    /// Heat kernel `p(g, g', t)`.
    pub fn heat(&self, g: &GroupPoint, gp: &GroupPoint, t: f64) -> Result<KernelValue> {
        let (red, gauss) = self.reduced(g, gp, t)?;
        let c = prefactor(self.spec.m(), self.spec.k(), t) * gauss;
        Ok(KernelValue {
            value: c * red.value,
            imag_residue: c * red.imag,
            est_error: c * red.est_error,
        })
    }

    /// The plan [`heat`](Self::heat) accepts at this point.
    pub fn plan(&self, g: &GroupPoint, gp: &GroupPoint, t: f64) -> Result<Plan> {
        Ok(self.reduced(g, gp, t)?.0.plan)
    }

    /// Heat kernel with a fixed plan and no error control; smooth in the
    /// arguments, which finite-difference stencils need.
    pub fn heat_with_plan(&self, g: &GroupPoint, gp: &GroupPoint, t: f64, plan: &Plan) -> Result<f64> {
        check_points(&self.spec, g, gp, t)?;
        let nodes = plan.node_count(self.spec.k(), true, self.cfg.method);
        if nodes > self.cfg.max_nodes {
            return Err(budget_error(t, self.spec.k(), nodes, self.cfg.max_nodes));
        }
        let d: Vec<f64> = g.z.iter().zip(&gp.z).map(|(a, b)| a - b).collect();
        let b = phase_vector(&self.spec, g, gp);
        let grid = self.grid(plan, true)?;
        let (re, _) = self.pass(&grid, &d, &b, t, false);
        let d2: f64 = d.iter().map(|x| x * x).sum();
        Ok(prefactor(self.spec.m(), self.spec.k(), t) * (-d2 / (4.0 * t)).exp() * re)
    }

    /// `p(g, g, t)`; scales exactly like `t^{-Q/2}`.
    pub fn diagonal(&self, t: f64) -> Result<f64> {
        if let Some(i0) = *self.diagonal.borrow() {
            return Ok(prefactor(self.spec.m(), self.spec.k(), t) * i0);
        }
        let e = GroupPoint::identity(&self.spec);
        let v = self.heat(&e, &e, 1.0)?.value;
        *self.diagonal.borrow_mut() = Some(v / prefactor(self.spec.m(), self.spec.k(), 1.0));
        self.diagonal(t)
    }

    /// Heisenberg-type kernel through scalar radial profiles.
    pub fn heisenberg_type(&self, g: &GroupPoint, gp: &GroupPoint, t: f64) -> Result<KernelValue> {
        if !self.spec.is_heisenberg_type() {
            return Err(Error::NotHeisenbergType);
        }
        check_points(&self.spec, g, gp, t)?;
        let m = self.spec.m();
        let d2: f64 = g.z.iter().zip(&gp.z).map(|(a, b)| (a - b) * (a - b)).sum();
        let profile = Profile {
            alpha: m as f64 / 2.0,
            a_coef: d2,
            b_coef: 0.0,
            freq: phase_vector(&self.spec, g, gp),
            t,
        };
        let mut slot = self.profile.borrow_mut();
        if slot.is_none() {
            *slot = Some(ProfileEvaluator::new(self.spec.k(), self.cfg.clone())?);
        }
        let v = slot.as_ref().unwrap().integrate(&profile)?;
        let c = prefactor(m, self.spec.k(), t);
        Ok(KernelValue {
            value: c * v.value,
            imag_residue: c * v.imag_residue,
            est_error: c * v.est_error,
        })
    }

    /// `int_0^inf p(g, g', t) dt`; groups of Heisenberg type use the radial
    /// profile path.
    pub fn green(&self, g: &GroupPoint, gp: &GroupPoint, gcfg: &GreenConfig) -> Result<GreenValue> {
        let delta = self.spec.multiply(&self.spec.inverse(gp), g)?;
        let n = gauge(&delta.z, &delta.sigma);
        if n == 0.0 {
            return Err(Error::PoleAtSource);
        }
        let q = self.spec.homogeneous_dimension() as f64;
        let profile = self.spec.is_heisenberg_type();
        green_time_integral(n, q / 2.0, 1.0, gcfg, |t| {
            let v = if profile {
                self.heisenberg_type(g, gp, t)?
            } else {
                self.heat(g, gp, t)?
            };
            Ok((v.value, v.est_error))
        })
    }
}

/// Time-integration settings for Green functions.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenConfig {
    pub rel_tol: f64,
    /// Floor `N^2 * lower_factor` for the lower limit, which otherwise stops
    /// where the Gaussian decay has made the integrand negligible.
    pub lower_factor: f64,
    /// Upper limit `t_hi = N^2 * upper_factor`, beyond which the power tail is
    /// added analytically.
    pub upper_factor: f64,
    pub max_segments: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            lower_factor: 1.0 / 296.0,
            upper_factor: 1e4,
            max_segments: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenValue {
    pub value: f64,
    pub est_error: f64,
}

/// `int_0^inf w(t) f(t) dt` with `w(t) = t^{weight_power - 1}`, computed in
/// `u = ln t` on `[ln t_lo, ln t_hi]` plus the analytic tail of an integrand
/// decaying like `t^{-decay}` (after the weight).
pub(crate) fn green_time_integral<F>(
    n: f64,
    decay: f64,
    weight_power: f64,
    gcfg: &GreenConfig,
    mut f: F,
) -> Result<GreenValue>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let n2 = n * n;
    let split = n2.ln();
    let floor = (n2 * gcfg.lower_factor).ln();
    let hi = (n2 * gcfg.upper_factor).ln();
    let mut kernel_err: f64 = 0.0;
    let mut integrand = |u: f64| -> Result<f64> {
        let t = u.exp();
        let (v, e) = f(t)?;
        let w = t.powf(weight_power);
        kernel_err = kernel_err.max(e * w);
        Ok(v * w)
    };
    // the integrand near t = N^2 sets the absolute floor
    let probe = integrand(split)?.abs().max(1e-300);
    let abs_tol = gcfg.rel_tol * probe * 1e-3;
    // walk down until the Gaussian decay has made two samples negligible
    let mut lo = split;
    let mut quiet = 0;
    while lo > floor && quiet < 2 {
        lo = (lo - std::f64::consts::LN_2).max(floor);
        if integrand(lo)?.abs() < abs_tol {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    let left = adaptive_gk15(&mut integrand, lo, split, abs_tol, gcfg.rel_tol, gcfg.max_segments)?;
    let right = adaptive_gk15(&mut integrand, split, hi, abs_tol, gcfg.rel_tol, gcfg.max_segments)?;
    // beyond t_hi the integrand (in u) is f(T) (t/T)^{weight - decay}
    let tail = integrand(hi)? / (decay - weight_power);
    Ok(GreenValue {
        value: left.value + right.value + tail,
        est_error: left.est_error + right.est_error + kernel_err * (hi - lo) + 1e-3 * tail.abs(),
    })
}

/// Radial profile integrand
/// `j(|l|)^alpha exp(-(A |l| coth|l| - B j(|l|)) / 4t) cos(<b, l>/t)`
/// over `R^k`, the common shape of the Heisenberg-type, Baouendi–Grushin
/// and extension kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub alpha: f64,
    pub a_coef: f64,
    pub b_coef: f64,
    pub freq: Vec<f64>,
    pub t: f64,
}

/// Evaluation context for [`Profile`] integrals in a fixed dimension `k`.
#[derive(Debug)]
pub struct ProfileEvaluator {
    k: usize,
    cfg: QuadratureConfig,
    totals: RefCell<HashMap<u64, (f64, f64)>>,
    dirs: RefCell<HashMap<DirKey, Rc<WeightedDirs>>>,
}

impl ProfileEvaluator {
    pub fn new(k: usize, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(Self {
            k,
            cfg,
            totals: RefCell::new(HashMap::new()),
            dirs: RefCell::new(HashMap::new()),
        })
    }

    /// `(|S| int r^{k-1} j^alpha dr, truncation radius)` for this `alpha`.
    fn totals(&self, alpha: f64) -> (f64, f64) {
        if let Some(&v) = self.totals.borrow().get(&alpha.to_bits()) {
            return v;
        }
        let total = envelope_tail(self.k, 1.0, alpha, 0.0);
        let r = match self.cfg.truncation_radius {
            Some(r) => r,
            None => radius_for_tail(self.k, 1.0, alpha, 0.1 * self.cfg.rel_tol * total),
        };
        self.totals.borrow_mut().insert(alpha.to_bits(), (total, r));
        (total, r)
    }

    fn directions(&self, n: usize, half: bool) -> Rc<Vec<(Vec<f64>, f64)>> {
        let key = (if self.k == 1 { 0 } else { n }, half);
        if let Some(d) = self.dirs.borrow().get(&key) {
            return d.clone();
        }
        let d: Rc<Vec<_>> = Rc::new(
            sphere_rule(self.k, n, half)
                .into_iter()
                .map(|d| (d.omega, d.weight))
                .collect(),
        );
        let mut map = self.dirs.borrow_mut();
        if map.len() > MAX_CACHED_GRIDS {
            map.clear();
        }
        map.insert(key, d.clone());
        d
    }

    /// Reduced envelope `r^{k-1} j^alpha exp(-(A (xcoth - 1) - B j + |B|)/4t)`.
    fn envelope(&self, p: &Profile, r: f64) -> f64 {
        let expo = (p.a_coef * (x_coth(r) - 1.0) - p.b_coef * j_scalar(r) + p.b_coef.abs()) / (4.0 * p.t);
        r.powi(self.k as i32 - 1) * j_scalar(r).powf(p.alpha) * (-expo).exp()
    }

    /// Value of the profile integral (without any prefactor).
    pub fn integrate(&self, p: &Profile) -> Result<KernelValue> {
        if p.freq.len() != self.k {
            return Err(Error::Dimension(format!(
                "frequency vector must have length {}",
                self.k
            )));
        }
        if !(p.t > 0.0 && p.t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t must be positive and finite, got {}",
                p.t
            )));
        }
        if !(p.alpha > 0.0) || p.a_coef < p.b_coef.abs() {
            return Err(Error::InvalidArgument("profile needs alpha > 0 and A >= |B|".into()));
        }
        let (total, r_tail) = self.totals(p.alpha);
        let target = 0.1 * self.cfg.rel_tol * total;
        let tail_bound = envelope_tail(self.k, 1.0, p.alpha, r_tail);
        let radius = if self.cfg.truncation_radius.is_some() {
            if tail_bound > target {
                return Err(Error::TruncationTooSmall {
                    radius: r_tail,
                    tail: tail_bound / total,
                    target: self.cfg.rel_tol,
                });
            }
            r_tail
        } else {
            let step = r_tail / SCAN_SAMPLES as f64;
            let env: Vec<f64> = (0..=SCAN_SAMPLES).map(|s| self.envelope(p, s as f64 * step)).collect();
            quantize_radius(
                scan_radius(&env, step, PROFILE_MARGIN * sphere_area(self.k), target).max(2.0 * step),
                r_tail,
            )
        };
        let w = p.freq.iter().map(|x| x * x).sum::<f64>().sqrt() / p.t;
        let g = (p.a_coef + p.b_coef.abs()) / (4.0 * p.t);
        let mut h: f64 = 4.0;
        if w > 0.0 {
            h = h.min(6.0 / w);
        }
        if g > 0.0 {
            h = h.min(12.0 / g);
        }
        let angular = 0.55 * radius * w + 12.0;
        let plan = Plan {
            angular: ladder_ceil(angular.max(self.cfg.nodes_per_dim as f64)),
            panels: ladder_ceil(radius / h),
            radius,
        };
        let mut cfg = self.cfg.clone();
        cfg.method = Method::Spherical;
        let red = refine(&cfg, self.k, p.t, plan, total, tail_bound, |plan, half| {
            let (rs, ws) = radial_nodes(plan.radius, plan.panels);
            let env: Vec<f64> = rs.iter().zip(&ws).map(|(&r, &w)| w * self.envelope(p, r)).collect();
            let dirs = self.directions(plan.angular, half);
            let (mut re, mut im) = (0.0, 0.0);
            for (omega, wd) in dirs.iter() {
                let a: f64 = omega.iter().zip(&p.freq).map(|(o, b)| o * b).sum::<f64>() / p.t;
                let (mut sr, mut si) = (0.0, 0.0);
                if a == 0.0 {
                    sr = env.iter().sum();
                } else if half {
                    for (&r, &e) in rs.iter().zip(&env) {
                        sr += e * (r * a).cos();
                    }
                } else {
                    for (&r, &e) in rs.iter().zip(&env) {
                        let (s, c) = (r * a).sin_cos();
                        sr += e * c;
                        si += e * s;
                    }
                }
                re += wd * sr;
                im += wd * si;
            }
            Ok((re, im))
        })?;
        let gauss = (-(p.a_coef - p.b_coef.abs()) / (4.0 * p.t)).exp();
        Ok(KernelValue {
            value: gauss * red.value,
            imag_residue: gauss * red.imag,
            est_error: gauss * red.est_error,
        })
    }
}

/// One-shot heat kernel evaluation.
pub fn heat_eval(
    spec: &GroupSpec,
    g: &GroupPoint,
    gp: &GroupPoint,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<KernelValue> {
    KernelEvaluator::new(spec, cfg.clone())?.heat(g, gp, t)
}

/// One-shot Heisenberg-type evaluation.
pub fn heisenberg_type_eval(
    spec: &GroupSpec,
    g: &GroupPoint,
    gp: &GroupPoint,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<KernelValue> {
    if !spec.is_heisenberg_type() {
        return Err(Error::NotHeisenbergType);
    }
    KernelEvaluator::new(spec, cfg.clone())?.heisenberg_type(g, gp, t)
}

/// One-shot Green function evaluation.
pub fn green_eval(
    spec: &GroupSpec,
    g: &GroupPoint,
    gp: &GroupPoint,
    cfg: &QuadratureConfig,
    gcfg: &GreenConfig,
) -> Result<GreenValue> {
    KernelEvaluator::new(spec, cfg.clone())?.green(g, gp, gcfg)
}
