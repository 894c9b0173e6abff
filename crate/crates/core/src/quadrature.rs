//! Quadrature building blocks: Gauss–Legendre rules, composite panels,
//! adaptive Gauss–Kronrod, and product rules on spheres.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre recurrence.
    pub fn compute(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pm = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * pn - pm) / (x * x - 1.0);
    (pn, d)
}

/// Memoized Gauss–Legendre rule of order `n`.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
        .clone()
}

/// Composite Gauss–Legendre nodes on [a, b] split into `panels` equal panels.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let c = lo + 0.5 * width;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(c + 0.5 * width * x);
            ws.push(0.5 * width * w);
        }
    }
    (xs, ws)
}

const GK15_XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK15_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gk15_segment<F>(f: &mut F, a: f64, b: f64, dim: usize) -> Result<Segment>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    f(c, &mut buf)?;
    for d in 0..dim {
        kronrod[d] = GK15_WGK[7] * buf[d];
        gauss[d] = GK15_WG[3] * buf[d];
    }
    for i in 0..7 {
        let dx = h * GK15_XGK[i];
        for x in [c - dx, c + dx] {
            f(x, &mut buf)?;
            for d in 0..dim {
                kronrod[d] += GK15_WGK[i] * buf[d];
                if i % 2 == 1 {
                    gauss[d] += GK15_WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..dim {
        kronrod[d] *= h;
        gauss[d] *= h;
        error = error.max((kronrod[d] - gauss[d]).abs());
    }
    Ok(Segment {
        a,
        b,
        value: kronrod,
        error,
    })
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Adaptive<T> {
    pub value: T,
    pub est_error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss–Kronrod (7/15) for vector-valued integrands.
///
/// Bisects the segment with the largest error until the summed error drops
/// below `max(abs_tol, rel_tol * |I|_inf)`.
pub fn adaptive_gk15_vec<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Adaptive<Vec<f64>>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut segments = vec![gk15_segment(&mut f, a, b, dim)?];
    let mut evaluations = 15;
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        for s in &segments {
            for (t, v) in total.iter_mut().zip(&s.value) {
                *t += v;
            }
            err += s.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = abs_tol.max(rel_tol * scale);
        if err <= target {
            return Ok(Adaptive {
                value: total,
                est_error: err,
                evaluations,
            });
        }
        if segments.len() >= max_segments {
            return Err(Error::NonConvergence {
                what: "adaptive Gauss-Kronrod",
                est_error: err,
                target,
            });
        }
        let (worst, _) =
            segments.iter().enumerate().fold(
                (0, -1.0),
                |(bi, be), (i, s)| if s.error > be { (i, s.error) } else { (bi, be) },
            );
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(gk15_segment(&mut f, s.a, mid, dim)?);
        segments.push(gk15_segment(&mut f, mid, s.b, dim)?);
        evaluations += 30;
    }
}

/// Scalar convenience wrapper around [`adaptive_gk15_vec`].
pub fn adaptive_gk15<F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Adaptive<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = adaptive_gk15_vec(
        |x, out: &mut [f64]| {
            out[0] = f(x)?;
            Ok(())
        },
        1,
        a,
        b,
        abs_tol,
        rel_tol,
        max_segments,
    )?;
    Ok(Adaptive {
        value: r.value[0],
        est_error: r.est_error,
        evaluations: r.evaluations,
    })
}

/// A weighted direction on the unit sphere S^{k-1}.
#[derive(Debug, Clone)]
pub struct Direction {
    pub omega: Vec<f64>,
    pub weight: f64,
}

/// Surface area of S^{k-1}.
pub fn sphere_area(k: usize) -> f64 {
    let kf = k as f64;
    2.0 * PI.powf(kf / 2.0) / crate::special::gamma(kf / 2.0)
}

/// Product rule on S^{k-1} in hyperspherical coordinates.
///
/// `n` (even) is the number of nodes for every polar angle; the azimuth gets
/// `2n` equispaced nodes. With `half = true` only the hemisphere
/// `omega[0] > 0` is kept and weights are doubled, which integrates any
/// antipodally even function exactly as the full rule would.
pub fn sphere_rule(k: usize, n: usize, half: bool) -> Vec<Direction> {
    assert!(k >= 1);
    if k == 1 {
        return if half {
            vec![Direction {
                omega: vec![1.0],
                weight: 2.0,
            }]
        } else {
            vec![
                Direction {
                    omega: vec![1.0],
                    weight: 1.0,
                },
                Direction {
                    omega: vec![-1.0],
                    weight: 1.0,
                },
            ]
        };
    }
    let n = n.max(2) + n % 2;
    let n_phi = 2 * n;
    let phis: Vec<f64> = (0..n_phi).map(|j| (j as f64 + 0.5) * PI / n as f64).collect();
    let w_phi = 2.0 * PI / n_phi as f64;

    // Polar angles: (cos theta, sin theta, weight) per angle index.
    let rule = gauss_legendre(n);
    let mut polar: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    for i in 1..=k.saturating_sub(2) {
        let p = (k - 1 - i) as i32;
        // x = cos(theta): weight (1 - x^2)^{(p-1)/2} on [-1, 1]
        let nodes: Vec<(f64, f64, f64)> = if p % 2 == 1 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| (x, (1.0 - x * x).max(0.0).sqrt(), w * (1.0 - x * x).powi((p - 1) / 2)))
                .collect()
        } else {
            // Chebyshev rule of the second kind absorbs the half-integer power
            (1..=n)
                .map(|i| {
                    let th = i as f64 * PI / (n + 1) as f64;
                    let s = th.sin();
                    (th.cos(), s, PI / (n + 1) as f64 * s * s * (s * s).powi((p - 2) / 2))
                })
                .collect()
        };
        polar.push(nodes);
    }

    let mut out = Vec::new();
    let mut idx = vec![0usize; polar.len()];
    loop {
        let mut prefix = Vec::with_capacity(k);
        let mut sin_prod = 1.0;
        let mut weight = w_phi;
        for (a, &i) in idx.iter().enumerate() {
            let (c, s, w) = polar[a][i];
            prefix.push(sin_prod * c);
            sin_prod *= s;
            weight *= w;
        }
        for &phi in &phis {
            let mut omega = prefix.clone();
            omega.push(sin_prod * phi.cos());
            omega.push(sin_prod * phi.sin());
            if half {
                if omega[0] > 0.0 {
                    out.push(Direction {
                        omega,
                        weight: 2.0 * weight,
                    });
                }
            } else {
                out.push(Direction { omega, weight });
            }
        }
        // advance the odometer
        let mut a = 0;
        loop {
            if a == idx.len() {
                return out;
            }
            idx[a] += 1;
            if idx[a] < n {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}
