//! Baouendi–Grushin kernels, the extension and fractional kernels on groups of
//! Heisenberg type, and the homogeneous gauge.

use std::f64::consts::PI;

pub use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::group::{GroupPoint, GroupSpec};
use crate::kernel::{
    green_time_integral, prefactor, prefactor_with_exponent, GreenConfig, GreenValue, KernelValue, Profile,
    ProfileEvaluator, QuadratureConfig,
};

/// The gauge `N = (|z|^4 + 16 |sigma|^2)^{1/4}`.
pub fn gauge(z: &[f64], sigma: &[f64]) -> f64 {
    let z2: f64 = z.iter().map(|x| x * x).sum();
    let s2: f64 = sigma.iter().map(|x| x * x).sum();
    (z2 * z2 + 16.0 * s2).sqrt().sqrt()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Heat kernel and Green function of `Delta_w + (|w|^2/4) Delta_sigma` on
/// `R^n x R^k`.
#[derive(Debug)]
pub struct BaouendiGrushin {
    n: usize,
    k: usize,
    profile: ProfileEvaluator,
}

impl BaouendiGrushin {
    pub fn new(n: usize, k: usize, cfg: QuadratureConfig) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        Ok(Self {
            n,
            k,
            profile: ProfileEvaluator::new(k, cfg)?,
        })
    }

    fn check(&self, w: &[f64], wp: &[f64], sigma: &[f64], sigmap: &[f64]) -> Result<()> {
        if w.len() != self.n || wp.len() != self.n || sigma.len() != self.k || sigmap.len() != self.k {
            return Err(Error::Dimension(format!(
                "expected points in R^{} x R^{}",
                self.n, self.k
            )));
        }
        Ok(())
    }

    pub fn heat(&self, w: &[f64], wp: &[f64], sigma: &[f64], sigmap: &[f64], t: f64) -> Result<KernelValue> {
        self.check(w, wp, sigma, sigmap)?;
        let cross: f64 = w.iter().zip(wp).map(|(a, b)| a * b).sum();
        let profile = Profile {
            alpha: self.n as f64 / 2.0,
            a_coef: norm2(w) + norm2(wp),
            b_coef: 2.0 * cross,
            freq: sigmap.iter().zip(sigma).map(|(a, b)| a - b).collect(),
            t,
        };
        let v = self.profile.integrate(&profile)?;
        let c = prefactor(self.n, self.k, t);
        Ok(KernelValue {
            value: c * v.value,
            imag_residue: c * v.imag_residue,
            est_error: c * v.est_error,
        })
    }

    /// Time scale used to place the logarithmic time grid.
    fn scale(&self, w: &[f64], wp: &[f64], ds: &[f64]) -> f64 {
        let dw: Vec<f64> = w.iter().zip(wp).map(|(a, b)| a - b).collect();
        let n = gauge(&dw, ds);
        let spread = w.iter().chain(wp).map(|x| x.abs()).fold(0.0, f64::max);
        let sig = norm2(ds).sqrt();
        if sig > 0.0 && spread > 0.0 {
            n.min((sig / spread).sqrt())
        } else {
            n
        }
    }

    pub fn green(
        &self,
        w: &[f64],
        wp: &[f64],
        sigma: &[f64],
        sigmap: &[f64],
        gcfg: &GreenConfig,
    ) -> Result<GreenValue> {
        self.check(w, wp, sigma, sigmap)?;
        let ds: Vec<f64> = sigma.iter().zip(sigmap).map(|(a, b)| a - b).collect();
        let scale = self.scale(w, wp, &ds);
        if scale == 0.0 {
            return Err(Error::PoleAtSource);
        }
        let decay = self.n as f64 / 2.0 + self.k as f64;
        green_time_integral(scale, decay, 1.0, gcfg, |t| {
            self.heat(w, wp, sigma, sigmap, t).map(|v| (v.value, v.est_error))
        })
    }
}

/// Baouendi–Grushin heat kernel, one-shot.
#[allow(clippy::too_many_arguments)]
pub fn bg_heat(
    n: usize,
    k: usize,
    w: &[f64],
    wp: &[f64],
    sigma: &[f64],
    sigmap: &[f64],
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<KernelValue> {
    BaouendiGrushin::new(n, k, cfg.clone())?.heat(w, wp, sigma, sigmap, t)
}

/// Baouendi–Grushin Green function, one-shot.
pub fn bg_green(
    n: usize,
    k: usize,
    (w, sigma): (&[f64], &[f64]),
    (wp, sigmap): (&[f64], &[f64]),
    cfg: &QuadratureConfig,
    gcfg: &GreenConfig,
) -> Result<GreenValue> {
    BaouendiGrushin::new(n, k, cfg.clone())?.green(w, wp, sigma, sigmap, gcfg)
}

/// Order `s` and extension variable `y` of the fractional kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalParams {
    s: f64,
    y: f64,
}

impl FractionalParams {
    pub fn new(s: f64, y: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidArgument(format!("s must lie in (0, 1], got {s}")));
        }
        if !(y >= 0.0 && y.is_finite()) {
            return Err(Error::InvalidArgument(format!("y must be nonnegative, got {y}")));
        }
        Ok(Self { s, y })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

/// Which constant multiplies `N^{2s - Q}` in the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantSource {
    /// `C_s(m, k)` of the fractional closed form.
    Fractional,
    /// The constant of the `int_0^inf p dt` identity; defined for `s = 1` only.
    GreenIdentity,
}

/// `C_s(m,k) = 2^{m/2+2k-3s-1} Gamma((m/2+1-s)/2) Gamma((m/2+k-s)/2) / (pi^{(m+k+1)/2} Gamma(s))`.
pub fn c_constant(s: f64, m: usize, k: usize) -> f64 {
    let (m, k) = (m as f64, k as f64);
    2f64.powf(m / 2.0 + 2.0 * k - 3.0 * s - 1.0) * gamma(0.5 * (m / 2.0 + 1.0 - s)) * gamma(0.5 * (m / 2.0 + k - s))
        / (PI.powf((m + k + 1.0) / 2.0) * gamma(s))
}

/// `2^{m/2+2k-2} Gamma(m/4) Gamma((m/2+k-1)/2) / pi^{(m+k+1)/2}`.
pub fn green_identity_constant(m: usize, k: usize) -> f64 {
    let (m, k) = (m as f64, k as f64);
    2f64.powf(m / 2.0 + 2.0 * k - 2.0) * gamma(m / 4.0) * gamma(0.5 * (m / 2.0 + k - 1.0))
        / PI.powf((m + k + 1.0) / 2.0)
}

/// `constant * N(z, sigma)^{2s - Q}`.
pub fn closed_form_e_s(spec: &GroupSpec, s: f64, z: &[f64], sigma: &[f64], source: ConstantSource) -> Result<f64> {
    if !spec.is_heisenberg_type() {
        return Err(Error::NotHeisenbergType);
    }
    FractionalParams::new(s, 0.0)?;
    let n = gauge(z, sigma);
    if n == 0.0 {
        return Err(Error::PoleAtSource);
    }
    let c = match source {
        ConstantSource::Fractional => c_constant(s, spec.m(), spec.k()),
        ConstantSource::GreenIdentity => {
            if s != 1.0 {
                return Err(Error::InvalidArgument(
                    "the Green identity constant is defined for s = 1".into(),
                ));
            }
            green_identity_constant(spec.m(), spec.k())
        }
    };
    Ok(c * n.powf(2.0 * s - spec.homogeneous_dimension() as f64))
}

/// Extension kernel `q_s`, the Riesz-type kernel `K_s` and the numeric
/// fractional fundamental solution on a group of Heisenberg type, with the
/// pole at the identity.
#[derive(Debug)]
pub struct Fractional {
    spec: GroupSpec,
    profile: ProfileEvaluator,
}

impl Fractional {
    pub fn new(spec: &GroupSpec, cfg: QuadratureConfig) -> Result<Self> {
        if !spec.is_heisenberg_type() {
            return Err(Error::NotHeisenbergType);
        }
        Ok(Self {
            spec: spec.clone(),
            profile: ProfileEvaluator::new(spec.k(), cfg)?,
        })
    }

    fn check(&self, z: &[f64], sigma: &[f64]) -> Result<()> {
        if z.len() != self.spec.m() || sigma.len() != self.spec.k() {
            return Err(Error::Dimension(format!(
                "expected a point in R^{} x R^{}",
                self.spec.m(),
                self.spec.k()
            )));
        }
        Ok(())
    }

    pub fn extension_q_s(&self, p: FractionalParams, z: &[f64], sigma: &[f64], t: f64) -> Result<KernelValue> {
        self.check(z, sigma)?;
        let m = self.spec.m() as f64;
        let k = self.spec.k();
        let alpha = m / 2.0 + 1.0 - p.s;
        let profile = Profile {
            alpha,
            a_coef: norm2(z) + p.y * p.y,
            b_coef: 0.0,
            freq: sigma.iter().map(|x| -x).collect(),
            t,
        };
        let v = self.profile.integrate(&profile)?;
        let c = prefactor_with_exponent(k, alpha + k as f64, t);
        Ok(KernelValue {
            value: c * v.value,
            imag_residue: c * v.imag_residue,
            est_error: c * v.est_error,
        })
    }

    pub fn riesz_k_s(&self, s: f64, z: &[f64], sigma: &[f64], t: f64) -> Result<KernelValue> {
        let q = self.extension_q_s(FractionalParams::new(s, 0.0)?, z, sigma, t)?;
        let c = (4.0 * PI * t).powf(1.0 - s);
        Ok(KernelValue {
            value: c * q.value,
            imag_residue: c * q.imag_residue,
            est_error: c * q.est_error,
        })
    }

    /// `(1/Gamma(s)) int_0^inf t^{s-1} K_s(z, sigma, t) dt`, split at `t = N^2`.
    pub fn fractional_green(&self, s: f64, z: &[f64], sigma: &[f64], gcfg: &GreenConfig) -> Result<GreenValue> {
        self.check(z, sigma)?;
        FractionalParams::new(s, 0.0)?;
        let n = gauge(z, sigma);
        if n == 0.0 {
            return Err(Error::PoleAtSource);
        }
        let decay = self.spec.m() as f64 / 2.0 + self.spec.k() as f64;
        let g = green_time_integral(n, decay, s, gcfg, |t| {
            self.riesz_k_s(s, z, sigma, t).map(|v| (v.value, v.est_error))
        })?;
        let gs = gamma(s);
        Ok(GreenValue {
            value: g.value / gs,
            est_error: g.est_error / gs,
        })
    }
}

/// Extension kernel, one-shot.
pub fn extension_q_s(
    spec: &GroupSpec,
    p: FractionalParams,
    z: &[f64],
    sigma: &[f64],
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<KernelValue> {
    Fractional::new(spec, cfg.clone())?.extension_q_s(p, z, sigma, t)
}

/// `K_s`, one-shot.
pub fn riesz_k_s(
    spec: &GroupSpec,
    s: f64,
    z: &[f64],
    sigma: &[f64],
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<KernelValue> {
    Fractional::new(spec, cfg.clone())?.riesz_k_s(s, z, sigma, t)
}

/// Numeric fractional fundamental solution, one-shot.
pub fn fractional_green(
    spec: &GroupSpec,
    s: f64,
    g: &GroupPoint,
    cfg: &QuadratureConfig,
    gcfg: &GreenConfig,
) -> Result<GreenValue> {
    Fractional::new(spec, cfg.clone())?.fractional_green(s, &g.z, &g.sigma, gcfg)
}
