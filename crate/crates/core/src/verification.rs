//! Independent checks of the kernels: a finite-difference realization of the
//! horizontal Laplacian, Monte Carlo simulation of the horizontal diffusion,
//! and integral identities (mass, semigroup, vertical hyperplanes).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::{GroupPoint, GroupSpec, HorizontalOperator};
use crate::kernel::{KernelEvaluator, Plan};
use crate::quadrature::composite_gauss_legendre;

/// Step sizes for the central-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilConfig {
    pub h_z: f64,
    pub h_sigma: f64,
    pub h_t: f64,
    /// Combine steps `h` and `h/2` as `(4 L(h/2) - L(h)) / 3`.
    pub richardson: bool,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self {
            h_z: 0.05,
            h_sigma: 0.05,
            h_t: 0.02,
            richardson: true,
        }
    }
}

impl StencilConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_z > 0.0 && self.h_sigma > 0.0 && self.h_t > 0.0) {
            return Err(Error::InvalidArgument("stencil steps must be positive".into()));
        }
        Ok(())
    }
}

fn shifted(g: &GroupPoint, dz: &[(usize, f64)], ds: &[(usize, f64)]) -> GroupPoint {
    let mut p = g.clone();
    for &(i, h) in dz {
        p.z[i] += h;
    }
    for &(l, h) in ds {
        p.sigma[l] += h;
    }
    p
}

fn apply_l_once<F>(op: &HorizontalOperator, f: &F, g: &GroupPoint, hz: f64, hs: f64) -> Result<f64>
where
    F: Fn(&GroupPoint) -> Result<f64>,
{
    let spec = op.spec();
    let (m, k) = (spec.m(), spec.k());
    let f0 = f(g)?;
    let mut total = 0.0;
    for i in 0..m {
        let fp = f(&shifted(g, &[(i, hz)], &[]))?;
        let fm = f(&shifted(g, &[(i, -hz)], &[]))?;
        total += (fp - 2.0 * f0 + fm) / (hz * hz);
    }
    let sig = op.sigma_block(&g.z);
    for l in 0..k {
        for lp in l..k {
            let c = sig[(l, lp)];
            if c == 0.0 {
                continue;
            }
            let d2 = if l == lp {
                let fp = f(&shifted(g, &[], &[(l, hs)]))?;
                let fm = f(&shifted(g, &[], &[(l, -hs)]))?;
                (fp - 2.0 * f0 + fm) / (hs * hs)
            } else {
                let pp = f(&shifted(g, &[], &[(l, hs), (lp, hs)]))?;
                let pm = f(&shifted(g, &[], &[(l, hs), (lp, -hs)]))?;
                let mp = f(&shifted(g, &[], &[(l, -hs), (lp, hs)]))?;
                let mm = f(&shifted(g, &[], &[(l, -hs), (lp, -hs)]))?;
                // symmetric block: the off-diagonal pair appears twice
                2.0 * (pp - pm - mp + mm) / (4.0 * hs * hs)
            };
            total += c * d2;
        }
    }
    let theta = op.theta_block(&g.z);
    for l in 0..k {
        for s in 0..m {
            let c = theta[(l, s)];
            if c == 0.0 {
                continue;
            }
            let pp = f(&shifted(g, &[(s, hz)], &[(l, hs)]))?;
            let pm = f(&shifted(g, &[(s, hz)], &[(l, -hs)]))?;
            let mp = f(&shifted(g, &[(s, -hz)], &[(l, hs)]))?;
            let mm = f(&shifted(g, &[(s, -hz)], &[(l, -hs)]))?;
            total += c * (pp - pm - mp + mm) / (4.0 * hz * hs);
        }
    }
    Ok(total)
}

/// Central-difference horizontal Laplacian of `f` at `g`.
pub fn apply_l<F>(op: &HorizontalOperator, f: F, g: &GroupPoint, cfg: &StencilConfig) -> Result<f64>
where
    F: Fn(&GroupPoint) -> Result<f64>,
{
    cfg.validate()?;
    let coarse = apply_l_once(op, &f, g, cfg.h_z, cfg.h_sigma)?;
    if !cfg.richardson {
        return Ok(coarse);
    }
    let fine = apply_l_once(op, &f, g, cfg.h_z / 2.0, cfg.h_sigma / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn time_derivative<F>(f: F, t: f64, h: f64, richardson: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let central = |h: f64| -> Result<f64> { Ok((f(t + h)? - f(t - h)?) / (2.0 * h)) };
    let coarse = central(h)?;
    if !richardson {
        return Ok(coarse);
    }
    Ok((4.0 * central(h / 2.0)? - coarse) / 3.0)
}

/// Heat equation residual at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual {
    pub l_value: f64,
    pub dt_value: f64,
    /// `|L p - dp/dt| / scale`.
    pub residual: f64,
    /// `p(e, e, t) / t`, the size of `dp/dt` on the diagonal.
    pub scale: f64,
}

/// `(L_g - d/dt) p(g, g', t)`, normalized by `p(e,e,t)/t`. All stencil
/// values share one quadrature plan so the kernel is a smooth function of the
/// stencil point.
pub fn pde_residual(
    ev: &KernelEvaluator,
    g: &GroupPoint,
    gp: &GroupPoint,
    t: f64,
    cfg: &StencilConfig,
) -> Result<PdeResidual> {
    cfg.validate()?;
    if t <= 2.0 * cfg.h_t {
        return Err(Error::InvalidArgument("t must exceed twice the time step".into()));
    }
    let spec = ev.spec();
    // one level above the accepted plan at the centre covers the stencil
    let base = ev.plan(g, gp, t)?;
    let lo = ev.plan(g, gp, t - cfg.h_t)?;
    let plan = Plan {
        angular: base.angular.max(lo.angular),
        panels: base.panels.max(lo.panels),
        radius: ev.truncation_radius(),
    };
    let op = HorizontalOperator::new(spec.clone());
    let l_value = apply_l(&op, |x| ev.heat_with_plan(x, gp, t, &plan), g, cfg)?;
    let dt_value = time_derivative(|s| ev.heat_with_plan(g, gp, s, &plan), t, cfg.h_t, cfg.richardson)?;
    let scale = ev.diagonal(t)? / t;
    Ok(PdeResidual {
        l_value,
        dt_value,
        residual: (l_value - dt_value).abs() / scale,
        scale,
    })
}

/// Residual of the Euclidean factor `(4 pi t)^{-m/2} e^{-|z|^2/4t}` alone,
/// which does not depend on `sigma` and so solves the heat equation exactly.
pub fn gaussian_control_residual(spec: &GroupSpec, g: &GroupPoint, t: f64, cfg: &StencilConfig) -> Result<f64> {
    let m = spec.m() as f64;
    let gauss = |x: &GroupPoint, s: f64| -> f64 {
        let r2: f64 = x.z.iter().map(|v| v * v).sum();
        (4.0 * std::f64::consts::PI * s).powf(-m / 2.0) * (-r2 / (4.0 * s)).exp()
    };
    let op = HorizontalOperator::new(spec.clone());
    let l = apply_l(&op, |x| Ok(gauss(x, t)), g, cfg)?;
    let dt = time_derivative(|s| Ok(gauss(g, s)), t, cfg.h_t, cfg.richardson)?;
    Ok((l - dt).abs() / (gauss(&GroupPoint::identity(spec), t) / t))
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub t: f64,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1000 {
            return Err(Error::InvalidArgument(format!(
                "n_paths must be at least 1000, got {}",
                self.n_paths
            )));
        }
        if self.n_steps < 100 {
            return Err(Error::InvalidArgument(format!(
                "n_steps must be at least 100, got {}",
                self.n_steps
            )));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        Ok(())
    }
}

/// Endpoints of the horizontal diffusion started at the identity.
///
/// Euler–Maruyama for `dZ = sqrt(2) dW`, `d sigma_l = <J_l Z, dW> / sqrt(2)`:
/// the quadratic variations reproduce the three coefficient blocks of the
/// horizontal Laplacian. Path `i` draws from ChaCha8 stream `i` of the seed,
/// so the output does not depend on the thread count.
pub fn mc_sample_paths(spec: &GroupSpec, cfg: &McConfig) -> Result<Vec<GroupPoint>> {
    cfg.validate()?;
    let (m, k) = (spec.m(), spec.k());
    let dt = cfg.t / cfg.n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let js = spec.structure_matrices();
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let mut z = vec![0.0; m];
            let mut sigma = vec![0.0; k];
            let mut dw = vec![0.0; m];
            for _ in 0..cfg.n_steps {
                for x in dw.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *x = sqrt_dt * n;
                }
                for (l, j) in js.iter().enumerate() {
                    let mut inc = 0.0;
                    for r in 0..m {
                        let jz: f64 = (0..m).map(|c| j[(r, c)] * z[c]).sum();
                        inc += jz * dw[r];
                    }
                    sigma[l] += inc * std::f64::consts::FRAC_1_SQRT_2;
                }
                for r in 0..m {
                    z[r] += std::f64::consts::SQRT_2 * dw[r];
                }
            }
            GroupPoint::new(z, sigma)
        })
        .collect();
    Ok(paths)
}

/// Fixed test functions for the Monte Carlo comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    One,
    /// `e^{-|z|^2}`
    Gaussian,
    /// `cos(sigma_1)`
    CosSigma,
}

impl TestFunction {
    pub fn eval(&self, g: &GroupPoint) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Gaussian => (-g.z.iter().map(|x| x * x).sum::<f64>()).exp(),
            TestFunction::CosSigma => g.sigma[0].cos(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Gaussian => "gaussian",
            TestFunction::CosSigma => "cos_sigma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub mc_mean: f64,
    pub mc_std_error: f64,
    pub kernel_value: f64,
    pub kernel_error: f64,
    /// `|mc_mean - kernel_value| <= 3 (mc_std_error + kernel_error)`.
    pub pass: bool,
}

fn require_planar(spec: &GroupSpec) -> Result<()> {
    if spec.m() != 2 || spec.k() != 1 {
        return Err(Error::InvalidArgument(format!(
            "this check runs on groups with m = 2, k = 1 (got m = {}, k = {})",
            spec.m(),
            spec.k()
        )));
    }
    Ok(())
}

/// `int p(e, (z, sigma), t) f(|z|, sigma) dz dsigma` on a group with `m = 2`,
/// `k = 1`, where the kernel is radial in `z` and even in `sigma`.
fn planar_radial_integral<F>(ev: &KernelEvaluator, t: f64, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64,
{
    require_planar(ev.spec())?;
    let e = GroupPoint::identity(ev.spec());
    let j_scale = ev.spec().structure_matrices()[0].amax();
    let rho_max = (4.0 * t * 45.0).sqrt();
    let sigma_max = 40.0 * t / j_scale.max(1e-3) + 2.0;
    let integrate = |panels: usize| -> Result<f64> {
        let (rs, wr) = composite_gauss_legendre(0.0, rho_max, panels, 16);
        let (ss, ws) = composite_gauss_legendre(0.0, sigma_max, panels, 16);
        let mut acc = 0.0;
        for (&rho, &w1) in rs.iter().zip(&wr) {
            for (&s, &w2) in ss.iter().zip(&ws) {
                let g = GroupPoint::new(vec![rho, 0.0], vec![s]);
                let p = ev.heat(&e, &g, t)?.value;
                acc += w1 * w2 * rho * p * f(rho, s);
            }
        }
        Ok(2.0 * std::f64::consts::PI * 2.0 * acc)
    };
    let coarse = integrate(4)?;
    let fine = integrate(6)?;
    Ok((fine, (fine - coarse).abs()))
}

/// Monte Carlo mean of `f` at the endpoints against `int p(e, g', t) f(g') dg'`.
pub fn mc_vs_kernel(ev: &KernelEvaluator, f: TestFunction, mc: &McConfig) -> Result<McReport> {
    let paths = mc_sample_paths(ev.spec(), mc)?;
    let n = paths.len() as f64;
    let values: Vec<f64> = paths.iter().map(|g| f.eval(g)).collect();
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let (kernel_value, kernel_error) = match f {
        TestFunction::One => planar_radial_integral(ev, mc.t, |_, _| 1.0)?,
        TestFunction::Gaussian => planar_radial_integral(ev, mc.t, |rho, _| (-rho * rho).exp())?,
        TestFunction::CosSigma => planar_radial_integral(ev, mc.t, |_, s| s.cos())?,
    };
    Ok(McReport {
        mc_mean: mean,
        mc_std_error: se,
        kernel_value,
        kernel_error,
        pass: (mean - kernel_value).abs() <= 3.0 * (se + kernel_error),
    })
}

/// Total mass `int p(e, g', t) dg'` with a quadrature error estimate.
pub fn mass_check(ev: &KernelEvaluator, t: f64) -> Result<(f64, f64)> {
    planar_radial_integral(ev, t, |_, _| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupReport {
    /// `p(g, g'', t + s)`.
    pub direct: f64,
    /// `int p(g, g', t) p(g', g'', s) dg'`.
    pub composed: f64,
    pub rel_error: f64,
}

/// Chapman–Kolmogorov identity by a tensor Gauss–Legendre rule over `R^3`.
pub fn semigroup_check(
    ev: &KernelEvaluator,
    g: &GroupPoint,
    gpp: &GroupPoint,
    t: f64,
    s: f64,
) -> Result<SemigroupReport> {
    require_planar(ev.spec())?;
    let direct = ev.heat(g, gpp, t + s)?.value;
    let tm = t.max(s);
    let zc: Vec<f64> = g.z.iter().zip(&gpp.z).map(|(a, b)| (a + b) / 2.0).collect();
    let sc = (g.sigma[0] + gpp.sigma[0]) / 2.0;
    let half_gap =
        g.z.iter()
            .zip(&gpp.z)
            .map(|(a, b)| (a - b).abs() / 2.0)
            .fold(0.0, f64::max);
    let zr = (4.0 * tm * 25.0).sqrt() + half_gap;
    let reach = zc.iter().map(|x| x * x).sum::<f64>().sqrt() + zr * std::f64::consts::SQRT_2;
    let lever =
        g.z.iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(gpp.z.iter().map(|x| x * x).sum::<f64>().sqrt());
    let sr = 12.0 * tm + (g.sigma[0] - gpp.sigma[0]).abs() / 2.0 + lever * reach / 2.0;
    let (xs, wx) = composite_gauss_legendre(zc[0] - zr, zc[0] + zr, 5, 8);
    let (ys, wy) = composite_gauss_legendre(zc[1] - zr, zc[1] + zr, 5, 8);
    let (ss, ws) = composite_gauss_legendre(sc - sr, sc + sr, 6, 16);
    let mut acc = 0.0;
    for (&a, &wa) in xs.iter().zip(&wx) {
        for (&b, &wb) in ys.iter().zip(&wy) {
            for (&c, &wc) in ss.iter().zip(&ws) {
                let mid = GroupPoint::new(vec![a, b], vec![c]);
                let p1 = ev.heat(g, &mid, t)?.value;
                if p1.abs() < 1e-300 {
                    continue;
                }
                acc += wa * wb * wc * p1 * ev.heat(&mid, gpp, s)?.value;
            }
        }
    }
    Ok(SemigroupReport {
        direct,
        composed: acc,
        rel_error: (acc - direct).abs() / direct.abs(),
    })
}

/// `int p(g, e, 1) dg` over the vertical hyperplane `{s nu_perp} x R`, which
/// should be `(4 pi)^{-1/2}`.
pub fn vertical_identity_check(ev: &KernelEvaluator, nu: &[f64]) -> Result<f64> {
    require_planar(ev.spec())?;
    let norm = (nu[0] * nu[0] + nu[1] * nu[1]).sqrt();
    if nu.len() != 2 || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("nu must be a unit vector in R^2".into()));
    }
    let perp = [-nu[1], nu[0]];
    let e = GroupPoint::identity(ev.spec());
    let (xs, wx) = composite_gauss_legendre(-14.0, 14.0, 8, 16);
    let (ss, ws) = composite_gauss_legendre(-16.0, 16.0, 12, 16);
    let mut acc = 0.0;
    for (&x, &w1) in xs.iter().zip(&wx) {
        for (&s, &w2) in ss.iter().zip(&ws) {
            let g = GroupPoint::new(vec![x * perp[0], x * perp[1]], vec![s]);
            acc += w1 * w2 * ev.heat(&g, &e, 1.0)?.value;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::QuadratureConfig;

    fn pt(z: &[f64], s: &[f64]) -> GroupPoint {
        GroupPoint::new(z.to_vec(), s.to_vec())
    }

    #[test]
    fn stencil_annihilates_constants() {
        let op = HorizontalOperator::new(GroupSpec::free_step_two(3));
        let g = pt(&[0.3, -0.2, 0.5], &[0.1, 0.4, -0.3]);
        let v = apply_l(&op, |_| Ok(2.5), &g, &StencilConfig::default()).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn stencil_on_squared_norm() {
        for spec in [GroupSpec::heisenberg(1), GroupSpec::quaternionic()] {
            let m = spec.m();
            let op = HorizontalOperator::new(spec);
            let g = pt(&vec![0.4; m], &vec![0.2; op.spec().k()]);
            let v = apply_l(
                &op,
                |x| Ok(x.z.iter().map(|a| a * a).sum()),
                &g,
                &StencilConfig::default(),
            )
            .unwrap();
            assert!((v - 2.0 * m as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn stencil_mixed_term_on_heisenberg() {
        let op = HorizontalOperator::new(GroupSpec::heisenberg(1));
        let g = pt(&[0.7, -0.45], &[0.3]);
        let v = apply_l(&op, |x| Ok(x.z[0] * x.sigma[0]), &g, &StencilConfig::default()).unwrap();
        assert!((v - g.z[1]).abs() < 1e-6);
    }

    #[test]
    fn stencil_is_exact_on_quadratics() {
        let spec = GroupSpec::free_step_two(3);
        let (m, k) = (spec.m(), spec.k());
        let n = m + k;
        // f(x) = x^T H x / 2 + c^T x with x = (z, sigma)
        let h: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| 0.1 * ((i * 3 + j * 3 + i * j) % 7) as f64 - 0.3)
                    .collect()
            })
            .collect();
        let c: Vec<f64> = (0..n).map(|i| 0.2 * i as f64 - 0.5).collect();
        let f = |x: &GroupPoint| -> Result<f64> {
            let v = x.coords();
            let mut s = 0.0;
            for i in 0..n {
                s += c[i] * v[i];
                for j in 0..n {
                    s += 0.5 * h[i][j] * v[i] * v[j];
                }
            }
            Ok(s)
        };
        let g = pt(&[0.3, -0.2, 0.5], &[0.1, 0.4, -0.3]);
        let op = HorizontalOperator::new(spec.clone());
        let sig = op.sigma_block(&g.z);
        let theta = op.theta_block(&g.z);
        let sym = |i: usize, j: usize| 0.5 * (h[i][j] + h[j][i]);
        let mut exact: f64 = (0..m).map(|i| sym(i, i)).sum();
        for l in 0..k {
            for lp in 0..k {
                exact += sig[(l, lp)] * sym(m + l, m + lp);
            }
            for s in 0..m {
                exact += theta[(l, s)] * sym(s, m + l);
            }
        }
        let v = apply_l(&op, f, &g, &StencilConfig::default()).unwrap();
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn heat_equation_residual_on_heisenberg() {
        let spec = GroupSpec::heisenberg(1);
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        let e = GroupPoint::identity(&spec);
        let g = pt(&[0.5, -0.3], &[0.2]);
        let fine = pde_residual(&ev, &g, &e, 1.0, &StencilConfig::default()).unwrap();
        assert!(fine.residual < 1e-5, "{fine:?}");
        let plain = StencilConfig {
            richardson: false,
            ..StencilConfig::default()
        };
        let coarse = pde_residual(&ev, &g, &e, 1.0, &plain).unwrap();
        assert!(coarse.residual >= 2.0 * fine.residual);
    }

    #[test]
    fn gaussian_control_solves_the_heat_equation() {
        let spec = GroupSpec::heisenberg(1);
        let r = gaussian_control_residual(&spec, &pt(&[0.5, -0.3], &[0.2]), 1.0, &StencilConfig::default()).unwrap();
        assert!(r < 1e-6);
    }

    #[test]
    fn mc_config_bounds() {
        let ok = McConfig {
            n_paths: 1000,
            n_steps: 100,
            seed: 1,
            t: 1.0,
        };
        assert!(ok.validate().is_ok());
        assert!(McConfig { n_paths: 999, ..ok }.validate().is_err());
        assert!(McConfig { n_steps: 99, ..ok }.validate().is_err());
        assert!(McConfig { t: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn brownian_moments_on_heisenberg() {
        let spec = GroupSpec::heisenberg(1);
        let t = 0.8;
        let cfg = McConfig {
            n_paths: 20_000,
            n_steps: 100,
            seed: 11,
            t,
        };
        let paths = mc_sample_paths(&spec, &cfg).unwrap();
        let n = paths.len() as f64;
        let stats = |f: &dyn Fn(&GroupPoint) -> f64| {
            let v: Vec<f64> = paths.iter().map(f).collect();
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        };
        let (z2, se) = stats(&|g| g.z.iter().map(|x| x * x).sum());
        assert!((z2 - 4.0 * t).abs() <= 3.0 * se);
        let (s, se) = stats(&|g| g.sigma[0]);
        assert!(s.abs() <= 3.0 * se);
        let (s2, se) = stats(&|g| g.sigma[0] * g.sigma[0]);
        assert!((s2 - t * t).abs() <= 3.0 * se, "{s2} {se}");
    }

    #[test]
    fn paths_are_reproducible() {
        let spec = GroupSpec::free_step_two(3);
        let cfg = McConfig {
            n_paths: 1000,
            n_steps: 100,
            seed: 42,
            t: 0.5,
        };
        let a = mc_sample_paths(&spec, &cfg).unwrap();
        let b = mc_sample_paths(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        let c = mc_sample_paths(&spec, &McConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn heisenberg_mass_is_one() {
        let ev = KernelEvaluator::new(&GroupSpec::heisenberg(1), QuadratureConfig::default()).unwrap();
        let (mass, err) = mass_check(&ev, 1.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-5, "{mass} {err}");
    }

    #[test]
    fn vertical_integral_is_direction_free() {
        let ev = KernelEvaluator::new(&GroupSpec::heisenberg(1), QuadratureConfig::default()).unwrap();
        let target = 0.5 / std::f64::consts::PI.sqrt();
        let d = std::f64::consts::FRAC_1_SQRT_2;
        for nu in [[1.0, 0.0], [0.0, 1.0], [d, d]] {
            let v = vertical_identity_check(&ev, &nu).unwrap();
            assert!((v - target).abs() < 1e-6, "{v}");
        }
        assert!(vertical_identity_check(&ev, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn planar_checks_reject_other_groups() {
        let ev = KernelEvaluator::new(&GroupSpec::free_step_two(3), QuadratureConfig::default()).unwrap();
        assert!(mass_check(&ev, 1.0).is_err());
    }
}
