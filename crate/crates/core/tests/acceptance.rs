//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use step2heat::kernel::{GreenConfig, KernelEvaluator, QuadratureConfig};
use step2heat::ou_mehler::{classical_mehler, covariance_k, mehler_p, HormanderKernel, OUSystem, OscillatorParams};
use step2heat::special::{c_constant, gauge, green_identity_constant, Fractional};
use step2heat::verification::{
    mass_check, mc_vs_kernel, pde_residual, semigroup_check, vertical_identity_check, McConfig, StencilConfig,
    TestFunction,
};
use step2heat::{GroupPoint, GroupSpec};

/// Criterion name and its check.
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_point(rng: &mut ChaCha8Rng, spec: &GroupSpec, half_width: f64) -> GroupPoint {
    let z = (0..spec.m())
        .map(|_| rng.random_range(-half_width..half_width))
        .collect();
    let s = (0..spec.k())
        .map(|_| rng.random_range(-half_width..half_width))
        .collect();
    GroupPoint::new(z, s)
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn builtins() -> Vec<GroupSpec> {
    vec![
        GroupSpec::heisenberg(1),
        GroupSpec::heisenberg(2),
        GroupSpec::quaternionic(),
        GroupSpec::free_step_two(3),
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let h = GroupSpec::heisenberg(1);
    let ev = KernelEvaluator::new(&h, QuadratureConfig::default()).unwrap();
    let e = GroupPoint::identity(&h);
    let mut worst: f64 = 0.0;
    for t in [0.25, 1.0, 4.0] {
        worst = worst.max(rel(ev.heat(&e, &e, t).unwrap().value, 1.0 / (16.0 * t * t)));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-6 && within(elapsed, 1),
        detail: format!("max rel error {worst:.2e} (tol 1e-6), {elapsed:.2?} (limit 1 s)"),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for spec in [GroupSpec::heisenberg(1), GroupSpec::quaternionic()] {
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        for _ in 0..50 {
            let g = random_point(&mut rng, &spec, 1.0);
            let gp = random_point(&mut rng, &spec, 1.0);
            let t = rng.random_range(0.3..3.0);
            let a = ev.heat(&g, &gp, t).unwrap().value;
            let b = ev.heisenberg_type(&g, &gp, t).unwrap().value;
            worst = worst.max(rel(a, b));
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-8 && within(elapsed, 30),
        detail: format!("max rel difference {worst:.2e} over 100 samples (tol 1e-8), {elapsed:.2?} (limit 30 s)"),
    }
}

/// Ten points of H1 with distinct gauge and direction.
fn profile_points() -> Vec<([f64; 2], [f64; 1])> {
    vec![
        ([1.0, 0.0], [0.0]),
        ([0.0, 0.0], [1.0]),
        ([0.3, -0.4], [0.2]),
        ([2.0, 1.0], [-0.7]),
        ([0.1, 0.05], [0.9]),
        ([-0.8, 0.6], [0.5]),
        ([0.5, 0.5], [-0.05]),
        ([1.5, -0.2], [2.0]),
        ([-0.2, -0.9], [-0.3]),
        ([0.05, 0.0], [0.01]),
    ]
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let h = GroupSpec::heisenberg(1);
    let ev = KernelEvaluator::new(&h, QuadratureConfig::default()).unwrap();
    let e = GroupPoint::identity(&h);
    let gc = GreenConfig::default();
    let value = ev
        .green(&GroupPoint::new(vec![1.0, 0.0], vec![0.0]), &e, &gc)
        .unwrap()
        .value;
    let target = 2.0 / PI;
    let value_err = rel(value, target);
    let profile: Vec<f64> = profile_points()
        .iter()
        .map(|(z, s)| {
            ev.green(&GroupPoint::new(z.to_vec(), s.to_vec()), &e, &gc)
                .unwrap()
                .value
                * gauge(z, s).powi(2)
        })
        .collect();
    let spread = profile.iter().map(|p| rel(*p, profile[0])).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    Outcome {
        pass: value_err <= 1e-3 && spread <= 1e-3 && within(elapsed, 120),
        detail: format!(
            "green((1,0),0) = {value:.10} vs 2/pi = {target:.10} (rel error {value_err:.3e}, ratio {:.6}, tol 1e-3); \
             green*N^2 spread {spread:.2e} over 10 points (tol 1e-3), common value {:.10} = 1/(2 pi) * {:.9}; {elapsed:.2?} (limit 120 s)",
            value / target,
            profile[0],
            profile[0] * 2.0 * PI
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = 1 + i % 3;
        let omega: f64 = rng.random_range(0.01..4.0);
        let t: f64 = rng.random_range(0.05..3.0);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let zeta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p = OscillatorParams::new(DMatrix::identity(n, n) * omega.sqrt(), t).unwrap();
        worst = worst.max(rel(
            mehler_p(&p, &z, &zeta).unwrap(),
            classical_mehler(omega, &z, &zeta, t),
        ));
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max rel error {worst:.2e} over 1000 samples (tol 1e-12)"),
    }
}

fn criterion_5() -> Outcome {
    let sys = OUSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_det): (f64, f64) = (0.0, 0.0);
    for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let k = covariance_k(&sys, t).unwrap();
        worst_det = worst_det.max(rel((&k * t).determinant(), t.powi(4) / 12.0));
        let kernel = HormanderKernel::new(&sys, t).unwrap();
        for _ in 0..40 {
            let z = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let zeta = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            // (tK)^{-1} = (12 / t^4) [[t^3/3, -t^2/2], [-t^2/2, t]]
            let d = [zeta[0] - z[0], zeta[1] - z[1] - t * z[0]];
            let quad = 12.0 / t.powi(4) * (t.powi(3) / 3.0 * d[0] * d[0] - t * t * d[0] * d[1] + t * d[1] * d[1]);
            let exact = 12f64.sqrt() / (4.0 * PI * t * t) * (-quad / 4.0).exp();
            worst = worst.max(rel(kernel.eval(&z, &zeta).unwrap(), exact));
        }
    }
    Outcome {
        pass: worst <= 1e-10 && worst_det <= 1e-10,
        detail: format!("kernel max rel error {worst:.2e}, det tK max rel error {worst_det:.2e} (tol 1e-10)"),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut parts = Vec::new();
    let mut pass = true;
    for spec in [GroupSpec::heisenberg(1), GroupSpec::free_step_two(3)] {
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        let e = GroupPoint::identity(&spec);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let g = random_point(&mut rng, &spec, 1.0);
            worst = worst.max(
                pde_residual(&ev, &g, &e, 1.0, &StencilConfig::default())
                    .unwrap()
                    .residual,
            );
        }
        pass &= worst <= 1e-3;
        parts.push(format!("{} max residual {worst:.2e}", spec.name()));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: pass && within(elapsed, 300),
        detail: format!("{} (tol 1e-3), {elapsed:.2?} (limit 300 s)", parts.join(", ")),
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let h = GroupSpec::heisenberg(1);
    let ev = KernelEvaluator::new(&h, QuadratureConfig::default()).unwrap();
    let (mass, _) = mass_check(&ev, 1.0).unwrap();
    let e = GroupPoint::identity(&h);
    let gpp = GroupPoint::new(vec![0.5, -0.3], vec![0.2]);
    let semi = semigroup_check(&ev, &e, &gpp, 0.5, 0.5).unwrap();
    let elapsed = start.elapsed();
    Outcome {
        pass: (mass - 1.0).abs() <= 1e-3 && semi.rel_error <= 1e-2 && within(elapsed, 600),
        detail: format!(
            "mass {mass:.8} (tol 1e-3), semigroup rel error {:.2e} (tol 1e-2), {elapsed:.2?} (limit 600 s)",
            semi.rel_error
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut parts = Vec::new();
    let mut pass = true;
    for spec in builtins() {
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        let q = spec.homogeneous_dimension() as i32;
        let (mut sym, mut left, mut dil): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for i in 0..20 {
            let g = random_point(&mut rng, &spec, 0.8);
            let gp = random_point(&mut rng, &spec, 0.8);
            let h = random_point(&mut rng, &spec, 0.8);
            let t = rng.random_range(0.5..2.0);
            let p = ev.heat(&g, &gp, t).unwrap().value;
            sym = sym.max(rel(ev.heat(&gp, &g, t).unwrap().value, p));
            let hg = spec.multiply(&h, &g).unwrap();
            let hgp = spec.multiply(&h, &gp).unwrap();
            left = left.max(rel(ev.heat(&hg, &hgp, t).unwrap().value, p));
            let r: f64 = if i % 2 == 0 { 0.5 } else { 2.0 };
            let scaled = ev
                .heat(&spec.dilate(r, &g).unwrap(), &spec.dilate(r, &gp).unwrap(), r * r * t)
                .unwrap()
                .value;
            dil = dil.max(rel(scaled, r.powi(-q) * p));
        }
        pass &= sym <= 1e-6 && left <= 1e-6 && dil <= 1e-6;
        parts.push(format!("{}: sym {sym:.1e} left {left:.1e} dil {dil:.1e}", spec.name()));
    }
    Outcome {
        pass,
        detail: format!("{} (tol 1e-6)", parts.join("; ")),
    }
}

fn criterion_9() -> Outcome {
    let ev = KernelEvaluator::new(&GroupSpec::heisenberg(1), QuadratureConfig::default()).unwrap();
    let target = 0.5 / PI.sqrt();
    let d = std::f64::consts::FRAC_1_SQRT_2;
    let values: Vec<f64> = [[1.0, 0.0], [0.0, 1.0], [d, d]]
        .iter()
        .map(|nu| vertical_identity_check(&ev, nu).unwrap())
        .collect();
    let worst = values.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-3,
        detail: format!("values {values:.9?} vs {target:.9}, max abs error {worst:.2e} (tol 1e-3)"),
    }
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let ev = KernelEvaluator::new(&GroupSpec::heisenberg(1), QuadratureConfig::default()).unwrap();
    let mc = McConfig {
        n_paths: 100_000,
        n_steps: 1000,
        seed: 10,
        t: 0.5,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [TestFunction::Gaussian, TestFunction::CosSigma] {
        let r = mc_vs_kernel(&ev, f, &mc).unwrap();
        pass &= r.pass;
        parts.push(format!(
            "{}: mc {:.6} +- {:.1e}, kernel {:.6}, gap {:.2} SE",
            f.name(),
            r.mc_mean,
            r.mc_std_error,
            r.kernel_value,
            (r.mc_mean - r.kernel_value).abs() / r.mc_std_error
        ));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: pass && within(elapsed, 300),
        detail: format!("{}; {elapsed:.2?} (limit 300 s)", parts.join("; ")),
    }
}

fn criterion_11() -> Outcome {
    let h = GroupSpec::heisenberg(1);
    let cfg = QuadratureConfig::default();
    let fr = Fractional::new(&h, cfg.clone()).unwrap();
    let ev = KernelEvaluator::new(&h, cfg).unwrap();
    let e = GroupPoint::identity(&h);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut collapse: f64 = 0.0;
    for _ in 0..20 {
        let g = random_point(&mut rng, &h, 1.0);
        let t = rng.random_range(0.3..3.0);
        let k1 = fr.riesz_k_s(1.0, &g.z, &g.sigma, t).unwrap().value;
        collapse = collapse.max(rel(k1, ev.heisenberg_type(&g, &e, t).unwrap().value));
    }
    let gc = GreenConfig::default();
    let mut pass = collapse <= 1e-8;
    let mut parts = vec![format!("K_1 vs p max rel {collapse:.1e} (tol 1e-8)")];
    for s in [0.25, 0.5, 0.75, 1.0] {
        let ratios: Vec<f64> = profile_points()
            .iter()
            .map(|(z, sg)| {
                let v = fr.fractional_green(s, z, sg, &gc).unwrap().value;
                v / gauge(z, sg).powf(2.0 * s - 4.0)
            })
            .collect();
        let spread = ratios.iter().map(|r| rel(*r, ratios[0])).fold(0.0, f64::max);
        pass &= spread <= 1e-3;
        let to_c = ratios[0] / c_constant(s, 2, 1);
        let mut part = format!("s={s}: spread {spread:.1e}, numeric/C_s {to_c:.9}");
        if s == 1.0 {
            let to_identity = ratios[0] / green_identity_constant(2, 1);
            let verdict = if (to_c - 1.0).abs() <= 1e-3 {
                "C_s"
            } else if (to_identity - 1.0).abs() <= 1e-3 {
                "2/pi identity"
            } else {
                "neither"
            };
            pass &= verdict != "neither";
            part.push_str(&format!(", numeric/(2/pi) {to_identity:.9}, matches {verdict}"));
        }
        parts.push(part);
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("H1 diagonal closed value", criterion_1),
        ("dual-path agreement", criterion_2),
        ("Folland-Kaplan identity", criterion_3),
        ("Mehler reduction", criterion_4),
        ("Kolmogorov kernel", criterion_5),
        ("PDE residual", criterion_6),
        ("mass and semigroup", criterion_7),
        ("invariances", criterion_8),
        ("vertical identity", criterion_9),
        ("Monte Carlo concordance", criterion_10),
        ("fractional chain", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        ran += 1;
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            ),
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "acceptance {id:>2} {} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
