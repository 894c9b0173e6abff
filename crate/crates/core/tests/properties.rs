//! Randomized invariants of the group structure, the matrix functions and the
//! kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use step2heat::kernel::{KernelEvaluator, QuadratureConfig};
use step2heat::matrix_functions::{a_of, expm, spectral};
use step2heat::ou_mehler::{covariance_k_with, CovarianceRoute, OUSystem};
use step2heat::{GroupPoint, GroupSpec, HorizontalOperator};

fn builtins() -> Vec<GroupSpec> {
    vec![
        GroupSpec::heisenberg(1),
        GroupSpec::heisenberg(2),
        GroupSpec::quaternionic(),
        GroupSpec::free_step_two(3),
    ]
}

fn point(spec: &GroupSpec, v: &[f64]) -> GroupPoint {
    let (m, k) = (spec.m(), spec.k());
    GroupPoint::new(v[..m].to_vec(), v[m..m + k].to_vec())
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 8)
}

fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
    a.coords()
        .iter()
        .zip(b.coords())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn group_law_is_associative(a in coords(), b in coords(), c in coords()) {
        for spec in builtins() {
            let (g, h, w) = (point(&spec, &a), point(&spec, &b), point(&spec, &c));
            let left = spec.multiply(&spec.multiply(&g, &h).unwrap(), &w).unwrap();
            let right = spec.multiply(&g, &spec.multiply(&h, &w).unwrap()).unwrap();
            prop_assert!(close(&left, &right, 1e-12));
        }
    }

    #[test]
    fn kaplan_map_is_skew(lambda in coords(), z in coords()) {
        for spec in builtins() {
            let l = &lambda[..spec.k()];
            let zz = &z[..spec.m()];
            let j = spec.j_of(l);
            let jz = &j * DMatrix::from_column_slice(spec.m(), 1, zz);
            let form: f64 = jz.iter().zip(zz).map(|(a, b)| a * b).sum();
            prop_assert!(form.abs() <= 1e-12 * norm(l) * norm(zz).powi(2) + 1e-300);
        }
    }

    #[test]
    fn dilations_are_automorphisms(a in coords(), b in coords(), r in 0.1f64..5.0) {
        for spec in builtins() {
            let (g, h) = (point(&spec, &a), point(&spec, &b));
            let left = spec.dilate(r, &spec.multiply(&g, &h).unwrap()).unwrap();
            let right = spec.multiply(&spec.dilate(r, &g).unwrap(), &spec.dilate(r, &h).unwrap()).unwrap();
            prop_assert!(close(&left, &right, 1e-12));
            let inv = spec.multiply(&g, &spec.inverse(&g)).unwrap();
            prop_assert!(inv.coords().iter().all(|x| x.abs() < 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sigma_block_is_symmetric_psd(z in coords()) {
        for spec in builtins() {
            let op = HorizontalOperator::new(spec.clone());
            let s = op.sigma_block(&z[..spec.m()]);
            prop_assert!((&s - s.transpose()).amax() < 1e-14);
            let ev = s.symmetric_eigen().eigenvalues;
            prop_assert!(ev.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn x_coth_eigenvalues_dominate_one(lambda in coords()) {
        for spec in builtins() {
            let sd = spectral(&spec, &lambda[..spec.k()]).unwrap();
            prop_assert!(sd.x_coth_values.iter().all(|&x| x >= 1.0 - 1e-14));
            prop_assert!(sd.j_values.iter().all(|&x| x > 0.0 && x <= 1.0 + 1e-14));
        }
    }

    #[test]
    fn a_is_quadratically_homogeneous(lambda in coords(), c in -4.0f64..4.0) {
        prop_assume!(c.abs() > 1e-3);
        for spec in builtins() {
            let l = &lambda[..spec.k()];
            let cl: Vec<f64> = l.iter().map(|x| c * x).collect();
            let a = a_of(&spec, l);
            let ac = a_of(&spec, &cl);
            prop_assert!((&ac - &a * (c * c)).amax() <= 1e-10 * (c * c) * a.amax().max(1e-300));
            let s1 = spectral(&spec, l).unwrap().sqrt_eigenvalues;
            let s2 = spectral(&spec, &cl).unwrap().sqrt_eigenvalues;
            let top = s1.iter().fold(0.0f64, |a, &b| a.max(b));
            for (x, y) in s1.iter().zip(&s2) {
                prop_assert!((y - c.abs() * x).abs() <= 1e-10 * c.abs() * top.max(1e-300));
            }
        }
    }

    #[test]
    fn rotation_identity_on_the_range(lambda in coords()) {
        for spec in builtins() {
            let l = &lambda[..spec.k()];
            let m = spec.m();
            let j = spec.j_of(l);
            let sd = spectral(&spec, l).unwrap();
            let v = &sd.eigenvectors;
            let fun = |f: &dyn Fn(f64) -> f64| {
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(m, sd.sqrt_eigenvalues.iter().map(|&x| f(x))));
                v * d * v.transpose()
            };
            let cosh = fun(&|x| x.cosh());
            let inv_j = fun(&|x| if x == 0.0 { 1.0 } else { x.sinh() / x });
            let lhs = expm(&j.map(|x| Complex64::new(0.0, -x)));
            let rhs = cosh.map(|x| Complex64::new(x, 0.0)) - (inv_j * &j).map(|x| Complex64::new(0.0, x));
            prop_assert!((lhs - rhs).iter().all(|d| d.norm() < 1e-9 * (1.0 + norm(l)).exp()));
        }
    }

    #[test]
    fn oscillator_covariance_closed_form(d in prop::collection::vec(-1.0f64..1.0, 9), t in 0.05f64..3.0) {
        let b = DMatrix::from_row_slice(3, 3, &d);
        let dd = (&b * b.transpose()) * 0.5;
        let sys = OUSystem::from_oscillator(&dd).unwrap();
        let q = covariance_k_with(&sys, t, CovarianceRoute::Quadrature).unwrap();
        let c = covariance_k_with(&sys, t, CovarianceRoute::ClosedForm).unwrap();
        prop_assert!((&q - &c).amax() <= 1e-10 * c.amax());
    }
}

fn kernel_sample(spec: &GroupSpec, v: &[f64]) -> (GroupPoint, GroupPoint, f64) {
    let (m, k) = (spec.m(), spec.k());
    let g = GroupPoint::new(v[..m].to_vec(), v[8..8 + k].to_vec());
    let gp = GroupPoint::new(v[4..4 + m].to_vec(), v[11..11 + k].to_vec());
    (g, gp, 0.4 + v[14].abs())
}

#[test]
fn kernel_is_positive_with_clean_diagnostics() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for spec in builtins() {
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        for _ in 0..1000 {
            let v: Vec<f64> = (0..15).map(|_| rng.random_range(-0.8..0.8)).collect();
            let (g, gp, t) = kernel_sample(&spec, &v);
            let p = ev.heat(&g, &gp, t).unwrap();
            assert!(p.value > 0.0, "{}: {p:?}", spec.name());
            assert!(p.value >= -p.est_error);
            let diag = ev.diagonal(t).unwrap();
            assert!(
                p.imag_residue <= 1e-8 * p.value.abs().max(diag),
                "{}: {p:?}",
                spec.name()
            );
        }
    }
}

#[test]
fn kernel_is_left_invariant() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for spec in builtins() {
        let ev = KernelEvaluator::new(&spec, QuadratureConfig::default()).unwrap();
        for _ in 0..20 {
            let v: Vec<f64> = (0..15).map(|_| rng.random_range(-0.8..0.8)).collect();
            let h: Vec<f64> = (0..8).map(|_| rng.random_range(-0.8..0.8)).collect();
            let (g, gp, t) = kernel_sample(&spec, &v);
            let h = point(&spec, &h);
            let a = ev.heat(&g, &gp, t).unwrap().value;
            let b = ev
                .heat(&spec.multiply(&h, &g).unwrap(), &spec.multiply(&h, &gp).unwrap(), t)
                .unwrap()
                .value;
            assert!((a - b).abs() <= 1e-8 * a, "{}: {a} {b}", spec.name());
        }
    }
}
