//! Ornstein–Uhlenbeck kernels with Kalman covariance, and the generalized
//! Mehler kernel of the oscillator `Delta - |Dz|^2`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix_functions::{expm, j_scalar, x_coth};
use crate::quadrature::adaptive_gk15_vec;

/// Generator `tr(Q D^2 u) + <Bz, grad u>`.
#[derive(Debug, Clone, PartialEq)]
pub struct OUSystem {
    q: DMatrix<f64>,
    b: DMatrix<f64>,
}

/// How [`covariance_k`] obtains `K(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceRoute {
    /// Closed form when `B` is symmetric and `Q = I`, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
    ClosedForm,
}

fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    (a - a.transpose()).amax() <= tol * a.amax().max(1.0)
}

impl OUSystem {
    pub fn new(q: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let m = q.nrows();
        if q.ncols() != m || b.nrows() != m || b.ncols() != m {
            return Err(Error::Dimension(format!(
                "Q is {}x{}, B is {}x{}",
                q.nrows(),
                q.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !is_symmetric(&q, 1e-12) {
            return Err(Error::Validation("Q is not symmetric".into()));
        }
        let min_ev = SymmetricEigen::new(q.clone()).eigenvalues.min();
        if min_ev < -1e-12 {
            return Err(Error::Validation(format!(
                "Q is not positive semidefinite (eigenvalue {min_ev:e})"
            )));
        }
        Ok(Self { q, b })
    }

    /// The system with `B = -2D`, `Q = I` that is conjugate to the oscillator.
    pub fn from_oscillator(d: &DMatrix<f64>) -> Result<Self> {
        let m = d.nrows();
        Self::new(DMatrix::identity(m, m), d * -2.0)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    fn closed_form_applies(&self) -> bool {
        let m = self.dim();
        is_symmetric(&self.b, 1e-14) && (&self.q - DMatrix::<f64>::identity(m, m)).amax() == 0.0
    }
}

/// `(1 - e^{-x}) / x`, equal to 1 at zero.
fn one_minus_exp_over(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `K(t) = (1/t) int_0^t e^{sB} Q e^{sB^T} ds`.
pub fn covariance_k(sys: &OUSystem, t: f64) -> Result<DMatrix<f64>> {
    covariance_k_with(sys, t, CovarianceRoute::Auto)
}

pub fn covariance_k_with(sys: &OUSystem, t: f64, route: CovarianceRoute) -> Result<DMatrix<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let closed = match route {
        CovarianceRoute::Auto => sys.closed_form_applies(),
        CovarianceRoute::ClosedForm => {
            if !sys.closed_form_applies() {
                return Err(Error::InvalidArgument("closed form needs symmetric B and Q = I".into()));
            }
            true
        }
        CovarianceRoute::Quadrature => false,
    };
    if closed {
        // B = -2D: K(t) = e^{-tD} j(2tD)^{-1} e^{-tD}, diagonal in the eigenbasis of D
        let d = &sys.b * -0.5;
        let eig = SymmetricEigen::new(d);
        let m = sys.dim();
        let mut diag = DVector::zeros(m);
        for i in 0..m {
            diag[i] = one_minus_exp_over(4.0 * t * eig.eigenvalues[i]);
        }
        let v = &eig.eigenvectors;
        return Ok(v * DMatrix::from_diagonal(&diag) * v.transpose());
    }
    let m = sys.dim();
    let bt = sys.b.transpose();
    let res = adaptive_gk15_vec(
        |s, out| {
            let e = expm(&(&sys.b * s));
            let et = expm(&(&bt * s));
            let v = e * &sys.q * et;
            out.copy_from_slice(v.as_slice());
            Ok(())
        },
        m * m,
        0.0,
        t,
        1e-300,
        1e-14,
        2000,
    )?;
    let k = DMatrix::from_column_slice(m, m, &res.value) / t;
    Ok((&k + k.transpose()) * 0.5)
}

/// Outcome of the Kalman rank test at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanReport {
    pub satisfied: bool,
    pub min_eigenvalue: f64,
}

/// `K(t)` is positive definite relative to its trace.
pub fn kalman_check(sys: &OUSystem, t: f64) -> Result<KalmanReport> {
    let k = covariance_k(sys, t)?;
    Ok(kalman_of(&k))
}

fn kalman_of(k: &DMatrix<f64>) -> KalmanReport {
    let min_eigenvalue = SymmetricEigen::new(k.clone()).eigenvalues.min();
    KalmanReport {
        satisfied: min_eigenvalue > 1e-12 * k.trace(),
        min_eigenvalue,
    }
}

/// Hörmander's kernel at a fixed time, with `K(t)` factored once.
#[derive(Debug, Clone)]
pub struct HormanderKernel {
    t: f64,
    flow: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    prefactor: f64,
}

impl HormanderKernel {
    pub fn new(sys: &OUSystem, t: f64) -> Result<Self> {
        let m = sys.dim();
        let k = covariance_k(sys, t)?;
        let report = kalman_of(&k);
        let failure = Error::KalmanFailure {
            t,
            min_eigenvalue: report.min_eigenvalue,
        };
        if !report.satisfied {
            return Err(failure);
        }
        let chol = Cholesky::new(&k * t).ok_or(failure)?;
        let det_tk: f64 = chol.l().diagonal().iter().map(|x| x * x).product();
        Ok(Self {
            t,
            flow: expm(&(sys.b() * t)),
            chol,
            prefactor: (4.0 * std::f64::consts::PI).powf(-(m as f64) / 2.0) / det_tk.sqrt(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn eval(&self, z: &[f64], zeta: &[f64]) -> Result<f64> {
        let m = self.flow.nrows();
        if z.len() != m || zeta.len() != m {
            return Err(Error::Dimension(format!("points must have length {m}")));
        }
        let diff = DVector::from_column_slice(zeta) - &self.flow * DVector::from_column_slice(z);
        // m_t^2 / 4t = <(tK)^{-1} d, d> / 4
        let quad = diff.dot(&self.chol.solve(&diff));
        Ok(self.prefactor * (-quad / 4.0).exp())
    }
}

/// Hörmander's fundamental solution of `tr(Q D^2) + <Bz, grad> - d/dt`.
pub fn hormander_q(sys: &OUSystem, z: &[f64], zeta: &[f64], t: f64) -> Result<f64> {
    HormanderKernel::new(sys, t)?.eval(z, zeta)
}

/// Fourier transform of the OU solution with initial datum `f`, convention
/// `f_hat(xi) = int f(z) e^{-2 pi i <xi, z>} dz`.
pub fn fourier_hat_oracle<F>(sys: &OUSystem, f_hat: F, xi: &[f64], t: f64) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64,
{
    let m = sys.dim();
    if xi.len() != m {
        return Err(Error::Dimension(format!("xi must have length {m}")));
    }
    let k = covariance_k(sys, t)?;
    let eta = expm(&(sys.b.transpose() * -t)) * DVector::from_column_slice(xi);
    let pi = std::f64::consts::PI;
    let decay = (-t * sys.b.trace() - 4.0 * t * pi * pi * eta.dot(&(&k * &eta))).exp();
    Ok(f_hat(eta.as_slice()) * decay)
}

/// Oscillator `Delta - |D z|^2` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorParams {
    d: DMatrix<f64>,
    t: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl OscillatorParams {
    pub fn new(d: DMatrix<f64>, t: f64) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(Error::Dimension("D must be square".into()));
        }
        if !is_symmetric(&d, 1e-12) {
            return Err(Error::Validation("D is not symmetric".into()));
        }
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        let eig = SymmetricEigen::new((&d + d.transpose()) * 0.5);
        if eig.eigenvalues.min() < -1e-12 * d.amax().max(1.0) {
            return Err(Error::Validation("D is not positive semidefinite".into()));
        }
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().map(|x| x.max(0.0)).collect(),
            eigenvectors: eig.eigenvectors,
            d,
            t,
        })
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    fn gaussian_prefactor(&self) -> f64 {
        let m = self.dim() as f64;
        let t = self.t;
        let root_det: f64 = self.eigenvalues.iter().map(|&d| j_scalar(2.0 * t * d).sqrt()).product();
        (4.0 * std::f64::consts::PI * t).powf(-m / 2.0) * root_det
    }
}

/// Generalized Mehler kernel.
pub fn mehler_p(p: &OscillatorParams, z: &[f64], zeta: &[f64]) -> Result<f64> {
    let m = p.dim();
    if z.len() != m || zeta.len() != m {
        return Err(Error::Dimension(format!("points must have length {m}")));
    }
    let v = &p.eigenvectors;
    let c = v.transpose() * DVector::from_column_slice(z);
    let e = v.transpose() * DVector::from_column_slice(zeta);
    let mut form = 0.0;
    for i in 0..m {
        let x = 2.0 * p.t * p.eigenvalues[i];
        form += x_coth(x) * (c[i] * c[i] + e[i] * e[i]) - 2.0 * j_scalar(x) * c[i] * e[i];
    }
    Ok(p.gaussian_prefactor() * (-form / (4.0 * p.t)).exp())
}

/// Analytic continuation of [`mehler_p`] to complex `z` (bilinear forms).
pub fn mehler_p_complex(p: &OscillatorParams, z: &[Complex64], zeta: &[f64]) -> Result<Complex64> {
    let m = p.dim();
    if z.len() != m || zeta.len() != m {
        return Err(Error::Dimension(format!("points must have length {m}")));
    }
    let v = &p.eigenvectors;
    let mut form = Complex64::new(0.0, 0.0);
    for i in 0..m {
        let c: Complex64 = (0..m).map(|r| z[r] * v[(r, i)]).sum();
        let e: f64 = (0..m).map(|r| zeta[r] * v[(r, i)]).sum();
        let x = 2.0 * p.t * p.eigenvalues[i];
        form += (c * c + e * e) * x_coth(x) - c * (2.0 * j_scalar(x) * e);
    }
    Ok((-form / (4.0 * p.t)).exp() * p.gaussian_prefactor())
}

/// Mehler's kernel for `Delta - omega |x|^2` on `R^n`.
pub fn classical_mehler(omega: f64, x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len() as f64;
    let r = omega.sqrt();
    let a = 2.0 * r * t;
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let pre = (4.0 * std::f64::consts::PI * t).powf(-n / 2.0) * (a / a.sinh()).powf(n / 2.0);
    pre * (-(r / 2.0) * ((xx + yy) / a.tanh() - 2.0 * xy / a.sinh())).exp()
}

fn conjugation_exponent(d: &DMatrix<f64>, z: &[f64], t: f64) -> f64 {
    let zv = DVector::from_column_slice(z);
    0.5 * zv.dot(&(d * &zv)) + t * d.trace()
}

/// `v(z,t) = e^{-(<Dz,z>/2 + t tr D)} w(z,t)`.
pub fn oscillator_from_ou(d: &DMatrix<f64>, z: &[f64], t: f64, w: f64) -> f64 {
    (-conjugation_exponent(d, z, t)).exp() * w
}

/// Inverse of [`oscillator_from_ou`].
pub fn ou_from_oscillator(d: &DMatrix<f64>, z: &[f64], t: f64, v: f64) -> f64 {
    conjugation_exponent(d, z, t).exp() * v
}

/// The Mehler kernel obtained by conjugating the OU kernel with `B = -2D`, `Q = I`.
pub fn mehler_via_ou(p: &OscillatorParams, z: &[f64], zeta: &[f64]) -> Result<f64> {
    let sys = OUSystem::from_oscillator(p.d())?;
    let q = hormander_q(&sys, z, zeta, p.t)?;
    let zv = DVector::from_column_slice(zeta);
    let weight = (0.5 * zv.dot(&(p.d() * &zv))).exp();
    Ok(oscillator_from_ou(p.d(), z, p.t, q * weight))
}
