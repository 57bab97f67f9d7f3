//! Shooting for the characteristic function `F(lambda)`.
//!
//! With `u_1 = lambda u_0`, the eigenvalue problem `H u = lambda u` reduces to
//! `u'' = (lambda^2 + 2 a(x) lambda - b(x)) u` with `u(0) = u(T) = 0`. `F(lambda)` is `u(T)` for
//! the solution with `u(0) = 0, u'(0) = 1`; it is entire and its zeros are the eigenvalues of
//! `H` with multiplicity. Values carry a separate log-scale so large `|lambda|` cannot overflow.

use num_complex::Complex64;

use crate::ode::{integrate_with_rescaling, LinearSystem, OdeError};
use crate::problem::ProblemSpec;

/// `F(lambda) = value * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic {
    pub value: Complex64,
    pub log_scale: f64,
}

impl Characteristic {
    pub fn to_complex(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }
}

/// End state `(u(T), u'(T))` of the shooting solution, sharing one log-scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shot {
    pub u: Complex64,
    pub du: Complex64,
    pub log_scale: f64,
}

impl Shot {
    /// Scale-free closeness of `lambda` to a zero of `F`: roughly `T * dist(lambda, zeros)`
    /// away from multiple roots, and of order one far from the spectrum.
    pub fn zero_proximity(&self, lambda: Complex64, length: f64) -> f64 {
        let s = lambda.norm().max(1.0 / length);
        let a = self.u.norm() * s;
        let b = self.du.norm();
        if a + b == 0.0 {
            return 0.0;
        }
        a / (a + b)
    }
}

/// `(F, dF/dlambda)` with a shared log-scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShotWithDerivative {
    pub value: Complex64,
    pub derivative: Complex64,
    pub log_scale: f64,
}

impl ShotWithDerivative {
    pub fn newton_step(&self) -> Complex64 {
        self.value / self.derivative
    }
}

fn coefficient(spec: &ProblemSpec, lambda: Complex64, x: f64) -> Complex64 {
    let a = spec.damping().value(x);
    let mut q = lambda * (lambda + 2.0 * a);
    if let Some(b) = spec.potential() {
        q -= b.value(x);
    }
    q
}

pub(crate) fn shoot(spec: &ProblemSpec, lambda: Complex64, tol: f64) -> Result<Shot, OdeError> {
    let system = LinearSystem::new(2, (0.0, spec.length()), |x, y: &[Complex64], out: &mut [Complex64]| {
        let q = coefficient(spec, lambda, x);
        out[0] = y[1];
        out[1] = q * y[0];
    })?;
    let one = Complex64::new(1.0, 0.0);
    let r = integrate_with_rescaling(&system, &[Complex64::new(0.0, 0.0), one], tol)?;
    Ok(Shot { u: r.state[0], du: r.state[1], log_scale: r.log_scale })
}

/// Integrates the shooting solution together with its variational system
/// `w'' = q w + (2 lambda + 2 a) u`, `w(0) = w'(0) = 0`, so `w(T) = dF/dlambda`.
pub(crate) fn shoot_with_derivative(
    spec: &ProblemSpec,
    lambda: Complex64,
    tol: f64,
) -> Result<ShotWithDerivative, OdeError> {
    let system = LinearSystem::new(4, (0.0, spec.length()), |x, y: &[Complex64], out: &mut [Complex64]| {
        let a = spec.damping().value(x);
        let mut q = lambda * (lambda + 2.0 * a);
        if let Some(b) = spec.potential() {
            q -= b.value(x);
        }
        out[0] = y[1];
        out[1] = q * y[0];
        out[2] = y[3];
        out[3] = q * y[2] + 2.0 * (lambda + a) * y[0];
    })?;
    let zero = Complex64::new(0.0, 0.0);
    let r = integrate_with_rescaling(&system, &[zero, Complex64::new(1.0, 0.0), zero, zero], tol)?;
    Ok(ShotWithDerivative { value: r.state[0], derivative: r.state[2], log_scale: r.log_scale })
}

/// `F(lambda)` in scaled form.
pub fn characteristic(spec: &ProblemSpec, lambda: Complex64) -> Result<Characteristic, OdeError> {
    let shot = shoot(spec, lambda, spec.tolerances().ode)?;
    Ok(Characteristic { value: shot.u, log_scale: shot.log_scale })
}

/// `dF/dlambda`, from the variational system.
pub fn characteristic_derivative(spec: &ProblemSpec, lambda: Complex64) -> Result<Complex64, OdeError> {
    let s = shoot_with_derivative(spec, lambda, spec.tolerances().ode)?;
    Ok(s.derivative * s.log_scale.exp())
}
