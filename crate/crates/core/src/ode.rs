//! Adaptive Dormand–Prince 5(4) integration of linear ODE systems with complex state.
//!
//! This is the shared kernel behind shooting for the characteristic function and the
//! Cauchy matrix solves. Error control is mixed absolute/relative on the whole state:
//! a step is accepted when `max_i |err_i| <= tol * (1 + ||y||_inf)`.
//!
//! [`integrate_with_rescaling`] keeps the state bounded by renormalizing whenever
//! `||y||_inf > 1e100` and accumulating the factor in a separate real log-scale. This relies
//! on linearity: the true solution is `state * exp(log_scale)`.

use num_complex::Complex64;
use thiserror::Error;

/// Default integration tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// State norm above which [`integrate_with_rescaling`] renormalizes.
pub const RESCALE_THRESHOLD: f64 = 1e100;

const MAX_STEPS: usize = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at x = {at}")]
    StepUnderflow { at: f64 },
    #[error("solution left the floating point range at x = {at}")]
    NonFinite { at: f64 },
    #[error("step budget exhausted at x = {at}")]
    TooManySteps { at: f64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
}

/// `y' = rhs(x, y)` on `[x0, x1]`, where `rhs` is linear in `y` and writes into its last argument.
pub struct LinearSystem<F> {
    dimension: usize,
    x0: f64,
    x1: f64,
    rhs: F,
}

impl<F> LinearSystem<F>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    pub fn new(dimension: usize, domain: (f64, f64), rhs: F) -> Result<Self, OdeError> {
        let (x0, x1) = domain;
        if dimension == 0 {
            return Err(OdeError::InvalidSystem("dimension must be positive".into()));
        }
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            return Err(OdeError::InvalidSystem(format!("empty domain [{x0}, {x1}]")));
        }
        Ok(Self { dimension, x0, x1, rhs })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x1)
    }

    pub fn eval(&self, x: f64, y: &[Complex64], out: &mut [Complex64]) {
        (self.rhs)(x, y, out)
    }
}

/// Solution at the right end of the domain in scaled form.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    pub state: Vec<Complex64>,
    pub log_scale: f64,
}

impl ScaledState {
    pub fn unscaled(&self) -> Vec<Complex64> {
        let s = self.log_scale.exp();
        self.state.iter().map(|v| v * s).collect()
    }
}

/// Returns `y(x1)`.
pub fn integrate<F>(system: &LinearSystem<F>, initial: &[Complex64], tol: f64) -> Result<Vec<Complex64>, OdeError>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    run(system, initial, tol, false, &mut |_, _| {}).map(|s| s.state)
}

/// Returns `(v, log_scale)` with `y(x1) = v * exp(log_scale)`.
pub fn integrate_with_rescaling<F>(
    system: &LinearSystem<F>,
    initial: &[Complex64],
    tol: f64,
) -> Result<ScaledState, OdeError>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    run(system, initial, tol, true, &mut |_, _| {})
}

/// Like [`integrate`], calling `observer(x, y)` at the start and after every accepted step.
pub fn integrate_observed<F, O>(
    system: &LinearSystem<F>,
    initial: &[Complex64],
    tol: f64,
    mut observer: O,
) -> Result<Vec<Complex64>, OdeError>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(f64, &[Complex64]),
{
    run(system, initial, tol, false, &mut observer).map(|s| s.state)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn inf_norm(y: &[Complex64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.re.abs()).max(v.im.abs()))
}

fn run<F>(
    system: &LinearSystem<F>,
    initial: &[Complex64],
    tol: f64,
    rescale: bool,
    observer: &mut dyn FnMut(f64, &[Complex64]),
) -> Result<ScaledState, OdeError>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    let n = system.dimension;
    if initial.len() != n {
        return Err(OdeError::InvalidSystem(format!("initial vector has length {}, expected {n}", initial.len())));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(OdeError::InvalidSystem(format!("tolerance must be positive, got {tol}")));
    }
    let (x0, x1) = (system.x0, system.x1);
    let span = x1 - x0;
    let mut y = initial.to_vec();
    let mut log_scale = 0.0;
    observer(x0, &y);
    if inf_norm(&y) == 0.0 {
        return Ok(ScaledState { state: y, log_scale });
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];

    let mut x = x0;
    system.eval(x, &y, &mut k1);
    let d0 = inf_norm(&y);
    let d1 = inf_norm(&k1);
    let mut h = if d1 > 0.0 { 0.01 * d0 / d1 } else { 0.01 * span };
    h = h.clamp(1e-6 * span, span);

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= MAX_STEPS {
            return Err(OdeError::TooManySteps { at: x });
        }
        steps += 1;
        let last = x + h >= x1;
        if last {
            h = x1 - x;
        }

        for i in 0..n {
            tmp[i] = y[i] + h * (A21 * k1[i]);
        }
        system.eval(x + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        system.eval(x + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.eval(x + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.eval(x + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let xnew = if last { x1 } else { x + h };
        system.eval(xnew, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        system.eval(xnew, &ynew, &mut k7);

        let mut err = 0.0f64;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err = err.max(e.re.abs()).max(e.im.abs());
        }
        let scale = tol * (1.0 + inf_norm(&y).max(inf_norm(&ynew)));
        let ratio = err / scale;
        if !ratio.is_finite() {
            // overflow inside the trial step: shrink and retry
            h *= 0.2;
            last_rejected = true;
            if h < 1e-14 * span.max(x.abs()) {
                return Err(OdeError::NonFinite { at: x });
            }
            continue;
        }

        if ratio <= 1.0 {
            x = xnew;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if rescale {
                let norm = inf_norm(&y);
                if norm > RESCALE_THRESHOLD {
                    let inv = 1.0 / norm;
                    y.iter_mut().for_each(|v| *v *= inv);
                    k1.iter_mut().for_each(|v| *v *= inv);
                    log_scale += norm.ln();
                }
            }
            if !y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(OdeError::NonFinite { at: x });
            }
            observer(x, &y);
            if last {
                return Ok(ScaledState { state: y, log_scale });
            }
            let mut factor = if ratio == 0.0 { 5.0 } else { 0.9 * ratio.powf(-0.2) };
            factor = factor.clamp(0.2, 5.0);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h *= factor;
            last_rejected = false;
        } else {
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            last_rejected = true;
        }
        if h < 1e-14 * span.max(x.abs()) {
            return Err(OdeError::StepUnderflow { at: x });
        }
    }
}
