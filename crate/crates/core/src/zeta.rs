//! Zeta-regularized determinants of the damped wave operator `H`.
//!
//! `Det H = exp(-zeta_H'(0))` depends on where the logarithm's cut is placed. For a cut just
//! above the negative real axis `Det H = 2T`, for one just below the positive real axis
//! `Det H = -2T`, whatever the damping. This module evaluates the undamped closed forms, lifts
//! `Det A` for `A = H^2` to `Det H`, checks the result against truncated eigenvalue products, and
//! handles the case with a potential term.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::bfk::{BfkError, DEFAULT_EPSILON};
use crate::eigensolver::{find_spectrum, Spectrum, SpectrumError};
use crate::ode::{integrate_observed, LinearSystem, OdeError};
use crate::problem::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZetaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("card I2 = {0} is odd; the real negative eigenvalues must pair up")]
    OddCardinality(usize),
    #[error("y(T) = {value:e} is below the zero-mode threshold; the determinant is ill-defined")]
    ZeroMode { value: f64 },
    #[error("need {needed} eigenvalue pairs but the spectrum has {available}")]
    Range { needed: usize, available: usize },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error(transparent)]
    Bfk(#[from] BfkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutConvention {
    /// cut along the ray at angle `pi - epsilon`
    AboveNegativeAxis,
    /// cut along the ray at angle `2 pi - epsilon`
    BelowPositiveAxis,
}

impl CutConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            CutConvention::AboveNegativeAxis => "above_negative_axis",
            CutConvention::BelowPositiveAxis => "below_positive_axis",
        }
    }

    /// `+1` above the negative axis, `-1` below the positive axis.
    fn sign(&self) -> f64 {
        match self {
            CutConvention::AboveNegativeAxis => 1.0,
            CutConvention::BelowPositiveAxis => -1.0,
        }
    }
}

impl fmt::Display for CutConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCut {
    pub convention: CutConvention,
    pub epsilon: f64,
}

impl BranchCut {
    pub fn new(convention: CutConvention, epsilon: f64) -> Result<Self, ZetaError> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < PI / 2.0) {
            return Err(ZetaError::InvalidInput(format!("epsilon must lie in (0, pi/2), got {epsilon}")));
        }
        Ok(Self { convention, epsilon })
    }

    pub fn above_negative_axis() -> Self {
        Self { convention: CutConvention::AboveNegativeAxis, epsilon: DEFAULT_EPSILON }
    }

    pub fn below_positive_axis() -> Self {
        Self { convention: CutConvention::BelowPositiveAxis, epsilon: DEFAULT_EPSILON }
    }

    /// Angle of the cut ray.
    pub fn angle(&self) -> f64 {
        match self.convention {
            CutConvention::AboveNegativeAxis => PI - self.epsilon,
            CutConvention::BelowPositiveAxis => 2.0 * PI - self.epsilon,
        }
    }

    /// Cut angle `-2 epsilon` used for `A = H^2`.
    pub fn squared_angle(&self) -> f64 {
        -2.0 * self.epsilon
    }
}

/// Half the smallest angle between a non-real eigenvalue and the real axis, so that no
/// eigenvalue phase lies between the cut and the axis. Falls back to [`DEFAULT_EPSILON`] when
/// every eigenvalue is real.
pub fn automatic_epsilon(spectrum: &Spectrum) -> f64 {
    spectrum.min_phase_gap().map_or(DEFAULT_EPSILON, |gap| 0.5 * gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedFormZeta,
    BfkLift,
    RelativeProduct,
    PotentialCauchy,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedFormZeta => "closed_form_zeta",
            Method::BfkLift => "bfk_lift",
            Method::RelativeProduct => "relative_product",
            Method::PotentialCauchy => "potential_cauchy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantResult {
    pub value: Complex64,
    pub method: Method,
    pub cut: BranchCut,
    pub diagnostics: BTreeMap<String, f64>,
}

impl DeterminantResult {
    fn new(value: Complex64, method: Method, cut: BranchCut) -> Self {
        Self { value, method, cut, diagnostics: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }

    /// `|Im value| <= tol |value|`.
    pub fn is_real_within(&self, tol: f64) -> bool {
        self.value.im.abs() <= tol * self.value.norm()
    }
}

impl Serialize for DeterminantResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            value_re: f64,
            value_im: f64,
            method: Method,
            cut: CutConvention,
            epsilon: f64,
            diagnostics: &'a BTreeMap<String, f64>,
        }
        Wire {
            value_re: self.value.re,
            value_im: self.value.im,
            method: self.method,
            cut: self.cut.convention,
            epsilon: self.cut.epsilon,
            diagnostics: &self.diagnostics,
        }
        .serialize(s)
    }
}

/// `(zeta_R(0), zeta_R'(0)) = (-1/2, -log(2 pi) / 2)`.
pub fn riemann_zeta_constants() -> (f64, f64) {
    (-0.5, -0.5 * (2.0 * PI).ln())
}

/// `Det H_0` for `a = 0` from `-zeta'(0) = -2 log(T/pi) zeta_R(0) - 2 zeta_R'(0)`, with an extra
/// `2 pi i zeta_R(0)` when the cut lies below the positive axis.
pub fn det_h0_closed_form(length: f64, cut: BranchCut) -> Result<DeterminantResult, ZetaError> {
    check_length(length)?;
    let (z0, z1) = riemann_zeta_constants();
    let mut minus_prime = Complex64::new(-2.0 * (length / PI).ln() * z0 - 2.0 * z1, 0.0);
    if cut.convention == CutConvention::BelowPositiveAxis {
        minus_prime += Complex64::new(0.0, 2.0 * PI * z0);
    }
    Ok(DeterminantResult::new(minus_prime.exp(), Method::ClosedFormZeta, cut)
        .with("minus_zeta_prime_re", minus_prime.re)
        .with("minus_zeta_prime_im", minus_prime.im))
}

/// `-zeta_{A_0}'(0) = 2 pi i zeta_R(0) - 4 log(T/pi) zeta_R(0) - 4 zeta_R'(0) = -pi i + 2 log(2T)`
/// for the undamped squared operator.
pub fn zeta_a0_prime0(length: f64) -> Result<Complex64, ZetaError> {
    check_length(length)?;
    let (z0, z1) = riemann_zeta_constants();
    Ok(Complex64::new(-4.0 * (length / PI).ln() * z0 - 4.0 * z1, 2.0 * PI * z0))
}

fn check_length(length: f64) -> Result<(), ZetaError> {
    if !(length.is_finite() && length > 0.0) {
        return Err(ZetaError::InvalidInput(format!("length must be positive, got {length}")));
    }
    Ok(())
}

/// `Det H = exp(-zeta_A'(0) / 2) e^{s i pi / 2} e^{-s i pi card I2}` with `s = +1` above the
/// negative axis and `s = -1` below the positive axis. `exp(-zeta_A'(0))` is `det_a`, its
/// logarithm taken with argument in `(theta_A - 2 pi, theta_A)`, `theta_A = -2 epsilon`.
pub fn lift_determinant(det_a: Complex64, card_i2: usize, cut: BranchCut) -> Result<DeterminantResult, ZetaError> {
    if !(det_a.norm() > 0.0 && det_a.norm().is_finite()) {
        return Err(ZetaError::InvalidInput(format!("Det A must be finite and nonzero, got {det_a}")));
    }
    if card_i2 % 2 == 1 {
        return Err(ZetaError::OddCardinality(card_i2));
    }
    let theta = cut.squared_angle();
    let lo = theta - 2.0 * PI;
    let arg = lo + (det_a.arg() - lo).rem_euclid(2.0 * PI);
    let log_a = Complex64::new(det_a.norm().ln(), arg);
    let s = cut.convention.sign();
    let phase = s * PI / 2.0 - s * PI * card_i2 as f64;
    let value = (0.5 * log_a + Complex64::new(0.0, phase)).exp();
    Ok(DeterminantResult::new(value, Method::BfkLift, cut)
        .with("card_I2", card_i2 as f64)
        .with("det_A_re", det_a.re)
        .with("det_A_im", det_a.im)
        .with("log_det_A_arg", arg))
}

/// `2T` times the truncated product of `|mu_j|^2 / (j pi / T)^2` over `j <= n`, where the real
/// eigenvalues (paired) stand in for the lowest indices.
///
/// For constant damping the pair products are exactly `(j pi / T)^2`. Otherwise the ratio is
/// an empirical check; the diagnostics carry the tail estimate
/// `(<a>^2 - <a^2>) T^2 / (pi^2 n)` of the log of the omitted factors.
pub fn relative_determinant(
    spectrum: &Spectrum,
    spec: &ProblemSpec,
    n: usize,
    cut: BranchCut,
) -> Result<DeterminantResult, ZetaError> {
    if n == 0 {
        return Err(ZetaError::InvalidInput("truncation must be at least 1".into()));
    }
    let t = spec.length();
    let real: Vec<(Complex64, usize)> = spectrum.real().map(|r| (r.value, r.multiplicity)).collect();
    let real_count: usize = real.iter().map(|r| r.1).sum();
    if real_count % 2 == 1 {
        return Err(ZetaError::OddCardinality(real_count));
    }
    let real_pairs = real_count / 2;
    let needed = n.saturating_sub(real_pairs);
    let upper: Vec<Complex64> = spectrum.upper().flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity)).collect();
    if real_pairs > n || upper.len() < needed {
        return Err(ZetaError::Range { needed: n, available: real_pairs + upper.len() });
    }

    // accumulate in log form to keep the partial products in range
    let mut log_sum = 0.0;
    let mut sign = 1.0;
    for (v, m) in &real {
        log_sum += *m as f64 * v.re.abs().ln();
        if v.re < 0.0 && m % 2 == 1 {
            sign = -sign;
        }
    }
    for mu in &upper[..needed] {
        log_sum += 2.0 * mu.norm().ln();
    }
    for j in 1..=n {
        log_sum -= 2.0 * (j as f64 * PI / t).ln();
    }
    let product = sign * log_sum.exp();
    let a = spec.damping();
    let tail = (a.mean().powi(2) - a.mean_square()) * t * t / (PI * PI * n as f64);
    let value = Complex64::new(2.0 * t * product * cut.convention.sign(), 0.0);
    Ok(DeterminantResult::new(value, Method::RelativeProduct, cut)
        .with("N", n as f64)
        .with("real_pairs", real_pairs as f64)
        .with("card_I2", spectrum.card_i2 as f64)
        .with("product_deviation", product - 1.0)
        .with("tail_estimate", tail))
}

/// Solution of `y'' + b y = 0`, `y(0) = 0`, `y'(0) = 1`, observed along the way.
fn potential_shot(spec: &ProblemSpec, observer: impl FnMut(f64, &[Complex64])) -> Result<f64, ZetaError> {
    let b = spec.potential().ok_or_else(|| ZetaError::InvalidInput("no potential given".into()))?;
    let system = LinearSystem::new(2, (0.0, spec.length()), |x, y: &[Complex64], out: &mut [Complex64]| {
        out[0] = y[1];
        out[1] = -b.value(x) * y[0];
    })?;
    let init = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let end = integrate_observed(&system, &init, spec.tolerances().ode.min(1e-10), observer)?;
    Ok(end[0].re)
}

/// Counts the positive Dirichlet eigenvalues of `d^2/dx^2 + b` by Sturm oscillation: it equals
/// the number of zeros in `(0, T)` of the solution of `y'' + b y = 0`, `y(0) = 0`, `y'(0) = 1`,
/// read off the unwrapped Prüfer angle `atan2(y, y')`. Returns `(all negative, positive count)`.
pub fn rhs_negative_definiteness(spec: &ProblemSpec) -> Result<(bool, usize), ZetaError> {
    let mut angle = 0.0f64;
    let mut prev = 0.0f64;
    potential_shot(spec, |_, y| {
        let a = y[0].re.atan2(y[1].re);
        let mut d = (a - prev) % (2.0 * PI);
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        angle += d;
        prev = a;
    })?;
    // the angle crosses multiples of pi only upwards; zeros strictly inside (0, T)
    let count = if angle > 0.0 { ((angle / PI).ceil() as usize).saturating_sub(1) } else { 0 };
    Ok((count == 0, count))
}

/// `Det H = +-2 y(T)` for the operator with potential `b`, times `(-1)^{card I2}` when
/// `d^2/dx^2 + b` has positive Dirichlet eigenvalues (`card I2` from a spectrum search near the
/// real axis).
pub fn potential_determinant(spec: &ProblemSpec, cut: BranchCut) -> Result<DeterminantResult, ZetaError> {
    let y_t = potential_shot(spec, |_, _| {})?;
    let threshold = 1e-10 * spec.length().max(1.0);
    if y_t.abs() < threshold {
        return Err(ZetaError::ZeroMode { value: y_t });
    }
    let (all_negative, positive) = rhs_negative_definiteness(spec)?;
    let mut value = 2.0 * y_t * cut.convention.sign();
    let mut result = DeterminantResult::new(Complex64::new(0.0, 0.0), Method::PotentialCauchy, cut);
    if !all_negative {
        let spectrum = find_spectrum(spec, 0.5 * PI / spec.length())?;
        if spectrum.card_i2 % 2 == 1 {
            value = -value;
        }
        result = result.with("card_I2", spectrum.card_i2 as f64);
    }
    result.value = Complex64::new(value, 0.0);
    Ok(result.with("y_T", y_t).with("rhs_positive_eigenvalues", positive as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfk::{bfk_determinant, square_operator};
    use crate::profiles::CoefficientProfile;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(a: CoefficientProfile) -> ProblemSpec {
        ProblemSpec::new(a.length(), a).unwrap()
    }

    fn with_potential(b: f64, t: f64) -> ProblemSpec {
        problem(CoefficientProfile::zero(t).unwrap())
            .with_potential(CoefficientProfile::constant(b, t).unwrap())
            .unwrap()
    }

    #[test]
    fn zeta_constants() {
        let (z0, z1) = riemann_zeta_constants();
        assert_eq!(z0, -0.5);
        assert!((z1 + 0.918_938_533_204_672_7).abs() < 1e-15);
        assert!(((-2.0 * z1).exp() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn undamped_closed_forms() {
        for t in [0.5, 1.0, 3.0, PI] {
            let up = det_h0_closed_form(t, BranchCut::above_negative_axis()).unwrap();
            let down = det_h0_closed_form(t, BranchCut::below_positive_axis()).unwrap();
            assert!((up.value - c(2.0 * t, 0.0)).norm() < 1e-12 * t);
            assert!((down.value - c(-2.0 * t, 0.0)).norm() < 1e-12 * t);
        }
        assert!(det_h0_closed_form(0.0, BranchCut::above_negative_axis()).is_err());
    }

    #[test]
    fn squared_undamped_zeta() {
        let z = zeta_a0_prime0(1.0).unwrap();
        assert!((z - c(2.0 * 2f64.ln(), -PI)).norm() < 1e-14);
        assert!((zeta_a0_prime0(0.5).unwrap() - c(0.0, -PI)).norm() < 1e-14);
        for t in [0.3, 1.0, 2.5] {
            assert!((zeta_a0_prime0(t).unwrap().exp() - c(-4.0 * t * t, 0.0)).norm() < 1e-12 * t * t);
        }
    }

    #[test]
    fn lift_examples() {
        let up = BranchCut::above_negative_axis();
        let down = BranchCut::below_positive_axis();
        let m4 = c(-4.0, 0.0);
        assert!((lift_determinant(m4, 0, up).unwrap().value - c(2.0, 0.0)).norm() < 1e-14);
        assert!((lift_determinant(m4, 2, up).unwrap().value - c(2.0, 0.0)).norm() < 1e-14);
        assert!((lift_determinant(m4, 0, down).unwrap().value - c(-2.0, 0.0)).norm() < 1e-14);
        assert!(matches!(lift_determinant(m4, 1, up), Err(ZetaError::OddCardinality(1))));
        assert!(lift_determinant(c(0.0, 0.0), 0, up).is_err());
    }

    #[test]
    fn lift_square_consistency() {
        for t in [0.5, 2.0] {
            let det_a = c(-4.0 * t * t, 0.0);
            let h = lift_determinant(det_a, 0, BranchCut::above_negative_axis()).unwrap().value;
            assert!((h * h + det_a).norm() < 1e-12 * t * t);
        }
    }

    #[test]
    fn lift_of_bfk_is_damping_independent() {
        for a in [CoefficientProfile::sine(1.0, PI, 1.0).unwrap(), CoefficientProfile::constant(4.0, 1.0).unwrap()] {
            let p = problem(a);
            let det_a = bfk_determinant(&square_operator(&p).unwrap()).unwrap().determinant;
            let card = find_spectrum(&p, 1.0).unwrap().card_i2;
            for cut in [BranchCut::above_negative_axis(), BranchCut::below_positive_axis()] {
                let lifted = lift_determinant(det_a, card, cut).unwrap();
                let closed = det_h0_closed_form(1.0, cut).unwrap();
                assert!((lifted.value - closed.value).norm() < 1e-6 * 2.0);
                assert!(lifted.is_real_within(1e-8));
            }
        }
    }

    #[test]
    fn relative_determinant_exact_cases() {
        let p = problem(CoefficientProfile::zero(1.0).unwrap());
        let s = find_spectrum(&p, 10.0).unwrap();
        let r = relative_determinant(&s, &p, 3, BranchCut::above_negative_axis()).unwrap();
        assert!((r.value - c(2.0, 0.0)).norm() < 1e-9);
        assert!(matches!(
            relative_determinant(&s, &p, 4, BranchCut::above_negative_axis()),
            Err(ZetaError::Range { .. })
        ));

        let p = problem(CoefficientProfile::constant(4.0, 1.0).unwrap());
        let s = find_spectrum(&p, 20.0).unwrap();
        let r = relative_determinant(&s, &p, 6, BranchCut::above_negative_axis()).unwrap();
        assert!((r.value - c(2.0, 0.0)).norm() < 1e-8, "{r:?}");
        assert_eq!(r.diagnostics["real_pairs"], 1.0);
        assert_eq!(r.diagnostics["tail_estimate"], 0.0);
    }

    #[test]
    fn automatic_epsilon_halves_gap() {
        let p = problem(CoefficientProfile::constant(1.0, 1.0).unwrap());
        let s = find_spectrum(&p, 4.0).unwrap();
        let mu = s.upper().next().unwrap().value;
        assert!((automatic_epsilon(&s) - 0.5 * (PI - mu.arg())).abs() < 1e-12);
    }

    #[test]
    fn rhs_definiteness_examples() {
        assert_eq!(rhs_negative_definiteness(&with_potential(0.0, 1.0)).unwrap(), (true, 0));
        assert_eq!(rhs_negative_definiteness(&with_potential(1.0, 1.0)).unwrap(), (true, 0));
        assert_eq!(rhs_negative_definiteness(&with_potential(20.0, 1.0)).unwrap(), (false, 1));
        assert_eq!(rhs_negative_definiteness(&with_potential(50.0, 1.0)).unwrap(), (false, 2));
        assert!(rhs_negative_definiteness(&problem(CoefficientProfile::zero(1.0).unwrap())).is_err());
    }

    #[test]
    fn potential_examples() {
        let up = BranchCut::above_negative_axis();
        let r = potential_determinant(&with_potential(0.0, 1.0), up).unwrap();
        assert!((r.value - c(2.0, 0.0)).norm() < 1e-12);
        let r = potential_determinant(&with_potential(-1.0, 1.0), up).unwrap();
        assert!((r.value.re - 2.0 * 1f64.sinh()).abs() < 1e-9);
        let r = potential_determinant(&with_potential(1.0, 1.0), up).unwrap();
        assert!((r.value.re - 2.0 * 1f64.sin()).abs() < 1e-9);
        let r = potential_determinant(&with_potential(0.0, 2.0), BranchCut::below_positive_axis()).unwrap();
        assert!((r.value - det_h0_closed_form(2.0, BranchCut::below_positive_axis()).unwrap().value).norm() < 1e-12);
    }

    #[test]
    fn potential_zero_mode_is_rejected() {
        // y = sin(pi x) vanishes at T = 1
        let r = potential_determinant(&with_potential(PI * PI, 1.0), BranchCut::above_negative_axis());
        assert!(matches!(r, Err(ZetaError::ZeroMode { .. })));
    }

    #[test]
    fn result_json_shape() {
        let r = det_h0_closed_form(1.0, BranchCut::above_negative_axis()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["method"], "closed_form_zeta");
        assert_eq!(v["cut"], "above_negative_axis");
        assert_eq!(v["epsilon"], 1e-3);
        assert!(v["diagnostics"].is_object());
    }
}
