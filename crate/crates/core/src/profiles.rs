//! Coefficient functions on `[0, T]`: the damping `a(x)` and the optional potential `b(x)`.
//!
//! A profile is built from a [`ProfileKind`] (the serialized description used in config files)
//! plus the interval length. All kinds produce continuous functions; sampled profiles are
//! interpolated linearly between their nodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::adaptive_simpson;

/// Absolute tolerance for interval averages computed by quadrature.
pub const AVERAGE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("x = {x} lies outside the domain [0, {length}]")]
    Domain { x: f64, length: f64 },
    #[error("interval length must be positive and finite, got {0}")]
    Length(f64),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// One term `amplitude * sin(frequency * x + phase)`. Serialized as `[A, w, phi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl From<[f64; 3]> for TrigTerm {
    fn from([amplitude, frequency, phase]: [f64; 3]) -> Self {
        Self { amplitude, frequency, phase }
    }
}

impl From<TrigTerm> for [f64; 3] {
    fn from(t: TrigTerm) -> Self {
        [t.amplitude, t.frequency, t.phase]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
}

/// Serialized description of a coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileKind {
    Constant {
        value: f64,
    },
    /// `sum_k coefficients[k] * x^k`
    Polynomial {
        coefficients: Vec<f64>,
    },
    #[serde(alias = "trigonometric")]
    Trig {
        terms: Vec<TrigTerm>,
    },
    Sampled {
        abscissae: Vec<f64>,
        ordinates: Vec<f64>,
        #[serde(default)]
        interpolation: Interpolation,
    },
}

/// A continuous real function on `[0, length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    kind: ProfileKind,
    length: f64,
}

impl CoefficientProfile {
    pub fn new(kind: ProfileKind, length: f64) -> Result<Self, ProfileError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ProfileError::Length(length));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &kind {
            ProfileKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(ProfileError::Invalid("constant value is not finite".into()));
                }
            }
            ProfileKind::Polynomial { coefficients } => {
                if !finite(coefficients) {
                    return Err(ProfileError::Invalid("polynomial coefficient is not finite".into()));
                }
            }
            ProfileKind::Trig { terms } => {
                if !terms.iter().all(|t| t.amplitude.is_finite() && t.frequency.is_finite() && t.phase.is_finite()) {
                    return Err(ProfileError::Invalid("trig term is not finite".into()));
                }
            }
            ProfileKind::Sampled { abscissae, ordinates, .. } => {
                if abscissae.len() < 2 || abscissae.len() != ordinates.len() {
                    return Err(ProfileError::Invalid(
                        "sampled profile needs at least two nodes and matching ordinates".into(),
                    ));
                }
                if !finite(abscissae) || !finite(ordinates) {
                    return Err(ProfileError::Invalid("sampled node is not finite".into()));
                }
                if abscissae.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ProfileError::Invalid("abscissae must be strictly increasing".into()));
                }
                let last = *abscissae.last().unwrap();
                if abscissae[0] != 0.0 || (last - length).abs() > 1e-12 * length.max(1.0) {
                    return Err(ProfileError::Invalid(format!(
                        "abscissae must span [0, {length}], got [{}, {last}]",
                        abscissae[0]
                    )));
                }
            }
        }
        Ok(Self { kind, length })
    }

    pub fn constant(value: f64, length: f64) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Constant { value }, length)
    }

    pub fn zero(length: f64) -> Result<Self, ProfileError> {
        Self::constant(0.0, length)
    }

    pub fn polynomial(coefficients: Vec<f64>, length: f64) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Polynomial { coefficients }, length)
    }

    pub fn trig(terms: Vec<TrigTerm>, length: f64) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Trig { terms }, length)
    }

    /// `amplitude * sin(frequency * x)`.
    pub fn sine(amplitude: f64, frequency: f64, length: f64) -> Result<Self, ProfileError> {
        Self::trig(vec![TrigTerm { amplitude, frequency, phase: 0.0 }], length)
    }

    pub fn sampled(abscissae: Vec<f64>, ordinates: Vec<f64>, length: f64) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Sampled { abscissae, ordinates, interpolation: Interpolation::Linear }, length)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `a(x)`; fails outside `[0, T]` (a rounding slack of `1e-12 * max(1, T)` is clamped).
    pub fn evaluate(&self, x: f64) -> Result<f64, ProfileError> {
        let slack = 1e-12 * self.length.max(1.0);
        if !(x >= -slack && x <= self.length + slack) {
            return Err(ProfileError::Domain { x, length: self.length });
        }
        Ok(self.value(x.clamp(0.0, self.length)))
    }

    /// Unchecked evaluation for hot loops; sampled profiles clamp to the end nodes.
    pub(crate) fn value(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant { value } => *value,
            ProfileKind::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c),
            ProfileKind::Trig { terms } => terms.iter().map(|t| t.amplitude * (t.frequency * x + t.phase).sin()).sum(),
            ProfileKind::Sampled { abscissae, ordinates, .. } => {
                let i = abscissae.partition_point(|&node| node <= x);
                if i == 0 {
                    return ordinates[0];
                }
                if i >= abscissae.len() {
                    return *ordinates.last().unwrap();
                }
                let (x0, x1) = (abscissae[i - 1], abscissae[i]);
                let w = (x - x0) / (x1 - x0);
                ordinates[i - 1] + w * (ordinates[i] - ordinates[i - 1])
            }
        }
    }

    /// Interval average `(1/T) * int_0^T a(x) dx`.
    pub fn mean(&self) -> f64 {
        let t = self.length;
        match &self.kind {
            ProfileKind::Constant { value } => *value,
            ProfileKind::Polynomial { coefficients } => polynomial_integral(coefficients, t) / t,
            ProfileKind::Sampled { abscissae, ordinates, .. } => {
                let area: f64 = abscissae
                    .windows(2)
                    .zip(ordinates.windows(2))
                    .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
                    .sum();
                area / t
            }
            ProfileKind::Trig { .. } => adaptive_simpson(|x| self.value(x), 0.0, t, AVERAGE_TOL * t) / t,
        }
    }

    /// Interval average of `a(x)^2`.
    pub fn mean_square(&self) -> f64 {
        let t = self.length;
        match &self.kind {
            ProfileKind::Constant { value } => value * value,
            ProfileKind::Polynomial { coefficients } => {
                let mut square = vec![0.0; (2 * coefficients.len()).saturating_sub(1)];
                for (i, a) in coefficients.iter().enumerate() {
                    for (j, b) in coefficients.iter().enumerate() {
                        square[i + j] += a * b;
                    }
                }
                polynomial_integral(&square, t) / t
            }
            ProfileKind::Sampled { abscissae, ordinates, .. } => {
                // exact for the piecewise-linear interpolant
                let area: f64 = abscissae
                    .windows(2)
                    .zip(ordinates.windows(2))
                    .map(|(x, y)| (x[1] - x[0]) * (y[0] * y[0] + y[0] * y[1] + y[1] * y[1]) / 3.0)
                    .sum();
                area / t
            }
            ProfileKind::Trig { .. } => adaptive_simpson(|x| self.value(x).powi(2), 0.0, t, AVERAGE_TOL * t) / t,
        }
    }

    /// Upper bound estimate of `max |a(x)|` on `[0, T]`.
    pub fn max_abs(&self) -> f64 {
        match &self.kind {
            ProfileKind::Constant { value } => value.abs(),
            ProfileKind::Sampled { ordinates, .. } => ordinates.iter().fold(0.0, |m, v| m.max(v.abs())),
            ProfileKind::Trig { terms } => {
                let bound: f64 = terms.iter().map(|t| t.amplitude.abs()).sum();
                bound.min(self.grid_max(|v| v.abs()) * (1.0 + 1e-3))
            }
            ProfileKind::Polynomial { .. } => self.grid_max(|v| v.abs()),
        }
    }

    /// Estimate of `max a(x)` on `[0, T]`.
    pub fn max_value(&self) -> f64 {
        match &self.kind {
            ProfileKind::Constant { value } => *value,
            ProfileKind::Sampled { ordinates, .. } => ordinates.iter().copied().fold(f64::MIN, f64::max),
            _ => self.grid_max(|v| v),
        }
    }

    fn grid_max(&self, f: impl Fn(f64) -> f64) -> f64 {
        const NODES: usize = 4096;
        (0..=NODES).map(|i| f(self.value(self.length * i as f64 / NODES as f64))).fold(f64::MIN, f64::max)
    }

    pub fn is_identically_zero(&self) -> bool {
        match &self.kind {
            ProfileKind::Constant { value } => *value == 0.0,
            ProfileKind::Polynomial { coefficients } => coefficients.iter().all(|c| *c == 0.0),
            ProfileKind::Trig { terms } => terms.iter().all(|t| t.amplitude == 0.0),
            ProfileKind::Sampled { ordinates, .. } => ordinates.iter().all(|v| *v == 0.0),
        }
    }

    /// Resamples onto `nodes + 1` equally spaced abscissae.
    pub fn to_sampled(&self, nodes: usize) -> Self {
        let nodes = nodes.max(1);
        let xs: Vec<f64> =
            (0..=nodes).map(|i| if i == nodes { self.length } else { self.length * i as f64 / nodes as f64 }).collect();
        let ys = xs.iter().map(|&x| self.value(x)).collect();
        Self {
            kind: ProfileKind::Sampled { abscissae: xs, ordinates: ys, interpolation: Interpolation::Linear },
            length: self.length,
        }
    }
}

fn polynomial_integral(coefficients: &[f64], t: f64) -> f64 {
    // int_0^t sum c_k x^k dx, Horner in t
    coefficients.iter().enumerate().rev().fold(0.0, |acc, (k, c)| acc * t + c / (k as f64 + 1.0)) * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn evaluate_examples() {
        let c = CoefficientProfile::constant(1.0, 1.0).unwrap();
        assert_eq!(c.evaluate(0.7).unwrap(), 1.0);
        let s = CoefficientProfile::sine(1.0, PI, 1.0).unwrap();
        assert!((s.evaluate(0.5).unwrap() - 1.0).abs() < 1e-15);
        let l = CoefficientProfile::sampled(vec![0.0, 1.0], vec![0.0, 2.0], 1.0).unwrap();
        assert_eq!(l.evaluate(0.25).unwrap(), 0.5);
    }

    #[test]
    fn evaluate_rejects_outside_domain() {
        let c = CoefficientProfile::constant(1.0, 1.0).unwrap();
        assert!(matches!(c.evaluate(1.5), Err(ProfileError::Domain { .. })));
        assert!(matches!(c.evaluate(-0.1), Err(ProfileError::Domain { .. })));
        assert!(c.evaluate(f64::NAN).is_err());
        assert!(c.evaluate(1.0 + 1e-14).is_ok());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(CoefficientProfile::constant(2.0, 1.0).unwrap().mean(), 2.0);
        let s = CoefficientProfile::sine(1.0, PI, 1.0).unwrap();
        assert!((s.mean() - 2.0 / PI).abs() < 1e-10);
        let ramp = CoefficientProfile::polynomial(vec![0.0, 1.0], 2.0).unwrap();
        assert!((ramp.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mean_square_examples() {
        assert_eq!(CoefficientProfile::constant(2.0, 1.0).unwrap().mean_square(), 4.0);
        let s = CoefficientProfile::sine(1.0, PI, 1.0).unwrap();
        assert!((s.mean_square() - 0.5).abs() < 1e-10);
        let ramp = CoefficientProfile::polynomial(vec![0.0, 1.0], 1.0).unwrap();
        assert!((ramp.mean_square() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_averages_are_exact_for_linear_data() {
        let p = CoefficientProfile::sampled(vec![0.0, 0.5, 2.0], vec![1.0, 3.0, -1.0], 2.0).unwrap();
        let q = |x: f64| p.value(x);
        let mean = adaptive_simpson(q, 0.0, 2.0, 1e-13) / 2.0;
        let msq = adaptive_simpson(|x| q(x).powi(2), 0.0, 2.0, 1e-13) / 2.0;
        assert!((p.mean() - mean).abs() < 1e-12);
        assert!((p.mean_square() - msq).abs() < 1e-12);
    }

    #[test]
    fn sampled_requires_full_span() {
        assert!(CoefficientProfile::sampled(vec![0.1, 1.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(CoefficientProfile::sampled(vec![0.0, 0.9], vec![0.0, 0.0], 1.0).is_err());
        assert!(CoefficientProfile::sampled(vec![0.0, 0.6, 0.5, 1.0], vec![0.0; 4], 1.0).is_err());
        assert!(CoefficientProfile::sampled(vec![0.0, 1.0], vec![0.0], 1.0).is_err());
    }

    #[test]
    fn zero_profile_is_valid() {
        let z = CoefficientProfile::zero(3.0).unwrap();
        assert!(z.is_identically_zero());
        assert_eq!(z.mean(), 0.0);
        assert_eq!(z.mean_square(), 0.0);
    }

    #[test]
    fn rejects_bad_length() {
        assert!(matches!(CoefficientProfile::zero(0.0), Err(ProfileError::Length(_))));
        assert!(matches!(CoefficientProfile::zero(-1.0), Err(ProfileError::Length(_))));
    }

    #[test]
    fn config_schema() {
        let k: ProfileKind = serde_json::from_str(r#"{"kind":"constant","value":1.0}"#).unwrap();
        assert_eq!(k, ProfileKind::Constant { value: 1.0 });
        let k: ProfileKind = serde_json::from_str(r#"{"kind":"trig","terms":[[1.0,3.14159265,0.0]]}"#).unwrap();
        assert!(matches!(k, ProfileKind::Trig { ref terms } if terms.len() == 1));
        let k: ProfileKind = serde_json::from_str(r#"{"kind":"sampled","abscissae":[0,1],"ordinates":[0,1]}"#).unwrap();
        assert!(matches!(k, ProfileKind::Sampled { .. }));
        assert!(serde_json::from_str::<ProfileKind>(r#"{"kind":"constant","value":1.0,"x":2}"#).is_err());
        assert!(serde_json::from_str::<ProfileKind>(r#"{"kind":"spline"}"#).is_err());
    }

    #[test]
    fn max_abs_bounds_samples() {
        let s = CoefficientProfile::trig(
            vec![
                TrigTerm { amplitude: 2.0, frequency: 3.0, phase: 0.1 },
                TrigTerm { amplitude: -1.0, frequency: 7.0, phase: 0.0 },
            ],
            2.0,
        )
        .unwrap();
        let m = s.max_abs();
        for i in 0..=1000 {
            assert!(s.value(2.0 * i as f64 / 1000.0).abs() <= m + 1e-12);
        }
    }
}
