//! Eigenvalues of the damped wave operator `H` in a horizontal strip.
//!
//! Eigenvalues are the zeros of the shooting characteristic function `F`. They are isolated
//! by argument-principle counts over rectangles, refined by Newton's method on
//! `F / F'`, and classified by their position relative to the real axis.

mod asymptotics;
mod characteristic;
mod contour;
mod io;
mod search;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::OdeError;

pub use asymptotics::{asymptotic_residuals, match_index, model_spectrum, AsymptoticModel, ResidualRow};
pub use characteristic::{characteristic, characteristic_derivative, Characteristic};
pub use contour::{count_in_rectangle, Rect};
pub use io::{
    spectrum_from_csv, spectrum_from_json, spectrum_to_csv, spectrum_to_json, SpectrumDocument, SpectrumIoError,
    SpectrumRow,
};
pub use search::{find_spectrum, find_spectrum_detailed, outer_annulus_count, search_radius, SearchReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error("could not isolate zeros in {rect:?}: {detail}")]
    Isolation { rect: Rect, detail: String },
    #[error("Newton iteration did not converge in {rect:?} (last step {last_step:e})")]
    NewtonNonConvergence { rect: Rect, last_step: f64 },
    #[error("conjugate of {value} is not a zero of F (residual {residual:e})")]
    ConjugateMismatch { value: Complex64, residual: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenClass {
    /// `Im > 0`
    Upper,
    /// conjugate of an upper eigenvalue
    Lower,
    /// positive real (the index set `I_1`)
    RealPositive,
    /// negative real (the index set `I_2`)
    RealNegative,
}

impl EigenClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EigenClass::Upper => "upper",
            EigenClass::Lower => "lower",
            EigenClass::RealPositive => "real_positive",
            EigenClass::RealNegative => "real_negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "upper" => EigenClass::Upper,
            "lower" => EigenClass::Lower,
            "real_positive" => EigenClass::RealPositive,
            "real_negative" => EigenClass::RealNegative,
            _ => return None,
        })
    }

    pub fn is_real(&self) -> bool {
        matches!(self, EigenClass::RealPositive | EigenClass::RealNegative)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueRecord {
    /// Asymptotic index: `j` for upper eigenvalues, `-j` for their conjugates, `0` for real ones.
    pub index: i64,
    pub value: Complex64,
    pub multiplicity: usize,
    pub class: EigenClass,
    /// Newton distance estimate `|F / F'|` at `value`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted by imaginary part, then real part.
    pub records: Vec<EigenvalueRecord>,
    pub strip_height: f64,
    pub card_i1: usize,
    pub card_i2: usize,
}

impl Spectrum {
    /// Builds a spectrum from records, sorting them and recomputing `card_I1`, `card_I2`.
    pub fn from_records(mut records: Vec<EigenvalueRecord>, strip_height: f64) -> Self {
        records.sort_by(|a, b| a.value.im.total_cmp(&b.value.im).then(a.value.re.total_cmp(&b.value.re)));
        let card = |class: EigenClass| records.iter().filter(|r| r.class == class).map(|r| r.multiplicity).sum();
        let card_i1 = card(EigenClass::RealPositive);
        let card_i2 = card(EigenClass::RealNegative);
        Self { records, strip_height, card_i1, card_i2 }
    }

    /// Total number of eigenvalues counted with multiplicity.
    pub fn total_multiplicity(&self) -> usize {
        self.records.iter().map(|r| r.multiplicity).sum()
    }

    pub fn upper(&self) -> impl Iterator<Item = &EigenvalueRecord> {
        self.records.iter().filter(|r| r.class == EigenClass::Upper)
    }

    pub fn real(&self) -> impl Iterator<Item = &EigenvalueRecord> {
        self.records.iter().filter(|r| r.class.is_real())
    }

    /// Smallest angle between a non-real eigenvalue and the real axis, or `None` when all
    /// eigenvalues are real.
    pub fn min_phase_gap(&self) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| !r.class.is_real())
            .map(|r| {
                let a = r.value.arg().abs();
                a.min(std::f64::consts::PI - a)
            })
            .reduce(f64::min)
    }

    /// Largest distance between an upper eigenvalue and the nearest conjugate of a lower one.
    pub fn conjugate_defect(&self) -> f64 {
        let lower: Vec<Complex64> =
            self.records.iter().filter(|r| r.class == EigenClass::Lower).map(|r| r.value.conj()).collect();
        self.upper()
            .map(|r| lower.iter().map(|l| (l - r.value).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(re: f64, im: f64, class: EigenClass, m: usize) -> EigenvalueRecord {
        EigenvalueRecord { index: 0, value: Complex64::new(re, im), multiplicity: m, class, residual: 0.0 }
    }

    #[test]
    fn from_records_sorts_and_counts() {
        let s = Spectrum::from_records(
            vec![
                rec(-1.0, 2.0, EigenClass::Upper, 1),
                rec(-3.0, 0.0, EigenClass::RealNegative, 2),
                rec(-1.0, -2.0, EigenClass::Lower, 1),
                rec(-5.0, 0.0, EigenClass::RealNegative, 1),
                rec(0.5, 0.0, EigenClass::RealPositive, 1),
            ],
            3.0,
        );
        let ims: Vec<f64> = s.records.iter().map(|r| r.value.im).collect();
        assert_eq!(ims, vec![-2.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(s.records[1].value.re, -5.0);
        assert_eq!(s.card_i2, 3);
        assert_eq!(s.card_i1, 1);
        assert_eq!(s.total_multiplicity(), 6);
        assert_eq!(s.conjugate_defect(), 0.0);
    }

    #[test]
    fn class_names_round_trip() {
        for c in [EigenClass::Upper, EigenClass::Lower, EigenClass::RealPositive, EigenClass::RealNegative] {
            assert_eq!(EigenClass::parse(c.as_str()), Some(c));
        }
        assert_eq!(EigenClass::parse("complex"), None);
    }
}
