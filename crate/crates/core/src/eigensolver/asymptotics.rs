//! Large-`j` model of the upper-half eigenvalues,
//! `mu_j = i j pi / T - <a> - i <a^2> T / (2 pi j) + O(1/j^2)`,
//! and residuals of computed eigenvalues against it.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Spectrum, SpectrumError};
use crate::problem::ProblemSpec;

/// The asymptotic eigenvalue model built from the damping averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticModel {
    pub mean: f64,
    pub mean_square: f64,
    pub length: f64,
}

impl AsymptoticModel {
    /// Ignores any potential term.
    pub fn new(spec: &ProblemSpec) -> Self {
        Self { mean: spec.damping().mean(), mean_square: spec.damping().mean_square(), length: spec.length() }
    }

    pub fn value(&self, j: usize) -> Complex64 {
        let j = j as f64;
        Complex64::new(-self.mean, j * PI / self.length - self.mean_square * self.length / (2.0 * PI * j))
    }

    /// Index `j >= 1` whose model imaginary part is nearest to `z.im`; ties go to the smaller
    /// real-part mismatch.
    pub fn nearest_index(&self, z: Complex64) -> usize {
        let guess = (z.im * self.length / PI).round().max(1.0) as usize;
        let lo = guess.saturating_sub(2).max(1);
        (lo..=guess + 2)
            .min_by(|&a, &b| {
                let (ma, mb) = (self.value(a), self.value(b));
                let da = (z.im - ma.im).abs();
                let db = (z.im - mb.im).abs();
                da.total_cmp(&db).then((z.re - ma.re).abs().total_cmp(&(z.re - mb.re).abs()))
            })
            .unwrap_or(1)
    }
}

/// Index of an upper-half eigenvalue in the asymptotic numbering.
pub fn match_index(spec: &ProblemSpec, z: Complex64) -> usize {
    AsymptoticModel::new(spec).nearest_index(z)
}

/// The first `j_max` model eigenvalues in the upper half-plane.
pub fn model_spectrum(spec: &ProblemSpec, j_max: usize) -> Result<Vec<Complex64>, SpectrumError> {
    if j_max == 0 {
        return Err(SpectrumError::InvalidInput("j_max must be at least 1".into()));
    }
    if spec.potential().is_some() {
        return Err(SpectrumError::InvalidInput("the asymptotic model assumes no potential".into()));
    }
    let model = AsymptoticModel::new(spec);
    Ok((1..=j_max).map(|j| model.value(j)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub j: usize,
    pub value: Complex64,
    /// `|Re mu_j + <a>|`
    pub re_residual: f64,
    /// `|Im mu_j - j pi / T + <a^2> T / (2 pi j)|`
    pub im_residual: f64,
    /// More than one eigenvalue matched this index.
    pub flagged: bool,
}

/// Residuals of the computed upper-half eigenvalues against the asymptotic model, sorted by `j`.
pub fn asymptotic_residuals(spectrum: &Spectrum, spec: &ProblemSpec) -> Result<Vec<ResidualRow>, SpectrumError> {
    if spec.potential().is_some() {
        return Err(SpectrumError::InvalidInput("the asymptotic model assumes no potential".into()));
    }
    let model = AsymptoticModel::new(spec);
    let mut rows: Vec<ResidualRow> = spectrum
        .upper()
        .map(|r| {
            let j = model.nearest_index(r.value);
            let m = model.value(j);
            ResidualRow {
                j,
                value: r.value,
                re_residual: (r.value.re - m.re).abs(),
                im_residual: (r.value.im - m.im).abs(),
                flagged: false,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.j.cmp(&b.j).then(a.value.im.total_cmp(&b.value.im)));
    for i in 0..rows.len() {
        let dup = (i > 0 && rows[i - 1].j == rows[i].j) || (i + 1 < rows.len() && rows[i + 1].j == rows[i].j);
        rows[i].flagged = dup;
    }
    Ok(rows)
}
