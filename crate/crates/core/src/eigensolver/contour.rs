//! Argument-principle counting of zeros of `F` inside axis-aligned rectangles.
//!
//! The phase of `F` is tracked along each edge on an initial grid of spacing `0.7 / T`,
//! bisecting any segment whose wrapped phase increment exceeds `pi / 4`. Points are first
//! shot at a loose tolerance; points that look close to a zero are redone at the fine
//! tolerance, and points that are still too close abort the count so the caller can move
//! the contour.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::characteristic::shoot;
use super::SpectrumError;
use crate::ode::OdeError;
use crate::problem::ProblemSpec;

/// Loose shooting tolerance used for contour phases.
const CONTOUR_TOL: f64 = 1e-6;
/// Zero proximity below which a contour point is recomputed at the fine tolerance.
const RECHECK_PROXIMITY: f64 = 1e-4;
/// Zero proximity below which a contour point counts as lying on a zero.
const NEAR_ZERO_PROXIMITY: f64 = 1e-7;
const MAX_PHASE_STEP: f64 = PI / 4.0;
const MAX_ATTEMPTS: usize = 8;

/// `[re_lo, re_hi] x [im_lo, im_hi]` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Rect {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Result<Self, SpectrumError> {
        let all_finite = [re_lo, re_hi, im_lo, im_hi].iter().all(|v| v.is_finite());
        if !all_finite || re_lo >= re_hi || im_lo >= im_hi {
            return Err(SpectrumError::InvalidInput(format!(
                "degenerate rectangle ({re_lo}, {re_hi}, {im_lo}, {im_hi})"
            )));
        }
        Ok(Self { re_lo, re_hi, im_lo, im_hi })
    }

    pub fn width(&self) -> f64 {
        self.re_hi - self.re_lo
    }

    pub fn height(&self) -> f64 {
        self.im_hi - self.im_lo
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi))
    }

    pub fn contains(&self, z: Complex64, margin: f64) -> bool {
        z.re >= self.re_lo - margin
            && z.re <= self.re_hi + margin
            && z.im >= self.im_lo - margin
            && z.im <= self.im_hi + margin
    }

    pub fn expanded(&self, by: f64) -> Self {
        Self { re_lo: self.re_lo - by, re_hi: self.re_hi + by, im_lo: self.im_lo - by, im_hi: self.im_hi + by }
    }

    /// Splits at the given fractions of width and height. A fraction of 1 leaves that
    /// direction unsplit.
    pub(crate) fn split(&self, fx: f64, fy: f64) -> Vec<Rect> {
        let xs: Vec<f64> = if fx < 1.0 {
            vec![self.re_lo, self.re_lo + fx * self.width(), self.re_hi]
        } else {
            vec![self.re_lo, self.re_hi]
        };
        let ys: Vec<f64> = if fy < 1.0 {
            vec![self.im_lo, self.im_lo + fy * self.height(), self.im_hi]
        } else {
            vec![self.im_lo, self.im_hi]
        };
        let mut out = Vec::with_capacity(4);
        for y in ys.windows(2) {
            for x in xs.windows(2) {
                out.push(Rect { re_lo: x[0], re_hi: x[1], im_lo: y[0], im_hi: y[1] });
            }
        }
        out
    }
}

/// Why a single contour evaluation could not produce a count.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ContourFailure {
    NearZero { at: Complex64 },
    Inconsistent { winding: f64 },
    Ode(OdeError),
}

impl From<OdeError> for ContourFailure {
    fn from(e: OdeError) -> Self {
        ContourFailure::Ode(e)
    }
}

pub(crate) struct PhaseTracker<'a> {
    spec: &'a ProblemSpec,
    fine_tol: f64,
    grid: f64,
}

fn wrap(delta: f64) -> f64 {
    let mut d = delta % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d < -PI {
        d += 2.0 * PI;
    }
    d
}

impl<'a> PhaseTracker<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        Self { spec, fine_tol: spec.tolerances().ode.min(1e-9), grid: 0.7 / spec.length() }
    }

    fn phase(&self, z: Complex64) -> Result<f64, ContourFailure> {
        let t = self.spec.length();
        let mut shot = shoot(self.spec, z, CONTOUR_TOL)?;
        if shot.zero_proximity(z, t) < RECHECK_PROXIMITY {
            shot = shoot(self.spec, z, self.fine_tol)?;
            if shot.zero_proximity(z, t) < NEAR_ZERO_PROXIMITY {
                return Err(ContourFailure::NearZero { at: z });
            }
        }
        Ok(shot.u.arg())
    }

    /// Total continuous change of `arg F` along the straight segment `a -> b`.
    pub fn segment(&self, a: Complex64, b: Complex64) -> Result<f64, ContourFailure> {
        let len = (b - a).norm();
        let pieces = ((len / self.grid).ceil() as usize).max(2);
        let point = |s: f64| a + (b - a) * s;
        let mut params = Vec::with_capacity(pieces + 1);
        for k in 0..=pieces {
            params.push(k as f64 / pieces as f64);
        }
        let mut phases = Vec::with_capacity(params.len());
        for &s in &params {
            phases.push(self.phase(point(s))?);
        }
        let min_param = 1e-11 * (1.0 + a.norm().max(b.norm())) / len.max(f64::MIN_POSITIVE);
        let mut total = 0.0;
        for k in 0..pieces {
            total += self.refine(&point, params[k], phases[k], params[k + 1], phases[k + 1], min_param)?;
        }
        Ok(total)
    }

    fn refine(
        &self,
        point: &dyn Fn(f64) -> Complex64,
        s0: f64,
        p0: f64,
        s1: f64,
        p1: f64,
        min_param: f64,
    ) -> Result<f64, ContourFailure> {
        let d = wrap(p1 - p0);
        if d.abs() <= MAX_PHASE_STEP {
            return Ok(d);
        }
        if s1 - s0 < min_param {
            return Err(ContourFailure::NearZero { at: point(0.5 * (s0 + s1)) });
        }
        let sm = 0.5 * (s0 + s1);
        let pm = self.phase(point(sm))?;
        Ok(self.refine(point, s0, p0, sm, pm, min_param)? + self.refine(point, sm, pm, s1, p1, min_param)?)
    }

    /// Winding number of `F` around the boundary of `rect`, counter-clockwise.
    pub fn winding(&self, rect: &Rect) -> Result<usize, ContourFailure> {
        let ll = Complex64::new(rect.re_lo, rect.im_lo);
        let lr = Complex64::new(rect.re_hi, rect.im_lo);
        let ur = Complex64::new(rect.re_hi, rect.im_hi);
        let ul = Complex64::new(rect.re_lo, rect.im_hi);
        // edges in canonical (left-to-right, bottom-to-top) direction
        let bottom = self.segment(ll, lr)?;
        let right = self.segment(lr, ur)?;
        let top = self.segment(ul, ur)?;
        let left = self.segment(ll, ul)?;
        winding_from_edges(bottom, right, top, left)
    }
}

pub(crate) fn winding_from_edges(bottom: f64, right: f64, top: f64, left: f64) -> Result<usize, ContourFailure> {
    let w = (bottom + right - top - left) / (2.0 * PI);
    let rounded = w.round();
    if (w - rounded).abs() >= 0.25 || rounded < 0.0 {
        return Err(ContourFailure::Inconsistent { winding: w });
    }
    Ok(rounded as usize)
}

/// Number of zeros of `F` (with multiplicity) inside `rect`.
///
/// If a zero sits on or very near the contour, the rectangle is grown by
/// `max(10 * root_tol, 1e-4 * min(width, height))` per attempt, up to eight attempts.
pub fn count_in_rectangle(spec: &ProblemSpec, rect: Rect) -> Result<usize, SpectrumError> {
    let tracker = PhaseTracker::new(spec);
    let shift = (10.0 * spec.tolerances().root).max(1e-4 * rect.width().min(rect.height()));
    let mut last = None;
    for attempt in 0..=MAX_ATTEMPTS {
        let r = rect.expanded(shift * attempt as f64);
        match tracker.winding(&r) {
            Ok(n) => return Ok(n),
            Err(ContourFailure::Ode(e)) => return Err(SpectrumError::Integration(e)),
            Err(other) => last = Some(other),
        }
    }
    Err(SpectrumError::Isolation { rect, detail: format!("{last:?}") })
}
