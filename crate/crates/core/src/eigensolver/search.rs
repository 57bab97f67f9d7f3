//! Locating all eigenvalues in a strip.
//!
//! The region `[-R, R] x [-eta, K]` is cut into horizontal slabs whose boundaries sit halfway
//! between consecutive undamped eigenvalues `i j pi / T`, where the damped ones are least likely
//! to be. Each slab is counted with the argument principle (horizontal lines are shared by the
//! slabs on either side), then split recursively until every box holds one zero or a tight
//! cluster, and each box is refined with Newton's method. Roots below the real axis are
//! discarded and regenerated as conjugates of the upper ones.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::asymptotics::AsymptoticModel;
use super::characteristic::shoot_with_derivative;
use super::contour::{winding_from_edges, ContourFailure, PhaseTracker};
use super::{count_in_rectangle, EigenClass, EigenvalueRecord, Rect, Spectrum, SpectrumError};
use crate::problem::ProblemSpec;

const MAX_ATTEMPTS: usize = 8;
const MAX_NEWTON_ITERATIONS: usize = 80;
/// Tightest ODE tolerance Newton falls back to when it stagnates.
const FINEST_ODE_TOL: f64 = 1e-13;
/// Below this Newton step the iteration switches from the loose to the requested ODE tolerance.
const LOOSE_PHASE_END: f64 = 1e-5;
/// Conjugates whose Newton distance `|F/F'|` exceeds this are rejected.
const CONJUGATE_CHECK: f64 = 1e-6;
/// Split fractions, deliberately off-centre so cut lines avoid symmetric root positions.
const SPLITS: [(f64, f64); 4] = [(0.5173, 0.4861), (0.4627, 0.5331), (0.5511, 0.4469), (0.4389, 0.5617)];
/// Asymmetric stretch of the real-part bound, for the same reason.
const LEFT_STRETCH: f64 = 1.0123;
const RIGHT_STRETCH: f64 = 1.0077;
/// The bottom of the search region sits this many slab heights below the real axis.
const BELOW_AXIS: f64 = 0.3;

/// Real-part search bound `R = 2 max|a| + 1/T + 1`, enlarged by `sqrt(max b)` when a potential is
/// present.
pub fn search_radius(spec: &ProblemSpec) -> f64 {
    let mut r = 2.0 * spec.damping().max_abs() + 1.0 / spec.length() + 1.0;
    if let Some(b) = spec.potential() {
        r += b.max_value().max(0.0).sqrt();
    }
    r
}

/// Bookkeeping from a spectrum search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    /// The region actually counted, after any contour perturbation.
    pub region: Rect,
    pub slabs: usize,
    /// Zeros counted in `region`, with multiplicity.
    pub counted: usize,
    /// Number of contour perturbations needed.
    pub perturbations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Root {
    value: Complex64,
    multiplicity: usize,
    residual: f64,
}

/// All eigenvalues with `|Im| <= k` and real part within the search radius.
pub fn find_spectrum(spec: &ProblemSpec, k: f64) -> Result<Spectrum, SpectrumError> {
    find_spectrum_detailed(spec, k).map(|(s, _)| s)
}

pub fn find_spectrum_detailed(spec: &ProblemSpec, k: f64) -> Result<(Spectrum, SearchReport), SpectrumError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(SpectrumError::InvalidInput(format!("strip height must be positive, got {k}")));
    }
    let search = Search::new(spec);
    let (slabs, counts, perturbations) = search.slab_counts(k)?;
    let region = Rect {
        re_lo: slabs[0].re_lo,
        re_hi: slabs[0].re_hi,
        im_lo: slabs[0].im_lo,
        im_hi: slabs[slabs.len() - 1].im_hi,
    };
    let counted = counts.iter().sum();

    let found: Vec<Vec<Root>> =
        slabs.par_iter().zip(counts.par_iter()).map(|(rect, &n)| search.isolate(rect, n)).collect::<Result<_, _>>()?;
    let roots: Vec<Root> = found.into_iter().flatten().collect();

    let records: Vec<Vec<EigenvalueRecord>> =
        roots.par_iter().map(|root| search.classify(root, k)).collect::<Result<_, _>>()?;
    let spectrum = Spectrum::from_records(records.into_iter().flatten().collect(), k);
    let report = SearchReport { region, slabs: slabs.len(), counted, perturbations };
    Ok((spectrum, report))
}

/// Number of zeros in the two side boxes `[-3R, -R] x [-k, k]` and `[R, 3R] x [-k, k]`; zero when
/// the search radius is adequate.
pub fn outer_annulus_count(spec: &ProblemSpec, k: f64) -> Result<usize, SpectrumError> {
    let r = search_radius(spec);
    let left = Rect::new(-3.0 * r, -LEFT_STRETCH * r, -k, k)?;
    let right = Rect::new(RIGHT_STRETCH * r, 3.0 * r, -k, k)?;
    Ok(count_in_rectangle(spec, left)? + count_in_rectangle(spec, right)?)
}

struct Search<'a> {
    spec: &'a ProblemSpec,
    tracker: PhaseTracker<'a>,
    model: Option<AsymptoticModel>,
    radius: f64,
    slab_height: f64,
}

impl<'a> Search<'a> {
    fn new(spec: &'a ProblemSpec) -> Self {
        let model = spec.potential().is_none().then(|| AsymptoticModel::new(spec));
        Self {
            spec,
            tracker: PhaseTracker::new(spec),
            model,
            radius: search_radius(spec),
            slab_height: PI / spec.length(),
        }
    }

    fn root_tol(&self) -> f64 {
        self.spec.tolerances().root
    }

    /// Slab rectangles and their zero counts, perturbing lines that pass too close to a zero.
    fn slab_counts(&self, k: f64) -> Result<(Vec<Rect>, Vec<usize>, usize), SpectrumError> {
        let h = self.slab_height;
        let mut lines = vec![-BELOW_AXIS * h];
        let mut y = 0.5 * h;
        while y < k - 0.1 * h {
            lines.push(y);
            y += h;
        }
        lines.push(k);
        let mut re_lo = -LEFT_STRETCH * self.radius;
        let mut re_hi = RIGHT_STRETCH * self.radius;
        let unit = 0.0137 * h.min(self.radius);
        let z = Complex64::new;
        let mut last = None;

        for attempt in 0..=MAX_ATTEMPTS {
            let horizontal: Vec<Result<f64, ContourFailure>> =
                lines.par_iter().map(|&y| self.tracker.segment(z(re_lo, y), z(re_hi, y))).collect();
            let right: Vec<Result<f64, ContourFailure>> =
                lines.par_windows(2).map(|w| self.tracker.segment(z(re_hi, w[0]), z(re_hi, w[1]))).collect();
            let left: Vec<Result<f64, ContourFailure>> =
                lines.par_windows(2).map(|w| self.tracker.segment(z(re_lo, w[0]), z(re_lo, w[1]))).collect();

            let mut bad_lines = vec![false; lines.len()];
            let (mut bad_left, mut bad_right) = (false, false);
            for (i, r) in horizontal.iter().enumerate() {
                match r {
                    Err(ContourFailure::Ode(e)) => return Err(e.clone().into()),
                    Err(f) => {
                        bad_lines[i] = true;
                        last = Some(f.clone());
                    }
                    Ok(_) => {}
                }
            }
            for (side, flag) in [(&right, &mut bad_right), (&left, &mut bad_left)] {
                for r in side.iter() {
                    match r {
                        Err(ContourFailure::Ode(e)) => return Err(e.clone().into()),
                        Err(f) => {
                            *flag = true;
                            last = Some(f.clone());
                        }
                        Ok(_) => {}
                    }
                }
            }

            let mut counts = Vec::with_capacity(lines.len() - 1);
            if !bad_left && !bad_right && !bad_lines.contains(&true) {
                for i in 0..lines.len() - 1 {
                    let edges = (&horizontal[i], &right[i], &horizontal[i + 1], &left[i]);
                    let (Ok(b), Ok(r), Ok(t), Ok(l)) = edges else { unreachable!() };
                    match winding_from_edges(*b, *r, *t, *l) {
                        Ok(n) => counts.push(n),
                        Err(f) => {
                            // move the slab's upper line unless it is the strip top
                            let j = if i + 1 < lines.len() - 1 { i + 1 } else { i };
                            bad_lines[j] = true;
                            last = Some(f);
                        }
                    }
                }
                if counts.len() == lines.len() - 1 {
                    let slabs = lines.windows(2).map(|w| Rect { re_lo, re_hi, im_lo: w[0], im_hi: w[1] }).collect();
                    return Ok((slabs, counts, attempt));
                }
            }

            for (i, bad) in bad_lines.iter().enumerate() {
                if *bad {
                    if i == 0 {
                        lines[0] -= unit;
                    } else {
                        lines[i] += unit;
                    }
                }
            }
            if bad_left {
                re_lo -= unit;
            }
            if bad_right {
                re_hi += unit;
            }
        }
        let rect = Rect { re_lo, re_hi, im_lo: lines[0], im_hi: lines[lines.len() - 1] };
        Err(SpectrumError::Isolation { rect, detail: format!("slab contours kept hitting zeros: {last:?}") })
    }

    fn guesses(&self, rect: &Rect) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(2);
        if let Some(model) = &self.model {
            let c = rect.center();
            if c.im > 0.0 {
                let m = model.value(model.nearest_index(c));
                if rect.contains(m, 0.0) {
                    out.push(m);
                }
            }
        }
        out.push(rect.center());
        out
    }

    /// Roots inside `rect`, which is known to hold `count` zeros.
    fn isolate(&self, rect: &Rect, count: usize) -> Result<Vec<Root>, SpectrumError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let margin = 10.0 * self.root_tol();
        if count == 1 {
            for start in self.guesses(rect) {
                if let Ok(root) = self.newton(start, 1, rect, false) {
                    if rect.contains(root.value, margin) {
                        return Ok(vec![root]);
                    }
                }
            }
        }
        let cluster_size = 1e-4 * self.slab_height;
        if count >= 2 && rect.diagonal() < cluster_size {
            return self.newton(rect.center(), count, rect, false).map(|r| vec![r]);
        }
        if rect.diagonal() < 1e-12 * (1.0 + rect.center().norm()) {
            return Err(SpectrumError::Isolation { rect: *rect, detail: "box shrank below resolution".into() });
        }

        let mut last = String::new();
        for (fx, fy) in SPLITS {
            let (fx, fy) = if rect.width() > 2.0 * rect.height() {
                (fx, 1.0)
            } else if rect.height() > 2.0 * rect.width() {
                (1.0, fy)
            } else {
                (fx, fy)
            };
            let children = rect.split(fx, fy);
            let counts: Vec<Result<usize, ContourFailure>> =
                children.par_iter().map(|c| self.tracker.winding(c)).collect();
            let mut ok = Vec::with_capacity(counts.len());
            for c in counts {
                match c {
                    Ok(n) => ok.push(n),
                    Err(ContourFailure::Ode(e)) => return Err(e.into()),
                    Err(f) => last = format!("{f:?}"),
                }
            }
            if ok.len() != children.len() {
                continue;
            }
            let total: usize = ok.iter().sum();
            if total != count {
                last = format!("child counts {ok:?} do not add up to {count}");
                continue;
            }
            let roots: Vec<Vec<Root>> =
                children.par_iter().zip(ok.par_iter()).map(|(c, &n)| self.isolate(c, n)).collect::<Result<_, _>>()?;
            return Ok(roots.into_iter().flatten().collect());
        }
        if count >= 2 {
            if let Ok(root) = self.newton(rect.center(), count, rect, false) {
                return Ok(vec![root]);
            }
        }
        Err(SpectrumError::Isolation { rect: *rect, detail: last })
    }

    /// Newton's method `z <- z - m F / F'` started at `start`. The first iterations use a loose
    /// ODE tolerance; if the iteration stalls at the requested tolerance it is tightened.
    fn newton(&self, start: Complex64, multiplicity: usize, rect: &Rect, real: bool) -> Result<Root, SpectrumError> {
        let tol = self.spec.tolerances();
        let m = multiplicity as f64;
        let target = if multiplicity == 1 { tol.root } else { 10.0 * tol.root.powf(1.0 / m) };
        // global ODE error exceeds the local tolerance, so the final stage runs tighter
        let fine = (0.1 * tol.ode).max(FINEST_ODE_TOL);
        let mut ode_tol = (fine * 1e2).min(1e-7).max(fine);
        let mut z = start;
        let mut last = f64::INFINITY;
        let mut stalls = 0;
        let fail = |last_step: f64| SpectrumError::NewtonNonConvergence { rect: *rect, last_step };

        for _ in 0..MAX_NEWTON_ITERATIONS {
            let s = shoot_with_derivative(self.spec, z, ode_tol)?;
            let mut step = m * s.newton_step();
            if real {
                step.im = 0.0;
            }
            if !(step.re.is_finite() && step.im.is_finite()) {
                return Err(fail(last));
            }
            z -= step;
            if !rect.contains(z, rect.diagonal()) {
                return Err(fail(step.norm()));
            }
            let d = step.norm();
            if d <= target {
                if ode_tol > fine {
                    ode_tol = fine;
                    last = d;
                    continue;
                }
                return Ok(Root { value: z, multiplicity, residual: d });
            }
            if ode_tol > fine {
                if d < LOOSE_PHASE_END {
                    ode_tol = fine;
                }
            } else if d < 1e3 * target && d > 0.5 * last {
                if ode_tol > FINEST_ODE_TOL {
                    ode_tol = (ode_tol * 1e-2).max(FINEST_ODE_TOL);
                } else {
                    stalls += 1;
                    if stalls > 3 {
                        return Err(fail(d));
                    }
                }
            }
            last = d;
        }
        Err(fail(last))
    }

    /// Turns a root into records: upper roots yield themselves and a verified conjugate, real
    /// roots are polished on the axis, roots below the axis are dropped.
    fn classify(&self, root: &Root, k: f64) -> Result<Vec<EigenvalueRecord>, SpectrumError> {
        let z = root.value;
        let real_cut = 1e3 * self.root_tol() * z.norm().max(1.0);
        if z.im.abs() <= real_cut {
            let probe = Rect {
                re_lo: z.re - self.slab_height,
                re_hi: z.re + self.slab_height,
                im_lo: -self.slab_height,
                im_hi: self.slab_height,
            };
            let polished = self
                .newton(Complex64::new(z.re, 0.0), root.multiplicity, &probe, true)
                .unwrap_or(Root { value: Complex64::new(z.re, 0.0), ..*root });
            let class = if polished.value.re > 0.0 { EigenClass::RealPositive } else { EigenClass::RealNegative };
            return Ok(vec![EigenvalueRecord {
                index: 0,
                value: polished.value,
                multiplicity: root.multiplicity,
                class,
                residual: polished.residual,
            }]);
        }
        if z.im < 0.0 || z.im > k {
            return Ok(Vec::new());
        }
        let index =
            self.model.map_or_else(|| AsymptoticModel::new(self.spec).nearest_index(z), |m| m.nearest_index(z)) as i64;
        let check = shoot_with_derivative(self.spec, z.conj(), self.spec.tolerances().ode)?;
        let conj_residual = check.newton_step().norm();
        if conj_residual.is_nan() || conj_residual > CONJUGATE_CHECK * z.norm().max(1.0) {
            return Err(SpectrumError::ConjugateMismatch { value: z, residual: conj_residual });
        }
        Ok(vec![
            EigenvalueRecord {
                index,
                value: z,
                multiplicity: root.multiplicity,
                class: EigenClass::Upper,
                residual: root.residual,
            },
            EigenvalueRecord {
                index: -index,
                value: z.conj(),
                multiplicity: root.multiplicity,
                class: EigenClass::Lower,
                residual: conj_residual,
            },
        ])
    }
}
