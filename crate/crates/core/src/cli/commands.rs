use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::config::{Format, RunConfig};
use super::output::{to_value, write_json, write_text};
use super::CliError;
use crate::bfk::{bfk_determinant, cauchy_matrix_solution, square_operator, y1_closed_form, BfkReport};
use crate::eigensolver::{
    asymptotic_residuals, characteristic, count_in_rectangle, find_spectrum, find_spectrum_detailed,
    outer_annulus_count, search_radius, spectrum_to_csv, AsymptoticModel, Rect, Spectrum, SpectrumDocument,
};
use crate::problem::ProblemSpec;
use crate::zeta::{
    automatic_epsilon, det_h0_closed_form, lift_determinant, potential_determinant, relative_determinant,
    rhs_negative_definiteness, BranchCut, DeterminantResult, Method, ZetaError,
};

/// Seed for the random sample points of the verify command.
const VERIFY_SEED: u64 = 0x5eed_da3d;
const VERIFY_SAMPLES: usize = 20;

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn zeta_error(e: ZetaError) -> CliError {
    match e {
        ZetaError::OddCardinality(_) => CliError::Invariant(e.to_string()),
        other => numerical(other),
    }
}

pub fn spectrum(config: &RunConfig, dir: &Path) -> Result<String, CliError> {
    let spec = config.problem()?;
    let k = config.strip_height();
    let (spectrum, report) = find_spectrum_detailed(&spec, k).map_err(numerical)?;
    let annulus = outer_annulus_count(&spec, k).map_err(numerical)?;

    if config.wants(Format::Csv) {
        write_text(dir, "spectrum.csv", &spectrum_to_csv(&spectrum).map_err(numerical)?)?;
    }
    if config.wants(Format::Json) {
        write_json(dir, "spectrum.json", &to_value(&SpectrumDocument::from(&spectrum)))?;
    }
    if spec.potential().is_none() {
        write_text(dir, "residuals.csv", &residuals_csv(&spectrum, &spec, config.j_max())?)?;
    }

    let parity_ok = spectrum.card_i2 % 2 == 0;
    let summary = json!({
        "T": spec.length(),
        "K": k,
        "profile_hash": spec.profile_hash(),
        "eigenvalue_count": spectrum.total_multiplicity(),
        "card_I1": spectrum.card_i1,
        "card_I2": spectrum.card_i2,
        "conjugate_defect": spectrum.conjugate_defect(),
        "min_phase_gap": spectrum.min_phase_gap(),
        "outer_annulus_count": annulus,
        "search": {
            "radius": search_radius(&spec),
            "slabs": report.slabs,
            "counted": report.counted,
            "perturbations": report.perturbations,
            "region": to_value(&report.region),
        },
        "invariants": {"card_I2_even": parity_ok, "outer_annulus_empty": annulus == 0},
    });
    write_json(dir, "summary.json", &summary)?;
    if !parity_ok {
        return Err(CliError::Invariant(format!("card I2 = {} is odd", spectrum.card_i2)));
    }
    if annulus != 0 {
        return Err(CliError::Invariant(format!("{annulus} eigenvalues outside the search radius")));
    }
    Ok(format!(
        "spectrum: {} eigenvalues with |Im| <= {k}, card_I1 = {}, card_I2 = {}",
        spectrum.total_multiplicity(),
        spectrum.card_i1,
        spectrum.card_i2
    ))
}

fn residuals_csv(spectrum: &Spectrum, spec: &ProblemSpec, j_max: usize) -> Result<String, CliError> {
    let rows = asymptotic_residuals(spectrum, spec).map_err(numerical)?;
    let model = AsymptoticModel::new(spec);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["j", "re", "im", "model_re", "model_im", "re_residual", "im_residual", "flagged"]).map_err(io)?;
    for r in rows.iter().filter(|r| r.j <= j_max) {
        let m = model.value(r.j);
        w.write_record([
            r.j.to_string(),
            format!("{:e}", r.value.re),
            format!("{:e}", r.value.im),
            format!("{:e}", m.re),
            format!("{:e}", m.im),
            format!("{:e}", r.re_residual),
            format!("{:e}", r.im_residual),
            r.flagged.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

/// Strip height for a determinant run: tall enough for `N` pairs when the relative product is
/// requested.
fn det_strip(config: &RunConfig, methods: &[Method]) -> f64 {
    let k = config.strip_height();
    if methods.contains(&Method::RelativeProduct) {
        k.max((config.truncation() as f64 + 0.5) * PI / config.length)
    } else {
        k
    }
}

pub fn det(config: &RunConfig, dir: &Path) -> Result<String, CliError> {
    let spec = config.problem()?;
    let methods = config.methods();
    let needs_spectrum =
        config.epsilon.is_none() || methods.iter().any(|m| matches!(m, Method::BfkLift | Method::RelativeProduct));
    let spectrum =
        if needs_spectrum { Some(find_spectrum(&spec, det_strip(config, &methods)).map_err(numerical)?) } else { None };
    let (epsilon, source) = match (config.epsilon, &spectrum) {
        (Some(e), _) => (e, "config"),
        (None, Some(s)) => (automatic_epsilon(s), "automatic"),
        (None, None) => unreachable!("a spectrum is computed whenever epsilon is automatic"),
    };
    let cut = BranchCut::new(config.cut_convention(), epsilon).map_err(|e| CliError::Config(e.to_string()))?;

    let mut results: Vec<DeterminantResult> = Vec::new();
    let mut bfk: Option<BfkReport> = None;
    for method in &methods {
        let r = match method {
            Method::ClosedFormZeta => det_h0_closed_form(spec.length(), cut).map_err(zeta_error)?,
            Method::BfkLift => {
                let op = square_operator(&spec).map_err(numerical)?.with_theta(cut.squared_angle());
                let report = bfk_determinant(&op).map_err(numerical)?;
                let card = spectrum.as_ref().map_or(0, |s| s.card_i2);
                let lifted = lift_determinant(report.determinant, card, cut).map_err(zeta_error)?;
                bfk = Some(report);
                lifted
            }
            Method::RelativeProduct => {
                let s = spectrum.as_ref().expect("spectrum computed for relative_product");
                relative_determinant(s, &spec, config.truncation(), cut).map_err(zeta_error)?
            }
            Method::PotentialCauchy => potential_determinant(&spec, cut).map_err(zeta_error)?,
        };
        results.push(r);
    }

    let mut by_method = Map::new();
    for r in &results {
        by_method.insert(r.method.as_str().to_string(), to_value(r));
    }
    let mut agreement = Map::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            let key = format!("{}-{}", a.method.as_str(), b.method.as_str());
            agreement.insert(key, json!((a.value - b.value).norm()));
        }
    }
    let doc = json!({
        "T": spec.length(),
        "profile_hash": spec.profile_hash(),
        "cut": cut.convention,
        "epsilon": epsilon,
        "epsilon_source": source,
        "card_I2": spectrum.as_ref().map(|s| s.card_i2),
        "results": by_method,
        "agreement": agreement,
        "bfk": bfk.as_ref().map(to_value),
    });
    write_json(dir, "determinant.json", &doc)?;
    let line: Vec<String> =
        results.iter().map(|r| format!("{} = {:.12} {:+.3e}i", r.method.as_str(), r.value.re, r.value.im)).collect();
    Ok(format!("det ({}): {}", cut.convention, line.join(", ")))
}

struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, passed: value <= tolerance, value, tolerance }
    }

    fn exact(name: &'static str, value: f64, expected: f64) -> Self {
        Self { name, passed: value == expected, value, tolerance: 0.0 }
    }
}

/// Relative distance between `F(conj z)` and `conj F(z)`, compared in scaled form.
fn conjugate_asymmetry(spec: &ProblemSpec, z: Complex64) -> Result<f64, CliError> {
    let f = characteristic(spec, z).map_err(numerical)?;
    let g = characteristic(spec, z.conj()).map_err(numerical)?;
    let m = f.log_scale.max(g.log_scale);
    let a = f.value.conj() * (f.log_scale - m).exp();
    let b = g.value * (g.log_scale - m).exp();
    Ok((a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE))
}

/// True when the later residuals are on the whole smaller than the early ones.
fn decays(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let third = values.len() / 3;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    mean(&values[values.len() - third..]) < mean(&values[..third])
}

pub fn verify(config: &RunConfig, dir: &Path) -> Result<String, CliError> {
    let spec = config.problem()?;
    let t = spec.length();
    let j_max = config.j_max();
    let k = config.strip_height().max((j_max as f64 + 0.5) * PI / t);
    let mut checks = Vec::new();

    let (spectrum, report) = find_spectrum_detailed(&spec, k).map_err(numerical)?;
    let r = search_radius(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mut worst = 0.0f64;
    for _ in 0..VERIFY_SAMPLES {
        let z = Complex64::new(rng.gen_range(-r..r), rng.gen_range(-k..k));
        worst = worst.max(conjugate_asymmetry(&spec, z)?);
    }
    checks.push(Check::at_most("conjugate_symmetry", worst, 1e-10));
    checks.push(Check::at_most("spectrum_conjugate_closure", spectrum.conjugate_defect(), spec.tolerances().root));
    checks.push(Check::exact("card_I2_parity", (spectrum.card_i2 % 2) as f64, 0.0));
    let strip = Rect { im_lo: -report.region.im_hi, ..report.region };
    let counted = count_in_rectangle(&spec, strip).map_err(numerical)?;
    let in_strip: usize =
        spectrum.records.iter().filter(|r| r.value.im.abs() <= strip.im_hi).map(|r| r.multiplicity).sum();
    checks.push(Check::exact("strip_count_matches", counted as f64, in_strip as f64));
    let annulus = outer_annulus_count(&spec, k).map_err(numerical)?;
    checks.push(Check::exact("outer_annulus_empty", annulus as f64, 0.0));

    if spec.potential().is_none() {
        let f0 = characteristic(&spec, Complex64::new(0.0, 0.0)).map_err(numerical)?.to_complex();
        checks.push(Check::at_most("characteristic_at_zero", (f0 - t).norm(), 1e-9));

        let op = square_operator(&spec).map_err(numerical)?;
        let y = cauchy_matrix_solution(&op).map_err(numerical)?;
        let closed = y1_closed_form(&spec, t).map_err(numerical)?;
        let mut diff = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                diff = diff.max((y[(i, 2 + j)] - closed[(i, j)]).norm());
            }
        }
        checks.push(Check::at_most("cauchy_matches_closed_form", diff, 1e-8));
        let det_y1 = y[(0, 2)] * y[(1, 3)] - y[(0, 3)] * y[(1, 2)];
        checks.push(Check::at_most("det_y1_equals_T_squared", (det_y1 - t * t).norm() / (t * t), 1e-8));

        let bfk = bfk_determinant(&op).map_err(numerical)?;
        let four = 4.0 * t * t;
        checks.push(Check::at_most("det_A_equals_minus_4T2", (bfk.determinant + four).norm() / four, 1e-7));
        for cut in [BranchCut::above_negative_axis(), BranchCut::below_positive_axis()] {
            let lifted = lift_determinant(bfk.determinant, spectrum.card_i2, cut).map_err(zeta_error)?;
            let closed = det_h0_closed_form(t, cut).map_err(zeta_error)?;
            let name = match cut.convention {
                crate::zeta::CutConvention::AboveNegativeAxis => "lift_matches_closed_form_above",
                crate::zeta::CutConvention::BelowPositiveAxis => "lift_matches_closed_form_below",
            };
            checks.push(Check::at_most(name, (lifted.value - closed.value).norm() / (2.0 * t), 1e-6));
        }

        let rows: Vec<_> = asymptotic_residuals(&spectrum, &spec)
            .map_err(numerical)?
            .into_iter()
            .filter(|r| r.j >= 5 && r.j <= j_max)
            .collect();
        let re: Vec<f64> = rows.iter().map(|r| r.re_residual).collect();
        let im: Vec<f64> = rows.iter().map(|r| r.im_residual).collect();
        let flat = |v: &[f64]| v.iter().all(|x| *x <= 1e-7);
        checks.push(Check::exact("asymptotic_re_decay", (decays(&re) || flat(&re)) as u8 as f64, 1.0));
        checks.push(Check::exact("asymptotic_im_decay", (decays(&im) || flat(&im)) as u8 as f64, 1.0));
    } else {
        let (negative, positive) = rhs_negative_definiteness(&spec).map_err(zeta_error)?;
        checks.push(Check::exact("rhs_count_consistent", (negative == (positive == 0)) as u8 as f64, 1.0));
        let d = potential_determinant(&spec, BranchCut::above_negative_axis()).map_err(zeta_error)?;
        checks.push(Check::exact("potential_determinant_real", d.is_real_within(1e-8) as u8 as f64, 1.0));
    }

    let all = checks.iter().all(|c| c.passed);
    let list: Vec<Value> = checks
        .iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "value": c.value, "tolerance": c.tolerance}))
        .collect();
    let doc = json!({
        "T": t,
        "K": k,
        "profile_hash": spec.profile_hash(),
        "all_passed": all,
        "checks": list,
    });
    write_json(dir, "verify.json", &doc)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(format!("verify: {} checks passed", checks.len()))
}
