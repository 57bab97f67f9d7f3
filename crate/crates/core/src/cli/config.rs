//! The single-document JSON run configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Deserialize;

use super::CliError;
use crate::problem::{ProblemSpec, Tolerances};
use crate::profiles::{CoefficientProfile, ProfileKind};
use crate::zeta::{BranchCut, CutConvention, Method};

/// Strip height used when `K` is not given, in units of `pi / T`.
const DEFAULT_STRIPS: f64 = 10.5;
/// Highest asymptotic index reported when `jMax` is not given.
const DEFAULT_J_MAX: usize = 25;
const DEFAULT_N: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub length: f64,
    #[serde(default = "no_damping")]
    pub damping: ProfileKind,
    pub potential: Option<ProfileKind>,
    #[serde(rename = "K")]
    pub strip_height: Option<f64>,
    #[serde(rename = "N")]
    pub truncation: Option<usize>,
    #[serde(rename = "jMax")]
    pub j_max: Option<usize>,
    pub cut: Option<CutConvention>,
    pub epsilon: Option<f64>,
    pub methods: Option<Vec<Method>>,
    pub tol: Option<Tolerances>,
    #[serde(default)]
    pub out: OutputConfig,
}

fn no_damping() -> ProfileKind {
    ProfileKind::Constant { value: 0.0 }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Config(m));
        if !(self.length.is_finite() && self.length > 0.0) {
            return invalid(format!("T must be positive, got {}", self.length));
        }
        if let Some(k) = self.strip_height {
            if !(k.is_finite() && k > 0.0) {
                return invalid(format!("K must be positive, got {k}"));
            }
        }
        if self.truncation == Some(0) || self.j_max == Some(0) {
            return invalid("N and jMax must be at least 1".into());
        }
        if let Some(eps) = self.epsilon {
            BranchCut::new(CutConvention::AboveNegativeAxis, eps).map_err(|e| CliError::Config(e.to_string()))?;
        }
        let has_potential = self.potential.is_some();
        for m in self.methods() {
            match m {
                Method::BfkLift if has_potential => {
                    return invalid("bfk_lift does not support a potential; use potential_cauchy".into())
                }
                Method::PotentialCauchy if !has_potential => {
                    return invalid("potential_cauchy needs a potential".into())
                }
                _ => {}
            }
        }
        self.problem()?;
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let damping = CoefficientProfile::new(self.damping.clone(), self.length).map_err(|e| bad(&e))?;
        let mut spec = ProblemSpec::new(self.length, damping).map_err(|e| bad(&e))?;
        if let Some(p) = &self.potential {
            let b = CoefficientProfile::new(p.clone(), self.length).map_err(|e| bad(&e))?;
            spec = spec.with_potential(b).map_err(|e| bad(&e))?;
        }
        if let Some(tol) = self.tol {
            spec = spec.with_tolerances(tol).map_err(|e| bad(&e))?;
        }
        Ok(spec)
    }

    pub fn strip_height(&self) -> f64 {
        self.strip_height.unwrap_or(DEFAULT_STRIPS * PI / self.length)
    }

    pub fn truncation(&self) -> usize {
        self.truncation.unwrap_or(DEFAULT_N)
    }

    pub fn j_max(&self) -> usize {
        self.j_max.unwrap_or(DEFAULT_J_MAX)
    }

    pub fn cut_convention(&self) -> CutConvention {
        self.cut.unwrap_or(CutConvention::AboveNegativeAxis)
    }

    /// Requested methods; defaults depend on whether a potential is present.
    pub fn methods(&self) -> Vec<Method> {
        match &self.methods {
            Some(m) => m.clone(),
            None if self.potential.is_some() => vec![Method::PotentialCauchy],
            None => vec![Method::BfkLift, Method::ClosedFormZeta],
        }
    }

    pub fn formats(&self) -> Vec<Format> {
        self.out.formats.clone().unwrap_or_else(|| vec![Format::Json, Format::Csv])
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats().contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::parse(r#"{"T": 1, "damping": {"kind": "constant", "value": 4}, "K": 7}"#).unwrap();
        assert_eq!(c.strip_height(), 7.0);
        assert_eq!(c.methods(), vec![Method::BfkLift, Method::ClosedFormZeta]);
        assert_eq!(c.cut_convention(), CutConvention::AboveNegativeAxis);
        assert!(c.wants(Format::Csv));
    }

    #[test]
    fn potential_only_config() {
        let c = RunConfig::parse(
            r#"{"T": 1, "potential": {"kind": "constant", "value": -1}, "methods": ["potential_cauchy"]}"#,
        )
        .unwrap();
        assert!(c.problem().unwrap().damping().is_identically_zero());
        assert_eq!(c.methods(), vec![Method::PotentialCauchy]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::parse(r#"{"T": 1, "Q": 2}"#), Err(CliError::ConfigParse(_))));
        assert!(matches!(RunConfig::parse("{T: 1"), Err(CliError::ConfigParse(_))));
        assert!(matches!(RunConfig::parse(r#"{"T": -1}"#), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse(r#"{"T": 1, "K": 0}"#), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse(r#"{"T": 1, "methods": ["potential_cauchy"]}"#), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse(r#"{"T": 1, "methods": ["magic"]}"#), Err(CliError::ConfigParse(_))));
        assert!(matches!(RunConfig::parse(r#"{"T": 1, "epsilon": 2}"#), Err(CliError::Config(_))));
    }
}
