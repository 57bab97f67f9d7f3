//! The damped wave problem on `[0, T]`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::profiles::CoefficientProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("interval length must be positive and finite, got {0}")]
    Length(f64),
    #[error("{name} profile is defined on [0, {profile}] but the interval is [0, {interval}]")]
    ProfileLength { name: &'static str, profile: f64, interval: f64 },
    #[error("tolerances must be positive and finite")]
    Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Integration tolerance for the shooting and Cauchy solves.
    pub ode: f64,
    /// Newton stopping threshold on `|delta lambda|`.
    pub root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ode: 1e-10, root: 1e-10 }
    }
}

/// `u_tt + 2 a(x) u_t = u_xx [+ b(x) u]` with Dirichlet ends on `[0, length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    length: f64,
    damping: CoefficientProfile,
    potential: Option<CoefficientProfile>,
    tolerances: Tolerances,
}

impl ProblemSpec {
    pub fn new(length: f64, damping: CoefficientProfile) -> Result<Self, ProblemError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ProblemError::Length(length));
        }
        check_length("damping", &damping, length)?;
        Ok(Self { length, damping, potential: None, tolerances: Tolerances::default() })
    }

    pub fn with_potential(mut self, potential: CoefficientProfile) -> Result<Self, ProblemError> {
        check_length("potential", &potential, self.length)?;
        self.potential = Some(potential);
        Ok(self)
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Result<Self, ProblemError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(tolerances.ode) && ok(tolerances.root)) {
            return Err(ProblemError::Tolerance);
        }
        self.tolerances = tolerances;
        Ok(self)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn damping(&self) -> &CoefficientProfile {
        &self.damping
    }

    pub fn potential(&self) -> Option<&CoefficientProfile> {
        self.potential.as_ref()
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    /// Short stable digest of the interval length and coefficient descriptions.
    pub fn profile_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.length.to_le_bytes());
        hasher.update(serde_json::to_vec(self.damping.kind()).unwrap_or_default());
        if let Some(b) = &self.potential {
            hasher.update(b"potential");
            hasher.update(serde_json::to_vec(b.kind()).unwrap_or_default());
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

fn check_length(name: &'static str, p: &CoefficientProfile, length: f64) -> Result<(), ProblemError> {
    if (p.length() - length).abs() > 1e-12 * length.max(1.0) {
        return Err(ProblemError::ProfileLength { name, profile: p.length(), interval: length });
    }
    Ok(())
}
