//! Spectra and zeta-regularized determinants of the damped wave operator on an interval.

pub mod bfk;
pub mod cli;
pub mod eigensolver;
pub mod ode;
pub mod problem;
pub mod profiles;
mod quadrature;
pub mod zeta;
