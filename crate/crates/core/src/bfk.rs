//! Burghelea–Friedlander–Kappeler determinant of a matrix ordinary differential operator
//!
//! `A = sum_k a_k(x) (-i d/dx)^k` of order `2n` with `r x r` coefficients on `[0, T]`, with boundary
//! conditions `sum_{k <= alpha_j} b_{jk} y^(k)(T) = 0` and `sum_{k <= beta_j} c_{jk} y^(k)(0) = 0`:
//!
//! `Det A = K_theta * exp((i/2) int_0^T Tr(a_2n^{-1} a_{2n-1}) dx) * det(B Y(T) - C)`.
//!
//! The constants are implemented for general `n` and `r`; the Cauchy solve for `Y(T)` only for
//! second-order systems (`n = 1`). Boundary data use plain derivatives `y^(k)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ode::{integrate, LinearSystem, OdeError};
use crate::problem::ProblemSpec;
use crate::quadrature::adaptive_simpson;

/// Default `epsilon` in the squared operator's cut angle `theta = -2 epsilon`.
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Nodes at which the leading coefficient is checked for invertibility and its spectrum for
/// avoiding the cut.
const CHECK_NODES: usize = 33;
/// Pivots below this fraction of the matrix norm make a determinant zero.
const SINGULAR_THRESHOLD: f64 = 1e-12;
/// Arguments this close to the cut are rejected.
const BRANCH_GUARD: f64 = 1e-12;
const DEFAULT_ODE_TOL: f64 = 1e-10;
const CLOSED_FORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BfkError {
    #[error("invalid operator: {0}")]
    InvalidSpec(String),
    #[error("eigenvalue {gamma} lies on the cut at angle {theta}")]
    Branch { gamma: Complex64, theta: f64 },
    #[error("leading coefficient is singular at x = {0}")]
    SingularLeading(f64),
    #[error("not implemented for this operator: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Integration(#[from] OdeError),
}

/// An `r x r` real coefficient function.
#[derive(Clone)]
pub enum MatrixCoefficient {
    Zero,
    Constant(DMatrix<f64>),
    Variable(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
}

impl MatrixCoefficient {
    pub fn variable(f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MatrixCoefficient::Variable(Arc::new(f))
    }

    pub fn at(&self, x: f64, r: usize) -> DMatrix<f64> {
        match self {
            MatrixCoefficient::Zero => DMatrix::zeros(r, r),
            MatrixCoefficient::Constant(m) => m.clone(),
            MatrixCoefficient::Variable(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MatrixCoefficient::Zero)
    }
}

impl fmt::Debug for MatrixCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixCoefficient::Zero => write!(f, "Zero"),
            MatrixCoefficient::Constant(m) => write!(f, "Constant({m:?})"),
            MatrixCoefficient::Variable(_) => write!(f, "Variable(..)"),
        }
    }
}

/// Operator, boundary data and cut angle.
///
/// `boundary_b[j]` holds `b_{j0}, ..., b_{j alpha_j}` (conditions at `T`) and `boundary_c[j]`
/// holds `c_{j0}, ..., c_{j beta_j}` (conditions at `0`); the last entry of each must be the
/// identity.
#[derive(Debug, Clone)]
pub struct BfkOperatorSpec {
    pub n: usize,
    pub r: usize,
    /// `a_0, ..., a_2n`
    pub coefficients: Vec<MatrixCoefficient>,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub boundary_b: Vec<Vec<DMatrix<f64>>>,
    pub boundary_c: Vec<Vec<DMatrix<f64>>>,
    pub theta: f64,
    pub length: f64,
    pub ode_tol: f64,
    /// Carried into reports when the operator came from a [`ProblemSpec`].
    pub profile_hash: Option<String>,
}

/// Orders `alpha`, `beta` and the coefficient blocks of the boundary conditions at `0` and `T`.
pub type BoundaryData = (Vec<usize>, Vec<usize>, Vec<Vec<DMatrix<f64>>>, Vec<Vec<DMatrix<f64>>>);

/// Boundary data `y(0) = 0`, `y(T) = 0` (so `n = 1`, `alpha = beta = (0)`).
pub fn dirichlet_data(r: usize) -> BoundaryData {
    let id = DMatrix::identity(r, r);
    (vec![0], vec![0], vec![vec![id.clone()]], vec![vec![id]])
}

fn check_indices(name: &str, idx: &[usize], n: usize) -> Result<(), BfkError> {
    if idx.len() != n {
        return Err(BfkError::InvalidSpec(format!("{name} must have {n} entries")));
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BfkError::InvalidSpec(format!("{name} must be strictly increasing")));
    }
    if idx.iter().any(|&a| a > 2 * n - 1) {
        return Err(BfkError::InvalidSpec(format!("{name} entries must lie in [0, {}]", 2 * n - 1)));
    }
    Ok(())
}

fn check_boundary(name: &str, idx: &[usize], data: &[Vec<DMatrix<f64>>], r: usize) -> Result<(), BfkError> {
    if data.len() != idx.len() {
        return Err(BfkError::InvalidSpec(format!("{name} needs one row per condition")));
    }
    for (j, (row, &a)) in data.iter().zip(idx).enumerate() {
        if row.len() != a + 1 || row.iter().any(|m| m.shape() != (r, r)) {
            return Err(BfkError::InvalidSpec(format!("{name}[{j}] needs {} blocks of size {r}x{r}", a + 1)));
        }
        if row[a] != DMatrix::identity(r, r) {
            return Err(BfkError::InvalidSpec(format!("{name}[{j}] must end with the identity")));
        }
    }
    Ok(())
}

impl BfkOperatorSpec {
    /// Checks sizes, index sets, boundary normalization, and that `a_2n` is invertible with
    /// spectrum off the cut at sampled nodes.
    pub fn validate(&self) -> Result<(), BfkError> {
        let (n, r) = (self.n, self.r);
        if n == 0 || r == 0 {
            return Err(BfkError::InvalidSpec("n and r must be positive".into()));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(BfkError::InvalidSpec(format!("length must be positive, got {}", self.length)));
        }
        if !(self.ode_tol.is_finite() && self.ode_tol > 0.0) || !self.theta.is_finite() {
            return Err(BfkError::InvalidSpec("tolerance and theta must be finite".into()));
        }
        if self.coefficients.len() != 2 * n + 1 {
            return Err(BfkError::InvalidSpec(format!("expected {} coefficients", 2 * n + 1)));
        }
        check_indices("alpha", &self.alpha, n)?;
        check_indices("beta", &self.beta, n)?;
        check_boundary("boundary_b", &self.alpha, &self.boundary_b, r)?;
        check_boundary("boundary_c", &self.beta, &self.boundary_c, r)?;
        for i in 0..CHECK_NODES {
            let x = self.length * i as f64 / (CHECK_NODES - 1) as f64;
            for (k, c) in self.coefficients.iter().enumerate() {
                let m = c.at(x, r);
                if m.shape() != (r, r) || m.iter().any(|v| !v.is_finite()) {
                    return Err(BfkError::InvalidSpec(format!("a_{k}({x}) is not a finite {r}x{r} matrix")));
                }
            }
            let gammas = leading_eigenvalues(&self.leading(x));
            if gammas.iter().any(|g| g.norm() == 0.0) || self.leading(x).determinant() == 0.0 {
                return Err(BfkError::SingularLeading(x));
            }
            for g in gammas {
                branch_arg(g, self.theta)?;
            }
        }
        Ok(())
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    fn leading(&self, x: f64) -> DMatrix<f64> {
        self.coefficients[2 * self.n].at(x, self.r)
    }

    fn abs_alpha(&self) -> i64 {
        self.alpha.iter().sum::<usize>() as i64
    }

    fn abs_beta(&self) -> i64 {
        self.beta.iter().sum::<usize>() as i64
    }
}

/// `g = (|alpha| / n - n + 1/2) / 2`, exactly.
pub fn g_exponent(abs_alpha: i64, n: i64) -> Rational64 {
    (Rational64::new(abs_alpha, n) - Rational64::from_integer(n) + Rational64::new(1, 2)) / 2
}

/// `w_k = exp((2k - n - 1) pi i / (2n))`, `k = 1..n`.
fn roots_w(n: usize) -> Vec<Complex64> {
    (1..=n).map(|k| Complex64::from_polar(1.0, (2.0 * k as f64 - n as f64 - 1.0) * PI / (2.0 * n as f64))).collect()
}

/// `det [w_k^{alpha_j}]_{j,k = 1..n}`.
pub fn h_det(alpha: &[usize], n: usize) -> Complex64 {
    let w = roots_w(n);
    let m = DMatrix::from_fn(n, n, |j, k| w[k].powu(alpha[j] as u32));
    m.determinant()
}

/// Argument of `gamma` chosen in `(theta - 2 pi, theta)`.
fn branch_arg(gamma: Complex64, theta: f64) -> Result<f64, BfkError> {
    let lo = theta - 2.0 * PI;
    let rem = (gamma.arg() - lo).rem_euclid(2.0 * PI);
    if gamma.norm() == 0.0 || rem < BRANCH_GUARD || 2.0 * PI - rem < BRANCH_GUARD {
        return Err(BfkError::Branch { gamma, theta });
    }
    Ok(lo + rem)
}

/// `prod_j |gamma_j|^g exp(i g arg gamma_j)` with `theta - 2 pi < arg gamma_j < theta`.
pub fn det_power_theta(gammas: &[Complex64], g: Rational64, theta: f64) -> Result<Complex64, BfkError> {
    let g = *g.numer() as f64 / *g.denom() as f64;
    gammas.iter().try_fold(Complex64::new(1.0, 0.0), |acc, &gamma| {
        let arg = branch_arg(gamma, theta)?;
        Ok(acc * Complex64::from_polar(gamma.norm().powf(g), g * arg))
    })
}

/// Eigenvalues of a real square matrix; closed form for sizes 1 and 2 so that defective
/// blocks such as `[[-1, 0], [2a, -1]]` give their eigenvalue exactly.
pub fn leading_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    match m.nrows() {
        1 => vec![Complex64::new(m[(0, 0)], 0.0)],
        2 => {
            let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = Complex64::new(half_tr * half_tr - det, 0.0).sqrt();
            vec![half_tr - disc, half_tr + disc]
        }
        _ => m.complex_eigenvalues().iter().copied().collect(),
    }
}

/// `K_theta = [(-1)^|beta| (2n)^n / (h_alpha h_beta)]^r (det a_2n(0))^{g_beta} (det a_2n(T))^{g_alpha}`.
pub fn k_theta(spec: &BfkOperatorSpec) -> Result<Complex64, BfkError> {
    spec.validate()?;
    let n = spec.n;
    let sign = if spec.abs_beta() % 2 == 0 { 1.0 } else { -1.0 };
    let base =
        Complex64::new(sign * ((2 * n) as f64).powi(n as i32), 0.0) / (h_det(&spec.alpha, n) * h_det(&spec.beta, n));
    let g_alpha = g_exponent(spec.abs_alpha(), n as i64);
    let g_beta = g_exponent(spec.abs_beta(), n as i64);
    let at_zero = det_power_theta(&leading_eigenvalues(&spec.leading(0.0)), g_beta, spec.theta)?;
    let at_end = det_power_theta(&leading_eigenvalues(&spec.leading(spec.length)), g_alpha, spec.theta)?;
    Ok(base.powu(spec.r as u32) * at_zero * at_end)
}

/// Block matrices `B` (rows `1..n`, conditions at `T`) and `C` (rows `n+1..2n`, conditions at
/// `0`), each `2nr x 2nr`.
pub fn boundary_matrices(spec: &BfkOperatorSpec) -> Result<(DMatrix<f64>, DMatrix<f64>), BfkError> {
    spec.validate()?;
    let (n, r) = (spec.n, spec.r);
    let size = 2 * n * r;
    let mut b = DMatrix::zeros(size, size);
    let mut c = DMatrix::zeros(size, size);
    for j in 0..n {
        for (k, block) in spec.boundary_b[j].iter().enumerate() {
            b.view_mut((j * r, k * r), (r, r)).copy_from(block);
        }
        for (k, block) in spec.boundary_c[j].iter().enumerate() {
            c.view_mut(((n + j) * r, k * r), (r, r)).copy_from(block);
        }
    }
    Ok((b, c))
}

/// The squared damped wave operator `A = H^2` as a second-order `2 x 2` system:
/// `a_2 = [[-1, 0], [2a, -1]]`, `a_1 = 0`, `a_0 = [[0, -2a], [0, 4a^2]]`, Dirichlet ends, and
/// `theta = -2 epsilon`.
pub fn square_operator(spec: &ProblemSpec) -> Result<BfkOperatorSpec, BfkError> {
    if spec.potential().is_some() {
        return Err(BfkError::Unsupported("the squared operator with a potential".into()));
    }
    let a2 = {
        let a = spec.damping().clone();
        MatrixCoefficient::variable(move |x| DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 2.0 * a.value(x), -1.0]))
    };
    let a0 = {
        let a = spec.damping().clone();
        MatrixCoefficient::variable(move |x| {
            let v = a.value(x);
            DMatrix::from_row_slice(2, 2, &[0.0, -2.0 * v, 0.0, 4.0 * v * v])
        })
    };
    let (alpha, beta, boundary_b, boundary_c) = dirichlet_data(2);
    Ok(BfkOperatorSpec {
        n: 1,
        r: 2,
        coefficients: vec![a0, MatrixCoefficient::Zero, a2],
        alpha,
        beta,
        boundary_b,
        boundary_c,
        theta: -2.0 * DEFAULT_EPSILON,
        length: spec.length(),
        ode_tol: spec.tolerances().ode.min(DEFAULT_ODE_TOL),
        profile_hash: Some(spec.profile_hash()),
    })
}

/// `Y(T)` with blocks `Y_{kl} = y_l^(k)(T)`, where `y_l` solves `A y = 0` with
/// `y_l^(k)(0) = delta_{kl} I`. Only `n = 1`: `y'' = a_2^{-1} (a_0 y - i a_1 y')`.
pub fn cauchy_matrix_solution(spec: &BfkOperatorSpec) -> Result<DMatrix<Complex64>, BfkError> {
    spec.validate()?;
    if spec.n != 1 {
        return Err(BfkError::Unsupported(format!("Cauchy solve of order {}", 2 * spec.n)));
    }
    let r = spec.r;
    let dim = 2 * r;
    let system = LinearSystem::new(dim, (0.0, spec.length), |x, y: &[Complex64], out: &mut [Complex64]| {
        let inv = spec.leading(x).try_inverse().unwrap_or_else(|| DMatrix::from_element(r, r, f64::NAN));
        let a0 = spec.coefficients[0].at(x, r);
        let a1 = (!spec.coefficients[1].is_zero()).then(|| spec.coefficients[1].at(x, r));
        let mut rhs = vec![Complex64::new(0.0, 0.0); r];
        for i in 0..r {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..r {
                s += a0[(i, j)] * y[j];
                if let Some(a1) = &a1 {
                    s -= Complex64::i() * a1[(i, j)] * y[r + j];
                }
            }
            rhs[i] = s;
        }
        for i in 0..r {
            out[i] = y[r + i];
            out[r + i] = (0..r).map(|j| inv[(i, j)] * rhs[j]).sum();
        }
    })?;
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let mut init = vec![Complex64::new(0.0, 0.0); dim];
            init[col] = Complex64::new(1.0, 0.0);
            integrate(&system, &init, spec.ode_tol)
        })
        .collect::<Result<_, _>>()?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| columns[j][i]))
}

/// The block `y_1(x) = [[x, int_0^x int_0^q 2 a(s) s ds dq], [0, x]]` of the squared operator,
/// by nested adaptive quadrature.
pub fn y1_closed_form(spec: &ProblemSpec, x: f64) -> Result<Matrix2<f64>, BfkError> {
    if !(0.0..=spec.length()).contains(&x) {
        return Err(BfkError::InvalidSpec(format!("x = {x} outside [0, {}]", spec.length())));
    }
    let a = spec.damping();
    let inner = |q: f64| adaptive_simpson(|s| 2.0 * a.value(s) * s, 0.0, q, 0.1 * CLOSED_FORM_TOL);
    let corner = adaptive_simpson(inner, 0.0, x, CLOSED_FORM_TOL);
    Ok(Matrix2::new(x, corner, 0.0, x))
}

/// Determinant by LU with partial pivoting; zero when a pivot falls below
/// `1e-12 * |M|`.
fn lu_determinant(m: DMatrix<Complex64>) -> Complex64 {
    let scale = m.norm();
    if scale == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let lu = m.lu();
    let u = lu.u();
    if u.diagonal().iter().any(|p| p.norm() < SINGULAR_THRESHOLD * scale) {
        return Complex64::new(0.0, 0.0);
    }
    lu.determinant()
}

/// `det(B Y - C)`.
pub fn det_byc(spec: &BfkOperatorSpec, y: &DMatrix<Complex64>) -> Result<Complex64, BfkError> {
    let (b, c) = boundary_matrices(spec)?;
    if y.shape() != b.shape() {
        return Err(BfkError::InvalidSpec(format!("Y is {:?}, expected {:?}", y.shape(), b.shape())));
    }
    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    Ok(lu_determinant(to_c(&b) * y - to_c(&c)))
}

/// `exp((i/2) int_0^T Tr(a_2n^{-1} a_{2n-1}) dx)`; exactly one when `a_{2n-1}` is [`MatrixCoefficient::Zero`].
pub fn trace_factor(spec: &BfkOperatorSpec) -> Result<Complex64, BfkError> {
    spec.validate()?;
    let sub = &spec.coefficients[2 * spec.n - 1];
    if sub.is_zero() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let integrand = |x: f64| {
        let inv = spec.leading(x).try_inverse().unwrap_or_else(|| DMatrix::from_element(spec.r, spec.r, f64::NAN));
        (inv * sub.at(x, spec.r)).trace()
    };
    let integral = adaptive_simpson(integrand, 0.0, spec.length, CLOSED_FORM_TOL);
    if !integral.is_finite() {
        return Err(BfkError::SingularLeading(f64::NAN));
    }
    Ok(Complex64::from_polar(1.0, 0.5 * integral))
}

/// Every factor of the determinant formula.
#[derive(Debug, Clone, PartialEq)]
pub struct BfkReport {
    pub k_theta: Complex64,
    pub trace_factor: Complex64,
    pub det_byc: Complex64,
    pub determinant: Complex64,
    pub theta: f64,
    pub profile_hash: Option<String>,
}

#[derive(Serialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl Serialize for BfkReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            #[serde(rename = "K_theta")]
            k_theta: ComplexJson,
            trace_factor: ComplexJson,
            #[serde(rename = "det_BYC")]
            det_byc: ComplexJson,
            determinant: ComplexJson,
            theta: f64,
            profile_hash: &'a Option<String>,
        }
        Wire {
            k_theta: self.k_theta.into(),
            trace_factor: self.trace_factor.into(),
            det_byc: self.det_byc.into(),
            determinant: self.determinant.into(),
            theta: self.theta,
            profile_hash: &self.profile_hash,
        }
        .serialize(s)
    }
}

/// `Det A = K_theta * trace factor * det(B Y(T) - C)`.
pub fn bfk_determinant(spec: &BfkOperatorSpec) -> Result<BfkReport, BfkError> {
    let k = k_theta(spec)?;
    let trace = trace_factor(spec)?;
    let y = cauchy_matrix_solution(spec)?;
    let d = det_byc(spec, &y)?;
    Ok(BfkReport {
        k_theta: k,
        trace_factor: trace,
        det_byc: d,
        determinant: k * trace * d,
        theta: spec.theta,
        profile_hash: spec.profile_hash.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::CoefficientProfile;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(a: CoefficientProfile) -> ProblemSpec {
        ProblemSpec::new(a.length(), a).unwrap()
    }

    fn scalar_dirichlet(a2: f64, r: usize, theta: f64) -> BfkOperatorSpec {
        let (alpha, beta, boundary_b, boundary_c) = dirichlet_data(r);
        BfkOperatorSpec {
            n: 1,
            r,
            coefficients: vec![
                MatrixCoefficient::Zero,
                MatrixCoefficient::Zero,
                MatrixCoefficient::Constant(DMatrix::identity(r, r) * a2),
            ],
            alpha,
            beta,
            boundary_b,
            boundary_c,
            theta,
            length: 1.0,
            ode_tol: 1e-10,
            profile_hash: None,
        }
    }

    #[test]
    fn g_exponent_examples() {
        assert_eq!(g_exponent(0, 1), Rational64::new(-1, 4));
        assert_eq!(g_exponent(1, 1), Rational64::new(1, 4));
        assert_eq!(g_exponent(1, 2), Rational64::new(-1, 2));
    }

    #[test]
    fn h_det_examples() {
        assert_eq!(h_det(&[0], 1), c(1.0, 0.0));
        assert!((h_det(&[0, 1], 2) - c(0.0, 2f64.sqrt())).norm() < 1e-15);
        assert!((h_det(&[0, 2], 2) - c(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn det_power_examples() {
        let g = Rational64::new(-1, 4);
        let m1 = [c(-1.0, 0.0), c(-1.0, 0.0)];
        assert!((det_power_theta(&m1, g, -0.1).unwrap() - c(0.0, 1.0)).norm() < 1e-15);
        assert!((det_power_theta(&m1, g, 1.5 * PI).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(det_power_theta(&[c(1.0, 0.0)], Rational64::new(7, 3), PI / 2.0).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn det_power_rejects_cut() {
        let g = Rational64::new(1, 2);
        assert!(matches!(det_power_theta(&[c(-2.0, 0.0)], g, PI), Err(BfkError::Branch { .. })));
        assert!(matches!(det_power_theta(&[c(0.0, 0.0)], g, 0.3), Err(BfkError::Branch { .. })));
    }

    #[test]
    fn k_theta_examples() {
        let sq = square_operator(&problem(CoefficientProfile::zero(1.0).unwrap())).unwrap();
        assert!((k_theta(&sq).unwrap() - c(-4.0, 0.0)).norm() < 1e-12);
        assert!((k_theta(&scalar_dirichlet(1.0, 1, PI / 2.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        assert!((k_theta(&scalar_dirichlet(1.0, 2, PI / 2.0)).unwrap() - c(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn boundary_matrix_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let z = DMatrix::<f64>::zeros(2, 2);
        let block = |m: [[&DMatrix<f64>; 2]; 2]| {
            let mut out = DMatrix::zeros(4, 4);
            for (i, row) in m.iter().enumerate() {
                for (j, b) in row.iter().enumerate() {
                    out.view_mut((2 * i, 2 * j), (2, 2)).copy_from(*b);
                }
            }
            out
        };
        let mut spec = scalar_dirichlet(1.0, 2, PI / 2.0);
        let (b, cm) = boundary_matrices(&spec).unwrap();
        assert_eq!(b, block([[&id, &z], [&z, &z]]));
        assert_eq!(cm, block([[&z, &z], [&id, &z]]));

        // Neumann at T
        spec.alpha = vec![1];
        spec.boundary_b = vec![vec![z.clone(), id.clone()]];
        let (b, cm) = boundary_matrices(&spec).unwrap();
        assert_eq!(b, block([[&z, &id], [&z, &z]]));
        assert_eq!(cm, block([[&z, &z], [&id, &z]]));

        // Neumann at both ends
        spec.beta = vec![1];
        spec.boundary_c = vec![vec![z.clone(), id.clone()]];
        let (_, cm) = boundary_matrices(&spec).unwrap();
        assert_eq!(cm, block([[&z, &z], [&z, &id]]));
    }

    #[test]
    fn validation_catches_bad_data() {
        let mut spec = scalar_dirichlet(1.0, 2, PI / 2.0);
        spec.alpha = vec![2];
        assert!(spec.validate().is_err());
        let mut spec = scalar_dirichlet(1.0, 2, PI / 2.0);
        spec.boundary_b = vec![vec![DMatrix::identity(2, 2) * 2.0]];
        assert!(spec.validate().is_err());
        // leading coefficient on the cut
        assert!(matches!(scalar_dirichlet(1.0, 1, 0.0).validate(), Err(BfkError::Branch { .. })));
        assert!(matches!(scalar_dirichlet(0.0, 1, 1.0).validate(), Err(BfkError::SingularLeading(_))));
    }

    #[test]
    fn square_operator_coefficients() {
        let sq = square_operator(&problem(CoefficientProfile::zero(1.0).unwrap())).unwrap();
        assert_eq!(sq.coefficients[2].at(0.3, 2), -DMatrix::<f64>::identity(2, 2));
        assert_eq!(sq.coefficients[0].at(0.3, 2), DMatrix::<f64>::zeros(2, 2));
        assert!(sq.coefficients[1].is_zero());

        let sq = square_operator(&problem(CoefficientProfile::constant(1.0, 1.0).unwrap())).unwrap();
        assert_eq!(sq.coefficients[2].at(0.5, 2), DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 2.0, -1.0]));
        assert_eq!(sq.coefficients[0].at(0.5, 2), DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 4.0]));
        assert_eq!(sq.theta, -2e-3);

        let sq = square_operator(&problem(CoefficientProfile::sine(3.0, PI, 1.0).unwrap())).unwrap();
        for x in [0.0, 0.25, 0.8] {
            assert_eq!(leading_eigenvalues(&sq.coefficients[2].at(x, 2)), vec![c(-1.0, 0.0); 2]);
        }
    }

    #[test]
    fn square_operator_rejects_potential() {
        let p = problem(CoefficientProfile::zero(1.0).unwrap())
            .with_potential(CoefficientProfile::constant(1.0, 1.0).unwrap())
            .unwrap();
        assert!(matches!(square_operator(&p), Err(BfkError::Unsupported(_))));
    }

    #[test]
    fn cauchy_solution_constant_damping() {
        let sq = square_operator(&problem(CoefficientProfile::constant(1.0, 1.0).unwrap())).unwrap();
        let y = cauchy_matrix_solution(&sq).unwrap();
        let y1 = y.view((0, 2), (2, 2));
        let expected = [[1.0, 1.0 / 3.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((y1[(i, j)] - c(expected[i][j], 0.0)).norm() < 1e-9, "{y1}");
            }
        }
    }

    #[test]
    fn closed_form_block() {
        let p = problem(CoefficientProfile::zero(2.0).unwrap());
        assert_eq!(y1_closed_form(&p, 1.5).unwrap(), Matrix2::new(1.5, 0.0, 0.0, 1.5));
        let p = problem(CoefficientProfile::constant(1.0, 1.0).unwrap());
        let m = y1_closed_form(&p, 1.0).unwrap();
        assert!((m[(0, 1)] - 1.0 / 3.0).abs() < 1e-10);
        assert!(y1_closed_form(&p, 1.5).is_err());
    }

    #[test]
    fn det_byc_examples() {
        let spec = scalar_dirichlet(1.0, 2, PI / 2.0);
        let id = DMatrix::<Complex64>::identity(4, 4);
        assert_eq!(det_byc(&spec, &id).unwrap(), c(0.0, 0.0));
        for t in [1.0, 3.0] {
            let sq = square_operator(&problem(CoefficientProfile::sine(1.0, PI / t, t).unwrap())).unwrap();
            let y = cauchy_matrix_solution(&sq).unwrap();
            let d = det_byc(&sq, &y).unwrap();
            assert!((d - c(t * t, 0.0)).norm() < 1e-8 * t * t, "{d}");
        }
    }

    #[test]
    fn trace_factor_neutral_and_general() {
        let sq = square_operator(&problem(CoefficientProfile::constant(2.0, 1.0).unwrap())).unwrap();
        assert_eq!(trace_factor(&sq).unwrap(), c(1.0, 0.0));
        let mut spec = scalar_dirichlet(1.0, 1, PI / 2.0);
        spec.coefficients[1] = MatrixCoefficient::Constant(DMatrix::from_element(1, 1, 0.4));
        // exp((i/2) * 0.4)
        assert!((trace_factor(&spec).unwrap() - Complex64::from_polar(1.0, 0.2)).norm() < 1e-12);
    }

    #[test]
    fn bfk_squared_operator() {
        let cases = [
            (CoefficientProfile::zero(1.0).unwrap(), -4.0),
            (CoefficientProfile::sine(1.0, PI, 1.0).unwrap(), -4.0),
            (CoefficientProfile::constant(3.0, 2.0).unwrap(), -16.0),
        ];
        for (a, expected) in cases {
            let report = bfk_determinant(&square_operator(&problem(a)).unwrap()).unwrap();
            assert!((report.determinant - c(expected, 0.0)).norm() < 1e-7 * expected.abs(), "{report:?}");
        }
    }

    #[test]
    fn report_json_field_names() {
        let report =
            bfk_determinant(&square_operator(&problem(CoefficientProfile::zero(1.0).unwrap())).unwrap()).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["K_theta", "det_BYC", "determinant", "profile_hash", "theta", "trace_factor"]);
    }
}
