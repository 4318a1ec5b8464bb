//! Catalog of benchmark PDE problems on `[-1, 1]^m`.
//!
//! Every entry stores a right-hand side that is consistent with its analytic
//! solution under the residual conventions below (checked by tests on dense
//! grids with hand-coded derivatives):
//!
//! * Poisson: `-Δu - f = 0`
//! * QHO: `-Δu + |x|^2 u - λ u = 0`
//! * Burgers: `-u'' + (u^2)'/2 - f = 0`
//! * ODE4: `u'''' - f = 0`

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Poisson,
    Qho,
    Burgers,
    Ode4,
}

/// A condition `d^order u / dx^order (x) = target` at an endpoint of a 1D domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointCondition {
    pub x: f64,
    pub order: usize,
    pub target: f64,
}

/// Optional parameter overrides, as read from a run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub q: Option<f64>,
    pub omega: Option<f64>,
    pub beta: Option<f64>,
    pub amplitude: Option<f64>,
    pub scale: Option<f64>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// `u = cos(λx) sin(λy)`, `λ = 2πq`.
    Poisson2d { q: f64 },
    /// `u = sin(ωx)`.
    Poisson1d { omega: f64 },
    /// `u = C (A sin(ωx) + tanh(βx))`.
    PoissonHard { c: f64, a: f64, beta: f64, omega: f64 },
    /// Hermite-Gaussian eigenfunction with indices `(n1, n2)`.
    Qho2d { n1: usize, n2: usize },
    /// `u = sin(ωx)` for the conservative stationary Burgers equation.
    Burgers1d { omega: f64 },
    /// `u = sin(ωx)` with all four initial conditions at `x = -1`.
    Ode4 { omega: f64 },
    /// `-u'' = λ cos(ωx)`, `u = cos(ωx)`, `λ_gt = ω^2`.
    PoissonInverse1d { omega: f64 },
    /// `-Δu = λ cos(ωx) sin(ωy)`, `u = cos(ωx) sin(ωy)`, `λ_gt = 2ω^2`.
    PoissonInverse2d { omega: f64 },
    /// QHO with unknown eigenvalue.
    QhoInverse { n1: usize, n2: usize },
    /// Polynomial solution `sum c x^p y^q` with the forcing manufactured from
    /// the residual operator of `kind`. Used for exactness checks.
    Polynomial { kind: ResidualKind, dim: usize, terms: Vec<(f64, [u32; 2])> },
}

/// Hard-transition scenario with a sharp `tanh` layer at `β = 30`.
pub const HARD_S1: ProblemSpec = ProblemSpec::PoissonHard { c: 0.1, a: 0.1, beta: 30.0, omega: 20.0 * PI };
/// Hard-transition scenario with a high-frequency component `ω = 26.5π`.
pub const HARD_S2: ProblemSpec = ProblemSpec::PoissonHard { c: 0.1, a: 0.1, beta: 5.0, omega: 26.5 * PI };
/// Reduced hard-transition scenario used for desk-scale runs.
pub const HARD_REDUCED: ProblemSpec = ProblemSpec::PoissonHard { c: 0.1, a: 0.1, beta: 5.0, omega: 4.0 * PI };

pub const PROBLEM_NAMES: [&str; 9] = [
    "poisson2d",
    "poisson1d",
    "poisson1d_hard",
    "qho2d",
    "burgers1d",
    "ode4",
    "poisson_inverse",
    "poisson_inverse2d",
    "qho_inverse",
];

/// Physicists' Hermite polynomial `H_n(x)`, `n <= 20`.
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    if n > 20 {
        return Err(Error::HermiteOutOfRange(n));
    }
    Ok(hermite_unchecked(n, x))
}

fn hermite_unchecked(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `e^{-x^2/2} H_n(x)` and its first two derivatives.
fn hermite_function(n: usize, x: f64) -> [f64; 3] {
    let g = (-0.5 * x * x).exp();
    let h = |k: isize| if k < 0 { 0.0 } else { hermite_unchecked(k as usize, x) };
    let nn = n as isize;
    let nf = n as f64;
    let v = g * h(nn);
    let d1 = g * (-x * h(nn) + 2.0 * nf * h(nn - 1));
    let d2 = g * ((x * x - 1.0) * h(nn) - 4.0 * nf * x * h(nn - 1) + 4.0 * nf * (nf - 1.0) * h(nn - 2));
    [v, d1, d2]
}

/// `d^order/dx^order x^p`.
fn monomial_derivative(x: f64, p: u32, order: usize) -> f64 {
    if order as u32 > p {
        return 0.0;
    }
    let falling: f64 = (0..order as u32).map(|j| (p - j) as f64).product();
    falling * x.powi((p - order as u32) as i32)
}

fn qho_normalisation(n1: usize, n2: usize) -> f64 {
    PI.powf(-0.25) / (2f64.powi((n1 + n2) as i32) * factorial(n1) * factorial(n2)).sqrt()
}

/// `d^order/dx^order sin(ωx)`.
fn sin_derivative(omega: f64, x: f64, order: usize) -> f64 {
    let w = omega.powi(order as i32);
    match order % 4 {
        0 => w * (omega * x).sin(),
        1 => w * (omega * x).cos(),
        2 => -w * (omega * x).sin(),
        _ => -w * (omega * x).cos(),
    }
}

/// `d^order/dx^order cos(ωx)`.
fn cos_derivative(omega: f64, x: f64, order: usize) -> f64 {
    sin_derivative(omega, x, order + 1) / omega
}

/// `d^order/dx^order tanh(βx)` for `order <= 2`.
fn tanh_derivative(beta: f64, x: f64, order: usize) -> f64 {
    let t = (beta * x).tanh();
    let sech2 = 1.0 - t * t;
    match order {
        0 => t,
        1 => beta * sech2,
        2 => -2.0 * beta * beta * sech2 * t,
        _ => unimplemented!("tanh derivatives above order 2 are not needed"),
    }
}

impl ProblemSpec {
    /// Builds a problem by name with optional parameter overrides.
    pub fn from_name(name: &str, p: &ProblemParams) -> Result<Self> {
        let omega = |default: f64| p.omega.unwrap_or(default);
        let spec = match name {
            "poisson2d" => ProblemSpec::Poisson2d { q: p.q.unwrap_or(1.0) },
            "poisson1d" => ProblemSpec::Poisson1d { omega: omega(PI) },
            "poisson1d_hard" => ProblemSpec::PoissonHard {
                c: p.scale.unwrap_or(0.1),
                a: p.amplitude.unwrap_or(0.1),
                beta: p.beta.unwrap_or(5.0),
                omega: omega(4.0 * PI),
            },
            "qho2d" => ProblemSpec::Qho2d { n1: p.n1.unwrap_or(7), n2: p.n2.unwrap_or(7) },
            "burgers1d" => ProblemSpec::Burgers1d { omega: omega(14.0 * PI) },
            "ode4" => ProblemSpec::Ode4 { omega: omega(PI) },
            "poisson_inverse" => ProblemSpec::PoissonInverse1d { omega: omega(PI) },
            "poisson_inverse2d" => ProblemSpec::PoissonInverse2d { omega: omega(PI) },
            "qho_inverse" => ProblemSpec::QhoInverse { n1: p.n1.unwrap_or(2), n2: p.n2.unwrap_or(2) },
            other => return Err(Error::UnknownProblem(other.to_string())),
        };
        if let ProblemSpec::Qho2d { n1, n2 } | ProblemSpec::QhoInverse { n1, n2 } = spec {
            if n1 > 20 || n2 > 20 {
                return Err(Error::HermiteOutOfRange(n1.max(n2)));
            }
        }
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Poisson2d { .. } => "poisson2d",
            ProblemSpec::Poisson1d { .. } => "poisson1d",
            ProblemSpec::PoissonHard { .. } => "poisson1d_hard",
            ProblemSpec::Qho2d { .. } => "qho2d",
            ProblemSpec::Burgers1d { .. } => "burgers1d",
            ProblemSpec::Ode4 { .. } => "ode4",
            ProblemSpec::PoissonInverse1d { .. } => "poisson_inverse",
            ProblemSpec::PoissonInverse2d { .. } => "poisson_inverse2d",
            ProblemSpec::QhoInverse { .. } => "qho_inverse",
            ProblemSpec::Polynomial { .. } => "polynomial",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::Polynomial { dim, .. } => *dim,
            ProblemSpec::Poisson2d { .. }
            | ProblemSpec::Qho2d { .. }
            | ProblemSpec::PoissonInverse2d { .. }
            | ProblemSpec::QhoInverse { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> ResidualKind {
        match self {
            ProblemSpec::Polynomial { kind, .. } => *kind,
            ProblemSpec::Qho2d { .. } | ProblemSpec::QhoInverse { .. } => ResidualKind::Qho,
            ProblemSpec::Burgers1d { .. } => ResidualKind::Burgers,
            ProblemSpec::Ode4 { .. } => ResidualKind::Ode4,
            _ => ResidualKind::Poisson,
        }
    }

    pub fn is_inverse(&self) -> bool {
        matches!(
            self,
            ProblemSpec::PoissonInverse1d { .. } | ProblemSpec::PoissonInverse2d { .. } | ProblemSpec::QhoInverse { .. }
        )
    }

    /// Value of the scalar PDE parameter `λ` at the ground truth, if the
    /// residual has one.
    pub fn lambda_gt(&self) -> Option<f64> {
        match *self {
            ProblemSpec::PoissonInverse1d { omega } => Some(omega * omega),
            ProblemSpec::PoissonInverse2d { omega } => Some(2.0 * omega * omega),
            ProblemSpec::Qho2d { n1, n2 } | ProblemSpec::QhoInverse { n1, n2 } => Some(2.0 * (n1 + n2 + 1) as f64),
            ProblemSpec::Polynomial { kind: ResidualKind::Qho, .. } => Some(1.0),
            _ => None,
        }
    }

    /// Right-hand side `f(x)` given the current value of `λ`.
    pub fn source(&self, x: &[f64], lambda: f64) -> f64 {
        match *self {
            ProblemSpec::Polynomial { .. } => self.operator_of_solution(x),
            ProblemSpec::Poisson2d { q } => {
                let l = 2.0 * PI * q;
                2.0 * l * l * (l * x[0]).cos() * (l * x[1]).sin()
            }
            ProblemSpec::Poisson1d { omega } => omega * omega * (omega * x[0]).sin(),
            ProblemSpec::PoissonHard { c, a, beta, omega } => {
                let t = (beta * x[0]).tanh();
                c * (a * omega * omega * (omega * x[0]).sin() + 2.0 * beta * beta * (1.0 - t * t) * t)
            }
            ProblemSpec::Burgers1d { omega } => {
                0.5 * omega * (2.0 * omega * x[0]).sin() + omega * omega * (omega * x[0]).sin()
            }
            ProblemSpec::Ode4 { omega } => omega.powi(4) * (omega * x[0]).sin(),
            ProblemSpec::PoissonInverse1d { .. } | ProblemSpec::PoissonInverse2d { .. } => {
                lambda * self.source_lambda_derivative(x)
            }
            ProblemSpec::Qho2d { .. } | ProblemSpec::QhoInverse { .. } => 0.0,
        }
    }

    /// The residual operator without forcing applied to `u_gt`, from
    /// hand-coded derivatives.
    fn operator_of_solution(&self, x: &[f64]) -> f64 {
        let u = self.solution_derivative(x, 0, 0);
        let lambda = self.lambda_gt().unwrap_or(0.0);
        let lap: f64 = (0..self.dim()).map(|i| self.solution_derivative(x, i, 2)).sum();
        match self.kind() {
            ResidualKind::Poisson => -lap,
            ResidualKind::Qho => -lap + self.potential(x) * u - lambda * u,
            ResidualKind::Burgers => -lap + u * self.solution_derivative(x, 0, 1),
            ResidualKind::Ode4 => self.solution_derivative(x, 0, 4),
        }
    }

    /// `∂f/∂λ` (nonzero only for inverse Poisson problems).
    pub fn source_lambda_derivative(&self, x: &[f64]) -> f64 {
        match *self {
            ProblemSpec::PoissonInverse1d { omega } => (omega * x[0]).cos(),
            ProblemSpec::PoissonInverse2d { omega } => (omega * x[0]).cos() * (omega * x[1]).sin(),
            _ => 0.0,
        }
    }

    /// Multiplicative potential `V(x)` in the QHO residual.
    pub fn potential(&self, x: &[f64]) -> f64 {
        match self.kind() {
            ResidualKind::Qho => x.iter().map(|v| v * v).sum(),
            _ => 0.0,
        }
    }

    /// Analytic solution `u_gt(x)`.
    pub fn solution(&self, x: &[f64]) -> Option<f64> {
        Some(self.solution_derivative(x, 0, 0))
    }

    /// Dirichlet data `g(x)`; the restriction of the analytic solution.
    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        self.solution_derivative(x, 0, 0)
    }

    /// Hand-coded `∂^order u_gt / ∂x_axis^order` (order 0 is the value).
    /// Supported up to order 4 for 1D sine solutions and order 2 otherwise.
    pub fn solution_derivative(&self, x: &[f64], axis: usize, order: usize) -> f64 {
        match *self {
            ProblemSpec::Polynomial { ref terms, dim, .. } => terms
                .iter()
                .map(|(c, p)| {
                    (0..dim)
                        .map(|i| monomial_derivative(x[i], p[i], if i == axis { order } else { 0 }))
                        .product::<f64>()
                        * c
                })
                .sum(),
            ProblemSpec::Poisson2d { q } => {
                let l = 2.0 * PI * q;
                let (fx, fy) = if axis == 0 {
                    (cos_derivative(l, x[0], order), (l * x[1]).sin())
                } else {
                    ((l * x[0]).cos(), sin_derivative(l, x[1], order))
                };
                fx * fy
            }
            ProblemSpec::PoissonInverse2d { omega } => {
                let (fx, fy) = if axis == 0 {
                    (cos_derivative(omega, x[0], order), (omega * x[1]).sin())
                } else {
                    ((omega * x[0]).cos(), sin_derivative(omega, x[1], order))
                };
                fx * fy
            }
            ProblemSpec::Poisson1d { omega } | ProblemSpec::Burgers1d { omega } | ProblemSpec::Ode4 { omega } => {
                sin_derivative(omega, x[0], order)
            }
            ProblemSpec::PoissonInverse1d { omega } => cos_derivative(omega, x[0], order),
            ProblemSpec::PoissonHard { c, a, beta, omega } => {
                c * (a * sin_derivative(omega, x[0], order) + tanh_derivative(beta, x[0], order))
            }
            ProblemSpec::Qho2d { n1, n2 } | ProblemSpec::QhoInverse { n1, n2 } => {
                let k = qho_normalisation(n1, n2);
                let hx = hermite_function(n1, x[0]);
                let hy = hermite_function(n2, x[1]);
                if axis == 0 {
                    k * hx[order] * hy[0]
                } else {
                    k * hx[0] * hy[order]
                }
            }
        }
    }

    /// Residual of the analytic solution computed from hand-coded
    /// derivatives; zero up to round-off for every catalog entry.
    pub fn analytic_residual(&self, x: &[f64]) -> f64 {
        let lambda = self.lambda_gt().unwrap_or(0.0);
        self.operator_of_solution(x) - self.source(x, lambda)
    }

    /// Boundary conditions of a 1D problem.
    ///
    /// The fourth-order ODE fixes `u, u', u'', u'''` at `x = -1`; the others
    /// are Dirichlet at both endpoints.
    pub fn endpoint_conditions(&self) -> Vec<EndpointCondition> {
        match self.kind() {
            ResidualKind::Ode4 => (0..4)
                .map(|order| EndpointCondition { x: -1.0, order, target: self.solution_derivative(&[-1.0], 0, order) })
                .collect(),
            _ => [-1.0, 1.0]
                .into_iter()
                .map(|x| EndpointCondition { x, order: 0, target: self.boundary_value(&[x]) })
                .collect(),
        }
    }
}

/// Default instances of every cataloged problem, including both verbatim
/// hard-transition scenarios and the reduced desk-scale copy.
pub fn catalog() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::Poisson2d { q: 6.0 },
        ProblemSpec::Poisson2d { q: 1.0 },
        ProblemSpec::Poisson1d { omega: PI },
        HARD_S1,
        HARD_S2,
        HARD_REDUCED,
        ProblemSpec::Qho2d { n1: 7, n2: 7 },
        ProblemSpec::Burgers1d { omega: 14.0 * PI },
        ProblemSpec::Ode4 { omega: PI },
        ProblemSpec::PoissonInverse1d { omega: PI },
        ProblemSpec::PoissonInverse2d { omega: PI },
        ProblemSpec::QhoInverse { n1: 2, n2: 2 },
    ]
}

/// Problems with polynomial solutions of degree at most 4 for every residual
/// kind; their forcings are manufactured from the solution.
pub fn polynomial_catalog() -> Vec<ProblemSpec> {
    let one_d = vec![(1.0, [4, 0]), (-1.0, [3, 0]), (0.5, [1, 0]), (0.25, [0, 0])];
    let two_d = vec![(1.0, [4, 0]), (-1.0, [3, 0]), (0.5, [1, 0]), (0.25, [0, 0]), (1.0, [0, 3]), (1.0, [2, 2])];
    vec![
        ProblemSpec::Polynomial { kind: ResidualKind::Poisson, dim: 1, terms: vec![(1.0, [2, 0])] },
        ProblemSpec::Polynomial { kind: ResidualKind::Poisson, dim: 1, terms: one_d.clone() },
        ProblemSpec::Polynomial { kind: ResidualKind::Poisson, dim: 2, terms: two_d.clone() },
        ProblemSpec::Polynomial { kind: ResidualKind::Qho, dim: 2, terms: two_d },
        ProblemSpec::Polynomial { kind: ResidualKind::Burgers, dim: 1, terms: one_d.clone() },
        ProblemSpec::Polynomial { kind: ResidualKind::Ode4, dim: 1, terms: one_d },
    ]
}

/// Error of an approximation against the analytic solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Mean absolute error over the evaluation grid.
    pub eps1: f64,
    /// Maximum absolute error over the evaluation grid.
    pub eps_inf: f64,
    /// `|λ - λ_gt|` for inverse problems.
    pub eps_lambda: Option<f64>,
    /// Points per axis of the evaluation grid.
    pub resolution: usize,
}

/// `n` equidistant points per axis including both endpoints, lexicographic.
pub fn equidistant_grid(dim: usize, n: usize) -> Array2<f64> {
    let coord = |i: usize| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 };
    let total = n.pow(dim as u32);
    Array2::from_shape_fn((total, dim), |(r, axis)| {
        let stride = n.pow((dim - 1 - axis) as u32);
        coord((r / stride) % n)
    })
}

/// Evaluates `approx` on the equidistant `n^m` grid and compares with the
/// analytic solution.
pub fn error_metrics<F>(approx: F, problem: &ProblemSpec, n: usize, lambda: Option<f64>) -> Result<ErrorMetrics>
where
    F: Fn(ArrayView2<f64>) -> Result<Vec<f64>>,
{
    let points = equidistant_grid(problem.dim(), n);
    let values = approx(points.view())?;
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (row, v) in points.rows().into_iter().zip(&values) {
        let exact = problem
            .solution(row.as_slice().expect("row-major"))
            .ok_or_else(|| Error::MissingGroundTruth(problem.name().into()))?;
        let e = (v - exact).abs();
        sum += e;
        max = max.max(e);
    }
    let eps_lambda = match (lambda, problem.lambda_gt()) {
        (Some(l), Some(gt)) if problem.is_inverse() => Some((l - gt).abs()),
        _ => None,
    };
    Ok(ErrorMetrics { eps1: sum / values.len() as f64, eps_inf: max, eps_lambda, resolution: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 0.3).unwrap(), 1.0);
        assert_eq!(hermite(1, 0.3).unwrap(), 0.6);
        assert!((hermite(2, 0.5).unwrap() + 1.0).abs() < 1e-15);
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..20 {
            let x = rng.uniform(-2.0, 2.0);
            let want = 32.0 * x.powi(5) - 160.0 * x.powi(3) + 120.0 * x;
            assert!((hermite(5, x).unwrap() - want).abs() < 1e-11 * want.abs().max(1.0));
        }
        assert_eq!(hermite(21, 0.0).unwrap_err(), Error::HermiteOutOfRange(21));
    }

    #[test]
    fn quadratic_poisson_forcing() {
        let p = &polynomial_catalog()[0];
        assert_eq!(p.source(&[0.3], 0.0), -2.0);
        assert_eq!(p.boundary_value(&[1.0]), 1.0);
    }

    #[test]
    fn poisson2d_spot_value() {
        let p = ProblemSpec::Poisson2d { q: 1.0 };
        assert!(p.solution(&[0.25, 0.25]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn qho_ground_state_value() {
        let p = ProblemSpec::Qho2d { n1: 0, n2: 0 };
        let v = p.solution(&[0.0, 0.0]).unwrap();
        assert!((v - PI.powf(-0.25)).abs() < 1e-15);
        assert!((v - 0.7511255444649425).abs() < 1e-12);
    }

    #[test]
    fn burgers_trig_identity() {
        let omega = 3.0;
        let p = ProblemSpec::Burgers1d { omega };
        for x in [-0.9, -0.2, 0.4, 0.77] {
            let u = (omega * x).sin();
            let lhs = omega * omega * u + u * omega * (omega * x).cos();
            assert!((lhs - p.source(&[x], 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_consistency_on_dense_grid() {
        for p in catalog().into_iter().chain(polynomial_catalog()) {
            let pts = equidistant_grid(p.dim(), 201);
            let lambda = p.lambda_gt().unwrap_or(0.0);
            let fmax = pts
                .rows()
                .into_iter()
                .map(|r| p.source(r.as_slice().unwrap(), lambda).abs())
                .fold(0.0, f64::max);
            for r in pts.rows() {
                let res = p.analytic_residual(r.as_slice().unwrap());
                assert!(res.abs() < 1e-6 * (1.0 + fmax), "{} residual {res}", p.name());
            }
        }
    }

    #[test]
    fn from_name_defaults_and_errors() {
        for name in PROBLEM_NAMES {
            let p = ProblemSpec::from_name(name, &ProblemParams::default()).unwrap();
            assert_eq!(p.name(), name);
        }
        assert!(matches!(
            ProblemSpec::from_name("heat", &ProblemParams::default()),
            Err(Error::UnknownProblem(_))
        ));
        let p = ProblemSpec::from_name("poisson2d", &ProblemParams { q: Some(6.0), ..Default::default() }).unwrap();
        assert_eq!(p, ProblemSpec::Poisson2d { q: 6.0 });
    }

    #[test]
    fn ode4_conditions_at_left_endpoint() {
        let p = ProblemSpec::Ode4 { omega: PI };
        let c = p.endpoint_conditions();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|c| c.x == -1.0));
        assert!((c[1].target - PI * (-PI).cos()).abs() < 1e-14);
    }

    #[test]
    fn error_metric_examples() {
        let p = ProblemSpec::Poisson1d { omega: PI };
        let exact = |pts: ArrayView2<f64>| -> Result<Vec<f64>> {
            Ok(pts.rows().into_iter().map(|r| (PI * r[0]).sin()).collect())
        };
        let m = error_metrics(exact, &p, 101, None).unwrap();
        assert_eq!((m.eps1, m.eps_inf), (0.0, 0.0));

        let shifted = |pts: ArrayView2<f64>| -> Result<Vec<f64>> {
            Ok(pts.rows().into_iter().map(|r| (PI * r[0]).sin() + 0.5).collect())
        };
        let m = error_metrics(shifted, &p, 101, None).unwrap();
        assert!((m.eps1 - 0.5).abs() < 1e-12 && (m.eps_inf - 0.5).abs() < 1e-12);

        let zero = |pts: ArrayView2<f64>| -> Result<Vec<f64>> { Ok(vec![0.0; pts.nrows()]) };
        let m = error_metrics(zero, &p, 1001, None).unwrap();
        assert!((m.eps_inf - 1.0).abs() < 1e-12);
        assert!((m.eps1 - 2.0 / PI).abs() < 1e-3);
        assert!(m.eps_inf >= m.eps1);
    }

    #[test]
    fn inverse_metrics_report_lambda_error() {
        let p = ProblemSpec::PoissonInverse1d { omega: PI };
        let exact = |pts: ArrayView2<f64>| -> Result<Vec<f64>> {
            Ok(pts.rows().into_iter().map(|r| (PI * r[0]).cos()).collect())
        };
        let m = error_metrics(exact, &p, 11, Some(PI * PI + 0.25)).unwrap();
        assert!((m.eps_lambda.unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn equidistant_layout() {
        let g = equidistant_grid(2, 3);
        assert_eq!(g.nrows(), 9);
        assert_eq!(g.row(1).to_vec(), vec![-1.0, 0.0]);
        assert_eq!(g.row(3).to_vec(), vec![0.0, -1.0]);
    }
}
