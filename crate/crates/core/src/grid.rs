//! Gauss-Legendre rules, tensor grids on `[-1, 1]^m` and Lagrange evaluation.
//!
//! All grid-valued vectors in the crate use one canonical layout: the
//! lexicographic order of the multi-index set, first coordinate most
//! significant. Axis `i` therefore has stride `(n + 1)^(m - 1 - i)`.

use crate::error::{Error, Result};

/// Largest supported degree of a one-dimensional rule.
pub const MAX_RULE_DEGREE: usize = 512;

/// Largest supported number of points in a tensor grid.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Evaluates `(P_k(x), P_k'(x))` for the Legendre polynomial of degree `k`.
pub fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * x * p - jf * p_prev) / (jf + 1.0);
        p_prev = p;
        p = next;
    }
    // P_k' via the derivative recurrence, valid away from x = +-1.
    let kf = k as f64;
    let dp = if (x * x - 1.0).abs() < f64::EPSILON {
        let sign = if x > 0.0 || k % 2 == 0 { 1.0 } else { -1.0 };
        sign * kf * (kf + 1.0) / 2.0
    } else {
        kf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// The (n+1)-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreRule1D {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
}

impl LegendreRule1D {
    /// Builds the rule whose nodes are the roots of the Legendre polynomial
    /// of degree `n + 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_RULE_DEGREE {
            return Err(Error::DegreeTooLarge { degree: n, max: MAX_RULE_DEGREE });
        }
        let count = n + 1;
        let mut nodes = vec![0.0; count];
        let mut weights = vec![0.0; count];
        // Newton on the positive half, mirrored for exact symmetry.
        let half = count / 2;
        for j in 0..half {
            let mut x = (std::f64::consts::PI * (4 * j + 3) as f64 / (4 * n + 6) as f64).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(count, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(count, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[count - 1 - j] = x;
            nodes[j] = -x;
            weights[count - 1 - j] = w;
            weights[j] = w;
        }
        if count % 2 == 1 {
            let (_, dp) = legendre_with_derivative(count, 0.0);
            nodes[half] = 0.0;
            weights[half] = 2.0 / (dp * dp);
        }
        // Closed-form barycentric weights for Gauss-Legendre nodes; the sign
        // alternates with the node index.
        let bary = nodes
            .iter()
            .zip(&weights)
            .enumerate()
            .map(|(j, (&x, &w))| {
                let mag = ((1.0 - x * x) * w).sqrt();
                if j % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        Ok(Self { degree: n, nodes, weights, bary })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Barycentric weights, defined up to a common factor.
    pub fn barycentric_weights(&self) -> &[f64] {
        &self.bary
    }

    /// Values `l_j(x)` of all Lagrange basis polynomials at `x`.
    pub fn lagrange_basis(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        if let Some(j) = self.nodes.iter().position(|&p| p == x) {
            out[j] = 1.0;
            return out;
        }
        let mut denom = 0.0;
        for (o, (&p, &b)) in out.iter_mut().zip(self.nodes.iter().zip(&self.bary)) {
            *o = b / (x - p);
            denom += *o;
        }
        for o in &mut out {
            *o /= denom;
        }
        out
    }
}

/// Shorthand for [`LegendreRule1D::new`].
pub fn legendre_rule(n: usize) -> Result<LegendreRule1D> {
    LegendreRule1D::new(n)
}

/// The full box index set `A_{m,n} = {alpha : max_i alpha_i <= n}` in
/// lexicographic order. Indices are stored implicitly; ranks are mixed-radix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    degree: usize,
    len: usize,
}

impl MultiIndexSet {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let len = checked_box_size(dim, degree)?;
        Ok(Self { dim, degree, len })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Stride of axis `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        (self.degree + 1).pow((self.dim - 1 - axis) as u32)
    }

    /// Multi-index at flat position `rank`.
    pub fn multi_index(&self, mut rank: usize) -> Vec<usize> {
        let base = self.degree + 1;
        let mut alpha = vec![0; self.dim];
        for a in alpha.iter_mut().rev() {
            *a = rank % base;
            rank /= base;
        }
        alpha
    }

    /// Flat position of `alpha`, or `None` if it is not in the set.
    pub fn rank(&self, alpha: &[usize]) -> Option<usize> {
        if alpha.len() != self.dim || alpha.iter().any(|&a| a > self.degree) {
            return None;
        }
        Some(alpha.iter().fold(0, |acc, &a| acc * (self.degree + 1) + a))
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len).map(move |r| self.multi_index(r))
    }
}

/// Shorthand for [`MultiIndexSet::new`].
pub fn multi_index_set(m: usize, n: usize) -> Result<MultiIndexSet> {
    MultiIndexSet::new(m, n)
}

fn checked_box_size(dim: usize, degree: usize) -> Result<usize> {
    let too_large = Error::GridTooLarge { dim, degree, cap: MAX_GRID_POINTS };
    let mut len: usize = 1;
    for _ in 0..dim {
        len = len.checked_mul(degree + 1).ok_or_else(|| too_large.clone())?;
        if len > MAX_GRID_POINTS {
            return Err(too_large);
        }
    }
    Ok(len)
}

/// Tensor-product Legendre grid `P_{m,n}` with product cubature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    indices: MultiIndexSet,
    rule: LegendreRule1D,
    /// `coords[i][r]` is coordinate `i` of the point at rank `r`.
    coords: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TensorGrid {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        let indices = MultiIndexSet::new(dim, degree)?;
        let rule = LegendreRule1D::new(degree)?;
        let len = indices.len();
        let base = degree + 1;
        let mut coords = vec![vec![0.0; len]; dim];
        let mut weights = vec![1.0; len];
        for axis in 0..dim {
            let stride = indices.stride(axis);
            for r in 0..len {
                let j = (r / stride) % base;
                coords[axis][r] = rule.nodes()[j];
                weights[r] *= rule.weights()[j];
            }
        }
        Ok(Self { indices, rule, coords, weights })
    }

    pub fn dim(&self) -> usize {
        self.indices.dim()
    }

    pub fn degree(&self) -> usize {
        self.indices.degree()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.indices
    }

    pub fn rule(&self) -> &LegendreRule1D {
        &self.rule
    }

    pub fn axis_nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, rank: usize) -> Vec<f64> {
        self.coords.iter().map(|c| c[rank]).collect()
    }

    /// Points as a row-major `len x dim` matrix.
    pub fn points(&self) -> ndarray::Array2<f64> {
        ndarray::Array2::from_shape_fn((self.len(), self.dim()), |(r, i)| self.coords[i][r])
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        (0..self.len())
            .map(|r| {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = self.coords[i][r];
                }
                f(&x)
            })
            .collect()
    }

    /// Gauss-Legendre cubature `sum_alpha w_alpha values_alpha`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        Ok(values.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }

    /// Evaluates the interpolant of `values` at `x` by per-axis barycentric
    /// contraction.
    pub fn lagrange_interpolate(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        check_len(self.dim(), x.len())?;
        if let Some(&bad) = x.iter().find(|v| v.abs() > 1.0 + 1e-12 || !v.is_finite()) {
            return Err(Error::OutOfDomain { value: bad });
        }
        let base = self.degree() + 1;
        let mut current = values.to_vec();
        // Contract the last axis first; the remaining layout stays lexicographic.
        for axis in (0..self.dim()).rev() {
            let basis = self.rule.lagrange_basis(x[axis]);
            current = current
                .chunks_exact(base)
                .map(|line| line.iter().zip(&basis).map(|(v, l)| v * l).sum())
                .collect();
        }
        Ok(current[0])
    }
}

/// Shorthand for [`TensorGrid::new`].
pub fn tensor_grid(m: usize, n: usize) -> Result<TensorGrid> {
    TensorGrid::new(m, n)
}

/// Shorthand for [`TensorGrid::integrate`].
pub fn integrate(values: &[f64], grid: &TensorGrid) -> Result<f64> {
    grid.integrate(values)
}

/// Shorthand for [`TensorGrid::lagrange_interpolate`].
pub fn lagrange_interpolate(values: &[f64], grid: &TensorGrid, x: &[f64]) -> Result<f64> {
    grid.lagrange_interpolate(values, x)
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
