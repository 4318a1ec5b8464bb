//! Truncated Taylor (jet) arithmetic along one input axis.
//!
//! The arithmetic is written once over the [`Arith`] context trait and
//! instantiated twice: with [`FloatArith`] it yields derivative values, with
//! [`Tape`] it records every scalar operation so that a reverse sweep gives
//! parameter gradients of jet-computed quantities.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::losses::{LossBreakdown, TermWeights};
use crate::nn::{Activation, MlpArchitecture};
use crate::problems::{ProblemSpec, ResidualKind};
use crate::rng::SplitMix64;

/// Highest supported jet order.
pub const MAX_JET_ORDER: usize = 4;

/// Scalar operations needed by the jet kernels.
pub trait Arith {
    type S: Copy;

    fn constant(&mut self, c: f64) -> Self::S;
    fn value(&self, a: Self::S) -> f64;
    fn add(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn sub(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn mul(&mut self, a: Self::S, b: Self::S) -> Self::S;
    /// `a * c` for a plain constant `c`.
    fn scale(&mut self, a: Self::S, c: f64) -> Self::S;
    fn sin(&mut self, a: Self::S) -> Self::S;
    fn cos(&mut self, a: Self::S) -> Self::S;
    fn tanh(&mut self, a: Self::S) -> Self::S;
    fn exp(&mut self, a: Self::S) -> Self::S;
}

/// Plain `f64` arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct FloatArith;

impl Arith for FloatArith {
    type S = f64;

    #[inline]
    fn constant(&mut self, c: f64) -> f64 {
        c
    }
    #[inline]
    fn value(&self, a: f64) -> f64 {
        a
    }
    #[inline]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline]
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    #[inline]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline]
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
    #[inline]
    fn sin(&mut self, a: f64) -> f64 {
        a.sin()
    }
    #[inline]
    fn cos(&mut self, a: f64) -> f64 {
        a.cos()
    }
    #[inline]
    fn tanh(&mut self, a: f64) -> f64 {
        a.tanh()
    }
    #[inline]
    fn exp(&mut self, a: f64) -> f64 {
        a.exp()
    }
}

const NO_NODE: u32 = u32::MAX;

/// A value recorded on a [`Tape`]. Constants carry no node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapeScalar {
    pub value: f64,
    node: u32,
}

impl TapeScalar {
    pub fn is_constant(&self) -> bool {
        self.node == NO_NODE
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Recording tape for reverse-mode gradients of scalar programs.
///
/// Leaves must be created before any operation; [`Tape::rewind`] drops all
/// recorded operations while keeping the leaves, so one tape can be reused
/// across collocation points.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: usize,
    adjoint: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Adds an independent variable. Panics if operations were already recorded.
    pub fn leaf(&mut self, value: f64) -> TapeScalar {
        assert_eq!(self.nodes.len(), self.leaves, "leaves must precede recorded operations");
        self.leaves += 1;
        self.push(NO_NODE, 0.0, NO_NODE, 0.0, value)
    }

    /// Drops every recorded operation, keeping the leaves.
    pub fn rewind(&mut self) {
        self.nodes.truncate(self.leaves);
    }

    #[inline]
    fn push(&mut self, p0: u32, d0: f64, p1: u32, d1: f64, value: f64) -> TapeScalar {
        let node = self.nodes.len() as u32;
        self.nodes.push(Node { parents: [p0, p1], partials: [d0, d1] });
        TapeScalar { value, node }
    }

    #[inline]
    fn unary(&mut self, a: TapeScalar, partial: f64, value: f64) -> TapeScalar {
        if a.is_constant() {
            TapeScalar { value, node: NO_NODE }
        } else {
            self.push(a.node, partial, NO_NODE, 0.0, value)
        }
    }

    /// Adds `seed * d(output)/d(leaf)` into `grad[leaf]` for every leaf.
    pub fn accumulate(&mut self, output: TapeScalar, seed: f64, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.leaves {
            return Err(Error::LengthMismatch { expected: self.leaves, actual: grad.len() });
        }
        if output.is_constant() || seed == 0.0 {
            return Ok(());
        }
        let adj = &mut self.adjoint;
        adj.clear();
        adj.resize(self.nodes.len(), 0.0);
        adj[output.node as usize] = seed;
        for i in (self.leaves..=output.node as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = self.nodes[i];
            for (p, d) in n.parents.iter().zip(n.partials) {
                if *p != NO_NODE {
                    adj[*p as usize] += a * d;
                }
            }
        }
        let leaf_adj = &adj[..self.leaves.min(output.node as usize + 1)];
        for (g, a) in grad.iter_mut().zip(leaf_adj) {
            *g += a;
        }
        Ok(())
    }

    /// Gradient of `output` with respect to all leaves.
    pub fn gradient(&mut self, output: TapeScalar) -> Vec<f64> {
        let mut grad = vec![0.0; self.leaves];
        self.accumulate(output, 1.0, &mut grad).expect("buffer sized to leaf count");
        grad
    }
}

impl Arith for Tape {
    type S = TapeScalar;

    #[inline]
    fn constant(&mut self, c: f64) -> TapeScalar {
        TapeScalar { value: c, node: NO_NODE }
    }

    #[inline]
    fn value(&self, a: TapeScalar) -> f64 {
        a.value
    }

    #[inline]
    fn add(&mut self, a: TapeScalar, b: TapeScalar) -> TapeScalar {
        let value = a.value + b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => TapeScalar { value, node: NO_NODE },
            (false, true) => TapeScalar { value, node: a.node },
            (true, false) => TapeScalar { value, node: b.node },
            (false, false) => self.push(a.node, 1.0, b.node, 1.0, value),
        }
    }

    #[inline]
    fn sub(&mut self, a: TapeScalar, b: TapeScalar) -> TapeScalar {
        let value = a.value - b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => TapeScalar { value, node: NO_NODE },
            (false, true) => TapeScalar { value, node: a.node },
            (true, false) => self.push(b.node, -1.0, NO_NODE, 0.0, value),
            (false, false) => self.push(a.node, 1.0, b.node, -1.0, value),
        }
    }

    #[inline]
    fn mul(&mut self, a: TapeScalar, b: TapeScalar) -> TapeScalar {
        let value = a.value * b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => TapeScalar { value, node: NO_NODE },
            (false, true) => self.scale(a, b.value),
            (true, false) => self.scale(b, a.value),
            (false, false) => self.push(a.node, b.value, b.node, a.value, value),
        }
    }

    #[inline]
    fn scale(&mut self, a: TapeScalar, c: f64) -> TapeScalar {
        if c == 0.0 {
            return TapeScalar { value: a.value * c, node: NO_NODE };
        }
        if c == 1.0 {
            return a;
        }
        self.unary(a, c, a.value * c)
    }

    #[inline]
    fn sin(&mut self, a: TapeScalar) -> TapeScalar {
        self.unary(a, a.value.cos(), a.value.sin())
    }

    #[inline]
    fn cos(&mut self, a: TapeScalar) -> TapeScalar {
        self.unary(a, -a.value.sin(), a.value.cos())
    }

    #[inline]
    fn tanh(&mut self, a: TapeScalar) -> TapeScalar {
        let t = a.value.tanh();
        self.unary(a, 1.0 - t * t, t)
    }

    #[inline]
    fn exp(&mut self, a: TapeScalar) -> TapeScalar {
        let e = a.value.exp();
        self.unary(a, e, e)
    }
}

/// Taylor coefficients `(c_0, ..., c_K)` of `f(p + t e_axis)` at `t = 0`,
/// so `c_k = f^(k) / k!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<S> {
    c: [S; MAX_JET_ORDER + 1],
    order: usize,
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_JET_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_JET_ORDER });
    }
    Ok(())
}

fn check_same<S>(a: &Jet<S>, b: &Jet<S>) -> Result<()> {
    if a.order != b.order {
        return Err(Error::OrderMismatch(a.order, b.order));
    }
    Ok(())
}

impl<S: Copy> Jet<S> {
    /// A constant function.
    pub fn constant<A: Arith<S = S>>(ctx: &mut A, value: S, order: usize) -> Result<Self> {
        check_order(order)?;
        let zero = ctx.constant(0.0);
        let mut c = [zero; MAX_JET_ORDER + 1];
        c[0] = value;
        Ok(Self { c, order })
    }

    /// The coordinate `x_0 + t` itself.
    pub fn variable<A: Arith<S = S>>(ctx: &mut A, x0: f64, order: usize) -> Result<Self> {
        let v = ctx.constant(x0);
        let mut jet = Self::constant(ctx, v, order)?;
        if order >= 1 {
            jet.c[1] = ctx.constant(1.0);
        }
        Ok(jet)
    }

    /// Builds a jet of order `coeffs.len() - 1`.
    pub fn from_coeffs<A: Arith<S = S>>(ctx: &mut A, coeffs: &[S]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let mut jet = Self::constant(ctx, coeffs[0], coeffs.len() - 1)?;
        jet.c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(jet)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[S] {
        &self.c[..=self.order]
    }

    pub fn value(&self) -> S {
        self.c[0]
    }

    /// `k!` times coefficient `k`, i.e. the `k`-th derivative along the line.
    pub fn derivative<A: Arith<S = S>>(&self, ctx: &mut A, k: usize) -> S {
        let fact: f64 = (1..=k).map(|v| v as f64).product();
        ctx.scale(self.c[k], fact)
    }

    fn map2<A: Arith<S = S>>(&self, ctx: &mut A, other: &Self, f: impl Fn(&mut A, S, S) -> S) -> Self {
        let mut out = *self;
        for k in 0..=self.order {
            out.c[k] = f(ctx, self.c[k], other.c[k]);
        }
        out
    }

    fn add_unchecked<A: Arith<S = S>>(&self, ctx: &mut A, other: &Self) -> Self {
        self.map2(ctx, other, |ctx, a, b| ctx.add(a, b))
    }

    fn mul_unchecked<A: Arith<S = S>>(&self, ctx: &mut A, other: &Self) -> Self {
        let mut out = *self;
        for k in 0..=self.order {
            let mut acc = ctx.mul(self.c[0], other.c[k]);
            for i in 1..=k {
                let term = ctx.mul(self.c[i], other.c[k - i]);
                acc = ctx.add(acc, term);
            }
            out.c[k] = acc;
        }
        out
    }

    /// Every coefficient multiplied by the scalar `s`.
    pub fn scale_by<A: Arith<S = S>>(&self, ctx: &mut A, s: S) -> Self {
        let mut out = *self;
        for k in 0..=self.order {
            out.c[k] = ctx.mul(s, self.c[k]);
        }
        out
    }

    /// `j * a_j` for `j = 0..=K`.
    fn weighted<A: Arith<S = S>>(&self, ctx: &mut A) -> [S; MAX_JET_ORDER + 1] {
        let mut d = self.c;
        for (j, v) in d.iter_mut().enumerate().take(self.order + 1).skip(1) {
            *v = ctx.scale(*v, j as f64);
        }
        d
    }

    fn sin_cos_unchecked<A: Arith<S = S>>(&self, ctx: &mut A) -> (Self, Self) {
        let mut s = *self;
        let mut c = *self;
        s.c[0] = ctx.sin(self.c[0]);
        c.c[0] = ctx.cos(self.c[0]);
        let d = self.weighted(ctx);
        for k in 1..=self.order {
            let mut sk = ctx.mul(d[1], c.c[k - 1]);
            let mut ck = ctx.mul(d[1], s.c[k - 1]);
            for j in 2..=k {
                let ts = ctx.mul(d[j], c.c[k - j]);
                sk = ctx.add(sk, ts);
                let tc = ctx.mul(d[j], s.c[k - j]);
                ck = ctx.add(ck, tc);
            }
            let inv = 1.0 / k as f64;
            s.c[k] = ctx.scale(sk, inv);
            c.c[k] = ctx.scale(ck, -inv);
        }
        (s, c)
    }

    fn tanh_unchecked<A: Arith<S = S>>(&self, ctx: &mut A) -> Self {
        let mut t = *self;
        let mut u = *self;
        t.c[0] = ctx.tanh(self.c[0]);
        let one = ctx.constant(1.0);
        let sq = ctx.mul(t.c[0], t.c[0]);
        u.c[0] = ctx.sub(one, sq);
        let d = self.weighted(ctx);
        for k in 1..=self.order {
            let mut acc = ctx.mul(d[1], u.c[k - 1]);
            for j in 2..=k {
                let term = ctx.mul(d[j], u.c[k - j]);
                acc = ctx.add(acc, term);
            }
            t.c[k] = ctx.scale(acc, 1.0 / k as f64);
            if k < self.order {
                let mut sq = ctx.mul(t.c[0], t.c[k]);
                for i in 1..=k {
                    let term = ctx.mul(t.c[i], t.c[k - i]);
                    sq = ctx.add(sq, term);
                }
                u.c[k] = ctx.scale(sq, -1.0);
            }
        }
        t
    }

    fn exp_unchecked<A: Arith<S = S>>(&self, ctx: &mut A) -> Self {
        let mut e = *self;
        e.c[0] = ctx.exp(self.c[0]);
        let d = self.weighted(ctx);
        for k in 1..=self.order {
            let mut acc = ctx.mul(d[1], e.c[k - 1]);
            for j in 2..=k {
                let term = ctx.mul(d[j], e.c[k - j]);
                acc = ctx.add(acc, term);
            }
            e.c[k] = ctx.scale(acc, 1.0 / k as f64);
        }
        e
    }
}

pub fn jet_add<A: Arith>(ctx: &mut A, a: &Jet<A::S>, b: &Jet<A::S>) -> Result<Jet<A::S>> {
    check_same(a, b)?;
    Ok(a.add_unchecked(ctx, b))
}

pub fn jet_sub<A: Arith>(ctx: &mut A, a: &Jet<A::S>, b: &Jet<A::S>) -> Result<Jet<A::S>> {
    check_same(a, b)?;
    Ok(a.map2(ctx, b, |ctx, x, y| ctx.sub(x, y)))
}

/// Truncated product by Leibniz convolution.
pub fn jet_mul<A: Arith>(ctx: &mut A, a: &Jet<A::S>, b: &Jet<A::S>) -> Result<Jet<A::S>> {
    check_same(a, b)?;
    Ok(a.mul_unchecked(ctx, b))
}

pub fn jet_scale<A: Arith>(ctx: &mut A, a: &Jet<A::S>, c: f64) -> Jet<A::S> {
    let mut out = *a;
    for k in 0..=a.order {
        out.c[k] = ctx.scale(a.c[k], c);
    }
    out
}

/// `(sin a, cos a)` by the coupled recurrence.
pub fn jet_sin_cos<A: Arith>(ctx: &mut A, a: &Jet<A::S>) -> (Jet<A::S>, Jet<A::S>) {
    a.sin_cos_unchecked(ctx)
}

pub fn jet_sin<A: Arith>(ctx: &mut A, a: &Jet<A::S>) -> Jet<A::S> {
    a.sin_cos_unchecked(ctx).0
}

pub fn jet_tanh<A: Arith>(ctx: &mut A, a: &Jet<A::S>) -> Jet<A::S> {
    a.tanh_unchecked(ctx)
}

pub fn jet_exp<A: Arith>(ctx: &mut A, a: &Jet<A::S>) -> Jet<A::S> {
    a.exp_unchecked(ctx)
}

/// Pushes the jet of the line `point + t e_axis` through the network.
///
/// `params` holds the network parameters in the flat layer-major layout.
pub fn network_jet<A: Arith>(
    ctx: &mut A,
    arch: &MlpArchitecture,
    params: &[A::S],
    point: &[f64],
    axis: usize,
    order: usize,
) -> Result<Jet<A::S>> {
    check_order(order)?;
    if !matches!(arch.activation, Activation::Sin | Activation::Tanh) {
        return Err(Error::UnsupportedActivation(arch.activation.name()));
    }
    if point.len() != arch.input_dim {
        return Err(Error::LengthMismatch { expected: arch.input_dim, actual: point.len() });
    }
    if axis >= arch.input_dim {
        return Err(Error::AxisOutOfRange { axis, dim: arch.input_dim });
    }
    if params.len() < arch.param_count() {
        return Err(Error::LengthMismatch { expected: arch.param_count(), actual: params.len() });
    }
    let mut act: Vec<Jet<A::S>> = Vec::with_capacity(point.len());
    for (i, &x) in point.iter().enumerate() {
        if i == axis {
            act.push(Jet::variable(ctx, x, order)?);
        } else {
            let v = ctx.constant(x);
            act.push(Jet::constant(ctx, v, order)?);
        }
    }
    let layers = arch.layers();
    let last = layers.len() - 1;
    for (l, span) in layers.iter().enumerate() {
        let mut next = Vec::with_capacity(span.fan_out);
        for o in 0..span.fan_out {
            let mut z = Jet::constant(ctx, params[span.bias + o], order)?;
            let row = &params[span.weights + o * span.fan_in..span.weights + (o + 1) * span.fan_in];
            for (w, a) in row.iter().zip(&act) {
                for k in 0..=order {
                    let term = ctx.mul(*w, a.c[k]);
                    z.c[k] = ctx.add(z.c[k], term);
                }
            }
            next.push(if l == last {
                z
            } else {
                match arch.activation {
                    Activation::Sin => jet_sin(ctx, &z),
                    _ => jet_tanh(ctx, &z),
                }
            });
        }
        act = next;
    }
    Ok(act[0])
}

/// `(u, ∂u, ..., ∂^K u)` along `axis` at `point`.
pub fn nn_axis_derivatives(
    arch: &MlpArchitecture,
    params: &[f64],
    point: &[f64],
    axis: usize,
    order: usize,
) -> Result<Vec<f64>> {
    let mut ctx = FloatArith;
    let jet = network_jet(&mut ctx, arch, params, point, axis, order)?;
    Ok((0..=order).map(|k| jet.derivative(&mut ctx, k)).collect())
}

/// A boundary or initial condition `∂^order u / ∂x_axis^order (x) = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub axis: usize,
    pub order: usize,
    pub target: f64,
}

/// Collocation points of the mean-squared-error baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MseCollocation {
    /// Interior points, one per row.
    pub interior: Array2<f64>,
    pub boundary: Vec<BoundaryPoint>,
}

impl MseCollocation {
    /// `interior` uniform random points in the open box and `per_face`
    /// random points on every face with Dirichlet targets. In one dimension
    /// the boundary is the problem's endpoint conditions.
    pub fn random(problem: &ProblemSpec, interior: usize, per_face: usize, seed: u64) -> Self {
        let dim = problem.dim();
        let mut rng = SplitMix64::new(seed);
        let pts = Array2::from_shape_fn((interior, dim), |_| rng.uniform(-1.0, 1.0));
        let boundary = if dim == 1 {
            problem
                .endpoint_conditions()
                .into_iter()
                .map(|c| BoundaryPoint { x: vec![c.x], axis: 0, order: c.order, target: c.target })
                .collect()
        } else {
            let mut out = Vec::with_capacity(2 * dim * per_face);
            for axis in 0..dim {
                for side in [-1.0, 1.0] {
                    for _ in 0..per_face {
                        let x: Vec<f64> =
                            (0..dim).map(|i| if i == axis { side } else { rng.uniform(-1.0, 1.0) }).collect();
                        let target = problem.boundary_value(&x);
                        out.push(BoundaryPoint { x, axis: 0, order: 0, target });
                    }
                }
            }
            out
        };
        Self { interior: pts, boundary }
    }
}

/// Highest axis derivative the residual of `kind` needs.
pub fn residual_order(kind: ResidualKind) -> usize {
    match kind {
        ResidualKind::Ode4 => 4,
        _ => 2,
    }
}

/// PDE residual of the network at `x` from axis jets.
pub fn residual_at<A: Arith>(
    ctx: &mut A,
    arch: &MlpArchitecture,
    params: &[A::S],
    lambda: A::S,
    problem: &ProblemSpec,
    x: &[f64],
) -> Result<A::S> {
    let kind = problem.kind();
    let order = residual_order(kind);
    let lambda_value = ctx.value(lambda);
    let forcing = |ctx: &mut A| -> A::S {
        if problem.is_inverse() {
            ctx.scale(lambda, problem.source_lambda_derivative(x))
        } else {
            ctx.constant(problem.source(x, lambda_value))
        }
    };
    let first = network_jet(ctx, arch, params, x, 0, order)?;
    let u = first.value();
    let r = match kind {
        ResidualKind::Poisson | ResidualKind::Qho => {
            let mut lap = first.c[2];
            for axis in 1..x.len() {
                let jet = network_jet(ctx, arch, params, x, axis, order)?;
                lap = ctx.add(lap, jet.c[2]);
            }
            let mut r = ctx.scale(lap, -2.0);
            if kind == ResidualKind::Qho {
                let vu = ctx.scale(u, problem.potential(x));
                let lu = ctx.mul(lambda, u);
                r = ctx.add(r, vu);
                r = ctx.sub(r, lu);
            }
            let f = forcing(ctx);
            ctx.sub(r, f)
        }
        ResidualKind::Burgers => {
            let uxx = ctx.scale(first.c[2], -2.0);
            let conv = ctx.mul(u, first.c[1]);
            let r = ctx.add(uxx, conv);
            let f = forcing(ctx);
            ctx.sub(r, f)
        }
        ResidualKind::Ode4 => {
            let d4 = ctx.scale(first.c[4], 24.0);
            let f = forcing(ctx);
            ctx.sub(d4, f)
        }
    };
    Ok(r)
}

/// Mean-squared residual loss over random collocation points and its
/// gradient, by reverse sweeps over a per-point tape of the jet arithmetic.
///
/// `params` holds the network parameters followed by `λ` for inverse
/// problems, which also fit the analytic solution at the interior points.
pub fn mse_loss_and_grad(
    arch: &MlpArchitecture,
    params: &[f64],
    problem: &ProblemSpec,
    colloc: &MseCollocation,
    weights: &TermWeights,
) -> Result<LossBreakdown> {
    let TermWeights { interior: interior_weight, boundary: boundary_weight, data: data_weight } = *weights;
    let net = arch.param_count();
    let expected = net + usize::from(problem.is_inverse());
    if params.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: params.len() });
    }
    if let Some(i) = params.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter(i));
    }
    let mut tape = Tape::new();
    let leaves: Vec<TapeScalar> = params.iter().map(|&v| tape.leaf(v)).collect();
    let lambda = if problem.is_inverse() {
        leaves[net]
    } else {
        tape.constant(problem.lambda_gt().unwrap_or(0.0))
    };
    let mut grad = vec![0.0; expected];

    let mut r = 0.0;
    let n_int = colloc.interior.nrows();
    for row in colloc.interior.rows() {
        tape.rewind();
        let x = row.to_vec();
        let res = residual_at(&mut tape, arch, &leaves[..net], lambda, problem, &x)?;
        r += res.value * res.value;
        let seed = 2.0 * interior_weight * res.value / n_int as f64;
        tape.accumulate(res, seed, &mut grad)?;
    }
    if n_int > 0 {
        r *= interior_weight / n_int as f64;
    }

    let mut s = 0.0;
    let n_bd = colloc.boundary.len();
    for bp in &colloc.boundary {
        tape.rewind();
        let jet = network_jet(&mut tape, arch, &leaves[..net], &bp.x, bp.axis, bp.order)?;
        let d = jet.derivative(&mut tape, bp.order);
        let target = tape.constant(bp.target);
        let res = tape.sub(d, target);
        s += res.value * res.value;
        let seed = 2.0 * boundary_weight * res.value / n_bd as f64;
        tape.accumulate(res, seed, &mut grad)?;
    }
    if n_bd > 0 {
        s *= boundary_weight / n_bd as f64;
    }

    let mut d = 0.0;
    if problem.is_inverse() && n_int > 0 {
        for row in colloc.interior.rows() {
            tape.rewind();
            let x = row.to_vec();
            let u = network_jet(&mut tape, arch, &leaves[..net], &x, 0, 0)?.value();
            let target = tape.constant(problem.boundary_value(&x));
            let e = tape.sub(u, target);
            d += e.value * e.value;
            tape.accumulate(e, 2.0 * data_weight * e.value / n_int as f64, &mut grad)?;
        }
        d *= data_weight / n_int as f64;
    }

    let total = r + s + d;
    if !total.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {total}")));
    }
    Ok(LossBreakdown { total, r, s, d, grad })
}
