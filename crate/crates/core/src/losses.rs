//! Residual assembly and loss functions with parameter gradients.
//!
//! Network derivatives on the interior grid come from polynomial
//! differentiation of the sampled values. Gradients are formed in residual
//! space, pulled back through the transposed linear operators and then
//! through one reverse sweep of the network.

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::diff::{DiffOperator, Side};
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::jet::{mse_loss_and_grad, MseCollocation};
use crate::nn::MlpArchitecture;
use crate::problems::{EndpointCondition, ProblemSpec, ResidualKind};
use crate::sobolev::{BoundaryForm, BoundarySum, FormKind, SobolevForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `R^T W_k R` with plain cubature weights.
    Strong,
    /// `R^T U_k R` with squared cubature weights.
    StrongVariational,
    /// Pairings with the Lagrange basis after integration by parts.
    WeakVariational,
    /// Mean squared residual at random points, derivatives by jets.
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Interior Sobolev order.
    pub k: usize,
    /// Boundary Sobolev order.
    pub l: usize,
    /// Interior grid degree.
    pub n_r: usize,
    /// Face grid degree.
    pub n_s: usize,
    pub boundary_sum: BoundarySum,
    pub interior_weight: f64,
    pub boundary_weight: f64,
    /// Weight of the observation term of inverse problems.
    pub data_weight: f64,
    /// Seed of the random collocation points of the MSE loss.
    pub seed: u64,
}

impl LossSpec {
    pub fn new(kind: LossKind, k: usize, l: usize, n_r: usize, n_s: usize) -> Result<Self> {
        if n_r == 0 || n_s == 0 {
            return Err(Error::Config("grid degrees must be positive".into()));
        }
        Ok(Self {
            kind,
            k,
            l,
            n_r,
            n_s,
            boundary_sum: BoundarySum::PerFace,
            interior_weight: 1.0,
            boundary_weight: 1.0,
            data_weight: 1.0,
            seed: 0,
        })
    }

    pub fn weights(&self) -> TermWeights {
        TermWeights { interior: self.interior_weight, boundary: self.boundary_weight, data: self.data_weight }
    }

    fn interior_kind(&self) -> FormKind {
        match self.kind {
            LossKind::Strong => FormKind::W,
            _ => FormKind::U,
        }
    }

    /// Boundary forms use plain weights for the strong loss and for order 0;
    /// the variational losses use squared weights from order 1 on.
    fn boundary_kind(&self) -> FormKind {
        match self.kind {
            LossKind::Strong => FormKind::W,
            _ if self.l == 0 => FormKind::W,
            _ => FormKind::U,
        }
    }
}

/// Multipliers of the interior, boundary and observation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermWeights {
    pub interior: f64,
    pub boundary: f64,
    pub data: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self { interior: 1.0, boundary: 1.0, data: 1.0 }
    }
}

/// Vectors of the weak variational residual.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakParts {
    /// Pairing of the operator part (everything except the forcing) with the
    /// Lagrange basis, divided by the cubature weights.
    pub h: Vec<f64>,
    /// Negated forcing samples; the weak residual is `h + f`.
    pub f: Vec<f64>,
    /// Outward normal derivative samples per face.
    pub g: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualAssembly {
    /// Network values on the interior grid.
    pub values: Vec<f64>,
    /// Interior residual on the interior grid.
    pub interior: Vec<f64>,
    /// Boundary residuals: one vector per face, or one length-1 vector per
    /// endpoint condition in one dimension.
    pub boundary: Vec<Vec<f64>>,
    pub weak: Option<WeakParts>,
    /// `u - u_gt` on the interior grid (inverse problems only).
    pub data: Option<Vec<f64>>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Weighted interior term.
    pub r: f64,
    /// Weighted boundary term.
    pub s: f64,
    /// Weighted observation term; zero for forward problems.
    pub d: f64,
    /// Gradient with respect to the network parameters followed by `λ` for
    /// inverse problems.
    pub grad: Vec<f64>,
}

/// Grids, operators and sampled data for one `(problem, spec, arch)` triple.
#[derive(Debug, Clone)]
pub struct LossContext {
    problem: ProblemSpec,
    spec: LossSpec,
    arch: MlpArchitecture,
    grid: TensorGrid,
    diff: DiffOperator,
    form: SobolevForm,
    boundary: BoundaryForm,
    conditions: Vec<EndpointCondition>,
    /// Weights of the face grid used by the flux term.
    face_weights: Vec<f64>,
    points: Array2<f64>,
    forcing: Vec<f64>,
    lambda_shape: Vec<f64>,
    potential: Vec<f64>,
    targets: Vec<Vec<f64>>,
    /// Analytic solution on the interior grid, observed by inverse problems.
    observations: Option<Vec<f64>>,
    mse: Option<MseCollocation>,
}

fn forcing_samples(problem: &ProblemSpec, pts: &Array2<f64>) -> Vec<f64> {
    let lambda = problem.lambda_gt().unwrap_or(0.0);
    pts.rows().into_iter().map(|r| problem.source(r.as_slice().expect("row-major"), lambda)).collect()
}

impl LossContext {
    pub fn new(problem: ProblemSpec, spec: LossSpec, arch: MlpArchitecture) -> Result<Self> {
        let dim = problem.dim();
        if arch.input_dim != dim {
            return Err(Error::LengthMismatch { expected: dim, actual: arch.input_dim });
        }
        if spec.n_r == 0 || spec.n_s == 0 {
            return Err(Error::Config("grid degrees must be positive".into()));
        }
        let grid = TensorGrid::new(dim, spec.n_r)?;
        let diff = DiffOperator::new(&grid);
        let form = SobolevForm::new(&grid, spec.k, spec.interior_kind());
        let boundary = BoundaryForm::new(dim, spec.n_s, spec.l, spec.boundary_kind(), spec.boundary_sum)?;
        let face_weights = if dim == 1 { vec![1.0] } else { TensorGrid::new(dim - 1, spec.n_r)?.weights().to_vec() };

        let interior = grid.points();
        let (conditions, boundary_points, targets) = if dim == 1 {
            let conditions = problem.endpoint_conditions();
            let pts: Vec<f64> = conditions.iter().filter(|c| c.order == 0).map(|c| c.x).collect();
            let n = pts.len();
            let targets = conditions.iter().map(|c| vec![c.target]).collect();
            (conditions, Array2::from_shape_vec((n, 1), pts).expect("column shape"), targets)
        } else {
            let faces: Vec<Array2<f64>> = (0..boundary.face_count()).map(|f| boundary.face_points(f)).collect();
            let targets = faces
                .iter()
                .map(|f| f.rows().into_iter().map(|r| problem.boundary_value(r.as_slice().expect("row-major"))).collect())
                .collect();
            let views: Vec<_> = faces.iter().map(|f| f.view()).collect();
            (Vec::new(), concatenate(Axis(0), &views).expect("faces share width"), targets)
        };
        let points = concatenate(Axis(0), &[interior.view(), boundary_points.view()]).expect("same width");
        let rows = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            interior.rows().into_iter().map(|r| f(r.as_slice().expect("row-major"))).collect()
        };
        let forcing = if problem.is_inverse() { vec![0.0; grid.len()] } else { forcing_samples(&problem, &interior) };
        let lambda_shape = rows(&|x| problem.source_lambda_derivative(x));
        let potential = rows(&|x| problem.potential(x));
        let observations = problem.is_inverse().then(|| rows(&|x| problem.boundary_value(x)));
        let mse = (spec.kind == LossKind::Mse).then(|| {
            MseCollocation::random(&problem, (spec.n_r + 1).pow(dim as u32), spec.n_s + 1, spec.seed)
        });
        Ok(Self {
            problem,
            spec,
            arch,
            grid,
            diff,
            form,
            boundary,
            conditions,
            face_weights,
            points,
            forcing,
            lambda_shape,
            potential,
            targets,
            observations,
            mse,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    /// Interior grid points followed by the boundary points at which the
    /// network is evaluated.
    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn mse_collocation(&self) -> Option<&MseCollocation> {
        self.mse.as_ref()
    }

    /// Expected parameter vector length (network plus `λ` when inverse).
    pub fn param_len(&self) -> usize {
        self.arch.param_count() + usize::from(self.problem.is_inverse())
    }

    fn lambda_of(&self, params: &[f64]) -> f64 {
        if self.problem.is_inverse() {
            params[self.arch.param_count()]
        } else {
            self.problem.lambda_gt().unwrap_or(0.0)
        }
    }

    fn forcing_at(&self, lambda: f64) -> Vec<f64> {
        if self.problem.is_inverse() {
            self.lambda_shape.iter().map(|s| lambda * s).collect()
        } else {
            self.forcing.clone()
        }
    }

    /// Everything in the strong residual except the principal part and the
    /// forcing.
    fn lower_order_terms(&self, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
        Ok(match self.problem.kind() {
            ResidualKind::Qho => u.iter().zip(&self.potential).map(|(u, v)| (v - lambda) * u).collect(),
            ResidualKind::Burgers => {
                let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
                self.diff.apply_axis(&sq, 0, 1)?.into_iter().map(|v| 0.5 * v).collect()
            }
            _ => vec![0.0; u.len()],
        })
    }

    /// `(c, r)` such that the principal part is `c * sum_j ∂_j^r u`.
    fn principal(&self) -> (f64, usize) {
        match self.problem.kind() {
            ResidualKind::Ode4 => (1.0, 4),
            _ => (-1.0, 2),
        }
    }

    fn strong_principal(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (c, r) = self.principal();
        let mut out = vec![0.0; u.len()];
        for axis in 0..self.grid.dim() {
            for (o, v) in out.iter_mut().zip(self.diff.apply_axis(u, axis, r)?) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    fn strong_principal_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        let (c, r) = self.principal();
        let mut out = vec![0.0; g.len()];
        for axis in 0..self.grid.dim() {
            for (o, v) in out.iter_mut().zip(self.diff.apply_axis_transpose(g, axis, r)?) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    fn sides() -> [Side; 2] {
        [Side::Lower, Side::Upper]
    }

    /// Principal part integrated by parts against the Lagrange basis and
    /// divided by the cubature weights, plus the outward flux samples.
    fn weak_principal(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let (c, r) = self.principal();
        let w = self.grid.weights();
        let mut acc = vec![0.0; u.len()];
        let mut flux = Vec::with_capacity(2 * self.grid.dim());
        for axis in 0..self.grid.dim() {
            let d = self.diff.apply_axis(u, axis, r - 1)?;
            let wd: Vec<f64> = d.iter().zip(w).map(|(a, b)| a * b).collect();
            for (o, v) in acc.iter_mut().zip(self.diff.apply_axis_transpose(&wd, axis, 1)?) {
                *o -= c * v;
            }
            for side in Self::sides() {
                let trace = self.diff.face_trace(&d, axis, side)?;
                let weighted: Vec<f64> = trace.iter().zip(&self.face_weights).map(|(t, fw)| t * fw).collect();
                for (o, v) in acc.iter_mut().zip(self.diff.face_trace_transpose(&weighted, axis, side)?) {
                    *o += c * side.normal() * v;
                }
                if r == 2 {
                    flux.push(trace.iter().map(|t| side.normal() * t).collect());
                }
            }
        }
        for (a, wv) in acc.iter_mut().zip(w) {
            *a /= wv;
        }
        Ok((acc, flux))
    }

    fn weak_principal_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        let (c, r) = self.principal();
        let w = self.grid.weights();
        let gw: Vec<f64> = g.iter().zip(w).map(|(a, b)| a / b).collect();
        let mut out = vec![0.0; g.len()];
        for axis in 0..self.grid.dim() {
            let mut inner: Vec<f64> =
                self.diff.apply_axis(&gw, axis, 1)?.iter().zip(w).map(|(a, b)| -c * a * b).collect();
            for side in Self::sides() {
                let trace = self.diff.face_trace(&gw, axis, side)?;
                let weighted: Vec<f64> = trace.iter().zip(&self.face_weights).map(|(t, fw)| t * fw).collect();
                for (o, v) in inner.iter_mut().zip(self.diff.face_trace_transpose(&weighted, axis, side)?) {
                    *o += c * side.normal() * v;
                }
            }
            for (o, v) in out.iter_mut().zip(self.diff.apply_axis_transpose(&inner, axis, r - 1)?) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Residuals from network values at [`points`](Self::points).
    pub fn assemble_from_values(&self, values: &[f64], lambda: f64) -> Result<ResidualAssembly> {
        if values.len() != self.points.nrows() {
            return Err(Error::LengthMismatch { expected: self.points.nrows(), actual: values.len() });
        }
        let (u, bvals) = values.split_at(self.grid.len());
        let forcing = self.forcing_at(lambda);
        let lower = self.lower_order_terms(u, lambda)?;
        let principal = self.strong_principal(u)?;
        let interior: Vec<f64> =
            principal.iter().zip(&lower).zip(&forcing).map(|((p, l), f)| p + l - f).collect();

        let boundary = if self.grid.dim() == 1 {
            let mut direct = bvals.iter();
            self.conditions
                .iter()
                .map(|c| {
                    let v = if c.order == 0 {
                        *direct.next().expect("one value per order-0 condition")
                    } else {
                        let side = if c.x < 0.0 { Side::Lower } else { Side::Upper };
                        let d = self.diff.apply_axis(u, 0, c.order)?;
                        self.diff.face_trace(&d, 0, side)?[0]
                    };
                    Ok(vec![v - c.target])
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            bvals
                .chunks(self.boundary.face_len())
                .zip(&self.targets)
                .map(|(v, g)| v.iter().zip(g).map(|(a, b)| a - b).collect())
                .collect()
        };

        let weak = if self.spec.kind == LossKind::WeakVariational {
            let (wp, g) = self.weak_principal(u)?;
            let h = wp.iter().zip(&lower).map(|(a, b)| a + b).collect();
            let f = forcing.iter().map(|v| -v).collect();
            Some(WeakParts { h, f, g })
        } else {
            None
        };
        let data = self.observations.as_ref().map(|o| u.iter().zip(o).map(|(a, b)| a - b).collect());
        Ok(ResidualAssembly { values: u.to_vec(), interior, boundary, weak, data, lambda })
    }

    /// Evaluates the network and assembles every residual vector.
    pub fn assemble_residuals(&self, params: &[f64]) -> Result<ResidualAssembly> {
        self.check_params(params)?;
        let values = self.arch.eval(params, self.points.view())?;
        self.assemble_from_values(&values, self.lambda_of(params))
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_len() {
            return Err(Error::LengthMismatch { expected: self.param_len(), actual: params.len() });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter(i));
        }
        Ok(())
    }

    /// Loss value and gradient in residual space.
    ///
    /// The interior vector is the strong residual, or `h + f` for the weak
    /// loss.
    fn residual_loss(&self, asm: &ResidualAssembly) -> Result<ResidualLoss> {
        let wi = self.spec.interior_weight;
        let wb = self.spec.boundary_weight;
        let interior: Vec<f64> = match &asm.weak {
            Some(w) => w.h.iter().zip(&w.f).map(|(a, b)| a + b).collect(),
            None => asm.interior.clone(),
        };
        let r = wi * self.form.quadratic(&interior)?;
        let gr: Vec<f64> = self.form.gradient(&interior)?.into_iter().map(|v| wi * v).collect();
        let (s, gs) = if self.grid.dim() == 1 {
            let s: f64 = asm.boundary.iter().map(|v| v[0] * v[0]).sum();
            (wb * s, asm.boundary.iter().map(|v| vec![2.0 * wb * v[0]]).collect())
        } else {
            let s = self.boundary.quadratic(&asm.boundary)?;
            let g = self.boundary.gradient(&asm.boundary)?;
            (wb * s, g.into_iter().map(|f| f.into_iter().map(|v| wb * v).collect()).collect())
        };
        let (d, gd) = match &asm.data {
            Some(e) => {
                let wd = self.spec.data_weight;
                let w = self.grid.weights();
                let d = wd * e.iter().zip(w).map(|(e, w)| w * e * e).sum::<f64>();
                (d, e.iter().zip(w).map(|(e, w)| 2.0 * wd * w * e).collect())
            }
            None => (0.0, Vec::new()),
        };
        Ok(ResidualLoss { r, s, d, gr, gs, gd })
    }

    /// Loss value from an assembly, without gradient.
    pub fn loss_from_assembly(&self, asm: &ResidualAssembly) -> Result<LossBreakdown> {
        let l = self.residual_loss(asm)?;
        Ok(LossBreakdown { total: l.r + l.s + l.d, r: l.r, s: l.s, d: l.d, grad: Vec::new() })
    }

    pub fn loss_and_grad(&self, params: &[f64]) -> Result<LossBreakdown> {
        if let Some(colloc) = &self.mse {
            return mse_loss_and_grad(
                &self.arch,
                params,
                &self.problem,
                colloc,
                &self.spec.weights(),
            );
        }
        self.check_params(params)?;
        let (values, tape) = self.arch.forward_batch(params, self.points.view())?;
        let lambda = self.lambda_of(params);
        let asm = self.assemble_from_values(&values, lambda)?;
        let ResidualLoss { r, s, d, gr, gs, gd } = self.residual_loss(&asm)?;
        let total = r + s + d;
        if !total.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss {total}")));
        }
        let u = &asm.values;

        // Pull back the interior term.
        let mut cot_u = if asm.weak.is_some() {
            self.weak_principal_transpose(&gr)?
        } else {
            self.strong_principal_transpose(&gr)?
        };
        match self.problem.kind() {
            ResidualKind::Qho => {
                for ((c, g), v) in cot_u.iter_mut().zip(&gr).zip(&self.potential) {
                    *c += (v - lambda) * g;
                }
            }
            ResidualKind::Burgers => {
                let back = self.diff.apply_axis_transpose(&gr, 0, 1)?;
                for ((c, b), uv) in cot_u.iter_mut().zip(back).zip(u) {
                    *c += uv * b;
                }
            }
            _ => {}
        }
        let grad_lambda: f64 = match self.problem.kind() {
            ResidualKind::Qho => -gr.iter().zip(u).map(|(g, u)| g * u).sum::<f64>(),
            _ => -gr.iter().zip(&self.lambda_shape).map(|(g, s)| g * s).sum::<f64>(),
        };

        for (c, g) in cot_u.iter_mut().zip(&gd) {
            *c += g;
        }

        // Boundary term.
        let mut cot_b = Vec::with_capacity(self.points.nrows() - u.len());
        if self.grid.dim() == 1 {
            for (c, g) in self.conditions.iter().zip(&gs) {
                if c.order == 0 {
                    cot_b.push(g[0]);
                } else {
                    let side = if c.x < 0.0 { Side::Lower } else { Side::Upper };
                    let t = self.diff.face_trace_transpose(&g[..1], 0, side)?;
                    for (cu, v) in cot_u.iter_mut().zip(self.diff.apply_axis_transpose(&t, 0, c.order)?) {
                        *cu += v;
                    }
                }
            }
        } else {
            for g in &gs {
                cot_b.extend_from_slice(g);
            }
        }
        cot_u.extend_from_slice(&cot_b);
        let mut grad = self.arch.vjp_weights(params, &tape, &cot_u)?;
        if self.problem.is_inverse() {
            grad.push(grad_lambda);
        }
        Ok(LossBreakdown { total, r, s, d, grad })
    }
}

/// Weighted terms and their gradients in residual space.
struct ResidualLoss {
    r: f64,
    s: f64,
    d: f64,
    gr: Vec<f64>,
    gs: Vec<Vec<f64>>,
    gd: Vec<f64>,
}

/// One-shot loss evaluation; builds a fresh [`LossContext`].
pub fn loss_and_grad(
    problem: &ProblemSpec,
    arch: &MlpArchitecture,
    params: &[f64],
    spec: &LossSpec,
) -> Result<LossBreakdown> {
    LossContext::new(problem.clone(), spec.clone(), arch.clone())?.loss_and_grad(params)
}

/// One-shot residual assembly; builds a fresh [`LossContext`].
pub fn assemble_residuals(
    problem: &ProblemSpec,
    arch: &MlpArchitecture,
    params: &[f64],
    spec: &LossSpec,
) -> Result<ResidualAssembly> {
    LossContext::new(problem.clone(), spec.clone(), arch.clone())?.assemble_residuals(params)
}
