//! Adam and the full-batch training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossContext;
use crate::problems::{error_metrics, ErrorMetrics};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moments and step count of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    /// Learning rate of the trailing entries from `index` on, if different.
    pub tail_lr: Option<(usize, f64)>,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, tail_lr: None, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn with_tail_lr(mut self, index: usize, lr: f64) -> Self {
        self.tail_lr = Some((index, lr));
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::LengthMismatch { expected: state.m.len(), actual: params.len() });
    }
    if grad.len() != params.len() {
        return Err(Error::LengthMismatch { expected: params.len(), actual: grad.len() });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Divergence(format!("non-finite gradient entry {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (i, ((p, g), (m, v))) in params.iter_mut().zip(grad).zip(state.m.iter_mut().zip(state.v.iter_mut())).enumerate()
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let lr = match state.tail_lr {
            Some((from, lr)) if i >= from => lr,
            _ => state.lr,
        };
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate of `λ`; defaults to `lr`.
    pub lr_lambda: Option<f64>,
    pub seed: u64,
    /// Error metrics are recorded every `checkpoint_stride` epochs (0: only
    /// at the end).
    pub checkpoint_stride: usize,
    /// Points per axis of the evaluation grid.
    pub eval_n: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, lr: 1e-3, lr_lambda: None, seed: 0, checkpoint_stride: 0, eval_n: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub total: f64,
    pub r: f64,
    pub s: f64,
    /// Observation term of inverse runs.
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub metrics: ErrorMetrics,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss before each update.
    pub history: Vec<EpochRecord>,
    /// Wall time of loss, gradient and update per epoch, in seconds.
    pub epoch_seconds: Vec<f64>,
    /// `λ` before each update (inverse runs only).
    pub lambda_history: Vec<f64>,
    /// Loss at the final parameters.
    pub final_loss: Option<EpochRecord>,
    pub params: Vec<f64>,
    pub lambda: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// Set when training stopped on a non-finite loss or gradient.
    pub divergence: Option<String>,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// Metrics at the last checkpoint.
    pub fn metrics(&self) -> Option<&ErrorMetrics> {
        self.checkpoints.last().map(|c| &c.metrics)
    }

    pub fn total_seconds(&self) -> f64 {
        self.epoch_seconds.iter().sum()
    }
}

fn checkpoint(ctx: &LossContext, params: &[f64], epoch: usize, eval_n: usize) -> Result<Checkpoint> {
    let arch = ctx.arch();
    let net = &params[..arch.param_count()];
    let lambda = ctx.problem().is_inverse().then(|| params[arch.param_count()]);
    let metrics = error_metrics(|pts| arch.eval(net, pts), ctx.problem(), eval_n, lambda)?;
    Ok(Checkpoint { epoch, metrics, lambda })
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::Divergence(_) | Error::NonFiniteParameter(_))
}

/// Full-batch Adam from explicit initial parameters.
pub fn train_from(ctx: &LossContext, mut params: Vec<f64>, config: &TrainConfig) -> Result<TrainReport> {
    if params.len() != ctx.param_len() {
        return Err(Error::LengthMismatch { expected: ctx.param_len(), actual: params.len() });
    }
    let inverse = ctx.problem().is_inverse();
    let net = ctx.arch().param_count();
    let mut state = AdamState::new(params.len(), config.lr);
    if inverse {
        state = state.with_tail_lr(net, config.lr_lambda.unwrap_or(config.lr));
    }
    let mut report = TrainReport {
        history: Vec::with_capacity(config.epochs),
        epoch_seconds: Vec::with_capacity(config.epochs),
        lambda_history: Vec::new(),
        final_loss: None,
        params: Vec::new(),
        lambda: None,
        checkpoints: Vec::new(),
        divergence: None,
    };
    for epoch in 0..config.epochs {
        if config.checkpoint_stride > 0 && epoch % config.checkpoint_stride == 0 {
            report.checkpoints.push(checkpoint(ctx, &params, epoch, config.eval_n)?);
        }
        if inverse {
            report.lambda_history.push(params[net]);
        }
        let start = Instant::now();
        let step = ctx.loss_and_grad(&params).and_then(|lg| {
            adam_step(&mut state, &mut params, &lg.grad)?;
            Ok(lg)
        });
        let elapsed = start.elapsed().as_secs_f64();
        match step {
            Ok(lg) => {
                report.history.push(EpochRecord { total: lg.total, r: lg.r, s: lg.s, d: lg.d });
                report.epoch_seconds.push(elapsed);
            }
            Err(e) if is_divergence(&e) => {
                report.divergence = Some(format!("epoch {epoch}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if report.divergence.is_none() {
        match ctx.loss_and_grad(&params) {
            Ok(lg) => report.final_loss = Some(EpochRecord { total: lg.total, r: lg.r, s: lg.s, d: lg.d }),
            Err(e) if is_divergence(&e) => report.divergence = Some(format!("final evaluation: {e}")),
            Err(e) => return Err(e),
        }
    }
    if params.iter().all(|v| v.is_finite()) {
        report.checkpoints.push(checkpoint(ctx, &params, report.history.len(), config.eval_n)?);
    }
    report.lambda = inverse.then(|| params[net]);
    report.params = params;
    Ok(report)
}

/// Trains a freshly initialised network (seeded Glorot initialisation).
pub fn train(ctx: &LossContext, config: &TrainConfig) -> Result<TrainReport> {
    if ctx.problem().is_inverse() {
        return Err(Error::Config(format!("{} needs an initial λ; use train_inverse", ctx.problem().name())));
    }
    train_from(ctx, ctx.arch().init(config.seed).as_slice().to_vec(), config)
}

/// Jointly trains the network and the unknown `λ`, starting from `lambda0`.
pub fn train_inverse(ctx: &LossContext, config: &TrainConfig, lambda0: f64) -> Result<TrainReport> {
    if !ctx.problem().is_inverse() {
        return Err(Error::NotInverse(ctx.problem().name().into()));
    }
    if !lambda0.is_finite() {
        return Err(Error::Config(format!("initial λ must be finite, got {lambda0}")));
    }
    let params = ctx.arch().init(config.seed).with_extras(&[lambda0]);
    train_from(ctx, params.as_slice().to_vec(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossKind, LossSpec};
    use crate::nn::{Activation, MlpArchitecture};
    use crate::problems::ProblemSpec;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let g = [3.0, -0.5, 1e-2, -200.0];
        let mut p = [0.0; 4];
        let mut s = AdamState::new(4, 1e-3);
        adam_step(&mut s, &mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            assert!((pi + 1e-3 * gi.signum()).abs() < 1e-3 * 1e-4);
        }
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = [1.0, -2.0];
        let mut s = AdamState::new(2, 1e-2);
        adam_step(&mut s, &mut p, &[1.0, 1.0]).unwrap();
        let before = p;
        let m0 = s.first_moment().to_vec();
        let v0 = s.second_moment().to_vec();
        let mut s2 = AdamState::new(2, 1e-2);
        let mut q = [1.0, -2.0];
        adam_step(&mut s2, &mut q, &[0.0, 0.0]).unwrap();
        assert_eq!(q, [1.0, -2.0]);
        // Decay of existing moments under a zero gradient.
        let mut z = before;
        adam_step(&mut s, &mut z, &[0.0, 0.0]).unwrap();
        for i in 0..2 {
            assert_eq!(s.first_moment()[i], BETA1 * m0[i]);
            assert_eq!(s.second_moment()[i], BETA2 * v0[i]);
        }
    }

    #[test]
    fn two_steps_match_hand_recurrence() {
        let g = [0.7, -1.1];
        let lr = 5e-3;
        let mut p = [0.2, 0.4];
        let mut s = AdamState::new(2, lr);
        adam_step(&mut s, &mut p, &g).unwrap();
        adam_step(&mut s, &mut p, &g).unwrap();
        for i in 0..2 {
            let mut x = [0.2, 0.4][i];
            let (mut m, mut v) = (0.0f64, 0.0f64);
            for t in 1..=2 {
                m = 0.9 * m + 0.1 * g[i];
                v = 0.999 * v + 0.001 * g[i] * g[i];
                let mh = m / (1.0 - 0.9f64.powi(t));
                let vh = v / (1.0 - 0.999f64.powi(t));
                x -= lr * mh / (vh.sqrt() + 1e-8);
            }
            assert_eq!(x.to_bits(), p[i].to_bits());
        }
        assert_eq!(s.step_count(), 2);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut s = AdamState::new(1, 1e-3);
        assert!(matches!(adam_step(&mut s, &mut [0.0], &[f64::NAN]), Err(Error::Divergence(_))));
    }

    fn small_ctx(problem: ProblemSpec) -> LossContext {
        let spec = LossSpec::new(LossKind::StrongVariational, 0, 0, 16, 16).unwrap();
        let arch = MlpArchitecture::new(problem.dim(), vec![8, 8], Activation::Sin).unwrap();
        LossContext::new(problem, spec, arch).unwrap()
    }

    #[test]
    fn zero_epochs_reports_initial_state() {
        let ctx = small_ctx(ProblemSpec::Poisson1d { omega: 1.0 });
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let r = train(&ctx, &cfg).unwrap();
        assert!(r.history.is_empty());
        assert!(r.final_loss.is_some());
        assert_eq!(r.checkpoints.len(), 1);
        assert_eq!(r.params, ctx.arch().init(0).as_slice());

        let ictx = small_ctx(ProblemSpec::PoissonInverse1d { omega: 1.0 });
        let r = train_inverse(&ictx, &cfg, 0.3).unwrap();
        assert_eq!(r.lambda, Some(0.3));
    }

    #[test]
    fn training_is_deterministic_and_decreases() {
        let ctx = small_ctx(ProblemSpec::Poisson1d { omega: 1.0 });
        let cfg = TrainConfig { epochs: 200, lr: 1e-2, checkpoint_stride: 50, ..Default::default() };
        let a = train(&ctx, &cfg).unwrap();
        let b = train(&ctx, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        assert_eq!(a.history.len(), 200);
        assert_eq!(a.checkpoints.len(), 5);
        assert!(a.epoch_seconds.iter().all(|t| *t > 0.0));
        assert!(a.history[199].total < a.history[0].total);
    }

    #[test]
    fn lambda_stays_near_truth_at_a_fitted_state() {
        let ctx = small_ctx(ProblemSpec::PoissonInverse1d { omega: 1.0 });
        let gt = 1.0;
        // Fit the network with λ frozen at its true value.
        let frozen = TrainConfig { epochs: 3000, lr: 1e-2, lr_lambda: Some(0.0), ..Default::default() };
        let fit = train_inverse(&ctx, &frozen, gt).unwrap();
        assert_eq!(fit.lambda, Some(gt));
        // Adam moves every entry by about its learning rate per step, so the
        // 1e-6 neighbourhood over 100 epochs needs lr_lambda <= 1e-8.
        let cfg = TrainConfig { epochs: 100, lr: 1e-4, lr_lambda: Some(1e-8), ..Default::default() };
        let r = train_from(&ctx, fit.params.clone(), &cfg).unwrap();
        assert!((r.lambda.unwrap() - gt).abs() < 1e-6);
        // With a shared learning rate λ travels well below the Adam bound
        // 100 * lr because its gradient changes sign near the fitted state.
        let cfg = TrainConfig { epochs: 100, lr: 1e-4, ..Default::default() };
        let r = train_from(&ctx, fit.params, &cfg).unwrap();
        assert!((r.lambda.unwrap() - gt).abs() < 0.5 * 100.0 * 1e-4);
    }

    #[test]
    fn mode_mismatch_errors() {
        let ctx = small_ctx(ProblemSpec::PoissonInverse1d { omega: 1.0 });
        assert!(train(&ctx, &TrainConfig::default()).is_err());
        let fwd = small_ctx(ProblemSpec::Poisson1d { omega: 1.0 });
        assert!(matches!(train_inverse(&fwd, &TrainConfig::default(), 1.0), Err(Error::NotInverse(_))));
    }

    #[test]
    fn divergence_is_flagged() {
        let ctx = small_ctx(ProblemSpec::Poisson1d { omega: 1.0 });
        let r = train(&ctx, &TrainConfig { epochs: 50, lr: 1e300, ..Default::default() }).unwrap();
        assert!(r.diverged());
        assert!(r.history.len() < 50);
    }
}
