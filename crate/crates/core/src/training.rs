//! Loss assembly, Adam optimization with positivity projection, and the
//! strip-training curriculum for finite horizons.
//!
//! Two losses:
//!
//! * method 1 (penalty): mean-squared PDE residual + mean-squared boundary
//!   error + a penalty on negative leading principal minors of the
//!   state-Hessian, `sum_k |min(0, M_k)|^2`, batch-averaged. Needs a twice
//!   differentiable network.
//! * method 2 (convex): `lambda * boundary-MSE + residual-MSE`; no Hessian
//!   term, convexity holds by construction.
//!
//! Norms are mean squares over the batch throughout. Collocation points are
//! resampled uniformly every epoch from a seeded stream, so a run is a pure
//! function of (problem, network, config, seed).

use crate::autodiff::{seed_inputs, JetOrder, ParamVector, Scalar, Tape};
use crate::hjb::{residual_scalar, HJBProblem, Horizon};
use crate::networks::{project_positive, Smoothness, ValueNet};
use crate::rng::RngStreams;
use crate::surface::fmt_g17;
use crate::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Hessian-minor penalty on a smooth network.
    Penalty,
    /// Convex-by-construction network, no penalty term.
    Convex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    #[serde(default = "defaults::step_size")]
    pub step_size: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::eps_adam")]
    pub eps_adam: f64,
    #[serde(default = "defaults::epoch_cap")]
    pub epoch_cap: usize,
    #[serde(default = "defaults::n_inner")]
    pub n_inner: usize,
    #[serde(default = "defaults::n_boundary")]
    pub n_boundary: usize,
    #[serde(default = "defaults::n_hessian")]
    pub n_hessian: usize,
    /// Weight pinning boundary data (and, in strip training, the already
    /// trained region).
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::loss_th1")]
    pub loss_th1: f64,
    #[serde(default = "defaults::loss_th2")]
    pub loss_th2: f64,
    /// Boundary-fit threshold for strip-training stage 1 (mean-squared error
    /// on a fixed check grid).
    #[serde(default = "defaults::l_b")]
    pub l_b: f64,
    #[serde(default)]
    pub seed: u64,
    /// Optional `max(0, -V)^2` term for infinite-horizon runs; off by
    /// default.
    #[serde(default)]
    pub nonneg_penalty: bool,
    /// When positive, fit the network to the bowl `kappa * |x|^2` for
    /// `warmup_epochs` before residual training. Starting with a gradient
    /// field steeper than the solution's makes descent approach the
    /// Hamiltonian's concave-in-p zero set from above, avoiding the spurious
    /// lower root; the bowl is a scale, not a guess of the solution.
    #[serde(default)]
    pub warmup_curvature: f64,
    #[serde(default = "defaults::warmup_epochs")]
    pub warmup_epochs: usize,
}

mod defaults {
    pub fn step_size() -> f64 {
        1e-3
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn eps_adam() -> f64 {
        1e-8
    }
    pub fn epoch_cap() -> usize {
        20_000
    }
    pub fn n_inner() -> usize {
        1024
    }
    pub fn n_boundary() -> usize {
        128
    }
    pub fn n_hessian() -> usize {
        256
    }
    pub fn lambda() -> f64 {
        100.0
    }
    pub fn loss_th1() -> f64 {
        1e-3
    }
    pub fn loss_th2() -> f64 {
        1e-4
    }
    pub fn l_b() -> f64 {
        1e-4
    }
    pub fn warmup_epochs() -> usize {
        500
    }
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            step_size: defaults::step_size(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            eps_adam: defaults::eps_adam(),
            epoch_cap: defaults::epoch_cap(),
            n_inner: defaults::n_inner(),
            n_boundary: defaults::n_boundary(),
            n_hessian: defaults::n_hessian(),
            lambda: defaults::lambda(),
            loss_th1: defaults::loss_th1(),
            loss_th2: defaults::loss_th2(),
            l_b: defaults::l_b(),
            seed: 0,
            nonneg_penalty: false,
            warmup_curvature: 0.0,
            warmup_epochs: defaults::warmup_epochs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must be in (0, 1)")));
            }
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::InvalidConfig("lambda must be >= 1".into()));
        }
        if !(self.loss_th2 <= self.loss_th1) {
            return Err(Error::InvalidConfig(
                "loss_th2 must not exceed loss_th1".into(),
            ));
        }
        Ok(())
    }

    /// Check the method/network pairing before any compute.
    pub fn check_pairing<N: ValueNet>(&self, net: &N) -> Result<()> {
        match self.method {
            Method::Penalty => {
                if net.smoothness() != Smoothness::CInf {
                    return Err(Error::InvalidConfig(format!(
                        "penalty method needs a twice differentiable network; \
                         `{}` is not",
                        net.activation_name()
                    )));
                }
            }
            Method::Convex => {
                if net.positive_block().is_none() {
                    return Err(Error::InvalidConfig(
                        "convex method needs a convex-family network \
                         (positivity-constrained output weights)"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Strip curriculum geometry: strip `k` (1-based) trains on
/// `[t_strip(k), T]` with `t_strip(k) = max(0, t_ini - k dt)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StripSchedule {
    pub t_ini: f64,
    pub dt: f64,
}

/// One strip's time interval: the freshly added strip is
/// `[t_strip, t_stripold]`, the trained region `[t_stripold, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripState {
    pub index: usize,
    pub t_strip: f64,
    pub t_stripold: f64,
}

impl StripSchedule {
    pub fn validate(&self, t_end: f64) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig("strip dt must be positive".into()));
        }
        if !(self.t_ini > 0.0 && self.t_ini < t_end) {
            return Err(Error::InvalidConfig(format!(
                "t_ini must lie strictly inside (0, {t_end})"
            )));
        }
        Ok(())
    }

    pub fn strip_count(&self) -> usize {
        (self.t_ini / self.dt).ceil() as usize
    }

    /// Lower edge of the training region after strip `k` (1-based), clamped
    /// at 0.
    pub fn t_strip(&self, k: usize) -> f64 {
        (self.t_ini - k as f64 * self.dt).max(0.0)
    }

    pub fn strips(&self) -> Vec<StripState> {
        (1..=self.strip_count())
            .map(|k| StripState {
                index: k,
                t_strip: self.t_strip(k),
                t_stripold: self.t_strip(k - 1),
            })
            .collect()
    }
}

/// Collocation points for one epoch.
#[derive(Debug, Clone, Default)]
pub struct SampleBatch {
    /// PDE residual points over the current region (full input layout).
    pub inner: Vec<Vec<f64>>,
    /// Boundary points with boundary values (`t = T` terminal data, or the
    /// origin anchor for infinite horizons).
    pub boundary: Vec<(Vec<f64>, f64)>,
    /// Points where the Hessian penalty is evaluated (method 1).
    pub hessian: Vec<Vec<f64>>,
}

/// Loss split into its reported components; `total` is always their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub residual: f64,
    pub boundary: f64,
    pub penalty: f64,
}

impl LossParts {
    fn close(mut self) -> Self {
        self.total = self.residual + self.boundary + self.penalty;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Warmup,
    Train,
    Boundary,
    InitialStrip,
    Strip,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Warmup => "warmup",
            Stage::Train => "train",
            Stage::Boundary => "boundary",
            Stage::InitialStrip => "initial_strip",
            Stage::Strip => "strip",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub stage: Stage,
    pub strip_index: usize,
    pub epoch: usize,
    pub loss: LossParts,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Converged,
    NonConverged {
        stage: Stage,
        strip_index: usize,
        detail: String,
    },
}

impl TrainStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, TrainStatus::Converged)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParamVector,
    pub history: Vec<HistoryRow>,
    pub status: TrainStatus,
    pub final_loss: f64,
}

// ---------------------------------------------------------------------------
// Principal minors
// ---------------------------------------------------------------------------

/// Leading principal minors `det(H[..k, ..k])`, `k = 1..=n`, by LU with
/// partial pivoting. `h` is row-major `n x n`, `n <= 8`.
pub fn principal_minors(h: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 || n > 8 || h.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: h.len(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let sub = nalgebra::DMatrix::from_fn(k, k, |i, j| h[i * n + j]);
        out.push(sub.lu().determinant());
    }
    Ok(out)
}

/// Leading minors in generic scalar arithmetic (sizes 1..=3), used inside
/// the differentiable penalty. `h` indexes the packed state-Hessian through
/// `at(i, j)`.
fn leading_minors_scalar<S: Scalar>(at: impl Fn(usize, usize) -> S, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n);
    if n >= 1 {
        out.push(at(0, 0));
    }
    if n >= 2 {
        out.push(at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0));
    }
    if n >= 3 {
        let m3 = at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1))
            - at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0))
            + at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
        out.push(m3);
    }
    assert!(n <= 3, "penalty minors support up to 3 state dimensions");
    out
}

// ---------------------------------------------------------------------------
// Per-point loss contributions (generic over plain/tape scalars)
// ---------------------------------------------------------------------------

fn point_residual_sq<S: Scalar, N: ValueNet>(
    net: &N,
    params: &[S],
    problem: &HJBProblem,
    point: &[f64],
    lift: &impl Fn(f64) -> S,
) -> S {
    let vals: Vec<S> = point.iter().map(|&v| lift(v)).collect();
    let jets = seed_inputs(&vals, JetOrder::Gradient);
    let out = net.forward_jet(params, &jets);
    let r = residual_scalar(problem, point, &out.g);
    r * r
}

fn point_boundary_sq<S: Scalar, N: ValueNet>(
    net: &N,
    params: &[S],
    point: &[f64],
    target: f64,
    lift: &impl Fn(f64) -> S,
) -> S {
    let vals: Vec<S> = point.iter().map(|&v| lift(v)).collect();
    let jets = seed_inputs(&vals, JetOrder::ValueOnly);
    let d = net.forward_jet(params, &jets).v.add_const(-target);
    d * d
}

fn point_minor_penalty<S: Scalar, N: ValueNet>(
    net: &N,
    params: &[S],
    problem: &HJBProblem,
    point: &[f64],
    lift: &impl Fn(f64) -> S,
) -> S {
    let vals: Vec<S> = point.iter().map(|&v| lift(v)).collect();
    let jets = seed_inputs(&vals, JetOrder::Hessian);
    let out = net.forward_jet(params, &jets);
    let off = match problem.horizon() {
        Horizon::Infinite => 0,
        Horizon::Finite { .. } => 1,
    };
    let n = problem.state_dim();
    let minors = leading_minors_scalar(
        |i, j| out.h[crate::autodiff::packed_index(i + off, j + off)],
        n,
    );
    let mut acc: Option<S> = None;
    for m in minors {
        let neg = m.min_zero();
        let term = neg * neg;
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    acc.expect("state dim > 0")
}

fn point_nonneg_sq<S: Scalar, N: ValueNet>(
    net: &N,
    params: &[S],
    point: &[f64],
    lift: &impl Fn(f64) -> S,
) -> S {
    let vals: Vec<S> = point.iter().map(|&v| lift(v)).collect();
    let jets = seed_inputs(&vals, JetOrder::ValueOnly);
    let neg = (-net.forward_jet(params, &jets).v).relu();
    neg * neg
}

// ---------------------------------------------------------------------------
// Batch losses: value path
// ---------------------------------------------------------------------------

fn guard_finite(v: f64, context: &str, point: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
            point: point.to_vec(),
        })
    }
}

fn mean_residual_sq<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    points: &[Vec<f64>],
) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let id = |v: f64| v;
    let mut sum = 0.0;
    for p in points {
        sum += guard_finite(
            point_residual_sq(net, &params.values, problem, p, &id),
            "residual",
            p,
        )?;
    }
    Ok(sum / points.len() as f64)
}

fn mean_boundary_sq<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    points: &[(Vec<f64>, f64)],
) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let id = |v: f64| v;
    let mut sum = 0.0;
    for (p, target) in points {
        sum += guard_finite(
            point_boundary_sq(net, &params.values, p, *target, &id),
            "boundary",
            p,
        )?;
    }
    Ok(sum / points.len() as f64)
}

fn mean_minor_penalty<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    points: &[Vec<f64>],
) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let id = |v: f64| v;
    let mut sum = 0.0;
    for p in points {
        sum += guard_finite(
            point_minor_penalty(net, &params.values, problem, p, &id),
            "hessian penalty",
            p,
        )?;
    }
    Ok(sum / points.len() as f64)
}

/// Method-1 loss: residual MSE + boundary MSE + minor penalty, all equally
/// weighted. Requires a twice differentiable network.
pub fn loss_method1<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    batch: &SampleBatch,
) -> Result<LossParts> {
    if net.smoothness() != Smoothness::CInf {
        return Err(Error::UnsupportedHessian {
            activation: net.activation_name().to_string(),
        });
    }
    let parts = LossParts {
        residual: mean_residual_sq(net, params, problem, &batch.inner)?,
        boundary: mean_boundary_sq(net, params, &batch.boundary)?,
        penalty: mean_minor_penalty(net, params, problem, &batch.hessian)?,
        total: 0.0,
    };
    Ok(parts.close())
}

/// Method-2 loss: `lambda * boundary MSE + residual MSE`; no Hessian term.
pub fn loss_method2<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    batch: &SampleBatch,
    lambda: f64,
) -> Result<LossParts> {
    let parts = LossParts {
        residual: mean_residual_sq(net, params, problem, &batch.inner)?,
        boundary: lambda * mean_boundary_sq(net, params, &batch.boundary)?,
        penalty: 0.0,
        total: 0.0,
    };
    Ok(parts.close())
}

// ---------------------------------------------------------------------------
// Batch losses: gradient path (reverse mode over the jet-valued pass)
// ---------------------------------------------------------------------------

/// Weighted loss terms for one epoch; residual groups allow the strip loss
/// to weight the trained region and the new strip differently.
#[derive(Default)]
struct Terms<'a> {
    residual_groups: Vec<(&'a [Vec<f64>], f64)>,
    boundary: Option<(&'a [(Vec<f64>, f64)], f64)>,
    hessian: Option<&'a [Vec<f64>]>,
    nonneg: Option<&'a [Vec<f64>]>,
}

/// Evaluate the weighted loss and its parameter gradient by recording each
/// per-point contribution on a tape (parameters as shared leaves, rewound
/// between points) and accumulating in a fixed order.
fn terms_loss_grad<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    terms: &Terms<'_>,
) -> Result<(LossParts, Vec<f64>)> {
    let p_len = params.len();
    let tape = Tape::new();
    let pvars: Vec<crate::autodiff::Var<'_>> =
        params.values.iter().map(|&v| tape.leaf(v)).collect();
    let mark = tape.len();
    let mut grad = vec![0.0; p_len];
    let mut adj: Vec<f64> = Vec::new();
    let mut parts = LossParts::default();

    let mut accumulate = |out: crate::autodiff::Var<'_>, scale: f64| {
        tape.backward_into(out, &mut adj);
        for (g, v) in grad.iter_mut().zip(pvars.iter()) {
            *g += scale * adj[v.index()];
        }
    };

    for (points, weight) in &terms.residual_groups {
        if points.is_empty() {
            continue;
        }
        let scale = weight / points.len() as f64;
        for p in points.iter() {
            tape.rewind(mark);
            let lift = |v: f64| tape.leaf(v);
            let out = point_residual_sq(net, &pvars, problem, p, &lift);
            parts.residual += scale * guard_finite(out.value(), "residual", p)?;
            accumulate(out, scale);
        }
    }
    if let Some((points, weight)) = &terms.boundary {
        if !points.is_empty() {
            let scale = weight / points.len() as f64;
            for (p, target) in points.iter() {
                tape.rewind(mark);
                let lift = |v: f64| tape.leaf(v);
                let out = point_boundary_sq(net, &pvars, p, *target, &lift);
                parts.boundary += scale * guard_finite(out.value(), "boundary", p)?;
                accumulate(out, scale);
            }
        }
    }
    if let Some(points) = &terms.hessian {
        if !points.is_empty() {
            let scale = 1.0 / points.len() as f64;
            for p in points.iter() {
                tape.rewind(mark);
                let lift = |v: f64| tape.leaf(v);
                let out = point_minor_penalty(net, &pvars, problem, p, &lift);
                parts.penalty += scale * guard_finite(out.value(), "hessian penalty", p)?;
                accumulate(out, scale);
            }
        }
    }
    if let Some(points) = &terms.nonneg {
        if !points.is_empty() {
            let scale = 1.0 / points.len() as f64;
            for p in points.iter() {
                tape.rewind(mark);
                let lift = |v: f64| tape.leaf(v);
                let out = point_nonneg_sq(net, &pvars, p, &lift);
                parts.penalty += scale * guard_finite(out.value(), "nonneg penalty", p)?;
                accumulate(out, scale);
            }
        }
    }
    Ok((parts.close(), grad))
}

/// Gradient of the method-1 loss with respect to the parameters.
pub fn loss_grad_method1<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    batch: &SampleBatch,
) -> Result<(LossParts, Vec<f64>)> {
    if net.smoothness() != Smoothness::CInf {
        return Err(Error::UnsupportedHessian {
            activation: net.activation_name().to_string(),
        });
    }
    let terms = Terms {
        residual_groups: vec![(&batch.inner[..], 1.0)],
        boundary: Some((&batch.boundary[..], 1.0)),
        hessian: Some(&batch.hessian[..]),
        nonneg: None,
    };
    terms_loss_grad(net, params, problem, &terms)
}

/// Gradient of the method-2 loss with respect to the parameters.
pub fn loss_grad_method2<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    problem: &HJBProblem,
    batch: &SampleBatch,
    lambda: f64,
) -> Result<(LossParts, Vec<f64>)> {
    let terms = Terms {
        residual_groups: vec![(&batch.inner[..], 1.0)],
        boundary: Some((&batch.boundary[..], lambda)),
        hessian: None,
        nonneg: None,
    };
    terms_loss_grad(net, params, problem, &terms)
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One Adam update with bias correction, followed by the positivity
/// projection for convex families. Mutates `state` and `params` in place.
pub fn adam_step<N: ValueNet>(
    net: &N,
    state: &mut AdamState,
    params: &mut ParamVector,
    grad: &[f64],
    cfg: &TrainConfig,
) -> Result<()> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grad.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params.values[i] -= cfg.step_size * m_hat / (v_hat.sqrt() + cfg.eps_adam);
    }
    project_positive(net, params);
    Ok(())
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

fn sample_box<R: Rng>(rng: &mut R, box_: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let dists: Vec<Uniform<f64>> = box_
        .iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi))
        .collect();
    (0..n)
        .map(|_| dists.iter().map(|d| d.sample(rng)).collect())
        .collect()
}

/// Boundary batch: terminal data at `t = T` for finite horizons, the single
/// origin anchor `V(0) = 0` otherwise.
fn sample_boundary<R: Rng>(
    problem: &HJBProblem,
    rng: &mut R,
    n: usize,
) -> Vec<(Vec<f64>, f64)> {
    match problem.horizon() {
        Horizon::Infinite => vec![(vec![0.0; problem.state_dim()], 0.0)],
        Horizon::Finite { t_end, .. } => {
            let xs = sample_box(rng, problem.state_box(), n);
            xs.into_iter()
                .map(|x| {
                    let target = problem.terminal_value(&x).expect("finite horizon");
                    let mut input = Vec::with_capacity(1 + x.len());
                    input.push(*t_end);
                    input.extend_from_slice(&x);
                    (input, target)
                })
                .collect()
        }
    }
}

fn sample_epoch<R: Rng>(
    problem: &HJBProblem,
    cfg: &TrainConfig,
    rng: &mut R,
    region: &[(f64, f64)],
) -> SampleBatch {
    let inner = sample_box(rng, region, cfg.n_inner);
    let boundary = sample_boundary(problem, rng, cfg.n_boundary);
    let hessian = if cfg.method == Method::Penalty {
        sample_box(rng, region, cfg.n_hessian)
    } else {
        Vec::new()
    };
    SampleBatch {
        inner,
        boundary,
        hessian,
    }
}

// ---------------------------------------------------------------------------
// Plain training
// ---------------------------------------------------------------------------

/// Sampling -> loss -> gradient -> Adam until the loss drops to `loss_th2`
/// or the epoch cap is hit. Deterministic for a fixed seed. Hitting the cap
/// is a non-converged status, not an error; the history is always returned.
pub fn train<N: ValueNet>(
    problem: &HJBProblem,
    net: &N,
    mut params: ParamVector,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    cfg.check_pairing(net)?;
    if params.len() != net.param_len() {
        return Err(Error::DimensionMismatch {
            expected: net.param_len(),
            got: params.len(),
        });
    }
    let mut rng = RngStreams::new(cfg.seed).stream("sampling");
    let region = problem.input_box();
    let mut history = Vec::new();
    let mut state = AdamState::new(params.len());
    let mut final_loss = f64::INFINITY;
    let mut status = TrainStatus::NonConverged {
        stage: Stage::Train,
        strip_index: 0,
        detail: format!("epoch cap {} reached", cfg.epoch_cap),
    };

    if cfg.warmup_curvature > 0.0 {
        let state_off = region.len() - problem.state_dim();
        for epoch in 0..cfg.warmup_epochs {
            let points = sample_box(&mut rng, &region, cfg.n_inner);
            let targets: Vec<(Vec<f64>, f64)> = points
                .into_iter()
                .map(|p| {
                    let bowl = cfg.warmup_curvature
                        * p[state_off..].iter().map(|x| x * x).sum::<f64>();
                    (p, bowl)
                })
                .collect();
            let terms = Terms {
                residual_groups: Vec::new(),
                boundary: Some((&targets[..], 1.0)),
                hessian: None,
                nonneg: None,
            };
            let (parts, grad) = terms_loss_grad(net, &params, problem, &terms)?;
            history.push(HistoryRow {
                stage: Stage::Warmup,
                strip_index: 0,
                epoch,
                loss: parts,
                lambda: 1.0,
            });
            adam_step(net, &mut state, &mut params, &grad, cfg)?;
        }
        // Residual training restarts with fresh optimizer moments.
        state = AdamState::new(params.len());
    }

    for epoch in 0..cfg.epoch_cap {
        let batch = sample_epoch(problem, cfg, &mut rng, &region);
        let (parts, grad) = match cfg.method {
            Method::Penalty => loss_grad_method1(net, &params, problem, &batch)?,
            Method::Convex => {
                let mut terms = Terms {
                    residual_groups: vec![(&batch.inner[..], 1.0)],
                    boundary: Some((&batch.boundary[..], cfg.lambda)),
                    hessian: None,
                    nonneg: None,
                };
                if cfg.nonneg_penalty {
                    terms.nonneg = Some(&batch.inner[..]);
                }
                terms_loss_grad(net, &params, problem, &terms)?
            }
        };
        history.push(HistoryRow {
            stage: Stage::Train,
            strip_index: 0,
            epoch,
            loss: parts,
            lambda: match cfg.method {
                Method::Penalty => 1.0,
                Method::Convex => cfg.lambda,
            },
        });
        final_loss = parts.total;
        if parts.total <= cfg.loss_th2 {
            status = TrainStatus::Converged;
            break;
        }
        adam_step(net, &mut state, &mut params, &grad, cfg)?;
    }

    Ok(TrainOutcome {
        params,
        history,
        status,
        final_loss,
    })
}

// ---------------------------------------------------------------------------
// Strip training
// ---------------------------------------------------------------------------

struct PhaseCtx<'a, N: ValueNet> {
    problem: &'a HJBProblem,
    net: &'a N,
    cfg: &'a TrainConfig,
    history: &'a mut Vec<HistoryRow>,
    state: &'a mut AdamState,
}

/// Run one lambda phase: train until the weighted loss reaches `threshold`
/// or the per-phase epoch cap. Returns whether the threshold was reached.
#[allow(clippy::too_many_arguments)]
fn run_strip_phase<N: ValueNet, R: Rng>(
    ctx: &mut PhaseCtx<'_, N>,
    params: &mut ParamVector,
    rng: &mut R,
    stage: Stage,
    strip_index: usize,
    lambda: f64,
    threshold: f64,
    epoch_offset: usize,
    old_region: &[(f64, f64)],
    new_region: Option<&[(f64, f64)]>,
) -> Result<(bool, usize, f64)> {
    let cfg = ctx.cfg;
    let n_new = cfg.n_inner / 2;
    let n_old = cfg.n_inner - n_new;
    let mut last = f64::INFINITY;
    for epoch in 0..cfg.epoch_cap {
        let old_points = sample_box(rng, old_region, if new_region.is_some() { n_old } else { cfg.n_inner });
        let new_points = match new_region {
            Some(region) => sample_box(rng, region, n_new),
            None => Vec::new(),
        };
        let boundary = sample_boundary(ctx.problem, rng, cfg.n_boundary);
        // The already-trained region's residuals are pinned by lambda; a
        // fresh strip's residuals (and the whole initial strip) carry
        // weight 1.
        let old_weight = if new_region.is_some() { lambda } else { 1.0 };
        let mut residual_groups: Vec<(&[Vec<f64>], f64)> = vec![(&old_points[..], old_weight)];
        if new_region.is_some() {
            residual_groups.push((&new_points[..], 1.0));
        }
        let terms = Terms {
            residual_groups,
            boundary: Some((&boundary[..], lambda)),
            hessian: None,
            nonneg: None,
        };
        let (parts, grad) = terms_loss_grad(ctx.net, params, ctx.problem, &terms)?;
        ctx.history.push(HistoryRow {
            stage,
            strip_index,
            epoch: epoch_offset + epoch,
            loss: parts,
            lambda,
        });
        last = parts.total;
        if parts.total <= threshold {
            return Ok((true, epoch + 1, last));
        }
        adam_step(ctx.net, ctx.state, params, &grad, cfg)?;
    }
    Ok((false, cfg.epoch_cap, last))
}

/// The strip curriculum for finite-horizon problems:
///
/// 1. boundary training: fit `V(t, x) = psi(x)` over the whole space-time
///    box until the mean-squared error on a fixed check grid drops to `l_b`;
/// 2. initial strip `[t_ini, T]`: large-lambda phase to `loss_th1`, then
///    `lambda = 1` to `loss_th2`;
/// 3. strips: extend to `[t_strip, T]`, weighting boundary and trained-region
///    residuals by lambda and the new strip's residuals by 1, with the same
///    two-phase schedule, until `t_strip = 0`.
pub fn strip_train<N: ValueNet>(
    problem: &HJBProblem,
    net: &N,
    mut params: ParamVector,
    cfg: &TrainConfig,
    schedule: &StripSchedule,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    cfg.check_pairing(net)?;
    let t_end = match problem.horizon() {
        Horizon::Finite { t_end, .. } => *t_end,
        Horizon::Infinite => {
            return Err(Error::InvalidConfig(
                "strip training needs a finite horizon (a time axis)".into(),
            ))
        }
    };
    schedule.validate(t_end)?;

    let mut rng = RngStreams::new(cfg.seed).stream("sampling");
    let mut history = Vec::new();
    let mut state = AdamState::new(params.len());
    let full_region = problem.input_box();

    // Stage 1: boundary training. Exit on the mean-squared error over a
    // fixed (t, x) check grid, which includes the t = T slice.
    let check_counts: Vec<usize> = std::iter::once(11)
        .chain(std::iter::repeat(41).take(problem.state_dim()))
        .collect();
    let check_grid = crate::surface::grid_points(&full_region, &check_counts);
    let check_targets: Vec<f64> = check_grid
        .iter()
        .map(|p| problem.terminal_value(&p[1..]).expect("finite horizon"))
        .collect();

    let mut stage1_done = false;
    let mut final_loss = f64::INFINITY;
    for epoch in 0..cfg.epoch_cap {
        let points = sample_box(&mut rng, &full_region, cfg.n_inner);
        let targets: Vec<(Vec<f64>, f64)> = points
            .into_iter()
            .map(|p| {
                let t = problem.terminal_value(&p[1..]).expect("finite horizon");
                (p, t)
            })
            .collect();
        let terms = Terms {
            residual_groups: Vec::new(),
            boundary: Some((&targets[..], 1.0)),
            hessian: None,
            nonneg: None,
        };
        let (parts, grad) = terms_loss_grad(net, &params, problem, &terms)?;
        history.push(HistoryRow {
            stage: Stage::Boundary,
            strip_index: 0,
            epoch,
            loss: parts,
            lambda: 1.0,
        });
        let mut grid_mse = 0.0;
        for (p, target) in check_grid.iter().zip(&check_targets) {
            let v = crate::autodiff::eval_value(net, &params, p)?;
            grid_mse += (v - target) * (v - target);
        }
        grid_mse /= check_grid.len() as f64;
        final_loss = grid_mse;
        if grid_mse <= cfg.l_b {
            stage1_done = true;
            break;
        }
        adam_step(net, &mut state, &mut params, &grad, cfg)?;
    }
    if !stage1_done {
        return Ok(TrainOutcome {
            params,
            history,
            status: TrainStatus::NonConverged {
                stage: Stage::Boundary,
                strip_index: 0,
                detail: format!(
                    "boundary fit stuck at grid MSE {final_loss:.3e} > l_b {:.3e}",
                    cfg.l_b
                ),
            },
            final_loss,
        });
    }

    // Stage 2: boundary with initial strip [t_ini, T].
    let strip_region = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        let mut r = Vec::with_capacity(1 + problem.state_dim());
        r.push((lo, hi));
        r.extend_from_slice(problem.state_box());
        r
    };
    let region2 = strip_region(schedule.t_ini, t_end);
    let mut ctx = PhaseCtx {
        problem,
        net,
        cfg,
        history: &mut history,
        state: &mut state,
    };
    let (ok1, used, _) = run_strip_phase(
        &mut ctx,
        &mut params,
        &mut rng,
        Stage::InitialStrip,
        0,
        cfg.lambda,
        cfg.loss_th1,
        0,
        &region2,
        None,
    )?;
    let (ok2, _, last2) = if ok1 {
        run_strip_phase(
            &mut ctx,
            &mut params,
            &mut rng,
            Stage::InitialStrip,
            0,
            1.0,
            cfg.loss_th2,
            used,
            &region2,
            None,
        )?
    } else {
        (false, 0, ctx.history.last().map_or(f64::NAN, |r| r.loss.total))
    };
    if !(ok1 && ok2) {
        let detail = format!(
            "initial strip [{:.3}, {t_end:.3}] did not reach its threshold",
            schedule.t_ini
        );
        return Ok(TrainOutcome {
            params,
            history,
            status: TrainStatus::NonConverged {
                stage: Stage::InitialStrip,
                strip_index: 0,
                detail,
            },
            final_loss: last2,
        });
    }
    final_loss = last2;

    // Stage 3: extend strip by strip down to t = 0.
    for strip in schedule.strips() {
        let old_region = strip_region(strip.t_stripold, t_end);
        let new_region = strip_region(strip.t_strip, strip.t_stripold);
        let (ok1, used, _) = run_strip_phase(
            &mut ctx,
            &mut params,
            &mut rng,
            Stage::Strip,
            strip.index,
            cfg.lambda,
            cfg.loss_th1,
            0,
            &old_region,
            Some(&new_region),
        )?;
        let (ok2, _, last) = if ok1 {
            run_strip_phase(
                &mut ctx,
                &mut params,
                &mut rng,
                Stage::Strip,
                strip.index,
                1.0,
                cfg.loss_th2,
                used,
                &old_region,
                Some(&new_region),
            )?
        } else {
            (false, 0, ctx.history.last().map_or(f64::NAN, |r| r.loss.total))
        };
        if !(ok1 && ok2) {
            let detail = format!(
                "strip {} over [{:.3}, {:.3}] did not reach its threshold",
                strip.index, strip.t_strip, strip.t_stripold
            );
            return Ok(TrainOutcome {
                params,
                history,
                status: TrainStatus::NonConverged {
                    stage: Stage::Strip,
                    strip_index: strip.index,
                    detail,
                },
                final_loss: last,
            });
        }
        final_loss = last;
    }

    Ok(TrainOutcome {
        params,
        history,
        status: TrainStatus::Converged,
        final_loss,
    })
}

// ---------------------------------------------------------------------------
// History export
// ---------------------------------------------------------------------------

pub const HISTORY_HEADER: &str =
    "stage,strip_index,epoch,loss_total,loss_residual,loss_boundary,loss_penalty,lambda";

pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{HISTORY_HEADER}")?;
    for row in history {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.stage.as_str(),
            row.strip_index,
            row.epoch,
            fmt_g17(row.loss.total),
            fmt_g17(row.loss.residual),
            fmt_g17(row.loss.boundary),
            fmt_g17(row.loss.penalty),
            fmt_g17(row.lambda),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::builtin_problem;
    use crate::networks::{
        init_params, ConvexActivation, ConvexNet, QuadraticNet, ValueNet, EPS_POS,
    };
    use crate::oracle::{analytic, AnalyticNet};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn principal_minors_small_cases() {
        assert_eq!(
            principal_minors(&[2.0, 0.0, 0.0, 3.0], 2).unwrap(),
            vec![2.0, 6.0]
        );
        let m = principal_minors(&[1.0, 2.0, 2.0, 1.0], 2).unwrap();
        assert_eq!(m[0], 1.0);
        assert!((m[1] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn minor_penalty_concave_quadratic() {
        // V = -x^2 in 1D: Hessian [-2], penalty per point |min(0,-2)|^2 = 4
        let problem = crate::hjb::motivation_problem(0.0, 1.0).unwrap();
        let net = QuadraticNet { dim: 1 };
        let params = ParamVector::new(vec![-1.0], net.layout()).unwrap();
        let batch = SampleBatch {
            inner: vec![],
            boundary: vec![],
            hessian: vec![vec![0.3], vec![-0.7]],
        };
        let parts = loss_method1(&net, &params, &problem, &batch).unwrap();
        assert_eq!(parts.penalty, 4.0);
        assert_eq!(parts.total, 4.0);
    }

    #[test]
    fn method1_loss_vanishes_on_analytic_solution() {
        // Exact ex1 solution as a quadratic head: residual and boundary terms
        // collapse to rounding, minors of diag(1, 2) are positive.
        let problem = builtin_problem("ex1").unwrap();
        let net = QuadraticNet { dim: 2 };
        let params = ParamVector::new(vec![0.5, 0.0, 1.0], net.layout()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inner = sample_box(&mut rng, &problem.input_box(), 64);
        let hessian = sample_box(&mut rng, &problem.input_box(), 16);
        let batch = SampleBatch {
            inner,
            boundary: vec![(vec![0.0, 0.0], 0.0)],
            hessian,
        };
        let parts = loss_method1(&net, &params, &problem, &batch).unwrap();
        assert!(parts.residual < 1e-18, "residual {}", parts.residual);
        assert!(parts.boundary < 1e-18);
        assert_eq!(parts.penalty, 0.0);
    }

    #[test]
    fn method2_loss_vanishes_on_ex4_analytic() {
        let problem = builtin_problem("ex4").unwrap();
        let net = AnalyticNet(analytic("ex4").unwrap());
        let params = ParamVector::zeros(net.layout());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inner = sample_box(&mut rng, &problem.input_box(), 64);
        let boundary = sample_boundary(&problem, &mut rng, 16);
        let batch = SampleBatch {
            inner,
            boundary,
            hessian: vec![],
        };
        let parts = loss_method2(&net, &params, &problem, &batch, 1.0).unwrap();
        assert!(parts.total < 1e-18, "loss {}", parts.total);
    }

    #[test]
    fn method2_zero_net_single_point() {
        // zero network on ex1, inner point (1,1), anchor boundary: loss = 4
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let params = ParamVector::zeros(net.layout());
        let batch = SampleBatch {
            inner: vec![vec![1.0, 1.0]],
            boundary: vec![(vec![0.0, 0.0], 0.0)],
            hessian: vec![],
        };
        let parts = loss_method2(&net, &params, &problem, &batch, 1.0).unwrap();
        assert_eq!(parts.total, 4.0);
        assert_eq!(parts.residual, 4.0);
        assert_eq!(parts.boundary, 0.0);
    }

    #[test]
    fn lambda_scales_boundary_term_exactly() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 8, ConvexActivation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = init_params(&net, &mut rng);
        let batch = SampleBatch {
            inner: sample_box(&mut rng, &problem.input_box(), 8),
            boundary: vec![(vec![0.4, -0.2], 0.3)],
            hessian: vec![],
        };
        let l1 = loss_method2(&net, &params, &problem, &batch, 1.0).unwrap();
        let l2 = loss_method2(&net, &params, &problem, &batch, 2.0).unwrap();
        assert_eq!(l2.boundary, 2.0 * l1.boundary);
        assert_eq!(l2.residual, l1.residual);
    }

    #[test]
    fn empty_batch_gives_zero_loss_and_grad() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = init_params(&net, &mut rng);
        let batch = SampleBatch::default();
        let (parts, grad) = loss_grad_method2(&net, &params, &problem, &batch, 1.0).unwrap();
        assert_eq!(parts.total, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn adam_minimizes_scalar_quadratic() {
        // (w - 3)^2, step 0.1, 500 steps from w = 0
        let net = QuadraticNet { dim: 1 };
        let mut params = ParamVector::new(vec![0.0], net.layout()).unwrap();
        let mut cfg = TrainConfig::new(Method::Penalty);
        cfg.step_size = 0.1;
        let mut state = AdamState::new(1);
        for _ in 0..500 {
            let g = 2.0 * (params.values[0] - 3.0);
            adam_step(&net, &mut state, &mut params, &[g], &cfg).unwrap();
        }
        assert!((params.values[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        // Zero gradients leave a fresh state's moments at zero, so the
        // update is exactly zero; only the step counter moves.
        let net = QuadraticNet { dim: 1 };
        let mut params = ParamVector::new(vec![1.5], net.layout()).unwrap();
        let cfg = TrainConfig::new(Method::Penalty);
        let mut state = AdamState::new(1);
        for _ in 0..3 {
            adam_step(&net, &mut state, &mut params, &[0.0], &cfg).unwrap();
            assert_eq!(params.values[0].to_bits(), 1.5f64.to_bits());
        }
        assert_eq!(state.step, 3);

        // With a residual first moment the moments decay across steps.
        state.m[0] = 0.2;
        let m_before = state.m[0];
        adam_step(&net, &mut state, &mut params, &[0.0], &cfg).unwrap();
        assert!(state.m[0] < m_before);
    }

    #[test]
    fn adam_projects_positive_block() {
        let net = ConvexNet::new(1, 2, ConvexActivation::Relu);
        let mut params = ParamVector::zeros(net.layout());
        params.block_mut("w1").unwrap().copy_from_slice(&[1e-5, 0.5]);
        let mut grad = vec![0.0; params.len()];
        let range = net.positive_block().unwrap();
        grad[range.start] = 1.0; // drives the small entry negative
        let mut cfg = TrainConfig::new(Method::Convex);
        cfg.step_size = 0.1;
        let mut state = AdamState::new(params.len());
        adam_step(&net, &mut state, &mut params, &grad, &cfg).unwrap();
        assert_eq!(params.block("w1").unwrap()[0], EPS_POS);
    }

    #[test]
    fn epoch_cap_zero_returns_initialization() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = init_params(&net, &mut rng);
        let before = params.values.clone();
        let mut cfg = TrainConfig::new(Method::Convex);
        cfg.epoch_cap = 0;
        let out = train(&problem, &net, params, &cfg).unwrap();
        assert!(!out.status.is_converged());
        assert_eq!(out.params.values, before);
        assert!(out.history.is_empty());
    }

    #[test]
    fn same_seed_same_history() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 6, ConvexActivation::Relu);
        let mut cfg = TrainConfig::new(Method::Convex);
        cfg.epoch_cap = 25;
        cfg.n_inner = 32;
        cfg.loss_th2 = 0.0;
        cfg.seed = 41;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = init_params(&net, &mut rng);
        let out1 = train(&problem, &net, params.clone(), &cfg).unwrap();
        let out2 = train(&problem, &net, params, &cfg).unwrap();
        assert_eq!(out1.history.len(), out2.history.len());
        for (a, b) in out1.history.iter().zip(&out2.history) {
            assert_eq!(a.loss.total.to_bits(), b.loss.total.to_bits());
        }
        for (a, b) in out1.params.values.iter().zip(&out2.params.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pairing_is_validated() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let params = ParamVector::zeros(net.layout());
        let cfg = TrainConfig::new(Method::Penalty);
        assert!(matches!(
            train(&problem, &net, params, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn strip_schedule_arithmetic() {
        let s = StripSchedule { t_ini: 9.0, dt: 0.5 };
        assert_eq!(s.strip_count(), 18);
        let strips = s.strips();
        assert_eq!(strips.len(), 18);
        assert_eq!(strips[0].t_stripold, 9.0);
        assert_eq!(strips[0].t_strip, 8.5);
        assert_eq!(strips.last().unwrap().t_strip, 0.0);
        // monotone growth of the trained region
        for w in strips.windows(2) {
            assert!(w[1].t_strip < w[0].t_strip);
        }
        // a dt that does not divide t_ini clamps the final strip at 0
        let s2 = StripSchedule { t_ini: 1.0, dt: 0.3 };
        assert_eq!(s2.strip_count(), 4);
        assert_eq!(s2.t_strip(4), 0.0);
        assert!((s2.t_strip(3) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn strip_train_requires_finite_horizon() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let params = ParamVector::zeros(net.layout());
        let cfg = TrainConfig::new(Method::Convex);
        let schedule = StripSchedule { t_ini: 9.0, dt: 0.5 };
        assert!(matches!(
            strip_train(&problem, &net, params, &cfg, &schedule),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn loss_decomposition_holds_in_history() {
        let problem = builtin_problem("ex1").unwrap();
        let net = ConvexNet::new(2, 6, ConvexActivation::Relu);
        let mut cfg = TrainConfig::new(Method::Convex);
        cfg.epoch_cap = 10;
        cfg.n_inner = 16;
        cfg.loss_th2 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = init_params(&net, &mut rng);
        let out = train(&problem, &net, params, &cfg).unwrap();
        for row in &out.history {
            let sum = row.loss.residual + row.loss.boundary + row.loss.penalty;
            assert_eq!(row.loss.total, sum);
        }
    }
}
