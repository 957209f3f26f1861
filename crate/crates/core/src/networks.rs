//! Value-network families.
//!
//! Three trainable families plus a quadratic test head:
//!
//! * [`SmoothMlp`] — tanh MLP, C-infinity, used with the Hessian-minor
//!   penalty (method 1).
//! * [`ConvexNet`] — one hidden layer `y = W1 sigma(W0 x + b0) + b1 + f x`
//!   with elementwise-positive `W1`. With sigma convex and nondecreasing the
//!   output is convex in `x` by construction.
//! * [`PartialConvexNet`] — convex in the state for every fixed time:
//!   `y = W2 sigma(W0 x + W1 F2(F1(t)) + b0) + b1` where the time path
//!   `F1`, `F2` are ordinary tanh networks feeding a bias into the convex
//!   path, and `W2` is elementwise positive. No state feed-through term.
//! * [`QuadraticNet`] — explicit quadratic form, handy as a checkpointable
//!   head realizing known solutions exactly.
//!
//! Positivity of the designated weight block is enforced by projection
//! (clamp at [`EPS_POS`]) after every optimizer step, not by
//! reparameterization.

use crate::autodiff::{Jet, ParamLayout, ParamVector, Scalar};
use crate::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Lower clamp for positive weight blocks; keeps units from dying outright.
pub const EPS_POS: f64 = 1e-6;

/// Slack allowed when checking midpoint convexity (pure rounding).
pub const CONVEXITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// Twice differentiable everywhere; input Hessians are available.
    CInf,
    /// Piecewise smooth (ReLU kinks); only value and gradient are defined.
    PiecewiseSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexActivation {
    Relu,
    /// log(1 + exp(beta x)) / beta; convex and increasing, so convexity of
    /// the family is preserved while making the net C-infinity.
    Softplus { beta: f64 },
}

impl ConvexActivation {
    pub fn softplus_default() -> Self {
        ConvexActivation::Softplus { beta: 10.0 }
    }
}

/// Anything that can be evaluated in jet arithmetic.
pub trait ValueNet {
    fn input_dim(&self) -> usize;
    fn param_len(&self) -> usize;
    fn layout(&self) -> ParamLayout;
    fn smoothness(&self) -> Smoothness;
    fn activation_name(&self) -> &'static str;
    fn forward_jet<S: Scalar>(&self, params: &[S], input: &[Jet<S>]) -> Jet<S>;
    /// Index range of the weight block constrained to stay positive.
    fn positive_block(&self) -> Option<Range<usize>> {
        None
    }
    /// First input index of the block the network is convex in
    /// (1 skips a leading time input).
    fn state_offset(&self) -> usize {
        0
    }
}

// ---------------------------------------------------------------------------
// Smooth tanh MLP
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothMlp {
    /// Full width list including input and the single output: `[d, h1, .., 1]`.
    pub widths: Vec<usize>,
}

impl SmoothMlp {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidConfig(
                "smooth mlp needs at least one hidden layer".into(),
            ));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("smooth mlp output width must be 1".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("zero layer width".into()));
        }
        Ok(Self { widths })
    }
}

impl ValueNet for SmoothMlp {
    fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn param_len(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    fn layout(&self) -> ParamLayout {
        let mut blocks: Vec<(String, Vec<usize>)> = Vec::new();
        for (l, w) in self.widths.windows(2).enumerate() {
            blocks.push((format!("w{l}"), vec![w[1], w[0]]));
            blocks.push((format!("b{l}"), vec![w[1]]));
        }
        let refs: Vec<(&str, &[usize])> = blocks
            .iter()
            .map(|(n, s)| (n.as_str(), s.as_slice()))
            .collect();
        ParamLayout::new(&refs)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }

    fn activation_name(&self) -> &'static str {
        "tanh"
    }

    fn forward_jet<S: Scalar>(&self, params: &[S], input: &[Jet<S>]) -> Jet<S> {
        let n_layers = self.widths.len() - 1;
        let mut act: Vec<Jet<S>> = input.to_vec();
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let w = &params[off..off + fan_out * fan_in];
            let b = &params[off + fan_out * fan_in..off + fan_out * fan_in + fan_out];
            off += fan_out * fan_in + fan_out;
            let mut next = Vec::with_capacity(fan_out);
            for i in 0..fan_out {
                let z = affine_row(&w[i * fan_in..(i + 1) * fan_in], &act).add_s(b[i]);
                next.push(if l + 1 == n_layers { z } else { z.tanh() });
            }
            act = next;
        }
        act.pop().expect("output layer has width 1")
    }
}

// ---------------------------------------------------------------------------
// Fully input-convex network
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexNet {
    pub input_dim: usize,
    pub hidden: usize,
    pub activation: ConvexActivation,
}

impl ConvexNet {
    pub fn new(input_dim: usize, hidden: usize, activation: ConvexActivation) -> Self {
        Self {
            input_dim,
            hidden,
            activation,
        }
    }
}

impl ValueNet for ConvexNet {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn param_len(&self) -> usize {
        let (n, d) = (self.hidden, self.input_dim);
        n * d + n + n + 1 + d
    }

    fn layout(&self) -> ParamLayout {
        let (n, d) = (self.hidden, self.input_dim);
        ParamLayout::new(&[
            ("w0", &[n, d]),
            ("b0", &[n]),
            ("w1", &[n]),
            ("b1", &[1]),
            ("f", &[1, d]),
        ])
    }

    fn smoothness(&self) -> Smoothness {
        match self.activation {
            ConvexActivation::Relu => Smoothness::PiecewiseSmooth,
            ConvexActivation::Softplus { .. } => Smoothness::CInf,
        }
    }

    fn activation_name(&self) -> &'static str {
        match self.activation {
            ConvexActivation::Relu => "relu",
            ConvexActivation::Softplus { .. } => "softplus",
        }
    }

    fn forward_jet<S: Scalar>(&self, params: &[S], input: &[Jet<S>]) -> Jet<S> {
        let (n, d) = (self.hidden, self.input_dim);
        let w0 = &params[0..n * d];
        let b0 = &params[n * d..n * d + n];
        let w1 = &params[n * d + n..n * d + 2 * n];
        let b1 = params[n * d + 2 * n];
        let f = &params[n * d + 2 * n + 1..];

        // Feed-through first so the accumulator always exists.
        let mut acc = input[0].scale_s(f[0]);
        for j in 1..d {
            acc = acc.add(&input[j].scale_s(f[j]));
        }
        for i in 0..n {
            let z = affine_row(&w0[i * d..(i + 1) * d], input).add_s(b0[i]);
            let s = match self.activation {
                ConvexActivation::Relu => {
                    // Inactive units contribute exactly zero value and
                    // gradient; skip them.
                    if z.v.value() <= 0.0 {
                        continue;
                    }
                    z
                }
                ConvexActivation::Softplus { beta } => z.softplus(beta),
            };
            acc = acc.add(&s.scale_s(w1[i]));
        }
        acc.add_s(b1)
    }

    fn positive_block(&self) -> Option<Range<usize>> {
        let (n, d) = (self.hidden, self.input_dim);
        Some(n * d + n..n * d + 2 * n)
    }
}

// ---------------------------------------------------------------------------
// Partially input-convex network (convex in x, arbitrary in t)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialConvexNet {
    pub state_dim: usize,
    pub hidden: usize,
    /// Width of the time-feature vector added to the hidden pre-activation.
    pub t_features: usize,
    pub yhat_dim: usize,
    pub f1_hidden: usize,
    pub f2_hidden: usize,
}

impl PartialConvexNet {
    /// Default sizing: time path with one hidden tanh layer of width 16 on
    /// each sub-network.
    pub fn with_defaults(state_dim: usize, hidden: usize) -> Self {
        Self {
            state_dim,
            hidden,
            t_features: 16,
            yhat_dim: 8,
            f1_hidden: 16,
            f2_hidden: 16,
        }
    }

    fn offsets(&self) -> PartialOffsets {
        let (n, dx, k) = (self.hidden, self.state_dim, self.t_features);
        let (p, h1, h2) = (self.yhat_dim, self.f1_hidden, self.f2_hidden);
        let mut off = 0;
        let mut next = |len: usize| {
            let start = off;
            off += len;
            start
        };
        PartialOffsets {
            w0: next(n * dx),
            w1: next(n * k),
            b0: next(n),
            w2: next(n),
            b1: next(1),
            f1_w0: next(h1),
            f1_b0: next(h1),
            f1_w1: next(p * h1),
            f1_b1: next(p),
            f2_w0: next(h2 * p),
            f2_b0: next(h2),
            f2_w1: next(k * h2),
            f2_b1: next(k),
            total: off,
        }
    }
}

struct PartialOffsets {
    w0: usize,
    w1: usize,
    b0: usize,
    w2: usize,
    b1: usize,
    f1_w0: usize,
    f1_b0: usize,
    f1_w1: usize,
    f1_b1: usize,
    f2_w0: usize,
    f2_b0: usize,
    f2_w1: usize,
    f2_b1: usize,
    total: usize,
}

impl ValueNet for PartialConvexNet {
    fn input_dim(&self) -> usize {
        1 + self.state_dim
    }

    fn param_len(&self) -> usize {
        self.offsets().total
    }

    fn layout(&self) -> ParamLayout {
        let (n, dx, k) = (self.hidden, self.state_dim, self.t_features);
        let (p, h1, h2) = (self.yhat_dim, self.f1_hidden, self.f2_hidden);
        ParamLayout::new(&[
            ("w0", &[n, dx]),
            ("w1", &[n, k]),
            ("b0", &[n]),
            ("w2", &[n]),
            ("b1", &[1]),
            ("f1_w0", &[h1, 1]),
            ("f1_b0", &[h1]),
            ("f1_w1", &[p, h1]),
            ("f1_b1", &[p]),
            ("f2_w0", &[h2, p]),
            ("f2_b0", &[h2]),
            ("f2_w1", &[k, h2]),
            ("f2_b1", &[k]),
        ])
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::PiecewiseSmooth
    }

    fn activation_name(&self) -> &'static str {
        "relu"
    }

    fn forward_jet<S: Scalar>(&self, params: &[S], input: &[Jet<S>]) -> Jet<S> {
        let o = self.offsets();
        let (n, dx, k) = (self.hidden, self.state_dim, self.t_features);
        let (p, h1, h2) = (self.yhat_dim, self.f1_hidden, self.f2_hidden);
        let t = &input[0];
        let x = &input[1..];
        debug_assert_eq!(x.len(), dx);

        // F1: t -> yhat
        let mut hidden1 = Vec::with_capacity(h1);
        for i in 0..h1 {
            hidden1.push(t.scale_s(params[o.f1_w0 + i]).add_s(params[o.f1_b0 + i]).tanh());
        }
        let mut yhat = Vec::with_capacity(p);
        for i in 0..p {
            let row = &params[o.f1_w1 + i * h1..o.f1_w1 + (i + 1) * h1];
            yhat.push(affine_row(row, &hidden1).add_s(params[o.f1_b1 + i]));
        }

        // F2: yhat -> time features
        let mut hidden2 = Vec::with_capacity(h2);
        for i in 0..h2 {
            let row = &params[o.f2_w0 + i * p..o.f2_w0 + (i + 1) * p];
            hidden2.push(affine_row(row, &yhat).add_s(params[o.f2_b0 + i]).tanh());
        }
        let mut feat = Vec::with_capacity(k);
        for i in 0..k {
            let row = &params[o.f2_w1 + i * h2..o.f2_w1 + (i + 1) * h2];
            feat.push(affine_row(row, &hidden2).add_s(params[o.f2_b1 + i]));
        }

        // Convex path: z_i = W0 x + W1 feat + b0, y = W2 relu(z) + b1.
        let mut acc: Option<Jet<S>> = None;
        for i in 0..n {
            let mut z = affine_row(&params[o.w0 + i * dx..o.w0 + (i + 1) * dx], x);
            let w1_row = &params[o.w1 + i * k..o.w1 + (i + 1) * k];
            z = z.add(&affine_row(w1_row, &feat));
            z = z.add_s(params[o.b0 + i]);
            if z.v.value() <= 0.0 {
                continue;
            }
            let term = z.scale_s(params[o.w2 + i]);
            acc = Some(match acc {
                Some(a) => a.add(&term),
                None => term,
            });
        }
        let b1 = params[o.b1];
        match acc {
            Some(a) => a.add_s(b1),
            // All units inactive: the output is the constant b1, with zero
            // derivatives in the tracked directions.
            None => {
                let zero = t.v.zero();
                let mut out = Jet::constant(zero + b1);
                for _ in 0..t.g.len() {
                    out.g.push(zero);
                }
                for _ in 0..t.h.len() {
                    out.h.push(zero);
                }
                out
            }
        }
    }

    fn positive_block(&self) -> Option<Range<usize>> {
        let o = self.offsets();
        Some(o.w2..o.w2 + self.hidden)
    }

    fn state_offset(&self) -> usize {
        1
    }
}

// ---------------------------------------------------------------------------
// Quadratic test head
// ---------------------------------------------------------------------------

/// Exact quadratic form `V(x) = sum_{i<=j} c_ij x_i x_j`; parameters are the
/// packed coefficients. Realizes the known benchmark solutions bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticNet {
    pub dim: usize,
}

impl ValueNet for QuadraticNet {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn param_len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout::new(&[("coeffs", &[self.dim * (self.dim + 1) / 2])])
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }

    fn activation_name(&self) -> &'static str {
        "polynomial"
    }

    fn forward_jet<S: Scalar>(&self, params: &[S], input: &[Jet<S>]) -> Jet<S> {
        let d = self.dim;
        let mut acc: Option<Jet<S>> = None;
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let term = input[i].mul(&input[j]).scale_s(params[k]);
                k += 1;
                acc = Some(match acc {
                    Some(a) => a.add(&term),
                    None => term,
                });
            }
        }
        acc.expect("dim > 0")
    }
}

// ---------------------------------------------------------------------------
// Network enum, initialization, projection, audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    SmoothMlp(SmoothMlp),
    Convex(ConvexNet),
    PartialConvex(PartialConvexNet),
    Quadratic(QuadraticNet),
}

impl Network {
    pub fn family_name(&self) -> &'static str {
        match self {
            Network::SmoothMlp(_) => "smooth_mlp",
            Network::Convex(_) => "convex",
            Network::PartialConvex(_) => "partial_convex",
            Network::Quadratic(_) => "quadratic",
        }
    }

    pub fn is_convex_family(&self) -> bool {
        matches!(self, Network::Convex(_) | Network::PartialConvex(_))
    }
}

macro_rules! dispatch {
    ($self:expr, $n:ident => $body:expr) => {
        match $self {
            Network::SmoothMlp($n) => $body,
            Network::Convex($n) => $body,
            Network::PartialConvex($n) => $body,
            Network::Quadratic($n) => $body,
        }
    };
}

impl ValueNet for Network {
    fn input_dim(&self) -> usize {
        dispatch!(self, n => n.input_dim())
    }
    fn param_len(&self) -> usize {
        dispatch!(self, n => n.param_len())
    }
    fn layout(&self) -> ParamLayout {
        dispatch!(self, n => n.layout())
    }
    fn smoothness(&self) -> Smoothness {
        dispatch!(self, n => n.smoothness())
    }
    fn activation_name(&self) -> &'static str {
        dispatch!(self, n => n.activation_name())
    }
    fn forward_jet<S: Scalar>(&self, params: &[S], input: &[Jet<S>]) -> Jet<S> {
        dispatch!(self, n => n.forward_jet(params, input))
    }
    fn positive_block(&self) -> Option<Range<usize>> {
        dispatch!(self, n => n.positive_block())
    }
    fn state_offset(&self) -> usize {
        dispatch!(self, n => n.state_offset())
    }
}

/// Scalar network output at `input` (dimension-checked).
pub fn forward<N: ValueNet>(net: &N, params: &ParamVector, input: &[f64]) -> Result<f64> {
    crate::autodiff::eval_value(net, params, input)
}

/// Draw initial parameters: hidden weights uniform in
/// `(-1/sqrt(fan_in), 1/sqrt(fan_in))`, positive blocks uniform in
/// `(EPS_POS, 1/sqrt(hidden))`, biases zero.
pub fn init_params<N: ValueNet, R: Rng>(net: &N, rng: &mut R) -> ParamVector {
    let layout = net.layout();
    let mut values = vec![0.0; layout.total_len()];
    let positive = net.positive_block();
    for entry in layout.entries() {
        if entry.name.starts_with('b') || entry.name.ends_with("b0") || entry.name.ends_with("b1")
        {
            continue; // biases stay zero
        }
        if entry.name == "coeffs" {
            continue; // quadratic head starts at zero
        }
        let range = entry.range();
        if let Some(pos) = &positive {
            if *pos == range {
                let n = entry.len() as f64;
                let dist = Uniform::new(EPS_POS, 1.0 / n.sqrt());
                for v in &mut values[range] {
                    *v = dist.sample(rng);
                }
                continue;
            }
        }
        let fan_in = if entry.shape.len() == 2 {
            entry.shape[1] as f64
        } else {
            1.0
        };
        let bound = 1.0 / fan_in.sqrt();
        let dist = Uniform::new(-bound, bound);
        for v in &mut values[range] {
            *v = dist.sample(rng);
        }
    }
    ParamVector { values, layout }
}

/// Clamp the positive weight block to `max(w, EPS_POS)`, leaving every other
/// entry untouched. Idempotent; a no-op for families without such a block.
pub fn project_positive<N: ValueNet>(net: &N, params: &mut ParamVector) {
    if let Some(range) = net.positive_block() {
        for v in &mut params.values[range] {
            if *v < EPS_POS {
                *v = EPS_POS;
            }
        }
    }
}

/// Result of a midpoint-convexity audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest excess `V(mid) - (V(a)+V(b))/2` among violating pairs
    /// (0 when there are none).
    pub max_violation: f64,
    /// Midpoint of the worst violating pair, if any.
    pub worst_midpoint: Option<Vec<f64>>,
    pub tol: f64,
}

/// Sample `pairs` random point pairs in `domain` (the full input box; for a
/// partially convex net the leading time coordinate is drawn once per pair
/// and shared) and check midpoint convexity in the state block.
pub fn convexity_audit<N: ValueNet, R: Rng>(
    net: &N,
    params: &ParamVector,
    domain: &[(f64, f64)],
    pairs: usize,
    rng: &mut R,
) -> Result<AuditReport> {
    if domain.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: domain.len(),
        });
    }
    let off = net.state_offset();
    let dists: Vec<Uniform<f64>> = domain
        .iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi))
        .collect();
    let mut violations = 0;
    let mut max_violation = 0.0f64;
    let mut worst_midpoint = None;
    let mut a = vec![0.0; domain.len()];
    let mut b = vec![0.0; domain.len()];
    let mut mid = vec![0.0; domain.len()];
    for _ in 0..pairs {
        for i in 0..off {
            let t = dists[i].sample(rng);
            a[i] = t;
            b[i] = t;
        }
        for i in off..domain.len() {
            a[i] = dists[i].sample(rng);
        }
        for i in off..domain.len() {
            b[i] = dists[i].sample(rng);
        }
        for i in 0..domain.len() {
            mid[i] = 0.5 * (a[i] + b[i]);
        }
        let va = forward(net, params, &a)?;
        let vb = forward(net, params, &b)?;
        let vm = forward(net, params, &mid)?;
        let excess = vm - 0.5 * (va + vb);
        if excess > CONVEXITY_TOL {
            violations += 1;
            if excess > max_violation {
                max_violation = excess;
                worst_midpoint = Some(mid.clone());
            }
        }
    }
    Ok(AuditReport {
        pairs,
        violations,
        max_violation,
        worst_midpoint,
        tol: CONVEXITY_TOL,
    })
}

/// Result of sampling leading-minor positivity of the state Hessian. Used to
/// audit penalty-trained smooth networks, where convexity is encouraged, not
/// guaranteed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinorAuditReport {
    pub points: usize,
    /// Fraction of sampled points whose leading principal minors are all
    /// `>= -tol`.
    pub frac_minors_nonneg: f64,
    pub worst_minor: f64,
    pub worst_point: Vec<f64>,
    pub tol: f64,
}

/// Tolerance band for the soft (penalty-trained) convexity audit.
pub const MINOR_AUDIT_TOL: f64 = 1e-6;

/// Sample the problem box and check Sylvester positivity of the state-block
/// input-Hessian at each point. Requires a twice differentiable network.
pub fn minor_positivity_audit<N: ValueNet, R: Rng>(
    net: &N,
    params: &ParamVector,
    problem: &crate::hjb::HJBProblem,
    points: usize,
    rng: &mut R,
) -> Result<MinorAuditReport> {
    let box_ = problem.input_box();
    if box_.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: box_.len(),
        });
    }
    let dists: Vec<Uniform<f64>> = box_
        .iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi))
        .collect();
    let off = if problem.horizon().is_finite() { 1 } else { 0 };
    let n = problem.state_dim();
    let mut ok = 0usize;
    let mut worst = f64::INFINITY;
    let mut worst_point = Vec::new();
    for _ in 0..points {
        let pt: Vec<f64> = dists.iter().map(|d| d.sample(rng)).collect();
        let jet = crate::autodiff::eval_jet(net, params, &pt)?;
        let mut state_hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                state_hess[i * n + j] = jet.hess_at(i + off, j + off);
            }
        }
        let minors = crate::training::principal_minors(&state_hess, n)?;
        let min_minor = minors.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min_minor >= -MINOR_AUDIT_TOL {
            ok += 1;
        }
        if min_minor < worst {
            worst = min_minor;
            worst_point = pt;
        }
    }
    Ok(MinorAuditReport {
        points,
        frac_minors_nonneg: ok as f64 / points as f64,
        worst_minor: worst,
        worst_point,
        tol: MINOR_AUDIT_TOL,
    })
}

fn affine_row<S: Scalar>(w_row: &[S], x: &[Jet<S>]) -> Jet<S> {
    let mut acc = x[0].scale_s(w_row[0]);
    for j in 1..x.len() {
        acc = acc.add(&x[j].scale_s(w_row[j]));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{eval_jet, eval_value};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_unit() -> (ConvexNet, ParamVector) {
        // n=1, W0=[1], b0=0, W1=[1], b1=0, f=0
        let net = ConvexNet::new(1, 1, ConvexActivation::Relu);
        let params =
            ParamVector::new(vec![1.0, 0.0, 1.0, 0.0, 0.0], net.layout()).unwrap();
        (net, params)
    }

    #[test]
    fn single_relu_unit_forward() {
        let (net, params) = single_unit();
        assert_eq!(forward(&net, &params, &[2.0]).unwrap(), 2.0);
        assert_eq!(forward(&net, &params, &[-2.0]).unwrap(), 0.0);
    }

    #[test]
    fn all_zero_weights_output_bias() {
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let mut params = ParamVector::zeros(net.layout());
        params.block_mut("b1").unwrap()[0] = 0.5;
        for x in [[-1.0, 0.3], [0.0, 0.0], [0.9, -0.7]] {
            assert_eq!(forward(&net, &params, &x).unwrap(), 0.5);
        }
    }

    #[test]
    fn project_positive_clamps_only_w1() {
        let net = ConvexNet::new(2, 2, ConvexActivation::Relu);
        let mut params = ParamVector::zeros(net.layout());
        params.block_mut("w1").unwrap().copy_from_slice(&[-0.3, 0.2]);
        params.block_mut("f").unwrap().copy_from_slice(&[-5.0, -6.0]);
        let before = params.values.clone();
        project_positive(&net, &mut params);
        assert_eq!(params.block("w1").unwrap(), &[EPS_POS, 0.2]);
        assert_eq!(params.block("f").unwrap(), &[-5.0, -6.0]);
        // only the w1 block differs from the original vector
        let range = net.positive_block().unwrap();
        for (i, (&a, &b)) in before.iter().zip(&params.values).enumerate() {
            if !range.contains(&i) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // idempotent: a second application is a bitwise fixed point
        let once = params.values.clone();
        project_positive(&net, &mut params);
        for (&a, &b) in once.iter().zip(&params.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn quadratic_head_exact_derivatives() {
        // V(x) = x1^2 + 2 x2^2 at (1, 1): value 3, grad (2, 4), hess diag(2, 4)
        let net = QuadraticNet { dim: 2 };
        let params = ParamVector::new(vec![1.0, 0.0, 2.0], net.layout()).unwrap();
        let jet = eval_jet(&net, &params, &[1.0, 1.0]).unwrap();
        assert_eq!(jet.value, 3.0);
        assert_eq!(jet.grad, vec![2.0, 4.0]);
        assert_eq!(jet.hess, vec![2.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn zero_network_zero_jet() {
        let net = SmoothMlp::new(vec![2, 4, 1]).unwrap();
        let params = ParamVector::zeros(net.layout());
        let jet = eval_jet(&net, &params, &[0.7, -0.3]).unwrap();
        assert_eq!(jet.value, 0.0);
        assert!(jet.grad.iter().all(|&g| g == 0.0));
        assert!(jet.hess.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn relu_hessian_is_unsupported() {
        let (net, params) = single_unit();
        let err = eval_jet(&net, &params, &[0.5]).unwrap_err();
        assert!(matches!(err, Error::UnsupportedHessian { .. }));
        // value + gradient still defined
        let (v, g) = crate::autodiff::eval_grad(&net, &params, &[0.5]).unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn hessian_is_bitwise_symmetric() {
        let net = SmoothMlp::new(vec![3, 8, 8, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = init_params(&net, &mut rng);
        let jet = eval_jet(&net, &params, &[0.3, -0.8, 0.5]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    jet.hess_at(i, j).to_bits(),
                    jet.hess_at(j, i).to_bits()
                );
            }
        }
    }

    #[test]
    fn audit_zero_network_clean() {
        let net = ConvexNet::new(2, 4, ConvexActivation::Relu);
        let params = ParamVector::zeros(net.layout());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report =
            convexity_audit(&net, &params, &[(-1.0, 1.0), (-1.0, 1.0)], 1000, &mut rng).unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.max_violation, 0.0);
    }

    #[test]
    fn audit_detects_forced_concavity() {
        // One hidden unit with negative outer weight shapes -relu(x): concave.
        let net = ConvexNet::new(1, 1, ConvexActivation::Relu);
        let params =
            ParamVector::new(vec![1.0, 0.0, -1.0, 0.0, 0.0], net.layout()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = convexity_audit(&net, &params, &[(-1.0, 1.0)], 1000, &mut rng).unwrap();
        assert!(report.violations >= 1);
        assert!(report.max_violation > CONVEXITY_TOL);
    }

    #[test]
    fn init_respects_positive_block_and_zero_biases() {
        let net = ConvexNet::new(2, 16, ConvexActivation::Relu);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = init_params(&net, &mut rng);
        assert!(params.block("w1").unwrap().iter().all(|&w| w >= EPS_POS));
        assert!(params.block("b0").unwrap().iter().all(|&b| b == 0.0));
        assert_eq!(params.block("b1").unwrap()[0], 0.0);
        assert!(params.block("w0").unwrap().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn partial_convex_forward_and_layout_agree() {
        let net = PartialConvexNet::with_defaults(1, 8);
        assert_eq!(net.param_len(), net.layout().total_len());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = init_params(&net, &mut rng);
        let v = forward(&net, &params, &[0.3, 0.5]).unwrap();
        assert!(v.is_finite());
        // convex in x for fixed t
        let report = convexity_audit(
            &net,
            &params,
            &[(0.0, 10.0), (-1.0, 1.0)],
            2000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn forward_dimension_mismatch() {
        let (net, params) = single_unit();
        assert!(matches!(
            eval_value(&net, &params, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
