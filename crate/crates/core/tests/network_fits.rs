//! Least-squares fits of convex targets: the convex family must reach known
//! accuracy on representative convex functions, and stay midpoint-convex
//! throughout.

mod common;

use common::rng;
use hjb_pinn::autodiff::{
    eval_value, loss_param_grad, seed_inputs, JetOrder, ParamVector, Var,
};
use hjb_pinn::networks::{
    convexity_audit, init_params, ConvexActivation, ConvexNet, ValueNet,
};
use hjb_pinn::surface::linspace;
use hjb_pinn::training::{adam_step, AdamState, Method, TrainConfig};

/// Full-batch Adam regression of a 1D network onto `(x, y)` samples.
fn fit<N: ValueNet>(
    net: &N,
    mut params: ParamVector,
    data: &[(f64, f64)],
    steps: usize,
    lr: f64,
) -> ParamVector {
    let mut cfg = TrainConfig::new(Method::Convex);
    cfg.step_size = lr;
    let mut state = AdamState::new(params.len());
    for _ in 0..steps {
        let lg = loss_param_grad(&params, |tape, p| {
            let mut terms: Vec<Var<'_>> = Vec::with_capacity(data.len());
            for (x, y) in data {
                let jets = seed_inputs(&[tape.leaf(*x)], JetOrder::ValueOnly);
                let d = net.forward_jet(p, &jets).v.add_const(-y);
                terms.push(d * d);
            }
            let mut total = terms[0];
            for t in &terms[1..] {
                total = total + *t;
            }
            Ok(total.scale(1.0 / data.len() as f64))
        })
        .unwrap();
        adam_step(net, &mut state, &mut params, &lg.grad, &cfg).unwrap();
    }
    params
}

fn max_abs_err<N: ValueNet>(net: &N, params: &ParamVector, f: &dyn Fn(f64) -> f64) -> f64 {
    linspace(-1.0, 1.0, 401)
        .into_iter()
        .map(|x| (eval_value(net, params, &[x]).unwrap() - f(x)).abs())
        .fold(0.0, f64::max)
}

fn grid_data(f: &dyn Fn(f64) -> f64, n: usize) -> Vec<(f64, f64)> {
    linspace(-1.0, 1.0, n).into_iter().map(|x| (x, f(x))).collect()
}

#[test]
fn convex_net_fits_abs_to_one_percent() {
    let net = ConvexNet::new(1, 8, ConvexActivation::Relu);
    let params = init_params(&net, &mut rng(0));
    let data = grid_data(&|x: f64| x.abs(), 50);
    let params = fit(&net, params, &data, 4000, 1e-2);
    let err = max_abs_err(&net, &params, &|x| x.abs());
    assert!(err < 0.01, "max abs error {err}");
}

#[test]
fn representation_sanity_piecewise_linear_dense() {
    // Three convex targets, width 16, least squares: max error < 0.02.
    let targets: [(&str, fn(f64) -> f64); 3] = [
        ("abs", |x| x.abs()),
        ("max_affine", |x| x.max(2.0 * x - 1.0)),
        ("square", |x| x * x),
    ];
    for (seed, (name, f)) in targets.iter().enumerate() {
        let net = ConvexNet::new(1, 16, ConvexActivation::Relu);
        let params = init_params(&net, &mut rng(10 + seed as u64));
        let data = grid_data(&|x| f(x), 101);
        let params = fit(&net, params, &data, 6000, 1e-2);
        let err = max_abs_err(&net, &params, &|x| f(x));
        assert!(err < 0.02, "{name}: max abs error {err}");
        // the fit stayed convex
        let report =
            convexity_audit(&net, &params, &[(-1.0, 1.0)], 5_000, &mut rng(99)).unwrap();
        assert_eq!(report.violations, 0, "{name}");
    }
}

#[test]
fn trained_fit_remains_convex_under_audit_softplus() {
    let net = ConvexNet::new(1, 12, ConvexActivation::softplus_default());
    let params = init_params(&net, &mut rng(21));
    let data = grid_data(&|x: f64| 0.5 * x * x, 60);
    let params = fit(&net, params, &data, 1500, 5e-3);
    let report = convexity_audit(&net, &params, &[(-1.0, 1.0)], 10_000, &mut rng(7)).unwrap();
    assert_eq!(report.violations, 0);
}
