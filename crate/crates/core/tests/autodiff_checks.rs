//! Derivative checks against central finite differences. The FD side never
//! touches the jet or tape machinery.

mod common;

use common::{fd_grad, fd_hess, rel_err, rng, sample_point};
use hjb_pinn::autodiff::{eval_grad, eval_jet, eval_value, loss_param_grad, ParamVector};
use hjb_pinn::hjb::builtin_problem;
use hjb_pinn::networks::{
    init_params, ConvexActivation, ConvexNet, PartialConvexNet, QuadraticNet, SmoothMlp,
    ValueNet,
};
use hjb_pinn::oracle::{analytic, AnalyticNet};
use hjb_pinn::training::{
    loss_grad_method1, loss_grad_method2, loss_method1, loss_method2, SampleBatch,
};
use rand::Rng;

const FD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-6;

fn check_input_grad<N: ValueNet>(net: &N, params: &ParamVector, points: usize, seed: u64) {
    let mut r = rng(seed);
    let box_: Vec<(f64, f64)> = vec![(-1.0, 1.0); net.input_dim()];
    let f = |x: &[f64]| eval_value(net, params, x).unwrap();
    let mut checked = 0;
    let mut attempts = 0;
    while checked < points {
        attempts += 1;
        assert!(attempts < 100 * points, "could not find kink-free points");
        let x = sample_point(&mut r, &box_);
        // Reject points with a kink inside the FD stencil: central
        // differences at step h and 2h agree to O(h^2) on smooth pieces but
        // disagree at slope-jump scale across a kink.
        if hjb_pinn::networks::Smoothness::PiecewiseSmooth == net.smoothness() {
            let g1 = fd_grad(&f, &x, FD_STEP);
            let g2 = fd_grad(&f, &x, 2.0 * FD_STEP);
            if g1
                .iter()
                .zip(&g2)
                .any(|(a, b)| (a - b).abs() > 1e-6 * a.abs().max(1.0))
            {
                continue;
            }
        }
        let (_, grad) = eval_grad(net, params, &x).unwrap();
        let want = fd_grad(&f, &x, FD_STEP);
        for (g, w) in grad.iter().zip(&want) {
            assert!(
                rel_err(*g, *w, 1e-2) < GRAD_TOL,
                "grad mismatch: got {g}, fd {w} at {x:?}"
            );
        }
        checked += 1;
    }
}

#[test]
fn input_gradients_match_fd_all_families() {
    let mlp = SmoothMlp::new(vec![2, 8, 8, 1]).unwrap();
    let params = init_params(&mlp, &mut rng(1));
    check_input_grad(&mlp, &params, 20, 101);

    let soft = ConvexNet::new(2, 8, ConvexActivation::softplus_default());
    let params = init_params(&soft, &mut rng(2));
    check_input_grad(&soft, &params, 20, 102);

    let relu = ConvexNet::new(2, 8, ConvexActivation::Relu);
    let params = init_params(&relu, &mut rng(3));
    check_input_grad(&relu, &params, 20, 103);

    let partial = PartialConvexNet::with_defaults(1, 8);
    let params = init_params(&partial, &mut rng(4));
    check_input_grad(&partial, &params, 20, 104);

    let quad = QuadraticNet { dim: 3 };
    let params = ParamVector::new(vec![0.7, -0.3, 1.2, 0.4, -0.2, 0.9], quad.layout()).unwrap();
    check_input_grad(&quad, &params, 20, 105);

    let net4 = AnalyticNet(analytic("ex4").unwrap());
    let params = ParamVector::zeros(net4.layout());
    check_input_grad(&net4, &params, 20, 106);
}

#[test]
fn input_hessians_match_fd_smooth_families() {
    let mlp = SmoothMlp::new(vec![2, 6, 6, 1]).unwrap();
    let params = init_params(&mlp, &mut rng(7));
    let mut r = rng(201);
    let f = |x: &[f64]| eval_value(&mlp, &params, x).unwrap();
    for _ in 0..10 {
        let x = sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]);
        let jet = eval_jet(&mlp, &params, &x).unwrap();
        let want = fd_hess(&f, &x, 1e-4);
        for (h, w) in jet.hess.iter().zip(&want) {
            assert!(
                rel_err(*h, *w, 1e-1) < 1e-5,
                "hessian mismatch: got {h}, fd {w} at {x:?}"
            );
        }
    }

    let soft = ConvexNet::new(2, 8, ConvexActivation::softplus_default());
    let params = init_params(&soft, &mut rng(8));
    let f = |x: &[f64]| eval_value(&soft, &params, x).unwrap();
    for _ in 0..10 {
        let x = sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]);
        let jet = eval_jet(&soft, &params, &x).unwrap();
        let want = fd_hess(&f, &x, 1e-4);
        for (h, w) in jet.hess.iter().zip(&want) {
            assert!(
                rel_err(*h, *w, 1e-1) < 1e-4,
                "hessian mismatch: got {h}, fd {w} at {x:?}"
            );
        }
    }
}

#[test]
fn param_grad_matches_fd_through_method1_loss() {
    // Third-order path: the loss contains input-Hessian minors.
    let problem = builtin_problem("ex1").unwrap();
    let net = SmoothMlp::new(vec![2, 6, 1]).unwrap();
    let params = init_params(&net, &mut rng(31));
    let mut r = rng(301);
    let batch = SampleBatch {
        inner: (0..4)
            .map(|_| sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]))
            .collect(),
        boundary: vec![(vec![0.0, 0.0], 0.0)],
        hessian: (0..3)
            .map(|_| sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]))
            .collect(),
    };
    let (_, grad) = loss_grad_method1(&net, &params, &problem, &batch).unwrap();
    let f = |vals: &[f64]| {
        let p = ParamVector::new(vals.to_vec(), net.layout()).unwrap();
        loss_method1(&net, &p, &problem, &batch).unwrap().total
    };
    let want = fd_grad(&f, &params.values, 1e-4);
    let mut worst = 0.0f64;
    for (g, w) in grad.iter().zip(&want) {
        worst = worst.max(rel_err(*g, *w, 1e-3));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn param_grad_matches_fd_through_method2_loss() {
    let problem = builtin_problem("ex1").unwrap();
    let net = ConvexNet::new(2, 6, ConvexActivation::softplus_default());
    let params = init_params(&net, &mut rng(32));
    let mut r = rng(302);
    let batch = SampleBatch {
        inner: (0..5)
            .map(|_| sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]))
            .collect(),
        boundary: vec![(vec![0.0, 0.0], 0.0)],
        hessian: vec![],
    };
    let (_, grad) = loss_grad_method2(&net, &params, &problem, &batch, 7.0).unwrap();
    let f = |vals: &[f64]| {
        let p = ParamVector::new(vals.to_vec(), net.layout()).unwrap();
        loss_method2(&net, &p, &problem, &batch, 7.0).unwrap().total
    };
    let want = fd_grad(&f, &params.values, 1e-5);
    for (g, w) in grad.iter().zip(&want) {
        assert!(rel_err(*g, *w, 1e-3) < 1e-5, "got {g}, fd {w}");
    }
}

#[test]
fn param_grad_one_weight_closed_form() {
    // V linear in a single coefficient: loss (V(x0) - 1)^2 has gradient
    // 2 (V - 1) dV/dw with dV/dw = x0^2.
    let net = QuadraticNet { dim: 1 };
    let params = ParamVector::new(vec![0.25], net.layout()).unwrap();
    let x0 = 1.5;
    let lg = loss_param_grad(&params, |tape, p| {
        let jets = hjb_pinn::autodiff::seed_inputs(&[tape.leaf(x0)], hjb_pinn::autodiff::JetOrder::ValueOnly);
        let v = net.forward_jet(p, &jets).v;
        let d = v.add_const(-1.0);
        Ok(d * d)
    })
    .unwrap();
    let v = 0.25 * x0 * x0;
    assert!((lg.loss - (v - 1.0) * (v - 1.0)).abs() < 1e-15);
    assert!((lg.grad[0] - 2.0 * (v - 1.0) * x0 * x0).abs() < 1e-15);
}

#[test]
fn closure_and_batch_gradient_routes_agree() {
    let problem = builtin_problem("ex1").unwrap();
    let net = SmoothMlp::new(vec![2, 5, 1]).unwrap();
    let params = init_params(&net, &mut rng(55));
    let mut r = rng(501);
    let batch = SampleBatch {
        inner: (0..3)
            .map(|_| sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]))
            .collect(),
        boundary: vec![(vec![0.0, 0.0], 0.0)],
        hessian: (0..2)
            .map(|_| sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]))
            .collect(),
    };
    let (parts, grad_batch) = loss_grad_method1(&net, &params, &problem, &batch).unwrap();
    let lg = loss_param_grad(&params, |tape, p| {
        use hjb_pinn::autodiff::{seed_inputs, JetOrder, Var};
        let mut terms: Vec<Var<'_>> = Vec::new();
        for pt in &batch.inner {
            let vals: Vec<Var<'_>> = pt.iter().map(|&v| tape.leaf(v)).collect();
            let jets = seed_inputs(&vals, JetOrder::Gradient);
            let out = net.forward_jet(p, &jets);
            let res = hjb_pinn::hjb::residual_scalar(&problem, pt, &out.g);
            terms.push((res * res).scale(1.0 / batch.inner.len() as f64));
        }
        for (pt, target) in &batch.boundary {
            let vals: Vec<Var<'_>> = pt.iter().map(|&v| tape.leaf(v)).collect();
            let jets = seed_inputs(&vals, JetOrder::ValueOnly);
            let d = net.forward_jet(p, &jets).v.add_const(-target);
            terms.push((d * d).scale(1.0 / batch.boundary.len() as f64));
        }
        for pt in &batch.hessian {
            let vals: Vec<Var<'_>> = pt.iter().map(|&v| tape.leaf(v)).collect();
            let jets = seed_inputs(&vals, JetOrder::Hessian);
            let out = net.forward_jet(p, &jets);
            // leading minors of the 2x2 state Hessian
            let h00 = out.h[hjb_pinn::autodiff::packed_index(0, 0)];
            let h01 = out.h[hjb_pinn::autodiff::packed_index(0, 1)];
            let h11 = out.h[hjb_pinn::autodiff::packed_index(1, 1)];
            let m1 = h00;
            let m2 = h00 * h11 - h01 * h01;
            let n1 = m1.min_zero();
            let n2 = m2.min_zero();
            terms.push((n1 * n1 + n2 * n2).scale(1.0 / batch.hessian.len() as f64));
        }
        let mut total = terms[0];
        for t in &terms[1..] {
            total = total + *t;
        }
        Ok(total)
    })
    .unwrap();
    assert!((lg.loss - parts.total).abs() < 1e-12);
    for (a, b) in lg.grad.iter().zip(&grad_batch) {
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn jets_are_deterministic() {
    let net = SmoothMlp::new(vec![2, 8, 1]).unwrap();
    let params = init_params(&net, &mut rng(77));
    let x = [0.3, -0.4];
    let a = eval_jet(&net, &params, &x).unwrap();
    let b = eval_jet(&net, &params, &x).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    for (u, v) in a.grad.iter().zip(&b.grad) {
        assert_eq!(u.to_bits(), v.to_bits());
    }
    for (u, v) in a.hess.iter().zip(&b.hess) {
        assert_eq!(u.to_bits(), v.to_bits());
    }
}

#[test]
fn relu_convex_net_gradient_at_kink_uses_zero_branch() {
    // Single unit with kink along x = 0: at the kink the subgradient choice
    // is the inactive branch.
    let net = ConvexNet::new(1, 1, ConvexActivation::Relu);
    let params = ParamVector::new(vec![1.0, 0.0, 1.0, 0.0, 0.0], net.layout()).unwrap();
    let (v, g) = eval_grad(&net, &params, &[0.0]).unwrap();
    assert_eq!(v, 0.0);
    assert_eq!(g, vec![0.0]);
}

#[test]
fn zero_parameters_give_zero_jet_with_zero_grads() {
    let mut r = rng(9);
    for _ in 0..5 {
        let net = SmoothMlp::new(vec![2, 4, 1]).unwrap();
        let params = ParamVector::zeros(net.layout());
        let x = sample_point(&mut r, &[(-1.0, 1.0), (-1.0, 1.0)]);
        let jet = eval_jet(&net, &params, &x).unwrap();
        assert_eq!(jet.value, 0.0);
        assert!(jet.grad.iter().all(|&g| g == 0.0));
        assert!(jet.hess.iter().all(|&h| h == 0.0));
    }
}
