//! Shared oracles for integration tests: central finite differences and
//! small deterministic helpers. Everything here is independent of the
//! autodiff implementation it checks.

#![allow(dead_code)]

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central-difference gradient of a scalar function.
pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let up = f(&xp);
        xp[i] = x[i] - step;
        let dn = f(&xp);
        xp[i] = x[i];
        g.push((up - dn) / (2.0 * step));
    }
    g
}

/// Central-difference Hessian via second differences of the function.
pub fn fd_hess(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let d = x.len();
    let mut h = vec![0.0; d * d];
    let f0 = f(x);
    let mut xp = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + step;
        let up = f(&xp);
        xp[i] = x[i] - step;
        let dn = f(&xp);
        xp[i] = x[i];
        h[i * d + i] = (up - 2.0 * f0 + dn) / (step * step);
    }
    for i in 0..d {
        for j in 0..i {
            xp[i] = x[i] + step;
            xp[j] = x[j] + step;
            let pp = f(&xp);
            xp[j] = x[j] - step;
            let pm = f(&xp);
            xp[i] = x[i] - step;
            let mm = f(&xp);
            xp[j] = x[j] + step;
            let mp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (pp - pm - mp + mm) / (4.0 * step * step);
            h[i * d + j] = v;
            h[j * d + i] = v;
        }
    }
    h
}

/// Relative error with a scale floor, so near-zero references do not blow
/// the ratio up.
pub fn rel_err(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor)
}

pub fn sample_point<R: Rng>(rng: &mut R, box_: &[(f64, f64)]) -> Vec<f64> {
    box_.iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi).sample(rng))
        .collect()
}

/// Symmetric-eigenvalue oracle (Jacobi rotations), independent of any LU
/// path. Returns eigenvalues in unspecified order.
pub fn jacobi_eigenvalues(mat: &[f64], n: usize) -> Vec<f64> {
    let mut a = mat.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-18 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
