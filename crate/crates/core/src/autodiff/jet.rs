//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its first and (optionally) second
//! derivatives with respect to up to [`MAX_INPUT_DIM`] seeded input variables.
//! Arithmetic propagates the truncated Taylor expansion, so evaluating a
//! network on seeded jets yields the exact input gradient and input Hessian
//! of the output.
//!
//! The Hessian block is stored packed (lower triangle including the
//! diagonal); it is either absent (first-order jet) or complete. Components
//! are generic over [`Scalar`], so the same propagation code produces plain
//! numbers or tape nodes.

use super::scalar::Scalar;
use arrayvec::ArrayVec;

/// Largest supported input dimension (time + up to 3 state dimensions).
pub const MAX_INPUT_DIM: usize = 4;
const MAX_PACKED: usize = MAX_INPUT_DIM * (MAX_INPUT_DIM + 1) / 2;

/// How many derivative levels a seeded input carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOrder {
    ValueOnly,
    Gradient,
    Hessian,
}

/// Index into the packed symmetric storage for entry (i, j).
#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

#[derive(Clone, Debug)]
pub struct Jet<S: Scalar> {
    pub v: S,
    pub g: ArrayVec<S, MAX_INPUT_DIM>,
    pub h: ArrayVec<S, MAX_PACKED>,
}

/// Seed one jet per input variable: `vals[i]` gets unit first derivative in
/// direction `i`, zeros elsewhere.
pub fn seed_inputs<S: Scalar>(vals: &[S], order: JetOrder) -> Vec<Jet<S>> {
    assert!(vals.len() <= MAX_INPUT_DIM, "input dimension too large");
    assert!(!vals.is_empty());
    let zero = vals[0].zero();
    let one = zero.add_const(1.0);
    let d = vals.len();
    vals.iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut g = ArrayVec::new();
            let mut h = ArrayVec::new();
            if order != JetOrder::ValueOnly {
                for k in 0..d {
                    g.push(if k == i { one } else { zero });
                }
            }
            if order == JetOrder::Hessian {
                for _ in 0..d * (d + 1) / 2 {
                    h.push(zero);
                }
            }
            Jet { v, g, h }
        })
        .collect()
}

impl<S: Scalar> Jet<S> {
    /// A jet with no tracked derivatives (interacts only via the `*_s`,
    /// `scale` and `add_const` operations or with other constants).
    pub fn constant(v: S) -> Self {
        Jet {
            v,
            g: ArrayVec::new(),
            h: ArrayVec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.g.len() == other.g.len() && self.h.len() == other.h.len()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert!(self.same_shape(rhs), "jet shape mismatch");
        Jet {
            v: self.v + rhs.v,
            g: self.g.iter().zip(&rhs.g).map(|(&a, &b)| a + b).collect(),
            h: self.h.iter().zip(&rhs.h).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert!(self.same_shape(rhs), "jet shape mismatch");
        Jet {
            v: self.v - rhs.v,
            g: self.g.iter().zip(&rhs.g).map(|(&a, &b)| a - b).collect(),
            h: self.h.iter().zip(&rhs.h).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Jet {
            v: -self.v,
            g: self.g.iter().map(|&a| -a).collect(),
            h: self.h.iter().map(|&a| -a).collect(),
        }
    }

    /// Multiply every component by a plain constant.
    pub fn scale(&self, c: f64) -> Self {
        Jet {
            v: self.v.scale(c),
            g: self.g.iter().map(|&a| a.scale(c)).collect(),
            h: self.h.iter().map(|&a| a.scale(c)).collect(),
        }
    }

    pub fn add_const(&self, c: f64) -> Self {
        Jet {
            v: self.v.add_const(c),
            g: self.g.clone(),
            h: self.h.clone(),
        }
    }

    /// Multiply by a scalar that is constant with respect to the seeded
    /// inputs (e.g. a network parameter).
    pub fn scale_s(&self, c: S) -> Self {
        Jet {
            v: self.v * c,
            g: self.g.iter().map(|&a| a * c).collect(),
            h: self.h.iter().map(|&a| a * c).collect(),
        }
    }

    pub fn add_s(&self, c: S) -> Self {
        Jet {
            v: self.v + c,
            g: self.g.clone(),
            h: self.h.clone(),
        }
    }

    /// Full product rule: first and second derivative components.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert!(self.same_shape(rhs), "jet shape mismatch");
        let v = self.v * rhs.v;
        let g: ArrayVec<S, MAX_INPUT_DIM> = self
            .g
            .iter()
            .zip(&rhs.g)
            .map(|(&ga, &gb)| ga * rhs.v + self.v * gb)
            .collect();
        let d = self.g.len();
        let mut h = ArrayVec::new();
        if !self.h.is_empty() {
            for i in 0..d {
                for j in 0..=i {
                    let k = packed_index(i, j);
                    h.push(
                        self.h[k] * rhs.v
                            + self.g[i] * rhs.g[j]
                            + self.g[j] * rhs.g[i]
                            + self.v * rhs.h[k],
                    );
                }
            }
        }
        Jet { v, g, h }
    }

    /// Chain rule through a scalar function with value `u = f(v)` and
    /// derivatives `d1 = f'(v)`, `d2 = f''(v)` (second used only when the
    /// Hessian block is tracked).
    fn chain(&self, u: S, d1: S, d2: impl FnOnce() -> S) -> Self {
        let g: ArrayVec<S, MAX_INPUT_DIM> = self.g.iter().map(|&a| a * d1).collect();
        let d = self.g.len();
        let mut h = ArrayVec::new();
        if !self.h.is_empty() {
            let d2 = d2();
            for i in 0..d {
                for j in 0..=i {
                    let k = packed_index(i, j);
                    h.push(self.h[k] * d1 + d2 * self.g[i] * self.g[j]);
                }
            }
        }
        Jet { v: u, g, h }
    }

    pub fn tanh(&self) -> Self {
        let u = self.v.tanh();
        let d1 = (-(u * u)).add_const(1.0);
        self.chain(u, d1, || (u * d1).scale(-2.0))
    }

    pub fn exp(&self) -> Self {
        let u = self.v.exp();
        self.chain(u, u, || u)
    }

    pub fn atan(&self) -> Self {
        let u = self.v.atan();
        let den = (self.v * self.v).add_const(1.0);
        let d1 = den.recip();
        self.chain(u, d1, || (self.v * d1 * d1).scale(-2.0))
    }

    pub fn recip(&self) -> Self {
        let u = self.v.recip();
        let d1 = -(u * u);
        self.chain(u, d1, || (u * u * u).scale(2.0))
    }

    /// ReLU with the 0 subgradient convention at the kink. The second
    /// derivative is 0 almost everywhere and is propagated as 0.
    pub fn relu(&self) -> Self {
        if self.v.value() > 0.0 {
            Jet {
                v: self.v.relu(),
                g: self.g.clone(),
                h: self.h.clone(),
            }
        } else {
            let zero = self.v.zero();
            Jet {
                v: self.v.relu(),
                g: self.g.iter().map(|_| zero).collect(),
                h: self.h.iter().map(|_| zero).collect(),
            }
        }
    }

    pub fn softplus(&self, beta: f64) -> Self {
        let u = self.v.softplus(beta);
        let d1 = self.v.sigmoid_scaled(beta);
        self.chain(u, d1, || (d1 * (-d1).add_const(1.0)).scale(beta))
    }

    /// Dense symmetric Hessian (row-major, dim x dim) as plain numbers.
    pub fn hessian_full(&self) -> Vec<f64> {
        let d = self.g.len();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.h[packed_index(i, j)].value();
            }
        }
        out
    }
}
