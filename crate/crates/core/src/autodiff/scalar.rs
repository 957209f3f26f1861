//! Scalar abstraction shared by plain `f64` evaluation and tape recording.
//!
//! Network code is written once against this trait. Instantiated with `f64`
//! it evaluates jets directly (input derivatives only); instantiated with
//! [`Var`](super::tape::Var) the same code records the jet-valued forward
//! pass on a tape, from which parameter gradients come out by reverse mode.

use super::tape::Var;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Current numeric value (used for branching in piecewise operations).
    fn value(self) -> f64;
    /// Additive zero in the same evaluation context.
    fn zero(self) -> Self;
    fn scale(self, c: f64) -> Self;
    fn add_const(self, c: f64) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn atan(self) -> Self;
    fn recip(self) -> Self;
    /// max(0, x) with derivative 0 at x = 0.
    fn relu(self) -> Self;
    /// min(0, x) with derivative 0 at x = 0.
    fn min_zero(self) -> Self;
    /// log(1 + exp(beta x)) / beta.
    fn softplus(self, beta: f64) -> Self;
    /// 1 / (1 + exp(-beta x)), the derivative of `softplus`.
    fn sigmoid_scaled(self, beta: f64) -> Self;
}

impl Scalar for f64 {
    fn value(self) -> f64 {
        self
    }
    fn zero(self) -> Self {
        0.0
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn add_const(self, c: f64) -> Self {
        self + c
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    fn min_zero(self) -> Self {
        if self < 0.0 {
            self
        } else {
            0.0
        }
    }
    fn softplus(self, beta: f64) -> Self {
        let z = beta * self;
        if z > 30.0 {
            self
        } else if z < -30.0 {
            z.exp() / beta
        } else {
            z.exp().ln_1p() / beta
        }
    }
    fn sigmoid_scaled(self, beta: f64) -> Self {
        let z = beta * self;
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(self) -> f64 {
        Var::value(self)
    }
    fn zero(self) -> Self {
        self.tape().leaf(0.0)
    }
    fn scale(self, c: f64) -> Self {
        Var::scale(self, c)
    }
    fn add_const(self, c: f64) -> Self {
        Var::add_const(self, c)
    }
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn atan(self) -> Self {
        Var::atan(self)
    }
    fn recip(self) -> Self {
        Var::recip(self)
    }
    fn relu(self) -> Self {
        Var::relu(self)
    }
    fn min_zero(self) -> Self {
        Var::min_zero(self)
    }
    fn softplus(self, beta: f64) -> Self {
        Var::softplus(self, beta)
    }
    fn sigmoid_scaled(self, beta: f64) -> Self {
        Var::sigmoid_scaled(self, beta)
    }
}
