//! Reverse-mode tape over scalar operations.
//!
//! The tape records every elementary operation of a forward pass together
//! with the local partial derivatives with respect to its (at most two)
//! parents. A single reverse sweep then yields the derivative of one scalar
//! output with respect to every recorded leaf.
//!
//! Network forward passes are recorded in jet arithmetic (see [`super::jet`]),
//! so the tape sees the jet *coefficients* as plain scalars. Differentiating
//! a loss that contains input-gradients or input-Hessians therefore needs no
//! special casing: those coefficients are ordinary tape nodes.

use std::cell::RefCell;

#[derive(Clone, Copy)]
struct Node {
    val: f64,
    pa: u32,
    pb: u32,
    da: f64,
    db: f64,
}

/// Append-only record of a scalar computation.
pub struct Tape {
    inner: RefCell<Vec<Node>>,
}

/// Handle to one tape node. Cheap to copy; all arithmetic on `Var` appends
/// new nodes to the owning tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            inner: RefCell::new(Vec::with_capacity(4096)),
        }
    }

    /// Number of nodes currently recorded.
    pub fn len(&self) -> usize {
        self.inner.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Record a leaf (independent variable or constant).
    pub fn leaf(&self, val: f64) -> Var<'_> {
        let idx = self.push(Node {
            val,
            pa: 0,
            pb: 0,
            da: 0.0,
            db: 0.0,
        });
        Var { tape: self, idx }
    }

    /// Truncate back to `mark` nodes, discarding everything recorded after.
    /// Used to reuse the parameter prefix across many per-sample passes.
    pub fn rewind(&self, mark: usize) {
        self.inner.borrow_mut().truncate(mark);
    }

    /// Current value of a node.
    pub fn value(&self, v: Var<'_>) -> f64 {
        self.inner.borrow()[v.idx as usize].val
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.inner.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(node);
        idx
    }

    fn unary(&self, a: Var<'_>, val: f64, da: f64) -> Var<'_> {
        let idx = self.push(Node {
            val,
            pa: a.idx,
            pb: 0,
            da,
            db: 0.0,
        });
        Var { tape: self, idx }
    }

    fn binary(&self, a: Var<'_>, b: Var<'_>, val: f64, da: f64, db: f64) -> Var<'_> {
        let idx = self.push(Node {
            val,
            pa: a.idx,
            pb: b.idx,
            da,
            db,
        });
        Var { tape: self, idx }
    }

    /// Reverse sweep from `output`; adjoints of all nodes are written into
    /// `adj` (resized and zeroed here). `adj[i]` is d(output)/d(node i).
    pub fn backward_into(&self, output: Var<'_>, adj: &mut Vec<f64>) {
        let nodes = self.inner.borrow();
        adj.clear();
        adj.resize(nodes.len(), 0.0);
        adj[output.idx as usize] = 1.0;
        for i in (1..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = &nodes[i];
            adj[n.pa as usize] += n.da * a;
            adj[n.pb as usize] += n.db * a;
        }
    }

    /// Convenience wrapper returning a fresh adjoint vector.
    pub fn backward(&self, output: Var<'_>) -> Vec<f64> {
        let mut adj = Vec::new();
        self.backward_into(output, &mut adj);
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.tape.value(self)
    }

    pub fn index(self) -> usize {
        self.idx as usize
    }

    pub(crate) fn tape(self) -> &'t Tape {
        self.tape
    }

    pub fn scale(self, c: f64) -> Self {
        self.tape.unary(self, self.value() * c, c)
    }

    pub fn add_const(self, c: f64) -> Self {
        self.tape.unary(self, self.value() + c, 1.0)
    }

    pub fn tanh(self) -> Self {
        let u = self.value().tanh();
        self.tape.unary(self, u, 1.0 - u * u)
    }

    pub fn exp(self) -> Self {
        let u = self.value().exp();
        self.tape.unary(self, u, u)
    }

    pub fn atan(self) -> Self {
        let v = self.value();
        self.tape.unary(self, v.atan(), 1.0 / (1.0 + v * v))
    }

    pub fn recip(self) -> Self {
        let v = self.value();
        let u = 1.0 / v;
        self.tape.unary(self, u, -u * u)
    }

    pub fn relu(self) -> Self {
        let v = self.value();
        if v > 0.0 {
            self.tape.unary(self, v, 1.0)
        } else {
            self.tape.unary(self, 0.0, 0.0)
        }
    }

    pub fn min_zero(self) -> Self {
        let v = self.value();
        if v < 0.0 {
            self.tape.unary(self, v, 1.0)
        } else {
            self.tape.unary(self, 0.0, 0.0)
        }
    }

    pub fn softplus(self, beta: f64) -> Self {
        let z = beta * self.value();
        let val = if z > 30.0 {
            self.value()
        } else if z < -30.0 {
            z.exp() / beta
        } else {
            z.exp().ln_1p() / beta
        };
        self.tape.unary(self, val, sigmoid(z))
    }

    pub fn sigmoid_scaled(self, beta: f64) -> Self {
        let s = sigmoid(beta * self.value());
        self.tape.unary(self, s, beta * s * (1.0 - s))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape));
        self.tape
            .binary(self, rhs, self.value() + rhs.value(), 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.tape
            .binary(self, rhs, self.value() - rhs.value(), 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self.value(), rhs.value());
        self.tape.binary(self, rhs, a * b, b, a)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let (a, b) = (self.value(), rhs.value());
        self.tape.binary(self, rhs, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.tape.unary(self, -self.value(), -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_chain_rule() {
        let tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = tape.leaf(2.0);
        // f = (x*y + x).tanh()
        let f = (x * y + x).tanh();
        let adj = tape.backward(f);
        let u: f64 = 9.0;
        let s = 1.0 - u.tanh() * u.tanh();
        assert!((adj[x.index()] - s * 3.0).abs() < 1e-15);
        assert!((adj[y.index()] - s * 3.0).abs() < 1e-15);
    }

    #[test]
    fn rewind_reuses_prefix() {
        let tape = Tape::new();
        let w = tape.leaf(2.0);
        let mark = tape.len();
        let f = w.scale(3.0);
        assert_eq!(f.value(), 6.0);
        tape.rewind(mark);
        assert_eq!(tape.len(), 1);
        let g = w * w;
        let adj = tape.backward(g);
        assert_eq!(adj[w.index()], 4.0);
    }

    #[test]
    fn shared_parent_accumulates() {
        let tape = Tape::new();
        let x = tape.leaf(5.0);
        let f = x * x;
        let adj = tape.backward(f);
        assert_eq!(adj[x.index()], 10.0);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let tape = Tape::new();
        let x = tape.leaf(0.0);
        let f = x.relu();
        let adj = tape.backward(f);
        assert_eq!(f.value(), 0.0);
        assert_eq!(adj[x.index()], 0.0);
    }
}
