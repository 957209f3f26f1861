//! Derivatives of network outputs and training losses.
//!
//! Input derivatives (gradient, Hessian) come from second-order forward-mode
//! jets propagated through the network; parameter gradients come from
//! reverse mode over a tape that records the jet-valued forward pass. The
//! combination delivers the exact third-order mixed derivatives needed when
//! a loss contains input-Hessian terms.

mod jet;
mod scalar;
mod tape;

pub use jet::{packed_index, seed_inputs, Jet, JetOrder, MAX_INPUT_DIM};
pub use scalar::Scalar;
pub use tape::{Tape, Var};

use crate::networks::{Smoothness, ValueNet};
use crate::{Error, Result};

/// One named parameter block inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered list of parameter blocks; offsets are contiguous, non-overlapping
/// and cover the whole vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    entries: Vec<LayoutEntry>,
    total: usize,
}

impl ParamLayout {
    /// Build a layout from `(name, shape)` blocks laid out back to back.
    pub fn new(blocks: &[(&str, &[usize])]) -> Self {
        let mut entries = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for (name, shape) in blocks {
            let entry = LayoutEntry {
                name: (*name).to_string(),
                offset,
                shape: shape.to_vec(),
            };
            offset += entry.len();
            entries.push(entry);
        }
        Self {
            entries,
            total: offset,
        }
    }

    pub fn from_entries(entries: Vec<LayoutEntry>) -> Result<Self> {
        let mut offset = 0;
        for e in &entries {
            if e.offset != offset {
                return Err(Error::LayoutMismatch(format!(
                    "block `{}` starts at {} but previous blocks end at {}",
                    e.name, e.offset, offset
                )));
            }
            offset += e.len();
        }
        Ok(Self {
            entries,
            total: offset,
        })
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn block(&self, name: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Flat 64-bit parameter vector plus its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: ParamLayout) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::LayoutMismatch(format!(
                "layout covers {} values, vector has {}",
                layout.total_len(),
                values.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: ParamLayout) -> Self {
        Self {
            values: vec![0.0; layout.total_len()],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mutable view of one named block.
    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.block(name)?.range();
        Some(&mut self.values[range])
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        let range = self.layout.block(name)?.range();
        Some(&self.values[range])
    }
}

/// Value, input-gradient and input-Hessian of a scalar function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalar2Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Dense row-major `dim x dim` matrix, symmetric by construction.
    pub hess: Vec<f64>,
}

impl Scalar2Jet {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.grad.len() + j]
    }
}

/// A scalar loss together with its gradient with respect to a parameter
/// vector.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn check_dims<N: ValueNet>(net: &N, params: &ParamVector, input: &[f64]) -> Result<()> {
    if input.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: input.len(),
        });
    }
    if params.len() != net.param_len() {
        return Err(Error::DimensionMismatch {
            expected: net.param_len(),
            got: params.len(),
        });
    }
    Ok(())
}

/// Exact value, input-gradient and input-Hessian of the network at `input`.
///
/// Requires a twice-differentiable activation; piecewise-linear networks
/// (ReLU) report [`Error::UnsupportedHessian`] and must use [`eval_grad`].
pub fn eval_jet<N: ValueNet>(net: &N, params: &ParamVector, input: &[f64]) -> Result<Scalar2Jet> {
    check_dims(net, params, input)?;
    if net.smoothness() != Smoothness::CInf {
        return Err(Error::UnsupportedHessian {
            activation: net.activation_name().to_string(),
        });
    }
    let jets = seed_inputs(input, JetOrder::Hessian);
    let out = net.forward_jet(&params.values, &jets);
    Ok(Scalar2Jet {
        value: out.v,
        grad: out.g.to_vec(),
        hess: out.hessian_full(),
    })
}

/// Value and input-gradient only; defined for every network family.
pub fn eval_grad<N: ValueNet>(
    net: &N,
    params: &ParamVector,
    input: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_dims(net, params, input)?;
    let jets = seed_inputs(input, JetOrder::Gradient);
    let out = net.forward_jet(&params.values, &jets);
    Ok((out.v, out.g.to_vec()))
}

/// Plain function value.
pub fn eval_value<N: ValueNet>(net: &N, params: &ParamVector, input: &[f64]) -> Result<f64> {
    check_dims(net, params, input)?;
    let jets = seed_inputs(input, JetOrder::ValueOnly);
    Ok(net.forward_jet(&params.values, &jets).v)
}

/// Exact gradient of a composite scalar loss with respect to `params`.
///
/// The builder receives the tape and one tape variable per parameter; it
/// records the loss (typically through jet-valued network evaluations at a
/// batch of sample points) and returns the loss node.
pub fn loss_param_grad<F>(params: &ParamVector, build: F) -> Result<LossGrad>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let pvars: Vec<Var<'_>> = params.values.iter().map(|&v| tape.leaf(v)).collect();
    let out = build(&tape, &pvars)?;
    let loss = out.value();
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "loss".to_string(),
            point: Vec::new(),
        });
    }
    let adj = tape.backward(out);
    Ok(LossGrad {
        loss,
        grad: pvars.iter().map(|v| adj[v.index()]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_and_addressable() {
        let layout = ParamLayout::new(&[("w0", &[2, 3]), ("b0", &[2]), ("w1", &[1, 2])]);
        assert_eq!(layout.total_len(), 10);
        assert_eq!(layout.block("b0").unwrap().offset, 6);
        assert_eq!(layout.block("w1").unwrap().range(), 8..10);
    }

    #[test]
    fn gapped_layout_is_rejected() {
        let entries = vec![
            LayoutEntry {
                name: "a".into(),
                offset: 0,
                shape: vec![2],
            },
            LayoutEntry {
                name: "b".into(),
                offset: 3,
                shape: vec![1],
            },
        ];
        assert!(ParamLayout::from_entries(entries).is_err());
    }

    #[test]
    fn param_vector_length_must_match_layout() {
        let layout = ParamLayout::new(&[("w", &[4])]);
        assert!(ParamVector::new(vec![0.0; 3], layout).is_err());
    }

    #[test]
    fn loss_param_grad_single_weight_chain_rule() {
        // loss = (w * x0 - 1)^2 with x0 = 2, w = 5: d/dw = 2(w x0 - 1) x0
        let layout = ParamLayout::new(&[("w", &[1])]);
        let params = ParamVector::new(vec![5.0], layout).unwrap();
        let lg = loss_param_grad(&params, |tape, p| {
            let x0 = tape.leaf(2.0);
            let r = p[0] * x0 - tape.leaf(1.0);
            Ok(r * r)
        })
        .unwrap();
        assert_eq!(lg.loss, 81.0);
        assert_eq!(lg.grad, vec![2.0 * 9.0 * 2.0]);
    }

    #[test]
    fn loss_param_grad_rejects_non_finite() {
        let layout = ParamLayout::new(&[("w", &[1])]);
        let params = ParamVector::new(vec![0.0], layout).unwrap();
        let err = loss_param_grad(&params, |_tape, p| Ok(p[0].recip())).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
