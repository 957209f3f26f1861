//! Checkpoint files: `{family, widths, activation, layout, values}` in JSON.
//!
//! Values are written as plain JSON numbers; the serializer emits the
//! shortest decimal that parses back to the identical 64-bit value, so a
//! save/load cycle is bit-exact.

use crate::autodiff::{LayoutEntry, ParamLayout, ParamVector};
use crate::networks::{
    ConvexActivation, ConvexNet, Network, PartialConvexNet, QuadraticNet, SmoothMlp, ValueNet,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub family: String,
    pub widths: Vec<usize>,
    pub activation: String,
    pub layout: Vec<LayoutEntry>,
    pub values: Vec<f64>,
}

fn activation_string(net: &Network) -> String {
    match net {
        Network::SmoothMlp(_) => "tanh".to_string(),
        Network::Convex(c) => match c.activation {
            ConvexActivation::Relu => "relu".to_string(),
            ConvexActivation::Softplus { beta } => format!("softplus:{beta}"),
        },
        Network::PartialConvex(_) => "relu".to_string(),
        Network::Quadratic(_) => "polynomial".to_string(),
    }
}

fn widths_of(net: &Network) -> Vec<usize> {
    match net {
        Network::SmoothMlp(m) => m.widths.clone(),
        Network::Convex(c) => vec![c.input_dim, c.hidden],
        Network::PartialConvex(p) => vec![
            p.state_dim,
            p.hidden,
            p.t_features,
            p.yhat_dim,
            p.f1_hidden,
            p.f2_hidden,
        ],
        Network::Quadratic(q) => vec![q.dim],
    }
}

fn network_from(family: &str, widths: &[usize], activation: &str) -> Result<Network> {
    match family {
        "smooth_mlp" => Ok(Network::SmoothMlp(SmoothMlp::new(widths.to_vec())?)),
        "convex" => {
            if widths.len() != 2 {
                return Err(Error::CheckpointMismatch(
                    "convex family expects widths [input_dim, hidden]".into(),
                ));
            }
            let act = parse_convex_activation(activation)?;
            Ok(Network::Convex(ConvexNet::new(widths[0], widths[1], act)))
        }
        "partial_convex" => {
            if widths.len() != 6 {
                return Err(Error::CheckpointMismatch(
                    "partial_convex family expects 6 width entries".into(),
                ));
            }
            Ok(Network::PartialConvex(PartialConvexNet {
                state_dim: widths[0],
                hidden: widths[1],
                t_features: widths[2],
                yhat_dim: widths[3],
                f1_hidden: widths[4],
                f2_hidden: widths[5],
            }))
        }
        "quadratic" => {
            if widths.len() != 1 {
                return Err(Error::CheckpointMismatch(
                    "quadratic family expects widths [dim]".into(),
                ));
            }
            Ok(Network::Quadratic(QuadraticNet { dim: widths[0] }))
        }
        other => Err(Error::CheckpointMismatch(format!(
            "unknown family `{other}`"
        ))),
    }
}

pub fn parse_convex_activation(s: &str) -> Result<ConvexActivation> {
    if s == "relu" {
        return Ok(ConvexActivation::Relu);
    }
    if s == "softplus" {
        return Ok(ConvexActivation::softplus_default());
    }
    if let Some(beta) = s.strip_prefix("softplus:") {
        let beta: f64 = beta
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad softplus beta in `{s}`")))?;
        return Ok(ConvexActivation::Softplus { beta });
    }
    Err(Error::InvalidConfig(format!("unknown activation `{s}`")))
}

pub fn to_file(net: &Network, params: &ParamVector) -> CheckpointFile {
    CheckpointFile {
        family: net.family_name().to_string(),
        widths: widths_of(net),
        activation: activation_string(net),
        layout: params.layout.entries().to_vec(),
        values: params.values.clone(),
    }
}

pub fn from_file(file: CheckpointFile) -> Result<(Network, ParamVector)> {
    let net = network_from(&file.family, &file.widths, &file.activation)?;
    let layout = ParamLayout::from_entries(file.layout)?;
    if layout != net.layout() {
        return Err(Error::CheckpointMismatch(
            "stored layout does not match the declared architecture".into(),
        ));
    }
    let params = ParamVector::new(file.values, layout)?;
    Ok((net, params))
}

pub fn save(path: &Path, net: &Network, params: &ParamVector) -> Result<()> {
    let file = to_file(net, params);
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Network, ParamVector)> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    from_file(file)
}
