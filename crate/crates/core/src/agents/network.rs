use serde::{Deserialize, Serialize};

use super::moe::MoeQNetwork;
use super::qnet::{QInput, QNetwork};
use crate::numerics::{MlpParams, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "ddqn")]
    Ddqn,
    #[serde(rename = "ddqn-moe")]
    DdqnMoe,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Ddqn => "ddqn",
            AgentKind::DdqnMoe => "ddqn-moe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ddqn" => Ok(AgentKind::Ddqn),
            "ddqn-moe" => Ok(AgentKind::DdqnMoe),
            other => Err(Error::InvalidArgument(format!(
                "unknown agent kind {other:?} (expected ddqn or ddqn-moe)"
            ))),
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trained Q-network of either kind, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Plain(MlpParams),
    Moe(MoeQNetwork),
}

impl Network {
    pub fn kind(&self) -> AgentKind {
        match self {
            Network::Plain(_) => AgentKind::Ddqn,
            Network::Moe(_) => AgentKind::DdqnMoe,
        }
    }

    /// Number of experts, 0 for the plain network.
    pub fn num_experts(&self) -> usize {
        match self {
            Network::Plain(_) => 0,
            Network::Moe(n) => n.num_experts(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Network::Plain(n) => n.input_dim(),
            Network::Moe(n) => n.obs_dim(),
        }
    }

    pub fn q_values(&self, input: QInput<'_>) -> Result<Vec<f64>> {
        match self {
            Network::Plain(n) => n.q_values(input),
            Network::Moe(n) => n.q_values(input),
        }
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        match self {
            Network::Plain(n) => n.shapes(),
            Network::Moe(n) => n.shapes(),
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        match self {
            Network::Plain(n) => n.flat_params(),
            Network::Moe(n) => n.flat_params(),
        }
    }

    /// Rebuilds a network from a shape table and a flat parameter vector.
    /// Optimizer state starts fresh.
    pub fn from_flat(kind: AgentKind, shapes: &[(usize, usize)], values: &[f64]) -> Result<Self> {
        let mut net = match kind {
            AgentKind::Ddqn => {
                if shapes.len() != 6 {
                    return Err(Error::shape("plain network shape table", 6, shapes.len()));
                }
                let layer = |i: usize| crate::numerics::Linear::zeros(shapes[i].1, shapes[i].0);
                let params = MlpParams::from_layers(layer(0), layer(2), layer(4))?;
                if params.shapes() != shapes {
                    return Err(Error::shape(
                        "plain network shape table",
                        format!("{:?}", params.shapes()),
                        format!("{shapes:?}"),
                    ));
                }
                Network::Plain(params)
            }
            AgentKind::DdqnMoe => Network::Moe(MoeQNetwork::zeros_from_shapes(shapes)?),
        };
        match &mut net {
            Network::Plain(n) => n.load_flat(values)?,
            Network::Moe(n) => n.load_flat(values)?,
        }
        Ok(net)
    }
}
