//! Two-hidden-layer ReLU network:
//! `y = W3 · ReLU(W2 · ReLU(W1 x + b1) + b2) + b3`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{relu_grad, relu_scalar, AdamState, GradientSet, Linear, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
    adam: AdamState,
}

/// Activations kept by the forward pass for backprop.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub z1: Vec<f64>,
    pub h1: Vec<f64>,
    pub z2: Vec<f64>,
    pub h2: Vec<f64>,
}

impl MlpParams {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden1: usize,
        hidden2: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        Self::from_layers(
            Linear::uniform(input, hidden1, rng),
            Linear::uniform(hidden1, hidden2, rng),
            Linear::uniform(hidden2, output, rng),
        )
        .expect("freshly initialised layers are consistent")
    }

    pub fn from_layers(l1: Linear, l2: Linear, l3: Linear) -> Result<Self> {
        if l2.in_dim() != l1.out_dim() || l3.in_dim() != l2.out_dim() {
            return Err(Error::shape(
                "MlpParams::from_layers",
                format!("chained dims {}->{}->{}", l1.out_dim(), l2.out_dim(), l3.out_dim()),
                format!("inputs {}, {}", l2.in_dim(), l3.in_dim()),
            ));
        }
        for l in [&l1, &l2, &l3] {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape("MlpParams bias", l.out_dim(), l.bias.len()));
            }
        }
        let mut net = Self {
            l1,
            l2,
            l3,
            adam: AdamState::new(&[]),
        };
        net.adam = AdamState::new(&net.shapes());
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.l3.out_dim()
    }

    /// Layer sizes `[input, hidden1, hidden2, output]`.
    pub fn dims(&self) -> [usize; 4] {
        [
            self.l1.in_dim(),
            self.l1.out_dim(),
            self.l2.out_dim(),
            self.l3.out_dim(),
        ]
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        mlp_forward(self, x).map(|(y, _)| y)
    }

    /// Accumulates the gradient of `output · output_gradient` into `acc`.
    pub fn backward_acc(
        &self,
        cache: &MlpCache,
        output_gradient: &[f64],
        acc: &mut GradientSet,
    ) -> Result<()> {
        if output_gradient.len() != self.output_dim() {
            return Err(Error::shape(
                "mlp_backward output gradient",
                self.output_dim(),
                output_gradient.len(),
            ));
        }
        if cache.h2.len() != self.l3.in_dim() || cache.input.len() != self.input_dim() {
            return Err(Error::shape(
                "mlp_backward cache",
                format!("{:?}", self.dims()),
                format!("input {}, h2 {}", cache.input.len(), cache.h2.len()),
            ));
        }
        acc.check_shapes(&self.shapes())?;

        let [g1w, g1b, g2w, g2b, g3w, g3b] = acc.tensors.as_mut_slice() else {
            unreachable!("shape check guarantees six tensors");
        };

        let mut dh2 = vec![0.0; self.l3.in_dim()];
        self.l3
            .backward_acc(&cache.h2, output_gradient, g3w, g3b, Some(&mut dh2));
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&cache.z2)
            .map(|(d, &z)| d * relu_grad(z))
            .collect();

        let mut dh1 = vec![0.0; self.l2.in_dim()];
        self.l2.backward_acc(&cache.h1, &dz2, g2w, g2b, Some(&mut dh1));
        let dz1: Vec<f64> = dh1
            .iter()
            .zip(&cache.z1)
            .map(|(d, &z)| d * relu_grad(z))
            .collect();

        self.l1.backward_acc(&cache.input, &dz1, g1w, g1b, None);
        Ok(())
    }
}

impl Parameters for MlpParams {
    fn layers(&self) -> Vec<&Linear> {
        vec![&self.l1, &self.l2, &self.l3]
    }

    fn layers_and_optimizer(&mut self) -> (Vec<&mut Linear>, &mut AdamState) {
        (vec![&mut self.l1, &mut self.l2, &mut self.l3], &mut self.adam)
    }

    fn optimizer(&self) -> &AdamState {
        &self.adam
    }
}

pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
    if x.len() != params.input_dim() {
        return Err(Error::shape("mlp_forward input", params.input_dim(), x.len()));
    }
    let z1 = params.l1.forward(x);
    let h1: Vec<f64> = z1.iter().map(|&v| relu_scalar(v)).collect();
    let z2 = params.l2.forward(&h1);
    let h2: Vec<f64> = z2.iter().map(|&v| relu_scalar(v)).collect();
    let y = params.l3.forward(&h2);
    let cache = MlpCache {
        input: x.to_vec(),
        z1,
        h1,
        z2,
        h2,
    };
    Ok((y, cache))
}

/// Gradient of `output · output_gradient` with respect to every parameter.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    output_gradient: &[f64],
) -> Result<GradientSet> {
    let mut grads = params.zero_grads();
    params.backward_acc(cache, output_gradient, &mut grads)?;
    Ok(grads)
}
