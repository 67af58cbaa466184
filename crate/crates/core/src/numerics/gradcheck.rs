//! Central finite-difference oracle for analytic gradients.
//!
//! The objective is evaluated in double-double precision by code that is
//! separate from the `f64` forward pass, so the difference quotient is not
//! swamped by rounding even when a gradient entry is tiny.

use super::dd::{dd_affine, Dd};
use super::{mlp_backward, mlp_forward, GradientSet, Linear, MlpParams, Parameters};
use crate::{Error, Result};

pub const FD_STEP: f64 = 1e-5;

/// One perturbed parameter: element `index` of tensor `tensor`, where tensors
/// alternate weight, bias for each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub tensor: usize,
    pub index: usize,
}

impl Probe {
    /// Index of the layer the tensor belongs to.
    pub fn layer(self) -> usize {
        self.tensor / 2
    }

    /// Output unit of `layer` whose pre-activation the entry feeds.
    pub fn row(self, layer: &Linear) -> usize {
        if self.tensor.is_multiple_of(2) {
            self.index / layer.in_dim()
        } else {
            self.index
        }
    }
}

/// Largest relative error `|a - n| / max(1e-8, |a| + |n|)` between the
/// analytic gradient and central differences of `objective`.
///
/// `objective` returns the scalar value and the ReLU activation pattern of the
/// evaluated network. A parameter is skipped when either perturbed evaluation
/// changes that pattern: the objective has a kink inside the probe interval.
///
/// The second argument names the perturbed entry (`None` for the unperturbed
/// call, which always comes first), so an objective may reuse activations the
/// entry cannot affect.
pub fn finite_diff_max_rel_error<P, F>(
    params: &P,
    analytic: &GradientSet,
    step: f64,
    mut objective: F,
) -> Result<f64>
where
    P: Parameters + Clone,
    F: FnMut(&P, Option<Probe>) -> Result<(Dd, Vec<bool>)>,
{
    analytic.check_shapes(&params.shapes())?;
    let (_, base_pattern) = objective(params, None)?;
    let analytic = analytic.flat();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut flat_index = 0;
    let n_tensors = probe.shapes().len();
    for t in 0..n_tensors {
        let len = probe.tensors()[t].len();
        for i in 0..len {
            let original = probe.tensors()[t][i];
            let (up, down) = (original + step, original - step);
            probe.tensors_mut()[t][i] = up;
            let at = Some(Probe { tensor: t, index: i });
            let (plus, plus_pattern) = objective(&probe, at)?;
            probe.tensors_mut()[t][i] = down;
            let (minus, minus_pattern) = objective(&probe, at)?;
            probe.tensors_mut()[t][i] = original;

            let a = analytic[flat_index];
            flat_index += 1;
            if plus_pattern != base_pattern || minus_pattern != base_pattern {
                continue;
            }
            let numeric = ((plus - minus) / Dd::new(up - down)).to_f64();
            if !numeric.is_finite() {
                return Err(Error::NonFinite("finite difference".into()));
            }
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// `ReLU(W x + b)` in double-double, appending the activation pattern.
pub(crate) fn dd_relu_layer(layer: &Linear, x: &[Dd], pattern: &mut Vec<bool>) -> Vec<Dd> {
    (0..layer.out_dim())
        .map(|r| {
            let z = dd_affine(layer.weight.row(r), x, layer.bias[r]);
            pattern.push(z.is_positive());
            z.relu()
        })
        .collect()
}

pub(crate) fn dd_linear_layer(layer: &Linear, x: &[Dd]) -> Vec<Dd> {
    (0..layer.out_dim())
        .map(|r| dd_affine(layer.weight.row(r), x, layer.bias[r]))
        .collect()
}

pub(crate) fn dd_dot(a: &[Dd], b: &[f64]) -> Dd {
    a.iter()
        .zip(b)
        .fold(Dd::ZERO, |acc, (&x, &y)| acc + x * Dd::new(y))
}

/// Pre-activation of unit `r` of `layer`, in double-double.
pub(crate) fn dd_unit(layer: &Linear, x: &[Dd], r: usize) -> Dd {
    dd_affine(layer.weight.row(r), x, layer.bias[r])
}

/// Hidden activations and ReLU patterns of both layers.
type BaseActivations = (Vec<Dd>, Vec<bool>, Vec<Dd>, Vec<bool>);

/// Checks [`mlp_backward`] for the objective `output · output_gradient`.
pub fn finite_diff_check(params: &MlpParams, x: &[f64], output_gradient: &[f64]) -> Result<f64> {
    let (_, cache) = mlp_forward(params, x)?;
    let analytic = mlp_backward(params, &cache, output_gradient)?;
    let input: Vec<Dd> = x.iter().map(|&v| Dd::new(v)).collect();
    // Unperturbed hidden activations and their patterns.
    let mut base: Option<BaseActivations> = None;
    finite_diff_max_rel_error(params, &analytic, FD_STEP, |p, probe| {
        let (mut h1, mut p1, mut h2, mut p2) = match (&base, probe) {
            (Some(b), Some(_)) => b.clone(),
            _ => {
                let mut p1 = Vec::new();
                let h1 = dd_relu_layer(&p.l1, &input, &mut p1);
                let mut p2 = Vec::new();
                let h2 = dd_relu_layer(&p.l2, &h1, &mut p2);
                base = Some((h1.clone(), p1.clone(), h2.clone(), p2.clone()));
                (h1, p1, h2, p2)
            }
        };
        match probe {
            Some(pr) if pr.layer() == 0 => {
                let r = pr.row(&p.l1);
                let z = dd_unit(&p.l1, &input, r);
                (h1[r], p1[r]) = (z.relu(), z.is_positive());
                p2.clear();
                h2 = dd_relu_layer(&p.l2, &h1, &mut p2);
            }
            Some(pr) if pr.layer() == 1 => {
                let r = pr.row(&p.l2);
                let z = dd_unit(&p.l2, &h1, r);
                (h2[r], p2[r]) = (z.relu(), z.is_positive());
            }
            _ => {}
        }
        let y = dd_linear_layer(&p.l3, &h2);
        p1.extend(p2);
        Ok((dd_dot(&y, output_gradient), p1))
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::numerics::{Linear, Matrix};
    use crate::rng::seeded;

    #[test]
    fn random_small_network() {
        for seed in 0..10 {
            let mut rng = seeded(seed, 17);
            let net = MlpParams::new(4, 8, 8, 3, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let err = finite_diff_check(&net, &x, &g).unwrap();
            assert!(err < 1e-6, "seed {seed}: {err}");
        }
    }

    #[test]
    fn linear_regime_is_exact() {
        // Positive weights, biases and inputs keep every ReLU open.
        let mut rng = seeded(5, 1);
        let pos = |rows, cols, rng: &mut crate::rng::Rng| Linear {
            weight: Matrix::from_fn(rows, cols, |_, _| rng.gen_range(0.1..1.0)),
            bias: (0..rows).map(|_| rng.gen_range(0.1..1.0)).collect(),
        };
        let net =
            MlpParams::from_layers(pos(6, 3, &mut rng), pos(5, 6, &mut rng), pos(2, 5, &mut rng))
                .unwrap();
        let err = finite_diff_check(&net, &[0.3, 0.7, 0.2], &[1.0, -0.5]).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn pinned_unit_is_excluded() {
        let mut rng = seeded(6, 1);
        let mut net = MlpParams::new(3, 4, 4, 2, &mut rng);
        let x = [0.2, -0.4, 0.6];
        // Force hidden unit 0 of the first layer to a pre-activation of exactly 0.
        net.l1.weight.row_mut(0).fill(0.0);
        net.l1.bias[0] = 0.0;
        let (_, cache) = mlp_forward(&net, &x).unwrap();
        assert_eq!(cache.z1[0], 0.0);
        let err = finite_diff_check(&net, &x, &[1.0, 1.0]).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut rng = seeded(8, 1);
        let net = MlpParams::new(3, 5, 5, 2, &mut rng);
        let x = [0.1, 0.2, 0.3];
        let (_, cache) = mlp_forward(&net, &x).unwrap();
        let mut analytic = mlp_backward(&net, &cache, &[1.0, 0.0]).unwrap();
        analytic.tensors[5].set(0, 0, 0.5);
        let input: Vec<Dd> = x.iter().map(|&v| Dd::new(v)).collect();
        let err = finite_diff_max_rel_error(&net, &analytic, FD_STEP, |p, _| {
            let mut pattern = Vec::new();
            let h1 = dd_relu_layer(&p.l1, &input, &mut pattern);
            let h2 = dd_relu_layer(&p.l2, &h1, &mut pattern);
            let y = dd_linear_layer(&p.l3, &h2);
            Ok((y[0], pattern))
        })
        .unwrap();
        assert!(err > 0.1);
    }
}
