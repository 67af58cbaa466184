use serde::{Deserialize, Serialize};

use super::GradientSet;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            m: shapes.iter().map(|(r, c)| vec![0.0; r * c]).collect(),
            v: shapes.iter().map(|(r, c)| vec![0.0; r * c]).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub(super) fn apply<'a>(
        &mut self,
        tensors: impl Iterator<Item = &'a mut [f64]>,
        grads: &GradientSet,
        lr: f64,
    ) -> Result<()> {
        if grads.tensors.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                self.m.len(),
                grads.tensors.len(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (((param, g), m), v) in tensors
            .zip(&grads.tensors)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let g = g.as_slice();
            if param.len() != g.len() || m.len() != g.len() {
                return Err(Error::shape("adam_step tensor", param.len(), g.len()));
            }
            for i in 0..g.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Linear, Matrix, Parameters};
    use super::*;

    /// A single scalar parameter (1x1 weight, zero-width bias is not allowed,
    /// so the bias is a second scalar that always receives zero gradient).
    struct Scalar {
        layer: Linear,
        adam: AdamState,
    }

    impl Scalar {
        fn new(w: f64) -> Self {
            let mut layer = Linear::zeros(1, 1);
            layer.weight.set(0, 0, w);
            let adam = AdamState::new(&[(1, 1), (1, 1)]);
            Self { layer, adam }
        }
        fn value(&self) -> f64 {
            self.layer.weight.get(0, 0)
        }
        fn grad(g: f64) -> GradientSet {
            let mut w = Matrix::zeros(1, 1);
            w.set(0, 0, g);
            GradientSet {
                tensors: vec![w, Matrix::zeros(1, 1)],
            }
        }
    }

    impl Parameters for Scalar {
        fn layers(&self) -> Vec<&Linear> {
            vec![&self.layer]
        }
        fn layers_and_optimizer(&mut self) -> (Vec<&mut Linear>, &mut AdamState) {
            (vec![&mut self.layer], &mut self.adam)
        }
        fn optimizer(&self) -> &AdamState {
            &self.adam
        }
    }

    #[test]
    fn zero_gradient_leaves_everything_unchanged() {
        let mut p = Scalar::new(0.7);
        p.adam_step(&Scalar::grad(0.0), 0.01).unwrap();
        assert_eq!(p.value(), 0.7);
        assert_eq!(p.adam.first_moments()[0], vec![0.0]);
        assert_eq!(p.adam.second_moments()[0], vec![0.0]);
        assert_eq!(p.adam.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        for g in [3.0, -0.25, 1e-3] {
            let lr = 0.01;
            let mut p = Scalar::new(0.0);
            p.adam_step(&Scalar::grad(g), lr).unwrap();
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
            let expected = -lr * g / (g.abs() + ADAM_EPS);
            assert!((p.value() - expected).abs() < 1e-15);
            assert!((p.value() + lr * g.signum()).abs() < lr * 1e-5);
        }
    }

    #[test]
    fn opposite_gradients_turn_back_toward_start() {
        let lr = 0.1;
        let g = 2.0;
        let mut p = Scalar::new(1.0);
        p.adam_step(&Scalar::grad(g), lr).unwrap();
        let after_one = p.value();
        p.adam_step(&Scalar::grad(-g), lr).unwrap();
        let after_two = p.value();

        // Closed form for the second step:
        // m2 = b1*(1-b1)g - (1-b1)g, v2 = (b2*(1-b2) + (1-b2)) g^2.
        let m2 = ADAM_BETA1 * (1.0 - ADAM_BETA1) * g - (1.0 - ADAM_BETA1) * g;
        let v2 = (ADAM_BETA2 * (1.0 - ADAM_BETA2) + (1.0 - ADAM_BETA2)) * g * g;
        let m_hat = m2 / (1.0 - ADAM_BETA1 * ADAM_BETA1);
        let v_hat = v2 / (1.0 - ADAM_BETA2 * ADAM_BETA2);
        let second = -lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        assert!((after_two - (after_one + second)).abs() < 1e-14);

        let second_step = after_two - after_one;
        assert!(second_step > 0.0, "second step must head back toward the start");
        assert!(second_step < 0.1 * lr);
    }

    #[test]
    fn rejects_bad_input() {
        let mut p = Scalar::new(0.0);
        assert!(matches!(
            p.adam_step(&Scalar::grad(f64::NAN), 0.1),
            Err(Error::NonFinite(_))
        ));
        assert!(p.adam_step(&Scalar::grad(1.0), 0.0).is_err());
        let wrong = GradientSet::zeros(&[(2, 1)]);
        assert!(p.adam_step(&wrong, 0.1).is_err());
        assert_eq!(p.adam.step(), 0);
    }
}
