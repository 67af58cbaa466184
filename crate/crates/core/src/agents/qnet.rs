use crate::numerics::{mlp_forward, GradientSet, MlpCache, MlpParams, Parameters};
use crate::opponent::OPPONENT_FEATURES;
use crate::Result;

/// What a Q-network sees at one time step.
#[derive(Debug, Clone, Copy)]
pub struct QInput<'a> {
    pub obs: &'a [f64],
    pub opponent: &'a [f64; OPPONENT_FEATURES],
}

/// A trainable map from [`QInput`] to one Q-value per action.
pub trait QNetwork: Parameters + Clone {
    type Cache;

    fn forward(&self, input: QInput<'_>) -> Result<(Vec<f64>, Self::Cache)>;

    fn q_values(&self, input: QInput<'_>) -> Result<Vec<f64>> {
        self.forward(input).map(|(q, _)| q)
    }

    /// Accumulates the gradient of `q · dq` into `acc`.
    fn backward_acc(&self, cache: &Self::Cache, dq: &[f64], acc: &mut GradientSet) -> Result<()>;
}

/// The plain network ignores opponent features.
impl QNetwork for MlpParams {
    type Cache = MlpCache;

    fn forward(&self, input: QInput<'_>) -> Result<(Vec<f64>, MlpCache)> {
        mlp_forward(self, input.obs)
    }

    fn backward_acc(&self, cache: &MlpCache, dq: &[f64], acc: &mut GradientSet) -> Result<()> {
        MlpParams::backward_acc(self, cache, dq, acc)
    }
}
