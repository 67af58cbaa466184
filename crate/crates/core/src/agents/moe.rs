//! Mixture-of-experts Q-network.
//!
//! ```text
//! h_s = ReLU(W_s φ_s + b_s)                  state encoder
//! h_o = ReLU(W_o φ_o + b_o)                  opponent encoder
//! Q_i = V_i ReLU(U_i h_s + c_i) + d_i        expert heads, i = 1..K
//! ω   = softmax(G_2 ReLU(G_1 h_o + g_1) + g_2)
//! q   = Σ_i ω_i Q_i
//! ```
//!
//! The gate only sees `h_o` and the experts only see `h_s`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::qnet::{QInput, QNetwork};
use crate::envs::Action;
use crate::numerics::dd::Dd;
use crate::numerics::gradcheck::{dd_linear_layer, dd_relu_layer, dd_unit};
use crate::numerics::{
    finite_diff_max_rel_error, relu_grad, relu_scalar, softmax, AdamState, GradientSet, Linear,
    Parameters, Probe, FD_STEP,
};
use crate::opponent::OPPONENT_FEATURES;
use crate::{Error, Result};

pub const STATE_HIDDEN: usize = 64;
pub const OPPONENT_HIDDEN: usize = 16;
pub const EXPERT_HIDDEN: usize = 64;
pub const GATE_HIDDEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoeShape {
    pub obs_dim: usize,
    pub experts: usize,
    pub state_hidden: usize,
    pub opponent_hidden: usize,
    pub expert_hidden: usize,
    pub gate_hidden: usize,
    pub actions: usize,
}

impl MoeShape {
    pub fn new(obs_dim: usize, experts: usize) -> Self {
        Self {
            obs_dim,
            experts,
            state_hidden: STATE_HIDDEN,
            opponent_hidden: OPPONENT_HIDDEN,
            expert_hidden: EXPERT_HIDDEN,
            gate_hidden: GATE_HIDDEN,
            actions: Action::COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    pub hidden: Linear,
    pub out: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeQNetwork {
    pub state_encoder: Linear,
    pub opponent_encoder: Linear,
    pub experts: Vec<Expert>,
    pub gate_hidden: Linear,
    pub gate_out: Linear,
    adam: AdamState,
}

#[derive(Debug, Clone)]
pub struct MoeCache {
    pub obs: Vec<f64>,
    pub opponent: Vec<f64>,
    pub z_s: Vec<f64>,
    pub h_s: Vec<f64>,
    pub z_o: Vec<f64>,
    pub h_o: Vec<f64>,
    pub z_e: Vec<Vec<f64>>,
    pub h_e: Vec<Vec<f64>>,
    pub expert_q: Vec<Vec<f64>>,
    pub z_g: Vec<f64>,
    pub h_g: Vec<f64>,
    pub weights: Vec<f64>,
}

fn relu_vec(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| relu_scalar(v)).collect()
}

fn mask(d: &mut [f64], z: &[f64]) {
    for (d, &z) in d.iter_mut().zip(z) {
        *d *= relu_grad(z);
    }
}

impl MoeQNetwork {
    pub fn new<R: Rng + ?Sized>(shape: MoeShape, rng: &mut R) -> Result<Self> {
        if shape.experts == 0 {
            return Err(Error::InvalidConfig {
                key: "num_experts",
                reason: "must be at least 1".into(),
            });
        }
        let state_encoder = Linear::uniform(shape.obs_dim, shape.state_hidden, rng);
        let opponent_encoder = Linear::uniform(OPPONENT_FEATURES, shape.opponent_hidden, rng);
        let experts = (0..shape.experts)
            .map(|_| Expert {
                hidden: Linear::uniform(shape.state_hidden, shape.expert_hidden, rng),
                out: Linear::uniform(shape.expert_hidden, shape.actions, rng),
            })
            .collect();
        let gate_hidden = Linear::uniform(shape.opponent_hidden, shape.gate_hidden, rng);
        let gate_out = Linear::uniform(shape.gate_hidden, shape.experts, rng);
        Self::from_parts(state_encoder, opponent_encoder, experts, gate_hidden, gate_out)
    }

    pub fn from_parts(
        state_encoder: Linear,
        opponent_encoder: Linear,
        experts: Vec<Expert>,
        gate_hidden: Linear,
        gate_out: Linear,
    ) -> Result<Self> {
        let bad = |what: &str, expected: usize, actual: usize| {
            Error::shape("MoeQNetwork", format!("{what} = {expected}"), actual)
        };
        if experts.is_empty() {
            return Err(Error::Empty("MoeQNetwork experts"));
        }
        if opponent_encoder.in_dim() != OPPONENT_FEATURES {
            return Err(bad("opponent input", OPPONENT_FEATURES, opponent_encoder.in_dim()));
        }
        let actions = experts[0].out.out_dim();
        for e in &experts {
            if e.hidden.in_dim() != state_encoder.out_dim() {
                return Err(bad("expert input", state_encoder.out_dim(), e.hidden.in_dim()));
            }
            if e.out.in_dim() != e.hidden.out_dim() {
                return Err(bad("expert output input", e.hidden.out_dim(), e.out.in_dim()));
            }
            if e.out.out_dim() != actions {
                return Err(bad("expert actions", actions, e.out.out_dim()));
            }
        }
        if gate_hidden.in_dim() != opponent_encoder.out_dim() {
            return Err(bad("gate input", opponent_encoder.out_dim(), gate_hidden.in_dim()));
        }
        if gate_out.in_dim() != gate_hidden.out_dim() {
            return Err(bad("gate output input", gate_hidden.out_dim(), gate_out.in_dim()));
        }
        if gate_out.out_dim() != experts.len() {
            return Err(bad("gate logits", experts.len(), gate_out.out_dim()));
        }
        let mut net = Self {
            state_encoder,
            opponent_encoder,
            experts,
            gate_hidden,
            gate_out,
            adam: AdamState::new(&[]),
        };
        net.adam = AdamState::new(&net.shapes());
        Ok(net)
    }

    /// Rebuilds a network from the tensor shape table used by checkpoints.
    pub fn zeros_from_shapes(shapes: &[(usize, usize)]) -> Result<Self> {
        if shapes.len() < 12 || !shapes.len().is_multiple_of(4) {
            return Err(Error::shape(
                "MoeQNetwork shape table",
                "4 tensors per layer pair, at least one expert",
                shapes.len(),
            ));
        }
        let linear = |i: usize| Linear::zeros(shapes[i].1, shapes[i].0);
        let k = (shapes.len() - 8) / 4;
        let experts = (0..k)
            .map(|i| Expert {
                hidden: linear(4 + 4 * i),
                out: linear(6 + 4 * i),
            })
            .collect();
        let net = Self::from_parts(linear(0), linear(2), experts, linear(4 + 4 * k), linear(6 + 4 * k))?;
        if net.shapes() != shapes {
            return Err(Error::shape(
                "MoeQNetwork shape table",
                format!("{:?}", net.shapes()),
                format!("{shapes:?}"),
            ));
        }
        Ok(net)
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.state_encoder.in_dim()
    }

    pub fn shape(&self) -> MoeShape {
        MoeShape {
            obs_dim: self.obs_dim(),
            experts: self.num_experts(),
            state_hidden: self.state_encoder.out_dim(),
            opponent_hidden: self.opponent_encoder.out_dim(),
            expert_hidden: self.experts[0].hidden.out_dim(),
            gate_hidden: self.gate_hidden.out_dim(),
            actions: self.experts[0].out.out_dim(),
        }
    }

    /// Gate weights ω for the given opponent features.
    pub fn gate(&self, opponent: &[f64]) -> Result<Vec<f64>> {
        if opponent.len() != OPPONENT_FEATURES {
            return Err(Error::shape("moe gate input", OPPONENT_FEATURES, opponent.len()));
        }
        let h_o = relu_vec(&self.opponent_encoder.forward(opponent));
        let h_g = relu_vec(&self.gate_hidden.forward(&h_o));
        softmax(&self.gate_out.forward(&h_g))
    }

    /// Per-expert Q-vectors for the given observation.
    pub fn expert_outputs(&self, obs: &[f64]) -> Result<Vec<Vec<f64>>> {
        if obs.len() != self.obs_dim() {
            return Err(Error::shape("moe state input", self.obs_dim(), obs.len()));
        }
        let h_s = relu_vec(&self.state_encoder.forward(obs));
        Ok(self
            .experts
            .iter()
            .map(|e| e.out.forward(&relu_vec(&e.hidden.forward(&h_s))))
            .collect())
    }
}

/// Returns `(q, ω, cache)`.
pub fn moe_forward(
    net: &MoeQNetwork,
    obs: &[f64],
    opponent: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, MoeCache)> {
    if obs.len() != net.obs_dim() {
        return Err(Error::shape("moe_forward state input", net.obs_dim(), obs.len()));
    }
    if opponent.len() != OPPONENT_FEATURES {
        return Err(Error::shape(
            "moe_forward opponent input",
            OPPONENT_FEATURES,
            opponent.len(),
        ));
    }
    let z_s = net.state_encoder.forward(obs);
    let h_s = relu_vec(&z_s);
    let z_o = net.opponent_encoder.forward(opponent);
    let h_o = relu_vec(&z_o);

    let k = net.num_experts();
    let mut z_e = Vec::with_capacity(k);
    let mut h_e = Vec::with_capacity(k);
    let mut expert_q = Vec::with_capacity(k);
    for e in &net.experts {
        let z = e.hidden.forward(&h_s);
        let h = relu_vec(&z);
        expert_q.push(e.out.forward(&h));
        z_e.push(z);
        h_e.push(h);
    }

    let z_g = net.gate_hidden.forward(&h_o);
    let h_g = relu_vec(&z_g);
    let weights = softmax(&net.gate_out.forward(&h_g))?;

    let actions = expert_q[0].len();
    let mut q = vec![0.0; actions];
    for (w, qi) in weights.iter().zip(&expert_q) {
        for (acc, v) in q.iter_mut().zip(qi) {
            *acc += w * v;
        }
    }
    let cache = MoeCache {
        obs: obs.to_vec(),
        opponent: opponent.to_vec(),
        z_s,
        h_s,
        z_o,
        h_o,
        z_e,
        h_e,
        expert_q,
        z_g,
        h_g,
        weights: weights.clone(),
    };
    Ok((q, weights, cache))
}

impl MoeQNetwork {
    /// Accumulates the gradient of `q · dq` into `acc`.
    pub fn backward_acc(&self, cache: &MoeCache, dq: &[f64], acc: &mut GradientSet) -> Result<()> {
        let k = self.num_experts();
        let actions = self.experts[0].out.out_dim();
        if dq.len() != actions {
            return Err(Error::shape("moe_backward q gradient", actions, dq.len()));
        }
        if cache.expert_q.len() != k || cache.h_s.len() != self.state_encoder.out_dim() {
            return Err(Error::shape(
                "moe_backward cache",
                format!("{k} experts"),
                cache.expert_q.len(),
            ));
        }
        acc.check_shapes(&self.shapes())?;
        let (enc, rest) = acc.tensors.split_at_mut(4);
        let (experts_g, gate_g) = rest.split_at_mut(4 * k);

        // Expert path: ∂q/∂Q_i = ω_i.
        let mut dh_s = vec![0.0; cache.h_s.len()];
        for (i, e) in self.experts.iter().enumerate() {
            let w = cache.weights[i];
            if w == 0.0 {
                continue;
            }
            let dq_i: Vec<f64> = dq.iter().map(|d| d * w).collect();
            let [g_uw, g_ub, g_vw, g_vb] = &mut experts_g[4 * i..4 * i + 4] else {
                unreachable!()
            };
            let mut dz = vec![0.0; e.hidden.out_dim()];
            e.out.backward_acc(&cache.h_e[i], &dq_i, g_vw, g_vb, Some(&mut dz));
            mask(&mut dz, &cache.z_e[i]);
            e.hidden.backward_acc(&cache.h_s, &dz, g_uw, g_ub, Some(&mut dh_s));
        }
        mask(&mut dh_s, &cache.z_s);
        {
            let [g_sw, g_sb, ..] = enc else { unreachable!() };
            self.state_encoder
                .backward_acc(&cache.obs, &dh_s, g_sw, g_sb, None);
        }

        // Gate path: ∂L/∂ω_i = dq · Q_i, then through the softmax Jacobian,
        // written as ω_j Σ_i ω_i (dω_j − dω_i) so equal experts give exact zeros.
        let d_omega: Vec<f64> = cache
            .expert_q
            .iter()
            .map(|qi| qi.iter().zip(dq).map(|(a, b)| a * b).sum())
            .collect();
        let d_logits: Vec<f64> = (0..k)
            .map(|j| {
                cache.weights[j]
                    * (0..k)
                        .map(|i| cache.weights[i] * (d_omega[j] - d_omega[i]))
                        .sum::<f64>()
            })
            .collect();
        let [g_hw, g_hb, g_ow, g_ob] = gate_g else { unreachable!() };
        let mut dz_g = vec![0.0; self.gate_hidden.out_dim()];
        self.gate_out
            .backward_acc(&cache.h_g, &d_logits, g_ow, g_ob, Some(&mut dz_g));
        mask(&mut dz_g, &cache.z_g);
        let mut dz_o = vec![0.0; self.opponent_encoder.out_dim()];
        self.gate_hidden
            .backward_acc(&cache.h_o, &dz_g, g_hw, g_hb, Some(&mut dz_o));
        mask(&mut dz_o, &cache.z_o);
        let [_, _, g_ew, g_eb] = enc else { unreachable!() };
        self.opponent_encoder
            .backward_acc(&cache.opponent, &dz_o, g_ew, g_eb, None);
        Ok(())
    }
}

/// Gradient of `loss_gradient · q_action` (the scalar loss routed through the
/// taken action only) with respect to every parameter.
pub fn moe_backward(
    net: &MoeQNetwork,
    cache: &MoeCache,
    action: Action,
    loss_gradient: f64,
) -> Result<GradientSet> {
    let mut dq = vec![0.0; net.experts[0].out.out_dim()];
    dq[action.index()] = loss_gradient;
    let mut grads = net.zero_grads();
    net.backward_acc(cache, &dq, &mut grads)?;
    Ok(grads)
}

impl Parameters for MoeQNetwork {
    fn layers(&self) -> Vec<&Linear> {
        let mut out = vec![&self.state_encoder, &self.opponent_encoder];
        for e in &self.experts {
            out.push(&e.hidden);
            out.push(&e.out);
        }
        out.push(&self.gate_hidden);
        out.push(&self.gate_out);
        out
    }

    fn layers_and_optimizer(&mut self) -> (Vec<&mut Linear>, &mut AdamState) {
        let mut out = vec![&mut self.state_encoder, &mut self.opponent_encoder];
        for e in &mut self.experts {
            out.push(&mut e.hidden);
            out.push(&mut e.out);
        }
        out.push(&mut self.gate_hidden);
        out.push(&mut self.gate_out);
        (out, &mut self.adam)
    }

    fn optimizer(&self) -> &AdamState {
        &self.adam
    }
}

impl QNetwork for MoeQNetwork {
    type Cache = MoeCache;

    fn forward(&self, input: QInput<'_>) -> Result<(Vec<f64>, MoeCache)> {
        moe_forward(self, input.obs, input.opponent).map(|(q, _, c)| (q, c))
    }

    fn backward_acc(&self, cache: &MoeCache, dq: &[f64], acc: &mut GradientSet) -> Result<()> {
        MoeQNetwork::backward_acc(self, cache, dq, acc)
    }
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

fn dd_vec(x: &[f64]) -> Vec<Dd> {
    x.iter().map(|&v| Dd::new(v)).collect()
}

/// Double-double activations of every block, with ReLU patterns.
#[derive(Clone)]
struct DdActivations {
    h_s: Vec<Dd>,
    p_s: Vec<bool>,
    h_o: Vec<Dd>,
    p_o: Vec<bool>,
    h_e: Vec<Vec<Dd>>,
    p_e: Vec<Vec<bool>>,
    expert_q: Vec<Vec<Dd>>,
    h_g: Vec<Dd>,
    p_g: Vec<bool>,
    omega: Vec<Dd>,
}

impl DdActivations {
    fn compute(net: &MoeQNetwork, obs: &[Dd], opponent: &[Dd]) -> Self {
        let mut p_s = Vec::new();
        let h_s = dd_relu_layer(&net.state_encoder, obs, &mut p_s);
        let mut p_o = Vec::new();
        let h_o = dd_relu_layer(&net.opponent_encoder, opponent, &mut p_o);
        let k = net.num_experts();
        let mut act = Self {
            h_s,
            p_s,
            h_o,
            p_o,
            h_e: vec![Vec::new(); k],
            p_e: vec![Vec::new(); k],
            expert_q: vec![Vec::new(); k],
            h_g: Vec::new(),
            p_g: Vec::new(),
            omega: Vec::new(),
        };
        for i in 0..k {
            act.expert(net, i);
        }
        act.gate(net);
        act
    }

    fn expert(&mut self, net: &MoeQNetwork, i: usize) {
        self.p_e[i].clear();
        self.h_e[i] = dd_relu_layer(&net.experts[i].hidden, &self.h_s, &mut self.p_e[i]);
        self.expert_q[i] = dd_linear_layer(&net.experts[i].out, &self.h_e[i]);
    }

    fn gate(&mut self, net: &MoeQNetwork) {
        self.p_g.clear();
        self.h_g = dd_relu_layer(&net.gate_hidden, &self.h_o, &mut self.p_g);
        self.gate_softmax(net);
    }

    fn gate_softmax(&mut self, net: &MoeQNetwork) {
        let logits = dd_linear_layer(&net.gate_out, &self.h_g);
        let max = logits.iter().copied().fold(logits[0], Dd::max);
        let exps: Vec<Dd> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total = exps.iter().copied().fold(Dd::ZERO, |a, b| a + b);
        self.omega = exps.into_iter().map(|e| e / total).collect();
    }

    /// Recomputes what a change to `probe` can affect.
    fn update(&mut self, net: &MoeQNetwork, obs: &[Dd], opponent: &[Dd], probe: Probe) {
        let k = net.num_experts();
        match probe.layer() {
            0 => {
                let r = probe.row(&net.state_encoder);
                let z = dd_unit(&net.state_encoder, obs, r);
                (self.h_s[r], self.p_s[r]) = (z.relu(), z.is_positive());
                for i in 0..k {
                    self.expert(net, i);
                }
            }
            1 => {
                let r = probe.row(&net.opponent_encoder);
                let z = dd_unit(&net.opponent_encoder, opponent, r);
                (self.h_o[r], self.p_o[r]) = (z.relu(), z.is_positive());
                self.gate(net);
            }
            l if l < 2 + 2 * k => {
                let i = (l - 2) / 2;
                let e = &net.experts[i];
                if l % 2 == 0 {
                    let r = probe.row(&e.hidden);
                    let z = dd_unit(&e.hidden, &self.h_s, r);
                    (self.h_e[i][r], self.p_e[i][r]) = (z.relu(), z.is_positive());
                    self.expert_q[i] = dd_linear_layer(&e.out, &self.h_e[i]);
                } else {
                    let r = probe.row(&e.out);
                    self.expert_q[i][r] = dd_unit(&e.out, &self.h_e[i], r);
                }
            }
            l if l == 2 + 2 * k => {
                let r = probe.row(&net.gate_hidden);
                let z = dd_unit(&net.gate_hidden, &self.h_o, r);
                (self.h_g[r], self.p_g[r]) = (z.relu(), z.is_positive());
                self.gate_softmax(net);
            }
            _ => self.gate_softmax(net),
        }
    }

    fn pattern(&self) -> Vec<bool> {
        let mut out = self.p_s.clone();
        out.extend(&self.p_o);
        for p in &self.p_e {
            out.extend(p);
        }
        out.extend(&self.p_g);
        out
    }
}

/// Maximum relative error between [`moe_backward`] and central differences
/// of `loss_gradient · q_action`, evaluated in double-double precision.
pub fn moe_finite_diff_check(
    net: &MoeQNetwork,
    obs: &[f64],
    opponent: &[f64],
    action: Action,
    loss_gradient: f64,
) -> Result<f64> {
    let (_, _, cache) = moe_forward(net, obs, opponent)?;
    let analytic = moe_backward(net, &cache, action, loss_gradient)?;
    let obs = dd_vec(obs);
    let opponent = dd_vec(opponent);
    let mut base: Option<DdActivations> = None;

    finite_diff_max_rel_error(net, &analytic, FD_STEP, |p, probe| {
        let act = match (&base, probe) {
            (Some(b), Some(probe)) => {
                let mut act = b.clone();
                act.update(p, &obs, &opponent, probe);
                act
            }
            _ => {
                let act = DdActivations::compute(p, &obs, &opponent);
                base = Some(act.clone());
                act
            }
        };
        let q_a = act
            .omega
            .iter()
            .zip(&act.expert_q)
            .fold(Dd::ZERO, |acc, (&w, q)| acc + w * q[action.index()]);
        Ok((q_a * Dd::new(loss_gradient), act.pattern()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn random_inputs(rng: &mut crate::rng::Rng, obs_dim: usize) -> (Vec<f64>, [f64; 6]) {
        let obs = (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut opp = [0.0; 6];
        let mut total = 0.0;
        for v in opp.iter_mut().take(5) {
            *v = rng.gen_range(0.0..1.0);
            total += *v;
        }
        for v in opp.iter_mut().take(5) {
            *v /= total;
        }
        opp[5] = f64::from(rng.gen_range(0..5u8)) / 4.0;
        (obs, opp)
    }

    fn small_shape(experts: usize) -> MoeShape {
        MoeShape {
            obs_dim: 4,
            experts,
            state_hidden: 8,
            opponent_hidden: 5,
            expert_hidden: 7,
            gate_hidden: 6,
            actions: 5,
        }
    }

    #[test]
    fn single_expert_is_passed_through() {
        let mut rng = seeded(0, 0);
        let net = MoeQNetwork::new(MoeShape::new(6, 1), &mut rng).unwrap();
        let (obs, opp) = random_inputs(&mut rng, 6);
        let (q, w, _) = moe_forward(&net, &obs, &opp).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_eq!(q, net.expert_outputs(&obs).unwrap()[0]);
    }

    #[test]
    fn identical_experts_make_the_gate_irrelevant() {
        let mut rng = seeded(1, 0);
        let mut net = MoeQNetwork::new(MoeShape::new(6, 4), &mut rng).unwrap();
        let first = net.experts[0].clone();
        for e in &mut net.experts {
            *e = first.clone();
        }
        let (obs, opp) = random_inputs(&mut rng, 6);
        let (q, w, cache) = moe_forward(&net, &obs, &opp).unwrap();
        let single = &net.expert_outputs(&obs).unwrap()[0];
        for (a, b) in q.iter().zip(single) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(w.iter().all(|&x| x > 0.0 && x < 1.0));

        let g = moe_backward(&net, &cache, Action::DOWN, 1.7).unwrap();
        // Opponent encoder (tensors 2, 3) and gate (last four) get nothing.
        let n = g.tensors.len();
        for t in [2, 3, n - 4, n - 3, n - 2, n - 1] {
            assert!(g.tensors[t].as_slice().iter().all(|&v| v == 0.0), "tensor {t}");
        }
    }

    #[test]
    fn zero_gate_is_uniform() {
        let mut rng = seeded(2, 0);
        let mut net = MoeQNetwork::new(MoeShape::new(8, 4), &mut rng).unwrap();
        net.gate_out.weight.fill(0.0);
        net.gate_out.bias.fill(0.0);
        let (obs, opp) = random_inputs(&mut rng, 8);
        let (_, w, _) = moe_forward(&net, &obs, &opp).unwrap();
        assert_eq!(w, vec![0.25; 4]);
    }

    #[test]
    fn saturated_gate_routes_gradient_to_one_expert() {
        let mut rng = seeded(3, 0);
        let mut net = MoeQNetwork::new(MoeShape::new(6, 4), &mut rng).unwrap();
        net.gate_out.weight.fill(0.0);
        net.gate_out.bias = vec![0.0, 0.0, 1000.0, 0.0];
        let (obs, opp) = random_inputs(&mut rng, 6);
        let (_, w, cache) = moe_forward(&net, &obs, &opp).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0]);
        let g = moe_backward(&net, &cache, Action::RIGHT, -0.8).unwrap();
        for i in 0..4 {
            let expert_zero = g.tensors[4 + 4 * i..8 + 4 * i]
                .iter()
                .all(|t| t.as_slice().iter().all(|&v| v == 0.0));
            assert_eq!(expert_zero, i != 2, "expert {i}");
        }
        assert!(g.tensors[0].as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = seeded(seed, 4);
            let net = MoeQNetwork::new(small_shape(3), &mut rng).unwrap();
            let (obs, opp) = random_inputs(&mut rng, 4);
            let action = Action::new(rng.gen_range(0..5)).unwrap();
            let err = moe_finite_diff_check(&net, &obs, &opp, action, 0.9).unwrap();
            assert!(err < 1e-6, "seed {seed}: {err}");
        }
    }

    #[test]
    fn oracle_flags_a_wrong_gradient() {
        let mut rng = seeded(5, 4);
        let mut net = MoeQNetwork::new(small_shape(2), &mut rng).unwrap();
        let (obs, opp) = random_inputs(&mut rng, 4);
        let (_, _, cache) = moe_forward(&net, &obs, &opp).unwrap();
        let clean = moe_backward(&net, &cache, Action::UP, 1.0).unwrap();
        // Analytic gradient of the original network, checked against a
        // network whose gate has moved.
        net.gate_out.bias[0] += 0.5;
        let err = moe_finite_diff_check(&net, &obs, &opp, Action::UP, 1.0).unwrap();
        assert!(err < 1e-6);
        let err = finite_diff_max_rel_error(&net, &clean, FD_STEP, |p, _| {
            let (q, _, c) = moe_forward(p, &obs, &opp)?;
            let mut pattern: Vec<bool> = c.z_s.iter().map(|&z| z > 0.0).collect();
            pattern.extend(c.z_o.iter().chain(&c.z_g).map(|&z| z > 0.0));
            pattern.extend(c.z_e.iter().flatten().map(|&z| z > 0.0));
            Ok((Dd::new(q[Action::UP.index()]), pattern))
        })
        .unwrap();
        assert!(err > 1e-3, "{err}");
    }

    #[test]
    fn shape_table_round_trip() {
        let mut rng = seeded(6, 0);
        let net = MoeQNetwork::new(MoeShape::new(19, 3), &mut rng).unwrap();
        let empty = MoeQNetwork::zeros_from_shapes(&net.shapes()).unwrap();
        assert_eq!(empty.shape(), net.shape());
        assert!(MoeQNetwork::zeros_from_shapes(&net.shapes()[..8]).is_err());
    }

    #[test]
    fn rejects_wrong_inputs() {
        let mut rng = seeded(7, 0);
        let net = MoeQNetwork::new(MoeShape::new(6, 2), &mut rng).unwrap();
        assert!(moe_forward(&net, &[0.0; 5], &[0.2; 6]).is_err());
        assert!(moe_forward(&net, &[0.0; 6], &[0.2; 5]).is_err());
        assert!(MoeQNetwork::new(MoeShape::new(6, 0), &mut rng).is_err());
    }
}
