//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use oppmod_core::agents::{
    ddqn_target, moe_finite_diff_check, moe_forward, tabular_q_update, DdqnAgent, MoeQNetwork,
    MoeShape, Network, QTable,
};
use oppmod_core::envs::{self, Action, Physics, ScenarioKind, WorldState, DECOY_COLOR, GOAL_COLOR};
use oppmod_core::numerics::{finite_diff_check, Linear, MlpParams};
use oppmod_core::replay::{PerBuffer, PerConfig, Transition};
use oppmod_core::rng::seeded;
use oppmod_core::training::{evaluate, rolling_score, run_ali, train_vs_fixed, Preset, RunConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_opponent_features(rng: &mut impl Rng) -> [f64; 6] {
    let mut f = [0.0; 6];
    let counts: Vec<u32> = (0..5).map(|_| rng.gen_range(0..10)).collect();
    let total: u32 = counts.iter().sum::<u32>().max(1);
    for i in 0..5 {
        f[i] = f64::from(counts[i]) / f64::from(total);
    }
    f[5] = f64::from(rng.gen_range(0..5u32)) / 4.0;
    f
}

fn c1_gradients() -> Outcome {
    let mut worst_plain: f64 = 0.0;
    let mut worst_moe: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = seeded(seed, 1000);
        let plain = MlpParams::new(8, 64, 128, 5, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let og: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = finite_diff_check(&plain, &x, &og).map_err(|e| e.to_string())?;
        worst_plain = worst_plain.max(err);

        let moe = MoeQNetwork::new(MoeShape::new(6, 4), &mut rng).map_err(|e| e.to_string())?;
        let obs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let opp = random_opponent_features(&mut rng);
        let action = Action::new(rng.gen_range(0..5)).unwrap();
        let g = rng.gen_range(-2.0..2.0);
        let err = moe_finite_diff_check(&moe, &obs, &opp, action, g).map_err(|e| e.to_string())?;
        worst_moe = worst_moe.max(err);
    }
    check(
        worst_plain < 1e-6 && worst_moe < 1e-6,
        format!("20 seeds, max relative error plain {worst_plain:.2e}, MOE (all groups) {worst_moe:.2e}, bound 1e-6"),
    )
}

fn dummy_transition() -> Transition {
    Transition {
        state: vec![0.0],
        action: Action::NOOP,
        reward: 0.0,
        next_state: vec![0.0],
        done: false,
        opponent_action: Action::NOOP,
        opponent_features: [0.0; 6],
        next_opponent_features: [0.0; 6],
    }
}

fn c2_per() -> Outcome {
    let config = |capacity| PerConfig {
        capacity,
        alpha: 0.6,
        beta: 0.4,
        epsilon: 1e-5,
        annealing_steps: 100_000,
    };
    // Fixed leaf priorities via TD errors on each slot.
    let mut buf = PerBuffer::new(config(6)).map_err(|e| e.to_string())?;
    for _ in 0..6 {
        buf.push(dummy_transition());
    }
    let td = [0.05, 0.3, 1.0, 2.5, 0.7, 4.0];
    let mut rng = seeded(7, 2000);
    let mut pending: Vec<usize> = (0..6).collect();
    while !pending.is_empty() {
        let batch = buf.sample(1, &mut rng).map_err(|e| e.to_string())?;
        let slot = batch.indices[0].slot;
        if let Some(pos) = pending.iter().position(|&s| s == slot) {
            buf.update_priorities(&batch.indices, &[td[slot]]).map_err(|e| e.to_string())?;
            pending.remove(pos);
        }
    }
    let raw: Vec<f64> = td.iter().map(|d| (d + 1e-5f64).powf(0.6)).collect();
    let total: f64 = raw.iter().sum();
    let draws = 100_000;
    let mut counts = [0usize; 6];
    for _ in 0..draws {
        counts[buf.sample(1, &mut rng).map_err(|e| e.to_string())?.indices[0].slot] += 1;
    }
    let dev = (0..6)
        .map(|s| (counts[s] as f64 / draws as f64 - raw[s] / total).abs())
        .fold(0.0, f64::max);

    let mut big = PerBuffer::new(config(4096)).map_err(|e| e.to_string())?;
    for _ in 0..3000 {
        big.push(dummy_transition());
    }
    for _ in 0..10_000 {
        let batch = big.sample(1, &mut rng).map_err(|e| e.to_string())?;
        let delta: f64 = rng.gen_range(-10.0..10.0);
        big.update_priorities(&batch.indices, &[delta]).map_err(|e| e.to_string())?;
    }
    let drift = big.tree().max_inconsistency();
    check(
        dev <= 0.01 && drift <= 1e-9,
        format!("max |freq - p| {dev:.4} over 1e5 draws (bound 0.01); tree inconsistency {drift:.1e} after 1e4 updates (bound 1e-9)"),
    )
}

fn c3_tabular() -> Outcome {
    const GAMMA: f64 = 0.9;
    // Action a moves to state a.
    let reward = [[0.0, 1.0], [2.0, 0.0]];
    // Hand solution: optimal policy 0→1, 1→0, so V0 = 1 + 0.9 V1 and
    // V1 = 2 + 0.9 V0, giving V = (280/19, 290/19).
    let v = [280.0 / 19.0, 290.0 / 19.0];
    let q_star = [
        [reward[0][0] + GAMMA * v[0], reward[0][1] + GAMMA * v[1]],
        [reward[1][0] + GAMMA * v[0], reward[1][1] + GAMMA * v[1]],
    ];
    let mut table = QTable::zeros(2, 2);
    for n in 1..=10_000usize {
        let (s, a) = (((n - 1) / 2) % 2, (n - 1) % 2);
        tabular_q_update(&mut table, s, a, reward[s][a], a, 0.5, GAMMA).map_err(|e| e.to_string())?;
        let err = (0..4)
            .map(|i| (table.get(i / 2, i % 2) - q_star[i / 2][i % 2]).abs())
            .fold(0.0, f64::max);
        if err < 1e-3 {
            return Ok(format!("within 1e-3 of Q* after {n} updates (limit 10000)"));
        }
    }
    Err("no convergence within 10000 updates".into())
}

fn constant_net(bias: [f64; 5]) -> MlpParams {
    let mut out = Linear::zeros(1, 5);
    out.bias = bias.to_vec();
    MlpParams::from_layers(Linear::zeros(1, 1), Linear::zeros(1, 1), out).unwrap()
}

fn c4_double_q() -> Outcome {
    let online = constant_net([0.1, 0.0, 0.9, 0.3, 0.2]);
    let target = constant_net([0.8, 0.1, 0.5, 0.2, 0.3]);
    let mut agent = DdqnAgent::new(online, 0.999, 1e-3, true).map_err(|e| e.to_string())?;
    agent.target = target;
    let t = Transition {
        state: vec![0.0],
        action: Action::NOOP,
        reward: 1.0,
        next_state: vec![0.0],
        done: false,
        opponent_action: Action::NOOP,
        opponent_features: [0.2, 0.2, 0.2, 0.2, 0.2, 0.5],
        next_opponent_features: [0.2, 0.2, 0.2, 0.2, 0.2, 0.5],
    };
    let y = agent.target_for(&t).map_err(|e| e.to_string())?;
    let pure = ddqn_target(1.0, false, 0.999, &[0.1, 0.0, 0.9, 0.3, 0.2], &[0.8, 0.1, 0.5, 0.2, 0.3], true);
    check(
        y == 1.4995 && pure == 1.4995,
        format!("target {y} (online argmax 2, target argmax 0), expected 1.4995"),
    )
}

fn c5_environment() -> Outcome {
    let physics = Physics::default();
    let mut problems = Vec::new();
    for (kind, dims) in [
        (ScenarioKind::SimplePush, (19, 8)),
        (ScenarioKind::SimpleAdversary, (6, 4)),
    ] {
        for seed in 0..5 {
            let run = |seed: u64| -> Vec<(Vec<f64>, Vec<f64>, f64, f64)> {
                let mut rng = seeded(seed, 3000);
                let mut state = envs::reset(kind, seed);
                let mut out = Vec::new();
                let (g, a) = envs::observe(&state);
                out.push((g, a, 0.0, 0.0));
                for _ in 0..physics.episode_length {
                    let ag = Action::new(rng.gen_range(0..5)).unwrap();
                    let aa = Action::new(rng.gen_range(0..5)).unwrap();
                    let o = envs::step(&state, &physics, ag, aa).unwrap();
                    out.push((o.good_obs.clone(), o.adversary_obs.clone(), o.reward_good, o.reward_adversary));
                    state = o.state;
                }
                out
            };
            let first = run(seed);
            if first.iter().any(|(g, a, _, _)| (g.len(), a.len()) != dims) {
                problems.push(format!("{kind} seed {seed}: observation dims differ from {dims:?}"));
            }
            if run(seed) != first {
                problems.push(format!("{kind} seed {seed}: trajectory not reproducible"));
            }
        }
    }
    let push = WorldState {
        kind: ScenarioKind::SimplePush,
        agent_pos: [-3.0, -4.0],
        agent_vel: [0.0; 2],
        adversary_pos: [0.0, 0.0],
        adversary_vel: [0.0; 2],
        landmarks: vec![[3.0, 4.0], [9.0, 9.0]],
        landmark_colors: vec![GOAL_COLOR, DECOY_COLOR],
        goal_index: 0,
        step_count: 0,
    };
    let (rg, ra) = envs::reward_push(&push);
    if (rg, ra) != (-10.0, 5.0) {
        problems.push(format!("push golden rewards ({rg}, {ra}), expected (-10, 5)"));
    }
    let adv = WorldState {
        kind: ScenarioKind::SimpleAdversary,
        agent_pos: [1.0, 1.0],
        adversary_pos: [1.0, 3.0],
        landmarks: vec![[1.0, 1.0], [5.0, 5.0]],
        ..push.clone()
    };
    let (rg, ra) = envs::reward_adversary_scenario(&adv);
    if (rg, ra) != (2.0, -2.0) {
        problems.push(format!("adversary golden rewards ({rg}, {ra}), expected (2, -2)"));
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "dims (19, 8) and (6, 4) on every step; r_adv = -5 + 10 = 5; trajectories reproducible".into()
        } else {
            problems.join("; ")
        },
    )
}

fn c6_moe_invariants() -> Outcome {
    let mut rng = seeded(11, 4000);
    let net = MoeQNetwork::new(MoeShape::new(19, 4), &mut rng).map_err(|e| e.to_string())?;
    let mut worst_sum: f64 = 0.0;
    let mut gate_moves = 0;
    let mut expert_moves = 0;
    for _ in 0..100 {
        let obs1: Vec<f64> = (0..19).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let obs2: Vec<f64> = (0..19).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let opp1 = random_opponent_features(&mut rng);
        let opp2 = random_opponent_features(&mut rng);
        let (_, w11, c11) = moe_forward(&net, &obs1, &opp1).map_err(|e| e.to_string())?;
        let (_, w21, _) = moe_forward(&net, &obs2, &opp1).map_err(|e| e.to_string())?;
        let (_, _, c12) = moe_forward(&net, &obs1, &opp2).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((w11.iter().sum::<f64>() - 1.0).abs());
        if w11 != w21 {
            gate_moves += 1;
        }
        if c11.expert_q != c12.expert_q {
            expert_moves += 1;
        }
    }
    let single = MoeQNetwork::new(MoeShape::new(19, 1), &mut rng).map_err(|e| e.to_string())?;
    let mut k1_exact = true;
    for _ in 0..100 {
        let obs: Vec<f64> = (0..19).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let opp = random_opponent_features(&mut rng);
        let (q, w, _) = moe_forward(&single, &obs, &opp).map_err(|e| e.to_string())?;
        k1_exact &= w == [1.0] && q == single.expert_outputs(&obs).map_err(|e| e.to_string())?[0];
    }
    check(
        worst_sum <= 1e-12 && gate_moves == 0 && expert_moves == 0 && k1_exact,
        format!(
            "|sum w - 1| max {worst_sum:.1e}; gate changed under state perturbation {gate_moves}/100; experts changed under opponent perturbation {expert_moves}/100; K=1 exact: {k1_exact}"
        ),
    )
}

fn c7_plateau() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..5 {
        let mut config = RunConfig::preset(ScenarioKind::SimplePush, Preset::Desk);
        config.seed = seed;
        let out = run_ali(&config).map_err(|e| e.to_string())?;
        let mut parts = Vec::new();
        for (name, rewards) in [
            ("good", out.records.iter().map(|r| r.reward_good).collect::<Vec<_>>()),
            ("adv", out.records.iter().map(|r| r.reward_adversary).collect()),
        ] {
            let r = rolling_score(&rewards, 100).map_err(|e| e.to_string())?;
            let n = r.len();
            let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let range = hi - lo;
            let drift = (r[n - 1] - r[n - 51]).abs();
            let tail = &r[n - 51..];
            let band = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - tail.iter().cloned().fold(f64::INFINITY, f64::min);
            ok &= drift < 0.2 * range;
            parts.push(format!("{name} {:.3} (band {:.3})", drift / range, band / range));
        }
        lines.push(format!("seed {seed}: {}", parts.join(", ")));
    }
    check(
        ok,
        format!("final-50 drift / range, bound 0.2: {}", lines.join("; ")),
    )
}

fn c8_directional() -> Outcome {
    let mut primary_wins = 0;
    let mut opponent_lower = 0;
    let mut rows = Vec::new();
    for seed in 0..5 {
        let mut config = RunConfig::preset(ScenarioKind::SimpleAdversary, Preset::Desk);
        config.seed = seed;
        let ali = run_ali(&config).map_err(|e| e.to_string())?;
        // The good agent is primary here, so the adversary is frozen.
        let opponent = Network::Plain(ali.adversary);
        let mut means = Vec::new();
        for use_moe in [true, false] {
            let mut c = config.clone();
            c.agent.use_moe = use_moe;
            let main = train_vs_fixed(&c, &opponent).map_err(|e| e.to_string())?;
            let eval = evaluate(&main.primary, &opponent, &c).map_err(|e| e.to_string())?;
            means.push((eval.good.mean, eval.adversary.mean));
        }
        let ((moe_g, moe_a), (plain_g, plain_a)) = (means[0], means[1]);
        primary_wins += usize::from(moe_g > plain_g);
        opponent_lower += usize::from(moe_a <= plain_a);
        rows.push(format!(
            "seed {seed}: agent {moe_g:.3} vs {plain_g:.3}, opponent {moe_a:.3} vs {plain_a:.3}"
        ));
    }
    println!(
        "    info: opponent mean higher under DDQN-MOE in {}/5 seeds",
        5 - opponent_lower
    );
    check(
        primary_wins >= 4 && opponent_lower >= 3,
        format!(
            "MOE agent mean > DDQN in {primary_wins}/5 (need 4); opponent mean under MOE <= under DDQN in {opponent_lower}/5 (need 3) [MOE vs DDQN] {}",
            rows.join("; ")
        ),
    )
}

fn oppmod(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_oppmod"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "oppmod {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c9_reproducible_cli() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let config = root.join("run.toml");
    std::fs::write(
        &config,
        "scenario = \"simple_adversary\"\npreset = \"desk\"\nseed = 3\n\n[hyperparameters]\ntotal_training_episodes = 8\nreplay_start_size = 100\ntotal_testing_episodes = 20\n\n[protocol]\ncheckpoint_interval = 4\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = config.to_str().unwrap();
    let mut shows = Vec::new();
    for run in ["a", "b"] {
        let dir = root.join(run);
        let ali = dir.join("ali");
        let main = dir.join("main");
        let eval = dir.join("eval");
        oppmod(&["train-ali", "--config", cfg, "--out", ali.to_str().unwrap(), "--json"])?;
        oppmod(&[
            "train-main",
            "--config",
            cfg,
            "--opponent",
            ali.join("adversary.ckpt").to_str().unwrap(),
            "--out",
            main.to_str().unwrap(),
        ])?;
        oppmod(&[
            "eval",
            "--config",
            cfg,
            main.join("good.ckpt").to_str().unwrap(),
            ali.join("adversary.ckpt").to_str().unwrap(),
            "--out",
            eval.to_str().unwrap(),
        ])?;
        shows.push(oppmod(&["show-config", "simple_push", "--preset", "desk"])?);
    }
    let a = files(&root.join("a"));
    let b = files(&root.join("b"));
    let names: Vec<String> = a.iter().map(|(p, _)| p.display().to_string()).collect();
    let same = a == b && shows[0] == shows[1];
    let kinds = ["metrics.csv", "eval.csv", "rolling_scores.svg", ".ckpt"];
    let covered = kinds.iter().all(|k| names.iter().any(|n| n.ends_with(k)));
    check(
        same && covered,
        format!("{} files from train-ali, train-main and eval compared across two invocations; identical: {same}", a.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", c1_gradients),
        ("PER distribution and sum-tree consistency", c2_per),
        ("tabular Bellman oracle", c3_tabular),
        ("Double-Q target semantics", c4_double_q),
        ("environment contract", c5_environment),
        ("MOE structural invariants", c6_moe_invariants),
        ("equilibrium plateau, SimplePush ALI", c7_plateau),
        ("directional MOE vs DDQN, SimpleAdversary", c8_directional),
        ("CLI reproducibility", c9_reproducible_cli),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}) [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}) [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
