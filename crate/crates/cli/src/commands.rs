use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use oppmod_core::agents::Network;
use oppmod_core::envs::Role;
use oppmod_core::training::{
    evaluate, metrics_csv, rolling_score, run_ali, train_vs_fixed, EpisodeRecord, Evaluation,
    Preset, RunConfig, Snapshot,
};

use crate::checkpoint::Checkpoint;
use crate::plot::{line_chart, Series};

pub const EVAL_HEADER: &str = "algorithm,mean_agent,max_agent,mean_adversary,max_adversary";

#[derive(Debug, Parser)]
#[command(name = "oppmod", version, about = "Opponent-modeling DDQN on particle environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a good agent and an adversary against each other from scratch.
    TrainAli(TrainArgs),
    /// Train a fresh primary agent against a frozen opponent checkpoint.
    TrainMain {
        #[command(flatten)]
        train: TrainArgs,
        /// Checkpoint of the frozen opponent.
        #[arg(long)]
        opponent: PathBuf,
    },
    /// Play greedy test episodes between a good-agent and an adversary checkpoint.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// The two checkpoints, one per role, in either order.
        #[arg(num_args = 2, required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective configuration of a preset.
    ShowConfig {
        /// simple_push or simple_adversary.
        scenario: String,
        #[arg(long, default_value = "paper", value_parser = parse_preset)]
        preset: Preset,
        #[arg(long)]
        seed: Option<u64>,
        /// Print JSON instead of TOML.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the preset named in the config file.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each checkpoint as JSON.
    #[arg(long)]
    pub json: bool,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::parse(s).map_err(|e| e.to_string())
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = crate::config::load(&self.config, self.preset)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainAli(args) => cmd_train_ali(&args),
        Command::TrainMain { train, opponent } => cmd_train_main(&train, &opponent),
        Command::Eval {
            run,
            checkpoints,
            out,
        } => cmd_eval(&run, &checkpoints[0], &checkpoints[1], &out),
        Command::ShowConfig {
            scenario,
            preset,
            seed,
            json,
        } => {
            print!("{}", show_config(&scenario, preset, seed, json)?);
            Ok(())
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn save_checkpoint(ck: &Checkpoint, path: &Path, json: bool) -> Result<()> {
    write(path, ck.to_bytes())?;
    if json {
        write(&path.with_extension("json"), ck.to_json()?)?;
    }
    Ok(())
}

fn write_run_outputs(out: &Path, config: &RunConfig, records: &[EpisodeRecord], title: &str) -> Result<()> {
    let window = config.protocol.score_window;
    write(&out.join("config.toml"), crate::config::to_toml(config)?)?;
    write(&out.join("metrics.csv"), metrics_csv(records, window)?)?;
    let good: Vec<f64> = records.iter().map(|r| r.reward_good).collect();
    let adv: Vec<f64> = records.iter().map(|r| r.reward_adversary).collect();
    let good = rolling_score(&good, window)?;
    let adv = rolling_score(&adv, window)?;
    let svg = line_chart(
        title,
        "episode",
        &format!("score (rolling mean over {window} episodes)"),
        &[
            Series {
                label: "good agent",
                values: &good,
            },
            Series {
                label: "adversary",
                values: &adv,
            },
        ],
    );
    write(&out.join("rolling_scores.svg"), svg)
}

fn write_snapshots(out: &Path, config: &RunConfig, snapshots: &[Snapshot], json: bool) -> Result<()> {
    if snapshots.is_empty() {
        return Ok(());
    }
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for snap in snapshots {
        for (role, net) in &snap.networks {
            let ck = Checkpoint::new(net, *role, config, snap.episode)?;
            let path = dir.join(format!("episode_{:06}_{role}.ckpt", snap.episode));
            save_checkpoint(&ck, &path, json)?;
        }
    }
    Ok(())
}

pub fn cmd_train_ali(args: &TrainArgs) -> Result<()> {
    let config = args.run.load()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outcome = run_ali(&config)?;
    let episodes = config.hyperparameters.total_training_episodes;
    for (role, net) in [
        (Role::Good, Network::Plain(outcome.good)),
        (Role::Adversary, Network::Plain(outcome.adversary)),
    ] {
        let ck = Checkpoint::new(&net, role, &config, episodes)?;
        save_checkpoint(&ck, &args.out.join(format!("{role}.ckpt")), args.json)?;
    }
    write_snapshots(&args.out, &config, &outcome.snapshots, args.json)?;
    let title = format!("Adversarial learning initialization, {}", config.scenario);
    write_run_outputs(&args.out, &config, &outcome.records, &title)
}

pub fn cmd_train_main(args: &TrainArgs, opponent_path: &Path) -> Result<()> {
    let config = args.run.load()?;
    let opponent = Checkpoint::load(opponent_path)?;
    ensure!(
        opponent.scenario == config.scenario,
        "opponent checkpoint is for {} but the config scenario is {}",
        opponent.scenario,
        config.scenario
    );
    let primary_role = config.agent.primary_role;
    ensure!(
        opponent.role == primary_role.other(),
        "opponent checkpoint plays the {} but the primary agent is also the {}",
        opponent.role,
        primary_role
    );
    let opponent_net = opponent.network()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let outcome = train_vs_fixed(&config, &opponent_net)?;
    let episodes = config.hyperparameters.total_training_episodes;
    let ck = Checkpoint::new(&outcome.primary, primary_role, &config, episodes)?;
    save_checkpoint(&ck, &args.out.join(format!("{primary_role}.ckpt")), args.json)?;
    write_snapshots(&args.out, &config, &outcome.snapshots, args.json)?;
    let title = format!(
        "{} ({}) against a frozen {}, {}",
        primary_role,
        outcome.primary.kind(),
        primary_role.other(),
        config.scenario
    );
    write_run_outputs(&args.out, &config, &outcome.records, &title)
}

/// Evaluation table row; the algorithm is the primary agent's kind.
pub fn eval_csv(algorithm: &str, eval: &Evaluation) -> String {
    format!(
        "{EVAL_HEADER}\n{algorithm},{},{},{},{}\n",
        eval.good.mean, eval.good.max, eval.adversary.mean, eval.adversary.max
    )
}

pub fn episode_rewards_csv(eval: &Evaluation) -> String {
    let mut out = String::from("episode,reward_good,reward_adv\n");
    for (i, (g, a)) in eval.rewards_good.iter().zip(&eval.rewards_adversary).enumerate() {
        out.push_str(&format!("{i},{g},{a}\n"));
    }
    out
}

pub fn cmd_eval(run: &RunArgs, a: &Path, b: &Path, out: &Path) -> Result<()> {
    let config = run.load()?;
    let a = Checkpoint::load(a)?;
    let b = Checkpoint::load(b)?;
    for ck in [&a, &b] {
        ensure!(
            ck.scenario == config.scenario,
            "checkpoint is for {} but the config scenario is {}",
            ck.scenario,
            config.scenario
        );
    }
    let (good, adversary) = match (a.role, b.role) {
        (Role::Good, Role::Adversary) => (a, b),
        (Role::Adversary, Role::Good) => (b, a),
        (r, _) => bail!("both checkpoints play the {r}; need one good agent and one adversary"),
    };
    let eval = evaluate(&good.network()?, &adversary.network()?, &config)?;
    let primary = match config.agent.primary_role {
        Role::Good => &good,
        Role::Adversary => &adversary,
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("eval.csv"), eval_csv(primary.agent_kind.as_str(), &eval))?;
    write(&out.join("eval_episodes.csv"), episode_rewards_csv(&eval))
}

pub fn show_config(scenario: &str, preset: Preset, seed: Option<u64>, json: bool) -> Result<String> {
    let kind = crate::config::parse_scenario(scenario)?;
    let mut config = RunConfig::preset(kind, preset);
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if json {
        Ok(serde_json::to_string_pretty(&config)? + "\n")
    } else {
        let body = crate::config::to_toml(&config)?;
        Ok(format!("preset = \"{}\"\n{body}", preset.as_str()))
    }
}
