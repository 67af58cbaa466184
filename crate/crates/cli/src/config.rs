//! Run configuration files.
//!
//! A config file names a scenario and, optionally, a preset (`paper` when
//! absent). Every other key overrides the preset value of the same name:
//!
//! ```toml
//! scenario = "simple_push"
//! preset = "desk"
//! seed = 7
//!
//! [hyperparameters]
//! learning_rate = 0.0005
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use oppmod_core::envs::ScenarioKind;
use oppmod_core::training::{Preset, RunConfig};
use toml::{Table, Value};

pub fn parse_scenario(s: &str) -> Result<ScenarioKind> {
    ScenarioKind::parse(s)
        .ok_or_else(|| anyhow!("unknown scenario {s:?} (expected simple_push or simple_adversary)"))
}

pub fn load(path: &Path, preset_override: Option<Preset>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse(&text, preset_override).with_context(|| format!("in config {}", path.display()))
}

pub fn parse(text: &str, preset_override: Option<Preset>) -> Result<RunConfig> {
    let mut user: Table = text.parse()?;
    let scenario = match user.get("scenario") {
        Some(Value::String(s)) => parse_scenario(s)?,
        Some(_) => bail!("key `scenario` must be a string"),
        None => bail!("missing key `scenario`"),
    };
    let preset = match user.remove("preset") {
        Some(Value::String(s)) => Preset::parse(&s)?,
        Some(_) => bail!("key `preset` must be a string"),
        None => Preset::Paper,
    };
    let preset = preset_override.unwrap_or(preset);

    let mut merged = Table::try_from(RunConfig::preset(scenario, preset))?;
    merge(&mut merged, user, "")?;
    let config: RunConfig = Value::Table(merged).try_into()?;
    config.validate()?;
    Ok(config)
}

/// Overlays `user` on `base`. Tables merge key by key; a table may not
/// replace a plain value or the other way round.
fn merge(base: &mut Table, user: Table, prefix: &str) -> Result<()> {
    for (key, value) in user {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(u)) => merge(b, u, &path)?,
            (Some(Value::Table(_)), _) => bail!("key `{path}` must be a table"),
            (Some(_), Value::Table(_)) => bail!("key `{path}` must not be a table"),
            (Some(slot), v) => *slot = v,
            (None, v) => {
                // Let the typed decoder report it, naming the key.
                base.insert(key, v);
            }
        }
    }
    Ok(())
}

pub fn to_toml(config: &RunConfig) -> Result<String> {
    Ok(toml::to_string(config)?)
}
