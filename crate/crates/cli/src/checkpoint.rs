//! Checkpoint files.
//!
//! A checkpoint is a UTF-8 header of `key = value` lines, the run config as
//! TOML, and the parameters as little-endian `f64` values:
//!
//! ```text
//! oppmod-checkpoint 1
//! scenario = simple_push
//! role = adversary
//! agent_kind = ddqn
//! num_experts = 0
//! seed = 0
//! episode = 300
//! tensors = 6
//! tensor 64 19
//! ...
//! config_bytes = <n>
//! <n bytes of TOML>
//! payload_values = <m>
//! <8 m bytes>
//! ```
//!
//! Tensors are listed in parameter order (weight then bias for every
//! layer) with shape `rows cols`; a bias has one column.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use oppmod_core::agents::{AgentKind, Network};
use oppmod_core::envs::{Role, ScenarioKind};
use oppmod_core::training::RunConfig;
use serde::Serialize;

pub const MAGIC: &str = "oppmod-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub scenario: ScenarioKind,
    pub role: Role,
    pub agent_kind: AgentKind,
    pub num_experts: usize,
    pub seed: u64,
    /// Completed training episodes when the parameters were taken.
    pub episode: u64,
    pub shapes: Vec<(usize, usize)>,
    pub config: String,
    pub payload: Vec<f64>,
}

#[derive(Serialize)]
struct JsonTensor<'a> {
    rows: usize,
    cols: usize,
    values: &'a [f64],
}

#[derive(Serialize)]
struct JsonCheckpoint<'a> {
    format: &'static str,
    version: u32,
    scenario: &'static str,
    role: &'static str,
    agent_kind: &'static str,
    num_experts: usize,
    seed: u64,
    episode: u64,
    config: &'a str,
    tensors: Vec<JsonTensor<'a>>,
}

impl Checkpoint {
    pub fn new(
        network: &Network,
        role: Role,
        config: &RunConfig,
        episode: u64,
    ) -> Result<Self> {
        Ok(Self {
            scenario: config.scenario,
            role,
            agent_kind: network.kind(),
            num_experts: network.num_experts(),
            seed: config.seed,
            episode,
            shapes: network.shapes(),
            config: crate::config::to_toml(config)?,
            payload: network.flat_params(),
        })
    }

    pub fn network(&self) -> Result<Network> {
        let net = Network::from_flat(self.agent_kind, &self.shapes, &self.payload)?;
        ensure!(
            net.num_experts() == self.num_experts,
            "checkpoint declares {} experts but its tensors hold {}",
            self.num_experts,
            net.num_experts()
        );
        let expected = self.scenario.obs_dim(self.role);
        ensure!(
            net.obs_dim() == expected,
            "checkpoint network reads {} inputs; the {} on {} observes {expected}",
            net.obs_dim(),
            self.role,
            self.scenario
        );
        Ok(net)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!(
            "{MAGIC} {VERSION}\nscenario = {}\nrole = {}\nagent_kind = {}\nnum_experts = {}\nseed = {}\nepisode = {}\ntensors = {}\n",
            self.scenario,
            self.role,
            self.agent_kind,
            self.num_experts,
            self.seed,
            self.episode,
            self.shapes.len()
        );
        for (r, c) in &self.shapes {
            header.push_str(&format!("tensor {r} {c}\n"));
        }
        header.push_str(&format!("config_bytes = {}\n", self.config.len()));
        let mut out = header.into_bytes();
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(format!("payload_values = {}\n", self.payload.len()).as_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.line()?;
        ensure!(
            magic == format!("{MAGIC} {VERSION}"),
            "not a version {VERSION} checkpoint (first line {magic:?})"
        );
        let scenario = r.field("scenario")?;
        let scenario = ScenarioKind::parse(&scenario)
            .with_context(|| format!("unknown scenario {scenario:?}"))?;
        let role = r.field("role")?;
        let role = Role::parse(&role).with_context(|| format!("unknown role {role:?}"))?;
        let agent_kind = AgentKind::parse(&r.field("agent_kind")?)?;
        let num_experts = r.number("num_experts")?;
        let seed = r.number("seed")?;
        let episode = r.number("episode")?;
        let count: usize = r.number("tensors")?;
        let mut shapes = Vec::with_capacity(count);
        for i in 0..count {
            let line = r.line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            let shape = match parts.as_slice() {
                ["tensor", rows, cols] => (canonical(rows)?, canonical(cols)?),
                _ => bail!("tensor {i}: expected `tensor <rows> <cols>`, got {line:?}"),
            };
            shapes.push(shape);
        }
        let config_len: usize = r.number("config_bytes")?;
        let config = String::from_utf8(r.take(config_len)?.to_vec()).context("config is not UTF-8")?;
        let values: usize = r.number("payload_values")?;
        let expected: usize = shapes.iter().map(|(a, b)| a * b).sum();
        ensure!(
            values == expected,
            "payload holds {values} values but the shape table needs {expected}"
        );
        let raw = r.take(values * 8)?;
        ensure!(r.pos == bytes.len(), "{} trailing bytes", bytes.len() - r.pos);
        let payload = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            scenario,
            role,
            agent_kind,
            num_experts,
            seed,
            episode,
            shapes,
            config,
            payload,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("in checkpoint {}", path.display()))
    }

    /// Textual form with the same content, for tools that cannot read the
    /// binary payload.
    pub fn to_json(&self) -> Result<String> {
        let mut offset = 0;
        let tensors = self
            .shapes
            .iter()
            .map(|&(rows, cols)| {
                let values = &self.payload[offset..offset + rows * cols];
                offset += rows * cols;
                JsonTensor { rows, cols, values }
            })
            .collect();
        let doc = JsonCheckpoint {
            format: MAGIC,
            version: VERSION,
            scenario: self.scenario.as_str(),
            role: self.role.as_str(),
            agent_kind: self.agent_kind.as_str(),
            num_experts: self.num_experts,
            seed: self.seed,
            episode: self.episode,
            config: &self.config,
            tensors,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }
}

/// Parses a decimal number written without sign, padding or leading zeros.
fn canonical<T: std::str::FromStr + ToString>(s: &str) -> Result<T> {
    let v: T = s.parse().ok().with_context(|| format!("bad number {s:?}"))?;
    ensure!(v.to_string() == s, "non-canonical number {s:?}");
    Ok(v)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .context("truncated checkpoint header")?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).context("header is not UTF-8")
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.line()?;
        let prefix = format!("{key} = ");
        line.strip_prefix(&prefix)
            .map(str::to_string)
            .with_context(|| format!("expected `{key} = ...`, got {line:?}"))
    }

    fn number<T: std::str::FromStr + ToString>(&mut self, key: &str) -> Result<T> {
        canonical(&self.field(key)?).with_context(|| format!("field `{key}`"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        ensure!(self.pos + n <= self.bytes.len(), "truncated checkpoint body");
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oppmod_core::agents::{MoeQNetwork, MoeShape};
    use oppmod_core::numerics::MlpParams;
    use oppmod_core::rng::seeded;
    use oppmod_core::training::Preset;

    fn sample(moe: bool) -> Checkpoint {
        let config = RunConfig::preset(ScenarioKind::SimpleAdversary, Preset::Desk);
        let mut rng = seeded(3, 0);
        let net = if moe {
            Network::Moe(MoeQNetwork::new(MoeShape::new(6, 4), &mut rng).unwrap())
        } else {
            Network::Plain(MlpParams::new(4, 64, 128, 5, &mut rng))
        };
        let role = if moe { Role::Good } else { Role::Adversary };
        Checkpoint::new(&net, role, &config, 300).unwrap()
    }

    #[test]
    fn byte_identical_round_trip() {
        for moe in [false, true] {
            let ck = sample(moe);
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.network().unwrap().flat_params(), ck.payload);
        }
    }

    #[test]
    fn header_is_readable() {
        let bytes = sample(true).to_bytes();
        let text = String::from_utf8_lossy(&bytes[..200]);
        assert!(text.starts_with("oppmod-checkpoint 1\nscenario = simple_adversary\nrole = good\nagent_kind = ddqn-moe\nnum_experts = 4\n"));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample(false).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let at = bytes.windows(9).position(|w| w == b"seed = 0\n").unwrap();
        let mut padded = bytes[..at].to_vec();
        padded.extend_from_slice(b"seed = 00\n");
        padded.extend_from_slice(&bytes[at + 9..]);
        assert!(Checkpoint::from_bytes(&padded).is_err());
        assert!(Checkpoint::from_bytes(b"hello\n").is_err());
    }

    #[test]
    fn mismatched_role_is_caught_on_use() {
        let mut ck = sample(false);
        ck.role = Role::Good;
        assert!(ck.network().is_err());
    }

    #[test]
    fn json_carries_every_value() {
        let ck = sample(true);
        let v: serde_json::Value = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        assert_eq!(v["agent_kind"], "ddqn-moe");
        let total: usize = v["tensors"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["values"].as_array().unwrap().len())
            .sum();
        assert_eq!(total, ck.payload.len());
        let first = v["tensors"][0]["values"][0].as_f64().unwrap();
        assert_eq!(first, ck.payload[0]);
    }
}
