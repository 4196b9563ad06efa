//! Run settings: command-line flags over a JSON config file over the
//! `UMINIMAL_SEED` environment variable over built-in defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use uminimal_core::haar::{FiberScheme, Group, DEFAULT_EXACT_NODES, DEFAULT_SAMPLES};

pub const SEED_ENV: &str = "UMINIMAL_SEED";
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
/// Allowed residual of the smallest-step difference quotient relative to the
/// first-variation integral.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-3;

/// Fiber integration rule as chosen on the command line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    /// Exact rule for `q ≤ 2`, Monte Carlo above.
    #[default]
    Auto,
    Mc,
    Exact,
}

impl FromStr for SchemeChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(SchemeChoice::Auto),
            "mc" => Ok(SchemeChoice::Mc),
            "exact" => Ok(SchemeChoice::Exact),
            other => Err(format!("unknown scheme {other:?}, expected auto, mc or exact")),
        }
    }
}

impl fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeChoice::Auto => "auto",
            SchemeChoice::Mc => "mc",
            SchemeChoice::Exact => "exact",
        })
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub group: Option<Group>,
    pub scheme: Option<SchemeChoice>,
    pub nodes: Option<usize>,
    pub resolution: Option<usize>,
    pub points: Option<usize>,
    pub tolerance: Option<f64>,
    pub steps: Option<Vec<f64>>,
    pub relative_tolerance: Option<f64>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

/// The seed actually used and where it came from; echoed into every report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub seed_source: SeedSource,
}

pub fn resolve_seed(flag: Option<u64>, file: &ConfigFile, env: Option<&str>) -> Result<SeedInfo> {
    if let Some(seed) = flag {
        return Ok(SeedInfo { seed, seed_source: SeedSource::Flag });
    }
    if let Some(seed) = file.seed {
        return Ok(SeedInfo { seed, seed_source: SeedSource::Config });
    }
    if let Some(raw) = env {
        let seed = raw
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={raw:?} is not an unsigned integer"))?;
        return Ok(SeedInfo { seed, seed_source: SeedSource::Env });
    }
    Ok(SeedInfo { seed: DEFAULT_SEED, seed_source: SeedSource::Default })
}

/// First of flag, file value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Resolved fiber settings.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FiberSettings {
    pub group: Group,
    pub scheme: SchemeChoice,
    pub samples: usize,
    pub nodes: usize,
}

impl FiberSettings {
    pub fn resolve(
        group: Option<Group>,
        scheme: Option<SchemeChoice>,
        samples: Option<usize>,
        nodes: Option<usize>,
        file: &ConfigFile,
    ) -> Self {
        FiberSettings {
            group: pick(group, file.group, Group::O),
            scheme: pick(scheme, file.scheme, SchemeChoice::Auto),
            samples: pick(samples, file.samples, DEFAULT_SAMPLES),
            nodes: pick(nodes, file.nodes, DEFAULT_EXACT_NODES),
        }
    }

    pub fn scheme_for(&self, q: usize, seed: u64) -> FiberScheme {
        let exact = match self.scheme {
            SchemeChoice::Auto => q <= 2,
            SchemeChoice::Mc => false,
            SchemeChoice::Exact => true,
        };
        if exact {
            FiberScheme::Exact { nodes: self.nodes }
        } else {
            FiberScheme::MonteCarlo { samples: self.samples, seed }
        }
    }
}

/// Parses `1e-2,5e-3` style lists.
pub fn parse_steps(s: &str) -> Result<Vec<f64>> {
    let steps = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad step {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    if steps.is_empty() {
        bail!("at least one step is required");
    }
    Ok(steps)
}
