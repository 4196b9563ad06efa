//! `uminimal`: JSON reports for the fiber-averaged curvature functions.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! usage or input errors.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use uminimal_core::gallery::CheckOptions;
use uminimal_core::haar::Group;
use uminimal_core::MultiIndex;

use commands::{FieldSpec, Outcome};
use config::{
    parse_steps, pick, resolve_seed, ConfigFile, FiberSettings, SchemeChoice, DEFAULT_POINTS,
    DEFAULT_RELATIVE_TOLERANCE, DEFAULT_RESOLUTION, DEFAULT_STEPS, SEED_ENV,
};

#[derive(Parser, Debug)]
#[command(name = "uminimal", version, about = "Fiber-averaged curvature functions of submanifolds")]
struct Cli {
    /// JSON file with default settings (overridden by flags).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct FiberArgs {
    /// Structure group of the normal frames.
    #[arg(long, value_parser = parse_group)]
    group: Option<Group>,
    /// Fiber integration rule: auto (exact for q ≤ 2), mc or exact.
    #[arg(long)]
    scheme: Option<SchemeChoice>,
    /// Monte Carlo samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Nodes of the exact circle rule.
    #[arg(long)]
    nodes: Option<usize>,
    /// Seed (default from the config file, then UMINIMAL_SEED, then 7).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// σ_u table of a matrix system with identity residuals.
    Sigma {
        /// System JSON (`-` for stdin).
        input: PathBuf,
        /// Largest |u| to tabulate (default n).
        #[arg(long)]
        n_max: Option<usize>,
        /// Cross-check against the determinant expansion.
        #[arg(long)]
        oracle: bool,
    },
    /// Fiber averages σ̂_u, Ĥ_u, Ŝ_u and R̂_u of a matrix system.
    Average {
        /// System JSON (`-` for stdin).
        input: PathBuf,
        #[arg(long)]
        u: MultiIndex,
        /// Curvature c of the ambient space form.
        #[arg(long, default_value_t = 0.0)]
        curvature: f64,
        #[command(flatten)]
        fiber: FiberArgs,
    },
    /// Pointwise residual c(n+1−|u|)Ĥ_u − Ŝ_u over a patch.
    Minimality {
        /// Patch spec, e.g. `umbilical:n=2,q=2,r=1`.
        #[arg(long)]
        patch: String,
        #[arg(long)]
        u: MultiIndex,
        #[arg(long)]
        resolution: Option<usize>,
        /// Verdict tolerance (default 1e-6, or 1e-4 with finite differences).
        #[arg(long)]
        tolerance: Option<f64>,
        /// Omit per-point records.
        #[arg(long)]
        summary_only: bool,
        #[command(flatten)]
        fiber: FiberArgs,
    },
    /// Finite-difference check of the first variation of ∫σ̂_u.
    Variation {
        #[arg(long)]
        patch: String,
        #[arg(long)]
        u: MultiIndex,
        /// `bump[:seed=S,modes=M,amplitude=A]`.
        #[arg(long, default_value = "bump")]
        field: String,
        /// Comma-separated deformation steps.
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        fiber: FiberArgs,
    },
    /// Built-in patches with known answers.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Subcommand, Debug)]
enum GalleryAction {
    /// Names, parameters and default specs.
    List,
    /// Evaluates every expectation of an entry.
    Check {
        /// Entry name or spec.
        name: String,
        /// Also report residuals for all u with |u| ≤ K.
        #[arg(long, value_name = "K")]
        all_u_upto: Option<usize>,
        /// Random points per pointwise expectation.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_group(s: &str) -> std::result::Result<Group, String> {
    s.parse().map_err(|e: uminimal_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(threads) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let env_seed = std::env::var(SEED_ENV).ok();
    let env_seed = env_seed.as_deref();

    let (name, seed, outcome) = match cli.command {
        Command::Sigma { input, n_max, oracle } => {
            let seed = resolve_seed(None, &file, env_seed)?;
            let system = commands::read_system(&input)?;
            ("sigma", seed, commands::sigma(&system, n_max, oracle)?)
        }
        Command::Average { input, u, curvature, fiber } => {
            let seed = resolve_seed(fiber.seed, &file, env_seed)?;
            let settings = fiber_settings(&fiber, &file);
            let system = commands::read_system(&input)?;
            ("average", seed, commands::average(&system, &u, curvature, &settings, seed)?)
        }
        Command::Minimality { patch, u, resolution, tolerance, summary_only, fiber } => {
            let seed = resolve_seed(fiber.seed, &file, env_seed)?;
            let settings = fiber_settings(&fiber, &file);
            let resolution = pick(resolution, file.resolution, DEFAULT_RESOLUTION);
            let tolerance = tolerance.or(file.tolerance);
            let outcome =
                commands::minimality(&patch, &u, resolution, tolerance, summary_only, &settings, seed)?;
            ("minimality", seed, outcome)
        }
        Command::Variation { patch, u, field, steps, resolution, fiber } => {
            let seed = resolve_seed(fiber.seed, &file, env_seed)?;
            let settings = fiber_settings(&fiber, &file);
            let steps = match steps {
                Some(s) => parse_steps(&s)?,
                None => file.steps.clone().unwrap_or_else(|| DEFAULT_STEPS.to_vec()),
            };
            let resolution = pick(resolution, file.resolution, DEFAULT_RESOLUTION);
            let relative = file.relative_tolerance.unwrap_or(DEFAULT_RELATIVE_TOLERANCE);
            let field = FieldSpec::parse(&field, seed.seed)?;
            let outcome =
                commands::variation(&patch, &u, &field, &steps, resolution, relative, &settings, seed)?;
            ("variation", seed, outcome)
        }
        Command::Gallery { action: GalleryAction::List } => {
            let seed = resolve_seed(None, &file, env_seed)?;
            ("gallery list", seed, commands::gallery_list())
        }
        Command::Gallery {
            action: GalleryAction::Check { name, all_u_upto, points, resolution, samples, seed },
        } => {
            let seed = resolve_seed(seed, &file, env_seed)?;
            let defaults = CheckOptions::default();
            let options = CheckOptions {
                points: pick(points, file.points, DEFAULT_POINTS),
                resolution: pick(resolution, file.resolution, defaults.resolution),
                samples: pick(samples, file.samples, defaults.samples),
                seed: seed.seed,
                all_u_upto,
            };
            ("gallery check", seed, commands::gallery_check(&name, &options)?)
        }
    };

    let report = envelope(name, seed, outcome);
    let passed = report["passed"].as_bool().unwrap_or(false);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &cli.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(passed)
}

fn fiber_settings(args: &FiberArgs, file: &ConfigFile) -> FiberSettings {
    FiberSettings::resolve(args.group, args.scheme, args.samples, args.nodes, file)
}

/// `{"command", "seed", "seed_source", "passed", "report"}`.
fn envelope(name: &str, seed: config::SeedInfo, outcome: Outcome) -> Value {
    json!({
        "command": name,
        "seed": seed.seed,
        "seed_source": seed.seed_source,
        "passed": outcome.passed,
        "report": outcome.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
