//! One function per subcommand. Each returns a JSON report and whether every
//! check in it passed.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use uminimal_core::gallery::{self, build_patch, CheckOptions};
use uminimal_core::haar::{averaged_sections, FrameSet};
use uminimal_core::minimality::{default_tolerance, first_variation_check, minimality_residual, NormalField};
use uminimal_core::newton::{
    identity_residuals, newton_table, right_recursion_check, scaled_error, sigma_oracle, SystemJson,
    IDENTITY_TOLERANCE,
};
use uminimal_core::{MultiIndex, OperatorSystem};

use crate::config::{FiberSettings, SeedInfo};

pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

/// Oracle agreement required by `sigma --oracle`.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
/// Smallest accepted observed order of the difference quotients.
pub const REQUIRED_ORDER: f64 = 1.8;

pub fn read_system(path: &Path) -> Result<OperatorSystem> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading system from stdin")?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    let js: SystemJson =
        serde_json::from_str(&text).with_context(|| format!("parsing system JSON {}", path.display()))?;
    Ok(OperatorSystem::try_from(js)?)
}

fn frames(settings: &FiberSettings, q: usize, seed: u64) -> Result<FrameSet> {
    Ok(FrameSet::build(q, settings.group, &settings.scheme_for(q, seed))?)
}

/// `σ_u` table with identity residuals; tolerances grow with the size of the
/// operators like `max(1, ‖A‖)^n`.
pub fn sigma(system: &OperatorSystem, n_max: Option<usize>, oracle: bool) -> Result<Outcome> {
    let n_max = n_max.unwrap_or(system.n());
    let table = newton_table(system, n_max)?;
    let size = system.frobenius_sq().sqrt().max(1.0);
    let tolerance = IDENTITY_TOLERANCE * size.powi(system.n() as i32);
    let sigma: BTreeMap<String, f64> = table.iter().map(|(u, s, _)| (u.to_string(), s)).collect();
    let trace_residual = table.trace_residual();
    let right_gap = right_recursion_check(system, &table);
    let mut passed = trace_residual <= tolerance;
    let mut report = json!({
        "n": system.n(),
        "q": system.q(),
        "n_max": n_max,
        "sigma": sigma,
        "trace_residual": trace_residual,
        "right_recursion_gap": right_gap,
        "tolerance": tolerance,
    });
    if oracle {
        let reference = sigma_oracle(system, n_max)?;
        let residuals = identity_residuals(system, &table, |u| reference[u]);
        let max_rel_err = table
            .iter()
            .map(|(u, s, _)| scaled_error(s, reference[u]))
            .fold(0.0, f64::max);
        passed &= max_rel_err <= ORACLE_TOLERANCE;
        passed &= residuals.sigma_identity <= tolerance && residuals.trace_identity <= tolerance;
        report["oracle"] = json!({
            "max_rel_err": max_rel_err,
            "tolerance": ORACLE_TOLERANCE,
            "identities": residuals,
        });
    }
    Ok(Outcome { report, passed })
}

pub fn average(
    system: &OperatorSystem,
    u: &MultiIndex,
    curvature: f64,
    settings: &FiberSettings,
    seed: SeedInfo,
) -> Result<Outcome> {
    let frames = frames(settings, system.q(), seed.seed)?;
    let sections = averaged_sections(system, u, curvature, &frames)?;
    Ok(Outcome {
        report: json!({
            "u": u,
            "group": settings.group,
            "curvature": curvature,
            "sigma_hat": sections.sigma_hat,
            "h_hat": sections.h_hat,
            "s_hat": sections.s_hat,
            "r_hat": sections.r_hat,
        }),
        passed: true,
    })
}

pub fn minimality(
    patch_spec: &str,
    u: &MultiIndex,
    resolution: usize,
    tolerance: Option<f64>,
    summary_only: bool,
    settings: &FiberSettings,
    seed: SeedInfo,
) -> Result<Outcome> {
    let patch = build_patch(patch_spec)?;
    let frames = frames(settings, patch.codim(), seed.seed)?;
    let tolerance = tolerance.unwrap_or_else(|| default_tolerance(patch.as_ref()));
    let mut report = minimality_residual(patch.as_ref(), u, resolution, &frames, tolerance)?;
    let passed = report.minimal;
    if summary_only {
        report.points.clear();
    }
    let mut value = serde_json::to_value(&report)?;
    value["resolution"] = json!(resolution);
    Ok(Outcome { report: value, passed })
}

/// `bump` or `bump:seed=S,modes=M,amplitude=A`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSpec {
    pub seed: u64,
    pub modes: usize,
    pub amplitude: f64,
}

impl FieldSpec {
    pub fn parse(s: &str, default_seed: u64) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        if name.trim() != "bump" {
            bail!("unknown field {:?}, expected bump[:seed=S,modes=M,amplitude=A]", name.trim());
        }
        let mut spec = FieldSpec { seed: default_seed, modes: 3, amplitude: 0.2 };
        for item in rest.split(',').filter(|t| !t.trim().is_empty()) {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("field parameter {item:?} is not key=value"))?;
            let value = value.trim();
            match key.trim() {
                "seed" => spec.seed = value.parse().with_context(|| format!("bad seed {value:?}"))?,
                "modes" => spec.modes = value.parse().with_context(|| format!("bad modes {value:?}"))?,
                "amplitude" => {
                    spec.amplitude = value.parse().with_context(|| format!("bad amplitude {value:?}"))?
                }
                other => bail!("unknown field parameter {other:?}"),
            }
        }
        if !(spec.amplitude.is_finite()) {
            bail!("field amplitude must be finite");
        }
        Ok(spec)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn variation(
    patch_spec: &str,
    u: &MultiIndex,
    field: &FieldSpec,
    steps: &[f64],
    resolution: usize,
    relative_tolerance: f64,
    settings: &FiberSettings,
    seed: SeedInfo,
) -> Result<Outcome> {
    let patch = build_patch(patch_spec)?;
    let frames = frames(settings, patch.codim(), seed.seed)?;
    let normal = NormalField::random(patch.as_ref(), field.seed, field.modes, field.amplitude);
    let report = first_variation_check(patch.as_ref(), &normal, u, resolution, &frames, steps)?;
    let conv = &report.convergence;
    // A vanishing integral is judged against the size of the integrand.
    let allowed = (relative_tolerance * report.rhs.abs()).max(conv.noise_floor).max(1e-9 * report.scale);
    let passed = conv.order_at_least(REQUIRED_ORDER) && conv.final_residual() <= allowed;
    let mut value = serde_json::to_value(&report)?;
    value["field"] = serde_json::to_value(field)?;
    value["allowed_residual"] = json!(allowed);
    value["required_order"] = json!(REQUIRED_ORDER);
    Ok(Outcome { report: value, passed })
}

pub fn gallery_list() -> Outcome {
    Outcome {
        report: json!({ "entries": gallery::entries() }),
        passed: true,
    }
}

pub fn gallery_check(spec: &str, options: &CheckOptions) -> Result<Outcome> {
    let check = gallery::check(spec, options)?;
    Ok(Outcome {
        passed: check.passed,
        report: serde_json::to_value(&check)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_spec_parsing() {
        assert_eq!(
            FieldSpec::parse("bump", 9).unwrap(),
            FieldSpec { seed: 9, modes: 3, amplitude: 0.2 }
        );
        let f = FieldSpec::parse("bump:seed=2, modes=1,amplitude=0.05", 9).unwrap();
        assert_eq!((f.seed, f.modes, f.amplitude), (2, 1, 0.05));
        assert!(FieldSpec::parse("wave", 1).is_err());
        assert!(FieldSpec::parse("bump:depth=1", 1).is_err());
        assert!(FieldSpec::parse("bump:seed", 1).is_err());
    }
}
