//! First variation of `∫ σ̂_u` under normal deformations.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convergence::{validate_steps, ConvergenceReport};
use crate::error::{argument, Error, Result};
use crate::haar::{evaluate_frame, FrameSet, SchemeKind};
use crate::multiindex::MultiIndex;
use crate::submanifold::{
    fd_jet_extrapolated, parameter_grid, tangent_normal_frames, AmbientSpec, Chart, ImmersedPatch, Jet,
};

use super::{check_frames, check_index, frame_totals, integrate_sigma};

/// One trigonometric mode `weight · cos(2π Σ_i k_i (x_i − lower_i)/width_i + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub frequencies: Vec<f64>,
    pub phase: f64,
    pub weight: f64,
}

/// Normal variation field `V(x) = amplitude · p(x) · b(x) · P⊥(x) (d + s φ(x))`,
/// with `p` a sum of modes, `b` a bump vanishing at non-periodic chart
/// boundaries, `P⊥` the normal projection, `d` a fixed vector and `s` the
/// position weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalField {
    pub amplitude: f64,
    pub direction: Vec<f64>,
    pub position_weight: f64,
    pub modes: Vec<Mode>,
}

impl NormalField {
    pub fn zero(enclosing_dim: usize) -> Self {
        NormalField {
            amplitude: 0.0,
            direction: vec![0.0; enclosing_dim],
            position_weight: 0.0,
            modes: Vec::new(),
        }
    }

    /// A seeded field with `modes` low-frequency modes, a random unit
    /// direction and unit position weight.
    pub fn random(patch: &dyn ImmersedPatch, seed: u64, modes: usize, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chart = patch.chart();
        let m = patch.ambient().enclosing_dim();
        let mut direction: Vec<f64> = (0..m)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        direction.iter_mut().for_each(|v| *v /= norm);
        let modes = (0..modes)
            .map(|_| Mode {
                frequencies: (0..chart.dim())
                    .map(|i| {
                        let k = rng.random_range(0..=2) as f64;
                        if chart.periodic[i] {
                            k
                        } else {
                            k + rng.random::<f64>()
                        }
                    })
                    .collect(),
                phase: rng.random_range(0.0..2.0 * PI),
                weight: rng.random_range(0.5..1.0),
            })
            .collect();
        NormalField {
            amplitude,
            direction,
            position_weight: 1.0,
            modes,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.modes.is_empty()
    }

    /// Scalar factor `amplitude · p(x) · b(x)`.
    pub fn profile(&self, chart: &Chart, x: &[f64]) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut bump = 1.0;
        for i in 0..chart.dim() {
            if !chart.periodic[i] {
                let s = 2.0 * (x[i] - chart.lower[i]) / chart.width(i) - 1.0;
                bump *= if s.abs() < 1.0 { (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 };
            }
        }
        let sum: f64 = self
            .modes
            .iter()
            .map(|mode| {
                let arg: f64 = (0..chart.dim())
                    .map(|i| 2.0 * PI * mode.frequencies[i] * (x[i] - chart.lower[i]) / chart.width(i))
                    .sum();
                mode.weight * (arg + mode.phase).cos()
            })
            .sum();
        self.amplitude * sum * bump
    }

    fn validate(&self, patch: &dyn ImmersedPatch) -> Result<()> {
        if self.direction.len() != patch.ambient().enclosing_dim() {
            return Err(argument(format!(
                "field direction has {} coordinates, ambient needs {}",
                self.direction.len(),
                patch.ambient().enclosing_dim()
            )));
        }
        if self.modes.iter().any(|m| m.frequencies.len() != patch.dim()) {
            return Err(argument("every mode needs one frequency per chart axis"));
        }
        Ok(())
    }

    /// `V(x)` in enclosing coordinates.
    pub fn at(&self, patch: &dyn ImmersedPatch, x: &[f64]) -> Result<DVector<f64>> {
        let m = patch.ambient().enclosing_dim();
        let profile = self.profile(patch.chart(), x);
        if profile == 0.0 {
            return Ok(DVector::zeros(m));
        }
        let frames = tangent_normal_frames(patch, x)?;
        let mut w = DVector::from_column_slice(&self.direction);
        if self.position_weight != 0.0 {
            w += patch.eval(x) * self.position_weight;
        }
        Ok(frames.normal_projection(&w) * profile)
    }
}

/// Step of the extrapolated differences applied to the field, relative to the
/// chart scale.
const FIELD_RELATIVE_STEP: f64 = 1e-3;

/// `φ_t = φ + t V`, radially re-projected onto the sphere for a sphere
/// ambient. Derivatives of `V` (or of the re-projected map) are taken by
/// extrapolated central differences.
pub struct DeformedPatch<'a> {
    pub base: &'a dyn ImmersedPatch,
    pub field: &'a NormalField,
    pub t: f64,
}

impl DeformedPatch<'_> {
    fn field_at(&self, x: &[f64]) -> DVector<f64> {
        self.field
            .at(self.base, x)
            .unwrap_or_else(|_| DVector::from_element(self.base.ambient().enclosing_dim(), f64::NAN))
    }
}

impl ImmersedPatch for DeformedPatch<'_> {
    fn name(&self) -> String {
        format!("{} deformed by t = {}", self.base.name(), self.t)
    }

    fn ambient(&self) -> AmbientSpec {
        self.base.ambient()
    }

    fn chart(&self) -> &Chart {
        self.base.chart()
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        let moved = self.base.eval(x) + self.field_at(x) * self.t;
        match self.base.ambient().radius() {
            Some(r) => {
                let norm = moved.norm();
                moved * (r / norm)
            }
            None => moved,
        }
    }

    fn jet(&self, x: &[f64]) -> Jet {
        match self.base.ambient() {
            AmbientSpec::Euclidean { .. } => {
                let field = fd_jet_extrapolated(|y| self.field_at(y), x, self.fd_step());
                self.base.jet(x).add_scaled(&field, self.t)
            }
            AmbientSpec::Sphere { .. } => fd_jet_extrapolated(|y| self.eval(y), x, self.fd_step()),
        }
    }

    fn fd_step(&self) -> f64 {
        FIELD_RELATIVE_STEP * self.base.chart().scale()
    }
}

/// Finite-difference derivative of `∫ σ̂_u` against the first variation
/// formula `∫ ⟨c(n + 1 − |u|) Ĥ_u − Ŝ_u, V⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct VariationReport {
    pub patch: String,
    pub u: MultiIndex,
    pub resolution: usize,
    pub scheme: SchemeKind,
    pub samples: usize,
    pub rhs: f64,
    pub rhs_std_error: f64,
    /// Monte Carlo error of each difference quotient.
    pub lhs_std_errors: Vec<f64>,
    /// `∫ (|σ̂_u| |V| + |⟨R̂_u − Ŝ_u, V⟩|)`, the size the residuals are
    /// compared against.
    pub scale: f64,
    pub convergence: ConvergenceReport,
}

impl VariationReport {
    /// Residual at the smallest step relative to `|rhs|`.
    pub fn relative_error(&self) -> f64 {
        self.convergence.final_residual() / self.rhs.abs()
    }
}

/// Relative rounding level of the difference quotients.
const NOISE_RELATIVE: f64 = 1e-8;

pub fn first_variation_check(
    patch: &dyn ImmersedPatch,
    field: &NormalField,
    u: &MultiIndex,
    resolution: usize,
    frames: &FrameSet,
    steps: &[f64],
) -> Result<VariationReport> {
    check_index(patch, u)?;
    check_frames(patch, frames)?;
    validate_steps(steps)?;
    field.validate(patch)?;
    let c = patch.ambient().curvature();
    let factor = c * (patch.dim() as f64 + 1.0 - u.length() as f64);
    let nodes = parameter_grid(patch.chart(), resolution)?;

    let rhs_totals = frame_totals(patch, &nodes, frames, |data, g| {
        let v = field.at(patch, &data.point)?;
        let eval = evaluate_frame(&data.system, u, g)?;
        Ok((0..eval.h.len())
            .map(|k| (factor * eval.h[k] - eval.s[k]) * data.frames.normal.column(k).dot(&v))
            .sum())
    })?;
    let (rhs, rhs_std_error) = frames.mean_and_error(&rhs_totals);

    let weights = 1.0 / frames.len() as f64;
    let scale_totals = frame_totals(patch, &nodes, frames, |data, g| {
        let v = field.at(patch, &data.point)?;
        let eval = evaluate_frame(&data.system, u, g)?;
        let pairing: f64 = (0..eval.h.len())
            .map(|k| (factor * eval.h[k] - eval.s[k]) * data.frames.normal.column(k).dot(&v))
            .sum();
        Ok(weights * (eval.sigma.abs() * v.norm() + pairing.abs()))
    })?;
    let scale: f64 = scale_totals.iter().sum();

    let mut lhs = Vec::with_capacity(steps.len());
    let mut lhs_std_errors = Vec::with_capacity(steps.len());
    for &h in steps {
        let total = |t: f64| -> Result<Vec<f64>> {
            let deformed = DeformedPatch {
                base: patch,
                field,
                t,
            };
            integrate_sigma(&deformed, u, resolution, frames).map_err(|e| match e {
                Error::NotImmersed { .. } | Error::NotOnSphere { .. } => Error::DeformationNotImmersed {
                    t,
                    source: Box::new(e),
                },
                other => other,
            })
        };
        let (plus, minus) = (total(h)?, total(-h)?);
        let quotients: Vec<f64> = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        let (value, se) = frames.mean_and_error(&quotients);
        lhs.push(value);
        lhs_std_errors.push(se);
    }
    let max_se = lhs_std_errors.iter().copied().fold(rhs_std_error, f64::max);
    let floor = (NOISE_RELATIVE * scale).max(3.0 * (max_se + rhs_std_error));
    let convergence = ConvergenceReport::new(steps.to_vec(), lhs, vec![rhs; steps.len()], floor);

    Ok(VariationReport {
        patch: patch.name(),
        u: u.clone(),
        resolution,
        scheme: frames.kind(),
        samples: frames.len(),
        rhs,
        rhs_std_error,
        lhs_std_errors,
        scale,
        convergence,
    })
}
