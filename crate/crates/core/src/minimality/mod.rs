//! The `u`-minimality condition `c(n + 1 − |u|) Ĥ_u = Ŝ_u` on patches in a
//! space form, total curvature functionals and their first variation.
//!
//! All supported ambients are space forms, where the divergence term `W_u`
//! vanishes identically; it is not represented.

mod variation;

pub use variation::{first_variation_check, DeformedPatch, Mode, NormalField, VariationReport};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{argument, Result};
use crate::haar::{evaluate_frame, averaged_sections, FrameSet, Group, SchemeKind};
use crate::multiindex::MultiIndex;
use crate::newton::OperatorSystem;
use crate::submanifold::{parameter_grid, shape_system, ImmersedPatch, PointFrameData, QuadratureNode};

/// Verdict tolerance for patches with exact derivatives.
pub const ANALYTIC_TOLERANCE: f64 = 1e-6;
/// Verdict tolerance for patches with finite-difference derivatives.
pub const FD_TOLERANCE: f64 = 1e-4;

/// Nodes per parallel work unit; fixed so reductions do not depend on the
/// number of threads.
const CHUNK: usize = 64;

pub fn default_tolerance(patch: &dyn ImmersedPatch) -> f64 {
    if patch.analytic() {
        ANALYTIC_TOLERANCE
    } else {
        FD_TOLERANCE
    }
}

pub(crate) fn check_index(patch: &dyn ImmersedPatch, u: &MultiIndex) -> Result<()> {
    if u.q() != patch.codim() {
        return Err(argument(format!(
            "multi-index {u} has {} entries, patch codimension is {}",
            u.q(),
            patch.codim()
        )));
    }
    if u.length() > patch.dim() {
        return Err(argument(format!(
            "|u| = {} exceeds n = {}",
            u.length(),
            patch.dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_frames(patch: &dyn ImmersedPatch, frames: &FrameSet) -> Result<()> {
    if frames.q() != patch.codim() {
        return Err(argument(format!(
            "frame set is for q = {}, patch codimension is {}",
            frames.q(),
            patch.codim()
        )));
    }
    Ok(())
}

/// Residual record at one parameter point; vectors are coordinates in the
/// reference normal frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointResidual {
    pub point: Vec<f64>,
    pub h_hat: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub r_hat: Vec<f64>,
    /// `c(n + 1 − |u|) Ĥ_u − Ŝ_u`.
    pub residual: Vec<f64>,
    pub norm: f64,
    /// Largest Monte Carlo error over the residual components.
    pub std_error: f64,
}

/// Residual from precomputed point data.
pub fn residual_from_data(
    data: &PointFrameData,
    u: &MultiIndex,
    curvature: f64,
    frames: &FrameSet,
) -> Result<PointResidual> {
    let sections = averaged_sections(&data.system, u, curvature, frames)?;
    let residual: Vec<f64> = sections
        .r_hat
        .value
        .iter()
        .zip(&sections.s_hat.value)
        .map(|(r, s)| r - s)
        .collect();
    let std_error = sections
        .r_hat
        .std_error
        .iter()
        .zip(&sections.s_hat.std_error)
        .map(|(a, b)| a + b)
        .fold(0.0, f64::max);
    Ok(PointResidual {
        point: data.point.clone(),
        norm: residual.iter().map(|v| v * v).sum::<f64>().sqrt(),
        h_hat: sections.h_hat.value,
        s_hat: sections.s_hat.value,
        r_hat: sections.r_hat.value,
        residual,
        std_error,
    })
}

pub fn residual_at(
    patch: &dyn ImmersedPatch,
    u: &MultiIndex,
    x: &[f64],
    frames: &FrameSet,
) -> Result<PointResidual> {
    check_index(patch, u)?;
    check_frames(patch, frames)?;
    let data = shape_system(patch, x)?;
    residual_from_data(&data, u, patch.ambient().curvature(), frames)
}

/// Pointwise residuals with summary norms and a verdict.
#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    pub patch: String,
    pub u: MultiIndex,
    pub curvature: f64,
    pub group: Group,
    pub scheme: SchemeKind,
    pub samples: usize,
    pub tolerance: f64,
    pub points: Vec<PointResidual>,
    pub sup_residual: f64,
    /// Quadrature `L²` norm on a mesh, root mean square on a point list.
    pub l2_residual: f64,
    pub max_std_error: f64,
    /// `tolerance + 3 · max_std_error`.
    pub threshold: f64,
    pub minimal: bool,
}

fn residual_report(
    patch: &dyn ImmersedPatch,
    u: &MultiIndex,
    nodes: Vec<QuadratureNode>,
    riemannian: bool,
    frames: &FrameSet,
    tolerance: f64,
) -> Result<MinimalityReport> {
    check_index(patch, u)?;
    check_frames(patch, frames)?;
    if !(tolerance >= 0.0) {
        return Err(argument("tolerance must be non-negative"));
    }
    let c = patch.ambient().curvature();
    let records: Vec<(PointResidual, f64)> = nodes
        .par_iter()
        .map(|node| {
            let data = shape_system(patch, &node.point)?;
            let weight = if riemannian {
                node.weight * data.area_element()
            } else {
                node.weight
            };
            Ok((residual_from_data(&data, u, c, frames)?, weight))
        })
        .collect::<Result<_>>()?;
    let sup_residual = records.iter().map(|(r, _)| r.norm).fold(0.0, f64::max);
    let max_std_error = records.iter().map(|(r, _)| r.std_error).fold(0.0, f64::max);
    let l2_residual = records
        .iter()
        .map(|(r, w)| w * r.norm * r.norm)
        .sum::<f64>()
        .sqrt();
    let threshold = tolerance + 3.0 * max_std_error;
    Ok(MinimalityReport {
        patch: patch.name(),
        u: u.clone(),
        curvature: c,
        group: frames.group(),
        scheme: frames.kind(),
        samples: frames.len(),
        tolerance,
        points: records.into_iter().map(|(r, _)| r).collect(),
        sup_residual,
        l2_residual,
        max_std_error,
        threshold,
        minimal: sup_residual <= threshold,
    })
}

/// Residual over the quadrature mesh of the chart.
pub fn minimality_residual(
    patch: &dyn ImmersedPatch,
    u: &MultiIndex,
    resolution: usize,
    frames: &FrameSet,
    tolerance: f64,
) -> Result<MinimalityReport> {
    let nodes = parameter_grid(patch.chart(), resolution)?;
    residual_report(patch, u, nodes, true, frames, tolerance)
}

/// Residual at the given parameter points.
pub fn minimality_at_points(
    patch: &dyn ImmersedPatch,
    u: &MultiIndex,
    points: &[Vec<f64>],
    frames: &FrameSet,
    tolerance: f64,
) -> Result<MinimalityReport> {
    if points.is_empty() {
        return Err(argument("at least one point is required"));
    }
    let w = 1.0 / points.len() as f64;
    let nodes = points
        .iter()
        .map(|p| QuadratureNode {
            point: p.clone(),
            weight: w,
        })
        .collect();
    residual_report(patch, u, nodes, false, frames, tolerance)
}

/// `∫_L σ̂_u dvol` with its uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub u: MultiIndex,
    pub resolution: usize,
    pub value: f64,
    /// Monte Carlo error of the integral (frames are shared by all nodes).
    pub std_error: f64,
    /// `|I(resolution) − I(resolution / 2)|`, when the coarse rule exists.
    pub quadrature_error: Option<f64>,
    /// `3 · std_error + quadrature_error`.
    pub uncertainty: f64,
}

/// Per-frame totals `Σ_nodes w · √det G · f(node, g)`, reduced in node order.
pub(crate) fn frame_totals<F>(
    patch: &dyn ImmersedPatch,
    nodes: &[QuadratureNode],
    frames: &FrameSet,
    integrand: F,
) -> Result<Vec<f64>>
where
    F: Fn(&PointFrameData, &DMatrix<f64>) -> Result<f64> + Sync,
{
    let partials: Vec<Vec<f64>> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut totals = vec![0.0; frames.len()];
            for node in chunk {
                let data = shape_system(patch, &node.point)?;
                let w = node.weight * data.area_element();
                for (total, g) in totals.iter_mut().zip(frames.rotations()) {
                    *total += w * integrand(&data, g)?;
                }
            }
            Ok(totals)
        })
        .collect::<Result<_>>()?;
    let mut totals = vec![0.0; frames.len()];
    for partial in partials {
        for (t, p) in totals.iter_mut().zip(partial) {
            *t += p;
        }
    }
    Ok(totals)
}

pub(crate) fn integrate_sigma(
    patch: &dyn ImmersedPatch,
    u: &MultiIndex,
    resolution: usize,
    frames: &FrameSet,
) -> Result<Vec<f64>> {
    let nodes = parameter_grid(patch.chart(), resolution)?;
    frame_totals(patch, &nodes, frames, |data, g| {
        Ok(evaluate_frame(&data.system, u, g)?.sigma)
    })
}

pub fn functional_value(
    patch: &dyn ImmersedPatch,
    u: &MultiIndex,
    resolution: usize,
    frames: &FrameSet,
) -> Result<FunctionalValue> {
    check_index(patch, u)?;
    check_frames(patch, frames)?;
    let (value, std_error) = frames.mean_and_error(&integrate_sigma(patch, u, resolution, frames)?);
    let quadrature_error = if resolution >= 4 {
        let (coarse, _) = frames.mean_and_error(&integrate_sigma(patch, u, resolution / 2, frames)?);
        Some((value - coarse).abs())
    } else {
        None
    };
    Ok(FunctionalValue {
        u: u.clone(),
        resolution,
        value,
        std_error,
        quadrature_error,
        uncertainty: 3.0 * std_error + quadrature_error.unwrap_or(0.0),
    })
}

/// `(½(|H|² − |B|²) − c(n − 1)) H − tr(B∘A^H) + tr(B∘A²)` in the frame of the
/// system, with `A^H = Σ_α H_α A_α` and `A² = Σ_β A_β²`.
pub fn example4_vector(system: &OperatorSystem, curvature: f64) -> Vec<f64> {
    let h = system.traces();
    let h_sq: f64 = h.iter().map(|v| v * v).sum();
    let b_sq = system.frobenius_sq();
    let a_h = system.combination(&h);
    let n = system.n();
    let a_sq = system
        .matrices()
        .iter()
        .fold(DMatrix::zeros(n, n), |acc, a| acc + a * a);
    let scalar = 0.5 * (h_sq - b_sq) - curvature * (n as f64 - 1.0);
    system
        .matrices()
        .iter()
        .zip(&h)
        .map(|(a, h_a)| scalar * h_a - (a * &a_h).trace() + (a * &a_sq).trace())
        .collect()
}

pub fn example4_condition(patch: &dyn ImmersedPatch, x: &[f64]) -> Result<Vec<f64>> {
    let data = shape_system(patch, x)?;
    Ok(example4_vector(&data.system, patch.ambient().curvature()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::haar::FiberScheme;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn zero_index_residual_is_mean_curvature() {
        let torus = gallery::revolution_torus(2.0, 0.5).unwrap();
        let frames = FrameSet::exact(1, Group::O, 0).unwrap();
        let report = minimality_residual(&torus, &mi(&[0]), 8, &frames, 1e-6).unwrap();
        assert!(!report.minimal);
        for p in &report.points {
            let data = shape_system(&torus, &p.point).unwrap();
            assert!((p.norm - data.mean_curvature_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_is_minimal_for_every_index() {
        let plane = gallery::plane(2, 2).unwrap();
        let frames = FrameSet::exact(2, Group::O, 8).unwrap();
        for u in crate::multiindex::enumerate(2, 2).unwrap() {
            let report = minimality_residual(&plane, &u, 4, &frames, 1e-12).unwrap();
            assert!(report.minimal, "{u}");
            assert_eq!(report.points.len(), 16);
        }
    }

    #[test]
    fn index_must_match_patch() {
        let plane = gallery::plane(2, 1).unwrap();
        let frames = FrameSet::exact(1, Group::O, 0).unwrap();
        assert!(minimality_residual(&plane, &mi(&[3]), 4, &frames, 1e-6).is_err());
        assert!(minimality_residual(&plane, &mi(&[1, 0]), 4, &frames, 1e-6).is_err());
    }

    #[test]
    fn sphere_functionals() {
        let sphere = gallery::umbilical_sphere(2, 1, 1.0).unwrap();
        let frames = FrameSet::exact(1, Group::O, 0).unwrap();
        let area = functional_value(&sphere, &mi(&[0]), 32, &frames).unwrap();
        assert!((area.value - 4.0 * PI).abs() < 1e-10, "{area:?}");
        let mean = functional_value(&sphere, &mi(&[1]), 16, &frames).unwrap();
        assert!(mean.value.abs() < 1e-12);
        let gauss = functional_value(&sphere, &mi(&[2]), 32, &frames).unwrap();
        assert!((gauss.value - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn example4_matches_frame_summed_sections() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames = FrameSet::exact(2, Group::O, 8).unwrap();
        for c in [0.0, 0.8] {
            for n in 2..=4 {
                let sym = |rng: &mut ChaCha8Rng| {
                    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                    (&m + m.transpose()) * 0.5
                };
                let system = OperatorSystem::new(vec![sym(&mut rng), sym(&mut rng)]).unwrap();
                let mut summed = DVector::<f64>::zeros(2);
                for beta in 0..2 {
                    let u = MultiIndex::zero(2).raise(beta + 1).unwrap().raise(beta + 1).unwrap();
                    let s = averaged_sections(&system, &u, c, &frames).unwrap();
                    for k in 0..2 {
                        summed[k] += s.r_hat.value[k] - s.s_hat.value[k];
                    }
                }
                let expected = example4_vector(&system, c);
                for k in 0..2 {
                    assert!((summed[k] + expected[k]).abs() < 1e-10, "c={c} n={n} {summed} {expected:?}");
                }
            }
        }
    }

    #[test]
    fn monte_carlo_functional_reports_error() {
        let torus = gallery::product_torus(1.0, 0.5).unwrap();
        let frames =
            FrameSet::build(2, Group::O, &FiberScheme::MonteCarlo { samples: 64, seed: 3 }).unwrap();
        let v = functional_value(&torus, &mi(&[1, 1]), 8, &frames).unwrap();
        assert!(v.std_error > 0.0);
        assert!(v.value.abs() <= 3.0 * v.std_error + 1e-12);
    }
}
