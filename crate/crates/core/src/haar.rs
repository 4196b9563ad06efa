//! Averages over the fiber of orthonormal normal frames.
//!
//! Fixing a reference frame `(e_1, …, e_q)` identifies the fiber with `O(q)`
//! (or `SO(q)`): `g` sends it to `e'_β = Σ_α e_α g_{αβ}`, under which the shape
//! operators become `A'_β = Σ_α g_{αβ} A_α`. Fiber integrals are averages over
//! the normalized Haar measure, estimated by Monte Carlo or, for `q ≤ 2`, by
//! exact quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::multiindex::MultiIndex;
use crate::newton::{newton_table, OperatorSystem};

pub const DEFAULT_SAMPLES: usize = 4096;
pub const DEFAULT_EXACT_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    O,
    SO,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::O => "O",
            Group::SO => "SO",
        })
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "O" | "o" => Ok(Group::O),
            "SO" | "so" => Ok(Group::SO),
            other => Err(argument(format!("unknown group {other:?}, expected O or SO"))),
        }
    }
}

/// An element of `O(q)` or `SO(q)` acting on normal frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRotation {
    matrix: DMatrix<f64>,
    group: Group,
}

impl FrameRotation {
    /// Validates `gᵀg = I` (within `1e-12`) and, for `SO`, `det g = +1`.
    pub fn new(matrix: DMatrix<f64>, group: Group) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(argument("frame rotation must be a non-empty square matrix"));
        }
        let q = matrix.nrows();
        let defect = (matrix.transpose() * &matrix - DMatrix::<f64>::identity(q, q)).amax();
        if defect > 1e-12 {
            return Err(argument(format!("matrix is not orthogonal (defect {defect:e})")));
        }
        if group == Group::SO && matrix.determinant() < 0.0 {
            return Err(argument("SO frame rotation must have determinant +1"));
        }
        Ok(FrameRotation { matrix, group })
    }

    pub fn identity(q: usize, group: Group) -> Self {
        FrameRotation {
            matrix: DMatrix::identity(q, q),
            group,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn q(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Haar-distributed element of `O(q)`/`SO(q)`: QR of a Gaussian matrix with the
/// columns of `Q` rescaled by the signs of `diag R`; for `SO` the last column is
/// flipped when the determinant is negative.
pub fn haar_sample<R: Rng + ?Sized>(q: usize, group: Group, rng: &mut R) -> FrameRotation {
    assert!(q >= 1, "q must be positive");
    let gaussian = DMatrix::from_fn(q, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gaussian.qr();
    let r = qr.r();
    let mut m = qr.q();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            m.column_mut(j).neg_mut();
        }
    }
    if group == Group::SO && m.determinant() < 0.0 {
        m.column_mut(q - 1).neg_mut();
    }
    FrameRotation { matrix: m, group }
}

/// `A'_β = Σ_α g_{αβ} A_α`: the shape operators in the frame `e·g`.
pub fn rotate_system(system: &OperatorSystem, g: &DMatrix<f64>) -> Result<OperatorSystem> {
    let q = system.q();
    if g.nrows() != q || g.ncols() != q {
        return Err(argument(format!(
            "rotation is {}×{}, system has q = {q}",
            g.nrows(),
            g.ncols()
        )));
    }
    let rotated = (0..q)
        .map(|beta| system.combination(g.column(beta).as_slice()))
        .collect();
    OperatorSystem::new(rotated)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    MonteCarlo,
    /// `O(1) = {±1}` or the trivial `SO(1)`.
    ExactQ1,
    /// Periodic trapezoid rule over the rotation angle.
    CircleSo2,
    /// Trapezoid rule over both components of `O(2)`.
    CircleO2,
}

/// How to integrate over the fiber.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum FiberScheme {
    MonteCarlo { samples: usize, seed: u64 },
    Exact { nodes: usize },
}

impl Default for FiberScheme {
    fn default() -> Self {
        FiberScheme::MonteCarlo {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// A weighted list of frame rotations realizing one fiber integration rule.
///
/// The same set is reused at every point of a mesh so that results are
/// reproducible and finite differences in a deformation parameter see common
/// random numbers.
#[derive(Clone, Debug)]
pub struct FrameSet {
    q: usize,
    group: Group,
    kind: SchemeKind,
    rotations: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
}

impl FrameSet {
    pub fn build(q: usize, group: Group, scheme: &FiberScheme) -> Result<Self> {
        match *scheme {
            FiberScheme::MonteCarlo { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Self::monte_carlo(q, group, samples, &mut rng)
            }
            FiberScheme::Exact { nodes } => Self::exact(q, group, nodes),
        }
    }

    pub fn monte_carlo<R: Rng + ?Sized>(
        q: usize,
        group: Group,
        samples: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if q == 0 {
            return Err(argument("q must be positive"));
        }
        if samples < 2 {
            return Err(argument("Monte Carlo averaging needs at least 2 samples"));
        }
        let rotations = (0..samples)
            .map(|_| haar_sample(q, group, rng).matrix)
            .collect();
        Ok(FrameSet {
            q,
            group,
            kind: SchemeKind::MonteCarlo,
            rotations,
            weights: vec![1.0 / samples as f64; samples],
        })
    }

    /// Exact rules: the two elements of `O(1)`, the identity for `SO(1)`, and
    /// an `nodes`-point trapezoid rule in the angle for `SO(2)` and for each
    /// coset of `O(2)`.
    ///
    /// The trapezoid rule integrates trigonometric polynomials of degree below
    /// `nodes` exactly; `σ_u` of the rotated system has degree `|u|`.
    pub fn exact(q: usize, group: Group, nodes: usize) -> Result<Self> {
        match (q, group) {
            (1, Group::O) => Ok(FrameSet {
                q,
                group,
                kind: SchemeKind::ExactQ1,
                rotations: vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, -1.0)],
                weights: vec![0.5, 0.5],
            }),
            (1, Group::SO) => Ok(FrameSet {
                q,
                group,
                kind: SchemeKind::ExactQ1,
                rotations: vec![DMatrix::from_element(1, 1, 1.0)],
                weights: vec![1.0],
            }),
            (2, _) => {
                if nodes == 0 {
                    return Err(argument("exact circle rule needs at least one node"));
                }
                let mut rotations = Vec::new();
                for k in 0..nodes {
                    let theta = 2.0 * PI * k as f64 / nodes as f64;
                    let (s, c) = theta.sin_cos();
                    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
                    if group == Group::O {
                        let mut reflected = rot.clone();
                        reflected.column_mut(1).neg_mut();
                        rotations.push(reflected);
                    }
                    rotations.push(rot);
                }
                let w = 1.0 / rotations.len() as f64;
                let weights = vec![w; rotations.len()];
                Ok(FrameSet {
                    q,
                    group,
                    kind: if group == Group::O {
                        SchemeKind::CircleO2
                    } else {
                        SchemeKind::CircleSo2
                    },
                    rotations,
                    weights,
                })
            }
            _ => Err(argument(format!(
                "exact fiber quadrature is available for q ≤ 2 only (q = {q}); use Monte Carlo"
            ))),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn rotations(&self) -> &[DMatrix<f64>] {
        &self.rotations
    }

    fn is_monte_carlo(&self) -> bool {
        self.kind == SchemeKind::MonteCarlo
    }

    /// Weighted average of a scalar function of the frame rotation.
    pub fn average<F>(&self, f: F) -> Result<FiberAverage>
    where
        F: Fn(&DMatrix<f64>) -> Result<f64>,
    {
        let values = self.rotations.iter().map(f).collect::<Result<Vec<f64>>>()?;
        let (value, std_error) = self.mean_and_error(&values);
        Ok(FiberAverage {
            value,
            std_error,
            samples: self.len(),
            scheme: self.kind,
        })
    }

    pub(crate) fn mean_and_error(&self, values: &[f64]) -> (f64, f64) {
        let mean: f64 = values.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        if !self.is_monte_carlo() {
            return (mean, 0.0);
        }
        let n = values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    pub(crate) fn vector_average(&self, rows: &[Vec<f64>]) -> FiberVectorAverage {
        let dim = rows.first().map_or(0, Vec::len);
        let mut value = Vec::with_capacity(dim);
        let mut std_error = Vec::with_capacity(dim);
        let mut column = Vec::with_capacity(rows.len());
        for k in 0..dim {
            column.clear();
            column.extend(rows.iter().map(|r| r[k]));
            let (m, e) = self.mean_and_error(&column);
            value.push(m);
            std_error.push(e);
        }
        FiberVectorAverage {
            value,
            std_error,
            samples: self.len(),
            scheme: self.kind,
        }
    }
}

/// A fiber average with its Monte Carlo standard error (zero for exact rules).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberAverage {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub scheme: SchemeKind,
}

/// A fiber-averaged normal vector, in coordinates of the reference frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberVectorAverage {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
    pub scheme: SchemeKind,
}

impl FiberVectorAverage {
    pub fn norm(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_std_error(&self) -> f64 {
        self.std_error.iter().copied().fold(0.0, f64::max)
    }

    fn scaled(&self, factor: f64) -> Self {
        FiberVectorAverage {
            value: self.value.iter().map(|v| v * factor).collect(),
            std_error: self.std_error.iter().map(|e| e * factor.abs()).collect(),
            samples: self.samples,
            scheme: self.scheme,
        }
    }
}

/// `σ_u`, `H_u` and `S_u` at a single frame, with the sections mapped back to
/// reference coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameEvaluation {
    pub sigma: f64,
    pub h: Vec<f64>,
    pub s: Vec<f64>,
}

/// Evaluates `σ_u`, `H_u = Σ_β σ_{β♭(u)} e'_β` and `S_u = Σ_β tr(A'_β T_u) e'_β`
/// in the frame `e' = e·g`, returning section coordinates in the frame `e`.
pub fn evaluate_frame(
    system: &OperatorSystem,
    u: &MultiIndex,
    g: &DMatrix<f64>,
) -> Result<FrameEvaluation> {
    check_index(system, u)?;
    let rotated = rotate_system(system, g)?;
    let table = newton_table(&rotated, u.length())?;
    let q = system.q();
    let t_u = table.newton(u).expect("|u| ≤ n");
    let h_rot: DVector<f64> = DVector::from_fn(q, |beta, _| table.sigma_or_zero(u.lowered(beta).as_ref()));
    let s_rot: DVector<f64> =
        DVector::from_fn(q, |beta, _| (&rotated.matrices()[beta] * t_u).trace());
    Ok(FrameEvaluation {
        sigma: table.sigma(u),
        h: (g * h_rot).iter().copied().collect(),
        s: (g * s_rot).iter().copied().collect(),
    })
}

fn check_index(system: &OperatorSystem, u: &MultiIndex) -> Result<()> {
    if u.q() != system.q() {
        return Err(argument(format!(
            "multi-index {u} has {} entries, system has q = {}",
            u.q(),
            system.q()
        )));
    }
    if u.length() > system.n() {
        return Err(argument(format!(
            "|u| = {} exceeds n = {}",
            u.length(),
            system.n()
        )));
    }
    Ok(())
}

fn check_frames(system: &OperatorSystem, frames: &FrameSet) -> Result<()> {
    if frames.q() != system.q() {
        return Err(argument(format!(
            "frame set is for q = {}, system has q = {}",
            frames.q(),
            system.q()
        )));
    }
    Ok(())
}

/// `σ̂_u`: the fiber average of `σ_u`.
pub fn sigma_hat(system: &OperatorSystem, u: &MultiIndex, frames: &FrameSet) -> Result<FiberAverage> {
    check_index(system, u)?;
    check_frames(system, frames)?;
    let len = u.length();
    frames.average(|g| Ok(newton_table(&rotate_system(system, g)?, len)?.sigma(u)))
}

/// Fiber averages `Ĥ_u`, `Ŝ_u` and, in a space form of curvature `c`,
/// `R̂_u = c (n + 1 − |u|) Ĥ_u`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragedSections {
    pub sigma_hat: FiberAverage,
    pub h_hat: FiberVectorAverage,
    pub s_hat: FiberVectorAverage,
    pub r_hat: FiberVectorAverage,
}

pub fn averaged_sections(
    system: &OperatorSystem,
    u: &MultiIndex,
    curvature: f64,
    frames: &FrameSet,
) -> Result<AveragedSections> {
    check_index(system, u)?;
    check_frames(system, frames)?;
    let evals = frames
        .rotations()
        .iter()
        .map(|g| evaluate_frame(system, u, g))
        .collect::<Result<Vec<_>>>()?;
    let sigmas: Vec<f64> = evals.iter().map(|e| e.sigma).collect();
    let (value, std_error) = frames.mean_and_error(&sigmas);
    let h_rows: Vec<Vec<f64>> = evals.iter().map(|e| e.h.clone()).collect();
    let s_rows: Vec<Vec<f64>> = evals.iter().map(|e| e.s.clone()).collect();
    let h_hat = frames.vector_average(&h_rows);
    let s_hat = frames.vector_average(&s_rows);
    let factor = curvature * (system.n() as f64 + 1.0 - u.length() as f64);
    Ok(AveragedSections {
        sigma_hat: FiberAverage {
            value,
            std_error,
            samples: frames.len(),
            scheme: frames.kind(),
        },
        r_hat: h_hat.scaled(factor),
        h_hat,
        s_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn q1_samples_are_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut plus = 0;
        for _ in 0..2000 {
            let g = haar_sample(1, Group::O, &mut rng);
            let v = g.matrix()[(0, 0)];
            assert!(v == 1.0 || v == -1.0);
            if v > 0.0 {
                plus += 1;
            }
            assert_eq!(haar_sample(1, Group::SO, &mut rng).matrix()[(0, 0)], 1.0);
        }
        // binomial(2000, 1/2): 3σ ≈ 67
        assert!((plus as i32 - 1000).abs() < 67, "{plus}");
    }

    #[test]
    fn samples_are_orthogonal_with_right_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for q in 1..=4 {
            for _ in 0..250 {
                let o = haar_sample(q, Group::O, &mut rng);
                let defect = (o.matrix().transpose() * o.matrix() - DMatrix::identity(q, q)).amax();
                assert!(defect <= 1e-12);
                let so = haar_sample(q, Group::SO, &mut rng);
                assert!((so.matrix().determinant() - 1.0).abs() < 1e-12);
                assert!(FrameRotation::new(so.matrix().clone(), Group::SO).is_ok());
            }
        }
    }

    #[test]
    fn rotation_validation() {
        assert!(FrameRotation::new(DMatrix::from_element(1, 1, -1.0), Group::SO).is_err());
        assert!(FrameRotation::new(DMatrix::from_element(1, 1, 0.9), Group::O).is_err());
    }

    #[test]
    fn rotate_system_examples() {
        let sys = OperatorSystem::new(vec![diag(&[1.0, 2.0]), diag(&[-3.0, 5.0])]).unwrap();
        assert_eq!(rotate_system(&sys, &DMatrix::identity(2, 2)).unwrap(), sys);
        // rotation by π/2: columns (0, 1) and (−1, 0)
        let quarter = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let r = rotate_system(&sys, &quarter).unwrap();
        assert_eq!(r.matrix(1), sys.matrix(2));
        assert_eq!(r.matrix(2), &-sys.matrix(1));

        let single = OperatorSystem::new(vec![diag(&[1.0, 2.0])]).unwrap();
        let flipped = rotate_system(&single, &DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert_eq!(flipped.matrix(1), &-single.matrix(1));
        assert!(rotate_system(&single, &quarter).is_err());
    }

    #[test]
    fn zero_index_averages_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = OperatorSystem::new(vec![random_symmetric(3, &mut rng), random_symmetric(3, &mut rng)]).unwrap();
        let frames = FrameSet::build(2, Group::O, &FiberScheme::MonteCarlo { samples: 64, seed: 9 }).unwrap();
        let avg = sigma_hat(&sys, &MultiIndex::zero(2), &frames).unwrap();
        assert_eq!(avg.value, 1.0);
        assert_eq!(avg.std_error, 0.0);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(FrameSet::build(2, Group::O, &FiberScheme::MonteCarlo { samples: 0, seed: 1 }).is_err());
        assert!(FrameSet::exact(3, Group::O, 8).is_err());
    }

    #[test]
    fn exact_q1_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = OperatorSystem::new(vec![random_symmetric(4, &mut rng)]).unwrap();
        let exact = FrameSet::exact(1, Group::O, 0).unwrap();
        let mc = FrameSet::build(1, Group::O, &FiberScheme::MonteCarlo { samples: 4096, seed: 5 }).unwrap();
        for k in 0..=4 {
            let u = mi(&[k]);
            let e = sigma_hat(&sys, &u, &exact).unwrap();
            let m = sigma_hat(&sys, &u, &mc).unwrap();
            assert_eq!(e.std_error, 0.0);
            assert!((e.value - m.value).abs() <= 3.0 * m.std_error + 1e-12, "k={k} {e:?} {m:?}");
            if k % 2 == 1 {
                assert!(e.value.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn circle_rules_agree_with_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sys = OperatorSystem::new(vec![random_symmetric(3, &mut rng), random_symmetric(3, &mut rng)]).unwrap();
        for group in [Group::O, Group::SO] {
            let exact = FrameSet::exact(2, group, 16).unwrap();
            let mc = FrameSet::build(2, group, &FiberScheme::MonteCarlo { samples: 4096, seed: 7 }).unwrap();
            for u in crate::multiindex::enumerate(2, 3).unwrap() {
                let e = sigma_hat(&sys, &u, &exact).unwrap();
                let m = sigma_hat(&sys, &u, &mc).unwrap();
                assert!((e.value - m.value).abs() <= 3.5 * m.std_error + 1e-14, "{group} {u} {e:?} {m:?}");
            }
        }
    }

    #[test]
    fn codimension_one_sections() {
        // q = 1: H_(r) = σ_{r−1} N and S_(r) = tr(A T_r) N = (r+1) σ_{r+1} N
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_symmetric(4, &mut rng);
        let sys = OperatorSystem::new(vec![a]).unwrap();
        let table = newton_table(&sys, 4).unwrap();
        let id = DMatrix::identity(1, 1);
        for r in 0..4usize {
            let ev = evaluate_frame(&sys, &mi(&[r]), &id).unwrap();
            let expected_h = if r == 0 { 0.0 } else { table.sigma(&mi(&[r - 1])) };
            assert!((ev.h[0] - expected_h).abs() < 1e-12);
            let expected_s = (r as f64 + 1.0) * table.sigma(&mi(&[r + 1]));
            assert!((ev.s[0] - expected_s).abs() < 1e-12, "r={r}");
        }
    }

    #[test]
    fn zero_index_sections_give_mean_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sys = OperatorSystem::new(vec![random_symmetric(3, &mut rng), random_symmetric(3, &mut rng)]).unwrap();
        let frames = FrameSet::build(2, Group::O, &FiberScheme::MonteCarlo { samples: 128, seed: 1 }).unwrap();
        let sec = averaged_sections(&sys, &MultiIndex::zero(2), 0.7, &frames).unwrap();
        let traces = sys.traces();
        for k in 0..2 {
            assert_eq!(sec.h_hat.value[k], 0.0);
            assert!((sec.s_hat.value[k] - traces[k]).abs() < 1e-12);
            // S_0 is frame-independent, so its spread is rounding only
            assert!(sec.s_hat.std_error[k] < 1e-12);
        }
    }

    #[test]
    fn totally_geodesic_sections_vanish() {
        let sys = OperatorSystem::zeros(3, 2).unwrap();
        let frames = FrameSet::exact(2, Group::O, 8).unwrap();
        for u in crate::multiindex::enumerate(2, 3).unwrap() {
            let sec = averaged_sections(&sys, &u, 1.0, &frames).unwrap();
            assert!(sec.h_hat.norm() == 0.0 || u.length() == 1, "{u}");
            assert_eq!(sec.s_hat.norm(), 0.0);
            if u.length() >= 2 {
                assert_eq!(sec.r_hat.norm(), 0.0);
            }
        }
    }
}
