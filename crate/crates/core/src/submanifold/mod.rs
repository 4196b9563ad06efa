//! Extrinsic geometry of parametrized patches in Euclidean space or a round
//! sphere.
//!
//! Conventions: `B(X, Y)` is the normal part of the ambient second derivative
//! and `⟨A^N X, Y⟩ = ⟨B(X, Y), N⟩`, so the unit sphere with its outward normal
//! has `A = −I`. Sphere points are given in the enclosing Euclidean space.

mod quadrature;

pub use quadrature::{gauss_legendre, mesh_quadrature, parameter_grid, patch_volume, QuadratureNode};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{argument, Error, Result};
use crate::newton::OperatorSystem;

/// Immersion check: smallest Jacobian singular value relative to the largest.
pub const RANK_TOLERANCE: f64 = 1e-6;
/// Allowed deviation of `|φ|` from the sphere radius.
pub const SPHERE_TOLERANCE: f64 = 1e-9;
/// Default finite-difference step relative to the chart scale.
pub const FD_RELATIVE_STEP: f64 = 1e-4;

/// A space form: Euclidean `R^m` or the round sphere `S^m(r) ⊂ R^{m+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbientSpec {
    Euclidean { dim: usize },
    Sphere { dim: usize, radius: f64 },
}

impl AmbientSpec {
    pub fn euclidean(dim: usize) -> Self {
        AmbientSpec::Euclidean { dim }
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(argument(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(AmbientSpec::Sphere { dim, radius })
    }

    pub fn dim(&self) -> usize {
        match *self {
            AmbientSpec::Euclidean { dim } | AmbientSpec::Sphere { dim, .. } => dim,
        }
    }

    /// Dimension of the Euclidean space holding the points.
    pub fn enclosing_dim(&self) -> usize {
        match *self {
            AmbientSpec::Euclidean { dim } => dim,
            AmbientSpec::Sphere { dim, .. } => dim + 1,
        }
    }

    pub fn curvature(&self) -> f64 {
        match *self {
            AmbientSpec::Euclidean { .. } => 0.0,
            AmbientSpec::Sphere { radius, .. } => 1.0 / (radius * radius),
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            AmbientSpec::Euclidean { .. } => None,
            AmbientSpec::Sphere { radius, .. } => Some(radius),
        }
    }
}

/// Parameter box; periodic axes identify `lower` with `upper`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chart {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl Chart {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, periodic: Vec<bool>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != periodic.len() {
            return Err(argument("chart bounds must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(argument("chart needs finite bounds with lower < upper"));
        }
        Ok(Chart {
            lower,
            upper,
            periodic,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Largest axis width.
    pub fn scale(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    pub fn is_closed(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    /// Maps `s ∈ [0, 1]^n` into the chart, keeping a relative `margin` away
    /// from non-periodic boundaries.
    pub fn interior_point(&self, s: &[f64], margin: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let t = if self.periodic[i] {
                    s[i]
                } else {
                    margin + (1.0 - 2.0 * margin) * s[i]
                };
                self.lower[i] + t * self.width(i)
            })
            .collect()
    }
}

/// Value, first and second partial derivatives of a map at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: DVector<f64>,
    /// Columns `∂_i φ`.
    pub first: DMatrix<f64>,
    /// `∂_i ∂_j φ` stored at `i * n + j`.
    pub second: Vec<DVector<f64>>,
}

impl Jet {
    pub fn dim(&self) -> usize {
        self.first.ncols()
    }

    pub fn second(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.second[i * self.dim() + j]
    }

    /// `self + t · other`, component-wise.
    pub fn add_scaled(&self, other: &Jet, t: f64) -> Jet {
        Jet {
            value: &self.value + &other.value * t,
            first: &self.first + &other.first * t,
            second: self
                .second
                .iter()
                .zip(&other.second)
                .map(|(a, b)| a + b * t)
                .collect(),
        }
    }
}

/// Central-difference jet with step `h`; mixed partials use the four-point
/// stencil.
pub fn fd_jet<F>(f: F, x: &[f64], h: f64) -> Jet
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let n = x.len();
    let value = f(x);
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in moves {
            y[i] += d;
        }
        f(&y)
    };
    let mut first = DMatrix::zeros(value.len(), n);
    let mut second = vec![DVector::zeros(value.len()); n * n];
    for i in 0..n {
        let plus = shifted(&[(i, h)]);
        let minus = shifted(&[(i, -h)]);
        first.set_column(i, &((&plus - &minus) / (2.0 * h)));
        second[i * n + i] = (&plus - &value * 2.0 + &minus) / (h * h);
        for j in 0..i {
            let d = (shifted(&[(i, h), (j, h)]) - shifted(&[(i, h), (j, -h)])
                - shifted(&[(i, -h), (j, h)])
                + shifted(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            second[i * n + j] = d.clone();
            second[j * n + i] = d;
        }
    }
    Jet {
        value,
        first,
        second,
    }
}

/// Richardson extrapolation of [`fd_jet`] from steps `h` and `h/2`, accurate
/// to `O(h⁴)`.
pub fn fd_jet_extrapolated<F>(f: F, x: &[f64], h: f64) -> Jet
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let coarse = fd_jet(&f, x, h);
    let fine = fd_jet(&f, x, 0.5 * h);
    let combine = |c: &DVector<f64>, f: &DVector<f64>| (f * 4.0 - c) / 3.0;
    Jet {
        value: fine.value.clone(),
        first: (&fine.first * 4.0 - &coarse.first) / 3.0,
        second: coarse.second.iter().zip(&fine.second).map(|(c, f)| combine(c, f)).collect(),
    }
}

/// A parametrized immersion `φ: chart → ambient`.
///
/// Implementations must be pure functions of the parameter point.
pub trait ImmersedPatch: Send + Sync {
    fn name(&self) -> String;

    fn ambient(&self) -> AmbientSpec;

    fn chart(&self) -> &Chart;

    /// `φ(x)` in enclosing Euclidean coordinates.
    fn eval(&self, x: &[f64]) -> DVector<f64>;

    /// Defaults to central differences with step [`ImmersedPatch::fd_step`].
    fn jet(&self, x: &[f64]) -> Jet {
        fd_jet(|y| self.eval(y), x, self.fd_step())
    }

    fn fd_step(&self) -> f64 {
        FD_RELATIVE_STEP * self.chart().scale()
    }

    /// Whether [`ImmersedPatch::jet`] is exact rather than finite differences.
    fn analytic(&self) -> bool {
        false
    }

    fn dim(&self) -> usize {
        self.chart().dim()
    }

    fn codim(&self) -> usize {
        self.ambient().dim() - self.dim()
    }
}

/// Orthonormal tangent and normal frames at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Frames {
    /// `m × n`, columns `e_1, …, e_n`.
    pub tangent: DMatrix<f64>,
    /// `m × q`, columns `e_{n+1}, …, e_{n+q}`; orthogonal to the radial
    /// direction for a sphere ambient.
    pub normal: DMatrix<f64>,
    /// Unit radial vector `φ/|φ|` for a sphere ambient.
    pub radial: Option<DVector<f64>>,
    /// Gram factor: `∂φ = tangent · gram_factor`, upper triangular.
    pub gram_factor: DMatrix<f64>,
}

impl Frames {
    /// `√det G`.
    pub fn area_element(&self) -> f64 {
        self.gram_factor.diagonal().iter().map(|d| d.abs()).product()
    }

    /// Enclosing-space vector with the given normal-frame coordinates.
    pub fn normal_vector(&self, coords: &[f64]) -> DVector<f64> {
        &self.normal * DVector::from_row_slice(coords)
    }

    /// Orthogonal projection onto the normal space.
    pub fn normal_projection(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.normal * (self.normal.transpose() * v)
    }
}

fn check_point(patch: &dyn ImmersedPatch, x: &[f64]) -> Result<()> {
    if x.len() != patch.dim() {
        return Err(argument(format!(
            "point has {} coordinates, patch dimension is {}",
            x.len(),
            patch.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(argument("point coordinates must be finite"));
    }
    Ok(())
}

/// Builds frames from a jet: modified Gram–Schmidt on the Jacobian columns,
/// then greedy completion by coordinate axes (largest residual first).
pub fn frames_from_jet(ambient: &AmbientSpec, x: &[f64], jet: &Jet) -> Result<Frames> {
    let m = ambient.enclosing_dim();
    let n = jet.dim();
    if jet.value.len() != m || jet.first.nrows() != m {
        return Err(argument(format!(
            "patch values have {} coordinates, ambient needs {m}",
            jet.value.len()
        )));
    }
    if n > ambient.dim() {
        return Err(argument("patch dimension exceeds ambient dimension"));
    }

    let singular = jet.first.clone().singular_values();
    let largest = singular.max();
    let smallest = singular.min();
    if !(smallest >= RANK_TOLERANCE * largest) || largest == 0.0 {
        return Err(Error::NotImmersed {
            point: x.to_vec(),
            singular_value: smallest,
            largest,
        });
    }

    let radial = match ambient.radius() {
        Some(radius) => {
            let norm = jet.value.norm();
            if (norm - radius).abs() > SPHERE_TOLERANCE * radius.max(1.0) {
                return Err(Error::NotOnSphere {
                    point: x.to_vec(),
                    norm,
                    radius,
                });
            }
            Some(&jet.value / norm)
        }
        None => None,
    };

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut gram_factor = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = jet.first.column(j).into_owned();
        for (k, e) in basis.iter().enumerate() {
            let c = e.dot(&v);
            gram_factor[(k, j)] = c;
            v -= e * c;
        }
        let norm = v.norm();
        gram_factor[(j, j)] = norm;
        basis.push(v / norm);
    }
    if let Some(r) = &radial {
        basis.push(r.clone());
    }

    let q = ambient.dim() - n;
    let mut normals: Vec<DVector<f64>> = Vec::with_capacity(q);
    for _ in 0..q {
        let residual = |k: usize| {
            let mut v = DVector::zeros(m);
            v[k] = 1.0;
            for _ in 0..2 {
                for e in basis.iter().chain(&normals) {
                    let c = e.dot(&v);
                    v -= e * c;
                }
            }
            v
        };
        let best = (0..m)
            .map(residual)
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("m ≥ 1");
        let unit = &best / best.norm();
        normals.push(unit);
    }

    let tangent = DMatrix::from_columns(&basis[..n]);
    let mut normal = if q == 0 {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&normals)
    };
    if q > 0 {
        let mut columns: Vec<DVector<f64>> = basis[..n].to_vec();
        columns.extend(normals.iter().cloned());
        if let Some(r) = &radial {
            columns.push(r.clone());
        }
        if DMatrix::from_columns(&columns).determinant() < 0.0 {
            normal.column_mut(q - 1).neg_mut();
        }
    }
    Ok(Frames {
        tangent,
        normal,
        radial,
        gram_factor,
    })
}

pub fn tangent_normal_frames(patch: &dyn ImmersedPatch, x: &[f64]) -> Result<Frames> {
    check_point(patch, x)?;
    frames_from_jet(&patch.ambient(), x, &patch.jet(x))
}

/// Extrinsic data at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFrameData {
    pub point: Vec<f64>,
    pub position: DVector<f64>,
    pub frames: Frames,
    /// Shape operators `A_α` in the orthonormal tangent frame.
    pub system: OperatorSystem,
    /// `(tr A_1, …, tr A_q)`.
    pub mean_curvature: Vec<f64>,
    /// `Σ_α ‖A_α‖_F²`.
    pub b_norm_sq: f64,
}

impl PointFrameData {
    pub fn area_element(&self) -> f64 {
        self.frames.area_element()
    }

    pub fn mean_curvature_norm(&self) -> f64 {
        self.mean_curvature.iter().map(|h| h * h).sum::<f64>().sqrt()
    }
}

/// `h^α = R^{−T} K_α R^{−1}` with `K_α[k][l] = ⟨∂_k∂_l φ, e_α⟩` and `R` the
/// Gram factor of the Jacobian.
pub fn shape_system_from_jet(ambient: &AmbientSpec, x: &[f64], jet: &Jet) -> Result<PointFrameData> {
    let frames = frames_from_jet(ambient, x, jet)?;
    let n = jet.dim();
    let q = frames.normal.ncols();
    if q == 0 {
        return Err(argument("patch has codimension 0"));
    }
    let r_inv = frames
        .gram_factor
        .clone()
        .try_inverse()
        .ok_or_else(|| argument("singular Gram factor"))?;
    let matrices: Vec<DMatrix<f64>> = (0..q)
        .map(|alpha| {
            let nu = frames.normal.column(alpha);
            let mut k = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = jet.second(i, j).dot(&nu);
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            r_inv.transpose() * k * &r_inv
        })
        .collect();
    let system = OperatorSystem::new(matrices)?;
    Ok(PointFrameData {
        point: x.to_vec(),
        position: jet.value.clone(),
        mean_curvature: system.traces(),
        b_norm_sq: system.frobenius_sq(),
        frames,
        system,
    })
}

pub fn shape_system(patch: &dyn ImmersedPatch, x: &[f64]) -> Result<PointFrameData> {
    check_point(patch, x)?;
    shape_system_from_jet(&patch.ambient(), x, &patch.jet(x))
}

/// A patch composed with a fixed linear isometry of the enclosing space.
pub struct RotatedPatch<'a> {
    pub base: &'a dyn ImmersedPatch,
    pub rotation: DMatrix<f64>,
}

impl ImmersedPatch for RotatedPatch<'_> {
    fn name(&self) -> String {
        format!("rotated {}", self.base.name())
    }

    fn ambient(&self) -> AmbientSpec {
        self.base.ambient()
    }

    fn chart(&self) -> &Chart {
        self.base.chart()
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        &self.rotation * self.base.eval(x)
    }

    fn jet(&self, x: &[f64]) -> Jet {
        let jet = self.base.jet(x);
        Jet {
            value: &self.rotation * jet.value,
            first: &self.rotation * jet.first,
            second: jet.second.iter().map(|v| &self.rotation * v).collect(),
        }
    }

    fn fd_step(&self) -> f64 {
        self.base.fd_step()
    }

    fn analytic(&self) -> bool {
        self.base.analytic()
    }
}
