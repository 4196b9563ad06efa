//! Explicit immersions used as test patches.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, Error, Result};
use crate::submanifold::{AmbientSpec, Chart, ImmersedPatch, Jet};

/// Single-variable factor of a separable term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Factor {
    One,
    Sin,
    Cos,
    Pow(i32),
}

impl Factor {
    /// Value and first two derivatives.
    fn jet(self, x: f64) -> [f64; 3] {
        match self {
            Factor::One => [1.0, 0.0, 0.0],
            Factor::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s]
            }
            Factor::Cos => {
                let (s, c) = x.sin_cos();
                [c, -s, -c]
            }
            Factor::Pow(0) => [1.0, 0.0, 0.0],
            Factor::Pow(k) => {
                let kf = k as f64;
                let d2 = if k >= 2 { kf * (kf - 1.0) * x.powi(k - 2) } else { 0.0 };
                [x.powi(k), kf * x.powi(k - 1), d2]
            }
        }
    }
}

/// `coeff · Π_j factors[j](x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

/// A map whose coordinates are sums of separable terms, with exact jets.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableMap {
    dim: usize,
    coords: Vec<Vec<Term>>,
}

impl SeparableMap {
    pub fn new(dim: usize, coords: Vec<Vec<Term>>) -> Result<Self> {
        if coords.iter().flatten().any(|t| t.factors.len() != dim) {
            return Err(argument("every term needs one factor per parameter"));
        }
        Ok(SeparableMap { dim, coords })
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.coords.len(),
            self.coords.iter().map(|terms| {
                terms
                    .iter()
                    .map(|t| t.coeff * t.factors.iter().zip(x).map(|(f, &xi)| f.jet(xi)[0]).product::<f64>())
                    .sum()
            }),
        )
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        let n = self.dim;
        let m = self.coords.len();
        let mut value = DVector::zeros(m);
        let mut first = DMatrix::zeros(m, n);
        let mut second = vec![DVector::zeros(m); n * n];
        for (k, terms) in self.coords.iter().enumerate() {
            for term in terms {
                let jets: Vec<[f64; 3]> = term.factors.iter().zip(x).map(|(f, &xi)| f.jet(xi)).collect();
                // product with derivative orders `orders[j]` on each axis
                let product = |orders: &dyn Fn(usize) -> usize| -> f64 {
                    term.coeff * jets.iter().enumerate().map(|(j, d)| d[orders(j)]).product::<f64>()
                };
                value[k] += product(&|_| 0);
                for i in 0..n {
                    first[(k, i)] += product(&|j| usize::from(j == i));
                    for l in 0..n {
                        let d = if i == l {
                            product(&|j| if j == i { 2 } else { 0 })
                        } else {
                            product(&|j| usize::from(j == i || j == l))
                        };
                        second[i * n + l][k] += d;
                    }
                }
            }
        }
        Jet {
            value,
            first,
            second,
        }
    }
}

/// A patch given by a [`SeparableMap`].
#[derive(Clone, Debug)]
pub struct SeparablePatch {
    name: String,
    ambient: AmbientSpec,
    chart: Chart,
    map: SeparableMap,
    analytic: bool,
}

impl SeparablePatch {
    pub fn new(name: String, ambient: AmbientSpec, chart: Chart, map: SeparableMap) -> Result<Self> {
        if map.dim != chart.dim() || map.coords.len() != ambient.enclosing_dim() {
            return Err(argument("map dimensions do not match chart and ambient"));
        }
        Ok(SeparablePatch {
            name,
            ambient,
            chart,
            map,
            analytic: true,
        })
    }

    /// The same patch with finite-difference derivatives.
    pub fn with_fd_derivatives(mut self) -> Self {
        self.analytic = false;
        self.name = format!("{} (fd)", self.name);
        self
    }
}

impl ImmersedPatch for SeparablePatch {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn ambient(&self) -> AmbientSpec {
        self.ambient
    }

    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        self.map.eval(x)
    }

    fn jet(&self, x: &[f64]) -> Jet {
        if self.analytic {
            self.map.jet(x)
        } else {
            crate::submanifold::fd_jet(|y| self.map.eval(y), x, self.fd_step())
        }
    }

    fn analytic(&self) -> bool {
        self.analytic
    }
}

fn term(coeff: f64, factors: Vec<Factor>) -> Term {
    Term { coeff, factors }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(argument(format!("{name} must be positive, got {v}")))
    }
}

/// Hyperspherical coordinates of `S^n(r) ⊂ R^{n+1}`:
/// `y_k = r Π_{j<k} sin θ_j · cos θ_k` for `k < n`, `y_n = r Π_{j<n} sin θ_j`.
/// The last angle is periodic, the others range over `(0, π)`.
fn sphere_coordinates(n: usize, r: f64) -> (Chart, Vec<Vec<Term>>) {
    let coords = (0..=n)
        .map(|k| {
            let factors = (0..n)
                .map(|j| match j.cmp(&k) {
                    std::cmp::Ordering::Less => Factor::Sin,
                    std::cmp::Ordering::Equal => Factor::Cos,
                    std::cmp::Ordering::Greater => Factor::One,
                })
                .collect();
            vec![term(r, factors)]
        })
        .collect();
    let mut upper = vec![PI; n];
    upper[n - 1] = 2.0 * PI;
    let mut periodic = vec![false; n];
    periodic[n - 1] = true;
    let chart = Chart::new(vec![0.0; n], upper, periodic).expect("valid bounds");
    (chart, coords)
}

/// Flat `[−1, 1]^n ⊂ R^{n+q}`.
pub fn plane(n: usize, q: usize) -> Result<SeparablePatch> {
    if n == 0 || q == 0 {
        return Err(argument("plane needs n ≥ 1 and q ≥ 1"));
    }
    let mut coords: Vec<Vec<Term>> = (0..n)
        .map(|k| {
            let factors = (0..n).map(|j| if j == k { Factor::Pow(1) } else { Factor::One }).collect();
            vec![term(1.0, factors)]
        })
        .collect();
    coords.extend((0..q).map(|_| Vec::new()));
    SeparablePatch::new(
        format!("plane:n={n},q={q}"),
        AmbientSpec::euclidean(n + q),
        Chart::new(vec![-1.0; n], vec![1.0; n], vec![false; n])?,
        SeparableMap::new(n, coords)?,
    )
}

/// `S^n(r) ⊂ R^{n+1} ⊂ R^{n+q}`.
pub fn umbilical_sphere(n: usize, q: usize, r: f64) -> Result<SeparablePatch> {
    if n == 0 || q == 0 {
        return Err(argument("umbilical sphere needs n ≥ 1 and q ≥ 1"));
    }
    positive("r", r)?;
    let (chart, mut coords) = sphere_coordinates(n, r);
    coords.extend((1..q).map(|_| Vec::new()));
    SeparablePatch::new(
        format!("umbilical:n={n},q={q},r={r}"),
        AmbientSpec::euclidean(n + q),
        chart,
        SeparableMap::new(n, coords)?,
    )
}

/// `S^n(ρ) ⊂ S^{n+q}(r)`: a small sphere at height `√(r² − ρ²)` inside an
/// `S^{n+1}(r)`, plus `q − 1` totally geodesic normal directions.
pub fn sphere_in_sphere(n: usize, q: usize, r: f64, rho: f64) -> Result<SeparablePatch> {
    if n == 0 || q == 0 {
        return Err(argument("sphere-in-sphere needs n ≥ 1 and q ≥ 1"));
    }
    positive("r", r)?;
    positive("rho", rho)?;
    if rho > r {
        return Err(argument(format!("rho = {rho} exceeds r = {r}")));
    }
    let (chart, mut coords) = sphere_coordinates(n, rho);
    coords.push(vec![term((r * r - rho * rho).sqrt(), vec![Factor::One; n])]);
    coords.extend((1..q).map(|_| Vec::new()));
    SeparablePatch::new(
        format!("sphere-in-sphere:n={n},q={q},r={r},rho={rho}"),
        AmbientSpec::sphere(n + q, r)?,
        chart,
        SeparableMap::new(n, coords)?,
    )
}

/// Torus of revolution in `R³` with center-circle radius `big_r` and tube
/// radius `a`.
pub fn revolution_torus(big_r: f64, a: f64) -> Result<SeparablePatch> {
    positive("R", big_r)?;
    positive("a", a)?;
    if a >= big_r {
        return Err(argument("torus needs a < R"));
    }
    use Factor::*;
    let coords = vec![
        vec![term(big_r, vec![Cos, One]), term(a, vec![Cos, Cos])],
        vec![term(big_r, vec![Sin, One]), term(a, vec![Sin, Cos])],
        vec![term(a, vec![One, Sin])],
    ];
    SeparablePatch::new(
        format!("torus:R={big_r},a={a}"),
        AmbientSpec::euclidean(3),
        Chart::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI], vec![true, true])?,
        SeparableMap::new(2, coords)?,
    )
}

/// `S¹(a) × S¹(b) ⊂ R⁴`.
pub fn product_torus(a: f64, b: f64) -> Result<SeparablePatch> {
    positive("a", a)?;
    positive("b", b)?;
    use Factor::*;
    let coords = vec![
        vec![term(a, vec![Cos, One])],
        vec![term(a, vec![Sin, One])],
        vec![term(b, vec![One, Cos])],
        vec![term(b, vec![One, Sin])],
    ];
    SeparablePatch::new(
        format!("product-torus:a={a},b={b}"),
        AmbientSpec::euclidean(4),
        Chart::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI], vec![true, true])?,
        SeparableMap::new(2, coords)?,
    )
}

/// Enneper's minimal surface over `[−0.8, 0.8]²`, with finite-difference
/// derivatives.
pub fn enneper() -> Result<SeparablePatch> {
    use Factor::*;
    let coords = vec![
        vec![
            term(1.0, vec![Pow(1), One]),
            term(-1.0 / 3.0, vec![Pow(3), One]),
            term(1.0, vec![Pow(1), Pow(2)]),
        ],
        vec![
            term(-1.0, vec![One, Pow(1)]),
            term(1.0 / 3.0, vec![One, Pow(3)]),
            term(-1.0, vec![Pow(2), Pow(1)]),
        ],
        vec![term(1.0, vec![Pow(2), One]), term(-1.0, vec![One, Pow(2)])],
    ];
    Ok(SeparablePatch::new(
        "enneper".into(),
        AmbientSpec::euclidean(3),
        Chart::new(vec![-0.8, -0.8], vec![0.8, 0.8], vec![false, false])?,
        SeparableMap::new(2, coords)?,
    )?
    .with_fd_derivatives())
}

/// Tolerance of the Veronese construction oracles.
pub const VERONESE_ORACLE_TOLERANCE: f64 = 1e-10;

/// Outcome of the Veronese construction oracles.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct VeroneseOracles {
    /// Scale of the four components `yz, zx, xy, (x² − y²)/2`.
    pub scale_a: f64,
    /// Scale of the component `(x² + y² − 2z²)/(2√3)`.
    pub scale_b: f64,
    pub max_radius_error: f64,
    pub max_metric_error: f64,
    pub points: usize,
}

/// The quadratic map of the unit 2-sphere into a 4-sphere, in spherical
/// coordinates `(θ, ψ)`. Its two scale constants are solved for from the
/// radius and isometry conditions and then verified at random points.
#[derive(Clone, Debug)]
pub struct Veronese {
    chart: Chart,
    forms: [Matrix3<f64>; 5],
    radius: f64,
    oracles: VeroneseOracles,
}

impl Veronese {
    pub fn new() -> Result<Self> {
        Self::with_radius(1.0 / 3f64.sqrt())
    }

    /// Builds the patch for a target ambient radius; only `1/√3` admits an
    /// isometric immersion of `S²(1)`, others are rejected by the oracles.
    pub fn with_radius(radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        let raw = raw_forms();
        let chart = Chart::new(vec![0.0, 0.0], vec![PI, 2.0 * PI], vec![false, true])?;
        // unknowns (a², b²): |φ|² = r² at one point, g_θθ = 1 at another
        let probe = [0.9, 0.4];
        let s = unit_sphere_jet(&probe);
        let norm_row = split_sq(&raw, |f| quad(f, &s.0, &s.0));
        let metric_row = split_sq(&raw, |f| 2.0 * quad(f, &s.0, &s.1[0]));
        let system = nalgebra::Matrix2::new(norm_row.0, norm_row.1, metric_row.0, metric_row.1);
        let rhs = nalgebra::Vector2::new(radius * radius, 1.0);
        let solution = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Construction("scale system is singular".into()))?;
        if solution[0] <= 0.0 || solution[1] <= 0.0 {
            return Err(Error::Construction(format!(
                "no real scales satisfy the oracles (a² = {}, b² = {})",
                solution[0], solution[1]
            )));
        }
        let (a, b) = (solution[0].sqrt(), solution[1].sqrt());
        let mut forms = raw;
        for f in forms.iter_mut().take(4) {
            *f *= a;
        }
        forms[4] *= b;

        let mut patch = Veronese {
            chart,
            forms,
            radius,
            oracles: VeroneseOracles {
                scale_a: a,
                scale_b: b,
                max_radius_error: 0.0,
                max_metric_error: 0.0,
                points: 0,
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let points = 200;
        let (mut radius_error, mut metric_error) = (0.0f64, 0.0f64);
        for _ in 0..points {
            let x = patch.chart.interior_point(&[rng.random(), rng.random()], 0.01);
            let jet = patch.jet(&x);
            radius_error = radius_error.max((jet.value.norm() - radius).abs());
            let gram = jet.first.transpose() * &jet.first;
            let round = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, x[0].sin().powi(2)]));
            metric_error = metric_error.max((gram - round).amax());
        }
        patch.oracles.max_radius_error = radius_error;
        patch.oracles.max_metric_error = metric_error;
        patch.oracles.points = points;
        if radius_error > VERONESE_ORACLE_TOLERANCE || metric_error > VERONESE_ORACLE_TOLERANCE {
            return Err(Error::Construction(format!(
                "oracles failed: radius error {radius_error:e}, metric error {metric_error:e}"
            )));
        }
        Ok(patch)
    }

    pub fn oracles(&self) -> &VeroneseOracles {
        &self.oracles
    }
}

fn quad(f: &Matrix3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(&(f * b))
}

/// Coefficients of `a²` and `b²` in `Σ_k g(F_k)²`.
fn split_sq(forms: &[Matrix3<f64>; 5], g: impl Fn(&Matrix3<f64>) -> f64) -> (f64, f64) {
    let a = forms[..4].iter().map(|f| g(f).powi(2)).sum::<f64>();
    (a, g(&forms[4]).powi(2))
}

/// Symmetric matrices `F_k` with `V_k(x) = xᵀ F_k x` for
/// `yz, zx, xy, (x² − y²)/2, (x² + y² − 2z²)/(2√3)`.
fn raw_forms() -> [Matrix3<f64>; 5] {
    let c = 1.0 / (2.0 * 3f64.sqrt());
    [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0),
        Matrix3::new(0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0),
        Matrix3::new(0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.5, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(c, 0.0, 0.0, 0.0, c, 0.0, 0.0, 0.0, -2.0 * c),
    ]
}

/// `s(θ, ψ) = (sin θ cos ψ, sin θ sin ψ, cos θ)` with first and second
/// partials (`second[i * 2 + j]`).
fn unit_sphere_jet(x: &[f64]) -> (Vector3<f64>, [Vector3<f64>; 2], [Vector3<f64>; 4]) {
    let (st, ct) = x[0].sin_cos();
    let (sp, cp) = x[1].sin_cos();
    let s = Vector3::new(st * cp, st * sp, ct);
    let d_theta = Vector3::new(ct * cp, ct * sp, -st);
    let d_psi = Vector3::new(-st * sp, st * cp, 0.0);
    let tt = Vector3::new(-st * cp, -st * sp, -ct);
    let tp = Vector3::new(-ct * sp, ct * cp, 0.0);
    let pp = Vector3::new(-st * cp, -st * sp, 0.0);
    (s, [d_theta, d_psi], [tt, tp, tp, pp])
}

impl ImmersedPatch for Veronese {
    fn name(&self) -> String {
        "veronese".into()
    }

    fn ambient(&self) -> AmbientSpec {
        AmbientSpec::Sphere {
            dim: 4,
            radius: self.radius,
        }
    }

    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        let (s, _, _) = unit_sphere_jet(x);
        DVector::from_iterator(5, self.forms.iter().map(|f| quad(f, &s, &s)))
    }

    /// Chain rule: `∂_i V = 2 F s_i·s`, `∂_i∂_j V = 2 (s_iᵀ F s_j + sᵀ F s_ij)`.
    fn jet(&self, x: &[f64]) -> Jet {
        let (s, d, dd) = unit_sphere_jet(x);
        let value = DVector::from_iterator(5, self.forms.iter().map(|f| quad(f, &s, &s)));
        let first = DMatrix::from_fn(5, 2, |k, i| 2.0 * quad(&self.forms[k], &s, &d[i]));
        let second = (0..4)
            .map(|ij| {
                let (i, j) = (ij / 2, ij % 2);
                DVector::from_iterator(
                    5,
                    self.forms
                        .iter()
                        .map(|f| 2.0 * (quad(f, &d[i], &d[j]) + quad(f, &s, &dd[ij]))),
                )
            })
            .collect();
        Jet {
            value,
            first,
            second,
        }
    }

    fn analytic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submanifold::fd_jet;

    fn max_jet_gap(a: &Jet, b: &Jet) -> f64 {
        let mut gap = (&a.value - &b.value).amax().max((&a.first - &b.first).amax());
        for (x, y) in a.second.iter().zip(&b.second) {
            gap = gap.max((x - y).amax());
        }
        gap
    }

    #[test]
    fn analytic_jets_match_differences() {
        let patches: Vec<Box<dyn ImmersedPatch>> = vec![
            Box::new(umbilical_sphere(3, 2, 1.5).unwrap()),
            Box::new(sphere_in_sphere(2, 2, 1.0, 0.6).unwrap()),
            Box::new(revolution_torus(2.0, 0.5).unwrap()),
            Box::new(product_torus(1.0, 0.7).unwrap()),
            Box::new(Veronese::new().unwrap()),
        ];
        for p in &patches {
            let x = p.chart().interior_point(&vec![0.37; p.dim()], 0.05);
            let fd = fd_jet(|y| p.eval(y), &x, 1e-4);
            assert!(max_jet_gap(&p.jet(&x), &fd) < 1e-6, "{}", p.name());
        }
    }

    #[test]
    fn veronese_constants_and_oracles() {
        let v = Veronese::new().unwrap();
        let o = v.oracles();
        assert!((o.scale_a - 1.0).abs() < 1e-12, "{o:?}");
        assert!((o.scale_b - 1.0).abs() < 1e-12, "{o:?}");
        assert!(o.max_radius_error <= VERONESE_ORACLE_TOLERANCE);
        assert!(o.max_metric_error <= VERONESE_ORACLE_TOLERANCE);
    }

    #[test]
    fn veronese_rejects_other_radii() {
        assert!(matches!(Veronese::with_radius(1.0), Err(Error::Construction(_))));
    }

    #[test]
    fn sphere_in_sphere_lies_on_sphere() {
        let p = sphere_in_sphere(3, 2, 2.0, 1.1).unwrap();
        let x = p.chart().interior_point(&[0.2, 0.5, 0.9], 0.0);
        assert!((p.eval(&x).norm() - 2.0).abs() < 1e-14);
        assert!(sphere_in_sphere(2, 1, 1.0, 1.5).is_err());
    }

    #[test]
    fn validation() {
        assert!(plane(0, 1).is_err());
        assert!(umbilical_sphere(2, 1, -1.0).is_err());
        assert!(revolution_torus(1.0, 2.0).is_err());
    }
}
