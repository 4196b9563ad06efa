//! Built-in patches with closed-form expectations.
//!
//! Patches are addressed by spec strings `name` or `name:key=value,…`, for
//! example `umbilical:n=2,q=2,r=1`. [`check`] evaluates every expectation of an
//! entry through the public operations of the other modules.

mod patches;

pub use patches::{
    enneper, plane, product_torus, revolution_torus, sphere_in_sphere, umbilical_sphere, Factor,
    SeparableMap, SeparablePatch, Term, Veronese, VeroneseOracles, VERONESE_ORACLE_TOLERANCE,
};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{argument, Result};
use crate::haar::{rotate_system, FiberScheme, FrameSet, Group, DEFAULT_EXACT_NODES};
use crate::minimality::{
    default_tolerance, example4_condition, functional_value, minimality_at_points,
};
use crate::multiindex::{enumerate, MultiIndex};
use crate::newton::newton_table;
use crate::submanifold::{patch_volume, shape_system, ImmersedPatch};

/// Which umbilical relation fixes the default radius of `sphere-in-sphere`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `(n − qk) |H|² = c q k n²`, the stationarity condition of the
    /// umbilical functional.
    Stationary,
    /// `(n − qk)(n + 1 − qk) |H|² = c q k n²`.
    Shifted,
}

/// Radius `ρ` of `S^n(ρ) ⊂ S^{n+q}(r)` satisfying `relation` for
/// `u = (k, …, k)`. The mean curvature satisfies `|H|² = n² (1/ρ² − 1/r²)`.
pub fn umbilical_radius(n: usize, q: usize, r: f64, k: usize, relation: Relation) -> Result<f64> {
    let qk = q * k;
    if qk == 0 || qk >= n {
        return Err(argument(format!("need 0 < qk < n, got q = {q}, k = {k}, n = {n}")));
    }
    if !(r > 0.0) {
        return Err(argument("r must be positive"));
    }
    let c = 1.0 / (r * r);
    let gap = (n - qk) as f64;
    let kappa_sq = match relation {
        Relation::Stationary => c * qk as f64 / gap,
        Relation::Shifted => c * qk as f64 / (gap * (gap + 1.0)),
    };
    Ok(1.0 / (kappa_sq + c).sqrt())
}

/// `relation` residual `lhs − rhs` for the sphere of radius `rho`.
pub fn umbilical_relation_defect(n: usize, q: usize, r: f64, rho: f64, k: usize, relation: Relation) -> f64 {
    let c = 1.0 / (r * r);
    let h_sq = (n * n) as f64 * (1.0 / (rho * rho) - c);
    let gap = n as f64 - (q * k) as f64;
    let lhs = match relation {
        Relation::Stationary => gap * h_sq,
        Relation::Shifted => gap * (gap + 1.0) * h_sq,
    };
    lhs - c * (q * k * n * n) as f64
}

/// A registered patch family.
#[derive(Clone, Debug, Serialize)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub default_spec: &'static str,
    pub parameters: &'static str,
}

pub fn entries() -> Vec<GalleryEntry> {
    vec![
        GalleryEntry {
            name: "plane",
            summary: "flat square in R^{n+q}; totally geodesic",
            default_spec: "plane:n=2,q=1",
            parameters: "n, q",
        },
        GalleryEntry {
            name: "umbilical",
            summary: "round sphere S^n(r) in R^{n+1} ⊂ R^{n+q}",
            default_spec: "umbilical:n=2,q=2,r=1",
            parameters: "n, q, r",
        },
        GalleryEntry {
            name: "sphere-in-sphere",
            summary: "small sphere S^n(rho) in S^{n+q}(r); rho defaults to the stationary radius for u = (k,…,k)",
            default_spec: "sphere-in-sphere:n=3,q=1,r=1,k=2",
            parameters: "n, q, r, k, rho, relation=stationary|shifted",
        },
        GalleryEntry {
            name: "veronese",
            summary: "quadratic minimal immersion of S^2(1) into S^4(1/√3)",
            default_spec: "veronese",
            parameters: "",
        },
        GalleryEntry {
            name: "torus",
            summary: "torus of revolution in R^3",
            default_spec: "torus:R=2,a=1",
            parameters: "R, a",
        },
        GalleryEntry {
            name: "product-torus",
            summary: "flat torus S^1(a) × S^1(b) in R^4",
            default_spec: "product-torus:a=1,b=0.6",
            parameters: "a, b",
        },
        GalleryEntry {
            name: "enneper",
            summary: "Enneper's minimal surface with finite-difference derivatives",
            default_spec: "enneper",
            parameters: "",
        },
    ]
}

/// A parsed spec string.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSpec {
    pub name: String,
    params: BTreeMap<String, String>,
}

impl PatchSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (spec.trim(), ""),
        };
        if !entries().iter().any(|e| e.name == name) {
            return Err(argument(format!("unknown patch {name:?}; see `gallery list`")));
        }
        let mut params = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| argument(format!("expected key=value, got {pair:?}")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let spec = PatchSpec {
            name: name.to_string(),
            params,
        };
        let allowed = entries()
            .into_iter()
            .find(|e| e.name == name)
            .map(|e| e.parameters)
            .unwrap_or("");
        let allowed: Vec<&str> = allowed
            .split(',')
            .map(|s| s.trim().split('=').next().unwrap_or("").trim())
            .collect();
        if let Some(bad) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(argument(format!("patch {name} has no parameter {bad:?}")));
        }
        Ok(spec)
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| argument(format!("parameter {key} = {v:?} is not a number"))),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| argument(format!("parameter {key} = {v:?} is not a non-negative integer"))),
        }
    }

    fn relation(&self) -> Result<Relation> {
        match self.params.get("relation").map(String::as_str) {
            None | Some("stationary") => Ok(Relation::Stationary),
            Some("shifted") => Ok(Relation::Shifted),
            Some(other) => Err(argument(format!("unknown relation {other:?}"))),
        }
    }

    /// `(n, q, r, k, rho)` for `sphere-in-sphere`.
    fn sphere_in_sphere_params(&self) -> Result<(usize, usize, f64, usize, f64)> {
        let (n, q, r, k) = (
            self.count("n", 3)?,
            self.count("q", 1)?,
            self.real("r", 1.0)?,
            self.count("k", 2)?,
        );
        let rho = match self.params.get("rho") {
            Some(_) => self.real("rho", 0.0)?,
            None => umbilical_radius(n, q, r, k, self.relation()?)?,
        };
        Ok((n, q, r, k, rho))
    }

    pub fn build(&self) -> Result<Box<dyn ImmersedPatch>> {
        Ok(match self.name.as_str() {
            "plane" => Box::new(plane(self.count("n", 2)?, self.count("q", 1)?)?),
            "umbilical" => Box::new(umbilical_sphere(
                self.count("n", 2)?,
                self.count("q", 2)?,
                self.real("r", 1.0)?,
            )?),
            "sphere-in-sphere" => {
                let (n, q, r, _, rho) = self.sphere_in_sphere_params()?;
                Box::new(sphere_in_sphere(n, q, r, rho)?)
            }
            "veronese" => Box::new(Veronese::new()?),
            "torus" => Box::new(revolution_torus(self.real("R", 2.0)?, self.real("a", 1.0)?)?),
            "product-torus" => Box::new(product_torus(self.real("a", 1.0)?, self.real("b", 0.6)?)?),
            "enneper" => Box::new(enneper()?),
            other => return Err(argument(format!("unknown patch {other:?}"))),
        })
    }
}

/// Builds a patch from a spec string.
pub fn build_patch(spec: &str) -> Result<Box<dyn ImmersedPatch>> {
    PatchSpec::parse(spec)?.build()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// One machine-checked expectation.
#[derive(Clone, Debug, Serialize)]
pub struct Fact {
    pub description: String,
    /// Public operation that produced `measured`.
    pub operation: &'static str,
    pub measured: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl Fact {
    fn at_most(description: impl Into<String>, operation: &'static str, measured: f64, threshold: f64) -> Self {
        Fact {
            description: description.into(),
            operation,
            measured,
            bound: Bound::AtMost,
            threshold,
            passed: measured <= threshold,
        }
    }

    fn at_least(description: impl Into<String>, operation: &'static str, measured: f64, threshold: f64) -> Self {
        Fact {
            description: description.into(),
            operation,
            measured,
            bound: Bound::AtLeast,
            threshold,
            passed: measured >= threshold,
        }
    }
}

/// Informational residual for one multi-index.
#[derive(Clone, Debug, Serialize)]
pub struct SurveyRecord {
    pub u: MultiIndex,
    pub sup_residual: f64,
    pub threshold: f64,
    pub minimal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GalleryCheck {
    pub patch: String,
    pub spec: String,
    pub tolerance: f64,
    pub facts: Vec<Fact>,
    pub survey: Vec<SurveyRecord>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOptions {
    /// Random interior points per pointwise expectation.
    pub points: usize,
    /// Quadrature resolution per axis for integral expectations.
    pub resolution: usize,
    /// Monte Carlo fiber samples when `q > 2`.
    pub samples: usize,
    pub seed: u64,
    /// Also report residuals for every `u` with `|u| ≤ K`.
    pub all_u_upto: Option<usize>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            points: 100,
            resolution: 64,
            samples: crate::haar::DEFAULT_SAMPLES,
            seed: 7,
            all_u_upto: None,
        }
    }
}

/// Exact fiber rule for `q ≤ 2`, Monte Carlo otherwise.
pub fn fiber_frames(q: usize, samples: usize, seed: u64) -> Result<FrameSet> {
    let scheme = if q <= 2 {
        FiberScheme::Exact {
            nodes: DEFAULT_EXACT_NODES,
        }
    } else {
        FiberScheme::MonteCarlo { samples, seed }
    };
    FrameSet::build(q, Group::O, &scheme)
}

fn random_points(patch: &dyn ImmersedPatch, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s: Vec<f64> = (0..patch.dim()).map(|_| rng.random()).collect();
            patch.chart().interior_point(&s, 0.05)
        })
        .collect()
}

/// Volume of the unit `n`-sphere.
fn unit_sphere_volume(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_volume(n - 2),
    }
}

struct Context<'a> {
    patch: &'a dyn ImmersedPatch,
    points: Vec<Vec<f64>>,
    frames: FrameSet,
    tolerance: f64,
    options: &'a CheckOptions,
}

impl Context<'_> {
    fn sup_residual(&self, u: &MultiIndex) -> Result<(f64, f64)> {
        let report = minimality_at_points(self.patch, u, &self.points, &self.frames, self.tolerance)?;
        Ok((report.sup_residual, report.threshold))
    }

    fn minimal(&self, u: &MultiIndex) -> Result<Fact> {
        let (sup, threshold) = self.sup_residual(u)?;
        Ok(Fact::at_most(format!("{u}-minimal"), "minimality_residual", sup, threshold))
    }

    fn not_minimal(&self, u: &MultiIndex) -> Result<Fact> {
        let (sup, threshold) = self.sup_residual(u)?;
        Ok(Fact::at_least(
            format!("not {u}-minimal (negative control)"),
            "minimality_residual",
            sup,
            10.0 * threshold,
        ))
    }

    fn max_over_points<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        self.points.iter().try_fold(0.0f64, |m, x| Ok(m.max(f(x)?)))
    }

    fn mean_curvature_max(&self) -> Result<f64> {
        self.max_over_points(|x| Ok(shape_system(self.patch, x)?.mean_curvature_norm()))
    }

    fn example4_max(&self) -> Result<f64> {
        self.max_over_points(|x| {
            Ok(example4_condition(self.patch, x)?
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt())
        })
    }

    fn volume_fact(&self, expected: f64) -> Result<Fact> {
        let volume = patch_volume(self.patch, self.options.resolution)?;
        Ok(Fact::at_most(
            format!("volume = {expected}"),
            "mesh_quadrature",
            (volume - expected).abs(),
            1e-6,
        ))
    }
}

/// Evaluates every expectation of the entry addressed by `spec`.
pub fn check(spec: &str, options: &CheckOptions) -> Result<GalleryCheck> {
    let parsed = PatchSpec::parse(spec)?;
    let patch = parsed.build()?;
    let q = patch.codim();
    let n = patch.dim();
    let ctx = Context {
        patch: patch.as_ref(),
        points: random_points(patch.as_ref(), options.points.max(1), options.seed),
        frames: fiber_frames(q, options.samples, options.seed)?,
        tolerance: default_tolerance(patch.as_ref()),
        options,
    };
    let mut facts = Vec::new();

    match parsed.name.as_str() {
        "plane" => {
            facts.push(Fact::at_most("H = 0", "shape_system", ctx.mean_curvature_max()?, 1e-12));
            for u in enumerate(q, n)? {
                facts.push(ctx.minimal(&u)?);
            }
            facts.push(Fact::at_most("β♯β♯(0) condition vector = 0", "example4_condition", ctx.example4_max()?, 1e-12));
        }
        "umbilical" => {
            let r = parsed.real("r", 1.0)?;
            let umbilicity = ctx.max_over_points(|x| {
                let data = shape_system(ctx.patch, x)?;
                let mut gap = 0.0f64;
                for (a, lambda) in data.system.matrices().iter().zip(&data.mean_curvature) {
                    let scalar = DMatrix::<f64>::identity(n, n) * (lambda / n as f64);
                    gap = gap.max((a - scalar).amax());
                }
                Ok(gap)
            })?;
            facts.push(Fact::at_most("A_α = (λ_α / n) I", "shape_system", umbilicity, 1e-8));
            let multinomial = ctx.max_over_points(|x| {
                let data = shape_system(ctx.patch, x)?;
                let mut gap = 0.0f64;
                for g in ctx.frames.rotations().iter().take(16) {
                    let rotated = rotate_system(&data.system, g)?;
                    let table = newton_table(&rotated, n)?;
                    let lambda = rotated.traces();
                    for (u, sigma, _) in table.iter() {
                        let closed = crate::multiindex::factorial(n)
                            / ((n as f64).powi(u.length() as i32)
                                * crate::multiindex::factorial(n - u.length())
                                * u.factorial())
                            * u.monomial(&lambda);
                        gap = gap.max((sigma - closed).abs());
                    }
                }
                Ok(gap)
            })?;
            facts.push(Fact::at_most(
                "σ_u = n! λ^u / (n^|u| (n − |u|)! u!) in every frame",
                "newton_table",
                multinomial,
                1e-8,
            ));
            for u in enumerate(q, n)?.into_iter().filter(|u| u.length() == n) {
                facts.push(ctx.minimal(&u)?);
            }
            facts.push(ctx.not_minimal(&MultiIndex::zero(q))?);
            facts.push(ctx.volume_fact(unit_sphere_volume(n) * r.powi(n as i32))?);
        }
        "sphere-in-sphere" => {
            let (n, q, r, k, rho) = parsed.sphere_in_sphere_params()?;
            let u = MultiIndex::constant(q, k);
            let defect = umbilical_relation_defect(n, q, r, rho, k, Relation::Stationary);
            let scale = (q * k * n * n) as f64 / (r * r);
            let satisfied = defect.abs() <= 1e-9 * scale;
            facts.push(if satisfied {
                ctx.minimal(&u)?
            } else {
                ctx.not_minimal(&u)?
            });
            if satisfied {
                let perturbed = sphere_in_sphere(n, q, r, 1.1 * rho)?;
                let report = minimality_at_points(&perturbed, &u, &ctx.points, &ctx.frames, ctx.tolerance)?;
                facts.push(Fact::at_least(
                    format!("not {u}-minimal at 1.1 ρ (negative control)"),
                    "minimality_residual",
                    report.sup_residual,
                    10.0 * report.threshold,
                ));
            }
        }
        "veronese" => {
            let v = Veronese::new()?;
            let o = v.oracles();
            facts.push(Fact::at_most("|φ| = 1/√3", "construction oracle", o.max_radius_error, VERONESE_ORACLE_TOLERANCE));
            facts.push(Fact::at_most("isometric from S²(1)", "construction oracle", o.max_metric_error, VERONESE_ORACLE_TOLERANCE));
            facts.push(Fact::at_most("H = 0", "shape_system", ctx.mean_curvature_max()?, 1e-8));
            let a_sq = ctx.max_over_points(|x| {
                let data = shape_system(ctx.patch, x)?;
                let sum = data.system.matrices().iter().fold(DMatrix::zeros(2, 2), |acc, a| acc + a * a);
                Ok((sum - DMatrix::<f64>::identity(2, 2) * 2.0).amax())
            })?;
            facts.push(Fact::at_most("A² = 2I", "shape_system", a_sq, 1e-8));
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xb);
            let isotropy = ctx.max_over_points(|x| {
                let data = shape_system(ctx.patch, x)?;
                let mut unit = || {
                    let a: f64 = rng.random_range(0.0..2.0 * PI);
                    DVector::from_vec(vec![a.cos(), a.sin()])
                };
                let (x1, y1, z1) = (unit(), unit(), unit());
                let b = |p: &DVector<f64>, q: &DVector<f64>| -> DVector<f64> {
                    DVector::from_iterator(
                        data.system.q(),
                        data.system.matrices().iter().map(|a| p.dot(&(a * q))),
                    )
                };
                Ok((b(&x1, &z1).dot(&b(&y1, &z1)) - x1.dot(&y1) * z1.dot(&z1)).abs())
            })?;
            facts.push(Fact::at_most("⟨B(X,Z), B(Y,Z)⟩ = ⟨X,Y⟩⟨Z,Z⟩", "shape_system", isotropy, 1e-8));
            let b_min = ctx.points.iter().try_fold(f64::INFINITY, |m, x| {
                Ok::<_, crate::Error>(m.min(shape_system(ctx.patch, x)?.b_norm_sq))
            })?;
            facts.push(Fact::at_least("not totally geodesic: |B|² ≥ 1", "shape_system", b_min, 1.0));
            let trace = ctx.max_over_points(|x| {
                let data = shape_system(ctx.patch, x)?;
                let a_sq = data.system.matrices().iter().fold(DMatrix::zeros(2, 2), |acc, a| acc + a * a);
                Ok(data
                    .system
                    .matrices()
                    .iter()
                    .map(|a| (a * &a_sq).trace().abs())
                    .fold(0.0, f64::max))
            })?;
            facts.push(Fact::at_most("tr(B∘A²) = 0", "shape_system", trace, 1e-8));
            for beta in 1..=q {
                let u = MultiIndex::zero(q).raise(beta)?.raise(beta)?;
                facts.push(ctx.minimal(&u)?);
            }
            facts.push(Fact::at_most("β♯β♯(0) condition vector = 0", "example4_condition", ctx.example4_max()?, 1e-8));
        }
        "torus" => {
            let (big_r, a) = (parsed.real("R", 2.0)?, parsed.real("a", 1.0)?);
            facts.push(ctx.volume_fact(4.0 * PI * PI * a * big_r)?);
            facts.push(ctx.not_minimal(&MultiIndex::zero(1))?);
            let total = functional_value(ctx.patch, &MultiIndex::constant(1, 2), options.resolution, &ctx.frames)?;
            facts.push(Fact::at_most("∫ σ̂_(2) = 0", "functional_value", total.value.abs(), 1e-8));
        }
        "product-torus" => {
            let (a, b) = (parsed.real("a", 1.0)?, parsed.real("b", 0.6)?);
            facts.push(ctx.volume_fact(4.0 * PI * PI * a * b)?);
            let expected = 1.0 / (a * a) + 1.0 / (b * b);
            let h_gap = ctx.max_over_points(|x| {
                Ok((shape_system(ctx.patch, x)?.mean_curvature_norm().powi(2) - expected).abs())
            })?;
            facts.push(Fact::at_most("|H|² = 1/a² + 1/b²", "shape_system", h_gap, 1e-8));
            let flat = ctx.max_over_points(|x| {
                let data = shape_system(ctx.patch, x)?;
                Ok(data.system.matrices().iter().map(|m| m.determinant()).sum::<f64>().abs())
            })?;
            facts.push(Fact::at_most("flat: Σ_α det A_α = 0", "shape_system", flat, 1e-10));
            facts.push(ctx.not_minimal(&MultiIndex::zero(2))?);
        }
        "enneper" => {
            facts.push(Fact::at_most("H = 0", "shape_system", ctx.mean_curvature_max()?, ctx.tolerance));
            facts.push(ctx.minimal(&MultiIndex::zero(1))?);
            facts.push(ctx.minimal(&MultiIndex::constant(1, 2))?);
        }
        other => return Err(argument(format!("unknown patch {other:?}"))),
    }

    let mut survey = Vec::new();
    if let Some(max_len) = options.all_u_upto {
        for u in enumerate(q, max_len.min(n))? {
            let report = minimality_at_points(ctx.patch, &u, &ctx.points, &ctx.frames, ctx.tolerance)?;
            survey.push(SurveyRecord {
                u,
                sup_residual: report.sup_residual,
                threshold: report.threshold,
                minimal: report.minimal,
            });
        }
    }

    Ok(GalleryCheck {
        patch: patch.name(),
        spec: spec.to_string(),
        tolerance: ctx.tolerance,
        passed: facts.iter().all(|f| f.passed),
        facts,
        survey,
    })
}
