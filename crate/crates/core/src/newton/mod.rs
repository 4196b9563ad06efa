//! Symmetric functions `σ_u` and generalized Newton transformations `T_u` of a
//! system of operators `A = (A_1, …, A_q)`.
//!
//! `σ_u` is the coefficient of `t^u` in `det(I + t_1 A_1 + … + t_q A_q)`. The
//! table is filled by the recursion
//!
//! ```text
//! T_0 = I,   |u| σ_u = Σ_α tr(A_α T_{α♭(u)}),   T_u = σ_u I − Σ_α A_α T_{α♭(u)}
//! ```
//!
//! in graded order, so every `T_{α♭(u)}` is available when `u` is reached.

mod oracle;
mod variation;

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::multiindex::{enumerate, MultiIndex};

pub use oracle::{sigma_oracle, TruncatedPoly};
pub use variation::variation_check;

/// Absolute tolerance for algebraic identities on systems with entries in `[−1, 1]`.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// An ordered family of `q` real `n×n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSystem {
    n: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl OperatorSystem {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| argument("system must contain q ≥ 1 matrices"))?;
        let n = first.nrows();
        if n == 0 {
            return Err(argument("operators must be at least 1×1"));
        }
        for (i, m) in matrices.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(argument(format!(
                    "matrix {} is {}×{}, expected {n}×{n}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(argument(format!("matrix {} has non-finite entries", i + 1)));
            }
        }
        Ok(OperatorSystem { n, matrices })
    }

    /// The zero system (a totally geodesic point).
    pub fn zeros(n: usize, q: usize) -> Result<Self> {
        Self::new(vec![DMatrix::zeros(n, n); q])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// One-based access, `A_α`.
    pub fn matrix(&self, alpha: usize) -> &DMatrix<f64> {
        &self.matrices[alpha - 1]
    }

    pub fn into_matrices(self) -> Vec<DMatrix<f64>> {
        self.matrices
    }

    /// Largest `‖A_α − A_αᵀ‖_∞` (entrywise).
    pub fn asymmetry(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| (m - m.transpose()).amax())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Largest spectral norm among the operators.
    pub fn max_operator_norm(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| m.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max)
    }

    /// Relabels the normal directions: the result has `A'_α = A_{τ(α)}`
    /// (`tau` zero-based).
    pub fn relabel(&self, tau: &[usize]) -> Result<Self> {
        if !crate::multiindex::is_permutation(tau, self.q()) {
            return Err(argument(format!("{tau:?} is not a permutation")));
        }
        Self::new(tau.iter().map(|&t| self.matrices[t].clone()).collect())
    }

    /// `Σ_α coeffs[α] A_α`.
    pub fn combination(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (m, &c) in self.matrices.iter().zip(coeffs) {
            out += m * c;
        }
        out
    }

    /// Squared Frobenius norm of the whole system, `Σ_α ‖A_α‖_F²`.
    pub fn frobenius_sq(&self) -> f64 {
        self.matrices.iter().map(|m| m.norm_squared()).sum()
    }

    /// Traces `(tr A_1, …, tr A_q)`.
    pub fn traces(&self) -> Vec<f64> {
        self.matrices.iter().map(|m| m.trace()).collect()
    }
}

/// Row-major JSON form: `{"n":3,"q":2,"matrices":[[[..],..],..]}`. `n` and `q`
/// are optional but validated when present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<SystemJson> for OperatorSystem {
    type Error = Error;

    fn try_from(js: SystemJson) -> Result<Self> {
        if js.matrices.is_empty() {
            return Err(argument("system must contain q ≥ 1 matrices"));
        }
        let mut mats = Vec::with_capacity(js.matrices.len());
        for (i, rows) in js.matrices.iter().enumerate() {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(argument(format!("matrix {} has ragged rows", i + 1)));
            }
            mats.push(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]));
        }
        let system = OperatorSystem::new(mats)?;
        if js.n.is_some_and(|n| n != system.n()) {
            return Err(argument(format!(
                "declared n = {} but matrices are {}×{}",
                js.n.unwrap(),
                system.n(),
                system.n()
            )));
        }
        if js.q.is_some_and(|q| q != system.q()) {
            return Err(argument(format!(
                "declared q = {} but {} matrices given",
                js.q.unwrap(),
                system.q()
            )));
        }
        Ok(system)
    }
}

impl From<&OperatorSystem> for SystemJson {
    fn from(s: &OperatorSystem) -> Self {
        SystemJson {
            n: Some(s.n()),
            q: Some(s.q()),
            matrices: s
                .matrices()
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

/// `u ↦ (σ_u, T_u)` for every `|u| ≤ n_max ≤ n`.
#[derive(Clone, Debug)]
pub struct NewtonTable {
    n: usize,
    q: usize,
    n_max: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    sigma: Vec<f64>,
    newton: Vec<DMatrix<f64>>,
}

impl NewtonTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Stored indices in graded order.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    fn slot(&self, u: &MultiIndex) -> Option<usize> {
        self.position.get(u).copied()
    }

    fn expect_slot(&self, u: &MultiIndex) -> usize {
        self.slot(u).unwrap_or_else(|| {
            panic!("{u} is outside this table (q = {}, |u| ≤ {})", self.q, self.n_max)
        })
    }

    /// `σ_u`; zero when `|u| > n`.
    ///
    /// Panics if `n_max < |u| ≤ n` or the index has the wrong size.
    pub fn sigma(&self, u: &MultiIndex) -> f64 {
        assert_eq!(u.q(), self.q, "multi-index size mismatch");
        if u.length() > self.n {
            return 0.0;
        }
        self.sigma[self.expect_slot(u)]
    }

    /// `σ` of a possibly annihilated index.
    pub fn sigma_or_zero(&self, u: Option<&MultiIndex>) -> f64 {
        u.map_or(0.0, |u| self.sigma(u))
    }

    /// `T_u`, or `None` when it vanishes identically (`|u| > n`).
    ///
    /// Panics like [`NewtonTable::sigma`].
    pub fn newton(&self, u: &MultiIndex) -> Option<&DMatrix<f64>> {
        assert_eq!(u.q(), self.q, "multi-index size mismatch");
        if u.length() > self.n {
            return None;
        }
        Some(&self.newton[self.expect_slot(u)])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64, &DMatrix<f64>)> {
        self.indices
            .iter()
            .zip(&self.sigma)
            .zip(&self.newton)
            .map(|((u, &s), t)| (u, s, t))
    }

    /// `max_u |tr T_u − (n − |u|) σ_u|`.
    pub fn trace_residual(&self) -> f64 {
        self.iter()
            .map(|(u, s, t)| (t.trace() - (self.n as f64 - u.length() as f64) * s).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the table of `σ_u` and `T_u` for `|u| ≤ n_max` by the recursion.
pub fn newton_table(system: &OperatorSystem, n_max: usize) -> Result<NewtonTable> {
    let n = system.n();
    let q = system.q();
    if n_max > n {
        return Err(argument(format!("n_max = {n_max} exceeds n = {n}")));
    }
    let indices = enumerate(q, n_max)?;
    let position: HashMap<MultiIndex, usize> = indices
        .iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), i))
        .collect();

    let mut sigma = Vec::with_capacity(indices.len());
    let mut newton: Vec<DMatrix<f64>> = Vec::with_capacity(indices.len());
    for u in &indices {
        if u.is_zero() {
            sigma.push(1.0);
            newton.push(DMatrix::identity(n, n));
            continue;
        }
        // Σ_α A_α T_{α♭(u)}
        let mut acc = DMatrix::zeros(n, n);
        for (alpha, a) in system.matrices().iter().enumerate() {
            if let Some(lower) = u.lowered(alpha) {
                acc += a * &newton[position[&lower]];
            }
        }
        let s = acc.trace() / u.length() as f64;
        let mut t = -acc;
        for i in 0..n {
            t[(i, i)] += s;
        }
        sigma.push(s);
        newton.push(t);
    }

    Ok(NewtonTable {
        n,
        q,
        n_max,
        indices,
        position,
        sigma,
        newton,
    })
}

/// Largest entrywise gap between the left form `σ_u I − Σ A_α T_{α♭(u)}` and
/// the right form `σ_u I − Σ T_{α♭(u)} A_α` over the table.
pub fn right_recursion_check(system: &OperatorSystem, table: &NewtonTable) -> f64 {
    let mut worst = 0.0f64;
    for u in table.indices() {
        let mut diff = DMatrix::<f64>::zeros(system.n(), system.n());
        for (alpha, a) in system.matrices().iter().enumerate() {
            if let Some(lower) = u.lowered(alpha) {
                let t = table.newton(&lower).expect("lowered index is stored");
                diff += a * t - t * a;
            }
        }
        worst = worst.max(diff.amax());
    }
    worst
}

/// Residuals of the two trace identities satisfied by the table:
/// `|u| σ_u = Σ_α tr(A_α T_{α♭(u)})` and `tr T_u = (n − |u|) σ_u`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    pub sigma_identity: f64,
    pub trace_identity: f64,
}

/// Evaluates both identities with externally supplied `σ_u` values (for
/// instance from [`sigma_oracle`]), so they are not satisfied by construction.
pub fn identity_residuals(
    system: &OperatorSystem,
    table: &NewtonTable,
    sigma: impl Fn(&MultiIndex) -> f64,
) -> IdentityResiduals {
    let n = system.n() as f64;
    let mut sigma_identity = 0.0f64;
    let mut trace_identity = 0.0f64;
    for (u, _, t) in table.iter() {
        let s = sigma(u);
        let len = u.length() as f64;
        trace_identity = trace_identity.max((t.trace() - (n - len) * s).abs());
        if u.is_zero() {
            continue;
        }
        let mut rhs = 0.0;
        for (alpha, a) in system.matrices().iter().enumerate() {
            if let Some(lower) = u.lowered(alpha) {
                rhs += (a * table.newton(&lower).expect("stored")).trace();
            }
        }
        sigma_identity = sigma_identity.max((len * s - rhs).abs());
    }
    IdentityResiduals {
        sigma_identity,
        trace_identity,
    }
}

/// `|a − b| / max(|b|, 1)`: relative for large reference values, absolute near zero.
pub fn scaled_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn diagonal_q1_sigmas_and_first_newton() {
        let sys = OperatorSystem::new(vec![diag(&[1.0, 2.0, 3.0])]).unwrap();
        let t = newton_table(&sys, 3).unwrap();
        assert_eq!(t.sigma(&mi(&[0])), 1.0);
        assert!((t.sigma(&mi(&[1])) - 6.0).abs() < 1e-12);
        assert!((t.sigma(&mi(&[2])) - 11.0).abs() < 1e-12);
        assert!((t.sigma(&mi(&[3])) - 6.0).abs() < 1e-12);
        let t1 = t.newton(&mi(&[1])).unwrap();
        assert!((t1 - diag(&[5.0, 4.0, 3.0])).amax() < 1e-12);
        assert!((t1.trace() - 12.0).abs() < 1e-12);
        // beyond n everything vanishes
        assert_eq!(t.sigma(&mi(&[4])), 0.0);
        assert!(t.newton(&mi(&[4])).is_none());
        // T_n = 0 (Cayley-Hamilton)
        assert!(t.newton(&mi(&[3])).unwrap().amax() < 1e-12);
    }

    #[test]
    fn mixed_sigma_of_diagonal_pair() {
        let sys = OperatorSystem::new(vec![diag(&[1.0, 2.0]), diag(&[3.0, 4.0])]).unwrap();
        let t = newton_table(&sys, 2).unwrap();
        assert!((t.sigma(&mi(&[1, 1])) - 10.0).abs() < 1e-12);
        assert_eq!(t.sigma(&mi(&[0, 0])), 1.0);
        assert_eq!(t.newton(&mi(&[0, 0])).unwrap(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn commuting_family_has_zero_right_recursion_gap() {
        let sys = OperatorSystem::new(vec![diag(&[1.0, -2.0, 0.5])]).unwrap();
        let t = newton_table(&sys, 3).unwrap();
        assert_eq!(right_recursion_check(&sys, &t), 0.0);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            OperatorSystem::new(vec![]).unwrap_err(),
            Error::Argument("system must contain q ≥ 1 matrices".into())
        );
        assert!(OperatorSystem::new(vec![DMatrix::zeros(2, 3)]).is_err());
        assert!(OperatorSystem::new(vec![DMatrix::zeros(2, 2), DMatrix::zeros(3, 3)]).is_err());
        let sys = OperatorSystem::zeros(2, 1).unwrap();
        assert!(newton_table(&sys, 3).is_err());
    }

    #[test]
    fn json_round_trip_and_checks() {
        let js: SystemJson =
            serde_json::from_str(r#"{"n":2,"q":1,"matrices":[[[1,2],[2,1]]]}"#).unwrap();
        let sys = OperatorSystem::try_from(js).unwrap();
        assert_eq!(sys.matrix(1)[(0, 1)], 2.0);
        let bad: SystemJson =
            serde_json::from_str(r#"{"n":3,"matrices":[[[1,2],[2,1]]]}"#).unwrap();
        assert!(OperatorSystem::try_from(bad).is_err());
        let empty: SystemJson = serde_json::from_str(r#"{"matrices":[]}"#).unwrap();
        assert!(OperatorSystem::try_from(empty).is_err());
    }

    #[test]
    fn relabel_permutes_operators() {
        let sys = OperatorSystem::new(vec![diag(&[1.0, 2.0]), diag(&[3.0, 4.0])]).unwrap();
        let r = sys.relabel(&[1, 0]).unwrap();
        assert_eq!(r.matrix(1), sys.matrix(2));
        assert!(sys.relabel(&[0, 0]).is_err());
    }
}
