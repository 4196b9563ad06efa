//! Multi-indices `u ∈ ℕ^q`.
//!
//! Coordinates are 1-based in the public API (`lower(1, u)` touches the first
//! entry) to match the usual notation for normal directions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    /// The zero index of the given size.
    pub fn zero(q: usize) -> Self {
        MultiIndex(vec![0; q])
    }

    /// `k` in every coordinate.
    pub fn constant(q: usize, k: usize) -> Self {
        MultiIndex(vec![k; q])
    }

    /// `β♯(0)`: one in coordinate `alpha`, zero elsewhere.
    pub fn unit(q: usize, alpha: usize) -> Result<Self> {
        Self::zero(q).raise(alpha)
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// `|u|`, the sum of the entries.
    pub fn length(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn check_coordinate(&self, alpha: usize) -> Result<()> {
        if alpha == 0 || alpha > self.q() {
            return Err(argument(format!(
                "coordinate {alpha} out of range 1..={}",
                self.q()
            )));
        }
        Ok(())
    }

    /// `α♭(u)`. `Ok(None)` is the annihilated index: every σ, T or section
    /// indexed by it is zero.
    pub fn lower(&self, alpha: usize) -> Result<Option<MultiIndex>> {
        self.check_coordinate(alpha)?;
        Ok(self.lowered(alpha - 1))
    }

    /// `α♯(u)`.
    pub fn raise(&self, alpha: usize) -> Result<MultiIndex> {
        self.check_coordinate(alpha)?;
        let mut out = self.clone();
        out.0[alpha - 1] += 1;
        Ok(out)
    }

    /// Zero-based `lower` for internal loops.
    pub(crate) fn lowered(&self, index: usize) -> Option<MultiIndex> {
        if self.0[index] == 0 {
            return None;
        }
        let mut out = self.clone();
        out.0[index] -= 1;
        Some(out)
    }

    /// `u∘τ`, i.e. `(u∘τ)_α = u_{τ(α)}`, with `tau` a zero-based permutation.
    pub fn compose(&self, tau: &[usize]) -> Result<MultiIndex> {
        if !is_permutation(tau, self.q()) {
            return Err(argument(format!(
                "{tau:?} is not a permutation of 0..{}",
                self.q()
            )));
        }
        Ok(MultiIndex(tau.iter().map(|&t| self.0[t]).collect()))
    }

    pub fn has_odd_entry(&self) -> bool {
        self.0.iter().any(|e| e % 2 == 1)
    }

    pub fn has_even_entry(&self) -> bool {
        self.0.iter().any(|e| e % 2 == 0)
    }

    /// `u! = Π u_α!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e)).product()
    }

    /// `x^u = Π x_α^{u_α}`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub(crate) fn is_permutation(tau: &[usize], q: usize) -> bool {
    if tau.len() != q {
        return false;
    }
    let mut seen = vec![false; q];
    for &t in tau {
        if t >= q || seen[t] {
            return false;
        }
        seen[t] = true;
    }
    true
}

/// Every `u ∈ ℕ^q` with `|u| ≤ n_max`, graded by length; within a grade the
/// earlier coordinates are exhausted first, so `(1,0)` precedes `(0,1)`.
///
/// The list has `C(n_max + q, q)` entries and every `α♭(u)` of an entry
/// appears before it.
pub fn enumerate(q: usize, n_max: usize) -> Result<Vec<MultiIndex>> {
    if q == 0 {
        return Err(argument("multi-indices need q ≥ 1"));
    }
    let mut out = Vec::new();
    for grade in 0..=n_max {
        let mut current = vec![0; q];
        compositions(grade, 0, &mut current, &mut out);
    }
    Ok(out)
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        compositions(remaining - first, pos + 1, current, out);
    }
    current[pos] = 0;
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("]")
    }
}

/// Parses `2,0,1` or `[2,0,1]`.
impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('[').trim_end_matches(']');
        if trimmed.trim().is_empty() {
            return Err(argument("empty multi-index"));
        }
        let entries = trimmed
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| argument(format!("bad multi-index entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiIndex(entries))
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn length_examples() {
        assert_eq!(mi(&[0, 0, 0]).length(), 0);
        assert_eq!(mi(&[2, 0, 1]).length(), 3);
        assert_eq!(MultiIndex::constant(4, 3).length(), 12);
    }

    #[test]
    fn lower_and_raise() {
        assert_eq!(mi(&[2, 1]).lower(1).unwrap(), Some(mi(&[1, 1])));
        assert_eq!(mi(&[2, 0]).lower(2).unwrap(), None);
        let b = MultiIndex::unit(3, 2).unwrap();
        assert_eq!(b.lower(2).unwrap(), Some(MultiIndex::zero(3)));

        assert_eq!(mi(&[0, 0]).raise(1).unwrap(), mi(&[1, 0]));
        assert_eq!(mi(&[0, 0]).raise(2).unwrap().raise(2).unwrap(), mi(&[0, 2]));
        assert_eq!(mi(&[2, 3]).raise(1).unwrap(), mi(&[3, 3]));
    }

    #[test]
    fn coordinate_out_of_range() {
        assert!(matches!(mi(&[1, 1]).lower(0), Err(Error::Argument(_))));
        assert!(matches!(mi(&[1, 1]).lower(3), Err(Error::Argument(_))));
        assert!(matches!(mi(&[1, 1]).raise(3), Err(Error::Argument(_))));
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(
            enumerate(1, 3).unwrap(),
            vec![mi(&[0]), mi(&[1]), mi(&[2]), mi(&[3])]
        );
        assert_eq!(
            enumerate(2, 1).unwrap(),
            vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])]
        );
        let two = enumerate(2, 2).unwrap();
        assert_eq!(two.len(), 6);
        assert_eq!(
            two,
            vec![
                mi(&[0, 0]),
                mi(&[1, 0]),
                mi(&[0, 1]),
                mi(&[2, 0]),
                mi(&[1, 1]),
                mi(&[0, 2])
            ]
        );
        assert!(enumerate(0, 2).is_err());
    }

    #[test]
    fn display_and_parse() {
        let u = mi(&[2, 0, 1]);
        assert_eq!(u.to_string(), "[2,0,1]");
        assert_eq!("2,0,1".parse::<MultiIndex>().unwrap(), u);
        assert_eq!("[2, 0, 1]".parse::<MultiIndex>().unwrap(), u);
        assert!("".parse::<MultiIndex>().is_err());
        assert!("1,-1".parse::<MultiIndex>().is_err());
    }

    #[test]
    fn json_is_a_plain_array() {
        let u = mi(&[2, 0, 1]);
        assert_eq!(serde_json::to_string(&u).unwrap(), "[2,0,1]");
        let back: MultiIndex = serde_json::from_str("[2,0,1]").unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn compose_permutes_entries() {
        let u = mi(&[3, 1, 0]);
        assert_eq!(u.compose(&[2, 0, 1]).unwrap(), mi(&[0, 3, 1]));
        assert!(u.compose(&[0, 0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn lower_inverts_raise(entries in prop::collection::vec(0usize..5, 1..5), pick in 0usize..5) {
            let u = MultiIndex::new(entries);
            let alpha = pick % u.q() + 1;
            let up = u.raise(alpha).unwrap();
            prop_assert_eq!(up.lower(alpha).unwrap(), Some(u.clone()));
            prop_assert_eq!(up.length(), u.length() + 1);
        }

        #[test]
        fn enumerate_count_and_grading(q in 1usize..5, n in 0usize..6) {
            let all = enumerate(q, n).unwrap();
            prop_assert_eq!(all.len(), binomial(n + q, q));
            let distinct: std::collections::HashSet<_> = all.iter().collect();
            prop_assert_eq!(distinct.len(), all.len());
            prop_assert!(all.windows(2).all(|w| w[0].length() <= w[1].length()));
            // lowered indices always precede their parent
            let pos: std::collections::HashMap<_, _> =
                all.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
            for (i, u) in all.iter().enumerate() {
                for a in 0..q {
                    if let Some(l) = u.lowered(a) {
                        prop_assert!(pos[&l] < i);
                    }
                }
            }
        }

        #[test]
        fn permutation_preserves_length(entries in prop::collection::vec(0usize..6, 1..6), seed in any::<u64>()) {
            let u = MultiIndex::new(entries);
            let mut tau: Vec<usize> = (0..u.q()).collect();
            // Fisher-Yates from the seed
            let mut s = seed;
            for i in (1..tau.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                tau.swap(i, j);
            }
            prop_assert_eq!(u.compose(&tau).unwrap().length(), u.length());
        }
    }
}
