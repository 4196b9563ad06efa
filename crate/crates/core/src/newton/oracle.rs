//! Independent route to `σ_u`: expand `det(I + Σ t_α A_α)` over polynomials in
//! `t` truncated at total degree `n_max`, without touching the recursion.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{argument, Result};
use crate::multiindex::{enumerate, MultiIndex};

use super::OperatorSystem;

/// Monomial basis shared by a family of truncated polynomials.
#[derive(Debug)]
struct Basis {
    monomials: Vec<MultiIndex>,
    // (i, j, k): monomial i times monomial j is monomial k
    products: Vec<(usize, usize, usize)>,
}

impl Basis {
    fn new(q: usize, degree: usize) -> Result<Self> {
        let monomials = enumerate(q, degree)?;
        let position: HashMap<&MultiIndex, usize> =
            monomials.iter().enumerate().map(|(i, u)| (u, i)).collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.length() + b.length() > degree {
                    continue;
                }
                let sum = MultiIndex::new(
                    a.entries()
                        .iter()
                        .zip(b.entries())
                        .map(|(x, y)| x + y)
                        .collect(),
                );
                products.push((i, j, position[&sum]));
            }
        }
        Ok(Basis {
            monomials,
            products,
        })
    }
}

/// Dense polynomial in `q` variables, truncated above a fixed total degree.
#[derive(Clone, Debug)]
pub struct TruncatedPoly {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl TruncatedPoly {
    fn zero(basis: &Arc<Basis>) -> Self {
        TruncatedPoly {
            basis: Arc::clone(basis),
            coeffs: vec![0.0; basis.monomials.len()],
        }
    }

    /// `c0 + Σ_α c_α t_α`.
    fn affine(basis: &Arc<Basis>, constant: f64, linear: &[f64]) -> Self {
        let mut p = Self::zero(basis);
        p.coeffs[0] = constant;
        // degree-one monomials follow the constant in graded order
        if basis.monomials.len() > 1 {
            for (alpha, &c) in linear.iter().enumerate() {
                p.coeffs[1 + alpha] = c;
            }
        }
        p
    }

    fn add_scaled_product(&mut self, a: &TruncatedPoly, b: &TruncatedPoly, scale: f64) {
        for &(i, j, k) in &self.basis.products {
            let (x, y) = (a.coeffs[i], b.coeffs[j]);
            if x != 0.0 && y != 0.0 {
                self.coeffs[k] += scale * x * y;
            }
        }
    }

    pub fn coefficient(&self, u: &MultiIndex) -> f64 {
        self.basis
            .monomials
            .iter()
            .position(|m| m == u)
            .map_or(0.0, |i| self.coeffs[i])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.basis.monomials.iter().zip(self.coeffs.iter().copied())
    }
}

/// Coefficients of `det(I + t_1 A_1 + … + t_q A_q)` for every `|u| ≤ n_max`.
///
/// The determinant is expanded along rows over column subsets: with `D(S)` the
/// minor on the first `|S|` rows and columns `S`, expansion along its last row
/// gives `D(S) = Σ_{j∈S} ± M[|S|−1, j] D(S∖{j})`. No division is needed, so the
/// truncated arithmetic is exact up to rounding.
pub fn sigma_oracle(system: &OperatorSystem, n_max: usize) -> Result<HashMap<MultiIndex, f64>> {
    let n = system.n();
    let q = system.q();
    if n_max > n {
        return Err(argument(format!("n_max = {n_max} exceeds n = {n}")));
    }
    if n > 20 {
        return Err(argument("subset expansion is limited to n ≤ 20"));
    }
    let basis = Arc::new(Basis::new(q, n_max)?);

    let entry = |r: usize, c: usize| {
        let linear: Vec<f64> = system.matrices().iter().map(|a| a[(r, c)]).collect();
        TruncatedPoly::affine(&basis, if r == c { 1.0 } else { 0.0 }, &linear)
    };
    let matrix: Vec<Vec<TruncatedPoly>> =
        (0..n).map(|r| (0..n).map(|c| entry(r, c)).collect()).collect();

    let full = (1usize << n) - 1;
    let mut minors: Vec<Option<TruncatedPoly>> = vec![None; full + 1];
    let mut empty = TruncatedPoly::zero(&basis);
    empty.coeffs[0] = 1.0;
    minors[0] = Some(empty);

    // subsets in order of increasing popcount so smaller minors exist
    let mut subsets: Vec<usize> = (1..=full).collect();
    subsets.sort_by_key(|s| (s.count_ones(), *s));
    for s in subsets {
        let row = s.count_ones() as usize - 1;
        let mut acc = TruncatedPoly::zero(&basis);
        let mut sign_position = 0;
        for col in 0..n {
            if s & (1 << col) == 0 {
                continue;
            }
            let sign = if (row + sign_position) % 2 == 0 { 1.0 } else { -1.0 };
            sign_position += 1;
            let rest = minors[s & !(1 << col)]
                .as_ref()
                .expect("smaller minors are computed first");
            acc.add_scaled_product(&matrix[row][col], rest, sign);
        }
        minors[s] = Some(acc);
    }

    let det = minors[full].take().expect("full minor");
    Ok(det.terms().map(|(u, c)| (u.clone(), c)).collect())
}
