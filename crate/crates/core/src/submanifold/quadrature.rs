//! Tensor-product quadrature over patch charts.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{argument, Result};

use super::{Chart, ImmersedPatch};

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_count
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut derivative = 1.0;
        for _ in 0..100 {
            let (p, dp) = legendre(count, x);
            derivative = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(count, x);
        if dp.is_finite() {
            derivative = dp;
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_k(x), P_k'(x))` by the three-term recurrence.
fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let kf = k as f64;
    (p1, kf * (x * p1 - p0) / (x * x - 1.0))
}

/// One quadrature node: parameter point and weight.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureNode {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Parameter-space rule: trapezoid on periodic axes, Gauss–Legendre on the
/// others. Weights sum to the parameter volume of the chart.
pub fn parameter_grid(chart: &Chart, resolution: usize) -> Result<Vec<QuadratureNode>> {
    if resolution < 2 {
        return Err(argument(format!(
            "quadrature resolution must be at least 2 per axis, got {resolution}"
        )));
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..chart.dim())
        .map(|i| {
            let (lo, hi) = (chart.lower[i], chart.upper[i]);
            let width = hi - lo;
            if chart.periodic[i] {
                let h = width / resolution as f64;
                ((0..resolution).map(|k| lo + h * k as f64).collect(), vec![h; resolution])
            } else {
                let (x, w) = gauss_legendre(resolution);
                (
                    x.iter().map(|s| lo + 0.5 * width * (s + 1.0)).collect(),
                    w.iter().map(|v| 0.5 * width * v).collect(),
                )
            }
        })
        .collect();

    let mut nodes = vec![QuadratureNode {
        point: Vec::with_capacity(chart.dim()),
        weight: 1.0,
    }];
    for (xs, ws) in &axes {
        nodes = nodes
            .iter()
            .flat_map(|node| {
                xs.iter().zip(ws).map(move |(x, w)| {
                    let mut point = node.point.clone();
                    point.push(*x);
                    QuadratureNode {
                        point,
                        weight: node.weight * w,
                    }
                })
            })
            .collect();
    }
    Ok(nodes)
}

/// Riemannian quadrature: parameter weights times `√det G` at each node.
pub fn mesh_quadrature(patch: &dyn ImmersedPatch, resolution: usize) -> Result<Vec<QuadratureNode>> {
    let grid = parameter_grid(patch.chart(), resolution)?;
    grid.into_par_iter()
        .map(|node| {
            let jet = patch.jet(&node.point);
            let gram = jet.first.transpose() * &jet.first;
            let det = gram.determinant();
            if !(det > 0.0) {
                return Err(argument(format!(
                    "degenerate metric at {:?} (det G = {det:e})",
                    node.point
                )));
            }
            Ok(QuadratureNode {
                weight: node.weight * det.sqrt(),
                point: node.point,
            })
        })
        .collect()
}

/// Total volume of the patch.
pub fn patch_volume(patch: &dyn ImmersedPatch, resolution: usize) -> Result<f64> {
    Ok(mesh_quadrature(patch, resolution)?.iter().map(|n| n.weight).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for count in [2usize, 3, 5, 16, 64] {
            let (x, w) = gauss_legendre(count);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for degree in 0..(2 * count).min(40) {
                let exact = if degree % 2 == 1 { 0.0 } else { 2.0 / (degree as f64 + 1.0) };
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(degree as i32)).sum();
                assert!((approx - exact).abs() < 1e-13, "count {count} degree {degree}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn grid_weights_sum_to_parameter_volume() {
        let chart = Chart::new(vec![0.0, -1.0], vec![2.0 * PI, 2.0], vec![true, false]).unwrap();
        let grid = parameter_grid(&chart, 7).unwrap();
        assert_eq!(grid.len(), 49);
        let total: f64 = grid.iter().map(|n| n.weight).sum();
        assert!((total - 6.0 * PI).abs() < 1e-12);
        assert!(parameter_grid(&chart, 1).is_err());
    }
}
