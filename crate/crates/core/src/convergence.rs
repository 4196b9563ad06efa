//! Step-halving convergence reports shared by the finite-difference checks.

use serde::Serialize;

/// Two-sided comparison `lhs(h)` vs `rhs(h)` over a list of steps.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub steps: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `|lhs − rhs|` per step.
    pub residuals: Vec<f64>,
    /// Observed order between consecutive steps; `None` when both residuals sit
    /// below `noise_floor` and the ratio carries no information.
    pub orders: Vec<Option<f64>>,
    pub noise_floor: f64,
}

impl ConvergenceReport {
    pub fn new(steps: Vec<f64>, lhs: Vec<f64>, rhs: Vec<f64>, noise_floor: f64) -> Self {
        let residuals: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
        let orders = residuals
            .windows(2)
            .zip(steps.windows(2))
            .map(|(r, h)| {
                if r[0] <= noise_floor && r[1] <= noise_floor {
                    None
                } else {
                    Some((r[0] / r[1]).ln() / (h[0] / h[1]).ln())
                }
            })
            .collect();
        ConvergenceReport {
            steps,
            lhs,
            rhs,
            residuals,
            orders,
            noise_floor,
        }
    }

    /// Smallest informative order, if any pair was above the noise floor.
    pub fn min_order(&self) -> Option<f64> {
        self.orders
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc: Option<f64>, o| Some(acc.map_or(o, |a| a.min(o))))
    }

    /// Residual at the smallest step.
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// Every informative order is at least `required`.
    pub fn order_at_least(&self, required: f64) -> bool {
        self.orders.iter().flatten().all(|&o| o >= required)
    }
}

pub(crate) fn validate_steps(steps: &[f64]) -> crate::Result<()> {
    if steps.is_empty() {
        return Err(crate::error::argument("at least one step is required"));
    }
    if let Some(bad) = steps.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(crate::error::argument(format!(
            "finite-difference steps must be positive, got {bad}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_decay_has_order_two() {
        let steps = vec![1e-2, 5e-3, 2.5e-3];
        let lhs: Vec<f64> = steps.iter().map(|h| 1.0 + 3.0 * h * h).collect();
        let rep = ConvergenceReport::new(steps, lhs, vec![1.0; 3], 1e-12);
        let o = rep.min_order().unwrap();
        assert!((o - 2.0).abs() < 1e-6, "{o}");
        assert!(rep.order_at_least(1.8));
    }

    #[test]
    fn residuals_at_noise_level_carry_no_order() {
        let rep = ConvergenceReport::new(vec![1e-2, 5e-3], vec![1e-15, 3e-15], vec![0.0; 2], 1e-12);
        assert_eq!(rep.orders, vec![None]);
        assert!(rep.min_order().is_none());
        assert!(rep.order_at_least(1.8));
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(validate_steps(&[1e-2, 0.0]).is_err());
        assert!(validate_steps(&[]).is_err());
        assert!(validate_steps(&[1e-3]).is_ok());
    }
}
