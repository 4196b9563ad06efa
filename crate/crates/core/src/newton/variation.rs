use nalgebra::DMatrix;

use crate::convergence::{validate_steps, ConvergenceReport};
use crate::error::{argument, Result};
use crate::multiindex::MultiIndex;

use super::{newton_table, OperatorSystem};

/// Compares `d/dt σ_u(A(t))` at `t0` against `Σ_α tr(A_α'(t0) T_{α♭(u)}(t0))`,
/// differentiating both `σ_u` and the curve by central differences for every
/// step in `steps`.
///
/// The residual shrinks like `h²` until it reaches rounding level; curves for
/// which `σ_u(t)` is at most quadratic give residuals at the noise floor for
/// every step.
pub fn variation_check<F>(
    curve: F,
    u: &MultiIndex,
    t0: f64,
    steps: &[f64],
) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> OperatorSystem,
{
    validate_steps(steps)?;
    let base = curve(t0);
    if u.q() != base.q() {
        return Err(argument(format!(
            "multi-index {u} does not match q = {}",
            base.q()
        )));
    }
    let len = u.length();
    if len > base.n() {
        return Err(argument(format!("|u| = {len} exceeds n = {}", base.n())));
    }
    let table = newton_table(&base, len)?;
    let sigma_at = |t: f64| -> Result<f64> { Ok(newton_table(&curve(t), len)?.sigma(u)) };

    let mut lhs = Vec::with_capacity(steps.len());
    let mut rhs = Vec::with_capacity(steps.len());
    for &h in steps {
        let (plus, minus) = (curve(t0 + h), curve(t0 - h));
        if plus.q() != base.q() || plus.n() != base.n() || minus.q() != base.q() || minus.n() != base.n() {
            return Err(argument("curve changes the system shape"));
        }
        lhs.push((sigma_at(t0 + h)? - sigma_at(t0 - h)?) / (2.0 * h));
        let mut trace = 0.0;
        for alpha in 0..base.q() {
            let Some(lower) = u.lowered(alpha) else { continue };
            let derivative: DMatrix<f64> =
                (&plus.matrices()[alpha] - &minus.matrices()[alpha]) / (2.0 * h);
            trace += (derivative * table.newton(&lower).expect("stored")).trace();
        }
        rhs.push(trace);
    }
    let scale = lhs.iter().chain(&rhs).fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(ConvergenceReport::new(steps.to_vec(), lhs, rhs, 1e-9 * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = DMatrix::from_fn(n, n, |_, _| next());
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn constant_curve_gives_zero_on_both_sides() {
        let a = OperatorSystem::new(vec![sym(3, 1), sym(3, 2)]).unwrap();
        let rep = variation_check(|_| a.clone(), &MultiIndex::new(vec![1, 1]), 0.0, &[1e-2, 5e-3]).unwrap();
        assert!(rep.lhs.iter().chain(&rep.rhs).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn first_sigma_of_a_line_is_trace_of_direction() {
        let (a, b) = (sym(4, 3), sym(4, 4));
        let rep = variation_check(
            |t| OperatorSystem::new(vec![&a + &b * t]).unwrap(),
            &MultiIndex::new(vec![1]),
            0.3,
            &[1e-2],
        )
        .unwrap();
        assert!((rep.lhs[0] - b.trace()).abs() < 1e-10);
        assert!((rep.rhs[0] - b.trace()).abs() < 1e-12);
    }

    #[test]
    fn cubic_dependence_converges_at_second_order() {
        let (a1, a2, b) = (sym(4, 5), sym(4, 6), sym(4, 7));
        let rep = variation_check(
            |t| OperatorSystem::new(vec![&a1 + &b * t, a2.clone()]).unwrap(),
            &MultiIndex::new(vec![3, 0]),
            0.0,
            &[1e-2, 5e-3, 2.5e-3],
        )
        .unwrap();
        let order = rep.min_order().expect("residuals above noise");
        assert!((order - 2.0).abs() < 0.05, "{rep:?}");
        for w in rep.residuals.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.1);
        }
    }

    #[test]
    fn zero_step_is_rejected() {
        let a = OperatorSystem::new(vec![sym(2, 1)]).unwrap();
        assert!(variation_check(|_| a.clone(), &MultiIndex::new(vec![1]), 0.0, &[0.0]).is_err());
    }
}
