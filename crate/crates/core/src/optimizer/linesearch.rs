//! Armijo backtracking line search.

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Outcome of one backtracking line search.
pub(crate) struct Step {
    pub x: Vec<f64>,
    pub f: f64,
    pub alpha: f64,
}

/// Backtracks from a unit step along `d` until the Armijo condition holds; the
/// first acceptable step wins. `None` if `d` is not a descent direction or no
/// step is accepted.
pub(crate) fn armijo(x: &[f64], f: f64, g: &[f64], d: &[f64], mut eval: impl FnMut(&[f64]) -> f64) -> Option<Step> {
    let slope = dot(g, d);
    if !(slope < 0.0) {
        return None;
    }
    let mut alpha = 1.0;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..MAX_BACKTRACKS {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(d) {
            *t = xi + alpha * di;
        }
        let ft = eval(&trial);
        if ft.is_finite() && ft <= f + ARMIJO_C1 * alpha * slope {
            return Some(Step { x: trial, f: ft, alpha });
        }
        alpha *= BACKTRACK;
    }
    None
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> f64 {
        x[0] * x[0] + 10.0 * x[1] * x[1]
    }

    #[test]
    fn full_step_is_taken_when_acceptable() {
        let x = [1.0, 1.0];
        let g = [2.0, 20.0];
        let d = [-1.0, -1.0];
        let step = armijo(&x, quadratic(&x), &g, &d, quadratic).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.x, vec![0.0, 0.0]);
    }

    #[test]
    fn overshooting_direction_is_halved() {
        let x = [1.0, 1.0];
        let g = [2.0, 20.0];
        let d = [-2.0, -20.0];
        let step = armijo(&x, quadratic(&x), &g, &d, quadratic).unwrap();
        assert!(step.alpha < 1.0);
        assert!(step.f < quadratic(&x));
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let x = [1.0, 1.0];
        let g = [2.0, 20.0];
        assert!(armijo(&x, quadratic(&x), &g, &[1.0, 0.0], quadratic).is_none());
    }
}
