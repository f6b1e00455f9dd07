//! Banded curvature model used as the initial inverse Hessian of L-BFGS.
//!
//! Step costs couple the three position coordinates of one knot; each bound
//! sample is a linear functional of the states of one segment's two end
//! knots. Ordering variables knot by knot therefore gives a band matrix of
//! half-bandwidth `2 * VARS_PER_KNOT - 1`, cheap to factor at every iterate.

use crate::dynamics::{min_jerk_raw, AxisState, QuinticSegment};

use super::transcription::{Transcription, VARS_PER_KNOT};

/// Symmetric band matrix; row `i` stores columns `i - band ..= i`.
pub(crate) struct BandMatrix {
    n: usize,
    band: usize,
    rows: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, band: usize) -> Self {
        BandMatrix {
            n,
            band,
            rows: vec![0.0; n * (band + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.band);
        i * (self.band + 1) + self.band + j - i
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let at = self.at(i, j);
        self.rows[at] += v;
    }

    /// In-place Cholesky factorization; `None` if not positive definite.
    pub fn factor(mut self) -> Option<BandCholesky> {
        let (n, b) = (self.n, self.band);
        for i in 0..n {
            for j in i.saturating_sub(b)..=i {
                let mut s = self.rows[self.at(i, j)];
                for k in i.saturating_sub(b)..j {
                    s -= self.rows[self.at(i, k)] * self.rows[self.at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    let at = self.at(i, i);
                    self.rows[at] = s.sqrt();
                } else {
                    let at = self.at(i, j);
                    self.rows[at] = s / self.rows[self.at(j, j)];
                }
            }
        }
        Some(BandCholesky(self))
    }
}

pub(crate) struct BandCholesky(BandMatrix);

impl BandCholesky {
    /// Overwrites `x` with `A^-1 x`.
    pub fn solve(&self, x: &mut [f64]) {
        let l = &self.0;
        let (n, b) = (l.n, l.band);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= l.rows[l.at(i, k)] * x[k];
            }
            x[i] = s / l.rows[l.at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + b + 1).min(n) {
                s -= l.rows[l.at(k, i)] * x[k];
            }
            x[i] = s / l.rows[l.at(i, i)];
        }
    }
}

/// One sampled bound: a linear functional of a segment's six scaled end
/// states on one axis, already divided by its limit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BoundRow {
    pub coeffs: [f64; 6],
}

/// Sampled velocity and acceleration functionals of one segment on `axis`,
/// in scaled coordinates `[p0, v0/vmax, a0/amax, p1, v1/vmax, a1/amax]`.
pub(crate) fn bound_rows(layout: &Transcription, axis: usize, taus: &[f64]) -> Vec<BoundRow> {
    let ts = layout.sampling_period();
    let (vl, al) = (layout.v_max().axis(axis), layout.a_max().axis(axis));
    let scales = [1.0, vl, al];
    let mut rows = Vec::with_capacity(2 * taus.len());
    for &tau in taus {
        let mut rv = [0.0; 6];
        let mut ra = [0.0; 6];
        for e in 0..6 {
            let mut unit = [0.0; 6];
            unit[e] = scales[e % 3];
            let start = AxisState::new(unit[0], unit[1], unit[2]);
            let end = AxisState::new(unit[3], unit[4], unit[5]);
            let (alpha, beta, gamma) = min_jerk_raw(start, end, ts);
            let s = QuinticSegment {
                alpha,
                beta,
                gamma,
                start,
                duration: ts,
            }
            .eval(tau);
            rv[e] = s.v / vl;
            ra[e] = s.a / al;
        }
        rows.push(BoundRow { coeffs: rv });
        rows.push(BoundRow { coeffs: ra });
    }
    rows
}

/// Empty band matrix sized for `layout`.
pub(crate) fn empty_model(layout: &Transcription) -> BandMatrix {
    BandMatrix::zeros(layout.num_vars(), 2 * VARS_PER_KNOT - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_cholesky_solves_a_tridiagonal_system() {
        let n = 12;
        let mut a = BandMatrix::zeros(n, 3);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let chol = a.factor().unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 4.0 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        chol.solve(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = BandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.factor().is_none());
    }
}
