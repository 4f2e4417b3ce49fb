//! Incrementally grown Cholesky factor with a running log-determinant.
//!
//! Adding one row/column to a symmetric positive definite matrix `S` costs
//! one forward substitution against the current factor:
//!
//! ```text
//! S' = | S   s |      L' = | L    0 |      L v = s
//!      | sᵀ  d |           | vᵀ   r |      r² = d − ‖v‖²
//! ```
//!
//! so `log det S' = log det S + ln r²`.

use crate::error::{Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CholeskyState {
    /// Row `i` holds the `i + 1` nonzero entries of the lower factor.
    rows: Vec<Vec<f64>>,
    log_det: f64,
    jittered: bool,
}

impl CholeskyState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// True if any extension so far needed jitter on its pivot.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r[r.len() - 1])
    }

    /// Squared pivot `d − ‖L⁻¹ s‖²` that extending by `(s, d)` would create,
    /// before any jitter.
    pub fn schur_complement(&self, new_row: &[f64], diag: f64) -> f64 {
        let v = self.forward_solve(new_row);
        diag - v.iter().map(|x| x * x).sum::<f64>()
    }

    fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.rows.len(), "new row must match current dimension");
        let mut v = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let partial: f64 = row[..i].iter().zip(&v).map(|(l, x)| l * x).sum();
            v.push((b[i] - partial) / row[i]);
        }
        v
    }

    /// Extends the factor by one row. A pivot at or below `jitter` is raised
    /// by `jitter` and the state is flagged; a pivot that is still not
    /// positive fails with [`Error::SingularKernel`].
    pub fn extend(&self, new_row: &[f64], diag: f64, jitter: f64) -> Result<CholeskyState> {
        let mut v = self.forward_solve(new_row);
        let mut pivot = diag - v.iter().map(|x| x * x).sum::<f64>();
        let mut jittered = self.jittered;
        if pivot <= jitter {
            pivot += jitter;
            jittered = true;
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(Error::SingularKernel { pivot });
            }
        }
        v.push(pivot.sqrt());
        let mut rows = self.rows.clone();
        rows.push(v);
        Ok(CholeskyState {
            rows,
            log_det: self.log_det + pivot.ln(),
            jittered,
        })
    }
}

/// Extends `state` with default jitter and returns the new state and its
/// log-determinant.
pub fn logdet_extend(
    state: &CholeskyState,
    new_row: &[f64],
    diag: f64,
) -> Result<(CholeskyState, f64)> {
    let next = state.extend(new_row, diag, DEFAULT_JITTER)?;
    let ld = next.log_det();
    Ok((next, ld))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(k, k + 2, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(k, k) * 0.05
    }

    fn grow(m: &DMatrix<f64>) -> CholeskyState {
        let mut st = CholeskyState::new();
        for i in 0..m.nrows() {
            let row: Vec<f64> = (0..i).map(|j| m[(i, j)]).collect();
            st = logdet_extend(&st, &row, m[(i, i)]).unwrap().0;
        }
        st
    }

    #[test]
    fn unit_diag_has_zero_logdet() {
        let (st, ld) = logdet_extend(&CholeskyState::new(), &[], 1.0).unwrap();
        assert_eq!(ld, 0.0);
        assert_eq!(st.dim(), 1);
    }

    #[test]
    fn two_by_two_jaccard_kernel() {
        let (st, _) = logdet_extend(&CholeskyState::new(), &[], 1.0).unwrap();
        let (_, ld) = logdet_extend(&st, &[1.0 / 3.0], 1.0).unwrap();
        assert!((ld - (8.0f64 / 9.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn random_4x4_matches_dense_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_spd(4, &mut rng);
        let st = grow(&m);
        assert!((st.log_det() - m.determinant().ln()).abs() < 1e-9);
        assert!(!st.jittered());
    }

    #[test]
    fn repeated_row_is_jittered_not_fatal() {
        let (st, _) = logdet_extend(&CholeskyState::new(), &[], 1.0).unwrap();
        let (st, ld) = logdet_extend(&st, &[1.0], 1.0).unwrap();
        assert!(st.jittered());
        assert!(ld < -15.0);
    }

    #[test]
    fn negative_pivot_is_singular() {
        let (st, _) = logdet_extend(&CholeskyState::new(), &[], 1.0).unwrap();
        assert!(matches!(
            logdet_extend(&st, &[2.0], 1.0),
            Err(Error::SingularKernel { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sequential_matches_dense(seed in any::<u64>(), k in 1usize..=12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_spd(k, &mut rng);
            let st = grow(&m);
            let dense = m.clone().cholesky().unwrap().l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
            prop_assert!((st.log_det() - dense).abs() < 1e-8);
            let from_diag: f64 = st.diagonal().map(|d| 2.0 * d.ln()).sum();
            prop_assert!((st.log_det() - from_diag).abs() < 1e-10);
            prop_assert!(st.diagonal().all(|d| d > 0.0));
        }
    }
}
