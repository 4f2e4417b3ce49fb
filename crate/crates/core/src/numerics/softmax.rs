use super::ops::softmax_in_place;
use super::tensor::{dot, Tensor};
use crate::error::{Error, Result};

/// `softmax(W h)`: one probability per row of `weights`.
pub fn softmax(h: &[f64], weights: &Tensor) -> Vec<f64> {
    let mut logits: Vec<f64> = (0..weights.rows()).map(|j| dot(h, weights.row(j))).collect();
    softmax_in_place(&mut logits);
    logits
}

/// Softmax of a logits vector, stabilised by max subtraction.
pub fn softmax_logits(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Softmax of `h · e_j − m_j`. Entries with `m_j = +∞` get probability
/// exactly zero.
pub fn masked_softmax(h: &[f64], weights: &Tensor, mask: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(weights.rows(), mask.len(), "mask length must match rows");
    let logits: Vec<f64> = (0..weights.rows())
        .map(|j| dot(h, weights.row(j)))
        .collect();
    masked_softmax_logits(&logits, mask)
}

/// [`masked_softmax`] on precomputed logits.
pub fn masked_softmax_logits(logits: &[f64], mask: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = logits.iter().zip(mask).map(|(l, m)| l - m).collect();
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllMasked);
    }
    softmax_in_place(&mut out);
    Ok(out)
}

/// Log-probabilities under the masked softmax; masked entries are `-∞`.
pub fn masked_log_softmax(logits: &[f64], mask: &[f64]) -> Result<Vec<f64>> {
    let shifted: Vec<f64> = logits.iter().zip(mask).map(|(l, m)| l - m).collect();
    let max = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllMasked);
    }
    let lse = max + shifted.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(shifted.into_iter().map(|v| v - lse).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_logits_are_uniform() {
        let p = softmax_logits(&[0.7; 4]);
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn negative_infinity_gets_zero() {
        assert_eq!(softmax_logits(&[0.0, f64::NEG_INFINITY]), vec![1.0, 0.0]);
    }

    #[test]
    fn matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Tensor::randn(5, 3, 1.0, &mut rng);
        let h = [0.3, -1.2, 0.8];
        let p = softmax(&h, &w);
        let raw: Vec<f64> = (0..5)
            .map(|j| (0..3).map(|k| h[k] * w.get(j, k)).sum::<f64>().exp())
            .collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in p.iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mask_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Tensor::randn(6, 4, 1.0, &mut rng);
        let h = [0.1, 0.2, -0.3, 0.4];
        assert_eq!(masked_softmax(&h, &w, &[0.0; 6]).unwrap(), softmax(&h, &w));
    }

    #[test]
    fn infinite_mask_excludes_and_renormalises() {
        let logits = [1.0, 2.0, 3.0];
        let p = masked_softmax_logits(&logits, &[0.0, f64::INFINITY, 0.0]).unwrap();
        assert_eq!(p[1], 0.0);
        let expect = softmax_logits(&[1.0, 3.0]);
        assert!((p[0] - expect[0]).abs() < 1e-15 && (p[2] - expect[1]).abs() < 1e-15);
        assert!(matches!(
            masked_softmax_logits(&logits, &[f64::INFINITY; 3]),
            Err(Error::AllMasked)
        ));
    }

    #[test]
    fn ln2_mask_halves_unnormalised_weight() {
        let logits = [0.4, -0.1, 1.3];
        let unmasked = softmax_logits(&logits);
        let masked = masked_softmax_logits(&logits, &[0.0, 2f64.ln(), 0.0]).unwrap();
        // ratio to an untouched entry halves
        let before = unmasked[1] / unmasked[0];
        let after = masked[1] / masked[0];
        assert!((after - before / 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn shift_invariant(logits in prop::collection::vec(-30.0f64..30.0, 1..12), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
            let a = softmax_logits(&logits);
            let b = softmax_logits(&shifted);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn finite_mask_equals_shifted_logits(
            pairs in prop::collection::vec((-10.0f64..10.0, 0.0f64..10.0), 1..10)
        ) {
            let logits: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let mask: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let direct: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
            prop_assert_eq!(
                masked_softmax_logits(&logits, &mask).unwrap(),
                softmax_logits(&direct)
            );
        }
    }
}
