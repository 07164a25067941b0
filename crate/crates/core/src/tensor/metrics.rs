use super::{MaskTensor, WeightTensor};
use crate::error::{Error, Result};

/// Fraction of blocks with at most two entries of magnitude above `tau_zero`.
pub fn sparsity_ratio_24(w: &WeightTensor, tau_zero: f64) -> f64 {
    let n = w.num_blocks();
    if n == 0 {
        return 1.0;
    }
    let sparse = w
        .blocks()
        .filter(|b| b.iter().filter(|v| v.abs() > tau_zero).count() <= 2)
        .count();
    sparse as f64 / n as f64
}

/// Fraction of positions where two masks agree.
pub fn mask_similarity(a: &MaskTensor, b: &MaskTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            got: b.shape(),
        });
    }
    if a.bits().is_empty() {
        return Ok(1.0);
    }
    let same = a
        .bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x == y)
        .count();
    Ok(same as f64 / a.bits().len() as f64)
}

/// `||(w - w0) ⊙ m||_F / ||w0 ⊙ m||_F`.
pub fn relative_norm_gap(w: &WeightTensor, w0: &WeightTensor, m: &MaskTensor) -> Result<f64> {
    w.check_same_shape(w0)?;
    m.check_matches(w)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&a, &b), &keep) in w.data().iter().zip(w0.data()).zip(m.bits()) {
        if keep {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: Vec<f64>) -> WeightTensor {
        let cols = data.len();
        WeightTensor::new(1, cols, data).unwrap()
    }

    #[test]
    fn sparsity_ratio_examples() {
        assert_eq!(
            sparsity_ratio_24(&t(vec![1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 3.0]), 0.0),
            1.0
        );
        assert_eq!(
            sparsity_ratio_24(&t(vec![1.0, 0.1, 2.0, 0.3, 0.5, 0.6, 0.7, 3.0]), 0.0),
            0.0
        );
        assert_eq!(
            sparsity_ratio_24(&t(vec![1.0, 0.0, 2.0, 0.0, 0.5, 0.6, 0.7, 3.0]), 0.0),
            0.5
        );
        assert_eq!(sparsity_ratio_24(&t(vec![1.0, 1e-9, 2.0, 1e-9]), 1e-8), 1.0);
    }

    #[test]
    fn similarity_examples() {
        let a = MaskTensor::new(1, 4, vec![true, false, true, false]).unwrap();
        assert_eq!(mask_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_similarity(&a, &a.negate()).unwrap(), 0.0);
        let b = MaskTensor::new(1, 8, vec![true; 8]).unwrap();
        assert!(mask_similarity(&a, &b).is_err());
    }

    #[test]
    fn norm_gap_examples() {
        let w0 = t(vec![3.0, -4.0, 1.0, 2.0]);
        let m = MaskTensor::new(1, 4, vec![true, true, false, false]).unwrap();
        assert_eq!(relative_norm_gap(&w0, &w0, &m).unwrap(), 0.0);
        let doubled = w0.map(|v| 2.0 * v).unwrap();
        assert_eq!(relative_norm_gap(&doubled, &w0, &m).unwrap(), 1.0);
        // delta on kept entries has norm 1 against ||w0 ⊙ m|| = 5
        let shifted = t(vec![3.6, -4.8, 9.0, -9.0]);
        assert!((relative_norm_gap(&shifted, &w0, &m).unwrap() - 0.2).abs() < 1e-12);
        let zero = t(vec![0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            relative_norm_gap(&zero, &zero, &m),
            Err(Error::ZeroNorm)
        ));
    }
}
