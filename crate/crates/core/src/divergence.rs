//! Kullback-Leibler and Jensen-Shannon divergences in nats.

use thiserror::Error;

/// Added to every entry of the second argument of [`kl_divergence`] before
/// renormalising, so that entries underflowed to zero stay finite.
pub const KL_SMOOTHING: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
#[error("distributions have different lengths ({0} vs {1})")]
pub struct DimensionMismatch(pub usize, pub usize);

/// `KL(p || q) = sum p ln(p / q)` with `q` smoothed by [`KL_SMOOTHING`];
/// terms with `p = 0` contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, DimensionMismatch> {
    if p.len() != q.len() {
        return Err(DimensionMismatch(p.len(), q.len()));
    }
    let norm = 1.0 + KL_SMOOTHING * q.len() as f64;
    let kl = p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi * norm / (qi + KL_SMOOTHING)).ln())
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Both KL directions and their mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricKl {
    pub forward: f64,
    pub backward: f64,
}

impl SymmetricKl {
    pub fn mean(&self) -> f64 {
        0.5 * (self.forward + self.backward)
    }
}

pub fn symmetric_kl(p: &[f64], q: &[f64]) -> Result<SymmetricKl, DimensionMismatch> {
    Ok(SymmetricKl {
        forward: kl_divergence(p, q)?,
        backward: kl_divergence(q, p)?,
    })
}

/// Jensen-Shannon divergence, bounded by `ln 2`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64, DimensionMismatch> {
    if p.len() != q.len() {
        return Err(DimensionMismatch(p.len(), q.len()));
    }
    let mut js = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            js += 0.5 * pi * (pi / m).ln();
        }
        if qi > 0.0 {
            js += 0.5 * qi * (qi / m).ln();
        }
    }
    Ok(js.clamp(0.0, std::f64::consts::LN_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kl_of_identical_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert!(kl_divergence(&p, &p).unwrap() < 1e-9);
    }

    #[test]
    fn kl_two_bin_hand_values() {
        let a = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        let b = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        let ab = kl_divergence(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        let ba = kl_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        assert!((ab - a).abs() < 1e-9 && (ab - 0.5108).abs() < 1e-4, "{ab}");
        assert!((ba - b).abs() < 1e-9 && (ba - 0.3681).abs() < 1e-4, "{ba}");
        let s = symmetric_kl(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        assert!((s.mean() - 0.5 * (a + b)).abs() < 1e-9);
    }

    #[test]
    fn kl_survives_zero_in_q() {
        let kl = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!(kl.is_finite() && kl > 10.0);
    }

    #[test]
    fn mismatched_lengths_error() {
        assert_eq!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(DimensionMismatch(1, 2))
        );
        assert!(js_divergence(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn js_hand_values() {
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let js = js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((js - std::f64::consts::LN_2).abs() < 1e-9);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn js_symmetric_bounded_and_zero_on_diagonal(p in simplex(6), q in simplex(6)) {
            let pq = js_divergence(&p, &q).unwrap();
            let qp = js_divergence(&q, &p).unwrap();
            prop_assert!((pq - qp).abs() < 1e-12);
            prop_assert!((0.0..=std::f64::consts::LN_2).contains(&pq));
            prop_assert!(js_divergence(&p, &p).unwrap() < 1e-12);
            let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
            if l1 > 1e-3 {
                prop_assert!(pq > 0.0);
            }
        }

        #[test]
        fn kl_non_negative(p in simplex(5), q in simplex(5)) {
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }
    }
}
