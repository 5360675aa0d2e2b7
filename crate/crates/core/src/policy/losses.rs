use crate::diffcore::{DiffError, Ops};
use crate::{Error, Result};

/// Mean over rows of `Σ_i log σ_i`.
pub fn entropy_surrogate<O: Ops>(ops: &mut O, log_sigma: &O::V) -> Result<O::V, DiffError> {
    let rows = ops.primal(log_sigma).rows() as f64;
    let s = ops.sum(log_sigma)?;
    ops.scale(&s, 1.0 / rows)
}

/// Mean over rows of `max(0, kappa − mean_i log σ_i)`.
pub fn entropy_floor_loss<O: Ops>(ops: &mut O, log_sigma: &O::V, kappa: f64) -> Result<O::V, DiffError> {
    let m = ops.mean_cols(log_sigma)?;
    let gap = ops.affine(&m, -1.0, kappa)?;
    let h = ops.relu(&gap)?;
    ops.mean(&h)
}

/// Elementwise Huber averaged over all entries.
pub fn huber_loss<O: Ops>(ops: &mut O, x: &O::V, delta: f64) -> Result<O::V, DiffError> {
    let h = ops.huber(x, delta)?;
    ops.mean(&h)
}

pub fn value_baseline(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Invalid("value baseline of no samples".into()));
    }
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}

/// Truncated advantages `max(0, q − v)`.
pub fn advantage_weights(q: &[f64], v: f64) -> Vec<f64> {
    q.iter().map(|&x| (x - v).max(0.0)).collect()
}

/// Exponential mirror-descent weights `exp((q − v)/λ)`; kept for comparison
/// with the truncated form.
pub fn exponential_weights(q: &[f64], v: f64, lambda: f64) -> Vec<f64> {
    q.iter().map(|&x| ((x - v) / lambda).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{Eval, Tensor};
    use proptest::prelude::*;

    fn ent(ls: &Tensor) -> f64 {
        entropy_surrogate(&mut Eval, ls).unwrap().item().unwrap()
    }

    fn floor(ls: &Tensor, k: f64) -> f64 {
        entropy_floor_loss(&mut Eval, ls, k).unwrap().item().unwrap()
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(ent(&Tensor::zeros(3, 2)), 0.0);
        assert_eq!(ent(&Tensor::full(1, 2, 1.0)), 2.0);
        assert_eq!(ent(&Tensor::full(1, 3, -3.0)), -9.0);
    }

    #[test]
    fn floor_examples() {
        assert_eq!(floor(&Tensor::full(2, 2, -3.0), -3.0), 0.0);
        assert_eq!(floor(&Tensor::full(2, 2, -5.0), -3.0), 2.0);
        assert_eq!(floor(&Tensor::zeros(2, 2), -3.0), 0.0);
    }

    #[test]
    fn huber_examples() {
        let h = |x: f64| huber_loss(&mut Eval, &Tensor::scalar(x), 1.0).unwrap().item().unwrap();
        assert_eq!(h(0.0), 0.0);
        assert_eq!(h(0.5), 0.125);
        assert_eq!(h(2.0), 1.5);
        assert_eq!(h(-2.0), 1.5);
    }

    #[test]
    fn baseline_and_weights() {
        assert_eq!(value_baseline(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(value_baseline(&[4.5]).unwrap(), 4.5);
        assert_eq!(value_baseline(&[7.0; 5]).unwrap(), 7.0);
        assert!(value_baseline(&[]).is_err());
        assert_eq!(advantage_weights(&[2.0, 3.0, -3.0], 2.0), vec![0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn floor_is_nonnegative_and_zero_iff_above(
            v in proptest::collection::vec(-12.0f64..3.0, 6),
            kappa in -8.0f64..1.0,
        ) {
            let ls = Tensor::from_vec(3, 2, v.clone()).unwrap();
            let l = floor(&ls, kappa);
            prop_assert!(l >= 0.0);
            let above = v.chunks(2).all(|r| (r[0] + r[1]) / 2.0 >= kappa);
            prop_assert_eq!(l == 0.0, above);
        }

        #[test]
        fn weights_nonnegative_monotone_and_shift_invariant(
            q in proptest::collection::vec(-10.0f64..10.0, 1..32),
            c in -100.0f64..100.0,
            bump in 0.0f64..5.0,
            i in 0usize..32,
        ) {
            let v = value_baseline(&q).unwrap();
            let w = advantage_weights(&q, v);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
            let ws = advantage_weights(&shifted, v + c);
            for (a, b) in w.iter().zip(&ws) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let i = i % q.len();
            let mut q2 = q.clone();
            q2[i] += bump;
            prop_assert!(advantage_weights(&q2, v)[i] >= w[i]);
        }

        #[test]
        fn truncated_and_exponential_rank_positive_advantages_alike(
            q in proptest::collection::vec(-10.0f64..10.0, 2..32),
            lambda in 0.1f64..10.0,
        ) {
            let v = value_baseline(&q).unwrap();
            let lin = advantage_weights(&q, v);
            let exp = exponential_weights(&q, v, lambda);
            for i in 0..q.len() {
                for j in 0..q.len() {
                    if lin[i] > 0.0 && lin[j] > 0.0 {
                        prop_assert_eq!(lin[i] < lin[j], exp[i] < exp[j]);
                    }
                }
            }
        }
    }
}
