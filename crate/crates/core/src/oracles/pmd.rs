use crate::{Error, Result};

/// One-state discrete KL-regularised improvement problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePmd {
    pub prior: Vec<f64>,
    pub q: Vec<f64>,
    pub lambda: f64,
}

impl DiscretePmd {
    pub fn new(prior: Vec<f64>, q: Vec<f64>, lambda: f64) -> Result<Self> {
        if prior.len() != q.len() || prior.is_empty() {
            return Err(Error::Invalid("prior and q must have the same non-zero length".into()));
        }
        if prior.iter().any(|&p| !(p >= 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("prior must be a probability vector".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::Invalid("lambda must be positive".into()));
        }
        Ok(DiscretePmd { prior, q, lambda })
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }
}

/// `π ∝ prior · exp(q/λ)` with the exponent shifted by its max over the support.
pub fn pmd_closed_form(p: &DiscretePmd) -> Result<Vec<f64>> {
    let shift = p
        .prior
        .iter()
        .zip(&p.q)
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, &q)| q / p.lambda)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(Error::Invalid("prior has no mass".into()));
    }
    let w: Vec<f64> = p
        .prior
        .iter()
        .zip(&p.q)
        .map(|(&pr, &q)| if pr > 0.0 { pr * (q / p.lambda - shift).exp() } else { 0.0 })
        .collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Direct normalisation without the shift.
pub fn pmd_brute_force(p: &DiscretePmd) -> Vec<f64> {
    let w: Vec<f64> = p.prior.iter().zip(&p.q).map(|(&pr, &q)| pr * (q / p.lambda).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `E_c[−q] + λ KL(c ‖ prior)`.
pub fn pmd_objective(p: &DiscretePmd, candidate: &[f64]) -> Result<f64> {
    if candidate.len() != p.len() {
        return Err(Error::Invalid("candidate length".into()));
    }
    let mut total = 0.0;
    for ((&c, &pr), &q) in candidate.iter().zip(&p.prior).zip(&p.q) {
        if c < 0.0 {
            return Err(Error::Invalid("candidate has negative mass".into()));
        }
        if c == 0.0 {
            continue;
        }
        if pr == 0.0 {
            return Err(Error::Invalid("candidate puts mass outside the prior support".into()));
        }
        total += c * (-q) + p.lambda * c * (c / pr).ln();
    }
    Ok(total)
}

/// Best objective over the 3-simplex grid with the given pitch, and its point.
pub fn simplex_grid_min(p: &DiscretePmd, pitch: f64) -> Result<(Vec<f64>, f64)> {
    if p.len() != 3 {
        return Err(Error::Invalid("grid search covers three actions only".into()));
    }
    let n = (1.0 / pitch).round() as usize;
    let mut best = (Vec::new(), f64::INFINITY);
    for i in 0..=n {
        for j in 0..=n - i {
            let c = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
            if let Ok(v) = pmd_objective(p, &c) {
                if v < best.1 {
                    best = (c.to_vec(), v);
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform};

    fn random(rng: &mut crate::rng::Rng, n: usize) -> DiscretePmd {
        let raw: Vec<f64> = (0..n).map(|_| uniform(rng, 0.01, 1.0)).collect();
        let s: f64 = raw.iter().sum();
        let mut prior: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let rest: f64 = prior[1..].iter().sum();
        prior[0] = 1.0 - rest;
        let q = (0..n).map(|_| uniform(rng, -3.0, 3.0)).collect();
        DiscretePmd::new(prior, q, uniform(rng, 0.2, 3.0)).unwrap()
    }

    #[test]
    fn analytic_examples() {
        let u = DiscretePmd::new(vec![0.25; 4], vec![1.5; 4], 0.7).unwrap();
        assert_eq!(pmd_closed_form(&u).unwrap(), vec![0.25; 4]);
        let l = 0.4;
        let p = DiscretePmd::new(vec![0.5, 0.5], vec![0.0, l * 3f64.ln()], l).unwrap();
        let out = pmd_closed_form(&p).unwrap();
        assert!((out[0] - 0.25).abs() < 1e-15 && (out[1] - 0.75).abs() < 1e-15);
        assert!(DiscretePmd::new(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn matches_brute_force_and_is_shift_invariant() {
        let mut rng = seeded(8);
        for _ in 0..200 {
            let p = random(&mut rng, 6);
            let a = pmd_closed_form(&p).unwrap();
            let b = pmd_brute_force(&p);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted = DiscretePmd { q: p.q.iter().map(|q| q + 17.0).collect(), ..p.clone() };
            let c = pmd_closed_form(&shifted).unwrap();
            assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn prior_is_the_kl_free_candidate() {
        let p = random(&mut seeded(2), 3);
        let want: f64 = p.prior.iter().zip(&p.q).map(|(a, q)| -a * q).sum();
        assert!((pmd_objective(&p, &p.prior).unwrap() - want).abs() < 1e-12);
        let bad = DiscretePmd::new(vec![1.0, 0.0, 0.0], vec![0.0; 3], 1.0).unwrap();
        assert!(pmd_objective(&bad, &[0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn closed_form_beats_the_grid() {
        let mut rng = seeded(3);
        for _ in 0..5 {
            let p = random(&mut rng, 3);
            let star = pmd_objective(&p, &pmd_closed_form(&p).unwrap()).unwrap();
            let (_, grid) = simplex_grid_min(&p, 0.01).unwrap();
            assert!(star <= grid + 1e-12);
        }
    }

    #[test]
    fn limits_in_lambda() {
        let p = DiscretePmd::new(vec![0.2, 0.5, 0.3], vec![1.0, 0.0, 2.0], 1e6).unwrap();
        let out = pmd_closed_form(&p).unwrap();
        let tv: f64 = out.iter().zip(&p.prior).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv < 1e-3);
        let gap = 1.0;
        let sharp = DiscretePmd { lambda: gap / 20.0, ..p };
        assert!(pmd_closed_form(&sharp).unwrap()[2] > 0.999);
    }

    #[test]
    fn raising_one_q_raises_its_mass() {
        let p = random(&mut seeded(5), 5);
        let before = pmd_closed_form(&p).unwrap();
        let mut q = p.q.clone();
        q[2] += 0.3;
        let after = pmd_closed_form(&DiscretePmd { q, ..p }).unwrap();
        assert!(after[2] > before[2]);
    }
}
