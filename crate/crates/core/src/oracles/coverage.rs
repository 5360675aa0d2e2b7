use crate::diffcore::Tensor;
use crate::{Error, Result};

/// Fraction of sample rows within `radius` of each mode centre.
pub fn mode_coverage(samples: &Tensor, modes: &[[f64; 2]], radius: f64) -> Result<Vec<f64>> {
    if samples.cols() != 2 {
        return Err(Error::Invalid("mode coverage expects N x 2 samples".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Invalid("radius must be positive".into()));
    }
    for (i, a) in modes.iter().enumerate() {
        for b in &modes[i + 1..] {
            if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < 2.0 * radius {
                return Err(Error::Invalid("mode balls overlap".into()));
            }
        }
    }
    let n = samples.rows();
    let mut mass = vec![0.0; modes.len()];
    if n == 0 {
        return Ok(mass);
    }
    for r in 0..n {
        let x = samples.row_slice(r);
        for (m, c) in modes.iter().zip(mass.iter_mut()) {
            if (x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2) < radius * radius {
                *c += 1.0;
            }
        }
    }
    Ok(mass.into_iter().map(|c| c / n as f64).collect())
}

/// Modes holding at least `min_mass` of the samples.
pub fn modes_covered(coverage: &[f64], min_mass: f64) -> usize {
    coverage.iter().filter(|&&m| m >= min_mass).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::MIXTURE_MEANS;
    use crate::rng::{seeded, uniform_tensor};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn point_mass_and_empty_balls() {
        let s = Tensor::from_rows(&vec![vec![0.5, 0.5]; 10]).unwrap();
        assert_eq!(mode_coverage(&s, &MIXTURE_MEANS, 0.2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let far = Tensor::from_rows(&vec![vec![5.0, 5.0]; 3]).unwrap();
        assert_eq!(mode_coverage(&far, &MIXTURE_MEANS, 0.2).unwrap(), vec![0.0; 4]);
        assert!(mode_coverage(&s, &MIXTURE_MEANS, 0.6).is_err());
    }

    #[test]
    fn uniform_samples_cover_modes_equally() {
        let n = 10_000;
        let s = uniform_tensor(&mut seeded(1), n, 2, -1.0, 1.0);
        let cov = mode_coverage(&s, &MIXTURE_MEANS, 0.2).unwrap();
        let counts: Vec<f64> = cov.iter().map(|c| c * n as f64).collect();
        let expected = counts.iter().sum::<f64>() / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p}");
    }
}
