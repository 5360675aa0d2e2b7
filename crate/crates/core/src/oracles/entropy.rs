use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;

use crate::diffcore::Tensor;
use crate::policy::SmfpActor;
use crate::{Error, Result};

pub const HERMITE_NODES: usize = 64;
pub const QUADRATURE_TOL: f64 = 1e-6;

/// Nodes and probability weights for `E_{e ~ N(0,1)}[f(e)] ≈ Σ w f(x)`.
pub fn standard_normal_rule(nodes: usize) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(nodes).ok_or_else(|| Error::Invalid("need at least one node".into()))?;
    let rule = GaussHermite::new(n);
    Ok(rule.iter().map(|&(x, w)| (SQRT_2 * x, w / PI.sqrt())).collect())
}

/// `½ log(2πe·var)`.
pub fn gaussian_entropy(var: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E * var).ln()
}

/// A weighted mixture of 1-d Gaussians.
#[derive(Clone, Debug)]
pub struct Mixture1d {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Mixture1d {
    pub fn density(&self, x: f64) -> f64 {
        let mut p = 0.0;
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.stds) {
            let z = (x - m) / s;
            p += w * (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt());
        }
        p
    }

    /// `−∫ p log p` by adaptive Simpson between breakpoints at each
    /// component's `mean ± k·std`.
    pub fn entropy(&self, tol: f64) -> f64 {
        let mut cuts: Vec<f64> = Vec::new();
        for (m, s) in self.means.iter().zip(&self.stds) {
            for k in [-12.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0] {
                cuts.push(m + k * s);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let f = |x: f64| {
            let p = self.density(x);
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        };
        let per = tol / cuts.len() as f64;
        cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], per, 40)).sum()
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb, m) = (f(a), f(b), 0.5 * (a + b));
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Marginal of the one-step sample at one state as a mixture over
/// Hermite nodes in `e`, with the expected `log σ` under the same rule.
pub fn one_step_marginal(actor: &SmfpActor, state: &[f64], nodes: usize) -> Result<(Mixture1d, f64)> {
    if actor.action_dim() != 1 {
        return Err(Error::Invalid("marginal entropy quadrature needs a 1-d action".into()));
    }
    let rule = standard_normal_rule(nodes)?;
    let n = rule.len();
    let states = Tensor::row(state).repeat_rows(n);
    let e = Tensor::column(&rule.iter().map(|r| r.0).collect::<Vec<_>>());
    let (u, log_sigma) = actor.forward(&states, &e, &Tensor::zeros(n, 1), &Tensor::full(n, 1, 1.0))?;
    let mut mix = Mixture1d { weights: Vec::with_capacity(n), means: Vec::with_capacity(n), stds: Vec::with_capacity(n) };
    let mut mean_log_sigma = 0.0;
    for (i, &(x, w)) in rule.iter().enumerate() {
        mix.weights.push(w);
        mix.means.push(x - u.get(i, 0));
        mix.stds.push(log_sigma.get(i, 0).exp());
        mean_log_sigma += w * log_sigma.get(i, 0);
    }
    Ok((mix, mean_log_sigma))
}

/// Differential entropy of the unclamped one-step action at `state`.
pub fn marginal_entropy_quadrature(actor: &SmfpActor, state: &[f64], nodes: usize) -> Result<f64> {
    Ok(one_step_marginal(actor, state, nodes)?.0.entropy(QUADRATURE_TOL))
}

/// `E_e[log σ] + ½ log(2πe)`, the conditional entropy the marginal bounds from above.
pub fn conditional_entropy_bound(actor: &SmfpActor, state: &[f64], nodes: usize) -> Result<f64> {
    Ok(one_step_marginal(actor, state, nodes)?.1 + gaussian_entropy(1.0))
}

/// `KL(N(μ, diag σ²) ‖ N(μ₀, τ² I))`.
pub fn gaussian_kl_to_isotropic(mu: &[f64], sigma: &[f64], mu0: &[f64], tau: f64) -> f64 {
    mu.iter()
        .zip(sigma)
        .zip(mu0)
        .map(|((m, s), m0)| tau.ln() - s.ln() + (s * s + (m - m0).powi(2)) / (2.0 * tau * tau) - 0.5)
        .sum()
}

/// `∂KL/∂σ = −1/σ + σ/τ²`.
pub fn gaussian_kl_sigma_grad(sigma: &[f64], tau: f64) -> Vec<f64> {
    sigma.iter().map(|s| -1.0 / s + s / (tau * tau)).collect()
}

/// `∂(−Σ log σ)/∂σ`.
pub fn neg_log_sigma_grad(sigma: &[f64]) -> Vec<f64> {
    sigma.iter().map(|s| -1.0 / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ActionBox;
    use crate::nets::ActorConfig;
    use crate::oracles::{finite_diff_grad, relative_error};
    use crate::rng::{seeded, uniform_tensor};

    #[test]
    fn rule_integrates_normal_moments() {
        let r = standard_normal_rule(HERMITE_NODES).unwrap();
        let m = |k: i32| r.iter().map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-10);
        assert!((m(4) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn convolved_gaussian_entropy_is_analytic() {
        let cfg = ActorConfig { hidden: 8, time_embed_dim: 4, log_sigma_init: 0.3f64.ln(), ..ActorConfig::new(1, 1) };
        let actor = SmfpActor::new(cfg, ActionBox::symmetric(1, 10.0), &mut seeded(0));
        let h = marginal_entropy_quadrature(&actor, &[0.2], HERMITE_NODES).unwrap();
        let s2 = 0.09;
        assert!((h - gaussian_entropy(1.0 + s2)).abs() < 1e-4, "{h}");
        let slack = h - conditional_entropy_bound(&actor, &[0.2], HERMITE_NODES).unwrap();
        assert!(slack >= 0.0);
        assert!((slack - (0.5 * (1.0 + s2).ln() - 0.3f64.ln())).abs() < 1e-4);
    }

    #[test]
    fn random_actor_respects_the_bound() {
        let mut rng = seeded(11);
        let cfg = ActorConfig { hidden: 16, time_embed_dim: 4, ..ActorConfig::new(1, 1) };
        let mut actor = SmfpActor::new(cfg, ActionBox::symmetric(1, 10.0), &mut rng);
        for t in actor.params.tensors_mut() {
            t.add_assign(&uniform_tensor(&mut rng, t.rows(), t.cols(), -0.5, 0.5));
        }
        let h = marginal_entropy_quadrature(&actor, &[0.4], HERMITE_NODES).unwrap();
        let lb = conditional_entropy_bound(&actor, &[0.4], HERMITE_NODES).unwrap();
        assert!(h >= lb - 1e-3, "{h} < {lb}");
        let two = SmfpActor::new(ActorConfig::new(1, 2), ActionBox::symmetric(2, 1.0), &mut rng);
        assert!(marginal_entropy_quadrature(&two, &[0.0], 8).is_err());
    }

    #[test]
    fn kl_sigma_gradient_approaches_entropy_gradient() {
        let sigma = [0.3, 1.2, 0.05];
        let g = gaussian_kl_sigma_grad(&sigma, 1e4);
        assert!(relative_error(&g, &neg_log_sigma_grad(&sigma)) < 1e-3);
        let fd = finite_diff_grad(|s| gaussian_kl_to_isotropic(&[0.1, 0.0, -0.2], s, &[0.0; 3], 2.0), &sigma, 1e-6);
        assert!(relative_error(&fd, &gaussian_kl_sigma_grad(&sigma, 2.0)) < 1e-6);
    }
}
