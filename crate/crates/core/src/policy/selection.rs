use crate::diffcore::Tensor;
use crate::rng::Rng;
use crate::{Error, Result};

use super::smfp::{NoisePair, SmfpActor};

/// Index of the largest score; the lowest index wins ties.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// The chosen candidate per state.
#[derive(Clone, Debug)]
pub struct Selected {
    /// Actions clamped to the box.
    pub actions: Tensor,
    pub raw: Tensor,
    pub log_sigma: Tensor,
    pub noise: NoisePair,
    pub index: Vec<usize>,
    /// Scores of every candidate, `k` consecutive entries per state.
    pub scores: Vec<f64>,
}

/// Draw `k` one-step candidates per state and keep the best under `score`.
///
/// `score` receives the repeated states and clamped candidate actions and
/// returns one value per row.
pub fn best_of_k(
    actor: &SmfpActor,
    states: &Tensor,
    k: usize,
    rng: &mut Rng,
    mut score: impl FnMut(&Tensor, &Tensor) -> Result<Vec<f64>>,
) -> Result<Selected> {
    if k == 0 {
        return Err(Error::Invalid("best-of-k needs k >= 1".into()));
    }
    let n = states.rows();
    let d = actor.action_dim();
    let noise = NoisePair::draw(rng, n * k, d);
    let rep = if k == 1 { states.clone() } else { states.repeat_rows(k) };
    let (raw, log_sigma) = actor.sample_raw(&rep, &noise)?;
    let actions = actor.action_box.clamp(&raw);
    let scores = if k == 1 { vec![0.0; n] } else { score(&rep, &actions)? };
    if scores.len() != n * k {
        return Err(Error::Invalid(format!("scorer returned {} values for {} candidates", scores.len(), n * k)));
    }
    let pick: Vec<usize> = (0..n).map(|i| i * k + argmax_lowest(&scores[i * k..(i + 1) * k])).collect();
    Ok(Selected {
        actions: actions.select_rows(&pick),
        raw: raw.select_rows(&pick),
        log_sigma: log_sigma.select_rows(&pick),
        noise: noise.select_rows(&pick),
        index: pick.iter().map(|p| p % k).collect(),
        scores,
    })
}

/// Target-side candidate count `max(1, round(k_b / 2))`.
pub fn target_k(k_b: usize) -> usize {
    ((k_b as f64 * 0.5).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ActionBox;
    use crate::nets::ActorConfig;
    use crate::rng::{seeded, uniform_tensor};

    fn actor() -> SmfpActor {
        let cfg = ActorConfig { hidden: 8, time_embed_dim: 4, ..ActorConfig::new(2, 2) };
        let mut a = SmfpActor::new(cfg, ActionBox::symmetric(2, 1.0), &mut seeded(0));
        let mut rng = seeded(1);
        for t in a.params.tensors_mut() {
            t.add_assign(&uniform_tensor(&mut rng, t.rows(), t.cols(), -0.2, 0.2));
        }
        a
    }

    #[test]
    fn argmax_ties_take_lowest() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[5.0]), 0);
        assert_eq!(argmax_lowest(&[2.0, 2.0]), 0);
    }

    #[test]
    fn k_one_equals_plain_sampling() {
        let act = actor();
        let s = uniform_tensor(&mut seeded(2), 3, 2, -1.0, 1.0);
        let sel = best_of_k(&act, &s, 1, &mut seeded(7), |_, _| unreachable!()).unwrap();
        let mut rng = seeded(7);
        let noise = NoisePair::draw(&mut rng, 3, 2);
        assert_eq!(sel.actions, act.sample_one_step(&s, &noise).unwrap());
    }

    #[test]
    fn picks_the_scored_candidate() {
        let act = actor();
        let s = uniform_tensor(&mut seeded(3), 2, 2, -1.0, 1.0);
        let sel = best_of_k(&act, &s, 3, &mut seeded(4), |rep, _| {
            Ok((0..rep.rows()).map(|i| if i % 3 == 2 { 1.0 } else { 0.0 }).collect())
        })
        .unwrap();
        assert_eq!(sel.index, vec![2, 2]);
    }

    #[test]
    fn selected_value_dominates_candidates() {
        let act = actor();
        let s = uniform_tensor(&mut seeded(5), 4, 2, -1.0, 1.0);
        let score = |_: &Tensor, a: &Tensor| Ok((0..a.rows()).map(|r| a.get(r, 0) - a.get(r, 1).powi(2)).collect());
        let sel = best_of_k(&act, &s, 8, &mut seeded(6), score).unwrap();
        for i in 0..4 {
            let chosen = sel.scores[i * 8 + sel.index[i]];
            assert!(sel.scores[i * 8..(i + 1) * 8].iter().all(|&c| c <= chosen));
            let a = sel.actions.row_slice(i);
            assert_eq!(chosen, a[0] - a[1].powi(2));
        }
    }

    #[test]
    fn target_side_count() {
        assert_eq!(target_k(8), 4);
        assert_eq!(target_k(1), 1);
        assert_eq!(target_k(3), 2);
    }
}
