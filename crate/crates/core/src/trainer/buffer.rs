use crate::diffcore::Tensor;
use crate::rng::{index, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub truncated: bool,
}

/// Row-aligned minibatch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
    /// 1.0 for terminal transitions.
    pub done: Vec<f64>,
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    cursor: usize,
    len: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    done: Vec<f64>,
    truncated: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        ReplayBuffer {
            capacity,
            state_dim,
            action_dim,
            cursor: 0,
            len: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            done: Vec::new(),
            truncated: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim || t.action.len() != self.action_dim {
            return Err(Error::Invalid("transition shape does not match the buffer".into()));
        }
        if !t.reward.is_finite() {
            return Err(Error::Invalid("non-finite reward".into()));
        }
        let (s, a) = (self.state_dim, self.action_dim);
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.done.push(t.done as u8 as f64);
            self.truncated.push(t.truncated as u8 as f64);
            self.len += 1;
        } else {
            let i = self.cursor;
            self.states[i * s..(i + 1) * s].copy_from_slice(&t.state);
            self.actions[i * a..(i + 1) * a].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_states[i * s..(i + 1) * s].copy_from_slice(&t.next_state);
            self.done[i] = t.done as u8 as f64;
            self.truncated[i] = t.truncated as u8 as f64;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Slot indices drawn uniformly with replacement from the filled region.
    pub fn sample_indices(&self, rng: &mut Rng, n: usize) -> Vec<usize> {
        (0..n).map(|_| index(rng, self.len)).collect()
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (s, a) = (self.state_dim, self.action_dim);
        let pick = |src: &[f64], w: usize| -> Vec<f64> { idx.iter().flat_map(|&i| src[i * w..(i + 1) * w].iter().copied()).collect() };
        Batch {
            states: Tensor::from_vec(idx.len(), s, pick(&self.states, s)).expect("sized"),
            actions: Tensor::from_vec(idx.len(), a, pick(&self.actions, a)).expect("sized"),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states: Tensor::from_vec(idx.len(), s, pick(&self.next_states, s)).expect("sized"),
            done: idx.iter().map(|&i| self.done[i]).collect(),
        }
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Batch> {
        if self.len < n || n == 0 {
            return Err(Error::Invalid(format!("buffer holds {} transitions, batch needs {n}", self.len)));
        }
        let idx = self.sample_indices(rng, n);
        Ok(self.gather(&idx))
    }

    /// Stored contents as `(name, rows, cols, data)` columns for checkpoints.
    pub(crate) fn columns(&self) -> Vec<(&'static str, usize, &[f64])> {
        vec![
            ("states", self.state_dim, &self.states),
            ("actions", self.action_dim, &self.actions),
            ("rewards", 1, &self.rewards),
            ("next_states", self.state_dim, &self.next_states),
            ("done", 1, &self.done),
            ("truncated", 1, &self.truncated),
        ]
    }

    pub(crate) fn restore(&mut self, cursor: usize, len: usize, cols: Vec<Vec<f64>>) -> Result<()> {
        let [states, actions, rewards, next_states, done, truncated]: [Vec<f64>; 6] =
            cols.try_into().map_err(|_| Error::Invalid("buffer column count".into()))?;
        if len > self.capacity
            || cursor >= self.capacity
            || states.len() != len * self.state_dim
            || actions.len() != len * self.action_dim
            || rewards.len() != len
        {
            return Err(Error::Invalid("buffer snapshot does not match its shape".into()));
        }
        *self = ReplayBuffer { cursor, len, states, actions, rewards, next_states, done, truncated, ..self.clone() };
        Ok(())
    }
}
