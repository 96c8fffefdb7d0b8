use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One joint step: `(o, a, r, o', done)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<Vec<T>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub next_obs: Vec<Vec<T>>,
    pub done: bool,
}

impl<T: Scalar> Transition<T> {
    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.actions.len();
        if self.obs.len() != n || self.rewards.len() != n || self.next_obs.len() != n {
            return Err(Error::Contract(format!(
                "transition lists differ in length: obs {}, actions {n}, rewards {}, next_obs {}",
                self.obs.len(),
                self.rewards.len(),
                self.next_obs.len()
            )));
        }
        if let Some(i) = self.rewards.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite {
                what: "transition reward".into(),
                index: vec![i],
            });
        }
        Ok(())
    }
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<Transition<T>>,
    capacity: usize,
    next: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition<T>) -> Result<()> {
        t.validate()?;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Oldest to newest.
    pub fn iter_chronological(&self) -> impl Iterator<Item = &Transition<T>> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition<T>>> {
        if self.items.len() < batch || batch == 0 {
            return Err(Error::InsufficientData {
                have: self.items.len(),
                need: batch.max(1),
            });
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(tag: f64) -> Transition<f64> {
        Transition {
            obs: vec![vec![tag]],
            actions: vec![0],
            rewards: vec![tag],
            next_obs: vec![vec![tag]],
            done: false,
        }
    }

    #[test]
    fn keeps_last_capacity_entries() {
        let mut b = ReplayBuffer::new(5);
        for k in 0..(5 + 3) {
            b.push(tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 5);
        let tags: Vec<f64> = b.iter_chronological().map(|t| t.rewards[0]).collect();
        assert_eq!(tags, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn sampling_needs_enough_data() {
        let mut b = ReplayBuffer::new(10);
        b.push(tr(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            b.sample(2, &mut rng),
            Err(Error::InsufficientData { have: 1, need: 2 })
        ));
        assert_eq!(b.sample(1, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn rejects_non_finite_rewards() {
        let mut b = ReplayBuffer::new(2);
        let mut t = tr(0.0);
        t.rewards[0] = f64::NAN;
        assert!(b.push(t).is_err());
        assert!(b.is_empty());
    }
}
