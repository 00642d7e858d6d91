use rand::seq::index;
use rand::Rng;

use super::network::Transition;

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<(u64, Transition)>,
    /// Slot the next push overwrites once full.
    head: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            pushed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes so far; the `i`-th push has sequence number `i`.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        let item = (self.pushed, t);
        self.pushed += 1;
        if self.entries.len() < self.capacity {
            self.entries.push(item);
        } else {
            self.entries[self.head] = item;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Storage indices of a uniform minibatch drawn without replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        let k = batch.min(self.entries.len());
        index::sample(rng, self.entries.len(), k).into_vec()
    }

    /// Sequence numbers and transitions of a uniform minibatch.
    pub fn sample_with_ids<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<(u64, Transition)> {
        self.sample_indices(batch, rng)
            .into_iter()
            .map(|i| self.entries[i])
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Transition> {
        self.sample_indices(batch, rng)
            .into_iter()
            .map(|i| self.entries[i].1)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::PlannerState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition {
        Transition {
            state: PlannerState { d: i as f64, v: 0.0 },
            action: 0,
            reward: 0.0,
            next_state: PlannerState { d: i as f64, v: 0.0 },
            terminal: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut rb = ReplayBuffer::new(10);
        for i in 0..25 {
            rb.push(t(i));
        }
        assert_eq!(rb.len(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            for (id, tr) in rb.sample_with_ids(10, &mut rng) {
                assert!(id >= 15);
                assert_eq!(tr.state.d as u64, id);
            }
        }
    }

    #[test]
    fn no_duplicates_in_batch() {
        let mut rb = ReplayBuffer::new(100);
        for i in 0..100 {
            rb.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut idx = rb.sample_indices(64, &mut rng);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 64);
    }
}
