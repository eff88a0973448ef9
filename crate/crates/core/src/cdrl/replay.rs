use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Tier, Transition};

use super::CdrlError;

/// FIFO ring buffer with a seeded uniform sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)), rng: ChaCha8Rng::seed_from_u64(seed) }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `batch` distinct entries drawn uniformly.
    pub fn sample(&mut self, batch: usize) -> Result<Vec<&Transition>, CdrlError> {
        if batch > self.items.len() {
            return Err(CdrlError::BufferTooSmall { needed: batch, have: self.items.len() });
        }
        let idx = sample(&mut self.rng, self.items.len(), batch);
        Ok(idx.iter().map(|i| &self.items[i]).collect())
    }
}

/// Stores a CPA transition together with its pair-swapped image.
pub fn augment_and_push(buffer: &mut ReplayBuffer, t: Transition) {
    debug_assert_eq!(t.tier, Tier::Cpa);
    let s = t.swapped();
    buffer.push(t);
    buffer.push(s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Mirror;

    fn t(r: f64) -> Transition {
        Transition {
            tier: Tier::Cpa,
            state: (0..28).map(|i| f64::from(i) + r).collect(),
            action: vec![r, -r],
            reward: r,
            next_state: vec![r; 28],
            metrics: None,
            mirror: Some(Mirror { reward: r + 0.5, metrics: None }),
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3, 0);
        for r in 0..5 {
            b.push(t(f64::from(r)));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter().map(|x| x.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_without_replacement_and_seeded() {
        let mut a = ReplayBuffer::new(100, 7);
        let mut b = ReplayBuffer::new(100, 7);
        for r in 0..100 {
            a.push(t(f64::from(r)));
            b.push(t(f64::from(r)));
        }
        let sa: Vec<f64> = a.sample(64).unwrap().iter().map(|x| x.reward).collect();
        let sb: Vec<f64> = b.sample(64).unwrap().iter().map(|x| x.reward).collect();
        assert_eq!(sa, sb);
        let mut d = sa.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        assert_eq!(d.len(), 64);
        assert!(a.sample(101).is_err());
    }

    #[test]
    fn augmentation_pushes_the_pair() {
        let mut b = ReplayBuffer::new(10, 0);
        augment_and_push(&mut b, t(1.0));
        assert_eq!(b.len(), 2);
        assert_eq!(b.get(1).unwrap(), &b.get(0).unwrap().swapped());
        assert_eq!(b.get(1).unwrap().state.len(), 28);
    }
}
