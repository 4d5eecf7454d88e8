use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// One `(s, a, r, s')` transition, states already encoded.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded FIFO experience pool.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, items: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Distinct uniformly chosen entries.
    pub fn sample(&self, batch: usize, rng: &mut RngStream) -> Result<Vec<&Experience>> {
        Ok(self.sample_indices(batch, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }

    pub fn sample_indices(&self, batch: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
        if batch > self.items.len() {
            return Err(Error::NotReady(format!("replay holds {} entries, batch needs {batch}", self.items.len())));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(i: usize) -> Experience {
        Experience { state: vec![i as f64], action: i, reward: 0.0, next_state: vec![] }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(1000).unwrap();
        for i in 0..1001 {
            buf.push(exp(i));
        }
        assert_eq!(buf.len(), 1000);
        let actions: Vec<usize> = buf.iter().map(|e| e.action).collect();
        assert_eq!(actions, (1..1001).collect::<Vec<_>>());
    }

    #[test]
    fn full_sample_is_permutation() {
        let mut buf = ReplayBuffer::new(50).unwrap();
        for i in 0..50 {
            buf.push(exp(i));
        }
        let mut rng = RngStream::new(1, "replay");
        let mut got: Vec<usize> = buf.sample(50, &mut rng).unwrap().iter().map(|e| e.action).collect();
        got.sort_unstable();
        assert_eq!(got, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn underfull_sample_not_ready() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.push(exp(0));
        let mut rng = RngStream::new(1, "replay");
        assert!(matches!(buf.sample(2, &mut rng), Err(Error::NotReady(_))));
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let n = 40;
        let mut buf = ReplayBuffer::new(n).unwrap();
        for i in 0..n {
            buf.push(exp(i));
        }
        let mut rng = RngStream::new(2, "replay");
        let mut counts = vec![0usize; n];
        let draws = 100_000 / 4;
        for _ in 0..draws {
            let idx = buf.sample_indices(4, &mut rng).unwrap();
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 4);
            for i in idx {
                counts[i] += 1;
            }
        }
        let expected = (draws * 4) as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 39 degrees of freedom; the 0.999 quantile is about 72.
        assert!(chi2 < 72.0, "chi2 = {chi2}");
    }
}
