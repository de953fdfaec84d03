use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::visualgen::{Frame, PixelObservation};

/// One `(o, a, r, o')` experience tuple. Episodes end on a timer, so there
/// is no terminal flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: PixelObservation,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: PixelObservation,
}

/// Stored form: the four distinct frames behind `o = (f0, f1, f2)` and
/// `o' = (f1', f2', f3)`, shared with neighbouring transitions when equal.
#[derive(Debug, Clone)]
struct Stored {
    obs: [Arc<Frame>; 3],
    next: [Arc<Frame>; 3],
    action: Vec<f64>,
    reward: f64,
}

/// Bounded FIFO with uniform sampling with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Stored>,
    pushed: u64,
}

fn share(frames: &[Frame; 3], pool: &[Arc<Frame>]) -> [Arc<Frame>; 3] {
    frames.each_ref().map(|f| {
        pool.iter()
            .find(|p| p.as_ref() == f)
            .cloned()
            .unwrap_or_else(|| Arc::new(f.clone()))
    })
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)), pushed: 0 })
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

    /// Total insertions since creation.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        let pool: Vec<Arc<Frame>> = self.items.back().map(|s| s.next.to_vec()).unwrap_or_default();
        let obs = share(t.obs.frames(), &pool);
        let next = share(t.next_obs.frames(), &obs);
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(Stored { obs, next, action: t.action, reward: t.reward });
        self.pushed += 1;
    }

    /// Transition `i`, oldest first.
    pub fn get(&self, i: usize) -> Option<Transition> {
        let s = self.items.get(i)?;
        let stack = |f: &[Arc<Frame>; 3]| {
            PixelObservation::from_frames(f.each_ref().map(|a| a.as_ref().clone())).expect("stored frames share a size")
        };
        Some(Transition { obs: stack(&s.obs), action: s.action.clone(), reward: s.reward, next_obs: stack(&s.next) })
    }

    /// Uniform indices with replacement over the filled region.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::Contract("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self.sample_indices(n, rng)?.into_iter().map(|i| self.get(i).expect("index in range")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn obs(v: u8) -> PixelObservation {
        PixelObservation::from_first(Frame::filled(2, 2, [v; 3]))
    }

    fn tr(i: u8) -> Transition {
        Transition { obs: obs(i), action: vec![i as f64], reward: i as f64, next_obs: obs(i + 1) }
    }

    #[test]
    fn fifo_drops_oldest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(tr(i));
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0).unwrap().reward, 2.0);
        assert_eq!(b.get(2).unwrap(), tr(4));
        assert_eq!(b.pushed(), 5);
    }

    #[test]
    fn consecutive_frames_are_shared() {
        let mut b = ReplayBuffer::new(4).unwrap();
        let f = |v: u8| Frame::filled(2, 2, [v; 3]);
        let o0 = PixelObservation::from_first(f(0));
        let o1 = o0.pushed(f(1));
        let o2 = o1.pushed(f(2));
        b.push(Transition { obs: o0, action: vec![], reward: 0.0, next_obs: o1.clone() });
        b.push(Transition { obs: o1.clone(), action: vec![], reward: 0.0, next_obs: o2.clone() });
        assert!(Arc::ptr_eq(&b.items[0].next[2], &b.items[1].obs[2]));
        assert!(Arc::ptr_eq(&b.items[1].obs[2], &b.items[1].next[1]));
        assert_eq!(b.get(1).unwrap().next_obs, o2);
    }

    #[test]
    fn sampling_is_uniform_enough_and_seeded() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for i in 0..4 {
            b.push(tr(i));
        }
        let idx = b.sample_indices(4000, &mut rng::stream(&[9])).unwrap();
        assert_eq!(idx, b.sample_indices(4000, &mut rng::stream(&[9])).unwrap());
        for k in 0..4 {
            let c = idx.iter().filter(|i| **i == k).count();
            assert!((850..1150).contains(&c), "bucket {k}: {c}");
        }
        assert!(ReplayBuffer::new(1).unwrap().sample_indices(1, &mut rng::stream(&[0])).is_err());
    }
}
