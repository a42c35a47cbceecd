use std::collections::VecDeque;

use crate::encoder::EmbeddingRecord;
use crate::scalar::Scalar;

/// Fixed-capacity FIFO of detached representations used as inter-negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBank<F> {
    capacity: usize,
    queue: VecDeque<EmbeddingRecord<F>>,
    pushed: u64,
}

pub const DEFAULT_BANK_CAPACITY: usize = 240;

impl<F: Scalar> MemoryBank<F> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            queue: VecDeque::with_capacity(capacity),
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Total number of records ever pushed.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    /// Detaches and enqueues in order, evicting oldest entries beyond capacity.
    pub fn push<'a, I>(&mut self, records: I)
    where
        I: IntoIterator<Item = &'a EmbeddingRecord<F>>,
    {
        for r in records {
            self.pushed += 1;
            if self.capacity == 0 {
                continue;
            }
            if self.queue.len() == self.capacity {
                self.queue.pop_front();
            }
            self.queue.push_back(r.detach());
        }
    }

    /// Oldest first.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &EmbeddingRecord<F>> + '_ {
        self.queue.iter()
    }

    pub fn snapshot(&self) -> Vec<EmbeddingRecord<F>> {
        self.queue.iter().cloned().collect()
    }

    pub fn clear(&mut self) {
        self.queue.clear();
    }
}

impl<F: Scalar> Default for MemoryBank<F> {
    fn default() -> Self {
        Self::new(DEFAULT_BANK_CAPACITY)
    }
}
