use crate::{Error, Result};

/// Complete binary tree over `capacity` leaves (a power of two) where every
/// internal node stores the sum of its children.
///
/// Leaves live at `tree[capacity - 1 ..]`. Updates recompute the path to the
/// root from the children rather than applying deltas, so parent sums never
/// drift away from their children.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    capacity: usize,
    tree: Vec<f64>,
}

impl SumTree {
    pub fn new(min_leaves: usize) -> Self {
        let capacity = min_leaves.max(1).next_power_of_two();
        Self {
            capacity,
            tree: vec![0.0; 2 * capacity - 1],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.tree[0]
    }

    pub fn leaf(&self, i: usize) -> f64 {
        self.tree[self.capacity - 1 + i]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.tree
    }

    pub fn set(&mut self, leaf: usize, priority: f64) -> Result<()> {
        if leaf >= self.capacity {
            return Err(Error::InvalidIndex(leaf));
        }
        if !(priority >= 0.0 && priority.is_finite()) {
            return Err(Error::NonFinite(format!("priority {priority}")));
        }
        let mut idx = self.capacity - 1 + leaf;
        self.tree[idx] = priority;
        while idx > 0 {
            idx = (idx - 1) / 2;
            self.tree[idx] = self.tree[2 * idx + 1] + self.tree[2 * idx + 2];
        }
        Ok(())
    }

    /// Leaf whose cumulative-priority interval contains `mass`.
    ///
    /// Never returns a zero-priority leaf while the total is positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut u = mass.max(0.0);
        let mut idx = 0;
        while idx < self.capacity - 1 {
            let left = 2 * idx + 1;
            let right = left + 1;
            if u < self.tree[left] || self.tree[right] <= 0.0 {
                idx = left;
            } else {
                u -= self.tree[left];
                idx = right;
            }
        }
        idx - (self.capacity - 1)
    }

    /// Largest `|parent - (left + right)|` over all internal nodes.
    pub fn max_inconsistency(&self) -> f64 {
        (0..self.capacity - 1)
            .map(|i| (self.tree[i] - self.tree[2 * i + 1] - self.tree[2 * i + 2]).abs())
            .fold(0.0, f64::max)
    }
}
