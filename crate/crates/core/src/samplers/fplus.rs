use super::SamplerError;

/// F+ tree: a complete binary tree of partial sums stored in an array.
///
/// Node 1 is the root, node `i` has children `2i` and `2i + 1`, and the
/// leaves live at `[capacity, 2 * capacity)`. Updates touch one leaf and its
/// ancestors; sampling descends from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct FPlusTree {
    len: usize,
    capacity: usize,
    nodes: Vec<f64>,
}

impl FPlusTree {
    pub fn new(weights: &[f64]) -> Result<Self, SamplerError> {
        let len = weights.len();
        let capacity = len.max(1).next_power_of_two();
        let mut nodes = vec![0.0; 2 * capacity];
        for (k, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(SamplerError::InvalidWeight(w));
            }
            nodes[capacity + k] = w;
        }
        for i in (1..capacity).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Ok(FPlusTree {
            len,
            capacity,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.nodes[self.capacity + k]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.capacity..self.capacity + self.len]
    }

    /// Adds `delta` to leaf `k` and refreshes its ancestors.
    pub fn update(&mut self, k: usize, delta: f64) -> Result<(), SamplerError> {
        if k >= self.len {
            return Err(SamplerError::OutOfRange(k));
        }
        let mut i = self.capacity + k;
        let next = self.nodes[i] + delta;
        if next < 0.0 {
            return Err(SamplerError::NegativeLeaf { leaf: k, value: next });
        }
        self.nodes[i] = next;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
        Ok(())
    }

    /// Returns the smallest `t` whose cumulative weight exceeds `u`, for `u`
    /// in `[0, total)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut u = u;
        let mut i = 1;
        while i < self.capacity {
            let left = self.nodes[2 * i];
            let right = self.nodes[2 * i + 1];
            if u < left || right <= 0.0 {
                i *= 2;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        (i - self.capacity).min(self.len.saturating_sub(1))
    }

    /// Internal node values, root first. Used to compare against a rebuild.
    pub fn internal_nodes(&self) -> &[f64] {
        &self.nodes[1..self.capacity]
    }
}
