//! Count-vector representations over a topic axis of fixed length K.
//!
//! * [`DenseCounts`]: plain array, O(1) read and write.
//! * [`SparseCounts`]: sorted index array plus value array, O(log E) read.
//! * [`CompactVector`]: value array plus an index of empty runs, O(log #runs)
//!   read; read-mostly storage.

mod compact;

pub use compact::CompactVector;

use thiserror::Error;

pub type Count = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VectorError {
    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("count at index {index} would become negative ({current} {delta:+})")]
    Negative { index: usize, current: Count, delta: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DenseCounts(pub Vec<Count>);

impl DenseCounts {
    pub fn zeros(len: usize) -> Self {
        DenseCounts(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_sparse(&self) -> SparseCounts {
        SparseCounts::from_dense(&self.0)
    }

    pub fn to_compact(&self) -> CompactVector {
        CompactVector::from_dense(&self.0)
    }
}

/// Sparse non-negative counts. `indices` is strictly increasing and every
/// stored value is at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SparseCounts {
    len: usize,
    indices: Vec<u32>,
    values: Vec<Count>,
}

impl SparseCounts {
    pub fn new(len: usize) -> Self {
        SparseCounts {
            len,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(values: &[Count]) -> Self {
        let mut out = SparseCounts::new(values.len());
        for (i, &v) in values.iter().enumerate() {
            if v > 0 {
                out.indices.push(i as u32);
                out.values.push(v);
            }
        }
        out
    }

    /// Builds from `(index, count)` pairs sorted by index. Zero counts are
    /// dropped and repeated indices are summed.
    pub fn from_sorted_pairs(
        len: usize,
        pairs: impl IntoIterator<Item = (u32, Count)>,
    ) -> Result<Self, VectorError> {
        let mut out = SparseCounts::new(len);
        for (i, v) in pairs {
            if i as usize >= len {
                return Err(VectorError::OutOfRange {
                    index: i as usize,
                    len,
                });
            }
            if v == 0 {
                continue;
            }
            match out.indices.last() {
                Some(&last) if last == i => *out.values.last_mut().unwrap() += v,
                Some(&last) if last > i => {
                    // not sorted; fall back to the general path
                    out.add(i as usize, v as i64)?;
                }
                _ => {
                    out.indices.push(i);
                    out.values.push(v);
                }
            }
        }
        Ok(out)
    }

    /// Vector length K.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of non-zero entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[Count] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Count)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }

    pub fn get(&self, index: usize) -> Count {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0,
        }
    }

    /// Adds `delta` at `index`, removing the entry when it reaches zero.
    pub fn add(&mut self, index: usize, delta: i64) -> Result<(), VectorError> {
        if index >= self.len {
            return Err(VectorError::OutOfRange {
                index,
                len: self.len,
            });
        }
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => {
                let current = self.values[pos];
                let next = current as i64 + delta;
                if next < 0 {
                    return Err(VectorError::Negative {
                        index,
                        current,
                        delta,
                    });
                }
                if next == 0 {
                    self.indices.remove(pos);
                    self.values.remove(pos);
                } else {
                    self.values[pos] = next as Count;
                }
            }
            Err(pos) => {
                if delta < 0 {
                    return Err(VectorError::Negative {
                        index,
                        current: 0,
                        delta,
                    });
                }
                if delta > 0 {
                    self.indices.insert(pos, index as u32);
                    self.values.insert(pos, delta as Count);
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DenseCounts {
        let mut out = vec![0; self.len];
        self.scatter_into(&mut out);
        DenseCounts(out)
    }

    /// Writes the non-zero entries into `dense` (which must be zeroed at
    /// those positions beforehand to get an exact copy).
    pub fn scatter_into(&self, dense: &mut [Count]) {
        for (i, v) in self.iter() {
            dense[i as usize] = v;
        }
    }

    /// Resets the positions this vector occupies in `dense` to zero.
    pub fn clear_from(&self, dense: &mut [Count]) {
        for &i in &self.indices {
            dense[i as usize] = 0;
        }
    }
}
