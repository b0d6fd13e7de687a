use super::{Count, DenseCounts, SparseCounts, VectorError};

/// Run-indexed sparse vector.
///
/// `runs` holds one `(s, n)` pair per maximal run of zeros: `s` is the first
/// position of the run and `n` the number of non-zero elements before `s`.
/// `values` holds the non-zero elements in position order. The lookup treats
/// `(-1, 0)` and `(len, E)` as implicit sentinels at both ends.
///
/// `[1, 0, 0, 0, 0, 3]` is stored as `len = 6, runs = [(1, 1)], values = [1, 3]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CompactVector {
    len: usize,
    runs: Vec<(u32, u32)>,
    values: Vec<Count>,
}

impl CompactVector {
    pub fn from_dense(dense: &[Count]) -> Self {
        let mut runs = Vec::new();
        let mut values = Vec::new();
        let mut in_run = false;
        for (i, &v) in dense.iter().enumerate() {
            if v == 0 {
                if !in_run {
                    runs.push((i as u32, values.len() as u32));
                    in_run = true;
                }
            } else {
                in_run = false;
                values.push(v);
            }
        }
        CompactVector {
            len: dense.len(),
            runs,
            values,
        }
    }

    pub fn from_sparse(sparse: &SparseCounts) -> Self {
        let mut runs = Vec::new();
        let mut next = 0u32;
        for (n, &i) in sparse.indices().iter().enumerate() {
            if i > next {
                runs.push((next, n as u32));
            }
            next = i + 1;
        }
        if (next as usize) < sparse.len() {
            runs.push((next, sparse.nnz() as u32));
        }
        CompactVector {
            len: sparse.len(),
            runs,
            values: sparse.values().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn runs(&self) -> &[(u32, u32)] {
        &self.runs
    }

    pub fn values(&self) -> &[Count] {
        &self.values
    }

    /// Number of stored integers: two per run plus one per non-zero value.
    pub fn stored_cells(&self) -> usize {
        2 * self.runs.len() + self.values.len()
    }

    pub fn get(&self, x: usize) -> Result<Count, VectorError> {
        self.get_with_probes(x).map(|(v, _)| v)
    }

    /// Lookup that also reports how many run-index entries were read.
    pub fn get_with_probes(&self, x: usize) -> Result<(Count, usize), VectorError> {
        if x >= self.len {
            return Err(VectorError::OutOfRange {
                index: x,
                len: self.len,
            });
        }
        let mut probes = 0usize;
        // `lo` = number of real runs whose start is <= x.
        let (mut lo, mut hi) = (0usize, self.runs.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            probes += 1;
            if self.runs[mid].0 as usize <= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let (s_i, n_i) = if lo == 0 {
            (-1i64, 0i64)
        } else {
            let (s, n) = self.runs[lo - 1];
            (s as i64, n as i64)
        };
        let (s_j, n_j) = if lo == self.runs.len() {
            (self.len as i64, self.values.len() as i64)
        } else {
            probes += 1;
            let (s, n) = self.runs[lo];
            (s as i64, n as i64)
        };
        let x = x as i64;
        debug_assert!(s_i <= x && x <= s_j);
        let first_value = s_j - (n_j - n_i);
        if x == s_i || x == s_j || x < first_value {
            return Ok((0, probes));
        }
        Ok((self.values[(n_i + (x - first_value)) as usize], probes))
    }

    /// Sets position `x` to `v` (zero clears it). Rebuilds the index in
    /// O(E + #runs).
    pub fn insert(&self, x: usize, v: Count) -> Result<CompactVector, VectorError> {
        if x >= self.len {
            return Err(VectorError::OutOfRange {
                index: x,
                len: self.len,
            });
        }
        let mut pairs: Vec<(u32, Count)> = self.iter_nonzero().collect();
        match pairs.binary_search_by_key(&(x as u32), |&(i, _)| i) {
            Ok(pos) if v == 0 => {
                pairs.remove(pos);
            }
            Ok(pos) => pairs[pos].1 = v,
            Err(_) if v == 0 => {}
            Err(pos) => pairs.insert(pos, (x as u32, v)),
        }
        let sparse = SparseCounts::from_sorted_pairs(self.len, pairs)?;
        Ok(CompactVector::from_sparse(&sparse))
    }

    /// Non-zero `(position, value)` pairs in position order.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (u32, Count)> + '_ {
        let mut out = Vec::with_capacity(self.values.len());
        let mut emitted = 0u32;
        for &(s, n) in &self.runs {
            // non-empty values between the previous run and this one end at s
            let count = n - emitted;
            let start = s - count;
            for k in 0..count {
                out.push((start + k, self.values[(emitted + k) as usize]));
            }
            emitted = n;
        }
        let count = self.values.len() as u32 - emitted;
        let start = self.len as u32 - count;
        for k in 0..count {
            out.push((start + k, self.values[(emitted + k) as usize]));
        }
        out.into_iter()
    }

    pub fn to_dense(&self) -> DenseCounts {
        let mut out = vec![0; self.len];
        for (i, v) in self.iter_nonzero() {
            out[i as usize] = v;
        }
        DenseCounts(out)
    }

    pub fn to_sparse(&self) -> SparseCounts {
        SparseCounts::from_sorted_pairs(self.len, self.iter_nonzero())
            .expect("compact vector positions are in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn from_dense_examples() {
        let cv = CompactVector::from_dense(&[1, 0, 0, 0, 0, 3]);
        assert_eq!(cv.len(), 6);
        assert_eq!(cv.runs(), &[(1, 1)]);
        assert_eq!(cv.values(), &[1, 3]);

        let cv = CompactVector::from_dense(&[0, 0, 0]);
        assert_eq!(cv.runs(), &[(0, 0)]);
        assert!(cv.values().is_empty());

        let cv = CompactVector::from_dense(&[5, 7]);
        assert!(cv.runs().is_empty());
        assert_eq!(cv.values(), &[5, 7]);
    }

    #[test]
    fn get_examples() {
        let cv = CompactVector::from_dense(&[1, 0, 0, 0, 0, 3]);
        assert_eq!(cv.get(5).unwrap(), 3);
        assert_eq!(cv.get(2).unwrap(), 0);
        assert_eq!(cv.get(0).unwrap(), 1);
        assert!(cv.get(6).is_err());
    }

    #[test]
    fn insert_examples() {
        let cv = CompactVector::from_dense(&[0, 0, 0]);
        assert_eq!(cv.insert(1, 4).unwrap().to_dense().0, vec![0, 4, 0]);
        let cv = CompactVector::from_dense(&[0, 2, 0]);
        assert_eq!(cv.insert(1, 9).unwrap().to_dense().0, vec![0, 9, 0]);
        assert_eq!(cv.insert(1, 0).unwrap(), CompactVector::from_dense(&[0, 0, 0]));
    }

    #[test]
    fn from_sparse_matches_from_dense() {
        for dense in [
            vec![0u32, 0, 1, 0, 2, 2, 0],
            vec![1, 1],
            vec![0],
            vec![],
            vec![3, 0],
        ] {
            let s = SparseCounts::from_dense(&dense);
            assert_eq!(CompactVector::from_sparse(&s), CompactVector::from_dense(&dense));
        }
    }

    fn dense_vec() -> impl Strategy<Value = Vec<u32>> {
        (0usize..200, 1u32..100).prop_flat_map(|(len, density)| {
            proptest::collection::vec(
                prop_oneof![
                    (100 - density) => Just(0u32),
                    density => 1u32..50,
                ],
                len,
            )
        })
    }

    proptest! {
        #[test]
        fn get_matches_dense(dense in dense_vec()) {
            let cv = CompactVector::from_dense(&dense);
            let bound = ((cv.runs().len() + 2) as f64).log2().ceil() as usize + 1;
            for (x, &v) in dense.iter().enumerate() {
                let (got, probes) = cv.get_with_probes(x).unwrap();
                prop_assert_eq!(got, v);
                prop_assert!(probes <= bound);
            }
        }

        #[test]
        fn insert_sequence_matches_dense(
            len in 1usize..64,
            ops in proptest::collection::vec((0usize..64, 0u32..5), 0..40),
        ) {
            let mut dense = vec![0u32; len];
            let mut cv = CompactVector::from_dense(&dense);
            for (x, v) in ops {
                let x = x % len;
                dense[x] = v;
                cv = cv.insert(x, v).unwrap();
            }
            prop_assert_eq!(cv, CompactVector::from_dense(&dense));
        }

        #[test]
        fn compact_is_smaller_when_runs_are_long(dense in dense_vec()) {
            let cv = CompactVector::from_dense(&dense);
            let e = cv.values().len();
            let runs = cv.runs().len();
            if runs > 0 && e >= 2 * runs {
                prop_assert!(cv.stored_cells() <= 2 * e);
            }
        }
    }
}
