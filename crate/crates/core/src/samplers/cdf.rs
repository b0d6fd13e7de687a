use super::SamplerError;

/// Prefix sums over a sparse topic support, sampled by binary search.
#[derive(Debug, Clone, Default)]
pub struct CumulativeTable {
    topics: Vec<u32>,
    cumulative: Vec<f64>,
}

impl CumulativeTable {
    pub fn new(entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, SamplerError> {
        let mut table = CumulativeTable::default();
        table.rebuild(entries)?;
        Ok(table)
    }

    /// Rebuilds in place. Zero-weight entries are kept (they can never be
    /// drawn) so the support matches the caller's indexing.
    pub fn rebuild(
        &mut self,
        entries: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<(), SamplerError> {
        self.topics.clear();
        self.cumulative.clear();
        let mut acc = 0.0;
        for (k, w) in entries {
            if !w.is_finite() || w < 0.0 {
                return Err(SamplerError::InvalidWeight(w));
            }
            acc += w;
            self.topics.push(k);
            self.cumulative.push(acc);
        }
        if self.topics.is_empty() {
            return Err(SamplerError::EmptySupport);
        }
        if acc <= 0.0 {
            return Err(SamplerError::ZeroMass);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Smallest support position whose prefix sum exceeds `u`.
    #[inline]
    fn position(&self, u: f64) -> usize {
        let pos = self.cumulative.partition_point(|&c| c <= u);
        pos.min(self.cumulative.len() - 1)
    }

    /// Topic for `u` in `[0, mass)`.
    #[inline]
    pub fn sample(&self, u: f64) -> u32 {
        self.topics[self.position(u)]
    }

    /// Samples a batch of uniforms that are sorted ascending in one forward
    /// sweep. Each result equals `sample(u)` for the same `u`.
    pub fn sample_sorted(&self, sorted: &[f64], out: &mut Vec<u32>) {
        out.clear();
        let mut lo = 0usize;
        for &u in sorted {
            debug_assert!(out.is_empty() || u >= 0.0);
            let rest = &self.cumulative[lo..];
            let pos = lo + rest.partition_point(|&c| c <= u);
            let pos = pos.min(self.cumulative.len() - 1);
            out.push(self.topics[pos]);
            lo = pos;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_support() {
        let t = CumulativeTable::new([(7, 2.0)]).unwrap();
        assert_eq!(t.sample(0.0), 7);
        assert_eq!(t.sample(1.99), 7);
    }

    #[test]
    fn boundary_resolves_to_next_topic() {
        let t = CumulativeTable::new([(2, 1.0), (5, 1.0)]).unwrap();
        assert_eq!(t.sample(0.999 * 2.0), 5);
        assert_eq!(t.sample(1.0), 5);
        assert_eq!(t.sample(0.999), 2);
    }

    #[test]
    fn errors() {
        assert_eq!(
            CumulativeTable::new(std::iter::empty()).unwrap_err(),
            SamplerError::EmptySupport
        );
        assert_eq!(
            CumulativeTable::new([(1, 0.0)]).unwrap_err(),
            SamplerError::ZeroMass
        );
    }

    #[test]
    fn sorted_batch_matches_single_draws() {
        let t = CumulativeTable::new([(0, 0.5), (3, 0.0), (4, 2.0), (9, 1.5)]).unwrap();
        let us = [0.0, 0.1, 0.5, 0.5, 1.7, 2.5, 3.99];
        let mut out = Vec::new();
        t.sample_sorted(&us, &mut out);
        let single: Vec<u32> = us.iter().map(|&u| t.sample(u)).collect();
        assert_eq!(out, single);
    }
}
