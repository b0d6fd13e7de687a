use super::SamplerError;

/// Walker alias table over a (possibly sparse) support of topics.
///
/// Bins are stored as three parallel arrays. Bin `b` returns `low[b]` when the
/// in-bin offset falls below `split[b]` and `high[b]` otherwise; `split` is
/// normalized to `[0, 1]`.
///
/// Construction keeps a single queue of above-average entries. Below-average
/// entries are written straight into bins in input order, and an
/// above-average entry that drops below the average after donating mass is
/// appended as a new low bin.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    low: Vec<u32>,
    high: Vec<u32>,
    split: Vec<f64>,
    total: f64,
    exact: Option<ExactBins>,
    heavy: Vec<(u32, f64)>,
}

/// Integer bin layout kept by [`AliasTable::from_counts`]: every weight is
/// scaled by the support size so the per-bin average is the (integer) total.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExactBins {
    pub split: Vec<u64>,
    pub average: u64,
}

impl AliasTable {
    /// Dense weights indexed by topic.
    pub fn from_weights(weights: &[f64]) -> Result<Self, SamplerError> {
        let mut table = AliasTable::default();
        table.rebuild(weights.iter().enumerate().map(|(k, &w)| (k as u32, w)))?;
        Ok(table)
    }

    /// Weights over an explicit topic support.
    pub fn from_sparse(topics: &[u32], weights: &[f64]) -> Result<Self, SamplerError> {
        let mut table = AliasTable::default();
        table.rebuild(topics.iter().copied().zip(weights.iter().copied()))?;
        Ok(table)
    }

    /// Integer-weight table: all split points and the bin average are
    /// integers, so the implied distribution is exactly `count / total`.
    pub fn from_counts(counts: &[u64]) -> Result<Self, SamplerError> {
        let n = counts.len() as u64;
        let total: u64 = counts.iter().sum();
        if n == 0 || total == 0 {
            return Err(SamplerError::ZeroMass);
        }
        let mut low = Vec::with_capacity(counts.len());
        let mut high = Vec::with_capacity(counts.len());
        let mut split = Vec::with_capacity(counts.len());
        let mut heavy: Vec<(u32, u64)> = Vec::new();
        let average = total;
        for (k, &c) in counts.iter().enumerate() {
            let scaled = c * n;
            if scaled < average {
                low.push(k as u32);
                high.push(k as u32);
                split.push(scaled);
            } else {
                heavy.push((k as u32, scaled));
            }
        }
        let mut b = 0;
        while b < low.len() {
            let (h, mass) = heavy
                .last_mut()
                .expect("heavy entries cover every light bin deficit");
            high[b] = *h;
            *mass -= average - split[b];
            if *mass < average {
                let (h, mass) = heavy.pop().unwrap();
                low.push(h);
                high.push(h);
                split.push(mass);
            }
            b += 1;
        }
        for (h, mass) in heavy {
            debug_assert_eq!(mass, average);
            low.push(h);
            high.push(h);
            split.push(average);
        }
        let frac = split.iter().map(|&s| s as f64 / average as f64).collect();
        Ok(AliasTable {
            low,
            high,
            split: frac,
            total: total as f64,
            exact: Some(ExactBins { split, average }),
            heavy: Vec::new(),
        })
    }

    /// Rebuilds in place from `(topic, weight)` pairs, reusing allocations.
    pub fn rebuild(
        &mut self,
        entries: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<(), SamplerError> {
        self.low.clear();
        self.high.clear();
        self.split.clear();
        self.heavy.clear();
        self.exact = None;
        // First pass stores raw weights in `split` so the average is known.
        let mut total = 0.0;
        for (k, w) in entries {
            if !w.is_finite() || w < 0.0 {
                return Err(SamplerError::InvalidWeight(w));
            }
            self.low.push(k);
            self.split.push(w);
            total += w;
        }
        let n = self.low.len();
        if n == 0 || total <= 0.0 {
            self.total = 0.0;
            return Err(SamplerError::ZeroMass);
        }
        self.total = total;
        let average = total / n as f64;
        let mut write = 0;
        for read in 0..n {
            let (k, w) = (self.low[read], self.split[read]);
            if w < average {
                self.low[write] = k;
                self.split[write] = w / average;
                write += 1;
            } else {
                self.heavy.push((k, w / average));
            }
        }
        self.low.truncate(write);
        self.split.truncate(write);
        self.high.clear();
        self.high.extend_from_slice(&self.low);

        let mut b = 0;
        while b < self.low.len() {
            let Some((h, mass)) = self.heavy.last_mut() else {
                // Rounding left a light bin without a donor: make it full.
                self.split[b] = 1.0;
                b += 1;
                continue;
            };
            self.high[b] = *h;
            *mass -= 1.0 - self.split[b];
            if *mass < 1.0 {
                let (h, mass) = self.heavy.pop().unwrap();
                self.low.push(h);
                self.high.push(h);
                self.split.push(mass.max(0.0));
            }
            b += 1;
        }
        while let Some((h, _)) = self.heavy.pop() {
            self.low.push(h);
            self.high.push(h);
            self.split.push(1.0);
        }
        Ok(())
    }

    /// Number of bins (support size).
    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    /// Total weight the table was built from.
    pub fn mass(&self) -> f64 {
        self.total
    }

    pub fn exact_bins(&self) -> Option<&ExactBins> {
        self.exact.as_ref()
    }

    /// Bin layout as `(low, high, split)` with normalized splits.
    pub fn bins(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.len()).map(|b| (self.low[b], self.high[b], self.split[b]))
    }

    /// Two-draw sampling: `u1` in `[0, len)` picks the bin, `u2` in `[0, 1)`
    /// picks low or high.
    #[inline]
    pub fn sample(&self, u1: f64, u2: f64) -> u32 {
        let bin = (u1 as usize).min(self.low.len() - 1);
        if u2 >= self.split[bin] {
            self.high[bin]
        } else {
            self.low[bin]
        }
    }

    /// Single-draw sampling: the integer part of `u` in `[0, len)` picks the
    /// bin and its fractional part picks low or high.
    #[inline]
    pub fn sample_reuse(&self, u: f64) -> u32 {
        let bin = (u as usize).min(self.low.len() - 1);
        let frac = u - bin as f64;
        if frac >= self.split[bin] {
            self.high[bin]
        } else {
            self.low[bin]
        }
    }

    /// Probability of each topic implied by the bin layout, keyed by topic.
    pub fn implied_probabilities(&self) -> Vec<(u32, f64)> {
        let n = self.len() as f64;
        let mut acc: Vec<(u32, f64)> = Vec::new();
        for (lo, hi, s) in self.bins() {
            acc.push((lo, s / n));
            acc.push((hi, (1.0 - s) / n));
        }
        acc.sort_by_key(|&(k, _)| k);
        let mut out: Vec<(u32, f64)> = Vec::new();
        for (k, p) in acc {
            match out.last_mut() {
                Some((last, q)) if *last == k => *q += p,
                _ => out.push((k, p)),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mass_is_an_error() {
        assert_eq!(
            AliasTable::from_weights(&[0.0, 0.0]).unwrap_err(),
            SamplerError::ZeroMass
        );
        assert_eq!(AliasTable::from_counts(&[0, 0]).unwrap_err(), SamplerError::ZeroMass);
        assert!(AliasTable::from_weights(&[]).is_err());
    }

    #[test]
    fn single_topic_always_returned() {
        let t = AliasTable::from_weights(&[2.5]).unwrap();
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(t.sample_reuse(u), 0);
            assert_eq!(t.sample(u, 0.7), 0);
        }
    }

    #[test]
    fn symmetric_pair() {
        let t = AliasTable::from_weights(&[1.0, 1.0]).unwrap();
        let probs = t.implied_probabilities();
        assert_eq!(probs, vec![(0, 0.5), (1, 0.5)]);
    }

    // Walk-through for weights [3, 1]: average 2, topic 1 is light with
    // split 1/2 and borrows from topic 0, which is left with exactly 2 and
    // becomes a full bin.
    #[test]
    fn fixed_draws_on_fixed_table() {
        let t = AliasTable::from_weights(&[3.0, 1.0]).unwrap();
        let bins: Vec<_> = t.bins().collect();
        assert_eq!(bins, vec![(1, 0, 0.5), (0, 0, 1.0)]);
        assert_eq!(t.sample(0.2, 0.4), 1);
        assert_eq!(t.sample(0.2, 0.6), 0);
        assert_eq!(t.sample(1.5, 0.99), 0);
        assert_eq!(t.sample_reuse(0.25), 1);
        assert_eq!(t.sample_reuse(0.75), 0);
    }

    #[test]
    fn integer_layout_is_exact() {
        let counts = [2u64, 0, 4];
        let t = AliasTable::from_counts(&counts).unwrap();
        let exact = t.exact_bins().unwrap();
        let n = counts.len() as u64;
        let mut mass = vec![0u64; counts.len()];
        for (b, (lo, hi, _)) in t.bins().enumerate() {
            mass[lo as usize] += exact.split[b];
            mass[hi as usize] += exact.average - exact.split[b];
        }
        let expect: Vec<u64> = counts.iter().map(|&c| c * n).collect();
        assert_eq!(mass, expect);
        // and the float construction implies the same distribution
        let f = AliasTable::from_weights(&[2.0, 0.0, 4.0]).unwrap();
        let pf: Vec<(u32, f64)> = f
            .implied_probabilities()
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .collect();
        let pi: Vec<(u32, f64)> = t
            .implied_probabilities()
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .collect();
        assert_eq!(pf.len(), 2);
        for ((ka, a), (kb, b)) in pf.iter().zip(&pi) {
            assert_eq!(ka, kb);
            assert!((a - b).abs() < 1e-15);
        }
        assert!((pf[0].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rebuild_reuses_and_resets() {
        let mut t = AliasTable::from_weights(&[1.0, 2.0, 3.0]).unwrap();
        t.rebuild([(7u32, 1.0)]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.sample_reuse(0.9), 7);
        assert!(t.rebuild(std::iter::empty()).is_err());
    }
}
