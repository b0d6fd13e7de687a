use super::ModelIoError;
use crate::corpus::TokenGraph;
use crate::engine::ModelState;
use crate::sparse::SparseCounts;

#[derive(Debug, Clone, PartialEq)]
pub struct DedupReport {
    /// Merged groups, each sorted, survivor first.
    pub groups: Vec<Vec<u32>>,
    /// `mapping[k]` is the topic that absorbed `k` (itself if untouched).
    pub mapping: Vec<u32>,
}

impl DedupReport {
    pub fn merged_topics(&self) -> usize {
        self.groups.iter().map(|g| g.len() - 1).sum()
    }
}

/// Sparse word columns per topic.
fn topic_columns(state: &ModelState) -> Vec<Vec<(u32, u32)>> {
    let mut cols = vec![Vec::new(); state.k()];
    for (w, row) in state.word_rows().iter().enumerate() {
        for (k, c) in row.iter() {
            cols[k as usize].push((w as u32, c));
        }
    }
    cols
}

/// L1 distance between the smoothed word distributions
/// `(N_wk + β)/(N_k + Wβ)` of two topics.
pub fn topic_l1_distance(state: &ModelState, beta: f64, a: u32, b: u32) -> f64 {
    let cols = topic_columns(state);
    l1(&cols, state.global(), state.vocab_size(), beta, a, b)
}

fn l1(cols: &[Vec<(u32, u32)>], global: &[u64], w: usize, beta: f64, a: u32, b: u32) -> f64 {
    let wb = w as f64 * beta;
    let za = 1.0 / (global[a as usize] as f64 + wb);
    let zb = 1.0 / (global[b as usize] as f64 + wb);
    let (ca, cb) = (&cols[a as usize], &cols[b as usize]);
    let diff = |na: u32, nb: u32| ((na as f64 + beta) * za - (nb as f64 + beta) * zb).abs();
    let (mut i, mut j, mut union, mut sum) = (0, 0, 0usize, 0.0);
    while i < ca.len() || j < cb.len() {
        let wa = ca.get(i).map_or(u32::MAX, |e| e.0);
        let wb_ = cb.get(j).map_or(u32::MAX, |e| e.0);
        if wa == wb_ {
            sum += diff(ca[i].1, cb[j].1);
            i += 1;
            j += 1;
        } else if wa < wb_ {
            sum += diff(ca[i].1, 0);
            i += 1;
        } else {
            sum += diff(0, cb[j].1);
            j += 1;
        }
        union += 1;
    }
    sum + (w - union) as f64 * diff(0, 0)
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

fn remap_row(row: &SparseCounts, mapping: &[u32]) -> SparseCounts {
    let mut pairs: Vec<(u32, u32)> = row.iter().map(|(k, c)| (mapping[k as usize], c)).collect();
    pairs.sort_unstable_by_key(|p| p.0);
    SparseCounts::from_sorted_pairs(row.len(), pairs).expect("remapped topics stay in range")
}

/// Merges topics whose smoothed word distributions are closer than
/// `threshold` in L1, linking pairs in ascending distance order. The lowest
/// id of each group keeps the summed counts; absorbed topics become empty,
/// so K is unchanged.
pub fn dedup_topics(
    state: &ModelState,
    beta: f64,
    threshold: f64,
) -> Result<(ModelState, DedupReport), ModelIoError> {
    if !(0.0..=2.0).contains(&threshold) {
        return Err(ModelIoError::Threshold(threshold));
    }
    let k = state.k();
    let cols = topic_columns(state);
    let mut pairs: Vec<(f64, u32, u32)> = Vec::new();
    for a in 0..k as u32 {
        for b in a + 1..k as u32 {
            let d = l1(&cols, state.global(), state.vocab_size(), beta, a, b);
            if d < threshold {
                pairs.push((d, a, b));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut parent: Vec<u32> = (0..k as u32).collect();
    for &(_, a, b) in &pairs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi as usize] = lo;
        }
    }
    let mapping: Vec<u32> = (0..k as u32).map(|t| find(&mut parent, t)).collect();
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (t, &root) in mapping.iter().enumerate() {
        groups[root as usize].push(t as u32);
    }
    let groups: Vec<Vec<u32>> = groups.into_iter().filter(|g| g.len() > 1).collect();
    let words = state.word_rows().iter().map(|r| remap_row(r, &mapping)).collect();
    let docs = state.doc_rows().iter().map(|r| remap_row(r, &mapping)).collect();
    let merged = ModelState::from_parts(k, words, docs, state.iteration());
    Ok((merged, DedupReport { groups, mapping }))
}

/// Applies a dedup mapping to token topics.
pub fn remap_topics(graph: &mut TokenGraph, mapping: &[u32]) {
    for t in graph.topics_mut() {
        *t = mapping[*t as usize];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_libsvm_str;
    use crate::engine::init_random;

    fn state(assign: impl Fn(usize) -> u32, k: usize) -> (ModelState, TokenGraph) {
        let c = parse_libsvm_str("1 1:4 2:3 3:2\n1 1:2 4:6\n0 2:2 3:3 5:1").unwrap();
        let mut g = TokenGraph::from_corpus(&c);
        for (i, t) in g.topics_mut().iter_mut().enumerate() {
            *t = assign(i);
        }
        (ModelState::from_graph(&g, k).unwrap(), g)
    }

    #[test]
    fn zero_threshold_never_merges() {
        let (s, _) = state(|i| (i % 3) as u32, 3);
        let (m, r) = dedup_topics(&s, 0.01, 0.0).unwrap();
        assert!(r.groups.is_empty());
        assert_eq!(m, s);
    }

    #[test]
    fn identical_columns_merge() {
        // Topics 1 and 2 are both empty, hence identical.
        let (s, mut g) = state(|_| 0, 3);
        let (m, r) = dedup_topics(&s, 0.01, 1e-9).unwrap();
        assert_eq!(r.groups, vec![vec![1, 2]]);
        assert_eq!(r.mapping, vec![0, 1, 1]);
        remap_topics(&mut g, &r.mapping);
        m.check_invariants(&g).unwrap();
    }

    #[test]
    fn full_merge_conserves_rows() {
        let mut g0 = TokenGraph::from_corpus(&parse_libsvm_str("1 1:4 2:3 3:2\n1 1:2 4:6").unwrap());
        let s = init_random(&mut g0, 5, 2).unwrap();
        let (m, r) = dedup_topics(&s, 0.01, 2.0).unwrap();
        assert_eq!(r.groups, vec![vec![0, 1, 2, 3, 4]]);
        for (a, b) in s.word_rows().iter().zip(m.word_rows()) {
            assert_eq!(a.total(), b.total());
        }
        for (a, b) in s.doc_rows().iter().zip(m.doc_rows()) {
            assert_eq!(a.total(), b.total());
        }
        assert_eq!(m.global()[0], s.total_tokens());
    }

    #[test]
    fn l1_matches_dense() {
        let (s, _) = state(|i| (i % 4) as u32, 4);
        let beta = 0.05;
        let w = s.vocab_size();
        let phi = |k: usize| -> Vec<f64> {
            (0..w)
                .map(|x| {
                    (s.word_counts(x as u32).get(k) as f64 + beta)
                        / (s.global()[k] as f64 + w as f64 * beta)
                })
                .collect()
        };
        for a in 0..4 {
            for b in 0..4 {
                let dense: f64 = phi(a).iter().zip(phi(b)).map(|(x, y)| (x - y).abs()).sum();
                let fast = topic_l1_distance(&s, beta, a as u32, b as u32);
                assert!((dense - fast).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_threshold() {
        let (s, _) = state(|_| 0, 2);
        assert!(dedup_topics(&s, 0.01, 2.5).is_err());
        assert!(dedup_topics(&s, 0.01, -0.1).is_err());
    }
}
