//! Random structure generation and sparse synaptic weight storage.
//!
//! Edges are stored target-major: for every postsynaptic neuron, the sorted
//! list of presynaptic indices and one weight per edge. Synaptic input
//! accumulation and the Hebbian update both walk the incoming edges of a
//! target, so this is the layout of the hot loop.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::config::{check_edge_budget, validate_probability, ModelConfig};
use crate::error::{Error, Result};

/// Compressed incoming adjacency with non-negative weights.
///
/// Besides the weights, every target keeps a `baseline`: the value an edge
/// that was never potentiated would currently have. It starts at 1 and is
/// divided alongside the real weights by every homeostatic renormalization,
/// so `weight / baseline` is the cumulative Hebbian strengthening of an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseWeights {
    n_src: usize,
    n_tgt: usize,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    weights: Vec<f64>,
    baseline: Vec<f64>,
}

impl SparseWeights {
    /// Builds unit-weight storage from per-target incoming source lists.
    pub fn from_incoming(n_src: usize, incoming: Vec<Vec<u32>>) -> Result<Self> {
        let n_tgt = incoming.len();
        let mut offsets = Vec::with_capacity(n_tgt + 1);
        let mut sources = Vec::with_capacity(incoming.iter().map(Vec::len).sum());
        offsets.push(0);
        for mut list in incoming {
            list.sort_unstable();
            list.dedup();
            if let Some(&last) = list.last() {
                if last as usize >= n_src {
                    return Err(Error::Dimension {
                        what: "edge source index",
                        expected: n_src,
                        got: last as usize,
                    });
                }
            }
            sources.extend_from_slice(&list);
            offsets.push(sources.len());
        }
        let weights = vec![1.0; sources.len()];
        Ok(Self {
            n_src,
            n_tgt,
            offsets,
            sources,
            weights,
            baseline: vec![1.0; n_tgt],
        })
    }

    /// Like [`Self::from_incoming`] but with explicit `(source, weight)` pairs.
    pub fn from_weighted(n_src: usize, incoming: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let mut lists = Vec::with_capacity(incoming.len());
        for edges in &incoming {
            if edges.iter().any(|&(_, w)| !(w >= 0.0)) {
                return Err(Error::Config(
                    "synaptic weights must be non-negative".into(),
                ));
            }
            lists.push(edges.iter().map(|&(s, _)| s).collect());
        }
        let mut out = Self::from_incoming(n_src, lists)?;
        for (target, edges) in incoming.into_iter().enumerate() {
            for (source, weight) in edges {
                if let Some(w) = out.weight_mut(source, target) {
                    *w = weight;
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn from_raw_parts(
        n_src: usize,
        n_tgt: usize,
        offsets: Vec<usize>,
        sources: Vec<u32>,
        weights: Vec<f64>,
        baseline: Vec<f64>,
    ) -> Result<Self> {
        let consistent = offsets.len() == n_tgt + 1
            && offsets.first() == Some(&0)
            && offsets.last() == Some(&sources.len())
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && sources.len() == weights.len()
            && baseline.len() == n_tgt
            && sources.iter().all(|&s| (s as usize) < n_src)
            && weights.iter().all(|&w| w >= 0.0);
        if !consistent {
            return Err(Error::Format("inconsistent sparse weight layout".into()));
        }
        Ok(Self {
            n_src,
            n_tgt,
            offsets,
            sources,
            weights,
            baseline,
        })
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn n_tgt(&self) -> usize {
        self.n_tgt
    }

    /// `(source count, target count)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_src, self.n_tgt)
    }

    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    pub fn in_degree(&self, target: usize) -> usize {
        self.offsets[target + 1] - self.offsets[target]
    }

    /// Sorted presynaptic indices of `target` and their weights.
    pub fn incoming(&self, target: usize) -> (&[u32], &[f64]) {
        let range = self.offsets[target]..self.offsets[target + 1];
        (&self.sources[range.clone()], &self.weights[range])
    }

    pub fn incoming_mut(&mut self, target: usize) -> (&[u32], &mut [f64]) {
        let range = self.offsets[target]..self.offsets[target + 1];
        (&self.sources[range.clone()], &mut self.weights[range])
    }

    pub fn has_edge(&self, source: u32, target: usize) -> bool {
        self.incoming(target).0.binary_search(&source).is_ok()
    }

    pub fn weight(&self, source: u32, target: usize) -> Option<f64> {
        let (sources, weights) = self.incoming(target);
        sources.binary_search(&source).ok().map(|pos| weights[pos])
    }

    fn weight_mut(&mut self, source: u32, target: usize) -> Option<&mut f64> {
        let (sources, weights) = self.incoming_mut(target);
        match sources.binary_search(&source) {
            Ok(pos) => Some(&mut weights[pos]),
            Err(_) => None,
        }
    }

    pub fn incoming_sum(&self, target: usize) -> f64 {
        self.incoming(target).1.iter().sum()
    }

    /// Weight an unpotentiated edge into `target` currently carries.
    pub fn baseline(&self, target: usize) -> f64 {
        self.baseline[target]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub(crate) fn baselines(&self) -> &[f64] {
        &self.baseline
    }

    /// Iterates `(source, target, weight)` over all edges in target-major order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, usize, f64)> + '_ {
        (0..self.n_tgt).flat_map(move |t| {
            let (s, w) = self.incoming(t);
            s.iter().zip(w).map(move |(&s, &w)| (s, t, w))
        })
    }

    fn scale_target(&mut self, target: usize, divisor: f64) {
        let (_, weights) = self.incoming_mut(target);
        for w in weights {
            *w /= divisor;
        }
        self.baseline[target] /= divisor;
    }
}

/// Afferent weights from a source area into a target area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub weights: SparseWeights,
}

impl Fiber {
    pub fn n_src(&self) -> usize {
        self.weights.n_src()
    }

    pub fn n_tgt(&self) -> usize {
        self.weights.n_tgt()
    }
}

/// Samples a `G(n, p)` digraph: every ordered pair `(i, j)`, `i != j`, is an
/// edge independently with probability `p`. All weights start at 1.
pub fn sample_recurrent_graph<R: Rng + ?Sized>(
    config: &ModelConfig,
    rng: &mut R,
) -> Result<SparseWeights> {
    config.validate()?;
    sample_bernoulli_edges(config.n, config.n, config.p, true, rng)
}

/// Samples a random bipartite graph from `n_src` into `n_tgt` neurons.
/// Index coincidence `i == j` is allowed since the vertex sets differ.
pub fn sample_fiber<R: Rng + ?Sized>(
    n_src: usize,
    n_tgt: usize,
    p: f64,
    rng: &mut R,
) -> Result<Fiber> {
    validate_probability(p)?;
    check_edge_budget(n_src, n_tgt, p)?;
    let weights = sample_bernoulli_edges(n_src, n_tgt, p, false, rng)?;
    Ok(Fiber { weights })
}

fn sample_bernoulli_edges<R: Rng + ?Sized>(
    n_src: usize,
    n_tgt: usize,
    p: f64,
    skip_self: bool,
    rng: &mut R,
) -> Result<SparseWeights> {
    if n_src > u32::MAX as usize {
        return Err(Error::Config(format!(
            "source count {n_src} exceeds u32 indexing"
        )));
    }
    // Gaps between successive edges of a Bernoulli(p) sequence are Geometric(p).
    let gaps = Geometric::new(p).map_err(|e| Error::Config(e.to_string()))?;
    let expected = (n_src as f64 * n_tgt as f64 * p * 1.05) as usize;
    let mut offsets = Vec::with_capacity(n_tgt + 1);
    let mut sources = Vec::with_capacity(expected);
    offsets.push(0);
    for target in 0..n_tgt {
        let mut pos: u64 = 0;
        loop {
            pos += gaps.sample(rng);
            if pos >= n_src as u64 {
                break;
            }
            if !(skip_self && pos as usize == target) {
                sources.push(pos as u32);
            }
            pos += 1;
        }
        offsets.push(sources.len());
    }
    let weights = vec![1.0; sources.len()];
    SparseWeights::from_raw_parts(n_src, n_tgt, offsets, sources, weights, vec![1.0; n_tgt])
}

/// Homeostasis: divides every incoming weight of each target by the total
/// incoming weight `S` summed across all given weight sets. Targets with
/// `S == 0` are left untouched.
pub fn renormalize_incoming(sets: &mut [&mut SparseWeights]) -> Result<()> {
    let Some(first) = sets.first() else {
        return Ok(());
    };
    let n_tgt = first.n_tgt();
    for set in sets.iter() {
        if set.n_tgt() != n_tgt {
            return Err(Error::Dimension {
                what: "renormalized target count",
                expected: n_tgt,
                got: set.n_tgt(),
            });
        }
    }
    for target in 0..n_tgt {
        let total: f64 = sets.iter().map(|s| s.incoming_sum(target)).sum();
        if total > 0.0 {
            for set in sets.iter_mut() {
                set.scale_target(target, total);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    #[test]
    fn renormalize_single_set() {
        let mut w =
            SparseWeights::from_weighted(3, vec![vec![(0, 2.0), (1, 2.0), (2, 4.0)]]).unwrap();
        renormalize_incoming(&mut [&mut w]).unwrap();
        assert_eq!(w.incoming(0).1, &[0.25, 0.25, 0.5]);
        assert_eq!(w.baseline(0), 0.125);
    }

    #[test]
    fn renormalize_leaves_zero_sum_alone() {
        let mut w = SparseWeights::from_weighted(1, vec![vec![(0, 0.0)], vec![]]).unwrap();
        renormalize_incoming(&mut [&mut w]).unwrap();
        assert_eq!(w.incoming(0).1, &[0.0]);
        assert_eq!(w.baseline(0), 1.0);
        assert_eq!(w.baseline(1), 1.0);
    }

    #[test]
    fn renormalize_joint_sum_across_sets() {
        let mut fiber = SparseWeights::from_weighted(2, vec![vec![(0, 1.0), (1, 1.0)]]).unwrap();
        let mut rec = SparseWeights::from_weighted(1, vec![vec![(0, 2.0)]]).unwrap();
        renormalize_incoming(&mut [&mut fiber, &mut rec]).unwrap();
        assert_eq!(fiber.incoming(0).1, &[0.25, 0.25]);
        assert_eq!(rec.incoming(0).1, &[0.5]);
    }

    #[test]
    fn renormalize_rejects_mismatched_targets() {
        let mut a = SparseWeights::from_incoming(2, vec![vec![0]]).unwrap();
        let mut b = SparseWeights::from_incoming(2, vec![vec![0], vec![1]]).unwrap();
        assert!(renormalize_incoming(&mut [&mut a, &mut b]).is_err());
    }

    #[test]
    fn recurrent_graph_has_no_self_loops_near_complete() {
        let config = ModelConfig::new(30, 3, 1.0 - 1e-9, 0.0, 4).unwrap();
        let g = sample_recurrent_graph(&config, &mut make_rng(4, "graph")).unwrap();
        assert_eq!(g.edge_count(), 30 * 29);
        for t in 0..30 {
            assert!(!g.has_edge(t as u32, t));
        }
    }

    #[test]
    fn fiber_allows_index_coincidence() {
        let f = sample_fiber(30, 30, 1.0 - 1e-9, &mut make_rng(4, "fiber")).unwrap();
        assert_eq!(f.weights.edge_count(), 900);
    }

    #[test]
    fn fiber_rejects_degenerate_probabilities() {
        let mut rng = make_rng(0, "fiber");
        assert!(sample_fiber(10, 10, 0.0, &mut rng).is_err());
        assert!(sample_fiber(10, 10, 1.0, &mut rng).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let config = ModelConfig::desk(11);
        let a = sample_recurrent_graph(&config, &mut make_rng(11, "graph")).unwrap();
        let b = sample_recurrent_graph(&config, &mut make_rng(11, "graph")).unwrap();
        let c = sample_recurrent_graph(&config, &mut make_rng(12, "graph")).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sources, c.sources);
    }

    #[test]
    fn from_incoming_rejects_out_of_range_sources() {
        assert!(SparseWeights::from_incoming(2, vec![vec![2]]).is_err());
    }

    #[test]
    fn weight_lookup() {
        let w = SparseWeights::from_weighted(3, vec![vec![(2, 0.5), (0, 2.0)]]).unwrap();
        assert_eq!(w.weight(0, 0), Some(2.0));
        assert_eq!(w.weight(2, 0), Some(0.5));
        assert_eq!(w.weight(1, 0), None);
        assert_eq!(w.incoming(0).0, &[0, 2]);
    }
}
