//! Labeled input distributions presented in the sensory area.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub mod mnist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// Sensory activation in `[0, 1]`.
    pub activation: Vec<f64>,
    pub label: Label,
}

/// A label-free stream of sensory activations.
///
/// Training only ever sees this trait, so the trainer cannot read labels; the
/// sole supervision is which source a run of samples comes from.
pub trait StimulusSource: Sync {
    fn n(&self) -> usize;
    fn draw(&self, rng: &mut SimRng) -> Vec<f64>;
}

/// A stimulus class: `k` core sensory neurons, each on with probability `r`;
/// every other neuron on with probability `q * k / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusClass {
    /// Ascending core indices, exactly `k` of them.
    pub core: Vec<u32>,
    pub r: f64,
    pub q: f64,
    pub n: usize,
}

impl StimulusClass {
    pub fn new(core: Vec<u32>, r: f64, q: f64, n: usize) -> Result<Self> {
        let mut core = core;
        core.sort_unstable();
        core.dedup();
        if core.is_empty() || core.len() > n || core.iter().any(|&c| c as usize >= n) {
            return Err(Error::Config(format!(
                "stimulus core must be a non-empty subset of 0..{n}"
            )));
        }
        if !(r > 0.0 && r <= 1.0) || !(0.0..1.0).contains(&q) || !(r > q) {
            return Err(Error::Config(format!(
                "stimulus rates need 0 <= q < r <= 1, got r = {r}, q = {q}"
            )));
        }
        let class = Self { core, r, q, n };
        if class.off_core_probability() > 1.0 {
            return Err(Error::Config("off-core probability q*k/n exceeds 1".into()));
        }
        Ok(class)
    }

    pub fn k(&self) -> usize {
        self.core.len()
    }

    /// Per-neuron firing probability outside the core.
    pub fn off_core_probability(&self) -> f64 {
        self.q * self.k() as f64 / self.n as f64
    }

    pub fn sample(&self, rng: &mut SimRng, label: usize) -> LabeledExample {
        LabeledExample {
            activation: self.draw(rng),
            label: Label::Class(label),
        }
    }
}

impl StimulusSource for StimulusClass {
    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, rng: &mut SimRng) -> Vec<f64> {
        let off = self.off_core_probability();
        let mut x = vec![0.0; self.n];
        let mut core = self.core.iter().peekable();
        for (i, xi) in x.iter_mut().enumerate() {
            let in_core = core.next_if(|&&c| c as usize == i).is_some();
            let prob = if in_core { self.r } else { off };
            if rng.random::<f64>() < prob {
                *xi = 1.0;
            }
        }
        x
    }
}

/// Draws a class whose core is uniform over `k`-subsets of `0..n`.
pub fn make_stimulus_class(
    k: usize,
    n: usize,
    r: f64,
    q: f64,
    rng: &mut SimRng,
) -> Result<StimulusClass> {
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "core size {k} must satisfy 0 < k <= {n}"
        )));
    }
    let core = sample_indices(rng, n, k)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    StimulusClass::new(core, r, q, n)
}

/// Draws a class whose core shares exactly `round(alpha * k)` neurons with
/// `base`'s core; the rest is drawn uniformly from outside `base`'s core.
pub fn make_overlapping_class(
    base: &StimulusClass,
    alpha: f64,
    r: f64,
    q: f64,
    rng: &mut SimRng,
) -> Result<StimulusClass> {
    let k = base.k();
    let n = base.n;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Overlap(format!(
            "alpha = {alpha} must lie in [0, 1]"
        )));
    }
    let shared = (alpha * k as f64).round() as usize;
    let fresh = k - shared;
    if fresh > n - k {
        return Err(Error::Overlap(format!(
            "need {fresh} fresh core neurons but only {} lie outside the base core",
            n - k
        )));
    }
    let mut core: Vec<u32> = sample_indices(rng, k, shared)
        .into_iter()
        .map(|i| base.core[i])
        .collect();
    let outside: Vec<u32> = (0..n as u32)
        .filter(|i| base.core.binary_search(i).is_err())
        .collect();
    core.extend(
        sample_indices(rng, outside.len(), fresh)
            .into_iter()
            .map(|i| outside[i]),
    );
    StimulusClass::new(core, r, q, n)
}

/// The linear-threshold pair `D+` / `D-`: independent Bernoulli coordinates
/// with means `k/n + delta * v_i` (positive) and `k/n` (negative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceClass {
    pub v: Vec<f64>,
    pub delta: f64,
    pub n: usize,
    pub k: usize,
}

impl HalfspaceClass {
    /// `v` must be non-negative with unit Euclidean norm.
    pub fn new(v: Vec<f64>, delta: f64, k: usize) -> Result<Self> {
        if v.iter().any(|&x| x < 0.0) {
            return Err(Error::Config(
                "halfspace normal must be non-negative".into(),
            ));
        }
        Self::new_signed(v, delta, k)
    }

    /// Permits negative coordinates. No accuracy guarantee is attached.
    pub fn new_signed(v: Vec<f64>, delta: f64, k: usize) -> Result<Self> {
        let n = v.len();
        if k == 0 || k > n {
            return Err(Error::Config(format!(
                "k = {k} must satisfy 0 < k <= n = {n}"
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::Config(format!(
                "margin delta = {delta} must be >= 0"
            )));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "halfspace normal has norm {norm}, expected 1"
            )));
        }
        let class = Self { v, delta, n, k };
        class.check_means()?;
        Ok(class)
    }

    /// `v` uniform over a random `support`-subset of coordinates.
    pub fn uniform_support(
        n: usize,
        k: usize,
        support: usize,
        delta: f64,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if support == 0 || support > n {
            return Err(Error::Config(format!(
                "support {support} must satisfy 0 < s <= {n}"
            )));
        }
        let mut v = vec![0.0; n];
        let value = 1.0 / (support as f64).sqrt();
        for i in sample_indices(rng, n, support) {
            v[i] = value;
        }
        Self::new(v, delta, k)
    }

    pub fn base_rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn positive_mean(&self, i: usize) -> f64 {
        self.base_rate() + self.delta * self.v[i]
    }

    fn check_means(&self) -> Result<()> {
        for i in 0..self.n {
            let m = self.positive_mean(i);
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::MeanOutOfRange(format!(
                    "coordinate {i} has positive mean {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn l1_norm(&self) -> f64 {
        self.v.iter().map(|x| x.abs()).sum()
    }

    /// Regime conditions for the separation guarantee that this `v` violates.
    /// Reported, not enforced.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let l1 = self.l1_norm();
        if l1 < self.k as f64 {
            out.push(format!(
                "|v|_1 = {l1:.4} is below the dense regime (order k = {})",
                self.k
            ));
        }
        let cap = (self.n as f64).sqrt() / 2.0;
        if l1 > cap {
            out.push(format!("|v|_1 = {l1:.4} exceeds sqrt(n)/2 = {cap:.4}"));
        }
        if self.v.iter().any(|&x| x < 0.0) {
            out.push("v has negative coordinates".into());
        }
        out
    }

    pub fn sample(&self, positive: bool, rng: &mut SimRng) -> LabeledExample {
        let base = self.base_rate();
        let activation = (0..self.n)
            .map(|i| {
                let prob = if positive {
                    self.positive_mean(i)
                } else {
                    base
                };
                if rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        LabeledExample {
            activation,
            label: if positive {
                Label::Positive
            } else {
                Label::Negative
            },
        }
    }

    /// The positive distribution as a training source.
    pub fn positives(&self) -> PositiveExamples<'_> {
        PositiveExamples(self)
    }
}

pub struct PositiveExamples<'a>(&'a HalfspaceClass);

impl StimulusSource for PositiveExamples<'_> {
    fn n(&self) -> usize {
        self.0.n
    }

    fn draw(&self, rng: &mut SimRng) -> Vec<f64> {
        self.0.sample(true, rng).activation
    }
}

/// A fixed list of activations replayed in order, cycling if exhausted.
pub struct FixedSequence {
    pub n: usize,
    pub samples: Vec<Vec<f64>>,
    cursor: std::sync::atomic::AtomicUsize,
}

impl FixedSequence {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let n = samples
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("empty sample list".into()))?;
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::Config("samples differ in length".into()));
        }
        Ok(Self {
            n,
            samples,
            cursor: std::sync::atomic::AtomicUsize::new(0),
        })
    }
}

impl StimulusSource for FixedSequence {
    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, _rng: &mut SimRng) -> Vec<f64> {
        let i = self
            .cursor
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.samples[i % self.samples.len()].clone()
    }
}

/// Ascending indices of the non-zero coordinates.
pub fn active_set(activation: &[f64]) -> Vec<u32> {
    activation
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, _)| i as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::overlap;
    use crate::rng::make_rng;

    #[test]
    fn degenerate_class_fires_exactly_the_core() {
        let mut rng = make_rng(1, "stimuli");
        let class = make_stimulus_class(10, 100, 1.0, 0.0, &mut rng).unwrap();
        for _ in 0..20 {
            assert_eq!(active_set(&class.draw(&mut rng)), class.core);
        }
    }

    #[test]
    fn overlap_construction_is_exact() {
        let mut rng = make_rng(2, "stimuli");
        let a = make_stimulus_class(100, 1000, 0.9, 0.1, &mut rng).unwrap();
        let same = make_overlapping_class(&a, 1.0, 0.9, 0.1, &mut rng).unwrap();
        assert_eq!(same.core, a.core);
        let disjoint = make_overlapping_class(&a, 0.0, 0.9, 0.1, &mut rng).unwrap();
        assert_eq!(overlap(&a.core, &disjoint.core), 0);
        let partial = make_overlapping_class(&a, 0.2, 0.9, 0.1, &mut rng).unwrap();
        assert_eq!(overlap(&a.core, &partial.core), 20);
        assert_eq!(partial.k(), 100);
    }

    #[test]
    fn infeasible_overlap_is_rejected() {
        let mut rng = make_rng(3, "stimuli");
        let a = make_stimulus_class(10, 100, 0.9, 0.1, &mut rng).unwrap();
        assert!(matches!(
            make_overlapping_class(&a, 1.5, 0.9, 0.1, &mut rng),
            Err(Error::Overlap(_))
        ));
        let tight = make_stimulus_class(60, 100, 0.9, 0.1, &mut rng).unwrap();
        assert!(make_overlapping_class(&tight, 0.0, 0.9, 0.1, &mut rng).is_err());
    }

    #[test]
    fn class_rates_are_validated() {
        assert!(StimulusClass::new(vec![0, 1], 0.1, 0.2, 10).is_err());
        assert!(StimulusClass::new(vec![0, 1], 0.5, 0.5, 10).is_err());
        assert!(StimulusClass::new(vec![0, 10], 0.9, 0.1, 10).is_err());
    }

    #[test]
    fn zero_margin_makes_distributions_identical() {
        let mut rng = make_rng(4, "halfspace");
        let h = HalfspaceClass::uniform_support(50, 5, 5, 0.0, &mut rng).unwrap();
        let mut a = make_rng(9, "x");
        let mut b = make_rng(9, "x");
        for _ in 0..10 {
            assert_eq!(
                h.sample(true, &mut a).activation,
                h.sample(false, &mut b).activation
            );
        }
    }

    #[test]
    fn one_hot_normal_means() {
        let mut v = vec![0.0; 10];
        v[1] = 1.0;
        let h = HalfspaceClass::new(v, 0.5, 1).unwrap();
        assert!((h.positive_mean(1) - 0.6).abs() < 1e-12);
        assert!((h.positive_mean(0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn halfspace_mean_out_of_range() {
        let mut v = vec![0.0; 10];
        v[0] = 1.0;
        assert!(matches!(
            HalfspaceClass::new(v, 0.95, 1),
            Err(Error::MeanOutOfRange(_))
        ));
    }

    #[test]
    fn halfspace_requires_unit_nonnegative_normal() {
        assert!(HalfspaceClass::new(vec![0.5, 0.5, 0.0, 0.0], 0.1, 1).is_err());
        let signed = vec![-(0.5f64.sqrt()), 0.5f64.sqrt(), 0.0, 0.0];
        assert!(HalfspaceClass::new(signed.clone(), 0.1, 1).is_err());
        let h = HalfspaceClass::new_signed(signed, 0.1, 1).unwrap();
        assert!(!h.regime_warnings().is_empty());
    }

    #[test]
    fn labels_follow_the_generating_distribution() {
        let mut rng = make_rng(5, "halfspace");
        let h = HalfspaceClass::uniform_support(100, 10, 10, 1.0, &mut rng).unwrap();
        assert_eq!(h.sample(true, &mut rng).label, Label::Positive);
        assert_eq!(h.sample(false, &mut rng).label, Label::Negative);
    }

    #[test]
    fn fixed_sequence_cycles() {
        let seq = FixedSequence::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut rng = make_rng(0, "x");
        assert_eq!(seq.draw(&mut rng), vec![1.0, 0.0]);
        assert_eq!(seq.draw(&mut rng), vec![0.0, 1.0]);
        assert_eq!(seq.draw(&mut rng), vec![1.0, 0.0]);
    }
}
