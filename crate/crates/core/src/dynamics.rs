//! One time step of a brain area: synaptic input, k-cap, Hebbian update.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{sample_recurrent_graph, Fiber, SparseWeights};

/// A non-sensory brain area: recurrent `G(n, p)` weights plus firing state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    k: usize,
    pub recurrent: SparseWeights,
    firing: Vec<u32>,
    inhibited: bool,
    ever_fired: Vec<bool>,
}

/// Outcome of one [`Area::step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// The `k` winners, ascending.
    pub cap: Vec<u32>,
    /// Winners that had not fired earlier in the current phase.
    pub first_timers: usize,
    /// Per-neuron synaptic input the cap was selected from.
    #[serde(skip)]
    pub synaptic_inputs: Vec<f64>,
}

/// One line of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub first_timers: usize,
    pub overlap_with_previous: usize,
}

impl Area {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        let recurrent = sample_recurrent_graph(config, rng)?;
        Self::with_weights(config.k, recurrent)
    }

    pub fn with_weights(k: usize, recurrent: SparseWeights) -> Result<Self> {
        let n = recurrent.n_tgt();
        if recurrent.n_src() != n {
            return Err(Error::Dimension {
                what: "recurrent source count",
                expected: n,
                got: recurrent.n_src(),
            });
        }
        if k == 0 || k > n {
            return Err(Error::Config(format!(
                "cap size {k} must satisfy 0 < k <= {n}"
            )));
        }
        Ok(Self {
            k,
            recurrent,
            firing: Vec::new(),
            inhibited: false,
            ever_fired: vec![false; n],
        })
    }

    pub(crate) fn from_parts(
        k: usize,
        recurrent: SparseWeights,
        firing: Vec<u32>,
        inhibited: bool,
        ever_fired: Vec<bool>,
    ) -> Result<Self> {
        let mut area = Self::with_weights(k, recurrent)?;
        let n = area.n();
        if ever_fired.len() != n || firing.iter().any(|&i| i as usize >= n) || firing.len() > k {
            return Err(Error::Format("inconsistent area state".into()));
        }
        area.firing = firing;
        area.inhibited = inhibited;
        area.ever_fired = ever_fired;
        Ok(area)
    }

    pub fn n(&self) -> usize {
        self.recurrent.n_tgt()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn firing(&self) -> &[u32] {
        &self.firing
    }

    pub fn is_inhibited(&self) -> bool {
        self.inhibited
    }

    pub fn ever_fired(&self) -> &[bool] {
        &self.ever_fired
    }

    /// Silences the area; it returns to rest with no firing neurons.
    pub fn inhibit(&mut self) {
        self.inhibited = true;
        self.firing.clear();
    }

    pub fn disinhibit(&mut self) {
        self.inhibited = false;
    }

    /// Starts a new training phase: clears firing and the first-timer history.
    pub fn reset_phase(&mut self) {
        self.firing.clear();
        self.ever_fired.iter_mut().for_each(|f| *f = false);
    }

    /// Synaptic input of every neuron from the given sensory activation
    /// through `fiber` plus recurrent input from the currently firing set.
    pub fn synaptic_input(&self, fiber: &Fiber, sensory: &[f64]) -> Result<Vec<f64>> {
        if self.inhibited {
            return Err(Error::Inhibited);
        }
        let mut si = fiber_input(fiber, sensory, self.n())?;
        if !self.firing.is_empty() {
            let mut active = vec![false; self.n()];
            for &j in &self.firing {
                active[j as usize] = true;
            }
            for (target, value) in si.iter_mut().enumerate() {
                let (sources, weights) = self.recurrent.incoming(target);
                *value += sources
                    .iter()
                    .zip(weights)
                    .filter(|(&s, _)| active[s as usize])
                    .map(|(_, &w)| w)
                    .sum::<f64>();
            }
        }
        Ok(si)
    }

    /// Advances the area by one step.
    ///
    /// The cap is selected from weights as they were before this step. When
    /// `plastic`, fiber synapses from active sensory neurons into the cap are
    /// multiplied by `1 + beta * x_j` and recurrent synapses from the previous
    /// cap into the new cap by `1 + beta`.
    pub fn step(
        &mut self,
        fiber: &mut Fiber,
        sensory: &[f64],
        beta: f64,
        plastic: bool,
    ) -> Result<StepReport> {
        self.step_biased(fiber, sensory, beta, plastic, None)
    }

    /// [`Self::step`] with an additive per-neuron bias applied to the
    /// synaptic input before the cap.
    pub fn step_biased(
        &mut self,
        fiber: &mut Fiber,
        sensory: &[f64],
        beta: f64,
        plastic: bool,
        bias: Option<&[f64]>,
    ) -> Result<StepReport> {
        let si = self.synaptic_input(fiber, sensory)?;
        let mut selection_input = None;
        if let Some(bias) = bias {
            if bias.len() != si.len() {
                return Err(Error::Dimension {
                    what: "bias vector",
                    expected: si.len(),
                    got: bias.len(),
                });
            }
            let mut biased = si.clone();
            biased.iter_mut().zip(bias).for_each(|(s, b)| *s += b);
            selection_input = Some(biased);
        }
        let cap = k_cap(selection_input.as_deref().unwrap_or(&si), self.k);

        if plastic && beta > 0.0 {
            hebbian_update(&mut fiber.weights, sensory, &cap, beta)?;
            if !self.firing.is_empty() {
                let previous = indicator(self.n(), &self.firing);
                hebbian_update(&mut self.recurrent, &previous, &cap, beta)?;
            }
        }

        let first_timers = cap
            .iter()
            .filter(|&&i| !self.ever_fired[i as usize])
            .count();
        for &i in &cap {
            self.ever_fired[i as usize] = true;
        }
        self.firing.clone_from(&cap);
        Ok(StepReport {
            cap,
            first_timers,
            synaptic_inputs: si,
        })
    }

    /// The cap a stimulus evokes from rest, without touching any state.
    pub fn response_from_rest(&self, fiber: &Fiber, sensory: &[f64]) -> Result<Vec<u32>> {
        Ok(k_cap(&fiber_input(fiber, sensory, self.n())?, self.k))
    }
}

/// Input delivered through a fiber alone.
pub fn fiber_input(fiber: &Fiber, sensory: &[f64], n_target: usize) -> Result<Vec<f64>> {
    if sensory.len() != fiber.n_src() {
        return Err(Error::Dimension {
            what: "sensory activation",
            expected: fiber.n_src(),
            got: sensory.len(),
        });
    }
    if fiber.n_tgt() != n_target {
        return Err(Error::Dimension {
            what: "fiber target count",
            expected: n_target,
            got: fiber.n_tgt(),
        });
    }
    Ok((0..n_target)
        .map(|target| {
            let (sources, weights) = fiber.weights.incoming(target);
            sources
                .iter()
                .zip(weights)
                .map(|(&s, &w)| sensory[s as usize] * w)
                .sum()
        })
        .collect())
}

/// Indices of the `k` largest entries, ascending. Ties go to the lowest index.
pub fn k_cap(si: &[f64], k: usize) -> Vec<u32> {
    let n = si.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    let rank = |a: &u32, b: &u32| -> Ordering {
        si[*b as usize]
            .total_cmp(&si[*a as usize])
            .then_with(|| a.cmp(b))
    };
    if k < n {
        order.select_nth_unstable_by(k - 1, rank);
        order.truncate(k);
    }
    order.sort_unstable();
    order
}

/// Multiplies `w(j, i)` by `1 + beta * pre[j]` for every existing edge with
/// `pre[j] > 0` and `i` in `post_cap`.
pub fn hebbian_update(
    weights: &mut SparseWeights,
    pre: &[f64],
    post_cap: &[u32],
    beta: f64,
) -> Result<()> {
    if pre.len() != weights.n_src() {
        return Err(Error::Dimension {
            what: "presynaptic activation",
            expected: weights.n_src(),
            got: pre.len(),
        });
    }
    if beta == 0.0 {
        return Ok(());
    }
    for &target in post_cap {
        let (sources, ws) = weights.incoming_mut(target as usize);
        for (&s, w) in sources.iter().zip(ws.iter_mut()) {
            let x = pre[s as usize];
            if x > 0.0 {
                *w *= 1.0 + beta * x;
            }
        }
    }
    Ok(())
}

/// Dense 0/1 vector of length `n` with ones at `set`.
pub fn indicator(n: usize, set: &[u32]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &i in set {
        v[i as usize] = 1.0;
    }
    v
}

/// Size of the intersection of two ascending index sets.
pub fn overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
