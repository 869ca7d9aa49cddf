//! Class-by-class assembly formation and the classifiers built on it.
//!
//! Training presents `T` samples of one class at a time to a disinhibited
//! area with plasticity on, records the final cap as the class assembly, and
//! sends the area back to rest before the next class. Classification fires a
//! test stimulus into the area from rest and reads which assembly responds.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::dynamics::{indicator, overlap, Area, TraceRecord};
use crate::error::{Error, Result};
use crate::graph::{renormalize_incoming, sample_fiber, Fiber};
use crate::rng::{make_rng, SimRng};
use crate::stimuli::StimulusSource;

/// Which incoming weights share one normalization budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomeostasisScope {
    /// Fiber and recurrent weights into a neuron sum to 1 together.
    #[default]
    Joint,
    /// Fiber weights and recurrent weights each sum to 1.
    PerSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Samples per class.
    pub samples_per_class: usize,
    pub beta: f64,
    /// Renormalize incoming weights after each class phase.
    pub homeostasis_between_classes: bool,
    #[serde(default)]
    pub homeostasis_scope: HomeostasisScope,
    pub plastic: bool,
}

impl TrainConfig {
    pub fn new(samples_per_class: usize, beta: f64) -> Self {
        Self {
            samples_per_class,
            beta,
            homeostasis_between_classes: true,
            homeostasis_scope: HomeostasisScope::Joint,
            plastic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class == 0 {
            return Err(Error::Config(
                "at least one sample per class is required".into(),
            ));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta = {} must be >= 0", self.beta)));
        }
        Ok(())
    }
}

/// A learned class representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyRecord {
    pub label: usize,
    /// The final training cap, ascending.
    pub core_estimate: Vec<u32>,
    /// Union of every cap of the training phase, ascending.
    pub support: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_measured: Option<f64>,
}

/// Per-step record of one training phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub caps: Vec<Vec<u32>>,
    pub first_timers: Vec<usize>,
}

impl PhaseTrace {
    /// First step (1-based) after which no first-time winner ever enters again.
    pub fn convergence_step(&self) -> Option<usize> {
        let last_new = self.first_timers.iter().rposition(|&f| f > 0)?;
        if last_new + 1 < self.first_timers.len() {
            Some(last_new + 2)
        } else {
            None
        }
    }

    /// First step `t` (1-based) with `cap_t == cap_{t-1}`.
    pub fn stable_step(&self) -> Option<usize> {
        self.caps
            .windows(2)
            .position(|w| w[0] == w[1])
            .map(|i| i + 2)
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.caps
            .iter()
            .enumerate()
            .map(|(i, cap)| TraceRecord {
                step: i + 1,
                first_timers: self.first_timers[i],
                overlap_with_previous: if i == 0 {
                    0
                } else {
                    overlap(cap, &self.caps[i - 1])
                },
            })
            .collect()
    }

    /// Convergence trace as JSON lines.
    pub fn to_json_lines(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }
}

/// A sensory area wired into one learning area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brain {
    pub config: ModelConfig,
    pub area: Area,
    pub fiber: Fiber,
}

impl Brain {
    /// Sensory area of the same size `n` as the learning area.
    pub fn new(config: ModelConfig) -> Result<Self> {
        Self::with_sensory(config, config.n)
    }

    pub fn with_sensory(config: ModelConfig, n_sensory: usize) -> Result<Self> {
        config.validate()?;
        let area = Area::new(&config, &mut make_rng(config.seed, "graph"))?;
        let fiber = sample_fiber(
            n_sensory,
            config.n,
            config.p,
            &mut make_rng(config.seed, "fiber"),
        )?;
        Ok(Self {
            config,
            area,
            fiber,
        })
    }

    pub fn n_sensory(&self) -> usize {
        self.fiber.n_src()
    }

    pub fn homeostasis(&mut self, scope: HomeostasisScope) -> Result<()> {
        match scope {
            HomeostasisScope::Joint => {
                renormalize_incoming(&mut [&mut self.fiber.weights, &mut self.area.recurrent])
            }
            HomeostasisScope::PerSource => {
                renormalize_incoming(&mut [&mut self.fiber.weights])?;
                renormalize_incoming(&mut [&mut self.area.recurrent])
            }
        }
    }

    /// Runs one training phase on a single source.
    pub fn train_phase(
        &mut self,
        source: &dyn StimulusSource,
        train: &TrainConfig,
        rng: &mut SimRng,
    ) -> Result<PhaseTrace> {
        if source.n() != self.n_sensory() {
            return Err(Error::Dimension {
                what: "stimulus length",
                expected: self.n_sensory(),
                got: source.n(),
            });
        }
        self.area.reset_phase();
        self.area.disinhibit();
        let mut trace = PhaseTrace {
            caps: Vec::with_capacity(train.samples_per_class),
            first_timers: Vec::with_capacity(train.samples_per_class),
        };
        for _ in 0..train.samples_per_class {
            let x = source.draw(rng);
            let report = self
                .area
                .step(&mut self.fiber, &x, train.beta, train.plastic)?;
            trace.first_timers.push(report.first_timers);
            trace.caps.push(report.cap);
        }
        self.area.inhibit();
        if train.homeostasis_between_classes {
            self.homeostasis(train.homeostasis_scope)?;
        }
        Ok(trace)
    }
}

/// A brain after training, with one assembly per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub brain: Brain,
    pub assemblies: Vec<AssemblyRecord>,
    pub traces: Vec<PhaseTrace>,
}

/// Result of [`TrainedModel::classify_overlap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    /// `|cap ∩ core_estimate|` per assembly, in assembly order.
    pub overlaps: Vec<usize>,
    /// More than one assembly attains the maximum overlap.
    pub ambiguous: bool,
}

/// Trains one assembly per source, in order; the `i`-th source gets label `i`.
pub fn train_classes(
    mut brain: Brain,
    sources: &[&dyn StimulusSource],
    train: &TrainConfig,
    rng: &mut SimRng,
) -> Result<TrainedModel> {
    train.validate()?;
    let mut assemblies = Vec::with_capacity(sources.len());
    let mut traces = Vec::with_capacity(sources.len());
    for (label, source) in sources.iter().enumerate() {
        let trace = brain.train_phase(*source, train, rng)?;
        let core_estimate = trace.caps.last().cloned().unwrap_or_default();
        let mut support: Vec<u32> = trace.caps.iter().flatten().copied().collect();
        support.sort_unstable();
        support.dedup();
        assemblies.push(AssemblyRecord {
            label,
            core_estimate,
            support,
            gamma_measured: None,
        });
        traces.push(trace);
    }
    Ok(TrainedModel {
        brain,
        assemblies,
        traces,
    })
}

impl TrainedModel {
    pub fn k(&self) -> usize {
        self.brain.area.k()
    }

    /// Cap evoked by `x` from rest, with plasticity off.
    pub fn response(&self, x: &[f64]) -> Result<Vec<u32>> {
        self.brain.area.response_from_rest(&self.brain.fiber, x)
    }

    /// Predicts the assembly with the most neurons in the evoked cap.
    /// Ties go to the lowest label.
    pub fn classify_overlap(&self, x: &[f64]) -> Result<Prediction> {
        if self.assemblies.is_empty() {
            return Err(Error::NoAssemblies);
        }
        let cap = self.response(x)?;
        let overlaps: Vec<usize> = self
            .assemblies
            .iter()
            .map(|a| overlap(&cap, &a.core_estimate))
            .collect();
        let best = *overlaps.iter().max().expect("non-empty");
        let winner = overlaps
            .iter()
            .position(|&o| o == best)
            .expect("max exists");
        Ok(Prediction {
            label: self.assemblies[winner].label,
            ambiguous: overlaps.iter().filter(|&&o| o == best).count() > 1,
            overlaps,
        })
    }

    /// Positive iff at least `threshold_fraction * k` neurons of the first
    /// assembly fire in response to `x`.
    pub fn classify_halfspace(&self, x: &[f64], threshold_fraction: f64) -> Result<bool> {
        let assembly = self.assemblies.first().ok_or(Error::NoAssemblies)?;
        let cap = self.response(x)?;
        let hits = overlap(&cap, &assembly.core_estimate) as f64;
        Ok(hits >= threshold_fraction * self.k() as f64)
    }

    pub fn halfspace_overlap(&self, x: &[f64]) -> Result<usize> {
        let assembly = self.assemblies.first().ok_or(Error::NoAssemblies)?;
        Ok(overlap(&self.response(x)?, &assembly.core_estimate))
    }
}

/// A readout area fed by the learning area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutArea {
    pub area: Area,
    /// Learning area -> readout area.
    pub fiber: Fiber,
}

impl ReadoutArea {
    pub fn new(config: &ModelConfig, n_learning: usize) -> Result<Self> {
        let area = Area::new(config, &mut make_rng(config.seed, "readout-graph"))?;
        let fiber = sample_fiber(
            n_learning,
            config.n,
            config.p,
            &mut make_rng(config.seed, "readout-fiber"),
        )?;
        Ok(Self { area, fiber })
    }

    /// Readout cap evoked from rest by a set of firing learning-area neurons.
    pub fn response(&self, learning_cap: &[u32]) -> Result<Vec<u32>> {
        let x = indicator(self.fiber.n_src(), learning_cap);
        self.area.response_from_rest(&self.fiber, &x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutProjection {
    pub record: AssemblyRecord,
    pub trace: PhaseTrace,
    /// Step after which no new winners entered; `None` if still changing.
    pub converged_at: Option<usize>,
}

/// Fires `assembly`'s core into the readout area for `rounds` steps.
pub fn project_to_readout(
    readout: &mut ReadoutArea,
    assembly: &AssemblyRecord,
    rounds: usize,
    beta: f64,
) -> Result<ReadoutProjection> {
    if rounds == 0 {
        return Err(Error::Config("projection needs at least one round".into()));
    }
    let x = indicator(readout.fiber.n_src(), &assembly.core_estimate);
    readout.area.reset_phase();
    readout.area.disinhibit();
    let mut trace = PhaseTrace {
        caps: Vec::with_capacity(rounds),
        first_timers: Vec::with_capacity(rounds),
    };
    for _ in 0..rounds {
        let report = readout.area.step(&mut readout.fiber, &x, beta, true)?;
        trace.first_timers.push(report.first_timers);
        trace.caps.push(report.cap);
    }
    readout.area.inhibit();
    let mut support: Vec<u32> = trace.caps.iter().flatten().copied().collect();
    support.sort_unstable();
    support.dedup();
    let record = AssemblyRecord {
        label: assembly.label,
        core_estimate: trace.caps.last().cloned().unwrap_or_default(),
        support,
        gamma_measured: None,
    };
    Ok(ReadoutProjection {
        converged_at: trace.convergence_step(),
        record,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::{make_stimulus_class, FixedSequence};

    fn small_config(seed: u64, beta: f64) -> ModelConfig {
        ModelConfig::new(200, 20, 0.2, beta, seed).unwrap()
    }

    #[test]
    fn single_sample_without_plasticity() {
        let config = small_config(1, 0.0);
        let brain = Brain::new(config).unwrap();
        let mut rng = make_rng(1, "stimuli");
        let class = make_stimulus_class(20, 200, 0.9, 0.1, &mut rng).unwrap();
        let model = train_classes(brain, &[&class], &TrainConfig::new(1, 0.0), &mut rng).unwrap();
        let a = &model.assemblies[0];
        assert_eq!(a.core_estimate, a.support);
        assert_eq!(a.core_estimate.len(), 20);
    }

    #[test]
    fn support_never_exceeds_k_times_t() {
        let brain = Brain::new(small_config(2, 0.1)).unwrap();
        let mut rng = make_rng(2, "stimuli");
        let class = make_stimulus_class(20, 200, 0.6, 0.3, &mut rng).unwrap();
        let model = train_classes(brain, &[&class], &TrainConfig::new(6, 0.1), &mut rng).unwrap();
        let a = &model.assemblies[0];
        assert!(a.support.len() <= 20 * 6);
        assert!(a
            .core_estimate
            .iter()
            .all(|c| a.support.binary_search(c).is_ok()));
    }

    #[test]
    fn area_is_at_rest_after_training() {
        let brain = Brain::new(small_config(3, 0.1)).unwrap();
        let mut rng = make_rng(3, "stimuli");
        let class = make_stimulus_class(20, 200, 0.9, 0.1, &mut rng).unwrap();
        let model = train_classes(brain, &[&class], &TrainConfig::new(3, 0.1), &mut rng).unwrap();
        assert!(model.brain.area.is_inhibited());
        assert!(model.brain.area.firing().is_empty());
    }

    #[test]
    fn no_assemblies_is_an_error() {
        let model = TrainedModel {
            brain: Brain::new(small_config(4, 0.1)).unwrap(),
            assemblies: vec![],
            traces: vec![],
        };
        let x = vec![0.0; 200];
        assert!(matches!(
            model.classify_overlap(&x),
            Err(Error::NoAssemblies)
        ));
        assert!(matches!(
            model.classify_halfspace(&x, 0.5),
            Err(Error::NoAssemblies)
        ));
    }

    #[test]
    fn equal_overlaps_pick_lowest_label_and_flag_ambiguity() {
        let brain = Brain::new(small_config(5, 0.0)).unwrap();
        let mut rng = make_rng(5, "stimuli");
        let class = make_stimulus_class(20, 200, 1.0, 0.0, &mut rng).unwrap();
        // Two frozen one-step phases on the same constant stimulus give
        // identical assemblies.
        let mut train = TrainConfig::new(1, 0.0);
        train.homeostasis_between_classes = false;
        let model = train_classes(brain, &[&class, &class], &train, &mut rng).unwrap();
        assert_eq!(
            model.assemblies[0].core_estimate,
            model.assemblies[1].core_estimate
        );
        let p = model.classify_overlap(&vec![0.0; 200]).unwrap();
        assert_eq!(p.label, 0);
        assert!(p.ambiguous);
    }

    #[test]
    fn zero_threshold_is_always_positive() {
        let brain = Brain::new(small_config(6, 1.0)).unwrap();
        let mut rng = make_rng(6, "stimuli");
        let class = make_stimulus_class(20, 200, 0.9, 0.1, &mut rng).unwrap();
        let model = train_classes(brain, &[&class], &TrainConfig::new(5, 1.0), &mut rng).unwrap();
        assert!(model.classify_halfspace(&vec![0.0; 200], 0.0).unwrap());
    }

    #[test]
    fn frozen_dynamics_repeat_exactly() {
        let mut brain = Brain::new(small_config(7, 0.0)).unwrap();
        let x: Vec<f64> = (0..200).map(|i| (i % 7 == 0) as u8 as f64).collect();
        let seq = FixedSequence::new(vec![x]).unwrap();
        let mut rng = make_rng(7, "x");
        let mut train = TrainConfig::new(4, 0.0);
        train.plastic = false;
        train.homeostasis_between_classes = false;
        let before = brain.fiber.clone();
        let a = brain.train_phase(&seq, &train, &mut rng).unwrap();
        let b = brain.train_phase(&seq, &train, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(brain.fiber, before);
    }

    #[test]
    fn homeostasis_scopes_differ_only_in_budget() {
        let mut joint = Brain::new(small_config(9, 1.0)).unwrap();
        let mut rng = make_rng(9, "stimuli");
        let class = make_stimulus_class(20, 200, 0.9, 0.1, &mut rng).unwrap();
        let mut train = TrainConfig::new(3, 1.0);
        train.homeostasis_between_classes = false;
        joint.train_phase(&class, &train, &mut rng).unwrap();
        let mut split = joint.clone();
        joint.homeostasis(HomeostasisScope::Joint).unwrap();
        split.homeostasis(HomeostasisScope::PerSource).unwrap();
        for t in 0..200 {
            let j = joint.fiber.weights.incoming_sum(t) + joint.area.recurrent.incoming_sum(t);
            assert!((j - 1.0).abs() < 1e-12);
            assert!((split.fiber.weights.incoming_sum(t) - 1.0).abs() < 1e-12);
            assert!((split.area.recurrent.incoming_sum(t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn convergence_step_definition() {
        let trace = PhaseTrace {
            caps: vec![vec![]; 5],
            first_timers: vec![10, 3, 1, 0, 0],
        };
        assert_eq!(trace.convergence_step(), Some(4));
        let unsettled = PhaseTrace {
            caps: vec![vec![]; 3],
            first_timers: vec![10, 0, 2],
        };
        assert_eq!(unsettled.convergence_step(), None);
    }

    #[test]
    fn trace_json_lines() {
        let trace = PhaseTrace {
            caps: vec![vec![1, 2], vec![2, 3]],
            first_timers: vec![2, 1],
        };
        assert_eq!(
            trace.to_json_lines(),
            "{\"step\":1,\"first_timers\":2,\"overlap_with_previous\":0}\n\
             {\"step\":2,\"first_timers\":1,\"overlap_with_previous\":1}\n"
        );
    }

    #[test]
    fn readout_projection_with_frozen_weights_is_stable() {
        let config = small_config(8, 0.0);
        let mut readout = ReadoutArea::new(&config, 200).unwrap();
        let assembly = AssemblyRecord {
            label: 0,
            core_estimate: (0..20).collect(),
            support: (0..20).collect(),
            gamma_measured: None,
        };
        let first = project_to_readout(&mut readout, &assembly, 3, 0.0).unwrap();
        let again = project_to_readout(&mut readout, &assembly, 3, 0.0).unwrap();
        assert_eq!(first.record.core_estimate, again.record.core_estimate);
        assert!(project_to_readout(&mut readout, &assembly, 0, 0.0).is_err());
    }
}
