//! Learning with neural assemblies.
//!
//! A discrete-time simulator of excitatory brain areas wired as sparse
//! `G(n, p)` random digraphs, driven by a sensory area through random
//! bipartite fibers. Each step fires the `k` neurons with the highest
//! synaptic input (the k-cap), Hebbian plasticity multiplies the weight of
//! every synapse whose presynaptic neuron fired just before its postsynaptic
//! neuron by `1 + beta`, and homeostasis renormalizes incoming weights.
//!
//! On top of the dynamics the crate provides:
//!
//! - [`stimuli`]: stimulus classes, linear-threshold distributions and MNIST IDX ingestion
//! - [`learning`]: the class-by-class training protocol and the overlap / threshold classifiers
//! - [`analysis`]: closed-form bound evaluators and empirical estimators
//! - [`harness`]: experiment orchestration, parameter sweeps, MNIST feature
//!   extractors with a softmax readout, and the CLI
//!
//! Everything is deterministic given a [`ModelConfig`] seed: a single seed fans
//! out into labeled RNG streams (see [`rng::make_rng`]).

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod learning;
pub mod rng;
pub mod snapshot;
pub mod stimuli;

pub use config::ModelConfig;
pub use dynamics::{k_cap, Area, StepReport};
pub use error::{Error, Result};
pub use graph::{Fiber, SparseWeights};
pub use learning::{AssemblyRecord, Brain, HomeostasisScope, TrainConfig, TrainedModel};
pub use stimuli::{HalfspaceClass, Label, LabeledExample, StimulusClass, StimulusSource};
