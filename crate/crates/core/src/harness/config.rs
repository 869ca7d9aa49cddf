//! Experiment configuration, read from and written back to TOML.
//!
//! Every section has defaults at the small-scale operating point, so a file
//! holding only `kind = "stimulus"` is a complete experiment. Fields left out
//! of a file are filled in by [`ExperimentConfig::resolve`] and the resolved
//! form is what output files embed.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::learning::{HomeostasisScope, TrainConfig};
use crate::stimuli::mnist::PixelEncoding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stimulus,
    Halfspace,
    FourClass,
    Sweep,
    Mnist,
}

impl ExperimentKind {
    /// Plasticity used when the config does not set one: the stimulus
    /// experiments run at 0.1 and the halfspace experiment at 1.0.
    fn default_beta(self, sweep_base: Option<ExperimentKind>) -> f64 {
        match self {
            Self::Halfspace => 1.0,
            Self::Sweep => sweep_base.map_or(0.1, |b| b.default_beta(None)),
            _ => 0.1,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stimulus => "stimulus",
            Self::Halfspace => "halfspace",
            Self::FourClass => "four-class",
            Self::Sweep => "sweep",
            Self::Mnist => "mnist",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub beta: Option<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            k: 100,
            p: 0.1,
            beta: None,
        }
    }
}

impl ModelSpec {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(0.1)
    }

    pub fn at_seed(&self, seed: u64) -> Result<ModelConfig> {
        ModelConfig::new(self.n, self.k, self.p, self.beta(), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    /// Samples presented per class.
    pub samples: usize,
    pub homeostasis: bool,
    pub homeostasis_scope: HomeostasisScope,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            samples: 5,
            homeostasis: true,
            homeostasis_scope: HomeostasisScope::Joint,
        }
    }
}

impl TrainSpec {
    pub fn train_config(&self, beta: f64) -> TrainConfig {
        let mut t = TrainConfig::new(self.samples, beta);
        t.homeostasis_between_classes = self.homeostasis;
        t.homeostasis_scope = self.homeostasis_scope;
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusSpec {
    pub classes: usize,
    pub r: f64,
    pub q: f64,
    /// When set, every class after the first shares `round(alpha k)` core
    /// neurons with the first class.
    pub alpha: Option<f64>,
}

impl Default for StimulusSpec {
    fn default() -> Self {
        Self {
            classes: 2,
            r: 0.9,
            q: 0.1,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HalfspaceSpec {
    /// `v` is uniform over this many random coordinates.
    pub support: usize,
    pub delta: f64,
    /// Positive iff at least this fraction of the assembly fires.
    pub threshold: f64,
}

impl Default for HalfspaceSpec {
    fn default() -> Self {
        Self {
            support: 100,
            delta: 1.0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    R,
    Q,
    Alpha,
    Delta,
    Support,
    N,
    K,
    P,
    Beta,
    Samples,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::Q => "q",
            Self::Alpha => "alpha",
            Self::Delta => "delta",
            Self::Support => "support",
            Self::N => "n",
            Self::K => "k",
            Self::P => "p",
            Self::Beta => "beta",
            Self::Samples => "samples",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "r" => Self::R,
            "q" => Self::Q,
            "alpha" => Self::Alpha,
            "delta" => Self::Delta,
            "support" => Self::Support,
            "n" => Self::N,
            "k" => Self::K,
            "p" => Self::P,
            "beta" => Self::Beta,
            "samples" => Self::Samples,
            other => return Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
        })
    }

    fn is_integral(self) -> bool {
        matches!(self, Self::Support | Self::N | Self::K | Self::Samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// The single-trial experiment repeated at every grid point.
    #[serde(default = "default_sweep_base")]
    pub base: ExperimentKind,
    /// For `param = "n"`: also set `k = round(k_fraction * n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_fraction: Option<f64>,
}

fn default_sweep_base() -> ExperimentKind {
    ExperimentKind::Stimulus
}

impl SweepSpec {
    /// `steps` evenly spaced values from `from` to `to` inclusive.
    pub fn linspace(param: SweepParam, from: f64, to: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("a sweep needs at least one step".into()));
        }
        let values = if steps == 1 {
            vec![from]
        } else {
            (0..steps)
                .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                .map(super::format::round_sig)
                .collect()
        };
        Ok(Self {
            param,
            values,
            base: ExperimentKind::Stimulus,
            k_fraction: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    /// The raw pixels themselves.
    Pixels,
    Linear,
    Nonlinear,
    LargeArea,
    RandomAreas,
    SplitAreas,
}

impl ExtractorKind {
    pub const ALL: [ExtractorKind; 6] = [
        Self::Pixels,
        Self::Linear,
        Self::Nonlinear,
        Self::LargeArea,
        Self::RandomAreas,
        Self::SplitAreas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pixels => "pixels",
            Self::Linear => "linear",
            Self::Nonlinear => "nonlinear",
            Self::LargeArea => "large-area",
            Self::RandomAreas => "random-areas",
            Self::SplitAreas => "split-areas",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown feature extractor '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial step size; epoch `e` (1-based) uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 128,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnistSpec {
    pub extractors: Vec<ExtractorKind>,
    /// Total feature count `m` (ignored by `pixels`).
    pub features: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Use only the first `limit` training and test images.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    pub encoding: PixelEncoding,
    /// Connection probability of the assembly areas.
    pub p: f64,
    /// Plasticity of the assembly areas.
    pub beta: f64,
    /// Examples per class shown to the assembly areas.
    pub samples: usize,
    /// Penalty on previously fired neurons, in units of the step's largest
    /// synaptic input.
    pub penalty_factor: f64,
    pub readout: ReadoutConfig,
}

impl Default for MnistSpec {
    fn default() -> Self {
        Self {
            extractors: ExtractorKind::ALL.to_vec(),
            features: 10_000,
            data_dir: None,
            limit: None,
            encoding: PixelEncoding::Graded,
            p: 0.1,
            beta: 1.0,
            samples: 5,
            penalty_factor: 10.0,
            readout: ReadoutConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Test draws per class (per sign for halfspaces).
    #[serde(default = "default_num_test")]
    pub num_test: usize,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub stimulus: StimulusSpec,
    #[serde(default)]
    pub halfspace: HalfspaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist: Option<MnistSpec>,
}

fn default_trials() -> usize {
    20
}

fn default_num_test() -> usize {
    100
}

impl ExperimentConfig {
    /// Defaults for `kind`, already resolved.
    pub fn preset(kind: ExperimentKind) -> Self {
        Self::defaults(kind).resolve().expect("presets resolve")
    }

    /// Defaults for `kind` before kind-dependent values are filled in, so
    /// overrides can still change them.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut config = Self {
            kind,
            seed: 0,
            trials: default_trials(),
            num_test: default_num_test(),
            model: ModelSpec::default(),
            train: TrainSpec::default(),
            stimulus: StimulusSpec::default(),
            halfspace: HalfspaceSpec::default(),
            sweep: None,
            mnist: None,
        };
        match kind {
            ExperimentKind::FourClass => config.stimulus.classes = 4,
            ExperimentKind::Sweep => {
                config.sweep = Some(
                    SweepSpec::linspace(SweepParam::R, 0.5, 0.9, 9).expect("static grid is valid"),
                )
            }
            ExperimentKind::Mnist => {
                config.trials = 1;
                config.mnist = Some(MnistSpec::default());
            }
            _ => {}
        }
        config
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse_toml(text)?.resolve()
    }

    /// Parses without resolving; call [`resolve`](Self::resolve) afterwards.
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_toml(&Self::read(path)?)?.resolve()
    }

    /// Reads and parses a config file without resolving it.
    pub fn parse_file(path: &Path) -> Result<Self> {
        Self::parse_toml(&Self::read(path)?)
    }

    fn read(path: &Path) -> Result<String> {
        std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs serialize to TOML")
    }

    /// Fills kind-dependent defaults and validates.
    pub fn resolve(mut self) -> Result<Self> {
        if self.kind == ExperimentKind::Sweep && self.sweep.is_none() {
            return Err(Error::Config(
                "sweep experiments need a [sweep] section".into(),
            ));
        }
        if self.kind == ExperimentKind::Mnist && self.mnist.is_none() {
            self.mnist = Some(MnistSpec::default());
        }
        if self.model.beta.is_none() {
            let base = self.sweep.as_ref().map(|s| s.base);
            self.model.beta = Some(self.kind.default_beta(base));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.kind != ExperimentKind::Mnist {
            self.model.at_seed(self.seed)?;
            self.train.train_config(self.model.beta()).validate()?;
        }
        if matches!(
            self.kind,
            ExperimentKind::Stimulus | ExperimentKind::FourClass
        ) && self.stimulus.classes == 0
        {
            return Err(Error::Config(
                "at least one stimulus class is required".into(),
            ));
        }
        if let Some(alpha) = self.stimulus.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("alpha = {alpha} must lie in [0, 1]")));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if !matches!(
                sweep.base,
                ExperimentKind::Stimulus | ExperimentKind::FourClass | ExperimentKind::Halfspace
            ) {
                return Err(Error::Config(format!(
                    "cannot sweep over '{}' experiments",
                    sweep.base
                )));
            }
            if sweep.param.is_integral()
                && sweep.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0)
            {
                return Err(Error::Config(format!(
                    "sweep parameter '{}' takes non-negative integers",
                    sweep.param.name()
                )));
            }
        }
        if let Some(mnist) = &self.mnist {
            validate_mnist(mnist)?;
        }
        Ok(())
    }

    /// Copy with one sweep parameter set.
    pub fn with_param(&self, param: SweepParam, value: f64, k_fraction: Option<f64>) -> Self {
        let mut c = self.clone();
        match param {
            SweepParam::R => c.stimulus.r = value,
            SweepParam::Q => c.stimulus.q = value,
            SweepParam::Alpha => c.stimulus.alpha = Some(value),
            SweepParam::Delta => c.halfspace.delta = value,
            SweepParam::Support => c.halfspace.support = value as usize,
            SweepParam::N => {
                c.model.n = value as usize;
                if let Some(f) = k_fraction {
                    c.model.k = ((f * value).round() as usize).max(1);
                }
            }
            SweepParam::K => c.model.k = value as usize,
            SweepParam::P => c.model.p = value,
            SweepParam::Beta => c.model.beta = Some(value),
            SweepParam::Samples => c.train.samples = value as usize,
        }
        c
    }
}

fn validate_mnist(m: &MnistSpec) -> Result<()> {
    if m.extractors.is_empty() {
        return Err(Error::Config("no feature extractor selected".into()));
    }
    let needs = |kind: ExtractorKind| m.extractors.contains(&kind);
    if m.features == 0 && m.extractors.iter().any(|&k| k != ExtractorKind::Pixels) {
        return Err(Error::Config("feature count must be positive".into()));
    }
    let divisor = if needs(ExtractorKind::SplitAreas) || needs(ExtractorKind::RandomAreas) {
        100
    } else if needs(ExtractorKind::LargeArea) {
        10
    } else {
        1
    };
    if !m.features.is_multiple_of(divisor) {
        return Err(Error::Config(format!(
            "selected extractors need m divisible by {divisor}, got {}",
            m.features
        )));
    }
    if !(m.p > 0.0 && m.p < 1.0) {
        return Err(Error::Config(format!(
            "area connection probability {} outside (0, 1)",
            m.p
        )));
    }
    if !(m.beta >= 0.0) || m.samples == 0 {
        return Err(Error::Config(
            "assembly areas need beta >= 0 and samples >= 1".into(),
        ));
    }
    if !(m.penalty_factor >= 0.0) {
        return Err(Error::Config("penalty factor must be >= 0".into()));
    }
    let r = &m.readout;
    if r.epochs == 0 || r.batch_size == 0 || !(r.learning_rate > 0.0) {
        return Err(Error::Config(
            "readout needs epochs, batch size and step size > 0".into(),
        ));
    }
    if m.limit == Some(0) {
        return Err(Error::Config("limit must be positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_resolves_to_preset() {
        let c = ExperimentConfig::from_toml("kind = \"stimulus\"").unwrap();
        assert_eq!(c, ExperimentConfig::preset(ExperimentKind::Stimulus));
        assert_eq!(c.model.beta, Some(0.1));
        let h = ExperimentConfig::from_toml("kind = \"halfspace\"").unwrap();
        assert_eq!(h.model.beta, Some(1.0));
    }

    #[test]
    fn toml_round_trip() {
        for kind in [
            ExperimentKind::Stimulus,
            ExperimentKind::Halfspace,
            ExperimentKind::FourClass,
            ExperimentKind::Sweep,
            ExperimentKind::Mnist,
        ] {
            let c = ExperimentConfig::preset(kind);
            assert_eq!(
                ExperimentConfig::from_toml(&c.to_toml()).unwrap(),
                c,
                "{kind}"
            );
        }
    }

    #[test]
    fn sections_override_defaults() {
        let text =
            "kind = \"four-class\"\nseed = 9\n[model]\nn = 500\nk = 50\n[stimulus]\nr = 0.7\n";
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(
            (c.seed, c.model.n, c.model.k, c.stimulus.r),
            (9, 500, 50, 0.7)
        );
        assert_eq!(c.stimulus.classes, 2, "the file value wins over the kind");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("kind = \"sweep\"").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"stimulus\"\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"stimulus\"\ntrials = 0").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"stimulus\"\n[model]\nk = 0").is_err());
        let empty = "kind = \"sweep\"\n[sweep]\nparam = \"r\"\nvalues = []";
        assert!(ExperimentConfig::from_toml(empty).is_err());
        let frac = "kind = \"sweep\"\n[sweep]\nparam = \"n\"\nvalues = [100.5]";
        assert!(ExperimentConfig::from_toml(frac).is_err());
        let m = "kind = \"mnist\"\n[mnist]\nfeatures = 150\nextractors = [\"split-areas\"]";
        assert!(ExperimentConfig::from_toml(m).is_err());
    }

    #[test]
    fn linspace_grid() {
        let s = SweepSpec::linspace(SweepParam::R, 0.5, 0.9, 9).unwrap();
        assert_eq!(
            s.values,
            vec![0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9]
        );
        assert!(SweepSpec::linspace(SweepParam::R, 0.5, 0.9, 0).is_err());
    }

    #[test]
    fn n_sweep_can_scale_k() {
        let c = ExperimentConfig::preset(ExperimentKind::Stimulus);
        let d = c.with_param(SweepParam::N, 400.0, Some(0.1));
        assert_eq!((d.model.n, d.model.k), (400, 40));
        let e = c.with_param(SweepParam::N, 400.0, None);
        assert_eq!((e.model.n, e.model.k), (400, 100));
    }
}
