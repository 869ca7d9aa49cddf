//! Feature extraction plus linear readout on MNIST.

use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::{ExperimentConfig, ExtractorKind, MnistSpec};
use super::features::Extractor;
use super::readout::train_readout;
use crate::error::{Error, Result};
use crate::stimuli::mnist::{load_mnist_encoded, MnistPaths, DATA_DIR_ENV};
use crate::stimuli::{Label, LabeledExample};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractorResult {
    pub extractor: ExtractorKind,
    /// Feature dimension actually used.
    pub features: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub epoch_losses: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MnistReport {
    pub train_examples: usize,
    pub test_examples: usize,
    pub results: Vec<ExtractorResult>,
}

impl MnistReport {
    pub fn result(&self, kind: ExtractorKind) -> Option<&ExtractorResult> {
        self.results.iter().find(|r| r.extractor == kind)
    }
}

/// Labelled images as flat pixel slices plus digit labels.
pub struct Dataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn from_examples(examples: Vec<LabeledExample>, limit: Option<usize>) -> Result<Self> {
        let take = limit.unwrap_or(usize::MAX);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for e in examples.into_iter().take(take) {
            let Label::Class(c) = e.label else {
                return Err(Error::Format("MNIST examples carry digit labels".into()));
            };
            images.push(e.activation);
            labels.push(c as u8);
        }
        Ok(Self { images, labels })
    }

    pub fn refs(&self) -> Vec<&[f64]> {
        self.images.iter().map(Vec::as_slice).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loads the train and test sets named by the spec (or the environment).
pub fn load_datasets(spec: &MnistSpec) -> Result<(Dataset, Dataset)> {
    let paths = MnistPaths::resolve(spec.data_dir.as_deref())?;
    if !paths.all_exist() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "MNIST files not found under {} (set data_dir or {DATA_DIR_ENV})",
                paths
                    .train_images
                    .parent()
                    .map_or_else(String::new, |p| p.display().to_string())
            ),
        )));
    }
    let train = load_mnist_encoded(&paths.train_images, &paths.train_labels, spec.encoding)?;
    let test = load_mnist_encoded(&paths.test_images, &paths.test_labels, spec.encoding)?;
    Ok((
        Dataset::from_examples(train, spec.limit)?,
        Dataset::from_examples(test, spec.limit)?,
    ))
}

/// Fits each extractor on `train`, trains a readout on its features and
/// scores it on `test`.
pub fn evaluate(
    spec: &MnistSpec,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<MnistReport> {
    let train_refs = train.refs();
    let test_refs = test.refs();
    let mut results = Vec::with_capacity(spec.extractors.len());
    for &kind in &spec.extractors {
        let start = Instant::now();
        let extractor = Extractor::fit(kind, spec, &train_refs, &train.labels, seed)?;
        let train_features = extractor.transform(&train_refs)?;
        let fit = train_readout(&train_features, &train.labels, 10, &spec.readout, seed)?;
        let train_accuracy = fit.readout.accuracy(&train_features, &train.labels);
        drop(train_features);
        let test_features = extractor.transform(&test_refs)?;
        results.push(ExtractorResult {
            extractor: kind,
            features: extractor.dim(),
            train_accuracy,
            test_accuracy: fit.readout.accuracy(&test_features, &test.labels),
            epoch_losses: fit.epoch_losses,
            wall_time: start.elapsed(),
        });
    }
    Ok(MnistReport {
        train_examples: train.len(),
        test_examples: test.len(),
        results,
    })
}

pub fn run_mnist(config: &ExperimentConfig) -> Result<MnistReport> {
    let spec = config
        .mnist
        .as_ref()
        .ok_or_else(|| Error::Config("mnist experiments need an [mnist] section".into()))?;
    let (train, test) = load_datasets(spec)?;
    evaluate(spec, &train, &test, config.seed)
}
