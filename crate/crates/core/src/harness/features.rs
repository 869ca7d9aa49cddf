//! Feature extractors for MNIST images.
//!
//! Random projections (`linear`, `nonlinear`) are fixed at construction.
//! Assembly extractors first form assemblies in one or more areas from a few
//! training images per class, then describe any image by the caps it evokes
//! from rest.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::{ExtractorKind, MnistSpec};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::learning::{Brain, HomeostasisScope};
use crate::rng::{derive_seed, make_rng, SimRng};
use crate::stimuli::mnist::PIXELS;

/// One feature vector per image, stored densely or as sorted indices of
/// the features equal to 1.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense {
        cols: usize,
        data: Vec<f32>,
    },
    Binary {
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<u32>,
    },
}

/// A borrowed row of a [`FeatureMatrix`].
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f32]),
    Binary(&'a [u32]),
}

impl Row<'_> {
    /// `(index, value)` pairs of the non-zero entries.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            Row::Dense(values) => values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .for_each(|(j, &v)| f(j, v as f64)),
            Row::Binary(indices) => indices.iter().for_each(|&j| f(j as usize, 1.0)),
        }
    }

    pub fn to_dense(&self, cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; cols];
        self.for_each_nonzero(|j, v| out[j] = v);
        out
    }
}

impl FeatureMatrix {
    pub fn dense(cols: usize, rows: Vec<Vec<f32>>) -> Result<Self> {
        let mut data = Vec::with_capacity(cols * rows.len());
        for row in rows {
            if row.len() != cols {
                return Err(Error::Dimension {
                    what: "feature row",
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Self::Dense { cols, data })
    }

    /// Rows given as ascending indices of active features.
    pub fn binary(cols: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        for row in rows {
            if row.iter().any(|&j| j as usize >= cols) || row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "binary feature rows must be ascending and in range".into(),
                ));
            }
            indices.extend(row);
            offsets.push(indices.len());
        }
        Ok(Self::Binary {
            cols,
            offsets,
            indices,
        })
    }

    pub fn rows(&self) -> usize {
        match self {
            Self::Dense { cols, data } => {
                if *cols == 0 {
                    0
                } else {
                    data.len() / cols
                }
            }
            Self::Binary { offsets, .. } => offsets.len() - 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Dense { cols, .. } | Self::Binary { cols, .. } => *cols,
        }
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match self {
            Self::Dense { cols, data } => Row::Dense(&data[i * cols..(i + 1) * cols]),
            Self::Binary {
                offsets, indices, ..
            } => Row::Binary(&indices[offsets[i]..offsets[i + 1]]),
        }
    }
}

/// A fitted extractor.
#[derive(Debug, Clone)]
pub enum Extractor {
    Pixels,
    /// Gaussian weights, pixel-major: `weights[pixel * m + feature]`.
    Linear {
        m: usize,
        weights: Vec<f32>,
    },
    /// For every pixel, the features that read it.
    Nonlinear {
        m: usize,
        readers: Vec<Vec<u32>>,
        threshold: f64,
    },
    /// Areas whose caps are concatenated.
    Areas(Vec<Brain>),
}

/// Standard deviation of the linear extractor's weights.
pub const LINEAR_SIGMA: f64 = 0.1;
/// Connection density of the nonlinear extractor.
pub const NONLINEAR_DENSITY: f64 = 0.2;
/// Firing threshold of the nonlinear extractor: the expected input `70 * 0.2`.
pub const NONLINEAR_THRESHOLD: f64 = 70.0 * NONLINEAR_DENSITY;

impl Extractor {
    /// Fits `kind` with `spec.features` features on the labelled images.
    pub fn fit(
        kind: ExtractorKind,
        spec: &MnistSpec,
        images: &[&[f64]],
        labels: &[u8],
        seed: u64,
    ) -> Result<Self> {
        let m = spec.features;
        let mut rng = make_rng(seed, kind.name());
        Ok(match kind {
            ExtractorKind::Pixels => Self::Pixels,
            ExtractorKind::Linear => {
                let normal = Normal::new(0.0, LINEAR_SIGMA).expect("sigma is positive");
                let weights = (0..PIXELS * m)
                    .map(|_| normal.sample(&mut rng) as f32)
                    .collect();
                Self::Linear { m, weights }
            }
            ExtractorKind::Nonlinear => {
                let mut readers = vec![Vec::new(); PIXELS];
                for feature in 0..m as u32 {
                    for reader in readers.iter_mut() {
                        if rng.random::<f64>() < NONLINEAR_DENSITY {
                            reader.push(feature);
                        }
                    }
                }
                Self::Nonlinear {
                    m,
                    readers,
                    threshold: NONLINEAR_THRESHOLD,
                }
            }
            ExtractorKind::LargeArea => {
                let trainer = AreaTrainer::new(spec, images, labels)?;
                let order: Vec<usize> = (0..10).collect();
                Self::Areas(vec![trainer.train(
                    m,
                    m / 10,
                    &order,
                    seed_for(seed, kind, 0),
                )?])
            }
            ExtractorKind::RandomAreas => {
                let trainer = AreaTrainer::new(spec, images, labels)?;
                let orders: Vec<Vec<usize>> = (0..m / 100)
                    .map(|_| {
                        let mut order: Vec<usize> = (0..10).collect();
                        order.shuffle(&mut rng);
                        order
                    })
                    .collect();
                let areas = orders
                    .par_iter()
                    .enumerate()
                    .map(|(i, order)| trainer.train(100, 10, order, seed_for(seed, kind, i)))
                    .collect::<Result<Vec<_>>>()?;
                Self::Areas(areas)
            }
            ExtractorKind::SplitAreas => {
                let trainer = AreaTrainer::new(spec, images, labels)?;
                let areas = (0..10)
                    .into_par_iter()
                    .map(|class| {
                        trainer.train(m / 10, m / 100, &[class], seed_for(seed, kind, class))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::Areas(areas)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pixels => PIXELS,
            Self::Linear { m, .. } | Self::Nonlinear { m, .. } => *m,
            Self::Areas(areas) => areas.iter().map(|b| b.area.n()).sum(),
        }
    }

    /// Features of one image.
    pub fn features(&self, x: &[f64]) -> Result<FeatureRow> {
        if x.len() != PIXELS {
            return Err(Error::Dimension {
                what: "image length",
                expected: PIXELS,
                got: x.len(),
            });
        }
        Ok(match self {
            Self::Pixels => FeatureRow::Dense(x.iter().map(|&v| v as f32).collect()),
            Self::Linear { m, weights } => {
                let mut out = vec![0.0f64; *m];
                for (pixel, &v) in x.iter().enumerate().filter(|(_, &v)| v != 0.0) {
                    let w = &weights[pixel * m..(pixel + 1) * m];
                    out.iter_mut().zip(w).for_each(|(o, &w)| *o += v * w as f64);
                }
                FeatureRow::Dense(out.into_iter().map(|v| v as f32).collect())
            }
            Self::Nonlinear {
                m,
                readers,
                threshold,
            } => {
                let mut input = vec![0.0f64; *m];
                for (pixel, &v) in x.iter().enumerate().filter(|(_, &v)| v != 0.0) {
                    readers[pixel].iter().for_each(|&f| input[f as usize] += v);
                }
                FeatureRow::Binary(
                    (0..*m as u32)
                        .filter(|&f| input[f as usize] > *threshold)
                        .collect(),
                )
            }
            Self::Areas(areas) => {
                let mut active = Vec::new();
                let mut offset = 0u32;
                for brain in areas {
                    let cap = brain.area.response_from_rest(&brain.fiber, x)?;
                    active.extend(cap.iter().map(|&i| i + offset));
                    offset += brain.area.n() as u32;
                }
                FeatureRow::Binary(active)
            }
        })
    }

    /// Features of every image, computed in parallel.
    pub fn transform(&self, images: &[&[f64]]) -> Result<FeatureMatrix> {
        let rows = images
            .par_iter()
            .map(|x| self.features(x))
            .collect::<Result<Vec<_>>>()?;
        let dim = self.dim();
        match self {
            Self::Pixels | Self::Linear { .. } => FeatureMatrix::dense(
                dim,
                rows.into_iter()
                    .map(|r| match r {
                        FeatureRow::Dense(v) => v,
                        FeatureRow::Binary(_) => unreachable!("dense extractor"),
                    })
                    .collect(),
            ),
            Self::Nonlinear { .. } | Self::Areas(_) => FeatureMatrix::binary(
                dim,
                rows.into_iter()
                    .map(|r| match r {
                        FeatureRow::Binary(v) => v,
                        FeatureRow::Dense(_) => unreachable!("binary extractor"),
                    })
                    .collect(),
            ),
        }
    }
}

/// Features of a single image.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureRow {
    Dense(Vec<f32>),
    Binary(Vec<u32>),
}

fn seed_for(seed: u64, kind: ExtractorKind, area: usize) -> u64 {
    derive_seed(seed, &format!("{}-area-{area}", kind.name()))
}

/// Forms class assemblies in freshly sampled areas.
struct AreaTrainer<'a> {
    spec: &'a MnistSpec,
    images: &'a [&'a [f64]],
    by_class: Vec<Vec<usize>>,
}

impl<'a> AreaTrainer<'a> {
    fn new(spec: &'a MnistSpec, images: &'a [&'a [f64]], labels: &[u8]) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Dimension {
                what: "label count",
                expected: images.len(),
                got: labels.len(),
            });
        }
        let mut by_class = vec![Vec::new(); 10];
        for (i, &label) in labels.iter().enumerate() {
            by_class
                .get_mut(label as usize)
                .ok_or_else(|| Error::Format(format!("label {label} outside 0..=9")))?
                .push(i);
        }
        if let Some(class) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!(
                "no training images of class {class}"
            )));
        }
        Ok(Self {
            spec,
            images,
            by_class,
        })
    }

    /// Presents `samples` images of each class in `order` to a new area of
    /// `n` neurons with cap `k`. Neurons that fired for an earlier class are
    /// pushed below every other neuron by a bias of `penalty_factor` times
    /// the step's largest input. Homeostasis follows each class.
    fn train(&self, n: usize, k: usize, order: &[usize], seed: u64) -> Result<Brain> {
        let config = ModelConfig::new(n, k, self.spec.p, self.spec.beta, seed)?;
        let mut brain = Brain::with_sensory(config, PIXELS)?;
        let mut rng: SimRng = make_rng(seed, "examples");
        let mut penalized = vec![false; n];
        let mut bias = vec![0.0; n];
        for &class in order {
            let pool = &self.by_class[class];
            let picks: Vec<usize> = if pool.len() >= self.spec.samples {
                index::sample(&mut rng, pool.len(), self.spec.samples).into_vec()
            } else {
                (0..self.spec.samples).map(|i| i % pool.len()).collect()
            };
            brain.area.reset_phase();
            brain.area.disinhibit();
            let mut fired = Vec::new();
            for pick in picks {
                let x = self.images[pool[pick]];
                let biased = penalized.iter().any(|&p| p);
                if biased {
                    let si = brain.area.synaptic_input(&brain.fiber, x)?;
                    let top = si.iter().copied().fold(0.0f64, f64::max);
                    for (b, &p) in bias.iter_mut().zip(&penalized) {
                        *b = if p {
                            -self.spec.penalty_factor * top
                        } else {
                            0.0
                        };
                    }
                }
                let report = brain.area.step_biased(
                    &mut brain.fiber,
                    x,
                    self.spec.beta,
                    true,
                    biased.then_some(bias.as_slice()),
                )?;
                fired.extend(report.cap);
            }
            brain.area.inhibit();
            brain.homeostasis(HomeostasisScope::Joint)?;
            for i in fired {
                penalized[i as usize] = true;
            }
        }
        Ok(brain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(m: usize) -> MnistSpec {
        MnistSpec {
            features: m,
            ..MnistSpec::default()
        }
    }

    /// Ten synthetic "digits": class `c` lights a horizontal band of rows.
    fn toy_images() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for c in 0..10u8 {
            for jitter in 0..6 {
                let mut x = vec![0.0; PIXELS];
                let row = 2 + 2 * c as usize + (jitter % 2);
                for col in 4..24 {
                    x[row * 28 + col] = 1.0;
                    x[(row + 1) * 28 + col] = 0.5;
                }
                images.push(x);
                labels.push(c);
            }
        }
        (images, labels)
    }

    #[test]
    fn linear_on_zero_image_is_zero() {
        let e = Extractor::fit(ExtractorKind::Linear, &spec(50), &[], &[], 1).unwrap();
        match e.features(&[0.0; PIXELS]).unwrap() {
            FeatureRow::Dense(v) => assert!(v.iter().all(|&x| x == 0.0)),
            FeatureRow::Binary(_) => panic!("linear features are dense"),
        }
    }

    #[test]
    fn linear_matches_direct_dot_product() {
        let e = Extractor::fit(ExtractorKind::Linear, &spec(7), &[], &[], 2).unwrap();
        let Extractor::Linear { m, weights } = &e else {
            panic!()
        };
        let x: Vec<f64> = (0..PIXELS).map(|i| (i % 5) as f64 / 4.0).collect();
        let FeatureRow::Dense(got) = e.features(&x).unwrap() else {
            panic!()
        };
        for f in 0..*m {
            let direct: f64 = (0..PIXELS).map(|p| x[p] * weights[p * m + f] as f64).sum();
            assert!((got[f] as f64 - direct).abs() < 1e-4);
        }
    }

    #[test]
    fn nonlinear_fires_above_fourteen() {
        let e = Extractor::fit(ExtractorKind::Nonlinear, &spec(200), &[], &[], 3).unwrap();
        let Extractor::Nonlinear { readers, .. } = &e else {
            panic!()
        };
        let degree = readers.iter().map(Vec::len).sum::<usize>() as f64 / 200.0;
        assert!(
            (degree - 0.2 * PIXELS as f64).abs() < 10.0,
            "mean fan-in {degree}"
        );
        assert!(
            matches!(e.features(&[0.0; PIXELS]).unwrap(), FeatureRow::Binary(v) if v.is_empty())
        );
        // An all-ones image gives each feature its fan-in, about 157 > 14.
        let FeatureRow::Binary(on) = e.features(&[1.0; PIXELS]).unwrap() else {
            panic!()
        };
        assert_eq!(on.len(), 200);
        // 0.05 per pixel gives about 7.8 < 14.
        let FeatureRow::Binary(off) = e.features(&[0.05; PIXELS]).unwrap() else {
            panic!()
        };
        assert!(off.is_empty());
    }

    #[test]
    fn assembly_extractors_have_expected_shape() {
        let (images, labels) = toy_images();
        let refs: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
        for (kind, areas, active) in [
            (ExtractorKind::SplitAreas, 10, 10 * 10),
            (ExtractorKind::RandomAreas, 10, 10 * 10),
            (ExtractorKind::LargeArea, 1, 100),
        ] {
            let e = Extractor::fit(kind, &spec(1000), &refs, &labels, 4).unwrap();
            let Extractor::Areas(a) = &e else { panic!() };
            assert_eq!(a.len(), areas, "{kind:?}");
            assert_eq!(e.dim(), 1000);
            let f = e.transform(&refs[..3]).unwrap();
            assert_eq!(f.rows(), 3);
            let FeatureMatrix::Binary { offsets, .. } = &f else {
                panic!()
            };
            assert_eq!(offsets[1] - offsets[0], active, "{kind:?}");
        }
    }

    #[test]
    fn penalty_pushes_later_classes_onto_fresh_neurons() {
        let (images, labels) = toy_images();
        let refs: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
        let s = spec(1000);
        let trainer = AreaTrainer::new(&s, &refs, &labels).unwrap();
        let brain = trainer.train(1000, 100, &[0, 1], 5).unwrap();
        let a = brain
            .area
            .response_from_rest(&brain.fiber, refs[0])
            .unwrap();
        let b = brain
            .area
            .response_from_rest(&brain.fiber, refs[6])
            .unwrap();
        assert!(crate::dynamics::overlap(&a, &b) < 50);
    }

    #[test]
    fn transform_is_deterministic() {
        let (images, labels) = toy_images();
        let refs: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
        let a = Extractor::fit(ExtractorKind::SplitAreas, &spec(1000), &refs, &labels, 6).unwrap();
        let b = Extractor::fit(ExtractorKind::SplitAreas, &spec(1000), &refs, &labels, 6).unwrap();
        assert_eq!(a.transform(&refs).unwrap(), b.transform(&refs).unwrap());
    }

    #[test]
    fn missing_class_is_a_config_error() {
        let (images, mut labels) = toy_images();
        labels.iter_mut().for_each(|l| *l = (*l).min(8));
        let refs: Vec<&[f64]> = images.iter().map(Vec::as_slice).collect();
        let r = Extractor::fit(ExtractorKind::SplitAreas, &spec(1000), &refs, &labels, 7);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn binary_matrix_validates_rows() {
        assert!(FeatureMatrix::binary(5, vec![vec![0, 4]]).is_ok());
        assert!(FeatureMatrix::binary(5, vec![vec![5]]).is_err());
        assert!(FeatureMatrix::binary(5, vec![vec![2, 1]]).is_err());
    }
}
