//! MNIST in the IDX binary format.
//!
//! Images: big-endian `u32` magic 2051, count, rows, cols, then one byte per
//! pixel. Labels: magic 2049, count, then one byte per label.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Label, LabeledExample};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;

/// Environment variable naming the directory holding the four IDX files.
pub const DATA_DIR_ENV: &str = "ASSEMBLIES_MNIST_DIR";

/// Raw images, row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image file magic {magic}, expected {IMAGE_MAGIC}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(Error::Format(format!(
            "images are {rows}x{cols}, expected 28x28"
        )));
    }
    let body = &bytes[16..];
    let needed = count * rows * cols;
    if body.len() < needed {
        return Err(Error::Format(format!(
            "truncated image data: {} bytes for {count} images, need {needed}",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..needed].to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label file magic {magic}, expected {LABEL_MAGIC}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format(format!(
            "truncated label data: {} bytes for {count} labels",
            body.len()
        )));
    }
    let labels = body[..count].to_vec();
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format(format!("label {bad} outside 0..=9")));
    }
    Ok(labels)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for field in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&field.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

/// Pixel encoding into sensory activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelEncoding {
    /// `pixel / 255`.
    #[default]
    Graded,
    /// 1 if `pixel / 255 >= 0.5`, else 0.
    Binarized,
}

impl PixelEncoding {
    pub fn encode(self, pixels: &[u8]) -> Vec<f64> {
        match self {
            Self::Graded => pixels.iter().map(|&p| p as f64 / 255.0).collect(),
            Self::Binarized => pixels
                .iter()
                .map(|&p| if p as f64 / 255.0 >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Loads an image/label file pair into `[0, 1]`-scaled examples.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Vec<LabeledExample>> {
    load_mnist_encoded(images_path, labels_path, PixelEncoding::Graded)
}

pub fn load_mnist_encoded(
    images_path: &Path,
    labels_path: &Path,
    encoding: PixelEncoding,
) -> Result<Vec<LabeledExample>> {
    let images = parse_images(&fs::read(images_path)?)?;
    let labels = parse_labels(&fs::read(labels_path)?)?;
    if images.count != labels.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &label)| LabeledExample {
            activation: encoding.encode(images.image(i)),
            label: Label::Class(label as usize),
        })
        .collect())
}

/// Standard file locations inside a data directory.
#[derive(Debug, Clone)]
pub struct MnistPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl MnistPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    /// Uses `dir` if given, else the directory named by [`DATA_DIR_ENV`].
    pub fn resolve(dir: Option<&Path>) -> Result<Self> {
        match dir {
            Some(d) => Ok(Self::in_dir(d)),
            None => std::env::var_os(DATA_DIR_ENV)
                .map(|d| Self::in_dir(Path::new(&d)))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "no MNIST directory given and {DATA_DIR_ENV} is unset"
                    ))
                }),
        }
    }

    pub fn all_exist(&self) -> bool {
        [
            &self.train_images,
            &self.train_labels,
            &self.test_images,
            &self.test_labels,
        ]
        .iter()
        .all(|p| p.is_file())
    }
}
