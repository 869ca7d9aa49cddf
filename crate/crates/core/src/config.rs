use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the expected edge count of a single generated graph.
/// At 12 bytes per edge this is roughly 4.8 GB.
pub const EDGE_BUDGET: usize = 400_000_000;

/// Global model parameters shared by every area of one brain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Neurons per area.
    pub n: usize,
    /// Cap size.
    pub k: usize,
    /// Connection probability, strictly inside (0, 1).
    pub p: f64,
    /// Plasticity parameter.
    pub beta: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize, k: usize, p: f64, beta: f64, seed: u64) -> Result<Self> {
        let config = Self {
            n,
            k,
            p,
            beta,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// The small-scale operating point `n = 1000, k = 100, p = 0.1, beta = 0.1`.
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 1000,
            k: 100,
            p: 0.1,
            beta: 0.1,
            seed,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::Config(format!(
                "cap size k = {} must satisfy 0 < k <= n = {}",
                self.k, self.n
            )));
        }
        validate_probability(self.p)?;
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "plasticity beta = {} must be a finite non-negative number",
                self.beta
            )));
        }
        check_edge_budget(self.n, self.n, self.p)
    }
}

pub(crate) fn validate_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!(
            "connection probability p = {p} must lie strictly inside (0, 1)"
        )));
    }
    Ok(())
}

pub(crate) fn check_edge_budget(n_src: usize, n_tgt: usize, p: f64) -> Result<()> {
    let expected_edges = n_src as f64 * n_tgt as f64 * p;
    if expected_edges > EDGE_BUDGET as f64 {
        return Err(Error::Sizing {
            expected_edges,
            budget: EDGE_BUDGET,
        });
    }
    Ok(())
}
