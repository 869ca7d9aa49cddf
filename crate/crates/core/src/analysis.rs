//! Closed-form guarantees and empirical estimators.
//!
//! The evaluators are pure functions of the model parameters. Throughout,
//! `L = 2 ln(n/k)` with the natural logarithm. Bounds that leave their
//! meaningful range are returned as is and flagged vacuous, never clamped.

use serde::{Deserialize, Serialize};

use crate::dynamics::overlap;
use crate::error::{Error, Result};
use crate::learning::TrainedModel;
use crate::rng::SimRng;
use crate::stimuli::{active_set, StimulusClass, StimulusSource};

fn log_ratio(n: f64, k: f64) -> Result<f64> {
    if !(n > 0.0 && k > 0.0 && n >= k) {
        return Err(Error::Domain(format!(
            "need n >= k > 0, got n = {n}, k = {k}"
        )));
    }
    Ok(2.0 * (n / k).ln())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!("{name} = {v} must lie in (0, 1]")));
    }
    Ok(())
}

/// Plasticity threshold above which class assemblies form:
/// `(1/r^2) ((sqrt 2 - r^2) sqrt L + sqrt 6) / (sqrt(kp) + sqrt L)`.
pub fn beta0(n: f64, k: f64, p: f64, r: f64) -> Result<f64> {
    if !(n > k) {
        return Err(Error::Domain(format!("need n > k, got n = {n}, k = {k}")));
    }
    if !(k * p > 0.0) {
        return Err(Error::Domain("need kp > 0".into()));
    }
    check_unit("r", r)?;
    let sqrt_l = log_ratio(n, k)?.sqrt();
    let r2 = r * r;
    Ok(((2f64.sqrt() - r2) * sqrt_l + 6f64.sqrt()) / ((k * p).sqrt() + sqrt_l) / r2)
}

/// The threshold before the `r + q ≈ 1` simplification:
/// `(sqrt(r+q)/r^2) ((sqrt(1+r+q) - r^2/sqrt(r+q)) sqrt L + sqrt(2(1+r+q))) / (sqrt(kp) + sqrt L)`.
pub fn beta0_full(n: f64, k: f64, p: f64, r: f64, q: f64) -> Result<f64> {
    if !(n > k) {
        return Err(Error::Domain(format!("need n > k, got n = {n}, k = {k}")));
    }
    if !(k * p > 0.0) {
        return Err(Error::Domain("need kp > 0".into()));
    }
    check_unit("r", r)?;
    if !(q >= 0.0) {
        return Err(Error::Domain(format!("q = {q} must be >= 0")));
    }
    let sqrt_l = log_ratio(n, k)?.sqrt();
    let s = r + q;
    let t = 1.0 + s;
    let r2 = r * r;
    Ok(
        s.sqrt() / r2 * ((t.sqrt() - r2 / s.sqrt()) * sqrt_l + (2.0 * t).sqrt())
            / ((k * p).sqrt() + sqrt_l),
    )
}

/// Bound on the number of neurons that ever win during a phase:
/// `k / (1 - exp(-(beta/beta0)^2))`.
pub fn support_bound(beta: f64, beta0: f64, k: f64) -> f64 {
    k / (1.0 - (-(beta / beta0).powi(2)).exp())
}

/// Fraction of a recalled cap allowed outside the class assembly: `e^{-kpr}`.
pub fn recall_defect_bound(k: f64, p: f64, r: f64) -> f64 {
    (-(k * p * r)).exp()
}

/// Average stimulus-to-assembly weight that recall needs:
/// `1 + (sqrt 2 + sqrt((2/(kpr)) ln(n/k) + 2)) / sqrt r`.
pub fn gamma_recall_min(n: f64, k: f64, p: f64, r: f64) -> Result<f64> {
    check_unit("r", r)?;
    if !(k * p > 0.0) {
        return Err(Error::Domain("need kp > 0".into()));
    }
    let ln_ratio = log_ratio(n, k)? / 2.0;
    Ok(1.0 + (2f64.sqrt() + (2.0 / (k * p * r) * ln_ratio + 2.0).sqrt()) / r.sqrt())
}

/// Largest average weight compatible with overlap preservation:
/// `1 + (sqrt L - sqrt(2 ln((1+r)/(r alpha)))) / (alpha r sqrt(kp))`.
pub fn gamma_multi_max(n: f64, k: f64, p: f64, r: f64, alpha: f64) -> Result<f64> {
    check_unit("r", r)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(k * p > 0.0) {
        return Err(Error::Domain("need kp > 0".into()));
    }
    let inner = 2.0 * ((1.0 + r) / (r * alpha)).ln();
    if !(inner >= 0.0) || !inner.is_finite() {
        return Err(Error::Domain(format!(
            "square-root argument {inner} is invalid"
        )));
    }
    let sqrt_l = log_ratio(n, k)?.sqrt();
    Ok(1.0 + (sqrt_l - inner.sqrt()) / (alpha * r * (k * p).sqrt()))
}

/// Fraction of a test cap allowed outside the correct assembly:
/// `2 exp(-(gamma alpha - 1)^2 kpr / 2)`.
pub fn classify_defect_bound(gamma: f64, alpha: f64, k: f64, p: f64, r: f64) -> f64 {
    2.0 * (-0.5 * (gamma * alpha - 1.0).powi(2) * k * p * r).exp()
}

/// Required value of `delta^2 beta` for learning a halfspace:
/// `sqrt(2k/p) (sqrt(2 ln(n/k) + 2) + 1)`.
pub fn halfspace_margin_requirement(n: f64, k: f64, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain("need p > 0".into()));
    }
    let l = log_ratio(n, k)?;
    Ok((2.0 * k / p).sqrt() * ((l + 2.0).sqrt() + 1.0))
}

/// Smallest margin at fixed `beta`:
/// `(2k/(beta^2 p))^{1/4} (sqrt(2 ln(n/k) + 2) + 1)^{1/2}`.
pub fn halfspace_margin_at_beta(n: f64, k: f64, p: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain("need beta > 0".into()));
    }
    if !(p > 0.0) {
        return Err(Error::Domain("need p > 0".into()));
    }
    let l = log_ratio(n, k)?;
    Ok((2.0 * k / (beta * beta * p)).powf(0.25) * ((l + 2.0).sqrt() + 1.0).sqrt())
}

/// Rounds after which a synapse whose endpoints fire with probabilities
/// `p_pre` and `q_post` reaches weight `gamma` in expectation:
/// `ceil(ln gamma / (p q ln(1 + beta)))`.
pub fn rounds_for_weight(gamma: f64, p_pre: f64, q_post: f64, beta: f64) -> Result<u64> {
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!("target weight {gamma} must be >= 1")));
    }
    check_unit("presynaptic firing probability", p_pre)?;
    check_unit("postsynaptic firing probability", q_post)?;
    if gamma == 1.0 {
        return Ok(0);
    }
    if !(beta > 0.0) {
        return Err(Error::Domain("need beta > 0 to grow a weight".into()));
    }
    let rounds = gamma.ln() / (p_pre * q_post * (1.0 + beta).ln());
    // Absorb rounding so exact powers of (1 + beta) invert exactly.
    Ok((rounds - 1e-9).ceil().max(0.0) as u64)
}

/// A bound value together with a vacuity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub vacuous: bool,
}

impl Bound {
    fn fraction(value: f64) -> Self {
        Self {
            value,
            vacuous: !(0.0..=1.0).contains(&value),
        }
    }

    fn weight(value: f64) -> Self {
        Self {
            value,
            vacuous: !(value >= 1.0),
        }
    }

    fn plain(value: f64) -> Self {
        Self {
            value,
            vacuous: !value.is_finite(),
        }
    }
}

/// Parameters echoed into a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: f64,
    pub k: f64,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub alpha: f64,
    /// Measured average weight, if available.
    pub gamma: Option<f64>,
    pub delta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub beta0: Bound,
    pub beta0_full: Bound,
    pub support_bound: Bound,
    pub recall_defect_bound: Bound,
    pub gamma_recall_min: Bound,
    pub gamma_multi_max: Option<Bound>,
    /// Classification defect evaluated at the recall threshold for gamma.
    pub classify_defect_bound: Bound,
    /// Classification defect evaluated at the measured gamma, if given.
    pub classify_defect_bound_measured: Option<Bound>,
    pub halfspace_margin_req: Bound,
    /// Whether `delta^2 beta` meets the halfspace requirement.
    pub halfspace_margin_met: bool,
    pub rounds_to_recall_weight: Option<u64>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn compute(inputs: BoundInputs) -> Result<Self> {
        let BoundInputs {
            n,
            k,
            p,
            r,
            q,
            alpha,
            gamma,
            delta,
            beta,
        } = inputs;
        check_unit("p", p)?;
        let mut notes = Vec::new();
        let b0 = beta0(n, k, p, r)?;
        let b0_full = beta0_full(n, k, p, r, q)?;
        let support = if beta > 0.0 {
            let value = support_bound(beta, b0, k);
            // No assembly can be larger than the area.
            Bound {
                value,
                vacuous: value >= n,
            }
        } else {
            notes.push("support bound is infinite at beta = 0".into());
            Bound {
                value: f64::INFINITY,
                vacuous: true,
            }
        };
        let g_min = gamma_recall_min(n, k, p, r)?;
        let g_max = match gamma_multi_max(n, k, p, r, alpha) {
            Ok(v) => Some(Bound::weight(v)),
            Err(e) => {
                notes.push(format!("gamma_multi_max: {e}"));
                None
            }
        };
        let margin = halfspace_margin_requirement(n, k, p)?;
        let rounds = if beta > 0.0 {
            rounds_for_weight(g_min, r, 1.0, beta).ok()
        } else {
            None
        };
        Ok(Self {
            inputs,
            beta0: Bound::plain(b0),
            beta0_full: Bound::plain(b0_full),
            support_bound: support,
            recall_defect_bound: Bound::fraction(recall_defect_bound(k, p, r)),
            gamma_recall_min: Bound::weight(g_min),
            gamma_multi_max: g_max,
            classify_defect_bound: Bound::fraction(classify_defect_bound(g_min, alpha, k, p, r)),
            classify_defect_bound_measured: gamma
                .map(|g| Bound::fraction(classify_defect_bound(g, alpha, k, p, r))),
            halfspace_margin_req: Bound::plain(margin),
            halfspace_margin_met: delta * delta * beta >= margin,
            rounds_to_recall_weight: rounds,
            notes,
        })
    }
}

/// Mean cumulative strengthening of fiber edges from `stimulus_core` into
/// `assembly_core`: each weight is divided by its target's baseline, so 1
/// means unstrengthened regardless of homeostasis.
pub fn measure_gamma(model: &TrainedModel, stimulus_core: &[u32], assembly_core: &[u32]) -> f64 {
    let weights = &model.brain.fiber.weights;
    let mut total = 0.0;
    let mut count = 0usize;
    for &target in assembly_core {
        let target = target as usize;
        let baseline = weights.baseline(target);
        let (sources, ws) = weights.incoming(target);
        for (s, w) in sources.iter().zip(ws) {
            if stimulus_core.binary_search(s).is_ok() {
                total += w / baseline;
                count += 1;
            }
        }
    }
    if count == 0 {
        1.0
    } else {
        total / count as f64
    }
}

/// Measurements on a frozen model and fresh test draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    /// Per class, per training step: first-timers / k.
    pub mu_trace: Vec<Vec<f64>>,
    /// Per class, per training step: |cap ∩ core_estimate| / k.
    pub nu_trace: Vec<Vec<f64>>,
    /// Per class measured gamma.
    pub gamma_measured: Vec<f64>,
    /// Mean |x_a ∩ core(b)| over test draws `x_a` of class `a`.
    pub input_overlap: Vec<Vec<f64>>,
    /// |core_estimate(a) ∩ core_estimate(b)|.
    pub assembly_overlap: Vec<Vec<usize>>,
    /// Mean |cap(x_a) ∩ core_estimate(b)|.
    pub response_overlap: Vec<Vec<f64>>,
    /// Per class, per neuron firing frequency over test draws.
    pub firing_probability: Vec<Vec<f64>>,
    pub accuracy: f64,
}

/// Fills [`EmpiricalStats`] from `num_test` fresh draws per class.
pub fn empirical_stats(
    model: &TrainedModel,
    classes: &[StimulusClass],
    num_test: usize,
    rng: &mut SimRng,
) -> Result<EmpiricalStats> {
    if classes.len() != model.assemblies.len() {
        return Err(Error::Dimension {
            what: "class count",
            expected: model.assemblies.len(),
            got: classes.len(),
        });
    }
    let k = model.k() as f64;
    let n = model.brain.area.n();
    let c = classes.len();
    let mu_trace = model
        .traces
        .iter()
        .map(|t| t.first_timers.iter().map(|&f| f as f64 / k).collect())
        .collect();
    let nu_trace = model
        .traces
        .iter()
        .zip(&model.assemblies)
        .map(|(t, a)| {
            t.caps
                .iter()
                .map(|cap| overlap(cap, &a.core_estimate) as f64 / k)
                .collect()
        })
        .collect();
    let gamma_measured = classes
        .iter()
        .zip(&model.assemblies)
        .map(|(cls, a)| measure_gamma(model, &cls.core, &a.core_estimate))
        .collect();
    let assembly_overlap = model
        .assemblies
        .iter()
        .map(|a| {
            model
                .assemblies
                .iter()
                .map(|b| overlap(&a.core_estimate, &b.core_estimate))
                .collect()
        })
        .collect();

    let mut input_overlap = vec![vec![0.0; c]; c];
    let mut response_overlap = vec![vec![0.0; c]; c];
    let mut firing_probability = vec![vec![0.0; n]; c];
    let mut correct = 0usize;
    for (a, class) in classes.iter().enumerate() {
        for _ in 0..num_test {
            let x = class.draw(rng);
            let active = active_set(&x);
            let prediction = model.classify_overlap(&x)?;
            let cap = model.response(&x)?;
            if prediction.label == model.assemblies[a].label {
                correct += 1;
            }
            for (b, other) in classes.iter().enumerate() {
                input_overlap[a][b] += overlap(&active, &other.core) as f64;
                response_overlap[a][b] += prediction.overlaps[b] as f64;
            }
            for &i in &cap {
                firing_probability[a][i as usize] += 1.0;
            }
        }
    }
    let denom = num_test.max(1) as f64;
    for row in input_overlap
        .iter_mut()
        .chain(response_overlap.iter_mut())
        .chain(firing_probability.iter_mut())
    {
        row.iter_mut().for_each(|v| *v /= denom);
    }
    Ok(EmpiricalStats {
        mu_trace,
        nu_trace,
        gamma_measured,
        input_overlap,
        assembly_overlap,
        response_overlap,
        firing_probability,
        accuracy: correct as f64 / (denom * c as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta0_desk_value() {
        assert_relative_eq!(
            beta0(1000.0, 100.0, 0.1, 0.9).unwrap(),
            0.8713,
            epsilon = 1e-4
        );
    }

    #[test]
    fn beta0_domain_errors() {
        assert!(beta0(100.0, 100.0, 0.1, 0.9).is_err());
        assert!(beta0(1000.0, 100.0, 0.0, 0.9).is_err());
        assert!(beta0(1000.0, 100.0, 0.1, 0.0).is_err());
        assert!(beta0(1000.0, 100.0, 0.1, 1.1).is_err());
    }

    #[test]
    fn beta0_decreases_in_kp() {
        let values: Vec<f64> = [5.0, 10.0, 50.0, 1e3, 1e6]
            .iter()
            .map(|&kp| beta0(10_000.0, 1000.0, kp / 1000.0, 0.9).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
        assert!(*values.last().unwrap() < 0.01);
    }

    #[test]
    fn beta0_full_at_paper_params() {
        // With r + q = 1 the full form keeps sqrt(2(1+r+q)) = 2 where the
        // simplified one has sqrt 6, so they differ only in that constant.
        let full = beta0_full(1000.0, 100.0, 0.1, 0.9, 0.1).unwrap();
        let sqrt_l = (2.0 * 10f64.ln()).sqrt();
        let expected = ((2f64.sqrt() - 0.81) * sqrt_l + 2.0) / (10f64.sqrt() + sqrt_l) / 0.81;
        assert_relative_eq!(full, expected, epsilon = 1e-12);
    }

    #[test]
    fn support_bound_values() {
        assert_relative_eq!(
            support_bound(1.0, 1.0, 100.0),
            100.0 / (1.0 - (-1f64).exp())
        );
        assert_relative_eq!(support_bound(1.0, 0.8713, 100.0), 136.6, epsilon = 0.05);
        assert_relative_eq!(support_bound(1e3, 1.0, 100.0), 100.0);
    }

    #[test]
    fn recall_defect_values() {
        assert_relative_eq!(
            recall_defect_bound(100.0, 0.1, 0.9),
            1.234e-4,
            max_relative = 1e-3
        );
        assert_eq!(recall_defect_bound(0.0, 0.1, 0.9), 1.0);
        assert_relative_eq!(
            recall_defect_bound(2f64.ln(), 1.0, 1.0),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn gamma_recall_values() {
        assert_relative_eq!(
            gamma_recall_min(1000.0, 100.0, 0.1, 0.9).unwrap(),
            4.161,
            epsilon = 1e-3
        );
        let limit = gamma_recall_min(1000.0, 100.0, 1e9, 1.0).unwrap();
        assert_relative_eq!(limit, 1.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-4);
        let grid: Vec<f64> = [0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&r| gamma_recall_min(1000.0, 100.0, 0.1, r).unwrap())
            .collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gamma_multi_values() {
        let brain = gamma_multi_max(1e7, 1e4, 1e-3, 0.9, 0.2).unwrap();
        assert_relative_eq!(brain, 3.716, epsilon = 1e-3);
        let desk = gamma_multi_max(1000.0, 100.0, 0.1, 0.9, 0.2).unwrap();
        assert!(desk < 1.0);
        assert!(gamma_multi_max(1000.0, 100.0, 0.1, 0.9, 0.0).is_err());
    }

    #[test]
    fn classify_defect_values() {
        assert_relative_eq!(
            classify_defect_bound(1.5, 0.2, 100.0, 0.1, 0.9),
            2.0 * (-2.205f64).exp(),
            epsilon = 1e-12
        );
        assert_eq!(classify_defect_bound(5.0, 0.2, 100.0, 0.1, 0.9), 2.0);
        assert!(classify_defect_bound(1.5, 0.2, 1e6, 0.1, 0.9) < 1e-100);
    }

    #[test]
    fn halfspace_margin_values() {
        let req = halfspace_margin_requirement(1000.0, 100.0, 0.1).unwrap();
        assert_relative_eq!(req, 159.7, epsilon = 0.05);
        assert_relative_eq!(req.sqrt(), 12.64, epsilon = 0.01);
        for beta in [0.1, 1.0, 3.0] {
            let delta = halfspace_margin_at_beta(1000.0, 100.0, 0.1, beta).unwrap();
            assert_relative_eq!(delta * delta * beta, req, max_relative = 1e-12);
        }
        let boundary = halfspace_margin_requirement(100.0, 100.0, 0.1).unwrap();
        assert_relative_eq!(boundary, 2000f64.sqrt() * (2f64.sqrt() + 1.0));
    }

    #[test]
    fn rounds_examples() {
        assert_eq!(rounds_for_weight(1.1f64.powi(5), 1.0, 1.0, 0.1).unwrap(), 5);
        assert_eq!(rounds_for_weight(2.0, 0.9, 1.0, 0.1).unwrap(), 9);
        assert_eq!(rounds_for_weight(1.0, 0.5, 0.5, 0.1).unwrap(), 0);
        assert!(rounds_for_weight(0.5, 0.5, 0.5, 0.1).is_err());
    }

    #[test]
    fn report_flags_desk_vacuity() {
        let report = BoundReport::compute(BoundInputs {
            n: 1000.0,
            k: 100.0,
            p: 0.1,
            r: 0.9,
            q: 0.1,
            alpha: 0.2,
            gamma: None,
            delta: 1.0,
            beta: 1.0,
        })
        .unwrap();
        assert!(report.gamma_multi_max.unwrap().vacuous);
        assert!(!report.recall_defect_bound.vacuous);
        assert!(!report.halfspace_margin_met);
        assert_relative_eq!(report.support_bound.value, 136.6, epsilon = 0.05);
        assert!(!report.support_bound.vacuous);

        let weak = BoundReport::compute(BoundInputs {
            beta: 0.1,
            ..report.inputs
        })
        .unwrap();
        assert!(weak.support_bound.value > 1000.0);
        assert!(weak.support_bound.vacuous);
    }

    #[test]
    fn evaluators_are_bit_reproducible() {
        let a = beta0(1234.0, 77.0, 0.07, 0.66).unwrap();
        let b = beta0(1234.0, 77.0, 0.07, 0.66).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
