//! C ABI for the `assemblies` simulator.
//!
//! Every fallible function returns an [`AsmStatus`]; on failure the message
//! is available from [`asm_last_error`] on the same thread. Models are opaque
//! [`AsmModel`] handles created by [`asm_model_new`] or [`asm_model_load`] and
//! released with [`asm_model_free`]. Panics never cross the boundary; they
//! surface as [`AsmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use assemblies::analysis::{BoundInputs, BoundReport};
use assemblies::harness::{emit, run_experiment, ExperimentConfig, ExperimentResult};
use assemblies::learning::train_classes;
use assemblies::rng::make_rng;
use assemblies::snapshot::{load_model, save_model};
use assemblies::stimuli::{make_stimulus_class, FixedSequence, StimulusSource};
use assemblies::{Brain, Error, ModelConfig, TrainConfig, TrainedModel};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Parameters or configuration rejected.
    Config = 2,
    /// A buffer or sample has the wrong length.
    Dimension = 3,
    /// The model has no assemblies yet, or was already trained.
    State = 4,
    /// Arguments outside a formula's domain.
    Domain = 5,
    /// File could not be read, written or parsed.
    Io = 6,
    /// A computation produced a non-finite value.
    Numerical = 7,
    /// An internal panic was caught.
    Panic = 8,
    /// A string argument was not valid UTF-8.
    Utf8 = 9,
}

impl From<&Error> for AsmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Sizing { .. }
            | Error::Overlap(_)
            | Error::MeanOutOfRange(_) => Self::Config,
            Error::Dimension { .. } => Self::Dimension,
            Error::Inhibited | Error::NoAssemblies => Self::State,
            Error::Domain(_) => Self::Domain,
            Error::Io(_) | Error::Format(_) => Self::Io,
            Error::Numerical(_) => Self::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(message).expect("NUL bytes removed"));
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (AsmStatus, String)>) -> AsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AsmStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            AsmStatus::Panic
        }
    }
}

fn fail(e: Error) -> (AsmStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (AsmStatus, String) {
    (AsmStatus::NullPointer, format!("{what} is null"))
}

fn state(message: &str) -> (AsmStatus, String) {
    (AsmStatus::State, message.into())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (AsmStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (AsmStatus::Utf8, format!("{what}: {e}")))
}

unsafe fn slice<'a, T>(
    data: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (AsmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Opaque model handle: one learning area, its sensory fiber and, once
/// trained, one assembly per class.
pub struct AsmModel {
    /// `None` only after a training call failed part-way.
    model: Option<TrainedModel>,
}

impl AsmModel {
    fn get(&self) -> Result<&TrainedModel, (AsmStatus, String)> {
        self.model
            .as_ref()
            .ok_or_else(|| state("model was lost by a failed training call"))
    }

    fn trained(&self) -> Result<&TrainedModel, (AsmStatus, String)> {
        let m = self.get()?;
        if m.assemblies.is_empty() {
            return Err(state("model has not been trained"));
        }
        Ok(m)
    }

    fn train(
        &mut self,
        sources: &[&dyn StimulusSource],
        samples_per_class: usize,
        homeostasis: bool,
    ) -> Result<(), (AsmStatus, String)> {
        if !self.get()?.assemblies.is_empty() {
            return Err(state("model is already trained"));
        }
        let brain = self.model.take().expect("checked above").brain;
        let mut train = TrainConfig::new(samples_per_class, brain.config.beta);
        train.homeostasis_between_classes = homeostasis;
        let mut rng = make_rng(brain.config.seed, "stimuli");
        let model = train_classes(brain, sources, &train, &mut rng).map_err(fail)?;
        self.model = Some(model);
        Ok(())
    }
}

fn untrained(brain: Brain) -> TrainedModel {
    TrainedModel {
        brain,
        assemblies: Vec::new(),
        traces: Vec::new(),
    }
}

unsafe fn model_ref<'a>(model: *const AsmModel) -> Result<&'a AsmModel, (AsmStatus, String)> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn model_mut<'a>(model: *mut AsmModel) -> Result<&'a mut AsmModel, (AsmStatus, String)> {
    model.as_mut().ok_or_else(|| null("model"))
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn asm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an untrained model with `n` neurons, cap size `k`, edge
/// probability `p` and plasticity `beta`. `n_sensory` is the sensory input
/// length; pass 0 to use `n`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn asm_model_new(
    n: usize,
    k: usize,
    p: f64,
    beta: f64,
    seed: u64,
    n_sensory: usize,
    out: *mut *mut AsmModel,
) -> AsmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config = ModelConfig::new(n, k, p, beta, seed).map_err(fail)?;
        let sensory = if n_sensory == 0 { n } else { n_sensory };
        let brain = Brain::with_sensory(config, sensory).map_err(fail)?;
        *out = Box::into_raw(Box::new(AsmModel {
            model: Some(untrained(brain)),
        }));
        Ok(())
    })
}

/// Releases a model. Null is accepted and ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asm_model_free(model: *mut AsmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Learning-area size `n`, or 0 for a null or unusable handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asm_model_n(model: *const AsmModel) -> usize {
    model
        .as_ref()
        .and_then(|m| m.model.as_ref())
        .map_or(0, |m| m.brain.config.n)
}

/// Length of the sensory input vectors, or 0 for a null or unusable handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asm_model_n_sensory(model: *const AsmModel) -> usize {
    model
        .as_ref()
        .and_then(|m| m.model.as_ref())
        .map_or(0, |m| m.brain.n_sensory())
}

/// Cap size `k`, or 0 for a null or unusable handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asm_model_k(model: *const AsmModel) -> usize {
    model
        .as_ref()
        .and_then(|m| m.model.as_ref())
        .map_or(0, |m| m.k())
}

/// Number of learned assemblies (0 before training).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asm_model_num_classes(model: *const AsmModel) -> usize {
    model
        .as_ref()
        .and_then(|m| m.model.as_ref())
        .map_or(0, |m| m.assemblies.len())
}

/// Trains one assembly per class on caller-supplied samples.
///
/// `samples` holds `classes * samples_per_class` vectors of length
/// `asm_model_n_sensory`, class-major: sample `s` of class `c` starts at
/// `(c * samples_per_class + s) * n_sensory`. A model can be trained once.
///
/// # Safety
/// `model` must be a live handle and `samples` must point to `samples_len`
/// readable doubles.
#[no_mangle]
pub unsafe extern "C" fn asm_model_train(
    model: *mut AsmModel,
    samples: *const f64,
    samples_len: usize,
    classes: usize,
    samples_per_class: usize,
    homeostasis: bool,
) -> AsmStatus {
    guard(|| {
        let handle = model_mut(model)?;
        let n = handle.get()?.brain.n_sensory();
        let expected = classes * samples_per_class * n;
        if classes == 0 || samples_per_class == 0 {
            return Err(fail(Error::Config(
                "classes and samples_per_class must be positive".into(),
            )));
        }
        if samples_len != expected {
            return Err(fail(Error::Dimension {
                what: "sample buffer",
                expected,
                got: samples_len,
            }));
        }
        let data = slice(samples, samples_len, "samples")?;
        let sequences = data
            .chunks(samples_per_class * n)
            .map(|class| FixedSequence::new(class.chunks(n).map(<[f64]>::to_vec).collect()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        let sources: Vec<&dyn StimulusSource> =
            sequences.iter().map(|s| s as &dyn StimulusSource).collect();
        handle.train(&sources, samples_per_class, homeostasis)
    })
}

/// Draws `classes` random stimulus classes (core size `k`, on-core firing
/// probability `r`, off-core `q`) from the model seed and trains on them.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn asm_model_train_stimulus(
    model: *mut AsmModel,
    classes: usize,
    r: f64,
    q: f64,
    samples_per_class: usize,
    homeostasis: bool,
) -> AsmStatus {
    guard(|| {
        let handle = model_mut(model)?;
        let m = handle.get()?;
        let (n, k, seed) = (m.brain.n_sensory(), m.k(), m.brain.config.seed);
        if classes == 0 {
            return Err(fail(Error::Config("at least one class is required".into())));
        }
        let mut rng = make_rng(seed, "ffi-classes");
        let stimuli = (0..classes)
            .map(|_| make_stimulus_class(k, n, r, q, &mut rng))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        let sources: Vec<&dyn StimulusSource> =
            stimuli.iter().map(|s| s as &dyn StimulusSource).collect();
        handle.train(&sources, samples_per_class, homeostasis)
    })
}

/// Classifies `x` by the assembly with the largest overlap with the evoked
/// cap. `overlaps`, if not null, receives one count per class and must hold
/// `overlaps_len >= asm_model_num_classes` entries.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `x_len` doubles, `label`
/// must be writable and `overlaps` null or writable for `overlaps_len` entries.
#[no_mangle]
pub unsafe extern "C" fn asm_model_classify(
    model: *const AsmModel,
    x: *const f64,
    x_len: usize,
    label: *mut usize,
    overlaps: *mut usize,
    overlaps_len: usize,
) -> AsmStatus {
    guard(|| {
        let m = model_ref(model)?.trained()?;
        if label.is_null() {
            return Err(null("label"));
        }
        let x = slice(x, x_len, "x")?;
        let prediction = m.classify_overlap(x).map_err(fail)?;
        if !overlaps.is_null() {
            if overlaps_len < prediction.overlaps.len() {
                return Err(fail(Error::Dimension {
                    what: "overlap buffer",
                    expected: prediction.overlaps.len(),
                    got: overlaps_len,
                }));
            }
            ptr::copy_nonoverlapping(
                prediction.overlaps.as_ptr(),
                overlaps,
                prediction.overlaps.len(),
            );
        }
        *label = prediction.label;
        Ok(())
    })
}

/// Writes the `k` neurons (ascending) that fire when `x` is presented from
/// rest.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `x_len` doubles and
/// `cap` must be writable for `cap_len` entries.
#[no_mangle]
pub unsafe extern "C" fn asm_model_response(
    model: *const AsmModel,
    x: *const f64,
    x_len: usize,
    cap: *mut u32,
    cap_len: usize,
) -> AsmStatus {
    guard(|| {
        let m = model_ref(model)?.get()?;
        let x = slice(x, x_len, "x")?;
        let fired = m.response(x).map_err(fail)?;
        write_indices(&fired, cap, cap_len, "cap buffer")
    })
}

/// Copies the learned assembly of `label` (ascending neuron indices, `k` of
/// them) into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` writable for `out_len` entries.
#[no_mangle]
pub unsafe extern "C" fn asm_model_assembly(
    model: *const AsmModel,
    label: usize,
    out: *mut u32,
    out_len: usize,
) -> AsmStatus {
    guard(|| {
        let m = model_ref(model)?.trained()?;
        let a = m.assemblies.get(label).ok_or_else(|| {
            fail(Error::Config(format!(
                "label {label} out of range 0..{}",
                m.assemblies.len()
            )))
        })?;
        write_indices(&a.core_estimate, out, out_len, "assembly buffer")
    })
}

unsafe fn write_indices(
    src: &[u32],
    out: *mut u32,
    len: usize,
    what: &'static str,
) -> Result<(), (AsmStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    if len < src.len() {
        return Err(fail(Error::Dimension {
            what,
            expected: src.len(),
            got: len,
        }));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Saves a trained model to `path`.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn asm_model_save(model: *const AsmModel, path: *const c_char) -> AsmStatus {
    guard(|| {
        let m = model_ref(model)?.trained()?;
        let path = read_str(path, "path")?;
        save_model(&PathBuf::from(path), m).map_err(fail)
    })
}

/// Loads a model written by [`asm_model_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asm_model_load(path: *const c_char, out: *mut *mut AsmModel) -> AsmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let model = load_model(&PathBuf::from(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(AsmModel { model: Some(model) }));
        Ok(())
    })
}

/// Parameters of [`asm_bounds`]. Set `gamma` to NaN when no measured weight
/// is available.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsmBoundInputs {
    pub n: f64,
    pub k: f64,
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
}

/// Closed-form bounds. Unavailable values are NaN; `rounds_to_recall_weight`
/// is -1 when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsmBounds {
    pub beta0: f64,
    pub beta0_full: f64,
    pub support_bound: f64,
    pub recall_defect_bound: f64,
    pub gamma_recall_min: f64,
    pub gamma_multi_max: f64,
    pub classify_defect_bound: f64,
    pub classify_defect_bound_measured: f64,
    pub halfspace_margin_req: f64,
    pub halfspace_margin_met: bool,
    pub rounds_to_recall_weight: i64,
}

/// Evaluates every bound at `inputs`.
///
/// # Safety
/// `inputs` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asm_bounds(
    inputs: *const AsmBoundInputs,
    out: *mut AsmBounds,
) -> AsmStatus {
    guard(|| {
        let i = *inputs.as_ref().ok_or_else(|| null("inputs"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = BoundReport::compute(BoundInputs {
            n: i.n,
            k: i.k,
            p: i.p,
            r: i.r,
            q: i.q,
            alpha: i.alpha,
            gamma: (!i.gamma.is_nan()).then_some(i.gamma),
            delta: i.delta,
            beta: i.beta,
        })
        .map_err(fail)?;
        *out = AsmBounds {
            beta0: report.beta0.value,
            beta0_full: report.beta0_full.value,
            support_bound: report.support_bound.value,
            recall_defect_bound: report.recall_defect_bound.value,
            gamma_recall_min: report.gamma_recall_min.value,
            gamma_multi_max: report.gamma_multi_max.map_or(f64::NAN, |b| b.value),
            classify_defect_bound: report.classify_defect_bound.value,
            classify_defect_bound_measured: report
                .classify_defect_bound_measured
                .map_or(f64::NAN, |b| b.value),
            halfspace_margin_req: report.halfspace_margin_req.value,
            halfspace_margin_met: report.halfspace_margin_met,
            rounds_to_recall_weight: report
                .rounds_to_recall_weight
                .and_then(|r| i64::try_from(r).ok())
                .unwrap_or(-1),
        };
        Ok(())
    })
}

/// Runs the experiment described by a TOML config, writes its result files
/// into `out_dir` (if not null) and stores the mean accuracy in
/// `mean_accuracy` (if not null). For sweeps the mean is over every grid
/// point; for MNIST runs it is the best test accuracy.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out_dir` null or
/// NUL-terminated; `mean_accuracy` null or writable.
#[no_mangle]
pub unsafe extern "C" fn asm_run_experiment(
    config_toml: *const c_char,
    out_dir: *const c_char,
    mean_accuracy: *mut f64,
) -> AsmStatus {
    guard(|| {
        let config =
            ExperimentConfig::from_toml(read_str(config_toml, "config_toml")?).map_err(fail)?;
        let out_dir = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(read_str(out_dir, "out_dir")?))
        };
        let result = run_experiment(&config).map_err(fail)?;
        if let Some(dir) = out_dir {
            emit(&config, &result, &dir).map_err(fail)?;
        }
        if !mean_accuracy.is_null() {
            *mean_accuracy = headline(&result);
        }
        Ok(())
    })
}

fn headline(result: &ExperimentResult) -> f64 {
    match result {
        ExperimentResult::Trials { summary, .. } => summary.mean,
        ExperimentResult::Sweep(points) => {
            let means: Vec<f64> = points
                .iter()
                .map(|p| p.summary.mean)
                .filter(|m| m.is_finite())
                .collect();
            if means.is_empty() {
                f64::NAN
            } else {
                means.iter().sum::<f64>() / means.len() as f64
            }
        }
        ExperimentResult::Mnist(report) => report
            .results
            .iter()
            .map(|r| r.test_accuracy)
            .fold(f64::NAN, f64::max),
    }
}
