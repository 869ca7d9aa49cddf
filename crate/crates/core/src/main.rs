use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use assemblies::analysis::{BoundInputs, BoundReport};
use assemblies::harness::experiment::config_from_output;
use assemblies::harness::format::{round_json, sig};
use assemblies::harness::{
    emit, run_experiment, ExperimentConfig, ExperimentKind, ExperimentResult, ExtractorKind,
    Summary, SweepParam, SweepSpec,
};
use assemblies::stimuli::mnist::PixelEncoding;
use assemblies::{Error, HomeostasisScope};

const DEFAULT_OUT: &str = "results";

/// Assembly-calculus learning experiments: bounds, synthetic classes,
/// parameter sweeps and MNIST feature extraction.
#[derive(Parser)]
#[command(name = "assemblies", version)]
struct Cli {
    /// TOML experiment config; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; every trial derives its own from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `results`; `bounds` writes only when given).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Independent trials per experiment or grid point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// No progress or timing messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form bounds at a parameter point.
    Bounds(BoundsArgs),
    /// Train and classify stimulus classes (two-class or four-class).
    TrainStimulus {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        stimulus: StimulusArgs,
    },
    /// Learn a linear threshold function and classify fresh samples.
    TrainHalfspace {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        halfspace: HalfspaceArgs,
    },
    /// Repeat an experiment over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        stimulus: StimulusArgs,
        #[command(flatten)]
        halfspace: HalfspaceArgs,
    },
    /// Extract MNIST features and fit a linear readout on each.
    Mnist(MnistArgs),
    /// Re-run the experiment whose config is embedded in an emitted file.
    Replay {
        /// A `.json`, `.jsonl` or `.csv` file written by an earlier run.
        file: PathBuf,
    },
}

#[derive(Args)]
struct BoundsArgs {
    /// Neurons per area.
    #[arg(long, default_value_t = 1000.0)]
    n: f64,
    /// Cap size.
    #[arg(long, default_value_t = 100.0)]
    k: f64,
    /// Edge probability.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Firing probability of a stimulus core neuron.
    #[arg(long, default_value_t = 0.9)]
    r: f64,
    /// Background rate; off-core neurons fire with probability qk/n.
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    /// Core overlap fraction between classes.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Measured average weight, for the measured classification bound.
    #[arg(long)]
    gamma: Option<f64>,
    /// Halfspace margin.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Plasticity.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
}

#[derive(Args)]
struct ModelArgs {
    /// Neurons per area.
    #[arg(long)]
    n: Option<usize>,
    /// Cap size.
    #[arg(long)]
    k: Option<usize>,
    /// Edge probability.
    #[arg(long)]
    p: Option<f64>,
    /// Plasticity (default 0.1, or 1.0 for halfspaces).
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Plastic steps per class.
    #[arg(long)]
    samples: Option<usize>,
    /// Fresh test samples per class.
    #[arg(long)]
    num_test: Option<usize>,
    /// Skip weight renormalization after each class.
    #[arg(long)]
    no_homeostasis: bool,
    /// `joint` or `per-source`.
    #[arg(long, value_parser = parse_scope)]
    homeostasis_scope: Option<HomeostasisScope>,
}

#[derive(Args)]
struct StimulusArgs {
    /// Number of stimulus classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Firing probability of a core neuron.
    #[arg(long)]
    r: Option<f64>,
    /// Background rate; off-core neurons fire with probability qk/n.
    #[arg(long)]
    q: Option<f64>,
    /// Core overlap fraction between class 0 and every other class.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct HalfspaceArgs {
    /// Margin between the two label distributions.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of nonzero coordinates of the hidden direction.
    #[arg(long)]
    support: Option<usize>,
    /// Firing fraction of the assembly that counts as a positive.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// Swept parameter: r, q, alpha, delta, support, n, k, p, beta or samples.
    #[arg(long, value_parser = parse_param)]
    param: Option<SweepParam>,
    /// Explicit grid, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to", "steps"])]
    values: Option<Vec<f64>>,
    /// First grid value.
    #[arg(long, requires_all = ["to", "steps"])]
    from: Option<f64>,
    /// Last grid value.
    #[arg(long, requires_all = ["from", "steps"])]
    to: Option<f64>,
    /// Number of evenly spaced grid values.
    #[arg(long, requires_all = ["from", "to"])]
    steps: Option<usize>,
    /// Experiment swept: stimulus, four-class or halfspace.
    #[arg(long, value_parser = parse_kind)]
    base: Option<ExperimentKind>,
    /// With `--param n`, sets k to this fraction of n at each point.
    #[arg(long)]
    k_fraction: Option<f64>,
}

#[derive(Args)]
struct MnistArgs {
    /// Extractor to evaluate; repeat for several (default: all).
    #[arg(long = "extractor", value_parser = parse_extractor)]
    extractors: Vec<ExtractorKind>,
    /// Feature count m.
    #[arg(long)]
    features: Option<usize>,
    /// Directory with the four IDX files (else $ASSEMBLIES_MNIST_DIR).
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Use only the first N training and N test images.
    #[arg(long)]
    limit: Option<usize>,
    /// `graded` or `binarized`.
    #[arg(long, value_parser = parse_encoding)]
    encoding: Option<PixelEncoding>,
    /// Edge probability inside the brain-area extractors.
    #[arg(long)]
    area_p: Option<f64>,
    /// Plasticity inside the brain-area extractors.
    #[arg(long)]
    area_beta: Option<f64>,
    /// Training images per class for the brain-area extractors.
    #[arg(long)]
    samples: Option<usize>,
    /// Large-area penalty, in multiples of the step's largest input.
    #[arg(long)]
    penalty_factor: Option<f64>,
    /// Readout training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Readout minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Readout learning rate.
    #[arg(long)]
    lr: Option<f64>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn parse_scope(s: &str) -> Result<HomeostasisScope, String> {
    match s {
        "joint" => Ok(HomeostasisScope::Joint),
        "per-source" => Ok(HomeostasisScope::PerSource),
        _ => Err("expected 'joint' or 'per-source'".into()),
    }
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    SweepParam::parse(s).map_err(|e| e.to_string())
}

fn parse_extractor(s: &str) -> Result<ExtractorKind, String> {
    ExtractorKind::parse(s).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown experiment kind '{s}'"))
}

fn parse_encoding(s: &str) -> Result<PixelEncoding, String> {
    match s {
        "graded" => Ok(PixelEncoding::Graded),
        "binarized" => Ok(PixelEncoding::Binarized),
        _ => Err("expected 'graded' or 'binarized'".into()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ModelArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        set(&mut c.model.n, self.n);
        set(&mut c.model.k, self.k);
        set(&mut c.model.p, self.p);
        if self.beta.is_some() {
            c.model.beta = self.beta;
        }
    }
}

impl TrainArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        set(&mut c.train.samples, self.samples);
        set(&mut c.num_test, self.num_test);
        if self.no_homeostasis {
            c.train.homeostasis = false;
        }
        set(&mut c.train.homeostasis_scope, self.homeostasis_scope);
    }
}

impl StimulusArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        set(&mut c.stimulus.classes, self.classes);
        set(&mut c.stimulus.r, self.r);
        set(&mut c.stimulus.q, self.q);
        if self.alpha.is_some() {
            c.stimulus.alpha = self.alpha;
        }
    }
}

impl HalfspaceArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        set(&mut c.halfspace.delta, self.delta);
        set(&mut c.halfspace.support, self.support);
        set(&mut c.halfspace.threshold, self.threshold);
    }
}

impl GridArgs {
    fn apply(self, c: &mut ExperimentConfig) -> assemblies::Result<()> {
        let grid = match (self.values, self.from, self.to, self.steps) {
            (Some(values), ..) => Some(values),
            (None, Some(from), Some(to), Some(steps)) => {
                Some(SweepSpec::linspace(SweepParam::R, from, to, steps)?.values)
            }
            _ => None,
        };
        let current = c.sweep.take();
        let mut sweep = match (current, self.param, grid) {
            (Some(mut s), param, grid) => {
                if let Some(p) = param {
                    if p != s.param && grid.is_none() {
                        return Err(config_err(format!(
                            "--param {} needs a new grid (--values or --from/--to/--steps)",
                            p.name()
                        )));
                    }
                    s.param = p;
                }
                set(&mut s.values, grid);
                s
            }
            (None, Some(param), Some(values)) => SweepSpec {
                param,
                values,
                ..default_grid()
            },
            (None, Some(param), None) => {
                return Err(config_err(format!(
                    "--param {} needs a grid (--values or --from/--to/--steps)",
                    param.name()
                )))
            }
            (None, None, Some(values)) => SweepSpec {
                values,
                ..default_grid()
            },
            (None, None, None) => default_grid(),
        };
        set(&mut sweep.base, self.base);
        if self.k_fraction.is_some() {
            sweep.k_fraction = self.k_fraction;
        }
        c.sweep = Some(sweep);
        Ok(())
    }
}

fn default_grid() -> SweepSpec {
    ExperimentConfig::preset(ExperimentKind::Sweep)
        .sweep
        .expect("sweep preset has a grid")
}

impl MnistArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        let m = c.mnist.get_or_insert_with(Default::default);
        if !self.extractors.is_empty() {
            m.extractors = self.extractors;
        }
        set(&mut m.features, self.features);
        if self.data_dir.is_some() {
            m.data_dir = self.data_dir;
        }
        if self.limit.is_some() {
            m.limit = self.limit;
        }
        set(&mut m.encoding, self.encoding);
        set(&mut m.p, self.area_p);
        set(&mut m.beta, self.area_beta);
        set(&mut m.samples, self.samples);
        set(&mut m.penalty_factor, self.penalty_factor);
        set(&mut m.readout.epochs, self.epochs);
        set(&mut m.readout.batch_size, self.batch_size);
        set(&mut m.readout.learning_rate, self.lr);
    }
}

/// Starting point for a subcommand: the `--config` file if given (which must
/// be one of `accepted`), otherwise the defaults for `accepted[0]`.
fn base_config(
    path: Option<&Path>,
    accepted: &[ExperimentKind],
    command: &str,
) -> assemblies::Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::defaults(accepted[0]));
    };
    let config = ExperimentConfig::parse_file(path)?;
    if !accepted.contains(&config.kind) {
        return Err(config_err(format!(
            "{} describes a '{}' experiment, which `{command}` does not run",
            path.display(),
            config.kind
        )));
    }
    Ok(config)
}

fn run(cli: Cli) -> assemblies::Result<()> {
    use ExperimentKind::*;
    let config_path = cli.config.as_deref();
    let mut config = match cli.command {
        Command::Bounds(args) => {
            if config_path.is_some() {
                return Err(config_err("`bounds` takes its parameters as flags only"));
            }
            return bounds(args, cli.out.as_deref());
        }
        Command::TrainStimulus {
            model,
            train,
            stimulus,
        } => {
            let mut c = base_config(config_path, &[Stimulus, FourClass], "train-stimulus")?;
            model.apply(&mut c);
            train.apply(&mut c);
            stimulus.apply(&mut c);
            c
        }
        Command::TrainHalfspace {
            model,
            train,
            halfspace,
        } => {
            let mut c = base_config(config_path, &[Halfspace], "train-halfspace")?;
            model.apply(&mut c);
            train.apply(&mut c);
            halfspace.apply(&mut c);
            c
        }
        Command::Sweep {
            grid,
            model,
            train,
            stimulus,
            halfspace,
        } => {
            let mut c = base_config(config_path, &[Sweep], "sweep")?;
            grid.apply(&mut c)?;
            model.apply(&mut c);
            train.apply(&mut c);
            stimulus.apply(&mut c);
            halfspace.apply(&mut c);
            c
        }
        Command::Mnist(args) => {
            let mut c = base_config(config_path, &[Mnist], "mnist")?;
            args.apply(&mut c);
            c
        }
        Command::Replay { file } => {
            if config_path.is_some() {
                return Err(config_err("`replay` reads its config from the result file"));
            }
            config_from_output(&file)?
        }
    };
    set(&mut config.seed, cli.seed);
    set(&mut config.trials, cli.trials);
    let config = config.resolve()?;

    let start = Instant::now();
    let result = run_experiment(&config)?;
    let elapsed = start.elapsed();
    report(&result);
    let out = cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let written = emit(&config, &result, &out)?;
    if !cli.quiet {
        for path in &written {
            eprintln!("wrote {}", path.display());
        }
        if let ExperimentResult::Mnist(r) = &result {
            for e in &r.results {
                eprintln!(
                    "{}: {} s",
                    e.extractor.name(),
                    sig(e.wall_time.as_secs_f64())
                );
            }
        }
        eprintln!("wall time {} s", sig(elapsed.as_secs_f64()));
    }
    Ok(())
}

fn bounds(args: BoundsArgs, out: Option<&Path>) -> assemblies::Result<()> {
    let report = BoundReport::compute(BoundInputs {
        n: args.n,
        k: args.k,
        p: args.p,
        r: args.r,
        q: args.q,
        alpha: args.alpha,
        gamma: args.gamma,
        delta: args.delta,
        beta: args.beta,
    })?;
    let mut value = serde_json::to_value(&report).expect("bound reports serialize");
    round_json(&mut value);
    let text = serde_json::to_string_pretty(&value).expect("JSON values serialize") + "\n";
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bounds.json"), text)?;
    }
    Ok(())
}

fn summary_line(s: &Summary) -> String {
    format!(
        "accuracy mean {} min {} max {} over {} trials ({} perfect, {} failed)",
        sig(s.mean),
        sig(s.min),
        sig(s.max),
        s.trials,
        s.perfect,
        s.failed
    )
}

fn report(result: &ExperimentResult) {
    match result {
        ExperimentResult::Trials { summary, .. } => println!("{}", summary_line(summary)),
        ExperimentResult::Sweep(points) => {
            for p in points {
                println!("{}: {}", sig(p.value), summary_line(&p.summary));
            }
        }
        ExperimentResult::Mnist(r) => {
            println!(
                "{} training and {} test images",
                r.train_examples, r.test_examples
            );
            for e in &r.results {
                println!(
                    "{}: {} features, train accuracy {}, test accuracy {}",
                    e.extractor.name(),
                    e.features,
                    sig(e.train_accuracy),
                    sig(e.test_accuracy)
                );
            }
        }
    }
}

/// 1 for problems with the requested configuration, 2 for failures while running.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Sizing { .. }
        | Error::MeanOutOfRange(_)
        | Error::Overlap(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
