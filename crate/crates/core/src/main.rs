use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lssvm_rmt::config::ExperimentConfig;
use lssvm_rmt::dataio::{self, Scaling, SignalPower};
use lssvm_rmt::experiments::{self, Sizes, DEFAULT_HISTOGRAM_TRIALS, DEFAULT_SWEEP_TRIALS};
use lssvm_rmt::mixture::growth_diagnostics;
use lssvm_rmt::theory::{self, ThresholdRule};
use lssvm_rmt::{Error, KernelProfile, LabelConvention, Result};

#[derive(Parser)]
#[command(name = "lssvm-rmt", version, about = "LS-SVM training and large-dimensional error prediction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials; overrides the config file.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Threshold rule; overrides the config file.
    #[arg(long, global = true, value_enum)]
    threshold: Option<Rule>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Optimal,
    Zero,
    Bias,
}

impl From<Rule> for ThresholdRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Optimal => ThresholdRule::Optimal,
            Rule::Zero => ThresholdRule::Zero,
            Rule::Bias => ThresholdRule::Bias,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic statistics and error rates for a model config (JSON).
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical vs predicted error over the config's sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Include per-trial arrays in JSON output.
        #[arg(long)]
        full: bool,
    },
    /// Pooled decision scores per class with the predicted Gaussians.
    Histogram {
        #[arg(long)]
        config: PathBuf,
    },
    /// Median n|g - ghat| across the sizes of the config's convergence section.
    Convergence {
        #[arg(long)]
        config: PathBuf,
    },
    /// Consistent estimate of tau from a text file with one sample per line.
    EstimateTau {
        #[arg(long)]
        data: PathBuf,
    },
    /// Empirical MNIST moments, discrepancy statistics, prediction and LS-SVM error.
    MnistStats(MnistArgs),
}

#[derive(Args)]
struct MnistArgs {
    /// Directory holding train-images-idx3-ubyte and train-labels-idx1-ubyte.
    #[arg(long)]
    mnist_dir: PathBuf,
    #[arg(long, default_value_t = 8)]
    digit_a: u8,
    #[arg(long, default_value_t = 9)]
    digit_b: u8,
    /// unit, zscore or trace.
    #[arg(long, default_value = "trace")]
    scaling: Scaling,
    /// Add white noise at this SNR (dB) before rescaling.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Signal power for the noise level: mean_square or variance.
    #[arg(long, default_value = "mean_square")]
    power: SignalPower,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 256)]
    n_test: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

fn load_config(path: &Path, global: &Global) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        config.experiment.seed = seed;
    }
    if let Some(trials) = global.trials {
        config.experiment.trials = Some(trials);
    }
    if let Some(rule) = global.threshold {
        config.experiment.threshold = rule.into();
    }
    Ok(config)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn run(cli: Cli) -> Result<String> {
    let g = &cli.global;
    match cli.command {
        Command::Predict { config } => {
            let config = load_config(&config, g)?;
            let setup = experiments::point_setup(&config, None, f64::NAN)?;
            let growth = growth_diagnostics(&setup.model, setup.sizes.n())?;
            let mut value = serde_json::to_value(&setup.prediction).expect("prediction serializes");
            value["growth"] = serde_json::to_value(growth).expect("report serializes");
            Ok(to_json(&value))
        }
        Command::Sweep { config, full } => {
            let config = load_config(&config, g)?;
            let result = experiments::run_sweep(&config)?;
            Ok(match g.format {
                Format::Csv => result.to_csv(),
                Format::Json => result.to_json(full) + "\n",
            })
        }
        Command::Histogram { config } => {
            let config = load_config(&config, g)?;
            let e = &config.experiment;
            let model = config.build_model()?;
            let n = e.training_size(model.dim())?;
            let profile = config.kernel.resolve(model.tau())?;
            let trials = e.trials.unwrap_or(DEFAULT_HISTOGRAM_TRIALS);
            let h = experiments::run_histogram(&model, n, e.gamma, &profile, e.convention, e.n_test, trials, e.seed)?;
            Ok(match g.format {
                Format::Json => to_json(&h),
                Format::Csv => {
                    let mut out = String::from("class,score,mean,var\n");
                    for (c, scores) in h.scores.iter().enumerate() {
                        let (mean, var) = if c == 0 { (h.stats.e1, h.stats.var1) } else { (h.stats.e2, h.stats.var2) };
                        for s in scores {
                            out.push_str(&format!("{},{s},{mean},{var}\n", c + 1));
                        }
                    }
                    out
                }
            })
        }
        Command::Convergence { config } => {
            let config = load_config(&config, g)?;
            let spec = config
                .convergence
                .clone()
                .ok_or_else(|| Error::Config("config has no [convergence] section".into()))?;
            let trials = config.experiment.trials.unwrap_or(DEFAULT_SWEEP_TRIALS);
            let rows = experiments::run_convergence(
                |p| config.model.build_at(p, &config.base_dir),
                config.experiment.gamma,
                &config.kernel,
                &spec.sizes,
                trials,
                spec.test_points,
                config.experiment.seed,
            )?;
            Ok(match g.format {
                Format::Json => to_json(&rows),
                Format::Csv => {
                    let mut out = String::from("n,p,median,samples,failures\n");
                    for r in &rows {
                        out.push_str(&format!("{},{},{},{},{}\n", r.n, r.p, r.median, r.samples, r.failures.len()));
                    }
                    out
                }
            })
        }
        Command::EstimateTau { data } => {
            // Rows of the file are samples; the estimator wants columns.
            let rows = read_samples(&data)?;
            let tau = theory::estimate_tau(&rows.transpose())?;
            Ok(match g.format {
                Format::Json => to_json(&json!({ "tau": tau, "n": rows.nrows(), "p": rows.ncols() })),
                Format::Csv => format!("tau,n,p\n{tau},{},{}\n", rows.nrows(), rows.ncols()),
            })
        }
        Command::MnistStats(args) => mnist_stats(&args, g),
    }
}

/// Whitespace or comma separated numbers, one sample per line.
fn read_samples(path: &Path) -> Result<nalgebra::DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::Config(format!("{}: bad number {s:?}", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::Config(format!("{}: rows must be nonempty and of equal length", path.display())));
    }
    Ok(nalgebra::DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

fn mnist_stats(args: &MnistArgs, g: &Global) -> Result<String> {
    let (a, b) = (args.digit_a, args.digit_b);
    let raw = dataio::load_mnist_train_digits(&args.mnist_dir, &[a, b])?;
    let seed = g.seed.unwrap_or(0);
    let data = match args.snr_db {
        Some(snr) => {
            let base = raw.apply_scaling(args.scaling, a, b)?;
            let noisy = dataio::add_white_noise(&base, snr, lssvm_rmt::seed::mix64(seed, 2), args.power)?;
            noisy.apply_scaling(args.scaling, a, b)?
        }
        None => raw.apply_scaling(args.scaling, a, b)?,
    };
    let full = dataio::class_stats(&data, a, b)?;
    let discrepancy = dataio::discrepancy_stats(&full);
    let counts = [data.digit(a)?.ncols(), data.digit(b)?.ncols()];

    let sizes = Sizes::new(args.n, args.n_test, 0.5)?;
    let model = full.with_counts(sizes.n1, sizes.n2)?;
    let profile = KernelProfile::gaussian(args.sigma2)?;
    let stats = theory::gaussian_stats(&model, sizes.n(), args.gamma, &profile, LabelConvention::Standard)?;
    let rule = g.threshold.map_or(ThresholdRule::Optimal, Into::into);
    let prediction = theory::predict(stats, rule)?;
    let trials = g.trials.unwrap_or(DEFAULT_SWEEP_TRIALS);
    let summary = experiments::run_pool_trials(
        &data.digit(a)?,
        &data.digit(b)?,
        sizes,
        args.gamma,
        &profile,
        LabelConvention::Standard,
        prediction.threshold,
        trials,
        seed,
    )?;
    let (emp_err, emp_se) = summary.mean_se();
    Ok(to_json(&json!({
        "digits": [a, b],
        "counts": counts,
        "scaling": data.scaling,
        "discrepancy": discrepancy,
        "prediction": prediction,
        "empirical": { "trials": summary.trials.len(), "emp_err": emp_err, "emp_se": emp_se, "failures": summary.failures },
    })))
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out_path = cli.global.out.clone();
    let text = match run(cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &out_path {
        Some(p) => std::fs::write(p, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
