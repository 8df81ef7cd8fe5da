//! `coughpoc`: corpus synthesis, batch analysis, training, evaluation and
//! serving from the command line.
//!
//! Exit codes: 0 success, 1 invalid input (bad flags, missing or malformed
//! files), 2 runtime failure.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use coughpoc_core::classifier::{
    gradient_check, CnnConfig, CnnModel, GradientCheck, Metrics, MlpModel, ModelBundle, TrainConfig, DEFAULT_HIDDEN,
};
use coughpoc_core::detect::{DetectorConfig, SegmentReport};
use coughpoc_core::dsp::load_wav;
use coughpoc_core::features::{feature_names, write_feature_csv, DatasetManifest, SensorRecord, FUSED_LEN};
use coughpoc_core::pipeline::{
    analyze_clip, diagnose, evaluate_manifest, held_out, train_from_manifest, ArchChoice, Diagnosis,
};
use coughpoc_core::synth::{synth_corpus, ClassProfile};
use coughpoc_service::{serve, ServeOptions, ServiceConfig, ServiceError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub const MLP_GRADCHECK_TOL: f64 = 1e-4;
pub const CNN_GRADCHECK_TOL: f64 = 1e-3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "coughpoc", version, about = "Point-of-care cough analysis toolkit")]
pub struct Cli {
    /// Seed for every random choice (split, initialization, synthesis).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Write a labelled synthetic corpus with ground truth.
    Synth(SynthArgs),
    /// Detect and describe the coughs in one WAV file.
    Analyze(AnalyzeArgs),
    /// Split a manifest, train a model and report held-out metrics.
    Train(TrainArgs),
    /// Score a model on the held-out part of a manifest.
    Eval(EvalArgs),
    /// Compare backprop gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Run the ingestion and report service.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Pink-noise SNR relative to in-cough power; `inf` for clean clips.
    #[arg(long, default_value_t = 10.0)]
    pub snr_db: f64,
    /// JSON array of class profiles replacing the built-in three.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    pub wav: PathBuf,
    /// Also diagnose with this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub temp_c: Option<f64>,
    #[arg(long)]
    pub airflow_peak_lps: Option<f64>,
    #[arg(long)]
    pub airflow_volume_l: Option<f64>,
    /// Write per-cough features as CSV.
    #[arg(long)]
    pub features_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Mlp,
    Cnn,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Arch::Mlp)]
    pub arch: Arch,
    /// MLP hidden layer widths.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN)]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().l2)]
    pub l2: f64,
    #[arg(long, default_value_t = TrainConfig::default().train_fraction)]
    pub train_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    /// Random examples in the checked batch.
    #[arg(long, default_value_t = 4)]
    pub examples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, env = "COUGHPOC_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    #[arg(long, env = "COUGHPOC_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "COUGHPOC_STORE")]
    pub store: PathBuf,
    #[arg(long, env = "COUGHPOC_MAX_CLIP_SECONDS", default_value_t = 60.0)]
    pub max_clip_seconds: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] coughpoc_core::Error),

    #[error(transparent)]
    Service(#[from] ServiceError),

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("gradient check failed: {0}")]
    GradientCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let invalid = match self {
            CliError::Core(e) => core_is_invalid(e),
            CliError::Service(ServiceError::Core(e)) => core_is_invalid(e),
            CliError::Service(_) => false,
            CliError::Invalid(_) => true,
            CliError::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            CliError::GradientCheck(_) => false,
        };
        if invalid {
            1
        } else {
            2
        }
    }
}

fn core_is_invalid(e: &coughpoc_core::Error) -> bool {
    match e {
        coughpoc_core::Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
        other => other.is_validation(),
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<()> {
    eprintln!("config: {}", serde_json::to_string(cli).expect("config serializes"));
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::Synth(args) => synth(cli, args, &mut out),
        Command::Analyze(args) => analyze(cli, args, &mut out),
        Command::Train(args) => train(cli, args, &mut out),
        Command::Eval(args) => eval(cli, args, &mut out),
        Command::Gradcheck(args) => gradcheck(cli, args, &mut out),
        Command::Serve(args) => serve_cmd(args),
    }
}

fn emit(out: &mut impl Write, text: &str) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn load_profiles(path: &Path) -> CliResult<Vec<ClassProfile>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let profiles: Vec<ClassProfile> =
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}

#[derive(Debug, Serialize)]
struct SynthOutput<'a> {
    out: &'a Path,
    clips: usize,
    per_class: Vec<(String, usize)>,
    coughs: usize,
}

fn synth(cli: &Cli, args: &SynthArgs, out: &mut impl Write) -> CliResult<()> {
    let profiles = match &args.profiles {
        Some(p) => load_profiles(p)?,
        None => ClassProfile::defaults(),
    };
    let summary = synth_corpus(&profiles, args.n, args.snr_db, cli.seed, &args.out)?;
    let per_class = summary
        .manifest
        .classes
        .iter()
        .map(|c| {
            let n = summary.manifest.entries.iter().filter(|e| &e.label == c).count();
            (c.clone(), n)
        })
        .collect();
    let report = SynthOutput {
        out: &args.out,
        clips: summary.manifest.len(),
        per_class,
        coughs: summary.truth.iter().map(|t| t.coughs.len()).sum(),
    };
    if cli.json {
        emit(out, &to_json(&report))
    } else {
        let mut text = format!(
            "wrote {} clips ({} coughs) to {}",
            report.clips,
            report.coughs,
            args.out.display()
        );
        for (class, n) in &report.per_class {
            text.push_str(&format!("\n  {class:<12} {n}"));
        }
        emit(out, &text)
    }
}

#[derive(Debug, Serialize)]
pub struct AnalyzeOutput {
    pub file: PathBuf,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub segments: Vec<SegmentReport>,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<DiagnosisOutput>,
}

#[derive(Debug, Serialize)]
pub struct DiagnosisOutput {
    pub model_version: String,
    pub diagnosis: String,
    pub memberships: Vec<(String, f64)>,
}

fn analyze(cli: &Cli, args: &AnalyzeArgs, out: &mut impl Write) -> CliResult<()> {
    let sensor = SensorRecord {
        body_temp_c: args.temp_c,
        airflow_peak_lps: args.airflow_peak_lps,
        airflow_volume_l: args.airflow_volume_l,
    };
    sensor.validate()?;
    let bundle = args.model.as_ref().map(ModelBundle::load).transpose()?;
    let clip = load_wav(&args.wav)?;
    let analysis = analyze_clip(&clip, &DetectorConfig::default())?;
    let features: Vec<Vec<f64>> = analysis.features.iter().map(|f| f.to_vec()).collect();
    if let Some(path) = &args.features_csv {
        let file = std::fs::File::create(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        write_feature_csv(file, &feature_names(), &features)?;
    }
    let diagnosis = match &bundle {
        Some(b) => diagnose(b, &analysis, &sensor)?.map(|d: Diagnosis| DiagnosisOutput {
            model_version: b.version(),
            diagnosis: d.diagnosis,
            memberships: b.classes.iter().cloned().zip(d.memberships.0).collect(),
        }),
        None => None,
    };
    let report = AnalyzeOutput {
        file: args.wav.clone(),
        sample_rate_hz: clip.sample_rate_hz(),
        duration_s: clip.duration_secs(),
        segments: analysis.reports(),
        feature_names: feature_names(),
        features,
        diagnosis,
    };
    if cli.json || report.segments.is_empty() {
        return emit(out, &to_json(&report));
    }
    let mut text = format!(
        "{}: {:.2} s, {} cough(s)",
        report.file.display(),
        report.duration_s,
        report.segments.len()
    );
    for (i, seg) in report.segments.iter().enumerate() {
        text.push_str(&format!(
            "\n  #{i} {:>8.1}-{:<8.1} ms  {:?}",
            seg.start_ms, seg.end_ms, seg.pattern
        ));
        if let Some(wd) = &seg.wet_dry {
            text.push_str(&format!("  {}", serde_json::to_string(wd).expect("serializes")));
        }
        for p in &seg.phases {
            text.push_str(&format!(
                "\n      {:<12} {:>8.1}-{:<8.1} ms",
                p.name, p.start_ms, p.end_ms
            ));
        }
    }
    if let Some(d) = &report.diagnosis {
        text.push_str(&format!("\ndiagnosis {} (model {})", d.diagnosis, d.model_version));
        for (class, m) in &d.memberships {
            text.push_str(&format!("\n  {class:<12} {m:.4}"));
        }
    }
    text.push_str("\n(use --json for the feature vectors)");
    emit(out, &text)
}

#[derive(Debug, Serialize)]
struct TrainOutput {
    model: PathBuf,
    model_version: String,
    train_rows: usize,
    test_rows: usize,
    initial_loss: f64,
    final_loss: f64,
    final_learning_rate: f64,
    metrics: Metrics,
}

fn train(cli: &Cli, args: &TrainArgs, out: &mut impl Write) -> CliResult<()> {
    let manifest = DatasetManifest::load(&args.manifest, None)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: cli.seed,
        train_fraction: args.train_fraction,
        l2: args.l2,
    };
    let arch = match args.arch {
        Arch::Mlp => ArchChoice::Mlp {
            hidden: args.hidden.clone(),
        },
        Arch::Cnn => ArchChoice::Cnn,
    };
    let outcome = train_from_manifest(&manifest, &arch, &config, &DetectorConfig::default())?;
    outcome.bundle.save(&args.out)?;
    let report = TrainOutput {
        model: args.out.clone(),
        model_version: outcome.bundle.version(),
        train_rows: outcome.train_rows,
        test_rows: outcome.test_rows,
        initial_loss: outcome.report.initial_loss(),
        final_loss: outcome.report.final_loss(),
        final_learning_rate: outcome.report.final_learning_rate,
        metrics: outcome.metrics,
    };
    if cli.json {
        emit(out, &to_json(&report))
    } else {
        emit(
            out,
            &format!(
                "saved {} to {}\nrows: {} train, {} test; loss {:.5} -> {:.5}\n{}",
                report.model_version,
                report.model.display(),
                report.train_rows,
                report.test_rows,
                report.initial_loss,
                report.final_loss,
                report.metrics.to_table()
            ),
        )
    }
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    model_version: String,
    entries: usize,
    metrics: Metrics,
}

fn eval(cli: &Cli, args: &EvalArgs, out: &mut impl Write) -> CliResult<()> {
    let bundle = ModelBundle::load(&args.model)?;
    let manifest = DatasetManifest::load(&args.manifest, Some(bundle.classes.clone()))?;
    let test = held_out(&bundle, &manifest)?;
    let metrics = evaluate_manifest(&bundle, &test, &DetectorConfig::default())?;
    let report = EvalOutput {
        model_version: bundle.version(),
        entries: test.len(),
        metrics,
    };
    if cli.json {
        emit(out, &to_json(&report))
    } else {
        emit(
            out,
            &format!(
                "{} on {} held-out entries\n{}",
                report.model_version,
                report.entries,
                report.metrics.to_table()
            ),
        )
    }
}

#[derive(Debug, Serialize)]
struct GradcheckOutput {
    arch: Arch,
    tolerance: f64,
    passed: bool,
    #[serde(flatten)]
    check: GradientCheck,
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let inputs = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|i| i % classes).collect();
    (inputs, labels)
}

fn gradcheck(cli: &Cli, args: &GradcheckArgs, out: &mut impl Write) -> CliResult<()> {
    if args.examples == 0 {
        return Err(CliError::Invalid("--examples must be >= 1".into()));
    }
    let archs = match args.arch {
        Some(a) => vec![a],
        None => vec![Arch::Mlp, Arch::Cnn],
    };
    let l2 = TrainConfig::default().l2;
    let mut results = Vec::new();
    for arch in archs {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        let (check, tolerance) = match arch {
            Arch::Mlp => {
                let mut sizes = vec![FUSED_LEN];
                sizes.extend(DEFAULT_HIDDEN);
                sizes.push(3);
                let mut net = MlpModel::new(&sizes, &mut rng)?;
                let (x, y) = random_batch(&mut rng, args.examples, FUSED_LEN, 3);
                (gradient_check(&mut net, &x, &y, l2, cli.seed)?, MLP_GRADCHECK_TOL)
            }
            Arch::Cnn => {
                let config = CnnConfig::new(3);
                let mut net = CnnModel::new(config.clone(), &mut rng)?;
                let (x, y) = random_batch(&mut rng, args.examples, config.input_len(), 3);
                (gradient_check(&mut net, &x, &y, l2, cli.seed)?, CNN_GRADCHECK_TOL)
            }
        };
        results.push(GradcheckOutput {
            arch,
            tolerance,
            passed: check.max_relative_error < tolerance,
            check,
        });
    }
    if cli.json {
        emit(out, &to_json(&results))?;
    } else {
        for r in &results {
            emit(
                out,
                &format!(
                    "{:?}: max relative error {:.3e} over {} params (worst #{}), tolerance {:.0e}: {}",
                    r.arch,
                    r.check.max_relative_error,
                    r.check.checked_params,
                    r.check.worst_param,
                    r.tolerance,
                    if r.passed { "ok" } else { "FAILED" }
                ),
            )?;
        }
    }
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(CliError::GradientCheck(format!(
            "{:?} error {:.3e} >= {:.0e}",
            r.arch, r.check.max_relative_error, r.tolerance
        ))),
        None => Ok(()),
    }
}

fn serve_cmd(args: &ServeArgs) -> CliResult<()> {
    if args.max_clip_seconds.is_nan() || args.max_clip_seconds <= 0.0 {
        return Err(CliError::Invalid("--max-clip-seconds must be > 0".into()));
    }
    let options = ServeOptions {
        listen: args.listen,
        model: args.model.clone(),
        store: args.store.clone(),
        config: ServiceConfig {
            max_clip_seconds: args.max_clip_seconds,
            ..ServiceConfig::default()
        },
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    runtime.block_on(serve(options))?;
    Ok(())
}
