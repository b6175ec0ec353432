//! `ddemph`: synthesis, analysis, experiments, corpora, the listening-test
//! server and response statistics.

mod config;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ddemph_core::acoustics::{CorrelateEvent, Profile};
use ddemph_core::analysis::{identify_emphasis, word_report, Alignment};
use ddemph_core::corpus::{generate_corpus_with, CorpusConfig};
use ddemph_core::duration::{DurationModel, DurationSequence, ALPHA_MAX, ALPHA_MIN};
use ddemph_core::evalstats::{render_table, summarize, TestType};
use ddemph_core::experiment::run_experiment;
use ddemph_core::melfile::write_mel;
use ddemph_core::phonology::{parse_utterance, Utterance};
use ddemph_core::pipeline::{synthesize, Mode, SynthesisConfig};
use ddemph_core::wav::{read_wav, write_wav};
use ddemph_service::ServeConfig;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ddemph", version, about = "Word emphasis by duration dilation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render one utterance to WAV, mel, alignment and correlate files.
    Synthesize(SynthesizeArgs),
    /// Per-word acoustic measurements, optionally with emphasis detection.
    Analyze(AnalyzeArgs),
    /// Render a corpus under several modes and score emphasis detection.
    Experiment(ExperimentArgs),
    /// Write a random utterance corpus.
    GenCorpus(GenCorpusArgs),
    /// Run the listening-test HTTP server.
    Serve(ServeArgs),
    /// Summarize exported listening-test responses.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct SynthesisFlags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prosody profile [default: expressive].
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Duration dilation factor in [1.0, 1.5] [default: 1.5, or 1.25 with --profile neutral].
    #[arg(long, value_parser = parse_alpha)]
    alpha_dd: Option<f64>,
    /// Hop stretch factor of mel emphasis in [1.0, 1.5] [default: 1.25].
    #[arg(long, value_parser = parse_alpha)]
    alpha_mel: Option<f64>,
    /// Magnitude gain of mel emphasis [default: 1.15].
    #[arg(long, value_parser = parse_positive)]
    v_mel: Option<f64>,
    /// Vocoder noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Duration model JSON [default: built-in class means].
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    /// Utterance JSON.
    utterance: PathBuf,
    /// Emphasis mode [default: none].
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Durations JSON replacing the model prediction.
    #[arg(long)]
    durations: Option<PathBuf>,
    /// Output directory for NAME.wav, NAME.mel, NAME.alignment.json and NAME.correlates.json.
    #[arg(long)]
    out: PathBuf,
    /// Output file stem [default: utterance file stem].
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    flags: SynthesisFlags,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// WAV to measure.
    #[arg(long)]
    wav: PathBuf,
    /// Alignment JSON for the WAV.
    #[arg(long)]
    alignment: PathBuf,
    /// Unemphasized rendering to detect emphasis against.
    #[arg(long, requires = "baseline_alignment")]
    baseline_wav: Option<PathBuf>,
    /// Alignment JSON for the baseline.
    #[arg(long, requires = "baseline_wav")]
    baseline_alignment: Option<PathBuf>,
    /// Report JSON path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Directory of utterance JSON files, read in file name order.
    #[arg(long)]
    corpus: PathBuf,
    /// Modes to render, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none,dd,mel")]
    modes: Vec<ModeArg>,
    /// Summary JSON path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write STEM.MODE.wav for every utterance and mode here.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// Leave per-trial rows out of the summary.
    #[arg(long)]
    summary_only: bool,
    #[command(flatten)]
    flags: SynthesisFlags,
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    /// Number of utterances.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = CorpusConfig::default().min_words)]
    min_words: usize,
    #[arg(long, default_value_t = CorpusConfig::default().max_words)]
    max_words: usize,
    /// Chance in percent that a word slot holds a content word.
    #[arg(long, default_value_t = CorpusConfig::default().content_percent)]
    content_percent: u32,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// JSON server configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Test plan JSON.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Append-only response log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Client assets served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Listen address [default: 127.0.0.1:8080].
    #[arg(long)]
    addr: Option<SocketAddr>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Response JSONL.
    input: PathBuf,
    #[arg(long, value_enum)]
    test_type: TestTypeArg,
    #[arg(long, value_enum, default_value = "json")]
    format: StatsFormat,
    /// Output path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    None,
    Dd,
    Mel,
    Flag,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::None => Mode::None,
            ModeArg::Dd => Mode::Dd,
            ModeArg::Mel => Mode::Mel,
            ModeArg::Flag => Mode::Flag,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Neutral,
    Expressive,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Profile {
        match p {
            ProfileArg::Neutral => Profile::Neutral,
            ProfileArg::Expressive => Profile::Expressive,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TestTypeArg {
    Mushra,
    Preference,
    Identify,
}

impl From<TestTypeArg> for TestType {
    fn from(t: TestTypeArg) -> TestType {
        match t {
            TestTypeArg::Mushra => TestType::Mushra,
            TestTypeArg::Preference => TestType::Preference,
            TestTypeArg::Identify => TestType::Identify,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatsFormat {
    Json,
    Table,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (ALPHA_MIN..=ALPHA_MAX).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [{ALPHA_MIN}, {ALPHA_MAX}]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

/// A bad invocation or configuration, as opposed to a failed run.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// Writes to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_utterance(path: &Path) -> anyhow::Result<Utterance> {
    parse_utterance(&read_text(path)?).with_context(|| format!("parsing utterance {}", path.display()))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "utterance".into())
}

impl SynthesisFlags {
    /// File config overlaid with flags, defaults filled and validated.
    fn resolve(&self, mode: Option<Mode>) -> anyhow::Result<SynthesisConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| UsageError(format!("{e:#}")))?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            mode,
            profile: self.profile.map(Profile::from),
            alpha_dd: self.alpha_dd,
            alpha_mel: self.alpha_mel,
            v_mel: self.v_mel,
            seed: self.seed,
            prosody: None,
        };
        let cfg = file.overlay(flags).resolve();
        cfg.validate().map_err(|e| UsageError(format!("configuration: {e}")))?;
        Ok(cfg)
    }

    fn model(&self) -> anyhow::Result<DurationModel> {
        match &self.model {
            Some(p) => DurationModel::from_json(&read_text(p)?).with_context(|| format!("parsing model {}", p.display())),
            None => Ok(DurationModel::default()),
        }
    }
}

#[derive(Serialize)]
struct CorrelateReport<'a> {
    mode: Mode,
    emphasis_target: Option<usize>,
    base_durations: &'a [u32],
    durations: &'a [u32],
    injected_silence_frames: usize,
    correlates: &'a [CorrelateEvent],
    hops: &'a [u32],
}

#[derive(Serialize)]
struct SynthesizeOutput {
    config: SynthesisConfig,
    n_frames: usize,
    n_samples: usize,
    duration_s: f64,
    wav: PathBuf,
    mel: PathBuf,
    alignment: PathBuf,
    correlates: PathBuf,
}

fn cmd_synthesize(a: &SynthesizeArgs) -> anyhow::Result<()> {
    let cfg = a.flags.resolve(a.mode.map(Mode::from))?;
    let model = a.flags.model()?;
    let utt = load_utterance(&a.utterance)?;
    let durations = match &a.durations {
        Some(p) => Some(DurationSequence::from_json(&read_text(p)?).with_context(|| format!("parsing durations {}", p.display()))?),
        None => None,
    };
    let s = synthesize(&utt, &model, durations.as_ref(), &cfg)?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = a.name.clone().unwrap_or_else(|| file_stem(&a.utterance));
    let path = |suffix: &str| a.out.join(format!("{stem}{suffix}"));
    let out = SynthesizeOutput {
        n_frames: s.mel.n_frames(),
        n_samples: s.waveform.len(),
        duration_s: s.waveform.duration_s(),
        wav: path(".wav"),
        mel: path(".mel"),
        alignment: path(".alignment.json"),
        correlates: path(".correlates.json"),
        config: cfg,
    };
    write_wav(&out.wav, &s.waveform)?;
    write_mel(&out.mel, &s.mel)?;
    write_text(&out.alignment, &s.alignment.to_json())?;
    let report = CorrelateReport {
        mode: s.mode,
        emphasis_target: utt.emphasis_target(),
        base_durations: s.base_durations.frames(),
        durations: s.durations.frames(),
        injected_silence_frames: s.plan.injected_silence_frames(),
        correlates: &s.plan.correlates,
        hops: s.hops.as_slice(),
    };
    write_text(&out.correlates, &pretty(&report))?;
    emit(None, &pretty(&out))
}

fn load_alignment(path: &Path) -> anyhow::Result<Alignment> {
    Alignment::from_json(&read_text(path)?).with_context(|| format!("parsing alignment {}", path.display()))
}

fn cmd_analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let wave = read_wav(&a.wav).with_context(|| format!("reading {}", a.wav.display()))?;
    let words = word_report(&wave, &load_alignment(&a.alignment)?)?;
    let identification = match (&a.baseline_wav, &a.baseline_alignment) {
        (Some(bw), Some(ba)) => {
            let base = read_wav(bw).with_context(|| format!("reading {}", bw.display()))?;
            let baseline = word_report(&base, &load_alignment(ba)?)?;
            Some(identify_emphasis(&words, &baseline)?)
        }
        _ => None,
    };
    let out = serde_json::json!({ "words": words, "identification": identification });
    emit(a.out.as_deref(), &pretty(&out))
}

/// Utterance files of a corpus directory, in file name order.
fn corpus_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"));
    files.sort();
    if files.is_empty() {
        bail!("corpus {} has no utterance files", dir.display());
    }
    Ok(files)
}

fn cmd_experiment(a: &ExperimentArgs) -> anyhow::Result<()> {
    let cfg = a.flags.resolve(None)?;
    let model = a.flags.model()?;
    let modes: Vec<Mode> = a.modes.iter().map(|&m| m.into()).collect();
    let files = corpus_files(&a.corpus)?;
    let utts = files.iter().map(|p| load_utterance(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut report = run_experiment(&utts, &model, &modes, &cfg)?;
    if a.summary_only {
        report.trials.clear();
    }
    if let Some(dir) = &a.artifacts {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (path, utt) in files.iter().zip(&utts) {
            for &mode in &modes {
                let s = synthesize(utt, &model, None, &SynthesisConfig { mode, ..cfg.clone() })?;
                write_wav(&dir.join(format!("{}.{}.wav", file_stem(path), mode.name())), &s.waveform)?;
            }
        }
    }
    let ids: Vec<String> = files.iter().map(|p| file_stem(p)).collect();
    let out = serde_json::json!({ "utterances": ids, "config": cfg, "report": report });
    emit(a.out.as_deref(), &pretty(&out))
}

fn cmd_gen_corpus(a: &GenCorpusArgs) -> anyhow::Result<()> {
    if a.n == 0 {
        return Err(UsageError("--n must be at least 1".into()).into());
    }
    let config = CorpusConfig {
        min_words: a.min_words,
        max_words: a.max_words,
        content_percent: a.content_percent,
    };
    let utts = generate_corpus_with(a.n, a.seed, &config).map_err(|e| UsageError(e.to_string()))?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let width = a.n.to_string().len().max(4);
    let mut manifest = Vec::with_capacity(utts.len());
    for (i, u) in utts.iter().enumerate() {
        let path = a.out.join(format!("utt{i:0width$}.json"));
        write_text(&path, &u.to_json())?;
        manifest.push(serde_json::json!({
            "path": path,
            "words": u.orthography().join(" "),
            "emphasis": u.emphasis_target(),
        }));
    }
    emit(None, &pretty(&manifest))
}

fn cmd_serve(a: &ServeArgs) -> anyhow::Result<()> {
    let mut config = match &a.config {
        Some(p) => serde_json::from_str::<ServeConfig>(&read_text(p)?)
            .map_err(|e| UsageError(format!("parsing {}: {e}", p.display())))?,
        None => ServeConfig::default(),
    };
    if let Some(p) = &a.plan {
        config.plan = p.clone();
    }
    if let Some(p) = &a.log {
        config.log = p.clone();
    }
    if let Some(p) = &a.static_dir {
        config.static_dir = Some(p.clone());
    }
    if let Some(addr) = a.addr {
        config.addr = addr;
    }
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    eprintln!("serving {} on http://{}", config.plan.display(), config.addr);
    runtime.block_on(ddemph_service::serve(config))?;
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> anyhow::Result<()> {
    let text = read_text(&a.input)?;
    let summary = summarize(a.test_type.into(), &text).with_context(|| format!("summarizing {}", a.input.display()))?;
    let rendered = match a.format {
        StatsFormat::Json => pretty(&summary),
        StatsFormat::Table => render_table(&summary),
    };
    emit(a.out.as_deref(), &rendered)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
