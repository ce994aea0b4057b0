//! Command-line front end. Exit codes: 0 success, 1 bad input or I/O,
//! 2 numerical failure, 3 checkpoint version mismatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{bench_stream, run_benchmark, write_csv, Mode};
use crate::error::{Error, Result};
use crate::eval::{class_count, clustering_metrics, kmeans, train_eval_classifier, LogisticOptions, DEFAULT_RESTARTS};
use crate::io::{self, EmbeddingMeta, Manifest, MetricRow};
use crate::pipeline::{init_offline, EmbeddingRun, ResidualThreshold, RunConfig};
use crate::synth::{generate, SbmSpec};

#[derive(Debug, Parser)]
#[command(name = "dynembed", version, about = "Consensus embeddings of evolving attributed networks")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Offline embedding of one snapshot.
    Embed(EmbedArgs),
    /// Apply deltas to a checkpointed run.
    Update(UpdateArgs),
    /// Score an embedding against labels.
    Eval(EvalArgs),
    /// Generate a synthetic evolving network.
    Synth(SynthArgs),
    /// Time online updates against per-step re-solves.
    Bench(BenchArgs),
}

/// Run settings shared by `embed` and `bench`. Unset flags fall back to the
/// `--config` file, then to the built-in defaults.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// JSON file with run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective settings and exit.
    #[arg(long)]
    pub show_config: bool,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub refresh_every: Option<usize>,
    /// `auto`, `never`, or an absolute residual.
    #[arg(long, value_parser = parse_threshold)]
    pub refresh_residual: Option<ResidualThreshold>,
    /// Keep only this many strongest similarities per node.
    #[arg(long)]
    pub sparsify_top: Option<usize>,
}

fn parse_threshold(s: &str) -> std::result::Result<ResidualThreshold, String> {
    match s {
        "auto" => Ok(ResidualThreshold::Auto),
        "never" => Ok(ResidualThreshold::Never),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|v| *v >= 0.0)
            .map(ResidualThreshold::Absolute)
            .ok_or_else(|| format!("expected auto, never or a non-negative number, got `{s}`")),
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::parse(p, e.line(), e.to_string()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.l {
            c.l = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.ridge.is_some() {
            c.ridge = self.ridge;
        }
        if self.gap_tol.is_some() {
            c.gap_tol = self.gap_tol;
        }
        if self.refresh_every.is_some() {
            c.refresh_every = self.refresh_every;
        }
        if let Some(v) = self.refresh_residual {
            c.refresh_residual = v;
        }
        if self.sparsify_top.is_some() {
            c.sparsify_top = self.sparsify_top;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub attrs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Node count, if larger than the highest id in the files.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Attribute count, if larger than the highest id in the files.
    #[arg(long)]
    pub attr_dim: Option<usize>,
    /// Also print diagnostics to stdout.
    #[arg(long)]
    pub diagnostics: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Delta files, applied in order.
    #[arg(long = "delta")]
    pub deltas: Vec<PathBuf>,
    /// Manifest whose deltas are applied after any `--delta` files.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub diagnostics: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Cluster,
    Classify,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Cluster count (default: number of classes).
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-fuse the checkpointed run at l = 10, 20, ..., 100 (up to 2k).
    #[arg(long)]
    pub sweep: bool,
    /// Checkpoint for `--sweep`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Metrics JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON file with generator settings; flags override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sbm: SbmArgs,
}

#[derive(Debug, Args, Default)]
pub struct SbmArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long)]
    pub attr_dim: Option<usize>,
    #[arg(long)]
    pub attr_signal: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "sbm-seed")]
    pub sbm_seed: Option<u64>,
}

impl SbmArgs {
    fn resolve(&self, file: Option<&Path>) -> Result<SbmSpec> {
        let mut s: SbmSpec = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::parse(p, e.line(), e.to_string()))?
            }
            None => SbmSpec::default(),
        };
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $( if let Some(v) = self.$f { s.$g = v; } )* };
        }
        set!(n => n, blocks => blocks, p_in => p_in, p_out => p_out, attr_dim => attr_dim,
             attr_signal => attr_signal, drift => drift_rate, steps => steps, sbm_seed => seed);
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CheckpointVersion { .. } => 3,
        e if e.is_numerical() => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(cli.command))),
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let stage = if e.is_numerical() { "numerical failure: " } else { "" };
            eprintln!("dynembed: {stage}{e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Embed(a) => cmd_embed(&a),
        Command::Update(a) => cmd_update(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    step: usize,
    network_values: Vec<f64>,
    attribute_values: Vec<f64>,
    network_residuals: Vec<f64>,
    attribute_residuals: Vec<f64>,
    network_near_zero: usize,
    attribute_near_zero: usize,
    drift: &'a crate::pipeline::DriftStats,
    last_step: &'a Option<crate::pipeline::StepReport>,
}

fn write_outputs(run: &EmbeddingRun, out: &Path, print_diagnostics: bool) -> Result<()> {
    create_dir(out)?;
    io::write_text(&out.join("embedding.tsv"), &io::embedding_tsv(&run.embedding))?;
    io::write_text(&out.join("embedding.json"), &io::to_json_pretty(&EmbeddingMeta::of(run))?)?;
    run.save_checkpoint(&out.join("checkpoint.json"))?;
    let diag = Diagnostics {
        step: run.step,
        network_values: run.network.values(),
        attribute_values: run.attributes.values(),
        network_residuals: run.network.residuals(),
        attribute_residuals: run.attributes.residuals(),
        network_near_zero: run.network.diagnostics.near_zero,
        attribute_near_zero: run.attributes.diagnostics.near_zero,
        drift: &run.drift,
        last_step: &run.last_report,
    };
    let text = io::to_json_pretty(&diag)?;
    io::write_text(&out.join("diagnostics.json"), &text)?;
    if print_diagnostics {
        print!("{text}");
    }
    Ok(())
}

fn cmd_embed(a: &EmbedArgs) -> Result<()> {
    let config = a.config.resolve()?;
    if a.config.show_config {
        print!("{}", io::to_json_pretty(&config)?);
        return Ok(());
    }
    let snapshot = io::read_snapshot(&a.graph, &a.attrs, a.nodes, a.attr_dim)?;
    let run = init_offline(snapshot, config)?;
    write_outputs(&run, &a.out, a.diagnostics)
}

fn cmd_update(a: &UpdateArgs) -> Result<()> {
    let mut run = EmbeddingRun::load_checkpoint(&a.checkpoint)?;
    let mut paths = a.deltas.clone();
    if let Some(m) = &a.manifest {
        paths.extend(Manifest::read(m)?.delta_paths(m));
    }
    let (n, d) = (run.snapshot.n(), run.snapshot.d());
    for p in &paths {
        let delta = io::read_delta(p, n, d)?;
        run = run.step_online(&delta)?;
        let refreshed = run.last_report.as_ref().and_then(|r| r.refreshed);
        match refreshed {
            Some(reason) => println!("step {}: refresh ({})", run.step, serde_json::to_value(reason)?.as_str().unwrap_or("?")),
            None => println!("step {}: online update", run.step),
        }
    }
    write_outputs(&run, &a.out, a.diagnostics)
}

fn metric_rows(task: Task, y: &nalgebra::DMatrix<f64>, labels: &[usize], a: &EvalArgs, step: usize) -> Result<Vec<MetricRow>> {
    let dim = y.ncols();
    let row = |metric: &str, value: f64, task: &str| MetricRow {
        task: task.into(),
        metric: metric.into(),
        value,
        dim,
        step,
    };
    Ok(match task {
        Task::Cluster => {
            let c = match a.clusters {
                Some(c) => c,
                None => class_count(labels)?,
            };
            let km = kmeans(y, c, a.restarts, a.seed)?;
            let (acc, nmi) = clustering_metrics(&km.assignments, labels)?;
            vec![row("acc", acc, "cluster"), row("nmi", nmi, "cluster")]
        }
        Task::Classify => {
            let m = train_eval_classifier(y, labels, a.folds, a.seed, &LogisticOptions::default())?;
            vec![
                row("accuracy", m.accuracy, "classify"),
                row("micro_f1", m.micro_f1, "classify"),
                row("macro_f1", m.macro_f1, "classify"),
            ]
        }
    })
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut rows = Vec::new();
    if a.sweep {
        let cp = a
            .checkpoint
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("--sweep needs --checkpoint".into()))?;
        let run = EmbeddingRun::load_checkpoint(cp)?;
        let labels = io::read_labels(&a.labels, Some(run.n()))?;
        for l in (10..=100).step_by(10).filter(|&l| l <= 2 * run.config.k) {
            let (_, y) = run.refuse(l)?;
            rows.extend(metric_rows(a.task, &y, &labels, a, run.step)?);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput(format!("no sweep dimension fits 2k = {}", 2 * run.config.k)));
        }
    } else {
        let path = a
            .embedding
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("--embedding is required without --sweep".into()))?;
        let y = io::read_embedding(path)?;
        let labels = io::read_labels(&a.labels, Some(y.nrows()))?;
        let step = sidecar_step(path);
        rows = metric_rows(a.task, &y, &labels, a, step)?;
    }
    let json = io::to_json_pretty(&rows)?;
    match &a.out {
        Some(p) => io::write_text(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(p) = &a.csv {
        io::write_text(p, &io::metrics_csv(&rows))?;
    }
    Ok(())
}

/// Step recorded in the JSON sidecar next to an embedding file, if any.
fn sidecar_step(embedding: &Path) -> usize {
    std::fs::read_to_string(embedding.with_extension("json"))
        .ok()
        .and_then(|t| serde_json::from_str::<EmbeddingMeta>(&t).ok())
        .map_or(0, |m| m.step)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = a.sbm.resolve(a.spec.as_deref())?;
    let stream = generate(&spec)?;
    let m = io::write_stream(&a.out, &stream, Some(&spec))?;
    println!(
        "{} nodes, {} edges, {} attributes, {} deltas",
        m.nodes,
        stream.initial.edge_count(),
        m.attributes,
        m.deltas.len()
    );
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let config = a.config.resolve()?;
    let spec = a.sbm.resolve(a.spec.as_deref())?;
    if a.config.show_config {
        #[derive(Serialize)]
        struct Shown<'a> {
            run: &'a RunConfig,
            sbm: &'a SbmSpec,
        }
        print!("{}", io::to_json_pretty(&Shown { run: &config, sbm: &spec })?);
        return Ok(());
    }
    // spec.steps counts time steps here, the first being the initial solve
    let stream = bench_stream(&spec, spec.steps)?;
    let threads = rayon::current_num_threads();
    let mut rows = run_benchmark(&stream, &config, Mode::Online, threads)?.rows;
    rows.extend(run_benchmark(&stream, &config, Mode::Offline, threads)?.rows);
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| Error::io("<csv>", e))?;
    let text = String::from_utf8(buf).expect("ascii csv");
    match &a.out {
        Some(p) => io::write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
