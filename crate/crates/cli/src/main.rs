//! `ntp`: dataset generation, training, evaluation and gradient checks.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ntp_core::evalharness::{
    adversarial_eval, cleanup_matrix, emit_report, evaluate, length_sweep, trace_episode, EvalConfig, EvalReport, Policy, ReportFormat,
};
use ntp_core::interpreter::write_exec_trace;
use ntp_core::ntpmodel::{load_checkpoint, save_checkpoint, NtpModel};
use ntp_core::taskgen::{Axis, Goal, TaskConfig};
use ntp_core::trainer::{
    generate_dataset, grad_check_suite, load_dataset, read_split, train, write_metrics_csv, GenConfig, TrainConfig, TraceDataset,
    GRAD_TOLERANCE,
};
use ntp_core::{Family, TaskInstance};

#[derive(Parser)]
#[command(name = "ntp", version, about = "Neural task programming on a kinematic tabletop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a split and expert traces into a dataset directory.
    GenData(GenDataArgs),
    /// Train a model from a TOML config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Length sweep (sorting) or bowls × forks matrix (clean-up).
    Sweep(SweepArgs),
    /// Clean and adversarial success of one or more checkpoints.
    Adversary(AdversaryArgs),
    /// Finite-difference check of every operation and every variant's loss.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    axis: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    n_unseen: usize,
    #[arg(long, default_value_t = 50)]
    traces_per_task: usize,
    /// Blocks per stacking task.
    #[arg(long)]
    blocks: Option<usize>,
    /// Largest objects-per-category count in sorting training tasks.
    #[arg(long)]
    sort_train_max: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch metrics CSV; defaults to the checkpoint path with a
    /// `.metrics.csv` extension.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct Protocol {
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; `.csv` selects CSV, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the format implied by `--out`.
    #[arg(long)]
    format: Option<String>,
}

impl Protocol {
    fn config(&self, adversary_prob: f64) -> EvalConfig {
        EvalConfig { episodes: self.episodes, seed: self.seed, adversary_prob, ..Default::default() }
    }

    fn emit(&self, reports: &[EvalReport]) -> Result<()> {
        for r in reports {
            println!(
                "{:<14} {:<24} success {:.3} ({}/{})",
                r.variant, r.label, r.success_rate, r.successes, r.episodes
            );
        }
        if let Some(path) = &self.out {
            let format = match &self.format {
                Some(f) => ReportFormat::parse(f)?,
                None => ReportFormat::for_path(path),
            };
            emit_report(reports, path, format).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// `seen` or `unseen`.
    #[arg(long, default_value = "unseen")]
    split: String,
    /// Topple probability after each place.
    #[arg(long, default_value_t = 0.0)]
    adversary: f64,
    /// Writes every decision of the first episode as JSONL.
    #[arg(long)]
    exec_trace: Option<PathBuf>,
    #[command(flatten)]
    protocol: Protocol,
}

#[derive(Args)]
struct SweepArgs {
    /// One or more checkpoints; the expert control row is always added.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// Dataset whose seen sorting mappings are swept; omit for clean-up.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Objects per category for the sorting sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,4,7,10")]
    grid: Vec<usize>,
    #[command(flatten)]
    protocol: Protocol,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "unseen")]
    split: String,
    #[arg(long, default_value_t = 0.25)]
    prob: f64,
    #[command(flatten)]
    protocol: Protocol,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss coordinates probed per variant.
    #[arg(long, default_value_t = 400)]
    sample: usize,
    /// Optional JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_model(path: &Path) -> Result<(NtpModel, String)> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn pool(dataset: &Path, split: &str) -> Result<Vec<TaskInstance>> {
    let s = read_split(dataset).with_context(|| format!("reading splits of {}", dataset.display()))?;
    match split {
        "seen" => Ok(s.seen),
        "unseen" => Ok(s.unseen),
        other => bail!("unknown split {other:?} (expected seen or unseen)"),
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let defaults = TaskConfig::default();
    let cfg = GenConfig {
        n_train: a.n_train,
        n_unseen: a.n_unseen,
        traces_per_task: a.traces_per_task,
        tasks: TaskConfig {
            num_blocks: a.blocks.unwrap_or(defaults.num_blocks),
            sort_train_max: a.sort_train_max.unwrap_or(defaults.sort_train_max),
            ..defaults
        },
        ..GenConfig::new(Family::parse(&a.family)?, Axis::parse(&a.axis)?, a.seed)
    };
    let m = generate_dataset(&cfg, &a.out).with_context(|| format!("writing dataset to {}", a.out.display()))?;
    println!("{} seen tasks, {} unseen tasks, {} demonstrations -> {}", m.seen_tasks, m.unseen_tasks, m.demos.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = TrainConfig::from_toml(&text)?;
    if cfg.datasets.is_empty() {
        bail!("{} lists no datasets", a.config.display());
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    let mut demos = Vec::new();
    for d in &cfg.datasets {
        let dir = base.join(d);
        let (_, _, mut ds) = load_dataset(&dir).with_context(|| format!("loading dataset {}", dir.display()))?;
        demos.append(&mut ds);
    }
    let mut ds = TraceDataset::from_demos(&demos, cfg.model.variant)?;
    let mut model = NtpModel::new(cfg.model.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    println!("{} demonstrations, {} steps", demos.len(), ds.len());
    let metrics = train(&mut model, &mut ds, &cfg, &mut rng, |_, m| {
        let acc = m.accuracies();
        println!("epoch {:>3} loss {:.5} key {:.3} eop {:.3} scope {:.3} arg {:.3}", m.epoch, m.losses.total, acc[0], acc[1], acc[2], acc[3]);
        Ok(())
    })?;
    let hash = save_checkpoint(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let metrics_path = a.metrics.unwrap_or_else(|| a.out.with_extension("metrics.csv"));
    write_metrics_csv(&metrics, &metrics_path)?;
    println!("checkpoint {} sha256 {hash}", a.out.display());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let (model, hash) = load_model(&a.checkpoint)?;
    let tasks = pool(&a.dataset, &a.split)?;
    let cfg = a.protocol.config(a.adversary);
    let report = evaluate(Policy::Model(&model), &tasks, &a.split, &cfg, Some(hash))?;
    if let Some(path) = &a.exec_trace {
        let (_, steps) = trace_episode(&model, &tasks, &cfg, 0)?;
        write_exec_trace(&steps, BufWriter::new(File::create(path)?))?;
    }
    a.protocol.emit(&[report])
}

/// Distinct sorting mappings of the seen split, in order of appearance.
fn sorting_mappings(dataset: &Path) -> Result<Vec<[usize; 4]>> {
    let split = read_split(dataset)?;
    let mut out: Vec<[usize; 4]> = Vec::new();
    for t in &split.seen {
        match &t.goal {
            Goal::ObjectSorting { mapping, .. } if !out.contains(mapping) => out.push(*mapping),
            Goal::ObjectSorting { .. } => {}
            _ => bail!("{} is not a sorting dataset", dataset.display()),
        }
    }
    Ok(out)
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let models = a.checkpoint.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let cfg = a.protocol.config(0.0);
    let mut reports = Vec::new();
    match &a.dataset {
        Some(d) => {
            let mappings = sorting_mappings(d)?;
            let mut policies = vec![Policy::Expert];
            policies.extend(models.iter().map(|(m, _)| Policy::Model(m)));
            reports = length_sweep(&policies, &mappings, &a.grid, &cfg)?;
            for r in &mut reports {
                r.checkpoint_hash = models.iter().find(|(m, _)| m.variant().name() == r.variant).map(|(_, h)| h.clone());
            }
        }
        None => {
            for (m, h) in &models {
                for mut r in cleanup_matrix(Policy::Model(m), &cfg)? {
                    r.checkpoint_hash = Some(h.clone());
                    reports.push(r);
                }
            }
        }
    }
    a.protocol.emit(&reports)
}

fn adversary_cmd(a: AdversaryArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.prob) {
        bail!("--prob must lie in [0, 1]");
    }
    let models = a.checkpoint.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let tasks = pool(&a.dataset, &a.split)?;
    let policies: Vec<Policy> = models.iter().map(|(m, _)| Policy::Model(m)).collect();
    let pairs = adversarial_eval(&policies, &tasks, a.prob, &a.protocol.config(0.0))?;
    let mut reports = Vec::new();
    for (pair, (_, hash)) in pairs.into_iter().zip(&models) {
        println!("{:<14} drop {:.3}", pair.clean.variant, pair.drop);
        for mut r in [pair.clean, pair.perturbed] {
            r.checkpoint_hash = Some(hash.clone());
            reports.push(r);
        }
    }
    a.protocol.emit(&reports)
}

fn grad_check_cmd(a: GradCheckArgs) -> Result<()> {
    let t = std::time::Instant::now();
    let results = grad_check_suite(a.seed, Some(a.sample))?;
    let mut failed = 0;
    for (name, r) in &results {
        let ok = r.passes(GRAD_TOLERANCE);
        failed += usize::from(!ok);
        println!("{:<26} {:>6} coords  max rel err {:.2e}  {}", name, r.coordinates, r.max_rel_err, if ok { "ok" } else { "FAIL" });
    }
    if let Some(path) = &a.out {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &results)?;
    }
    println!("{} checks in {:.1?}", results.len(), t.elapsed());
    if failed > 0 {
        bail!("{failed} gradient checks exceed {GRAD_TOLERANCE:e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Adversary(a) => adversary_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
