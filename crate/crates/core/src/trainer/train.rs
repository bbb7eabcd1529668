use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::TraceDataset;
use super::loss::{accuracy, compute_losses, HeadCounts, LossBreakdown, LossConfig};
use crate::error::NtpError;
use crate::ntpmodel::{ModelConfig, NtpModel};
use crate::numcore::AdamConfig;
use crate::program::NUM_PROGRAMS;

/// Training hyperparameters, loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Batches per epoch; defaults to one pass worth of steps.
    pub batches_per_epoch: Option<usize>,
    pub seed: u64,
    pub curriculum_floor: f64,
    pub error_decay: f64,
    pub datasets: Vec<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            lr: 1e-3,
            batch_size: 64,
            epochs: 10,
            batches_per_epoch: None,
            seed: 0,
            curriculum_floor: 0.05,
            error_decay: 0.9,
            datasets: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, NtpError> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| NtpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NtpError> {
        self.model.validate()?;
        if self.batch_size == 0 || !(self.lr >= 0.0) || !(0.0..1.0).contains(&self.error_decay) || self.curriculum_floor < 0.0 {
            return Err(NtpError::Config("invalid training hyperparameters".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

/// Draws a program id with probability ∝ `errors[p] + floor` among the
/// programs flagged `available`.
pub fn sample_program(errors: &[f64], available: &[bool], floor: f64, rng: &mut ChaCha8Rng) -> Option<usize> {
    let w: Vec<f64> = errors.iter().zip(available).map(|(e, a)| if *a { e + floor } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return available.iter().position(|a| *a);
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (p, wp) in w.iter().enumerate() {
        if *wp > 0.0 {
            if u < *wp {
                return Some(p);
            }
            u -= wp;
            last = Some(p);
        }
    }
    last
}

/// Samples at least `batch_size` steps: programs by error, then a uniform
/// unit within the program. Reactive steps sharing a demonstration window
/// are grouped into one segment.
pub fn curriculum_sample(ds: &TraceDataset, rng: &mut ChaCha8Rng, batch_size: usize, floor: f64) -> Result<Vec<Vec<usize>>, NtpError> {
    let available: Vec<bool> = ds.units.iter().map(|u| !u.is_empty()).collect();
    if !available.iter().any(|a| *a) {
        return Err(NtpError::EmptyDataset);
    }
    let mut units = Vec::new();
    let mut n = 0;
    while n < batch_size {
        let p = sample_program(&ds.errors, &available, floor, rng).ok_or(NtpError::EmptyDataset)?;
        let u = &ds.units[p][rng.gen_range(0..ds.units[p].len())];
        n += u.len();
        units.push(u.clone());
    }
    if ds.variant.is_recurrent() {
        return Ok(units);
    }
    let mut segs: Vec<Vec<usize>> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for id in units.into_iter().flatten() {
        let s = &ds.steps[id];
        let k = *index.entry((s.demo, s.window)).or_insert_with(|| {
            segs.push(Vec::new());
            segs.len() - 1
        });
        segs[k].push(id);
    }
    Ok(segs)
}

/// Aggregates of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub batches: usize,
    pub losses: LossBreakdown,
    pub counts: HeadCounts,
    pub errors: [f64; NUM_PROGRAMS],
}

impl EpochMetrics {
    pub fn accuracies(&self) -> [f64; 4] {
        [accuracy(self.counts.key), accuracy(self.counts.eop), accuracy(self.counts.scope), accuracy(self.counts.arg)]
    }
}

fn update_errors(ds: &mut TraceDataset, totals: &[(usize, f64)], decay: f64) {
    let mut sum = [0.0; NUM_PROGRAMS];
    let mut cnt = [0usize; NUM_PROGRAMS];
    for &(id, l) in totals {
        let p = ds.steps[id].program.id();
        sum[p] += l;
        cnt[p] += 1;
    }
    for p in 0..NUM_PROGRAMS {
        if cnt[p] > 0 {
            ds.errors[p] = decay * ds.errors[p] + (1.0 - decay) * sum[p] / cnt[p] as f64;
        }
    }
}

/// One epoch of curriculum batches with an Adam update after each. On a
/// non-finite loss the epoch aborts before touching the parameters.
pub fn train_epoch(model: &mut NtpModel, ds: &mut TraceDataset, cfg: &TrainConfig, rng: &mut ChaCha8Rng, epoch: usize) -> Result<EpochMetrics, NtpError> {
    if ds.is_empty() {
        return Err(NtpError::EmptyDataset);
    }
    let batches = cfg.batches_per_epoch.unwrap_or_else(|| ds.len().div_ceil(cfg.batch_size)).max(1);
    let adam = cfg.adam();
    let mut losses = LossBreakdown::default();
    let mut counts = HeadCounts::default();
    for _ in 0..batches {
        let segs = curriculum_sample(ds, rng, cfg.batch_size, cfg.curriculum_floor)?;
        let r = compute_losses(model, ds, &segs, &cfg.loss)?;
        model.store.accumulate(&r.grads)?;
        model.store.adam_step(&adam)?;
        update_errors(ds, &r.step_totals, cfg.error_decay);
        losses.add(&r.losses);
        counts.add(&r.counts);
    }
    Ok(EpochMetrics { epoch, batches, losses: losses.scaled(1.0 / batches as f64), counts, errors: ds.errors })
}

/// Runs `cfg.epochs` epochs, calling `on_epoch` after each.
pub fn train(
    model: &mut NtpModel,
    ds: &mut TraceDataset,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut on_epoch: impl FnMut(&NtpModel, &EpochMetrics) -> Result<(), NtpError>,
) -> Result<Vec<EpochMetrics>, NtpError> {
    let mut out = Vec::with_capacity(cfg.epochs);
    for e in 0..cfg.epochs {
        let m = train_epoch(model, ds, cfg, rng, e)?;
        on_epoch(model, &m)?;
        out.push(m);
    }
    Ok(out)
}

pub const METRICS_HEADER: &str =
    "epoch,batches,program_key_ce,eop_bce,scoping_ce,api_arg_ce,total,acc_key,acc_eop,acc_scope,acc_arg";

pub fn write_metrics_csv(metrics: &[EpochMetrics], path: &Path) -> Result<(), NtpError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{METRICS_HEADER}")?;
    for m in metrics {
        let l = &m.losses;
        let a = m.accuracies();
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.epoch, m.batches, l.program_key_ce, l.eop_bce, l.scoping_ce, l.api_arg_ce, l.total, a[0], a[1], a[2], a[3]
        )?;
    }
    f.flush()?;
    Ok(())
}
