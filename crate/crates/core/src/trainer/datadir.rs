//! On-disk dataset directories.
//!
//! ```text
//! manifest.json        registry version, seeds, config, per-file hashes
//! splits/seen.json     seen tasks with family, axis and seed
//! splits/unseen.json   held-out tasks, same header
//! traces/task_NNNNN.jsonl   step records of every demonstration of seen task N
//! ```
//!
//! Demonstrations are a pure function of `(task, seed)`, so loading replays
//! the expert and checks the result against the stored step records.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::expert::{demonstrate, Demonstration, TraceStep};
use crate::ntpmodel::sha256_hex;
use crate::program::REGISTRY_VERSION;
use crate::taskgen::{make_splits_with, Axis, DatasetSplit, Family, TaskConfig, TaskInstance};

/// What `gen-data` builds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub family: Family,
    pub axis: Axis,
    pub seed: u64,
    pub n_train: usize,
    pub n_unseen: usize,
    pub traces_per_task: usize,
    pub tasks: TaskConfig,
}

impl GenConfig {
    pub fn new(family: Family, axis: Axis, seed: u64) -> Self {
        GenConfig { family, axis, seed, n_train: 100, n_unseen: 100, traces_per_task: 50, tasks: TaskConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoEntry {
    /// Index into the seen split.
    pub task: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub path: String,
    pub sha256: String,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub registry_version: u32,
    pub config: GenConfig,
    pub seen_tasks: usize,
    pub unseen_tasks: usize,
    pub demos: Vec<DemoEntry>,
    pub traces: Vec<TraceFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SplitFile {
    family: Family,
    axis: Axis,
    seed: u64,
    tasks: Vec<TaskInstance>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    demo: usize,
    #[serde(flatten)]
    step: TraceStep,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), NtpError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, NtpError> {
    let bytes = fs::read(path).map_err(|e| NtpError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Draws the split and one seed per demonstration, in that order.
fn plan(cfg: &GenConfig) -> Result<(DatasetSplit, Vec<DemoEntry>), NtpError> {
    if cfg.traces_per_task == 0 {
        return Err(NtpError::Config("traces_per_task must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split = make_splits_with(cfg.family, cfg.axis, &mut rng, cfg.n_train, cfg.n_unseen, &cfg.tasks)?;
    let demos = (0..split.seen.len())
        .flat_map(|task| (0..cfg.traces_per_task).map(move |_| task))
        .map(|task| DemoEntry { task, seed: rng.gen() })
        .collect();
    Ok((split, demos))
}

/// Split and demonstrations of `cfg` without touching the disk.
pub fn generate_in_memory(cfg: &GenConfig) -> Result<(DatasetSplit, Vec<Demonstration>), NtpError> {
    let (split, entries) = plan(cfg)?;
    let demos = entries.iter().map(|e| demonstrate(&split.seen[e.task], e.seed)).collect::<Result<_, _>>()?;
    Ok((split, demos))
}

/// Writes a dataset directory at `out` and returns its manifest.
pub fn generate_dataset(cfg: &GenConfig, out: &Path) -> Result<Manifest, NtpError> {
    let (split, entries) = plan(cfg)?;
    fs::create_dir_all(out.join("splits"))?;
    fs::create_dir_all(out.join("traces"))?;
    for (name, tasks) in [("seen", &split.seen), ("unseen", &split.unseen)] {
        let file = SplitFile { family: split.family, axis: split.axis, seed: cfg.seed, tasks: tasks.clone() };
        write_json(&out.join(format!("splits/{name}.json")), &file)?;
    }
    let mut traces = Vec::with_capacity(split.seen.len());
    for (task_index, task) in split.seen.iter().enumerate() {
        let mut buf = Vec::new();
        let mut steps = 0;
        for (demo, e) in entries.iter().enumerate().filter(|(_, e)| e.task == task_index) {
            for step in demonstrate(task, e.seed)?.trace()? {
                serde_json::to_writer(&mut buf, &Record { demo, step })?;
                buf.write_all(b"\n")?;
                steps += 1;
            }
        }
        let rel = format!("traces/task_{task_index:05}.jsonl");
        fs::write(out.join(&rel), &buf)?;
        traces.push(TraceFile { path: rel, sha256: sha256_hex(&buf), steps });
    }
    let manifest = Manifest {
        registry_version: REGISTRY_VERSION,
        config: cfg.clone(),
        seen_tasks: split.seen.len(),
        unseen_tasks: split.unseen.len(),
        demos: entries,
        traces,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, NtpError> {
    let m: Manifest = read_json(&dir.join("manifest.json"))?;
    if m.registry_version != REGISTRY_VERSION {
        return Err(NtpError::RegistryVersion { found: m.registry_version, expected: REGISTRY_VERSION });
    }
    Ok(m)
}

/// Seen and unseen tasks of a dataset directory.
pub fn read_split(dir: &Path) -> Result<DatasetSplit, NtpError> {
    let seen: SplitFile = read_json(&dir.join("splits/seen.json"))?;
    let unseen: SplitFile = read_json(&dir.join("splits/unseen.json"))?;
    if (seen.family, seen.axis) != (unseen.family, unseen.axis) {
        return Err(NtpError::Config(format!("split files of {} disagree on family or axis", dir.display())));
    }
    Ok(DatasetSplit { family: seen.family, axis: seen.axis, seen: seen.tasks, unseen: unseen.tasks })
}

/// Loads every demonstration of a dataset directory, verifying file hashes
/// and that the replayed expert reproduces each stored step.
pub fn load_dataset(dir: &Path) -> Result<(Manifest, DatasetSplit, Vec<Demonstration>), NtpError> {
    let manifest = read_manifest(dir)?;
    let split = read_split(dir)?;
    if split.seen.len() != manifest.seen_tasks || manifest.traces.len() != split.seen.len() {
        return Err(NtpError::Config(format!("{}: manifest does not match the seen split", dir.display())));
    }
    let mut demos: Vec<Option<Demonstration>> = vec![None; manifest.demos.len()];
    for file in &manifest.traces {
        let path = dir.join(&file.path);
        let bytes = fs::read(&path)?;
        if sha256_hex(&bytes) != file.sha256 {
            return Err(NtpError::Config(format!("{} does not match its manifest hash", path.display())));
        }
        let mut pending: Option<(usize, Vec<TraceStep>)> = None;
        let mut finish = |demo: usize, steps: Vec<TraceStep>| -> Result<(), NtpError> {
            let e = manifest.demos.get(demo).ok_or_else(|| NtpError::Config(format!("{}: unknown demo {demo}", path.display())))?;
            let d = demonstrate(&split.seen[e.task], e.seed)?;
            if d.trace()? != steps {
                return Err(NtpError::Config(format!("{}: demo {demo} differs from its expert replay", path.display())));
            }
            demos[demo] = Some(d);
            Ok(())
        };
        for line in BufReader::new(bytes.as_slice()).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: Record = serde_json::from_str(&line)?;
            match pending.as_mut() {
                Some((d, steps)) if *d == r.demo => steps.push(r.step),
                _ => {
                    if let Some((d, steps)) = pending.take() {
                        finish(d, steps)?;
                    }
                    pending = Some((r.demo, vec![r.step]));
                }
            }
        }
        if let Some((d, steps)) = pending {
            finish(d, steps)?;
        }
    }
    let demos = demos
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or_else(|| NtpError::Config(format!("{}: demo {i} has no trace records", dir.display()))))
        .collect::<Result<_, _>>()?;
    Ok((manifest, split, demos))
}
