use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::TraceDataset;
use super::loss::{compute_losses_with, LossConfig};
use crate::error::NtpError;
use crate::expert::demonstrate;
use crate::ntpmodel::{ModelConfig, NtpModel, Variant};
use crate::numcore::{grad_check, op_suite, GradCheckReport};
use crate::program::Program;
use crate::taskgen::TaskInstance;

/// Narrow architecture used by gradient checks.
pub fn small_config(variant: Variant, seed: u64) -> ModelConfig {
    ModelConfig {
        variant,
        state_dim: 12,
        spec_dim: 12,
        key_dim: 6,
        prog_dim: 6,
        conv_channels: 6,
        core_hidden: 10,
        tsi_hidden: 6,
        ptr_hidden: 6,
        seed,
        ..Default::default()
    }
}

/// Finite-difference check of the full training loss of a small batch that
/// exercises every head of `variant`. `sample` bounds the number of probed
/// coordinates.
pub fn step_loss_grad_check(variant: Variant, seed: u64, sample: Option<usize>) -> Result<GradCheckReport, NtpError> {
    let task = TaskInstance::stacking(3, vec![vec![2, 0, 1]])?;
    let demo = demonstrate(&task, seed)?;
    let ds = TraceDataset::from_demos(&[demo], variant)?;
    let model = NtpModel::new(small_config(variant, seed))?;
    let segs = check_segments(&ds);
    let cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grad_check(
        &model.store,
        |store| {
            let r = compute_losses_with(&model, store, &ds, &segs, &cfg)?;
            Ok((r.losses.total, r.grads))
        },
        1e-5,
        sample,
        &mut rng,
    )
}

/// Tolerance every suite entry must meet.
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Every operation check followed by the full-loss check of each variant,
/// `sample` coordinates per variant.
pub fn grad_check_suite(seed: u64, sample: Option<usize>) -> Result<Vec<(String, GradCheckReport)>, NtpError> {
    let mut out = op_suite(seed)?;
    for v in Variant::ALL {
        out.push((format!("loss_{v}"), step_loss_grad_check(v, seed, sample)?));
    }
    Ok(out)
}

/// First two steps of the root invocation and of the first invocation that
/// emits a pointer target.
fn check_segments(ds: &TraceDataset) -> Vec<Vec<usize>> {
    let first2 = |inv: &Vec<usize>| inv.iter().take(2).copied().collect::<Vec<_>>();
    let mut segs = vec![first2(&ds.invocations[0])];
    if let Some(inv) = ds.invocations.iter().find(|inv| ds.steps[inv[0]].program == Program::Pick) {
        segs.push(first2(inv));
    }
    segs
}
