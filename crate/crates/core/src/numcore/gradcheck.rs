use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::NtpError;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_err: f64,
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

/// Relative error with an absolute floor so that two near-zero derivatives
/// are not reported as a mismatch.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-6 {
        diff / 1e-6
    } else {
        diff / scale
    }
}

/// Probes `fn_` (loss value + analytic gradients) with central differences.
///
/// With `sample = Some(n)` only `n` randomly chosen coordinates across all
/// parameters are probed; otherwise every coordinate is.
pub fn grad_check<F, R>(
    store: &ParamStore,
    fn_: F,
    h: f64,
    sample: Option<usize>,
    rng: &mut R,
) -> Result<GradCheckReport, NtpError>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients), NtpError>,
    R: Rng,
{
    let (_, analytic) = fn_(store)?;
    let mut coords: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.value(id).len()).map(move |k| (id, k)))
        .collect();
    if let Some(n) = sample {
        coords.shuffle(rng);
        coords.truncate(n);
    }
    let mut probe = store.clone();
    let mut report = GradCheckReport { coordinates: coords.len(), max_rel_err: 0.0, worst: None };
    for (id, k) in coords {
        let orig = probe.value(id).data()[k];
        probe.value_mut(id).data_mut()[k] = orig + h;
        let (plus, _) = fn_(&probe)?;
        probe.value_mut(id).data_mut()[k] = orig - h;
        let (minus, _) = fn_(&probe)?;
        probe.value_mut(id).data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.get(id).map(|t| t.data()[k]).unwrap_or(0.0);
        let e = rel_err(a, numeric);
        if e > report.max_rel_err {
            report.max_rel_err = e;
            report.worst = Some((store.name(id).to_string(), k));
        }
    }
    Ok(report)
}
