//! Parameter-free relational features computed from gripper-relative
//! observations and the static slot layout.
//!
//! Frame features (length [`FRAME_DIM`]):
//! aperture, held category, hovered object categories, hovered container,
//! categories at the gripper, free categories, progress fraction.
//! Slot features (length [`SLOT_DIM`]) describe each entity for the pointer
//! decoder.

use crate::taskgen::MAX_CATEGORIES;
use crate::worldsim::{EntityKind, SlotLayout, CONTAINER_RADIUS, HOVER_OFFSET, OBJECT_HEIGHT, SENTINEL};

pub const MAX_CONTAINERS: usize = 4;
pub const FRAME_DIM: usize = 1 + MAX_CATEGORIES * 4 + MAX_CONTAINERS + 1;
pub const SLOT_DIM: usize = 1 + MAX_CONTAINERS + MAX_CATEGORIES + 5;
/// Leading frame features that learned encoders consume; the progress
/// fraction is left out because its scale depends on task length.
pub const ENC_DIM: usize = FRAME_DIM - 1;
/// Length of [`compare`] output.
pub const REL_DIM: usize = ENC_DIM + 2;

const POSE_TOL: f64 = 0.01;
const STACK_TOL: f64 = 0.02;

const OFF_HELD: usize = 1;
const OFF_HOVER: usize = OFF_HELD + MAX_CATEGORIES;
const OFF_HOVER_CONTAINER: usize = OFF_HOVER + MAX_CATEGORIES;
const OFF_AT: usize = OFF_HOVER_CONTAINER + MAX_CONTAINERS;
const OFF_FREE: usize = OFF_AT + MAX_CATEGORIES;
const OFF_PROGRESS: usize = OFF_FREE + MAX_CATEGORIES;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct SlotInfo {
    valid: bool,
    container: bool,
    held: bool,
    at_gripper: bool,
    hover: bool,
    in_container: bool,
    has_below: bool,
    dist: f64,
}

impl SlotInfo {
    fn free(&self) -> bool {
        self.valid && !self.container && !self.held && !self.in_container && !self.has_below
    }

    fn settled(&self) -> bool {
        self.valid && !self.container && !self.held && (self.in_container || self.has_below)
    }
}

fn delta(obs: &[f64], k: usize) -> [f64; 3] {
    [obs[3 * k], obs[3 * k + 1], obs[3 * k + 2]]
}

fn analyse(obs: &[f64], layout: &SlotLayout) -> (bool, Vec<SlotInfo>) {
    let n = layout.len();
    assert_eq!(obs.len(), layout.obs_dim(), "observation does not match slot layout");
    let closed = obs[3 * n] < 0.5;
    let mut info = vec![SlotInfo::default(); n];
    let containers: Vec<[f64; 3]> = (0..n)
        .filter(|&k| layout.slots[k].kind == EntityKind::Container && obs[3 * k] != SENTINEL)
        .map(|k| delta(obs, k))
        .collect();
    for (k, slot) in info.iter_mut().enumerate() {
        let d = delta(obs, k);
        if d[0] == SENTINEL {
            continue;
        }
        slot.valid = true;
        slot.container = layout.slots[k].kind == EntityKind::Container;
        slot.dist = d[0].hypot(d[1]);
        let at = slot.dist <= POSE_TOL && d[2].abs() <= POSE_TOL;
        slot.hover = slot.dist <= POSE_TOL && (d[2] + HOVER_OFFSET).abs() <= POSE_TOL;
        if slot.container {
            continue;
        }
        slot.held = at && closed;
        slot.at_gripper = at && !closed;
        slot.in_container = !slot.held && containers.iter().any(|c| (d[0] - c[0]).hypot(d[1] - c[1]) <= CONTAINER_RADIUS);
    }
    for k in 0..n {
        if !info[k].valid || info[k].container || info[k].held {
            continue;
        }
        let d = delta(obs, k);
        info[k].has_below = (0..n).any(|j| {
            j != k && info[j].valid && !info[j].container && !info[j].held && {
                let e = delta(obs, j);
                (d[0] - e[0]).hypot(d[1] - e[1]) <= STACK_TOL && (d[2] - e[2] - OBJECT_HEIGHT).abs() <= STACK_TOL
            }
        });
    }
    (closed, info)
}

/// Frame features of one observation.
pub fn frame_features(obs: &[f64], layout: &SlotLayout) -> Vec<f64> {
    let (closed, info) = analyse(obs, layout);
    let mut f = vec![0.0; FRAME_DIM];
    f[0] = if closed { 0.0 } else { 1.0 };
    let (mut objects, mut settled) = (0usize, 0usize);
    for (k, s) in info.iter().enumerate() {
        if !s.valid {
            continue;
        }
        let desc = layout.slots[k];
        if s.container {
            if s.hover {
                f[OFF_HOVER_CONTAINER + desc.container.unwrap_or(0)] = 1.0;
            }
            continue;
        }
        let cat = desc.category;
        objects += 1;
        if s.held {
            f[OFF_HELD + cat] = 1.0;
        }
        if s.hover && !s.in_container {
            f[OFF_HOVER + cat] = 1.0;
        }
        if s.at_gripper {
            f[OFF_AT + cat] = 1.0;
        }
        if s.free() {
            f[OFF_FREE + cat] = 1.0;
        }
        if s.settled() {
            settled += 1;
        }
    }
    if objects > 0 {
        f[OFF_PROGRESS] = settled as f64 / objects as f64;
    }
    f
}

/// Per-slot descriptors, row-major `[slots × SLOT_DIM]`, and the mask of
/// slots that exist in this world.
pub fn slot_features(obs: &[f64], layout: &SlotLayout) -> (Vec<f64>, Vec<bool>) {
    let (_, info) = analyse(obs, layout);
    let mut out = vec![0.0; layout.len() * SLOT_DIM];
    let mut valid = vec![false; layout.len()];
    for (k, s) in info.iter().enumerate() {
        if !s.valid {
            continue;
        }
        valid[k] = true;
        let row = &mut out[k * SLOT_DIM..(k + 1) * SLOT_DIM];
        let desc = layout.slots[k];
        if s.container {
            row[0] = 1.0;
            row[1 + desc.container.unwrap_or(0)] = 1.0;
        } else {
            row[1 + MAX_CONTAINERS + desc.category] = 1.0;
        }
        let tail = 1 + MAX_CONTAINERS + MAX_CATEGORIES;
        row[tail] = f64::from(u8::from(s.free()));
        row[tail + 1] = f64::from(u8::from(s.settled()));
        row[tail + 2] = f64::from(u8::from(s.hover));
        row[tail + 3] = s.dist;
        row[tail + 4] = 1.0;
    }
    (out, valid)
}

/// Length-invariant comparison of two frames: the difference of the encoder
/// features, then whether `a` has strictly more and strictly less progress
/// than `b`.
pub fn compare(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a[..ENC_DIM].iter().zip(&b[..ENC_DIM]).map(|(x, y)| x - y).collect();
    let (pa, pb) = (progress(a), progress(b));
    out.push(f64::from(u8::from(pa > pb + 1e-9)));
    out.push(f64::from(u8::from(pa < pb - 1e-9)));
    out
}

/// Progress fraction stored in a frame feature vector.
pub fn progress(frame: &[f64]) -> f64 {
    frame[OFF_PROGRESS]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::demonstrate;
    use crate::taskgen::TaskInstance;
    use crate::worldsim::{reset, sorting_slot, ApiCall};

    #[test]
    fn dims() {
        assert_eq!(FRAME_DIM, 38);
        assert_eq!(SLOT_DIM, 18);
        assert_eq!(OFF_PROGRESS, ENC_DIM);
    }

    #[test]
    fn compare_ignores_progress_scale() {
        let mut a = vec![0.0; FRAME_DIM];
        let mut b = a.clone();
        a[0] = 1.0;
        a[OFF_PROGRESS] = 0.5;
        b[OFF_PROGRESS] = 0.49;
        let c = compare(&a, &b);
        assert_eq!(c.len(), REL_DIM);
        assert_eq!(c[0], 1.0);
        assert_eq!(&c[ENC_DIM..], &[1.0, 0.0]);
        assert_eq!(&compare(&b, &b)[ENC_DIM..], &[0.0, 0.0]);
    }

    #[test]
    fn pick_and_place_feature_sequence() {
        let t = TaskInstance::sorting([3, 0, 1, 2], [1, 1, 0, 0]).unwrap();
        let layout = SlotLayout::for_task(&t);
        let d = demonstrate(&t, 5).unwrap();
        let f: Vec<Vec<f64>> = d.spec.frames.iter().map(|o| frame_features(o, &layout)).collect();
        assert_eq!(f[0][OFF_FREE], 1.0);
        assert_eq!(f[0][OFF_FREE + 1], 1.0);
        assert_eq!(progress(&f[0]), 0.0);
        // After move_to the first object, its category is hovered.
        assert_eq!(f[1][OFF_HOVER], 1.0);
        // After grip it is held.
        assert_eq!(f[2][0], 0.0);
        assert_eq!(f[2][OFF_HELD], 1.0);
        assert_eq!(f[2][OFF_FREE], 0.0);
        // Over container 3 while holding.
        assert_eq!(f[3][OFF_HOVER_CONTAINER + 3], 1.0);
        // Released into the container.
        assert_eq!(f[4][0], 1.0);
        assert_eq!(progress(&f[4]), 0.5);
        assert_eq!(progress(f.last().unwrap()), 1.0);
    }

    #[test]
    fn stacked_block_is_settled_not_free() {
        let t = TaskInstance::stacking(3, vec![vec![0, 1]]).unwrap();
        let layout = SlotLayout::for_task(&t);
        let mut w = reset(&t, 0).unwrap();
        for c in [ApiCall::MoveTo(1), ApiCall::Grip, ApiCall::MoveTo(0), ApiCall::Release] {
            w.step_api(c).unwrap();
        }
        let f = frame_features(&w.observe(), &layout);
        assert_eq!(&f[OFF_FREE..OFF_FREE + 3], &[1.0, 0.0, 1.0]);
        assert_eq!(f[OFF_AT + 1], 1.0);
        assert_eq!(f[OFF_HOVER], 1.0);
        assert!((progress(&f) - 1.0 / 3.0).abs() < 1e-12);
        let (g, valid) = slot_features(&w.observe(), &layout);
        assert_eq!(valid, vec![true; 3]);
        assert_eq!(g[SLOT_DIM + 1 + MAX_CONTAINERS + 1], 1.0);
    }

    #[test]
    fn absent_slots_are_masked() {
        let t = TaskInstance::sorting([0, 1, 2, 3], [2, 0, 0, 0]).unwrap();
        let layout = SlotLayout::for_task(&t);
        let w = reset(&t, 1).unwrap();
        let (g, valid) = slot_features(&w.observe(), &layout);
        assert_eq!(valid.iter().filter(|v| **v).count(), 6);
        assert!(valid[sorting_slot(0, 1)] && !valid[sorting_slot(0, 2)]);
        let k = sorting_slot(1, 0);
        assert!(g[k * SLOT_DIM..(k + 1) * SLOT_DIM].iter().all(|v| *v == 0.0));
    }
}
