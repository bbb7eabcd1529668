use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::state::{sample_free_xy, Support, WorldState};
use crate::error::NtpError;

/// Table-standing stacks of two or more objects, as (base, objects above).
pub fn stacks(state: &WorldState) -> Vec<(usize, Vec<usize>)> {
    state
        .objects
        .iter()
        .filter(|o| o.supported_by == Support::Table)
        .filter_map(|base| {
            let above: Vec<usize> = state
                .objects
                .iter()
                .filter(|o| o.id != base.id && o.supported_by != Support::Gripper)
                .filter(|o| state.root_base(o.id) == Some(base.id))
                .map(|o| o.id)
                .collect();
            (!above.is_empty()).then_some((base.id, above))
        })
        .collect()
}

impl WorldState {
    /// Bottom object of the stack containing `id`, if that stack stands on
    /// the table.
    pub fn root_base(&self, id: usize) -> Option<usize> {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            match self.object(cur)?.supported_by {
                Support::Object(b) => cur = b,
                Support::Table => return Some(cur),
                _ => return None,
            }
        }
        None
    }
}

/// With probability `prob`, topples one uniformly chosen stack: every object
/// above its base is scattered to a free table position. Returns whether a
/// topple happened.
pub fn apply_adversary(state: &mut WorldState, rng: &mut ChaCha8Rng, prob: f64) -> Result<bool, NtpError> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(NtpError::Config(format!("adversary probability {prob} outside [0, 1]")));
    }
    // Always consume one draw so episodes stay aligned across policies.
    let fire = rng.gen::<f64>() < prob;
    let candidates = stacks(state);
    if !fire || candidates.is_empty() {
        return Ok(false);
    }
    let (_, above) = &candidates[rng.gen_range(0..candidates.len())];
    let mut occupied: Vec<_> = state
        .objects
        .iter()
        .filter(|o| !above.contains(&o.id) && o.supported_by != Support::Gripper)
        .map(|o| o.position)
        .collect();
    for &id in above {
        let p = sample_free_xy(rng, &state.containers, &occupied)?;
        occupied.push(p);
        let o = state.objects.iter_mut().find(|o| o.id == id).expect("stack member exists");
        o.position = p;
        o.supported_by = Support::Table;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::TaskInstance;
    use crate::worldsim::{reset, ApiCall};
    use rand::SeedableRng;

    fn tower_world() -> WorldState {
        let t = TaskInstance::stacking(4, vec![vec![0, 1, 2]]).unwrap();
        let mut w = reset(&t, 5).unwrap();
        for c in [ApiCall::MoveTo(1), ApiCall::Grip, ApiCall::MoveTo(0), ApiCall::Release] {
            w.step_api(c).unwrap();
        }
        for c in [ApiCall::MoveTo(2), ApiCall::Grip, ApiCall::MoveTo(1), ApiCall::Release] {
            w.step_api(c).unwrap();
        }
        w
    }

    #[test]
    fn zero_probability_is_identity() {
        let w = tower_world();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let mut v = w.clone();
            assert!(!apply_adversary(&mut v, &mut rng, 0.0).unwrap());
            assert_eq!(v, w);
        }
    }

    #[test]
    fn forced_topple_moves_upper_blocks_only() {
        let w = tower_world();
        assert_eq!(stacks(&w), vec![(0, vec![1, 2])]);
        let mut v = w.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(apply_adversary(&mut v, &mut rng, 1.0).unwrap());
        assert_eq!(v.object(0), w.object(0));
        for id in [1, 2] {
            let o = v.object(id).unwrap();
            assert_eq!(o.supported_by, Support::Table);
            assert_eq!(o.position.z, 0.0);
        }
        assert!(stacks(&v).is_empty());
        v.check_invariants().unwrap();
    }

    #[test]
    fn topple_frequency_matches_probability() {
        let w = tower_world();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 10_000;
        let hits = (0..trials).filter(|_| apply_adversary(&mut w.clone(), &mut rng, 0.25).unwrap()).count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.25).abs() <= 0.02, "frequency {freq}");
    }
}
