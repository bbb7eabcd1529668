//! Scripted hierarchical experts that produce demonstrations and fully
//! annotated execution traces.

mod tree;

pub use tree::*;

use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::program::Program;
use crate::taskgen::{success, Goal, TaskInstance};
use crate::worldsim::{bowl_slot, ApiCall, EntityKind, Environment, Support, WorldState, BIN_SLOT};

/// Next `(object, target)` move that the expert would make from `state`,
/// or `None` once nothing is left to do. Works from any reachable state, so
/// it also recovers from perturbations.
pub fn next_move(state: &WorldState, task: &TaskInstance) -> Option<(usize, usize)> {
    match &task.goal {
        Goal::BlockStacking { towers, .. } => towers.iter().find_map(|t| {
            t.windows(2)
                .find(|w| state.object(w[1]).is_some_and(|o| o.supported_by != Support::Object(w[0])))
                .map(|w| (w[1], w[0]))
        }),
        Goal::ObjectSorting { mapping, .. } => (0..mapping.len()).find_map(|c| {
            nearest(state, |o| o.category == c && state.root_support(o.id) != Support::Container(mapping[c]))
                .map(|o| (o, mapping[c]))
        }),
        Goal::TableCleanup { bowl_order, .. } => {
            let mut below = Support::Container(BIN_SLOT);
            for &b in bowl_order {
                let id = bowl_slot(b);
                if state.object(id).is_some_and(|o| o.supported_by != below) {
                    return Some((id, BIN_SLOT));
                }
                below = Support::Object(id);
            }
            nearest(state, |o| o.kind == EntityKind::Fork && o.supported_by != below).map(|f| (f, BIN_SLOT))
        }
    }
}

/// Object satisfying `pred` closest to the gripper in the table plane; ties
/// go to the lower id.
fn nearest(state: &WorldState, pred: impl Fn(&crate::worldsim::ObjectState) -> bool) -> Option<usize> {
    let g = state.gripper.position;
    state
        .objects
        .iter()
        .filter(|o| pred(o))
        .min_by(|a, b| a.position.xy_dist(g).total_cmp(&b.position.xy_dist(g)).then(a.id.cmp(&b.id)))
        .map(|o| o.id)
}

/// API calls of one pick-and-place.
pub fn pick_and_place_calls(object: usize, target: usize) -> [ApiCall; 4] {
    [ApiCall::MoveTo(object), ApiCall::Grip, ApiCall::MoveTo(target), ApiCall::Release]
}

/// Call subtree for the pick-and-place whose first API call has index `t`.
pub fn pick_and_place_node(object: usize, target: usize, t: usize) -> CallNode {
    let [a, b, c, d] = pick_and_place_calls(object, target);
    let pick = CallNode::parent(Program::Pick, vec![CallNode::primitive(a, t), CallNode::primitive(b, t + 1)]);
    let place = CallNode::parent(Program::Place, vec![CallNode::primitive(c, t + 2), CallNode::primitive(d, t + 3)]);
    CallNode::parent(Program::PickAndPlace, vec![pick, place])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub task: TaskInstance,
    pub seed: u64,
    pub spec: TaskSpecification,
    pub tree: CallNode,
    pub api_log: Vec<ApiCall>,
}

impl Demonstration {
    pub fn trace(&self) -> Result<Vec<TraceStep>, NtpError> {
        trace_steps(&self.tree, &self.spec)
    }
}

/// Rolls the expert out from `reset(task, seed)`, recording one frame per
/// API boundary.
pub fn demonstrate(task: &TaskInstance, seed: u64) -> Result<Demonstration, NtpError> {
    let mut env = Environment::new(task, seed)?;
    let mut frames = vec![env.observe()];
    let mut children = Vec::new();
    let mut api_log = Vec::new();
    let limit = 2 * task.num_objects() + 2;
    while let Some((obj, target)) = next_move(&env.state, task) {
        if children.len() >= limit {
            return Err(NtpError::Config(format!("expert did not converge on {}", task.canonical_key())));
        }
        children.push(pick_and_place_node(obj, target, api_log.len()));
        for call in pick_and_place_calls(obj, target) {
            env.call(call)?;
            api_log.push(call);
            frames.push(env.observe());
        }
    }
    if children.is_empty() || !success(&env.state, task) {
        return Err(NtpError::Config(format!("expert failed on {}", task.canonical_key())));
    }
    let mut tree = CallNode::parent(task.family().root_program(), children);
    tree.window = (0, frames.len() - 1);
    Ok(Demonstration { task: task.clone(), seed, spec: TaskSpecification { frames }, tree, api_log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scope::decode_scope;
    use crate::scope::label_targets;
    use crate::taskgen::{sample_task, Family, TaskConfig};
    use crate::worldsim::{replay, sorting_slot};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_object_sorting_call_tree() {
        let t = TaskInstance::sorting([2, 0, 1, 3], [1, 0, 0, 0]).unwrap();
        let d = demonstrate(&t, 0).unwrap();
        let root = &d.tree;
        assert_eq!(root.program, Program::ObjectSorting);
        assert_eq!(root.children.len(), 1);
        let pp = &root.children[0];
        assert_eq!(pp.program, Program::PickAndPlace);
        let names: Vec<_> = pp.children.iter().map(|c| c.program).collect();
        assert_eq!(names, vec![Program::Pick, Program::Place]);
        assert_eq!(pp.children[0].children[0].arg, Some(sorting_slot(0, 0)));
        assert_eq!(pp.children[1].children[0].arg, Some(2));
        assert_eq!(d.spec.len(), 5);
        assert_eq!(root.window, (0, 4));
        assert_eq!(pp.children[1].window, (3, 4));
    }

    #[test]
    fn stacking_has_one_move_per_support_pair() {
        let t = TaskInstance::stacking(6, vec![vec![5, 2, 0], vec![1, 3]]).unwrap();
        let d = demonstrate(&t, 11).unwrap();
        assert_eq!(d.tree.children.len(), t.support_pairs().len());
    }

    #[test]
    fn minimal_cleanup() {
        let t = TaskInstance::cleanup(1, 0, vec![0]).unwrap();
        let d = demonstrate(&t, 2).unwrap();
        assert_eq!(d.api_log.len(), 4);
        assert!(success(&replay(&t, 2, &d.api_log).unwrap(), &t));
    }

    #[test]
    fn traces_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for family in Family::ALL {
            for seed in 0..20 {
                let t = sample_task(family, &TaskConfig::default(), &mut rng);
                let d = demonstrate(&t, seed).unwrap();
                d.tree.check_nesting().unwrap();
                assert_eq!(d.tree.api_calls(), d.api_log);
                let steps = d.trace().unwrap();
                let traced: Vec<ApiCall> = steps
                    .iter()
                    .filter_map(|s| match s.targets.next_program {
                        Some(Program::MoveTo) => Some(ApiCall::MoveTo(s.targets.args.unwrap())),
                        Some(Program::Grip) => Some(ApiCall::Grip),
                        Some(Program::Release) => Some(ApiCall::Release),
                        _ => None,
                    })
                    .collect();
                assert_eq!(traced, d.api_log);
                for s in &steps {
                    let kinds = [s.targets.eop, s.targets.labels.is_some(), s.targets.next_program.is_some_and(Program::is_primitive)];
                    assert_eq!(kinds.iter().filter(|k| **k).count(), 1, "{s:?}");
                }
                for e in annotate_scoping(&d.tree).unwrap() {
                    let (st, ed) = decode_scope(&label_targets(&e.labels));
                    assert_eq!((st + e.parent_window.0, ed + e.parent_window.0), e.child_window);
                }
            }
        }
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let t = TaskInstance::stacking(3, vec![vec![0, 1, 2]]).unwrap();
        let steps = demonstrate(&t, 0).unwrap().trace().unwrap();
        let mut buf = Vec::new();
        write_trace(&steps, &mut buf).unwrap();
        assert_eq!(read_trace(&buf[..]).unwrap(), steps);
        let first: serde_json::Value = serde_json::from_slice(buf.split(|b| *b == b'\n').next().unwrap()).unwrap();
        assert_eq!(first["window"], serde_json::json!([0, 8]));
        assert_eq!(first["targets"]["next_program"], "pick_and_place");
    }
}
