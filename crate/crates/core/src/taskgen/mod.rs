//! Task families, success predicates, sampling and generalization splits.

mod sample;
mod task;

pub use sample::*;
pub use task::*;

use crate::worldsim::{EntityKind, Support, WorldState};

/// Whether `state` satisfies the goal of `task`.
pub fn success(state: &WorldState, task: &TaskInstance) -> bool {
    match &task.goal {
        Goal::BlockStacking { .. } => task
            .support_pairs()
            .iter()
            .all(|&(upper, lower)| state.object(upper).is_some_and(|o| o.supported_by == Support::Object(lower))),
        Goal::ObjectSorting { mapping, .. } => state
            .objects
            .iter()
            .all(|o| state.root_support(o.id) == Support::Container(mapping[o.category])),
        Goal::TableCleanup { .. } => cleanup_done(state),
    }
}

/// Bowls form one chain standing in the bin and every fork lies in the top
/// bowl.
fn cleanup_done(state: &WorldState) -> bool {
    let bowls: Vec<_> = state.objects.iter().filter(|o| o.kind == EntityKind::Bowl).collect();
    let Some(mut top) = bowls.iter().find(|b| matches!(b.supported_by, Support::Container(_))).map(|b| b.id) else {
        return false;
    };
    let mut chain = 1;
    while let Some(next) = bowls.iter().find(|b| b.supported_by == Support::Object(top)) {
        top = next.id;
        chain += 1;
    }
    chain == bowls.len()
        && state
            .objects
            .iter()
            .filter(|o| o.kind == EntityKind::Fork)
            .all(|f| f.supported_by == Support::Object(top))
}
