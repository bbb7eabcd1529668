use serde::{Deserialize, Serialize};

use crate::taskgen::{Family, Goal, TaskInstance};
use crate::taskgen::{CLEANUP_MAX_BOWLS, CLEANUP_MAX_FORKS, SORT_CATEGORIES, SORT_CONTAINERS, SORT_MAX_PER_CATEGORY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Container,
    SortItem,
    Block,
    Bowl,
    Fork,
}

impl EntityKind {
    /// Items settle alongside other items in the same receptacle.
    pub fn is_item(self) -> bool {
        matches!(self, EntityKind::SortItem | EntityKind::Fork)
    }

    /// Objects that accept another object on top of them.
    pub fn is_stackable(self) -> bool {
        matches!(self, EntityKind::Block | EntityKind::Bowl)
    }
}

/// Static description of one observation slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotDesc {
    pub kind: EntityKind,
    pub category: usize,
    /// Index among containers, for container slots.
    pub container: Option<usize>,
}

/// Canonical slot assignment for one experiment configuration. Containers
/// come first; the slot index doubles as the entity id in the world.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotLayout {
    pub family: Family,
    pub slots: Vec<SlotDesc>,
}

impl SlotLayout {
    pub fn sorting() -> Self {
        let mut slots: Vec<SlotDesc> = (0..SORT_CONTAINERS)
            .map(|c| SlotDesc { kind: EntityKind::Container, category: 0, container: Some(c) })
            .collect();
        for c in 0..SORT_CATEGORIES {
            slots.extend((0..SORT_MAX_PER_CATEGORY).map(|_| SlotDesc { kind: EntityKind::SortItem, category: c, container: None }));
        }
        SlotLayout { family: Family::ObjectSorting, slots }
    }

    pub fn stacking(num_blocks: usize) -> Self {
        let slots = (0..num_blocks).map(|b| SlotDesc { kind: EntityKind::Block, category: b, container: None }).collect();
        SlotLayout { family: Family::BlockStacking, slots }
    }

    pub fn cleanup() -> Self {
        let mut slots = vec![SlotDesc { kind: EntityKind::Container, category: 0, container: Some(0) }];
        slots.extend((0..CLEANUP_MAX_BOWLS).map(|_| SlotDesc { kind: EntityKind::Bowl, category: 0, container: None }));
        slots.extend((0..CLEANUP_MAX_FORKS).map(|_| SlotDesc { kind: EntityKind::Fork, category: 1, container: None }));
        SlotLayout { family: Family::TableCleanup, slots }
    }

    pub fn for_task(task: &TaskInstance) -> Self {
        match &task.goal {
            Goal::BlockStacking { num_blocks, .. } => Self::stacking(*num_blocks),
            Goal::ObjectSorting { .. } => Self::sorting(),
            Goal::TableCleanup { .. } => Self::cleanup(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_containers(&self) -> usize {
        self.slots.iter().filter(|s| s.kind == EntityKind::Container).count()
    }

    /// Observation length: three coordinates per slot plus the aperture.
    pub fn obs_dim(&self) -> usize {
        3 * self.slots.len() + 1
    }

    /// Entity ids of the objects present in `task`.
    pub fn present_objects(&self, task: &TaskInstance) -> Vec<usize> {
        match &task.goal {
            Goal::BlockStacking { num_blocks, .. } => (0..*num_blocks).collect(),
            Goal::ObjectSorting { counts, .. } => (0..SORT_CATEGORIES)
                .flat_map(|c| (0..counts[c]).map(move |r| sorting_slot(c, r)))
                .collect(),
            Goal::TableCleanup { num_bowls, num_forks, .. } => {
                (0..*num_bowls).map(bowl_slot).chain((0..*num_forks).map(fork_slot)).collect()
            }
        }
    }
}

/// Slot of the `rank`-th object of sorting category `category`.
pub fn sorting_slot(category: usize, rank: usize) -> usize {
    SORT_CONTAINERS + SORT_MAX_PER_CATEGORY * category + rank
}

pub const BIN_SLOT: usize = 0;

pub fn bowl_slot(bowl: usize) -> usize {
    1 + bowl
}

pub fn fork_slot(fork: usize) -> usize {
    1 + CLEANUP_MAX_BOWLS + fork
}
