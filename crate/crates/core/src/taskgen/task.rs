use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::program::Program;

pub const SORT_CATEGORIES: usize = 4;
pub const SORT_CONTAINERS: usize = 4;
pub const SORT_MAX_PER_CATEGORY: usize = 10;
pub const CLEANUP_MAX_BOWLS: usize = 4;
pub const CLEANUP_MAX_FORKS: usize = 20;
pub const DEFAULT_BLOCKS: usize = 8;
/// Categories are one-hot encoded; stacking uses the block id as category.
pub const MAX_CATEGORIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BlockStacking,
    ObjectSorting,
    TableCleanup,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::BlockStacking, Family::ObjectSorting, Family::TableCleanup];

    pub fn root_program(self) -> Program {
        match self {
            Family::BlockStacking => Program::BlockStacking,
            Family::ObjectSorting => Program::ObjectSorting,
            Family::TableCleanup => Program::TableCleanup,
        }
    }

    pub fn name(self) -> &'static str {
        self.root_program().name()
    }

    pub fn parse(s: &str) -> Result<Family, NtpError> {
        match s {
            "block_stacking" | "stacking" => Ok(Family::BlockStacking),
            "object_sorting" | "sorting" => Ok(Family::ObjectSorting),
            "table_cleanup" | "cleanup" => Ok(Family::TableCleanup),
            _ => Err(NtpError::Config(format!("unknown task family {s:?}"))),
        }
    }
}

/// Family-specific goal record.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Goal {
    /// Towers listed in build order, each bottom-up by block id. Blocks not
    /// mentioned stay on the table.
    BlockStacking { num_blocks: usize, towers: Vec<Vec<usize>> },
    /// `mapping[c]` is the container for category `c`; `counts[c]` instances.
    ObjectSorting { mapping: [usize; SORT_CATEGORIES], counts: [usize; SORT_CATEGORIES] },
    /// Bowls are nested into the bin in `bowl_order`, then forks go into the
    /// top bowl.
    TableCleanup { num_bowls: usize, num_forks: usize, bowl_order: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskInstance {
    pub goal: Goal,
}

impl TaskInstance {
    pub fn stacking(num_blocks: usize, towers: Vec<Vec<usize>>) -> Result<Self, NtpError> {
        let t = TaskInstance { goal: Goal::BlockStacking { num_blocks, towers } };
        t.validate()?;
        Ok(t)
    }

    pub fn sorting(mapping: [usize; SORT_CATEGORIES], counts: [usize; SORT_CATEGORIES]) -> Result<Self, NtpError> {
        let t = TaskInstance { goal: Goal::ObjectSorting { mapping, counts } };
        t.validate()?;
        Ok(t)
    }

    pub fn cleanup(num_bowls: usize, num_forks: usize, bowl_order: Vec<usize>) -> Result<Self, NtpError> {
        let t = TaskInstance { goal: Goal::TableCleanup { num_bowls, num_forks, bowl_order } };
        t.validate()?;
        Ok(t)
    }

    pub fn family(&self) -> Family {
        match self.goal {
            Goal::BlockStacking { .. } => Family::BlockStacking,
            Goal::ObjectSorting { .. } => Family::ObjectSorting,
            Goal::TableCleanup { .. } => Family::TableCleanup,
        }
    }

    pub fn validate(&self) -> Result<(), NtpError> {
        let bad = |m: String| Err(NtpError::Config(m));
        match &self.goal {
            Goal::BlockStacking { num_blocks, towers } => {
                if *num_blocks == 0 || *num_blocks > MAX_CATEGORIES {
                    return bad(format!("block count {num_blocks} outside 1..={MAX_CATEGORIES}"));
                }
                let mut seen = vec![false; *num_blocks];
                for t in towers {
                    if t.len() < 2 {
                        return bad("towers need at least two blocks".into());
                    }
                    for &b in t {
                        if b >= *num_blocks || seen[b] {
                            return bad(format!("block {b} repeated or out of range"));
                        }
                        seen[b] = true;
                    }
                }
            }
            Goal::ObjectSorting { mapping, counts } => {
                if mapping.iter().any(|&m| m >= SORT_CONTAINERS) {
                    return bad("container index out of range".into());
                }
                if counts.iter().any(|&c| c > SORT_MAX_PER_CATEGORY) {
                    return bad(format!("at most {SORT_MAX_PER_CATEGORY} objects per category"));
                }
            }
            Goal::TableCleanup { num_bowls, num_forks, bowl_order } => {
                if !(1..=CLEANUP_MAX_BOWLS).contains(num_bowls) || *num_forks > CLEANUP_MAX_FORKS {
                    return bad(format!("cleanup counts ({num_bowls}, {num_forks}) out of range"));
                }
                let mut sorted = bowl_order.clone();
                sorted.sort_unstable();
                if sorted != (0..*num_bowls).collect::<Vec<_>>() {
                    return bad("bowl order must permute the present bowls".into());
                }
            }
        }
        Ok(())
    }

    /// Support pairs `(upper, lower)` implied by a stacking goal, in build order.
    pub fn support_pairs(&self) -> Vec<(usize, usize)> {
        match &self.goal {
            Goal::BlockStacking { towers, .. } => {
                towers.iter().flat_map(|t| t.windows(2).map(|w| (w[1], w[0]))).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Number of objects the task manipulates.
    pub fn num_objects(&self) -> usize {
        match &self.goal {
            Goal::BlockStacking { num_blocks, .. } => *num_blocks,
            Goal::ObjectSorting { counts, .. } => counts.iter().sum(),
            Goal::TableCleanup { num_bowls, num_forks, .. } => num_bowls + num_forks,
        }
    }

    /// Key identifying the end configuration; order of construction is
    /// ignored.
    pub fn canonical_key(&self) -> String {
        match &self.goal {
            Goal::BlockStacking { num_blocks, .. } => {
                let mut pairs = self.support_pairs();
                pairs.sort_unstable();
                format!("stack{num_blocks}:{pairs:?}")
            }
            Goal::ObjectSorting { mapping, counts } => format!("sort:{mapping:?}:{counts:?}"),
            Goal::TableCleanup { num_bowls, num_forks, bowl_order } => {
                let mut pairs: Vec<(usize, usize)> = bowl_order.windows(2).map(|w| (w[1], w[0])).collect();
                pairs.sort_unstable();
                format!("clean{num_bowls}:{num_forks}:{:?}:{pairs:?}", bowl_order.first())
            }
        }
    }

    /// Key that also distinguishes construction order.
    pub fn ordered_key(&self) -> String {
        match &self.goal {
            Goal::BlockStacking { num_blocks, towers } => format!("stack{num_blocks}:{towers:?}"),
            Goal::TableCleanup { num_bowls, num_forks, bowl_order } => {
                format!("clean{num_bowls}:{num_forks}:{bowl_order:?}")
            }
            Goal::ObjectSorting { .. } => self.canonical_key(),
        }
    }
}
