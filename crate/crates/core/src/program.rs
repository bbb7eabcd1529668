//! Fixed program registry shared by every task family.

use serde::{Deserialize, Serialize};

use crate::error::NtpError;

/// Bumped whenever ids, names or arities change; stored in checkpoints and
/// dataset manifests.
pub const REGISTRY_VERSION: u32 = 1;

pub const NUM_PROGRAMS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    BlockStacking,
    ObjectSorting,
    TableCleanup,
    PickAndPlace,
    Pick,
    Place,
    MoveTo,
    Grip,
    Release,
}

impl Program {
    pub const ALL: [Program; NUM_PROGRAMS] = [
        Program::BlockStacking,
        Program::ObjectSorting,
        Program::TableCleanup,
        Program::PickAndPlace,
        Program::Pick,
        Program::Place,
        Program::MoveTo,
        Program::Grip,
        Program::Release,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Result<Program, NtpError> {
        Program::ALL
            .get(id)
            .copied()
            .ok_or_else(|| NtpError::Parse(format!("unknown program id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Program::BlockStacking => "block_stacking",
            Program::ObjectSorting => "object_sorting",
            Program::TableCleanup => "table_cleanup",
            Program::PickAndPlace => "pick_and_place",
            Program::Pick => "pick",
            Program::Place => "place",
            Program::MoveTo => "move_to",
            Program::Grip => "grip",
            Program::Release => "release",
        }
    }

    pub fn is_primitive(self) -> bool {
        matches!(self, Program::MoveTo | Program::Grip | Program::Release)
    }

    /// Whether the primitive takes a target index.
    pub fn takes_target(self) -> bool {
        self == Program::MoveTo
    }

    pub fn is_root(self) -> bool {
        matches!(self, Program::BlockStacking | Program::ObjectSorting | Program::TableCleanup)
    }
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
