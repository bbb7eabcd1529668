use serde::{Deserialize, Serialize};

use crate::error::NtpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ntp,
    NtpGru,
    NtpNoScope,
    Flat,
    FlatGru,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Ntp, Variant::NtpGru, Variant::NtpNoScope, Variant::Flat, Variant::FlatGru];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ntp => "ntp",
            Variant::NtpGru => "ntp_gru",
            Variant::NtpNoScope => "ntp_no_scope",
            Variant::Flat => "flat",
            Variant::FlatGru => "flat_gru",
        }
    }

    pub fn parse(s: &str) -> Result<Variant, NtpError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| NtpError::Config(format!("unknown variant {s:?}")))
    }

    pub fn is_flat(self) -> bool {
        matches!(self, Variant::Flat | Variant::FlatGru)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Variant::NtpGru | Variant::FlatGru)
    }

    /// Whether child programs receive a scoped sub-window.
    pub fn scopes(self) -> bool {
        matches!(self, Variant::Ntp | Variant::NtpGru)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub state_dim: usize,
    pub spec_dim: usize,
    pub key_dim: usize,
    pub prog_dim: usize,
    pub conv_width: usize,
    pub conv_channels: usize,
    pub core_hidden: usize,
    pub tsi_hidden: usize,
    pub ptr_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Ntp,
            state_dim: 128,
            spec_dim: 128,
            key_dim: 32,
            prog_dim: 32,
            conv_width: 3,
            conv_channels: 64,
            core_hidden: 128,
            tsi_hidden: 64,
            ptr_hidden: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn with_variant(variant: Variant) -> Self {
        ModelConfig { variant, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), NtpError> {
        if self.conv_width % 2 == 0 {
            return Err(NtpError::Config(format!("conv_width must be odd, got {}", self.conv_width)));
        }
        let dims = [
            self.state_dim,
            self.spec_dim,
            self.key_dim,
            self.prog_dim,
            self.conv_channels,
            self.core_hidden,
            self.tsi_hidden,
            self.ptr_hidden,
        ];
        if dims.contains(&0) {
            return Err(NtpError::Config("dimensions must be positive".into()));
        }
        Ok(())
    }
}
