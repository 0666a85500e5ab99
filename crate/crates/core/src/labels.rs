//! Expert label vocabulary.
//!
//! A label names a broad fault class, a specific fault type within that class
//! and the affected phase(s). [`LabelRecord::validate`] enforces the
//! class/type/phase combinations below.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultClass {
    Normal,
    #[serde(rename = "Short-circuit")]
    ShortCircuit,
    Switching,
    Transients,
    Other,
}

impl FaultClass {
    pub const ALL: [FaultClass; 5] = [
        FaultClass::Normal,
        FaultClass::ShortCircuit,
        FaultClass::Switching,
        FaultClass::Transients,
        FaultClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultClass::Normal => "Normal",
            FaultClass::ShortCircuit => "Short-circuit",
            FaultClass::Switching => "Switching",
            FaultClass::Transients => "Transients",
            FaultClass::Other => "Other",
        }
    }

    /// Fault types allowed for this class.
    pub fn fault_types(self) -> &'static [&'static str] {
        match self {
            FaultClass::Normal => &["Normal"],
            FaultClass::ShortCircuit => &["1-P-SC", "2-P-SC", "2-P-G-SC", "3-P-SC"],
            FaultClass::Switching => &["Switch On", "Switch Off"],
            FaultClass::Transients => &["Transients"],
            FaultClass::Other => &["Off - No Switch", "Open Circuit", "Other"],
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FaultClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Vocabulary(format!("unknown fault class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
    #[serde(rename = "N/A")]
    NotApplicable,
    #[serde(rename = "multi")]
    Multi,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::A, Phase::B, Phase::C, Phase::NotApplicable, Phase::Multi];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
            Phase::NotApplicable => "N/A",
            Phase::Multi => "multi",
        }
    }

    pub fn is_single(self) -> bool {
        matches!(self, Phase::A | Phase::B | Phase::C)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Vocabulary(format!("unknown phase {s:?}")))
    }
}

/// Which phases a fault type admits.
pub fn phase_allowed(fault_type: &str, phase: Phase) -> bool {
    match fault_type {
        "1-P-SC" => phase.is_single(),
        "2-P-SC" | "2-P-G-SC" | "3-P-SC" => phase == Phase::Multi,
        "Open Circuit" => phase != Phase::NotApplicable,
        "Other" => true,
        _ => phase == Phase::NotApplicable,
    }
}

/// Class owning a fault type, if the type is in the vocabulary.
pub fn class_of(fault_type: &str) -> Option<FaultClass> {
    FaultClass::ALL
        .into_iter()
        .find(|c| c.fault_types().contains(&fault_type))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub sample_id: u64,
    pub fault_class: FaultClass,
    pub fault_type: String,
    pub phase: Phase,
    #[serde(default)]
    pub comment: String,
}

impl LabelRecord {
    pub fn new(sample_id: u64, fault_class: FaultClass, fault_type: &str, phase: Phase) -> Self {
        Self {
            sample_id,
            fault_class,
            fault_type: fault_type.to_string(),
            phase,
            comment: String::new(),
        }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = comment.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fault_class.fault_types().contains(&self.fault_type.as_str()) {
            return Err(Error::Vocabulary(format!(
                "fault type {:?} does not belong to class {}",
                self.fault_type, self.fault_class
            )));
        }
        if !phase_allowed(&self.fault_type, self.phase) {
            return Err(Error::Vocabulary(format!(
                "phase {} not allowed for fault type {:?}",
                self.phase, self.fault_type
            )));
        }
        Ok(())
    }

    /// Category used when tallying at `level`.
    pub fn category(&self, level: LabelLevel) -> &str {
        match level {
            LabelLevel::EventType => &self.fault_type,
            LabelLevel::FaultClass => self.fault_class.as_str(),
        }
    }
}

/// Label granularity for contingency tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelLevel {
    #[default]
    EventType,
    FaultClass,
}
