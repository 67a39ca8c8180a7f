use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{MachineId, ProtocolId};
use crate::{Error, Result};

/// Clinical urgency class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Priority {
    A,
    B,
    C,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::A, Priority::B, Priority::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Priority::A => "A",
            Priority::B => "B",
            Priority::C => "C",
        })
    }
}

/// Fractionation scheme. The step is the minimum working-day distance between
/// two consecutive treatment days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Daily,
    EveryOtherDay,
    Weekly,
}

impl Pattern {
    pub fn step(self) -> u32 {
        match self {
            Pattern::Daily => 1,
            Pattern::EveryOtherDay => 2,
            Pattern::Weekly => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineTier {
    Preferred,
    Allowed,
}

fn one() -> u8 {
    1
}

fn yes() -> bool {
    true
}

fn daily() -> Vec<Pattern> {
    vec![Pattern::Daily]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentProtocol {
    pub id: ProtocolId,
    /// Alternative names accepted in arrival files (case-insensitive).
    #[serde(default)]
    pub aliases: Vec<String>,
    pub priority: Priority,
    pub min_fractions_per_week: u8,
    /// Calendar days between CT simulation and the earliest first fraction.
    pub pre_treatment_days: u32,
    pub preferred_machines: Vec<MachineId>,
    #[serde(default)]
    pub allowed_machines: Vec<MachineId>,
    pub first_fraction_duration: u16,
    pub subsequent_fraction_duration: u16,
    #[serde(default = "one")]
    pub max_fractions_per_day: u8,
    /// Largest allowed working-day distance between consecutive treatment days.
    #[serde(default)]
    pub max_gap_between_fractions: Option<u32>,
    #[serde(default = "daily")]
    pub patterns: Vec<Pattern>,
    /// Whether a switch between partially beam-matched machines is permitted.
    #[serde(default = "yes")]
    pub allow_partial_switch: bool,
    /// Whether a displaced fraction may be delivered as a second fraction on a
    /// later day (at least six hours apart).
    #[serde(default = "yes")]
    pub allow_repair_doubling: bool,
    /// `(fraction count, probability)` pairs used by the synthetic generator.
    #[serde(default)]
    pub fraction_options: Vec<(u32, f64)>,
}

impl TreatmentProtocol {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::config(format!("protocol `{}`: {m}", self.id)));
        if self.preferred_machines.is_empty() && self.allowed_machines.is_empty() {
            return err("no machines");
        }
        if self
            .preferred_machines
            .iter()
            .any(|m| self.allowed_machines.contains(m))
        {
            return err("preferred and allowed machines overlap");
        }
        if !(1..=5).contains(&self.min_fractions_per_week) {
            return err("min_fractions_per_week must be in 1..=5");
        }
        if self.first_fraction_duration == 0 || self.subsequent_fraction_duration == 0 {
            return err("durations must be positive");
        }
        if self.max_fractions_per_day == 0 {
            return err("max_fractions_per_day must be positive");
        }
        if self.patterns.is_empty() {
            return err("no fractionation pattern");
        }
        Ok(())
    }

    pub fn machine_tier(&self, m: &MachineId) -> Option<MachineTier> {
        if self.preferred_machines.contains(m) {
            Some(MachineTier::Preferred)
        } else if self.allowed_machines.contains(m) {
            Some(MachineTier::Allowed)
        } else {
            None
        }
    }

    pub fn machines(&self) -> impl Iterator<Item = &MachineId> {
        self.preferred_machines.iter().chain(&self.allowed_machines)
    }

    /// The densest allowed pattern (smallest step).
    pub fn densest_pattern(&self) -> Pattern {
        *self.patterns.iter().min_by_key(|p| p.step()).expect("validated")
    }

    /// Minimum number of working days from first to last fraction inclusive,
    /// on fully available machines, using the densest allowed pattern.
    pub fn min_span(&self, n_fractions: u32) -> u32 {
        if n_fractions == 0 {
            return 0;
        }
        match self.densest_pattern() {
            Pattern::Daily => n_fractions.div_ceil(self.max_fractions_per_day as u32),
            p => (n_fractions - 1) * p.step() + 1,
        }
    }
}

/// Protocols keyed by id, with case-insensitive lookup by id or alias.
#[derive(Debug, Clone, Default)]
pub struct ProtocolTable {
    protocols: BTreeMap<ProtocolId, TreatmentProtocol>,
    names: BTreeMap<String, ProtocolId>,
}

impl ProtocolTable {
    pub fn new(protocols: impl IntoIterator<Item = TreatmentProtocol>) -> Result<Self> {
        let mut table = Self::default();
        for p in protocols {
            p.validate()?;
            for name in std::iter::once(p.id.as_str()).chain(p.aliases.iter().map(String::as_str)) {
                let key = name.trim().to_lowercase();
                if table.names.insert(key, p.id.clone()).is_some() {
                    return Err(Error::config(format!("duplicate protocol name `{name}`")));
                }
            }
            table.protocols.insert(p.id.clone(), p);
        }
        Ok(table)
    }

    pub fn get(&self, id: &ProtocolId) -> Result<&TreatmentProtocol> {
        self.protocols
            .get(id)
            .ok_or_else(|| Error::UnknownProtocol(id.clone()))
    }

    pub fn by_name(&self, name: &str) -> Option<&TreatmentProtocol> {
        self.names
            .get(&name.trim().to_lowercase())
            .and_then(|id| self.protocols.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &TreatmentProtocol> {
        self.protocols.values()
    }

    pub fn len(&self) -> usize {
        self.protocols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.protocols.is_empty()
    }

    pub fn check_machines(&self, known: impl Fn(&MachineId) -> bool) -> Result<()> {
        for p in self.iter() {
            if let Some(m) = p.machines().find(|m| !known(m)) {
                return Err(Error::UnknownMachine(m.clone()));
            }
        }
        Ok(())
    }
}
