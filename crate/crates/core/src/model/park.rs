use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ClockTime, Interval, LinacType, MachineId, SiteId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Machine {
    pub id: MachineId,
    pub site: SiteId,
    #[serde(rename = "type")]
    pub linac_type: LinacType,
}

/// Whether a treatment plan can move between two machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMatch {
    /// Same type at the same site.
    Complete,
    /// Same type at different sites.
    Partial,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnavailabilityKind {
    Planned,
    Failure,
}

type Blocks = BTreeMap<NaiveDate, BTreeSet<(MachineId, Interval)>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachinePark {
    machines: Vec<Machine>,
    operating_window: Interval,
    #[serde(default)]
    planned_unavailability: Blocks,
    #[serde(default)]
    failures: Blocks,
}

impl MachinePark {
    pub fn new(machines: Vec<Machine>, operating_window: Interval) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for m in &machines {
            if !seen.insert(&m.id) {
                return Err(Error::config(format!("duplicate machine `{}`", m.id)));
            }
        }
        if machines.is_empty() {
            return Err(Error::config("machine park is empty"));
        }
        Ok(Self {
            machines,
            operating_window,
            planned_unavailability: BTreeMap::new(),
            failures: BTreeMap::new(),
        })
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn operating_window(&self) -> Interval {
        self.operating_window
    }

    pub fn index_of(&self, id: &MachineId) -> Option<usize> {
        self.machines.iter().position(|m| &m.id == id)
    }

    pub fn machine(&self, id: &MachineId) -> Result<&Machine> {
        self.machines
            .iter()
            .find(|m| &m.id == id)
            .ok_or_else(|| Error::UnknownMachine(id.clone()))
    }

    pub fn contains(&self, id: &MachineId) -> bool {
        self.index_of(id).is_some()
    }

    /// Records an unavailability interval, clipped to the operating window.
    ///
    /// Returns `Ok(false)` when the interval lies entirely outside the
    /// operating window and nothing was recorded.
    pub fn add_block(
        &mut self,
        kind: UnavailabilityKind,
        machine: &MachineId,
        date: NaiveDate,
        interval: Interval,
    ) -> Result<bool> {
        if !self.contains(machine) {
            return Err(Error::UnknownMachine(machine.clone()));
        }
        let Some(clipped) = interval.intersect(&self.operating_window) else {
            return Ok(false);
        };
        let map = match kind {
            UnavailabilityKind::Planned => &mut self.planned_unavailability,
            UnavailabilityKind::Failure => &mut self.failures,
        };
        map.entry(date).or_default().insert((machine.clone(), clipped));
        Ok(true)
    }

    pub fn block_full_day(
        &mut self,
        kind: UnavailabilityKind,
        machine: &MachineId,
        date: NaiveDate,
    ) -> Result<bool> {
        let w = self.operating_window;
        self.add_block(kind, machine, date, w)
    }

    pub fn blocks(
        &self,
        kind: UnavailabilityKind,
    ) -> impl Iterator<Item = (NaiveDate, &MachineId, Interval)> {
        let map = match kind {
            UnavailabilityKind::Planned => &self.planned_unavailability,
            UnavailabilityKind::Failure => &self.failures,
        };
        map.iter()
            .flat_map(|(d, set)| set.iter().map(move |(m, iv)| (*d, m, *iv)))
    }

    pub fn clear_failures(&mut self) {
        self.failures.clear();
    }

    /// Planned and failure intervals on `machine` at `date`, sorted and merged.
    pub fn blocked_intervals(&self, machine: &MachineId, date: NaiveDate) -> Vec<Interval> {
        let mut out: Vec<Interval> = [&self.planned_unavailability, &self.failures]
            .into_iter()
            .filter_map(|map| map.get(&date))
            .flat_map(|set| set.iter().filter(|(m, _)| m == machine).map(|(_, iv)| *iv))
            .collect();
        out.sort();
        merge(out)
    }

    /// Minutes of the operating window not blocked on `machine` at `date`.
    pub fn available_minutes(&self, machine: &MachineId, date: NaiveDate) -> u32 {
        let blocked: u32 = self
            .blocked_intervals(machine, date)
            .iter()
            .map(|iv| iv.len() as u32)
            .sum();
        self.operating_window.len() as u32 - blocked
    }

    pub fn beam_match(&self, a: &MachineId, b: &MachineId) -> Result<BeamMatch> {
        Ok(beam_match(self.machine(a)?, self.machine(b)?))
    }
}

/// Beam-match relation derived from linac type and site.
pub fn beam_match(a: &Machine, b: &Machine) -> BeamMatch {
    if a.linac_type != b.linac_type {
        BeamMatch::None
    } else if a.site == b.site {
        BeamMatch::Complete
    } else {
        BeamMatch::Partial
    }
}

fn merge(sorted: Vec<Interval>) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => out.push(iv),
        }
    }
    out
}

/// Free sub-intervals of `outer` after removing `taken` (any order).
pub(crate) fn free_segments(outer: Interval, taken: &[Interval]) -> Vec<Interval> {
    let mut taken: Vec<Interval> = taken.iter().filter_map(|t| t.intersect(&outer)).collect();
    taken.sort();
    let mut out = Vec::new();
    let mut cursor = outer.start;
    for t in merge(taken) {
        if t.start > cursor {
            out.push(Interval::new(cursor, t.start));
        }
        cursor = cursor.max(t.end);
    }
    if cursor < outer.end {
        out.push(Interval::new(cursor, outer.end));
    }
    out
}

/// Shrinks `iv` to grid boundaries: start rounded up, end rounded down.
pub(crate) fn grid_align(iv: Interval, grid: u16) -> Option<Interval> {
    let s = iv.start.minutes().div_ceil(grid) * grid;
    let e = iv.end.minutes() / grid * grid;
    (s < e).then(|| Interval::new(ClockTime::from_minutes(s), ClockTime::from_minutes(e)))
}
