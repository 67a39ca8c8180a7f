use serde::{Deserialize, Serialize};

use crate::model::Priority;
use crate::{Error, Result};

/// Weight per unit of each schedule-quality objective.
///
/// Waiting is charged per working day late, multiplied by the course's
/// priority multiplier. Excess days and waiting share the top level; the
/// remaining terms are charged per fraction or per consecutive-fraction pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveWeights {
    pub waiting: f64,
    /// Multipliers for priorities A, B and C.
    pub priority_multipliers: [f64; 3],
    pub excess: f64,
    pub off_site: f64,
    pub non_preferred: f64,
    pub partial_switch: f64,
    pub window_switch: f64,
    pub off_window: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            waiting: 10_000.0,
            priority_multipliers: [3.0, 2.0, 1.0],
            excess: 10_000.0,
            off_site: 1_000.0,
            non_preferred: 100.0,
            partial_switch: 100.0,
            window_switch: 10.0,
            off_window: 10.0,
        }
    }
}

/// Objective counts of one course's schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub waiting: u32,
    pub excess: u32,
    pub off_site: u32,
    pub non_preferred: u32,
    pub partial_switches: u32,
    pub window_switches: u32,
    pub off_window: u32,
}

impl ObjectiveWeights {
    fn all(&self) -> [f64; 9] {
        let [a, b, c] = self.priority_multipliers;
        [
            self.waiting * a,
            self.waiting * b,
            self.waiting * c,
            self.excess,
            self.off_site,
            self.non_preferred,
            self.partial_switch,
            self.window_switch,
            self.off_window,
        ]
    }

    /// Checks positivity and that one day of waiting or excess outweighs the
    /// largest per-fraction charge of all lower-level terms together.
    pub fn validate(&self) -> Result<()> {
        if self.all().iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config("objective weights must be positive and finite"));
        }
        let top = self.waiting * self.priority_multipliers.iter().cloned().fold(f64::MAX, f64::min);
        let top = top.min(self.excess);
        let rest = self.off_site
            + self.non_preferred
            + self.partial_switch
            + self.window_switch
            + self.off_window;
        if top <= rest {
            return Err(Error::config(format!(
                "a waiting or excess day ({top}) must outweigh the per-fraction terms ({rest})"
            )));
        }
        Ok(())
    }

    pub fn waiting_weight(&self, p: Priority) -> f64 {
        self.waiting * self.priority_multipliers[p.index()]
    }

    pub fn cost(&self, m: &PlanMetrics, p: Priority) -> f64 {
        self.waiting_weight(p) * m.waiting as f64
            + self.excess * m.excess as f64
            + self.off_site * m.off_site as f64
            + self.non_preferred * m.non_preferred as f64
            + self.partial_switch * m.partial_switches as f64
            + self.window_switch * m.window_switches as f64
            + self.off_window * m.off_window as f64
    }

    /// Integer weights relative to the smallest one. Selection runs on these
    /// so that a uniform rescaling of the weights cannot change any
    /// comparison.
    pub fn units(&self) -> UnitWeights {
        let all = self.all();
        let min = all.iter().cloned().fold(f64::MAX, f64::min);
        let u = |w: f64| (1000.0 * w / min).round() as i64;
        let waiting = [u(all[0]), u(all[1]), u(all[2])];
        let top = waiting[0].max(u(self.excess));
        UnitWeights {
            waiting,
            excess: u(self.excess),
            off_site: u(self.off_site),
            non_preferred: u(self.non_preferred),
            partial_switch: u(self.partial_switch),
            window_switch: u(self.window_switch),
            off_window: u(self.off_window),
            defer: top * 1000,
        }
    }
}

/// Integer form of [`ObjectiveWeights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitWeights {
    pub waiting: [i64; 3],
    pub excess: i64,
    pub off_site: i64,
    pub non_preferred: i64,
    pub partial_switch: i64,
    pub window_switch: i64,
    pub off_window: i64,
    /// Charged for each real course left unscheduled in a batch.
    pub defer: i64,
}

impl UnitWeights {
    pub fn cost(&self, m: &PlanMetrics, p: Priority) -> i64 {
        self.waiting[p.index()] * m.waiting as i64
            + self.excess * m.excess as i64
            + self.off_site * m.off_site as i64
            + self.non_preferred * m.non_preferred as i64
            + self.partial_switch * m.partial_switches as i64
            + self.window_switch * m.window_switches as i64
            + self.off_window * m.off_window as i64
    }
}
