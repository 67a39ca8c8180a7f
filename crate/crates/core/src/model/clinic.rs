use serde::{Deserialize, Serialize};

use super::{Calendar, CalendarConfig, ClockTime, Interval, Machine, MachinePark};
use crate::Result;

/// The daily time windows of the operating day. The last one may be short.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayLayout {
    windows: Vec<Interval>,
    grid: u16,
    noon: ClockTime,
}

impl DayLayout {
    pub fn new(operating: Interval, window_length: u16, grid: u16, noon: ClockTime) -> Self {
        let mut windows = Vec::new();
        let mut s = operating.start.minutes();
        while s < operating.end.minutes() {
            let e = (s + window_length).min(operating.end.minutes());
            windows.push(Interval::new(ClockTime::from_minutes(s), ClockTime::from_minutes(e)));
            s = e;
        }
        Self { windows, grid, noon }
    }

    pub fn windows(&self) -> &[Interval] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window(&self, index: usize) -> Interval {
        self.windows[index]
    }

    pub fn window_of(&self, t: ClockTime) -> Option<usize> {
        self.windows.iter().position(|w| w.contains(t))
    }

    pub fn grid(&self) -> u16 {
        self.grid
    }

    /// Duration rounded up to the time grid.
    pub fn rounded(&self, minutes: u16) -> u16 {
        minutes.div_ceil(self.grid) * self.grid
    }

    /// Morning windows start before the noon boundary.
    pub fn is_morning(&self, index: usize) -> bool {
        self.windows[index].start < self.noon
    }
}

/// On-disk shape of the clinic file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClinicFile {
    pub calendar: CalendarConfig,
    pub operating_window: Interval,
    pub machines: Vec<Machine>,
}

/// Machine park, calendar and window layout bundled together.
#[derive(Debug, Clone)]
pub struct Clinic {
    pub calendar: Calendar,
    pub park: MachinePark,
    pub layout: DayLayout,
}

impl Clinic {
    pub fn new(calendar: Calendar, park: MachinePark) -> Self {
        let cfg = calendar.config();
        let layout = DayLayout::new(
            park.operating_window(),
            cfg.window_length,
            cfg.time_grid,
            cfg.noon_boundary,
        );
        Self {
            calendar,
            park,
            layout,
        }
    }

    pub fn from_file(file: ClinicFile) -> Result<Self> {
        let calendar = Calendar::new(file.calendar)?;
        let park = MachinePark::new(file.machines, file.operating_window)?;
        Ok(Self::new(calendar, park))
    }

    pub fn to_file(&self) -> ClinicFile {
        ClinicFile {
            calendar: self.calendar.config().clone(),
            operating_window: self.park.operating_window(),
            machines: self.park.machines().to_vec(),
        }
    }
}
