use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::model::{
    free_segments, grid_align, BeamMatch, Clinic, ClockTime, Interval, MachineId, Schedule,
};
use crate::{Error, Result};

/// A block at the end of each machine day that only privileged courses may
/// use, except on days up to and including `open_until`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reservation {
    pub minutes: u16,
    pub open_until: NaiveDate,
}

/// Remaining window capacity over a range of working days.
///
/// The capacity of a `(day, machine, window)` cell is the length of the
/// longest grid-aligned free stretch inside the window once unavailability
/// and fixed appointments are removed. Any set of fractions whose rounded
/// durations sum to at most that length can be given non-overlapping start
/// times inside the window.
#[derive(Debug, Clone)]
pub struct Availability {
    days: Vec<NaiveDate>,
    machines: Vec<MachineId>,
    n_windows: usize,
    grid: u16,
    cap: Vec<u16>,
    cap_open: Vec<u16>,
    used: Vec<u16>,
    used_open: Vec<u16>,
    beam: Vec<BeamMatch>,
}

impl Availability {
    /// Capacity between `first` and `last` (inclusive) around the
    /// appointments already in `fixed`.
    ///
    /// Fails with an input-integrity error when a fixed appointment in the
    /// range overlaps another one or an unavailable interval, or leaves the
    /// operating window.
    pub fn build(
        clinic: &Clinic,
        fixed: &Schedule,
        first: NaiveDate,
        last: NaiveDate,
        reservation: Option<Reservation>,
    ) -> Result<Self> {
        let cal = &clinic.calendar;
        let days: Vec<NaiveDate> = if first > last {
            Vec::new()
        } else {
            let lo = cal.index_on_or_after(first)?;
            cal.working_days()[lo..]
                .iter()
                .copied()
                .take_while(|d| *d <= last)
                .collect()
        };
        let park = &clinic.park;
        let machines: Vec<MachineId> = park.machines().iter().map(|m| m.id.clone()).collect();
        let nm = machines.len();
        let nw = clinic.layout.len();
        let grid = clinic.layout.grid();
        let op = park.operating_window();

        let mut taken: BTreeMap<(usize, usize), Vec<Interval>> = BTreeMap::new();
        if let (Some(&d0), Some(&dn)) = (days.first(), days.last()) {
            for ((m, d), appts) in fixed.by_machine_day_in(d0, dn) {
                let Some(mi) = machines.iter().position(|x| *x == m) else {
                    return Err(Error::InputIntegrity(format!("unknown machine `{m}` on {d}")));
                };
                let Some(di) = days.binary_search(&d).ok() else {
                    return Err(Error::InputIntegrity(format!(
                        "appointment on non-working day {d}"
                    )));
                };
                let blocked = park.blocked_intervals(&m, d);
                let mut prev: Option<Interval> = None;
                for a in appts {
                    let iv = a.interval();
                    let ctx = || format!("course `{}` fraction {} on {m} {d}", a.course_id, a.fraction_index);
                    if !op.covers(&iv) {
                        return Err(Error::InputIntegrity(format!("{} is outside operating hours", ctx())));
                    }
                    if prev.is_some_and(|p| p.overlaps(&iv)) {
                        return Err(Error::InputIntegrity(format!("{} overlaps another appointment", ctx())));
                    }
                    if blocked.iter().any(|b| b.overlaps(&iv)) {
                        return Err(Error::InputIntegrity(format!("{} lies in an unavailable interval", ctx())));
                    }
                    prev = Some(iv);
                    taken.entry((di, mi)).or_default().push(iv);
                }
            }
        }

        let cells = days.len() * nm * nw;
        let mut cap = vec![0u16; cells];
        let mut cap_open = vec![0u16; cells];
        for (di, &d) in days.iter().enumerate() {
            for (mi, m) in machines.iter().enumerate() {
                let mut t = park.blocked_intervals(m, d);
                if let Some(v) = taken.get(&(di, mi)) {
                    t.extend_from_slice(v);
                }
                let mut t_open = t.clone();
                if let Some(r) = reservation.filter(|r| d > r.open_until && r.minutes > 0) {
                    let s = op.end.minutes().saturating_sub(r.minutes).max(op.start.minutes());
                    t_open.push(Interval::new(ClockTime::from_minutes(s), op.end));
                }
                for w in 0..nw {
                    let win = clinic.layout.window(w);
                    let c = (di * nm + mi) * nw + w;
                    cap[c] = longest(win, &t, grid);
                    cap_open[c] = longest(win, &t_open, grid);
                }
            }
        }
        let beam = park
            .machines()
            .iter()
            .flat_map(|a| park.machines().iter().map(move |b| crate::model::beam_match(a, b)))
            .collect();
        Ok(Self {
            days,
            machines,
            n_windows: nw,
            grid,
            used: vec![0; cells],
            used_open: vec![0; cells],
            cap,
            cap_open,
            beam,
        })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn machines(&self) -> &[MachineId] {
        &self.machines
    }

    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    pub fn day_index(&self, d: NaiveDate) -> Option<usize> {
        self.days.binary_search(&d).ok()
    }

    pub fn machine_index(&self, m: &MachineId) -> Option<usize> {
        self.machines.iter().position(|x| x == m)
    }

    pub fn beam(&self, a: usize, b: usize) -> BeamMatch {
        self.beam[a * self.machines.len() + b]
    }

    /// Duration rounded up to the time grid.
    pub fn rounded(&self, minutes: u16) -> u16 {
        minutes.div_ceil(self.grid) * self.grid
    }

    #[inline]
    pub fn cell(&self, day: usize, machine: usize, window: usize) -> usize {
        (day * self.machines.len() + machine) * self.n_windows + window
    }

    /// Whether `minutes` (already rounded) still fit in the cell.
    #[inline]
    pub fn fits(&self, cell: usize, minutes: u16, privileged: bool) -> bool {
        self.used[cell] + minutes <= self.cap[cell]
            && (privileged || self.used_open[cell] + minutes <= self.cap_open[cell])
    }

    #[inline]
    pub fn take(&mut self, cell: usize, minutes: u16, privileged: bool) {
        self.used[cell] += minutes;
        if !privileged {
            self.used_open[cell] += minutes;
        }
    }

    #[inline]
    pub fn give(&mut self, cell: usize, minutes: u16, privileged: bool) {
        self.used[cell] -= minutes;
        if !privileged {
            self.used_open[cell] -= minutes;
        }
    }

    /// Remaining minutes in a cell for an unprivileged course.
    pub fn remaining(&self, day: usize, machine: usize, window: usize) -> u16 {
        let c = self.cell(day, machine, window);
        (self.cap[c] - self.used[c]).min(self.cap_open[c].saturating_sub(self.used_open[c]))
    }
}

fn longest(window: Interval, taken: &[Interval], grid: u16) -> u16 {
    free_segments(window, taken)
        .into_iter()
        .filter_map(|s| grid_align(s, grid))
        .map(|s| s.len())
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::model::{Appointment, AppointmentStatus, UnavailabilityKind};

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn capacity_follows_blocks_and_fixed_appointments() {
        let mut clinic = fixture::clinic();
        clinic
            .park
            .add_block(UnavailabilityKind::Planned, &"M1".into(), d("2020-01-06"), "08:00-09:00".parse().unwrap())
            .unwrap();
        let fixed = Schedule::from_appointments([Appointment {
            course_id: "x".into(),
            fraction_index: 1,
            machine: "M2".into(),
            date: d("2020-01-06"),
            window_index: 0,
            start: "09:00".parse().unwrap(),
            duration: 12,
            status: AppointmentStatus::Communicated,
        }]);
        let a = Availability::build(&clinic, &fixed, d("2020-01-04"), d("2020-01-07"), None).unwrap();
        assert_eq!(a.days(), &[d("2020-01-06"), d("2020-01-07")]);
        let m1 = a.machine_index(&"M1".into()).unwrap();
        let m2 = a.machine_index(&"M2".into()).unwrap();
        assert_eq!(a.remaining(0, m1, 0), 60);
        // 08:00-09:00 free, 09:15-10:00 free after grid alignment.
        assert_eq!(a.remaining(0, m2, 0), 60);
        assert_eq!(a.remaining(0, m2, 4), 90);
        assert_eq!(a.remaining(1, m2, 0), 120);
    }

    #[test]
    fn overlapping_fixed_input_is_rejected() {
        let clinic = fixture::clinic();
        let appt = |c: &str, s: &str| Appointment {
            course_id: c.into(),
            fraction_index: 1,
            machine: "M2".into(),
            date: d("2020-01-06"),
            window_index: 0,
            start: s.parse().unwrap(),
            duration: 30,
            status: AppointmentStatus::Communicated,
        };
        let fixed = Schedule::from_appointments([appt("x", "09:00"), appt("y", "09:20")]);
        assert!(matches!(
            Availability::build(&clinic, &fixed, d("2020-01-06"), d("2020-01-07"), None),
            Err(Error::InputIntegrity(_))
        ));
    }

    #[test]
    fn reservation_limits_unprivileged_use() {
        let clinic = fixture::clinic();
        let r = Reservation {
            minutes: 60,
            open_until: d("2020-01-06"),
        };
        let a = Availability::build(&clinic, &Schedule::new(), d("2020-01-06"), d("2020-01-07"), Some(r)).unwrap();
        let last = a.cell(1, 0, 4);
        assert!(a.fits(last, 90, true));
        assert!(!a.fits(last, 35, false));
        assert!(a.fits(last, 30, false));
        assert!(a.fits(a.cell(0, 0, 4), 90, false));
    }
}
