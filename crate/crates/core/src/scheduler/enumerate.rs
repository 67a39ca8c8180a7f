use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Availability, PlanMetrics, UnitWeights};
use crate::model::{
    weekly_shortfall, BeamMatch, Clinic, CourseId, MachineTier, Pattern, Priority, SiteId,
    TimePreference, TreatmentCourse, TreatmentProtocol,
};
use crate::{Error, Result};

/// What the plan builder needs to know about one course.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub course_id: CourseId,
    pub priority: Priority,
    /// May use reserved capacity.
    pub privileged: bool,
    /// Reference date for waiting time; a working day.
    pub earliest_start: NaiveDate,
    /// Last allowed first-fraction date, if any.
    pub latest_start: Option<NaiveDate>,
    pub n_fractions: u32,
    pub duration_first: u16,
    pub duration_rest: u16,
    pub machines: Vec<(crate::model::MachineId, MachineTier)>,
    /// Extra cost units per fraction on each machine, parallel to
    /// `machines`. Empty means none.
    pub machine_bias: Vec<i64>,
    pub patterns: Vec<Pattern>,
    pub min_span: u32,
    pub min_per_week: u8,
    pub max_gap: Option<u32>,
    pub allow_partial_switch: bool,
    pub site_preference: Option<SiteId>,
    pub time_preference: Option<TimePreference>,
}

impl PlanRequest {
    pub fn for_course(
        course: &TreatmentCourse,
        protocol: &TreatmentProtocol,
        earliest_start: NaiveDate,
    ) -> Self {
        let machines = protocol
            .preferred_machines
            .iter()
            .map(|m| (m.clone(), MachineTier::Preferred))
            .chain(
                protocol
                    .allowed_machines
                    .iter()
                    .map(|m| (m.clone(), MachineTier::Allowed)),
            )
            .collect();
        Self {
            course_id: course.course_id.clone(),
            priority: protocol.priority,
            privileged: protocol.priority == Priority::A,
            earliest_start,
            latest_start: None,
            n_fractions: course.n_fractions,
            duration_first: course.duration_first,
            duration_rest: course.duration_rest,
            machines,
            machine_bias: Vec::new(),
            patterns: protocol.patterns.clone(),
            min_span: protocol.min_span(course.n_fractions),
            min_per_week: protocol.min_fractions_per_week,
            max_gap: protocol.max_gap_between_fractions,
            allow_partial_switch: protocol.allow_partial_switch,
            site_preference: Some(course.site_preference.clone()),
            time_preference: course.time_preference,
        }
    }
}

/// One fraction's `(day, machine, window)` as indices into an
/// [`Availability`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub day: u16,
    pub machine: u8,
    pub window: u8,
}

/// A complete assignment of one course's fractions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePlan {
    pub course_id: CourseId,
    pub slots: Vec<Slot>,
    pub metrics: PlanMetrics,
    /// Weighted cost in integer units.
    pub cost: i64,
}

impl CandidatePlan {
    pub fn start_day(&self) -> u16 {
        self.slots[0].day
    }
}

/// Limits of one enumeration.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationLimits {
    pub k: usize,
    pub start_offsets: usize,
}

impl EnumerationLimits {
    pub const EXHAUSTIVE: Self = Self {
        k: usize::MAX,
        start_offsets: usize::MAX,
    };
}

struct Opt {
    machine: usize,
    bias: i64,
    preferred: bool,
    off_site: bool,
}

/// Lists up to `k` cheapest plans of a course against current capacity.
///
/// A plan is built from a start day, a pattern, and a first `(machine,
/// window)`: every later fraction goes to the cheapest fitting option on the
/// next allowed day, moving on a day when nothing fits. Machine changes
/// follow the beam-match rules (any number of complete-match switches, at
/// most one partial-match switch when the protocol allows it). Plans that
/// break a weekly minimum, a gap limit or the availability range are
/// dropped. Start days run from the earliest start for `start_offsets`
/// working days.
///
/// The result is sorted by cost and always contains a plan at the earliest
/// feasible start day if one exists.
pub fn enumerate_plans(
    req: &PlanRequest,
    avail: &Availability,
    clinic: &Clinic,
    units: &UnitWeights,
    limits: EnumerationLimits,
) -> Result<Vec<CandidatePlan>> {
    let days = avail.days();
    let nd = days.len();
    if nd == 0 || req.n_fractions == 0 || limits.k == 0 {
        return Ok(Vec::new());
    }
    let mut opts = Vec::with_capacity(req.machines.len());
    for (i, (m, tier)) in req.machines.iter().enumerate() {
        let mi = avail
            .machine_index(m)
            .ok_or_else(|| Error::UnknownMachine(m.clone()))?;
        let site = &clinic.park.machines()[mi].site;
        opts.push(Opt {
            machine: mi,
            bias: req.machine_bias.get(i).copied().unwrap_or(0),
            preferred: *tier == MachineTier::Preferred,
            off_site: req.site_preference.as_ref().is_some_and(|s| s != site),
        });
    }
    let nw = avail.n_windows();
    let off_window: Vec<bool> = (0..nw)
        .map(|w| match req.time_preference {
            None => false,
            Some(TimePreference::Morning) => !clinic.layout.is_morning(w),
            Some(TimePreference::Afternoon) => clinic.layout.is_morning(w),
        })
        .collect();
    let static_cost = |o: &Opt, w: usize| -> i64 {
        o.bias
            + (if o.preferred { 0 } else { units.non_preferred })
            + if o.off_site { units.off_site } else { 0 }
            + if off_window[w] { units.off_window } else { 0 }
    };

    // Waiting is counted in working days from the earliest start, which may
    // lie before the first plannable day.
    let cal = &clinic.calendar;
    let offset = cal.working_days_between(req.earliest_start, days[0])?;
    let first_start = (-offset).max(0) as usize;
    let last_start = match req.latest_start {
        Some(l) if l < days[0] => return Ok(Vec::new()),
        Some(l) => days.partition_point(|d| *d <= l).saturating_sub(1).min(nd - 1),
        None => nd - 1,
    };
    let wait_units = units.waiting[req.priority.index()];
    let waiting_at = |s: usize| (s as i64 + offset) as u32;

    let d1 = avail.rounded(req.duration_first);
    let d2 = avail.rounded(req.duration_rest);
    let n = req.n_fractions as usize;
    let mut plans: Vec<CandidatePlan> = Vec::new();
    let mut seen: HashSet<Vec<Slot>> = HashSet::new();
    let mut earliest_best: Option<CandidatePlan> = None;
    let mut slots: Vec<Slot> = Vec::with_capacity(n);
    let mut dates: Vec<NaiveDate> = Vec::with_capacity(n);

    let mut s = first_start;
    let mut tried = 0;
    while s <= last_start && tried < limits.start_offsets {
        tried += 1;
        let lb = wait_units * waiting_at(s) as i64;
        if plans.len() >= limits.k && plans[limits.k - 1].cost <= lb {
            break;
        }
        if nd - s < req.min_span as usize {
            break;
        }
        let before = plans.len();
        for &pattern in &req.patterns {
            let step = pattern.step() as usize;
            for o0 in &opts {
                for w0 in 0..nw {
                    if !avail.fits(avail.cell(s, o0.machine, w0), d1, req.privileged) {
                        continue;
                    }
                    slots.clear();
                    slots.push(Slot {
                        day: s as u16,
                        machine: o0.machine as u8,
                        window: w0 as u8,
                    });
                    let mut m = PlanMetrics {
                        waiting: waiting_at(s),
                        ..Default::default()
                    };
                    let mut extra = static_cost(o0, w0);
                    let mut partial_used = false;
                    let (mut pm, mut pw, mut pd) = (o0.machine, w0, s);
                    let mut ok = true;
                    for _ in 1..n {
                        let mut day = pd + step;
                        let mut placed = false;
                        while day < nd {
                            if req.max_gap.is_some_and(|g| day - pd > g as usize) {
                                break;
                            }
                            let mut best: Option<(i64, usize, usize, bool)> = None;
                            for o in &opts {
                                let bm = avail.beam(pm, o.machine);
                                let partial = match bm {
                                    BeamMatch::Complete => false,
                                    BeamMatch::Partial if req.allow_partial_switch && !partial_used => true,
                                    _ => continue,
                                };
                                for w in 0..nw {
                                    let c = static_cost(o, w)
                                        + if partial { units.partial_switch } else { 0 }
                                        + if w != pw { units.window_switch } else { 0 };
                                    // Ties go to the previous machine, then
                                    // to the lower index.
                                    let better = match best {
                                        None => true,
                                        Some((bc, bmi, _, _)) => {
                                            c < bc || (c == bc && o.machine == pm && bmi != pm)
                                        }
                                    };
                                    if better && avail.fits(avail.cell(day, o.machine, w), d2, req.privileged) {
                                        best = Some((c, o.machine, w, partial));
                                    }
                                }
                            }
                            if let Some((c, mi, w, partial)) = best {
                                extra += c;
                                if partial {
                                    partial_used = true;
                                    m.partial_switches += 1;
                                }
                                if w != pw {
                                    m.window_switches += 1;
                                }
                                slots.push(Slot {
                                    day: day as u16,
                                    machine: mi as u8,
                                    window: w as u8,
                                });
                                (pm, pw, pd) = (mi, w, day);
                                placed = true;
                                break;
                            }
                            day += 1;
                        }
                        if !placed {
                            ok = false;
                            break;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let span = (pd - s + 1) as u32;
                    m.excess = span.saturating_sub(req.min_span);
                    let mut bias = 0;
                    for sl in &slots {
                        let o = opts.iter().find(|o| o.machine == sl.machine as usize).expect("own option");
                        bias += o.bias;
                        m.non_preferred += u32::from(!o.preferred);
                        m.off_site += u32::from(o.off_site);
                        m.off_window += u32::from(off_window[sl.window as usize]);
                    }
                    dates.clear();
                    dates.extend(slots.iter().map(|sl| days[sl.day as usize]));
                    if weekly_shortfall(&dates, req.min_per_week, cal).is_some() {
                        continue;
                    }
                    if !seen.insert(slots.clone()) {
                        continue;
                    }
                    let cost = units.cost(&m, req.priority) + bias;
                    debug_assert_eq!(cost, lb + extra + units.excess * m.excess as i64);
                    plans.push(CandidatePlan {
                        course_id: req.course_id.clone(),
                        slots: slots.clone(),
                        metrics: m,
                        cost,
                    });
                }
            }
        }
        if earliest_best.is_none() && plans.len() > before {
            earliest_best = plans[before..].iter().min_by(|a, b| order(a, b)).cloned();
        }
        if plans.len() > limits.k {
            plans.sort_by(order);
            plans.truncate(limits.k);
        }
        s += 1;
    }
    plans.sort_by(order);
    plans.truncate(limits.k);
    if let Some(e) = earliest_best {
        if !plans.iter().any(|p| p.start_day() == e.start_day()) {
            plans.pop();
            plans.push(e);
        }
    }
    Ok(plans)
}

fn order(a: &CandidatePlan, b: &CandidatePlan) -> std::cmp::Ordering {
    a.cost.cmp(&b.cost).then_with(|| a.slots.cmp(&b.slots))
}
