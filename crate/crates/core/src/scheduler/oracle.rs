use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::select::State;
use super::{solve_batch, Availability, BatchContext, Item, Selection, SelectionMode};
use crate::config::RunConfig;
use crate::model::{
    Calendar, CalendarConfig, Clinic, ClockTime, CourseId, Interval, Machine, MachineId, MachinePark,
    Pattern, PatientId, Priority, ProtocolId, ProtocolTable, Schedule, TimePreference,
    TreatmentCourse, TreatmentProtocol, UnavailabilityKind,
};
use crate::{Error, Result};

/// Hard size limits of the exhaustive search.
pub const MAX_MACHINES: usize = 4;
pub const MAX_COURSES: usize = 6;
pub const MAX_DAYS: usize = 12;

/// Exact minimum-cost selection by branch and bound.
///
/// Explores every combination of one plan (or none, at the skip cost) per
/// item over the same candidate lists the heuristic sees. Only feasible for
/// tiny instances; larger ones are refused.
pub fn brute_force_oracle(items: &[Item], avail: &mut Availability) -> Result<Selection> {
    if avail.machines().len() > MAX_MACHINES
        || items.len() > MAX_COURSES
        || avail.days().len() > MAX_DAYS
    {
        return Err(Error::SizeCap(format!(
            "{} machines, {} courses, {} working days (limits {MAX_MACHINES}, {MAX_COURSES}, {MAX_DAYS})",
            avail.machines().len(),
            items.len(),
            avail.days().len()
        )));
    }
    // Branch on the items with the fewest alternatives first.
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&i| (items[i].plans.len(), i));
    let floor: Vec<i64> = order
        .iter()
        .map(|&i| {
            items[i]
                .plans
                .first()
                .map_or(items[i].skip_cost, |p| p.cost.min(items[i].skip_cost))
        })
        .collect();
    let mut suffix = vec![0i64; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix[k] = suffix[k + 1] + floor[k];
    }
    let mut st = State::new(items, avail);
    let mut best = Best {
        cost: i64::MAX,
        chosen: vec![None; items.len()],
    };
    let mut current = vec![None; items.len()];
    dfs(&mut st, &order, &suffix, 0, 0, &mut current, &mut best);
    Ok(Selection {
        chosen: best.chosen,
        greedy_cost: best.cost,
        cost: best.cost,
        ls_moves: 0,
        budget_hit: false,
    })
}

struct Best {
    cost: i64,
    chosen: Vec<Option<usize>>,
}

fn dfs(
    st: &mut State,
    order: &[usize],
    suffix: &[i64],
    k: usize,
    acc: i64,
    current: &mut Vec<Option<usize>>,
    best: &mut Best,
) {
    if acc + suffix[k] >= best.cost {
        return;
    }
    if k == order.len() {
        best.cost = acc;
        best.chosen = current.clone();
        return;
    }
    let i = order[k];
    let item = &st.items()[i];
    let skip = item.skip_cost;
    for p in 0..item.plans.len() {
        let c = item.plans[p].cost;
        if c >= skip || acc + c + suffix[k + 1] >= best.cost {
            break;
        }
        if st.fits(i, p) {
            st.place(i, p);
            current[i] = Some(p);
            dfs(st, order, suffix, k + 1, acc + c, current, best);
            current[i] = None;
            st.unplace(i);
        }
    }
    dfs(st, order, suffix, k + 1, acc + skip, current, best);
}


/// A batch problem small enough for [`brute_force_oracle`].
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub seed: u64,
    pub clinic: Clinic,
    pub protocols: ProtocolTable,
    pub courses: Vec<TreatmentCourse>,
    /// Day the batch runs; planning starts the next working day.
    pub today: NaiveDate,
}

/// Upper size limits of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceShape {
    pub machines: usize,
    pub courses: usize,
    /// Plannable working days.
    pub days: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            machines: MAX_MACHINES,
            courses: MAX_COURSES,
            days: MAX_DAYS,
        }
    }
}

/// Draws a random instance of at most `shape`'s size.
///
/// Up to `shape.machines` machines (at least two when allowed) over two
/// sites and two linac types, three one-hour windows a day, between half
/// and all of `shape.days` plannable working days with random blocks, and
/// up to `shape.courses` courses of one to eight fractions. Windows are
/// short so that courses compete for the early cells. Shapes beyond the
/// oracle's limits are refused.
pub fn random_instance(seed: u64, shape: InstanceShape) -> Result<OracleInstance> {
    if shape.machines > MAX_MACHINES || shape.courses > MAX_COURSES || shape.days > MAX_DAYS {
        return Err(Error::SizeCap(format!(
            "{} machines, {} courses, {} working days (limits {MAX_MACHINES}, {MAX_COURSES}, {MAX_DAYS})",
            shape.machines, shape.courses, shape.days
        )));
    }
    if shape.machines == 0 || shape.courses == 0 || shape.days == 0 {
        return Err(Error::config("instance shape must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = |m: u32, day: u32| NaiveDate::from_ymd_opt(2020, m, day).expect("valid date");
    let today = d(1, 3);
    let mut cal = CalendarConfig::new(d(1, 1), d(3, 31));
    cal.holidays.insert(d(1, 1));
    cal.window_length = 60;
    let n_days = rng.random_range(shape.days.div_ceil(2)..=shape.days);
    let probe = Calendar::new(cal.clone())?;
    cal.span_end = probe.add_working_days(today.succ_opt().expect("valid date"), n_days - 1)?;
    let calendar = Calendar::new(cal)?;

    let n_machines = rng.random_range(shape.machines.min(2)..=shape.machines);
    let machines: Vec<Machine> = (0..n_machines)
        .map(|i| Machine {
            id: MachineId::new(format!("M{}", i + 1)),
            site: ["S1", "S2"][rng.random_range(0..2)].into(),
            linac_type: ["T1", "T2"][rng.random_range(0..2)].into(),
        })
        .collect();
    let ids: Vec<MachineId> = machines.iter().map(|m| m.id.clone()).collect();
    let mut park = MachinePark::new(machines, Interval::new(ClockTime::hm(8, 0), ClockTime::hm(11, 0)))?;
    for &day in calendar.working_days().iter().filter(|x| **x > today) {
        for m in &ids {
            if rng.random_bool(0.35) {
                let (start, len) = if rng.random_bool(0.2) {
                    (8 * 60, 180)
                } else {
                    (8 * 60 + 15 * rng.random_range(0..10u16), 15 * rng.random_range(1..=6u16))
                };
                let iv = Interval::new(ClockTime::from_minutes(start), ClockTime::from_minutes((start + len).min(11 * 60)));
                park.add_block(UnavailabilityKind::Planned, m, day, iv)?;
            }
        }
    }
    let clinic = Clinic::new(calendar, park);

    let protocols = ProtocolTable::new(Priority::ALL.iter().map(|&p| {
        let mut shuffled = ids.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let n_pref = rng.random_range(1..=shuffled.len());
        let n_allowed = rng.random_range(0..=shuffled.len() - n_pref);
        TreatmentProtocol {
            id: ProtocolId::new(format!("P{p}")),
            aliases: Vec::new(),
            priority: p,
            min_fractions_per_week: rng.random_range(1..=3),
            pre_treatment_days: rng.random_range(0..=3),
            preferred_machines: shuffled[..n_pref].to_vec(),
            allowed_machines: shuffled[n_pref..n_pref + n_allowed].to_vec(),
            first_fraction_duration: 30,
            subsequent_fraction_duration: 15,
            max_fractions_per_day: 1,
            max_gap_between_fractions: None,
            patterns: if rng.random_bool(0.3) {
                vec![Pattern::Daily, Pattern::EveryOtherDay]
            } else {
                vec![Pattern::Daily]
            },
            allow_partial_switch: rng.random_bool(0.5),
            allow_repair_doubling: true,
            fraction_options: Vec::new(),
        }
    }))?;
    let protocol_ids: Vec<ProtocolId> = protocols.iter().map(|p| p.id.clone()).collect();

    let courses = (0..rng.random_range(shape.courses.min(2)..=shape.courses))
        .map(|i| TreatmentCourse {
            patient_id: PatientId::new(format!("P{i}")),
            course_id: CourseId::new(format!("C{i}")),
            creation_date: today - Days::new(rng.random_range(0..=2)),
            protocol_id: protocol_ids.choose(&mut rng).expect("three protocols").clone(),
            n_fractions: rng.random_range(1..=8),
            duration_first: 5 * rng.random_range(4..=9),
            duration_rest: 5 * rng.random_range(2..=6),
            site_preference: ["S1", "S2"][rng.random_range(0..2)].into(),
            follows_course: None,
            time_preference: [None, Some(TimePreference::Morning), Some(TimePreference::Afternoon)]
                [rng.random_range(0..3)],
            excluded: false,
        })
        .collect();
    Ok(OracleInstance {
        seed,
        clinic,
        protocols,
        courses,
        today,
    })
}

/// Heuristic and exact batch results on one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleComparison {
    pub seed: u64,
    pub courses: usize,
    pub heuristic_cost: i64,
    pub exact_cost: i64,
    pub heuristic_deferred: BTreeSet<CourseId>,
    pub exact_deferred: BTreeSet<CourseId>,
}

impl OracleComparison {
    /// Heuristic cost over exact cost; 1 when both are zero.
    pub fn ratio(&self) -> f64 {
        if self.exact_cost == 0 {
            if self.heuristic_cost == 0 { 1.0 } else { f64::INFINITY }
        } else {
            self.heuristic_cost as f64 / self.exact_cost as f64
        }
    }

    pub fn same_deferrals(&self) -> bool {
        self.heuristic_deferred == self.exact_deferred
    }
}

/// Solves `inst` with both selection modes under `config`'s weights and
/// solver settings. No placeholders are used.
pub fn compare_with_oracle(inst: &OracleInstance, config: &RunConfig) -> Result<OracleComparison> {
    let ctx = BatchContext {
        clinic: &inst.clinic,
        protocols: &inst.protocols,
        weights: &config.weights,
        solver: &config.solver,
        placeholders: &config.placeholders,
        reservation: None,
    };
    let fixed = Schedule::new();
    let solve = |mode| solve_batch(&ctx, inst.today, &inst.courses, &[], &fixed, mode);
    let h = solve(SelectionMode::Heuristic)?;
    let e = solve(SelectionMode::Exact)?;
    Ok(OracleComparison {
        seed: inst.seed,
        courses: inst.courses.len(),
        heuristic_cost: h.cost,
        exact_cost: e.cost,
        heuristic_deferred: h.deferred.into_iter().collect(),
        exact_deferred: e.deferred.into_iter().collect(),
    })
}
