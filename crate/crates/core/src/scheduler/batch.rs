use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use chrono::{Months, NaiveDate};
use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    brute_force_oracle, enumerate_plans, select_plans, Availability, CandidatePlan,
    EnumerationLimits, Item, ObjectiveWeights, PlaceholderPatient, PlanRequest, Reservation,
    SelectionLimits, WindowAssignment,
};
use crate::config::{PlaceholderConfig, SolverConfig};
use crate::model::{
    earliest_start, Clinic, CourseId, MachineId, MachineTier, Pattern, Priority, ProtocolTable,
    Schedule, TreatmentCourse,
};
use crate::{Error, Result};

/// Everything a batch solve reads besides the courses themselves.
#[derive(Debug, Clone, Copy)]
pub struct BatchContext<'a> {
    pub clinic: &'a Clinic,
    pub protocols: &'a ProtocolTable,
    pub weights: &'a ObjectiveWeights,
    pub solver: &'a SolverConfig,
    pub placeholders: &'a PlaceholderConfig,
    pub reservation: Option<Reservation>,
}

/// How plans are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Regret greedy plus local search over the `k` cheapest plans.
    Heuristic,
    /// Branch and bound over all plans. Small instances only.
    Exact,
}

/// Audit record of one batch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchTrace {
    pub date: Option<NaiveDate>,
    pub pending: usize,
    pub placeholders: usize,
    pub placeholders_placed: usize,
    pub candidates: usize,
    /// Total cost (integer units) after the greedy phase and after local
    /// search, summed over stages.
    pub greedy_cost: i64,
    pub final_cost: i64,
    pub ls_moves: usize,
    pub stages: usize,
    pub scheduled: Vec<CourseId>,
    pub deferred: Vec<CourseId>,
    pub budget_hit: bool,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub assignments: Vec<WindowAssignment>,
    /// Selected plan per scheduled real course.
    pub plans: BTreeMap<CourseId, CandidatePlan>,
    /// Availability days the plan slots refer to.
    pub days: Vec<NaiveDate>,
    pub machines: Vec<MachineId>,
    pub deferred: Vec<CourseId>,
    /// Selection objective in integer units, deferral charges included.
    pub cost: i64,
    pub trace: BatchTrace,
    pub elapsed: Duration,
}

/// First and last plannable day of a batch run at the end of `today`.
pub fn planning_range(clinic: &Clinic, today: NaiveDate, horizon_months: u32) -> Option<(NaiveDate, NaiveDate)> {
    let cal = &clinic.calendar;
    let first = cal.next_working_day(today.succ_opt()?).ok()?;
    let last = (today + Months::new(horizon_months)).min(cal.span_end());
    (first <= last).then_some((first, last))
}

/// Plans the pending courses at the end of `today` around the appointments
/// in `fixed`.
///
/// Placeholders compete for capacity like priority-A courses and are
/// dropped from the result. A course whose predecessor is also pending is
/// planned in a later stage, once the predecessor's end is known; if the
/// predecessor is deferred, so is the course. Courses without a feasible or
/// selected plan are returned as deferred.
pub fn solve_batch(
    ctx: &BatchContext,
    today: NaiveDate,
    pending: &[TreatmentCourse],
    placeholders: &[PlaceholderPatient],
    fixed: &Schedule,
    mode: SelectionMode,
) -> Result<BatchOutcome> {
    let t0 = Instant::now();
    let deadline = t0 + Duration::from_secs_f64(ctx.solver.budget_secs);
    let units = ctx.weights.units();
    let cal = &ctx.clinic.calendar;
    let mut trace = BatchTrace {
        date: Some(today),
        pending: pending.len(),
        placeholders: placeholders.len(),
        ..Default::default()
    };
    let range = planning_range(ctx.clinic, today, ctx.solver.horizon_months);
    let (first, last) = range.unwrap_or((today, today.pred_opt().unwrap_or(today)));
    let mut avail = Availability::build(ctx.clinic, fixed, first, last, ctx.reservation)?;
    let limits = match mode {
        SelectionMode::Heuristic => EnumerationLimits {
            k: ctx.solver.k,
            start_offsets: ctx.solver.start_offsets,
        },
        SelectionMode::Exact => EnumerationLimits::EXHAUSTIVE,
    };

    let pending_ids: BTreeSet<&CourseId> = pending.iter().map(|c| &c.course_id).collect();
    let mut plans: BTreeMap<CourseId, CandidatePlan> = BTreeMap::new();
    let mut deferred: Vec<CourseId> = Vec::new();
    let mut remaining: Vec<&TreatmentCourse> = pending.iter().collect();
    let mut total_cost = 0i64;
    let mut stage = 0;

    while !remaining.is_empty() {
        // Courses whose predecessor is still undecided wait for a later stage.
        let (ready, later): (Vec<&TreatmentCourse>, Vec<&TreatmentCourse>) =
            remaining.iter().partition(|c| {
                c.follows_course.as_ref().is_none_or(|f| {
                    !pending_ids.contains(f) || plans.contains_key(f) || deferred.contains(f)
                })
            });
        if ready.is_empty() {
            return Err(Error::config("cyclic follows_course chain among pending courses"));
        }
        remaining = later;

        let mut requests: Vec<(PlanRequest, u8)> = Vec::new();
        for c in ready {
            let protocol = ctx.protocols.get(&c.protocol_id)?;
            let pred_last = match &c.follows_course {
                Some(f) if deferred.contains(f) => {
                    deferred.push(c.course_id.clone());
                    continue;
                }
                Some(f) => match plans.get(f) {
                    Some(p) => p.slots.last().map(|s| avail.days()[s.day as usize]),
                    None => fixed.last_date(f),
                },
                None => None,
            };
            let e = match earliest_start(c, protocol, cal, pred_last) {
                Ok(e) => e,
                Err(Error::OutOfRange(_)) => {
                    deferred.push(c.course_id.clone());
                    continue;
                }
                Err(e) => return Err(e),
            };
            let class = match protocol.priority {
                Priority::A => 0,
                Priority::B => 2,
                Priority::C => 3,
            };
            requests.push((PlanRequest::for_course(c, protocol, e), class));
        }
        requests.sort_by(|(a, ca), (b, cb)| {
            (ca, a.earliest_start, &a.course_id).cmp(&(cb, b.earliest_start, &b.course_id))
        });
        let n_real = requests.len();
        if stage == 0 && range.is_some() {
            requests.extend(placeholder_requests(ctx, placeholders));
        }
        let bias = contention_bias(ctx, &requests[..n_real]);
        for (r, _) in requests.iter_mut() {
            r.machine_bias = r.machines.iter().map(|(m, _)| bias.get(m).copied().unwrap_or(0)).collect();
        }
        if requests.is_empty() {
            continue;
        }

        let mut enumerated: Vec<Vec<CandidatePlan>> = Vec::with_capacity(requests.len());
        let real: Vec<Result<Vec<CandidatePlan>>> = requests[..n_real]
            .par_iter()
            .map(|(r, _)| enumerate_plans(r, &avail, ctx.clinic, &units, limits))
            .collect();
        for r in real {
            enumerated.push(r?);
        }
        // Placeholders of one day are identical; enumerate each day once.
        let mut by_day: BTreeMap<NaiveDate, Vec<CandidatePlan>> = BTreeMap::new();
        for (r, _) in &requests[n_real..] {
            let plans = match by_day.entry(r.earliest_start) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(enumerate_plans(r, &avail, ctx.clinic, &units, limits)?)
                }
            };
            enumerated.push(plans.clone());
        }

        let drop_cost = (ctx.placeholders.drop_penalty_days * units.waiting[0] as f64).round() as i64;
        let mut items: Vec<Item> = requests
            .iter()
            .zip(enumerated)
            .enumerate()
            .map(|(i, ((r, class), plans))| Item {
                plans,
                class: *class,
                by_regret: i < n_real,
                privileged: r.privileged,
                durations: (avail.rounded(r.duration_first), avail.rounded(r.duration_rest)),
                skip_cost: if i < n_real { units.defer } else { drop_cost },
            })
            .collect();
        trace.candidates += items.iter().map(|it| it.plans.len()).sum::<usize>();

        let sel = match mode {
            SelectionMode::Heuristic => select_plans(
                &items,
                &mut avail,
                SelectionLimits {
                    ls_max_passes: ctx.solver.ls_max_passes,
                    ls_candidates: ctx.solver.ls_candidates,
                    ls_max_ejections: ctx.solver.ls_max_ejections,
                    deadline: Some(deadline),
                },
            ),
            SelectionMode::Exact => {
                exact_with_columns(&requests[..n_real], &mut items, &mut avail, ctx.clinic, &units)?
            }
        };
        let mut chosen = sel.chosen;
        let mut stage_cost = sel.cost;
        if mode == SelectionMode::Heuristic && Instant::now() < deadline {
            stage_cost += refresh_plans(
                &requests[..n_real],
                &mut items,
                &mut chosen,
                &mut avail,
                ctx.clinic,
                &units,
                limits,
            )?;
        }
        if sel.budget_hit {
            warn!("batch {today}: time budget reached, keeping best selection found");
        }
        trace.greedy_cost += sel.greedy_cost;
        trace.final_cost += stage_cost;
        trace.ls_moves += sel.ls_moves;
        trace.budget_hit |= sel.budget_hit;
        total_cost += stage_cost;
        for (i, choice) in chosen.iter().enumerate() {
            if i >= n_real {
                trace.placeholders_placed += usize::from(choice.is_some());
                continue;
            }
            let id = requests[i].0.course_id.clone();
            match choice {
                Some(p) => {
                    plans.insert(id, items[i].plans[*p].clone());
                }
                None => deferred.push(id),
            }
        }
        stage += 1;
    }

    let courses: BTreeMap<&CourseId, &TreatmentCourse> =
        pending.iter().map(|c| (&c.course_id, c)).collect();
    let mut assignments = Vec::new();
    for (id, plan) in &plans {
        let c = courses[id];
        let priority = ctx.protocols.get(&c.protocol_id)?.priority;
        for (f, s) in plan.slots.iter().enumerate() {
            let fraction = f as u32 + 1;
            assignments.push(WindowAssignment {
                course_id: id.clone(),
                fraction_index: fraction,
                priority,
                machine: avail.machines()[s.machine as usize].clone(),
                date: avail.days()[s.day as usize],
                window_index: s.window,
                duration: c.duration_of(fraction),
            });
        }
    }
    deferred.sort();
    trace.stages = stage;
    trace.scheduled = plans.keys().cloned().collect();
    trace.deferred = deferred.clone();
    debug!(
        "batch {today}: {} scheduled, {} deferred, {} placeholders placed",
        plans.len(),
        deferred.len(),
        trace.placeholders_placed
    );
    Ok(BatchOutcome {
        assignments,
        plans,
        days: avail.days().to_vec(),
        machines: avail.machines().to_vec(),
        deferred,
        cost: total_cost,
        trace,
        elapsed: t0.elapsed(),
    })
}

/// Rebuilds each real course's plan against the capacity left by all other
/// selections and keeps it when strictly cheaper. Returns the cost change.
///
/// Candidates are enumerated against the capacity at the start of the
/// batch, so a course whose cheap plans each lost one cell to another
/// selection falls back to a much worse candidate. A fresh enumeration
/// routes around those cells.
fn refresh_plans(
    requests: &[(PlanRequest, u8)],
    items: &mut [Item],
    chosen: &mut [Option<usize>],
    avail: &mut Availability,
    clinic: &Clinic,
    units: &super::UnitWeights,
    limits: EnumerationLimits,
) -> Result<i64> {
    let mut delta = 0;
    for (i, (req, _)) in requests.iter().enumerate() {
        let it = &items[i];
        let best_known = it.plans.iter().map(|p| p.cost).min();
        let old_cost = chosen[i].map_or(it.skip_cost, |p| it.plans[p].cost);
        if best_known.is_none_or(|b| b >= old_cost) {
            continue;
        }
        let minutes = |f: usize| if f == 0 { it.durations.0 } else { it.durations.1 };
        if let Some(p) = chosen[i] {
            for (f, sl) in it.plans[p].slots.iter().enumerate() {
                let c = avail.cell(sl.day as usize, sl.machine as usize, sl.window as usize);
                avail.give(c, minutes(f), it.privileged);
            }
        }
        let fresh = enumerate_plans(req, avail, clinic, units, limits)?
            .into_iter()
            .min_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.slots.cmp(&b.slots)))
            .filter(|p| p.cost < old_cost);
        let keep = match fresh {
            Some(plan) => {
                delta += plan.cost - old_cost;
                items[i].plans.push(plan);
                chosen[i] = Some(items[i].plans.len() - 1);
                chosen[i]
            }
            None => chosen[i],
        };
        let it = &items[i];
        if let Some(p) = keep {
            for (f, sl) in it.plans[p].slots.iter().enumerate() {
                let c = avail.cell(sl.day as usize, sl.machine as usize, sl.window as usize);
                avail.take(c, if f == 0 { it.durations.0 } else { it.durations.1 }, it.privileged);
            }
        }
    }
    Ok(delta)
}

/// Exact selection over a growing plan space.
///
/// Branch and bound is exact over the enumerated plans, but enumeration
/// fills every fraction against the capacity at the start of the batch. So
/// after each round, every real course is enumerated again against the
/// capacity the other selected plans leave, and any new plan cheaper than
/// its current choice joins its list. Rounds repeat until no plan is added.
/// Takes the cells of the final selection.
fn exact_with_columns(
    requests: &[(PlanRequest, u8)],
    items: &mut [Item],
    avail: &mut Availability,
    clinic: &Clinic,
    units: &super::UnitWeights,
) -> Result<super::Selection> {
    const MAX_ROUNDS: usize = 50;
    let base = avail.clone();
    for round in 0.. {
        *avail = base.clone();
        let sel = brute_force_oracle(items, avail)?;
        take_selected(items, &sel.chosen, avail);
        if round + 1 == MAX_ROUNDS {
            return Ok(sel);
        }
        let mut added = false;
        for (i, (req, _)) in requests.iter().enumerate() {
            let it = &items[i];
            let current = sel.chosen[i].map_or(it.skip_cost, |p| it.plans[p].cost);
            if let Some(p) = sel.chosen[i] {
                for (f, sl) in it.plans[p].slots.iter().enumerate() {
                    let c = avail.cell(sl.day as usize, sl.machine as usize, sl.window as usize);
                    avail.give(c, if f == 0 { it.durations.0 } else { it.durations.1 }, it.privileged);
                }
            }
            let fresh: Vec<CandidatePlan> = enumerate_plans(req, avail, clinic, units, EnumerationLimits::EXHAUSTIVE)?
                .into_iter()
                .filter(|p| p.cost < current && !it.plans.iter().any(|q| q.slots == p.slots))
                .collect();
            if let Some(p) = sel.chosen[i] {
                for (f, sl) in it.plans[p].slots.iter().enumerate() {
                    let c = avail.cell(sl.day as usize, sl.machine as usize, sl.window as usize);
                    avail.take(c, if f == 0 { it.durations.0 } else { it.durations.1 }, it.privileged);
                }
            }
            if !fresh.is_empty() {
                added = true;
                let plans = &mut items[i].plans;
                plans.extend(fresh);
                plans.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.slots.cmp(&b.slots)));
            }
        }
        if !added {
            return Ok(sel);
        }
    }
    unreachable!("the round loop returns")
}

fn take_selected(items: &[Item], chosen: &[Option<usize>], avail: &mut Availability) {
    for (i, p) in chosen.iter().enumerate() {
        if let Some(p) = p {
            for (f, sl) in items[i].plans[*p].slots.iter().enumerate() {
                let c = avail.cell(sl.day as usize, sl.machine as usize, sl.window as usize);
                let m = if f == 0 { items[i].durations.0 } else { items[i].durations.1 };
                avail.take(c, m, items[i].privileged);
            }
        }
    }
}

fn placeholder_requests(
    ctx: &BatchContext,
    placeholders: &[PlaceholderPatient],
) -> Vec<(PlanRequest, u8)> {
    let mut machines: Vec<MachineId> = Vec::new();
    for p in ctx.protocols.iter().filter(|p| p.priority == Priority::A) {
        for m in p.machines() {
            if !machines.contains(m) {
                machines.push(m.clone());
            }
        }
    }
    machines.sort_by_key(|m| ctx.clinic.park.index_of(m));
    let cal = &ctx.clinic.calendar;
    let mut out: Vec<(PlanRequest, u8)> = placeholders
        .iter()
        .filter_map(|ph| {
            let start = cal.working_index(ph.expected_arrival)?;
            let latest = cal
                .try_date(start + ctx.placeholders.start_slack)
                .unwrap_or(ph.expected_arrival);
            Some((
                PlanRequest {
                    course_id: CourseId::new(format!(
                        "placeholder:{}:{}",
                        ph.expected_arrival, ph.index
                    )),
                    priority: Priority::A,
                    privileged: true,
                    earliest_start: ph.expected_arrival,
                    latest_start: Some(latest),
                    n_fractions: ph.n_fractions,
                    duration_first: ph.duration,
                    duration_rest: ph.duration,
                    machines: machines.iter().map(|m| (m.clone(), MachineTier::Preferred)).collect(),
                    machine_bias: Vec::new(),
                    patterns: vec![Pattern::Daily],
                    min_span: ph.n_fractions,
                    min_per_week: 1,
                    max_gap: None,
                    allow_partial_switch: true,
                    site_preference: None,
                    time_preference: None,
                },
                1,
            ))
        })
        .collect();
    out.sort_by(|(a, _), (b, _)| (a.earliest_start, &a.course_id).cmp(&(b.earliest_start, &b.course_id)));
    out
}

/// Tie-breaking charge per fraction on each machine.
///
/// Every pending B or C course spreads its demand over its preferred
/// machines on its own site (all preferred machines if none is on site), on
/// top of a floor from the protocol table. The charge stays far below one
/// unit of the smallest objective weight, so it only decides between
/// otherwise equal plans: courses and placeholders that accept many
/// machines leave the contested ones to courses that accept few.
fn contention_bias(ctx: &BatchContext, real: &[(PlanRequest, u8)]) -> BTreeMap<MachineId, i64> {
    const MAX_BIAS: f64 = 150.0;
    let mut pressure: BTreeMap<&MachineId, f64> = BTreeMap::new();
    for p in ctx.protocols.iter().filter(|p| p.priority != Priority::A) {
        for m in &p.preferred_machines {
            *pressure.entry(m).or_default() += 1.0 / p.preferred_machines.len() as f64;
        }
    }
    for (r, _) in real.iter().filter(|(r, _)| r.priority != Priority::A) {
        let preferred: Vec<&MachineId> = r
            .machines
            .iter()
            .filter(|(_, t)| *t == MachineTier::Preferred)
            .map(|(m, _)| m)
            .collect();
        let on_site: Vec<&MachineId> = preferred
            .iter()
            .copied()
            .filter(|m| {
                r.site_preference
                    .as_ref()
                    .is_none_or(|s| ctx.clinic.park.machine(m).is_ok_and(|mm| &mm.site == s))
            })
            .collect();
        let targets = if on_site.is_empty() { preferred } else { on_site };
        let minutes = r.duration_first as f64 + r.duration_rest as f64 * (r.n_fractions as f64 - 1.0);
        for m in &targets {
            *pressure.entry(m).or_default() += minutes / 1000.0 / targets.len() as f64;
        }
    }
    let max = pressure.values().cloned().fold(0.0, f64::max);
    pressure
        .into_iter()
        .map(|(m, p)| (m.clone(), if max > 0.0 { (MAX_BIAS * p / max).round() as i64 } else { 0 }))
        .collect()
}
