//! Day-by-day replay of a planning period.
//!
//! Every working day runs, in order: the day's machine failures and their
//! repairs, the day's arrivals, placeholder reservation, the batch solve
//! over everything not yet communicated, start-time assignment and the
//! notification freeze. Tentative courses are removed and planned again in
//! each batch; communicated appointments only move through repairs.
//!
//! The baseline replaces the batch with first-come-first-served planning of
//! one course at a time into a park that keeps a block at the end of each
//! machine day for priority A until the day before. Everything it books is
//! communicated at once.
//!
//! [`SimRunner`] advances one day per [`SimRunner::step`] and can be
//! snapshotted to a [`SimState`] and resumed with identical results.

mod output;

pub use output::{write_day_trace, write_timings};

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use chrono::{Months, NaiveDate};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SolverConfig};
use crate::disruption::{apply_failure, Displacement, FailureEvent, RepairContext, RepairRule};
use crate::metrics::{aggregate_report, QualityReport, ReportScope};
use crate::model::{
    AppointmentStatus, Clinic, CourseBooking, CourseId, Priority, ProtocolTable, Schedule,
    TreatmentCourse, UnavailabilityKind,
};
use crate::scheduler::{
    assign_start_times, freeze_notifications, planning_range, reserve_placeholders, solve_batch,
    BatchContext, Reservation, SelectionMode,
};
use crate::validate::validate_all;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Batch optimization with placeholder reservation.
    Dynamic,
    /// First come, first served with a static end-of-day reservation.
    Baseline,
}

/// Inputs shared by every day of a run.
///
/// `clinic` carries planned unavailability and, as failure blocks, the
/// failures that will happen. Failures are revealed on the morning of
/// their date.
#[derive(Debug, Clone, Copy)]
pub struct SimInputs<'a> {
    pub clinic: &'a Clinic,
    pub protocols: &'a ProtocolTable,
    pub courses: &'a [TreatmentCourse],
    pub input_schedule: &'a Schedule,
}

/// Deterministic record of one simulated day.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayTrace {
    pub date: Option<NaiveDate>,
    pub arrivals: usize,
    pub failures: usize,
    pub displaced: usize,
    pub unrepaired: usize,
    /// Courses planned in the batch, re-planned tentative ones included.
    pub batch_size: usize,
    pub placeholders: usize,
    pub placeholders_placed: usize,
    pub candidates: usize,
    /// Selection cost before and after local search, in integer units.
    pub greedy_cost: i64,
    pub ls_moves: usize,
    pub scheduled: usize,
    pub deferred: usize,
    pub communicated: usize,
    pub final_cost: i64,
    pub budget_hit: bool,
}

/// Wall-clock time of one day's batch. Kept apart from [`DayTrace`] so that
/// traces are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTiming {
    pub date: NaiveDate,
    pub batch_secs: f64,
}

/// Everything needed to continue a run, given the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub config: RunConfig,
    pub mode: SimMode,
    /// Last completed day.
    pub today: Option<NaiveDate>,
    pub schedule: Schedule,
    /// Arrived courses without a plan, in arrival order.
    pub deferred: Vec<CourseId>,
    /// Index of the next course to arrive, in arrival order.
    pub next_arrival: usize,
    /// Priority-A arrivals per creation date.
    pub a_arrivals: BTreeMap<NaiveDate, u32>,
    pub applied_failures: Vec<FailureEvent>,
    pub displacements: Vec<(NaiveDate, Displacement)>,
    pub trace: Vec<DayTrace>,
    pub timings: Vec<DayTiming>,
    pub seed: u64,
}

impl SimState {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub state: SimState,
    pub report: QualityReport,
    /// Park as it ended, failures included.
    pub clinic: Clinic,
}

impl SimOutput {
    pub fn schedule(&self) -> &Schedule {
        &self.state.schedule
    }
}

pub struct SimRunner<'a> {
    inputs: SimInputs<'a>,
    state: SimState,
    clinic: Clinic,
    /// Failures by date, in the park's order.
    failures: BTreeMap<NaiveDate, Vec<FailureEvent>>,
    /// Courses in arrival order: creation date, then course id.
    arrival_order: Vec<usize>,
    by_id: BTreeMap<CourseId, TreatmentCourse>,
}

fn failure_events(clinic: &Clinic) -> BTreeMap<NaiveDate, Vec<FailureEvent>> {
    let mut out: BTreeMap<NaiveDate, Vec<FailureEvent>> = BTreeMap::new();
    for (date, m, iv) in clinic.park.blocks(UnavailabilityKind::Failure) {
        out.entry(date).or_default().push(FailureEvent {
            machine: m.clone(),
            date,
            interval: iv,
        });
    }
    out
}

impl<'a> SimRunner<'a> {
    /// Checks the inputs and prepares day one.
    pub fn new(config: &RunConfig, inputs: SimInputs<'a>, mode: SimMode) -> Result<Self> {
        config.validate()?;
        let mut schedule = inputs.input_schedule.clone();
        for a in schedule.iter_mut() {
            a.status = AppointmentStatus::Communicated;
        }
        let report = validate_all(&schedule, inputs.clinic, inputs.protocols, inputs.courses);
        if !report.is_clean() {
            let first = &report.violations[0];
            return Err(Error::InputIntegrity(format!(
                "input schedule has {} violations, first: {} {}",
                report.errors, first.check, first.detail
            )));
        }
        let state = SimState {
            config: config.clone(),
            mode,
            today: None,
            schedule,
            deferred: Vec::new(),
            next_arrival: 0,
            a_arrivals: BTreeMap::new(),
            applied_failures: Vec::new(),
            displacements: Vec::new(),
            trace: Vec::new(),
            timings: Vec::new(),
            seed: config.seed,
        };
        Self::with_state(state, inputs)
    }

    /// Continues from a snapshot taken with [`SimRunner::snapshot`].
    pub fn resume(state: SimState, inputs: SimInputs<'a>) -> Result<Self> {
        state.config.validate()?;
        Self::with_state(state, inputs)
    }

    fn with_state(state: SimState, inputs: SimInputs<'a>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for c in inputs.courses {
            c.validate()?;
            inputs.protocols.get(&c.protocol_id)?;
            if by_id.insert(c.course_id.clone(), c.clone()).is_some() {
                return Err(Error::config(format!("duplicate course `{}`", c.course_id)));
            }
        }
        let mut arrival_order: Vec<usize> = (0..inputs.courses.len()).collect();
        arrival_order.sort_by(|&a, &b| {
            let (ca, cb) = (&inputs.courses[a], &inputs.courses[b]);
            (ca.creation_date, &ca.course_id).cmp(&(cb.creation_date, &cb.course_id))
        });
        let mut clinic = inputs.clinic.clone();
        let failures = failure_events(&clinic);
        clinic.park.clear_failures();
        let sim_start = state.config.sim_start;
        for ev in failures.range(..sim_start).flat_map(|(_, v)| v) {
            clinic.park.add_block(UnavailabilityKind::Failure, &ev.machine, ev.date, ev.interval)?;
        }
        for ev in &state.applied_failures {
            clinic.park.add_block(UnavailabilityKind::Failure, &ev.machine, ev.date, ev.interval)?;
        }
        Ok(Self {
            inputs,
            state,
            clinic,
            failures,
            arrival_order,
            by_id,
        })
    }

    pub fn snapshot(&self) -> SimState {
        self.state.clone()
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// The next working day to simulate, if any is left.
    pub fn next_day(&self) -> Option<NaiveDate> {
        let cal = &self.clinic.calendar;
        let from = match self.state.today {
            Some(t) => t.succ_opt()?,
            None => self.state.config.sim_start,
        };
        let d = cal.next_working_day(from).ok()?;
        (d <= self.state.config.sim_end).then_some(d)
    }

    /// Simulates one working day. Returns `false` once the period is over.
    pub fn step(&mut self) -> Result<bool> {
        let Some(today) = self.next_day() else {
            return Ok(false);
        };
        let mut day = DayTrace {
            date: Some(today),
            ..Default::default()
        };
        let horizon_months = self.state.config.solver.horizon_months;
        let horizon_end = (today + Months::new(horizon_months)).min(self.clinic.calendar.span_end());

        // Failures known this morning.
        let events = self.failures.get(&today).cloned().unwrap_or_default();
        for ev in events {
            let ctx = RepairContext {
                protocols: self.inputs.protocols,
                courses: &self.by_id,
                horizon_end,
            };
            let log = apply_failure(&mut self.state.schedule, &ev, &mut self.clinic, &ctx)?;
            day.failures += 1;
            day.displaced += log.len();
            day.unrepaired += log.iter().filter(|d| d.rule == RepairRule::Unrepaired).count();
            self.state.applied_failures.push(ev);
            self.state.displacements.extend(log.into_iter().map(|d| (today, d)));
        }

        // Arrivals up to today.
        let mut arrived: Vec<CourseId> = Vec::new();
        while let Some(&i) = self.arrival_order.get(self.state.next_arrival) {
            let c = &self.inputs.courses[i];
            if c.creation_date > today {
                break;
            }
            self.state.next_arrival += 1;
            if self.state.schedule.contains_course(&c.course_id) {
                continue;
            }
            if c.creation_date >= self.state.config.sim_start
                && self.inputs.protocols.get(&c.protocol_id)?.priority == Priority::A
            {
                *self.state.a_arrivals.entry(c.creation_date).or_default() += 1;
            }
            arrived.push(c.course_id.clone());
        }
        day.arrivals = arrived.len();

        let t0 = Instant::now();
        match self.state.mode {
            SimMode::Dynamic => self.dynamic_batch(today, horizon_end, arrived, &mut day)?,
            SimMode::Baseline => self.baseline_batch(today, arrived, &mut day)?,
        }
        day.communicated = freeze_notifications(
            &mut self.state.schedule,
            today,
            self.state.config.solver.notification_days,
        )
        .len();
        self.state.timings.push(DayTiming {
            date: today,
            batch_secs: t0.elapsed().as_secs_f64(),
        });
        if day.budget_hit {
            info!("{today}: solver budget reached");
        }
        self.state.trace.push(day);
        self.state.today = Some(today);
        Ok(true)
    }

    fn record(&mut self, course: &CourseId, priority: Priority, today: NaiveDate) {
        if self.state.schedule.booking(course).is_none() {
            self.state.schedule.set_booking(
                course.clone(),
                CourseBooking {
                    priority,
                    batch_day: today,
                },
            );
        }
    }

    fn dynamic_batch(
        &mut self,
        today: NaiveDate,
        horizon_end: NaiveDate,
        arrived: Vec<CourseId>,
        day: &mut DayTrace,
    ) -> Result<()> {
        let cfg = &self.state.config;
        let mut ids: Vec<CourseId> = std::mem::take(&mut self.state.deferred);
        let tentative = self.state.schedule.tentative_courses();
        for c in &tentative {
            self.state.schedule.remove_course(c);
        }
        ids.extend(tentative);
        ids.extend(arrived);
        let mut seen = BTreeSet::new();
        ids.retain(|c| seen.insert(c.clone()));
        let pending: Vec<TreatmentCourse> = ids.iter().map(|c| self.by_id[c].clone()).collect();
        let placeholders = reserve_placeholders(
            &self.state.a_arrivals,
            Some(cfg.sim_start),
            today,
            horizon_end,
            &self.clinic.calendar,
            &cfg.placeholders,
        );
        let ctx = BatchContext {
            clinic: &self.clinic,
            protocols: self.inputs.protocols,
            weights: &cfg.weights,
            solver: &cfg.solver,
            placeholders: &cfg.placeholders,
            reservation: None,
        };
        let out = solve_batch(&ctx, today, &pending, &placeholders, &self.state.schedule, SelectionMode::Heuristic)?;
        let appts = assign_start_times(&self.clinic, &self.state.schedule, &out.assignments)?;
        day.batch_size = pending.len();
        day.placeholders = out.trace.placeholders;
        day.placeholders_placed = out.trace.placeholders_placed;
        day.candidates = out.trace.candidates;
        day.scheduled = out.plans.len();
        day.deferred = out.deferred.len();
        day.greedy_cost = out.trace.greedy_cost;
        day.ls_moves = out.trace.ls_moves;
        day.final_cost = out.trace.final_cost;
        day.budget_hit = out.trace.budget_hit;
        for a in appts {
            self.state.schedule.insert(a);
        }
        for id in out.plans.keys() {
            let p = self.inputs.protocols.get(&self.by_id[id].protocol_id)?.priority;
            self.record(id, p, today);
        }
        // Deferred courses keep their arrival order.
        let deferred: BTreeSet<&CourseId> = out.deferred.iter().collect();
        self.state.deferred = ids.into_iter().filter(|c| deferred.contains(c)).collect();
        Ok(())
    }

    fn baseline_batch(&mut self, today: NaiveDate, arrived: Vec<CourseId>, day: &mut DayTrace) -> Result<()> {
        let cfg = &self.state.config;
        let mut ids: Vec<CourseId> = std::mem::take(&mut self.state.deferred);
        ids.extend(arrived);
        let solver = SolverConfig {
            k: cfg.baseline.k,
            ls_max_passes: 0,
            ..cfg.solver.clone()
        };
        let reservation = planning_range(&self.clinic, today, cfg.solver.horizon_months).map(|(first, _)| Reservation {
            minutes: cfg.baseline.reserved_minutes,
            open_until: first,
        });
        let weights = cfg.weights.clone();
        let placeholders = cfg.placeholders.clone();
        day.batch_size = ids.len();
        let mut deferred = Vec::new();
        for id in ids {
            let course = self.by_id[&id].clone();
            let waiting_on = course.follows_course.as_ref().filter(|f| {
                self.by_id.contains_key(*f) && !self.state.schedule.contains_course(f)
            });
            if waiting_on.is_some() {
                deferred.push(id);
                continue;
            }
            let ctx = BatchContext {
                clinic: &self.clinic,
                protocols: self.inputs.protocols,
                weights: &weights,
                solver: &solver,
                placeholders: &placeholders,
                reservation,
            };
            let out = solve_batch(&ctx, today, std::slice::from_ref(&course), &[], &self.state.schedule, SelectionMode::Heuristic)?;
            day.candidates += out.trace.candidates;
            day.greedy_cost += out.trace.greedy_cost;
            day.final_cost += out.trace.final_cost;
            day.budget_hit |= out.trace.budget_hit;
            if out.plans.is_empty() {
                deferred.push(id);
                continue;
            }
            let appts = assign_start_times(&self.clinic, &self.state.schedule, &out.assignments)?;
            for mut a in appts {
                a.status = AppointmentStatus::Communicated;
                self.state.schedule.insert(a);
            }
            let p = self.inputs.protocols.get(&course.protocol_id)?.priority;
            self.record(&id, p, today);
            day.scheduled += 1;
        }
        day.deferred = deferred.len();
        self.state.deferred = deferred;
        Ok(())
    }

    /// Runs the remaining days.
    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }

    /// Runs through `date` inclusive.
    pub fn run_until(&mut self, date: NaiveDate) -> Result<()> {
        while self.next_day().is_some_and(|d| d <= date) {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<SimOutput> {
        let cfg = &self.state.config;
        let scope = ReportScope {
            comparison_start: cfg.comparison_start,
            period_end: cfg.sim_end,
            trim: cfg.trim,
        };
        let report = aggregate_report(
            self.inputs.courses,
            self.inputs.protocols,
            &self.state.schedule,
            &self.clinic,
            scope,
        )?;
        Ok(SimOutput {
            state: self.state,
            report,
            clinic: self.clinic,
        })
    }
}

/// Replays the whole period with the batch optimizer.
pub fn run(config: &RunConfig, inputs: SimInputs<'_>) -> Result<SimOutput> {
    let mut r = SimRunner::new(config, inputs, SimMode::Dynamic)?;
    r.run_to_end()?;
    r.finish()
}

/// Replays the whole period with the static-reservation baseline.
pub fn run_baseline(config: &RunConfig, inputs: SimInputs<'_>) -> Result<SimOutput> {
    let mut r = SimRunner::new(config, inputs, SimMode::Baseline)?;
    r.run_to_end()?;
    r.finish()
}
