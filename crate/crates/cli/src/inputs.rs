use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use log::warn;
use rtsched::config::RunConfig;
use rtsched::fixture;
use rtsched::ingest::{load_clinic, load_protocols, parse_date, read_arrivals, read_calendar, read_schedule, resolve_courses};
use rtsched::model::{Calendar, Clinic, CourseId, ProtocolTable, Schedule, TreatmentCourse};

use crate::{CliError, CliResult};

/// Run configuration: a JSON file, overridden field by field by flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration. Absent fields keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Clinic file (machines, calendar, operating window).
    #[arg(long, global = true)]
    pub clinic: Option<PathBuf>,
    /// Protocol table.
    #[arg(long, global = true)]
    pub protocols: Option<PathBuf>,
    /// Arrival file.
    #[arg(long, global = true)]
    pub arrivals: Option<PathBuf>,
    /// Machine unavailability calendar.
    #[arg(long, global = true)]
    pub calendar: Option<PathBuf>,
    /// Appointments fixed before the first simulated day.
    #[arg(long, global = true)]
    pub input_schedule: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_date)]
    pub sim_start: Option<NaiveDate>,
    #[arg(long, global = true, value_parser = parse_date)]
    pub sim_end: Option<NaiveDate>,
    /// Courses created before this date are left out of reports.
    #[arg(long, global = true, value_parser = parse_date)]
    pub comparison_start: Option<NaiveDate>,
    /// Share of the largest values dropped per metric in trimmed statistics.
    #[arg(long, global = true)]
    pub trim: Option<f64>,
    /// Wall-clock budget of one batch in seconds.
    #[arg(long, global = true)]
    pub budget_secs: Option<f64>,
    /// Candidate plans kept per course.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub horizon_months: Option<u32>,
}

impl ConfigArgs {
    /// The configuration file with the flags applied, validated.
    pub fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| in_file(p, e))?;
                serde_json::from_str(&text).map_err(|e| in_file(p, e))?
            }
            None => RunConfig::default(),
        };
        let inputs = &mut cfg.inputs;
        for (slot, flag) in [
            (&mut inputs.clinic, &self.clinic),
            (&mut inputs.protocols, &self.protocols),
            (&mut inputs.arrivals, &self.arrivals),
            (&mut inputs.calendar, &self.calendar),
            (&mut inputs.input_schedule, &self.input_schedule),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.sim_start {
            cfg.sim_start = v;
        }
        if let Some(v) = self.sim_end {
            cfg.sim_end = v;
        }
        if let Some(v) = self.comparison_start {
            cfg.comparison_start = v;
        }
        if let Some(v) = self.trim {
            cfg.trim = v;
        }
        if let Some(v) = self.budget_secs {
            cfg.solver.budget_secs = v;
        }
        if let Some(v) = self.k {
            cfg.solver.k = v;
        }
        if let Some(v) = self.horizon_months {
            cfg.solver.horizon_months = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn in_file(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Everything read from disk for one run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub clinic: Clinic,
    pub protocols: ProtocolTable,
    pub courses: Vec<TreatmentCourse>,
    pub input_schedule: Schedule,
}

/// Clinic and protocol table only. A calendar in `cfg` replaces the
/// clinic's; afterwards `cfg.calendar` holds the effective one.
pub fn load_park(cfg: &mut RunConfig) -> CliResult<(Clinic, ProtocolTable)> {
    let mut clinic = match &cfg.inputs.clinic {
        Some(p) => load_clinic(p).map_err(|e| in_file(p, e))?,
        None => fixture::clinic(),
    };
    if let Some(c) = &cfg.calendar {
        clinic = Clinic::new(Calendar::new(c.clone())?, clinic.park);
    }
    cfg.calendar = Some(clinic.calendar.config().clone());
    let protocols = match &cfg.inputs.protocols {
        Some(p) => load_protocols(p).map_err(|e| in_file(p, e))?,
        None => fixture::protocols(),
    };
    protocols.check_machines(|m| clinic.park.contains(m))?;
    Ok((clinic, protocols))
}

/// Loads every configured input. Arrivals are required when
/// `need_arrivals` is set.
pub fn load_inputs(cfg: &mut RunConfig, need_arrivals: bool) -> CliResult<Inputs> {
    let (mut clinic, protocols) = load_park(cfg)?;
    if let Some(p) = &cfg.inputs.calendar {
        for w in read_calendar(p, &mut clinic.park).map_err(|e| in_file(p, e))? {
            warn!("{w}");
        }
    }
    let input_schedule = match &cfg.inputs.input_schedule {
        Some(p) => read_schedule(p).map_err(|e| in_file(p, e))?,
        None => Schedule::new(),
    };
    let courses = match &cfg.inputs.arrivals {
        Some(p) => {
            let known: BTreeSet<CourseId> = input_schedule.course_ids().cloned().collect();
            let records = read_arrivals(p, &known).map_err(|e| in_file(p, e))?;
            resolve_courses(records, &protocols).map_err(|e| in_file(p, e))?
        }
        None if need_arrivals => {
            return Err(CliError::Input("no arrival file: set inputs.arrivals or pass --arrivals".into()));
        }
        None => Vec::new(),
    };
    Ok(Inputs {
        clinic,
        protocols,
        courses,
        input_schedule,
    })
}
