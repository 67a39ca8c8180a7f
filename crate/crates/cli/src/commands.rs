use std::collections::BTreeMap;

use log::{info, warn};
use rtsched::config::RunConfig;
use rtsched::disruption::write_displacements;
use rtsched::fixture;
use rtsched::ingest::{
    emit_arrivals, emit_calendar, generate_calendar, generate_synthetic, read_schedule, ArrivalRecord,
    SyntheticConfig,
};
use rtsched::metrics::{aggregate_report, course_metrics, write_course_metrics, write_report_long, ReportScope};
use rtsched::model::{Priority, ProtocolTable};
use rtsched::scheduler::{compare_with_oracle, random_instance, InstanceShape, OracleComparison};
use rtsched::sim::{write_day_trace, write_timings, SimInputs, SimMode, SimOutput, SimRunner, SimState};
use rtsched::validate::{validate_all, validate_sample, ValidationReport};
use serde::Serialize;

use crate::inputs::in_file;
use crate::{load_inputs, load_park, ConfigArgs, GenArgs, Inputs, MetricsArgs, OracleArgs, Outputs, SimulateArgs, ValidateArgs};
use crate::{CliError, CliResult};

/// Ratio above which an instance counts as a heuristic miss.
pub const ORACLE_TOLERANCE: f64 = 1.05;

fn scope(cfg: &RunConfig) -> ReportScope {
    ReportScope {
        comparison_start: cfg.comparison_start,
        period_end: cfg.sim_end,
        trim: cfg.trim,
    }
}

#[derive(Debug, Serialize)]
struct Share {
    observed: f64,
    target: f64,
}

#[derive(Debug, Serialize)]
struct Calibration {
    courses: usize,
    primary_courses: usize,
    working_days: usize,
    arrivals_per_day: Share,
    chained_share: Share,
    priority: BTreeMap<String, Share>,
    protocol: BTreeMap<String, Share>,
    duration_first: Share,
    duration_rest: Share,
}

/// Observed shares of the primary courses against the generator targets.
/// Duration targets are the protocol defaults weighted by the protocol mix.
fn calibration(
    syn: &SyntheticConfig,
    protocols: &ProtocolTable,
    records: &[ArrivalRecord],
    working_days: usize,
) -> CliResult<Calibration> {
    let primaries: Vec<&ArrivalRecord> = records.iter().filter(|r| r.follows_course.is_none()).collect();
    let n = primaries.len().max(1) as f64;
    let mut by_priority: BTreeMap<Priority, usize> = BTreeMap::new();
    let mut by_protocol: BTreeMap<String, usize> = BTreeMap::new();
    let (mut d1, mut d2) = (0.0, 0.0);
    for r in &primaries {
        let p = protocols
            .by_name(&r.protocol)
            .ok_or_else(|| CliError::Internal(format!("generated unknown protocol `{}`", r.protocol)))?;
        *by_priority.entry(p.priority).or_default() += 1;
        *by_protocol.entry(r.protocol.clone()).or_default() += 1;
        d1 += r.duration_first as f64;
        d2 += r.duration_rest as f64;
    }
    let priority = syn
        .priority_mix
        .iter()
        .map(|(p, &target)| {
            let observed = by_priority.get(p).copied().unwrap_or(0) as f64 / n;
            (p.to_string(), Share { observed, target })
        })
        .collect();
    let mut protocol = BTreeMap::new();
    let (mut t1, mut t2) = (0.0, 0.0);
    for (name, &target) in &syn.protocol_mix {
        let p = protocols
            .by_name(name)
            .ok_or_else(|| CliError::Input(format!("protocol_mix names unknown protocol `{name}`")))?;
        t1 += target * p.first_fraction_duration as f64;
        t2 += target * p.subsequent_fraction_duration as f64;
        let observed = by_protocol.get(p.id.as_str()).copied().unwrap_or(0) as f64 / n;
        protocol.insert(p.id.to_string(), Share { observed, target });
    }
    Ok(Calibration {
        courses: records.len(),
        primary_courses: primaries.len(),
        working_days,
        arrivals_per_day: Share {
            observed: primaries.len() as f64 / working_days.max(1) as f64,
            target: syn.daily_rate_mean,
        },
        chained_share: Share {
            observed: (records.len() - primaries.len()) as f64 / n,
            target: syn.consecutive_prob,
        },
        priority,
        protocol,
        duration_first: Share { observed: d1 / n, target: t1 },
        duration_rest: Share { observed: d2 / n, target: t2 },
    })
}

/// Writes `arrivals.csv`, `calendar.csv` and `calibration.json`.
pub fn cmd_gen(args: &ConfigArgs, gen: &GenArgs) -> CliResult<()> {
    let mut cfg = args.load()?;
    let (clinic, protocols) = load_park(&mut cfg)?;
    let mut syn = match &gen.synthetic {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| in_file(p, e))?;
            serde_json::from_str(&text).map_err(|e| in_file(p, e))?
        }
        None => fixture::synthetic_config(),
    };
    if let Some(r) = gen.rate {
        syn.daily_rate_mean = r;
    }
    if let Some(d) = gen.start {
        syn.start = d;
    }
    if let Some(d) = gen.end {
        syn.end = d;
    }
    if let Some(s) = args.seed {
        syn.seed = s;
    }
    syn.validate(&protocols)?;
    if syn.daily_rate_mean == 0.0 {
        warn!("arrival rate is 0: the arrival file will be empty");
    }
    let records = generate_synthetic(&syn, &protocols, &clinic)?;
    let rows = generate_calendar(&syn, &clinic)?;
    let header = format!("{}\nsynthetic: {}", cfg.header(), serde_json::to_string(&syn)?);

    let mut out = Outputs::default();
    let mut buf = Vec::new();
    emit_arrivals(&mut buf, &records, Some(&header))?;
    out.add("arrivals.csv", buf);
    let mut buf = Vec::new();
    emit_calendar(&mut buf, &rows, Some(&header))?;
    out.add("calendar.csv", buf);
    let working_days = clinic.calendar.working_days_in(syn.start, syn.end);
    let cal = calibration(&syn, &protocols, &records, working_days)?;
    let mut obj = serde_json::Map::new();
    obj.insert("run_config".into(), serde_json::to_value(&cfg)?);
    obj.insert("synthetic".into(), serde_json::to_value(&syn)?);
    obj.insert("calibration".into(), serde_json::to_value(&cal)?);
    let mut bytes = serde_json::to_vec_pretty(&obj)?;
    bytes.push(b'\n');
    out.add("calibration.json", bytes);
    out.write(&gen.out)?;
    println!(
        "{} courses over {} working days written to {}",
        records.len(),
        working_days,
        gen.out.display()
    );
    for (p, s) in &cal.priority {
        println!("priority {p}: {:.3} (target {:.3})", s.observed, s.target);
    }
    Ok(())
}

fn sim_inputs(inputs: &Inputs) -> SimInputs<'_> {
    SimInputs {
        clinic: &inputs.clinic,
        protocols: &inputs.protocols,
        courses: &inputs.courses,
        input_schedule: &inputs.input_schedule,
    }
}

/// Adds the exports of one finished run, file names prefixed by `prefix`.
/// Returns the validation of the final schedule.
fn add_run(
    out: &mut Outputs,
    prefix: &str,
    label: &str,
    run: &SimOutput,
    inputs: &Inputs,
    header: &str,
) -> CliResult<ValidationReport> {
    let cfg = &run.state.config;
    let mut buf = Vec::new();
    rtsched::ingest::write_schedule(&mut buf, run.schedule(), Some(header))?;
    out.add(format!("{prefix}schedule.csv"), buf);
    let mut buf = Vec::new();
    write_day_trace(&mut buf, &run.state.trace, Some(header))?;
    out.add(format!("{prefix}trace.csv"), buf);
    let log: Vec<_> = run.state.displacements.iter().map(|(_, d)| d.clone()).collect();
    let mut buf = Vec::new();
    write_displacements(&mut buf, &log, Some(header))?;
    out.add(format!("{prefix}displacements.csv"), buf);
    let (rows, _) = course_metrics(&inputs.courses, &inputs.protocols, run.schedule(), &run.clinic, &scope(cfg))?;
    let mut buf = Vec::new();
    write_course_metrics(&mut buf, &rows, Some(header))?;
    out.add(format!("{prefix}course_metrics.csv"), buf);
    let mut buf = Vec::new();
    write_timings(&mut buf, &run.state.timings)?;
    out.add(format!("{prefix}timings.csv"), buf);
    let v = validate_all(run.schedule(), &run.clinic, &inputs.protocols, &inputs.courses);
    let mut buf = Vec::new();
    v.write_csv(&mut buf, Some(header))?;
    out.add(format!("{prefix}violations.csv"), buf);
    #[derive(Serialize)]
    struct Report<'a> {
        scheduler: &'a str,
        quality: &'a rtsched::metrics::QualityReport,
        unrepaired: usize,
        violation_errors: usize,
        violation_warnings: usize,
    }
    let unrepaired = log.iter().filter(|d| d.to.is_none()).count();
    let report = Report {
        scheduler: label,
        quality: &run.report,
        unrepaired,
        violation_errors: v.errors,
        violation_warnings: v.warnings,
    };
    out.add_json(format!("{prefix}report.json"), cfg, "report", &report)?;
    Ok(v)
}

fn summary(label: &str, run: &SimOutput) {
    let r = &run.report;
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "{label}: {} courses in scope, {} not fully scheduled, occupancy {}",
        r.courses_included,
        r.courses_unscheduled.len(),
        fmt(r.mean_occupancy)
    );
    for p in Priority::ALL {
        println!(
            "{label} {p}: waiting_days {} window_switches {} non_preferred {} excess_days {}",
            fmt(r.mean(p, "waiting_days")),
            fmt(r.mean(p, "window_switches")),
            fmt(r.mean(p, "non_preferred")),
            fmt(r.mean(p, "excess_days")),
        );
    }
}

/// Runs the dynamic scheduler (and the baseline with `--baseline`) and
/// writes every export. Also handles snapshots and resumption.
pub fn cmd_simulate(args: &ConfigArgs, sim: &SimulateArgs) -> CliResult<()> {
    let (mut cfg, state) = match &sim.resume {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| in_file(p, e))?;
            let state = SimState::from_json(&text).map_err(|e| in_file(p, e))?;
            if args.config.is_some() {
                warn!("--config is ignored when resuming; the snapshot's configuration is used");
            }
            (state.config.clone(), Some(state))
        }
        None => (args.load()?, None),
    };
    let inputs = load_inputs(&mut cfg, true)?;
    if let Some(s) = &state {
        if s.config.calendar != cfg.calendar {
            return Err(CliError::Input("snapshot calendar differs from the clinic's".into()));
        }
    }
    let header = cfg.header();

    let mut runner = match state {
        Some(s) => SimRunner::resume(s, sim_inputs(&inputs))?,
        None => SimRunner::new(&cfg, sim_inputs(&inputs), SimMode::Dynamic)?,
    };
    if let (Some(path), Some(stop)) = (&sim.snapshot, sim.stop_after) {
        runner.run_until(stop)?;
        let json = runner.snapshot().to_json()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, json)?;
        println!("snapshot after {stop} written to {}", path.display());
        return Ok(());
    }
    runner.run_to_end()?;
    let dynamic = runner.finish()?;
    let label = match dynamic.state.mode {
        SimMode::Dynamic => "dynamic",
        SimMode::Baseline => "baseline",
    };

    let mut out = Outputs::default();
    let mut dirty = Vec::new();
    let v = add_run(&mut out, "", label, &dynamic, &inputs, &header)?;
    if !v.is_clean() {
        dirty.push(format!("{label}: {} violations", v.errors));
    }
    let mut long = Vec::new();
    write_report_long(&mut long, &dynamic.report, label, Some(&header))?;
    summary(label, &dynamic);

    if sim.baseline {
        info!("replaying the baseline");
        let mut r = SimRunner::new(&cfg, sim_inputs(&inputs), SimMode::Baseline)?;
        r.run_to_end()?;
        let base = r.finish()?;
        let v = add_run(&mut out, "baseline_", "baseline", &base, &inputs, &header)?;
        if !v.is_clean() {
            dirty.push(format!("baseline: {} violations", v.errors));
        }
        let mut rows = Vec::new();
        write_report_long(&mut rows, &base.report, "baseline", None)?;
        let body = rows.iter().position(|&b| b == b'\n').map_or(rows.len(), |i| i + 1);
        long.extend_from_slice(&rows[body..]);
        summary("baseline", &base);
    }
    out.add("report_long.csv", long);
    out.write(&sim.out)?;
    if dirty.is_empty() {
        Ok(())
    } else {
        Err(CliError::Internal(format!("simulated schedule failed validation ({})", dirty.join(", "))))
    }
}

/// Audits a schedule file. Fails with status 1 on any error-severity
/// violation.
pub fn cmd_validate(args: &ConfigArgs, val: &ValidateArgs) -> CliResult<()> {
    let mut cfg = args.load()?;
    let inputs = load_inputs(&mut cfg, true)?;
    let schedule = read_schedule(&val.schedule).map_err(|e| in_file(&val.schedule, e))?;
    let report = match val.sample {
        Some(n) => validate_sample(&schedule, &inputs.clinic, &inputs.protocols, &inputs.courses, n, cfg.seed),
        None => validate_all(&schedule, &inputs.clinic, &inputs.protocols, &inputs.courses),
    };
    if let Some(dir) = &val.out {
        let mut out = Outputs::default();
        let mut buf = Vec::new();
        report.write_csv(&mut buf, Some(&cfg.header()))?;
        out.add("violations.csv", buf);
        out.add_json("validation.json", &cfg, "validation", &report)?;
        out.write(dir)?;
    }
    println!(
        "{} appointments, {} errors, {} warnings",
        schedule.len(),
        report.errors,
        report.warnings
    );
    for (check, n) in &report.counts {
        println!("{}: {n}", check.name());
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} error-severity violations", report.errors)))
    }
}

/// Quality metrics of a schedule file over the configured report scope.
pub fn cmd_metrics(args: &ConfigArgs, m: &MetricsArgs) -> CliResult<()> {
    let mut cfg = args.load()?;
    let inputs = load_inputs(&mut cfg, true)?;
    let schedule = read_schedule(&m.schedule).map_err(|e| in_file(&m.schedule, e))?;
    let header = cfg.header();
    let scope = scope(&cfg);
    let (rows, missing) = course_metrics(&inputs.courses, &inputs.protocols, &schedule, &inputs.clinic, &scope)?;
    let report = aggregate_report(&inputs.courses, &inputs.protocols, &schedule, &inputs.clinic, scope)?;
    let mut out = Outputs::default();
    let mut buf = Vec::new();
    write_course_metrics(&mut buf, &rows, Some(&header))?;
    out.add("course_metrics.csv", buf);
    let mut buf = Vec::new();
    write_report_long(&mut buf, &report, &m.label, Some(&header))?;
    out.add("report_long.csv", buf);
    out.add_json("report.json", &cfg, "report", &report)?;
    out.write(&m.out)?;
    println!("{} courses measured, {} not fully scheduled", rows.len(), missing.len());
    Ok(())
}

/// Summary of an oracle comparison run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub equal: usize,
    pub within_tolerance: usize,
    pub same_deferrals: usize,
    pub max_ratio: Option<f64>,
}

impl OracleSummary {
    pub fn of(rows: &[OracleComparison]) -> Self {
        Self {
            instances: rows.len(),
            equal: rows.iter().filter(|r| r.heuristic_cost == r.exact_cost).count(),
            within_tolerance: rows.iter().filter(|r| r.ratio() <= ORACLE_TOLERANCE).count(),
            same_deferrals: rows.iter().filter(|r| r.same_deferrals()).count(),
            max_ratio: rows.iter().map(OracleComparison::ratio).reduce(f64::max),
        }
    }
}

/// Solves `n` random instances both ways. Instance `i` uses the run seed
/// plus `i`. Fails with status 1 if any instance exceeds the tolerance or
/// the two disagree on which courses to defer, and with status 3 if the
/// heuristic ever beats the exact solver.
pub fn cmd_oracle(args: &ConfigArgs, o: &OracleArgs) -> CliResult<(Vec<OracleComparison>, OracleSummary)> {
    let cfg = args.load()?;
    let shape = InstanceShape {
        machines: o.machines,
        courses: o.courses,
        days: o.days,
    };
    let mut rows = Vec::with_capacity(o.n);
    for i in 0..o.n as u64 {
        let inst = random_instance(cfg.seed.wrapping_add(i), shape)?;
        rows.push(compare_with_oracle(&inst, &cfg)?);
    }
    let summary = OracleSummary::of(&rows);
    if let Some(path) = &o.out {
        let mut buf = Vec::new();
        rtsched::ingest::write_comment(&mut buf, Some(&cfg.header()))?;
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["seed", "courses", "heuristic_cost", "exact_cost", "ratio", "heuristic_deferred", "exact_deferred"])
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let join = |s: &std::collections::BTreeSet<rtsched::model::CourseId>| {
            s.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" ")
        };
        for r in &rows {
            w.write_record([
                r.seed.to_string(),
                r.courses.to_string(),
                r.heuristic_cost.to_string(),
                r.exact_cost.to_string(),
                format!("{:.6}", r.ratio()),
                join(&r.heuristic_deferred),
                join(&r.exact_deferred),
            ])
            .map_err(|e| CliError::Internal(e.to_string()))?;
        }
        w.flush()?;
        drop(w);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, buf)?;
    }
    println!(
        "instances {} equal {} within {ORACLE_TOLERANCE} {} same deferrals {} max ratio {}",
        summary.instances,
        summary.equal,
        summary.within_tolerance,
        summary.same_deferrals,
        summary.max_ratio.map_or("-".into(), |r| format!("{r:.4}"))
    );
    if let Some(r) = rows.iter().find(|r| r.heuristic_cost < r.exact_cost) {
        return Err(CliError::Internal(format!(
            "seed {}: heuristic cost {} is below the exact cost {}",
            r.seed, r.heuristic_cost, r.exact_cost
        )));
    }
    if summary.within_tolerance < summary.instances || summary.same_deferrals < summary.instances {
        return Err(CliError::Failed(format!(
            "{} of {} instances outside tolerance, {} deferral disagreements",
            summary.instances - summary.within_tolerance,
            summary.instances,
            summary.instances - summary.same_deferrals
        )));
    }
    Ok((rows, summary))
}
