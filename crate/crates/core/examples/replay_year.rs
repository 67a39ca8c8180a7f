//! Generates a synthetic year for the demonstration clinic and replays it.
//!
//! `cargo run --release -p rtsched --example replay_year -- [rate] [days] [baseline]`

use std::time::Instant;

use rtsched::config::RunConfig;
use rtsched::fixture;
use rtsched::ingest::{apply_calendar, generate_calendar, generate_synthetic, resolve_courses};
use rtsched::model::{Priority, Schedule};
use rtsched::sim::{SimInputs, SimMode, SimRunner};
use rtsched::validate::validate_all;

fn main() -> rtsched::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut syn = fixture::synthetic_config();
    if let Some(r) = args.first() {
        syn.daily_rate_mean = r.parse().expect("rate");
    }
    let mut cfg = RunConfig::default();
    if let Some(n) = args.get(1) {
        cfg.sim_end = cfg.sim_start + chrono::Days::new(n.parse().expect("days"));
        cfg.comparison_start = cfg.sim_start;
    }
    let mode = if args.get(2).is_some_and(|s| s == "baseline") {
        SimMode::Baseline
    } else {
        SimMode::Dynamic
    };
    let protocols = fixture::protocols();
    let mut clinic = fixture::clinic();
    apply_calendar(&generate_calendar(&syn, &clinic)?, &mut clinic.park)?;
    let courses = resolve_courses(generate_synthetic(&syn, &protocols, &clinic)?, &protocols)?;
    let empty = Schedule::new();
    let inputs = SimInputs {
        clinic: &clinic,
        protocols: &protocols,
        courses: &courses,
        input_schedule: &empty,
    };
    let t0 = Instant::now();
    let mut r = SimRunner::new(&cfg, inputs, mode)?;
    r.run_to_end()?;
    let out = r.finish()?;
    let secs = t0.elapsed().as_secs_f64();
    let rep = &out.report;
    println!("courses {} elapsed {secs:.1}s", courses.len());
    println!("occupancy {:?}", rep.mean_occupancy);
    for p in Priority::ALL {
        println!(
            "{p}: waiting {:?} switches {:?} nonpref {:?} excess {:?} offwin {:?}",
            rep.mean(p, "waiting_days"),
            rep.mean(p, "window_switches"),
            rep.mean(p, "non_preferred"),
            rep.mean(p, "excess_days"),
            rep.mean(p, "off_window"),
        );
    }
    for m in ["window_switches", "non_preferred", "excess_days"] {
        println!("all {m}: {:?}", rep.overall_mean(m));
    }
    println!("unscheduled {}", rep.courses_unscheduled.len());
    let max_t = out.state.timings.iter().map(|t| t.batch_secs).fold(0.0, f64::max);
    println!("max batch {max_t:.2}s, displaced {}", out.state.displacements.len());
    let v = validate_all(out.schedule(), &out.clinic, &protocols, &courses);
    println!("violations {:?}", v.counts);
    Ok(())
}
