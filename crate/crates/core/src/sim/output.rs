use std::io::Write;

use super::{DayTiming, DayTrace};
use crate::Result;

/// Per-day trace as CSV.
pub fn write_day_trace<W: Write>(mut w: W, trace: &[DayTrace], header: Option<&str>) -> Result<()> {
    crate::ingest::write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "date",
        "arrivals",
        "failures",
        "displaced",
        "unrepaired",
        "batch_size",
        "placeholders",
        "placeholders_placed",
        "candidates",
        "greedy_cost",
        "ls_moves",
        "scheduled",
        "deferred",
        "communicated",
        "final_cost",
        "budget_hit",
    ])?;
    for t in trace {
        wtr.write_record([
            t.date.map_or(String::new(), |d| d.to_string()),
            t.arrivals.to_string(),
            t.failures.to_string(),
            t.displaced.to_string(),
            t.unrepaired.to_string(),
            t.batch_size.to_string(),
            t.placeholders.to_string(),
            t.placeholders_placed.to_string(),
            t.candidates.to_string(),
            t.greedy_cost.to_string(),
            t.ls_moves.to_string(),
            t.scheduled.to_string(),
            t.deferred.to_string(),
            t.communicated.to_string(),
            t.final_cost.to_string(),
            t.budget_hit.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Batch wall-clock times as CSV. Not reproducible.
pub fn write_timings<W: Write>(w: W, timings: &[DayTiming]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "batch_secs"])?;
    for t in timings {
        wtr.write_record([t.date.to_string(), format!("{:.4}", t.batch_secs)])?;
    }
    wtr.flush()?;
    Ok(())
}
