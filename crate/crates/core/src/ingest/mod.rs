//! File formats and the synthetic arrival generator.
//!
//! CSV outputs may start with `#` comment lines carrying the run
//! configuration; every reader here skips them.

mod arrivals;
mod calendar_file;
mod json;
mod schedule_csv;
mod synthetic;

use std::io::Write;

pub use arrivals::{emit_arrivals, parse_arrivals, read_arrivals, resolve_courses, ArrivalRecord};
pub use calendar_file::{apply_calendar, emit_calendar, parse_calendar, read_calendar, CalendarRow};
pub use json::{load_clinic, load_protocols, parse_clinic, parse_protocols};
pub use schedule_csv::{read_schedule, parse_schedule, write_schedule};
pub use synthetic::{
    generate_calendar, generate_synthetic, SyntheticConfig, UnavailabilityConfig,
};

use chrono::NaiveDate;

/// Writes `# `-prefixed header lines.
pub fn write_comment<W: Write>(w: &mut W, header: Option<&str>) -> std::io::Result<()> {
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// Accepts ISO dates and the two-digit-year `YY-MM-DD` form.
pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    let s = s.trim();
    let fmt = if s.len() == 8 { "%y-%m-%d" } else { "%Y-%m-%d" };
    NaiveDate::parse_from_str(s, fmt).map_err(|e| format!("bad date `{s}`: {e}"))
}

pub(crate) fn csv_reader<R: std::io::Read>(r: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}
