use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use super::{csv_reader, parse_date, write_comment};
use crate::model::{Interval, MachineId, MachinePark, UnavailabilityKind};
use crate::{Error, Result};

/// One unavailability row. `interval == None` means the whole day.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CalendarRow {
    pub machine: MachineId,
    pub date: NaiveDate,
    pub interval: Option<Interval>,
    pub kind: UnavailabilityKind,
}

/// Reads `machine,date,interval|FULL_DAY,kind` rows into `park`.
///
/// A header row is optional. Intervals reaching outside the operating window
/// are clipped, and rows entirely outside it are dropped; both produce a
/// returned warning.
pub fn parse_calendar<R: Read>(
    reader: R,
    source: &str,
    park: &mut MachinePark,
) -> Result<Vec<String>> {
    let mut rdr = csv_reader(reader, false);
    let mut warnings = Vec::new();
    let op = park.operating_window();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if i == 0 && row.get(0).is_some_and(|s| s.eq_ignore_ascii_case("machine")) {
            continue;
        }
        let row = parse_row(&row).map_err(|m| Error::parse(source, line, m))?;
        let iv = row.interval.unwrap_or(op);
        match iv.intersect(&op) {
            Some(c) if c == iv => {}
            Some(c) => warnings.push(format!("{source}:{line}: {iv} clipped to {c}")),
            None => warnings.push(format!("{source}:{line}: {iv} outside operating hours, ignored")),
        }
        park.add_block(row.kind, &row.machine, row.date, iv)?;
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(warnings)
}

fn parse_row(row: &csv::StringRecord) -> Result<CalendarRow, String> {
    if row.len() != 4 {
        return Err(format!("expected 4 columns, found {}", row.len()));
    }
    let interval = if row[2].eq_ignore_ascii_case("FULL_DAY") {
        None
    } else {
        Some(row[2].parse::<Interval>().map_err(|e| format!("bad interval `{}`: {e}", &row[2]))?)
    };
    let kind = match row[3].to_ascii_lowercase().as_str() {
        "planned" => UnavailabilityKind::Planned,
        "failure" => UnavailabilityKind::Failure,
        k => return Err(format!("unknown kind `{k}`")),
    };
    Ok(CalendarRow {
        machine: MachineId::new(&row[0]),
        date: parse_date(&row[1])?,
        interval,
        kind,
    })
}

/// Records generated or parsed rows as blocks in `park`.
pub fn apply_calendar(rows: &[CalendarRow], park: &mut MachinePark) -> Result<()> {
    for r in rows {
        let iv = r.interval.unwrap_or(park.operating_window());
        park.add_block(r.kind, &r.machine, r.date, iv)?;
    }
    Ok(())
}

pub fn read_calendar(path: &Path, park: &mut MachinePark) -> Result<Vec<String>> {
    let f = std::fs::File::open(path)?;
    parse_calendar(f, &path.display().to_string(), park)
}

pub fn emit_calendar<W: Write>(mut w: W, rows: &[CalendarRow], header: Option<&str>) -> Result<()> {
    write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["machine", "date", "interval", "kind"])?;
    for r in rows {
        let kind = match r.kind {
            UnavailabilityKind::Planned => "planned",
            UnavailabilityKind::Failure => "failure",
        };
        wtr.write_record([
            r.machine.to_string(),
            r.date.to_string(),
            r.interval.map_or_else(|| "FULL_DAY".to_owned(), |iv| iv.to_string()),
            kind.to_owned(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
