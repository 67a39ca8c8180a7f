use std::io::{Read, Write};
use std::path::Path;

use super::{csv_reader, parse_date, write_comment};
use crate::model::{Appointment, AppointmentStatus, CourseId, MachineId, Schedule};
use crate::{Error, Result};

const COLUMNS: [&str; 8] = [
    "course", "fraction", "machine", "date", "window", "start", "duration", "status",
];

/// Writes one row per appointment, ordered by course id then fraction.
pub fn write_schedule<W: Write>(mut w: W, schedule: &Schedule, header: Option<&str>) -> Result<()> {
    write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(COLUMNS)?;
    for a in schedule.iter() {
        let status = match a.status {
            AppointmentStatus::Tentative => "tentative",
            AppointmentStatus::Communicated => "communicated",
        };
        wtr.write_record([
            a.course_id.to_string(),
            a.fraction_index.to_string(),
            a.machine.to_string(),
            a.date.to_string(),
            a.window_index.to_string(),
            a.start.to_string(),
            a.duration.to_string(),
            status.to_owned(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_schedule<R: Read>(reader: R, source: &str) -> Result<Schedule> {
    let mut rdr = csv_reader(reader, true);
    let mut schedule = Schedule::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |m: String| Error::parse(source, line, m);
        if row.len() != COLUMNS.len() {
            return Err(err(format!("expected {} columns, found {}", COLUMNS.len(), row.len())));
        }
        let num = |i: usize| -> Result<u32> {
            row[i]
                .parse()
                .map_err(|_| err(format!("bad {} `{}`", COLUMNS[i], &row[i])))
        };
        let status = match &row[7] {
            "tentative" => AppointmentStatus::Tentative,
            "communicated" => AppointmentStatus::Communicated,
            s => return Err(err(format!("bad status `{s}`"))),
        };
        let fraction_index = num(1)?;
        let window = num(4)?;
        let duration = num(6)?;
        if fraction_index == 0 || window > u8::MAX as u32 || duration == 0 || duration > 600 {
            return Err(err("fraction, window or duration out of range".into()));
        }
        let appt = Appointment {
            course_id: CourseId::new(&row[0]),
            fraction_index,
            machine: MachineId::new(&row[2]),
            date: parse_date(&row[3]).map_err(err)?,
            window_index: window as u8,
            start: row[5].parse().map_err(|e| err(format!("bad start: {e}")))?,
            duration: duration as u16,
            status,
        };
        if schedule.insert(appt).is_some() {
            return Err(err("duplicate course/fraction".into()));
        }
    }
    Ok(schedule)
}

pub fn read_schedule(path: &Path) -> Result<Schedule> {
    let f = std::fs::File::open(path)?;
    parse_schedule(f, &path.display().to_string())
}
