use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{Calendar, CourseId, PatientId, ProtocolId, SiteId, TreatmentProtocol};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimePreference {
    Morning,
    Afternoon,
}

/// One patient's treatment demand.
///
/// Durations are carried per course: they come from the arrival file and may
/// differ from the protocol defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentCourse {
    pub patient_id: PatientId,
    pub course_id: CourseId,
    pub creation_date: NaiveDate,
    pub protocol_id: ProtocolId,
    pub n_fractions: u32,
    pub duration_first: u16,
    pub duration_rest: u16,
    pub site_preference: SiteId,
    pub follows_course: Option<CourseId>,
    pub time_preference: Option<TimePreference>,
    /// Excluded from metric aggregation.
    pub excluded: bool,
}

impl TreatmentCourse {
    /// Duration of the 1-based fraction `index`.
    pub fn duration_of(&self, index: u32) -> u16 {
        if index <= 1 {
            self.duration_first
        } else {
            self.duration_rest
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fractions == 0 {
            return Err(Error::config(format!("course `{}` has no fractions", self.course_id)));
        }
        if self.duration_first == 0 || self.duration_rest == 0 {
            return Err(Error::config(format!(
                "course `{}` has a zero duration",
                self.course_id
            )));
        }
        if self.follows_course.as_ref() == Some(&self.course_id) {
            return Err(Error::config(format!("course `{}` follows itself", self.course_id)));
        }
        Ok(())
    }
}

/// Earliest allowed first-fraction date.
///
/// The pre-treatment offset is counted in calendar days and then rolled to
/// the next working day. For a secondary course, `predecessor_last` is the
/// date of the primary course's last scheduled fraction and the result is no
/// earlier than the working day after it.
pub fn earliest_start(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    cal: &Calendar,
    predecessor_last: Option<NaiveDate>,
) -> Result<NaiveDate> {
    if course.protocol_id != protocol.id {
        return Err(Error::UnknownProtocol(course.protocol_id.clone()));
    }
    let raw = course.creation_date + Days::new(protocol.pre_treatment_days as u64);
    let mut start = cal.next_working_day(raw)?;
    if let Some(last) = predecessor_last {
        let after = cal.next_working_day(last.succ_opt().expect("date overflow"))?;
        start = start.max(after);
    }
    Ok(start)
}

/// First full Monday-to-Friday week between `dates[0]` and the last date
/// whose fraction count falls below `min(min_per_week, working days that
/// week)`. Returns that week's Monday. `dates` must be sorted.
pub fn weekly_shortfall(dates: &[NaiveDate], min_per_week: u8, cal: &Calendar) -> Option<NaiveDate> {
    let (&first, &last) = (dates.first()?, dates.last()?);
    let mut monday = Calendar::week_start(first);
    if monday < first {
        monday = monday + Days::new(7);
    }
    let mut i = 0;
    while monday + Days::new(4) <= last {
        let next = monday + Days::new(7);
        while i < dates.len() && dates[i] < monday {
            i += 1;
        }
        let mut count = 0;
        while i + count < dates.len() && dates[i + count] < next {
            count += 1;
        }
        let need = (min_per_week as usize).min(cal.working_days_in_week(monday));
        if count < need {
            return Some(monday);
        }
        monday = next;
    }
    None
}
