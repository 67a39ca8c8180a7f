use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{csv_reader, parse_date, write_comment};
use crate::model::{CourseId, PatientId, ProtocolTable, SiteId, TimePreference, TreatmentCourse};
use crate::{Error, Result};

const HEADER: [&str; 11] = [
    "PatientID",
    "CourseID",
    "CreationDate",
    "Protocol",
    "NumberFractions",
    "Duration1",
    "Duration",
    "SitePref",
    "FollowsCourseID",
    "TimePref",
    "Excluded",
];

/// One row of the arrival file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub patient_id: PatientId,
    pub course_id: CourseId,
    pub creation_date: NaiveDate,
    pub protocol: String,
    pub n_fractions: u32,
    pub duration_first: u16,
    pub duration_rest: u16,
    pub site_pref: SiteId,
    pub follows_course: Option<CourseId>,
    pub time_preference: Option<TimePreference>,
    pub excluded: bool,
}

impl ArrivalRecord {
    pub fn into_course(self, protocols: &ProtocolTable) -> Result<TreatmentCourse> {
        let p = protocols
            .by_name(&self.protocol)
            .ok_or_else(|| Error::UnknownProtocol(self.protocol.as_str().into()))?;
        let course = TreatmentCourse {
            patient_id: self.patient_id,
            course_id: self.course_id,
            creation_date: self.creation_date,
            protocol_id: p.id.clone(),
            n_fractions: self.n_fractions,
            duration_first: self.duration_first,
            duration_rest: self.duration_rest,
            site_preference: self.site_pref,
            follows_course: self.follows_course,
            time_preference: self.time_preference,
            excluded: self.excluded,
        };
        course.validate()?;
        Ok(course)
    }
}

fn optional(s: &str) -> Option<&str> {
    let s = s.trim();
    (!s.is_empty() && s != "-").then_some(s)
}

/// Parses an arrival file.
///
/// Columns are the nine documented ones, optionally followed by a time
/// preference (`AM`/`PM`/`-`) and an exclusion flag (`0`/`1`). A header row
/// is required. The result is ordered by creation date, then file order.
/// A `FollowsCourseID` must name a course that appears earlier in the file
/// or in `known_courses`.
pub fn parse_arrivals<R: Read>(
    reader: R,
    source: &str,
    known_courses: &BTreeSet<CourseId>,
) -> Result<Vec<ArrivalRecord>> {
    let mut rdr = csv_reader(reader, true);
    let mut seen: BTreeSet<CourseId> = BTreeSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |m: String| Error::parse(source, line, m);
        if row.len() != 9 && row.len() != 11 {
            return Err(err(format!("expected 9 or 11 columns, found {}", row.len())));
        }
        let num = |i: usize| -> Result<u32> {
            row[i]
                .parse::<u32>()
                .map_err(|_| err(format!("column {} is not a count: `{}`", HEADER[i], &row[i])))
        };
        let creation_date = parse_date(&row[2]).map_err(err)?;
        let n_fractions = num(4)?;
        if n_fractions == 0 {
            return Err(err("NumberFractions must be at least 1".into()));
        }
        let d1 = num(5)?;
        let d2 = num(6)?;
        if d1 == 0 || d2 == 0 || d1 > u16::MAX as u32 || d2 > u16::MAX as u32 {
            return Err(err("durations must be positive minutes".into()));
        }
        let course_id = CourseId::new(&row[1]);
        let follows_course = optional(&row[8]).map(CourseId::new);
        if let Some(f) = &follows_course {
            if !seen.contains(f) && !known_courses.contains(f) {
                return Err(Error::DanglingReference {
                    course: course_id,
                    follows: f.clone(),
                });
            }
        }
        let (time_preference, excluded) = if row.len() == 11 {
            let tp = match optional(&row[9]).map(|s| s.to_ascii_uppercase()) {
                None => None,
                Some(s) if s == "AM" => Some(TimePreference::Morning),
                Some(s) if s == "PM" => Some(TimePreference::Afternoon),
                Some(s) => return Err(err(format!("bad TimePref `{s}`"))),
            };
            let ex = match &row[10] {
                "" | "0" => false,
                "1" => true,
                s => return Err(err(format!("bad Excluded flag `{s}`"))),
            };
            (tp, ex)
        } else {
            (None, false)
        };
        if !seen.insert(course_id.clone()) {
            return Err(err(format!("duplicate course `{course_id}`")));
        }
        out.push(ArrivalRecord {
            patient_id: PatientId::new(&row[0]),
            course_id,
            creation_date,
            protocol: row[3].to_owned(),
            n_fractions,
            duration_first: d1 as u16,
            duration_rest: d2 as u16,
            site_pref: SiteId::new(&row[7]),
            follows_course,
            time_preference,
            excluded,
        });
    }
    out.sort_by_key(|r| r.creation_date);
    Ok(out)
}

pub fn read_arrivals(path: &Path, known_courses: &BTreeSet<CourseId>) -> Result<Vec<ArrivalRecord>> {
    let f = std::fs::File::open(path)?;
    parse_arrivals(f, &path.display().to_string(), known_courses)
}

/// Writes records in the full eleven-column layout with ISO dates.
pub fn emit_arrivals<W: Write>(
    mut w: W,
    records: &[ArrivalRecord],
    header: Option<&str>,
) -> Result<()> {
    write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for r in records {
        let tp = match r.time_preference {
            None => "-",
            Some(TimePreference::Morning) => "AM",
            Some(TimePreference::Afternoon) => "PM",
        };
        wtr.write_record([
            r.patient_id.as_str(),
            r.course_id.as_str(),
            &r.creation_date.format("%Y-%m-%d").to_string(),
            &r.protocol,
            &r.n_fractions.to_string(),
            &r.duration_first.to_string(),
            &r.duration_rest.to_string(),
            r.site_pref.as_str(),
            r.follows_course.as_ref().map_or("-", |c| c.as_str()),
            tp,
            if r.excluded { "1" } else { "0" },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Resolves protocol names against the table.
pub fn resolve_courses(
    records: Vec<ArrivalRecord>,
    protocols: &ProtocolTable,
) -> Result<Vec<TreatmentCourse>> {
    records.into_iter().map(|r| r.into_course(protocols)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE2: &str = "\
PatientID,CourseID,CreationDate,Protocol,NumberFractions,Duration1,Duration,SitePref,FollowsCourseID
00001, 11730, 20-01-02, Bladder VMAT, 30, 24, 12, S2, -
00002, 11755, 20-01-02, Head-Neck VMAT, 35, 24, 12, S4, -
00006, 12402, 20-01-03, Breast tang. fields, 15, 24, 12, S4, -
00006, 15930, 20-01-03, Breast photon boost, 5, 20, 12, S4, 12402
";

    #[test]
    fn first_row_of_the_arrival_table() {
        let recs = parse_arrivals(TABLE2.as_bytes(), "t", &BTreeSet::new()).unwrap();
        let r = &recs[0];
        assert_eq!(r.patient_id.as_str(), "00001");
        assert_eq!(r.course_id.as_str(), "11730");
        assert_eq!(r.creation_date, NaiveDate::from_ymd_opt(2020, 1, 2).unwrap());
        assert_eq!(r.protocol, "Bladder VMAT");
        assert_eq!((r.n_fractions, r.duration_first, r.duration_rest), (30, 24, 12));
        assert_eq!(r.site_pref.as_str(), "S2");
        assert_eq!(r.follows_course, None);
    }

    #[test]
    fn chained_boost_row() {
        let recs = parse_arrivals(TABLE2.as_bytes(), "t", &BTreeSet::new()).unwrap();
        let r = recs.last().unwrap();
        assert_eq!(r.course_id.as_str(), "15930");
        assert_eq!(r.follows_course.as_ref().unwrap().as_str(), "12402");
    }

    #[test]
    fn empty_file_gives_empty_list() {
        assert!(parse_arrivals("".as_bytes(), "t", &BTreeSet::new())
            .unwrap()
            .is_empty());
        let header_only = TABLE2.lines().next().unwrap();
        assert!(parse_arrivals(header_only.as_bytes(), "t", &BTreeSet::new())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let bad = "PatientID,CourseID,CreationDate,Protocol,NumberFractions,Duration1,Duration,SitePref,FollowsCourseID\n\
                   1,2,20-01-02,X,3,10,10,S1,-\n\
                   1,3,20-01-02,X,three,10,10,S1,-\n";
        match parse_arrivals(bad.as_bytes(), "arr.csv", &BTreeSet::new()) {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(path, "arr.csv");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_follow_is_reference_error() {
        let bad = "PatientID,CourseID,CreationDate,Protocol,NumberFractions,Duration1,Duration,SitePref,FollowsCourseID\n\
                   1,2,20-01-02,X,3,10,10,S1,99\n";
        assert!(matches!(
            parse_arrivals(bad.as_bytes(), "t", &BTreeSet::new()),
            Err(Error::DanglingReference { .. })
        ));
        let known: BTreeSet<CourseId> = [CourseId::new("99")].into();
        assert!(parse_arrivals(bad.as_bytes(), "t", &known).is_ok());
    }

    #[test]
    fn records_sorted_by_date_then_file_order() {
        let csv = "PatientID,CourseID,CreationDate,Protocol,NumberFractions,Duration1,Duration,SitePref,FollowsCourseID\n\
                   1,a,2020-01-03,X,3,10,10,S1,-\n\
                   2,b,2020-01-02,X,3,10,10,S1,-\n\
                   3,c,2020-01-03,X,3,10,10,S1,-\n";
        let ids: Vec<_> = parse_arrivals(csv.as_bytes(), "t", &BTreeSet::new())
            .unwrap()
            .into_iter()
            .map(|r| r.course_id.to_string())
            .collect();
        assert_eq!(ids, ["b", "a", "c"]);
    }

    fn arb_record(i: usize) -> impl Strategy<Value = ArrivalRecord> {
        (
            "[0-9]{5}",
            0i64..700,
            "[A-Za-z][A-Za-z .-]{0,12}[A-Za-z]",
            1u32..40,
            1u16..60,
            1u16..60,
            "S[1-4]",
            proptest::option::of(prop_oneof![
                Just(TimePreference::Morning),
                Just(TimePreference::Afternoon)
            ]),
            any::<bool>(),
        )
            .prop_map(move |(pid, day, proto, n, d1, d2, site, tp, ex)| ArrivalRecord {
                patient_id: PatientId::new(pid),
                course_id: CourseId::new(format!("C{i}")),
                creation_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                    + chrono::Days::new(day as u64),
                protocol: proto,
                n_fractions: n,
                duration_first: d1,
                duration_rest: d2,
                site_pref: SiteId::new(site),
                follows_course: None,
                time_preference: tp,
                excluded: ex,
            })
    }

    proptest! {
        #[test]
        fn emit_then_parse_round_trips(
            recs in (0usize..8).prop_flat_map(|n| (0..n).map(arb_record).collect::<Vec<_>>()),
            chain in any::<bool>(),
        ) {
            let mut recs = recs;
            recs.sort_by_key(|r| r.creation_date);
            if chain && recs.len() >= 2 {
                let prev = recs[0].course_id.clone();
                recs[1].follows_course = Some(prev);
            }
            let mut buf = Vec::new();
            emit_arrivals(&mut buf, &recs, Some("run_config: {}")).unwrap();
            let back = parse_arrivals(buf.as_slice(), "t", &BTreeSet::new()).unwrap();
            prop_assert_eq!(back, recs);
        }
    }
}
