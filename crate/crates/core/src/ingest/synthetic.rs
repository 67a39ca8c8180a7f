use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use super::{ArrivalRecord, CalendarRow};
use crate::model::{
    Clinic, ClockTime, CourseId, Interval, PatientId, Priority, ProtocolTable, SiteId,
    TimePreference, TreatmentProtocol, UnavailabilityKind,
};
use crate::{Error, Result};

/// Parameters of the synthetic arrival stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Mean arrivals per working day.
    pub daily_rate_mean: f64,
    pub priority_mix: BTreeMap<Priority, f64>,
    /// Protocol shares. Within a drawn priority the protocol is drawn from
    /// the shares of that priority's protocols, renormalized.
    pub protocol_mix: BTreeMap<String, f64>,
    /// Share of patients that receive a chained secondary course.
    pub consecutive_prob: f64,
    /// Primary protocol name to the protocol of its chained course. Only
    /// these primaries can receive one.
    pub boosts: BTreeMap<String, String>,
    pub site_mix: BTreeMap<SiteId, f64>,
    /// Share of patients stating a morning or afternoon preference.
    pub time_preference_share: f64,
    /// Share of stated preferences that are for the morning.
    pub morning_share: f64,
    pub unavailability: UnavailabilityConfig,
    pub seed: u64,
}

/// Parameters of the synthetic machine calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnavailabilityConfig {
    /// Share of weekdays with any unavailability, holidays included.
    pub weekday_share: f64,
    /// Share of planned blocks covering the whole day; the rest cover half.
    pub full_day_share: f64,
    /// Share of working days with a failure on one machine.
    pub failure_day_share: f64,
    pub failure_min_minutes: u16,
    pub failure_max_minutes: u16,
}

fn check_share(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_mix<'a>(name: &str, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut sum = 0.0;
    for &v in values {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(format!("{name} has an invalid entry {v}")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("{name} sums to {sum}, expected 1")));
    }
    Ok(())
}

struct Resolved<'a> {
    by_priority: Vec<(Priority, Vec<&'a TreatmentProtocol>, WeightedIndex<f64>)>,
    priority: WeightedIndex<f64>,
    boosts: BTreeMap<&'a str, &'a TreatmentProtocol>,
    boost_prob: f64,
    sites: Vec<SiteId>,
    site: WeightedIndex<f64>,
}

impl SyntheticConfig {
    pub fn validate(&self, protocols: &ProtocolTable) -> Result<()> {
        self.resolve(protocols).map(|_| ())
    }

    fn resolve<'a>(&self, protocols: &'a ProtocolTable) -> Result<Resolved<'a>> {
        if !(self.daily_rate_mean >= 0.0 && self.daily_rate_mean.is_finite()) {
            return Err(Error::config("daily_rate_mean must be a non-negative number"));
        }
        if self.end < self.start {
            return Err(Error::config("synthetic end precedes start"));
        }
        check_mix("priority_mix", self.priority_mix.values())?;
        check_mix("protocol_mix", self.protocol_mix.values())?;
        check_mix("site_mix", self.site_mix.values())?;
        for (n, p) in [
            ("consecutive_prob", self.consecutive_prob),
            ("time_preference_share", self.time_preference_share),
            ("morning_share", self.morning_share),
            ("weekday_share", self.unavailability.weekday_share),
            ("full_day_share", self.unavailability.full_day_share),
            ("failure_day_share", self.unavailability.failure_day_share),
        ] {
            check_share(n, p)?;
        }
        let u = &self.unavailability;
        if u.failure_min_minutes == 0 || u.failure_min_minutes > u.failure_max_minutes {
            return Err(Error::config("failure duration bounds are inconsistent"));
        }

        let mut groups: BTreeMap<Priority, Vec<(&TreatmentProtocol, f64)>> = BTreeMap::new();
        for (name, &w) in &self.protocol_mix {
            let p = protocols
                .by_name(name)
                .ok_or_else(|| Error::UnknownProtocol(name.as_str().into()))?;
            if p.fraction_options.is_empty() {
                return Err(Error::config(format!("protocol `{}` has no fraction_options", p.id)));
            }
            groups.entry(p.priority).or_default().push((p, w));
        }
        let mut by_priority = Vec::new();
        let mut pw = Vec::new();
        for (&prio, &share) in &self.priority_mix {
            let group = groups.remove(&prio).unwrap_or_default();
            let total: f64 = group.iter().map(|(_, w)| w).sum();
            if share > 0.0 && total <= 0.0 {
                return Err(Error::config(format!("priority {prio} has no protocol in the mix")));
            }
            if share > 0.0 {
                let idx = WeightedIndex::new(group.iter().map(|(_, w)| *w))
                    .map_err(|e| Error::config(e.to_string()))?;
                by_priority.push((prio, group.into_iter().map(|(p, _)| p).collect(), idx));
                pw.push(share);
            }
        }
        if by_priority.is_empty() {
            return Err(Error::config("priority_mix has no positive share"));
        }
        let priority = WeightedIndex::new(pw).map_err(|e| Error::config(e.to_string()))?;

        let mut boosts = BTreeMap::new();
        for (primary, secondary) in &self.boosts {
            let a = protocols
                .by_name(primary)
                .ok_or_else(|| Error::UnknownProtocol(primary.as_str().into()))?;
            let b = protocols
                .by_name(secondary)
                .ok_or_else(|| Error::UnknownProtocol(secondary.as_str().into()))?;
            if b.fraction_options.is_empty() {
                return Err(Error::config(format!("protocol `{}` has no fraction_options", b.id)));
            }
            boosts.insert(a.id.as_str(), b);
        }
        // Overall chained share must equal consecutive_prob, but only boost
        // primaries are eligible.
        let eligible: f64 = self
            .protocol_mix
            .iter()
            .filter_map(|(name, &w)| {
                let p = protocols.by_name(name)?;
                boosts.contains_key(p.id.as_str()).then(|| {
                    let share = self.priority_mix.get(&p.priority).copied().unwrap_or(0.0);
                    let total: f64 = self
                        .protocol_mix
                        .iter()
                        .filter(|(n, _)| {
                            protocols.by_name(n).is_some_and(|q| q.priority == p.priority)
                        })
                        .map(|(_, w)| w)
                        .sum();
                    share * w / total
                })
            })
            .sum();
        let boost_prob = if self.consecutive_prob == 0.0 {
            0.0
        } else if eligible <= 0.0 || self.consecutive_prob > eligible + 1e-12 {
            return Err(Error::config(format!(
                "consecutive_prob {} exceeds the share of boost-eligible patients {eligible:.3}",
                self.consecutive_prob
            )));
        } else {
            (self.consecutive_prob / eligible).min(1.0)
        };

        let sites: Vec<SiteId> = self.site_mix.keys().cloned().collect();
        let site = WeightedIndex::new(self.site_mix.values().copied())
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(Resolved {
            by_priority,
            priority,
            boosts,
            boost_prob,
            sites,
            site,
        })
    }
}

fn draw_fractions(p: &TreatmentProtocol, rng: &mut ChaCha8Rng) -> u32 {
    let idx = WeightedIndex::new(p.fraction_options.iter().map(|(_, w)| *w))
        .expect("fraction options validated");
    p.fraction_options[idx.sample(rng)].0
}

/// Draws a synthetic arrival stream.
///
/// Daily counts are Poisson on every working day between `cfg.start` and
/// `cfg.end`. Course ids are sequential, so two calls with the same config
/// produce identical lists.
pub fn generate_synthetic(
    cfg: &SyntheticConfig,
    protocols: &ProtocolTable,
    clinic: &Clinic,
) -> Result<Vec<ArrivalRecord>> {
    let r = cfg.resolve(protocols)?;
    let cal = &clinic.calendar;
    for d in [cfg.start, cfg.end] {
        if !cal.contains(d) {
            return Err(Error::OutOfRange(d));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let poisson = if cfg.daily_rate_mean > 0.0 {
        Some(Poisson::new(cfg.daily_rate_mean).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };
    let mut out = Vec::new();
    let mut patient = 0u32;
    let mut course = 0u32;
    let days: Vec<NaiveDate> = cal
        .working_days()
        .iter()
        .copied()
        .filter(|d| (cfg.start..=cfg.end).contains(d))
        .collect();
    for day in days {
        let n = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as u32);
        for _ in 0..n {
            patient += 1;
            let (_, group, idx) = &r.by_priority[r.priority.sample(&mut rng)];
            let proto = group[idx.sample(&mut rng)];
            let site = r.sites[r.site.sample(&mut rng)].clone();
            let time_preference = if rng.random_bool(cfg.time_preference_share) {
                Some(if rng.random_bool(cfg.morning_share) {
                    TimePreference::Morning
                } else {
                    TimePreference::Afternoon
                })
            } else {
                None
            };
            let mut make = |p: &TreatmentProtocol, follows: Option<CourseId>, rng: &mut ChaCha8Rng| {
                course += 1;
                ArrivalRecord {
                    patient_id: PatientId::new(format!("{patient:05}")),
                    course_id: CourseId::new(format!("{}", 10000 + course)),
                    creation_date: day,
                    protocol: p.id.to_string(),
                    n_fractions: draw_fractions(p, rng),
                    duration_first: p.first_fraction_duration,
                    duration_rest: p.subsequent_fraction_duration,
                    site_pref: site.clone(),
                    follows_course: follows,
                    time_preference,
                    excluded: false,
                }
            };
            let primary = make(proto, None, &mut rng);
            let boost = r
                .boosts
                .get(proto.id.as_str())
                .filter(|_| rng.random_bool(r.boost_prob))
                .map(|b| make(b, Some(primary.course_id.clone()), &mut rng));
            out.push(primary);
            out.extend(boost);
        }
    }
    Ok(out)
}

/// Draws a machine unavailability calendar between `cfg.start` and `cfg.end`.
///
/// Exactly `round(weekday_share * weekdays)` weekdays carry some
/// unavailability, counting holidays and failure days first. Each remaining
/// chosen day gets one planned block on one machine, full-day or half-day.
pub fn generate_calendar(cfg: &SyntheticConfig, clinic: &Clinic) -> Result<Vec<CalendarRow>> {
    let u = &cfg.unavailability;
    for (n, p) in [
        ("weekday_share", u.weekday_share),
        ("full_day_share", u.full_day_share),
        ("failure_day_share", u.failure_day_share),
    ] {
        check_share(n, p)?;
    }
    let cal = &clinic.calendar;
    for d in [cfg.start, cfg.end] {
        if !cal.contains(d) {
            return Err(Error::OutOfRange(d));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let op = clinic.park.operating_window();
    let grid = clinic.layout.grid();
    let machines: Vec<_> = clinic.park.machines().iter().map(|m| m.id.clone()).collect();

    let weekdays: Vec<NaiveDate> = cfg
        .start
        .iter_days()
        .take_while(|d| *d <= cfg.end)
        .filter(|d| !cal.config().weekend_days.contains(&d.weekday()))
        .collect();
    let target = (u.weekday_share * weekdays.len() as f64).round() as usize;
    let holidays = weekdays.iter().filter(|d| !cal.is_working(**d)).count();
    let working: Vec<NaiveDate> = weekdays.iter().copied().filter(|d| cal.is_working(*d)).collect();

    let mut rows = Vec::new();
    let mut used: BTreeSet<NaiveDate> = BTreeSet::new();
    let lo = u.failure_min_minutes.div_ceil(grid);
    let hi = (u.failure_max_minutes / grid).min(op.len() / grid);
    for &d in &working {
        if !rng.random_bool(u.failure_day_share) || lo > hi {
            continue;
        }
        let len = rng.random_range(lo..=hi) * grid;
        let slots = (op.len() - len) / grid;
        let start = op.start.minutes() + rng.random_range(0..=slots) * grid;
        rows.push(CalendarRow {
            machine: machines.choose(&mut rng).expect("park is non-empty").clone(),
            date: d,
            interval: Some(Interval::new(
                ClockTime::from_minutes(start),
                ClockTime::from_minutes(start + len),
            )),
            kind: UnavailabilityKind::Failure,
        });
        used.insert(d);
    }

    let free: Vec<NaiveDate> = working.iter().copied().filter(|d| !used.contains(d)).collect();
    let wanted = target.saturating_sub(holidays + used.len()).min(free.len());
    let mut chosen: Vec<NaiveDate> = free.choose_multiple(&mut rng, wanted).copied().collect();
    chosen.sort();
    let noon = clinic.calendar.config().noon_boundary.max(op.start).min(op.end);
    for d in chosen {
        let machine = machines.choose(&mut rng).expect("park is non-empty").clone();
        let interval = if rng.random_bool(u.full_day_share) {
            None
        } else if rng.random_bool(0.5) {
            Some(Interval::new(op.start, noon))
        } else {
            Some(Interval::new(noon, op.end))
        };
        rows.push(CalendarRow {
            machine,
            date: d,
            interval,
            kind: UnavailabilityKind::Planned,
        });
    }
    rows.sort();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn cfg() -> SyntheticConfig {
        fixture::synthetic_config()
    }

    #[test]
    fn mixes_must_sum_to_one() {
        let mut c = cfg();
        c.priority_mix.insert(Priority::A, 0.5);
        assert!(matches!(
            generate_synthetic(&c, &fixture::protocols(), &fixture::clinic()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_rate_gives_nothing() {
        let mut c = cfg();
        c.daily_rate_mean = 0.0;
        let recs = generate_synthetic(&c, &fixture::protocols(), &fixture::clinic()).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn arrivals_only_on_working_days() {
        let clinic = fixture::clinic();
        let recs = generate_synthetic(&cfg(), &fixture::protocols(), &clinic).unwrap();
        assert!(!recs.is_empty());
        assert!(recs.iter().all(|r| clinic.calendar.is_working(r.creation_date)));
    }

    #[test]
    fn boosts_follow_their_primary() {
        let recs = generate_synthetic(&cfg(), &fixture::protocols(), &fixture::clinic()).unwrap();
        for (i, r) in recs.iter().enumerate() {
            if let Some(f) = &r.follows_course {
                let p = &recs[i - 1];
                assert_eq!(&p.course_id, f);
                assert_eq!(p.patient_id, r.patient_id);
                assert_eq!(p.creation_date, r.creation_date);
                assert_eq!(p.protocol, "Breast");
            }
        }
    }

    #[test]
    fn calendar_hits_the_weekday_share_exactly() {
        let clinic = fixture::clinic();
        let c = cfg();
        let rows = generate_calendar(&c, &clinic).unwrap();
        let weekdays: Vec<NaiveDate> = c
            .start
            .iter_days()
            .take_while(|d| *d <= c.end)
            .filter(|d| d.weekday().num_days_from_monday() < 5)
            .collect();
        let mut days: BTreeSet<NaiveDate> = rows.iter().map(|r| r.date).collect();
        days.extend(weekdays.iter().filter(|d| !clinic.calendar.is_working(**d)));
        let expected = (0.34 * weekdays.len() as f64).round() as usize;
        assert_eq!(days.len(), expected);
        assert!(rows.iter().all(|r| clinic.calendar.is_working(r.date)));
    }
}
