//! Consistency checks over an ingested cohort. Report-only: nothing here
//! mutates or rejects data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Cohort;
use crate::night::study_night_of;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRef {
    pub participant_id: String,
    pub timestamp: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Sensor record counts for participant ids absent from the roster.
    pub orphan_records: BTreeMap<String, usize>,
    pub orphan_reports: Vec<ReportRef>,
    pub reports_outside_night: Vec<ReportRef>,
    pub duplicate_report_timestamps: Vec<ReportRef>,
}

impl ValidationReport {
    pub fn findings(&self) -> usize {
        self.orphan_records.len()
            + self.orphan_reports.len()
            + self.reports_outside_night.len()
            + self.duplicate_report_timestamps.len()
    }

    pub fn is_clean(&self) -> bool {
        self.findings() == 0
    }
}

pub fn validate_cohort(cohort: &Cohort) -> ValidationReport {
    let mut out = ValidationReport::default();
    for (key, readings) in &cohort.nights {
        if !cohort.participants.contains_key(&key.participant_id) {
            *out.orphan_records.entry(key.participant_id.clone()).or_default() += readings.len();
        }
    }
    let mut prev: Option<&crate::model::SelfReport> = None;
    for r in &cohort.reports {
        let rf = ReportRef {
            participant_id: r.participant_id.clone(),
            timestamp: r.timestamp,
        };
        if !cohort.participants.contains_key(&r.participant_id) {
            out.orphan_reports.push(rf.clone());
        }
        if study_night_of(r.timestamp).is_none() {
            out.reports_outside_night.push(rf.clone());
        }
        // reports are sorted by (participant, timestamp)
        if let Some(p) = prev {
            if p.participant_id == r.participant_id && p.timestamp == r.timestamp {
                out.duplicate_report_timestamps.push(rf);
            }
        }
        prev = Some(r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use chrono::NaiveDate;

    fn ts(h: u32) -> i64 {
        NaiveDate::from_ymd_opt(2019, 10, 4)
            .unwrap()
            .and_hms_opt(h, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp_millis()
    }

    fn report(id: &str, t: i64) -> SelfReport {
        SelfReport {
            participant_id: id.into(),
            timestamp: t,
            alcoholic: true,
            companions: Companions::default(),
        }
    }

    fn alice() -> Participant {
        Participant { id: "alice".into(), sex: Sex::Woman, age: 21 }
    }

    #[test]
    fn consistent_cohort_is_clean() {
        let (c, _) = Cohort::from_parts(vec![alice()], vec![], vec![report("alice", ts(22))]);
        assert!(validate_cohort(&c).is_clean());
    }

    #[test]
    fn early_report_is_flagged() {
        let (c, _) = Cohort::from_parts(vec![alice()], vec![], vec![report("alice", ts(19))]);
        let v = validate_cohort(&c);
        assert_eq!(v.reports_outside_night.len(), 1);
        assert_eq!(v.findings(), 1);
    }

    #[test]
    fn orphans_and_duplicates() {
        let rec = SensorRecord {
            participant_id: "bob".into(),
            timestamp: ts(21),
            payload: Payload::Scr { on: true },
        };
        let (c, _) = Cohort::from_parts(
            vec![alice()],
            vec![rec],
            vec![report("alice", ts(22)), report("alice", ts(22))],
        );
        let v = validate_cohort(&c);
        assert_eq!(v.orphan_records.get("bob"), Some(&1));
        assert_eq!(v.duplicate_report_timestamps.len(), 1);
    }
}
