//! Study nights and the ten-minute slot grid.
//!
//! A user-night runs from 20:00 on a Friday or Saturday to 04:00 the next
//! morning and is cut into 48 slots of ten minutes. Timestamps are
//! milliseconds since the Unix epoch, interpreted as local study time.

use std::fmt;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SLOTS_PER_NIGHT: usize = 48;
pub const SLOT_MS: i64 = 10 * 60 * 1000;
pub const NIGHT_START_HOUR: u32 = 20;
pub const NIGHT_END_HOUR: u32 = 4;
pub const NIGHT_MS: i64 = SLOTS_PER_NIGHT as i64 * SLOT_MS;

/// One participant's study night, keyed by the calendar date on which it starts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NightKey {
    pub participant_id: String,
    pub date: NaiveDate,
}

impl NightKey {
    pub fn new(participant_id: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            participant_id: participant_id.into(),
            date,
        }
    }

    pub fn start_ms(&self) -> i64 {
        night_start_ms(self.date)
    }

    pub fn end_ms(&self) -> i64 {
        self.start_ms() + NIGHT_MS
    }

    pub fn contains(&self, timestamp: i64) -> bool {
        (self.start_ms()..self.end_ms()).contains(&timestamp)
    }

    pub fn slot_start_ms(&self, slot: usize) -> i64 {
        self.start_ms() + slot as i64 * SLOT_MS
    }
}

impl fmt::Display for NightKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.participant_id, self.date)
    }
}

/// Epoch milliseconds of 20:00 on `date`.
pub fn night_start_ms(date: NaiveDate) -> i64 {
    date.and_hms_opt(NIGHT_START_HOUR, 0, 0)
        .expect("valid wall-clock time")
        .and_utc()
        .timestamp_millis()
}

/// Friday and Saturday nights are study nights.
pub fn is_study_night(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Fri | Weekday::Sat)
}

/// The date of the night span containing `timestamp`, if any. A reading at
/// 00:30 on Saturday belongs to Friday's night.
pub fn night_date_of(timestamp: i64) -> Option<NaiveDate> {
    let dt = DateTime::from_timestamp_millis(timestamp)?.naive_utc();
    let hour = dt.hour();
    if hour >= NIGHT_START_HOUR {
        Some(dt.date())
    } else if hour < NIGHT_END_HOUR {
        Some(dt.date() - Duration::days(1))
    } else {
        None
    }
}

/// The study night containing `timestamp`: inside a night span and on a
/// Friday or Saturday.
pub fn study_night_of(timestamp: i64) -> Option<NaiveDate> {
    night_date_of(timestamp).filter(|d| is_study_night(*d))
}

/// `floor((t - 20:00) / 10 min)` for a timestamp inside the night span.
pub fn slot_index(timestamp: i64, night: &NightKey) -> Result<usize> {
    let offset = timestamp - night.start_ms();
    if !(0..NIGHT_MS).contains(&offset) {
        return Err(Error::OutOfSpan(timestamp));
    }
    Ok((offset / SLOT_MS) as usize)
}

/// Human-readable wall-clock label (`HH:MM`) of a slot start.
pub fn slot_label(slot: usize) -> String {
    let minutes = (NIGHT_START_HOUR as usize * 60 + slot * 10) % (24 * 60);
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn friday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 10, 4).unwrap()
    }

    fn at(date: NaiveDate, h: u32, m: u32) -> i64 {
        date.and_hms_opt(h, m, 0).unwrap().and_utc().timestamp_millis()
    }

    #[test]
    fn slot_index_examples() {
        let key = NightKey::new("p", friday());
        let sat = friday().succ_opt().unwrap();
        assert_eq!(slot_index(at(friday(), 20, 0), &key).unwrap(), 0);
        assert_eq!(slot_index(at(sat, 3, 59), &key).unwrap(), 47);
        assert_eq!(slot_index(at(friday(), 22, 8), &key).unwrap(), 12);
        assert_eq!(slot_index(at(sat, 0, 0), &key).unwrap(), 24);
    }

    #[test]
    fn slot_index_rejects_outside_span() {
        let key = NightKey::new("p", friday());
        let sat = friday().succ_opt().unwrap();
        assert!(matches!(
            slot_index(at(friday(), 19, 59), &key),
            Err(Error::OutOfSpan(_))
        ));
        assert!(slot_index(at(sat, 4, 0), &key).is_err());
    }

    #[test]
    fn after_midnight_belongs_to_previous_night() {
        let sat = friday().succ_opt().unwrap();
        assert_eq!(night_date_of(at(sat, 0, 30)), Some(friday()));
        assert_eq!(night_date_of(at(sat, 12, 0)), None);
        assert_eq!(night_date_of(at(sat, 21, 0)), Some(sat));
    }

    #[test]
    fn only_weekend_nights_are_study_nights() {
        let thursday = friday().pred_opt().unwrap();
        assert_eq!(study_night_of(at(thursday, 22, 0)), None);
        assert_eq!(study_night_of(at(friday(), 22, 0)), Some(friday()));
    }

    #[test]
    fn labels() {
        assert_eq!(slot_label(0), "20:00");
        assert_eq!(slot_label(10), "21:40");
        assert_eq!(slot_label(47), "03:50");
    }
}
