//! Canonical records: participants, sensor readings, self-reports and the
//! cohort that groups them by user-night.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::night::{study_night_of, NightKey};

/// Largest value of the companion scale; 11 encodes "more than 10".
pub const MAX_COMPANIONS: u8 = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Man,
    Woman,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Man => "man",
            Sex::Woman => "woman",
        }
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "man" | "m" | "male" => Ok(Sex::Man),
            "woman" | "w" | "f" | "female" => Ok(Sex::Woman),
            other => Err(format!("unknown sex `{other}`")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub sex: Sex,
    pub age: u32,
}

/// The eight sensing modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "ACC")]
    Acc,
    #[serde(rename = "APP")]
    App,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "SCR")]
    Scr,
    #[serde(rename = "BAT")]
    Bat,
    #[serde(rename = "BLU")]
    Blu,
    #[serde(rename = "WIF")]
    Wif,
    #[serde(rename = "PRO")]
    Pro,
}

impl Modality {
    pub const ALL: [Modality; 8] = [
        Modality::Acc,
        Modality::App,
        Modality::Loc,
        Modality::Scr,
        Modality::Bat,
        Modality::Blu,
        Modality::Wif,
        Modality::Pro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Acc => "ACC",
            Modality::App => "APP",
            Modality::Loc => "LOC",
            Modality::Scr => "SCR",
            Modality::Bat => "BAT",
            Modality::Blu => "BLU",
            Modality::Wif => "WIF",
            Modality::Pro => "PRO",
        }
    }

    /// Name of the line-delimited file holding this modality.
    pub fn file_name(self) -> &'static str {
        match self {
            Modality::Acc => "acc.csv",
            Modality::App => "app.csv",
            Modality::Loc => "loc.csv",
            Modality::Scr => "scr.csv",
            Modality::Bat => "bat.csv",
            Modality::Blu => "blu.csv",
            Modality::Wif => "wif.csv",
            Modality::Pro => "pro.csv",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown modality `{s}`"))
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocSource {
    Gps,
    Network,
    Unknown,
}

impl LocSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LocSource::Gps => "gps",
            LocSource::Network => "network",
            LocSource::Unknown => "unknown",
        }
    }
}

impl FromStr for LocSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gps" => Ok(LocSource::Gps),
            "network" => Ok(LocSource::Network),
            "unknown" => Ok(LocSource::Unknown),
            other => Err(format!("unknown location source `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryStatus {
    Charging,
    Discharging,
    Full,
    NotCharging,
    Unknown,
}

impl BatteryStatus {
    pub const ALL: [BatteryStatus; 5] = [
        BatteryStatus::Charging,
        BatteryStatus::Discharging,
        BatteryStatus::Full,
        BatteryStatus::NotCharging,
        BatteryStatus::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BatteryStatus::Charging => "charging",
            BatteryStatus::Discharging => "discharging",
            BatteryStatus::Full => "full",
            BatteryStatus::NotCharging => "not_charging",
            BatteryStatus::Unknown => "unknown",
        }
    }
}

impl FromStr for BatteryStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BatteryStatus::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown battery status `{s}`"))
    }
}

/// A running application and its store category id.
///
/// Category ids: `0..=30` store categories, 31 the study app, 32 system
/// apps, 33 unknown. Anything else is treated as unknown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppEntry {
    pub package: String,
    pub category: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationFix {
    pub latitude: f64,
    pub longitude: f64,
    pub accuracy: f64,
    pub speed: f64,
    pub source: LocSource,
    pub signal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BluetoothSighting {
    pub device: String,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WifiSighting {
    pub hotspot: String,
    pub level: f64,
    pub frequency: f64,
}

/// Modality-specific content of one reading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Acc { x: f64, y: f64, z: f64 },
    App(Vec<AppEntry>),
    Loc(LocationFix),
    Scr { on: bool },
    Bat { level: f64, status: BatteryStatus, plugged: bool },
    Blu(Vec<BluetoothSighting>),
    Wif(Vec<WifiSighting>),
    Pro { distance_cm: f64 },
}

impl Payload {
    pub fn modality(&self) -> Modality {
        match self {
            Payload::Acc { .. } => Modality::Acc,
            Payload::App(_) => Modality::App,
            Payload::Loc(_) => Modality::Loc,
            Payload::Scr { .. } => Modality::Scr,
            Payload::Bat { .. } => Modality::Bat,
            Payload::Blu(_) => Modality::Blu,
            Payload::Wif(_) => Modality::Wif,
            Payload::Pro { .. } => Modality::Pro,
        }
    }
}

/// One line of a sensor log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub participant_id: String,
    pub timestamp: i64,
    pub payload: Payload,
}

impl SensorRecord {
    pub fn modality(&self) -> Modality {
        self.payload.modality()
    }
}

/// A sensor reading stored under its user-night; the participant is implied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub timestamp: i64,
    pub payload: Payload,
}

impl Reading {
    pub fn modality(&self) -> Modality {
        self.payload.modality()
    }
}

/// Companion counts on the 0..=11 scale (partner is 0/1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Companions {
    pub partner: u8,
    pub family: u8,
    pub male_friends: u8,
    pub female_friends: u8,
    pub others: u8,
}

impl Companions {
    pub fn is_valid(&self) -> bool {
        self.partner <= 1
            && [self.family, self.male_friends, self.female_friends, self.others]
                .iter()
                .all(|&c| c <= MAX_COMPANIONS)
    }

    pub fn friends(&self) -> u32 {
        u32::from(self.male_friends) + u32::from(self.female_friends)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfReport {
    pub participant_id: String,
    pub timestamp: i64,
    pub alcoholic: bool,
    pub companions: Companions,
}

/// An ingested cohort. Immutable once built; readings of each night are
/// kept in canonical order so construction is independent of input order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cohort {
    pub participants: BTreeMap<String, Participant>,
    pub nights: BTreeMap<NightKey, Vec<Reading>>,
    pub reports: Vec<SelfReport>,
}

impl Cohort {
    /// Groups records by user-night and returns the cohort together with the
    /// number of records dropped for falling outside every study night.
    pub fn from_parts(
        participants: impl IntoIterator<Item = Participant>,
        records: impl IntoIterator<Item = SensorRecord>,
        reports: impl IntoIterator<Item = SelfReport>,
    ) -> (Self, usize) {
        let participants = participants
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect();
        let mut nights: BTreeMap<NightKey, Vec<Reading>> = BTreeMap::new();
        let mut discarded = 0;
        for record in records {
            match study_night_of(record.timestamp) {
                Some(date) => nights
                    .entry(NightKey::new(record.participant_id, date))
                    .or_default()
                    .push(Reading {
                        timestamp: record.timestamp,
                        payload: record.payload,
                    }),
                None => discarded += 1,
            }
        }
        for readings in nights.values_mut() {
            readings.sort_by(cmp_readings);
        }
        let mut reports: Vec<SelfReport> = reports.into_iter().collect();
        reports.sort_by(|a, b| {
            (&a.participant_id, a.timestamp, a.alcoholic, a.companions).cmp(&(
                &b.participant_id,
                b.timestamp,
                b.alcoholic,
                b.companions,
            ))
        });
        (
            Self {
                participants,
                nights,
                reports,
            },
            discarded,
        )
    }

    pub fn night(&self, key: &NightKey) -> &[Reading] {
        self.nights.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn record_count(&self) -> usize {
        self.nights.values().map(Vec::len).sum()
    }

    pub fn alcoholic_reports(&self) -> impl Iterator<Item = &SelfReport> {
        self.reports.iter().filter(|r| r.alcoholic)
    }
}

/// Total order on readings: timestamp, modality, then payload contents.
pub fn cmp_readings(a: &Reading, b: &Reading) -> Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then_with(|| a.modality().cmp(&b.modality()))
        .then_with(|| cmp_payload(&a.payload, &b.payload))
}

fn cmp_f64s(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn cmp_payload(a: &Payload, b: &Payload) -> Ordering {
    use Payload::*;
    match (a, b) {
        (Acc { x, y, z }, Acc { x: x2, y: y2, z: z2 }) => cmp_f64s(&[*x, *y, *z], &[*x2, *y2, *z2]),
        (App(a), App(b)) => a
            .iter()
            .map(|e| (&e.package, e.category))
            .cmp(b.iter().map(|e| (&e.package, e.category))),
        (Loc(a), Loc(b)) => cmp_f64s(
            &[a.latitude, a.longitude, a.accuracy, a.speed, a.signal],
            &[b.latitude, b.longitude, b.accuracy, b.speed, b.signal],
        )
        .then(a.source.cmp(&b.source)),
        (Scr { on }, Scr { on: on2 }) => on.cmp(on2),
        (
            Bat { level, status, plugged },
            Bat { level: l2, status: s2, plugged: p2 },
        ) => level.total_cmp(l2).then(status.cmp(s2)).then(plugged.cmp(p2)),
        (Blu(a), Blu(b)) => {
            let mut it = a.iter().zip(b);
            it.find_map(|(x, y)| {
                let o = x.device.cmp(&y.device).then(x.strength.total_cmp(&y.strength));
                o.is_ne().then_some(o)
            })
            .unwrap_or_else(|| a.len().cmp(&b.len()))
        }
        (Wif(a), Wif(b)) => {
            let mut it = a.iter().zip(b);
            it.find_map(|(x, y)| {
                let o = x
                    .hotspot
                    .cmp(&y.hotspot)
                    .then(x.level.total_cmp(&y.level))
                    .then(x.frequency.total_cmp(&y.frequency));
                o.is_ne().then_some(o)
            })
            .unwrap_or_else(|| a.len().cmp(&b.len()))
        }
        (Pro { distance_cm }, Pro { distance_cm: d2 }) => distance_cm.total_cmp(d2),
        _ => a.modality().cmp(&b.modality()),
    }
}
