//! Attaching a six-slot window of slot features to each drinking report,
//! and the exclusion rules that decide which reports enter the dataset.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{parse_cell, push_cell, SlotFeatureVector, SlotTable};
use crate::catalog::catalog;
use crate::error::{Error, Result};
use crate::model::{Cohort, Companions, Modality, Payload, SelfReport, Sex};
use crate::night::{slot_index, study_night_of, NightKey, SLOTS_PER_NIGHT, SLOT_MS};

/// Suffixes of the per-window aggregates, in column order.
pub const WINDOW_STATS: [&str; 3] = ["avg", "min", "max"];

pub const DEFAULT_WINDOW_SLOTS: usize = 6;

/// Column names of the event matrix: each base feature expanded to
/// `_avg`, `_min`, `_max`.
pub fn event_columns() -> Vec<String> {
    catalog()
        .features()
        .iter()
        .flat_map(|f| WINDOW_STATS.iter().map(move |s| format!("{}_{s}", f.name)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    UnavailableSensorData,
    EdgeTime,
    OutOfRegion,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::UnavailableSensorData => "unavailable_sensor_data",
            ExclusionReason::EdgeTime => "edge_time",
            ExclusionReason::OutOfRegion => "out_of_region",
        }
    }
}

/// Inclusive slot range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: usize,
    pub end: usize,
}

impl SlotRange {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub night_date: NaiveDate,
    pub range: SlotRange,
}

/// Axis-aligned latitude/longitude box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoFence {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl GeoFence {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

impl std::str::FromStr for GeoFence {
    type Err = String;

    /// `min_lat,max_lat,min_lon,max_lon`
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number `{x}`")))
            .collect::<std::result::Result<_, _>>()?;
        if v.len() != 4 {
            return Err("geofence needs min_lat,max_lat,min_lon,max_lon".into());
        }
        Ok(GeoFence {
            min_lat: v[0],
            max_lat: v[1],
            min_lon: v[2],
            max_lon: v[3],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub window_slots: usize,
    /// When set, reports whose window LOC fixes lie mostly outside the box
    /// are excluded as out of region.
    pub geofence: Option<GeoFence>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            window_slots: DEFAULT_WINDOW_SLOTS,
            geofence: None,
        }
    }
}

/// The window of `window_slots` consecutive slots around a report.
///
/// With six slots the window is `[s-2, s+3]` for report slot `s`; a report
/// at 22:08 (slot 12) covers 21:40 to 22:39. Windows that would leave the
/// night span, and reports outside any study night, are edge exclusions.
pub fn match_window(timestamp: i64, window_slots: usize) -> std::result::Result<Window, ExclusionReason> {
    if window_slots == 0 || window_slots > SLOTS_PER_NIGHT {
        return Err(ExclusionReason::EdgeTime);
    }
    let date = study_night_of(timestamp).ok_or(ExclusionReason::EdgeTime)?;
    let key = NightKey::new("", date);
    let s = slot_index(timestamp, &key).map_err(|_| ExclusionReason::EdgeTime)?;
    let before = (window_slots - 1) / 2;
    let after = window_slots - 1 - before;
    if s < before || s + after >= SLOTS_PER_NIGHT {
        return Err(ExclusionReason::EdgeTime);
    }
    Ok(Window {
        night_date: date,
        range: SlotRange {
            start: s - before,
            end: s + after,
        },
    })
}

/// Per base feature `[avg, min, max]` over the window slots where the
/// feature is present. Excludes the event when any sensor group has no
/// present value anywhere in the window.
pub fn match_event(
    slots: &[SlotFeatureVector],
    range: SlotRange,
) -> std::result::Result<Vec<Option<f64>>, ExclusionReason> {
    let cat = catalog();
    let window: Vec<&SlotFeatureVector> = range.slots().filter_map(|s| slots.get(s)).collect();
    for m in Modality::ALL {
        if !window.iter().any(|v| v.has_data(m)) {
            return Err(ExclusionReason::UnavailableSensorData);
        }
    }
    let mut out = Vec::with_capacity(cat.len() * 3);
    for f in 0..cat.len() {
        let present = window.iter().filter_map(|v| v.values[f]);
        let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
        for x in present {
            sum += x;
            n += 1;
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if n == 0 {
            out.extend([None, None, None]);
        } else {
            out.extend([Some(sum / n as f64), Some(lo), Some(hi)]);
        }
    }
    Ok(out)
}

/// One matched report with its window features.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRow {
    pub participant_id: String,
    pub sex: Option<Sex>,
    pub age: Option<u32>,
    pub timestamp: i64,
    pub night_date: NaiveDate,
    pub window: SlotRange,
    pub companions: Companions,
    pub features: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventDataset {
    pub columns: Vec<String>,
    pub rows: Vec<EventRow>,
}

impl Default for EventDataset {
    fn default() -> Self {
        Self {
            columns: event_columns(),
            rows: Vec::new(),
        }
    }
}

impl EventDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn participants(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.rows.iter().map(|r| r.participant_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionTally {
    pub unavailable_sensor_data: usize,
    pub edge_time: usize,
    pub out_of_region: usize,
    pub retained: usize,
}

impl ExclusionTally {
    pub fn excluded(&self) -> usize {
        self.unavailable_sensor_data + self.edge_time + self.out_of_region
    }

    pub fn total(&self) -> usize {
        self.excluded() + self.retained
    }

    fn add(&mut self, reason: ExclusionReason) {
        match reason {
            ExclusionReason::UnavailableSensorData => self.unavailable_sensor_data += 1,
            ExclusionReason::EdgeTime => self.edge_time += 1,
            ExclusionReason::OutOfRegion => self.out_of_region += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub timestamp: i64,
    pub reason: ExclusionReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildOutput {
    pub dataset: EventDataset,
    pub tally: ExclusionTally,
    pub exclusions: Vec<Exclusion>,
}

fn out_of_region(cohort: &Cohort, key: &NightKey, range: SlotRange, fence: &GeoFence) -> bool {
    let from = key.slot_start_ms(range.start);
    let to = key.slot_start_ms(range.end) + SLOT_MS;
    let (mut total, mut outside) = (0usize, 0usize);
    for r in cohort.night(key) {
        if let Payload::Loc(fix) = &r.payload {
            if (from..to).contains(&r.timestamp) {
                total += 1;
                outside += usize::from(!fence.contains(fix.latitude, fix.longitude));
            }
        }
    }
    total > 0 && 2 * outside > total
}

fn match_report(
    cohort: &Cohort,
    slots: &SlotTable,
    cfg: &MatchConfig,
    report: &SelfReport,
) -> std::result::Result<EventRow, ExclusionReason> {
    let window = match_window(report.timestamp, cfg.window_slots)?;
    let key = NightKey::new(report.participant_id.clone(), window.night_date);
    if let Some(fence) = &cfg.geofence {
        if out_of_region(cohort, &key, window.range, fence) {
            return Err(ExclusionReason::OutOfRegion);
        }
    }
    let night_slots = slots.get(&key).map(Vec::as_slice).unwrap_or(&[]);
    let features = match_event(night_slots, window.range)?;
    let participant = cohort.participants.get(&report.participant_id);
    Ok(EventRow {
        participant_id: report.participant_id.clone(),
        sex: participant.map(|p| p.sex),
        age: participant.map(|p| p.age),
        timestamp: report.timestamp,
        night_date: window.night_date,
        window: window.range,
        companions: report.companions,
        features,
    })
}

/// Matches every alcoholic report. Rule order: edge time, out of region,
/// unavailable sensor data. `retained + excluded` always equals the number
/// of alcoholic reports.
pub fn build_dataset(cohort: &Cohort, slots: &SlotTable, cfg: &MatchConfig) -> BuildOutput {
    let reports: Vec<&SelfReport> = cohort.alcoholic_reports().collect();
    let outcomes: Vec<_> = reports
        .par_iter()
        .map(|r| match_report(cohort, slots, cfg, r))
        .collect();
    let mut tally = ExclusionTally::default();
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    for (report, outcome) in reports.into_iter().zip(outcomes) {
        match outcome {
            Ok(row) => {
                tally.retained += 1;
                rows.push(row);
            }
            Err(reason) => {
                tally.add(reason);
                exclusions.push(Exclusion {
                    participant_id: report.participant_id.clone(),
                    timestamp: report.timestamp,
                    reason,
                });
            }
        }
    }
    BuildOutput {
        dataset: EventDataset {
            columns: event_columns(),
            rows,
        },
        tally,
        exclusions,
    }
}

// ---------------------------------------------------------------------------
// events.csv
// ---------------------------------------------------------------------------

pub const EVENT_META_COLUMNS: [&str; 12] = [
    "participant_id",
    "sex",
    "age",
    "timestamp_ms",
    "night_date",
    "window_start",
    "window_end",
    "partner",
    "family",
    "male_friends",
    "female_friends",
    "others",
];

pub(crate) fn event_meta_cells(r: &EventRow) -> String {
    let c = &r.companions;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.participant_id,
        r.sex.map(Sex::as_str).unwrap_or(""),
        r.age.map(|a| a.to_string()).unwrap_or_default(),
        r.timestamp,
        r.night_date,
        r.window.start,
        r.window.end,
        c.partner,
        c.family,
        c.male_friends,
        c.female_friends,
        c.others
    )
}

pub(crate) fn parse_event_row(
    cells: &[&str],
    n_features: usize,
) -> std::result::Result<EventRow, String> {
    if cells.len() != EVENT_META_COLUMNS.len() + n_features {
        return Err(format!(
            "expected {} columns, found {}",
            EVENT_META_COLUMNS.len() + n_features,
            cells.len()
        ));
    }
    let int = |i: usize| -> std::result::Result<u64, String> {
        cells[i]
            .parse()
            .map_err(|_| format!("bad integer in column {}", EVENT_META_COLUMNS[i]))
    };
    let small = |i: usize| -> std::result::Result<u8, String> {
        int(i).and_then(|v| u8::try_from(v).map_err(|_| "count out of range".to_string()))
    };
    let companions = Companions {
        partner: small(7)?,
        family: small(8)?,
        male_friends: small(9)?,
        female_friends: small(10)?,
        others: small(11)?,
    };
    if !companions.is_valid() {
        return Err("companion counts outside the 0..=11 scale".into());
    }
    Ok(EventRow {
        participant_id: cells[0].to_string(),
        sex: if cells[1].is_empty() {
            None
        } else {
            Some(cells[1].parse()?)
        },
        age: if cells[2].is_empty() {
            None
        } else {
            Some(int(2)? as u32)
        },
        timestamp: cells[3].parse().map_err(|_| "bad timestamp".to_string())?,
        night_date: NaiveDate::parse_from_str(cells[4], "%Y-%m-%d").map_err(|e| e.to_string())?,
        window: SlotRange {
            start: int(5)? as usize,
            end: int(6)? as usize,
        },
        companions,
        features: cells[EVENT_META_COLUMNS.len()..]
            .iter()
            .map(|c| parse_cell(c))
            .collect::<std::result::Result<_, _>>()?,
    })
}

pub fn events_header(columns: &[String]) -> String {
    let mut h = EVENT_META_COLUMNS.join(",");
    for c in columns {
        h.push(',');
        h.push_str(c);
    }
    h
}

pub fn write_events_csv(ds: &EventDataset, path: &Path) -> Result<()> {
    let mut out = events_header(&ds.columns);
    out.push('\n');
    for r in &ds.rows {
        out.push_str(&event_meta_cells(r));
        for &v in &r.features {
            push_cell(&mut out, v);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_events_csv(path: &Path) -> Result<EventDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or_default();
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < EVENT_META_COLUMNS.len() || cols[..EVENT_META_COLUMNS.len()] != EVENT_META_COLUMNS {
        return Err(Error::Parse {
            file,
            line: 1,
            msg: "not an events file".into(),
        });
    }
    let columns: Vec<String> = cols[EVENT_META_COLUMNS.len()..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        rows.push(parse_event_row(&cells, columns.len()).map_err(|msg| Error::Parse {
            file: file.clone(),
            line: i + 1,
            msg,
        })?);
    }
    Ok(EventDataset { columns, rows })
}

pub fn write_tally_json(tally: &ExclusionTally, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(tally)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Human summary such as `152 + 102 + 59 excluded, 941 retained`.
pub fn describe_tally(t: &ExclusionTally) -> String {
    let mut s = String::new();
    write!(
        s,
        "{} unavailable + {} edge + {} out-of-region excluded, {} retained of {}",
        t.unavailable_sensor_data,
        t.edge_time,
        t.out_of_region,
        t.retained,
        t.total()
    )
    .expect("write to String");
    s
}
