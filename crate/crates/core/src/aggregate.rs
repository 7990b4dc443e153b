//! Reduction of a user-night's raw readings into 48 ten-minute slot vectors
//! over the base-feature catalog.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::catalog::{app_bin, catalog, N_APP_BINS};
use crate::error::{Error, Result};
use crate::model::{BatteryStatus, Cohort, LocSource, Modality, Payload, Reading};
use crate::night::{NightKey, SLOTS_PER_NIGHT, SLOT_MS};

/// Base-feature values of one slot; `None` means no data.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotFeatureVector {
    pub night: NightKey,
    pub slot: usize,
    pub values: Vec<Option<f64>>,
}

impl SlotFeatureVector {
    pub fn empty(night: NightKey, slot: usize) -> Self {
        Self {
            night,
            slot,
            values: vec![None; catalog().len()],
        }
    }

    pub fn has_data(&self, group: Modality) -> bool {
        self.values[catalog().range(group)].iter().any(Option::is_some)
    }
}

/// Slot vectors of every night in a cohort.
pub type SlotTable = BTreeMap<NightKey, Vec<SlotFeatureVector>>;

/// `[min, max, median, mean, population std]`; sorts `values` in place.
pub fn five_stats(values: &mut [f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Some([values[0], values[n - 1], median, mean, var.sqrt()])
}

fn put_stats(out: &mut [Option<f64>], mut values: Vec<f64>) {
    if let Some(s) = five_stats(&mut values) {
        for (o, v) in out.iter_mut().zip(s) {
            *o = Some(v);
        }
    }
}

/// The 50 ACC base values of one slot, in catalog order.
///
/// Per sample, with slot means `x̄, ȳ, z̄`:
/// `m = |a - ā|`, `mNew = |a|`, `mSMA = Σ|a_i - ā_i|`, `dm = |a_t - a_{t-1}|`,
/// and `angle_i = acos(a_i / mNew)` in degrees when `mNew > 0`.
pub fn accel_slot_features(samples: &[[f64; 3]]) -> [Option<f64>; 50] {
    let mut out = [None; 50];
    if samples.is_empty() {
        return out;
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 3];
    for s in samples {
        for i in 0..3 {
            mean[i] += s[i];
        }
    }
    for m in &mut mean {
        *m /= n;
    }

    for axis in 0..3 {
        let values = samples.iter().map(|s| s[axis]).collect();
        put_stats(&mut out[axis * 5..axis * 5 + 5], values);
    }

    let norms: Vec<f64> = samples
        .iter()
        .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt())
        .collect();
    for axis in 0..3 {
        let angles = samples
            .iter()
            .zip(&norms)
            .filter(|(_, &norm)| norm > 0.0)
            .map(|(s, &norm)| (s[axis] / norm).clamp(-1.0, 1.0).acos().to_degrees())
            .collect();
        put_stats(&mut out[15 + axis * 5..20 + axis * 5], angles);
    }

    let msma = samples
        .iter()
        .map(|s| (s[0] - mean[0]).abs() + (s[1] - mean[1]).abs() + (s[2] - mean[2]).abs())
        .collect();
    let dm = samples
        .windows(2)
        .map(|w| {
            ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2))
                .sqrt()
        })
        .collect();
    let m = samples
        .iter()
        .map(|s| {
            ((s[0] - mean[0]).powi(2) + (s[1] - mean[1]).powi(2) + (s[2] - mean[2]).powi(2)).sqrt()
        })
        .collect();
    put_stats(&mut out[30..35], msma);
    put_stats(&mut out[35..40], dm);
    put_stats(&mut out[40..45], m);
    put_stats(&mut out[45..50], norms);
    out
}

/// Bounds of a slot and the screen state carried into it.
#[derive(Clone, Copy, Debug)]
pub struct SlotContext {
    pub start_ms: i64,
    pub end_ms: i64,
    pub screen_at_start: Option<bool>,
}

/// Percent of the slot with the screen on. Time before the first known
/// state is excluded; `None` when no state is known anywhere in the slot.
pub fn screen_on_percent(ctx: &SlotContext, events: &[(i64, bool)]) -> Option<f64> {
    let mut state = ctx.screen_at_start;
    let mut t = ctx.start_ms;
    let (mut known, mut on) = (0i64, 0i64);
    for &(ts, now_on) in events {
        if let Some(s) = state {
            known += ts - t;
            if s {
                on += ts - t;
            }
        }
        state = Some(now_on);
        t = ts;
    }
    if let Some(s) = state {
        known += ctx.end_ms - t;
        if s {
            on += ctx.end_ms - t;
        }
    }
    (known > 0).then(|| 100.0 * on as f64 / known as f64)
}

/// Base values of one sensor group for the readings of one slot, in
/// catalog order for that group.
pub fn sensor_slot_features(
    modality: Modality,
    readings: &[&Reading],
    ctx: &SlotContext,
) -> Vec<Option<f64>> {
    let width = catalog().range(modality).len();
    let mut out = vec![None; width];
    if modality == Modality::Scr {
        let events: Vec<(i64, bool)> = readings
            .iter()
            .filter_map(|r| match r.payload {
                Payload::Scr { on } => Some((r.timestamp, on)),
                _ => None,
            })
            .collect();
        out[0] = screen_on_percent(ctx, &events);
        return out;
    }
    if readings.is_empty() {
        return out;
    }
    match modality {
        Modality::Acc => {
            let samples: Vec<[f64; 3]> = readings
                .iter()
                .filter_map(|r| match r.payload {
                    Payload::Acc { x, y, z } => Some([x, y, z]),
                    _ => None,
                })
                .collect();
            out.copy_from_slice(&accel_slot_features(&samples));
        }
        Modality::Loc => {
            let fixes: Vec<_> = readings
                .iter()
                .filter_map(|r| match &r.payload {
                    Payload::Loc(l) => Some(l),
                    _ => None,
                })
                .collect();
            put_stats(&mut out[0..5], fixes.iter().map(|l| l.speed).collect());
            put_stats(&mut out[5..10], fixes.iter().map(|l| l.accuracy).collect());
            for (i, src) in [LocSource::Gps, LocSource::Network, LocSource::Unknown]
                .into_iter()
                .enumerate()
            {
                out[10 + i] = Some(fixes.iter().filter(|l| l.source == src).count() as f64);
            }
        }
        Modality::Blu => {
            let mut devices = HashSet::new();
            let (mut records, mut scans, mut empty) = (0usize, 0usize, 0usize);
            let mut strengths = Vec::new();
            for r in readings {
                if let Payload::Blu(sightings) = &r.payload {
                    scans += 1;
                    if sightings.is_empty() {
                        empty += 1;
                    }
                    for s in sightings {
                        records += 1;
                        devices.insert(s.device.as_str());
                        strengths.push(s.strength);
                    }
                }
            }
            out[0] = Some(devices.len() as f64);
            out[1] = Some(records as f64);
            out[2] = Some(scans as f64);
            out[3] = Some(empty as f64);
            put_stats(&mut out[4..9], strengths);
        }
        Modality::Wif => {
            let mut ids = HashSet::new();
            let (mut levels, mut freqs) = (Vec::new(), Vec::new());
            for r in readings {
                if let Payload::Wif(spots) = &r.payload {
                    for s in spots {
                        ids.insert(s.hotspot.as_str());
                        levels.push(s.level);
                        freqs.push(s.frequency);
                    }
                }
            }
            out[0] = Some(levels.len() as f64);
            out[1] = Some(ids.len() as f64);
            put_stats(&mut out[2..7], levels);
            put_stats(&mut out[7..12], freqs);
        }
        Modality::App => {
            let mut packages = HashSet::new();
            let mut bins = [0usize; N_APP_BINS];
            let mut records = 0usize;
            for r in readings {
                if let Payload::App(apps) = &r.payload {
                    records += 1;
                    for a in apps {
                        packages.insert(a.package.as_str());
                        bins[app_bin(a.category)] += 1;
                    }
                }
            }
            out[0] = Some(packages.len() as f64);
            out[1] = Some(records as f64);
            let total: usize = bins.iter().sum();
            if total > 0 {
                for (o, &b) in out[2..].iter_mut().zip(&bins) {
                    *o = Some(b as f64 / total as f64);
                }
            }
        }
        Modality::Pro => {
            let d: Vec<f64> = readings
                .iter()
                .filter_map(|r| match r.payload {
                    Payload::Pro { distance_cm } => Some(distance_cm),
                    _ => None,
                })
                .collect();
            out[0] = Some(d.len() as f64);
            put_stats(&mut out[1..6], d);
        }
        Modality::Bat => {
            let mut status = [0usize; 5];
            let (mut levels, mut plugged) = (Vec::new(), 0usize);
            for r in readings {
                if let Payload::Bat {
                    level,
                    status: s,
                    plugged: p,
                } = r.payload
                {
                    let idx = BatteryStatus::ALL.iter().position(|b| *b == s).unwrap_or(4);
                    status[idx] += 1;
                    levels.push(level);
                    plugged += usize::from(p);
                }
            }
            for (o, c) in out[0..5].iter_mut().zip(status) {
                *o = Some(c as f64);
            }
            let n = levels.len();
            put_stats(&mut out[5..10], levels);
            out[10] = Some(n as f64);
            out[11] = Some(plugged as f64);
        }
        Modality::Scr => unreachable!(),
    }
    out
}

/// Aggregates one night's readings (any order) into 48 slot vectors.
pub fn aggregate_readings(key: &NightKey, readings: &[Reading]) -> Vec<SlotFeatureVector> {
    let cat = catalog();
    let start = key.start_ms();
    let mut buckets: Vec<[Vec<&Reading>; 8]> = (0..SLOTS_PER_NIGHT).map(|_| Default::default()).collect();
    let mut screen: Vec<(i64, bool)> = Vec::new();
    for r in readings {
        let offset = r.timestamp - start;
        if offset < 0 || offset >= SLOT_MS * SLOTS_PER_NIGHT as i64 {
            continue;
        }
        let slot = (offset / SLOT_MS) as usize;
        buckets[slot][r.modality().index()].push(r);
        if let Payload::Scr { on } = r.payload {
            screen.push((r.timestamp, on));
        }
    }
    screen.sort_by_key(|&(t, on)| (t, on));
    for slot in buckets.iter_mut() {
        for group in slot.iter_mut() {
            group.sort_by(|a, b| crate::model::cmp_readings(a, b));
        }
    }

    let mut screen_state = None;
    let mut next_event = 0;
    buckets
        .iter()
        .enumerate()
        .map(|(slot, groups)| {
            let slot_start = key.slot_start_ms(slot);
            while next_event < screen.len() && screen[next_event].0 < slot_start {
                screen_state = Some(screen[next_event].1);
                next_event += 1;
            }
            let ctx = SlotContext {
                start_ms: slot_start,
                end_ms: slot_start + SLOT_MS,
                screen_at_start: screen_state,
            };
            let mut v = SlotFeatureVector::empty(key.clone(), slot);
            for m in Modality::ALL {
                let vals = sensor_slot_features(m, &groups[m.index()], &ctx);
                v.values[cat.range(m)].copy_from_slice(&vals);
            }
            v
        })
        .collect()
}

pub fn aggregate_night(cohort: &Cohort, key: &NightKey) -> Vec<SlotFeatureVector> {
    aggregate_readings(key, cohort.night(key))
}

/// Aggregates every night of the cohort. Nights run in parallel; the
/// result equals sequential processing.
pub fn aggregate_cohort(cohort: &Cohort) -> SlotTable {
    let keys: Vec<&NightKey> = cohort.nights.keys().collect();
    keys.par_iter()
        .map(|k| ((*k).clone(), aggregate_night(cohort, k)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

// ---------------------------------------------------------------------------
// slots.csv
// ---------------------------------------------------------------------------

pub fn slots_header() -> String {
    let mut h = String::from("participant_id,night_date,slot");
    for f in catalog().features() {
        h.push(',');
        h.push_str(&f.name);
    }
    h
}

pub(crate) fn push_cell(line: &mut String, v: Option<f64>) {
    line.push(',');
    if let Some(v) = v {
        write!(line, "{v}").expect("write to String");
    }
}

pub(crate) fn parse_cell(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| format!("bad numeric cell `{s}`"))
    }
}

/// One row per (participant, night, slot); empty cells are absent values.
pub fn write_slots_csv(table: &SlotTable, path: &Path) -> Result<()> {
    let mut out = slots_header();
    out.push('\n');
    for slots in table.values() {
        for v in slots {
            write!(out, "{},{},{}", v.night.participant_id, v.night.date, v.slot)
                .expect("write to String");
            for &x in &v.values {
                push_cell(&mut out, x);
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_slots_csv(path: &Path) -> Result<SlotTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or_default();
    if header != slots_header() {
        return Err(Error::Parse {
            file,
            line: 1,
            msg: "header does not match the feature catalog".into(),
        });
    }
    let width = catalog().len();
    let mut table = SlotTable::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            file: file.clone(),
            line: i + 1,
            msg,
        };
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width + 3 {
            return Err(err(format!("expected {} columns", width + 3)));
        }
        let date = NaiveDate::parse_from_str(cells[1], "%Y-%m-%d").map_err(|e| err(e.to_string()))?;
        let slot: usize = cells[2].parse().map_err(|_| err("bad slot".into()))?;
        if slot >= SLOTS_PER_NIGHT {
            return Err(err(format!("slot {slot} out of range")));
        }
        let values = cells[3..]
            .iter()
            .map(|c| parse_cell(c))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(err)?;
        let key = NightKey::new(cells[0], date);
        table
            .entry(key.clone())
            .or_insert_with(|| (0..SLOTS_PER_NIGHT).map(|s| SlotFeatureVector::empty(key.clone(), s)).collect())
            [slot]
            .values = values;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AppEntry, BluetoothSighting};
    use approx::assert_relative_eq;

    fn key() -> NightKey {
        NightKey::new("p1", NaiveDate::from_ymd_opt(2019, 10, 4).unwrap())
    }

    fn ctx(slot: usize) -> SlotContext {
        let s = key().slot_start_ms(slot);
        SlotContext {
            start_ms: s,
            end_ms: s + SLOT_MS,
            screen_at_start: None,
        }
    }

    #[test]
    fn five_stats_even_median_and_population_std() {
        let s = five_stats(&mut [4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s, [1.0, 4.0, 2.5, 2.5, (1.25f64).sqrt()]);
        assert!(five_stats(&mut []).is_none());
    }

    #[test]
    fn stationary_phone() {
        let f = accel_slot_features(&[[0.0, 0.0, 9.81]; 4]);
        // mNew stats
        for v in &f[45..49] {
            assert_relative_eq!(v.unwrap(), 9.81);
        }
        assert_eq!(f[49], Some(0.0));
        // m stats
        for v in &f[40..45] {
            assert_eq!(v.unwrap(), 0.0);
        }
        // angle-z stats
        for v in &f[25..30] {
            assert_eq!(v.unwrap(), 0.0);
        }
        assert_relative_eq!(f[15].unwrap(), 90.0);
    }

    #[test]
    fn msma_two_sample_oracle() {
        let f = accel_slot_features(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        // mSMA per sample is 1 for both
        assert_eq!(&f[30..35], &[Some(1.0), Some(1.0), Some(1.0), Some(1.0), Some(0.0)]);
        // single dm of 2
        assert_eq!(f[35], Some(2.0));
        assert_eq!(f[39], Some(0.0));
    }

    #[test]
    fn single_sample_has_no_dm() {
        let f = accel_slot_features(&[[0.3, 0.4, 9.0]]);
        assert!(f[35..40].iter().all(Option::is_none));
        assert_eq!(f[4], Some(0.0));
        assert!(f[..35].iter().all(Option::is_some));
        assert!(accel_slot_features(&[]).iter().all(Option::is_none));
    }

    #[test]
    fn zero_vector_has_no_angle() {
        let f = accel_slot_features(&[[0.0, 0.0, 0.0]]);
        assert!(f[15..30].iter().all(Option::is_none));
        assert_eq!(f[45], Some(0.0));
    }

    fn blu(t: i64, devs: &[(&str, f64)]) -> Reading {
        Reading {
            timestamp: t,
            payload: Payload::Blu(
                devs.iter()
                    .map(|(d, s)| BluetoothSighting {
                        device: d.to_string(),
                        strength: *s,
                    })
                    .collect(),
            ),
        }
    }

    #[test]
    fn bluetooth_counts_oracle() {
        let t = key().slot_start_ms(5);
        let rs = [
            blu(t, &[("A", -60.0)]),
            blu(t + 1, &[]),
            blu(t + 2, &[("A", -70.0), ("B", -70.0)]),
        ];
        let refs: Vec<&Reading> = rs.iter().collect();
        let f = sensor_slot_features(Modality::Blu, &refs, &ctx(5));
        assert_eq!(f[0], Some(2.0)); // distinct ids
        assert_eq!(f[1], Some(3.0)); // sightings
        assert_eq!(f[2], Some(3.0)); // scans
        assert_eq!(f[3], Some(1.0)); // empty scans
        assert_relative_eq!(f[7].unwrap(), -200.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn screen_full_coverage_and_carry_forward() {
        let c = SlotContext {
            screen_at_start: Some(true),
            ..ctx(3)
        };
        assert_eq!(screen_on_percent(&c, &[]), Some(100.0));
        // unknown first half, then on for the second half
        let half = c.start_ms + SLOT_MS / 2;
        assert_eq!(screen_on_percent(&ctx(3), &[(half, true)]), Some(100.0));
        // off at start, on at half
        let c2 = SlotContext {
            screen_at_start: Some(false),
            ..ctx(3)
        };
        assert_eq!(screen_on_percent(&c2, &[(half, true)]), Some(50.0));
        assert_eq!(screen_on_percent(&ctx(3), &[]), None);
    }

    #[test]
    fn single_category_histogram() {
        let r = Reading {
            timestamp: key().slot_start_ms(0),
            payload: Payload::App(vec![
                AppEntry { package: "a".into(), category: 26 },
                AppEntry { package: "b".into(), category: 26 },
            ]),
        };
        let f = sensor_slot_features(Modality::App, &[&r], &ctx(0));
        assert_eq!(f[0], Some(2.0));
        assert_eq!(f[1], Some(1.0));
        for (bin, v) in f[2..].iter().enumerate() {
            assert_eq!(*v, Some(if bin == 26 { 1.0 } else { 0.0 }));
        }
    }

    #[test]
    fn empty_night_and_single_slot() {
        let k = key();
        let slots = aggregate_readings(&k, &[]);
        assert_eq!(slots.len(), 48);
        assert!(slots.iter().all(|s| s.values.iter().all(Option::is_none)));

        let t = k.slot_start_ms(5) + 1000;
        let rs = vec![Reading {
            timestamp: t,
            payload: Payload::Pro { distance_cm: 5.0 },
        }];
        let slots = aggregate_readings(&k, &rs);
        for s in &slots {
            assert_eq!(s.values.iter().any(Option::is_some), s.slot == 5);
        }
    }

    #[test]
    fn screen_state_carries_across_slots() {
        let k = key();
        let rs = vec![Reading {
            timestamp: k.slot_start_ms(2) + SLOT_MS / 2,
            payload: Payload::Scr { on: true },
        }];
        let slots = aggregate_readings(&k, &rs);
        let scr = catalog().range(Modality::Scr).start;
        assert_eq!(slots[1].values[scr], None);
        assert_eq!(slots[2].values[scr], Some(100.0));
        assert_eq!(slots[40].values[scr], Some(100.0));
    }

    #[test]
    fn slots_csv_round_trip() {
        let k = key();
        let rs = vec![
            Reading {
                timestamp: k.slot_start_ms(7),
                payload: Payload::Acc { x: 0.1, y: 1.0 / 3.0, z: 9.7 },
            },
            Reading {
                timestamp: k.slot_start_ms(7) + 20,
                payload: Payload::Acc { x: -0.2, y: 0.5, z: 9.9 },
            },
        ];
        let mut table = SlotTable::new();
        table.insert(k.clone(), aggregate_readings(&k, &rs));
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("slots.csv");
        write_slots_csv(&table, &p).unwrap();
        assert_eq!(read_slots_csv(&p).unwrap(), table);
    }
}
