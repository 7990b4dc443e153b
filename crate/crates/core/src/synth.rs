//! Seeded synthetic cohorts with known ground truth.
//!
//! Every alcoholic report gets a six-slot window of sensor data around it.
//! Each slot draws one latent per sensor group, `z = shift + N(0, 1)`, where
//! `shift` is the sum of the configured effects for that report; sensor
//! readings are simple monotone functions of `z`. An effect of size `d`
//! therefore moves the slot latent by `d` standard deviations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::write_cohort_files;
use crate::labels::{
    category_count, derive_sex_composition, derive_three_class, derive_two_class, Category, LabelConfig, Task,
};
use crate::learn::derive_seed;
use crate::matching::{ExclusionReason, GeoFence};
use crate::model::*;
use crate::night::{NightKey, SLOTS_PER_NIGHT, SLOT_MS};

/// Report slots are drawn from this range so that a six-slot window fits.
const FIRST_REPORT_SLOT: usize = 3;
const LAST_REPORT_SLOT: usize = 44;
/// Slots whose six-slot window leaves the night.
pub const EDGE_SLOTS: [usize; 5] = [0, 1, 45, 46, 47];
pub const MAX_REPORTS_PER_NIGHT: usize = 7;
const WINDOW_BEFORE: usize = 2;
const WINDOW_AFTER: usize = 3;
const ACC_M_MEAN: f64 = 1.0;
const ACC_M_SD: f64 = 0.3;
const ACC_M_FLOOR: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportsPerNight {
    pub min: usize,
    pub max: usize,
}

/// How companion counts are drawn. Friend-count classes are allocated by
/// exact quota over all alcoholic reports, then shuffled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompanionModel {
    /// Share of reports with two or more friends.
    pub friends_many_share: f64,
    /// Per-sex override of `friends_many_share`; quotas are then exact
    /// within each sex.
    pub friends_many_by_sex: Option<SexShares>,
    /// Share of reports with exactly one friend.
    pub friends_one_share: f64,
    /// Upper bound of the friend count when two or more are present.
    pub max_friends: u8,
    pub partner_rate: f64,
    pub family_rate: f64,
    pub others_rate: f64,
    /// Among reports with friends: probability all friends share the
    /// participant's sex.
    pub same_sex_share: f64,
    /// Among reports with two or more friends: probability all are of the
    /// other sex. The remainder is mixed.
    pub opposite_sex_share: f64,
}

impl Default for CompanionModel {
    fn default() -> Self {
        Self {
            friends_many_share: 0.35,
            friends_many_by_sex: None,
            friends_one_share: 0.15,
            max_friends: 8,
            partner_rate: 0.2,
            family_rate: 0.15,
            others_rate: 0.2,
            same_sex_share: 0.45,
            opposite_sex_share: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SexShares {
    pub woman: f64,
    pub man: f64,
}

/// What an effect is driven by.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectDriver {
    /// The task label (0, 1 or 2 at threshold 1).
    Task { task: Task },
    /// Sex-composition class index; 0 when no friends are present.
    SexComposition,
    /// Number of companions of a category, capped at 10.
    Count { category: Category },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub driver: EffectDriver,
    pub modality: Modality,
    /// Latent shift, in slot-level standard deviations, per driver unit.
    pub d: f64,
}

/// Exact numbers of alcoholic reports to corrupt, one reason each.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExclusionInjection {
    pub unavailable_sensor_data: usize,
    pub edge_time: usize,
    pub out_of_region: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub seed: u64,
    pub n_participants: usize,
    pub nights_per_participant: usize,
    pub reports_per_night: ReportsPerNight,
    /// Probability that a report is non-alcoholic (and so never matched).
    pub non_alcoholic_rate: f64,
    pub woman_share: f64,
    pub min_age: u32,
    pub max_age: u32,
    pub companions: CompanionModel,
    pub effects: Vec<Effect>,
    /// Probability that a sensor group is silent for a whole slot.
    pub missingness: BTreeMap<Modality, f64>,
    pub exclusions: ExclusionInjection,
    pub acc_samples_per_slot: usize,
    pub home_region: GeoFence,
    pub first_night: NaiveDate,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_participants: 50,
            nights_per_participant: 11,
            reports_per_night: ReportsPerNight { min: 2, max: 2 },
            non_alcoholic_rate: 0.0,
            woman_share: 0.5,
            min_age: 16,
            max_age: 25,
            companions: CompanionModel::default(),
            effects: Vec::new(),
            missingness: BTreeMap::new(),
            exclusions: ExclusionInjection::default(),
            acc_samples_per_slot: 10,
            home_region: GeoFence {
                min_lat: 46.0,
                max_lat: 46.2,
                min_lon: 11.0,
                max_lon: 11.3,
            },
            first_night: NaiveDate::from_ymd_opt(2019, 10, 4).expect("valid date"),
        }
    }
}

impl CohortSpec {
    /// 57 participants with 11 nights of two alcoholic reports each (1254
    /// reports) and 152/102/59 injected exclusions, leaving 941 events.
    pub fn bookkeeping() -> Self {
        Self {
            n_participants: 57,
            exclusions: ExclusionInjection {
                unavailable_sensor_data: 152,
                edge_time: 102,
                out_of_region: 59,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let rpn = self.reports_per_night;
        if rpn.min > rpn.max || rpn.max > MAX_REPORTS_PER_NIGHT {
            return bad(format!("reports per night must satisfy min <= max <= {MAX_REPORTS_PER_NIGHT}"));
        }
        if rpn.max > 0 && self.nights_per_participant == 0 && self.n_participants > 0 {
            return bad("reports requested but there are zero nights".into());
        }
        if self.first_night.weekday() != chrono::Weekday::Fri {
            return bad("first_night must be a Friday".into());
        }
        let c = &self.companions;
        let rates = [
            self.non_alcoholic_rate,
            self.woman_share,
            c.friends_many_share,
            c.friends_one_share,
            c.partner_rate,
            c.family_rate,
            c.others_rate,
            c.same_sex_share,
            c.opposite_sex_share,
        ];
        if rates.iter().chain(self.missingness.values()).any(|r| !(0.0..=1.0).contains(r)) {
            return bad("rates must lie in [0, 1]".into());
        }
        let many = match c.friends_many_by_sex {
            Some(s) => vec![s.woman, s.man],
            None => vec![c.friends_many_share],
        };
        for m in many {
            if !(0.0..=1.0).contains(&m) || m + c.friends_one_share > 1.0 + 1e-12 {
                return bad("friend shares sum past 1".into());
            }
        }
        if c.same_sex_share + c.opposite_sex_share > 1.0 + 1e-12 {
            return bad("sex-composition shares sum past 1".into());
        }
        if c.max_friends < 2 || c.max_friends > MAX_COMPANIONS {
            return bad("max_friends must lie in 2..=11".into());
        }
        if self.min_age > self.max_age {
            return bad("min_age exceeds max_age".into());
        }
        if self.effects.iter().any(|e| !(e.d >= 0.0 && e.d.is_finite())) {
            return bad("effect sizes must be finite and non-negative".into());
        }
        if self.acc_samples_per_slot == 0 {
            return bad("acc_samples_per_slot must be positive".into());
        }
        Ok(())
    }
}

/// Ground truth of one generated report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub participant_id: String,
    pub timestamp: i64,
    pub alcoholic: bool,
    pub injected: Option<ExclusionReason>,
    /// Latent shift per sensor group, in `Modality::ALL` order.
    pub shifts: [f64; 8],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub cohort: Cohort,
    pub truth: Vec<TruthRow>,
}

#[derive(Clone, Debug)]
struct PlannedReport {
    participant: usize,
    night: usize,
    slot: usize,
    timestamp: i64,
    alcoholic: bool,
    companions: Companions,
    injected: Option<ExclusionReason>,
    /// For unavailable-sensor injections, the silenced group.
    silenced: Option<Modality>,
    shifts: [f64; 8],
}

fn night_date(spec: &CohortSpec, night: usize) -> NaiveDate {
    // alternate Friday and Saturday
    spec.first_night + Duration::days(7 * (night / 2) as i64 + (night % 2) as i64)
}

pub fn participant_id(i: usize) -> String {
    format!("p{:03}", i + 1)
}

/// Sorted report slots, pairwise at least six apart, within the report range.
fn draw_slots(rng: &mut ChaCha8Rng, r: usize) -> Vec<usize> {
    if r == 0 {
        return Vec::new();
    }
    let span = LAST_REPORT_SLOT - FIRST_REPORT_SLOT - 6 * (r - 1);
    let mut y: Vec<usize> = (0..r).map(|_| rng.random_range(0..=span)).collect();
    y.sort_unstable();
    y.iter().enumerate().map(|(i, &y)| FIRST_REPORT_SLOT + 6 * i + y).collect()
}

fn draw_friends(
    rng: &mut ChaCha8Rng,
    n: u8,
    sex: Sex,
    model: &CompanionModel,
) -> (u8, u8) {
    if n == 0 {
        return (0, 0);
    }
    let u: f64 = rng.random();
    let (same, other) = if n == 1 {
        let p_same = if model.same_sex_share + model.opposite_sex_share > 0.0 {
            model.same_sex_share / (model.same_sex_share + model.opposite_sex_share)
        } else {
            0.5
        };
        if u < p_same { (1, 0) } else { (0, 1) }
    } else if u < model.same_sex_share {
        (n, 0)
    } else if u < model.same_sex_share + model.opposite_sex_share {
        (0, n)
    } else {
        let s = rng.random_range(1..n);
        (s, n - s)
    };
    match sex {
        Sex::Man => (same, other),
        Sex::Woman => (other, same),
    }
}

fn driver_value(driver: &EffectDriver, c: &Companions, sex: Sex) -> f64 {
    let labels = LabelConfig::default();
    match *driver {
        EffectDriver::Task { task } if task.is_three_class() => {
            f64::from(derive_three_class(c, task.category(), 1, &labels).expect("threshold 1 is valid"))
        }
        EffectDriver::Task { task } => f64::from(derive_two_class(c, task.category(), &labels)),
        EffectDriver::SexComposition => {
            derive_sex_composition(c, sex).map_or(0.0, |s| f64::from(s.class()))
        }
        EffectDriver::Count { category } => f64::from(category_count(c, category, &labels).min(10)),
    }
}

fn plan(spec: &CohortSpec) -> (Vec<Participant>, Vec<PlannedReport>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX));
    let n_women = (spec.woman_share * spec.n_participants as f64).round() as usize;
    let mut sexes: Vec<Sex> = (0..spec.n_participants)
        .map(|i| if i < n_women { Sex::Woman } else { Sex::Man })
        .collect();
    sexes.shuffle(&mut rng);
    let participants: Vec<Participant> = sexes
        .iter()
        .enumerate()
        .map(|(i, &sex)| Participant {
            id: participant_id(i),
            sex,
            age: rng.random_range(spec.min_age..=spec.max_age),
        })
        .collect();

    let mut reports = Vec::new();
    for p in 0..spec.n_participants {
        for night in 0..spec.nights_per_participant {
            let r = rng.random_range(spec.reports_per_night.min..=spec.reports_per_night.max);
            let key = NightKey::new("", night_date(spec, night));
            for slot in draw_slots(&mut rng, r) {
                let offset = rng.random_range(0..SLOT_MS);
                reports.push(PlannedReport {
                    participant: p,
                    night,
                    slot,
                    timestamp: key.slot_start_ms(slot) + offset,
                    alcoholic: rng.random::<f64>() >= spec.non_alcoholic_rate,
                    companions: Companions::default(),
                    injected: None,
                    silenced: None,
                    shifts: [0.0; 8],
                });
            }
        }
    }

    // friend-count classes by exact quota over alcoholic reports, pooled or
    // per sex
    let model = &spec.companions;
    let alcoholic: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].alcoholic).collect();
    let n = alcoholic.len();
    let pools: Vec<(Vec<usize>, f64)> = match model.friends_many_by_sex {
        None => vec![(alcoholic.clone(), model.friends_many_share)],
        Some(shares) => [(Sex::Woman, shares.woman), (Sex::Man, shares.man)]
            .into_iter()
            .map(|(sex, share)| {
                let members = alcoholic
                    .iter()
                    .copied()
                    .filter(|&i| participants[reports[i].participant].sex == sex)
                    .collect();
                (members, share)
            })
            .collect(),
    };
    let mut class_of = vec![None; reports.len()];
    for (members, many_share) in pools {
        let m = members.len();
        let n_many = (many_share * m as f64).round() as usize;
        let n_one = ((model.friends_one_share * m as f64).round() as usize).min(m - n_many.min(m));
        let mut classes: Vec<u8> = (0..m)
            .map(|i| if i < n_many { 2 } else if i < n_many + n_one { 1 } else { 0 })
            .collect();
        classes.shuffle(&mut rng);
        for (&i, &c) in members.iter().zip(&classes) {
            class_of[i] = Some(c);
        }
    }
    for (i, rep) in reports.iter_mut().enumerate() {
        let sex = participants[rep.participant].sex;
        let n_friends = match class_of[i] {
            Some(2) => rng.random_range(2..=model.max_friends),
            Some(1) => 1,
            Some(_) => 0,
            None => rng.random_range(0..=2),
        };
        let (male, female) = draw_friends(&mut rng, n_friends, sex, model);
        let mut count = |rate: f64, max: u8| -> u8 {
            if rng.random::<f64>() < rate {
                rng.random_range(1..=max)
            } else {
                0
            }
        };
        rep.companions = Companions {
            partner: count(model.partner_rate, 1),
            family: count(model.family_rate, 4),
            male_friends: male,
            female_friends: female,
            others: count(model.others_rate, 6),
        };
        for e in &spec.effects {
            rep.shifts[e.modality.index()] += e.d * driver_value(&e.driver, &rep.companions, sex);
        }
    }

    // exclusion injections on disjoint random alcoholic reports
    let ex = spec.exclusions;
    let total = (ex.edge_time + ex.unavailable_sensor_data + ex.out_of_region).min(n);
    let chosen = sample(&mut rng, n, total).into_vec();
    for (j, &a) in chosen.iter().enumerate() {
        let rep = &mut reports[alcoholic[a]];
        if j < ex.edge_time {
            rep.injected = Some(ExclusionReason::EdgeTime);
            rep.slot = EDGE_SLOTS[rng.random_range(0..EDGE_SLOTS.len())];
            let key = NightKey::new("", night_date(spec, rep.night));
            rep.timestamp = key.slot_start_ms(rep.slot) + rng.random_range(0..SLOT_MS);
        } else if j < ex.edge_time + ex.unavailable_sensor_data {
            rep.injected = Some(ExclusionReason::UnavailableSensorData);
            rep.silenced = Some([Modality::Blu, Modality::Loc, Modality::Wif][rng.random_range(0..3)]);
        } else {
            rep.injected = Some(ExclusionReason::OutOfRegion);
        }
    }
    (participants, reports)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct SlotWriter<'a> {
    spec: &'a CohortSpec,
    pid: &'a str,
    out: Vec<SensorRecord>,
}

impl SlotWriter<'_> {
    fn push(&mut self, timestamp: i64, payload: Payload) {
        self.out.push(SensorRecord {
            participant_id: self.pid.to_string(),
            timestamp,
            payload,
        });
    }

    fn slot(&mut self, rng: &mut ChaCha8Rng, start: i64, report: &PlannedReport) {
        let spec = self.spec;
        let noise = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
        for m in Modality::ALL {
            let z = report.shifts[m.index()] + noise(rng);
            let silent = report.silenced == Some(m)
                || spec.missingness.get(&m).is_some_and(|&p| rng.random::<f64>() < p);
            if silent {
                continue;
            }
            match m {
                Modality::Acc => {
                    // The slot's mean dynamic magnitude (mean of |a - mean(a)|)
                    // is exactly `ACC_M_MEAN + ACC_M_SD * z`; the burst's shape
                    // around it is random.
                    let target = (ACC_M_MEAN + ACC_M_SD * z).max(ACC_M_FLOOR);
                    let tilt = Normal::new(0.3, 0.1).expect("valid normal").sample(rng);
                    let n = spec.acc_samples_per_slot;
                    let raw: Vec<[f64; 3]> = (0..n).map(|_| [noise(rng), noise(rng), noise(rng)]).collect();
                    let mut mean = [0.0; 3];
                    for r in &raw {
                        (0..3).for_each(|i| mean[i] += r[i] / n as f64);
                    }
                    let spread = raw
                        .iter()
                        .map(|r| ((r[0] - mean[0]).powi(2) + (r[1] - mean[1]).powi(2) + (r[2] - mean[2]).powi(2)).sqrt())
                        .sum::<f64>()
                        / n as f64;
                    let scale = if spread > 0.0 { target / spread } else { 0.0 };
                    let step = (SLOT_MS / 2) / n as i64;
                    for (j, r) in raw.iter().enumerate() {
                        self.push(
                            start + 60_000 + j as i64 * step,
                            Payload::Acc {
                                x: 9.81 * f64::sin(tilt) + scale * (r[0] - mean[0]),
                                y: scale * (r[1] - mean[1]),
                                z: 9.81 * f64::cos(tilt) + scale * (r[2] - mean[2]),
                            },
                        );
                    }
                }
                Modality::Blu => {
                    let devices = (3.0 + 1.5 * z).round().max(0.0) as usize;
                    for scan in 0..2 {
                        let sightings = (0..devices)
                            .map(|d| BluetoothSighting {
                                device: format!("bt{d:02}"),
                                strength: (-70.0 + 4.0 * z + 5.0 * noise(rng)).round(),
                            })
                            .collect();
                        self.push(start + 120_000 + scan * 240_000, Payload::Blu(sightings));
                    }
                }
                Modality::Wif => {
                    let spots = (6.0 + 2.0 * z).round().max(1.0) as usize;
                    let list = (0..spots)
                        .map(|h| WifiSighting {
                            hotspot: format!("ap{h:02}"),
                            level: (-75.0 + 3.0 * z + 4.0 * noise(rng)).round(),
                            frequency: if rng.random::<bool>() { 2412.0 } else { 5180.0 },
                        })
                        .collect();
                    self.push(start + 180_000, Payload::Wif(list));
                }
                Modality::Loc => {
                    let fence = spec.home_region;
                    let away = if report.injected == Some(ExclusionReason::OutOfRegion) { 2.0 } else { 0.0 };
                    for k in 0..2 {
                        let lat = fence.min_lat + (fence.max_lat - fence.min_lat) * rng.random_range(0.1..0.9);
                        let lon = fence.min_lon + (fence.max_lon - fence.min_lon) * rng.random_range(0.1..0.9);
                        let source = if rng.random::<f64>() < 0.6 { LocSource::Gps } else { LocSource::Network };
                        let fix = LocationFix {
                            latitude: lat + away,
                            longitude: lon,
                            accuracy: (20.0 * (0.3 * noise(rng)).exp()).round(),
                            speed: (0.6 + 0.5 * z + 0.2 * noise(rng)).max(0.0),
                            source,
                            signal: (-85.0 + 5.0 * noise(rng)).round(),
                        };
                        self.push(start + 90_000 + k * 300_000, Payload::Loc(fix));
                    }
                }
                Modality::App => {
                    let p_social = sigmoid(z - 0.5);
                    for k in 0..2 {
                        let n_apps = rng.random_range(1..=3);
                        let apps = (0..n_apps)
                            .map(|_| {
                                let category = if rng.random::<f64>() < p_social {
                                    26
                                } else {
                                    [6u8, 13, 31, 32][rng.random_range(0..4)]
                                };
                                AppEntry {
                                    package: format!("app.c{category}.{}", rng.random_range(0..3)),
                                    category,
                                }
                            })
                            .collect();
                        self.push(start + 150_000 + k * 200_000, Payload::App(apps));
                    }
                }
                Modality::Scr => {
                    let on = rng.random::<f64>() < sigmoid(z);
                    self.push(start + rng.random_range(0..60_000), Payload::Scr { on });
                    if rng.random::<bool>() {
                        self.push(start + 400_000, Payload::Scr { on: !on });
                    }
                }
                Modality::Bat => {
                    let plugged = rng.random::<f64>() < 0.1;
                    let status = if plugged { BatteryStatus::Charging } else { BatteryStatus::Discharging };
                    let level = (70.0 - 1.2 * report.slot as f64 + 3.0 * z).clamp(1.0, 100.0).round();
                    self.push(start + 30_000, Payload::Bat { level, status, plugged });
                }
                Modality::Pro => {
                    for k in 0..2 {
                        let near = rng.random::<f64>() < sigmoid(z - 1.0);
                        let distance_cm = if near { 0.0 } else { 5.0 };
                        self.push(start + 200_000 + k * 200_000, Payload::Pro { distance_cm });
                    }
                }
            }
        }
    }
}

fn generate_participant(spec: &CohortSpec, index: usize, pid: &str, reports: &[&PlannedReport]) -> Vec<SensorRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, index as u64));
    let mut w = SlotWriter {
        spec,
        pid,
        out: Vec::new(),
    };
    for rep in reports {
        if !rep.alcoholic || rep.injected == Some(ExclusionReason::EdgeTime) {
            continue;
        }
        let key = NightKey::new(pid, night_date(spec, rep.night));
        for s in rep.slot - WINDOW_BEFORE..=rep.slot + WINDOW_AFTER {
            debug_assert!(s < SLOTS_PER_NIGHT);
            w.slot(&mut rng, key.slot_start_ms(s), rep);
        }
    }
    w.out
}

/// Generate a cohort. Identical specs give identical cohorts regardless of
/// the thread count.
pub fn generate_cohort(spec: &CohortSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let (participants, planned) = plan(spec);
    let per_participant: Vec<Vec<&PlannedReport>> = {
        let mut v = vec![Vec::new(); participants.len()];
        for r in &planned {
            v[r.participant].push(r);
        }
        v
    };
    let records: Vec<SensorRecord> = per_participant
        .par_iter()
        .enumerate()
        .map(|(i, reps)| generate_participant(spec, i, &participants[i].id, reps))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let reports: Vec<SelfReport> = planned
        .iter()
        .map(|r| SelfReport {
            participant_id: participants[r.participant].id.clone(),
            timestamp: r.timestamp,
            alcoholic: r.alcoholic,
            companions: r.companions,
        })
        .collect();
    let truth = planned
        .iter()
        .map(|r| TruthRow {
            participant_id: participants[r.participant].id.clone(),
            timestamp: r.timestamp,
            alcoholic: r.alcoholic,
            injected: r.injected,
            shifts: r.shifts,
        })
        .collect();
    let (cohort, discarded) = Cohort::from_parts(participants, records, reports);
    if discarded > 0 {
        return Err(Error::Internal(format!("{discarded} generated records fell outside study nights")));
    }
    Ok(SynthOutput { cohort, truth })
}

pub const TRUTH_FILE: &str = "truth.csv";
pub const SPEC_FILE: &str = "spec.json";

pub fn truth_header() -> String {
    let mut h = String::from("participant_id,timestamp_ms,alcoholic,injected");
    for m in Modality::ALL {
        write!(h, ",shift_{}", m.as_str().to_lowercase()).expect("write to String");
    }
    h
}

/// Write the cohort in the ingest schema, plus `truth.csv` and `spec.json`.
pub fn write_synth(out: &SynthOutput, spec: &CohortSpec, dir: &Path) -> Result<()> {
    write_cohort_files(&out.cohort, dir)?;
    let mut t = truth_header();
    t.push('\n');
    for r in &out.truth {
        let injected = r.injected.map_or("", ExclusionReason::as_str);
        write!(t, "{},{},{},{injected}", r.participant_id, r.timestamp, r.alcoholic).expect("write to String");
        for s in r.shifts {
            write!(t, ",{s}").expect("write to String");
        }
        t.push('\n');
    }
    let path = dir.join(TRUTH_FILE);
    fs::write(&path, t).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(SPEC_FILE);
    let mut s = serde_json::to_string_pretty(spec)?;
    s.push('\n');
    fs::write(&path, s).map_err(|e| Error::io(&path, e))
}
