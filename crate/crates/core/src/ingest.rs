//! Line-delimited raw data files and cohort bundles.
//!
//! A data directory holds one comma-separated file per record kind, each
//! starting with an optional header line. Blank lines and lines starting
//! with `#` are ignored. Column orders:
//!
//! | file               | columns |
//! |--------------------|---------|
//! | `participants.csv` | `participant_id,sex,age` |
//! | `reports.csv`      | `participant_id,timestamp_ms,alcoholic,partner,family,male_friends,female_friends,others` |
//! | `acc.csv`          | `participant_id,timestamp_ms,x,y,z` |
//! | `app.csv`          | `participant_id,timestamp_ms,apps` with `apps = package:category;...` |
//! | `loc.csv`          | `participant_id,timestamp_ms,latitude,longitude,accuracy,speed,source,signal` |
//! | `scr.csv`          | `participant_id,timestamp_ms,state` (`on`/`off`) |
//! | `bat.csv`          | `participant_id,timestamp_ms,level,status,plugged` |
//! | `blu.csv`          | `participant_id,timestamp_ms,devices` with `devices = id:dbm;...` |
//! | `wif.csv`          | `participant_id,timestamp_ms,hotspots` with `hotspots = id:dbm:mhz;...` |
//! | `pro.csv`          | `participant_id,timestamp_ms,distance_cm` |
//!
//! `participants.csv` and `reports.csv` are required; a missing modality
//! file means no records of that modality. Scan lists may be empty.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::model::*;
use crate::night::NightKey;

pub const PARTICIPANTS_FILE: &str = "participants.csv";
pub const REPORTS_FILE: &str = "reports.csv";

pub const PARTICIPANTS_HEADER: &str = "participant_id,sex,age";
pub const REPORTS_HEADER: &str =
    "participant_id,timestamp_ms,alcoholic,partner,family,male_friends,female_friends,others";

pub fn modality_header(m: Modality) -> &'static str {
    match m {
        Modality::Acc => "participant_id,timestamp_ms,x,y,z",
        Modality::App => "participant_id,timestamp_ms,apps",
        Modality::Loc => {
            "participant_id,timestamp_ms,latitude,longitude,accuracy,speed,source,signal"
        }
        Modality::Scr => "participant_id,timestamp_ms,state",
        Modality::Bat => "participant_id,timestamp_ms,level,status,plugged",
        Modality::Blu => "participant_id,timestamp_ms,devices",
        Modality::Wif => "participant_id,timestamp_ms,hotspots",
        Modality::Pro => "participant_id,timestamp_ms,distance_cm",
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileTally {
    pub file: String,
    pub lines: usize,
    pub parsed: usize,
    pub malformed: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub participants: usize,
    pub reports: usize,
    pub records: usize,
    pub malformed: usize,
    pub discarded_outside_night: usize,
    pub files: Vec<FileTally>,
}

// ---------------------------------------------------------------------------
// Field parsing
// ---------------------------------------------------------------------------

fn num(field: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("bad {what} `{field}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite {what}"))
    }
}

fn int<T: std::str::FromStr>(field: &str, what: &str) -> std::result::Result<T, String> {
    field
        .trim()
        .parse()
        .map_err(|_| format!("bad {what} `{field}`"))
}

fn flag(field: &str, what: &str) -> std::result::Result<bool, String> {
    match field.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(format!("bad {what} `{other}`")),
    }
}

fn fields(line: &str, expected: usize) -> std::result::Result<Vec<&str>, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != expected {
        return Err(format!("expected {expected} columns, found {}", f.len()));
    }
    if f[0].trim().is_empty() {
        return Err("empty participant id".into());
    }
    Ok(f)
}

fn list(field: &str) -> impl Iterator<Item = &str> {
    field.split(';').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_participant(line: &str) -> std::result::Result<Participant, String> {
    let f = fields(line, 3)?;
    Ok(Participant {
        id: f[0].trim().to_string(),
        sex: f[1].trim().parse()?,
        age: int(f[2], "age")?,
    })
}

pub fn parse_report(line: &str) -> std::result::Result<SelfReport, String> {
    let f = fields(line, 8)?;
    let count = |i: usize, what: &str| -> std::result::Result<u8, String> {
        let v: u8 = int(f[i], what)?;
        if v > MAX_COMPANIONS {
            return Err(format!("{what} count {v} outside 0..=11"));
        }
        Ok(v)
    };
    let partner = count(3, "partner")?;
    if partner > 1 {
        return Err(format!("partner must be 0 or 1, got {partner}"));
    }
    Ok(SelfReport {
        participant_id: f[0].trim().to_string(),
        timestamp: int(f[1], "timestamp")?,
        alcoholic: flag(f[2], "alcoholic flag")?,
        companions: Companions {
            partner,
            family: count(4, "family")?,
            male_friends: count(5, "male_friends")?,
            female_friends: count(6, "female_friends")?,
            others: count(7, "others")?,
        },
    })
}

pub fn parse_record(modality: Modality, line: &str) -> std::result::Result<SensorRecord, String> {
    let n = modality_header(modality).split(',').count();
    let f = fields(line, n)?;
    let payload = match modality {
        Modality::Acc => Payload::Acc {
            x: num(f[2], "x")?,
            y: num(f[3], "y")?,
            z: num(f[4], "z")?,
        },
        Modality::App => Payload::App(
            list(f[2])
                .map(|item| {
                    let (pkg, cat) = item
                        .rsplit_once(':')
                        .ok_or_else(|| format!("bad app entry `{item}`"))?;
                    Ok(AppEntry {
                        package: pkg.to_string(),
                        category: int(cat, "app category")?,
                    })
                })
                .collect::<std::result::Result<_, String>>()?,
        ),
        Modality::Loc => Payload::Loc(LocationFix {
            latitude: num(f[2], "latitude")?,
            longitude: num(f[3], "longitude")?,
            accuracy: num(f[4], "accuracy")?,
            speed: num(f[5], "speed")?,
            source: f[6].trim().parse()?,
            signal: num(f[7], "signal")?,
        }),
        Modality::Scr => Payload::Scr {
            on: match f[2].trim() {
                "on" | "1" => true,
                "off" | "0" => false,
                other => return Err(format!("bad screen state `{other}`")),
            },
        },
        Modality::Bat => {
            let level = num(f[2], "battery level")?;
            if !(0.0..=100.0).contains(&level) {
                return Err(format!("battery level {level} outside 0..=100"));
            }
            Payload::Bat {
                level,
                status: f[3].trim().parse()?,
                plugged: flag(f[4], "plugged flag")?,
            }
        }
        Modality::Blu => Payload::Blu(
            list(f[2])
                .map(|item| {
                    let (id, s) = item
                        .split_once(':')
                        .ok_or_else(|| format!("bad bluetooth entry `{item}`"))?;
                    Ok(BluetoothSighting {
                        device: id.to_string(),
                        strength: num(s, "bluetooth strength")?,
                    })
                })
                .collect::<std::result::Result<_, String>>()?,
        ),
        Modality::Wif => Payload::Wif(
            list(f[2])
                .map(|item| {
                    let parts: Vec<&str> = item.split(':').collect();
                    if parts.len() != 3 {
                        return Err(format!("bad wifi entry `{item}`"));
                    }
                    Ok(WifiSighting {
                        hotspot: parts[0].to_string(),
                        level: num(parts[1], "wifi level")?,
                        frequency: num(parts[2], "wifi frequency")?,
                    })
                })
                .collect::<std::result::Result<_, String>>()?,
        ),
        Modality::Pro => Payload::Pro {
            distance_cm: num(f[2], "distance")?,
        },
    };
    Ok(SensorRecord {
        participant_id: f[0].trim().to_string(),
        timestamp: int(f[1], "timestamp")?,
        payload,
    })
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

pub fn encode_participant(p: &Participant) -> String {
    format!("{},{},{}", p.id, p.sex, p.age)
}

pub fn encode_report(r: &SelfReport) -> String {
    let c = &r.companions;
    format!(
        "{},{},{},{},{},{},{},{}",
        r.participant_id,
        r.timestamp,
        u8::from(r.alcoholic),
        c.partner,
        c.family,
        c.male_friends,
        c.female_friends,
        c.others
    )
}

pub fn encode_record(participant_id: &str, timestamp: i64, payload: &Payload) -> String {
    let mut s = format!("{participant_id},{timestamp},");
    match payload {
        Payload::Acc { x, y, z } => write!(s, "{x},{y},{z}"),
        Payload::App(apps) => {
            let items: Vec<String> = apps
                .iter()
                .map(|a| format!("{}:{}", a.package, a.category))
                .collect();
            write!(s, "{}", items.join(";"))
        }
        Payload::Loc(l) => write!(
            s,
            "{},{},{},{},{},{}",
            l.latitude,
            l.longitude,
            l.accuracy,
            l.speed,
            l.source.as_str(),
            l.signal
        ),
        Payload::Scr { on } => write!(s, "{}", if *on { "on" } else { "off" }),
        Payload::Bat {
            level,
            status,
            plugged,
        } => write!(s, "{level},{},{}", status.as_str(), u8::from(*plugged)),
        Payload::Blu(devs) => {
            let items: Vec<String> = devs
                .iter()
                .map(|d| format!("{}:{}", d.device, d.strength))
                .collect();
            write!(s, "{}", items.join(";"))
        }
        Payload::Wif(spots) => {
            let items: Vec<String> = spots
                .iter()
                .map(|w| format!("{}:{}:{}", w.hotspot, w.level, w.frequency))
                .collect();
            write!(s, "{}", items.join(";"))
        }
        Payload::Pro { distance_cm } => write!(s, "{distance_cm}"),
    }
    .expect("writing to a String cannot fail");
    s
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

fn parse_file<T>(
    path: &Path,
    header: &str,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<(Vec<T>, FileTally)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut tally = FileTally {
        file: name.clone(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line == header) {
            continue;
        }
        tally.lines += 1;
        match parse(line) {
            Ok(v) => {
                tally.parsed += 1;
                out.push(v);
            }
            Err(msg) => {
                tally.malformed += 1;
                log::debug!("{name}:{}: skipped: {msg}", i + 1);
            }
        }
    }
    Ok((out, tally))
}

/// Reads a data directory (or a cohort bundle) into a cohort.
///
/// Unparseable lines are counted and skipped. A missing participant or
/// report file, or a duplicated participant id, is fatal.
pub fn ingest_dir(dir: &Path) -> Result<(Cohort, IngestReport)> {
    let participants_path = dir.join(PARTICIPANTS_FILE);
    let reports_path = dir.join(REPORTS_FILE);
    for p in [&participants_path, &reports_path] {
        if !p.is_file() {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    let (participants, p_tally) =
        parse_file(&participants_path, PARTICIPANTS_HEADER, parse_participant)?;
    let mut seen = BTreeSet::new();
    for p in &participants {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Input(format!("duplicate participant id `{}`", p.id)));
        }
    }
    let (reports, r_tally) = parse_file(&reports_path, REPORTS_HEADER, parse_report)?;

    let per_modality: Vec<(Vec<SensorRecord>, FileTally)> = Modality::ALL
        .par_iter()
        .filter_map(|&m| {
            let path = dir.join(m.file_name());
            path.is_file().then(|| {
                parse_file(&path, modality_header(m), |line| parse_record(m, line))
            })
        })
        .collect::<Result<_>>()?;

    let mut files = vec![p_tally, r_tally];
    let mut records = Vec::new();
    for (recs, tally) in per_modality {
        records.extend(recs);
        files.push(tally);
    }
    let (cohort, discarded) = Cohort::from_parts(participants, records, reports);
    let report = IngestReport {
        participants: cohort.participants.len(),
        reports: cohort.reports.len(),
        records: cohort.record_count(),
        malformed: files.iter().map(|f| f.malformed).sum(),
        discarded_outside_night: discarded,
        files,
    };
    Ok((cohort, report))
}

/// Writes a cohort in the raw line schema. Output is canonical: the same
/// cohort always produces the same bytes.
pub fn write_cohort_files(cohort: &Cohort, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, header: &str, lines: Vec<String>| -> Result<()> {
        let mut body = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum::<usize>() + 64);
        body.push_str(header);
        body.push('\n');
        for l in lines {
            body.push_str(&l);
            body.push('\n');
        }
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    };
    write(
        PARTICIPANTS_FILE,
        PARTICIPANTS_HEADER,
        cohort.participants.values().map(encode_participant).collect(),
    )?;
    write(
        REPORTS_FILE,
        REPORTS_HEADER,
        cohort.reports.iter().map(encode_report).collect(),
    )?;
    for m in Modality::ALL {
        let lines = cohort
            .nights
            .iter()
            .flat_map(|(key, readings): (&NightKey, &Vec<Reading>)| {
                readings
                    .iter()
                    .filter(move |r| r.modality() == m)
                    .map(move |r| encode_record(&key.participant_id, r.timestamp, &r.payload))
            })
            .collect();
        write(m.file_name(), modality_header(m), lines)?;
    }
    Ok(())
}

/// Writes a normalized cohort bundle: record files plus a checksummed manifest.
pub fn write_bundle(cohort: &Cohort, report: &IngestReport, dir: &Path) -> Result<Manifest> {
    write_cohort_files(cohort, dir)?;
    let meta = serde_json::json!({
        "participants": report.participants,
        "reports": report.reports,
        "records": report.records,
        "malformed": report.malformed,
        "discarded_outside_night": report.discarded_outside_night,
    });
    let manifest = Manifest::scan("cohort-bundle", dir, meta)?;
    manifest.write(dir)?;
    Ok(manifest)
}
