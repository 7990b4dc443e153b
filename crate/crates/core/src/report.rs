//! Count tables and CSV/Markdown rendering of experiment results.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabeledDataset, Target};
use crate::learn::{EvaluationResult, ImportanceReport, SweepResult};
use crate::matching::ExclusionTally;
use crate::model::Sex;
use crate::stats::RankTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Sex,
    Age,
    /// No demographic split: one group holding every event.
    Task,
}

impl GroupBy {
    pub const ALL: [GroupBy; 3] = [GroupBy::Sex, GroupBy::Age, GroupBy::Task];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Sex => "sex",
            GroupBy::Age => "age",
            GroupBy::Task => "task",
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sex" => Ok(GroupBy::Sex),
            "age" => Ok(GroupBy::Age),
            "task" | "all" => Ok(GroupBy::Task),
            _ => Err(format!("unknown grouping `{s}` (sex, age, task)")),
        }
    }
}

/// Human names of a target's classes, indexed by label.
pub fn class_names(target: &Target) -> Vec<String> {
    match *target {
        Target::SexComposition => vec!["same_sex".into(), "opposite_sex".into(), "mixed_sex".into()],
        Target::Task { task, threshold } => {
            let mut names = vec!["without".to_string()];
            if !task.is_three_class() {
                names.push("with".into());
            } else if threshold == 1 {
                names.push("one".into());
                names.push("two_or_more".into());
            } else {
                names.push(format!("1_to_{threshold}"));
                names.push(format!("more_than_{threshold}"));
            }
            names
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub group: String,
    pub class: u8,
    pub class_name: String,
    pub count: usize,
    /// Share of the group's events, in percent.
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub target: Target,
    pub group_by: GroupBy,
    pub rows: Vec<CountRow>,
}

impl CountTable {
    /// Percent of `class` within `group`, if the group exists.
    pub fn percent(&self, group: &str, class: u8) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.class == class)
            .map(|r| r.percent)
    }
}

/// Class counts per demographic group. Every class gets a row in every
/// group that has events, zero counts included.
pub fn describe(ds: &LabeledDataset, group_by: GroupBy) -> CountTable {
    let n_classes = ds.n_classes();
    let mut groups: BTreeMap<(u64, String), Vec<usize>> = BTreeMap::new();
    for (row, &label) in ds.events.rows.iter().zip(&ds.labels) {
        let key = match group_by {
            GroupBy::Task => (0, "all".to_string()),
            GroupBy::Sex => match row.sex {
                Some(Sex::Woman) => (0, "woman".into()),
                Some(Sex::Man) => (1, "man".into()),
                None => (2, "unknown".into()),
            },
            GroupBy::Age => match row.age {
                Some(a) => (u64::from(a), a.to_string()),
                None => (u64::MAX, "unknown".into()),
            },
        };
        groups.entry(key).or_insert_with(|| vec![0; n_classes])[usize::from(label)] += 1;
    }
    let names = class_names(&ds.target);
    let mut rows = Vec::new();
    for ((_, group), counts) in groups {
        let total: usize = counts.iter().sum();
        for (class, &count) in counts.iter().enumerate() {
            rows.push(CountRow {
                group: group.clone(),
                class: class as u8,
                class_name: names[class].clone(),
                count,
                percent: 100.0 * count as f64 / total as f64,
            });
        }
    }
    CountTable {
        target: ds.target,
        group_by,
        rows,
    }
}

// ---------------------------------------------------------------------------
// Generic tables
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn md_field(s: &str) -> String {
    s.replace('|', "\\|")
}

impl Table {
    pub fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = line.iter().map(|c| csv_field(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&format!("### {}\n\n", self.title));
        }
        let row = |cells: &[String]| {
            let cells: Vec<String> = cells.iter().map(|c| md_field(c)).collect();
            format!("| {} |\n", cells.join(" | "))
        };
        out.push_str(&row(&self.header));
        out.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
        for r in &self.rows {
            out.push_str(&row(r));
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.md` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (ext, body) in [("csv", self.to_csv()), ("md", self.to_markdown())] {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn count_table(t: &CountTable) -> Table {
    let mut table = Table::new(
        format!("{} by {}", t.target, t.group_by),
        &[t.group_by.as_str(), "class", "label", "count", "percent"],
    );
    for r in &t.rows {
        table.rows.push(vec![
            r.group.clone(),
            r.class.to_string(),
            r.class_name.clone(),
            r.count.to_string(),
            format!("{:.1}", r.percent),
        ]);
    }
    table
}

pub fn tally_table(t: &ExclusionTally) -> Table {
    let mut table = Table::new("Event matching", &["outcome", "reports", "percent"]);
    let total = t.total().max(1) as f64;
    for (name, n) in [
        ("unavailable_sensor_data", t.unavailable_sensor_data),
        ("edge_time", t.edge_time),
        ("out_of_region", t.out_of_region),
        ("retained", t.retained),
    ] {
        table.rows.push(vec![name.into(), n.to_string(), format!("{:.1}", 100.0 * n as f64 / total)]);
    }
    table.rows.push(vec!["total".into(), t.total().to_string(), "100.0".into()]);
    table
}

/// Which configuration field spreads across the columns of an evaluation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Columns {
    Model,
    Group,
}

/// One row per target, one column per model (or feature group), cells
/// formatted as `mean (std), AUC`. Missing combinations render as `n/a`.
pub fn evaluation_table(title: &str, results: &[EvaluationResult], columns: Columns) -> Table {
    let key = |r: &EvaluationResult| match columns {
        Columns::Model => r.config.model.name().to_string(),
        Columns::Group => r.config.group.as_str().to_string(),
    };
    let mut targets: Vec<String> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    for r in results {
        let t = r.target.to_string();
        if !targets.contains(&t) {
            targets.push(t);
        }
        let c = key(r);
        if !cols.contains(&c) {
            cols.push(c);
        }
    }
    let mut header = vec!["target".to_string(), "n".to_string()];
    header.extend(cols.iter().cloned());
    let mut table = Table {
        title: title.to_string(),
        header,
        rows: Vec::new(),
    };
    for t in &targets {
        let of_target: Vec<&EvaluationResult> = results.iter().filter(|r| &r.target.to_string() == t).collect();
        let mut row = vec![t.clone(), of_target[0].n_events.to_string()];
        for c in &cols {
            row.push(
                of_target
                    .iter()
                    .find(|r| &key(r) == c)
                    .map_or_else(|| "n/a".to_string(), |r| r.cell()),
            );
        }
        table.rows.push(row);
    }
    table
}

pub fn sweep_table(s: &SweepResult) -> Table {
    let mut table = Table::new(format!("Grouping threshold sweep, {}", s.task), &["g", "classes", "result"]);
    for p in &s.points {
        let hist: Vec<String> = p.histogram.iter().map(usize::to_string).collect();
        let cell = match (&p.result, &p.undefined) {
            (Some(r), _) => r.cell(),
            (None, Some(why)) => format!("undefined: {why}"),
            (None, None) => "undefined".into(),
        };
        table.rows.push(vec![p.threshold.to_string(), hist.join("/"), cell]);
    }
    table
}

pub fn rank_table(t: &RankTable) -> Table {
    let mut table = Table::new(
        format!("{} {} (skipped {})", t.contrast, t.metric, t.skipped),
        &["rank", "feature", "value", "p", "n_first", "n_second"],
    );
    for (i, r) in t.rows.iter().enumerate() {
        table.rows.push(vec![
            (i + 1).to_string(),
            r.feature.clone(),
            r.cell(),
            format!("{:.3e}", r.p),
            r.n_first.to_string(),
            r.n_second.to_string(),
        ]);
    }
    table
}

pub fn importance_table(r: &ImportanceReport) -> Table {
    let mut table = Table::new(format!("Feature importance, {}", r.target), &["rank", "feature", "group", "mean", "std"]);
    for e in &r.features {
        table.rows.push(vec![
            e.rank.to_string(),
            e.feature.clone(),
            e.group.map_or("", |g| g.as_str()).to_string(),
            format!("{:.5}", e.mean),
            format!("{:.5}", e.std),
        ]);
    }
    table
}

pub fn group_importance_table(r: &ImportanceReport) -> Table {
    let mut table = Table::new(
        format!("Importance per sensor, {}", r.target),
        &["group", "features", "total", "mean_per_feature", "max", "best_rank"],
    );
    for g in &r.groups {
        table.rows.push(vec![
            g.group.as_str().to_string(),
            g.n_features.to_string(),
            format!("{:.4}", g.total),
            format!("{:.5}", g.mean_per_feature),
            format!("{:.5}", g.max),
            g.best_rank.to_string(),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Task;

    #[test]
    fn csv_quotes_cells_with_commas() {
        let mut t = Table::new("x", &["a", "b"]);
        t.rows.push(vec!["50.0 (0.0), 50.0".into(), "say \"hi\"".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"50.0 (0.0), 50.0\",\"say \"\"hi\"\"\"\n");
        let md = t.to_markdown();
        assert!(md.contains("| a | b |\n|---|---|\n"));
    }

    #[test]
    fn class_names_follow_threshold() {
        assert_eq!(class_names(&Target::task(Task::PartnerTwo)), ["without", "with"]);
        assert_eq!(class_names(&Target::task(Task::FriendsThree))[2], "two_or_more");
        let g3 = Target::Task {
            task: Task::PeopleThree,
            threshold: 3,
        };
        assert_eq!(class_names(&g3), ["without", "1_to_3", "more_than_3"]);
    }

    #[test]
    fn tally_rows_sum() {
        let t = ExclusionTally {
            unavailable_sensor_data: 152,
            edge_time: 102,
            out_of_region: 59,
            retained: 941,
        };
        let table = tally_table(&t);
        assert_eq!(table.rows.last().unwrap()[1], "1254");
        assert_eq!(table.rows[3][2], "75.0");
    }
}
