//! Social-context targets derived from companion counts.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::push_cell;
use crate::error::{Error, Result};
use crate::matching::{
    event_meta_cells, events_header, parse_event_row, EventDataset, EventRow, EVENT_META_COLUMNS,
};
use crate::model::{Companions, Sex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Family,
    Partner,
    Friends,
    People,
}

/// The seven social-context inference tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    FamilyTwo,
    PartnerTwo,
    FriendsTwo,
    PeopleTwo,
    FamilyThree,
    FriendsThree,
    PeopleThree,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::FamilyTwo,
        Task::PartnerTwo,
        Task::FriendsTwo,
        Task::PeopleTwo,
        Task::FamilyThree,
        Task::FriendsThree,
        Task::PeopleThree,
    ];

    pub fn category(self) -> Category {
        match self {
            Task::FamilyTwo | Task::FamilyThree => Category::Family,
            Task::PartnerTwo => Category::Partner,
            Task::FriendsTwo | Task::FriendsThree => Category::Friends,
            Task::PeopleTwo | Task::PeopleThree => Category::People,
        }
    }

    pub fn n_classes(self) -> usize {
        if self.is_three_class() {
            3
        } else {
            2
        }
    }

    pub fn is_three_class(self) -> bool {
        matches!(self, Task::FamilyThree | Task::FriendsThree | Task::PeopleThree)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::FamilyTwo => "family_two",
            Task::PartnerTwo => "partner_two",
            Task::FriendsTwo => "friends_two",
            Task::PeopleTwo => "people_two",
            Task::FamilyThree => "family_three",
            Task::FriendsThree => "friends_three",
            Task::PeopleThree => "people_three",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelConfig {
    /// Count the "other people" category towards the people aggregate.
    pub people_includes_others: bool,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            people_includes_others: true,
        }
    }
}

pub fn category_count(c: &Companions, category: Category, cfg: &LabelConfig) -> u32 {
    match category {
        Category::Family => c.family.into(),
        Category::Partner => c.partner.into(),
        Category::Friends => c.friends(),
        Category::People => {
            let base = u32::from(c.family) + c.friends() + u32::from(c.partner);
            if cfg.people_includes_others {
                base + u32::from(c.others)
            } else {
                base
            }
        }
    }
}

/// 0 when nobody of the category was present, 1 otherwise.
pub fn derive_two_class(c: &Companions, category: Category, cfg: &LabelConfig) -> u8 {
    u8::from(category_count(c, category, cfg) >= 1)
}

pub const MAX_THRESHOLD: u8 = 10;

/// 0 for nobody, 1 for `1..=g` companions, 2 for more than `g`.
pub fn derive_three_class(
    c: &Companions,
    category: Category,
    threshold: u8,
    cfg: &LabelConfig,
) -> Result<u8> {
    if !(1..=MAX_THRESHOLD).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "grouping threshold {threshold} outside 1..=10"
        )));
    }
    let n = category_count(c, category, cfg);
    Ok(match n {
        0 => 0,
        n if n <= u32::from(threshold) => 1,
        _ => 2,
    })
}

/// Sex composition of the friends/colleagues present at an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SexComposition {
    SameSex,
    OppositeSex,
    MixedSex,
}

impl SexComposition {
    pub fn class(self) -> u8 {
        self as u8
    }
}

/// Undefined when no friends were present.
pub fn derive_sex_composition(c: &Companions, participant: Sex) -> Option<SexComposition> {
    match (c.male_friends > 0, c.female_friends > 0) {
        (false, false) => None,
        (true, true) => Some(SexComposition::MixedSex),
        (male_only, _) => {
            let friend_sex = if male_only { Sex::Man } else { Sex::Woman };
            Some(if friend_sex == participant {
                SexComposition::SameSex
            } else {
                SexComposition::OppositeSex
            })
        }
    }
}

/// What a labeled dataset is labeled with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Task { task: Task, threshold: u8 },
    SexComposition,
}

impl Target {
    pub fn task(task: Task) -> Self {
        Target::Task { task, threshold: 1 }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Target::Task { task, .. } => task.n_classes(),
            Target::SexComposition => 3,
        }
    }

    pub fn label(&self, row: &EventRow, cfg: &LabelConfig) -> Result<Option<u8>> {
        match *self {
            Target::Task { task, threshold } => {
                let c = &row.companions;
                if task.is_three_class() {
                    derive_three_class(c, task.category(), threshold, cfg).map(Some)
                } else {
                    Ok(Some(derive_two_class(c, task.category(), cfg)))
                }
            }
            Target::SexComposition => {
                Ok(row.sex.and_then(|s| derive_sex_composition(&row.companions, s)).map(SexComposition::class))
            }
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Task { task, threshold: 1 } => write!(f, "{task}"),
            Target::Task { task, threshold } => write!(f, "{task}@g{threshold}"),
            Target::SexComposition => f.write_str("sex_composition"),
        }
    }
}

impl FromStr for Target {
    type Err = String;

    /// `friends_three`, `friends_three@g3`, or `sex_composition`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "sex_composition" {
            return Ok(Target::SexComposition);
        }
        let (task, threshold) = match s.split_once("@g") {
            Some((t, g)) => (t, g.parse::<u8>().map_err(|_| format!("bad threshold in `{s}`"))?),
            None => (s, 1),
        };
        let task: Task = task.parse()?;
        if !(1..=MAX_THRESHOLD).contains(&threshold) {
            return Err(format!("grouping threshold {threshold} outside 1..=10"));
        }
        Ok(Target::Task { task, threshold })
    }
}

/// Events with one label each. Events for which the target is undefined
/// are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub target: Target,
    pub events: EventDataset,
    pub labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn n_classes(&self) -> usize {
        self.target.n_classes()
    }

    pub fn histogram(&self) -> BTreeMap<u8, usize> {
        class_histogram(&self.labels)
    }
}

pub fn class_histogram(labels: &[u8]) -> BTreeMap<u8, usize> {
    let mut h = BTreeMap::new();
    for &l in labels {
        *h.entry(l).or_default() += 1;
    }
    h
}

pub fn label_dataset(ds: &EventDataset, target: Target, cfg: &LabelConfig) -> Result<LabeledDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for row in &ds.rows {
        if let Some(l) = target.label(row, cfg)? {
            rows.push(row.clone());
            labels.push(l);
        }
    }
    Ok(LabeledDataset {
        target,
        events: EventDataset {
            columns: ds.columns.clone(),
            rows,
        },
        labels,
    })
}

// ---------------------------------------------------------------------------
// labeled.csv: events columns preceded by `target,label`
// ---------------------------------------------------------------------------

pub fn write_labeled_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = format!("target,label,{}\n", events_header(&ds.events.columns));
    let target = ds.target.to_string();
    for (row, label) in ds.events.rows.iter().zip(&ds.labels) {
        write!(out, "{target},{label},{}", event_meta_cells(row)).expect("write to String");
        for &v in &row.features {
            push_cell(&mut out, v);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labeled_csv(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let perr = |line: usize, msg: String| Error::Parse {
        file: file.clone(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or_default();
    let cols: Vec<&str> = header.split(',').collect();
    let meta = EVENT_META_COLUMNS.len();
    if cols.len() < 2 + meta || cols[0] != "target" || cols[1] != "label" || cols[2..2 + meta] != EVENT_META_COLUMNS {
        return Err(perr(1, "not a labeled events file".into()));
    }
    let columns: Vec<String> = cols[2 + meta..].iter().map(|s| s.to_string()).collect();
    let mut target = None;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 2 {
            return Err(perr(i + 1, "truncated row".into()));
        }
        let t: Target = cells[0].parse().map_err(|m| perr(i + 1, m))?;
        if *target.get_or_insert(t) != t {
            return Err(perr(i + 1, "mixed targets in one file".into()));
        }
        let label: u8 = cells[1].parse().map_err(|_| perr(i + 1, "bad label".into()))?;
        if usize::from(label) >= t.n_classes() {
            return Err(perr(i + 1, format!("label {label} out of range")));
        }
        labels.push(label);
        rows.push(parse_event_row(&cells[2..], columns.len()).map_err(|m| perr(i + 1, m))?);
    }
    let target = target.ok_or_else(|| Error::Input(format!("{file}: no labeled rows")))?;
    Ok(LabeledDataset {
        target,
        events: EventDataset { columns, rows },
        labels,
    })
}
