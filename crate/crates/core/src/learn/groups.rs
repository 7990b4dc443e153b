//! Feature-group ablation subsets of the event columns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::catalog;
use crate::matching::WINDOW_STATS;
use crate::model::Modality;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "ACC")]
    Acc,
    #[serde(rename = "APP")]
    App,
    #[serde(rename = "BAT")]
    Bat,
    #[serde(rename = "BLU")]
    Blu,
    #[serde(rename = "PRO")]
    Pro,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "SCR")]
    Scr,
    #[serde(rename = "WIF")]
    Wif,
    /// Continuous sensing: the embedded sensors.
    ConSen,
    /// Interaction sensing: app usage and screen.
    IntSen,
    #[serde(rename = "ALL")]
    All,
}

impl FeatureGroup {
    pub const ALL_GROUPS: [FeatureGroup; 11] = [
        FeatureGroup::Acc,
        FeatureGroup::App,
        FeatureGroup::Bat,
        FeatureGroup::Blu,
        FeatureGroup::Pro,
        FeatureGroup::Loc,
        FeatureGroup::Scr,
        FeatureGroup::Wif,
        FeatureGroup::ConSen,
        FeatureGroup::IntSen,
        FeatureGroup::All,
    ];

    pub fn modalities(self) -> Vec<Modality> {
        use Modality::*;
        match self {
            FeatureGroup::Acc => vec![Acc],
            FeatureGroup::App => vec![App],
            FeatureGroup::Bat => vec![Bat],
            FeatureGroup::Blu => vec![Blu],
            FeatureGroup::Pro => vec![Pro],
            FeatureGroup::Loc => vec![Loc],
            FeatureGroup::Scr => vec![Scr],
            FeatureGroup::Wif => vec![Wif],
            FeatureGroup::ConSen => vec![Acc, Bat, Blu, Pro, Loc, Wif],
            FeatureGroup::IntSen => vec![App, Scr],
            FeatureGroup::All => Modality::ALL.to_vec(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Acc => "ACC",
            FeatureGroup::App => "APP",
            FeatureGroup::Bat => "BAT",
            FeatureGroup::Blu => "BLU",
            FeatureGroup::Pro => "PRO",
            FeatureGroup::Loc => "LOC",
            FeatureGroup::Scr => "SCR",
            FeatureGroup::Wif => "WIF",
            FeatureGroup::ConSen => "ConSen",
            FeatureGroup::IntSen => "IntSen",
            FeatureGroup::All => "ALL",
        }
    }

    /// Indices of `columns` that belong to this group. Event columns are
    /// `{base}_{avg|min|max}`; `ALL` keeps every column, including ones
    /// outside the catalog.
    pub fn select(self, columns: &[String]) -> Vec<usize> {
        if self == FeatureGroup::All {
            return (0..columns.len()).collect();
        }
        let mods = self.modalities();
        columns
            .iter()
            .enumerate()
            .filter(|(_, c)| column_modality(c).is_some_and(|m| mods.contains(&m)))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Sensor group of an event column name.
pub fn column_modality(column: &str) -> Option<Modality> {
    let base = WINDOW_STATS
        .iter()
        .find_map(|s| column.strip_suffix(s).and_then(|b| b.strip_suffix('_')))?;
    catalog().group_of_name(base)
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureGroup::ALL_GROUPS
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature group `{s}`"))
    }
}
