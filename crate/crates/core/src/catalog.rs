//! The base-feature catalog: 138 per-slot features across eight sensors.
//!
//! | group | count | contents |
//! |-------|-------|----------|
//! | LOC   | 13    | speed stats, accuracy stats, fix counts per source |
//! | ACC   | 50    | raw-axis stats, angle-to-gravity stats, mSMA/dm/m/mNew stats |
//! | BLU   | 9     | device/record/scan/empty-scan counts, strength stats |
//! | WIF   | 12    | record and hotspot counts, level and frequency stats |
//! | APP   | 35    | app and record counts, 33-bin category histogram |
//! | PRO   | 6     | record count, distance stats |
//! | BAT   | 12    | per-status counts, level stats, record and plugged counts |
//! | SCR   | 1     | percent of the slot with the screen on |
//!
//! Every "stats" family is the five-tuple `min, max, med, avg, std`.

use std::ops::Range;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::model::Modality;

pub const STAT_NAMES: [&str; 5] = ["min", "max", "med", "avg", "std"];

/// Catalog order of sensor groups.
pub const GROUP_ORDER: [Modality; 8] = [
    Modality::Loc,
    Modality::Acc,
    Modality::Blu,
    Modality::Wif,
    Modality::App,
    Modality::Pro,
    Modality::Bat,
    Modality::Scr,
];

pub const N_APP_BINS: usize = 33;

/// Names of the 31 store categories; ids `0..=30` in app records.
pub const STORE_CATEGORIES: [&str; 31] = [
    "art_design",
    "auto_vehicles",
    "beauty",
    "books_reference",
    "business",
    "comics",
    "communication",
    "dating",
    "education",
    "entertainment",
    "events",
    "finance",
    "food_drink",
    "games",
    "health_fitness",
    "house_home",
    "lifestyle",
    "maps_navigation",
    "medical",
    "music_audio",
    "news_magazines",
    "parenting",
    "personalization",
    "photography",
    "productivity",
    "shopping",
    "social",
    "sports",
    "tools",
    "travel_local",
    "video_players",
];

pub const STUDY_APP_CATEGORY: u8 = 31;
pub const SYSTEM_APP_CATEGORY: u8 = 32;
pub const UNKNOWN_APP_CATEGORY: u8 = 33;

/// Histogram bin of an app category id. System apps and unknown or
/// out-of-range ids share the last bin.
pub fn app_bin(category: u8) -> usize {
    match category {
        0..=30 => category as usize,
        STUDY_APP_CATEGORY => 31,
        _ => 32,
    }
}

pub fn app_bin_name(bin: usize) -> &'static str {
    match bin {
        0..=30 => STORE_CATEGORIES[bin],
        31 => "study_app",
        _ => "system_unknown",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseFeature {
    pub id: usize,
    pub group: Modality,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureCatalog {
    features: Vec<BaseFeature>,
    ranges: [Range<usize>; 8],
}

fn stats(prefix: &str) -> Vec<String> {
    STAT_NAMES.iter().map(|s| format!("{prefix}_{s}")).collect()
}

fn group_names(group: Modality) -> Vec<String> {
    let mut n = Vec::new();
    match group {
        Modality::Loc => {
            n.extend(stats("loc_speed"));
            n.extend(stats("loc_accuracy"));
            n.extend(["loc_fixes_gps", "loc_fixes_network", "loc_fixes_unknown"].map(String::from));
        }
        Modality::Acc => {
            for axis in ["x", "y", "z"] {
                n.extend(stats(&format!("acc_{axis}")));
            }
            for axis in ["x", "y", "z"] {
                n.extend(stats(&format!("acc_angle_{axis}")));
            }
            for dynamic in ["msma", "dm", "m", "mnew"] {
                n.extend(stats(&format!("acc_{dynamic}")));
            }
        }
        Modality::Blu => {
            n.extend(
                ["blu_devices", "blu_records", "blu_scans", "blu_empty_scans"].map(String::from),
            );
            n.extend(stats("blu_strength"));
        }
        Modality::Wif => {
            n.extend(["wif_records", "wif_hotspots"].map(String::from));
            n.extend(stats("wif_level"));
            n.extend(stats("wif_freq"));
        }
        Modality::App => {
            n.extend(["app_count", "app_records"].map(String::from));
            n.extend((0..N_APP_BINS).map(|b| format!("app_cat_{}", app_bin_name(b))));
        }
        Modality::Pro => {
            n.push("pro_records".into());
            n.extend(stats("pro_distance"));
        }
        Modality::Bat => {
            n.extend(
                [
                    "bat_charging",
                    "bat_discharging",
                    "bat_full",
                    "bat_not_charging",
                    "bat_unknown",
                ]
                .map(String::from),
            );
            n.extend(stats("bat_level"));
            n.extend(["bat_records", "bat_plugged"].map(String::from));
        }
        Modality::Scr => n.push("scr_on_percent".into()),
    }
    n
}

impl FeatureCatalog {
    fn build() -> Self {
        let mut features = Vec::new();
        let mut ranges: [Range<usize>; 8] = Default::default();
        for group in GROUP_ORDER {
            let start = features.len();
            for name in group_names(group) {
                features.push(BaseFeature {
                    id: features.len(),
                    group,
                    name,
                });
            }
            ranges[group.index()] = start..features.len();
        }
        Self { features, ranges }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[BaseFeature] {
        &self.features
    }

    pub fn get(&self, id: usize) -> &BaseFeature {
        &self.features[id]
    }

    /// Contiguous id range of a sensor group.
    pub fn range(&self, group: Modality) -> Range<usize> {
        self.ranges[group.index()].clone()
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn group_of_name(&self, name: &str) -> Option<Modality> {
        self.id_of(name).map(|id| self.features[id].group)
    }
}

/// The process-wide catalog.
pub fn catalog() -> &'static FeatureCatalog {
    static CATALOG: LazyLock<FeatureCatalog> = LazyLock::new(FeatureCatalog::build);
    &CATALOG
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn group_sizes() {
        let c = catalog();
        let expect = [
            (Modality::Loc, 13),
            (Modality::Acc, 50),
            (Modality::Blu, 9),
            (Modality::Wif, 12),
            (Modality::App, 35),
            (Modality::Pro, 6),
            (Modality::Bat, 12),
            (Modality::Scr, 1),
        ];
        for (g, n) in expect {
            assert_eq!(c.range(g).len(), n, "{g}");
            assert!(c.range(g).all(|id| c.get(id).group == g));
        }
        assert_eq!(c.len(), 138);
    }

    #[test]
    fn ids_and_names_unique_and_stable() {
        let c = catalog();
        let names: HashSet<_> = c.features().iter().map(|f| &f.name).collect();
        assert_eq!(names.len(), c.len());
        for (i, f) in c.features().iter().enumerate() {
            assert_eq!(f.id, i);
        }
        assert_eq!(c.get(0).name, "loc_speed_min");
        assert_eq!(c.get(137).name, "scr_on_percent");
        assert_eq!(*c, FeatureCatalog::build());
    }

    #[test]
    fn app_bins() {
        assert_eq!(app_bin(0), 0);
        assert_eq!(app_bin(31), 31);
        assert_eq!(app_bin(32), 32);
        assert_eq!(app_bin(33), 32);
        assert_eq!(app_bin(200), 32);
        assert_eq!(app_bin_name(26), "social");
    }
}
