//! End-to-end experiment runs that write a checksummed bundle.
//!
//! Bundle layout below the output directory:
//!
//! ```text
//! config.json            the resolved experiment config
//! cohort/                normalized record files (plus truth.csv, spec.json when synthetic)
//! ingest_report.json, validation.json
//! slots.csv              per-slot features of every night
//! events.csv, tally.json, exclusions.csv
//! labels/<target>.csv
//! describe/<target>_by_<group>.{csv,md}
//! stats/<target>_<contrast>_<metric>.{csv,md}
//! results/*.json         evaluations, sweep, importances, sex composition
//! tables/*.{csv,md}
//! manifest.json          sha256 of every file above
//! ```
//!
//! No file carries a timestamp or host-specific value, so a rerun of the same
//! config reproduces the bundle byte for byte regardless of thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_cohort, write_slots_csv};
use crate::error::{Error, Result};
use crate::ingest::{ingest_dir, write_cohort_files};
use crate::labels::{label_dataset, write_labeled_csv, LabelConfig, LabeledDataset, Target, Task};
use crate::learn::forest::ForestParams;
use crate::learn::{
    evaluate_lkpo, importance_report, sex_composition_eval, threshold_sweep, EvalConfig, EvaluationResult,
    FeatureGroup, ModelSpec,
};
use crate::manifest::{self, Manifest, VerifyReport};
use crate::matching::{build_dataset, write_events_csv, write_tally_json, ExclusionTally, GeoFence, MatchConfig};
use crate::model::Modality;
use crate::report::{self, Columns, GroupBy};
use crate::stats::{rank_features, write_rank_csv, Contrast, Metric};
use crate::synth::{generate_cohort, write_synth, CohortSpec, Effect, EffectDriver, ExclusionInjection, SexShares};
use crate::validate::validate_cohort;

pub const CONFIG_FILE: &str = "config.json";

/// Where the raw cohort comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// A directory in the ingest schema.
    Dir { path: PathBuf },
    /// A cohort generated on the fly.
    Synth { spec: Box<CohortSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRequest {
    #[serde(with = "target_str")]
    pub target: Target,
    pub contrast: Contrast,
    pub metric: Metric,
    pub top: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub task: Task,
    pub thresholds: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRequest {
    #[serde(with = "target_str")]
    pub target: Target,
    pub top_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Master seed of every evaluation.
    pub seed: u64,
    pub window_slots: usize,
    /// Region box for the out-of-region rule. Synthetic cohorts fall back to
    /// their home region when this is unset.
    pub geofence: Option<GeoFence>,
    pub labels: LabelConfig,
    #[serde(with = "target_list")]
    pub tasks: Vec<Target>,
    pub models: Vec<ModelSpec>,
    pub groups: Vec<FeatureGroup>,
    pub k: usize,
    pub iterations: usize,
    pub smote: bool,
    pub describe: Vec<GroupBy>,
    pub stats: Vec<StatsRequest>,
    pub sweep: Option<SweepRequest>,
    pub importance: Option<ImportanceRequest>,
    pub sex_composition: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::demo()
    }
}

impl ExperimentConfig {
    /// A 20-participant synthetic cohort with one planted sensor effect per
    /// task family, evaluated on every task.
    pub fn demo() -> Self {
        let effect = |driver, modality, d| Effect { driver, modality, d };
        let spec = CohortSpec {
            n_participants: 20,
            effects: vec![
                effect(EffectDriver::Task { task: Task::FriendsTwo }, Modality::Acc, 1.0),
                effect(EffectDriver::Task { task: Task::FamilyTwo }, Modality::App, 0.8),
                effect(EffectDriver::Task { task: Task::PartnerTwo }, Modality::Blu, 0.8),
                effect(EffectDriver::Task { task: Task::PeopleThree }, Modality::Wif, 0.5),
                effect(EffectDriver::SexComposition, Modality::Loc, 0.5),
            ],
            exclusions: ExclusionInjection {
                unavailable_sensor_data: 12,
                edge_time: 8,
                out_of_region: 5,
            },
            ..CohortSpec::default()
        };
        let mut spec = spec;
        spec.companions.friends_many_by_sex = Some(SexShares { woman: 0.575, man: 0.756 });
        Self {
            data: DataSource::Synth { spec: Box::new(spec) },
            seed: 0,
            window_slots: crate::matching::DEFAULT_WINDOW_SLOTS,
            geofence: None,
            labels: LabelConfig::default(),
            tasks: Task::ALL.iter().map(|&t| Target::task(t)).collect(),
            models: vec![
                ModelSpec::Forest(ForestParams {
                    n_trees: 50,
                    ..ForestParams::default()
                }),
                ModelSpec::NaiveBayes,
                ModelSpec::Uniform,
            ],
            groups: vec![FeatureGroup::All],
            k: 5,
            iterations: 5,
            smote: true,
            describe: GroupBy::ALL.to_vec(),
            stats: vec![StatsRequest {
                target: Target::task(Task::FriendsTwo),
                contrast: Contrast { first: 0, second: 1 },
                metric: Metric::D,
                top: Some(10),
            }],
            sweep: Some(SweepRequest {
                task: Task::FriendsThree,
                thresholds: (1..=10).collect(),
            }),
            importance: Some(ImportanceRequest {
                target: Target::task(Task::FriendsTwo),
                top_n: 20,
            }),
            sex_composition: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked before any work starts,
    /// including that referenced paths exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match &self.data {
            DataSource::Dir { path } if !path.is_dir() => {
                return Err(Error::Input(format!("data directory {} does not exist", path.display())))
            }
            DataSource::Synth { spec } => spec.validate()?,
            DataSource::Dir { .. } => {}
        }
        if self.window_slots == 0 {
            return bad("window_slots must be positive");
        }
        if self.k == 0 || self.iterations == 0 {
            return bad("k and iterations must be positive");
        }
        if !self.tasks.is_empty() && (self.models.is_empty() || self.groups.is_empty()) {
            return bad("evaluating tasks needs at least one model and one feature group");
        }
        if let Some(imp) = &self.importance {
            if !self.models.iter().any(|m| matches!(m, ModelSpec::Forest(_))) {
                return bad("the importance report needs a forest model in `models`");
            }
            if imp.top_n == 0 {
                return bad("importance top_n must be positive");
            }
        }
        if let Some(s) = &self.sweep {
            if !s.task.is_three_class() {
                return bad("the sweep task must be a three-class task");
            }
        }
        Ok(())
    }

    fn eval_config(&self, model: ModelSpec, group: FeatureGroup) -> EvalConfig {
        EvalConfig {
            model,
            group,
            k: self.k,
            iterations: self.iterations,
            seed: self.seed,
            smote: self.smote,
            ..EvalConfig::default()
        }
    }

    fn primary_forest(&self) -> ModelSpec {
        self.models
            .iter()
            .copied()
            .find(|m| matches!(m, ModelSpec::Forest(_)))
            .unwrap_or_else(|| self.models.first().copied().unwrap_or(ModelSpec::NaiveBayes))
    }
}

mod target_str {
    use super::Target;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Target, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(t)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Target, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

mod target_list {
    use super::Target;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &[Target], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(ts.len()))?;
        for t in ts {
            seq.serialize_element(&t.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Target>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// What a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub tally: ExclusionTally,
    pub evaluations: Vec<EvaluationResult>,
    pub manifest: Manifest,
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn file_stem(t: &Target) -> String {
    t.to_string().replace('@', "_")
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {name}");
    f().map_err(|e| e.in_stage(name))
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            return Err(Error::Input(format!("output directory {} is not empty", out.display())));
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Runs every configured stage and writes the bundle into `out`, which must
/// be empty or absent. Errors are tagged with the failing stage.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    stage("config", || {
        config.validate()?;
        prepare_out_dir(out)?;
        write_text(&out.join(CONFIG_FILE), &config.to_json())
    })?;

    let (cohort, geofence) = stage("ingest", || {
        let cohort_dir = out.join("cohort");
        let geofence = match &config.data {
            DataSource::Dir { path } => {
                let (cohort, _) = ingest_dir(path)?;
                write_cohort_files(&cohort, &cohort_dir)?;
                config.geofence
            }
            DataSource::Synth { spec } => {
                let synth = generate_cohort(spec)?;
                write_synth(&synth, spec, &cohort_dir)?;
                Some(config.geofence.unwrap_or(spec.home_region))
            }
        };
        // the rest of the run reads the normalized copy, so the bundle alone
        // determines every downstream output
        let (cohort, report) = ingest_dir(&cohort_dir)?;
        write_json(&out.join("ingest_report.json"), &report)?;
        write_json(&out.join("validation.json"), &validate_cohort(&cohort))?;
        Ok((cohort, geofence))
    })?;

    let slots = stage("aggregate", || {
        let slots = aggregate_cohort(&cohort);
        write_slots_csv(&slots, &out.join("slots.csv"))?;
        Ok(slots)
    })?;

    let built = stage("match", || {
        let cfg = MatchConfig {
            window_slots: config.window_slots,
            geofence,
        };
        let built = build_dataset(&cohort, &slots, &cfg);
        write_events_csv(&built.dataset, &out.join("events.csv"))?;
        write_tally_json(&built.tally, &out.join("tally.json"))?;
        let mut ex = String::from("participant_id,timestamp_ms,reason\n");
        for e in &built.exclusions {
            writeln!(ex, "{},{},{}", e.participant_id, e.timestamp, e.reason.as_str()).expect("write to String");
        }
        write_text(&out.join("exclusions.csv"), &ex)?;
        report::tally_table(&built.tally).write(&out.join("tables"), "tally")?;
        Ok(built)
    })?;
    let events = &built.dataset;

    let labeled: Vec<LabeledDataset> = stage("label", || {
        let mut targets = config.tasks.clone();
        for t in config.stats.iter().map(|s| s.target).chain(config.importance.as_ref().map(|i| i.target)) {
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        let dir = out.join("labels");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        targets
            .into_iter()
            .map(|t| {
                let ds = label_dataset(events, t, &config.labels)?;
                write_labeled_csv(&ds, &dir.join(format!("{}.csv", file_stem(&t))))?;
                Ok(ds)
            })
            .collect()
    })?;
    let labeled_for = |t: Target| labeled.iter().find(|d| d.target == t).expect("every target was labeled");

    stage("describe", || {
        let dir = out.join("describe");
        let mut all = Vec::new();
        for &t in &config.tasks {
            for &g in &config.describe {
                let table = report::describe(labeled_for(t), g);
                report::count_table(&table).write(&dir, &format!("{}_by_{g}", file_stem(&t)))?;
                all.push(table);
            }
        }
        if !all.is_empty() {
            write_json(&dir.join("describe.json"), &all)?;
        }
        Ok(())
    })?;

    stage("stats", || {
        let dir = out.join("stats");
        for req in &config.stats {
            let table = rank_features(labeled_for(req.target), req.contrast, req.metric, req.top)?;
            let stem = format!("{}_{}_{}", file_stem(&req.target), req.contrast, req.metric);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_rank_csv(&table, &dir.join(format!("{stem}.csv")))?;
            write_text(&dir.join(format!("{stem}.md")), &report::rank_table(&table).to_markdown())?;
        }
        Ok(())
    })?;

    let evaluations = stage("evaluate", || {
        let mut results = Vec::new();
        for &t in &config.tasks {
            let ds = labeled_for(t);
            for &group in &config.groups {
                for &model in &config.models {
                    log::info!("evaluating {t} with {model} on {group}");
                    results.push(evaluate_lkpo(ds, &config.eval_config(model, group))?);
                }
            }
        }
        if !results.is_empty() {
            write_json(&out.join("results").join("evaluation.json"), &results)?;
            let tables = out.join("tables");
            for &group in &config.groups {
                let of_group: Vec<EvaluationResult> =
                    results.iter().filter(|r| r.config.group == group).cloned().collect();
                report::evaluation_table(&format!("Inference with {group} features"), &of_group, Columns::Model)
                    .write(&tables, &format!("evaluation_{group}"))?;
            }
            if config.groups.len() > 1 {
                for &model in &config.models {
                    let of_model: Vec<EvaluationResult> =
                        results.iter().filter(|r| r.config.model == model).cloned().collect();
                    report::evaluation_table(&format!("Feature group ablation, {model}"), &of_model, Columns::Group)
                        .write(&tables, &format!("ablation_{model}"))?;
                }
            }
        }
        Ok(results)
    })?;

    stage("sweep", || {
        if let Some(req) = &config.sweep {
            let cfg = config.eval_config(config.primary_forest(), FeatureGroup::All);
            let sweep = threshold_sweep(events, req.task, &req.thresholds, &cfg, &config.labels)?;
            write_json(&out.join("results").join("sweep.json"), &sweep)?;
            report::sweep_table(&sweep).write(&out.join("tables"), "sweep")?;
        }
        Ok(())
    })?;

    stage("importance", || {
        if let Some(req) = &config.importance {
            let cfg = config.eval_config(config.primary_forest(), FeatureGroup::All);
            let rep = importance_report(labeled_for(req.target), &cfg, req.top_n)?;
            write_json(&out.join("results").join("importance.json"), &rep)?;
            let tables = out.join("tables");
            report::importance_table(&rep).write(&tables, "importance")?;
            report::group_importance_table(&rep).write(&tables, "importance_groups")?;
        }
        Ok(())
    })?;

    stage("sex_composition", || {
        if config.sex_composition {
            let cfg = config.eval_config(config.primary_forest(), FeatureGroup::All);
            let r = sex_composition_eval(events, &cfg, &config.labels)?;
            write_json(&out.join("results").join("sex_composition.json"), &r)?;
            report::evaluation_table("Sex composition of friends", std::slice::from_ref(&r), Columns::Model)
                .write(&out.join("tables"), "sex_composition")?;
        }
        Ok(())
    })?;

    let manifest = stage("manifest", || {
        let meta = serde_json::json!({
            "seed": config.seed,
            "config_sha256": manifest::sha256_file(&out.join(CONFIG_FILE))?,
            "retained_events": built.tally.retained,
        });
        let m = Manifest::scan("experiment", out, meta)?;
        m.write(out)?;
        Ok(m)
    })?;

    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        tally: built.tally,
        evaluations,
        manifest,
    })
}

/// Re-checks every file of a bundle against its manifest.
pub fn verify(bundle: &Path) -> Result<VerifyReport> {
    manifest::verify(bundle)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerunReport {
    pub identical: bool,
    /// Files whose checksum differs, or that only one bundle has.
    pub differing: Vec<String>,
}

/// Reruns the config stored in `bundle` into `out` and compares manifests.
pub fn rerun(bundle: &Path, out: &Path) -> Result<RerunReport> {
    let config = ExperimentConfig::load(&bundle.join(CONFIG_FILE))?;
    let original = Manifest::read(bundle)?;
    let fresh = run(&config, out)?.manifest;
    let mut differing: Vec<String> = original
        .files
        .iter()
        .filter(|f| !fresh.files.contains(f))
        .map(|f| f.path.clone())
        .collect();
    for f in &fresh.files {
        if !original.files.iter().any(|o| o.path == f.path) {
            differing.push(f.path.clone());
        }
    }
    differing.sort();
    differing.dedup();
    Ok(RerunReport {
        identical: differing.is_empty() && original.meta == fresh.meta,
        differing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::demo();
        let text = cfg.to_json();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(text.contains("\"friends_three\""));
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 7, "tasks": ["people_three@g3"]}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.k, 5);
        assert_eq!(
            cfg.tasks,
            vec![Target::Task {
                task: Task::PeopleThree,
                threshold: 3
            }]
        );
    }

    #[test]
    fn missing_data_dir_is_rejected() {
        let cfg = ExperimentConfig {
            data: DataSource::Dir {
                path: "/nonexistent/cohort".into(),
            },
            ..ExperimentConfig::demo()
        };
        assert!(cfg.validate().is_err());
        let out = tempfile::tempdir().unwrap();
        let err = run(&cfg, out.path()).unwrap_err();
        assert!(err.to_string().starts_with("stage `config` failed"), "{err}");
    }

    #[test]
    fn refuses_non_empty_output() {
        let out = tempfile::tempdir().unwrap();
        fs::write(out.path().join("stale.txt"), "x").unwrap();
        let cfg = ExperimentConfig {
            tasks: vec![],
            ..ExperimentConfig::demo()
        };
        assert!(run(&cfg, out.path()).is_err());
    }
}
