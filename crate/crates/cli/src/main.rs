use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use drinkctx::aggregate::{aggregate_cohort, read_slots_csv, write_slots_csv};
use drinkctx::ingest::{ingest_dir, write_bundle};
use drinkctx::labels::{label_dataset, read_labeled_csv, write_labeled_csv, LabelConfig, Target, Task};
use drinkctx::learn::{
    evaluate_lkpo, importance_report, threshold_sweep, EvalConfig, FeatureGroup, ForestParams, ModelSpec,
};
use drinkctx::matching::{build_dataset, describe_tally, read_events_csv, write_events_csv, write_tally_json, GeoFence, MatchConfig};
use drinkctx::pipeline::{self, ExperimentConfig};
use drinkctx::report::{self, GroupBy};
use drinkctx::stats::{rank_features, write_rank_csv, Contrast, Metric};
use drinkctx::synth::{generate_cohort, write_synth, CohortSpec};
use drinkctx::validate::validate_cohort;
use drinkctx::Error;

const EXIT_INPUT: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

#[derive(Parser)]
#[command(name = "drinkctx", version, about = "Social context of drinking events from smartphone sensing")]
struct Cli {
    /// Master seed; overrides the seed of --config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (JSON). `run` executes it; other commands take
    /// evaluation defaults (k, iterations, smote, labels) from it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw data directory into a normalized, checksummed cohort bundle.
    Ingest {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate sensor records into 10-minute slot features.
    Extract {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match alcoholic reports to their slot windows.
    Match {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        slots: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tally: Option<PathBuf>,
        #[arg(long, default_value_t = drinkctx::matching::DEFAULT_WINDOW_SLOTS)]
        window_slots: usize,
        /// Region box `min_lat,max_lat,min_lon,max_lon`.
        #[arg(long, value_parser = parse_geofence)]
        geofence: Option<GeoFence>,
    },
    /// Attach a social-context label to every event.
    Label {
        #[arg(long)]
        events: PathBuf,
        /// A task such as `friends_three`, or `sex_composition`.
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 1)]
        threshold: u8,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        labels: LabelArgs,
    },
    /// Rank features by a two-class contrast statistic.
    Stats {
        #[arg(long)]
        labeled: PathBuf,
        /// e.g. `alone-vs-lgroup` or `0-vs-1`.
        #[arg(long)]
        contrast: Contrast,
        /// t, d or r.
        #[arg(long)]
        metric: Metric,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-k-participants-out evaluation of one model.
    Evaluate {
        #[arg(long)]
        labeled: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a three-class task at several grouping thresholds.
    Sweep {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        task: Task,
        /// Threshold range such as `1..10` or a list `1,2,4`.
        #[arg(long = "g", default_value = "1..10", value_parser = parse_thresholds)]
        thresholds: Thresholds,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        labels: LabelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forest feature importances, per feature and per sensor.
    Importance {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic cohort in the raw data schema.
    Synth {
        /// Cohort spec (JSON); defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Use the 57-participant exclusion bookkeeping cohort.
        #[arg(long, conflicts_with = "spec")]
        bookkeeping: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Class counts of a labeled dataset per sex, age, or overall.
    Describe {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, default_value = "sex")]
        by: GroupBy,
        /// Write CSV here instead of printing Markdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a whole experiment into a bundle directory.
    Run {
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a bundle against its manifest; optionally rerun and compare.
    Verify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        rerun_into: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LabelArgs {
    /// Leave "other people" out of the people aggregate.
    #[arg(long)]
    people_excludes_others: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// forest, naive_bayes, uniform or coin_flip.
    #[arg(long)]
    model: Option<ModelSpec>,
    /// Feature group: ACC, APP, BAT, BLU, PRO, LOC, SCR, WIF, ConSen, IntSen or ALL.
    #[arg(long)]
    group: Option<FeatureGroup>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    no_smote: bool,
}

#[derive(Clone, Debug)]
struct Thresholds(Vec<u8>);

fn parse_thresholds(s: &str) -> Result<Thresholds, String> {
    let bad = || format!("bad threshold list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let a: u8 = a.trim().parse().map_err(|_| bad())?;
        let b: u8 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok(Thresholds((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()
        .map(Thresholds)
}

fn parse_geofence(s: &str) -> Result<GeoFence, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad geofence `{s}`"))?;
    match v[..] {
        [min_lat, max_lat, min_lon, max_lon] if min_lat <= max_lat && min_lon <= max_lon => Ok(GeoFence {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
        }),
        _ => Err("geofence needs min_lat,max_lat,min_lon,max_lon".into()),
    }
}

impl LabelArgs {
    fn config(&self, base: &LabelConfig) -> LabelConfig {
        LabelConfig {
            people_includes_others: base.people_includes_others && !self.people_excludes_others,
        }
    }
}

impl EvalArgs {
    fn config(&self, base: &ExperimentConfig, seed: u64) -> EvalConfig {
        let mut model = self.model.unwrap_or(ModelSpec::Forest(ForestParams::default()));
        if let (ModelSpec::Forest(p), Some(n)) = (&mut model, self.trees) {
            p.n_trees = n;
        }
        EvalConfig {
            model,
            group: self.group.unwrap_or(FeatureGroup::All),
            k: self.k.unwrap_or(base.k),
            iterations: self.iterations.unwrap_or(base.iterations),
            seed,
            smote: base.smote && !self.no_smote,
            ..EvalConfig::default()
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let file_config = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    // standalone commands use full-size evaluation defaults (k 20, 10 iterations) unless a config says otherwise
    let base = file_config.clone().unwrap_or_else(|| ExperimentConfig {
        k: EvalConfig::default().k,
        iterations: EvalConfig::default().iterations,
        ..ExperimentConfig::demo()
    });
    let seed = cli.seed.unwrap_or(base.seed);

    match cli.command {
        Command::Ingest { data_dir, out } => {
            let (cohort, report) = ingest_dir(&data_dir)?;
            let validation = validate_cohort(&cohort);
            let manifest = write_bundle(&cohort, &report, &out)?;
            println!(
                "{} participants, {} reports, {} sensor records ({} malformed lines, {} outside study nights)",
                report.participants, report.reports, report.records, report.malformed, report.discarded_outside_night
            );
            println!("validation findings: {}", validation.findings());
            println!("bundle {} with {} files", out.display(), manifest.files.len());
        }
        Command::Extract { cohort, out } => {
            let (cohort, _) = ingest_dir(&cohort)?;
            let slots = aggregate_cohort(&cohort);
            write_slots_csv(&slots, &out)?;
            println!("{} nights aggregated", slots.len());
        }
        Command::Match {
            cohort,
            slots,
            out,
            tally,
            window_slots,
            geofence,
        } => {
            let (cohort, _) = ingest_dir(&cohort)?;
            let slots = read_slots_csv(&slots)?;
            let built = build_dataset(&cohort, &slots, &MatchConfig { window_slots, geofence });
            write_events_csv(&built.dataset, &out)?;
            if let Some(t) = tally {
                write_tally_json(&built.tally, &t)?;
            }
            println!("{}", describe_tally(&built.tally));
        }
        Command::Label {
            events,
            task,
            threshold,
            out,
            labels,
        } => {
            let target: Target = if threshold == 1 {
                task.parse()
            } else {
                format!("{task}@g{threshold}").parse()
            }
            .map_err(Error::InvalidParameter)?;
            let events = read_events_csv(&events)?;
            let ds = label_dataset(&events, target, &labels.config(&base.labels))?;
            write_labeled_csv(&ds, &out)?;
            let names = report::class_names(&target);
            for (class, n) in ds.histogram() {
                println!("{class} {:<12} {n}", names[usize::from(class)]);
            }
        }
        Command::Stats {
            labeled,
            contrast,
            metric,
            top,
            out,
        } => {
            let ds = read_labeled_csv(&labeled)?;
            let table = rank_features(&ds, contrast, metric, top)?;
            write_rank_csv(&table, &out)?;
            print!("{}", report::rank_table(&table).to_markdown());
        }
        Command::Evaluate { labeled, eval, out } => {
            let ds = read_labeled_csv(&labeled)?;
            let result = evaluate_lkpo(&ds, &eval.config(&base, seed))?;
            write_json(&out, &result)?;
            println!("{} {}: {}", result.target, result.config.model, result.cell());
        }
        Command::Sweep {
            events,
            task,
            thresholds,
            eval,
            labels,
            out,
        } => {
            let events = read_events_csv(&events)?;
            let sweep = threshold_sweep(&events, task, &thresholds.0, &eval.config(&base, seed), &labels.config(&base.labels))?;
            write_json(&out, &sweep)?;
            print!("{}", report::sweep_table(&sweep).to_markdown());
        }
        Command::Importance { labeled, top, eval, out } => {
            let ds = read_labeled_csv(&labeled)?;
            let rep = importance_report(&ds, &eval.config(&base, seed), top)?;
            write_json(&out, &rep)?;
            print!("{}", report::group_importance_table(&rep).to_markdown());
            print!("{}", report::importance_table(&rep).to_markdown());
        }
        Command::Synth { spec, bookkeeping, out } => {
            let mut spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<CohortSpec>(&text).map_err(Error::from)?
                }
                None if bookkeeping => CohortSpec::bookkeeping(),
                None => CohortSpec::default(),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            spec.validate()?;
            let synth = generate_cohort(&spec)?;
            write_synth(&synth, &spec, &out)?;
            println!(
                "{} participants, {} reports written to {}",
                synth.cohort.participants.len(),
                synth.cohort.reports.len(),
                out.display()
            );
        }
        Command::Describe { labeled, by, out } => {
            let ds = read_labeled_csv(&labeled)?;
            let table = report::count_table(&report::describe(&ds, by));
            match out {
                Some(p) => fs::write(&p, table.to_csv()).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", table.to_markdown()),
            }
        }
        Command::Run { out } => {
            let mut config = file_config.unwrap_or_default();
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            let summary = pipeline::run(&config, &out)?;
            println!("{}", describe_tally(&summary.tally));
            for r in &summary.evaluations {
                println!("{:<20} {:<12} {:<7} {}", r.target.to_string(), r.config.model.name(), r.config.group.as_str(), r.cell());
            }
            println!("bundle {} with {} files", out.display(), summary.manifest.files.len());
        }
        Command::Verify { bundle, rerun_into } => {
            let report = pipeline::verify(&bundle)?;
            if !report.is_intact() {
                for (what, files) in [("modified", &report.mismatched), ("missing", &report.missing), ("unlisted", &report.unlisted)] {
                    for f in files {
                        println!("{what}: {f}");
                    }
                }
                return Err(Error::Input(format!("bundle {} does not match its manifest", bundle.display())).into());
            }
            println!("{} files intact", report.checked);
            if let Some(dir) = rerun_into {
                let rerun = pipeline::rerun(&bundle, &dir)?;
                for f in &rerun.differing {
                    println!("differs: {f}");
                }
                if !rerun.identical {
                    return Err(Error::Internal("rerun did not reproduce the bundle".into()).into());
                }
                println!("rerun reproduced the bundle");
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if !e.is_input_error() => EXIT_INTERNAL,
        // I/O failures, parse errors and bad parameters all trace back to input
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // pipeline errors already spell out their causes
            match e.downcast_ref::<Error>() {
                Some(inner) => eprintln!("error: {inner}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
