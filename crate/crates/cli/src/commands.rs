use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use unitrank_core::baselines::{RandomWalkAtFi, RandomWalkAtMetric};
use unitrank_core::dataset::{split_dataset, Dataset, DatasetSplit, FailureRecord, MetricWindow};
use unitrank_core::eval::{
    edge_removal_experiment, evaluate as evaluate_producer, seen_unseen_split, train_and_evaluate, training_fraction_sweep, write_table_csv,
    Accuracy, EvalReport, RunConfig as ExperimentRun, SweepPoint, TableRow,
};
use unitrank_core::interpret::local::signatures;
use unitrank_core::interpret::{class_signature, find_similar, GlobalInterpretation, TreeBaseline};
use unitrank_core::model::{Ablation, Localizer};
use unitrank_core::ranking::{RankedUnit, RankingProducer};
use unitrank_core::Model;
use unitrank_sim::{SimManifest, MANIFEST_FILE};

use crate::config::RunConfig;
use crate::{Experiment, Producer};

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.paths.out).with_context(|| format!("creating {}", cfg.paths.out.display()))?;
    Ok(&cfg.paths.out)
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let dir = &cfg.paths.dataset;
    if !dir.is_dir() {
        bail!("dataset directory {} does not exist", dir.display());
    }
    let manifest = dir.join(MANIFEST_FILE);
    let window = if manifest.is_file() { SimManifest::load(&manifest)?.window_config() } else { cfg.window };
    Dataset::load_dir(dir, window).with_context(|| format!("loading dataset {}", dir.display()))
}

fn load_model(cfg: &RunConfig, dataset: &Dataset) -> Result<Model> {
    let path = &cfg.paths.checkpoint;
    if !path.is_file() {
        bail!("checkpoint {} does not exist", path.display());
    }
    let model = Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    model.check_catalog(&dataset.catalog).context("checkpoint does not match the dataset's failure classes")?;
    Ok(model)
}

fn find_record<'a>(dataset: &'a Dataset, failure_id: &str) -> Result<&'a FailureRecord> {
    dataset.record(failure_id).with_context(|| format!("unknown failure id {failure_id}"))
}

pub fn simulate(cfg: &RunConfig, w: &mut dyn Write) -> Result<()> {
    let t = Instant::now();
    let out = unitrank_sim::simulate(&cfg.sim)?;
    out.write_dir(&cfg.paths.dataset)?;
    writeln!(
        w,
        "wrote {} failures over {} units to {} in {:.2}s",
        out.failures.len(),
        out.topology.catalog.units.len(),
        cfg.paths.dataset.display(),
        t.elapsed().as_secs_f64()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    train_failures: usize,
    validation_failures: usize,
    epochs_run: usize,
    best_epoch: usize,
    best_val_mar: f64,
}

pub fn train(cfg: &RunConfig, w: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let split = split_dataset(&dataset.records)?;
    let model = Model::from_catalog(cfg.model, &dataset.catalog, cfg.seed)?;
    let t = Instant::now();
    let outcome = unitrank_core::training::train(model, &split.train, &split.validation, &dataset.catalog, &cfg.train)?;
    let seconds = t.elapsed().as_secs_f64();
    if let Some(dir) = cfg.paths.checkpoint.parent() {
        std::fs::create_dir_all(dir)?;
    }
    outcome.model.save(&cfg.paths.checkpoint)?;
    let out = out_dir(cfg)?;
    unitrank_core::training::save_log_csv(&out.join("train_log.csv"), &outcome.log)?;
    write_json(
        &out.join("train_summary.json"),
        &TrainSummary {
            seed: cfg.seed,
            train_failures: split.train.len(),
            validation_failures: split.validation.len(),
            epochs_run: outcome.log.len(),
            best_epoch: outcome.best_epoch,
            best_val_mar: outcome.best_val_mar,
        },
    )?;
    write_json(&out.join("timing_train.json"), &serde_json::json!({ "seconds": seconds }))?;
    writeln!(
        w,
        "best validation MAR {:.3} at epoch {} of {}; checkpoint {} ({seconds:.1}s)",
        outcome.best_val_mar,
        outcome.best_epoch,
        outcome.log.len(),
        cfg.paths.checkpoint.display()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct LocalizeOutput<'a> {
    failure_id: &'a str,
    ranking: &'a [RankedUnit],
}

pub fn localize(cfg: &RunConfig, failure_id: &str, k: usize, w: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let record = find_record(&dataset, failure_id)?;
    let localizer = Localizer::new(load_model(cfg, &dataset)?, &dataset.catalog);
    let ranking = localizer.rank(record)?;
    let out = out_dir(cfg)?;
    write_json(&out.join(format!("ranking_{failure_id}.json")), &LocalizeOutput { failure_id, ranking: &ranking.entries })?;
    writeln!(w, "{}", serde_json::to_string(&LocalizeOutput { failure_id, ranking: &ranking.entries })?)?;
    write!(w, "{}", ranking.render(k))?;
    Ok(())
}

fn producer(cfg: &RunConfig, which: Producer, dataset: &Dataset, split: &DatasetSplit) -> Result<Box<dyn RankingProducer>> {
    Ok(match which {
        Producer::Dejavu => Box::new(Localizer::new(load_model(cfg, dataset)?, &dataset.catalog)),
        Producer::RwMetric => Box::new(RandomWalkAtMetric),
        Producer::RwFi => Box::new(RandomWalkAtFi),
        Producer::Tree => Box::new(TreeBaseline::fit(&split.train, &dataset.catalog, cfg.interpret.tree)?),
    })
}

fn print_accuracy(w: &mut dyn Write, name: &str, a: &Accuracy) -> Result<()> {
    writeln!(w, "{name:<12} MAR {:>7.3}  A@1 {:.3}  A@2 {:.3}  A@3 {:.3}  A@5 {:.3}", a.mar, a.a1, a.a2, a.a3, a.a5)?;
    Ok(())
}

fn save_report(out: &Path, report: &EvalReport) -> Result<()> {
    let name = &report.producer;
    write_json(&out.join(format!("eval_{name}.json")), report)?;
    let rows = [TableRow { name: name.clone(), accuracy: report.accuracy }];
    write_table_csv(std::fs::File::create(out.join(format!("metrics_{name}.csv")))?, &rows)?;
    if let Some(timing) = &report.timing {
        write_json(&out.join(format!("timing_{name}.json")), timing)?;
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, which: Producer, w: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let split = split_dataset(&dataset.records)?;
    let p = producer(cfg, which, &dataset, &split)?;
    let report = evaluate_producer(p.as_ref(), &split.test)?;
    save_report(out_dir(cfg)?, &report)?;
    print_accuracy(w, &report.producer, &report.accuracy)?;
    if let Some(t) = report.timing {
        writeln!(w, "localization: mean {:.4}s, max {:.4}s per failure", t.mean_seconds, t.max_seconds)?;
    }
    Ok(())
}

/// Class ids become file names.
fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct GlobalSummary {
    fidelity: f64,
    agree: usize,
    total: usize,
    classes: Vec<ClassSummary>,
}

#[derive(Serialize)]
struct ClassSummary {
    class_id: String,
    retained_features: usize,
    samples: usize,
    rules: usize,
}

pub fn interpret_global(cfg: &RunConfig, w: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let split = split_dataset(&dataset.records)?;
    let model = load_model(cfg, &dataset)?;
    let interp = GlobalInterpretation::fit(&model, &split.train, &dataset.catalog, &cfg.interpret)?;
    let fid = interp.fidelity(&model, &split.test, &dataset.catalog)?;
    let dir = out_dir(cfg)?.join("rules");
    std::fs::create_dir_all(&dir)?;
    for class in &interp.classes {
        let stem = file_stem(&class.class_id);
        write_json(&dir.join(format!("{stem}.json")), class)?;
        std::fs::write(dir.join(format!("{stem}.txt")), class.render())?;
    }
    let summary = GlobalSummary {
        fidelity: fid.rate(),
        agree: fid.agree,
        total: fid.total,
        classes: interp
            .classes
            .iter()
            .map(|c| ClassSummary {
                class_id: c.class_id.clone(),
                retained_features: c.retained.len(),
                samples: c.samples,
                rules: c.rules.len(),
            })
            .collect(),
    };
    write_json(&cfg.paths.out.join("interpret_global.json"), &summary)?;
    write!(w, "{}", interp.render())?;
    writeln!(w, "test fidelity {:.3} ({}/{})", fid.rate(), fid.agree, fid.total)?;
    Ok(())
}

#[derive(Serialize)]
struct Panel {
    class_id: String,
    historical_unit: String,
    historical_window: MetricWindow,
    incoming_unit: Option<String>,
    incoming_window: Option<MetricWindow>,
}

#[derive(Serialize)]
struct SimilarEntry {
    failure_id: String,
    similarity: f64,
    ground_truth: Vec<String>,
    truth_classes: Vec<String>,
    panels: Vec<Panel>,
}

#[derive(Serialize)]
struct LocalReport {
    failure_id: String,
    top_units: Vec<RankedUnit>,
    similar: Vec<SimilarEntry>,
}

impl LocalReport {
    fn render(&self) -> String {
        let mut out = format!("failure {}\ntop units:\n", self.failure_id);
        for (i, u) in self.top_units.iter().enumerate() {
            out.push_str(&format!("  {}. {} ({:.4})\n", i + 1, u.unit_id, u.score));
        }
        out.push_str("similar training failures:\n");
        for s in &self.similar {
            out.push_str(&format!(
                "  {} similarity {:.4}, ground truth {}\n",
                s.failure_id,
                s.similarity,
                s.ground_truth.join(", ")
            ));
        }
        out
    }
}

pub fn interpret_local(cfg: &RunConfig, failure_id: &str, k: usize, w: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let record = find_record(&dataset, failure_id)?;
    let split = split_dataset(&dataset.records)?;
    let model = load_model(cfg, &dataset)?;
    let unit_classes = dataset.catalog.unit_class_map();
    let incoming = class_signature(&model, record, &unit_classes)?;
    let history = signatures(&model, &split.train, &unit_classes)?;
    let similar = find_similar(&incoming, &history, k);
    let ranking = model.localize(record, &unit_classes)?;
    let by_id: BTreeMap<&str, &FailureRecord> = split.train.iter().map(|r| (r.failure_id.as_str(), r)).collect();
    let entries = similar
        .into_iter()
        .map(|s| {
            let past = by_id[s.failure_id.as_str()];
            let panels = s
                .ground_truth
                .iter()
                .map(|unit| {
                    let class_id = unit_classes[unit].clone();
                    let incoming_unit = incoming.representatives.get(&class_id).cloned();
                    Panel {
                        historical_unit: unit.clone(),
                        historical_window: past.windows[unit].clone(),
                        incoming_window: incoming_unit.as_ref().and_then(|u| record.windows.get(u).cloned()),
                        incoming_unit,
                        class_id,
                    }
                })
                .collect();
            SimilarEntry {
                failure_id: s.failure_id,
                similarity: s.similarity,
                ground_truth: s.ground_truth,
                truth_classes: s.truth_classes,
                panels,
            }
        })
        .collect();
    let report = LocalReport {
        failure_id: failure_id.to_string(),
        top_units: ranking.entries.into_iter().take(5).collect(),
        similar: entries,
    };
    let out = out_dir(cfg)?;
    write_json(&out.join(format!("similar_{failure_id}.json")), &report)?;
    let text = report.render();
    std::fs::write(out.join(format!("similar_{failure_id}.txt")), &text)?;
    write!(w, "{text}")?;
    Ok(())
}

fn experiment_run(cfg: &RunConfig) -> ExperimentRun {
    ExperimentRun { model: cfg.model, train: cfg.train }
}

#[derive(Serialize)]
struct VariantResult {
    name: String,
    mars: Vec<f64>,
    mean_mar: f64,
    runs: Vec<Accuracy>,
}

fn save_sweep(out: &Path, name: &str, points: &[SweepPoint], w: &mut dyn Write) -> Result<()> {
    write_json(&out.join(format!("{name}.json")), points)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(out.join(format!("{name}.csv")))?);
    writeln!(csv, "fraction,repeat,MAR")?;
    for p in points {
        for (i, m) in p.mars.iter().enumerate() {
            writeln!(csv, "{:?},{i},{m:?}", p.fraction)?;
        }
    }
    for p in points {
        writeln!(w, "fraction {:<5} mean MAR {:.3}", p.fraction, p.mean_mar)?;
    }
    Ok(())
}

pub fn experiment(cfg: &RunConfig, kind: Experiment, fractions: &[f64], repeats: usize, w: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(cfg)?;
    let split = split_dataset(&dataset.records)?;
    let out = out_dir(cfg)?;
    let run = experiment_run(cfg);
    match kind {
        Experiment::Ablation => {
            let variants = [
                ("full", Ablation::default(), true),
                ("no_gru", Ablation { no_gru: true, no_agg: false }, true),
                ("no_agg", Ablation { no_gru: false, no_agg: true }, true),
                ("no_balance", Ablation::default(), false),
            ];
            let mut results = Vec::new();
            let mut rows = Vec::new();
            for (name, ablation, balance) in variants {
                let mut v = run;
                v.model.ablation = ablation;
                v.train.balance = balance;
                let mut runs = Vec::new();
                for r in 0..repeats as u64 {
                    let report = train_and_evaluate(&split, &split.test, &dataset.catalog, &v, cfg.seed + r)?;
                    log::info!("{name} seed {}: MAR {:.3}", cfg.seed + r, report.accuracy.mar);
                    rows.push(TableRow { name: format!("{name}/seed{}", cfg.seed + r), accuracy: report.accuracy });
                    runs.push(report.accuracy);
                }
                let mars: Vec<f64> = runs.iter().map(|a| a.mar).collect();
                let mean_mar = mars.iter().sum::<f64>() / mars.len().max(1) as f64;
                writeln!(w, "{name:<12} mean MAR {mean_mar:.3}")?;
                results.push(VariantResult { name: name.to_string(), mars, mean_mar, runs });
            }
            write_json(&out.join("ablation.json"), &results)?;
            write_table_csv(std::fs::File::create(out.join("ablation.csv"))?, &rows)?;
        }
        Experiment::Edges => {
            let fr = if fractions.is_empty() { vec![0.0, 0.1, 0.2, 0.3] } else { fractions.to_vec() };
            let points = edge_removal_experiment(&split, &dataset.catalog, &run, &fr, repeats, cfg.seed)?;
            save_sweep(out, "edges", &points, w)?;
        }
        Experiment::Fraction => {
            let fr = if fractions.is_empty() { vec![0.2, 0.4, 0.6, 0.8, 1.0] } else { fractions.to_vec() };
            let points = training_fraction_sweep(&split, &dataset.catalog, &run, &fr, cfg.seed)?;
            save_sweep(out, "fraction", &points, w)?;
        }
        Experiment::Generalization => {
            let localizer = Localizer::new(load_model(cfg, &dataset)?, &dataset.catalog);
            let (seen, unseen) = seen_unseen_split(&split.test, &split.train);
            writeln!(w, "{} seen and {} unseen test failures", seen.len(), unseen.len())?;
            let mut rows = Vec::new();
            for (name, part) in [("seen", &seen), ("unseen", &unseen)] {
                if part.is_empty() {
                    continue;
                }
                let report = evaluate_producer(&localizer, part)?;
                print_accuracy(w, name, &report.accuracy)?;
                rows.push(TableRow { name: name.to_string(), accuracy: report.accuracy });
            }
            write_json(&out.join("generalization.json"), &rows)?;
            write_table_csv(std::fs::File::create(out.join("generalization.csv"))?, &rows)?;
        }
    }
    Ok(())
}
