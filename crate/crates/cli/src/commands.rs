use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use lcdr_adv::attack::{self, AttackConfig, AttackReport};
use lcdr_adv::autodiff::{Architecture, TrainConfig};
use lcdr_adv::dataset::{self, Dataset, Origin, LABEL_FAULT, LABEL_FDIA};
use lcdr_adv::defense::{self, AugmentationSummary};
use lcdr_adv::detector::{self, Detector, TrainingLog};
use lcdr_adv::exec::derive_seed;
use lcdr_adv::metrics::{self, MetricsReport, SweepRow};
use lcdr_adv::{Error, Execution};

use crate::config::ExperimentConfig;
use crate::Common;

// Per-stage seed streams derived from the global seed.
const STREAM_DATA: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_INIT: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;

pub fn category(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| c.downcast_ref::<Error>())
        .map_or("other", Error::category)
}

pub fn exit_code(category: &str) -> u8 {
    match category {
        "config" => 2,
        "input" => 3,
        "generation" => 4,
        "data" => 5,
        "numeric" => 6,
        "io" => 7,
        _ => 1,
    }
}

pub struct Context {
    cfg: ExperimentConfig,
    archs: Vec<Architecture>,
    exec: Execution,
}

#[derive(Serialize)]
struct GenSummary {
    seed: u64,
    total: dataset::ClassCounts,
    train: dataset::ClassCounts,
    test: dataset::ClassCounts,
}

#[derive(Serialize)]
struct DefenseReport {
    model: String,
    epsilon: f64,
    max_iterations: usize,
    retrain_epochs: usize,
    augmentation: AugmentationSummary,
    retrain_log: Vec<lcdr_adv::autodiff::EpochLog>,
    before_clean: MetricsReport,
    before_adversarial: MetricsReport,
    after_clean: MetricsReport,
    /// Fresh attack against the hardened model.
    after_adversarial: MetricsReport,
    /// The pre-defense adversarial set scored by the hardened model.
    after_replay: MetricsReport,
}

impl Context {
    pub fn new(common: &Common) -> Result<Self> {
        let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &common.out {
            cfg.out = out.clone();
        }
        if let Some(e) = common.epsilon {
            cfg.attack.epsilon = e;
        }
        if let Some(n) = common.iters {
            cfg.attack.max_iterations = n;
            cfg.defense.max_iterations = n;
        }
        let archs = match common.arch.as_str() {
            a if a.eq_ignore_ascii_case("all") => Architecture::ALL.to_vec(),
            a => vec![a
                .parse::<Architecture>()
                .map_err(|e| Error::Config(e.to_string()))?],
        };
        cfg.validate()?;
        Ok(Self {
            cfg,
            archs,
            exec: Execution::default(),
        })
    }

    fn dir(&self, parts: &[&str]) -> PathBuf {
        parts.iter().fold(self.cfg.out.clone(), |p, s| p.join(s))
    }

    fn load_split(&self, name: &str) -> Result<Dataset> {
        let dir = self.dir(&["data", name]);
        if !dir.join("manifest.json").exists() {
            bail!(Error::Io {
                path: dir.clone(),
                source: std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "dataset not found; run `lcdr-adv gen` with the same --out first",
                ),
            });
        }
        Ok(dataset::load(&dir)?)
    }

    fn train_config(&self, arch: Architecture) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.cfg.seed, STREAM_SHUFFLE, arch_index(arch)),
            execution: self.exec,
            ..self.cfg.train
        }
    }

    /// Detectors to work on: a single explicit checkpoint, or one per
    /// selected architecture from `<out>/models`.
    fn detectors(&self, model: Option<PathBuf>) -> Result<Vec<Detector>> {
        let paths = match model {
            Some(p) => vec![p],
            None => self
                .archs
                .iter()
                .map(|a| self.dir(&["models", &format!("{a}.ckpt")]))
                .collect(),
        };
        paths
            .iter()
            .map(|p| {
                Detector::load(p).with_context(|| {
                    format!("loading checkpoint {} (run `lcdr-adv train` first?)", p.display())
                })
            })
            .collect()
    }

    pub fn gen(&self) -> Result<()> {
        let mut gcfg = self.cfg.generation.clone();
        gcfg.execution = self.exec;
        let ds = dataset::generate_dataset(&gcfg, derive_seed(self.cfg.seed, STREAM_DATA, 0))?;
        let (train, test) = dataset::split(
            &ds,
            self.cfg.test_fraction,
            derive_seed(self.cfg.seed, STREAM_SPLIT, 0),
        )?;
        dataset::save(&train, &self.dir(&["data", "train"]))?;
        dataset::save(&test, &self.dir(&["data", "test"]))?;
        let summary = GenSummary {
            seed: self.cfg.seed,
            total: ds.class_counts(),
            train: train.class_counts(),
            test: test.class_counts(),
        };
        write_json(&self.dir(&["data", "summary.json"]), &summary)?;
        println!(
            "generated {} samples ({} fault / {} fdia): train {} / {}, test {} / {}",
            ds.len(),
            summary.total.fault,
            summary.total.fdia,
            summary.train.fault,
            summary.train.fdia,
            summary.test.fault,
            summary.test.fdia
        );
        Ok(())
    }

    pub fn train(&self) -> Result<()> {
        let train = self.load_split("train")?;
        let test = self.load_split("test")?;
        for &arch in &self.archs {
            let tcfg = self.train_config(arch);
            let init = derive_seed(self.cfg.seed, STREAM_INIT, arch_index(arch));
            let (det, log): (Detector, TrainingLog) =
                detector::train_detector(arch, &train, &tcfg, init)?;
            write_json(&self.dir(&["models", &format!("{arch}.train.json")]), &log)?;
            det.save(&self.dir(&["models", &format!("{arch}.ckpt")]))?;
            let clean = defense::evaluate(&det, &test, self.exec, "clean_test", None)?;
            let last = log.epochs.last();
            println!(
                "{arch}: {} params, final loss {:.5}, clean test accuracy {:.4}",
                log.num_parameters,
                last.map_or(f64::NAN, |l| l.loss),
                clean.accuracy
            );
        }
        Ok(())
    }

    pub fn attack(&self, model: Option<PathBuf>) -> Result<()> {
        let test = self.load_split("test")?;
        let acfg = self.cfg.attack;
        for det in self.detectors(model)? {
            let arch = det.architecture();
            let (adv, report) =
                attack::build_adversarial_testset(&det, &test, &acfg, test.relay(), self.exec)?;
            let name = format!("{arch}_eps{}", acfg.epsilon);
            dataset::save(&adv, &self.dir(&["attack", &name]))?;
            write_json(&self.dir(&["attack", &format!("{name}.json")]), &report)?;
            println!(
                "{arch}: eps {} iters {}: {}/{} FDIA samples adversarial ({:.2}%)",
                acfg.epsilon,
                acfg.max_iterations,
                report.successes,
                report.n_fdias,
                100.0 * report.success_fraction
            );
        }
        Ok(())
    }

    pub fn defend(&self, model: Option<PathBuf>) -> Result<()> {
        let train = self.load_split("train")?;
        let test = self.load_split("test")?;
        let relay = *test.relay();
        let acfg = self.cfg.attack;
        for det in self.detectors(model)? {
            let arch = det.architecture();
            let before_clean = defense::evaluate(&det, &test, self.exec, "clean_test", None)?;
            let (pre_adv, before_adversarial) =
                defense::adversarial_report(&det, &test, &acfg, &relay, self.exec, "adversarial_test")?;
            let (robust, augmented, outcome) = defense::adversarial_training(
                &det,
                &train,
                &self.cfg.defense,
                &self.train_config(arch),
                &relay,
            )?;
            let after_clean = defense::evaluate(&robust, &test, self.exec, "clean_test", None)?;
            let (_, after_adversarial) = defense::adversarial_report(
                &robust,
                &test,
                &acfg,
                &relay,
                self.exec,
                "adversarial_test_regenerated",
            )?;
            let mut after_replay =
                defense::evaluate(&robust, &pre_adv, self.exec, "adversarial_test_replay", Some(&acfg))?;
            after_replay.fooling_rate = stored_fooling_rate(&robust, &pre_adv, self.exec)?;

            fs::create_dir_all(self.dir(&["defense"]))
                .map_err(|e| Error::Io { path: self.dir(&["defense"]), source: e })?;
            robust.save(&self.dir(&["defense", &format!("{arch}.ckpt")]))?;
            dataset::save(&augmented, &self.dir(&["defense", &format!("{arch}_augmented")]))?;
            let reports = vec![
                before_clean.clone(),
                before_adversarial.clone(),
                after_clean.clone(),
                after_adversarial.clone(),
                after_replay.clone(),
            ];
            metrics::emit_reports(&reports, &self.dir(&["defense", &format!("{arch}.csv")]))?;
            println!(
                "{arch}: +{} adversarial samples from {} targets; FDIA recall under attack {} -> {} (replay {}), fault recall {} -> {}",
                outcome.summary.added,
                outcome.summary.attempted,
                pct(before_adversarial.recall),
                pct(after_adversarial.recall),
                pct(after_replay.recall),
                pct(before_clean.fault_recall),
                pct(after_clean.fault_recall),
            );
            let report = DefenseReport {
                model: arch.to_string(),
                epsilon: acfg.epsilon,
                max_iterations: acfg.max_iterations,
                retrain_epochs: self.cfg.defense.retrain_epochs,
                augmentation: outcome.summary,
                retrain_log: outcome.retrain_log,
                before_clean,
                before_adversarial,
                after_clean,
                after_adversarial,
                after_replay,
            };
            write_json(&self.dir(&["defense", &format!("{arch}.json")]), &report)?;
        }
        Ok(())
    }

    pub fn eval(&self, model: Option<PathBuf>, dataset_dir: Option<PathBuf>) -> Result<()> {
        let dir = dataset_dir.unwrap_or_else(|| self.dir(&["data", "test"]));
        let ds = dataset::load(&dir).with_context(|| format!("loading dataset {}", dir.display()))?;
        let id = dir
            .file_name()
            .map_or_else(|| "dataset".to_string(), |n| n.to_string_lossy().into_owned());
        for det in self.detectors(model.clone())? {
            let arch = det.architecture();
            let mut report = defense::evaluate(&det, &ds, self.exec, &id, None)?;
            report.fooling_rate = stored_fooling_rate(&det, &ds, self.exec)?;
            let stem = format!("{arch}_{id}");
            write_json(&self.dir(&["eval", &format!("{stem}.json")]), &report)?;
            metrics::emit_reports(
                std::slice::from_ref(&report),
                &self.dir(&["eval", &format!("{stem}.csv")]),
            )?;
            let c = report.confusion;
            println!(
                "{arch} on {id}: accuracy {:.4}, tp {} tn {} fp {} fn {}{}",
                report.accuracy,
                c.tp,
                c.tn,
                c.fp,
                c.fn_,
                report
                    .fooling_rate
                    .map_or(String::new(), |f| format!(", fooling rate {:.2}%", 100.0 * f))
            );
        }
        Ok(())
    }

    pub fn sweep(&self, model: Option<PathBuf>) -> Result<()> {
        let test = self.load_split("test")?;
        let mut rows = Vec::new();
        for det in self.detectors(model)? {
            for &eps in &self.cfg.sweep_epsilons {
                let acfg = AttackConfig::new(eps, self.cfg.attack.max_iterations)?;
                let (adv, report): (Dataset, AttackReport) =
                    attack::build_adversarial_testset(&det, &test, &acfg, test.relay(), self.exec)?;
                let m = defense::evaluate(&det, &adv, self.exec, "sweep", Some(&acfg))?;
                let row = SweepRow {
                    model: det.architecture().to_string(),
                    epsilon: eps,
                    max_iterations: acfg.max_iterations,
                    n_fdias: report.n_fdias,
                    successes: report.successes,
                    fooling_rate: metrics::fooling_rate(&report.records, report.n_fdias)?,
                    fdia_recall: m.recall,
                };
                println!("{}: eps {eps}: fooling rate {:.2}%", row.model, row.fooling_rate);
                rows.push(row);
            }
        }
        let path = self.dir(&["sweep", "sweep.csv"]);
        write_text(&path, &metrics::sweep_to_csv(&rows)?)?;
        Ok(())
    }
}

fn arch_index(arch: Architecture) -> u64 {
    Architecture::ALL.iter().position(|&a| a == arch).unwrap_or(0) as u64
}

/// Fooling rate of `det` over a stored dataset: attack-crafted FDIA windows
/// that `det` calls a fault, over all FDIA windows. Stored adversarial
/// windows always trip. `None` when the dataset holds no crafted samples.
fn stored_fooling_rate(det: &Detector, ds: &Dataset, exec: Execution) -> Result<Option<f64>> {
    let crafted = |s: &dataset::LabeledSample| {
        s.label == LABEL_FDIA && matches!(s.origin, Origin::Adversarial { .. })
    };
    if !ds.samples().iter().any(crafted) {
        return Ok(None);
    }
    let preds = det.predict_all(ds, exec)?;
    let n_fdia = ds.class_counts().fdia;
    let hits = ds
        .samples()
        .iter()
        .zip(&preds)
        .filter(|(s, &p)| crafted(s) && p == LABEL_FAULT)
        .count();
    Ok(Some(hits as f64 / n_fdia as f64))
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{:.2}%", 100.0 * v))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.into(), source: e })?;
    }
    fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &metrics::to_json(value)?)
}
