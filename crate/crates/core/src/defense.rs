//! Adversarial training: attack the correctly detected training FDIAs at
//! several epsilons, append the successes, and keep training.

use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackConfig};
use crate::autodiff::{EpochLog, TrainConfig};
use crate::dataset::{Dataset, Origin, LABEL_FDIA};
use crate::detector::{self, Detector};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};
use crate::metrics::{classification_metrics, fooling_rate, MetricsReport, ReportMeta};
use crate::relay::RelayContext;

const STREAM_RETRAIN: u64 = 0xDEF;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub retrain_epochs: usize,
    /// Crafting schedule; successes at every epsilon are pooled.
    pub epsilons: Vec<f64>,
    pub max_iterations: usize,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            retrain_epochs: 10,
            epsilons: vec![0.1, 0.3, 0.5],
            max_iterations: 5,
        }
    }
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retrain_epochs == 0 {
            return Err(Error::Config("retrain_epochs must be >= 1".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Config("defense needs at least one epsilon".into()));
        }
        for &e in &self.epsilons {
            AttackConfig::new(e, self.max_iterations)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCount {
    pub epsilon: f64,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSummary {
    pub original_samples: usize,
    /// Training FDIAs the detector classified correctly, i.e. attack targets.
    pub attempted: usize,
    pub per_epsilon: Vec<EpsilonCount>,
    pub added: usize,
}

/// `train` followed by every successful adversarial FDIA, in epsilon order
/// then sample order.
pub fn augment(
    det: &Detector,
    train: &Dataset,
    cfg: &DefenseConfig,
    relay: &RelayContext,
    exec: Execution,
) -> Result<(Dataset, AugmentationSummary)> {
    cfg.validate()?;
    let preds = det.predict_all(train, exec)?;
    let targets: Vec<usize> = (0..train.len())
        .filter(|&i| train.samples()[i].label == LABEL_FDIA && preds[i] == LABEL_FDIA)
        .collect();
    let mut samples = train.samples().to_vec();
    let mut per_epsilon = Vec::with_capacity(cfg.epsilons.len());
    for &epsilon in &cfg.epsilons {
        let acfg = AttackConfig::new(epsilon, cfg.max_iterations)?;
        let outcomes = exec.map(&targets, |&i| {
            attack::generate_adversarial(det, &train.samples()[i], &acfg, relay)
        });
        let mut successes = 0;
        for (&i, o) in targets.iter().zip(outcomes) {
            let o = o?;
            if o.success {
                let mut s = train.samples()[i].clone();
                s.window = o.adversarial_window;
                s.origin = Origin::Adversarial {
                    epsilon,
                    iterations: o.iterations_used,
                };
                samples.push(s);
                successes += 1;
            }
        }
        per_epsilon.push(EpsilonCount { epsilon, successes });
    }
    let summary = AugmentationSummary {
        original_samples: train.len(),
        attempted: targets.len(),
        added: samples.len() - train.len(),
        per_epsilon,
    };
    if summary.added == 0 {
        log::warn!("no successful adversarial samples; retraining on the original data");
    }
    Ok((Dataset::new(samples, train.seed(), *train.relay())?, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseOutcome {
    pub summary: AugmentationSummary,
    pub retrain_log: Vec<EpochLog>,
}

/// Hardens a copy of `det`: augments `train` and continues training from the
/// current parameters for `retrain_epochs` with a fresh optimizer state.
pub fn adversarial_training(
    det: &Detector,
    train: &Dataset,
    cfg: &DefenseConfig,
    train_cfg: &TrainConfig,
    relay: &RelayContext,
) -> Result<(Detector, Dataset, DefenseOutcome)> {
    let (augmented, summary) = augment(det, train, cfg, relay, train_cfg.execution)?;
    let retrain_cfg = TrainConfig {
        epochs: cfg.retrain_epochs,
        seed: derive_seed(train_cfg.seed, STREAM_RETRAIN, 0),
        ..*train_cfg
    };
    let mut robust = det.clone();
    let retrain_log = detector::continue_training(&mut robust, &augmented, &retrain_cfg)?;
    Ok((
        robust,
        augmented,
        DefenseOutcome {
            summary,
            retrain_log,
        },
    ))
}

/// Adversarial-set report for `det`: attacks `test` afresh against `det` and
/// scores the result, including the fooling rate.
pub fn adversarial_report(
    det: &Detector,
    test: &Dataset,
    cfg: &AttackConfig,
    relay: &RelayContext,
    exec: Execution,
    dataset_id: &str,
) -> Result<(Dataset, MetricsReport)> {
    let (adv, report) = attack::build_adversarial_testset(det, test, cfg, relay, exec)?;
    let mut m = evaluate(det, &adv, exec, dataset_id, Some(cfg))?;
    m.fooling_rate = Some(fooling_rate(&report.records, report.n_fdias)? / 100.0);
    Ok((adv, m))
}

pub fn evaluate(
    det: &Detector,
    ds: &Dataset,
    exec: Execution,
    dataset_id: &str,
    attack: Option<&AttackConfig>,
) -> Result<MetricsReport> {
    if ds.is_empty() {
        return Err(Error::Empty(format!("dataset {dataset_id}")));
    }
    let preds = det.predict_all(ds, exec)?;
    classification_metrics(
        &preds,
        &ds.labels(),
        ReportMeta {
            model: det.architecture().to_string(),
            dataset: dataset_id.into(),
            epsilon: attack.map(|a| a.epsilon),
            max_iterations: attack.map(|a| a.max_iterations),
        },
    )
}

/// Clean-set and adversarial-set metrics of the same model.
pub fn evaluate_defense(
    robust: &Detector,
    clean_test: &Dataset,
    adv_test: &Dataset,
    exec: Execution,
) -> Result<(MetricsReport, MetricsReport)> {
    Ok((
        evaluate(robust, clean_test, exec, "clean_test", None)?,
        evaluate(robust, adv_test, exec, "adversarial_test", None)?,
    ))
}
