//! Mini-batch training with SGD or Adam.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Runtime choice, not part of the stored configuration.
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, t: i32, m: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, model: &Model) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
                Optimizer::Adam {
                    lr,
                    t: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= *lr * d;
                    }
                }
            }
            Optimizer::Adam { lr, t, m, v } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (mk, vk) = (&mut m[k], &mut v[k]);
                    for (j, (w, d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        mk[j] = ADAM_BETA1 * mk[j] + (1.0 - ADAM_BETA1) * d;
                        vk[j] = ADAM_BETA2 * vk[j] + (1.0 - ADAM_BETA2) * d * d;
                        let mh = mk[j] / c1;
                        let vh = vk[j] / c2;
                        *w -= *lr * mh / (vh.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Trains `model` in place on `(xs, ys)` and returns the per-epoch log.
///
/// Per-sample gradients inside a batch may be computed in parallel, but are
/// always summed in batch order, so results are bit-identical across
/// execution modes and thread counts.
pub fn train(model: &mut Model, xs: &[Tensor], ys: &[u8], cfg: &TrainConfig) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::shape(format!(
            "{} inputs but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    if xs.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, model);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x7EA1, epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let frozen = &*model;
            let results = cfg
                .execution
                .map(batch, |&i| frozen.backward(&xs[i], ys[i]));
            let mut acc: Option<Vec<Tensor>> = None;
            for (r, &i) in results.into_iter().zip(batch) {
                let g = r?;
                if !g.loss.is_finite() {
                    return Err(Error::Numeric {
                        layer: "loss".into(),
                        detail: format!("epoch {epoch}: non-finite loss on sample {i}"),
                    });
                }
                loss_sum += g.loss;
                correct += usize::from(u8::from(g.prob >= 0.5) == ys[i]);
                match acc.as_mut() {
                    None => acc = Some(g.params),
                    Some(a) => a.iter_mut().zip(&g.params).for_each(|(a, b)| a.add_assign(b)),
                }
            }
            let mut grads = acc.expect("non-empty batch");
            let k = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(k));
            opt.step(model.params_mut(), &grads);
        }
        let log = EpochLog {
            epoch: epoch + 1,
            loss: loss_sum / xs.len() as f64,
            accuracy: correct as f64 / xs.len() as f64,
        };
        info!(
            "{} epoch {}: loss {:.5} acc {:.4}",
            model.architecture(),
            log.epoch,
            log.loss,
            log.accuracy
        );
        logs.push(log);
    }
    Ok(logs)
}
