//! Masked, amplitude-scaled, clipped, iterated FGSM against a detector.
//! A candidate only counts when the detector calls it a fault and the relay
//! still trips on it.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Model, Tensor};
use crate::dataset::{Dataset, LabeledSample, Origin, LABEL_FAULT, LABEL_FDIA};
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::relay::RelayContext;
use crate::waveform::{MeasurementWindow, CHANNELS, REMOTE_ROWS};

/// Only the remote-end rows are reachable by the attacker.
pub const REMOTE_MASK: [bool; CHANNELS] = [false, false, false, true, true, true];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub target_label: u8,
    pub channel_mask: [bool; CHANNELS],
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            max_iterations: 5,
            target_label: LABEL_FAULT,
            channel_mask: REMOTE_MASK,
        }
    }
}

impl AttackConfig {
    pub fn new(epsilon: f64, max_iterations: usize) -> Result<Self> {
        let cfg = Self {
            epsilon,
            max_iterations,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if self.target_label != LABEL_FAULT {
            return Err(Error::Config("the attack target label is fixed to 0 (fault)".into()));
        }
        if self.channel_mask != REMOTE_MASK {
            return Err(Error::Config("the channel mask is fixed to the remote rows".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub success: bool,
    /// The adversarial window on success, the source window otherwise.
    pub adversarial_window: MeasurementWindow,
    pub iterations_used: usize,
    /// Flags of the last evaluated candidate.
    pub fooled_model: bool,
    pub relay_tripped: bool,
    /// Largest absolute perturbation applied, kA; 0 when nothing changed.
    pub linf_ka: f64,
}

/// Largest absolute element of `x`.
pub fn amplitude_factor(x: &Tensor) -> f64 {
    x.max_abs()
}

/// One FGSM step from `x`, with amplitude and clip bounds taken from `x`.
pub fn fgsm_step(model: &Model, x: &Tensor, y: u8, cfg: &AttackConfig) -> Result<Tensor> {
    cfg.validate()?;
    let bounds = Bounds::of(x);
    step_from(model, x, y, cfg, &bounds)
}

struct Bounds {
    a: f64,
    lo: f64,
    hi: f64,
}

impl Bounds {
    fn of(x: &Tensor) -> Self {
        Self {
            a: amplitude_factor(x),
            lo: x.min(),
            hi: x.max(),
        }
    }
}

fn step_from(model: &Model, cur: &Tensor, y: u8, cfg: &AttackConfig, b: &Bounds) -> Result<Tensor> {
    let grad = model.input_gradient(cur, y)?;
    if !grad.is_finite() {
        return Err(Error::Numeric {
            layer: "input".into(),
            detail: "non-finite input gradient".into(),
        });
    }
    let t = cur.shape()[1];
    let mut next = cur.clone();
    let scale = cfg.epsilon * b.a;
    for (c, masked) in cfg.channel_mask.iter().enumerate() {
        if !masked {
            continue;
        }
        for k in c * t..(c + 1) * t {
            let g = grad.data()[k];
            let s = if g > 0.0 { 1.0 } else if g < 0.0 { -1.0 } else { 0.0 };
            next.data_mut()[k] = (cur.data()[k] + scale * s).clamp(b.lo, b.hi);
        }
    }
    Ok(next)
}

/// Physical window for a model-space candidate: local rows are copied from
/// `source`, remote rows are inverse-scaled and rounded to `f32`.
fn physical(det: &Detector, x: &Tensor, source: &MeasurementWindow) -> Result<MeasurementWindow> {
    let inv = det.scaler.invert(x, source)?;
    let mut w = source.clone();
    for c in REMOTE_ROWS {
        for (dst, v) in w.row_mut(c).iter_mut().zip(inv.row(c)) {
            *dst = *v as f32 as f64;
        }
    }
    Ok(w)
}

fn linf(a: &MeasurementWindow, b: &MeasurementWindow) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs the attack on one FDIA sample.
pub fn generate_adversarial(
    det: &Detector,
    sample: &LabeledSample,
    cfg: &AttackConfig,
    relay: &RelayContext,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    relay.validate()?;
    if sample.label != LABEL_FDIA {
        return Err(Error::param("only FDIA samples are attacked"));
    }
    let source = &sample.window;
    let x = det.input(source);
    let model = &det.model;
    let failure = |iterations_used, fooled_model, relay_tripped| AttackOutcome {
        success: false,
        adversarial_window: source.clone(),
        iterations_used,
        fooled_model,
        relay_tripped,
        linf_ka: 0.0,
    };

    if model.predict(&x)? == cfg.target_label {
        let tripped = relay.trips(source)?;
        return Ok(AttackOutcome {
            success: tripped,
            ..failure(0, true, tripped)
        });
    }
    let bounds = Bounds::of(&x);
    if bounds.a == 0.0 {
        return Ok(failure(0, false, relay.trips(source)?));
    }

    let mut cur = x;
    let (mut fooled, mut tripped) = (false, false);
    for it in 1..=cfg.max_iterations {
        cur = step_from(model, &cur, LABEL_FDIA, cfg, &bounds)?;
        let w = physical(det, &cur, source)?;
        fooled = det.predict(&w)? == cfg.target_label;
        tripped = relay.trips(&w)?;
        if fooled && tripped {
            return Ok(AttackOutcome {
                success: true,
                linf_ka: linf(&w, source),
                adversarial_window: w,
                iterations_used: it,
                fooled_model: true,
                relay_tripped: true,
            });
        }
    }
    Ok(failure(cfg.max_iterations, fooled, tripped))
}

/// Per-sample line of an attack report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    /// Index of the sample in the attacked dataset.
    pub index: usize,
    pub success: bool,
    pub iterations_used: usize,
    pub fooled_model: bool,
    pub relay_tripped: bool,
    pub linf_ka: f64,
}

impl AttackRecord {
    pub fn from_outcome(index: usize, o: &AttackOutcome) -> Self {
        Self {
            index,
            success: o.success,
            iterations_used: o.iterations_used,
            fooled_model: o.fooled_model,
            relay_tripped: o.relay_tripped,
            linf_ka: o.linf_ka,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub model: String,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub n_fdias: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub records: Vec<AttackRecord>,
}

/// Attacks every FDIA sample in parallel. Returns the sequence of outcomes in
/// dataset order alongside the indices attacked.
pub fn attack_all(
    det: &Detector,
    ds: &Dataset,
    cfg: &AttackConfig,
    relay: &RelayContext,
    exec: Execution,
) -> Result<Vec<(usize, AttackOutcome)>> {
    let idx: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.samples()[i].label == LABEL_FDIA)
        .collect();
    let outcomes = exec.map(&idx, |&i| generate_adversarial(det, &ds.samples()[i], cfg, relay));
    idx.into_iter()
        .zip(outcomes)
        .map(|(i, o)| o.map(|o| (i, o)))
        .collect()
}

/// Copy of `test` in which each FDIA window is replaced by its successful
/// adversarial version. Fault samples and failed attacks are copied verbatim.
pub fn build_adversarial_testset(
    det: &Detector,
    test: &Dataset,
    cfg: &AttackConfig,
    relay: &RelayContext,
    exec: Execution,
) -> Result<(Dataset, AttackReport)> {
    let counts = test.class_counts();
    if counts.fault == 0 || counts.fdia == 0 {
        return Err(Error::param("adversarial test set needs both classes"));
    }
    let outcomes = attack_all(det, test, cfg, relay, exec)?;
    let mut samples = test.samples().to_vec();
    let mut records = Vec::with_capacity(outcomes.len());
    for (i, o) in outcomes {
        records.push(AttackRecord::from_outcome(i, &o));
        if o.success {
            samples[i].window = o.adversarial_window;
            samples[i].origin = Origin::Adversarial {
                epsilon: cfg.epsilon,
                iterations: o.iterations_used,
            };
        }
    }
    let successes = records.iter().filter(|r| r.success).count();
    let report = AttackReport {
        model: det.architecture().to_string(),
        epsilon: cfg.epsilon,
        max_iterations: cfg.max_iterations,
        n_fdias: records.len(),
        successes,
        success_fraction: successes as f64 / records.len() as f64,
        records,
    };
    Ok((Dataset::new(samples, test.seed(), *test.relay())?, report))
}
