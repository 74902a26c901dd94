//! Labeled fault / FDIA corpus: grid generation, stratified split, channel
//! standardization and the on-disk directory format.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};
use crate::relay::RelayContext;
use crate::waveform::{
    self, FaultParams, FaultType, FdiaParams, MeasurementWindow, ScenarioKind, ScenarioSpec,
    SystemModel, BASE_FREQUENCY, CHANNELS, SAMPLE_RATE, SNR_RANGE_DB, TRIGGER_INDEX, WINDOW_LEN,
};

pub const LABEL_FAULT: u8 = 0;
pub const LABEL_FDIA: u8 = 1;

pub const FORMAT_VERSION: u32 = 1;
pub const CHANNEL_NAMES: [&str; CHANNELS] = [
    "local_a", "local_b", "local_c", "remote_a", "remote_b", "remote_c",
];

const MANIFEST_FILE: &str = "manifest.json";
const SAMPLES_FILE: &str = "samples.f32";
const LABELS_FILE: &str = "labels.u8";
const PROVENANCE_FILE: &str = "provenance.jsonl";

const STREAM_FAULT: u64 = 0x10;
const STREAM_FDIA: u64 = 0x11;
const STREAM_ALPHA: u64 = 0x12;
const STREAM_SNR: u64 = 0x13;
const STREAM_SPLIT: u64 = 0x14;

/// Where a stored sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "lowercase")]
pub enum Origin {
    Generated,
    /// Crafted by the attack from another FDIA sample.
    Adversarial {
        epsilon: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub window: MeasurementWindow,
    pub label: u8,
    pub scenario: ScenarioSpec,
    pub origin: Origin,
}

impl LabeledSample {
    pub fn new(window: MeasurementWindow, scenario: ScenarioSpec, origin: Origin) -> Result<Self> {
        let label = label_for(&scenario)?;
        Ok(Self {
            window,
            label,
            scenario,
            origin,
        })
    }
}

/// Label implied by a scenario: 1 for FDIA, 0 for fault.
pub fn label_for(spec: &ScenarioSpec) -> Result<u8> {
    match spec.kind {
        ScenarioKind::Fault(_) => Ok(LABEL_FAULT),
        ScenarioKind::Fdia(_) => Ok(LABEL_FDIA),
        ScenarioKind::Normal => Err(Error::param(
            "normal-operation windows do not trip and carry no label",
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub fault: usize,
    pub fdia: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.fault + self.fdia
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub channels: Vec<String>,
    pub sample_rate: f64,
    pub base_frequency: f64,
    pub window_len: usize,
    pub trigger_index: usize,
    pub num_samples: usize,
    pub class_counts: ClassCounts,
    pub generator_seed: u64,
    pub relay: RelayContext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    seed: u64,
    relay: RelayContext,
}

impl Dataset {
    /// All windows must share the shape and timing of the first.
    pub fn new(samples: Vec<LabeledSample>, seed: u64, relay: RelayContext) -> Result<Self> {
        if let Some(first) = samples.first() {
            for (i, s) in samples.iter().enumerate() {
                let w = &s.window;
                if w.len() != first.window.len()
                    || w.sample_rate != first.window.sample_rate
                    || w.base_frequency != first.window.base_frequency
                    || w.trigger_index != first.window.trigger_index
                {
                    return Err(Error::shape(format!(
                        "sample {i} has a different window layout from sample 0"
                    )));
                }
                if s.label != label_for(&s.scenario)? {
                    return Err(Error::param(format!(
                        "sample {i}: label {} disagrees with its scenario",
                        s.label
                    )));
                }
            }
        }
        Ok(Self {
            samples,
            seed,
            relay,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn relay(&self) -> &RelayContext {
        &self.relay
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let fdia = self.samples.iter().filter(|s| s.label == LABEL_FDIA).count();
        ClassCounts {
            fault: self.samples.len() - fdia,
            fdia,
        }
    }

    pub fn manifest(&self) -> Manifest {
        let first = self.samples.first().map(|s| &s.window);
        Manifest {
            format_version: FORMAT_VERSION,
            channels: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
            sample_rate: first.map_or(SAMPLE_RATE, |w| w.sample_rate),
            base_frequency: first.map_or(BASE_FREQUENCY, |w| w.base_frequency),
            window_len: first.map_or(WINDOW_LEN, |w| w.len()),
            trigger_index: first.map_or(TRIGGER_INDEX, |w| w.trigger_index),
            num_samples: self.samples.len(),
            class_counts: self.class_counts(),
            generator_seed: self.seed,
            relay: self.relay,
        }
    }

    /// Re-runs the relay on every window; the first non-tripping sample is
    /// reported.
    pub fn verify_trips(&self, exec: Execution) -> Result<()> {
        let results = exec.map(&self.samples, |s| self.relay.trips(&s.window));
        for (s, r) in self.samples.iter().zip(results) {
            if !r? {
                return Err(Error::Generation {
                    scenario: s.scenario.label(),
                    reason: "window does not trip the relay".into(),
                });
            }
        }
        Ok(())
    }
}

/// Generation grid. Faults span the Cartesian product of their five axes,
/// FDIAs span (alpha draw x onset x load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub fault_types: Vec<FaultType>,
    pub impedances_ohm: Vec<f64>,
    pub locations: Vec<f64>,
    pub inception_angles_ms: Vec<u32>,
    pub fault_loads_pu: Vec<f64>,
    pub alpha_draws: usize,
    pub fdia_onsets: Vec<usize>,
    pub fdia_loads_pu: Vec<f64>,
    /// Per-sample SNR is uniform on this range; `None` generates clean windows.
    pub snr_db_range: Option<(f64, f64)>,
    pub system: SystemModel,
    pub relay: RelayContext,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            fault_types: FaultType::ALL.to_vec(),
            impedances_ohm: vec![0.0, 25.0, 50.0, 75.0, 100.0],
            locations: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            inception_angles_ms: vec![0, 4, 8, 12],
            fault_loads_pu: vec![0.5, 1.0],
            alpha_draws: 500,
            fdia_onsets: vec![33, 35],
            fdia_loads_pu: vec![0.5, 1.0],
            snr_db_range: Some(SNR_RANGE_DB),
            system: SystemModel::default(),
            relay: RelayContext::default(),
            execution: Execution::default(),
        }
    }
}

impl GenerationConfig {
    pub fn fault_count(&self) -> usize {
        self.fault_types.len()
            * self.impedances_ohm.len()
            * self.locations.len()
            * self.inception_angles_ms.len()
            * self.fault_loads_pu.len()
    }

    pub fn fdia_count(&self) -> usize {
        self.alpha_draws * self.fdia_onsets.len() * self.fdia_loads_pu.len()
    }

    /// Checks every grid point against the scenario preconditions without
    /// synthesizing anything.
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("fault_types", self.fault_types.len()),
            ("impedances_ohm", self.impedances_ohm.len()),
            ("locations", self.locations.len()),
            ("inception_angles_ms", self.inception_angles_ms.len()),
            ("fault_loads_pu", self.fault_loads_pu.len()),
            ("alpha_draws", self.alpha_draws),
            ("fdia_onsets", self.fdia_onsets.len()),
            ("fdia_loads_pu", self.fdia_loads_pu.len()),
        ];
        for (name, n) in axes {
            if n == 0 {
                return Err(Error::Config(format!("generation grid axis {name} is empty")));
            }
        }
        self.system.validate()?;
        self.relay.validate()?;
        if let Some((lo, hi)) = self.snr_db_range {
            let (min, max) = SNR_RANGE_DB;
            if !(min <= lo && lo <= hi && hi <= max) {
                return Err(Error::Config(format!(
                    "snr_db_range ({lo}, {hi}) must lie within [{min}, {max}]"
                )));
            }
        }
        for spec in self.fault_specs(0).iter().chain(self.fdia_templates(0).iter()) {
            spec.validate()
                .map_err(|e| Error::Config(format!("{}: {e}", spec.label())))?;
        }
        Ok(())
    }

    fn fault_specs(&self, seed: u64) -> Vec<ScenarioSpec> {
        let mut out = Vec::with_capacity(self.fault_count());
        for &fault_type in &self.fault_types {
            for &impedance_ohm in &self.impedances_ohm {
                for &location_frac in &self.locations {
                    for &inception_angle_ms in &self.inception_angles_ms {
                        for &load in &self.fault_loads_pu {
                            let k = out.len() as u64;
                            let params = FaultParams {
                                fault_type,
                                location_frac,
                                impedance_ohm,
                                inception_angle_ms,
                            };
                            let s = derive_seed(seed, STREAM_FAULT, k);
                            out.push(ScenarioSpec::fault(params, load, None, s));
                        }
                    }
                }
            }
        }
        out
    }

    /// FDIA scenarios with a placeholder multiplier of -1.
    fn fdia_templates(&self, seed: u64) -> Vec<ScenarioSpec> {
        let mut out = Vec::with_capacity(self.fdia_count());
        for _draw in 0..self.alpha_draws {
            for &onset_index in &self.fdia_onsets {
                for &load in &self.fdia_loads_pu {
                    let k = out.len() as u64;
                    let params = FdiaParams {
                        alpha: num_complex::Complex64::new(-1.0, 0.0),
                        onset_index,
                    };
                    let s = derive_seed(seed, STREAM_FDIA, k);
                    out.push(ScenarioSpec::fdia(params, load, None, s));
                }
            }
        }
        out
    }
}

/// Enumerates and synthesizes the full grid. Samples are ordered faults first,
/// then FDIAs, each in grid order. Windows are stored at `f32` precision and
/// every one is checked against the relay after rounding.
pub fn generate_dataset(cfg: &GenerationConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut specs = cfg.fault_specs(seed);
    let mut fdia = cfg.fdia_templates(seed);

    // One alpha per (draw, load) pair, shared by every onset of that pair.
    let per_draw = cfg.fdia_onsets.len() * cfg.fdia_loads_pu.len();
    let n_loads = cfg.fdia_loads_pu.len();
    let alphas = cfg.execution.map_range(cfg.alpha_draws * n_loads, |k| {
        let (draw, l) = (k / n_loads, k % n_loads);
        let template = &fdia[draw * per_draw + l];
        let (_, remote) = waveform::steady_phasors(template, &cfg.system);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_ALPHA, k as u64));
        waveform::sample_fdia_alpha(&cfg.relay.settings, &remote, &mut rng)
    });
    for (i, spec) in fdia.iter_mut().enumerate() {
        let (draw, l) = (i / per_draw, i % n_loads);
        let alpha = *alphas[draw * n_loads + l].as_ref().map_err(|e| Error::Generation {
            scenario: spec.label(),
            reason: e.to_string(),
        })?;
        if let ScenarioKind::Fdia(p) = &mut spec.kind {
            p.alpha = alpha;
        }
    }
    specs.extend(fdia);

    if let Some((lo, hi)) = cfg.snr_db_range {
        for (k, spec) in specs.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SNR, k as u64));
            spec.snr_db = Some(if lo == hi { lo } else { rng.random_range(lo..=hi) });
        }
    }

    let built = cfg.execution.map(&specs, |spec| build_sample(spec, cfg));
    let samples = built.into_iter().collect::<Result<Vec<_>>>()?;
    let ds = Dataset::new(samples, seed, cfg.relay)?;
    log::info!(
        "generated {} samples ({} fault, {} fdia)",
        ds.len(),
        ds.class_counts().fault,
        ds.class_counts().fdia
    );
    Ok(ds)
}

fn build_sample(spec: &ScenarioSpec, cfg: &GenerationConfig) -> Result<LabeledSample> {
    let gen_err = |reason: String| Error::Generation {
        scenario: spec.label(),
        reason,
    };
    let window = waveform::synthesize(spec, &cfg.system)
        .map_err(|e| gen_err(e.to_string()))?
        .quantized();
    if !cfg.relay.trips(&window).map_err(|e| gen_err(e.to_string()))? {
        return Err(gen_err("window does not trip the relay".into()));
    }
    LabeledSample::new(window, *spec, Origin::Generated)
}

/// Stratified split. Each class contributes `round(n_c * test_fraction)`
/// samples to the test side, clamped so both sides keep at least one. Both
/// outputs preserve the input order.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut is_test = vec![false; ds.len()];
    for label in [LABEL_FAULT, LABEL_FDIA] {
        let mut idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.samples[i].label == label)
            .collect();
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {label} has {} samples, need at least 2",
                idx.len()
            )));
        }
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SPLIT, label as u64));
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in ds.samples.iter().zip(is_test) {
        if t { test.push(s.clone()) } else { train.push(s.clone()) }
    }
    Ok((
        Dataset::new(train, ds.seed, ds.relay)?,
        Dataset::new(test, ds.seed, ds.relay)?,
    ))
}

/// Per-channel z-score standardization fitted on training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let first = train
            .samples
            .first()
            .ok_or_else(|| Error::Empty("cannot fit a scaler on an empty dataset".into()))?;
        let t = first.window.len();
        let n = (train.len() * t) as f64;
        let mut mean = vec![0.0; CHANNELS];
        for s in &train.samples {
            for (c, m) in mean.iter_mut().enumerate() {
                *m += s.window.row(c).iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; CHANNELS];
        for s in &train.samples {
            for (c, v) in var.iter_mut().enumerate() {
                *v += s.window.row(c).iter().map(|x| (x - mean[c]).powi(2)).sum::<f64>();
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        Self::from_parts(mean, std)
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != CHANNELS || std.len() != CHANNELS {
            return Err(Error::Scaler(format!("scaler needs {CHANNELS} channels")));
        }
        for (c, s) in std.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) || !mean[c].is_finite() {
                return Err(Error::Scaler(format!(
                    "channel {} has degenerate statistics (mean {}, std {s})",
                    CHANNEL_NAMES[c], mean[c]
                )));
            }
        }
        Ok(Self { mean, std })
    }

    /// Physical window (kA) to model-space tensor `[6, T]`.
    pub fn apply(&self, window: &MeasurementWindow) -> Tensor {
        let t = window.len();
        let mut data = Vec::with_capacity(CHANNELS * t);
        for c in 0..CHANNELS {
            data.extend(window.row(c).iter().map(|x| (x - self.mean[c]) / self.std[c]));
        }
        Tensor::new(vec![CHANNELS, t], data).expect("shape matches data")
    }

    /// Model-space tensor back to kA, with the timing of `like`.
    pub fn invert(&self, x: &Tensor, like: &MeasurementWindow) -> Result<MeasurementWindow> {
        if x.shape() != [CHANNELS, like.len()] {
            return Err(Error::shape(format!(
                "tensor {:?} does not match window [{CHANNELS}, {}]",
                x.shape(),
                like.len()
            )));
        }
        let t = like.len();
        let samples = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i / t] + self.mean[i / t])
            .collect();
        MeasurementWindow::new(samples, like.sample_rate, like.base_frequency, like.trigger_index)
    }

    pub fn apply_all(&self, ds: &Dataset) -> Vec<Tensor> {
        ds.samples.iter().map(|s| self.apply(&s.window)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    label: u8,
    scenario: ScenarioSpec,
    #[serde(flatten)]
    origin: Origin,
}

/// Writes the dataset directory. Every sample must already be representable
/// in `f32`, so that loading reproduces it exactly.
pub fn save(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = serde_json::to_string_pretty(&ds.manifest())
        .map_err(|e| Error::format(dir.join(MANIFEST_FILE), e.to_string()))?;
    write_file(&dir.join(MANIFEST_FILE), (manifest + "\n").as_bytes())?;

    let mut raw = Vec::with_capacity(ds.len() * CHANNELS * WINDOW_LEN * 4);
    for (i, s) in ds.samples.iter().enumerate() {
        for &v in s.window.samples() {
            let q = v as f32;
            if q as f64 != v {
                return Err(Error::format(
                    dir.join(SAMPLES_FILE),
                    format!("sample {i} holds a value not representable as f32: {v}"),
                ));
            }
            raw.extend_from_slice(&q.to_le_bytes());
        }
    }
    write_file(&dir.join(SAMPLES_FILE), &raw)?;
    write_file(&dir.join(LABELS_FILE), &ds.labels())?;

    let path = dir.join(PROVENANCE_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for s in &ds.samples {
        let line = ProvenanceLine {
            label: s.label,
            scenario: s.scenario,
            origin: s.origin,
        };
        let json = serde_json::to_string(&line).map_err(|e| Error::format(&path, e.to_string()))?;
        writeln!(w, "{json}").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a dataset directory, checking version, sizes, label consistency and
/// that every window still trips the relay recorded in the manifest.
pub fn load(dir: &Path) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = String::from_utf8(read_file(&mpath)?)
        .map_err(|e| Error::format(&mpath, e.to_string()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &mpath,
            format!(
                "format version {} unsupported (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }
    if manifest.channels.len() != CHANNELS {
        return Err(Error::format(&mpath, "channel layout mismatch"));
    }
    let n = manifest.num_samples;
    let t = manifest.window_len;
    if manifest.class_counts.total() != n {
        return Err(Error::format(&mpath, "class counts do not sum to num_samples"));
    }

    let spath = dir.join(SAMPLES_FILE);
    let raw = read_file(&spath)?;
    let per = CHANNELS * t * 4;
    if raw.len() != n * per {
        return Err(Error::format(
            &spath,
            format!(
                "expected {} bytes for {n} windows, found {}",
                n * per,
                raw.len()
            ),
        ));
    }
    let lpath = dir.join(LABELS_FILE);
    let labels = read_file(&lpath)?;
    if labels.len() != n {
        return Err(Error::format(
            &lpath,
            format!("expected {n} labels, found {}", labels.len()),
        ));
    }

    let ppath = dir.join(PROVENANCE_FILE);
    let file = fs::File::open(&ppath).map_err(|e| Error::io(&ppath, e))?;
    let mut prov = Vec::with_capacity(n);
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&ppath, e))?;
        if line.is_empty() {
            continue;
        }
        let p: ProvenanceLine =
            serde_json::from_str(&line).map_err(|e| Error::format(&ppath, e.to_string()))?;
        prov.push(p);
    }
    if prov.len() != n {
        return Err(Error::format(
            &ppath,
            format!("expected {n} provenance records, found {}", prov.len()),
        ));
    }

    let mut samples = Vec::with_capacity(n);
    for (i, (chunk, p)) in raw.chunks_exact(per).zip(prov).enumerate() {
        let values = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let window = MeasurementWindow::new(
            values,
            manifest.sample_rate,
            manifest.base_frequency,
            manifest.trigger_index,
        )
        .map_err(|e| Error::format(&spath, format!("sample {i}: {e}")))?;
        if labels[i] != p.label || label_for(&p.scenario)? != p.label {
            return Err(Error::format(
                &lpath,
                format!("sample {i}: label disagrees with provenance"),
            ));
        }
        samples.push(LabeledSample {
            window,
            label: p.label,
            scenario: p.scenario,
            origin: p.origin,
        });
    }
    let ds = Dataset::new(samples, manifest.generator_seed, manifest.relay)?;
    if ds.class_counts() != manifest.class_counts {
        return Err(Error::format(&mpath, "class counts disagree with labels"));
    }
    ds.verify_trips(Execution::default())?;
    Ok(ds)
}

/// One row per sample: `label` followed by the flattened channels
/// (`local_a_t0 .. remote_c_t{T-1}`).
pub fn export_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let t = ds.samples.first().map_or(WINDOW_LEN, |s| s.window.len());
    let mut header = String::from("label");
    for name in CHANNEL_NAMES {
        for k in 0..t {
            header.push_str(&format!(",{name}_t{k}"));
        }
    }
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for s in &ds.samples {
        let mut row = s.label.to_string();
        for v in s.window.samples() {
            row.push(',');
            row.push_str(&(*v as f32).to_string());
        }
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}
