//! Analytic three-phase current synthesizer for both ends of the protected
//! line: steady load flow, internal faults, and multiplicative FDIAs on the
//! remote stream.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::phasor;
use crate::relay::{characteristic, RelaySettings};

pub const CHANNELS: usize = 6;
pub const SAMPLE_RATE: f64 = 1000.0;
pub const BASE_FREQUENCY: f64 = 60.0;
/// Four cycles at 1 kHz / 60 Hz, rounded down.
pub const WINDOW_LEN: usize = 66;
/// Event onset, two cycles into the window.
pub const TRIGGER_INDEX: usize = 33;

pub const LOCAL_ROWS: Range<usize> = 0..3;
pub const REMOTE_ROWS: Range<usize> = 3..6;

pub const SNR_RANGE_DB: (f64, f64) = (35.0, 60.0);
pub const LOAD_RANGE_PU: (f64, f64) = (0.2, 1.0);

/// Upper bound on `|alpha|` when sampling FDIA multipliers.
pub const ALPHA_MAX_MAGNITUDE: f64 = 5.0;
pub const ALPHA_MAX_DRAWS: usize = 10_000;
/// Accepted multipliers must clear the characteristic by this factor so that
/// measurement noise cannot pull a generated attack back under the threshold.
pub const FDIA_TRIP_MARGIN: f64 = 1.10;

const STREAM_POINT_ON_WAVE: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Per-phase phasors (kA RMS) for phases A, B, C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorSet {
    pub phases: [Complex64; 3],
}

impl PhasorSet {
    pub fn new(phases: [Complex64; 3]) -> Result<Self> {
        if phases.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::param("phasor set contains non-finite values"));
        }
        Ok(Self { phases })
    }

    pub fn magnitude(&self, phase: usize) -> f64 {
        self.phases[phase].norm()
    }

    pub fn angle(&self, phase: usize) -> f64 {
        self.phases[phase].arg()
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        Self {
            phases: self.phases.map(|p| p * k),
        }
    }
}

/// Six-channel current record, row-major `[CHANNELS, len]` in kA.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementWindow {
    samples: Vec<f64>,
    len: usize,
    pub sample_rate: f64,
    pub base_frequency: f64,
    pub trigger_index: usize,
}

impl MeasurementWindow {
    /// Window with the standard 1 kHz / 60 Hz timing.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE, BASE_FREQUENCY, TRIGGER_INDEX)
    }

    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        base_frequency: f64,
        trigger_index: usize,
    ) -> Result<Self> {
        if samples.is_empty() || samples.len() % CHANNELS != 0 {
            return Err(Error::shape(format!(
                "{} samples is not a whole number of {CHANNELS}-channel columns",
                samples.len()
            )));
        }
        let w = Self {
            len: samples.len() / CHANNELS,
            samples,
            sample_rate,
            base_frequency,
            trigger_index,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.len * CHANNELS || self.len == 0 {
            return Err(Error::shape("window storage does not match its length"));
        }
        if !(self.sample_rate > 0.0 && self.base_frequency > 0.0) {
            return Err(Error::shape("window timing must be positive"));
        }
        if self.trigger_index >= self.len {
            return Err(Error::shape(format!(
                "trigger index {} outside window of {}",
                self.trigger_index, self.len
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::shape(format!(
                "non-finite sample at channel {}, index {}",
                i / self.len,
                i % self.len
            )));
        }
        Ok(())
    }

    /// Number of time samples.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.samples[channel * self.len..(channel + 1) * self.len]
    }

    pub fn row_mut(&mut self, channel: usize) -> &mut [f64] {
        let len = self.len;
        &mut self.samples[channel * len..(channel + 1) * len]
    }

    pub fn samples_per_cycle(&self) -> f64 {
        self.sample_rate / self.base_frequency
    }

    pub fn angular_step(&self) -> f64 {
        phasor::angular_step(self.base_frequency, self.sample_rate)
    }

    /// Same window with every sample rounded through `f32`, the on-disk
    /// precision.
    pub fn quantized(&self) -> Self {
        let mut w = self.clone();
        w.samples.iter_mut().for_each(|v| *v = *v as f32 as f64);
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultType {
    AG,
    BG,
    CG,
    AB,
    BC,
    CA,
    ABG,
    BCG,
    CAG,
    ABC,
    ABCG,
}

impl FaultType {
    pub const ALL: [FaultType; 11] = [
        FaultType::AG,
        FaultType::BG,
        FaultType::CG,
        FaultType::AB,
        FaultType::BC,
        FaultType::CA,
        FaultType::ABG,
        FaultType::BCG,
        FaultType::CAG,
        FaultType::ABC,
        FaultType::ABCG,
    ];

    /// Faulted phases as indices into A, B, C.
    pub fn phases(self) -> &'static [usize] {
        use FaultType::*;
        match self {
            AG => &[0],
            BG => &[1],
            CG => &[2],
            AB | ABG => &[0, 1],
            BC | BCG => &[1, 2],
            CA | CAG => &[2, 0],
            ABC | ABCG => &[0, 1, 2],
        }
    }

    /// Phase-to-phase fault with no ground return.
    pub fn is_line_to_line(self) -> bool {
        matches!(self, FaultType::AB | FaultType::BC | FaultType::CA)
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for FaultType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FaultType::ALL
            .iter()
            .copied()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown fault type {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultParams {
    pub fault_type: FaultType,
    /// Fault position measured from the local end, as a fraction of the line.
    pub location_frac: f64,
    pub impedance_ohm: f64,
    /// Point on wave of the inception, in ms after the phase-A voltage peak.
    pub inception_angle_ms: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdiaParams {
    pub alpha: Complex64,
    pub onset_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioKind {
    Normal,
    Fault(FaultParams),
    Fdia(FdiaParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    pub load_pu: f64,
    /// `None` disables measurement noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn normal(load_pu: f64, snr_db: Option<f64>, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Normal,
            load_pu,
            snr_db,
            seed,
        }
    }

    pub fn fault(params: FaultParams, load_pu: f64, snr_db: Option<f64>, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Fault(params),
            load_pu,
            snr_db,
            seed,
        }
    }

    pub fn fdia(params: FdiaParams, load_pu: f64, snr_db: Option<f64>, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Fdia(params),
            load_pu,
            snr_db,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = LOAD_RANGE_PU;
        if !(self.load_pu >= lo && self.load_pu <= hi) {
            return Err(Error::param(format!(
                "load_pu {} outside [{lo}, {hi}]",
                self.load_pu
            )));
        }
        if let Some(snr) = self.snr_db {
            check_snr(snr)?;
        }
        match self.kind {
            ScenarioKind::Normal => {}
            ScenarioKind::Fault(f) => {
                if !(0.1..=0.9).contains(&f.location_frac) {
                    return Err(Error::param(format!(
                        "fault location {} outside [0.1, 0.9]",
                        f.location_frac
                    )));
                }
                if !(0.0..=100.0).contains(&f.impedance_ohm) {
                    return Err(Error::param(format!(
                        "fault impedance {} outside [0, 100] ohm",
                        f.impedance_ohm
                    )));
                }
                if f.inception_angle_ms > 15 {
                    return Err(Error::param(format!(
                        "inception angle {} ms outside 0..=15",
                        f.inception_angle_ms
                    )));
                }
            }
            ScenarioKind::Fdia(a) => {
                if !(a.alpha.re.is_finite() && a.alpha.im.is_finite()) {
                    return Err(Error::param("FDIA multiplier must be finite"));
                }
                if a.onset_index >= WINDOW_LEN {
                    return Err(Error::param(format!(
                        "FDIA onset {} outside window",
                        a.onset_index
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.kind {
            ScenarioKind::Normal => format!("normal(load={}, seed={})", self.load_pu, self.seed),
            ScenarioKind::Fault(f) => format!(
                "fault({} R={} loc={} angle={}ms load={} seed={})",
                f.fault_type,
                f.impedance_ohm,
                f.location_frac,
                f.inception_angle_ms,
                self.load_pu,
                self.seed
            ),
            ScenarioKind::Fdia(a) => format!(
                "fdia(alpha={:.4}{:+.4}j onset={} load={} seed={})",
                a.alpha.re, a.alpha.im, a.onset_index, self.load_pu, self.seed
            ),
        }
    }
}

/// Electrical parameters of the line and its sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    /// Line current at 1.0 pu load, kA RMS.
    pub nominal_load_current: f64,
    /// Source rating that the fault-current limiter refers to, kA RMS.
    pub rated_current: f64,
    /// Source phase-to-neutral voltage, kV RMS.
    pub phase_voltage_kv: f64,
    pub load_power_factor: f64,
    /// Thevenin source impedance per phase, ohm.
    pub source_impedance: Complex64,
    /// Total series impedance of the protected line per phase, ohm.
    pub line_impedance: Complex64,
    pub fcl_limit_pu: f64,
    /// Decay time constant of the fault DC offset, seconds.
    pub dc_decay_time_constant: f64,
}

impl Default for SystemModel {
    fn default() -> Self {
        Self {
            nominal_load_current: 0.3,
            rated_current: 0.6,
            phase_voltage_kv: 66.0 / 3f64.sqrt(),
            load_power_factor: 0.95,
            source_impedance: Complex64::new(0.5, 3.0),
            line_impedance: Complex64::new(0.8, 6.0),
            fcl_limit_pu: 1.5,
            dc_decay_time_constant: 0.020,
        }
    }
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.nominal_load_current,
            self.rated_current,
            self.phase_voltage_kv,
            self.source_impedance.norm(),
            self.line_impedance.norm(),
            self.dc_decay_time_constant,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::param(format!(
                "system model values must be positive: {self:?}"
            )));
        }
        if !(self.load_power_factor > 0.0 && self.load_power_factor <= 1.0) {
            return Err(Error::param("load power factor must be in (0, 1]"));
        }
        if !(self.fcl_limit_pu >= 1.0) {
            return Err(Error::param("fcl_limit_pu must be >= 1"));
        }
        Ok(())
    }

    /// Peak instantaneous fault current the limiter allows, kA.
    pub fn fcl_peak(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.fcl_limit_pu * self.rated_current
    }

    /// Source voltage phasors with phase A at angle `psi` at the trigger
    /// instant, referenced to sample 0.
    fn voltages(&self, psi: f64, step: f64) -> [Complex64; 3] {
        let base = psi - step * TRIGGER_INDEX as f64;
        std::array::from_fn(|p| {
            Complex64::from_polar(self.phase_voltage_kv, base - p as f64 * 2.0 * PI / 3.0)
        })
    }

    /// Steady local-end load currents.
    fn load_currents(&self, load_pu: f64, psi: f64, step: f64) -> PhasorSet {
        let lag = self.load_power_factor.acos();
        let mag = load_pu * self.nominal_load_current;
        let phases = self
            .voltages(psi, step)
            .map(|v| Complex64::from_polar(mag, v.arg() - lag));
        PhasorSet { phases }
    }
}

fn check_snr(snr_db: f64) -> Result<()> {
    let (lo, hi) = SNR_RANGE_DB;
    if !snr_db.is_finite() {
        return Err(Error::param(format!("snr must be finite, got {snr_db}")));
    }
    if !(lo..=hi).contains(&snr_db) {
        return Err(Error::param(format!("snr {snr_db} dB outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Point-on-wave angle of phase-A voltage at the trigger instant.
fn point_on_wave(spec: &ScenarioSpec, step: f64) -> f64 {
    match spec.kind {
        ScenarioKind::Fault(f) => step * f.inception_angle_ms as f64 * SAMPLE_RATE / 1000.0,
        _ => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_POINT_ON_WAVE, 0));
            rng.random_range(-PI..PI)
        }
    }
}

fn noise_rng(spec: &ScenarioSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_NOISE, 0))
}

fn render_balanced(local: &PhasorSet, step: f64) -> Vec<f64> {
    let mut samples = vec![0.0; CHANNELS * WINDOW_LEN];
    for p in 0..3 {
        for n in 0..WINDOW_LEN {
            let v = phasor::render(local.phases[p], step, n);
            samples[p * WINDOW_LEN + n] = v;
            samples[(3 + p) * WINDOW_LEN + n] = -v;
        }
    }
    samples
}

fn window_from(samples: Vec<f64>) -> MeasurementWindow {
    MeasurementWindow {
        samples,
        len: WINDOW_LEN,
        sample_rate: SAMPLE_RATE,
        base_frequency: BASE_FREQUENCY,
        trigger_index: TRIGGER_INDEX,
    }
}

/// Pre-attack steady phasors `(local, remote)` of a scenario's load flow.
pub fn steady_phasors(spec: &ScenarioSpec, model: &SystemModel) -> (PhasorSet, PhasorSet) {
    let step = phasor::angular_step(BASE_FREQUENCY, SAMPLE_RATE);
    let local = model.load_currents(spec.load_pu, point_on_wave(spec, step), step);
    let remote = local.scaled(Complex64::new(-1.0, 0.0));
    (local, remote)
}

fn synth_load_flow(spec: &ScenarioSpec, model: &SystemModel) -> Result<MeasurementWindow> {
    spec.validate()?;
    model.validate()?;
    let step = phasor::angular_step(BASE_FREQUENCY, SAMPLE_RATE);
    let (local, _) = steady_phasors(spec, model);
    Ok(window_from(render_balanced(&local, step)))
}

fn finish_noise(window: MeasurementWindow, spec: &ScenarioSpec) -> Result<MeasurementWindow> {
    match spec.snr_db {
        Some(snr) => add_noise(&window, snr, &mut noise_rng(spec)),
        None => Ok(window),
    }
}

/// Balanced load flow: remote samples are the exact negation of local ones.
pub fn synth_normal(spec: &ScenarioSpec, model: &SystemModel) -> Result<MeasurementWindow> {
    if spec.kind != ScenarioKind::Normal {
        return Err(Error::param("synth_normal needs a Normal scenario"));
    }
    let w = synth_load_flow(spec, model)?;
    finish_noise(w, spec)
}

/// Fault-current phasor per phase through the fault, kA RMS, before
/// limiting.
fn prospective_fault_currents(f: &FaultParams, v: &[Complex64; 3], model: &SystemModel) -> [Complex64; 3] {
    let loc = f.location_frac;
    let z_th = model.source_impedance + model.line_impedance * (loc * (1.0 - loc));
    let r_f = Complex64::new(f.impedance_ohm, 0.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    if f.fault_type.is_line_to_line() {
        let (p, q) = (f.fault_type.phases()[0], f.fault_type.phases()[1]);
        let i = (v[p] - v[q]) / (z_th * 2.0 + r_f);
        out[p] = i;
        out[q] = -i;
    } else {
        for &p in f.fault_type.phases() {
            out[p] = v[p] / (z_th + r_f);
        }
    }
    out
}

/// Internal fault at `location_frac`, superimposed on the load flow from the
/// trigger index onward.
///
/// The fault current carries a DC offset that makes it start from zero and
/// decays with the model's time constant; it is split `(1 - loc) : loc`
/// between the local and remote ends and scaled so its instantaneous value
/// never exceeds the limiter peak.
pub fn synth_fault(spec: &ScenarioSpec, model: &SystemModel) -> Result<MeasurementWindow> {
    let ScenarioKind::Fault(f) = spec.kind else {
        return Err(Error::param("synth_fault needs a Fault scenario"));
    };
    let mut window = synth_load_flow(spec, model)?;
    let step = phasor::angular_step(BASE_FREQUENCY, SAMPLE_RATE);
    let psi = point_on_wave(spec, step);
    let v = model.voltages(psi, step);
    let fault = prospective_fault_currents(&f, &v, model);
    let t0 = TRIGGER_INDEX;
    let dt = 1.0 / SAMPLE_RATE;
    let cap = model.fcl_peak();
    for p in 0..3 {
        let i_f = fault[p];
        if i_f.norm() == 0.0 {
            continue;
        }
        let offset = phasor::render(i_f, step, t0);
        // |ac| + |offset| bounds the instantaneous superimposed current.
        let bound = std::f64::consts::SQRT_2 * i_f.norm() + offset.abs();
        let s = (cap / bound).min(1.0);
        for n in t0..WINDOW_LEN {
            let decay = (-((n - t0) as f64) * dt / model.dc_decay_time_constant).exp();
            let di = s * (phasor::render(i_f, step, n) - offset * decay);
            window.row_mut(p)[n] += (1.0 - f.location_frac) * di;
            window.row_mut(3 + p)[n] += f.location_frac * di;
        }
    }
    finish_noise(window, spec)
}

/// Rejection-samples a multiplier `alpha` such that replacing the remote
/// phasors with `alpha * i2` trips the relay on every phase.
///
/// Draws are uniform in `(|alpha|, arg alpha)` over `[0, 5) x [-pi, pi)`.
pub fn sample_fdia_alpha<R: Rng + ?Sized>(
    settings: &RelaySettings,
    i2: &PhasorSet,
    rng: &mut R,
) -> Result<Complex64> {
    settings.validate()?;
    for _ in 0..ALPHA_MAX_DRAWS {
        let alpha = Complex64::from_polar(
            rng.random_range(0.0..ALPHA_MAX_MAGNITUDE),
            rng.random_range(-PI..PI),
        );
        if alpha_trips(settings, i2, alpha, FDIA_TRIP_MARGIN) {
            return Ok(alpha);
        }
    }
    Err(Error::Infeasible {
        draws: ALPHA_MAX_DRAWS,
    })
}

/// Steady-state trip test for `alpha * i2` against `i1 = -i2`.
pub fn alpha_trips(settings: &RelaySettings, i2: &PhasorSet, alpha: Complex64, margin: f64) -> bool {
    i2.phases.iter().all(|&remote| {
        let local = -remote;
        let attacked = alpha * remote;
        let i_d = (local + attacked).norm();
        let i_r = local.norm() + attacked.norm();
        i_d > 0.0 && i_d >= margin * characteristic(i_r, settings)
    })
}

/// Multiplies the remote phasors by `alpha` from `onset_index` on.
///
/// Each remote row is decomposed against its fitted fundamental so that
/// `x' = Re(alpha) x - Im(alpha) q`, with `q` the quadrature signal; this is
/// an exact phasor rotation for sinusoidal rows and leaves the window
/// bit-identical for `alpha = 1`.
pub fn apply_fdia(
    window: &MeasurementWindow,
    alpha: Complex64,
    onset_index: usize,
) -> Result<MeasurementWindow> {
    window.validate()?;
    if onset_index >= window.len() {
        return Err(Error::param(format!(
            "onset {onset_index} outside window of {}",
            window.len()
        )));
    }
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::param("FDIA multiplier must be finite"));
    }
    let step = window.angular_step();
    let mut out = window.clone();
    for c in REMOTE_ROWS {
        let (_, fitted) = phasor::fit(window.row(c), 0, step);
        let row = out.row_mut(c);
        for (n, x) in row.iter_mut().enumerate().skip(onset_index) {
            let q = if alpha.im == 0.0 {
                0.0
            } else {
                phasor::quadrature(fitted, step, n)
            };
            *x = alpha.re * *x - alpha.im * q;
        }
    }
    Ok(out)
}

/// Additive white Gaussian noise, scaled per channel to the channel's RMS.
pub fn add_noise<R: Rng + ?Sized>(
    window: &MeasurementWindow,
    snr_db: f64,
    rng: &mut R,
) -> Result<MeasurementWindow> {
    check_snr(snr_db)?;
    let mut out = window.clone();
    let ratio = 10f64.powf(-snr_db / 20.0);
    for c in 0..CHANNELS {
        let row = out.row_mut(c);
        let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
        let sigma = rms * ratio;
        for x in row.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += sigma * z;
        }
    }
    Ok(out)
}

/// FDIA scenario: noise-free load flow, remote manipulation, then noise.
pub fn synth_fdia(spec: &ScenarioSpec, model: &SystemModel) -> Result<MeasurementWindow> {
    let ScenarioKind::Fdia(a) = spec.kind else {
        return Err(Error::param("synth_fdia needs an Fdia scenario"));
    };
    let clean = synth_load_flow(spec, model)?;
    let attacked = apply_fdia(&clean, a.alpha, a.onset_index)?;
    finish_noise(attacked, spec)
}

/// Dispatches on the scenario kind.
pub fn synthesize(spec: &ScenarioSpec, model: &SystemModel) -> Result<MeasurementWindow> {
    match spec.kind {
        ScenarioKind::Normal => synth_normal(spec, model),
        ScenarioKind::Fault(_) => synth_fault(spec, model),
        ScenarioKind::Fdia(_) => synth_fdia(spec, model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relay::{trip_check, RelayContext};

    fn fault_spec(t: FaultType, r: f64, loc: f64, angle: u32, snr: Option<f64>) -> ScenarioSpec {
        ScenarioSpec::fault(
            FaultParams {
                fault_type: t,
                location_frac: loc,
                impedance_ohm: r,
                inception_angle_ms: angle,
            },
            1.0,
            snr,
            11,
        )
    }

    #[test]
    fn normal_window_has_zero_differential() {
        let w = synth_normal(&ScenarioSpec::normal(1.0, None, 3), &SystemModel::default()).unwrap();
        assert_eq!(w.len(), WINDOW_LEN);
        for p in 0..3 {
            for n in 0..WINDOW_LEN {
                assert_eq!(w.row(p)[n] + w.row(3 + p)[n], 0.0);
            }
        }
    }

    #[test]
    fn normal_rms_matches_load() {
        // Rectangle-rule RMS over an integer number of cycles is exact for a
        // sampled sinusoid.
        let model = SystemModel::default();
        let spec = ScenarioSpec::normal(0.5, None, 9);
        let w = synth_normal(&spec, &model).unwrap();
        // 50 samples = 3 cycles exactly (3 * 1000/60 = 50).
        for p in 0..3 {
            let rms = (w.row(p)[..50].iter().map(|v| v * v).sum::<f64>() / 50.0).sqrt();
            assert!((rms - 0.5 * model.nominal_load_current).abs() < 1e-12, "{rms}");
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let model = SystemModel::default();
        let spec = ScenarioSpec::normal(0.7, Some(40.0), 21);
        assert_eq!(synth_normal(&spec, &model).unwrap(), synth_normal(&spec, &model).unwrap());
        let f = fault_spec(FaultType::BCG, 30.0, 0.4, 5, Some(45.0));
        assert_eq!(synth_fault(&f, &model).unwrap(), synth_fault(&f, &model).unwrap());
    }

    #[test]
    fn invalid_inputs_rejected() {
        let model = SystemModel::default();
        assert!(synth_normal(&ScenarioSpec::normal(1.5, None, 0), &model).is_err());
        assert!(synth_normal(&ScenarioSpec::normal(f64::NAN, None, 0), &model).is_err());
        assert!(synth_fault(&fault_spec(FaultType::AG, 120.0, 0.5, 0, None), &model).is_err());
        assert!(synth_fault(&fault_spec(FaultType::AG, 10.0, 0.95, 0, None), &model).is_err());
        assert!("XG".parse::<FaultType>().is_err());
        assert_eq!("abcg".parse::<FaultType>().unwrap(), FaultType::ABCG);
        assert!(synth_normal(&fault_spec(FaultType::AG, 1.0, 0.5, 0, None), &model).is_err());
    }

    #[test]
    fn bolted_fault_respects_limiter() {
        let model = SystemModel::default();
        let w = synth_fault(&fault_spec(FaultType::ABC, 0.0, 0.5, 0, None), &model).unwrap();
        let cap = model.fcl_peak();
        for p in 0..3 {
            let max = (TRIGGER_INDEX..WINDOW_LEN)
                .map(|n| (w.row(p)[n] + w.row(3 + p)[n]).abs())
                .fold(0.0, f64::max);
            assert!(max <= cap * (1.0 + 1e-12), "phase {p}: {max} > {cap}");
            assert!(max > 0.5 * cap);
        }
    }

    #[test]
    fn single_phase_fault_only_touches_its_phase() {
        let model = SystemModel::default();
        let clean = fault_spec(FaultType::AG, 100.0, 0.9, 0, None);
        let noisy = fault_spec(FaultType::AG, 100.0, 0.9, 0, Some(35.0));
        let pre = synth_load_flow(&clean, &model).unwrap();
        let w = synth_fault(&noisy, &model).unwrap();
        for c in 0..CHANNELS {
            let rms = (pre.row(c).iter().map(|v| v * v).sum::<f64>() / WINDOW_LEN as f64).sqrt();
            let sigma = rms * 10f64.powf(-35.0 / 20.0);
            let post = TRIGGER_INDEX..WINDOW_LEN;
            let energy: f64 = post
                .clone()
                .map(|n| (w.row(c)[n] - pre.row(c)[n]).powi(2))
                .sum::<f64>();
            let noise_floor = post.len() as f64 * (3.0 * sigma).powi(2);
            if c % 3 == 0 {
                assert!(energy > noise_floor, "faulted row {c} unchanged");
            } else {
                assert!(energy < noise_floor, "healthy row {c} moved: {energy} vs {noise_floor}");
            }
        }
    }

    #[test]
    fn inception_angle_shifts_point_on_wave() {
        let model = SystemModel::default();
        let a0 = synth_fault(&fault_spec(FaultType::BC, 10.0, 0.5, 0, None), &model).unwrap();
        let a8 = synth_fault(&fault_spec(FaultType::BC, 10.0, 0.5, 8, None), &model).unwrap();
        // Pre-fault local phase A: a8[n] should match a0[n + 8].
        let pre = &a0.row(0)[..TRIGGER_INDEX];
        let shifted = &a8.row(0)[..TRIGGER_INDEX];
        let xcorr = |lag: usize| -> f64 {
            (0..TRIGGER_INDEX - 16).map(|n| shifted[n] * pre[n + lag]).sum()
        };
        let best = (0..16).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        assert_eq!(best, 8);
        // Same steady fault magnitude once the offset has decayed.
        let est = |w: &MeasurementWindow| {
            crate::relay::estimate_phasor(w.row(1), WINDOW_LEN, w.samples_per_cycle())
                .unwrap()
                .norm()
        };
        assert!((est(&a0) - est(&a8)).abs() / est(&a0) < 0.1);
    }

    #[test]
    fn alpha_sampling_hits_locus() {
        let settings = RelaySettings::default();
        let spec = ScenarioSpec::normal(1.0, None, 5);
        let (_, i2) = steady_phasors(&spec, &SystemModel::default());
        assert!((i2.magnitude(0) - 0.3).abs() < 1e-12);
        assert!(alpha_trips(&settings, &i2, Complex64::new(-1.0, 0.0), 1.0));
        assert!(!alpha_trips(&settings, &i2, Complex64::new(1.0, 0.0), 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = sample_fdia_alpha(&settings, &i2, &mut rng).unwrap();
            assert!(a.norm() <= ALPHA_MAX_MAGNITUDE);
            assert!((a - Complex64::new(1.0, 0.0)).norm() > 1e-3);
        }
    }

    #[test]
    fn alpha_sampling_infeasible_for_zero_load() {
        let zero = PhasorSet::new([Complex64::new(0.0, 0.0); 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_fdia_alpha(&RelaySettings::default(), &zero, &mut rng),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn apply_fdia_identity_and_negation() {
        let model = SystemModel::default();
        let spec = ScenarioSpec::normal(1.0, None, 8);
        let w = synth_normal(&spec, &model).unwrap();
        assert_eq!(apply_fdia(&w, Complex64::new(1.0, 0.0), 33).unwrap(), w);

        let neg = apply_fdia(&w, Complex64::new(-1.0, 0.0), 33).unwrap();
        let (_, i2) = steady_phasors(&spec, &model);
        let step = w.angular_step();
        for p in 0..3 {
            assert_eq!(neg.row(p), w.row(p));
            for n in 0..WINDOW_LEN {
                let expect = phasor::render(i2.phases[p], step, n);
                let got = neg.row(3 + p)[n];
                if n < 33 {
                    assert_eq!(got, w.row(3 + p)[n]);
                } else {
                    assert!((got + expect).abs() < 1e-12, "n={n}");
                }
            }
        }
        assert!(apply_fdia(&w, Complex64::new(-1.0, 0.0), WINDOW_LEN).is_err());
    }

    #[test]
    fn apply_fdia_rotates_remote_phasor() {
        let model = SystemModel::default();
        let spec = ScenarioSpec::normal(0.8, None, 2);
        let w = synth_normal(&spec, &model).unwrap();
        let alpha = Complex64::from_polar(2.3, 2.0);
        let out = apply_fdia(&w, alpha, 20).unwrap();
        let (_, i2) = steady_phasors(&spec, &model);
        let step = w.angular_step();
        for p in 0..3 {
            for n in 20..WINDOW_LEN {
                let expect = phasor::render(alpha * i2.phases[p], step, n);
                assert!((out.row(3 + p)[n] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_levels_match_snr() {
        let base: Vec<f64> = (0..CHANNELS * WINDOW_LEN)
            .map(|i| {
                let n = i % WINDOW_LEN;
                // unit RMS over the 66-sample window by construction below
                (2.0 * PI * 60.0 * n as f64 / 1000.0).cos()
            })
            .collect();
        let mut w = MeasurementWindow::from_samples(base).unwrap();
        // normalize each row to exactly unit RMS
        for c in 0..CHANNELS {
            let row = w.row_mut(c);
            let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
            row.iter_mut().for_each(|v| *v /= rms);
        }
        for (snr, expect) in [(60.0, 1e-3), (35.0, 10f64.powf(-35.0 / 20.0))] {
            let mut acc = 0.0;
            let seeds = 1000;
            for s in 0..seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let noisy = add_noise(&w, snr, &mut rng).unwrap();
                let d: f64 = (0..WINDOW_LEN).map(|n| (noisy.row(0)[n] - w.row(0)[n]).powi(2)).sum();
                acc += (d / WINDOW_LEN as f64).sqrt();
            }
            let mean = acc / seeds as f64;
            assert!((mean - expect).abs() / expect < 0.12, "snr {snr}: {mean}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(add_noise(&w, f64::NAN, &mut rng).is_err());
        assert!(add_noise(&w, 20.0, &mut rng).is_err());
    }

    #[test]
    fn generated_events_trip() {
        let model = SystemModel::default();
        let relay = RelayContext::default();
        let f = fault_spec(FaultType::ABC, 0.0, 0.5, 0, Some(50.0));
        assert!(relay.trips(&synth_fault(&f, &model).unwrap()).unwrap());
        let normal = synth_normal(&ScenarioSpec::normal(1.0, Some(35.0), 4), &model).unwrap();
        assert!(!trip_check(&normal, &relay.settings, 4).unwrap().tripped);
    }
}
