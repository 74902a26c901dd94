//! Percentage-differential line relay.
//!
//! Per phase, the relay forms the differential current `i_d = i1 + i2` and
//! the restraint `i_r = |i1| + |i2|` from phasors estimated over a sliding
//! one-cycle window, compares `|i_d|` against the dual-slope operating
//! characteristic, and trips once any phase has exceeded it for
//! `pickup_count` consecutive samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor;
use crate::waveform::{MeasurementWindow, PhasorSet, LOCAL_ROWS, REMOTE_ROWS};

pub const DEFAULT_PICKUP_COUNT: usize = 4;

/// Operating characteristic constants, all in kA RMS except the slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaySettings {
    pub i_d0: f64,
    pub i_b: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Default for RelaySettings {
    fn default() -> Self {
        Self {
            i_d0: 0.05,
            i_b: 0.585,
            m1: 0.2,
            m2: 0.4,
        }
    }
}

impl RelaySettings {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.i_d0, self.i_b, self.m1, self.m2]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.i_d0 <= 0.0 || self.i_b <= 0.0 {
            return Err(Error::param(format!(
                "relay pickups must be positive and finite: {self:?}"
            )));
        }
        if !(0.0 < self.m1 && self.m1 < self.m2) {
            return Err(Error::param(format!(
                "relay slopes must satisfy 0 < m1 < m2: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `(i_d, i_r, i_op)` at one evaluated sample for one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub index: usize,
    pub i_d: f64,
    pub i_r: f64,
    pub i_op: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripDecision {
    pub tripped: bool,
    pub trip_index: Option<usize>,
    /// One trace per phase (A, B, C), one point per evaluated index.
    pub per_phase_trace: [Vec<TracePoint>; 3],
}

impl TripDecision {
    /// Trace point of `phase` at sample `index`, if that index was evaluated.
    pub fn point(&self, phase: usize, index: usize) -> Option<&TracePoint> {
        let trace = &self.per_phase_trace[phase];
        let first = trace.first()?.index;
        trace.get(index.checked_sub(first)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDifferential {
    pub i_d: Complex64,
    pub i_r: f64,
}

/// Relay settings plus pickup, i.e. everything needed to answer "does this
/// window trip?".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayContext {
    pub settings: RelaySettings,
    pub pickup_count: usize,
}

impl Default for RelayContext {
    fn default() -> Self {
        Self {
            settings: RelaySettings::default(),
            pickup_count: DEFAULT_PICKUP_COUNT,
        }
    }
}

impl RelayContext {
    pub fn new(settings: RelaySettings, pickup_count: usize) -> Result<Self> {
        let ctx = Self {
            settings,
            pickup_count,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        self.settings
            .validate()
            .map_err(|e| Error::Config(format!("relay context: {e}")))?;
        if self.pickup_count == 0 {
            return Err(Error::Config("relay pickup_count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn check(&self, window: &MeasurementWindow) -> Result<TripDecision> {
        trip_check(window, &self.settings, self.pickup_count)
    }

    pub fn trips(&self, window: &MeasurementWindow) -> Result<bool> {
        Ok(self.check(window)?.tripped)
    }
}

/// Number of samples in one estimation cycle.
pub fn cycle_len(samples_per_cycle: f64) -> usize {
    (samples_per_cycle - 1e-9).ceil().max(1.0) as usize
}

/// Fundamental phasor (kA RMS) over the cycle `[end_index - N, end_index)`,
/// `N = ceil(samples_per_cycle)`.
pub fn estimate_phasor(
    channel: &[f64],
    end_index: usize,
    samples_per_cycle: f64,
) -> Result<Complex64> {
    if !(samples_per_cycle.is_finite() && samples_per_cycle >= 2.0) {
        return Err(Error::param(format!(
            "samples_per_cycle must be >= 2, got {samples_per_cycle}"
        )));
    }
    let n = cycle_len(samples_per_cycle);
    if end_index < n || end_index > channel.len() {
        return Err(Error::InsufficientData(format!(
            "need one full cycle ({n} samples) ending at {end_index}, channel has {}",
            channel.len()
        )));
    }
    let step = 2.0 * std::f64::consts::PI / samples_per_cycle;
    let start = end_index - n;
    Ok(phasor::fit(&channel[start..end_index], start, step).1)
}

pub fn differential_currents(i1: &PhasorSet, i2: &PhasorSet) -> [PhaseDifferential; 3] {
    std::array::from_fn(|p| {
        let (a, b) = (i1.phases[p], i2.phases[p]);
        PhaseDifferential {
            i_d: a + b,
            i_r: a.norm() + b.norm(),
        }
    })
}

pub fn operating_current(i_r: f64, settings: &RelaySettings) -> Result<f64> {
    if !(i_r >= 0.0) {
        return Err(Error::param(format!(
            "restraining current must be non-negative, got {i_r}"
        )));
    }
    Ok(characteristic(i_r, settings))
}

#[inline]
pub(crate) fn characteristic(i_r: f64, s: &RelaySettings) -> f64 {
    if i_r <= s.i_b {
        s.i_d0 + s.m1 * i_r
    } else {
        s.i_d0 + s.m1 * s.i_b + s.m2 * (i_r - s.i_b)
    }
}

/// Evaluates the characteristic at every sample with a full cycle of history.
///
/// Trace indices are the newest sample of each estimation cycle, so the first
/// evaluated index is `N - 1`.
pub fn trip_check(
    window: &MeasurementWindow,
    settings: &RelaySettings,
    pickup_count: usize,
) -> Result<TripDecision> {
    window.validate()?;
    settings.validate()?;
    if pickup_count == 0 {
        return Err(Error::param("pickup_count must be >= 1"));
    }
    let spc = window.samples_per_cycle();
    let n = cycle_len(spc);
    let len = window.len();
    if len < n {
        return Err(Error::shape(format!(
            "window of {len} samples is shorter than one cycle ({n})"
        )));
    }
    let step = 2.0 * std::f64::consts::PI / spc;

    let mut traces: [Vec<TracePoint>; 3] = Default::default();
    let mut runs = [0usize; 3];
    let mut trip_index = None;
    for end in n..=len {
        let start = end - n;
        for p in 0..3 {
            let local = &window.row(LOCAL_ROWS.start + p)[start..end];
            let remote = &window.row(REMOTE_ROWS.start + p)[start..end];
            let i1 = phasor::fit(local, start, step).1;
            let i2 = phasor::fit(remote, start, step).1;
            let i_d = (i1 + i2).norm();
            let i_r = i1.norm() + i2.norm();
            let i_op = characteristic(i_r, settings);
            traces[p].push(TracePoint {
                index: end - 1,
                i_d,
                i_r,
                i_op,
            });
            if i_d >= i_op {
                runs[p] += 1;
                if runs[p] >= pickup_count && trip_index.is_none() {
                    trip_index = Some(end - 1);
                }
            } else {
                runs[p] = 0;
            }
        }
    }
    Ok(TripDecision {
        tripped: trip_index.is_some(),
        trip_index,
        per_phase_trace: traces,
    })
}
