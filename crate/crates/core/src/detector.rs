//! A trained classifier bundled with its input scaler, plus the binary
//! checkpoint format.
//!
//! Checkpoint layout, all integers little-endian:
//! `b"LCDRCKPT"`, `u32` version, `u8` architecture code, `u32` channels,
//! `u32` time steps, `u32` tensor count, then per tensor `u32` name length,
//! UTF-8 name, `u32` rank, `u32` dims, `f64` data; finally the scaler as
//! `u32` channel count followed by the means and the standard deviations.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Architecture, EpochLog, Model, Tensor, TrainConfig};
use crate::dataset::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::waveform::{MeasurementWindow, CHANNELS};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LCDRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub model: Model,
    pub scaler: Scaler,
}

/// Training summary written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub architecture: Architecture,
    pub num_parameters: usize,
    pub train_samples: usize,
    pub config: TrainConfig,
    pub epochs: Vec<EpochLog>,
}

impl Detector {
    pub fn new(model: Model, scaler: Scaler) -> Result<Self> {
        if model.input_shape()[0] != CHANNELS || scaler.mean.len() != CHANNELS {
            return Err(Error::shape(format!(
                "detector expects {CHANNELS} input channels"
            )));
        }
        Ok(Self { model, scaler })
    }

    pub fn architecture(&self) -> Architecture {
        self.model.architecture()
    }

    pub fn input(&self, window: &MeasurementWindow) -> Tensor {
        self.scaler.apply(window)
    }

    /// FDIA probability of a physical window.
    pub fn probability(&self, window: &MeasurementWindow) -> Result<f64> {
        self.model.forward(&self.input(window))
    }

    pub fn predict(&self, window: &MeasurementWindow) -> Result<u8> {
        self.model.predict(&self.input(window))
    }

    pub fn predict_all(&self, ds: &Dataset, exec: Execution) -> Result<Vec<u8>> {
        exec.map(ds.samples(), |s| self.predict(&s.window))
            .into_iter()
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|detail| Error::format(path, detail))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        out.push(self.model.architecture().code());
        let [c, t] = self.model.input_shape();
        put_u32(&mut out, c as u32);
        put_u32(&mut out, t as u32);
        put_u32(&mut out, self.model.params().len() as u32);
        for (name, p) in self.model.param_names().iter().zip(self.model.params()) {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, p.shape().len() as u32);
            for &d in p.shape() {
                put_u32(&mut out, d as u32);
            }
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        put_u32(&mut out, self.scaler.mean.len() as u32);
        for v in self.scaler.mean.iter().chain(&self.scaler.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err("not a detector checkpoint (bad magic)".into());
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(format!(
                "checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
            ));
        }
        let code = r.take(1)?[0];
        let arch = Architecture::from_code(code)
            .ok_or_else(|| format!("unknown architecture code {code}"))?;
        let shape = [r.u32()? as usize, r.u32()? as usize];
        let n = r.u32()? as usize;
        let mut params = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|e| e.to_string())?;
            let rank = r.u32()? as usize;
            let dims: Vec<usize> = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<std::result::Result<_, _>>()?;
            let count: usize = dims.iter().product();
            let data = r.f64s(count)?;
            params.push(Tensor::new(dims, data).map_err(|e| format!("{name}: {e}"))?);
        }
        let channels = r.u32()? as usize;
        let mean = r.f64s(channels)?;
        let std = r.f64s(channels)?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        let model = Model::from_params(arch, shape, params).map_err(|e| e.to_string())?;
        let scaler = Scaler::from_parts(mean, std).map_err(|e| e.to_string())?;
        Detector::new(model, scaler).map_err(|e| e.to_string())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated checkpoint at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let b = self.take(n.checked_mul(8).ok_or("tensor size overflow")?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Fits the scaler on `train`, initializes `arch` from `seed` and trains it.
pub fn train_detector(
    arch: Architecture,
    train: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Detector, TrainingLog)> {
    let scaler = Scaler::fit(train)?;
    let t = train.samples()[0].window.len();
    let mut model = Model::new(arch, [CHANNELS, t], seed)?;
    let xs = scaler.apply_all(train);
    let epochs = autodiff::train(&mut model, &xs, &train.labels(), cfg)?;
    let log = TrainingLog {
        architecture: arch,
        num_parameters: model.num_parameters(),
        train_samples: train.len(),
        config: *cfg,
        epochs,
    };
    Ok((Detector::new(model, scaler)?, log))
}

/// Continues training an existing detector; the scaler is kept fixed.
pub fn continue_training(det: &mut Detector, train: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochLog>> {
    let xs = det.scaler.apply_all(train);
    autodiff::train(&mut det.model, &xs, &train.labels(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn detector(arch: Architecture) -> Detector {
        let model = Model::new(arch, [CHANNELS, 20], 11).unwrap();
        let scaler = Scaler::from_parts(vec![0.1; 6], vec![0.5; 6]).unwrap();
        Detector::new(model, scaler).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        for arch in Architecture::ALL {
            let d = detector(arch);
            let bytes = d.to_bytes();
            let back = Detector::from_bytes(&bytes).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let bytes = detector(Architecture::Cnn).to_bytes();
        assert!(Detector::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Detector::from_bytes(&bad).unwrap_err().contains("magic"));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(Detector::from_bytes(&bad).unwrap_err().contains("version"));
        let mut long = bytes;
        long.push(0);
        assert!(Detector::from_bytes(&long).is_err());
    }
}
