//! The four detector architectures and the BCE objective.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Lower/upper clamp applied to probabilities inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Mlp,
    Cnn,
    Lstm,
    ResNet,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Mlp,
        Architecture::Cnn,
        Architecture::Lstm,
        Architecture::ResNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Cnn => "cnn",
            Architecture::Lstm => "lstm",
            Architecture::ResNet => "resnet",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Architecture::Mlp => 0,
            Architecture::Cnn => 1,
            Architecture::Lstm => 2,
            Architecture::ResNet => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Architecture::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .iter()
            .copied()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown architecture {s:?}")))
    }
}

const MLP_HIDDEN: [usize; 2] = [128, 64];
const CNN_CHANNELS: [usize; 2] = [16, 32];
const CONV_KERNEL: usize = 5;
const LSTM_HIDDEN: usize = 32;
const RESNET_CHANNELS: usize = 16;
const RESNET_BLOCKS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub fan_in: usize,
}

fn spec(name: impl Into<String>, shape: &[usize], fan_in: usize) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        shape: shape.to_vec(),
        fan_in,
    }
}

/// Parameter layout of an architecture on `[channels, time]` input.
pub fn layout(arch: Architecture, channels: usize, time: usize) -> Result<Vec<ParamSpec>> {
    let k = CONV_KERNEL;
    let p = match arch {
        Architecture::Mlp => {
            let n = channels * time;
            let [h1, h2] = MLP_HIDDEN;
            vec![
                spec("dense1.w", &[h1, n], n),
                spec("dense1.b", &[h1], n),
                spec("dense2.w", &[h2, h1], h1),
                spec("dense2.b", &[h2], h1),
                spec("out.w", &[1, h2], h2),
                spec("out.b", &[1], h2),
            ]
        }
        Architecture::Cnn => {
            let [c1, c2] = CNN_CHANNELS;
            if (time.saturating_sub(k - 1)) / 2 < k {
                return Err(Error::shape(format!("cnn needs a longer input than {time}")));
            }
            vec![
                spec("conv1.w", &[c1, channels, k], channels * k),
                spec("conv1.b", &[c1], channels * k),
                spec("conv2.w", &[c2, c1, k], c1 * k),
                spec("conv2.b", &[c2], c1 * k),
                spec("out.w", &[1, c2], c2),
                spec("out.b", &[1], c2),
            ]
        }
        Architecture::Lstm => {
            let h = LSTM_HIDDEN;
            vec![
                spec("lstm.w_ih", &[4 * h, channels], h),
                spec("lstm.w_hh", &[4 * h, h], h),
                spec("lstm.b", &[4 * h], h),
                spec("out.w", &[1, h], h),
                spec("out.b", &[1], h),
            ]
        }
        Architecture::ResNet => {
            let c = RESNET_CHANNELS;
            let mut v = vec![
                spec("stem.w", &[c, channels, k], channels * k),
                spec("stem.b", &[c], channels * k),
            ];
            for blk in 0..RESNET_BLOCKS {
                for conv in 1..=2 {
                    v.push(spec(format!("block{blk}.conv{conv}.w"), &[c, c, k], c * k));
                    v.push(spec(format!("block{blk}.conv{conv}.b"), &[c], c * k));
                }
            }
            v.push(spec("out.w", &[1, c], c));
            v.push(spec("out.b", &[1], c));
            v
        }
    };
    Ok(p)
}

/// A binary FDIA detector: `[channels, time]` tensor in, FDIA probability out.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    input_shape: [usize; 2],
    params: Vec<Tensor>,
    names: Vec<String>,
}

/// Result of [`Model::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub prob: f64,
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

/// Binary cross-entropy on a clamped probability.
pub fn bce_loss(prob: f64, y: u8) -> f64 {
    let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `dJ/dz` of the BCE with respect to the logit, `sigmoid(z) - y`, evaluated
/// without cancellation so it stays non-zero for saturated logits.
pub fn bce_logit_grad(z: f64, y: u8) -> f64 {
    if y == 1 {
        -sigmoid(-z)
    } else {
        sigmoid(z)
    }
}

impl Model {
    /// Fresh model with uniform fan-in initialization, `U(-1/sqrt(fan_in), ..)`.
    pub fn new(arch: Architecture, input_shape: [usize; 2], seed: u64) -> Result<Self> {
        let layout = layout(arch, input_shape[0], input_shape[1])?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(layout.len());
        let mut names = Vec::with_capacity(layout.len());
        for p in layout {
            let bound = 1.0 / (p.fan_in as f64).sqrt();
            let n: usize = p.shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Tensor::new(p.shape, data)?);
            names.push(p.name);
        }
        Ok(Self {
            arch,
            input_shape,
            params,
            names,
        })
    }

    /// Rebuilds a model from stored parameters, checking them against the
    /// architecture's layout.
    pub fn from_params(
        arch: Architecture,
        input_shape: [usize; 2],
        params: Vec<Tensor>,
    ) -> Result<Self> {
        let layout = layout(arch, input_shape[0], input_shape[1])?;
        if layout.len() != params.len() {
            return Err(Error::shape(format!(
                "{arch} expects {} parameter tensors, got {}",
                layout.len(),
                params.len()
            )));
        }
        for (spec, p) in layout.iter().zip(&params) {
            if spec.shape != p.shape() {
                return Err(Error::shape(format!(
                    "{}: expected {:?}, got {:?}",
                    spec.name,
                    spec.shape,
                    p.shape()
                )));
            }
        }
        Ok(Self {
            arch,
            input_shape,
            names: layout.into_iter().map(|s| s.name).collect(),
            params,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_shape(&self) -> [usize; 2] {
        self.input_shape
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Zeroes the final dense layer, which pins the output at 0.5.
    pub fn zero_output_layer(&mut self) {
        let n = self.params.len();
        for p in &mut self.params[n - 2..] {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape {
            return Err(Error::shape(format!(
                "{} expects input {:?}, got {:?}",
                self.arch,
                self.input_shape,
                x.shape()
            )));
        }
        if !x.is_finite() {
            return Err(Error::Numeric {
                layer: "input".into(),
                detail: "non-finite input".into(),
            });
        }
        Ok(())
    }

    /// Records the forward pass; returns `(input node, logit node)`.
    pub fn record<'a>(&'a self, tape: &mut Tape<'a>, x: &Tensor) -> Result<(NodeId, NodeId)> {
        self.check_input(x)?;
        let input = tape.input(x.clone())?;
        let logit = match self.arch {
            Architecture::Mlp => {
                let h = tape.flatten(input, "flatten")?;
                let h = tape.dense(h, 0, 1, "dense1")?;
                let h = tape.relu(h, "dense1.relu")?;
                let h = tape.dense(h, 2, 3, "dense2")?;
                let h = tape.relu(h, "dense2.relu")?;
                tape.dense(h, 4, 5, "out")?
            }
            Architecture::Cnn => {
                let h = tape.conv1d(input, 0, 1, 0, "conv1")?;
                let h = tape.relu(h, "conv1.relu")?;
                let h = tape.max_pool2(h, "pool")?;
                let h = tape.conv1d(h, 2, 3, 0, "conv2")?;
                let h = tape.relu(h, "conv2.relu")?;
                let h = tape.global_avg_pool(h, "gap")?;
                tape.dense(h, 4, 5, "out")?
            }
            Architecture::Lstm => {
                let h = tape.lstm(input, 0, 1, 2, "lstm")?;
                tape.dense(h, 3, 4, "out")?
            }
            Architecture::ResNet => {
                let pad = CONV_KERNEL / 2;
                let h = tape.conv1d(input, 0, 1, pad, "stem")?;
                let mut h = tape.relu(h, "stem.relu")?;
                for blk in 0..RESNET_BLOCKS {
                    let base = 2 + blk * 4;
                    let r = tape.conv1d(h, base, base + 1, pad, "block.conv1")?;
                    let r = tape.relu(r, "block.relu1")?;
                    let r = tape.conv1d(r, base + 2, base + 3, pad, "block.conv2")?;
                    let s = tape.add(h, r, "block.skip")?;
                    h = tape.relu(s, "block.relu2")?;
                }
                let h = tape.global_avg_pool(h, "gap")?;
                let n = self.params.len();
                tape.dense(h, n - 2, n - 1, "out")?
            }
        };
        Ok((input, logit))
    }

    pub fn forward_logit(&self, x: &Tensor) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let (_, logit) = self.record(&mut tape, x)?;
        Ok(tape.value(logit).data()[0])
    }

    /// FDIA probability.
    pub fn forward(&self, x: &Tensor) -> Result<f64> {
        Ok(sigmoid(self.forward_logit(x)?))
    }

    /// Predicted label; ties at exactly 0.5 go to FDIA.
    pub fn predict(&self, x: &Tensor) -> Result<u8> {
        Ok(u8::from(self.forward_logit(x)? >= 0.0))
    }

    /// Exact gradients of `bce_loss(forward(x), y)` w.r.t. every parameter
    /// and the input.
    pub fn backward(&self, x: &Tensor, y: u8) -> Result<Gradients> {
        let mut tape = Tape::new(&self.params);
        let (input, logit) = self.record(&mut tape, x)?;
        let z = tape.value(logit).data()[0];
        let prob = sigmoid(z);
        let seed = Tensor::from_vec(vec![bce_logit_grad(z, y)]);
        let mut grads = tape.backward(logit, seed)?;
        let input_grad = grads
            .take_node(input)
            .unwrap_or_else(|| Tensor::zeros(x.shape()));
        for (g, name) in grads.params.iter().zip(&self.names) {
            if !g.is_finite() {
                return Err(Error::Numeric {
                    layer: name.clone(),
                    detail: "non-finite gradient".into(),
                });
            }
        }
        Ok(Gradients {
            loss: bce_loss(prob, y),
            prob,
            params: grads.params,
            input: input_grad,
        })
    }

    /// Input gradient only.
    pub fn input_gradient(&self, x: &Tensor, y: u8) -> Result<Tensor> {
        Ok(self.backward(x, y)?.input)
    }
}
