//! Reverse-mode tape over coarse tensor ops.
//!
//! Activations are tape nodes; weights are referenced by index into a
//! borrowed parameter slice, so recording a forward pass never copies
//! parameters. [`Tape::backward`] walks the nodes in reverse and returns the
//! gradient of every node and every parameter.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct LstmStep {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Dense {
        x: usize,
        w: usize,
        b: usize,
    },
    Conv1d {
        x: usize,
        w: usize,
        b: usize,
        pad: usize,
    },
    MaxPool1d {
        x: usize,
        argmax: Vec<usize>,
    },
    GlobalAvgPool {
        x: usize,
    },
    Relu {
        x: usize,
    },
    Sigmoid {
        x: usize,
    },
    Tanh {
        x: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Flatten {
        x: usize,
    },
    Lstm {
        x: usize,
        w_ih: usize,
        w_hh: usize,
        b: usize,
        steps: Vec<LstmStep>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [Tensor],
    nodes: Vec<Node>,
}

/// Output of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct TapeGrads {
    nodes: Vec<Option<Tensor>>,
    pub params: Vec<Tensor>,
}

impl TapeGrads {
    pub fn node(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes[id.0].as_ref()
    }

    pub fn take_node(&mut self, id: NodeId) -> Option<Tensor> {
        self.nodes[id.0].take()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn check_finite(t: &Tensor, layer: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            layer: layer.to_string(),
            detail: "non-finite activation".into(),
        })
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Tensor]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn param(&self, idx: usize, layer: &str) -> Result<&'p Tensor> {
        self.params
            .get(idx)
            .ok_or_else(|| Error::shape(format!("{layer}: missing parameter #{idx}")))
    }

    fn push(&mut self, value: Tensor, op: Op, layer: &str) -> Result<NodeId> {
        check_finite(&value, layer)?;
        self.nodes.push(Node { value, op });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(value, Op::Leaf, "input")
    }

    /// `y = W x + b` with `x` flattened; `W: [m, n]`, `b: [m]`.
    pub fn dense(&mut self, x: NodeId, w: usize, b: usize, layer: &str) -> Result<NodeId> {
        let (wt, bt) = (self.param(w, layer)?, self.param(b, layer)?);
        let xv = self.value(x);
        let (m, n) = match wt.shape() {
            [m, n] => (*m, *n),
            s => return Err(Error::shape(format!("{layer}: weight shape {s:?}"))),
        };
        if xv.len() != n || bt.len() != m {
            return Err(Error::shape(format!(
                "{layer}: input {:?} vs weight [{m}, {n}]",
                xv.shape()
            )));
        }
        let (wd, xd) = (wt.data(), xv.data());
        let out: Vec<f64> = (0..m)
            .map(|i| {
                let row = &wd[i * n..(i + 1) * n];
                bt.data()[i] + row.iter().zip(xd).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        self.push(Tensor::from_vec(out), Op::Dense { x: x.0, w, b }, layer)
    }

    /// 1-D convolution, stride 1, symmetric zero padding. `x: [Cin, L]`,
    /// `W: [Cout, Cin, K]`, `b: [Cout]`.
    pub fn conv1d(
        &mut self,
        x: NodeId,
        w: usize,
        b: usize,
        pad: usize,
        layer: &str,
    ) -> Result<NodeId> {
        let (wt, bt) = (self.param(w, layer)?, self.param(b, layer)?);
        let xv = self.value(x);
        let (cout, cin, k) = match wt.shape() {
            [o, i, k] => (*o, *i, *k),
            s => return Err(Error::shape(format!("{layer}: weight shape {s:?}"))),
        };
        let (xc, l) = match xv.shape() {
            [c, l] => (*c, *l),
            s => return Err(Error::shape(format!("{layer}: input shape {s:?}"))),
        };
        if xc != cin || bt.len() != cout || l + 2 * pad < k {
            return Err(Error::shape(format!(
                "{layer}: input [{xc}, {l}] vs weight [{cout}, {cin}, {k}]"
            )));
        }
        let lout = l + 2 * pad - k + 1;
        let (wd, xd) = (wt.data(), xv.data());
        let mut out = vec![0.0; cout * lout];
        for o in 0..cout {
            let dst = &mut out[o * lout..(o + 1) * lout];
            dst.iter_mut().for_each(|v| *v = bt.data()[o]);
            for c in 0..cin {
                let src = &xd[c * l..(c + 1) * l];
                for kk in 0..k {
                    let wv = wd[(o * cin + c) * k + kk];
                    // t + kk - pad in [0, l)
                    let t_lo = pad.saturating_sub(kk);
                    let t_hi = (l + pad - kk).min(lout);
                    for t in t_lo..t_hi {
                        dst[t] += wv * src[t + kk - pad];
                    }
                }
            }
        }
        let value = Tensor::new(vec![cout, lout], out)?;
        self.push(value, Op::Conv1d { x: x.0, w, b, pad }, layer)
    }

    /// Non-overlapping max pool of width 2 along time; odd tails are dropped.
    pub fn max_pool2(&mut self, x: NodeId, layer: &str) -> Result<NodeId> {
        let xv = self.value(x);
        let (c, l) = match xv.shape() {
            [c, l] => (*c, *l),
            s => return Err(Error::shape(format!("{layer}: input shape {s:?}"))),
        };
        let lout = l / 2;
        let mut out = Vec::with_capacity(c * lout);
        let mut argmax = Vec::with_capacity(c * lout);
        for ch in 0..c {
            for t in 0..lout {
                let i0 = ch * l + 2 * t;
                let (a, b) = (xv.data()[i0], xv.data()[i0 + 1]);
                let (idx, v) = if b > a { (i0 + 1, b) } else { (i0, a) };
                out.push(v);
                argmax.push(idx);
            }
        }
        let value = Tensor::new(vec![c, lout], out)?;
        self.push(value, Op::MaxPool1d { x: x.0, argmax }, layer)
    }

    /// Mean over time: `[C, L] -> [C]`.
    pub fn global_avg_pool(&mut self, x: NodeId, layer: &str) -> Result<NodeId> {
        let xv = self.value(x);
        let (c, l) = match xv.shape() {
            [c, l] if *l > 0 => (*c, *l),
            s => return Err(Error::shape(format!("{layer}: input shape {s:?}"))),
        };
        let out = (0..c)
            .map(|ch| xv.data()[ch * l..(ch + 1) * l].iter().sum::<f64>() / l as f64)
            .collect();
        self.push(Tensor::from_vec(out), Op::GlobalAvgPool { x: x.0 }, layer)
    }

    pub fn relu(&mut self, x: NodeId, layer: &str) -> Result<NodeId> {
        let v = self.value(x).map(|v| v.max(0.0));
        self.push(v, Op::Relu { x: x.0 }, layer)
    }

    pub fn sigmoid(&mut self, x: NodeId, layer: &str) -> Result<NodeId> {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid { x: x.0 }, layer)
    }

    pub fn tanh(&mut self, x: NodeId, layer: &str) -> Result<NodeId> {
        let v = self.value(x).map(f64::tanh);
        self.push(v, Op::Tanh { x: x.0 }, layer)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId, layer: &str) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!(
                "{layer}: {:?} + {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut v = av.clone();
        v.add_assign(bv);
        self.push(v, Op::Add { a: a.0, b: b.0 }, layer)
    }

    pub fn flatten(&mut self, x: NodeId, layer: &str) -> Result<NodeId> {
        let v = self.value(x).clone();
        let n = v.len();
        self.push(v.reshaped(vec![n])?, Op::Flatten { x: x.0 }, layer)
    }

    /// Single-layer LSTM over the time axis of `x: [I, T]`, zero initial
    /// state, returning the last hidden state `[H]`. Gate order i, f, g, o in
    /// `W_ih: [4H, I]`, `W_hh: [4H, H]`, `b: [4H]`.
    pub fn lstm(
        &mut self,
        x: NodeId,
        w_ih: usize,
        w_hh: usize,
        b: usize,
        layer: &str,
    ) -> Result<NodeId> {
        let wi = self.param(w_ih, layer)?;
        let wh = self.param(w_hh, layer)?;
        let bt = self.param(b, layer)?;
        let xv = self.value(x);
        let (inp, t_len) = match xv.shape() {
            [i, t] => (*i, *t),
            s => return Err(Error::shape(format!("{layer}: input shape {s:?}"))),
        };
        let cell = LstmCell::from_tensors(wi, wh, bt, layer)?;
        if cell.input != inp {
            return Err(Error::shape(format!(
                "{layer}: input has {inp} features, cell expects {}",
                cell.input
            )));
        }
        let h_dim = cell.hidden;
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        let mut steps = Vec::with_capacity(t_len);
        let mut xt = vec![0.0; inp];
        for t in 0..t_len {
            for (j, v) in xt.iter_mut().enumerate() {
                *v = xv.data()[j * t_len + t];
            }
            let (h2, c2, step) = cell.forward(&xt, &h, &c);
            h = h2;
            c = c2;
            steps.push(step);
        }
        self.push(
            Tensor::from_vec(h),
            Op::Lstm {
                x: x.0,
                w_ih,
                w_hh,
                b,
                steps,
            },
            layer,
        )
    }

    /// Back-propagates `seed` (the gradient of the objective with respect to
    /// `out`) through the whole tape.
    pub fn backward(&self, out: NodeId, seed: Tensor) -> Result<TapeGrads> {
        if seed.shape() != self.value(out).shape() {
            return Err(Error::shape("backward seed does not match output shape"));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut pgrads: Vec<Option<Tensor>> = vec![None; self.params.len()];
        grads[out.0] = Some(seed);

        fn acc<'s>(slot: &'s mut Option<Tensor>, like: &Tensor) -> &'s mut Tensor {
            slot.get_or_insert_with(|| Tensor::zeros(like.shape()))
        }

        for id in (0..=out.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Dense { x, w, b } => {
                    let (wt, xv) = (&self.params[*w], &self.nodes[*x].value);
                    let n = xv.len();
                    let gx = acc(&mut grads[*x], xv).data_mut();
                    for (i, gi) in g.data().iter().enumerate() {
                        let row = &wt.data()[i * n..(i + 1) * n];
                        for (dst, wv) in gx.iter_mut().zip(row) {
                            *dst += gi * wv;
                        }
                    }
                    let gw = acc(&mut pgrads[*w], wt).data_mut();
                    for (i, gi) in g.data().iter().enumerate() {
                        let row = &mut gw[i * n..(i + 1) * n];
                        for (dst, xj) in row.iter_mut().zip(xv.data()) {
                            *dst += gi * xj;
                        }
                    }
                    acc(&mut pgrads[*b], &self.params[*b]).add_assign(&g);
                }
                Op::Conv1d { x, w, b, pad } => {
                    let (wt, xv) = (&self.params[*w], &self.nodes[*x].value);
                    let (cout, cin, k) = (wt.shape()[0], wt.shape()[1], wt.shape()[2]);
                    let l = xv.shape()[1];
                    let lout = g.shape()[1];
                    let pad = *pad;
                    {
                        let gb = acc(&mut pgrads[*b], &self.params[*b]).data_mut();
                        for o in 0..cout {
                            gb[o] += g.data()[o * lout..(o + 1) * lout].iter().sum::<f64>();
                        }
                    }
                    {
                        let gw = acc(&mut pgrads[*w], wt).data_mut();
                        for o in 0..cout {
                            let go = &g.data()[o * lout..(o + 1) * lout];
                            for c in 0..cin {
                                let src = &xv.data()[c * l..(c + 1) * l];
                                for kk in 0..k {
                                    let t_lo = pad.saturating_sub(kk);
                                    let t_hi = (l + pad - kk).min(lout);
                                    let mut s = 0.0;
                                    for t in t_lo..t_hi {
                                        s += go[t] * src[t + kk - pad];
                                    }
                                    gw[(o * cin + c) * k + kk] += s;
                                }
                            }
                        }
                    }
                    let gx = acc(&mut grads[*x], xv).data_mut();
                    for o in 0..cout {
                        let go = &g.data()[o * lout..(o + 1) * lout];
                        for c in 0..cin {
                            let dst = &mut gx[c * l..(c + 1) * l];
                            for kk in 0..k {
                                let wv = wt.data()[(o * cin + c) * k + kk];
                                let t_lo = pad.saturating_sub(kk);
                                let t_hi = (l + pad - kk).min(lout);
                                for t in t_lo..t_hi {
                                    dst[t + kk - pad] += wv * go[t];
                                }
                            }
                        }
                    }
                }
                Op::MaxPool1d { x, argmax } => {
                    let gx = acc(&mut grads[*x], &self.nodes[*x].value).data_mut();
                    for (gi, &src) in g.data().iter().zip(argmax) {
                        gx[src] += gi;
                    }
                }
                Op::GlobalAvgPool { x } => {
                    let xv = &self.nodes[*x].value;
                    let l = xv.shape()[1];
                    let gx = acc(&mut grads[*x], xv).data_mut();
                    for (ch, gi) in g.data().iter().enumerate() {
                        for v in &mut gx[ch * l..(ch + 1) * l] {
                            *v += gi / l as f64;
                        }
                    }
                }
                Op::Relu { x } => {
                    let xv = &self.nodes[*x].value;
                    let gx = acc(&mut grads[*x], xv).data_mut();
                    for ((dst, gi), xi) in gx.iter_mut().zip(g.data()).zip(xv.data()) {
                        if *xi > 0.0 {
                            *dst += gi;
                        }
                    }
                }
                Op::Sigmoid { x } => {
                    let y = &node.value;
                    let gx = acc(&mut grads[*x], y).data_mut();
                    for ((dst, gi), yi) in gx.iter_mut().zip(g.data()).zip(y.data()) {
                        *dst += gi * yi * (1.0 - yi);
                    }
                }
                Op::Tanh { x } => {
                    let y = &node.value;
                    let gx = acc(&mut grads[*x], y).data_mut();
                    for ((dst, gi), yi) in gx.iter_mut().zip(g.data()).zip(y.data()) {
                        *dst += gi * (1.0 - yi * yi);
                    }
                }
                Op::Add { a, b } => {
                    acc(&mut grads[*a], &g).add_assign(&g);
                    acc(&mut grads[*b], &g).add_assign(&g);
                }
                Op::Flatten { x } => {
                    let xv = &self.nodes[*x].value;
                    let shaped = g.clone().reshaped(xv.shape().to_vec())?;
                    acc(&mut grads[*x], xv).add_assign(&shaped);
                }
                Op::Lstm {
                    x,
                    w_ih,
                    w_hh,
                    b,
                    steps,
                } => {
                    let cell = LstmCell::from_tensors(
                        &self.params[*w_ih],
                        &self.params[*w_hh],
                        &self.params[*b],
                        "lstm",
                    )?;
                    let xv = &self.nodes[*x].value;
                    let t_len = xv.shape()[1];
                    let inp = cell.input;
                    let mut cg = LstmGrads::zeros(&cell);
                    let mut dh = g.data().to_vec();
                    let mut dc = vec![0.0; cell.hidden];
                    let mut gx_cols = vec![0.0; inp * t_len];
                    let mut xt = vec![0.0; inp];
                    for t in (0..t_len).rev() {
                        for (j, v) in xt.iter_mut().enumerate() {
                            *v = xv.data()[j * t_len + t];
                        }
                        let (dx, dh_prev, dc_prev) =
                            cell.backward(&steps[t], &xt, &dh, &dc, &mut cg);
                        for (j, v) in dx.iter().enumerate() {
                            gx_cols[j * t_len + t] += v;
                        }
                        dh = dh_prev;
                        dc = dc_prev;
                    }
                    acc(&mut grads[*x], xv)
                        .add_assign(&Tensor::new(xv.shape().to_vec(), gx_cols)?);
                    acc(&mut pgrads[*w_ih], &self.params[*w_ih])
                        .data_mut()
                        .iter_mut()
                        .zip(&cg.w_ih)
                        .for_each(|(a, b)| *a += b);
                    acc(&mut pgrads[*w_hh], &self.params[*w_hh])
                        .data_mut()
                        .iter_mut()
                        .zip(&cg.w_hh)
                        .for_each(|(a, b)| *a += b);
                    acc(&mut pgrads[*b], &self.params[*b])
                        .data_mut()
                        .iter_mut()
                        .zip(&cg.b)
                        .for_each(|(a, b)| *a += b);
                }
            }
            grads[id] = Some(g);
        }

        let params = pgrads
            .into_iter()
            .zip(self.params)
            .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        Ok(TapeGrads {
            nodes: grads,
            params,
        })
    }
}

/// Borrowed view of one LSTM cell's weights.
pub struct LstmCell<'a> {
    pub input: usize,
    pub hidden: usize,
    w_ih: &'a [f64],
    w_hh: &'a [f64],
    b: &'a [f64],
}

/// Accumulated cell-parameter gradients, flat in the same layout as the
/// weights.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros(cell: &LstmCell<'_>) -> Self {
        Self {
            w_ih: vec![0.0; cell.w_ih.len()],
            w_hh: vec![0.0; cell.w_hh.len()],
            b: vec![0.0; cell.b.len()],
        }
    }
}

impl<'a> LstmCell<'a> {
    pub fn from_tensors(w_ih: &'a Tensor, w_hh: &'a Tensor, b: &'a Tensor, layer: &str) -> Result<Self> {
        let (g4, inp) = match w_ih.shape() {
            [g, i] => (*g, *i),
            s => return Err(Error::shape(format!("{layer}: W_ih shape {s:?}"))),
        };
        let hidden = g4 / 4;
        if g4 % 4 != 0 || w_hh.shape() != [g4, hidden] || b.len() != g4 {
            return Err(Error::shape(format!(
                "{layer}: inconsistent LSTM weights {:?} {:?} {:?}",
                w_ih.shape(),
                w_hh.shape(),
                b.shape()
            )));
        }
        Ok(Self {
            input: inp,
            hidden,
            w_ih: w_ih.data(),
            w_hh: w_hh.data(),
            b: b.data(),
        })
    }

    /// One step: returns `(h_t, c_t, cache)`.
    pub fn forward(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, LstmStep) {
        let hd = self.hidden;
        let mut z = self.b.to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            let wi = &self.w_ih[r * self.input..(r + 1) * self.input];
            let wh = &self.w_hh[r * hd..(r + 1) * hd];
            *zr += wi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + wh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
        let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
        let c2: Vec<f64> = (0..hd).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<f64> = c2.iter().map(|v| v.tanh()).collect();
        let h2: Vec<f64> = (0..hd).map(|j| o[j] * tanh_c[j]).collect();
        let step = LstmStep {
            i,
            f,
            g,
            o,
            tanh_c,
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
        };
        (h2, c2, step)
    }

    /// One step backward given upstream `dh_t`, `dc_t`. Accumulates weight
    /// gradients into `grads`; returns `(dx_t, dh_{t-1}, dc_{t-1})`.
    pub fn backward(
        &self,
        step: &LstmStep,
        x: &[f64],
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmGrads,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, g, o, tc) = (step.i[j], step.f[j], step.g[j], step.o[j], step.tanh_c[j]);
            let d_o = dh[j] * tc;
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dct * g * i * (1.0 - i);
            dz[hd + j] = dct * step.c_prev[j] * f * (1.0 - f);
            dz[2 * hd + j] = dct * i * (1.0 - g * g);
            dz[3 * hd + j] = d_o * o * (1.0 - o);
            dc_prev[j] = dct * f;
        }
        let mut dx = vec![0.0; self.input];
        let mut dh_prev = vec![0.0; hd];
        for (r, &d) in dz.iter().enumerate() {
            grads.b[r] += d;
            let wi = &self.w_ih[r * self.input..(r + 1) * self.input];
            let gwi = &mut grads.w_ih[r * self.input..(r + 1) * self.input];
            for k in 0..self.input {
                gwi[k] += d * x[k];
                dx[k] += d * wi[k];
            }
            let wh = &self.w_hh[r * hd..(r + 1) * hd];
            let gwh = &mut grads.w_hh[r * hd..(r + 1) * hd];
            for k in 0..hd {
                gwh[k] += d * step.h_prev[k];
                dh_prev[k] += d * wh[k];
            }
        }
        (dx, dh_prev, dc_prev)
    }
}
