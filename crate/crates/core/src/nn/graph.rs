//! Forward evaluation and reverse-mode gradients.

use rand::Rng;

use super::{LayerKind, LayerSpec, Params, SegNet, BN_EPS, BN_MOMENTUM};
use crate::error::{Error, Result};
use crate::spectral_ops::{
    concat_channels, integrate_gamma_spectral, integrate_gamma_spectral_adjoint, s2_conv_backward,
    s2_conv_forward, so3_conv_backward, so3_conv_forward, split_channels, S2Batch, SO3Batch,
};
use crate::sphere::{BandLimit, S2Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// An SO(3) activation batch, `[b][c][j][k][l]` on the grid. Each layer writes
/// one form and the other is derived from it on demand.
#[derive(Debug, Clone)]
struct Node {
    bw: BandLimit,
    batch: usize,
    channels: usize,
    grid: Option<Vec<f64>>,
    spectral: Option<SO3Batch>,
}

impl Node {
    fn from_spectral(s: SO3Batch) -> Self {
        Self { bw: s.bw(), batch: s.batch(), channels: s.channels(), grid: None, spectral: Some(s) }
    }

    fn from_grid(bw: BandLimit, batch: usize, channels: usize, v: Vec<f64>) -> Self {
        Self { bw, batch, channels, grid: Some(v), spectral: None }
    }

    fn len(&self) -> usize {
        self.batch * self.channels * self.bw.side().pow(3)
    }

    fn ensure_spectral(&mut self) {
        if self.spectral.is_none() {
            let g = self.grid.as_ref().expect("activation was released");
            self.spectral = Some(SO3Batch::analyze(self.bw, self.batch, self.channels, g));
        }
    }

    fn ensure_grid(&mut self) {
        if self.grid.is_none() {
            let s = self.spectral.as_ref().expect("activation was released");
            let mut g = vec![0.0; self.len()];
            s.synthesize(&mut g);
            self.grid = Some(g);
        }
    }

    fn spectral(&self) -> &SO3Batch {
        self.spectral.as_ref().expect("spectral form present")
    }

    fn grid(&self) -> &[f64] {
        self.grid.as_ref().expect("grid form present")
    }

    fn is_finite(&self) -> bool {
        self.grid.as_ref().is_none_or(|g| g.iter().all(|v| v.is_finite()))
            && self.spectral.as_ref().is_none_or(|s| s.data().iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone)]
enum Value {
    Input(S2Batch),
    Act(Node),
    Logits(Vec<f64>),
}

impl Value {
    fn node(&self) -> &Node {
        match self {
            Value::Act(n) => n,
            _ => panic!("expected an SO(3) activation"),
        }
    }

    fn node_mut(&mut self) -> &mut Node {
        match self {
            Value::Act(n) => n,
            _ => panic!("expected an SO(3) activation"),
        }
    }
}

#[derive(Debug, Clone)]
enum Saved {
    None,
    Norm { mean: Vec<f64>, inv_std: Vec<f64> },
    Mask(Vec<f64>),
}

/// Activations and per-layer records of one forward pass.
#[derive(Debug, Clone)]
pub struct GradientTape {
    mode: Mode,
    batch: usize,
    values: Vec<Value>,
    saved: Vec<Saved>,
    inputs: Vec<S2Signal>,
    logits: Vec<S2Signal>,
}

impl GradientTape {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network inputs the tape was recorded from.
    pub fn inputs(&self) -> &[S2Signal] {
        &self.inputs
    }

    pub fn logits(&self) -> &[S2Signal] {
        &self.logits
    }
}

/// Accumulated gradient of one activation, in either or both forms.
#[derive(Debug, Clone, Default)]
struct Grad {
    grid: Option<Vec<f64>>,
    spectral: Option<SO3Batch>,
}

impl Grad {
    fn add_grid(&mut self, g: Vec<f64>) {
        match &mut self.grid {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            None => self.grid = Some(g),
        }
    }

    fn add_spectral(&mut self, g: SO3Batch) {
        match &mut self.spectral {
            Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
            None => self.spectral = Some(g),
        }
    }

    fn merge(&mut self, other: Grad) {
        if let Some(g) = other.grid {
            self.add_grid(g);
        }
        if let Some(s) = other.spectral {
            self.add_spectral(s);
        }
    }

    /// Pulls the derived-form part back through its conversion.
    fn into_grid(self, node: &Node) -> Vec<f64> {
        let mut g = self.grid.unwrap_or_else(|| vec![0.0; node.len()]);
        if let Some(s) = self.spectral {
            let mut back = vec![0.0; node.len()];
            s.analyze_adjoint(&mut back);
            g.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
        }
        g
    }

    fn into_spectral(self, node: &Node) -> SO3Batch {
        let mut s = self.spectral.unwrap_or_else(|| SO3Batch::zeros(node.bw, node.batch, node.channels));
        if let Some(g) = self.grid {
            let back = SO3Batch::synthesize_adjoint(node.bw, node.batch, node.channels, &g);
            s.data_mut().iter_mut().zip(back.data()).for_each(|(a, b)| *a += b);
        }
        s
    }
}

fn vol(bw: BandLimit) -> usize {
    bw.side().pow(3)
}

impl SegNet {
    fn stack_inputs(&self, inputs: &[S2Signal]) -> Result<S2Batch> {
        if inputs.is_empty() {
            return Err(Error::ShapeMismatch("empty input batch".into()));
        }
        let (bw, cin) = (self.bw_in(), self.in_channels());
        let mut stacked = Vec::with_capacity(inputs.len() * cin * bw.side().pow(2));
        for x in inputs {
            if x.bw() != bw || x.channels() != cin {
                return Err(Error::ShapeMismatch(format!(
                    "input has bw {} with {} channels, network expects bw {bw} with {cin}",
                    x.bw(),
                    x.channels()
                )));
            }
            stacked.extend_from_slice(x.values());
        }
        Ok(S2Batch::analyze(bw, inputs.len(), cin, &stacked))
    }

    /// Evaluation-mode logits, one signal per input.
    pub fn forward(&self, inputs: &[S2Signal]) -> Result<Vec<S2Signal>> {
        let mut none: Option<&mut rand_chacha::ChaCha8Rng> = None;
        Ok(self.run(inputs, Mode::Eval, &mut none, false)?.0.logits)
    }

    /// Forward pass that keeps a tape. In train mode batch statistics are used
    /// and the running statistics are updated.
    pub fn forward_tape(&mut self, inputs: &[S2Signal], mode: Mode, rng: &mut impl Rng) -> Result<GradientTape> {
        let (tape, stats) = self.run(inputs, mode, &mut Some(rng), true)?;
        for (i, s) in stats.into_iter().enumerate() {
            if let (Some((mean, var)), Some(r)) = (s, self.running[i].as_mut()) {
                for c in 0..mean.len() {
                    r.mean[c] = (1.0 - BN_MOMENTUM) * r.mean[c] + BN_MOMENTUM * mean[c];
                    r.var[c] = (1.0 - BN_MOMENTUM) * r.var[c] + BN_MOMENTUM * var[c];
                }
            }
        }
        Ok(tape)
    }

    /// Forward pass that keeps a tape but leaves the network untouched.
    pub fn forward_tape_frozen(&self, inputs: &[S2Signal], mode: Mode, rng: &mut impl Rng) -> Result<GradientTape> {
        Ok(self.run(inputs, mode, &mut Some(rng), true)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn run<R: Rng>(
        &self,
        inputs: &[S2Signal],
        mode: Mode,
        rng: &mut Option<&mut R>,
        keep: bool,
    ) -> Result<(GradientTape, Vec<Option<(Vec<f64>, Vec<f64>)>>)> {
        let batch = inputs.len();
        let mut values = vec![Value::Input(self.stack_inputs(inputs)?)];
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut stats = vec![None; self.layers.len()];
        let skip_sources: Vec<usize> = self.layers.iter().filter_map(|l| l.skip_source.map(|s| s + 1)).collect();
        for (i, spec) in self.layers.iter().enumerate() {
            let p = &self.params[i];
            let (out, rec) = match spec.kind {
                LayerKind::S2Conv => {
                    let Value::Input(x) = &values[i] else { unreachable!("validated chain") };
                    let y = s2_conv_forward(x, &p[0], spec.out_channels, spec.bw_out());
                    (Value::Act(Node::from_spectral(y)), Saved::None)
                }
                LayerKind::SO3Conv => {
                    let x = values[i].node_mut();
                    x.ensure_spectral();
                    let y = so3_conv_forward(x.spectral(), &p[0], spec.out_channels);
                    (Value::Act(Node::from_spectral(y)), Saved::None)
                }
                LayerKind::Pool | LayerKind::Unpool | LayerKind::FinalPad => {
                    let x = values[i].node_mut();
                    x.ensure_spectral();
                    (Value::Act(Node::from_spectral(x.spectral().resized(spec.bw_out()))), Saved::None)
                }
                LayerKind::PReLU => {
                    let x = values[i].node_mut();
                    x.ensure_grid();
                    let v = vol(x.bw);
                    let mut y = x.grid().to_vec();
                    for (idx, chunk) in y.chunks_exact_mut(v).enumerate() {
                        let a = p[0][idx % x.channels];
                        chunk.iter_mut().for_each(|t| {
                            if *t <= 0.0 {
                                *t *= a
                            }
                        });
                    }
                    (Value::Act(Node::from_grid(x.bw, batch, x.channels, y)), Saved::None)
                }
                LayerKind::BatchNorm => {
                    let x = values[i].node_mut();
                    x.ensure_grid();
                    let (y, rec, st) = batch_norm(x, &p[0], &p[1], self.running[i].as_ref().unwrap(), mode);
                    stats[i] = st;
                    (Value::Act(Node::from_grid(x.bw, batch, x.channels, y)), rec)
                }
                LayerKind::Dropout => {
                    if mode == Mode::Train && spec.dropout_rate > 0.0 {
                        let x = values[i].node_mut();
                        x.ensure_grid();
                        let r = rng.as_mut().expect("train mode needs a random source");
                        let keep_scale = 1.0 / (1.0 - spec.dropout_rate);
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| if r.random::<f64>() < spec.dropout_rate { 0.0 } else { keep_scale })
                            .collect();
                        let y = x.grid().iter().zip(&mask).map(|(a, m)| a * m).collect();
                        (Value::Act(Node::from_grid(x.bw, batch, x.channels, y)), Saved::Mask(mask))
                    } else {
                        (values[i].clone(), Saved::None)
                    }
                }
                LayerKind::SkipConcat => {
                    let src = spec.skip_source.unwrap() + 1;
                    values[i].node_mut().ensure_spectral();
                    values[src].node_mut().ensure_spectral();
                    let y = concat_channels(values[i].node().spectral(), values[src].node().spectral());
                    (Value::Act(Node::from_spectral(y)), Saved::None)
                }
                LayerKind::IntegrateGamma => {
                    let x = values[i].node_mut();
                    x.ensure_spectral();
                    let g = integrate_gamma_spectral(x.spectral());
                    let mut out = vec![0.0; batch * x.channels * x.bw.side().pow(2)];
                    g.synthesize(&mut out);
                    (Value::Logits(out), Saved::None)
                }
            };
            let finite = match &out {
                Value::Act(n) => n.is_finite(),
                Value::Logits(v) => v.iter().all(|x| x.is_finite()),
                Value::Input(_) => true,
            };
            if !finite {
                return Err(Error::NonFiniteActivation(i));
            }
            release(&mut values[i], spec.kind, mode, keep, skip_sources.contains(&i));
            values.push(out);
            saved.push(rec);
        }
        let Some(Value::Logits(flat)) = values.last() else { unreachable!("validated chain") };
        let (bw, c) = (self.bw_in(), self.num_classes());
        let plane = bw.side().pow(2);
        let logits = (0..batch)
            .map(|b| S2Signal::from_vec(bw, c, flat[b * c * plane..(b + 1) * c * plane].to_vec()).unwrap())
            .collect();
        if !keep {
            values.clear();
            saved.clear();
        }
        Ok((GradientTape { mode, batch, values, saved, inputs: inputs.to_vec(), logits }, stats))
    }

    /// Parameter gradients of a train-mode tape, given `dL/dlogits` per input.
    pub fn backward(&self, tape: &GradientTape, dlogits: &[S2Signal]) -> Result<Params> {
        let n = self.layers.len();
        if tape.mode != Mode::Train {
            return Err(Error::TapeMismatch("backward needs a train-mode tape".into()));
        }
        if tape.values.len() != n + 1 || tape.saved.len() != n {
            return Err(Error::TapeMismatch(format!("tape has {} layers, network has {n}", tape.saved.len())));
        }
        let (bw, c) = (self.bw_in(), self.num_classes());
        if dlogits.len() != tape.batch || dlogits.iter().any(|g| g.bw() != bw || g.channels() != c) {
            return Err(Error::TapeMismatch("logit gradient does not match the recorded batch".into()));
        }
        let mut grads = self.zero_grads();
        let mut adj: Vec<Grad> = vec![Grad::default(); n + 1];
        let upstream: Vec<f64> = dlogits.iter().flat_map(|g| g.values().iter().cloned()).collect();
        for i in (0..n).rev() {
            let spec = &self.layers[i];
            let p = &self.params[i];
            let g_out = std::mem::take(&mut adj[i + 1]);
            match spec.kind {
                LayerKind::IntegrateGamma => {
                    let node = tape.values[i].node();
                    let g2 = S2Batch::synthesize_adjoint(bw, tape.batch, node.channels, &upstream);
                    adj[i].add_spectral(integrate_gamma_spectral_adjoint(&g2));
                }
                LayerKind::Dropout if !matches!(tape.saved[i], Saved::Mask(_)) => adj[i].merge(g_out),
                _ => {
                    let out = tape.values[i + 1].node();
                    match spec.kind {
                        LayerKind::S2Conv => {
                            let Value::Input(x) = &tape.values[i] else { unreachable!() };
                            let g = g_out.into_spectral(out);
                            grads[i][0] = s2_conv_backward(x, &p[0], spec.out_channels, &g, false).0;
                        }
                        LayerKind::SO3Conv => {
                            let g = g_out.into_spectral(out);
                            let x = tape.values[i].node().spectral();
                            let (dk, dx) = so3_conv_backward(x, &p[0], spec.out_channels, &g, true);
                            grads[i][0] = dk;
                            adj[i].add_spectral(dx.unwrap());
                        }
                        LayerKind::Pool | LayerKind::Unpool | LayerKind::FinalPad => {
                            let g = g_out.into_spectral(out);
                            adj[i].add_spectral(g.resized(spec.bw_in()));
                        }
                        LayerKind::SkipConcat => {
                            let g = g_out.into_spectral(out);
                            let (a, b) = split_channels(&g, spec.in_channels);
                            adj[i].add_spectral(a);
                            adj[spec.skip_source.unwrap() + 1].add_spectral(b);
                        }
                        LayerKind::PReLU => {
                            let mut g = g_out.into_grid(out);
                            let x = tape.values[i].node();
                            let v = vol(x.bw);
                            let slopes = &mut grads[i][0];
                            for (idx, (gc, xc)) in g.chunks_exact_mut(v).zip(x.grid().chunks_exact(v)).enumerate() {
                                let ch = idx % x.channels;
                                let a = p[0][ch];
                                for (gv, &xv) in gc.iter_mut().zip(xc) {
                                    if xv <= 0.0 {
                                        slopes[ch] += xv * *gv;
                                        *gv *= a;
                                    }
                                }
                            }
                            adj[i].add_grid(g);
                        }
                        LayerKind::BatchNorm => {
                            let g = g_out.into_grid(out);
                            let Saved::Norm { mean, inv_std } = &tape.saved[i] else { unreachable!() };
                            let x = tape.values[i].node();
                            let (dx, ds, db) = batch_norm_backward(x, &g, &p[0], mean, inv_std);
                            grads[i][0] = ds;
                            grads[i][1] = db;
                            adj[i].add_grid(dx);
                        }
                        LayerKind::Dropout => {
                            let Saved::Mask(mask) = &tape.saved[i] else { unreachable!() };
                            let mut g = g_out.into_grid(out);
                            g.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
                            adj[i].add_grid(g);
                        }
                        LayerKind::IntegrateGamma => unreachable!(),
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Frees what neither later layers nor the backward pass will read.
fn release(v: &mut Value, consumer: LayerKind, mode: Mode, keep: bool, skip_source: bool) {
    let Value::Act(node) = v else {
        if !keep {
            if let Value::Input(_) = v {
                *v = Value::Logits(Vec::new());
            }
        }
        return;
    };
    if skip_source {
        node.ensure_spectral();
    }
    let backward = keep && mode == Mode::Train;
    let keep_grid = backward && matches!(consumer, LayerKind::PReLU | LayerKind::BatchNorm);
    let keep_spectral = skip_source || (backward && consumer == LayerKind::SO3Conv);
    if !keep_grid {
        node.grid = None;
    }
    if !keep_spectral {
        node.spectral = None;
    }
}

type BnOut = (Vec<f64>, Saved, Option<(Vec<f64>, Vec<f64>)>);

fn batch_norm(x: &Node, scale: &[f64], shift: &[f64], running: &super::RunningStats, mode: Mode) -> BnOut {
    let v = vol(x.bw);
    let c = x.channels;
    let data = x.grid();
    let count = (x.batch * v) as f64;
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for (idx, chunk) in data.chunks_exact(v).enumerate() {
                mean[idx % c] += chunk.iter().sum::<f64>();
            }
            mean.iter_mut().for_each(|m| *m /= count);
            for (idx, chunk) in data.chunks_exact(v).enumerate() {
                let m = mean[idx % c];
                var[idx % c] += chunk.iter().map(|t| (t - m) * (t - m)).sum::<f64>();
            }
            var.iter_mut().for_each(|s| *s /= count);
            (mean, var)
        }
        Mode::Eval => (running.mean.clone(), running.var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|s| 1.0 / (s + BN_EPS).sqrt()).collect();
    let mut y = data.to_vec();
    for (idx, chunk) in y.chunks_exact_mut(v).enumerate() {
        let ch = idx % c;
        let (m, k, b) = (mean[ch], inv_std[ch] * scale[ch], shift[ch]);
        chunk.iter_mut().for_each(|t| *t = (*t - m) * k + b);
    }
    let stats = (mode == Mode::Train).then(|| {
        let unbiased = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
        (mean.clone(), var.iter().map(|s| s * unbiased).collect())
    });
    (y, Saved::Norm { mean, inv_std }, stats)
}

fn batch_norm_backward(x: &Node, g: &[f64], scale: &[f64], mean: &[f64], inv_std: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let v = vol(x.bw);
    let c = x.channels;
    let data = x.grid();
    let count = (x.batch * v) as f64;
    let mut dshift = vec![0.0; c];
    let mut dscale = vec![0.0; c];
    for (idx, (gc, xc)) in g.chunks_exact(v).zip(data.chunks_exact(v)).enumerate() {
        let ch = idx % c;
        let (m, s) = (mean[ch], inv_std[ch]);
        for (&gv, &xv) in gc.iter().zip(xc) {
            dshift[ch] += gv;
            dscale[ch] += gv * (xv - m) * s;
        }
    }
    let mut dx = vec![0.0; g.len()];
    for (idx, ((dc, gc), xc)) in dx.chunks_exact_mut(v).zip(g.chunks_exact(v)).zip(data.chunks_exact(v)).enumerate() {
        let ch = idx % c;
        let (m, s) = (mean[ch], inv_std[ch]);
        let (mg, mgx) = (dshift[ch] / count, dscale[ch] / count);
        let k = scale[ch] * s;
        for ((d, &gv), &xv) in dc.iter_mut().zip(gc).zip(xc) {
            *d = k * (gv - mg - (xv - m) * s * mgx);
        }
    }
    (dx, dscale, dshift)
}

impl LayerSpec {
    /// True if the layer holds trainable tensors.
    pub fn has_params(&self) -> bool {
        matches!(self.kind, LayerKind::S2Conv | LayerKind::SO3Conv | LayerKind::PReLU | LayerKind::BatchNorm)
    }
}
