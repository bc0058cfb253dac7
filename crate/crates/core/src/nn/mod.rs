//! The encoder-decoder segmentation network.
//!
//! Layers run on batches. An SO(3) activation is held on the grid, in the
//! spectral domain, or both: each layer asks for the form it needs and the
//! conversion is cached on the activation, so a skip connection reuses the
//! coefficients its first consumer already computed.

mod adam;
mod checkpoint;
mod graph;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use graph::{GradientTape, Mode};

use crate::error::{Error, Result};
use crate::spectral_ops::{s2_kernel_init, s2_kernel_len, so3_kernel_init, so3_kernel_len};
use crate::sphere::BandLimit;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    S2Conv,
    SO3Conv,
    Pool,
    Unpool,
    PReLU,
    BatchNorm,
    Dropout,
    SkipConcat,
    IntegrateGamma,
    FinalPad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub bw_in: usize,
    pub bw_out: usize,
    #[serde(default)]
    pub dropout_rate: f64,
    /// Layer whose output is concatenated (SkipConcat only).
    #[serde(default)]
    pub skip_source: Option<usize>,
}

impl LayerSpec {
    fn new(kind: LayerKind, in_channels: usize, out_channels: usize, bw_in: usize, bw_out: usize) -> Self {
        Self { kind, in_channels, out_channels, bw_in, bw_out, dropout_rate: 0.0, skip_source: None }
    }

    fn same(kind: LayerKind, channels: usize, bw: usize) -> Self {
        Self::new(kind, channels, channels, bw, bw)
    }

    pub fn bw_in(&self) -> BandLimit {
        BandLimit::new(self.bw_in).expect("validated bandwidth")
    }

    pub fn bw_out(&self) -> BandLimit {
        BandLimit::new(self.bw_out).expect("validated bandwidth")
    }
}

/// Architecture knobs; the defaults give the bw-32 network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub bw_in: usize,
    pub in_channels: usize,
    pub num_classes: usize,
    /// Encoder widths, one per resolution level.
    pub widths: Vec<usize>,
    pub dropout: f64,
    /// Bandwidth reduction of the S² convolution.
    pub lift_ratio: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { bw_in: 32, in_channels: 2, num_classes: 5, widths: vec![16, 32, 64], dropout: 0.2, lift_ratio: 0.7 }
    }
}

impl NetConfig {
    /// Bandwidth at each encoder level: `⌊ratio·bw⌋`, then halving.
    pub fn bandwidth_chain(&self) -> Result<Vec<usize>> {
        let too_small = || Error::BandwidthTooSmall { got: self.bw_in, min: self.min_bw() };
        let mut chain = vec![(self.lift_ratio * self.bw_in as f64 + 1e-9).floor() as usize];
        for _ in 1..self.widths.len() {
            chain.push(chain.last().unwrap() / 2);
        }
        if chain.iter().any(|&b| b == 0) {
            return Err(too_small());
        }
        Ok(chain)
    }

    /// Smallest input bandwidth with a non-empty chain.
    fn min_bw(&self) -> usize {
        (1..).find(|&b| {
            let mut x = (self.lift_ratio * b as f64 + 1e-9).floor() as usize;
            for _ in 1..self.widths.len() {
                x /= 2;
            }
            x >= 1
        })
        .unwrap_or(1)
    }

    /// Expands the configuration into the layer list.
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        use LayerKind::*;
        if self.widths.is_empty() || self.widths.contains(&0) || self.in_channels == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig("widths, inputs and classes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(self.lift_ratio > 0.0 && self.lift_ratio <= 1.0) {
            return Err(Error::InvalidConfig("dropout must be in [0, 1) and lift_ratio in (0, 1]".into()));
        }
        let bws = self.bandwidth_chain()?;
        let w = &self.widths;
        let k = w.len();
        let mut layers = Vec::new();
        let mut skips = Vec::new();
        let block = |layers: &mut Vec<LayerSpec>, c: usize, b: usize| {
            layers.push(LayerSpec::same(PReLU, c, b));
            layers.push(LayerSpec::same(BatchNorm, c, b));
        };
        layers.push(LayerSpec::new(S2Conv, self.in_channels, w[0], self.bw_in, bws[0]));
        block(&mut layers, w[0], bws[0]);
        skips.push(layers.len() - 1);
        for i in 1..k {
            layers.push(LayerSpec::new(SO3Conv, w[i - 1], w[i], bws[i - 1], bws[i - 1]));
            block(&mut layers, w[i], bws[i - 1]);
            layers.push(LayerSpec::new(Pool, w[i], w[i], bws[i - 1], bws[i]));
            skips.push(layers.len() - 1);
        }
        if self.dropout > 0.0 {
            let b = bws[k - 1];
            let mut d = LayerSpec::same(Dropout, w[k - 1], b);
            d.dropout_rate = self.dropout;
            layers.push(d);
        }
        for i in (1..k).rev() {
            let c = w[i];
            layers.push(LayerSpec::new(Unpool, c, c, bws[i], bws[i - 1]));
            let mut cat = LayerSpec::new(SkipConcat, c, c + w[i - 1], bws[i - 1], bws[i - 1]);
            cat.skip_source = Some(skips[i - 1]);
            layers.push(cat);
            layers.push(LayerSpec::new(SO3Conv, c + w[i - 1], w[i - 1], bws[i - 1], bws[i - 1]));
            block(&mut layers, w[i - 1], bws[i - 1]);
        }
        let c = self.num_classes;
        layers.push(LayerSpec::new(SO3Conv, w[0], c, bws[0], bws[0]));
        block(&mut layers, c, bws[0]);
        layers.push(LayerSpec::new(FinalPad, c, c, bws[0], self.bw_in));
        layers.push(LayerSpec::same(IntegrateGamma, c, self.bw_in));
        validate(&layers)?;
        Ok(layers)
    }
}

/// Checks channel and bandwidth consistency of a layer chain.
pub fn validate(layers: &[LayerSpec]) -> Result<()> {
    use LayerKind::*;
    let bad = |i: usize, why: &str| Err(Error::ShapeMismatch(format!("layer {i}: {why}")));
    if layers.first().map(|l| l.kind) != Some(S2Conv) {
        return bad(0, "the first layer must be the S² convolution");
    }
    let n = layers.len();
    if n < 3 || layers[n - 2].kind != FinalPad || layers[n - 1].kind != IntegrateGamma {
        return bad(n.saturating_sub(1), "the network must end with FinalPad and IntegrateGamma");
    }
    if layers[n - 1].bw_out != layers[0].bw_in {
        return bad(n - 1, "output bandwidth differs from input bandwidth");
    }
    for (i, l) in layers.iter().enumerate() {
        if l.bw_in == 0 || l.bw_out == 0 || l.in_channels == 0 || l.out_channels == 0 {
            return bad(i, "zero bandwidth or channel count");
        }
        if i > 0 {
            let p = &layers[i - 1];
            if l.kind == S2Conv {
                return bad(i, "only the first layer may be an S² convolution");
            }
            if p.bw_out != l.bw_in || p.out_channels != l.in_channels {
                return bad(i, "does not match the previous layer");
            }
        }
        let ok = match l.kind {
            S2Conv => l.bw_out <= l.bw_in,
            SO3Conv => l.bw_in == l.bw_out,
            Pool => l.bw_out <= l.bw_in && l.in_channels == l.out_channels,
            Unpool | FinalPad => l.bw_out >= l.bw_in && l.in_channels == l.out_channels,
            PReLU | BatchNorm | IntegrateGamma => l.bw_in == l.bw_out && l.in_channels == l.out_channels,
            Dropout => {
                l.bw_in == l.bw_out && l.in_channels == l.out_channels && (0.0..1.0).contains(&l.dropout_rate)
            }
            SkipConcat => match l.skip_source {
                Some(s) if s < i => {
                    let src = &layers[s];
                    src.bw_out == l.bw_in && l.out_channels == l.in_channels + src.out_channels && l.bw_out == l.bw_in
                }
                _ => false,
            },
        };
        if !ok {
            return bad(i, &format!("inconsistent {:?} layer", l.kind));
        }
    }
    Ok(())
}

/// Running batch-norm statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Per-layer parameter tensors: `[kernel]` for convolutions, `[slopes]` for
/// PReLU, `[scale, shift]` for batch norm, empty otherwise.
pub type Params = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SegNet {
    layers: Vec<LayerSpec>,
    params: Params,
    running: Vec<Option<RunningStats>>,
}

impl SegNet {
    /// Network with randomly initialized kernels.
    pub fn new(layers: Vec<LayerSpec>, rng: &mut impl Rng) -> Result<Self> {
        validate(&layers)?;
        let mut params = Vec::with_capacity(layers.len());
        let mut running = Vec::with_capacity(layers.len());
        for l in &layers {
            let (cin, cout) = (l.in_channels, l.out_channels);
            let (p, r) = match l.kind {
                LayerKind::S2Conv => (vec![s2_kernel_init(l.bw_in(), cin, cout, rng)], None),
                LayerKind::SO3Conv => (vec![so3_kernel_init(l.bw_in(), cin, cout, rng)], None),
                LayerKind::PReLU => (vec![vec![PRELU_INIT; cout]], None),
                LayerKind::BatchNorm => (
                    vec![vec![1.0; cout], vec![0.0; cout]],
                    Some(RunningStats { mean: vec![0.0; cout], var: vec![1.0; cout] }),
                ),
                _ => (Vec::new(), None),
            };
            params.push(p);
            running.push(r);
        }
        Ok(Self { layers, params, running })
    }

    pub fn from_config(cfg: &NetConfig, rng: &mut impl Rng) -> Result<Self> {
        Self::new(cfg.layers()?, rng)
    }

    pub(crate) fn from_parts(layers: Vec<LayerSpec>, params: Params, running: Vec<Option<RunningStats>>) -> Result<Self> {
        validate(&layers)?;
        let net = Self { layers, params, running };
        let want = net.expected_shapes();
        let got: Vec<Vec<usize>> = net.params.iter().map(|p| p.iter().map(Vec::len).collect()).collect();
        if want != got || net.running.len() != net.layers.len() {
            return Err(Error::ShapeMismatch("parameter shapes do not match the layer specs".into()));
        }
        Ok(net)
    }

    fn expected_shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::S2Conv => vec![s2_kernel_len(l.bw_in(), l.in_channels, l.out_channels)],
                LayerKind::SO3Conv => vec![so3_kernel_len(l.bw_in(), l.in_channels, l.out_channels)],
                LayerKind::PReLU => vec![l.out_channels],
                LayerKind::BatchNorm => vec![l.out_channels; 2],
                _ => vec![],
            })
            .collect()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn running(&self) -> &[Option<RunningStats>] {
        &self.running
    }

    pub fn running_mut(&mut self) -> &mut [Option<RunningStats>] {
        &mut self.running
    }

    pub fn bw_in(&self) -> BandLimit {
        self.layers[0].bw_in()
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().out_channels
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().flatten().map(Vec::len).sum()
    }

    /// Parameters of convolution kernels only.
    pub fn conv_parameter_count(&self) -> usize {
        self.layers
            .iter()
            .zip(&self.params)
            .filter(|(l, _)| matches!(l.kind, LayerKind::S2Conv | LayerKind::SO3Conv))
            .map(|(_, p)| p[0].len())
            .sum()
    }

    /// Zero tensors shaped like the parameters.
    pub fn zero_grads(&self) -> Params {
        self.params.iter().map(|p| p.iter().map(|t| vec![0.0; t.len()]).collect()).collect()
    }
}

/// The default encoder-decoder at input bandwidth `bw_in`.
pub fn default_architecture(bw_in: BandLimit, in_channels: usize, num_classes: usize) -> Result<NetConfig> {
    if bw_in.get() < 8 {
        return Err(Error::BandwidthTooSmall { got: bw_in.get(), min: 8 });
    }
    let cfg = NetConfig { bw_in: bw_in.get(), in_channels, num_classes, ..NetConfig::default() };
    cfg.layers()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_chain_for_bw32() {
        let cfg = default_architecture(BandLimit::new(32).unwrap(), 2, 5).unwrap();
        assert_eq!(cfg.bandwidth_chain().unwrap(), vec![22, 11, 5]);
        let layers = cfg.layers().unwrap();
        let bws: Vec<usize> = layers.iter().map(|l| l.bw_out).collect();
        let mut distinct = bws.clone();
        distinct.dedup();
        assert_eq!(distinct, vec![22, 11, 5, 11, 22, 32]);
        assert_eq!(layers.iter().filter(|l| l.kind == LayerKind::S2Conv).count(), 1);
        let cats: Vec<usize> = layers.iter().filter(|l| l.kind == LayerKind::SkipConcat).map(|l| l.out_channels).collect();
        assert_eq!(cats, vec![96, 48]);
        assert_eq!(layers.last().unwrap().out_channels, 5);
    }

    #[test]
    fn small_bandwidth_rejected() {
        assert!(matches!(
            default_architecture(BandLimit::new(7).unwrap(), 2, 5),
            Err(Error::BandwidthTooSmall { got: 7, min: 8 })
        ));
        let cfg = NetConfig { bw_in: 2, ..NetConfig::default() };
        assert!(matches!(cfg.layers(), Err(Error::BandwidthTooSmall { .. })));
    }

    #[test]
    fn doubling_widths_quadruples_conv_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let small = NetConfig { bw_in: 8, widths: vec![4, 8], in_channels: 4, num_classes: 6, ..NetConfig::default() };
        let big = NetConfig { widths: vec![8, 16], in_channels: 8, num_classes: 12, ..small.clone() };
        let a = SegNet::from_config(&small, &mut rng).unwrap().conv_parameter_count();
        let b = SegNet::from_config(&big, &mut rng).unwrap().conv_parameter_count();
        assert_eq!(b, 4 * a);
    }

    #[test]
    fn validation_catches_broken_chains() {
        let mut layers = NetConfig { bw_in: 8, widths: vec![4, 8], ..NetConfig::default() }.layers().unwrap();
        layers[3].in_channels += 1;
        assert!(validate(&layers).is_err());
        let mut layers = NetConfig { bw_in: 8, widths: vec![4, 8], ..NetConfig::default() }.layers().unwrap();
        layers.pop();
        assert!(validate(&layers).is_err());
    }
}
