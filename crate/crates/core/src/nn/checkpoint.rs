//! Binary checkpoints: `"S2CK" | version u32 | u32-prefixed JSON layer list | blobs`.
//!
//! Each layer writes a blob count followed by tagged blobs: tag 0 is a kernel
//! bank as a sphere spectrum record, tag 1 a plain f64 vector.

use std::io::{Read, Write};

use super::{LayerKind, LayerSpec, RunningStats, SegNet};
use crate::error::{Error, Result};
use crate::spectral_ops::{S2KernelBank, SO3KernelBank};
use crate::sphere::{read_u32, SphereRecord};

const MAGIC: &[u8; 4] = b"S2CK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn bad(reason: impl Into<String>) -> Error {
    Error::MalformedFile { path: "<checkpoint>".into(), reason: reason.into() }
}

fn write_vec<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    w.write_all(&[1])?;
    w.write_all(&(v.len() as u32).to_le_bytes())?;
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    w.write_all(&bytes)?;
    Ok(())
}

fn read_tag<R: Read>(r: &mut R, want: u8) -> Result<()> {
    let mut tag = [0u8];
    r.read_exact(&mut tag).map_err(|_| bad("truncated blob"))?;
    if tag[0] != want {
        return Err(bad(format!("expected blob tag {want}, found {}", tag[0])));
    }
    Ok(())
}

fn read_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    read_tag(r, 1)?;
    let n = read_u32(r).map_err(|_| bad("truncated blob"))? as usize;
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(|_| bad("truncated blob"))?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn write_checkpoint<W: Write>(net: &SegNet, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(net.layers()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for ((spec, p), run) in net.layers().iter().zip(net.params()).zip(net.running()) {
        let (cin, cout, bw) = (spec.in_channels, spec.out_channels, spec.bw_in());
        match spec.kind {
            LayerKind::S2Conv => {
                w.write_all(&1u32.to_le_bytes())?;
                w.write_all(&[0])?;
                SphereRecord::S2Spectrum(S2KernelBank::from_real(bw, cin, cout, &p[0]).weights).write_to(w)?;
            }
            LayerKind::SO3Conv => {
                w.write_all(&1u32.to_le_bytes())?;
                w.write_all(&[0])?;
                SphereRecord::SO3Spectrum(SO3KernelBank::from_real(bw, cin, cout, &p[0]).weights).write_to(w)?;
            }
            LayerKind::PReLU => {
                w.write_all(&1u32.to_le_bytes())?;
                write_vec(w, &p[0])?;
            }
            LayerKind::BatchNorm => {
                let r = run.as_ref().expect("batch norm carries running statistics");
                w.write_all(&4u32.to_le_bytes())?;
                for v in [&p[0], &p[1], &r.mean, &r.var] {
                    write_vec(w, v)?;
                }
            }
            _ => w.write_all(&0u32.to_le_bytes())?,
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<SegNet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(r).map_err(|_| bad("truncated header"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = read_u32(r).map_err(|_| bad("truncated header"))? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    let layers: Vec<LayerSpec> = serde_json::from_slice(&header).map_err(|e| bad(format!("layer list: {e}")))?;
    let mut params = Vec::with_capacity(layers.len());
    let mut running = Vec::with_capacity(layers.len());
    for spec in &layers {
        let count = read_u32(r).map_err(|_| bad("truncated blob"))? as usize;
        let (cin, cout) = (spec.in_channels, spec.out_channels);
        let mut p = Vec::new();
        let mut run = None;
        match (spec.kind, count) {
            (LayerKind::S2Conv | LayerKind::SO3Conv, 1) => {
                read_tag(r, 0)?;
                let k = match (spec.kind, SphereRecord::read_from(r)?) {
                    (LayerKind::S2Conv, SphereRecord::S2Spectrum(s)) => S2KernelBank::new(cin, cout, s)?.to_real(),
                    (LayerKind::SO3Conv, SphereRecord::SO3Spectrum(s)) => SO3KernelBank::new(cin, cout, s)?.to_real(),
                    _ => return Err(bad("kernel record has the wrong kind")),
                };
                p.push(k);
            }
            (LayerKind::PReLU, 1) => p.push(read_vec(r)?),
            (LayerKind::BatchNorm, 4) => {
                p.push(read_vec(r)?);
                p.push(read_vec(r)?);
                run = Some(RunningStats { mean: read_vec(r)?, var: read_vec(r)? });
            }
            (LayerKind::S2Conv | LayerKind::SO3Conv | LayerKind::PReLU | LayerKind::BatchNorm, n) => {
                return Err(bad(format!("{:?} layer has {n} blobs", spec.kind)));
            }
            (_, 0) => {}
            (kind, n) => return Err(bad(format!("{kind:?} layer has {n} blobs"))),
        }
        params.push(p);
        running.push(run);
    }
    if let Some(RunningStats { mean, var }) = running.iter().flatten().find(|s| s.mean.len() != s.var.len()) {
        return Err(bad(format!("running mean has {} entries, variance {}", mean.len(), var.len())));
    }
    SegNet::from_parts(layers, params, running)
}
