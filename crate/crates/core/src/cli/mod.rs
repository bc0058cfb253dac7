//! The `s2seg` commands as library functions; `main.rs` only parses arguments.
//!
//! Every command is a pure function of its [`RunConfig`]: all randomness is
//! drawn from generators seeded by `seed`, so reruns give identical files.

mod bench;
mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use bench::{cmd_bench, cmd_rotate_bench, rotation_sweep, BenchReport, RotationRow};
pub use config::{
    ArchConfig, BenchConfig, DataConfig, LossConfig, OptimConfig, PathsConfig, RotateConfig, RunConfig, TrainConfig,
    WeightMode,
};

use crate::data::{load_kitti_cloud, load_kitti_pair, make_split, synth_scan, Dataset, Remap, Subset, CLASS_NAMES, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::loss_metrics::{
    argmax, compute_weights, metrics_report, miou_accuracy, softmax, total_loss, ClassWeights, ConfusionMatrix,
    MetricsReport,
};
use crate::nn::{read_checkpoint, write_checkpoint, Adam, Mode, SegNet};
use crate::projection::{back_project, project, LabeledPointCloud, SphericalScan};
use crate::sphere::{BandLimit, S2Signal, SphereRecord};

fn bandwidth(cfg: &RunConfig) -> Result<BandLimit> {
    BandLimit::new(cfg.bw)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "cloud".into())
}

pub(crate) fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::InvalidConfig(format!("paths.{what} is not set")))
}

/// Writes `data.count` synthetic scans, cycling through `data.presets`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.data.count.max(1).to_string().len().max(4);
    let mut scans = Vec::with_capacity(cfg.data.count);
    for i in 0..cfg.data.count {
        let preset = &cfg.data.presets[i % cfg.data.presets.len()];
        let scene = cfg.data.scene(preset, rng.random())?;
        scans.push((format!("{i:0width$}"), synth_scan(&scene)?));
    }
    let stems: Vec<String> = scans.iter().map(|(s, _)| s.clone()).collect();
    let (train, _) = make_split(&stems, cfg.data.train_fraction, cfg.seed)?;
    let items: Vec<_> = scans
        .into_iter()
        .map(|(s, c)| {
            let subset = if train.contains(&s) { Subset::Train } else { Subset::Val };
            (s, c, subset)
        })
        .collect();
    Dataset::create(&cfg.data.root, &items)
}

/// `paths.cloud`, labelled through the dataset remap when `paths.labels` is set.
fn load_cloud(cfg: &RunConfig) -> Result<LabeledPointCloud> {
    let cloud = required(&cfg.paths.cloud, "cloud")?;
    match &cfg.paths.labels {
        Some(l) => {
            let r = cfg.data.root.join("remap.txt");
            let remap = if r.exists() { Remap::load(&r)? } else { Remap::identity() };
            load_kitti_pair(cloud, l, &remap)
        }
        None => load_kitti_cloud(cloud),
    }
}

/// Projects `paths.cloud`; writes the scan record and range/label previews.
pub fn cmd_project(cfg: &RunConfig) -> Result<SphericalScan> {
    let cloud = load_cloud(cfg)?;
    let bw = bandwidth(cfg)?;
    let scan = project(&cloud, bw)?;
    let stem = stem_of(required(&cfg.paths.cloud, "cloud")?);
    fs::create_dir_all(&cfg.paths.out)?;
    let n = bw.side();
    let mut values = scan.signal.values().to_vec();
    values.extend(scan.cell_label.iter().map(|&l| l as f64));
    let record = SphereRecord::S2Signal(S2Signal::from_vec(bw, 3, values)?);
    record.write_to(&mut fs::File::create(cfg.paths.out.join(format!("{stem}.scan")))?)?;
    output::write_pgm(&cfg.paths.out.join(format!("{stem}.range.pgm")), n, n, &output::range_pixels(&scan, cfg.data.max_range))?;
    output::write_pgm(&cfg.paths.out.join(format!("{stem}.labels.pgm")), n, n, &output::label_pixels(&scan.cell_label))?;
    Ok(scan)
}

/// Network input and cell targets of one projected scan.
#[derive(Debug, Clone)]
pub struct Sample {
    pub features: S2Signal,
    pub targets: Vec<u8>,
}

fn prepare(ds: &Dataset, stems: &[&str], bw: BandLimit, max_range: f64) -> Result<Vec<Sample>> {
    stems
        .iter()
        .map(|s| {
            let scan = project(&ds.load(s)?, bw)?;
            Ok(Sample { features: scan.features(max_range), targets: scan.cell_label.clone() })
        })
        .collect()
}

/// Cell-level confusion of eval-mode predictions.
pub fn evaluate(net: &SegNet, samples: &[Sample], batch: usize) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(net.num_classes());
    for chunk in samples.chunks(batch.max(1)) {
        let inputs: Vec<S2Signal> = chunk.iter().map(|s| s.features.clone()).collect();
        for (logits, s) in net.forward(&inputs)?.iter().zip(chunk) {
            cm.add_all(&s.targets, &argmax(logits));
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_miou: f64,
    pub val_accuracy: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_miou: Option<f64>,
    pub checkpoint: PathBuf,
    pub elapsed_secs: f64,
    /// Why training ended before the configured epoch count, if it did.
    pub stopped: Option<String>,
}

fn class_weights(cfg: &RunConfig, train: &[Sample]) -> Result<ClassWeights> {
    match cfg.loss.class_weights {
        WeightMode::Uniform => Ok(ClassWeights::uniform(NUM_CLASSES)),
        WeightMode::Frequency => {
            let mut hist = vec![0u64; NUM_CLASSES];
            for t in train.iter().flat_map(|s| &s.targets) {
                if let Some(h) = hist.get_mut(*t as usize) {
                    *h += 1;
                }
            }
            compute_weights(&hist)
        }
    }
}

/// Adam on weighted cross-entropy plus Lovász-softmax; keeps the best
/// validation checkpoint at `<out>/best.ckpt`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    let start = Instant::now();
    let bw = bandwidth(cfg)?;
    let ds = Dataset::open(&cfg.data.root)?;
    let train = prepare(&ds, &ds.stems(Subset::Train), bw, cfg.data.max_range)?;
    let val = prepare(&ds, &ds.stems(Subset::Val), bw, cfg.data.max_range)?;
    if train.is_empty() {
        return Err(Error::EmptyList);
    }
    let weights = class_weights(cfg, &train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = SegNet::from_config(&cfg.net_config(), &mut rng)?;
    let o = &cfg.optim;
    let mut adam = Adam::new(&net, o.lr);
    (adam.beta1, adam.beta2, adam.eps) = (o.beta1, o.beta2, o.eps);
    fs::create_dir_all(&cfg.paths.out)?;
    let ckpt = cfg.paths.out.join("best.ckpt");
    let save = |net: &SegNet| -> Result<()> {
        let mut buf = Vec::new();
        write_checkpoint(net, &mut buf)?;
        fs::write(&ckpt, buf)?;
        Ok(())
    };
    save(&net)?;
    log::info!("{} training / {} validation scans, {} parameters", train.len(), val.len(), net.parameter_count());

    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: None,
        best_miou: None,
        checkpoint: ckpt.clone(),
        elapsed_secs: 0.0,
        stopped: None,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=o.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (step, batch) in order.chunks(o.batch_size).enumerate() {
            let inputs: Vec<S2Signal> = batch.iter().map(|&i| train[i].features.clone()).collect();
            let tape = net.forward_tape(&inputs, Mode::Train, &mut rng)?;
            let mut dlogits = Vec::with_capacity(batch.len());
            let scale = 1.0 / batch.len() as f64;
            for (logits, &i) in tape.logits().iter().zip(batch) {
                let l = total_loss(logits, &train[i].targets, &weights)?;
                loss_sum += l.total;
                let g: Vec<f64> = l.grad.iter().map(|v| v * scale).collect();
                dlogits.push(S2Signal::from_vec(bw, NUM_CLASSES, g)?);
            }
            let grads = net.backward(&tape, &dlogits)?;
            adam.step(&mut net, &grads)?;
            if cfg.train.log_every > 0 && (step + 1) % cfg.train.log_every == 0 {
                log::debug!("epoch {epoch} step {}: mean loss {:.4}", step + 1, loss_sum / ((step + 1) * o.batch_size) as f64);
            }
        }
        let (miou, acc) = if val.is_empty() {
            (0.0, 0.0)
        } else {
            let m = miou_accuracy(&evaluate(&net, &val, o.batch_size)?)?;
            (m.miou, m.accuracy)
        };
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_miou: miou,
            val_accuracy: acc,
            elapsed_secs: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, val mIoU {:.4}, val acc {:.4} ({:.0} s)",
            entry.train_loss,
            miou,
            acc,
            entry.elapsed_secs
        );
        report.epochs.push(entry);
        if report.best_miou.is_none_or(|b| miou > b) {
            report.best_miou = Some(miou);
            report.best_epoch = Some(epoch);
            save(&net)?;
        }
        if cfg.train.stop_at_miou.is_some_and(|t| miou >= t) {
            report.stopped = Some(format!("validation mIoU reached {miou:.4}"));
            break;
        }
        if cfg.train.time_budget_secs.is_some_and(|b| start.elapsed().as_secs_f64() > b) {
            report.stopped = Some("time budget exhausted".into());
            break;
        }
    }
    report.elapsed_secs = start.elapsed().as_secs_f64();
    let rows: Vec<Vec<String>> = report
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                format!("{:.6}", e.train_loss),
                format!("{:.6}", e.val_miou),
                format!("{:.6}", e.val_accuracy),
                format!("{:.1}", e.elapsed_secs),
            ]
        })
        .collect();
    output::write_csv(
        &cfg.paths.out.join("train_log.csv"),
        &["epoch", "train_loss", "val_miou", "val_accuracy", "elapsed_secs"],
        &rows,
    )?;
    Ok(report)
}

pub fn load_network(path: &Path) -> Result<SegNet> {
    read_checkpoint(&mut fs::File::open(path)?)
}

/// Eval-mode labels for every point of `cloud`, plus the labels of its cells.
pub fn predict(net: &SegNet, cloud: &LabeledPointCloud, max_range: f64) -> Result<(Vec<u8>, SphericalScan, Vec<u8>)> {
    let scan = project(cloud, net.bw_in())?;
    let logits = net.forward(&[scan.features(max_range)])?.remove(0);
    let cells = argmax(&softmax(&logits));
    let bp = back_project(&scan, &cells)?;
    Ok((bp.point_labels, scan, cells))
}

/// Labels `paths.cloud` with `paths.checkpoint`; writes `.label` and `.ply` files.
pub fn cmd_infer(cfg: &RunConfig) -> Result<Vec<u8>> {
    let net = load_network(required(&cfg.paths.checkpoint, "checkpoint")?)?;
    let cloud = load_cloud(cfg)?;
    let (labels, _, _) = predict(&net, &cloud, cfg.data.max_range)?;
    let stem = stem_of(required(&cfg.paths.cloud, "cloud")?);
    fs::create_dir_all(&cfg.paths.out)?;
    let raw: Vec<u8> = labels.iter().flat_map(|&l| (l as u32).to_le_bytes()).collect();
    fs::write(cfg.paths.out.join(format!("{stem}.pred.label")), raw)?;
    output::write_ply(&cfg.paths.out.join(format!("{stem}.ply")), &cloud.points, &labels)?;
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub cell: MetricsReport,
    pub point: MetricsReport,
}

fn subset(name: &str) -> Result<Subset> {
    match name {
        "train" => Ok(Subset::Train),
        "val" => Ok(Subset::Val),
        _ => Err(Error::InvalidConfig(format!("unknown split {name:?}"))),
    }
}

/// Cell and point confusion of `net` over `clouds`.
pub fn confusion(
    net: &SegNet,
    clouds: &[LabeledPointCloud],
    max_range: f64,
) -> Result<(ConfusionMatrix, ConfusionMatrix)> {
    let mut cells = ConfusionMatrix::new(net.num_classes());
    let mut points = ConfusionMatrix::new(net.num_classes());
    for cloud in clouds {
        let (labels, scan, pred) = predict(net, cloud, max_range)?;
        cells.add_all(&scan.cell_label, &pred);
        points.add_all(&cloud.labels, &labels);
    }
    Ok((cells, points))
}

/// Metrics over `rotate.split` of the dataset; writes `eval.json`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let net = load_network(required(&cfg.paths.checkpoint, "checkpoint")?)?;
    let clouds = split_clouds(cfg)?;
    let (cells, points) = confusion(&net, &clouds, cfg.data.max_range)?;
    let report = EvalReport { cell: metrics_report("cell", &cells, &CLASS_NAMES)?, point: metrics_report("point", &points, &CLASS_NAMES)? };
    fs::create_dir_all(&cfg.paths.out)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    fs::write(cfg.paths.out.join("eval.json"), json)?;
    Ok(report)
}

pub(crate) fn split_clouds(cfg: &RunConfig) -> Result<Vec<LabeledPointCloud>> {
    let ds = Dataset::open(&cfg.data.root)?;
    let clouds: Vec<LabeledPointCloud> = ds.stems(subset(&cfg.rotate.split)?).iter().map(|s| ds.load(s)).collect::<Result<_>>()?;
    if clouds.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(clouds)
}
