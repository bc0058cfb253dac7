//! Rotation sweep and per-stage latency.

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{confusion, load_network, output, split_clouds, RunConfig};
use crate::data::synth_scan;
use crate::error::Result;
use crate::loss_metrics::{argmax, miou_accuracy, softmax};
use crate::nn::SegNet;
use crate::projection::{back_project, project, rotate_cloud, LabeledPointCloud};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationRow {
    /// "roll", "pitch", "yaw" or "rpy" (all three by the same angle).
    pub axis: String,
    pub angle_deg: f64,
    pub point_miou: f64,
    pub point_accuracy: f64,
    pub cell_miou: f64,
}

fn angles(axis: &str, a: f64) -> (f64, f64, f64) {
    match axis {
        "roll" => (a, 0.0, 0.0),
        "pitch" => (0.0, a, 0.0),
        "yaw" => (0.0, 0.0, a),
        _ => (a, a, a),
    }
}

/// Rotation sweep of `paths.checkpoint` over `rotate.split`; writes `rotate_bench.csv`.
pub fn cmd_rotate_bench(cfg: &RunConfig) -> Result<Vec<RotationRow>> {
    let net = load_network(super::required(&cfg.paths.checkpoint, "checkpoint")?)?;
    let rows = rotation_sweep(&net, &split_clouds(cfg)?, &cfg.rotate.angles_deg, cfg.data.max_range)?;
    fs::create_dir_all(&cfg.paths.out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.axis.clone(),
                format!("{}", r.angle_deg),
                format!("{:.6}", r.point_miou),
                format!("{:.6}", r.point_accuracy),
                format!("{:.6}", r.cell_miou),
            ]
        })
        .collect();
    output::write_csv(
        &cfg.paths.out.join("rotate_bench.csv"),
        &["axis", "angle_deg", "point_miou", "point_accuracy", "cell_miou"],
        &table,
    )?;
    Ok(rows)
}

pub fn rotation_sweep(
    net: &SegNet,
    clouds: &[LabeledPointCloud],
    angles_deg: &[f64],
    max_range: f64,
) -> Result<Vec<RotationRow>> {
    let mut rows = Vec::new();
    for axis in ["roll", "pitch", "yaw", "rpy"] {
        for &deg in angles_deg {
            let (a, b, g) = angles(axis, deg * PI / 180.0);
            let rotated: Vec<LabeledPointCloud> = clouds.iter().map(|c| rotate_cloud(c, a, b, g)).collect();
            let (cells, points) = confusion(net, &rotated, max_range)?;
            let (p, c) = (miou_accuracy(&points)?, miou_accuracy(&cells)?);
            log::info!("{axis} {deg}°: point mIoU {:.4}", p.miou);
            rows.push(RotationRow {
                axis: axis.into(),
                angle_deg: deg,
                point_miou: p.miou,
                point_accuracy: p.accuracy,
                cell_miou: c.miou,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub bw: usize,
    pub points: usize,
    pub repeats: usize,
    /// `(stage, mean ms, min ms)`.
    pub stages: Vec<(String, f64, f64)>,
}

/// Latency of projection, inference and back-projection on one synthetic
/// `preset` scan; writes `bench.csv`.
///
/// Uses `paths.checkpoint` if set, otherwise a freshly initialized network.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let net = match &cfg.paths.checkpoint {
        Some(p) => load_network(p)?,
        None => SegNet::from_config(&cfg.net_config(), &mut ChaCha8Rng::seed_from_u64(cfg.seed))?,
    };
    let cloud = synth_scan(&cfg.data.scene(&cfg.preset, cfg.seed)?)?;
    let repeats = cfg.bench.repeats.max(1);
    let mut times = [vec![], vec![], vec![]];
    for _ in 0..repeats {
        let t = Instant::now();
        let scan = project(&cloud, net.bw_in())?;
        let input = scan.features(cfg.data.max_range);
        times[0].push(t.elapsed().as_secs_f64() * 1e3);

        let t = Instant::now();
        let logits = net.forward(&[input])?.remove(0);
        let cells = argmax(&softmax(&logits));
        times[1].push(t.elapsed().as_secs_f64() * 1e3);

        let t = Instant::now();
        back_project(&scan, &cells)?;
        times[2].push(t.elapsed().as_secs_f64() * 1e3);
    }
    let stages = ["projection", "inference", "back_projection"]
        .iter()
        .zip(&times)
        .map(|(name, t)| {
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            (name.to_string(), mean, t.iter().cloned().fold(f64::INFINITY, f64::min))
        })
        .collect::<Vec<_>>();
    let total: (f64, f64) = stages.iter().fold((0.0, 0.0), |a, s| (a.0 + s.1, a.1 + s.2));
    let mut rows: Vec<Vec<String>> =
        stages.iter().map(|(n, m, lo)| vec![n.clone(), format!("{m:.3}"), format!("{lo:.3}")]).collect();
    rows.push(vec!["total".into(), format!("{:.3}", total.0), format!("{:.3}", total.1)]);
    fs::create_dir_all(&cfg.paths.out)?;
    output::write_csv(&cfg.paths.out.join("bench.csv"), &["stage", "mean_ms", "min_ms"], &rows)?;
    Ok(BenchReport { bw: net.bw_in().get(), points: cloud.len(), repeats, stages })
}
