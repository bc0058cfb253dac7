//! Pointcloud to spherical range image, and back.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::sphere::{polar_angle, periodic_angle, BandLimit, S2Signal};

/// Label of unlabeled points and empty cells; excluded from losses and metrics.
pub const IGNORE: u8 = 255;

/// Points closer to the sensor than this are rejected.
pub const MIN_RANGE: f64 = 1e-6;

/// Default range normalization for network input, meters.
pub const DEFAULT_MAX_RANGE: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    pub points: Vec<[f64; 3]>,
    pub labels: Vec<u8>,
    /// Carried through I/O, never used by the network.
    pub intensity: Option<Vec<f64>>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<[f64; 3]>, labels: Vec<u8>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::CountMismatch { points: points.len(), labels: labels.len() });
        }
        Ok(Self { points, labels, intensity: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Range image on the S² grid with per-cell labels.
///
/// `signal` has two channels: range in meters and the occupancy mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalScan {
    pub signal: S2Signal,
    pub cell_label: Vec<u8>,
    pub point_to_cell: Vec<(usize, usize)>,
}

impl SphericalScan {
    pub fn bw(&self) -> BandLimit {
        self.signal.bw()
    }

    pub fn range(&self) -> &[f64] {
        self.signal.channel(0)
    }

    pub fn mask(&self) -> &[f64] {
        self.signal.channel(1)
    }

    pub fn cell_index(&self, j: usize, k: usize) -> usize {
        j * self.bw().side() + k
    }

    /// Network input: `[r / max_range, mask]`.
    pub fn features(&self, max_range: f64) -> S2Signal {
        let mut f = self.signal.clone();
        f.channel_mut(0).iter_mut().for_each(|r| *r /= max_range);
        f
    }

    /// Cell labels with empty cells already set to [`IGNORE`].
    pub fn targets(&self) -> &[u8] {
        &self.cell_label
    }
}

/// Index of the polar sample nearest to `theta`; exact midpoints go to the smaller index.
pub fn nearest_polar(bw: BandLimit, theta: f64) -> usize {
    let n = bw.side();
    // θ_j = (j + ½)·π/(2bw)
    let t = theta / (PI / n as f64) - 0.5;
    let j = (t - 0.5).ceil();
    j.clamp(0.0, (n - 1) as f64) as usize
}

/// Index of the nearest azimuth sample, periodic in `2π`.
pub fn nearest_azimuth(bw: BandLimit, phi: f64) -> usize {
    let n = bw.side();
    let u = phi / bw.step();
    ((u + 0.5).floor() as i64).rem_euclid(n as i64) as usize
}

/// Spherical angles `(θ, φ)` of a point, `φ ∈ [0, 2π)`.
pub fn point_angles(p: [f64; 3]) -> (f64, f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
    let mut phi = p[1].atan2(p[0]);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    if phi >= 2.0 * PI {
        phi -= 2.0 * PI;
    }
    (r, theta, phi)
}

/// Bins a cloud onto the grid; per cell the nearest point wins, ties to the lower index.
pub fn project(cloud: &LabeledPointCloud, bw: BandLimit) -> Result<SphericalScan> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cloud.labels.len() != cloud.points.len() {
        return Err(Error::CountMismatch { points: cloud.points.len(), labels: cloud.labels.len() });
    }
    let n = bw.side();
    let mut range = vec![0.0; n * n];
    let mut label = vec![IGNORE; n * n];
    let mut point_to_cell = Vec::with_capacity(cloud.len());
    for (i, (&p, &y)) in cloud.points.iter().zip(&cloud.labels).enumerate() {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("point {i} has a non-finite coordinate")));
        }
        let (r, theta, phi) = point_angles(p);
        if r <= MIN_RANGE {
            return Err(Error::OriginPoint(i));
        }
        let (j, k) = (nearest_polar(bw, theta), nearest_azimuth(bw, phi));
        let cell = j * n + k;
        if range[cell] == 0.0 || r < range[cell] {
            range[cell] = r;
            label[cell] = y;
        }
        point_to_cell.push((j, k));
    }
    let mut values = range.clone();
    values.extend(range.iter().map(|&r| if r > 0.0 { 1.0 } else { 0.0 }));
    Ok(SphericalScan { signal: S2Signal::from_vec(bw, 2, values)?, cell_label: label, point_to_cell })
}

/// Result of mapping cell predictions back to 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct BackProjection {
    /// Predicted class of every original point.
    pub point_labels: Vec<u8>,
    /// One point per masked cell at the cell's center direction and stored range.
    pub points: Vec<[f64; 3]>,
    /// `(j, k)` of each reconstructed point.
    pub cells: Vec<(usize, usize)>,
    /// Class of each reconstructed point.
    pub labels: Vec<u8>,
}

pub fn back_project(scan: &SphericalScan, cell_classes: &[u8]) -> Result<BackProjection> {
    let bw = scan.bw();
    let n = bw.side();
    if cell_classes.len() != n * n {
        return Err(Error::ShapeMismatch(format!("cell grid has {} entries, expected {}", cell_classes.len(), n * n)));
    }
    let point_labels = scan.point_to_cell.iter().map(|&(j, k)| cell_classes[j * n + k]).collect();
    let mut out = BackProjection { point_labels, points: Vec::new(), cells: Vec::new(), labels: Vec::new() };
    let (range, mask) = (scan.range(), scan.mask());
    for j in 0..n {
        let (st, ct) = polar_angle(bw, j).sin_cos();
        for k in 0..n {
            let cell = j * n + k;
            if mask[cell] == 0.0 {
                continue;
            }
            let (sp, cp) = periodic_angle(bw, k).sin_cos();
            let r = range[cell];
            out.points.push([r * cp * st, r * sp * st, r * ct]);
            out.cells.push((j, k));
            out.labels.push(cell_classes[cell]);
        }
    }
    Ok(out)
}

/// `(sin a, cos a)` with exact values at multiples of a quarter turn.
pub fn sin_cos_exact(a: f64) -> (f64, f64) {
    let q = a / FRAC_PI_2;
    let k = q.round();
    if (q - k).abs() < 1e-14 {
        match (k as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        a.sin_cos()
    }
}

/// `R_z(γ) R_y(β) R_x(α)` as a row-major 3×3 matrix.
pub fn rpy_matrix(alpha: f64, beta: f64, gamma: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = sin_cos_exact(alpha);
    let (sb, cb) = sin_cos_exact(beta);
    let (sg, cg) = sin_cos_exact(gamma);
    [
        [cg * cb, cg * sb * sa - sg * ca, cg * sb * ca + sg * sa],
        [sg * cb, sg * sb * sa + cg * ca, sg * sb * ca - cg * sa],
        [-sb, cb * sa, cb * ca],
    ]
}

/// Rotates every point by `R_z(γ) R_y(β) R_x(α)`; labels are untouched.
pub fn rotate_cloud(cloud: &LabeledPointCloud, alpha: f64, beta: f64, gamma: f64) -> LabeledPointCloud {
    let r = rpy_matrix(alpha, beta, gamma);
    let points = cloud
        .points
        .iter()
        .map(|p| [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2]))
        .collect();
    LabeledPointCloud { points, labels: cloud.labels.clone(), intensity: cloud.intensity.clone() }
}
