//! Synthetic labeled scenes, KITTI-style file ingestion and dataset splits.
//!
//! Classes follow the shared five-class scheme: vehicle, person, ground,
//! man-made, vegetation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{LabeledPointCloud, IGNORE};

pub const VEHICLE: u8 = 0;
pub const PERSON: u8 = 1;
pub const GROUND: u8 = 2;
pub const MAN_MADE: u8 = 3;
pub const VEGETATION: u8 = 4;
pub const NUM_CLASSES: usize = 5;
pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["vehicle", "person", "ground", "man-made", "vegetation"];

/// Mounting height used by the presets, meters.
pub const SENSOR_HEIGHT: f64 = 1.73;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub beams: usize,
    /// Lowest and highest beam elevation, degrees.
    pub fov_min_deg: f64,
    pub fov_max_deg: f64,
    pub azimuth_step_deg: f64,
    pub max_range: f64,
    pub height: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self::preset("kitti").unwrap()
    }
}

impl SensorConfig {
    pub const PRESETS: [&'static str; 6] = ["nuscenes", "kitti", "poss", "waymo", "a2d2", "pc-urban"];

    /// Beam patterns named after common sensor setups (vertical FoV / beams).
    pub fn preset(name: &str) -> Result<Self> {
        let (beams, lo, hi) = match name {
            "nuscenes" => (32, -30.0, 10.0),
            "kitti" => (64, -26.0, 2.0),
            "poss" => (40, -16.0, 7.0),
            "waymo" => (64, -17.6, 2.4),
            "a2d2" => (16, -15.0, 15.0),
            "pc-urban" => (64, -22.5, 22.5),
            _ => return Err(Error::InvalidConfig(format!("unknown sensor preset {name:?}"))),
        };
        Ok(Self { beams, fov_min_deg: lo, fov_max_deg: hi, azimuth_step_deg: 1.0, max_range: 80.0, height: SENSOR_HEIGHT })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.fov_min_deg < self.fov_max_deg) || self.fov_min_deg < -90.0 || self.fov_max_deg > 90.0 {
            return bad("sensor FoV must satisfy -90 <= min < max <= 90");
        }
        if !(self.max_range > 0.0) || !(self.height > 0.0) {
            return bad("max range and sensor height must be positive");
        }
        if !(self.azimuth_step_deg > 0.0 && self.azimuth_step_deg <= 360.0) {
            return bad("azimuth step must be in (0, 360]");
        }
        Ok(())
    }

    /// Beam elevations in radians, lowest first.
    pub fn elevations(&self) -> Vec<f64> {
        let (lo, hi) = (self.fov_min_deg.to_radians(), self.fov_max_deg.to_radians());
        match self.beams {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    pub fn azimuths(&self) -> Vec<f64> {
        let n = (360.0 / self.azimuth_step_deg).round().max(1.0) as usize;
        (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub rng_seed: u64,
    /// Objects are placed in the square `[-extent, extent]²` around the sensor.
    pub extent: f64,
    pub vehicles: usize,
    pub persons: usize,
    pub walls: usize,
    pub vegetation: usize,
    pub sensor: SensorConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { rng_seed: 0, extent: 30.0, vehicles: 6, persons: 8, walls: 4, vegetation: 5, sensor: SensorConfig::default() }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        if !(self.extent > 0.0) {
            return Err(Error::InvalidConfig("extent must be positive".into()));
        }
        Ok(())
    }
}

/// A solid with an exact ray intersection, in world coordinates (ground z = 0).
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Upright box rotated by `yaw` about its vertical axis.
    Box { center: [f64; 3], half: [f64; 3], yaw: f64 },
    /// Upright cylinder standing on the ground.
    Cylinder { base: [f64; 2], radius: f64, height: f64 },
    Sphere { center: [f64; 3], radius: f64 },
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn to_box_frame(v: [f64; 3], yaw: f64) -> [f64; 3] {
    let (s, c) = yaw.sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]]
}

impl Shape {
    /// Smallest `t > 0` with `o + t·d` on the surface.
    pub fn intersect(&self, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match *self {
            Shape::Box { center, half, yaw } => {
                let p = to_box_frame(sub(o, center), yaw);
                let v = to_box_frame(d, yaw);
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..3 {
                    if v[i].abs() < 1e-15 {
                        if p[i].abs() > half[i] {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((-half[i] - p[i]) / v[i], (half[i] - p[i]) / v[i]);
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t0 > t1 {
                    return None;
                }
                [t0, t1].into_iter().find(|&t| t > EPS)
            }
            Shape::Cylinder { base, radius, height } => {
                let (px, py) = (o[0] - base[0], o[1] - base[1]);
                let mut best: Option<f64> = None;
                let mut take = |t: f64| {
                    if t > EPS && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                let a = d[0] * d[0] + d[1] * d[1];
                if a > 1e-15 {
                    let b = px * d[0] + py * d[1];
                    let c = px * px + py * py - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        for t in [(-b - disc.sqrt()) / a, (-b + disc.sqrt()) / a] {
                            let z = o[2] + t * d[2];
                            if (0.0..=height).contains(&z) {
                                take(t);
                            }
                        }
                    }
                }
                if d[2].abs() > 1e-15 {
                    let t = (height - o[2]) / d[2];
                    let (x, y) = (px + t * d[0], py + t * d[1]);
                    if x * x + y * y <= radius * radius {
                        take(t);
                    }
                }
                best
            }
            Shape::Sphere { center, radius } => {
                let p = sub(o, center);
                let b = dot(p, d);
                let disc = b * b - (dot(p, p) - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                [-b - disc.sqrt(), -b + disc.sqrt()].into_iter().find(|&t| t > EPS)
            }
        }
    }

    /// Unsigned distance from `p` to the surface.
    pub fn surface_distance(&self, p: [f64; 3]) -> f64 {
        match *self {
            Shape::Box { center, half, yaw } => {
                let q = to_box_frame(sub(p, center), yaw);
                let e = [q[0].abs() - half[0], q[1].abs() - half[1], q[2].abs() - half[2]];
                let outside = e.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
                let inside = e[0].max(e[1]).max(e[2]).min(0.0);
                (outside + inside).abs()
            }
            Shape::Cylinder { base, radius, height } => {
                let rho = ((p[0] - base[0]).powi(2) + (p[1] - base[1]).powi(2)).sqrt();
                let er = rho - radius;
                let ez = (p[2] - 0.5 * height).abs() - 0.5 * height;
                let outside = (er.max(0.0).powi(2) + ez.max(0.0).powi(2)).sqrt();
                (outside + er.max(ez).min(0.0)).abs()
            }
            Shape::Sphere { center, radius } => {
                let q = sub(p, center);
                (dot(q, q).sqrt() - radius).abs()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub class: u8,
}

/// Placed objects of one synthetic scene plus the sensor that observes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub sensor: SensorConfig,
}

fn place(rng: &mut impl Rng, extent: f64, min_dist: f64) -> [f64; 2] {
    loop {
        let p = [rng.random_range(-extent..extent), rng.random_range(-extent..extent)];
        if p[0].hypot(p[1]) >= min_dist {
            return p;
        }
    }
}

impl Scene {
    /// Random object placement; geometry only depends on `cfg.rng_seed`.
    pub fn generate(cfg: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let e = cfg.extent;
        let mut primitives = Vec::new();
        for _ in 0..cfg.vehicles {
            let [x, y] = place(&mut rng, e, 4.0);
            let shape = Shape::Box { center: [x, y, 0.75], half: [2.0, 1.0, 0.75], yaw: rng.random_range(0.0..PI) };
            primitives.push(Primitive { shape, class: VEHICLE });
        }
        for _ in 0..cfg.persons {
            let base = place(&mut rng, 0.6 * e, 2.0);
            primitives.push(Primitive { shape: Shape::Cylinder { base, radius: 0.3, height: 1.8 }, class: PERSON });
        }
        for _ in 0..cfg.walls {
            let [x, y] = place(&mut rng, e, 8.0);
            let h = rng.random_range(3.0..10.0);
            let len = rng.random_range(4.0..15.0);
            let shape = Shape::Box { center: [x, y, 0.5 * h], half: [0.5 * len, 0.25, 0.5 * h], yaw: rng.random_range(0.0..PI) };
            primitives.push(Primitive { shape, class: MAN_MADE });
        }
        for _ in 0..cfg.vegetation {
            // A crown of jittered spheres above the ground.
            let [x, y] = place(&mut rng, e, 5.0);
            let r0 = rng.random_range(1.0..2.5);
            let lumps = rng.random_range(3..7);
            for _ in 0..lumps {
                let c = [
                    x + rng.random_range(-0.6..0.6) * r0,
                    y + rng.random_range(-0.6..0.6) * r0,
                    r0 + 0.5 + rng.random_range(0.0..1.0) * r0,
                ];
                let radius = r0 * rng.random_range(0.5..0.9);
                primitives.push(Primitive { shape: Shape::Sphere { center: c, radius }, class: VEGETATION });
            }
        }
        Ok(Self { primitives, sensor: cfg.sensor.clone() })
    }

    /// First hit of the ray from the sensor along unit `d`, or `None` past max range.
    pub fn cast(&self, d: [f64; 3]) -> Option<(f64, u8)> {
        let o = [0.0, 0.0, self.sensor.height];
        let mut best = (d[2] < 0.0).then(|| (-self.sensor.height / d[2], GROUND));
        for p in &self.primitives {
            if let Some(t) = p.shape.intersect(o, d) {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, p.class));
                }
            }
        }
        best.filter(|&(t, _)| t <= self.sensor.max_range)
    }

    /// Ray-casts every beam and azimuth; points are in the sensor frame.
    pub fn scan(&self) -> Result<LabeledPointCloud> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let az = self.sensor.azimuths();
        for el in self.sensor.elevations() {
            let (se, ce) = el.sin_cos();
            for &a in &az {
                let (sa, ca) = a.sin_cos();
                let d = [ce * ca, ce * sa, se];
                if let Some((t, class)) = self.cast(d) {
                    points.push([t * d[0], t * d[1], t * d[2]]);
                    labels.push(class);
                }
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        LabeledPointCloud::new(points, labels)
    }

    /// Class of the surface `p` (sensor frame) lies on, within `tol`.
    pub fn class_at(&self, p: [f64; 3], tol: f64) -> Vec<u8> {
        let w = [p[0], p[1], p[2] + self.sensor.height];
        let mut out = Vec::new();
        if w[2].abs() <= tol {
            out.push(GROUND);
        }
        out.extend(self.primitives.iter().filter(|q| q.shape.surface_distance(w) <= tol).map(|q| q.class));
        out
    }
}

/// Generates the scene for `cfg` and scans it.
pub fn synth_scan(cfg: &SceneConfig) -> Result<LabeledPointCloud> {
    Scene::generate(cfg)?.scan()
}

/// Raw label id to class id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Remap(pub BTreeMap<u32, u8>);

impl Remap {
    /// Maps `0..NUM_CLASSES` to themselves and 255 to IGNORE.
    pub fn identity() -> Self {
        let mut m: BTreeMap<u32, u8> = (0..NUM_CLASSES as u8).map(|c| (c as u32, c)).collect();
        m.insert(IGNORE as u32, IGNORE);
        Self(m)
    }

    /// Parses `raw_id target_id` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::MalformedFile { path: path.into(), reason: format!("line {line}: {reason}") };
        let mut m = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(bad(i + 1, "expected two fields"));
            }
            let raw: u32 = f[0].parse().map_err(|_| bad(i + 1, "raw id is not an integer"))?;
            let to: u8 = f[1].parse().map_err(|_| bad(i + 1, "target id is not an integer"))?;
            if (to as usize) >= NUM_CLASSES && to != IGNORE {
                return Err(bad(i + 1, "target must be a class id or 255"));
            }
            m.insert(raw, to);
        }
        Ok(Self(m))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
    }
}

/// Reads a float32 `(x, y, z, intensity)` cloud; every point is labeled IGNORE.
pub fn load_kitti_cloud(bin_path: &Path) -> Result<LabeledPointCloud> {
    let bin = fs::read(bin_path)?;
    if bin.len() % 16 != 0 {
        return Err(Error::MalformedFile {
            path: bin_path.display().to_string(),
            reason: format!("length {} is not a multiple of 16 bytes", bin.len()),
        });
    }
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap()) as f64;
    let mut points = Vec::with_capacity(bin.len() / 16);
    let mut intensity = Vec::with_capacity(bin.len() / 16);
    for q in bin.chunks_exact(16) {
        points.push([f(&q[0..4]), f(&q[4..8]), f(&q[8..12])]);
        intensity.push(f(&q[12..16]));
    }
    let labels = vec![IGNORE; points.len()];
    Ok(LabeledPointCloud { points, labels, intensity: Some(intensity) })
}

/// Reads a float32 `(x, y, z, intensity)` cloud and its uint32 labels
/// (class in the lower 16 bits). Unmapped ids become IGNORE.
pub fn load_kitti_pair(bin_path: &Path, label_path: &Path, remap: &Remap) -> Result<LabeledPointCloud> {
    let mut cloud = load_kitti_cloud(bin_path)?;
    let raw = fs::read(label_path)?;
    if raw.len() % 4 != 0 {
        let path = label_path.display().to_string();
        return Err(Error::MalformedFile { path, reason: format!("length {} is not a multiple of 4 bytes", raw.len()) });
    }
    let ids: Vec<u32> = raw.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()) & 0xffff).collect();
    if ids.len() != cloud.len() {
        return Err(Error::CountMismatch { points: cloud.len(), labels: ids.len() });
    }
    let mut unmapped = BTreeSet::new();
    cloud.labels = ids
        .iter()
        .map(|id| {
            remap.0.get(id).copied().unwrap_or_else(|| {
                unmapped.insert(*id);
                IGNORE
            })
        })
        .collect();
    if !unmapped.is_empty() {
        log::warn!("{}: raw ids {unmapped:?} are not in the remap table, labeled IGNORE", label_path.display());
    }
    Ok(cloud)
}

/// Writes the KITTI-style pair; class ids are stored as raw ids.
pub fn write_kitti_pair(cloud: &LabeledPointCloud, bin_path: &Path, label_path: &Path) -> Result<()> {
    let mut bin = Vec::with_capacity(cloud.len() * 16);
    for (i, p) in cloud.points.iter().enumerate() {
        let it = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
        for v in [p[0], p[1], p[2], it] {
            bin.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let labels: Vec<u8> = cloud.labels.iter().flat_map(|&l| (l as u32).to_le_bytes()).collect();
    fs::write(bin_path, bin)?;
    fs::write(label_path, labels)?;
    Ok(())
}

/// Deterministic shuffle, then the first `round(fraction·n)` items go to training.
pub fn make_split<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::EmptyList);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction {fraction} is not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * items.len() as f64).round() as usize).min(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subset {
    Train,
    Val,
}

/// A dataset directory: `clouds/*.bin`, `labels/*.label`, `remap.txt`, `split.txt`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub remap: Remap,
    pub items: Vec<(String, Subset)>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let remap = Remap::load(&root.join("remap.txt"))?;
        let split_path = root.join("split.txt");
        let text = fs::read_to_string(&split_path)?;
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::MalformedFile { path: split_path.display().to_string(), reason: format!("line {}: expected `<stem> train|val`", i + 1) };
            let mut f = line.split_whitespace();
            let (stem, tag) = (f.next().ok_or_else(bad)?, f.next().ok_or_else(bad)?);
            let subset = match tag {
                "train" => Subset::Train,
                "val" => Subset::Val,
                _ => return Err(bad()),
            };
            items.push((stem.to_string(), subset));
        }
        if items.is_empty() {
            return Err(Error::EmptyList);
        }
        Ok(Self { root: root.to_path_buf(), remap, items })
    }

    pub fn stems(&self, subset: Subset) -> Vec<&str> {
        self.items.iter().filter(|(_, s)| *s == subset).map(|(n, _)| n.as_str()).collect()
    }

    pub fn cloud_path(&self, stem: &str) -> PathBuf {
        self.root.join("clouds").join(format!("{stem}.bin"))
    }

    pub fn label_path(&self, stem: &str) -> PathBuf {
        self.root.join("labels").join(format!("{stem}.label"))
    }

    pub fn load(&self, stem: &str) -> Result<LabeledPointCloud> {
        load_kitti_pair(&self.cloud_path(stem), &self.label_path(stem), &self.remap)
    }

    /// Writes clouds, identity remap and split file.
    pub fn create(root: &Path, clouds: &[(String, LabeledPointCloud, Subset)]) -> Result<Self> {
        fs::create_dir_all(root.join("clouds"))?;
        fs::create_dir_all(root.join("labels"))?;
        let remap = Remap::identity();
        fs::write(root.join("remap.txt"), remap.to_text())?;
        let mut split = String::new();
        let mut items = Vec::new();
        let mut seen = HashMap::new();
        for (stem, cloud, subset) in clouds {
            if seen.insert(stem.as_str(), ()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate item {stem}")));
            }
            write_kitti_pair(cloud, &root.join("clouds").join(format!("{stem}.bin")), &root.join("labels").join(format!("{stem}.label")))?;
            split.push_str(&format!("{stem} {}\n", if *subset == Subset::Train { "train" } else { "val" }));
            items.push((stem.clone(), *subset));
        }
        fs::write(root.join("split.txt"), split)?;
        Ok(Self { root: root.to_path_buf(), remap, items })
    }
}
