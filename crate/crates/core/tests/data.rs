use std::fs;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use s2seg::data::{
    load_kitti_pair, make_split, synth_scan, Dataset, Remap, Scene, SceneConfig, SensorConfig, Subset, GROUND,
};
use s2seg::error::Error;
use s2seg::nn::{NetConfig, SegNet};
use s2seg::projection::{project, DEFAULT_MAX_RANGE, IGNORE};
use s2seg::sphere::BandLimit;

fn small_scene(seed: u64, preset: &str) -> SceneConfig {
    let sensor = SensorConfig { azimuth_step_deg: 4.0, ..SensorConfig::preset(preset).unwrap() };
    SceneConfig { rng_seed: seed, sensor, ..SceneConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn points_lie_on_a_primitive_of_their_class(seed in 0u64..10_000, p in 0usize..6) {
        let cfg = small_scene(seed, SensorConfig::PRESETS[p]);
        let scene = Scene::generate(&cfg).unwrap();
        let cloud = scene.scan().unwrap();
        for (pt, &label) in cloud.points.iter().zip(&cloud.labels) {
            prop_assert!(scene.class_at(*pt, 1e-9).contains(&label), "point {:?} labeled {}", pt, label);
            let r = (pt[0] * pt[0] + pt[1] * pt[1] + pt[2] * pt[2]).sqrt();
            prop_assert!(r <= cfg.sensor.max_range);
        }
    }

    #[test]
    fn split_is_disjoint_and_covering(n in 1usize..200, f in 0.05f64..0.95, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let (a, b) = make_split(&items, f, seed).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).cloned().collect();
        all.sort();
        prop_assert_eq!(all, items);
    }
}

#[test]
fn same_seed_gives_identical_clouds() {
    let a = synth_scan(&small_scene(7, "kitti")).unwrap();
    let b = synth_scan(&small_scene(7, "kitti")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, synth_scan(&small_scene(8, "kitti")).unwrap());
}

#[test]
fn scenes_contain_every_class() {
    let cloud = synth_scan(&SceneConfig { rng_seed: 3, ..SceneConfig::default() }).unwrap();
    for c in 0..5u8 {
        assert!(cloud.labels.contains(&c), "class {c} missing");
    }
    assert!(cloud.labels.iter().filter(|&&l| l == GROUND).count() > cloud.len() / 4);
}

#[test]
fn single_point_kitti_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (bin, lab) = (dir.path().join("a.bin"), dir.path().join("a.label"));
    let mut bytes = Vec::new();
    for v in [1.0f32, 2.0, 3.0, 0.5] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, &bytes).unwrap();
    fs::write(&lab, 0x0000_0009u32.to_le_bytes()).unwrap();
    let remap = Remap::parse("9 0\n", "remap").unwrap();
    let cloud = load_kitti_pair(&bin, &lab, &remap).unwrap();
    assert_eq!(cloud.points, vec![[1.0, 2.0, 3.0]]);
    assert_eq!(cloud.labels, vec![0]);
    assert_eq!(cloud.intensity, Some(vec![0.5]));

    // Instance ids in the upper half are dropped; unknown classes are ignored.
    fs::write(&lab, 0x0003_0009u32.to_le_bytes()).unwrap();
    assert_eq!(load_kitti_pair(&bin, &lab, &remap).unwrap().labels, vec![0]);
    fs::write(&lab, 11u32.to_le_bytes()).unwrap();
    assert_eq!(load_kitti_pair(&bin, &lab, &remap).unwrap().labels, vec![IGNORE]);

    fs::write(&lab, [9u32.to_le_bytes(), 9u32.to_le_bytes()].concat()).unwrap();
    assert!(matches!(load_kitti_pair(&bin, &lab, &remap), Err(Error::CountMismatch { points: 1, labels: 2 })));
    fs::write(&bin, &bytes[..13]).unwrap();
    assert!(matches!(load_kitti_pair(&bin, &lab, &remap), Err(Error::MalformedFile { .. })));
}

#[test]
fn dataset_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let clouds: Vec<_> = (0..3)
        .map(|i| (format!("{i:04}"), synth_scan(&small_scene(i, "a2d2")).unwrap(), if i < 2 { Subset::Train } else { Subset::Val }))
        .collect();
    Dataset::create(dir.path(), &clouds).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    assert_eq!(ds.stems(Subset::Train), vec!["0000", "0001"]);
    assert_eq!(ds.stems(Subset::Val), vec!["0002"]);
    let back = ds.load("0002").unwrap();
    assert_eq!(back.labels, clouds[2].1.labels);
    for (a, b) in back.points.iter().zip(&clouds[2].1.points) {
        for k in 0..3 {
            assert_eq!(a[k], b[k] as f32 as f64);
        }
    }
}

#[test]
fn every_sensor_feeds_one_network_unchanged() {
    let bw = BandLimit::new(8).unwrap();
    let cfg = NetConfig { bw_in: 8, widths: vec![3, 4], ..NetConfig::default() };
    let net = SegNet::from_config(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut sizes = Vec::new();
    for p in SensorConfig::PRESETS {
        let cloud = synth_scan(&small_scene(1, p)).unwrap();
        sizes.push(cloud.len());
        let scan = project(&cloud, bw).unwrap();
        let out = net.forward(&[scan.features(DEFAULT_MAX_RANGE)]).unwrap();
        assert_eq!(out[0].channels(), 5);
    }
    sizes.dedup();
    assert!(sizes.len() > 1);
}
