mod support;

use daa_core::data::{
    apply_warp, augment, decode_dataset, encode_dataset, gen_sample, gen_split, gen_synthetic, hflip, image_stats,
    load_dataset, save_dataset, AugmentConfig, Dataset, Sample, Split, SyntheticSpec, Warp,
};
use daa_core::exec::Exec;
use daa_core::nn::Tensor;
use daa_core::train::linear_slope;
use daa_core::Error;
use proptest::prelude::*;
use support::rng;

fn small_spec(n_train: usize, n_test: usize) -> SyntheticSpec {
    SyntheticSpec {
        n_train,
        n_test,
        image_size: 32,
        ..SyntheticSpec::default()
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = small_spec(12, 5);
    let (a, b) = gen_synthetic(&spec, Exec::Parallel).unwrap();
    let (c, d) = gen_synthetic(&spec, Exec::Sequential).unwrap();
    assert_eq!(a, c);
    assert_eq!(b, d);
    assert_eq!(a.samples[7], gen_sample(&spec, Split::Train, 7));
    // splits and seeds are independent streams
    assert_ne!(a.samples[0].image, b.samples[0].image);
    let other = SyntheticSpec { seed: 1, ..spec };
    assert_ne!(gen_sample(&other, Split::Train, 0).image, a.samples[0].image);
}

#[test]
fn samples_hit_their_targets() {
    let spec = SyntheticSpec::default();
    for i in 0..20 {
        let s = gen_sample(&spec, Split::Test, i);
        assert!(s.age < 100);
        assert_eq!(s.image.shape(), &[3, 128, 128]);
        assert!(s.image.is_finite());
        let (m, sd) = image_stats(&s.image);
        assert!((m - spec.target_mean(s.age)).abs() < 1e-3, "mean {m} at age {}", s.age);
        assert!((sd - spec.target_std(s.age)).abs() < 1e-3);
    }
}

#[test]
fn std_decreases_with_age() {
    let spec = small_spec(200, 0);
    let set = gen_split(&spec, Split::Train, Exec::Parallel).unwrap();
    let young = set.samples.iter().find(|s| s.age < 20).unwrap();
    let old = set.samples.iter().find(|s| s.age > 80).unwrap();
    assert!(spec.target_std(old.age) >= spec.std_floor);
    assert!(image_stats(&young.image).1 > image_stats(&old.image).1);
}

#[test]
fn statistics_trend_over_500_samples() {
    let spec = small_spec(500, 0);
    let set = gen_split(&spec, Split::Train, Exec::Parallel).unwrap();
    let ages: Vec<f64> = set.ages().iter().map(|&a| a as f64).collect();
    let (means, stds): (Vec<f64>, Vec<f64>) = set.images().iter().map(|i| image_stats(i)).unzip();
    assert!(linear_slope(&ages, &means) > 0.0);
    assert!(linear_slope(&ages, &stds) < 0.0);
    // ages cover every decade
    assert!(set.bucket_counts().iter().all(|&c| c > 0));
}

#[test]
fn std_floor_is_enforced() {
    let spec = SyntheticSpec {
        std_floor: 0.0,
        ..SyntheticSpec::default()
    };
    match gen_synthetic(&spec, Exec::Sequential) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "std_floor"),
        other => panic!("expected config error, got {other:?}"),
    }
    let spec = SyntheticSpec {
        std_slope: 0.01,
        ..SyntheticSpec::default()
    };
    assert_eq!(spec.target_std(99), spec.std_floor);
}

#[test]
fn identity_augmentation_is_a_no_op() {
    let s = gen_sample(&small_spec(1, 0), Split::Train, 0);
    let out = augment(&s.image, &AugmentConfig::identity(), &mut rng(1));
    assert_eq!(out, s.image);
    assert_eq!(apply_warp(&s.image, &Warp::IDENTITY), s.image);
}

#[test]
fn double_flip_restores() {
    let s = gen_sample(&small_spec(1, 0), Split::Train, 1);
    assert_eq!(hflip(&hflip(&s.image)), s.image);
    assert_ne!(hflip(&s.image), s.image);
}

#[test]
fn rotation_round_trip_on_smooth_images() {
    // young samples carry the lowest texture frequency
    let spec = SyntheticSpec::default();
    let smooth: Vec<Sample> = (0..200)
        .map(|i| gen_sample(&spec, Split::Train, i))
        .filter(|s| s.age < 10)
        .take(3)
        .collect();
    assert!(!smooth.is_empty());
    for s in smooth {
        for deg in [5.0f64, -10.0] {
            let fwd = Warp {
                angle: deg.to_radians(),
                ..Warp::IDENTITY
            };
            let back = Warp {
                angle: -deg.to_radians(),
                ..Warp::IDENTITY
            };
            let out = apply_warp(&apply_warp(&s.image, &fwd), &back);
            // corners sample clamped edges, compare the central disc
            let n = 128usize;
            let c = (n as f64 - 1.0) / 2.0;
            let mut worst = 0f32;
            for ch in 0..3 {
                for y in 0..n {
                    for x in 0..n {
                        let r = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                        if r < 0.4 * n as f64 {
                            let i = ch * n * n + y * n + x;
                            worst = worst.max((out.data()[i] - s.image.data()[i]).abs());
                        }
                    }
                }
            }
            assert!(worst < 0.05, "age {} angle {deg}: max error {worst}", s.age);
        }
    }
}

#[test]
fn augmentation_keeps_shape_and_varies() {
    let s = gen_sample(&small_spec(1, 0), Split::Train, 2);
    let cfg = AugmentConfig::default();
    let mut r = rng(5);
    let outs: Vec<Tensor<f32>> = (0..4).map(|_| augment(&s.image, &cfg, &mut r)).collect();
    for o in &outs {
        assert_eq!(o.shape(), s.image.shape());
        assert!(o.is_finite());
    }
    assert!(outs.windows(2).any(|w| w[0] != w[1]));
    assert_eq!(augment(&s.image, &cfg, &mut rng(5)), outs[0]);
}

#[test]
fn invalid_augmentation_is_rejected() {
    let cfg = AugmentConfig {
        flip_prob: 1.5,
        ..AugmentConfig::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
}

#[test]
fn container_round_trip_on_disk() {
    let (train, _) = gen_synthetic(&small_spec(6, 0), Exec::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.daad");
    save_dataset(&train, &path).unwrap();
    assert_eq!(&std::fs::read(&path).unwrap()[..8], b"DAAD0001");
    assert_eq!(load_dataset(&path).unwrap(), train);
}

#[test]
fn empty_dataset_is_valid() {
    let empty = Dataset::empty(&[3, 128, 128]);
    let bytes = encode_dataset(&empty).unwrap();
    let back = decode_dataset(&bytes).unwrap();
    assert!(back.is_empty());
    assert_eq!(back.shape, vec![3, 128, 128]);
}

#[test]
fn corrupt_containers_report_offsets() {
    let (set, _) = gen_synthetic(&small_spec(3, 0), Exec::Sequential).unwrap();
    let bytes = encode_dataset(&set).unwrap();

    let mut bad = bytes.clone();
    bad[2] = b'X';
    match decode_dataset(&bad) {
        Err(e @ Error::Format { offset: 0, .. }) => assert!(e.to_string().contains("DAAD")),
        other => panic!("expected format error, got {other:?}"),
    }
    match decode_dataset(&bytes[..bytes.len() - 10]) {
        Err(Error::Format { offset, .. }) => assert!(offset > 16),
        other => panic!("expected format error, got {other:?}"),
    }
    assert!(matches!(decode_dataset(&bytes[..5]), Err(Error::Format { .. })));
    let mut long = bytes.clone();
    long.extend_from_slice(&[0, 0, 0, 0]);
    assert!(matches!(decode_dataset(&long), Err(Error::Format { .. })));
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (0usize..5, 1usize..4).prop_flat_map(|(n, side)| {
        let numel = 3 * side * side;
        prop::collection::vec((0usize..100, prop::collection::vec(any::<f32>(), numel)), n).prop_map(
            move |recs| Dataset {
                shape: vec![3, side, side],
                samples: recs
                    .into_iter()
                    .enumerate()
                    .map(|(index, (age, data))| Sample {
                        index,
                        age,
                        image: Tensor::new(&[3, side, side], data).unwrap(),
                    })
                    .collect(),
            },
        )
    })
}

proptest! {
    #[test]
    fn container_round_trip_is_bitwise(set in arb_dataset()) {
        let back = decode_dataset(&encode_dataset(&set).unwrap()).unwrap();
        prop_assert_eq!(back.shape, set.shape);
        prop_assert_eq!(back.samples.len(), set.samples.len());
        for (a, b) in back.samples.iter().zip(&set.samples) {
            prop_assert_eq!(a.age, b.age);
            prop_assert_eq!(a.index, b.index);
            let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.image), bits(&b.image));
        }
    }

    #[test]
    fn augmentation_preserves_shape(seed in any::<u64>()) {
        let s = gen_sample(&small_spec(1, 0), Split::Train, 0);
        let out = augment(&s.image, &AugmentConfig::default(), &mut rng(seed));
        prop_assert_eq!(out.shape(), s.image.shape());
        prop_assert!(out.is_finite());
    }
}
