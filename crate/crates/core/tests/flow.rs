mod common;

use common::{quarter_turns, random_field, wheel_color, wheel_index, wheel_lut};
use flowseg::flow::{encode, EncodingKind, NormStrategy};
use flowseg::FlowField;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rgb_at(enc: &flowseg::FlowEncoding, i: usize) -> [f64; 3] {
    [0, 1, 2].map(|c| enc.channel(c)[i] as f64)
}

fn max_diff(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max)
}

#[test]
fn unit_axes_land_a_quarter_wheel_apart() {
    let lut = wheel_lut();
    let flow = FlowField::new(2, 1, vec![1.0, 0.0], vec![0.0, 1.0]);
    let enc = encode(&flow, EncodingKind::ColorWheel3Ch, NormStrategy::PerFrameMax).unwrap();
    assert_eq!(wheel_index(1.0, 0.0), 0.0);
    assert_eq!(wheel_index(0.0, 1.0), 55.0 / 4.0);
    assert!(max_diff(rgb_at(&enc, 0), wheel_color(&lut, 0.0, 1.0)) < 1e-4);
    assert!(max_diff(rgb_at(&enc, 1), wheel_color(&lut, 13.75, 1.0)) < 1e-4);
    assert!(max_diff(rgb_at(&enc, 0), [255.0, 0.0, 0.0]) < 1e-4);
    assert!(max_diff(rgb_at(&enc, 1), [255.0, 233.75, 0.0]) < 1e-4);
}

#[test]
fn color_wheel_matches_the_reference_table() {
    let lut = wheel_lut();
    assert_eq!(lut.len(), 55);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for cap in [None, Some(2.5f32)] {
        let flow = random_field(&mut rng, 16, 12, 4.0);
        let norm = cap.map_or(NormStrategy::PerFrameMax, NormStrategy::FixedCap);
        let enc = encode(&flow, EncodingKind::ColorWheel3Ch, norm).unwrap();
        let mags: Vec<f64> = flow.u().iter().zip(flow.v()).map(|(&u, &v)| (u as f64).hypot(v as f64)).collect();
        let scale = cap.map_or_else(|| mags.iter().cloned().fold(0.0, f64::max), |c| c as f64);
        for i in 0..mags.len() {
            let (u, v) = (flow.u()[i] as f64, flow.v()[i] as f64);
            let expected = wheel_color(&lut, wheel_index(u, v), (mags[i] / scale).min(1.0));
            assert!(max_diff(rgb_at(&enc, i), expected) < 1e-3, "pixel {i}");
        }
    }
}

#[test]
fn zero_flow_is_white() {
    let enc = encode(&FlowField::zeros(5, 4), EncodingKind::ColorWheel3Ch, NormStrategy::PerFrameMax).unwrap();
    assert!(enc.data().iter().all(|&x| x == 255.0));
}

/// Saturation read back from a wheel color: every spoke has one zero channel.
fn saturation(rgb: [f64; 3]) -> f64 {
    1.0 - rgb.iter().cloned().fold(f64::MAX, f64::min) / 255.0
}

#[test]
fn rotation_shifts_hue_and_keeps_saturation() {
    let lut = wheel_lut();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let flow = random_field(&mut rng, 12, 10, 3.0);
        let base = encode(&flow, EncodingKind::ColorWheel3Ch, NormStrategy::PerFrameMax).unwrap();
        let mags: Vec<f64> = flow.u().iter().zip(flow.v()).map(|(&u, &v)| (u as f64).hypot(v as f64)).collect();
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        for turns in [1u32, 2] {
            let rotated =
                encode(&quarter_turns(&flow, turns), EncodingKind::ColorWheel3Ch, NormStrategy::PerFrameMax).unwrap();
            for i in 0..mags.len() {
                let k = wheel_index(flow.u()[i] as f64, flow.v()[i] as f64) + 55.0 / 4.0 * turns as f64;
                let expected = wheel_color(&lut, k, mags[i] / peak);
                let got = rgb_at(&rotated, i);
                assert!(max_diff(got, expected) <= 1.0, "turns {turns} pixel {i}: {got:?} vs {expected:?}");
                assert!((saturation(got) - saturation(rgb_at(&base, i))).abs() <= 1.0 / 255.0);
            }
        }
    }
}

#[test]
fn every_encoding_stays_in_byte_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let flow = random_field(&mut rng, 9, 7, 50.0);
        for kind in EncodingKind::ALL {
            for norm in [NormStrategy::PerFrameMax, NormStrategy::FixedCap(10.0)] {
                let enc = encode(&flow, kind, norm).unwrap();
                assert_eq!(enc.data().len(), kind.channels() * 63);
                assert!(enc.data().iter().all(|&x| (0.0..=255.0).contains(&x)), "{kind}");
            }
        }
        let m3 = encode(&flow, EncodingKind::Mag3Ch, NormStrategy::PerFrameMax).unwrap();
        assert_eq!(m3.channel(0), m3.channel(1));
        assert_eq!(m3.channel(1), m3.channel(2));
    }
}
