mod common;

use common::{random_tensor, randomize, rgbf_reduces_exactly, swap_symmetry_deviation, toy_spec};
use flowseg::datasets::{ClassMap, Sample};
use flowseg::nn::{
    build_model, cross_entropy, predict, Batch, EncoderScale, Mode, Model, ModelError, ModelSpec, Tensor, Variant,
    WeightFile,
};
use flowseg::{EncodingKind, FlowField, SegMask};
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(variant: Variant, classes: usize) -> ModelSpec {
    toy_spec(variant, classes)
}

fn tensor(c: usize, n: usize, side: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    random_tensor(c, n, side, rng)
}

#[test]
fn logits_match_input_resolution_for_every_variant_and_encoding() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for variant in Variant::ALL {
        for kind in EncodingKind::ALL {
            let spec = ModelSpec { flow_encoding: kind, ..toy(variant, 5) };
            let mut model: Model<f64> = build_model(&spec, 2).unwrap();
            for (h, w) in [(32, 32), (64, 96)] {
                let mk = |c: usize, rng: &mut ChaCha8Rng| {
                    Tensor::from_vec(c, 1, h, w, (0..c * h * w).map(|_| rng.random_range(0.0..1.0)).collect())
                };
                let batch = Batch { rgb: Some(mk(3, &mut rng)), flow: Some(mk(kind.channels(), &mut rng)) };
                let y = model.forward(&batch, &mut Mode::Eval).unwrap();
                assert_eq!(y.dims(), (5, 1, h, w), "{variant} {kind}");
                assert!(y.all_finite());
            }
        }
    }
}

#[test]
fn two_stream_is_symmetric_under_swapping_streams_and_inputs() {
    for draw in 0..10u64 {
        let dev = swap_symmetry_deviation(draw);
        assert!(dev <= 1e-12, "draw {draw}: deviation {dev:e}");
    }
}

#[test]
fn zero_flow_kernels_reduce_early_fusion_to_rgb_only() {
    for draw in 0..10u64 {
        assert!(rgbf_reduces_exactly(draw), "draw {draw}");
    }
}

#[test]
fn cross_entropy_matches_per_pixel_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let logits = tensor(3, 1, 4, &mut rng);
    let ids: Vec<u8> = (0..16).map(|i| if i == 5 { 255 } else { rng.random_range(0..3) }).collect();
    let mask = SegMask::new(4, 4, ids.clone());
    let ce = cross_entropy(&logits, &[&mask], Some(255)).unwrap();

    let mut total = 0.0;
    let mut n = 0;
    for (p, &id) in ids.iter().enumerate() {
        if id == 255 {
            continue;
        }
        let z: Vec<f64> = (0..3).map(|c| logits.data[c * 16 + p]).collect();
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total += -(z[id as usize].exp() / denom).ln();
        n += 1;
    }
    assert_eq!(ce.counted, n);
    assert!((ce.mean() - total / n as f64).abs() < 1e-12);
}

#[test]
fn relabelling_classes_consistently_keeps_the_loss() {
    let perm = [2usize, 0, 3, 1];
    let mut model: Model<f64> = build_model(&toy(Variant::RgbOnly, 4), 3).unwrap();
    randomize(&mut model, 33);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = Batch { rgb: Some(tensor(3, 1, 32, &mut rng)), flow: None };
    let ids: Vec<u8> = (0..32 * 32).map(|_| rng.random_range(0..4)).collect();
    let mask = SegMask::new(32, 32, ids.clone());
    let loss = {
        let y = model.forward(&batch, &mut Mode::Eval).unwrap();
        cross_entropy(&y, &[&mask], None).unwrap().mean()
    };

    let mut permuted = model.clone();
    let d = &mut permuted.decoder;
    for conv in [&mut d.score5, &mut d.proj4, &mut d.proj3] {
        let (w, b) = (conv.weight.value.clone(), conv.bias.value.clone());
        let row = conv.in_channels;
        for (c, &pc) in perm.iter().enumerate() {
            conv.weight.value[pc * row..][..row].copy_from_slice(&w[c * row..][..row]);
            conv.bias.value[pc] = b[c];
        }
    }
    for up in [&mut d.up2a, &mut d.up2b, &mut d.up8] {
        let (w, b) = (up.weight.value.clone(), up.bias.value.clone());
        let kk = up.window.kernel * up.window.kernel;
        for (ci, &pi) in perm.iter().enumerate() {
            for (co, &po) in perm.iter().enumerate() {
                up.weight.value[(pi * 4 + po) * kk..][..kk].copy_from_slice(&w[(ci * 4 + co) * kk..][..kk]);
            }
            up.bias.value[pi] = b[ci];
        }
    }
    let relabelled = SegMask::new(32, 32, ids.iter().map(|&i| perm[i as usize] as u8).collect());
    let y = permuted.forward(&batch, &mut Mode::Eval).unwrap();
    let loss_p = cross_entropy(&y, &[&relabelled], None).unwrap().mean();
    assert!((loss - loss_p).abs() < 1e-12, "{loss} vs {loss_p}");
}

#[test]
fn pretrained_weights_load_into_matching_encoders() {
    let dir = tempfile::tempdir().unwrap();
    let source: Model<f32> = build_model(&toy(Variant::RgbOnly, 3), 1).unwrap();
    let path = dir.path().join("enc.wts");
    WeightFile::from_encoder(source.rgb.as_ref().unwrap()).write(&path).unwrap();

    let spec = ModelSpec { pretrained_rgb_weights: Some(path.clone()), ..toy(Variant::TwoStream, 3) };
    let loaded: Model<f32> = build_model(&spec, 2).unwrap();
    let (a, b) = (source.rgb.as_ref().unwrap().params(), loaded.rgb.as_ref().unwrap().params());
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.value, q.value, "{}", q.name);
    }

    let spec = ModelSpec { pretrained_rgb_weights: Some(path), ..toy(Variant::RgbfEarly, 3) };
    let rgbf: Model<f32> = build_model(&spec, 2).unwrap();
    let w = &rgbf.rgb.as_ref().unwrap().convs[0].weight;
    let src = &source.rgb.as_ref().unwrap().convs[0].weight;
    let c = w.shape[1];
    assert_eq!(c, 6);
    for o in 0..w.shape[0] {
        assert_eq!(&w.value[o * c * 9..][..27], &src.value[o * 27..][..27]);
        assert!(w.value[o * c * 9 + 27..][..27].iter().any(|&v| v != 0.0), "flow kernels stay random");
    }
}

#[test]
fn full_scale_rejects_a_wrong_stage_one_width() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.wts");
    let mut w = WeightFile::new();
    w.insert("conv1_1.weight", vec![32, 3, 3, 3], vec![0.0; 32 * 27]);
    w.insert("conv1_1.bias", vec![32], vec![0.0; 32]);
    w.write(&path).unwrap();
    let spec = ModelSpec {
        encoder_scale: EncoderScale::Full,
        pretrained_rgb_weights: Some(path),
        ..ModelSpec::new(Variant::RgbOnly, 12)
    };
    match build_model::<f32>(&spec, 0) {
        Err(ModelError::WeightShapeMismatch { name, expected, found }) => {
            assert_eq!(name, "conv1_1.weight");
            assert_eq!(expected, vec![64, 3, 3, 3]);
            assert_eq!(found, vec![32, 3, 3, 3]);
        }
        other => panic!("expected WeightShapeMismatch, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn predict_needs_flow_for_flow_variants() {
    let class_map = ClassMap::synthetic();
    let sample =
        Sample::new(RgbImage::new(32, 32), None, SegMask::filled(32, 32, 0), "f".into(), None, "s".into(), &class_map)
            .unwrap();
    let mut model: Model<f32> = build_model(&toy(Variant::TwoStream, 3), 0).unwrap();
    assert!(matches!(predict(&mut model, &sample), Err(ModelError::MissingModality("flow"))));
    let mut rgb: Model<f32> = build_model(&toy(Variant::RgbOnly, 3), 0).unwrap();
    assert_eq!(predict(&mut rgb, &sample).unwrap().width(), 32);
    let with_flow = Sample { flow: Some(FlowField::zeros(32, 32)), ..sample };
    assert!(predict(&mut model, &with_flow).is_ok());
}
