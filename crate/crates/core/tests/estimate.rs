mod common;

use common::{median_epe, textured_pair};
use flowseg::estimate::{estimate_flow, EstimateError, PyramidParams};
use image::GrayImage;

const SIDE: usize = 64;

#[test]
fn recovers_small_translations() {
    let params = PyramidParams::default();
    for (seed, d) in [(1, (2, 0)), (2, (0, -2)), (3, (1, 1)), (4, (-1, 2)), (5, (-2, -1)), (6, (0, 1))] {
        let (prev, next) = textured_pair(seed, SIDE, SIDE, d);
        let flow = estimate_flow(&prev, &next, &params).unwrap();
        let epe = median_epe(&flow, (d.0 as f64, d.1 as f64), 4);
        assert!(epe < 0.5, "shift {d:?}: median EPE {epe}");
    }
}

#[test]
fn identical_frames_give_near_zero_flow() {
    let (frame, _) = textured_pair(9, SIDE, SIDE, (0, 0));
    let flow = estimate_flow(&frame, &frame, &PyramidParams::default()).unwrap();
    let peak = flow.u().iter().zip(flow.v()).map(|(&u, &v)| u.hypot(v)).fold(0.0f32, f32::max);
    assert!(peak <= 0.05, "max |flow| {peak}");
}

#[test]
fn swapping_frames_negates_the_estimate() {
    let (a, b) = textured_pair(11, SIDE, SIDE, (1, -1));
    let params = PyramidParams::default();
    let forward = estimate_flow(&a, &b, &params).unwrap();
    let backward = estimate_flow(&b, &a, &params).unwrap();
    assert!(median_epe(&forward, (1.0, -1.0), 4) < 0.5);
    assert!(median_epe(&backward, (-1.0, 1.0), 4) < 0.5);
}

#[test]
fn estimation_is_deterministic() {
    let (a, b) = textured_pair(12, SIDE, SIDE, (2, 1));
    let params = PyramidParams::default();
    let x = estimate_flow(&a, &b, &params).unwrap();
    let y = estimate_flow(&a, &b, &params).unwrap();
    assert_eq!(x, y);
}

#[test]
fn rejects_bad_inputs() {
    let params = PyramidParams::default();
    let (a, _) = textured_pair(13, SIDE, SIDE, (0, 0));
    let small = GrayImage::new(20, 20);
    assert!(matches!(estimate_flow(&a, &small, &params), Err(EstimateError::DimensionMismatch(..))));
    assert!(matches!(estimate_flow(&small, &small, &params), Err(EstimateError::ImageTooSmall(..))));
    let even = PyramidParams { window: 4, ..params };
    assert!(matches!(estimate_flow(&a, &a, &even), Err(EstimateError::InvalidParams(_))));
}
