use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::field::{magnitude, vector_angle, FlowField};
use super::wheel;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("unknown flow encoding kind `{0}`")]
    UnknownKind(String),
    #[error("fixed normalization cap must be positive, got {0}")]
    NonPositiveCap(f32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// Normalized magnitude, one channel.
    Mag1Ch,
    /// Normalized magnitude replicated into three identical channels.
    Mag3Ch,
    /// Normalized magnitude plus linearly quantized direction.
    MagDir2Ch,
    /// Color-circle rendering: hue from direction, saturation from magnitude.
    ColorWheel3Ch,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 4] =
        [EncodingKind::Mag1Ch, EncodingKind::Mag3Ch, EncodingKind::MagDir2Ch, EncodingKind::ColorWheel3Ch];

    pub fn channels(self) -> usize {
        match self {
            EncodingKind::Mag1Ch => 1,
            EncodingKind::MagDir2Ch => 2,
            EncodingKind::Mag3Ch | EncodingKind::ColorWheel3Ch => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncodingKind::Mag1Ch => "mag_1ch",
            EncodingKind::Mag3Ch => "mag_3ch",
            EncodingKind::MagDir2Ch => "mag_dir_2ch",
            EncodingKind::ColorWheel3Ch => "color_wheel",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingKind {
    type Err = EncodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mag_1ch" | "mag" | "magnitude" => Ok(EncodingKind::Mag1Ch),
            "mag_3ch" => Ok(EncodingKind::Mag3Ch),
            "mag_dir_2ch" | "mag_dir" => Ok(EncodingKind::MagDir2Ch),
            "color_wheel" | "color_wheel_3ch" => Ok(EncodingKind::ColorWheel3Ch),
            _ => Err(EncodeError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormStrategy {
    /// The frame's largest valid magnitude maps to 255.
    PerFrameMax,
    /// Magnitudes are clamped at `cap` pixels, then `cap` maps to 255.
    FixedCap(f32),
}

impl Default for NormStrategy {
    fn default() -> Self {
        NormStrategy::PerFrameMax
    }
}

/// A flow field rendered as planar network input with values in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowEncoding {
    kind: EncodingKind,
    norm: NormStrategy,
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FlowEncoding {
    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn norm(&self) -> NormStrategy {
        self.norm
    }

    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Channel-major planes, `channels * height * width` values.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.width * self.height;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn pixel(&self, x: usize, y: usize) -> Vec<f32> {
        let i = y * self.width + x;
        (0..self.channels()).map(|c| self.channel(c)[i]).collect()
    }
}

/// Renders `flow` into the requested network-input encoding.
pub fn encode(flow: &FlowField, kind: EncodingKind, norm: NormStrategy) -> Result<FlowEncoding, EncodeError> {
    let mags = magnitude(flow);
    let valid = flow.valid();
    let scale = match norm {
        NormStrategy::FixedCap(cap) => {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(EncodeError::NonPositiveCap(cap));
            }
            cap as f64
        }
        NormStrategy::PerFrameMax => {
            mags.iter().zip(valid).filter(|(_, &ok)| ok).fold(0.0f64, |m, (&g, _)| m.max(g as f64))
        }
    };
    // normalized magnitude in [0, 1]; all-zero frames stay zero
    let unit: Vec<f64> = mags.iter().map(|&g| if scale > 0.0 { (g as f64 / scale).min(1.0) } else { 0.0 }).collect();

    let plane = flow.width() * flow.height();
    let mut data = vec![0.0f32; kind.channels() * plane];
    for i in 0..plane {
        if !valid[i] {
            continue;
        }
        let (u, v) = (flow.u()[i] as f64, flow.v()[i] as f64);
        match kind {
            EncodingKind::Mag1Ch => data[i] = to_byte_range(255.0 * unit[i]),
            EncodingKind::Mag3Ch => {
                let m = to_byte_range(255.0 * unit[i]);
                for c in 0..3 {
                    data[c * plane + i] = m;
                }
            }
            EncodingKind::MagDir2Ch => {
                data[i] = to_byte_range(255.0 * unit[i]);
                let angle = vector_angle(u, v);
                data[plane + i] = to_byte_range((angle + PI) / (2.0 * PI) * 255.0);
            }
            EncodingKind::ColorWheel3Ch => {
                let rgb = wheel::color_at(wheel::hue_position(u, v), unit[i]);
                for c in 0..3 {
                    data[c * plane + i] = to_byte_range(rgb[c]);
                }
            }
        }
    }
    Ok(FlowEncoding { kind, norm, width: flow.width(), height: flow.height(), data })
}

fn to_byte_range(x: f64) -> f32 {
    x.clamp(0.0, 255.0) as f32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field_strategy() -> impl Strategy<Value = FlowField> {
        (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            let n = w * h;
            (
                proptest::collection::vec(-50.0f32..50.0, n),
                proptest::collection::vec(-50.0f32..50.0, n),
                proptest::collection::vec(proptest::bool::weighted(0.9), n),
            )
                .prop_map(move |(u, v, ok)| FlowField::with_validity(w, h, u, v, ok))
        })
    }

    #[test]
    fn single_pixel_max_maps_to_255() {
        let mut u = vec![0.0; 9];
        let mut v = vec![0.0; 9];
        u[4] = 3.0;
        v[4] = 4.0;
        let f = FlowField::new(3, 3, u, v);
        let e = encode(&f, EncodingKind::Mag1Ch, NormStrategy::PerFrameMax).unwrap();
        for (i, &x) in e.data().iter().enumerate() {
            assert_eq!(x, if i == 4 { 255.0 } else { 0.0 });
        }
    }

    #[test]
    fn zero_flow_color_wheel_is_white() {
        let f = FlowField::zeros(4, 3);
        let e = encode(&f, EncodingKind::ColorWheel3Ch, NormStrategy::PerFrameMax).unwrap();
        assert!(e.data().iter().all(|&x| x == 255.0));
    }

    #[test]
    fn fixed_cap_clamps() {
        let f = FlowField::new(2, 1, vec![1.0, 30.0], vec![0.0, 0.0]);
        let e = encode(&f, EncodingKind::Mag1Ch, NormStrategy::FixedCap(10.0)).unwrap();
        assert!((e.data()[0] - 25.5).abs() < 1e-4);
        assert_eq!(e.data()[1], 255.0);
    }

    #[test]
    fn rejects_bad_cap_and_kind() {
        let f = FlowField::zeros(1, 1);
        assert_eq!(
            encode(&f, EncodingKind::Mag1Ch, NormStrategy::FixedCap(0.0)),
            Err(EncodeError::NonPositiveCap(0.0))
        );
        assert!(encode(&f, EncodingKind::Mag1Ch, NormStrategy::FixedCap(-2.0)).is_err());
        assert!(matches!("hsv".parse::<EncodingKind>(), Err(EncodeError::UnknownKind(_))));
        assert_eq!("color_wheel".parse::<EncodingKind>(), Ok(EncodingKind::ColorWheel3Ch));
    }

    #[test]
    fn invalid_pixels_encode_as_zero() {
        let f = FlowField::with_validity(2, 1, vec![1.0, 5.0], vec![1.0, 5.0], vec![true, false]);
        for kind in EncodingKind::ALL {
            let e = encode(&f, kind, NormStrategy::PerFrameMax).unwrap();
            for c in 0..kind.channels() {
                assert_eq!(e.channel(c)[1], 0.0, "{kind}");
            }
        }
    }

    #[test]
    fn direction_channel_is_linear() {
        let f = FlowField::new(3, 1, vec![1.0, 0.0, -1.0], vec![0.0, 1.0, 0.0]);
        let e = encode(&f, EncodingKind::MagDir2Ch, NormStrategy::PerFrameMax).unwrap();
        let dir = e.channel(1);
        assert!((dir[0] - 127.5).abs() < 1e-4);
        assert!((dir[1] - 191.25).abs() < 1e-4);
        assert!((dir[2] - 255.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn every_value_in_byte_range(f in field_strategy(), cap in 0.1f32..100.0) {
            for kind in EncodingKind::ALL {
                for norm in [NormStrategy::PerFrameMax, NormStrategy::FixedCap(cap)] {
                    let e = encode(&f, kind, norm).unwrap();
                    prop_assert_eq!(e.data().len(), kind.channels() * f.width() * f.height());
                    prop_assert!(e.data().iter().all(|&x| (0.0..=255.0).contains(&x)));
                }
            }
        }

        #[test]
        fn mag_3ch_channels_identical(f in field_strategy()) {
            let e = encode(&f, EncodingKind::Mag3Ch, NormStrategy::PerFrameMax).unwrap();
            prop_assert_eq!(e.channel(0), e.channel(1));
            prop_assert_eq!(e.channel(1), e.channel(2));
        }

        #[test]
        fn per_frame_max_is_scale_invariant(f in field_strategy(), s in 0.01f32..100.0) {
            let a = encode(&f, EncodingKind::Mag1Ch, NormStrategy::PerFrameMax).unwrap();
            let b = encode(&f.scaled(s), EncodingKind::Mag1Ch, NormStrategy::PerFrameMax).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() <= 1.0);
            }
        }

        #[test]
        fn magnitude_ignores_sign(f in field_strategy()) {
            prop_assert_eq!(magnitude(&f), magnitude(&f.scaled(-1.0)));
        }
    }
}
