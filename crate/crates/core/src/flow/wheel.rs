//! The standard optical-flow color circle.
//!
//! 55 spokes walk red → yellow → green → cyan → blue → magenta → red with
//! piecewise-linear ramps (15, 6, 4, 11, 13, 6 spokes). Hue position is the
//! vector angle spread evenly over the full circle, and saturation is the
//! normalized magnitude: zero motion is white.

use super::field::vector_angle;

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;

pub const SPOKES: usize = RY + YG + GC + CB + BM + MR;

/// Spoke colors in `[0, 255]`.
pub fn spokes() -> [[f64; 3]; SPOKES] {
    let mut wheel = [[0.0; 3]; SPOKES];
    let mut k = 0;
    let ramp = |i: usize, n: usize| 255.0 * i as f64 / n as f64;
    for i in 0..RY {
        wheel[k] = [255.0, ramp(i, RY), 0.0];
        k += 1;
    }
    for i in 0..YG {
        wheel[k] = [255.0 - ramp(i, YG), 255.0, 0.0];
        k += 1;
    }
    for i in 0..GC {
        wheel[k] = [0.0, 255.0, ramp(i, GC)];
        k += 1;
    }
    for i in 0..CB {
        wheel[k] = [0.0, 255.0 - ramp(i, CB), 255.0];
        k += 1;
    }
    for i in 0..BM {
        wheel[k] = [ramp(i, BM), 0.0, 255.0];
        k += 1;
    }
    for i in 0..MR {
        wheel[k] = [255.0, 0.0, 255.0 - ramp(i, MR)];
        k += 1;
    }
    wheel
}

/// Fractional spoke position in `[0, SPOKES)` for a vector.
pub fn hue_position(u: f64, v: f64) -> f64 {
    let angle = vector_angle(u, v);
    let pos = angle / std::f64::consts::TAU * SPOKES as f64;
    let pos = pos.rem_euclid(SPOKES as f64);
    if pos >= SPOKES as f64 {
        0.0
    } else {
        pos
    }
}

/// Color at a fractional spoke position and saturation in `[0, 1]`.
pub fn color_at(position: f64, saturation: f64) -> [f64; 3] {
    let wheel = spokes();
    let k0 = position.floor() as usize % SPOKES;
    let k1 = (k0 + 1) % SPOKES;
    let f = position - position.floor();
    let s = saturation.clamp(0.0, 1.0);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let hue = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
        out[c] = 255.0 * (1.0 - s * (1.0 - hue));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramps_close_the_circle() {
        let w = spokes();
        assert_eq!(w[0], [255.0, 0.0, 0.0]);
        assert_eq!(w[RY], [255.0, 255.0, 0.0]);
        assert_eq!(w[RY + YG], [0.0, 255.0, 0.0]);
        // last spoke ramps back towards pure red
        assert!(w[SPOKES - 1][2] > 0.0 && w[SPOKES - 1][0] == 255.0);
    }

    #[test]
    fn zero_saturation_is_white() {
        for p in [0.0, 7.3, 30.0, 54.9] {
            assert_eq!(color_at(p, 0.0), [255.0; 3]);
        }
    }
}
