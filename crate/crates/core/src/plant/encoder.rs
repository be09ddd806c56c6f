use std::f64::consts::TAU;

use crate::firmware::PhasePair;

/// Quadrature edges per shaft revolution with 4x decoding.
pub fn counts_per_rev(ppr: u32) -> i64 {
    4 * ppr as i64
}

/// Absolute count position of a shaft angle: the number of edges crossed
/// going from 0 rad to `angle`.
pub fn encoder_position(angle: f64, ppr: u32) -> i64 {
    let x = angle / TAU * counts_per_rev(ppr) as f64;
    let nearest = x.round();
    // Angles built from exact fractions of a revolution can land a hair
    // below the edge they are meant to sit on.
    if (x - nearest).abs() < 1e-9 {
        nearest as i64
    } else {
        x.floor() as i64
    }
}

/// Channel states crossed while the shaft moves from `prev` to `curr`, in
/// the order the encoder produces them.
pub fn encoder_edges(prev: f64, curr: f64, ppr: u32) -> Vec<PhasePair> {
    let from = encoder_position(prev, ppr);
    let to = encoder_position(curr, ppr);
    if to >= from {
        (from + 1..=to).map(PhasePair::at_position).collect()
    } else {
        (to..from).rev().map(PhasePair::at_position).collect()
    }
}
