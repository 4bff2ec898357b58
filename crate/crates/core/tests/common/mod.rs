#![allow(dead_code)]

use std::f64::consts::TAU;

use vsn_coverage::{CameraControl, CameraModel, GameSpec, GridWorld, WeightField};

/// Full-disk cameras with the given radii on a `w × h` grid.
pub fn disk_game(w: i32, h: i32, radii: &[f64], n: usize, weights: Vec<f64>) -> GameSpec {
    let world = GridWorld::new(0, w - 1, 0, h - 1).unwrap();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let model = CameraModel {
        fl_max: 1.0,
        alpha_min: TAU,
        alpha_max: TAU,
        r_min: 0.0,
        r_max,
    };
    let controls = radii.iter().map(|r| CameraControl::new(r / r_max, 0.0)).collect();
    let weights = WeightField::new(&world, weights).unwrap();
    GameSpec::new(world, weights, model, controls, n).unwrap()
}

/// Weights `1, 2, 3, …` in row-major order.
pub fn ramp(w: i32, h: i32) -> Vec<f64> {
    (0..w * h).map(|k| 1.0 + f64::from(k)).collect()
}
