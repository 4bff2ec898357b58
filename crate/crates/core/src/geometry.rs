//! Mission-space lattice, camera model and footprint rasterization.
//!
//! The mission space is a rectangle of unit cells identified with their
//! integer centers. A camera footprint is an annulus sector anchored at the
//! agent's cell; a cell belongs to the footprint iff its center satisfies the
//! sector inequalities (inclusive).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell centers closer than this to a footprint boundary are reported by
/// [`boundary_warnings`].
pub const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Coord { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn dist2(self, other: Coord) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx * dx + dy * dy
    }
}

impl std::fmt::Display for Coord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Rectangular lattice `[x_min, x_max] × [y_min, y_max]` with 4-neighbour
/// adjacency. Cells are enumerated row-major (y outer, x inner).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    x_min: i32,
    x_max: i32,
    y_min: i32,
    y_max: i32,
    cells: Vec<Coord>,
}

impl GridWorld {
    pub fn new(x_min: i32, x_max: i32, y_min: i32, y_max: i32) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::Domain(format!(
                "empty grid [{x_min},{x_max}]x[{y_min},{y_max}]"
            )));
        }
        let cells = (y_min..=y_max)
            .flat_map(|y| (x_min..=x_max).map(move |x| Coord::new(x, y)))
            .collect();
        Ok(GridWorld {
            x_min,
            x_max,
            y_min,
            y_max,
            cells,
        })
    }

    pub fn x_min(&self) -> i32 {
        self.x_min
    }
    pub fn x_max(&self) -> i32 {
        self.x_max
    }
    pub fn y_min(&self) -> i32 {
        self.y_min
    }
    pub fn y_max(&self) -> i32 {
        self.y_max
    }

    pub fn width(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.y_max - self.y_min + 1) as usize
    }

    pub fn cells(&self) -> &[Coord] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Diameter of the location graph (Manhattan extent of the rectangle).
    pub fn diameter(&self) -> u32 {
        (self.x_max - self.x_min) as u32 + (self.y_max - self.y_min) as u32
    }

    pub fn contains(&self, q: Coord) -> bool {
        (self.x_min..=self.x_max).contains(&q.x) && (self.y_min..=self.y_max).contains(&q.y)
    }

    /// Row-major index of `q`, or `None` outside the grid.
    pub fn index_of(&self, q: Coord) -> Option<usize> {
        self.contains(q).then(|| {
            (q.y - self.y_min) as usize * self.width() + (q.x - self.x_min) as usize
        })
    }

    pub fn coord(&self, idx: usize) -> Coord {
        self.cells[idx]
    }

    /// Location-graph neighbours of `q` in canonical order: +x, −x, +y, −y.
    pub fn location_neighbors(&self, q: Coord) -> Result<Vec<Coord>> {
        if !self.contains(q) {
            return Err(Error::Domain(format!("cell {q} is outside the grid")));
        }
        Ok([(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(|(dx, dy)| Coord::new(q.x + dx, q.y + dy))
            .filter(|&n| self.contains(n))
            .collect())
    }
}

/// Camera control `c = (FL, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraControl {
    pub focal_length: f64,
    pub orientation: f64,
}

impl CameraControl {
    /// Builds a control with the orientation reduced into `[0, 2π)`.
    pub fn new(focal_length: f64, orientation: f64) -> Self {
        CameraControl {
            focal_length,
            orientation: normalize_orientation(orientation),
        }
    }
}

fn normalize_orientation(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Focal-length dependent sector shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub r_shrt: f64,
    pub r_lng: f64,
    pub alpha: f64,
}

/// Zoom model: the angle of view narrows linearly and the far range grows
/// linearly with the focal length; the near range stays at `r_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fl_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.fl_max > 0.0) {
            errs.push(format!("camera.fl_max: must be > 0, got {}", self.fl_max));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max <= TAU) {
            errs.push(format!(
                "camera.alpha: need 0 < alpha_min <= alpha_max <= 2pi, got [{}, {}]",
                self.alpha_min, self.alpha_max
            ));
        }
        if !(self.r_min >= 0.0 && self.r_min < self.r_max) {
            errs.push(format!(
                "camera.r: need 0 <= r_min < r_max, got [{}, {}]",
                self.r_min, self.r_max
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Maps a focal length to `(r_shrt, r_lng, α)`.
    pub fn camera_params(&self, fl: f64) -> Result<CameraParams> {
        if !(0.0..=self.fl_max).contains(&fl) {
            return Err(Error::Domain(format!(
                "focal length {fl} outside [0, {}]",
                self.fl_max
            )));
        }
        let zoom = fl / self.fl_max;
        let r_shrt = self.r_min;
        let r_lng = r_shrt + (self.r_max - r_shrt) * zoom;
        let alpha = self.alpha_max - (self.alpha_max - self.alpha_min) * zoom;
        Ok(CameraParams {
            r_shrt,
            r_lng,
            alpha,
        })
    }
}

/// Angular deviation of `v` from heading `theta`, in `[0, π]`.
fn angular_deviation(dx: f64, dy: f64, theta: f64) -> f64 {
    let mut d = (dy.atan2(dx) - theta).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d.abs()
}

/// Cell-center membership test for the sector anchored at `apex`.
pub fn in_sector(apex: Coord, q: Coord, theta: f64, params: &CameraParams) -> bool {
    if q == apex {
        return params.r_shrt == 0.0;
    }
    let r = apex.dist2(q).sqrt();
    if r < params.r_shrt || r > params.r_lng {
        return false;
    }
    let dx = f64::from(q.x - apex.x);
    let dy = f64::from(q.y - apex.y);
    angular_deviation(dx, dy, theta) <= params.alpha / 2.0
}

/// Footprint cells, sorted in the grid's row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Footprint {
    pub cells: Vec<Coord>,
}

impl Footprint {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, q: Coord) -> bool {
        self.cells.iter().any(|&c| c == q)
    }

    pub fn intersects(&self, other: &Footprint) -> bool {
        self.cells.iter().any(|&c| other.contains(c))
    }
}

/// Rasterizes `D(position, ctrl) ∩ Q`.
pub fn rasterize_footprint(
    world: &GridWorld,
    position: Coord,
    ctrl: &CameraControl,
    model: &CameraModel,
) -> Result<Footprint> {
    if !world.contains(position) {
        return Err(Error::Domain(format!("position {position} is outside the grid")));
    }
    let params = model.camera_params(ctrl.focal_length)?;
    let reach = params.r_lng.floor() as i32;
    let y_lo = (position.y - reach).max(world.y_min());
    let y_hi = (position.y + reach).min(world.y_max());
    let x_lo = (position.x - reach).max(world.x_min());
    let x_hi = (position.x + reach).min(world.x_max());
    let mut cells = Vec::new();
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let q = Coord::new(x, y);
            if in_sector(position, q, ctrl.orientation, &params) {
                cells.push(q);
            }
        }
    }
    Ok(Footprint { cells })
}

/// `N_i^sen`: agents whose footprints share at least one cell with agent `i`'s.
pub fn sensing_neighbors(footprints: &[Footprint], i: usize) -> Vec<usize> {
    (0..footprints.len())
        .filter(|&j| j != i && footprints[i].intersects(&footprints[j]))
        .collect()
}

/// `N_i^comm`: agents within the `2 r_max` disk (inclusive).
pub fn comm_neighbors(positions: &[Coord], r_max: f64, i: usize) -> Vec<usize> {
    let range2 = (2.0 * r_max) * (2.0 * r_max);
    (0..positions.len())
        .filter(|&j| j != i && positions[i].dist2(positions[j]) <= range2)
        .collect()
}

/// Cell centers lying within [`BOUNDARY_SLACK`] of a footprint boundary, as
/// `(position, control index, cell)` triples.
pub fn boundary_warnings(
    world: &GridWorld,
    controls: &[CameraControl],
    model: &CameraModel,
) -> Result<Vec<(Coord, usize, Coord)>> {
    let mut out = Vec::new();
    for (ci, ctrl) in controls.iter().enumerate() {
        let p = model.camera_params(ctrl.focal_length)?;
        for &apex in world.cells() {
            for &q in world.cells() {
                if q == apex {
                    continue;
                }
                let r = apex.dist2(q).sqrt();
                let near_radius = (r - p.r_shrt).abs() < BOUNDARY_SLACK
                    || (r - p.r_lng).abs() < BOUNDARY_SLACK;
                let inside_radii = r >= p.r_shrt - BOUNDARY_SLACK && r <= p.r_lng + BOUNDARY_SLACK;
                let dev = angular_deviation(
                    f64::from(q.x - apex.x),
                    f64::from(q.y - apex.y),
                    ctrl.orientation,
                );
                let near_edge = p.alpha < TAU && (dev - p.alpha / 2.0).abs() < BOUNDARY_SLACK;
                let inside_angle = dev <= p.alpha / 2.0 + BOUNDARY_SLACK;
                if (near_radius && inside_angle) || (near_edge && inside_radii) {
                    out.push((apex, ci, q));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(r_min: f64, r_max: f64, alpha_min: f64, alpha_max: f64) -> CameraModel {
        CameraModel {
            fl_max: 1.0,
            alpha_min,
            alpha_max,
            r_min,
            r_max,
        }
    }

    #[test]
    fn grid_enumeration_is_row_major() {
        let w = GridWorld::new(0, 2, 0, 1).unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(w.cells()[0], Coord::new(0, 0));
        assert_eq!(w.cells()[3], Coord::new(0, 1));
        for (i, &c) in w.cells().iter().enumerate() {
            assert_eq!(w.index_of(c), Some(i));
        }
        assert_eq!(w.diameter(), 3);
        assert!(GridWorld::new(1, 0, 0, 0).is_err());
    }

    #[test]
    fn neighbor_degrees() {
        let w = GridWorld::new(0, 2, 0, 2).unwrap();
        assert_eq!(w.location_neighbors(Coord::new(1, 1)).unwrap().len(), 4);
        assert_eq!(w.location_neighbors(Coord::new(0, 0)).unwrap().len(), 2);
        let path = GridWorld::new(0, 4, 0, 0).unwrap();
        assert_eq!(path.location_neighbors(Coord::new(4, 0)).unwrap(), vec![Coord::new(3, 0)]);
        assert!(w.location_neighbors(Coord::new(3, 0)).is_err());
    }

    #[test]
    fn camera_params_boundaries() {
        let m = model(0.5, 2.0, 0.5, 2.5);
        let p0 = m.camera_params(0.0).unwrap();
        assert_eq!((p0.r_shrt, p0.r_lng, p0.alpha), (0.5, 0.5, 2.5));
        let p1 = m.camera_params(1.0).unwrap();
        assert_eq!(p1.alpha, 0.5);
        assert_eq!(p1.r_lng, 2.0);
        let ph = m.camera_params(0.5).unwrap();
        assert!((ph.alpha - 1.5).abs() < 1e-15);
        assert!(m.camera_params(1.5).is_err());
        assert!(m.camera_params(-0.1).is_err());
    }

    #[test]
    fn camera_params_monotone() {
        let m = model(0.0, 3.0, 0.3, 6.0);
        let mut prev = m.camera_params(0.0).unwrap();
        for k in 1..=100 {
            let p = m.camera_params(k as f64 / 100.0).unwrap();
            assert!(p.alpha <= prev.alpha);
            assert!(p.r_lng >= prev.r_lng);
            assert!(p.r_shrt <= p.r_lng);
            prev = p;
        }
    }

    #[test]
    fn full_disk_of_radius_one_and_a_half() {
        let w = GridWorld::new(-5, 5, -5, 5).unwrap();
        let m = model(0.0, 1.5, TAU, TAU);
        let fp = rasterize_footprint(&w, Coord::new(0, 0), &CameraControl::new(1.0, 0.0), &m).unwrap();
        assert_eq!(fp.len(), 9);
        let brute: Vec<Coord> = w
            .cells()
            .iter()
            .copied()
            .filter(|q| q.dist2(Coord::new(0, 0)) <= 1.5 * 1.5)
            .collect();
        assert_eq!(fp.cells, brute);
    }

    #[test]
    fn degenerate_annulus_is_apex_only() {
        let w = GridWorld::new(0, 4, 0, 4).unwrap();
        let m = model(0.0, 2.0, 1.0, 1.0);
        let fp = rasterize_footprint(&w, Coord::new(2, 2), &CameraControl::new(0.0, 0.3), &m).unwrap();
        assert_eq!(fp.cells, vec![Coord::new(2, 2)]);
    }

    #[test]
    fn quarter_sector_facing_east() {
        let w = GridWorld::new(-3, 3, -3, 3).unwrap();
        let params = CameraParams {
            r_shrt: 1.0,
            r_lng: 2.2,
            alpha: PI / 2.0,
        };
        let got: Vec<Coord> = w
            .cells()
            .iter()
            .copied()
            .filter(|&q| in_sector(Coord::new(0, 0), q, 0.0, &params))
            .collect();
        for c in [Coord::new(1, 1), Coord::new(1, -1), Coord::new(2, 0), Coord::new(1, 0)] {
            assert!(got.contains(&c), "missing {c}");
        }
        assert!(!got.contains(&Coord::new(0, 0)));
        assert!(!got.contains(&Coord::new(-1, 0)));
        assert!(!got.contains(&Coord::new(2, 1)));
    }

    #[test]
    fn orientation_is_normalized() {
        let c = CameraControl::new(0.0, -PI / 2.0);
        assert!((c.orientation - 1.5 * PI).abs() < 1e-12);
        assert_eq!(CameraControl::new(0.0, TAU).orientation, 0.0);
        assert!(CameraControl::new(0.0, -1e-18).orientation < TAU);
    }

    #[test]
    fn comm_range_is_inclusive() {
        let pos = [Coord::new(0, 0), Coord::new(3, 0), Coord::new(0, 4)];
        assert_eq!(comm_neighbors(&pos, 1.5, 0), vec![1]);
        assert_eq!(comm_neighbors(&pos[..1], 1.5, 0), Vec::<usize>::new());
    }

    #[test]
    fn sensing_chain() {
        let w = GridWorld::new(0, 6, 0, 0).unwrap();
        let m = model(0.0, 1.0, TAU, TAU);
        let ctrl = CameraControl::new(1.0, 0.0);
        let fps: Vec<Footprint> = [0, 2, 4]
            .iter()
            .map(|&x| rasterize_footprint(&w, Coord::new(x, 0), &ctrl, &m).unwrap())
            .collect();
        assert_eq!(sensing_neighbors(&fps, 0), vec![1]);
        assert_eq!(sensing_neighbors(&fps, 1), vec![0, 2]);
        assert_eq!(sensing_neighbors(&fps, 2), vec![1]);
    }

    #[test]
    fn model_validation() {
        assert!(model(0.0, 1.0, 1.0, 2.0).validate().is_ok());
        assert!(model(1.0, 1.0, 1.0, 2.0).validate().is_err());
        assert!(model(0.0, 1.0, 0.0, 2.0).validate().is_err());
        assert!(model(0.0, 1.0, 1.0, 7.0).validate().is_err());
    }

    #[test]
    fn boundary_warning_on_exact_radius() {
        let w = GridWorld::new(0, 2, 0, 0).unwrap();
        let m = model(0.0, 1.0, TAU, TAU);
        let warns = boundary_warnings(&w, &[CameraControl::new(1.0, 0.0)], &m).unwrap();
        assert!(!warns.is_empty());
        let m2 = model(0.0, 1.3, TAU, TAU);
        assert!(boundary_warnings(&w, &[CameraControl::new(1.0, 0.0)], &m2).unwrap().is_empty());
    }
}
