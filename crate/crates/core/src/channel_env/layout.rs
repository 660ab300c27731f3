//! Road network and constant-speed lane mobility.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::scenario::{LaneGeometry, ScenarioConfig};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Lane runs along x at a fixed y.
    Horizontal,
    /// Lane runs along y at a fixed x.
    Vertical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub axis: Axis,
    /// Index of the street (row or column of the grid) this lane belongs to.
    pub street: usize,
    /// +1 or -1 along the lane axis.
    pub direction: f64,
    /// Fixed coordinate of the lane centre line.
    pub offset: f64,
    /// Coordinate of the street centre line.
    pub street_coord: f64,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: [f64; 2],
    pub heading: [f64; 2],
    pub speed_mps: f64,
    pub lane_id: usize,
    /// Distance travelled along the lane axis, in `[0, lane.length)`.
    pub along: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadLayout {
    pub lanes: Vec<Lane>,
    /// Spacing of intersections along horizontal and vertical lanes; `None`
    /// on a freeway.
    pub intersection_spacing: Option<[f64; 2]>,
    lanes_per_direction: usize,
    lane_width: f64,
    streets: [usize; 2],
    street_spacing: [f64; 2],
}

impl RoadLayout {
    pub fn new(geometry: &LaneGeometry) -> Self {
        match *geometry {
            LaneGeometry::Grid {
                block_width_m,
                block_height_m,
                blocks_x,
                blocks_y,
                lane_width_m,
                lanes_per_direction,
            } => {
                let width = block_width_m * blocks_x as f64;
                let height = block_height_m * blocks_y as f64;
                let mut lanes = Vec::new();
                // Horizontal streets: eastbound keeps right (below the centre line).
                for street in 0..=blocks_y {
                    let y0 = street as f64 * block_height_m;
                    for (direction, side) in [(1.0, -1.0), (-1.0, 1.0)] {
                        for rank in 0..lanes_per_direction {
                            lanes.push(Lane {
                                axis: Axis::Horizontal,
                                street,
                                direction,
                                offset: y0 + side * lane_width_m * (rank as f64 + 0.5),
                                street_coord: y0,
                                length: width,
                            });
                        }
                    }
                }
                // Vertical streets: northbound keeps right (east of the centre line).
                for street in 0..=blocks_x {
                    let x0 = street as f64 * block_width_m;
                    for (direction, side) in [(1.0, 1.0), (-1.0, -1.0)] {
                        for rank in 0..lanes_per_direction {
                            lanes.push(Lane {
                                axis: Axis::Vertical,
                                street,
                                direction,
                                offset: x0 + side * lane_width_m * (rank as f64 + 0.5),
                                street_coord: x0,
                                length: height,
                            });
                        }
                    }
                }
                RoadLayout {
                    lanes,
                    intersection_spacing: Some([block_width_m, block_height_m]),
                    lanes_per_direction,
                    lane_width: lane_width_m,
                    streets: [blocks_y + 1, blocks_x + 1],
                    street_spacing: [block_height_m, block_width_m],
                }
            }
            LaneGeometry::Freeway {
                length_m,
                lane_width_m,
                lanes_per_direction,
            } => {
                let mut lanes = Vec::new();
                let half = lane_width_m * lanes_per_direction as f64;
                for rank in 0..lanes_per_direction {
                    lanes.push(Lane {
                        axis: Axis::Horizontal,
                        street: 0,
                        direction: 1.0,
                        offset: lane_width_m * (rank as f64 + 0.5),
                        street_coord: half,
                        length: length_m,
                    });
                }
                for rank in 0..lanes_per_direction {
                    lanes.push(Lane {
                        axis: Axis::Horizontal,
                        street: 0,
                        direction: -1.0,
                        offset: half + lane_width_m * (rank as f64 + 0.5),
                        street_coord: half,
                        length: length_m,
                    });
                }
                RoadLayout {
                    lanes,
                    intersection_spacing: None,
                    lanes_per_direction,
                    lane_width: lane_width_m,
                    streets: [1, 0],
                    street_spacing: [0.0, 0.0],
                }
            }
        }
    }

    /// Axis-aligned box containing every lane centre line.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for lane in &self.lanes {
            let (a, b) = match lane.axis {
                Axis::Horizontal => ([0.0, lane.offset], [lane.length, lane.offset]),
                Axis::Vertical => ([lane.offset, 0.0], [lane.offset, lane.length]),
            };
            for i in 0..2 {
                lo[i] = lo[i].min(a[i]).min(b[i]);
                hi[i] = hi[i].max(a[i]).max(b[i]);
            }
        }
        (lo, hi)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (lo, hi) = self.bounds();
        (0..2).all(|i| p[i] >= lo[i] - 1e-9 && p[i] <= hi[i] + 1e-9)
    }

    pub fn position(&self, lane_id: usize, along: f64) -> [f64; 2] {
        let lane = &self.lanes[lane_id];
        match lane.axis {
            Axis::Horizontal => [along, lane.offset],
            Axis::Vertical => [lane.offset, along],
        }
    }

    fn heading(&self, lane_id: usize) -> [f64; 2] {
        let lane = &self.lanes[lane_id];
        match lane.axis {
            Axis::Horizontal => [lane.direction, 0.0],
            Axis::Vertical => [0.0, lane.direction],
        }
    }

    pub fn vehicle(&self, lane_id: usize, along: f64, speed_mps: f64) -> VehicleState {
        VehicleState {
            position: self.position(lane_id, along),
            heading: self.heading(lane_id),
            speed_mps,
            lane_id,
            along,
        }
    }

    /// Uniform position over the total lane length.
    pub fn random_vehicle(&self, speed_mps: f64, rng: &mut Rng) -> VehicleState {
        let total: f64 = self.lanes.iter().map(|l| l.length).sum();
        let mut u = rng.random::<f64>() * total;
        let mut lane_id = self.lanes.len() - 1;
        for (i, lane) in self.lanes.iter().enumerate() {
            if u < lane.length {
                lane_id = i;
                break;
            }
            u -= lane.length;
        }
        let along = (rng.random::<f64>() * self.lanes[lane_id].length).min(self.lanes[lane_id].length - 1e-9);
        self.vehicle(lane_id, along.max(0.0), speed_mps)
    }

    fn lane_index(&self, axis: Axis, street: usize, direction: f64, rank: usize) -> usize {
        let lpd = self.lanes_per_direction;
        let per_street = 2 * lpd;
        let dir_block = if direction > 0.0 { 0 } else { 1 };
        let base = match axis {
            Axis::Horizontal => 0,
            Axis::Vertical => self.streets[0] * per_street,
        };
        base + street * per_street + dir_block * lpd + rank
    }

    fn lane_rank(&self, lane_id: usize) -> usize {
        lane_id % self.lanes_per_direction
    }

    /// Moves `v` by `speed * dt` along its lane. On a grid, each intersection
    /// crossed is a chance to turn onto the crossing street; the network wraps
    /// at its outer edge so vehicles never leave the layout.
    pub fn advance(&self, v: &mut VehicleState, dt_s: f64, turn_probability: f64, rng: &mut Rng) {
        let mut remaining = v.speed_mps * dt_s;
        if remaining <= 0.0 {
            return;
        }
        let Some(spacing) = self.intersection_spacing else {
            let lane = &self.lanes[v.lane_id];
            v.along = (v.along + lane.direction * remaining).rem_euclid(lane.length);
            v.position = self.position(v.lane_id, v.along);
            return;
        };
        while remaining > 0.0 {
            let lane = self.lanes[v.lane_id].clone();
            if lane.direction > 0.0 && v.along >= lane.length {
                v.along -= lane.length;
            } else if lane.direction < 0.0 && v.along <= 0.0 {
                v.along += lane.length;
            }
            let step = match lane.axis {
                Axis::Horizontal => spacing[0],
                Axis::Vertical => spacing[1],
            };
            let next = if lane.direction > 0.0 {
                ((v.along / step).floor() + 1.0) * step
            } else {
                ((v.along / step).ceil() - 1.0) * step
            };
            let gap = (next - v.along).abs();
            if remaining < gap {
                v.along += lane.direction * remaining;
                break;
            }
            remaining -= gap;
            v.along = next;
            if rng.random::<f64>() < turn_probability {
                // Cross street index at this intersection and the new direction.
                let cross_axis = match lane.axis {
                    Axis::Horizontal => Axis::Vertical,
                    Axis::Vertical => Axis::Horizontal,
                };
                let cross_street = ((next / step).round().max(0.0) as usize).min(self.streets_on(cross_axis) - 1);
                let direction = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let rank = self.lane_rank(v.lane_id);
                let new_id = self.lane_index(cross_axis, cross_street, direction, rank);
                let new_lane = &self.lanes[new_id];
                v.lane_id = new_id;
                v.along = lane.street_coord.clamp(0.0, new_lane.length);
            }
        }
        let cur = &self.lanes[v.lane_id];
        v.along = v.along.rem_euclid(cur.length);
        v.position = self.position(v.lane_id, v.along);
        v.heading = self.heading(v.lane_id);
    }

    fn streets_on(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.streets[0],
            Axis::Vertical => self.streets[1],
        }
    }

    /// Whether the two vehicles share a straight corridor (same street).
    pub fn same_street(&self, a: &VehicleState, b: &VehicleState) -> bool {
        let la = &self.lanes[a.lane_id];
        let lb = &self.lanes[b.lane_id];
        la.axis == lb.axis && la.street == lb.street
    }

    /// Corner legs (d1 from `a`, d2 from `b`) used by the one-corner NLOS
    /// model. Perpendicular streets meet at a single intersection; for
    /// parallel streets the Manhattan decomposition is used.
    pub fn corner_legs(&self, a: &VehicleState, b: &VehicleState) -> (f64, f64) {
        let la = &self.lanes[a.lane_id];
        let lb = &self.lanes[b.lane_id];
        if la.axis != lb.axis {
            let corner = match la.axis {
                Axis::Horizontal => [lb.street_coord, la.street_coord],
                Axis::Vertical => [la.street_coord, lb.street_coord],
            };
            (distance(a.position, corner), distance(b.position, corner))
        } else {
            let dx = (a.position[0] - b.position[0]).abs();
            let dy = (a.position[1] - b.position[1]).abs();
            match la.axis {
                Axis::Horizontal => (dy, dx),
                Axis::Vertical => (dx, dy),
            }
        }
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn street_spacing(&self) -> [f64; 2] {
        self.street_spacing
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn layout_for(cfg: &ScenarioConfig) -> RoadLayout {
    RoadLayout::new(&cfg.lane_geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_env::scenario::ScenarioKind;
    use crate::rng;

    fn layout(kind: ScenarioKind) -> RoadLayout {
        layout_for(&ScenarioConfig::preset(kind, 4, 4))
    }

    #[test]
    fn grid_lane_indexing_is_consistent() {
        let l = layout(ScenarioKind::Urban);
        for (id, lane) in l.lanes.iter().enumerate() {
            let rank = l.lane_rank(id);
            assert_eq!(l.lane_index(lane.axis, lane.street, lane.direction, rank), id);
        }
    }

    #[test]
    fn displacement_matches_speed() {
        let l = layout(ScenarioKind::Highway);
        let mut r = rng::stream(0, 0);
        let mut v = l.vehicle(0, 100.0, 50.0 / 3.6);
        l.advance(&mut v, 0.1, 0.0, &mut r);
        assert!((v.along - 100.0 - 1.388_888_888_9).abs() < 1e-9);
    }

    #[test]
    fn zero_dt_keeps_position() {
        let l = layout(ScenarioKind::Urban);
        let mut r = rng::stream(0, 0);
        let mut v = l.random_vehicle(13.9, &mut r);
        let before = v.clone();
        l.advance(&mut v, 0.0, 0.5, &mut r);
        assert_eq!(v, before);
    }

    #[test]
    fn freeway_wraps() {
        let l = layout(ScenarioKind::Highway);
        let mut r = rng::stream(0, 0);
        let mut v = l.vehicle(0, 1499.5, 120.0 / 3.6);
        l.advance(&mut v, 0.1, 0.0, &mut r);
        assert!(v.along >= 0.0 && v.along < 1500.0);
        assert!(l.contains(v.position));
        let mut w = l.vehicle(4, 0.5, 120.0 / 3.6);
        l.advance(&mut w, 0.1, 0.0, &mut r);
        assert!(l.contains(w.position));
    }

    #[test]
    fn grid_vehicles_stay_in_bounds_over_long_runs() {
        for kind in [ScenarioKind::Urban, ScenarioKind::Rural] {
            let l = layout(kind);
            let mut r = rng::stream(3, 0);
            for _ in 0..20 {
                let mut v = l.random_vehicle(30.0, &mut r);
                for _ in 0..500 {
                    l.advance(&mut v, 1.0, 0.4, &mut r);
                    assert!(l.contains(v.position), "{:?} left {:?}", v, l.bounds());
                    assert!(v.along >= 0.0 && v.along < l.lanes[v.lane_id].length);
                }
            }
        }
    }

    #[test]
    fn grid_end_position_stays_in_bounds() {
        let l = layout(ScenarioKind::Urban);
        let mut r = rng::stream(1, 0);
        let lane = l.lanes.iter().position(|x| x.direction > 0.0).unwrap();
        let mut v = l.vehicle(lane, l.lanes[lane].length - 0.1, 50.0 / 3.6);
        l.advance(&mut v, 0.1, 0.0, &mut r);
        assert!(l.contains(v.position));
    }
}
