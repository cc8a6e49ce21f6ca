//! UT track construction.
//!
//! The BS sits at the origin and the UT starts on the +x axis at the
//! configured T-R separation. Points are spaced one update distance apart
//! along the track; there are `floor(track_length / update_distance)` of them,
//! the first at t = 0.

use std::f64::consts::FRAC_PI_3;

use crate::config::{Extent, SimulationConfig, TrackKind, TurnDirection};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub position: Vec2,
    /// Direction of travel φ_v at this point, radians.
    pub heading: f64,
    /// Distance travelled along the track.
    pub arc_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub update_interval: f64,
    /// Corner points of the polyline, start to end.
    pub vertices: Vec<Vec2>,
}

impl Trajectory {
    /// Builds the track described by `config.motion`. Deterministic and RNG-free;
    /// expects a config whose motion fields already passed validation.
    pub fn generate(config: &SimulationConfig) -> Self {
        let m = &config.motion;
        let start = config.start_position();
        let vertices = match m.track {
            TrackKind::Linear => vec![
                start,
                start + Vec2::from_heading(m.heading_rad) * m.track_length_m,
            ],
            TrackKind::HalfHexagon => half_hexagon(start.x, m.track_length_m, m.turn),
        };

        let seg_len: Vec<f64> = vertices.windows(2).map(|w| w[0].distance(w[1])).collect();
        let seg_heading: Vec<f64> = vertices
            .windows(2)
            .map(|w| (w[1] - w[0]).heading())
            .collect();
        let mut seg_start = Vec::with_capacity(seg_len.len());
        let mut acc = 0.0;
        for l in &seg_len {
            seg_start.push(acc);
            acc += l;
        }

        let count = ((m.track_length_m / m.update_distance_m) + 1e-9)
            .floor()
            .max(1.0) as usize;
        let dt = config.update_interval_s();
        let points = (0..count)
            .map(|k| {
                let arc = k as f64 * m.update_distance_m;
                let seg = seg_start
                    .iter()
                    .rposition(|&s| s <= arc + 1e-12)
                    .unwrap_or(0);
                let dir = Vec2::from_heading(seg_heading[seg]);
                TrajectoryPoint {
                    time: k as f64 * dt,
                    position: vertices[seg] + dir * (arc - seg_start[seg]),
                    heading: seg_heading[seg],
                    arc_length: arc,
                }
            })
            .collect();

        Self {
            points,
            update_interval: dt,
            vertices,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounding_box(&self) -> Extent {
        Extent::bounding(self.points.iter().map(|p| p.position)).expect("non-empty trajectory")
    }

    /// Total polyline length of the full track (vertex to vertex).
    pub fn track_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Three equal sides of a regular hexagon, bulging away from the BS, laid out
/// mirror-symmetrically about a line through the BS and rotated so the first
/// vertex lands on +x at distance `d`.
fn half_hexagon(d: f64, length: f64, turn: TurnDirection) -> Vec<Vec2> {
    let s = length / 3.0;
    let xc = (d * d - s * s).sqrt();
    let apothem = s * FRAC_PI_3.sin();
    let mirror = match turn {
        TurnDirection::Left => 1.0,
        TurnDirection::Right => -1.0,
    };
    let local = [
        Vec2::new(xc, -s),
        Vec2::new(xc + apothem, -s / 2.0),
        Vec2::new(xc + apothem, s / 2.0),
        Vec2::new(xc, s),
    ];
    let alpha = s.atan2(xc);
    let mut vertices: Vec<Vec2> = local
        .iter()
        .map(|p| Vec2::new(p.x, mirror * p.y).rotate(mirror * alpha))
        .collect();
    // remove rotation round-off from the start point
    vertices[0] = Vec2::new(d, 0.0);
    vertices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_pi;

    fn fig2() -> SimulationConfig {
        SimulationConfig::with_seed(0)
    }

    #[test]
    fn eighty_points_over_twenty_seconds() {
        let t = Trajectory::generate(&fig2());
        assert_eq!(t.len(), 80);
        assert_eq!(t.update_interval, 0.25);
        assert_eq!(t.points[0].time, 0.0);
        assert_eq!(t.points[79].time, 19.75);
        assert!((t.update_interval * 1.0 - 0.25).abs() == 0.0);
    }

    #[test]
    fn single_step_track() {
        let mut cfg = fig2();
        cfg.motion.track_length_m = 0.25;
        let t = Trajectory::generate(&cfg);
        assert_eq!(t.len(), 1);
        assert_eq!(t.points[0].position, Vec2::new(50.0, 0.0));
    }

    #[test]
    fn half_hexagon_turns_at_segment_breaks() {
        let t = Trajectory::generate(&fig2());
        assert!((t.track_length() - 20.0).abs() < 1e-9);
        let h = |k: usize| t.points[k].heading;
        assert_eq!(h(0), h(26));
        assert!((wrap_pi(h(27) - h(26)) - FRAC_PI_3).abs() < 1e-12);
        assert_eq!(h(27), h(53));
        assert!((wrap_pi(h(54) - h(53)) - FRAC_PI_3).abs() < 1e-12);
        assert_eq!(h(54), h(79));
    }

    #[test]
    fn right_turns_mirror_left_turns() {
        let mut cfg = fig2();
        let left = Trajectory::generate(&cfg);
        cfg.motion.turn = TurnDirection::Right;
        let right = Trajectory::generate(&cfg);
        for (l, r) in left.points.iter().zip(&right.points) {
            assert!((l.position.x - r.position.x).abs() < 1e-9);
            assert!((l.position.y + r.position.y).abs() < 1e-9);
        }
        assert!(
            (wrap_pi(right.points[30].heading - right.points[20].heading) + FRAC_PI_3).abs()
                < 1e-12
        );
    }

    #[test]
    fn start_is_at_tr_separation() {
        let t = Trajectory::generate(&fig2());
        let p0 = t.points[0].position;
        assert!((p0.x - 50.0).abs() < 1e-9 && p0.y.abs() < 1e-9);
    }

    #[test]
    fn linear_track_follows_heading() {
        let mut cfg = fig2();
        cfg.motion.track = TrackKind::Linear;
        cfg.motion.heading_rad = 0.0;
        cfg.motion.track_length_m = 5.0;
        cfg.motion.update_distance_m = 0.5;
        let t = Trajectory::generate(&cfg);
        assert_eq!(t.len(), 10);
        assert!((t.points[9].position.x - 54.5).abs() < 1e-12);
        assert!(t
            .points
            .iter()
            .all(|p| p.heading == 0.0 && p.position.y == 0.0));
    }
}
