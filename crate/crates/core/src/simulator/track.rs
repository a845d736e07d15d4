//! Oval track with a closed-loop curvilinear frame.
//!
//! The centerline starts at the origin heading along +x, runs the first
//! straight, turns left through a half circle centred at `(L, R)`, returns
//! along the second straight at `y = 2R` and closes through a half circle
//! centred at `(0, R)`. Travel is counter-clockwise, so positive lateral
//! offsets `t` point towards the infield.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackGeometry {
    pub straight_length: f64,
    pub curve_radius: f64,
    pub n_lanes: usize,
    pub lane_width: f64,
}

/// A point of the global frame together with the local tangent heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Curvilinear coordinates of a point: arc length along the centerline and
/// signed lateral offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frenet {
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    Straight1,
    Arc1,
    Straight2,
    Arc2,
}

impl Default for TrackGeometry {
    fn default() -> Self {
        Self {
            straight_length: 100.0,
            curve_radius: 30.0,
            n_lanes: 2,
            lane_width: 3.0,
        }
    }
}

/// Builds and validates an oval track.
///
/// A zero straight length is accepted and degenerates to a circle.
pub fn build_oval_track(
    straight_length: f64,
    curve_radius: f64,
    n_lanes: usize,
    lane_width: f64,
) -> Result<TrackGeometry> {
    let track = TrackGeometry {
        straight_length,
        curve_radius,
        n_lanes,
        lane_width,
    };
    track.validate()?;
    Ok(track)
}

impl TrackGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.straight_length.is_finite() && self.straight_length >= 0.0) {
            return Err(Error::invalid("straight_length", "must be finite and >= 0"));
        }
        if !(self.curve_radius.is_finite() && self.curve_radius > 0.0) {
            return Err(Error::invalid("curve_radius", "must be finite and > 0"));
        }
        if !(self.lane_width.is_finite() && self.lane_width > 0.0) {
            return Err(Error::invalid("lane_width", "must be finite and > 0"));
        }
        if self.n_lanes < 2 {
            return Err(Error::invalid("n_lanes", "at least two lanes are required"));
        }
        if self.half_width() >= self.curve_radius {
            return Err(Error::invalid(
                "curve_radius",
                "must exceed half the road width",
            ));
        }
        Ok(())
    }

    pub fn centerline_length(&self) -> f64 {
        2.0 * self.straight_length + 2.0 * PI * self.curve_radius
    }

    pub fn half_width(&self) -> f64 {
        self.n_lanes as f64 * self.lane_width / 2.0
    }

    /// Lateral offset of the centre of `lane`; lane 0 is the outermost (rightmost).
    pub fn lane_center(&self, lane: usize) -> f64 {
        -self.half_width() + (lane as f64 + 0.5) * self.lane_width
    }

    /// Lane containing the lateral offset `t`, clamped to the road.
    pub fn lane_of(&self, t: f64) -> usize {
        let idx = ((t + self.half_width()) / self.lane_width).floor();
        idx.clamp(0.0, (self.n_lanes - 1) as f64) as usize
    }

    /// Inclusive range of lanes overlapped by the lateral interval `[lo, hi]`.
    pub fn lanes_overlapped(&self, lo: f64, hi: f64) -> (usize, usize) {
        (self.lane_of(lo), self.lane_of(hi))
    }

    pub fn wrap_s(&self, s: f64) -> f64 {
        let c = self.centerline_length();
        let w = s.rem_euclid(c);
        // rem_euclid can round up to exactly `c`
        if w >= c {
            0.0
        } else {
            w
        }
    }

    /// Forward distance from `from` to `to` along the loop, in `[0, C)`.
    pub fn forward_distance(&self, from: f64, to: f64) -> f64 {
        self.wrap_s(to - from)
    }

    fn segment(&self, s: f64) -> (Segment, f64) {
        let l = self.straight_length;
        let arc = PI * self.curve_radius;
        let s = self.wrap_s(s);
        if s < l {
            (Segment::Straight1, s)
        } else if s < l + arc {
            (Segment::Arc1, s - l)
        } else if s < 2.0 * l + arc {
            (Segment::Straight2, s - l - arc)
        } else {
            (Segment::Arc2, s - 2.0 * l - arc)
        }
    }

    /// Signed curvature of the centerline at `s` (positive = turning left).
    pub fn curvature(&self, s: f64) -> f64 {
        match self.segment(s).0 {
            Segment::Straight1 | Segment::Straight2 => 0.0,
            Segment::Arc1 | Segment::Arc2 => 1.0 / self.curve_radius,
        }
    }

    /// Tangent heading of the centerline at `s`, in `[0, 2π)`.
    pub fn tangent_heading(&self, s: f64) -> f64 {
        let r = self.curve_radius;
        match self.segment(s) {
            (Segment::Straight1, _) => 0.0,
            (Segment::Arc1, u) => u / r,
            (Segment::Straight2, _) => PI,
            (Segment::Arc2, u) => PI + u / r,
        }
    }

    pub fn curvilinear_to_global(&self, s: f64, t: f64) -> GlobalPose {
        let l = self.straight_length;
        let r = self.curve_radius;
        let (cx, cy) = match self.segment(s) {
            (Segment::Straight1, u) => (u, 0.0),
            (Segment::Arc1, u) => {
                let phi = u / r;
                (l + r * phi.sin(), r - r * phi.cos())
            }
            (Segment::Straight2, u) => (l - u, 2.0 * r),
            (Segment::Arc2, u) => {
                let phi = u / r;
                (-r * phi.sin(), r + r * phi.cos())
            }
        };
        let heading = self.tangent_heading(s);
        GlobalPose {
            x: cx - t * heading.sin(),
            y: cy + t * heading.cos(),
            heading,
        }
    }

    /// Projects a global point back onto the curvilinear frame.
    ///
    /// The projection is unique for lateral offsets below the curve radius;
    /// points at or beyond the curve centres are rejected.
    pub fn global_to_curvilinear(&self, x: f64, y: f64) -> Result<Frenet> {
        let f = self.project(x, y);
        if !(f.t < self.curve_radius) || !f.s.is_finite() {
            return Err(Error::OutOfDomain { x, y, t: f.t });
        }
        Ok(f)
    }

    /// Total projection used by the simulator; agrees with
    /// [`global_to_curvilinear`](Self::global_to_curvilinear) on its domain
    /// and stays finite everywhere else.
    pub(crate) fn project(&self, x: f64, y: f64) -> Frenet {
        let l = self.straight_length;
        let r = self.curve_radius;
        let arc = PI * r;
        let f = if x > l {
            let (dx, dy) = (x - l, y - r);
            let phi = dx.atan2(-dy).clamp(0.0, PI);
            Frenet {
                s: l + r * phi,
                t: r - dx.hypot(dy),
            }
        } else if x < 0.0 {
            let (dx, dy) = (x, y - r);
            let phi = (-dx).atan2(dy).clamp(0.0, PI);
            Frenet {
                s: 2.0 * l + arc + r * phi,
                t: r - dx.hypot(dy),
            }
        } else if y < r {
            Frenet { s: x, t: y }
        } else {
            Frenet {
                s: l + arc + (l - x),
                t: 2.0 * r - y,
            }
        };
        Frenet {
            s: self.wrap_s(f.s),
            t: f.t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn centerline_length_matches_closed_form() {
        let track = build_oval_track(100.0, 30.0, 2, 3.0).unwrap();
        assert!((track.centerline_length() - 388.495_559_215_387_6).abs() < 1e-9);
        assert!((track.centerline_length() - (200.0 + 2.0 * PI * 30.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_straights_give_a_circle() {
        let track = build_oval_track(0.0, 30.0, 2, 3.0).unwrap();
        assert_eq!(track.centerline_length(), 2.0 * PI * 30.0);
        let p = track.curvilinear_to_global(PI * 30.0 / 2.0, 0.0);
        assert!((p.x - 30.0).abs() < 1e-12 && (p.y - 30.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(build_oval_track(-1.0, 30.0, 2, 3.0).is_err());
        assert!(build_oval_track(100.0, 0.0, 2, 3.0).is_err());
        assert!(build_oval_track(100.0, 30.0, 1, 3.0).is_err());
        assert!(build_oval_track(100.0, 30.0, 2, -3.0).is_err());
        assert!(build_oval_track(100.0, 2.0, 2, 3.0).is_err());
    }

    #[test]
    fn datum_and_arc_midpoint() {
        let track = TrackGeometry::default();
        let p0 = track.curvilinear_to_global(0.0, 0.0);
        assert_eq!((p0.x, p0.y, p0.heading), (0.0, 0.0, 0.0));

        let mid = track.straight_length + PI * track.curve_radius / 2.0;
        let p = track.curvilinear_to_global(mid, 0.0);
        assert!((p.heading - PI / 2.0).abs() < 1e-12);
        assert!((p.x - (track.straight_length + track.curve_radius)).abs() < 1e-12);
        assert!((p.y - track.curve_radius).abs() < 1e-12);
    }

    #[test]
    fn positive_offset_is_to_the_left() {
        let track = TrackGeometry::default();
        let half = track.lane_width / 2.0;
        for &s in &[10.0, 150.0, 250.0, 350.0] {
            let c = track.curvilinear_to_global(s, 0.0);
            let p = track.curvilinear_to_global(s, half);
            let (lx, ly) = (-c.heading.sin(), c.heading.cos());
            assert!(((p.x - c.x) - half * lx).abs() < 1e-12);
            assert!(((p.y - c.y) - half * ly).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_heading_is_continuous() {
        let track = TrackGeometry::default();
        let n = 20_000;
        let c = track.centerline_length();
        let mut prev = track.tangent_heading(0.0);
        for i in 1..=n {
            let h = track.tangent_heading(c * i as f64 / n as f64);
            let mut d = h - prev;
            d = (d + PI).rem_euclid(2.0 * PI) - PI;
            assert!(d.abs() < 1e-3, "jump {d} at step {i}");
            prev = h;
        }
    }

    #[test]
    fn projection_round_trip_on_road_surface() {
        let track = TrackGeometry::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let half = track.half_width();
        for _ in 0..1000 {
            let s = rng.random_range(0.0..track.centerline_length());
            let t = rng.random_range(-half..half);
            let g = track.curvilinear_to_global(s, t);
            let f = track.global_to_curvilinear(g.x, g.y).unwrap();
            let back = track.curvilinear_to_global(f.s, f.t);
            let err = (back.x - g.x).hypot(back.y - g.y);
            assert!(err < 1e-9, "round trip error {err}");
            let ds = (f.s - s).abs().min(track.centerline_length() - (f.s - s).abs());
            assert!(ds < 1e-9 && (f.t - t).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_centres_are_out_of_domain() {
        let track = TrackGeometry::default();
        let r = track.curve_radius;
        assert!(track.global_to_curvilinear(track.straight_length, r).is_err());
        assert!(track.global_to_curvilinear(0.0, r).is_err());
        // far outside the oval is still a valid projection
        assert!(track.global_to_curvilinear(50.0, -40.0).is_ok());
    }

    #[test]
    fn lanes_are_indexed_from_the_right() {
        let track = TrackGeometry::default();
        assert_eq!(track.lane_center(0), -1.5);
        assert_eq!(track.lane_center(1), 1.5);
        assert_eq!(track.lane_of(-2.9), 0);
        assert_eq!(track.lane_of(0.1), 1);
        assert_eq!(track.lane_of(10.0), 1);
    }
}
