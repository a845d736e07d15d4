//! Oriented-rectangle primitives: ray casting and separating-axis overlap.

use super::scene::VehiclePose;

#[derive(Debug, Clone, Copy)]
struct Frame {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    half_l: f64,
    half_w: f64,
}

impl Frame {
    fn of(p: &VehiclePose) -> Self {
        Self {
            cx: p.x,
            cy: p.y,
            cos: p.heading.cos(),
            sin: p.heading.sin(),
            half_l: p.length / 2.0,
            half_w: p.width / 2.0,
        }
    }

    fn corners(&self) -> [(f64, f64); 4] {
        let (lx, ly) = (self.cos * self.half_l, self.sin * self.half_l);
        let (wx, wy) = (-self.sin * self.half_w, self.cos * self.half_w);
        [
            (self.cx + lx + wx, self.cy + ly + wy),
            (self.cx + lx - wx, self.cy + ly - wy),
            (self.cx - lx - wx, self.cy - ly - wy),
            (self.cx - lx + wx, self.cy - ly + wy),
        ]
    }
}

/// Distance along the unit ray `(ox, oy) + r (ux, uy)` to the first point of
/// the rectangle, `Some(0)` when the origin lies inside it.
pub fn ray_rect_distance(ox: f64, oy: f64, ux: f64, uy: f64, rect: &VehiclePose) -> Option<f64> {
    let f = Frame::of(rect);
    let (dx, dy) = (ox - f.cx, oy - f.cy);
    let o = [dx * f.cos + dy * f.sin, -dx * f.sin + dy * f.cos];
    let u = [ux * f.cos + uy * f.sin, -ux * f.sin + uy * f.cos];
    let half = [f.half_l, f.half_w];
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for k in 0..2 {
        if u[k].abs() < 1e-12 {
            if o[k].abs() > half[k] {
                return None;
            }
        } else {
            let a = (-half[k] - o[k]) / u[k];
            let b = (half[k] - o[k]) / u[k];
            t_min = t_min.max(a.min(b));
            t_max = t_max.min(a.max(b));
        }
    }
    if t_max < t_min.max(0.0) {
        None
    } else {
        Some(t_min.max(0.0))
    }
}

/// Strict overlap of two oriented rectangles (touching edges do not count).
pub fn rects_overlap(a: &VehiclePose, b: &VehiclePose) -> bool {
    let fa = Frame::of(a);
    let fb = Frame::of(b);
    let ca = fa.corners();
    let cb = fb.corners();
    let axes = [
        (fa.cos, fa.sin),
        (-fa.sin, fa.cos),
        (fb.cos, fb.sin),
        (-fb.sin, fb.cos),
    ];
    for (ax, ay) in axes {
        let project = |cs: &[(f64, f64); 4]| {
            cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
                let p = x * ax + y * ay;
                (lo.min(p), hi.max(p))
            })
        };
        let (alo, ahi) = project(&ca);
        let (blo, bhi) = project(&cb);
        if ahi <= blo || bhi <= alo {
            return false;
        }
    }
    true
}
