use super::style::StyleParams;
use crate::simulator::ActionBounds;

/// Output of the car-following law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmAccel {
    pub accel: f64,
    /// Set when the bumper gap was non-positive and the emergency brake fired.
    pub emergency: bool,
}

/// Intelligent Driver Model acceleration.
///
/// `closing_speed` is `v - v_leader`; pass `f64::INFINITY` as `gap` when
/// there is no leader. The desired dynamic gap is
/// `s* = s0 + max(0, v T + v Δv / (2 sqrt(a b)))`.
pub fn idm_accel(p: &StyleParams, speed: f64, closing_speed: f64, gap: f64, bounds: &ActionBounds) -> IdmAccel {
    if gap <= 0.0 {
        return IdmAccel {
            accel: (-p.safe_decel).clamp(-bounds.max_accel, bounds.max_accel),
            emergency: true,
        };
    }
    let free = 1.0 - (speed.max(0.0) / p.desired_speed).powf(p.accel_exponent);
    let interaction = if gap.is_finite() {
        let dynamic = speed * p.time_headway
            + speed * closing_speed / (2.0 * (p.max_accel * p.comfortable_decel).sqrt());
        let s_star = p.min_gap + dynamic.max(0.0);
        (s_star / gap).powi(2)
    } else {
        0.0
    };
    IdmAccel {
        accel: (p.max_accel * (free - interaction)).clamp(-bounds.max_accel, bounds.max_accel),
        emergency: false,
    }
}
