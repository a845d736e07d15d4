//! Lane-aware leader and follower queries on the looped track.

use crate::simulator::{SceneState, TrackGeometry};

/// Neighbouring vehicle and the bumper-to-bumper gap to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub gap: f64,
}

/// Inclusive lane range covered by a vehicle's lateral extent.
pub fn occupied_lanes(track: &TrackGeometry, scene: &SceneState, i: usize) -> (usize, usize) {
    let v = &scene.vehicles[i];
    track.lanes_overlapped(v.t - v.width / 2.0, v.t + v.width / 2.0)
}

fn overlaps(range: (usize, usize), lo: usize, hi: usize) -> bool {
    range.0 <= hi && lo <= range.1
}

/// Nearest vehicle ahead of `i` occupying any lane in `[lo, hi]`.
pub fn leader(track: &TrackGeometry, scene: &SceneState, i: usize, lo: usize, hi: usize, skip: Option<usize>) -> Option<Neighbor> {
    nearest(track, scene, i, lo, hi, skip, true)
}

/// Nearest vehicle behind `i` occupying any lane in `[lo, hi]`.
pub fn follower(track: &TrackGeometry, scene: &SceneState, i: usize, lo: usize, hi: usize, skip: Option<usize>) -> Option<Neighbor> {
    nearest(track, scene, i, lo, hi, skip, false)
}

fn nearest(
    track: &TrackGeometry,
    scene: &SceneState,
    i: usize,
    lo: usize,
    hi: usize,
    skip: Option<usize>,
    ahead: bool,
) -> Option<Neighbor> {
    let me = &scene.vehicles[i];
    let mut best: Option<(f64, Neighbor)> = None;
    for (j, other) in scene.vehicles.iter().enumerate() {
        if j == i || Some(j) == skip || !overlaps(occupied_lanes(track, scene, j), lo, hi) {
            continue;
        }
        let d = if ahead {
            track.forward_distance(me.s, other.s)
        } else {
            track.forward_distance(other.s, me.s)
        };
        let gap = d - (me.length + other.length) / 2.0;
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, Neighbor { index: j, gap }));
        }
    }
    best.map(|(_, n)| n)
}

/// Bumper gap from `back` to `front` measured forward along the loop.
pub fn gap_between(track: &TrackGeometry, scene: &SceneState, back: usize, front: usize) -> f64 {
    let b = &scene.vehicles[back];
    let f = &scene.vehicles[front];
    track.forward_distance(b.s, f.s) - (b.length + f.length) / 2.0
}
