//! Test-only oracles, independent of the library's closed-form paths.
#![allow(dead_code)]

pub mod problems;

use std::f64::consts::{PI, TAU};

use intent_mpc::dubins::{DubinsWord, SegmentKind};
use intent_mpc::pose::{wrap_angle, Pose};

/// Unit normal pointing left of heading `h`.
fn left_normal(h: f64) -> (f64, f64) {
    (-h.sin(), h.cos())
}

fn turn_center(p: &Pose, sign: f64, r: f64) -> (f64, f64) {
    let (nx, ny) = left_normal(p.heading);
    (p.x + sign * r * nx, p.y + sign * r * ny)
}

/// Pose after turning `phi` radians on the start circle (integrated from the
/// circle center, not from the library's segment formulas).
fn after_arc(start: &Pose, sign: f64, r: f64, phi: f64) -> Pose {
    let (cx, cy) = turn_center(start, sign, r);
    let h = start.heading + sign * phi;
    let (nx, ny) = left_normal(h);
    Pose::new(cx - sign * r * nx, cy - sign * r * ny, h)
}

fn mod2pi(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Sign-change scan over `[0, 2π)` with wrap-around, refined by bisection.
fn roots(f: impl Fn(f64) -> f64, grid: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let step = TAU / grid as f64;
    let mut a = 0.0;
    let mut fa = f(a);
    for i in 1..=grid {
        let b = i as f64 * step;
        let fb = f(b);
        if fa == 0.0 {
            out.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    out
}

fn sign(kind: SegmentKind) -> f64 {
    match kind {
        SegmentKind::Left => 1.0,
        SegmentKind::Right => -1.0,
        SegmentKind::Straight => 0.0,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleCandidate {
    pub seg_lengths: [f64; 3],
}

impl OracleCandidate {
    pub fn total(&self) -> f64 {
        self.seg_lengths.iter().sum()
    }
}

/// Every path of `word` connecting the poses, found by root-finding the
/// tangency residual over the first arc angle.
pub fn oracle_candidates(
    start: Pose,
    goal: Pose,
    r: f64,
    word: DubinsWord,
) -> Vec<OracleCandidate> {
    const GRID: usize = 3600;
    let segs = word.segments();
    let s1 = sign(segs[0]);
    let s3 = sign(segs[2]);
    let (gcx, gcy) = turn_center(&goal, s3, r);
    let mut out = Vec::new();

    if segs[1] == SegmentKind::Straight {
        // The straight leaving the first arc must be tangent to the goal circle.
        let residual = |phi: f64| {
            let p1 = after_arc(&start, s1, r, phi);
            let (nx, ny) = left_normal(p1.heading);
            nx * (gcx - p1.x) + ny * (gcy - p1.y) - s3 * r
        };
        for phi in roots(residual, GRID) {
            let p1 = after_arc(&start, s1, r, phi);
            let len = p1.heading.cos() * (gcx - p1.x) + p1.heading.sin() * (gcy - p1.y);
            if len < -1e-9 {
                continue;
            }
            let q = mod2pi(s3 * (goal.heading - p1.heading));
            let q = if q > TAU - 1e-9 { 0.0 } else { q };
            out.push(OracleCandidate {
                seg_lengths: [r * phi, len.max(0.0), r * q],
            });
        }
    } else {
        // Middle circle must touch the goal circle.
        let middle_center = |phi: f64| {
            let p1 = after_arc(&start, s1, r, phi);
            (turn_center(&p1, -s1, r), p1)
        };
        let residual = |phi: f64| {
            let ((mx, my), _) = middle_center(phi);
            (mx - gcx).hypot(my - gcy) - 2.0 * r
        };
        for phi in roots(residual, GRID) {
            let ((mx, my), p1) = middle_center(phi);
            let (tx, ty) = (0.5 * (mx + gcx), 0.5 * (my + gcy));
            let a0 = (p1.y - my).atan2(p1.x - mx);
            let a1 = (ty - my).atan2(tx - mx);
            let psi = mod2pi(-s1 * (a1 - a0));
            let h2 = p1.heading - s1 * psi;
            let q = mod2pi(s1 * (goal.heading - h2));
            let q = if q > TAU - 1e-9 { 0.0 } else { q };
            out.push(OracleCandidate {
                seg_lengths: [r * phi, r * psi, r * q],
            });
        }
    }

    // Keep only candidates whose endpoint really is the goal.
    out.retain(|c| {
        let end = integrate(start, word, r, c.seg_lengths);
        end.distance_to(&goal) < 1e-5 && wrap_angle(end.heading - goal.heading).abs() < 1e-7
    });
    out
}

/// Endpoint by fine Euler-free arc integration (chord steps on each arc).
pub fn integrate(start: Pose, word: DubinsWord, r: f64, lengths: [f64; 3]) -> Pose {
    let mut p = start;
    for (kind, len) in word.segments().into_iter().zip(lengths) {
        let s = sign(kind);
        if s == 0.0 {
            p = Pose::new(
                p.x + len * p.heading.cos(),
                p.y + len * p.heading.sin(),
                p.heading,
            );
        } else {
            p = after_arc(&p, s, r, len / r);
        }
    }
    p
}

/// The standard candidate of a word: CSC has one; for CCC the one whose
/// middle arc exceeds a half turn.
pub fn oracle_word(start: Pose, goal: Pose, r: f64, word: DubinsWord) -> Option<OracleCandidate> {
    let cands = oracle_candidates(start, goal, r, word);
    let cands: Vec<_> = if word.is_ccc() {
        cands
            .into_iter()
            .filter(|c| c.seg_lengths[1] >= PI * r - 1e-6)
            .collect()
    } else {
        cands
    };
    cands
        .into_iter()
        .min_by(|a, b| a.total().partial_cmp(&b.total()).unwrap())
}

/// Minimum length over every candidate of every word.
pub fn oracle_shortest(start: Pose, goal: Pose, r: f64) -> f64 {
    DubinsWord::ALL
        .iter()
        .flat_map(|&w| oracle_candidates(start, goal, r, w))
        .map(|c| c.total())
        .fold(f64::INFINITY, f64::min)
}

pub fn random_pose(rng: &mut impl rand::Rng, extent: f64) -> Pose {
    Pose::new(
        rng.gen_range(0.0..extent),
        rng.gen_range(0.0..extent),
        rng.gen_range(-PI..PI),
    )
}
