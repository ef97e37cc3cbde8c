//! Shortest curvature-bounded paths between oriented poses.
//!
//! A Dubins path is three segments, each either an arc at the minimum turn
//! radius (`L` counter-clockwise, `R` clockwise) or a straight line (`S`).
//! Six words cover every shortest path: LSL, RSR, LSR, RSL, RLR, LRL.
//!
//! Besides the geometry, this module turns a path into the per-step
//! angular-rate schedule an aircraft flying it at constant speed would
//! command. That schedule is the intent prediction the MPC uses for the
//! intruder.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{mod_two_pi, Pose};

/// Normalized segment parameters closer than this to 2π are snapped to 0.
const FULL_TURN_SNAP: f64 = 1e-10;
/// Below this normalized straight length the two turning circles of a CSC
/// word coincide and the tangent direction is undefined.
const COINCIDENT_CIRCLES: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DubinsError {
    #[error("turn radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("pose is not finite: {0:?}")]
    NonFinitePose(Pose),
    #[error("arclength {arclength} outside [0, {total}]")]
    ArclengthOutOfRange { arclength: f64, total: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("no Dubins word is feasible between {start:?} and {goal:?}")]
    NoPath { start: Pose, goal: Pose },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Left,
    Straight,
    Right,
}

impl SegmentKind {
    /// Signed curvature multiplier: +1 for left, -1 for right, 0 for straight.
    pub fn turn_sign(self) -> f64 {
        match self {
            SegmentKind::Left => 1.0,
            SegmentKind::Straight => 0.0,
            SegmentKind::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    LSL,
    RSR,
    LSR,
    RSL,
    RLR,
    LRL,
}

impl DubinsWord {
    /// All words, in tie-breaking order.
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::LSL,
        DubinsWord::RSR,
        DubinsWord::LSR,
        DubinsWord::RSL,
        DubinsWord::RLR,
        DubinsWord::LRL,
    ];

    pub fn segments(self) -> [SegmentKind; 3] {
        use SegmentKind::*;
        match self {
            DubinsWord::LSL => [Left, Straight, Left],
            DubinsWord::RSR => [Right, Straight, Right],
            DubinsWord::LSR => [Left, Straight, Right],
            DubinsWord::RSL => [Right, Straight, Left],
            DubinsWord::RLR => [Right, Left, Right],
            DubinsWord::LRL => [Left, Right, Left],
        }
    }

    pub fn is_ccc(self) -> bool {
        matches!(self, DubinsWord::RLR | DubinsWord::LRL)
    }

    /// The word obtained by reflecting the geometry across a line.
    pub fn mirrored(self) -> DubinsWord {
        match self {
            DubinsWord::LSL => DubinsWord::RSR,
            DubinsWord::RSR => DubinsWord::LSL,
            DubinsWord::LSR => DubinsWord::RSL,
            DubinsWord::RSL => DubinsWord::LSR,
            DubinsWord::RLR => DubinsWord::LRL,
            DubinsWord::LRL => DubinsWord::RLR,
        }
    }
}

impl fmt::Display for DubinsWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DubinsWord::LSL => "LSL",
            DubinsWord::RSR => "RSR",
            DubinsWord::LSR => "LSR",
            DubinsWord::RSL => "RSL",
            DubinsWord::RLR => "RLR",
            DubinsWord::LRL => "LRL",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    word: DubinsWord,
    start: Pose,
    goal: Pose,
    turn_radius: f64,
    seg_lengths: [f64; 3],
    total_length: f64,
}

impl DubinsPath {
    pub fn word(&self) -> DubinsWord {
        self.word
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn goal(&self) -> Pose {
        self.goal
    }

    pub fn turn_radius(&self) -> f64 {
        self.turn_radius
    }

    /// Segment lengths in meters.
    pub fn seg_lengths(&self) -> [f64; 3] {
        self.seg_lengths
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Signed curvature of segment `i`.
    pub fn curvature(&self, i: usize) -> f64 {
        self.word.segments()[i].turn_sign() / self.turn_radius
    }

    /// Pose at `arclength` meters along the path.
    pub fn sample_pose(&self, arclength: f64) -> Result<Pose, DubinsError> {
        if !(0.0..=self.total_length + 1e-9).contains(&arclength) {
            return Err(DubinsError::ArclengthOutOfRange {
                arclength,
                total: self.total_length,
            });
        }
        Ok(self.pose_at_clamped(arclength))
    }

    /// Unwrapped heading at `arclength`, clamped to the path.
    pub fn heading_at(&self, arclength: f64) -> f64 {
        let mut remaining = arclength.clamp(0.0, self.total_length);
        let mut heading = self.start.heading;
        for (kind, &len) in self.word.segments().iter().zip(&self.seg_lengths) {
            let s = remaining.min(len);
            heading += kind.turn_sign() * s / self.turn_radius;
            remaining -= s;
            if remaining <= 0.0 {
                break;
            }
        }
        heading
    }

    fn pose_at_clamped(&self, arclength: f64) -> Pose {
        let mut remaining = arclength.clamp(0.0, self.total_length);
        let mut pose = self.start;
        for (&kind, &len) in self.word.segments().iter().zip(&self.seg_lengths) {
            let s = remaining.min(len);
            pose = advance(pose, kind, s, self.turn_radius);
            remaining -= s;
            if remaining <= 0.0 {
                break;
            }
        }
        pose
    }

    /// Dense polyline of the path for plotting.
    pub fn polyline(&self, spacing: f64) -> Vec<Pose> {
        let n = ((self.total_length / spacing.max(1e-6)).ceil() as usize).max(1);
        (0..=n)
            .map(|i| self.pose_at_clamped(self.total_length * i as f64 / n as f64))
            .collect()
    }
}

/// Closed-form motion along one segment of length `s` meters.
fn advance(pose: Pose, kind: SegmentKind, s: f64, radius: f64) -> Pose {
    let h = pose.heading;
    match kind {
        SegmentKind::Straight => Pose::new(pose.x + s * h.cos(), pose.y + s * h.sin(), h),
        SegmentKind::Left => {
            let phi = s / radius;
            Pose::new(
                pose.x + radius * ((h + phi).sin() - h.sin()),
                pose.y + radius * (h.cos() - (h + phi).cos()),
                h + phi,
            )
        }
        SegmentKind::Right => {
            let phi = s / radius;
            Pose::new(
                pose.x + radius * (h.sin() - (h - phi).sin()),
                pose.y + radius * ((h - phi).cos() - h.cos()),
                h - phi,
            )
        }
    }
}

fn snap(a: f64) -> f64 {
    let w = mod_two_pi(a);
    if w > TAU - FULL_TURN_SNAP {
        0.0
    } else {
        w
    }
}

fn check_inputs(start: &Pose, goal: &Pose, turn_radius: f64) -> Result<(), DubinsError> {
    if !(turn_radius > 0.0 && turn_radius.is_finite()) {
        return Err(DubinsError::InvalidRadius(turn_radius));
    }
    for p in [start, goal] {
        if !p.is_finite() {
            return Err(DubinsError::NonFinitePose(*p));
        }
    }
    Ok(())
}

/// Normalized (t, p, q) for one word, in units of the turn radius.
///
/// `d` is the center distance over the radius; `alpha` and `beta` are the
/// start and goal headings relative to the start→goal direction.
fn word_params(word: DubinsWord, d: f64, alpha: f64, beta: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let cab = (alpha - beta).cos();
    match word {
        DubinsWord::LSL => {
            let p_sq = (2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)).max(0.0);
            let p = p_sq.sqrt();
            if p < COINCIDENT_CIRCLES {
                return Some([snap(beta - alpha), 0.0, 0.0]);
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([snap(tmp - alpha), p, snap(beta - tmp)])
        }
        DubinsWord::RSR => {
            let p_sq = (2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)).max(0.0);
            let p = p_sq.sqrt();
            if p < COINCIDENT_CIRCLES {
                return Some([snap(alpha - beta), 0.0, 0.0]);
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([snap(alpha - tmp), p, snap(tmp - beta)])
        }
        DubinsWord::LSR => {
            let p_sq = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([snap(tmp - alpha), p, snap(tmp - beta)])
        }
        DubinsWord::RSL => {
            let p_sq = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([snap(alpha - tmp), p, snap(beta - tmp)])
        }
        DubinsWord::RLR => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = snap(TAU - c.acos());
            let t = snap(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, snap(alpha - beta - t + p)])
        }
        DubinsWord::LRL => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = snap(TAU - c.acos());
            let t = snap(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, snap(beta - alpha - t + p)])
        }
    }
}

/// The path of the given word, or `None` when the word cannot connect the poses.
pub fn solve_word(
    start: Pose,
    goal: Pose,
    turn_radius: f64,
    word: DubinsWord,
) -> Result<Option<DubinsPath>, DubinsError> {
    check_inputs(&start, &goal, turn_radius)?;
    let dx = goal.x - start.x;
    let dy = goal.y - start.y;
    let d = dx.hypot(dy) / turn_radius;
    let theta = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let alpha = mod_two_pi(start.heading - theta);
    let beta = mod_two_pi(goal.heading - theta);

    Ok(word_params(word, d, alpha, beta).map(|tpq| {
        let seg_lengths = tpq.map(|v| v * turn_radius);
        DubinsPath {
            word,
            start,
            goal,
            turn_radius,
            seg_lengths,
            total_length: seg_lengths.iter().sum(),
        }
    }))
}

/// Shortest path over all six words; equal lengths resolve in [`DubinsWord::ALL`] order.
pub fn shortest_path(start: Pose, goal: Pose, turn_radius: f64) -> Result<DubinsPath, DubinsError> {
    let mut best: Option<DubinsPath> = None;
    for word in DubinsWord::ALL {
        if let Some(path) = solve_word(start, goal, turn_radius, word)? {
            if best
                .as_ref()
                .is_none_or(|b| path.total_length < b.total_length)
            {
                best = Some(path);
            }
        }
    }
    best.ok_or(DubinsError::NoPath { start, goal })
}

/// Closed-form pose on `path` at `arclength`.
pub fn sample_pose(path: &DubinsPath, arclength: f64) -> Result<Pose, DubinsError> {
    path.sample_pose(arclength)
}

/// Constant-speed angular-rate schedule, one rate per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub speed: f64,
    pub dt: f64,
    pub angular_rates: Vec<f64>,
    pub horizon_steps: usize,
}

impl ControlSchedule {
    /// Schedule that never turns.
    pub fn straight(speed: f64, dt: f64) -> Self {
        Self {
            speed,
            dt,
            angular_rates: Vec::new(),
            horizon_steps: 0,
        }
    }

    /// Rate at step `k`; zero past the end of the path.
    pub fn rate_at(&self, k: usize) -> f64 {
        self.angular_rates.get(k).copied().unwrap_or(0.0)
    }
}

/// Discretizes `path` into time-averaged heading rates over steps of `dt`.
///
/// Step `k` covers arclength `[k, k+1]·speed·dt`; its rate is the heading
/// change across that interval divided by `dt`, so integrated headings are
/// exact at step boundaries even when a segment switch falls mid-step.
pub fn control_schedule(
    path: &DubinsPath,
    speed: f64,
    dt: f64,
) -> Result<ControlSchedule, DubinsError> {
    for (name, value) in [("speed", speed), ("dt", dt)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(DubinsError::InvalidParameter { name, value });
        }
    }
    let step_len = speed * dt;
    let steps = (path.total_length / step_len - 1e-9).ceil().max(0.0) as usize;
    let angular_rates = (0..steps)
        .map(|k| {
            let s0 = k as f64 * step_len;
            let s1 = ((k + 1) as f64 * step_len).min(path.total_length);
            (path.heading_at(s1) - path.heading_at(s0)) / dt
        })
        .collect();
    Ok(ControlSchedule {
        speed,
        dt,
        angular_rates,
        horizon_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::wrap_angle;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn collinear_is_straight() {
        let p = solve_word(
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(200.0, 0.0, 0.0),
            100.0,
            DubinsWord::LSL,
        )
        .unwrap()
        .unwrap();
        assert_eq!(p.seg_lengths(), [0.0, 200.0, 0.0]);
        assert_eq!(p.total_length(), 200.0);
    }

    #[test]
    fn semicircle_left() {
        let p = solve_word(
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(0.0, 200.0, PI),
            100.0,
            DubinsWord::LSL,
        )
        .unwrap()
        .unwrap();
        let [a, b, c] = p.seg_lengths();
        assert!(close(a, 100.0 * PI, 1e-9), "{a}");
        assert!(close(b, 0.0, 1e-6));
        assert!(close(c, 0.0, 1e-9));
        let s = shortest_path(Pose::new(0.0, 0.0, 0.0), Pose::new(0.0, 200.0, PI), 100.0).unwrap();
        assert_eq!(s.word(), DubinsWord::LSL);
        assert!(close(s.total_length(), 100.0 * PI, 1e-9));
    }

    #[test]
    fn identity_has_zero_length() {
        let o = Pose::new(0.0, 0.0, 0.0);
        let p = shortest_path(o, o, 100.0).unwrap();
        assert_eq!(p.total_length(), 0.0);
        assert_eq!(p.word(), DubinsWord::LSL);
    }

    #[test]
    fn straight_sample_midpoint() {
        let p = shortest_path(Pose::new(0.0, 0.0, 0.0), Pose::new(200.0, 0.0, 0.0), 100.0).unwrap();
        assert_eq!(p.word(), DubinsWord::LSL);
        assert_eq!(p.sample_pose(50.0).unwrap(), Pose::new(50.0, 0.0, 0.0));
        assert_eq!(p.sample_pose(0.0).unwrap(), p.start());
    }

    #[test]
    fn sample_out_of_range() {
        let p = shortest_path(Pose::new(0.0, 0.0, 0.0), Pose::new(200.0, 0.0, 0.0), 100.0).unwrap();
        assert!(matches!(
            p.sample_pose(-1.0),
            Err(DubinsError::ArclengthOutOfRange { .. })
        ));
        assert!(p.sample_pose(200.5).is_err());
        assert!(p.sample_pose(200.0 + 1e-10).is_ok());
    }

    #[test]
    fn bad_radius_rejected() {
        let o = Pose::new(0.0, 0.0, 0.0);
        assert_eq!(
            shortest_path(o, o, 0.0),
            Err(DubinsError::InvalidRadius(0.0))
        );
        assert!(shortest_path(o, Pose::new(f64::NAN, 0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn endpoint_reproduced_for_every_word() {
        let start = Pose::new(12.0, -40.0, 0.3);
        let goal = Pose::new(-150.0, 220.0, 2.4);
        for word in DubinsWord::ALL {
            if let Some(p) = solve_word(start, goal, 142.857, word).unwrap() {
                let end = p.sample_pose(p.total_length()).unwrap();
                assert!(end.distance_to(&goal) < 1e-6, "{word}: {end:?}");
                assert!(wrap_angle(end.heading - goal.heading).abs() < 1e-8);
                let sum: f64 = p.seg_lengths().iter().sum();
                assert!((sum - p.total_length()).abs() <= 1e-9 * p.total_length().max(1.0));
            }
        }
    }

    #[test]
    fn curvature_signs() {
        let p = solve_word(
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(50.0, 30.0, 1.0),
            142.857,
            DubinsWord::RLR,
        )
        .unwrap()
        .unwrap();
        assert_eq!(p.curvature(0), -1.0 / 142.857);
        assert_eq!(p.curvature(1), 1.0 / 142.857);
        let s = solve_word(
            Pose::new(0.0, 0.0, 0.0),
            Pose::new(500.0, 30.0, 1.0),
            142.857,
            DubinsWord::LSR,
        )
        .unwrap()
        .unwrap();
        assert_eq!(s.curvature(1), 0.0);
    }

    #[test]
    fn semicircle_schedule_constant_rate() {
        let p = shortest_path(Pose::new(0.0, 0.0, 0.0), Pose::new(0.0, 200.0, PI), 100.0).unwrap();
        let sched = control_schedule(&p, 10.0, 1.0).unwrap();
        assert_eq!(sched.horizon_steps, 32);
        for &r in &sched.angular_rates[..31] {
            assert!(close(r, 0.1, 1e-12), "{r}");
        }
        assert!(sched.angular_rates[31] > 0.0 && sched.angular_rates[31] < 0.1);
        assert_eq!(sched.rate_at(40), 0.0);
    }

    #[test]
    fn straight_schedule() {
        let p = shortest_path(Pose::new(0.0, 0.0, 0.0), Pose::new(200.0, 0.0, 0.0), 100.0).unwrap();
        let sched = control_schedule(&p, 10.0, 1.0).unwrap();
        assert_eq!(sched.horizon_steps, 20);
        assert!(sched.angular_rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn schedule_rejects_bad_speed() {
        let p = shortest_path(Pose::new(0.0, 0.0, 0.0), Pose::new(200.0, 0.0, 0.0), 100.0).unwrap();
        assert!(control_schedule(&p, 0.0, 1.0).is_err());
        assert!(control_schedule(&p, 1.0, -1.0).is_err());
    }
}
