//! Trajectory, separation and control figures.

use crate::dynamics::ControlBounds;
use crate::pose::Pose;
use crate::sim::SimTrace;

use super::svg::{render, Mark, Panel};

const OWN: &str = "#1f4fd1";
const INTR: &str = "#d62728";
const TARGET: &str = "#2ca02c";

fn xy(poses: impl Iterator<Item = Pose>) -> Vec<(f64, f64)> {
    poses.map(|p| (p.x, p.y)).collect()
}

fn times(trace: &SimTrace) -> impl Iterator<Item = f64> + '_ {
    trace.records.iter().map(move |r| r.t as f64 * trace.dt)
}

fn closest(trace: &SimTrace) -> Option<usize> {
    trace
        .records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.separation.total_cmp(&b.1.separation))
        .map(|(i, _)| i)
}

fn target_disc(target: Pose, radius: f64) -> Mark {
    Mark::Circle {
        center: (target.x, target.y),
        radius,
        stroke: TARGET,
        fill: TARGET,
        fill_opacity: 0.3,
        dashed: false,
    }
}

/// Plan view of both aircraft with the target disc and the separation circle at closest approach.
pub fn trajectory_svg(trace: &SimTrace, target: Pose, target_radius: f64) -> String {
    let mut p = Panel::new("Trajectories", "x [m]", "y [m]");
    p.equal_aspect = true;
    p.marks.push(target_disc(target, target_radius));
    p.marks
        .push(Mark::line(xy(trace.own_poses().into_iter()), OWN, 2.0));
    p.marks.push(Mark::line(
        xy(trace.intruder_poses().into_iter()),
        INTR,
        2.0,
    ));
    if let Some(i) = closest(trace) {
        let r = &trace.records[i];
        p.marks.push(Mark::Circle {
            center: (r.intruder.x, r.intruder.y),
            radius: trace.rho,
            stroke: INTR,
            fill: "none",
            fill_opacity: 0.0,
            dashed: true,
        });
        p.marks.push(Mark::Dot {
            at: (r.own.x, r.own.y),
            color: OWN,
        });
        p.marks.push(Mark::Dot {
            at: (r.intruder.x, r.intruder.y),
            color: INTR,
        });
    }
    p.legend = vec![
        (OWN, "ownship".into()),
        (INTR, "intruder".into()),
        (TARGET, "target".into()),
    ];
    render(&[p], 720.0, 720.0)
}

/// Separation over time with the minimum distance as a dashed line.
pub fn distance_svg(trace: &SimTrace) -> String {
    let mut p = Panel::new("Separation", "t [s]", "distance [m]");
    let pts = times(trace)
        .zip(trace.records.iter().map(|r| r.separation))
        .collect();
    p.marks.push(Mark::HLine {
        y: trace.rho,
        color: "black",
        dashed: true,
    });
    p.marks.push(Mark::line(pts, OWN, 2.0));
    p.y_include = vec![0.0, trace.rho];
    p.legend = vec![
        (OWN, "separation".into()),
        ("black", format!("rho = {}", trace.rho)),
    ];
    render(&[p], 800.0, 420.0)
}

/// Applied speed and turn rate with their bounds.
pub fn controls_svg(trace: &SimTrace, bounds: &ControlBounds) -> String {
    let applied: Vec<(f64, f64, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.input.map(|c| (r.t as f64 * trace.dt, c.v, c.u)))
        .collect();
    let bound_lines = |lo: f64, hi: f64| {
        [lo, hi].map(|y| Mark::HLine {
            y,
            color: "#888",
            dashed: true,
        })
    };

    let mut v = Panel::new("Speed", "t [s]", "v [m/s]");
    v.marks.extend(bound_lines(bounds.v_min, bounds.v_max));
    v.marks.push(Mark::line(
        applied.iter().map(|a| (a.0, a.1)).collect(),
        OWN,
        1.5,
    ));
    v.y_include = vec![bounds.v_min, bounds.v_max];

    let mut u = Panel::new("Turn rate", "t [s]", "u [rad/s]");
    u.marks.extend(bound_lines(bounds.u_min, bounds.u_max));
    u.marks.push(Mark::line(
        applied.iter().map(|a| (a.0, a.2)).collect(),
        OWN,
        1.5,
    ));
    u.y_include = vec![bounds.u_min, bounds.u_max];

    render(&[v, u], 800.0, 340.0)
}

fn thin(points: Vec<(f64, f64)>, color: &'static str) -> Mark {
    Mark::Line {
        points,
        color,
        width: 0.8,
        dashed: false,
        opacity: 0.6,
    }
}

/// Plan view of every Monte-Carlo realization over the disturbance-free run.
pub fn overlay_trajectory_svg(
    runs: &[&SimTrace],
    nominal: Option<&SimTrace>,
    target: Pose,
    target_radius: f64,
) -> String {
    let mut p = Panel::new("Monte-Carlo trajectories", "x [m]", "y [m]");
    p.equal_aspect = true;
    p.marks.push(target_disc(target, target_radius));
    for t in runs {
        p.marks.push(thin(xy(t.intruder_poses().into_iter()), INTR));
    }
    for t in runs {
        p.marks.push(thin(xy(t.own_poses().into_iter()), OWN));
    }
    if let Some(n) = nominal {
        p.marks
            .push(Mark::line(xy(n.own_poses().into_iter()), "black", 1.5));
        p.marks
            .push(Mark::line(xy(n.intruder_poses().into_iter()), "black", 1.5));
    }
    p.legend = vec![
        (OWN, "ownship runs".into()),
        (INTR, "intruder runs".into()),
        ("black", "nominal".into()),
    ];
    render(&[p], 720.0, 720.0)
}

/// Separation of every Monte-Carlo run over time.
pub fn overlay_distance_svg(runs: &[&SimTrace], nominal: Option<&SimTrace>, rho: f64) -> String {
    let mut p = Panel::new("Monte-Carlo separation", "t [s]", "distance [m]");
    p.marks.push(Mark::HLine {
        y: rho,
        color: "black",
        dashed: true,
    });
    let sep = |t: &SimTrace| {
        times(t)
            .zip(t.records.iter().map(|r| r.separation))
            .collect()
    };
    for t in runs {
        p.marks.push(thin(sep(t), OWN));
    }
    if let Some(n) = nominal {
        p.marks.push(Mark::line(sep(n), "black", 1.5));
    }
    p.y_include = vec![0.0, rho];
    p.legend = vec![(OWN, "runs".into()), ("black", "nominal".into())];
    render(&[p], 800.0, 420.0)
}
