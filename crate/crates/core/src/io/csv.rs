//! Trace CSV: one row per recorded stage, floats at 9 significant digits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dynamics::ControlInput;
use crate::nlp::SolverStatus;
use crate::pose::Pose;
use crate::sim::{SimTrace, StepRecord};

pub const HEADER: &str =
    "t,own_x,own_y,own_heading,intr_x,intr_y,intr_heading,v,u,separation,solver_status,solve_ms";

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Formats like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn final_status(trace: &SimTrace, aborted: bool) -> &'static str {
    if aborted {
        "aborted"
    } else if trace.arrived {
        "arrived"
    } else {
        "max_steps"
    }
}

/// Renders a trace. The last row carries the final poses, empty inputs and
/// the way the run ended (`arrived`, `max_steps` or `aborted`) as its status.
pub fn write_trace_csv(trace: &SimTrace, aborted: bool) -> String {
    let mut out = String::with_capacity(120 * (trace.records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    let n = trace.records.len();
    for (i, r) in trace.records.iter().enumerate() {
        let (v, u) = match r.input {
            Some(c) => (fmt_g9(c.v), fmt_g9(c.u)),
            None => (String::new(), String::new()),
        };
        let status = match r.solver_status {
            Some(s) => s.as_str(),
            None if i + 1 == n => final_status(trace, aborted),
            None => "",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_g9(r.t as f64 * trace.dt),
            fmt_g9(r.own.x),
            fmt_g9(r.own.y),
            fmt_g9(r.own.heading),
            fmt_g9(r.intruder.x),
            fmt_g9(r.intruder.y),
            fmt_g9(r.intruder.heading),
            v,
            u,
            fmt_g9(r.separation),
            status,
            fmt_g9(r.solve_ms),
        );
    }
    out
}

fn parse_status(s: &str) -> Option<SolverStatus> {
    match s {
        "converged" => Some(SolverStatus::Converged),
        "max_iters" => Some(SolverStatus::MaxIters),
        "infeasible_stationary" => Some(SolverStatus::InfeasibleStationary),
        _ => None,
    }
}

/// Parses a trace written by [`write_trace_csv`].
pub fn parse_trace_csv(text: &str, dt: f64, rho: f64) -> Result<SimTrace, CsvError> {
    let bad = |line: usize, message: String| CsvError::Malformed { line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(bad(1, "missing or unexpected header".into())),
    }
    let mut records = Vec::new();
    let mut arrived = false;
    for (idx, line) in lines {
        let no = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(bad(no, format!("expected 12 fields, got {}", f.len())));
        }
        let num = |i: usize| -> Result<f64, CsvError> {
            f[i].parse::<f64>()
                .map_err(|e| bad(no, format!("field {i} ({:?}): {e}", f[i])))
        };
        let input = if f[7].is_empty() && f[8].is_empty() {
            None
        } else {
            Some(ControlInput::new(num(7)?, num(8)?))
        };
        let solver_status = match f[10] {
            "" | "max_steps" | "aborted" => None,
            "arrived" => {
                arrived = true;
                None
            }
            s => Some(parse_status(s).ok_or_else(|| bad(no, format!("unknown status {s:?}")))?),
        };
        records.push(StepRecord {
            t: (num(0)? / dt).round() as usize,
            own: Pose::new(num(1)?, num(2)?, num(3)?),
            intruder: Pose::new(num(4)?, num(5)?, num(6)?),
            input,
            separation: num(9)?,
            solver_status,
            solver_iterations: None,
            solve_ms: num(11)?,
        });
    }
    if records.is_empty() {
        return Err(bad(2, "trace has no rows".into()));
    }
    Ok(SimTrace::from_records(dt, rho, records, arrived))
}
