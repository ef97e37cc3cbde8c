//! Scenario files: strict JSON mirroring [`ScenarioSpec`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ControlBounds;
use crate::mpc::{MpcConfig, MpcMode, MpcWeights, DEFAULT_SAFETY_MARGIN};
use crate::pose::Pose;
use crate::sim::{Disturbance, ScenarioSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Malformed JSON, unknown keys, wrong types.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    /// Well-formed but semantically invalid.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ScenarioError {
    fn invalid(path: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }

    /// Dotted JSON path of the offending value.
    pub fn json_path(&self) -> Option<&str> {
        match self {
            ScenarioError::Io { .. } => None,
            ScenarioError::Parse { path, .. } | ScenarioError::Invalid { path, .. } => Some(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub v: [f64; 2],
    pub u: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftFile {
    pub start: [f64; 3],
    pub target: [f64; 3],
    pub bounds: BoundsFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcFile {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    #[serde(rename = "Q")]
    pub q: [f64; 3],
    #[serde(rename = "Qf")]
    pub qf: [f64; 3],
    #[serde(rename = "R")]
    pub r: f64,
    pub rho: f64,
    pub mode: MpcMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety_margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    None,
    Uniform,
}

/// Angular-rate disturbance in degrees per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceFile {
    pub kind: DisturbanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo_deg_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi_deg_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub max_steps: usize,
    pub target_radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub ownship: AircraftFile,
    pub intruder: AircraftFile,
    pub mpc: MpcFile,
    pub disturbance: DisturbanceFile,
    pub sim: SimFile,
}

fn pose(a: [f64; 3]) -> Pose {
    Pose::new(a[0], a[1], a[2])
}

fn check_finite(path: &str, values: &[f64]) -> Result<(), ScenarioError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ScenarioError::invalid(path, "values must be finite"))
    }
}

fn bounds(path: &str, b: &BoundsFile) -> Result<ControlBounds, ScenarioError> {
    check_finite(&format!("{path}.v"), &b.v)?;
    check_finite(&format!("{path}.u"), &b.u)?;
    if b.v[0] <= 0.0 {
        return Err(ScenarioError::invalid(
            &format!("{path}.v"),
            format!("minimum speed must be positive, got {}", b.v[0]),
        ));
    }
    if b.v[0] > b.v[1] {
        return Err(ScenarioError::invalid(
            &format!("{path}.v"),
            "expected [min, max] with min <= max",
        ));
    }
    if b.u[0] > b.u[1] {
        return Err(ScenarioError::invalid(
            &format!("{path}.u"),
            "expected [min, max] with min <= max",
        ));
    }
    if b.u[0].abs().max(b.u[1].abs()) == 0.0 {
        return Err(ScenarioError::invalid(
            &format!("{path}.u"),
            "turn-rate bounds cannot both be zero",
        ));
    }
    Ok(ControlBounds {
        v_min: b.v[0],
        v_max: b.v[1],
        u_min: b.u[0],
        u_max: b.u[1],
    })
}

impl ScenarioFile {
    /// Validates every field and builds the simulation spec.
    pub fn to_spec(&self) -> Result<ScenarioSpec, ScenarioError> {
        for (path, a) in [
            ("ownship.start", self.ownship.start),
            ("ownship.target", self.ownship.target),
            ("intruder.start", self.intruder.start),
            ("intruder.target", self.intruder.target),
        ] {
            check_finite(path, &a)?;
        }
        let own_bounds = bounds("ownship.bounds", &self.ownship.bounds)?;
        let intruder_bounds = bounds("intruder.bounds", &self.intruder.bounds)?;

        let m = &self.mpc;
        if m.n == 0 {
            return Err(ScenarioError::invalid(
                "mpc.N",
                "horizon must be at least 1",
            ));
        }
        if m.n_r > m.n {
            return Err(ScenarioError::invalid(
                "mpc.N_r",
                format!("robust horizon {} exceeds N = {}", m.n_r, m.n),
            ));
        }
        check_finite("mpc.Q", &m.q)?;
        if m.q.iter().any(|&v| v < 0.0) {
            return Err(ScenarioError::invalid(
                "mpc.Q",
                "diagonal must be non-negative",
            ));
        }
        check_finite("mpc.Qf", &m.qf)?;
        if m.qf.iter().any(|&v| v <= 0.0) {
            return Err(ScenarioError::invalid(
                "mpc.Qf",
                "diagonal must be positive",
            ));
        }
        if !(m.r > 0.0 && m.r.is_finite()) {
            return Err(ScenarioError::invalid(
                "mpc.R",
                format!("must be positive, got {}", m.r),
            ));
        }
        if !(m.rho > 0.0 && m.rho.is_finite()) {
            return Err(ScenarioError::invalid(
                "mpc.rho",
                format!("must be positive, got {}", m.rho),
            ));
        }
        let dt = m.dt.unwrap_or(1.0);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ScenarioError::invalid(
                "mpc.dt",
                format!("must be positive, got {dt}"),
            ));
        }
        let safety_margin = m.safety_margin.unwrap_or(DEFAULT_SAFETY_MARGIN);
        if !(safety_margin >= 0.0 && safety_margin.is_finite()) {
            return Err(ScenarioError::invalid(
                "mpc.safety_margin",
                format!("must be non-negative, got {safety_margin}"),
            ));
        }

        let d = &self.disturbance;
        let disturbance = match d.kind {
            DisturbanceKind::None => {
                if d.lo_deg_s.is_some() || d.hi_deg_s.is_some() {
                    return Err(ScenarioError::invalid(
                        "disturbance",
                        "kind \"none\" takes no bounds",
                    ));
                }
                Disturbance::None
            }
            DisturbanceKind::Uniform => {
                let lo = d.lo_deg_s.ok_or_else(|| {
                    ScenarioError::invalid("disturbance.lo_deg_s", "required for kind \"uniform\"")
                })?;
                let hi = d.hi_deg_s.ok_or_else(|| {
                    ScenarioError::invalid("disturbance.hi_deg_s", "required for kind \"uniform\"")
                })?;
                check_finite("disturbance.lo_deg_s", &[lo])?;
                check_finite("disturbance.hi_deg_s", &[hi])?;
                if lo > hi {
                    return Err(ScenarioError::invalid(
                        "disturbance.hi_deg_s",
                        format!("must be >= lo_deg_s ({lo})"),
                    ));
                }
                Disturbance::Uniform {
                    lo: lo.to_radians(),
                    hi: hi.to_radians(),
                }
            }
        };

        let s = &self.sim;
        if s.max_steps == 0 {
            return Err(ScenarioError::invalid(
                "sim.max_steps",
                "must be at least 1",
            ));
        }
        if !(s.target_radius > 0.0 && s.target_radius.is_finite()) {
            return Err(ScenarioError::invalid(
                "sim.target_radius",
                format!("must be positive, got {}", s.target_radius),
            ));
        }

        let mpc = MpcConfig {
            horizon: m.n,
            robust_horizon: m.n_r,
            dt,
            rho: m.rho,
            safety_margin,
            weights: MpcWeights::from_diagonals(m.q, m.qf, m.r),
            own_bounds,
            intruder_bounds,
            mode: m.mode,
            target: pose(self.ownship.target),
            ..MpcConfig::with_target(pose(self.ownship.target))
        };
        let spec = ScenarioSpec {
            own_start: pose(self.ownship.start),
            intruder_start: pose(self.intruder.start),
            intruder_target: pose(self.intruder.target),
            target_radius: s.target_radius,
            mpc,
            disturbance,
            max_steps: s.max_steps,
            rng_seed: s.seed,
            record_timing: false,
        };
        spec.validate()
            .map_err(|e| ScenarioError::invalid("", e.to_string()))?;
        Ok(spec)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Parse {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    file.to_spec()
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
      "ownship": {"start": [0, 0, 0], "target": [1000, 0, 0], "bounds": {"v": [6, 9], "u": [-0.1, 0.1]}},
      "intruder": {"start": [500, -500, 1.5707963267948966], "target": [500, 700, 1.5707963267948966],
                   "bounds": {"v": [10, 10], "u": [-0.07, 0.07]}},
      "mpc": {"N": 30, "N_r": 3, "Q": [0.01, 0.01, 0], "Qf": [1, 1, 10], "R": 100, "rho": 150, "mode": "scenario-tree"},
      "disturbance": {"kind": "uniform", "lo_deg_s": -0.5, "hi_deg_s": 0.5},
      "sim": {"max_steps": 200, "target_radius": 60, "seed": 7}
    }"#;

    #[test]
    fn good_file_builds_spec() {
        let spec = parse_scenario(GOOD).unwrap();
        assert_eq!(spec.mpc.horizon, 30);
        assert_eq!(spec.mpc.dt, 1.0);
        assert_eq!(spec.mpc.safety_margin, DEFAULT_SAFETY_MARGIN);
        match spec.disturbance {
            Disturbance::Uniform { lo, hi } => {
                assert!((hi - 0.5f64.to_radians()).abs() < 1e-15);
                assert_eq!(lo, -hi);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_key_names_its_parent() {
        let text = GOOD.replace("\"rho\": 150", "\"rho\": 150, \"gamma\": 1");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("mpc"), "{err}");
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn semantic_errors_are_path_qualified() {
        let cases = [
            ("\"rho\": 150", "\"rho\": -1", "mpc.rho"),
            ("\"N_r\": 3", "\"N_r\": 31", "mpc.N_r"),
            (
                "\"target_radius\": 60",
                "\"target_radius\": 0",
                "sim.target_radius",
            ),
            (
                "\"hi_deg_s\": 0.5",
                "\"hi_deg_s\": -0.6",
                "disturbance.hi_deg_s",
            ),
            ("\"v\": [6, 9]", "\"v\": [9, 6]", "ownship.bounds.v"),
            ("\"Qf\": [1, 1, 10]", "\"Qf\": [1, 1, 0]", "mpc.Qf"),
        ];
        for (from, to, path) in cases {
            let err = parse_scenario(&GOOD.replace(from, to)).unwrap_err();
            assert_eq!(err.json_path(), Some(path), "{err}");
        }
    }

    #[test]
    fn type_errors_carry_the_path() {
        let err = parse_scenario(&GOOD.replace("\"seed\": 7", "\"seed\": \"x\"")).unwrap_err();
        assert_eq!(err.json_path(), Some("sim.seed"), "{err}");
        let err =
            parse_scenario(&GOOD.replace("\"mode\": \"scenario-tree\"", "\"mode\": \"fancy\""))
                .unwrap_err();
        assert_eq!(err.json_path(), Some("mpc.mode"), "{err}");
    }
}
