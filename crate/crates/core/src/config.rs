//! Run configuration: JSON file, then command-line overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Component, Faces};
use crate::measure::{ProbeRequest, RemovalMode};
use crate::oracle::Plane;
use crate::pipeline::{Backend, Scenario, ScenarioKind};
use crate::schrodinger::{PRegister, RecoveryMode};

/// Environment variable naming the root under which run directories are
/// created when no explicit output directory is given.
pub const OUTPUT_ROOT_ENV: &str = "QMAXWELL_OUTPUT_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub component: Component,
    pub index: [usize; 3],
}

impl ProbePoint {
    pub fn request(self) -> ProbeRequest {
        ProbeRequest {
            component: self.component,
            index: self.index,
            reference: None,
        }
    }
}

impl fmt::Display for ProbePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [i, j, k] = self.index;
        write!(f, "{}@{i},{j},{k}", self.component)
    }
}

/// `Hx@8,8` or `Hx@8,8,4`.
impl FromStr for ProbePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("probe {s:?} is not COMPONENT@i,j[,k]"));
        let (c, idx) = s.split_once('@').ok_or_else(bad)?;
        let component = c.parse::<Component>().map_err(|_| bad())?;
        let parts = idx
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let index = match parts[..] {
            [i, j] => [i, j, 0],
            [i, j, k] => [i, j, k],
            _ => return Err(bad()),
        };
        Ok(ProbePoint { component, index })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    pub walls: Boundary,
    pub dt: f64,
    pub steps: usize,
    pub n_a: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub recovery: RecoveryMode,
    pub offset: f64,
    pub removal: RemovalMode,
    pub backend: Backend,
    /// Empty means the three in-plane components at the excitation point.
    pub probes: Vec<ProbePoint>,
    /// Record probes every this many steps.
    pub probe_every: usize,
    /// Empty means `[0, steps·dt]`.
    pub snapshot_times: Vec<f64>,
    pub output: Option<PathBuf>,
    pub shots: Option<u64>,
    pub seed: u64,
    pub export_circuit: bool,
    pub export_blocks: bool,
    pub dump_operator: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioKind::Empty2d,
            nx: None,
            ny: None,
            nz: None,
            walls: Boundary::Pmc,
            dt: 0.1,
            steps: 10,
            n_a: 1,
            p_min: -PI,
            p_max: PI,
            recovery: RecoveryMode::SingleSlice,
            offset: 1.0,
            removal: RemovalMode::Evolved,
            backend: Backend::Circuit,
            probes: Vec::new(),
            probe_every: 1,
            snapshot_times: Vec::new(),
            output: None,
            shots: None,
            seed: 0,
            export_circuit: false,
            export_blocks: false,
            dump_operator: false,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn size(&self) -> [usize; 3] {
        let d = self.scenario.default_size();
        [self.nx.unwrap_or(d[0]), self.ny.unwrap_or(d[1]), self.nz.unwrap_or(d[2])]
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.probe_every == 0 {
            return Err(Error::Config("probe_every must be at least 1".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be positive".into()));
        }
        if self.snapshot_times.iter().any(|&t| t < 0.0 || t > self.horizon() + 1e-9) {
            return Err(Error::Config(format!(
                "snapshot times must lie in [0, {}]",
                self.horizon()
            )));
        }
        self.register()?;
        self.build_scenario()?;
        Ok(())
    }

    pub fn register(&self) -> Result<PRegister> {
        PRegister::new(self.n_a, self.p_min, self.p_max).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_scenario(&self) -> Result<Scenario> {
        let s = Scenario::sized(self.scenario, self.size()).map_err(|e| match e {
            Error::Grid(m) | Error::Geometry(m) | Error::Placement(m) => Error::Config(m),
            e => e,
        })?;
        Ok(match self.walls {
            Boundary::Pmc => s,
            b => s.with_boundaries(Faces::uniform(b)),
        })
    }

    pub fn probe_points(&self, scenario: &Scenario) -> Vec<ProbePoint> {
        if !self.probes.is_empty() {
            return self.probes.clone();
        }
        let (_, at) = scenario.excitation();
        let comps: &[Component] = &[Component::Ez, Component::Hx, Component::Hy];
        comps.iter().map(|&component| ProbePoint { component, index: at }).collect()
    }

    pub fn snapshot_plane(&self) -> Plane {
        match self.scenario {
            ScenarioKind::Empty3d => Plane::Xy(self.size()[2] / 2),
            _ => Plane::Xy(0),
        }
    }

    pub fn snapshot_times_or_default(&self) -> Vec<f64> {
        if self.snapshot_times.is_empty() {
            let mut t = vec![0.0, self.horizon()];
            t.dedup();
            t
        } else {
            self.snapshot_times.clone()
        }
    }

    /// Explicit output directory, else a name derived from the config under
    /// the output root.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(o) = &self.output {
            return o.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        let [nx, ny, nz] = self.size();
        let grid = if self.scenario == ScenarioKind::Empty3d {
            format!("{nx}x{ny}x{nz}")
        } else {
            format!("{nx}x{ny}")
        };
        root.join(format!(
            "{}-{grid}-{}-dt{}-s{}",
            self.scenario, self.backend, self.dt, self.steps
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_syntax() {
        let p: ProbePoint = "Hx@8,8".parse().unwrap();
        assert_eq!(p.index, [8, 8, 0]);
        assert_eq!(p.to_string(), "Hx@8,8,0");
        assert!("Hq@1,1".parse::<ProbePoint>().is_err());
        assert!("Ez@1".parse::<ProbePoint>().is_err());
    }

    #[test]
    fn json_defaults_and_unknown_fields() {
        let c: RunConfig = serde_json::from_str(r#"{"scenario":"2d-scatterer","dt":0.05}"#).unwrap();
        assert_eq!(c.size(), [16, 16, 1]);
        assert_eq!(c.dt, 0.05);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn invalid_grid_is_a_config_error() {
        let c = RunConfig {
            nx: Some(12),
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
