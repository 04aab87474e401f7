//! JSON inputs. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use soliton_lab::ma::MaProblem;
use soliton_lab::profile::{build_profile, ConeSpec, RadialGrid};
use soliton_lab::spectral::Forcing;

use crate::error::CliError;

/// Profile tolerance used when a problem file is turned into a background profile.
pub const BACKGROUND_TOL: f64 = 1e-12;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn default_spectrum() -> Vec<f64> {
    vec![0.0]
}

fn default_volume() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub n: usize,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_spectrum")]
    pub link_spectrum: Vec<f64>,
    #[serde(default = "default_volume")]
    pub link_volume: f64,
}

impl ConeConfig {
    pub fn spec(&self) -> Result<ConeSpec, CliError> {
        Ok(ConeSpec::new(self.n, self.a, self.link_spectrum.clone(), self.link_volume)?)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub tmin: f64,
    pub tmax: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub support: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub support: [f64; 2],
    /// One value per grid node.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForcingConfig {
    Bump(BumpConfig),
    Table(TableConfig),
}

fn default_steps() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_volume")]
    pub link_volume: f64,
    pub grid: GridConfig,
    #[serde(rename = "F")]
    pub forcing: ForcingConfig,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl ProblemConfig {
    pub fn problem(&self) -> Result<MaProblem, CliError> {
        let spec = ConeSpec::new(self.n, self.a, vec![0.0], self.link_volume)?;
        let grid = RadialGrid::new(self.grid.tmin, self.grid.tmax, self.grid.count)?;
        let profile = build_profile(&spec, &grid, BACKGROUND_TOL)?;
        let problem = match &self.forcing {
            ForcingConfig::Bump(b) => MaProblem::bump(profile, b.amplitude, b.support[0], b.support[1])?,
            ForcingConfig::Table(t) => MaProblem::new(profile, t.values.clone(), (t.support[0], t.support[1]))?,
        };
        Ok(problem)
    }

    /// The reference bump instance.
    pub fn reference() -> Self {
        ProblemConfig {
            n: 2,
            a: 0.0,
            link_volume: 1.0,
            grid: GridConfig { tmin: 0.5, tmax: 60.0, count: 2048 },
            forcing: ForcingConfig::Bump(BumpConfig { amplitude: 0.1, support: [5.0, 8.0] }),
            steps: 20,
            tol: 1e-10,
        }
    }
}

/// Forcing of a mode: `"power:p"` or `"power:p:scale"` for `scale · s^{−p}`, or
/// one sample per grid node.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModeForcingConfig {
    Formula(String),
    Samples(Vec<f64>),
}

impl ModeForcingConfig {
    pub fn forcing(&self) -> Result<Forcing, CliError> {
        match self {
            ModeForcingConfig::Samples(v) => Ok(Forcing::Samples(v.clone())),
            ModeForcingConfig::Formula(text) => {
                let parts: Vec<&str> = text.split(':').collect();
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad number {s:?} in forcing {text:?}")))
                };
                match parts.as_slice() {
                    ["power", p] => Ok(Forcing::Power { exponent: parse(p)?, scale: 1.0 }),
                    ["power", p, c] => Ok(Forcing::Power { exponent: parse(p)?, scale: parse(c)? }),
                    _ => Err(CliError::Config(format!(
                        "forcing {text:?} is not of the form power:p or power:p:scale"
                    ))),
                }
            }
        }
    }
}

fn default_mode_tmax() -> f64 {
    1000.0
}

fn default_mode_count() -> usize {
    4001
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub lambda: f64,
    pub beta: f64,
    #[serde(rename = "Q")]
    pub forcing: ModeForcingConfig,
    pub tol: Option<f64>,
    pub envelope: Option<f64>,
    #[serde(default = "default_mode_tmax")]
    pub tmax: f64,
    #[serde(default = "default_mode_count")]
    pub count: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"n": 2, "a": 0, "colour": "red"}"#;
        assert!(serde_json::from_str::<ConeConfig>(bad).is_err());
        let bad = r#"{"n": 2, "grid": {"tmin": 0.5, "tmax": 60, "count": 64},
                      "F": {"kind": "bump", "amplitude": 0.1, "support": [5, 8], "width": 1}}"#;
        assert!(serde_json::from_str::<ProblemConfig>(bad).is_err());
        let good = r#"{"n": 2, "grid": {"tmin": 0.5, "tmax": 60, "count": 64},
                       "F": {"kind": "bump", "amplitude": 0.1, "support": [5, 8]}}"#;
        let cfg: ProblemConfig = serde_json::from_str(good).unwrap();
        assert_eq!(cfg.steps, 20);
    }

    #[test]
    fn forcing_formulas() {
        let f = ModeForcingConfig::Formula("power:0.5".into()).forcing().unwrap();
        assert_eq!(f, Forcing::Power { exponent: 0.5, scale: 1.0 });
        let f = ModeForcingConfig::Formula("power:1:-2".into()).forcing().unwrap();
        assert_eq!(f, Forcing::Power { exponent: 1.0, scale: -2.0 });
        assert!(ModeForcingConfig::Formula("exp:1".into()).forcing().is_err());
    }
}
