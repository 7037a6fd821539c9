//! Run configuration: a single JSON document with strict key checking.

use serde::{Deserialize, Serialize};

use nbarrier::validate::Tolerances;
use nbarrier::{BarrierSystem, DispersionModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub model: ModelConfig,
    pub scan: ScanConfig,
    pub tolerances: ToleranceConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_barriers: usize,
    pub width: f64,
    pub period: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub barrier_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "nonrelativistic-particle")]
    NonrelativisticParticle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub unitarity: f64,
    pub continuity: f64,
    pub opaque_rel: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output file path; "-" writes to stdout.
    pub path: String,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum OutputFormat {
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "json")]
    Json,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig {
                n_barriers: 2,
                width: 4.0,
                period: 10.0,
                height: 10.0,
            },
            model: ModelConfig {
                kind: ModelKind::NonrelativisticParticle,
                barrier_height: 10.0,
            },
            scan: ScanConfig {
                omega_min: 0.5,
                omega_max: 9.5,
                steps: 1000,
            },
            tolerances: ToleranceConfig {
                unitarity: 1e-10,
                continuity: 1e-9,
                opaque_rel: 1e-3,
            },
            output: OutputConfig {
                path: "-".into(),
                format: OutputFormat::Csv,
            },
        }
    }
}

impl RunConfig {
    pub fn load(path: &str) -> Result<Self, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read config {path}: {e}"))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("config error in {path}: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    /// Enforces every cross-field constraint, naming the violated one.
    pub fn validate(&self) -> Result<(), String> {
        let s = &self.system;
        if s.n_barriers == 0 {
            return Err("config error: system.n_barriers must be >= 1".into());
        }
        if s.width.is_nan() || s.width <= 0.0 {
            return Err(format!(
                "config error: system.width must be positive (a > 0); got {}",
                s.width
            ));
        }
        if s.period < s.width {
            return Err(format!(
                "config error: system.period must be >= system.width (L >= a); got L = {}, a = {}",
                s.period, s.width
            ));
        }
        if s.height.is_nan() || s.height <= 0.0 {
            return Err(format!(
                "config error: system.height must be positive; got {}",
                s.height
            ));
        }
        if self.model.barrier_height != s.height {
            return Err(format!(
                "config error: model.barrier_height ({}) must equal system.height ({})",
                self.model.barrier_height, s.height
            ));
        }
        let scan = &self.scan;
        if scan.steps < 2 {
            return Err("config error: scan.steps must be >= 2".into());
        }
        if scan.omega_min.is_nan() || scan.omega_max.is_nan() || scan.omega_min >= scan.omega_max {
            return Err(format!(
                "config error: scan.omega_min < scan.omega_max required; got [{}, {}]",
                scan.omega_min, scan.omega_max
            ));
        }
        if scan.omega_min <= 0.0 || scan.omega_max >= s.height {
            return Err(format!(
                "config error: scan range [{}, {}] must lie inside (0, V0) = (0, {})",
                scan.omega_min, scan.omega_max, s.height
            ));
        }
        for (name, value) in [
            ("unitarity", self.tolerances.unitarity),
            ("continuity", self.tolerances.continuity),
            ("opaque_rel", self.tolerances.opaque_rel),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(format!(
                    "config error: tolerances.{name} must be positive and finite; got {value}"
                ));
            }
        }
        Ok(())
    }

    pub fn barrier_system(&self) -> Result<BarrierSystem, String> {
        BarrierSystem::new(
            self.system.n_barriers,
            self.system.width,
            self.system.period,
            self.system.height,
        )
        .map_err(|e| e.to_string())
    }

    pub fn dispersion_model(&self) -> Result<DispersionModel, String> {
        match self.model.kind {
            ModelKind::NonrelativisticParticle => {
                DispersionModel::particle(self.model.barrier_height).map_err(|e| e.to_string())
            }
        }
    }

    pub fn lib_tolerances(&self) -> Tolerances {
        Tolerances {
            unitarity: self.tolerances.unitarity,
            continuity: self.tolerances.continuity,
            opaque_rel: self.tolerances.opaque_rel,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.system.n_barriers, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"system":{"n_barriers":1,"width":1.0,"period":1.0,"height":10.0,"typo":1}}"#;
        let err = serde_json::from_str::<RunConfig>(text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("typo"), "{err}");
    }

    #[test]
    fn period_below_width_names_the_constraint() {
        let mut config = RunConfig::default();
        config.system.period = 3.0;
        let err = config.validate().unwrap_err();
        assert!(err.contains("L >= a"), "{err}");
    }
}
