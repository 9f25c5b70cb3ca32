//! Pipeline configuration: a single TOML document whose defaults encode the
//! reference layout, so `panelcap run` needs nothing beyond an input path.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use panelcap_core::layout::{CAPACITIES, CLUSTER_FACTORS, CONTROLS, OUTCOME};
use panelcap_core::panel::{Role, Transform, VariableMeta, YearWindow};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FactorMode {
    Cfa,
    Efa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SeKind {
    Classical,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformSpec {
    None,
    Log,
    Standardize,
    LogStandardize,
}

impl From<TransformSpec> for Transform {
    fn from(t: TransformSpec) -> Self {
        match t {
            TransformSpec::None => Transform::None,
            TransformSpec::Log => Transform::Log,
            TransformSpec::Standardize => Transform::Standardize,
            TransformSpec::LogStandardize => Transform::LogThenStandardize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub id: String,
    pub anchor: String,
}

/// One capacity: its indicator variables and the factors expected from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySpec {
    pub name: String,
    pub variables: Vec<String>,
    #[serde(default)]
    pub factors: Vec<FactorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub code: String,
    #[serde(default = "default_control_transform")]
    pub transform: TransformSpec,
}

fn default_control_transform() -> TransformSpec {
    TransformSpec::Standardize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub mode: FactorMode,
    pub se: SeKind,
    pub controls: bool,
    pub year_dummies: bool,
    /// Regress on the natural log of the outcome.
    pub log_outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub factors: Vec<String>,
    /// Inclusive year window the factor scores are averaged over.
    pub window: [i32; 2],
    pub k: usize,
    pub k_max: usize,
    pub seed: u64,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub start: i32,
    pub end: i32,
    pub label: String,
}

/// Which dimensions of the robustness grid to vary. A disabled toggle pins
/// that dimension to the baseline estimation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub efa: bool,
    pub classical_se: bool,
    pub no_controls: bool,
    pub no_year_dummies: bool,
    pub period_average: bool,
    pub windows: Vec<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub outcome: String,
    /// Optional externally supplied growth column summarised per cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<String>,
    pub controls: Vec<ControlSpec>,
    pub capacities: Vec<CapacitySpec>,
    pub estimation: EstimationConfig,
    pub clustering: ClusterConfig,
    pub sensitivity: SensitivityConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("panel.csv"),
            output_dir: PathBuf::from("out"),
            outcome: OUTCOME.to_string(),
            growth: None,
            controls: CONTROLS
                .iter()
                .map(|c| ControlSpec {
                    code: c.to_string(),
                    transform: TransformSpec::Standardize,
                })
                .collect(),
            capacities: CAPACITIES
                .iter()
                .map(|cap| CapacitySpec {
                    name: cap.name.to_string(),
                    variables: cap.variables().into_iter().map(String::from).collect(),
                    factors: cap
                        .factors
                        .iter()
                        .map(|f| FactorSpec {
                            id: f.id.to_string(),
                            anchor: f.anchor.to_string(),
                        })
                        .collect(),
                })
                .collect(),
            estimation: EstimationConfig {
                mode: FactorMode::Cfa,
                se: SeKind::Robust,
                controls: true,
                year_dummies: true,
                log_outcome: true,
            },
            clustering: ClusterConfig {
                factors: CLUSTER_FACTORS.iter().map(|s| s.to_string()).collect(),
                window: [2015, 2019],
                k: 5,
                k_max: 8,
                seed: 1011,
                restarts: 20,
            },
            sensitivity: SensitivityConfig {
                efa: true,
                classical_se: true,
                no_controls: true,
                no_year_dummies: true,
                period_average: true,
                windows: vec![
                    window(2005, 2009, "2005-10"),
                    window(2010, 2014, "2010-15"),
                    window(2015, 2019, "2015-19"),
                ],
            },
        }
    }
}

fn window(start: i32, end: i32, label: &str) -> WindowSpec {
    WindowSpec {
        start,
        end,
        label: label.to_string(),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        // relative paths are taken relative to the config file
        if let Some(dir) = path.parent() {
            if cfg.input.is_relative() {
                cfg.input = dir.join(&cfg.input);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Factor ids declared by the capacities, in declaration order.
    pub fn factor_ids(&self) -> Vec<String> {
        self.capacities
            .iter()
            .flat_map(|c| c.factors.iter().map(|f| f.id.clone()))
            .collect()
    }

    /// Capacity variables across all capacities.
    pub fn capacity_variables(&self) -> Vec<String> {
        self.capacities
            .iter()
            .flat_map(|c| c.variables.iter().cloned())
            .collect()
    }

    pub fn control_codes(&self) -> Vec<String> {
        self.controls.iter().map(|c| c.code.clone()).collect()
    }

    /// Input columns with their roles.
    pub fn schema(&self) -> Vec<VariableMeta> {
        let mut schema: Vec<VariableMeta> = self
            .capacities
            .iter()
            .flat_map(|c| c.variables.iter().map(|v| VariableMeta::capacity(v.clone(), c.name.clone())))
            .collect();
        schema.extend(self.controls.iter().map(|c| VariableMeta {
            transform: c.transform.into(),
            ..VariableMeta::new(c.code.clone(), Role::Control)
        }));
        let mut outcome = VariableMeta::new(self.outcome.clone(), Role::Outcome);
        if self.estimation.log_outcome {
            outcome.transform = Transform::Log;
        }
        schema.push(outcome);
        if let Some(g) = &self.growth {
            schema.push(VariableMeta::new(g.clone(), Role::Outcome));
        }
        schema
    }

    pub fn windows(&self) -> Vec<YearWindow> {
        self.sensitivity
            .windows
            .iter()
            .map(|w| YearWindow::labelled(w.start, w.end, w.label.clone()))
            .collect()
    }

    /// Column holding the regression outcome once transforms are applied.
    pub fn outcome_column(&self) -> String {
        if self.estimation.log_outcome {
            format!("log_{}", self.outcome)
        } else {
            self.outcome.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        let mut seen = HashSet::new();
        for code in self
            .capacity_variables()
            .iter()
            .chain(self.control_codes().iter())
            .chain(std::iter::once(&self.outcome))
            .chain(self.growth.iter())
        {
            if !seen.insert(code.as_str()) {
                return bad(format!("column `{code}` is listed more than once"));
            }
        }
        let mut ids = HashSet::new();
        for cap in &self.capacities {
            if cap.variables.is_empty() {
                return bad(format!("capacity `{}` has no variables", cap.name));
            }
            for f in &cap.factors {
                if !cap.variables.contains(&f.anchor) {
                    return bad(format!(
                        "anchor `{}` of factor `{}` is not a variable of `{}`",
                        f.anchor, f.id, cap.name
                    ));
                }
                if !ids.insert(f.id.as_str()) {
                    return bad(format!("factor id `{}` is used twice", f.id));
                }
            }
        }
        for f in &self.clustering.factors {
            if !ids.contains(f.as_str()) {
                return bad(format!("clustering factor `{f}` is not produced by any capacity"));
            }
        }
        let c = &self.clustering;
        if c.factors.is_empty() {
            return bad("clustering needs at least one factor".into());
        }
        if c.k == 0 || c.k_max < 2 || c.restarts == 0 {
            return bad("clustering needs k ≥ 1, k_max ≥ 2 and restarts ≥ 1".into());
        }
        if c.window[0] > c.window[1] {
            return bad(format!("clustering window {}..{} is empty", c.window[0], c.window[1]));
        }
        if self.sensitivity.period_average && self.sensitivity.windows.len() < 2 {
            return bad("period averaging needs at least two windows".into());
        }
        Ok(())
    }
}

/// Anchored factor names for the whole layout, used to label EFA factors.
pub fn efa_names(cfg: &PipelineConfig) -> Vec<panelcap_core::factor::FactorName> {
    cfg.capacities
        .iter()
        .flat_map(|c| c.factors.iter())
        .map(|f| panelcap_core::factor::FactorName::anchored(f.id.clone(), f.anchor.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.capacity_variables().len(), 47);
        assert_eq!(cfg.factor_ids().len(), 13);
        let back: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_cluster_factor_is_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.clustering.factors.push("nope".into());
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(m)) if m.contains("nope")));
    }

    #[test]
    fn duplicate_column_is_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.controls.push(ControlSpec {
            code: cfg.outcome.clone(),
            transform: TransformSpec::None,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_fail() {
        let text = PipelineConfig::default().to_toml() + "\nbogus = 1\n";
        assert!(toml::from_str::<PipelineConfig>(&text).is_err());
    }
}
