//! TOML configuration schema: a flat, typed key-value file with one
//! `[[experiment]]` table per experiment. Unknown keys are rejected by name
//! so a misspelled key fails loudly instead of being silently ignored.

use lpp_lab::experiments::{
    Centering, ExperimentConfig, ExperimentKind, FluctCentering, Orientation,
};
use lpp_lab::{Error, Result};
use serde::Deserialize;

/// Whole config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Worker threads for the runner's pool; default = available cores.
    pub workers: Option<usize>,
    /// Dense-field cell budget; the environment variable takes precedence.
    pub memory_budget_cells: Option<u64>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentEntry>,
}

/// One `[[experiment]]` table: the union of every kind's keys, each
/// optional. `into_config` enforces per-kind presence and rejects keys the
/// kind does not take, so each section stays flat and typed.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: String,
    pub kind: String,
    pub n_list: Vec<i64>,
    pub trials: u64,
    pub master_seed: u64,

    pub width_factor: Option<f64>,
    pub ell_max: Option<usize>,
    pub class_tail_max: Option<usize>,
    pub h: Option<f64>,
    pub max_n: Option<i64>,
    pub centering: Option<String>,
    pub t_grid: Option<Vec<f64>>,
    pub orientation: Option<String>,
    pub prepass_trials: Option<u64>,
    pub s_grid: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub height: Option<i64>,
    pub x_grid: Option<Vec<f64>>,
    pub m_grid: Option<Vec<i64>>,
    pub stages: Option<usize>,
    pub cells_per_unit: Option<i64>,
    pub width_mult: Option<f64>,
    pub slope: Option<f64>,
    pub c1_grid: Option<Vec<f64>>,
    pub with_inf: Option<bool>,
}

/// Keys every kind shares; everything else must be claimed by the kind.
const COMMON_KEYS: [&str; 5] = ["name", "kind", "n_list", "trials", "master_seed"];

impl ExperimentEntry {
    /// Convert to a validated runner config, rejecting missing or extraneous
    /// keys with messages that name the key and the experiment.
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let name = self.name.clone();
        let mut used: Vec<&str> = Vec::new();
        let kind = self.build_kind(&mut used)?;
        self.check_unused(&used)?;
        let cfg = ExperimentConfig {
            name,
            kind,
            n_list: self.n_list,
            trials: self.trials,
            master_seed: self.master_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn build_kind(&self, used: &mut Vec<&'static str>) -> Result<ExperimentKind> {
        let req = |v: bool, key: &str| -> Result<()> {
            if v {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "experiment '{}': kind '{}' requires key '{}'",
                    self.name, self.kind, key
                )))
            }
        };
        match self.kind.as_str() {
            "disjoint_tail" => {
                used.extend(["width_factor", "ell_max"]);
                req(self.width_factor.is_some(), "width_factor")?;
                req(self.ell_max.is_some(), "ell_max")?;
                Ok(ExperimentKind::DisjointTail {
                    width_factor: self.width_factor.unwrap(),
                    ell_max: self.ell_max.unwrap(),
                })
            }
            "coalescence" => {
                used.extend(["width_factor", "class_tail_max"]);
                req(self.width_factor.is_some(), "width_factor")?;
                req(self.class_tail_max.is_some(), "class_tail_max")?;
                Ok(ExperimentKind::Coalescence {
                    width_factor: self.width_factor.unwrap(),
                    class_tail_max: self.class_tail_max.unwrap(),
                })
            }
            "midpoint" => Ok(ExperimentKind::Midpoint),
            "origin_hit" => {
                used.extend(["h", "max_n"]);
                req(self.h.is_some(), "h")?;
                req(self.max_n.is_some(), "max_n")?;
                Ok(ExperimentKind::OriginHit {
                    h: self.h.unwrap(),
                    max_n: self.max_n.unwrap(),
                })
            }
            "tw_rescaling" => {
                used.extend(["h", "centering", "t_grid"]);
                req(self.h.is_some(), "h")?;
                req(self.centering.is_some(), "centering")?;
                req(self.t_grid.is_some(), "t_grid")?;
                let centering = match self.centering.as_deref().unwrap() {
                    "asymptotic" => Centering::Asymptotic,
                    "finite_size" => Centering::FiniteSize,
                    other => {
                        return Err(Error::Config(format!(
                            "experiment '{}': centering '{}' is not one of \
                             'asymptotic', 'finite_size'",
                            self.name, other
                        )))
                    }
                };
                Ok(ExperimentKind::TwRescaling {
                    h: self.h.unwrap(),
                    centering,
                    t_grid: self.t_grid.clone().unwrap(),
                })
            }
            "segment_fluct" => {
                used.extend([
                    "orientation",
                    "width_factor",
                    "centering",
                    "prepass_trials",
                    "t_grid",
                ]);
                req(self.orientation.is_some(), "orientation")?;
                req(self.width_factor.is_some(), "width_factor")?;
                req(self.centering.is_some(), "centering")?;
                req(self.t_grid.is_some(), "t_grid")?;
                let orientation = match self.orientation.as_deref().unwrap() {
                    "vertical" => Orientation::Vertical,
                    "tilted" => Orientation::Tilted,
                    "steep" => {
                        used.push("eps");
                        req(self.eps.is_some(), "eps")?;
                        Orientation::Steep {
                            eps: self.eps.unwrap(),
                        }
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "experiment '{}': orientation '{}' is not one of \
                             'vertical', 'tilted', 'steep'",
                            self.name, other
                        )))
                    }
                };
                let centering = match self.centering.as_deref().unwrap() {
                    "analytic" => FluctCentering::Analytic,
                    "empirical" => FluctCentering::Empirical,
                    other => {
                        return Err(Error::Config(format!(
                            "experiment '{}': centering '{}' is not one of \
                             'analytic', 'empirical'",
                            self.name, other
                        )))
                    }
                };
                Ok(ExperimentKind::SegmentFluct {
                    orientation,
                    width_factor: self.width_factor.unwrap(),
                    centering,
                    prepass_trials: self.prepass_trials.unwrap_or(0),
                    t_grid: self.t_grid.clone().unwrap(),
                })
            }
            "tf_global" => {
                used.push("s_grid");
                req(self.s_grid.is_some(), "s_grid")?;
                Ok(ExperimentKind::TfGlobal {
                    s_grid: self.s_grid.clone().unwrap(),
                })
            }
            "tf_local_steep" => {
                used.extend(["eps", "height", "x_grid"]);
                req(self.eps.is_some(), "eps")?;
                req(self.height.is_some(), "height")?;
                req(self.x_grid.is_some(), "x_grid")?;
                Ok(ExperimentKind::TfLocalSteep {
                    eps: self.eps.unwrap(),
                    height: self.height.unwrap(),
                    x_grid: self.x_grid.clone().unwrap(),
                })
            }
            "tf_rightmost" => {
                used.extend(["eps", "height", "m_grid"]);
                req(self.eps.is_some(), "eps")?;
                req(self.height.is_some(), "height")?;
                req(self.m_grid.is_some(), "m_grid")?;
                Ok(ExperimentKind::TfRightmost {
                    eps: self.eps.unwrap(),
                    height: self.height.unwrap(),
                    m_grid: self.m_grid.clone().unwrap(),
                })
            }
            "thin_cylinder" => {
                used.extend([
                    "stages",
                    "cells_per_unit",
                    "width_mult",
                    "slope",
                    "c1_grid",
                    "with_inf",
                ]);
                req(self.stages.is_some(), "stages")?;
                req(self.cells_per_unit.is_some(), "cells_per_unit")?;
                req(self.width_mult.is_some(), "width_mult")?;
                req(self.slope.is_some(), "slope")?;
                req(self.c1_grid.is_some(), "c1_grid")?;
                Ok(ExperimentKind::ThinCylinder {
                    stages: self.stages.unwrap(),
                    cells_per_unit: self.cells_per_unit.unwrap(),
                    width_mult: self.width_mult.unwrap(),
                    slope: self.slope.unwrap(),
                    c1_grid: self.c1_grid.clone().unwrap(),
                    with_inf: self.with_inf.unwrap_or(false),
                })
            }
            other => Err(Error::Config(format!(
                "experiment '{}': unknown kind '{other}'",
                self.name
            ))),
        }
    }

    /// Reject keys that were set but not consumed by the declared kind.
    fn check_unused(&self, used: &[&str]) -> Result<()> {
        let set: Vec<(&str, bool)> = vec![
            ("width_factor", self.width_factor.is_some()),
            ("ell_max", self.ell_max.is_some()),
            ("class_tail_max", self.class_tail_max.is_some()),
            ("h", self.h.is_some()),
            ("max_n", self.max_n.is_some()),
            ("centering", self.centering.is_some()),
            ("t_grid", self.t_grid.is_some()),
            ("orientation", self.orientation.is_some()),
            ("prepass_trials", self.prepass_trials.is_some()),
            ("s_grid", self.s_grid.is_some()),
            ("eps", self.eps.is_some()),
            ("height", self.height.is_some()),
            ("x_grid", self.x_grid.is_some()),
            ("m_grid", self.m_grid.is_some()),
            ("stages", self.stages.is_some()),
            ("cells_per_unit", self.cells_per_unit.is_some()),
            ("width_mult", self.width_mult.is_some()),
            ("slope", self.slope.is_some()),
            ("c1_grid", self.c1_grid.is_some()),
            ("with_inf", self.with_inf.is_some()),
        ];
        for (key, present) in set {
            if present && !used.contains(&key) && !COMMON_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "experiment '{}': kind '{}' does not take key '{}'",
                    self.name, self.kind, key
                )));
            }
        }
        Ok(())
    }
}

/// Parse a config file's text; TOML errors already name the offending key.
pub fn parse_config(text: &str) -> Result<FileConfig> {
    let cfg: FileConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    if cfg.experiments.is_empty() {
        return Err(Error::Config("config declares no experiments".into()));
    }
    for (i, entry) in cfg.experiments.iter().enumerate() {
        // Names become artifact file stems, so keep them filesystem-safe and
        // collision-free.
        if entry.name.is_empty()
            || !entry
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::Config(format!(
                "experiment name '{}' must be nonempty and use only letters, digits, '-', '_'",
                entry.name
            )));
        }
        if cfg.experiments[..i].iter().any(|e| e.name == entry.name) {
            return Err(Error::Config(format!(
                "duplicate experiment name '{}'",
                entry.name
            )));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn misspelled_key_is_named_in_error() {
        let text = r#"
            [[experiment]]
            name = "m"
            kind = "midpoint"
            n_list = [8]
            trails = 10
            master_seed = 1
        "#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("trails"), "error should name the key: {err}");
    }

    #[test]
    fn foreign_key_for_kind_is_rejected() {
        let text = r#"
            [[experiment]]
            name = "m"
            kind = "midpoint"
            n_list = [8]
            trials = 10
            master_seed = 1
            h = 0.5
        "#;
        let cfg = parse_config(text).unwrap();
        let err = cfg.experiments[0]
            .clone()
            .into_config()
            .unwrap_err()
            .to_string();
        assert!(err.contains("does not take key 'h'"), "{err}");
    }

    #[test]
    fn full_schema_roundtrip() {
        let text = r#"
            workers = 2

            [[experiment]]
            name = "tw"
            kind = "tw_rescaling"
            h = 1.0
            centering = "finite_size"
            t_grid = [1.0, 2.0]
            n_list = [32]
            trials = 5
            master_seed = 7
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.workers, Some(2));
        let exp = cfg.experiments[0].clone().into_config().unwrap();
        assert_eq!(exp.trials, 5);
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = r#"
            [[experiment]]
            name = "d"
            kind = "disjoint_tail"
            width_factor = 1.0
            n_list = [8]
            trials = 2
            master_seed = 1
        "#;
        let cfg = parse_config(text).unwrap();
        let err = cfg.experiments[0]
            .clone()
            .into_config()
            .unwrap_err()
            .to_string();
        assert!(err.contains("ell_max"), "{err}");
    }
}
