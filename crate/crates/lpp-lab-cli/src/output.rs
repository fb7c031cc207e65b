//! Artifact writers: per-experiment CSV tables, a deterministic JSON summary,
//! and a separate wall-clock timing file.
//!
//! Determinism contract: every artifact except `timing.json` is a pure
//! function of (config, seeds, code version), so reruns are byte-identical.
//! Wall-clock measurements live only in `timing.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use lpp_lab::experiments::{ExperimentResult, ScaleResult};
use lpp_lab::stats::{fit_loglog, FitResult};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

/// Bootstrap resamples for slope intervals in the summary (fixed-seed, so
/// deterministic).
const FIT_RESAMPLES: usize = 400;

pub fn config_sha256(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Measurement unit for each estimate key, shown in the CSV unit column.
fn unit_for(statistic: &str) -> &'static str {
    match statistic {
        "mean_count" => "paths",
        "mean_class_count" => "classes",
        "mean_middle_vertices" => "vertices",
        "mean_middle_per_n" => "vertices_per_n",
        "hit_prob" => "probability",
        "mean_z" => "tw_units",
        "mean_t_over_n" => "weight_per_n",
        "scale_gap_factor" => "ratio",
        "median_ratio" | "mean_ratio" => "ratio",
        _ => "lattice_units",
    }
}

fn preamble(file: &mut File, result: &ExperimentResult, config_sha: &str) -> CliResult<()> {
    writeln!(file, "# experiment: {}", result.config.name)?;
    writeln!(file, "# kind: {}", result.config.kind.name())?;
    writeln!(file, "# master_seed: {}", result.manifest.master_seed)?;
    writeln!(file, "# config_sha256: {config_sha}")?;
    writeln!(file, "# code_version: {}", result.manifest.code_version)?;
    Ok(())
}

fn write_estimates_csv(
    path: &Path,
    result: &ExperimentResult,
    config_sha: &str,
) -> CliResult<()> {
    let mut file = File::create(path)?;
    preamble(&mut file, result, config_sha)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["n", "trials", "statistic", "value", "std_error", "unit"])?;
    for scale in &result.scales {
        for (key, est) in &scale.estimates {
            w.write_record([
                scale.n.to_string(),
                scale.trials.to_string(),
                key.clone(),
                est.value.to_string(),
                est.std_error.to_string(),
                unit_for(key).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_curves_csv(path: &Path, result: &ExperimentResult, config_sha: &str) -> CliResult<()> {
    let mut file = File::create(path)?;
    preamble(&mut file, result, config_sha)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["n", "curve", "threshold", "probability", "std_error"])?;
    for scale in &result.scales {
        for (key, curve) in &scale.curves {
            for i in 0..curve.thresholds.len() {
                w.write_record([
                    scale.n.to_string(),
                    key.clone(),
                    curve.thresholds[i].to_string(),
                    curve.probabilities[i].to_string(),
                    curve.std_errors[i].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Summary JSON
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FitJson {
    statistic: String,
    slope: f64,
    intercept: f64,
    ci_lo: f64,
    ci_hi: f64,
    residual_rms: f64,
    points_used: usize,
}

impl FitJson {
    fn new(statistic: &str, fit: &FitResult) -> Self {
        FitJson {
            statistic: statistic.to_string(),
            slope: fit.slope,
            intercept: fit.intercept,
            ci_lo: fit.ci_lo,
            ci_hi: fit.ci_hi,
            residual_rms: fit.residual_rms,
            points_used: fit.points_used,
        }
    }
}

#[derive(Serialize)]
struct EstimateJson {
    value: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct CurveJson {
    thresholds: Vec<f64>,
    probabilities: Vec<f64>,
    std_errors: Vec<f64>,
}

#[derive(Serialize)]
struct ScaleJson {
    n: i64,
    trials: u64,
    estimates: BTreeMap<String, EstimateJson>,
    curves: BTreeMap<String, CurveJson>,
    counters: BTreeMap<String, u64>,
}

#[derive(Serialize)]
struct ExperimentJson {
    name: String,
    kind: String,
    master_seed: u64,
    n_list: Vec<i64>,
    trials_per_scale: u64,
    tie_count: u64,
    scales: Vec<ScaleJson>,
    /// Power-law fits of scale statistics vs n, keyed by fit name; empty when
    /// fewer than three scales carry a positive value.
    fits: BTreeMap<String, FitJson>,
}

#[derive(Serialize)]
struct SummaryJson {
    schema_version: u32,
    code_version: String,
    config_sha256: String,
    master_seeds: BTreeMap<String, u64>,
    experiments: Vec<ExperimentJson>,
}

/// Which per-scale estimate gets a power-law fit for each experiment kind.
pub fn fit_statistic(kind_tag: &str) -> Option<&'static str> {
    match kind_tag {
        "midpoint" | "origin_hit" => Some("hit_prob"),
        "tf_global" => Some("median_tf"),
        _ => None,
    }
}

/// Fit value-vs-n on log-log axes over the scales where the value is strictly
/// positive; None when fewer than three qualify.
pub fn scaling_fit(scales: &[ScaleResult], statistic: &str) -> Option<FitResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for scale in scales {
        if let Some(est) = scale.estimates.get(statistic) {
            if est.value > 0.0 {
                xs.push(scale.n as f64);
                ys.push(est.value);
            }
        }
    }
    if xs.len() < 3 {
        return None;
    }
    fit_loglog(&xs, &ys, FIT_RESAMPLES).ok()
}

fn experiment_json(result: &ExperimentResult) -> ExperimentJson {
    let mut fits = BTreeMap::new();
    if let Some(stat) = fit_statistic(result.config.kind.name()) {
        if let Some(fit) = scaling_fit(&result.scales, stat) {
            fits.insert(format!("{stat}_vs_n"), FitJson::new(stat, &fit));
        }
    }
    ExperimentJson {
        name: result.config.name.clone(),
        kind: result.config.kind.name().to_string(),
        master_seed: result.config.master_seed,
        n_list: result.config.n_list.clone(),
        trials_per_scale: result.config.trials,
        tie_count: result.tie_count,
        scales: result
            .scales
            .iter()
            .map(|s| ScaleJson {
                n: s.n,
                trials: s.trials,
                estimates: s
                    .estimates
                    .iter()
                    .map(|(k, e)| {
                        (
                            k.clone(),
                            EstimateJson {
                                value: e.value,
                                std_error: e.std_error,
                            },
                        )
                    })
                    .collect(),
                curves: s
                    .curves
                    .iter()
                    .map(|(k, c)| {
                        (
                            k.clone(),
                            CurveJson {
                                thresholds: c.thresholds.clone(),
                                probabilities: c.probabilities.clone(),
                                std_errors: c.std_errors.clone(),
                            },
                        )
                    })
                    .collect(),
                counters: s.counters.clone(),
            })
            .collect(),
        fits,
    }
}

#[derive(Serialize)]
struct TimingJson {
    config_sha256: String,
    master_seeds: BTreeMap<String, u64>,
    total_secs: f64,
    per_experiment_secs: BTreeMap<String, f64>,
}

/// Write all artifacts for a finished run; returns the paths written.
pub fn write_artifacts(
    out_dir: &Path,
    results: &[ExperimentResult],
    config_sha: &str,
) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for result in results {
        let name = &result.config.name;
        let est_path = out_dir.join(format!("{name}_estimates.csv"));
        write_estimates_csv(&est_path, result, config_sha)?;
        written.push(est_path);

        if result.scales.iter().any(|s| !s.curves.is_empty()) {
            let curve_path = out_dir.join(format!("{name}_curves.csv"));
            write_curves_csv(&curve_path, result, config_sha)?;
            written.push(curve_path);
        }

        for (suffix, svg) in crate::plot::experiment_plots(result, config_sha) {
            let path = out_dir.join(format!("{name}_{suffix}.svg"));
            std::fs::write(&path, svg)?;
            written.push(path);
        }
    }

    let code_version = results
        .first()
        .map(|r| r.manifest.code_version.clone())
        .unwrap_or_else(|| env!("CARGO_PKG_VERSION").to_string());
    let master_seeds: BTreeMap<String, u64> = results
        .iter()
        .map(|r| (r.config.name.clone(), r.config.master_seed))
        .collect();

    let summary = SummaryJson {
        schema_version: 1,
        code_version,
        config_sha256: config_sha.to_string(),
        master_seeds: master_seeds.clone(),
        experiments: results.iter().map(experiment_json).collect(),
    };
    let summary_path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(&summary_path, text)?;
    written.push(summary_path);

    let timing = TimingJson {
        config_sha256: config_sha.to_string(),
        master_seeds,
        total_secs: results.iter().map(|r| r.wall_clock_secs).sum(),
        per_experiment_secs: results
            .iter()
            .map(|r| (r.config.name.clone(), r.wall_clock_secs))
            .collect(),
    };
    let timing_path = out_dir.join("timing.json");
    let mut text = serde_json::to_string_pretty(&timing)?;
    text.push('\n');
    std::fs::write(&timing_path, text)?;
    written.push(timing_path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_is_hex_of_expected_length() {
        let h = config_sha256("hello");
        assert_eq!(h.len(), 64);
        assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
        // Fixed vector so accidental algorithm changes are caught.
        assert_eq!(
            h,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }

    #[test]
    fn units_cover_known_statistics() {
        assert_eq!(unit_for("hit_prob"), "probability");
        assert_eq!(unit_for("mean_tf"), "lattice_units");
        assert_eq!(unit_for("mean_ratio"), "ratio");
    }
}
