//! Static SVG plots, hand-emitted so the artifact set has no rendering
//! dependency: a log-log scaling plot with the fitted power law, and
//! semi-log exceedance tails with fitted decay lines.
//!
//! All coordinates are written with fixed precision from deterministic
//! inputs, so reruns produce byte-identical files.

use std::f64::consts::LN_10;
use std::fmt::Write as _;

use lpp_lab::experiments::{Curve, ExperimentResult};
use lpp_lab::stats::{fit_semilog, Abscissa, FitResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 44.0;
const MARGIN_B: f64 = 58.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Bootstrap resamples for the tail-decay fits drawn on plots.
const PLOT_FIT_RESAMPLES: usize = 200;

/// All plots for one experiment as (file suffix, svg text) pairs.
pub fn experiment_plots(result: &ExperimentResult, config_sha: &str) -> Vec<(String, String)> {
    let mut plots = Vec::new();
    if let Some(stat) = crate::output::fit_statistic(result.config.kind.name()) {
        if let Some(fit) = crate::output::scaling_fit(&result.scales, stat) {
            plots.push((
                "scaling".to_string(),
                scaling_svg(result, stat, &fit, config_sha),
            ));
        }
    }
    if result.scales.iter().any(|s| !s.curves.is_empty()) {
        plots.push(("tails".to_string(), tails_svg(result, config_sha)));
    }
    plots
}

// ---------------------------------------------------------------------------
// Shared canvas helpers
// ---------------------------------------------------------------------------

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    /// Expand a degenerate range so the mapping below stays finite.
    fn new(mut x0: f64, mut x1: f64, mut y0: f64, mut y1: f64) -> Frame {
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(buf: &mut String, result: &ExperimentResult, config_sha: &str, title: &str) {
    let _ = writeln!(
        buf,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        buf,
        "<!-- experiment: {} | master_seed: {} | config_sha256: {} | code_version: {} -->",
        result.config.name, result.manifest.master_seed, config_sha, result.manifest.code_version
    );
    let _ = writeln!(
        buf,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        buf,
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\" fill=\"#111\">{}</text>",
        WIDTH / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        buf,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
}

fn axis_labels(buf: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        buf,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" fill=\"#111\">{}</text>",
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 14.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        buf,
        "<text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" fill=\"#111\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
        MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
        MARGIN_T + (HEIGHT - MARGIN_T - MARGIN_B) / 2.0,
        xml_escape(y_label)
    );
}

fn x_tick(buf: &mut String, frame: &Frame, x: f64, label: &str) {
    let px = frame.px(x);
    let _ = writeln!(
        buf,
        "<line x1=\"{px:.2}\" y1=\"{MARGIN_T}\" x2=\"{px:.2}\" y2=\"{:.2}\" \
         stroke=\"#ddd\" stroke-width=\"1\"/>",
        HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        buf,
        "<text x=\"{px:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"middle\" fill=\"#333\">{}</text>",
        HEIGHT - MARGIN_B + 16.0,
        xml_escape(label)
    );
}

fn y_tick(buf: &mut String, frame: &Frame, y: f64, label: &str) {
    let py = frame.py(y);
    let _ = writeln!(
        buf,
        "<line x1=\"{MARGIN_L}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" \
         stroke=\"#ddd\" stroke-width=\"1\"/>",
        WIDTH - MARGIN_R
    );
    let _ = writeln!(
        buf,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"end\" fill=\"#333\">{}</text>",
        MARGIN_L - 6.0,
        py + 4.0,
        xml_escape(label)
    );
}

fn legend_entry(buf: &mut String, index: usize, color: &str, dashed: bool, label: &str) {
    let y = MARGIN_T + 14.0 + 16.0 * index as f64;
    let x = WIDTH - MARGIN_R - 190.0;
    let dash = if dashed { " stroke-dasharray=\"6 3\"" } else { "" };
    let _ = writeln!(
        buf,
        "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
         stroke=\"{color}\" stroke-width=\"2\"{dash}/>",
        x + 18.0
    );
    let _ = writeln!(
        buf,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
         fill=\"#333\">{}</text>",
        x + 24.0,
        y + 4.0,
        xml_escape(label)
    );
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Three-significant-digit label, scientific outside a readable range.
fn fmt_val(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if (0.001..10_000.0).contains(&a) {
        let s = format!("{v:.3}");
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        format!("{v:.2e}")
    }
}

// ---------------------------------------------------------------------------
// Log-log scaling plot
// ---------------------------------------------------------------------------

fn scaling_svg(
    result: &ExperimentResult,
    statistic: &str,
    fit: &FitResult,
    config_sha: &str,
) -> String {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for scale in &result.scales {
        if let Some(est) = scale.estimates.get(statistic) {
            if est.value > 0.0 {
                pts.push(((scale.n as f64).log10(), est.value.log10()));
            }
        }
    }
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let xpad = 0.05 * (xmax - xmin).max(0.1);
    let ypad = 0.10 * (ymax - ymin).max(0.1);
    let frame = Frame::new(xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad);

    let mut buf = String::new();
    svg_open(
        &mut buf,
        result,
        config_sha,
        &format!("{}: {statistic} vs n (log-log)", result.config.name),
    );
    for scale in &result.scales {
        x_tick(
            &mut buf,
            &frame,
            (scale.n as f64).log10(),
            &scale.n.to_string(),
        );
    }
    for i in 0..4 {
        let y = frame.y0 + (frame.y1 - frame.y0) * i as f64 / 3.0;
        y_tick(&mut buf, &frame, y, &fmt_val(10f64.powf(y)));
    }

    // Fitted power law: log10 y = intercept/ln10 + slope * log10 x.
    let line_y = |x: f64| fit.intercept / LN_10 + fit.slope * x;
    let _ = writeln!(
        buf,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"{}\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>",
        frame.px(frame.x0),
        frame.py(line_y(frame.x0)),
        frame.px(frame.x1),
        frame.py(line_y(frame.x1)),
        PALETTE[1]
    );
    for (x, y) in &pts {
        let _ = writeln!(
            buf,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"/>",
            frame.px(*x),
            frame.py(*y),
            PALETTE[0]
        );
    }
    legend_entry(&mut buf, 0, PALETTE[0], false, statistic);
    legend_entry(
        &mut buf,
        1,
        PALETTE[1],
        true,
        &format!(
            "fit slope {} [{}, {}]",
            fmt_val(fit.slope),
            fmt_val(fit.ci_lo),
            fmt_val(fit.ci_hi)
        ),
    );
    axis_labels(&mut buf, "n (log scale)", &format!("{statistic} (log scale)"));
    buf.push_str("</svg>\n");
    buf
}

// ---------------------------------------------------------------------------
// Semi-log tail plot
// ---------------------------------------------------------------------------

struct TailSeries<'a> {
    n: i64,
    key: &'a str,
    curve: &'a Curve,
    color: &'static str,
}

fn tails_svg(result: &ExperimentResult, config_sha: &str) -> String {
    let mut series: Vec<TailSeries> = Vec::new();
    for scale in &result.scales {
        for (key, curve) in &scale.curves {
            let color = PALETTE[series.len() % PALETTE.len()];
            series.push(TailSeries {
                n: scale.n,
                key,
                curve,
                color,
            });
        }
    }

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in &series {
        for (t, p) in s.curve.thresholds.iter().zip(&s.curve.probabilities) {
            if *p > 0.0 {
                xmin = xmin.min(*t);
                xmax = xmax.max(*t);
                ymin = ymin.min(p.log10());
                ymax = ymax.max(p.log10());
            }
        }
    }
    if !xmin.is_finite() {
        // Every curve is identically zero; emit an annotated empty frame.
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, -1.0, 0.0);
    }
    let xpad = 0.04 * (xmax - xmin).max(0.1);
    let frame = Frame::new(xmin - xpad, xmax + xpad, ymin - 0.2, ymax + 0.2);

    let mut buf = String::new();
    svg_open(
        &mut buf,
        result,
        config_sha,
        &format!("{}: exceedance tails (semi-log)", result.config.name),
    );
    for i in 0..5 {
        let x = frame.x0 + (frame.x1 - frame.x0) * i as f64 / 4.0;
        x_tick(&mut buf, &frame, x, &fmt_val(x));
    }
    let lo = frame.y0.ceil() as i64;
    let hi = frame.y1.floor() as i64;
    if lo <= hi {
        for yi in lo..=hi {
            y_tick(&mut buf, &frame, yi as f64, &format!("1e{yi}"));
        }
    } else {
        y_tick(&mut buf, &frame, (frame.y0 + frame.y1) / 2.0, "");
    }

    let mut legend_idx = 0usize;
    for s in &series {
        let mut path = String::new();
        for (t, p) in s.curve.thresholds.iter().zip(&s.curve.probabilities) {
            if *p > 0.0 {
                let cmd = if path.is_empty() { 'M' } else { 'L' };
                let _ = write!(path, "{cmd}{:.2} {:.2} ", frame.px(*t), frame.py(p.log10()));
            }
        }
        if path.is_empty() {
            continue;
        }
        let _ = writeln!(
            buf,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            path.trim_end(),
            s.color
        );
        legend_entry(
            &mut buf,
            legend_idx,
            s.color,
            false,
            &format!("n={} {}", s.n, s.key),
        );
        legend_idx += 1;
    }

    // One fitted decay line per curve key, on the largest n that supports it.
    let mut keys: Vec<&str> = series.iter().map(|s| s.key).collect();
    keys.sort_unstable();
    keys.dedup();
    for key in keys {
        let best = series
            .iter()
            .filter(|s| s.key == key)
            .max_by_key(|s| (s.n, s.curve.thresholds.len()));
        let Some(s) = best else { continue };
        let Ok(fit) = fit_semilog(
            &s.curve.thresholds,
            &s.curve.probabilities,
            Abscissa::Identity,
            PLOT_FIT_RESAMPLES,
        ) else {
            continue;
        };
        // fit is ln p = a + b t; draw log10 p = (a + b t)/ln10.
        let line_y = |t: f64| (fit.intercept + fit.slope * t) / LN_10;
        let _ = writeln!(
            buf,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
             stroke=\"#555\" stroke-width=\"1.2\" stroke-dasharray=\"6 3\"/>",
            frame.px(frame.x0),
            frame.py(line_y(frame.x0).clamp(frame.y0, frame.y1)),
            frame.px(frame.x1),
            frame.py(line_y(frame.x1).clamp(frame.y0, frame.y1)),
        );
        legend_entry(
            &mut buf,
            legend_idx,
            "#555",
            true,
            &format!("{key} fit: decay {}/unit", fmt_val(-fit.slope / LN_10)),
        );
        legend_idx += 1;
    }

    axis_labels(&mut buf, "threshold", "exceedance probability (log scale)");
    buf.push_str("</svg>\n");
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_labels_are_compact() {
        assert_eq!(fmt_val(0.0), "0");
        assert_eq!(fmt_val(2048.0), "2048");
        assert_eq!(fmt_val(0.6667), "0.667");
        assert_eq!(fmt_val(1.0e-5), "1.00e-5");
    }

    #[test]
    fn escape_handles_markup() {
        assert_eq!(xml_escape("a<b&c>d"), "a&lt;b&amp;c&gt;d");
    }
}
