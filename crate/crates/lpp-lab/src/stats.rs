//! Statistical post-processing: power-law and tail-rate fits with bootstrap
//! intervals, and Kolmogorov-Smirnov distance against a shipped Tracy-Widom
//! GUE reference table.

use crate::lattice::mix64;
use crate::{Error, Result};

/// GUE Tracy-Widom CDF on a grid, with published moment constants.
///
/// The shipped table is reference data generated offline (see the data file
/// header for provenance); it is validated on load, not recomputed.
#[derive(Clone, Debug)]
pub struct TwReference {
    z: Vec<f64>,
    f: Vec<f64>,
}

/// Published mean of the GUE Tracy-Widom distribution.
pub const TW_GUE_MEAN: f64 = -1.771_086_807;
/// Published variance of the GUE Tracy-Widom distribution.
pub const TW_GUE_VARIANCE: f64 = 0.813_194_792;

impl TwReference {
    /// The table shipped with the crate.
    pub fn builtin() -> TwReference {
        TwReference::from_text(include_str!("../data/tw_gue_cdf.txt"))
            .expect("shipped reference table is valid")
    }

    /// Parse a two-column whitespace-separated (z, F) table; lines starting
    /// with '#' are comments.
    pub fn from_text(text: &str) -> Result<TwReference> {
        let mut z = Vec::new();
        let mut f = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (a, b) = (it.next(), it.next());
            let (Some(a), Some(b)) = (a, b) else {
                return Err(Error::Config(format!(
                    "reference table line {}: expected two columns",
                    lineno + 1
                )));
            };
            let (za, fb): (f64, f64) = match (a.parse(), b.parse()) {
                (Ok(x), Ok(y)) => (x, y),
                _ => {
                    return Err(Error::Config(format!(
                        "reference table line {}: unparsable numbers",
                        lineno + 1
                    )))
                }
            };
            z.push(za);
            f.push(fb);
        }
        let r = TwReference { z, f };
        r.validate()?;
        Ok(r)
    }

    pub fn from_path(path: &std::path::Path) -> Result<TwReference> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        TwReference::from_text(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.z.len() < 2 {
            return Err(Error::Config("reference table too short".into()));
        }
        for w in self.z.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config("reference z grid not increasing".into()));
            }
            if w[1] - w[0] > 0.02 + 1e-12 {
                return Err(Error::Config("reference z grid step above 0.02".into()));
            }
        }
        for w in self.f.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config("reference CDF not strictly increasing".into()));
            }
        }
        let (z0, zl) = (self.z[0], *self.z.last().unwrap());
        let (f0, fl) = (self.f[0], *self.f.last().unwrap());
        if z0 > -5.0 || zl < 3.0 {
            return Err(Error::Config(format!(
                "reference grid [{z0}, {zl}] does not span [-5, 3]"
            )));
        }
        if !(f0 < 0.001 && fl > 0.999 && f0 >= 0.0 && fl <= 1.0) {
            return Err(Error::Config("reference CDF endpoints out of range".into()));
        }
        Ok(())
    }

    /// Interpolated CDF; constant beyond the grid ends.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.z.len();
        if x <= self.z[0] {
            return self.f[0];
        }
        if x >= self.z[n - 1] {
            return self.f[n - 1];
        }
        let i = match self.z.binary_search_by(|zi| zi.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.f[i],
            Err(i) => i,
        };
        let (z0, z1) = (self.z[i - 1], self.z[i]);
        let (f0, f1) = (self.f[i - 1], self.f[i]);
        f0 + (f1 - f0) * (x - z0) / (z1 - z0)
    }

    /// Grid endpoints `(z_min, z_max)`.
    pub fn support(&self) -> (f64, f64) {
        (self.z[0], *self.z.last().unwrap())
    }

    /// Mean and variance of the tabulated law via Stieltjes midpoint sums
    /// over the grid increments. Mass outside the grid (at most 0.2% by
    /// `validate`) is ignored, so expect grid-truncation error around 1e-2.
    pub fn moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        for i in 1..self.z.len() {
            let mid = 0.5 * (self.z[i] + self.z[i - 1]);
            mean += mid * (self.f[i] - self.f[i - 1]);
        }
        let mut var = 0.0;
        for i in 1..self.z.len() {
            let mid = 0.5 * (self.z[i] + self.z[i - 1]);
            var += (mid - mean) * (mid - mean) * (self.f[i] - self.f[i - 1]);
        }
        (mean, var)
    }

    /// Inverse of the interpolated CDF, for inverse-transform sampling in
    /// calibration tests. `u` outside the table range clamps to the ends.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.f.len();
        if u <= self.f[0] {
            return self.z[0];
        }
        if u >= self.f[n - 1] {
            return self.z[n - 1];
        }
        let i = match self.f.binary_search_by(|fi| fi.partial_cmp(&u).unwrap()) {
            Ok(i) => return self.z[i],
            Err(i) => i,
        };
        let (f0, f1) = (self.f[i - 1], self.f[i]);
        let (z0, z1) = (self.z[i - 1], self.z[i]);
        z0 + (z1 - z0) * (u - f0) / (f1 - f0)
    }
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and the reference:
/// the sup over sample jump points of |empirical CDF - F|.
pub fn ks_distance(sample: &[f64], reference: &TwReference) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Contract("empty sample for KS distance".into()));
    }
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let fx = reference.cdf(x);
        // Empirical CDF jumps from i/n to (i+1)/n at x.
        d = d.max((fx - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - fx).abs());
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Abscissa transform for tail fits: fit log p against t or t^a (a = 1/4 for
/// quarter-power tails, 2 for Gaussian-shaped tails).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Abscissa {
    Identity,
    Power(f64),
}

impl Abscissa {
    fn apply(self, t: f64) -> Result<f64> {
        match self {
            Abscissa::Identity => Ok(t),
            Abscissa::Power(a) => {
                if t < 0.0 {
                    return Err(Error::Contract(format!(
                        "abscissa power transform on negative input {t}"
                    )));
                }
                Ok(t.powf(a))
            }
        }
    }
}

/// Least-squares line fit with a deterministic bootstrap interval.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// 95% bootstrap interval for the slope; always contains `slope`.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub residual_rms: f64,
    /// Number of zero-probability points dropped before fitting.
    pub dropped_zeros: usize,
    pub points_used: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Two-sided 97.5% Student-t quantile for small degrees of freedom; the
/// plain 1.96 multiplier undercovers on the handful of points a scaling fit
/// has.
fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [(usize, f64); 15] = [
        (1, 12.706),
        (2, 4.303),
        (3, 3.182),
        (4, 2.776),
        (5, 2.571),
        (6, 2.447),
        (7, 2.365),
        (8, 2.306),
        (9, 2.262),
        (10, 2.228),
        (12, 2.179),
        (15, 2.131),
        (20, 2.086),
        (25, 2.060),
        (30, 2.042),
    ];
    for &(d, q) in &TABLE {
        if df <= d {
            return q;
        }
    }
    1.96
}

/// Fixed-seed bootstrap over point indices; deterministic for fixed inputs,
/// so repeated runs reproduce identical intervals.
fn bootstrap_interval(xs: &[f64], ys: &[f64], resamples: usize, slope: f64) -> (f64, f64) {
    let n = xs.len();
    let mut slopes: Vec<f64> = Vec::with_capacity(resamples);
    let mut state = 0x1bf5_2283_6a5c_1d9bu64;
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for _ in 0..resamples {
        for i in 0..n {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let r = mix64(state) as usize % n;
            bx[i] = xs[r];
            by[i] = ys[r];
        }
        if let Some((s, _)) = least_squares(&bx, &by) {
            slopes.push(s);
        }
    }
    if slopes.len() < 2 {
        return (slope, slope);
    }
    let m = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let var = slopes.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (slopes.len() - 1) as f64;
    let half = t_quantile_975(n.saturating_sub(2).max(1)) * var.sqrt();
    (slope - half, slope + half)
}

fn finish_fit(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    dropped_zeros: usize,
) -> Result<FitResult> {
    let (slope, intercept) = least_squares(xs, ys).ok_or_else(|| {
        Error::DegenerateFit("zero abscissa variance (all x equal)".into())
    })?;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let (ci_lo, ci_hi) = bootstrap_interval(xs, ys, resamples, slope);
    Ok(FitResult {
        slope,
        intercept,
        ci_lo: ci_lo.min(slope),
        ci_hi: ci_hi.max(slope),
        residual_rms: (rss / xs.len() as f64).sqrt(),
        dropped_zeros,
        points_used: xs.len(),
    })
}

/// Power-law exponent fit: least squares on (log x, log y).
pub fn fit_loglog(xs: &[f64], ys: &[f64], resamples: usize) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Contract("mismatched fit input lengths".into()));
    }
    if xs.len() < 3 {
        return Err(Error::Contract(format!(
            "power-law fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Contract(
            "power-law fit requires strictly positive finite inputs".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    finish_fit(&lx, &ly, resamples, 0)
}

/// Exponential tail-rate fit: least squares on (transform(t), log p).
/// Zero-probability points are dropped (and counted), never smoothed:
/// smoothing would fabricate tail mass.
pub fn fit_semilog(
    ts: &[f64],
    ps: &[f64],
    abscissa: Abscissa,
    resamples: usize,
) -> Result<FitResult> {
    if ts.len() != ps.len() {
        return Err(Error::Contract("mismatched fit input lengths".into()));
    }
    for &p in ps {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::Contract(format!("probability {p} outside [0, 1]")));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0usize;
    for (&t, &p) in ts.iter().zip(ps) {
        if p == 0.0 {
            dropped += 1;
            continue;
        }
        xs.push(abscissa.apply(t)?);
        ys.push(p.ln());
    }
    if xs.is_empty() {
        return Err(Error::DegenerateFit(
            "all probabilities zero in tail fit".into(),
        ));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "tail fit needs at least 3 positive points, got {} ({dropped} zeros dropped)",
            xs.len()
        )));
    }
    finish_fit(&xs, &ys, resamples, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_table_loads_and_validates() {
        let r = TwReference::builtin();
        assert!(r.cdf(-10.0) < 0.001);
        assert!(r.cdf(10.0) > 0.999);
        // CDF is nondecreasing on a fine sweep.
        let mut last = -1.0;
        let mut x = -6.0;
        while x <= 4.0 {
            let f = r.cdf(x);
            assert!(f >= last);
            last = f;
            x += 0.013;
        }
        // Table moments agree with the published constants to table accuracy.
        let (mut m1, mut m2) = (0.0, 0.0);
        let steps = 20_000;
        for i in 0..steps {
            let u = (i as f64 + 0.5) / steps as f64;
            let z = r.inverse_cdf(u);
            m1 += z;
            m2 += z * z;
        }
        m1 /= steps as f64;
        m2 /= steps as f64;
        assert!((m1 - TW_GUE_MEAN).abs() < 0.005, "table mean {m1}");
        assert!((m2 - m1 * m1 - TW_GUE_VARIANCE).abs() < 0.01);
        // Stieltjes accessor agrees with the sampled moments.
        let (mean, var) = r.moments();
        assert!((mean - TW_GUE_MEAN).abs() < 0.01, "stieltjes mean {mean}");
        assert!((var - TW_GUE_VARIANCE).abs() < 0.02, "stieltjes var {var}");
    }

    #[test]
    fn reference_table_rejects_bad_input() {
        assert!(TwReference::from_text("1 0.5").is_err());
        // Non-increasing CDF.
        let mut rows = String::new();
        let mut x = -5.0;
        while x <= 3.01 {
            rows.push_str(&format!("{x} 0.5\n"));
            x += 0.02;
        }
        assert!(TwReference::from_text(&rows).is_err());
        // Step too coarse.
        assert!(TwReference::from_text("-5 0.0001\n3 0.9999").is_err());
    }

    #[test]
    fn ks_distance_basics() {
        let r = TwReference::builtin();
        let median = r.inverse_cdf(0.5);
        let d = ks_distance(&[median], &r).unwrap();
        assert!((d - 0.5).abs() < 1e-9, "single-point KS {d}");
        assert!(ks_distance(&[], &r).is_err());
        // Permutation invariance and range.
        let s1 = vec![0.3, -1.8, 2.0, -0.4, -2.2];
        let mut s2 = s1.clone();
        s2.reverse();
        let d1 = ks_distance(&s1, &r).unwrap();
        let d2 = ks_distance(&s2, &r).unwrap();
        assert_eq!(d1, d2);
        assert!((0.0..=1.0).contains(&d1));
    }

    #[test]
    fn ks_self_draws_pass_kolmogorov_bound() {
        // Inverse-transform draws from the reference itself: D < 1.36/sqrt(N)
        // in at least 95% of runs (Kolmogorov asymptotic 95th percentile).
        let r = TwReference::builtin();
        let n = 10_000usize;
        let runs = 40;
        let mut ok = 0;
        for run in 0..runs {
            let mut sample = Vec::with_capacity(n);
            for i in 0..n {
                let h = mix64((run as u64) << 32 | i as u64);
                let u = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                sample.push(r.inverse_cdf(u));
            }
            if ks_distance(&sample, &r).unwrap() < 0.0136 * 2.0 {
                ok += 1;
            }
        }
        assert!(ok * 100 >= runs * 95, "only {ok}/{runs} under the bound");
    }

    #[test]
    fn loglog_exact_and_equivariant() {
        let xs: Vec<f64> = (1..=8).map(|i| (i * i) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(-2.0 / 3.0)).collect();
        let fit = fit_loglog(&xs, &ys, 100).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!(fit.ci_lo <= fit.slope && fit.slope <= fit.ci_hi);
        assert!(fit.residual_rms < 1e-12);
        // Constant y: slope 0.
        let flat = fit_loglog(&xs, &vec![2.5; 8], 100).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        // Scaling ys by a constant moves the intercept, not the slope.
        let ys10: Vec<f64> = ys.iter().map(|y| y * 10.0).collect();
        let fit10 = fit_loglog(&xs, &ys10, 100).unwrap();
        assert!((fit10.slope - fit.slope).abs() < 1e-12);
        assert!((fit10.intercept - fit.intercept - 10.0f64.ln()).abs() < 1e-9);
        // Contract violations.
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0], 10).is_err());
        assert!(fit_loglog(&[1.0, -2.0, 3.0], &[1.0, 2.0, 3.0], 10).is_err());
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0], 10).is_err());
    }

    #[test]
    fn semilog_rates_and_transforms() {
        let ts: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let ps: Vec<f64> = ts.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_semilog(&ts, &ps, Abscissa::Identity, 100).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        // Quadratic abscissa: p = exp(-3 s^2).
        let ps2: Vec<f64> = ts.iter().map(|t| (-3.0 * t * t).exp()).collect();
        let fit2 = fit_semilog(&ts, &ps2, Abscissa::Power(2.0), 100).unwrap();
        assert!((fit2.slope + 3.0).abs() < 1e-12);
        // Zeros dropped with count; all-zero degenerate.
        let pz = vec![0.5, 0.0, 0.25, 0.0, 0.125, 0.1];
        let fitz = fit_semilog(&ts, &pz, Abscissa::Identity, 100).unwrap();
        assert_eq!(fitz.dropped_zeros, 2);
        assert_eq!(fitz.points_used, 4);
        match fit_semilog(&ts, &vec![0.0; 6], Abscissa::Identity, 10) {
            Err(Error::DegenerateFit(_)) => {}
            other => panic!("expected degenerate fit, got {other:?}"),
        }
        // Probability outside [0,1] is a contract violation.
        assert!(fit_semilog(&ts, &[0.5, 1.5, 0.1, 0.1, 0.1, 0.1], Abscissa::Identity, 10).is_err());
    }

    #[test]
    fn bootstrap_coverage_on_noisy_power_law() {
        // y = x^{2/3} (1 + 5% noise) on 6 decade-spaced points: the 95%
        // interval should cover 2/3 in at least 90% of synthetic runs.
        let xs: Vec<f64> = (0..6).map(|i| 10f64.powi(i)).collect();
        let runs = 1000;
        let mut covered = 0;
        for run in 0..runs {
            let ys: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let h = mix64((run as u64) * 31 + i as u64);
                    let u = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                    x.powf(2.0 / 3.0) * (1.0 + 0.05 * (2.0 * u - 1.0))
                })
                .collect();
            let fit = fit_loglog(&xs, &ys, 200).unwrap();
            if fit.ci_lo <= 2.0 / 3.0 && 2.0 / 3.0 <= fit.ci_hi {
                covered += 1;
            }
        }
        assert!(covered * 100 >= runs * 90, "coverage {covered}/{runs}");
    }

    #[test]
    fn bootstrap_interval_shrinks_with_more_points() {
        // Average interval width over synthetic sets is nonincreasing when
        // the point count doubles.
        let width_at = |count: usize| -> f64 {
            let mut total = 0.0;
            for run in 0..50u64 {
                let xs: Vec<f64> = (0..count).map(|i| 2f64.powi(i as i32)).collect();
                let ys: Vec<f64> = xs
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let h = mix64(run * 101 + i as u64);
                        let u = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                        x.powf(0.5) * (1.0 + 0.1 * (2.0 * u - 1.0))
                    })
                    .collect();
                let fit = fit_loglog(&xs, &ys, 200).unwrap();
                total += fit.ci_hi - fit.ci_lo;
            }
            total / 50.0
        };
        let w6 = width_at(6);
        let w12 = width_at(12);
        assert!(w12 <= w6, "bootstrap width grew: {w6} -> {w12}");
    }

    #[test]
    fn fits_are_deterministic() {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(1.3) * 1.7).collect();
        let a = fit_loglog(&xs, &ys, 500).unwrap();
        let b = fit_loglog(&xs, &ys, 500).unwrap();
        assert_eq!(a.ci_lo.to_bits(), b.ci_lo.to_bits());
        assert_eq!(a.ci_hi.to_bits(), b.ci_hi.to_bits());
    }
}
