//! Oracle self-test suites behind the `selftest` subcommand: streaming DP
//! values and geodesics against exhaustive path enumeration, and the
//! frontier-sweep disjoint count against exhaustive subset search, on seeded
//! random instances so any failure is reproducible from its printed seed.

use lpp_lab::experiments::trial_seed;
use lpp_lab::geometry::{max_disjoint_count, max_disjoint_exhaustive};
use lpp_lab::lattice::{pt, sample_field, AntidiagSegment, PointSampler, Rect};
use lpp_lab::passage::{brute_force, forward_value_mutated, forward_values, geodesic};
use lpp_lab::{Error, Result};

/// Relative tolerance for DP-vs-enumeration values: both routes add the same
/// f64 weights, just in different orders.
pub const DP_REL_TOL: f64 = 1e-9;

/// Largest grid side (in vertices) the enumeration oracle accepts.
pub const MAX_ORACLE_SIZE: i64 = 7;

/// Fixed base seed so `selftest` runs are reproducible without flags.
pub const SELFTEST_SEED: u64 = 0x5E1F_7E57;

pub struct SuiteReport {
    pub cases: u64,
    pub comparisons: u64,
    /// Field seeds of cases with at least one mismatch.
    pub failing_seeds: Vec<u64>,
}

pub struct SelftestReport {
    pub dp: SuiteReport,
    pub disjoint: SuiteReport,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.dp.failing_seeds.is_empty() && self.disjoint.failing_seeds.is_empty()
    }
}

/// DP vs enumeration over `cases` random fields with sides in
/// `1..=max_size` vertices. Every ordered pair u <= v in the grid gets a
/// value comparison, plus an argmax comparison when the enumerated maximizer
/// is unique. `inject_bug` swaps in a deliberately wrong kernel to prove the
/// harness detects it.
pub fn dp_suite(
    base_seed: u64,
    max_size: i64,
    cases: u64,
    inject_bug: bool,
) -> Result<SuiteReport> {
    if !(1..=MAX_ORACLE_SIZE).contains(&max_size) {
        return Err(Error::Config(format!(
            "selftest max_size must be in 1..={MAX_ORACLE_SIZE}, got {max_size}"
        )));
    }
    let mut report = SuiteReport {
        cases,
        comparisons: 0,
        failing_seeds: Vec::new(),
    };
    for case in 0..cases {
        let seed = trial_seed(base_seed, 0x0DCA_5E, max_size, case);
        let dims = trial_seed(seed, 0xD1_85, 0, 0);
        let w = 1 + (dims % max_size as u64) as i64;
        let h = 1 + ((dims >> 32) % max_size as u64) as i64;
        let region = Rect::new(0, 0, w - 1, h - 1)?;
        let field = sample_field(seed, region)?;
        let corner = pt(w - 1, h - 1);

        let mut ok = true;
        'pairs: for ux in 0..w {
            for uy in 0..h {
                let u = pt(ux, uy);
                let targets: Vec<_> = (ux..w)
                    .flat_map(|x| (uy..h).map(move |y| pt(x, y)))
                    .collect();
                let (vals, _) = forward_values(&field, u, corner, &targets)?;
                for (v, dp_val) in targets.iter().zip(vals) {
                    let dp_val = if inject_bug {
                        forward_value_mutated(&field, u, *v)?
                    } else {
                        dp_val
                    };
                    let reference = brute_force(&field, u, *v)?;
                    report.comparisons += 1;
                    let tol = DP_REL_TOL * reference.value.abs().max(1.0);
                    if (dp_val - reference.value).abs() > tol {
                        ok = false;
                        break 'pairs;
                    }
                    if reference.unique_argmax {
                        let g = geodesic(&field, u, *v)?;
                        if g.vertices != reference.path {
                            ok = false;
                            break 'pairs;
                        }
                    }
                }
            }
        }
        if !ok {
            report.failing_seeds.push(seed);
        }
    }
    Ok(report)
}

/// Frontier-sweep disjoint count vs exhaustive longest-chain search on small
/// random anti-diagonal segment pairs (spans <= 5, separations 4..=12).
pub fn disjoint_suite(base_seed: u64, cases: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport {
        cases,
        comparisons: 0,
        failing_seeds: Vec::new(),
    };
    for case in 0..cases {
        let seed = trial_seed(base_seed, 0xD15C, 0, case);
        let g = trial_seed(seed, 0x09E0, 0, 0);
        let n = 4 + (g % 9) as i64;
        let ha = ((g >> 16) % 3) as i64;
        let hb = ((g >> 32) % 3) as i64;
        let a = AntidiagSegment::new(pt(0, 0), ha)?;
        let b = AntidiagSegment::new(pt(n, n), hb)?;
        let weights = PointSampler::new(seed);
        let swept = max_disjoint_count(&weights, &a, &b)?;
        let exact = max_disjoint_exhaustive(&weights, &a, &b)?;
        report.comparisons += 1;
        if swept != exact {
            report.failing_seeds.push(seed);
        }
    }
    Ok(report)
}

pub fn run_selftest(max_size: i64, cases: u64, inject_bug: bool) -> Result<SelftestReport> {
    Ok(SelftestReport {
        dp: dp_suite(SELFTEST_SEED, max_size, cases, inject_bug)?,
        disjoint: disjoint_suite(SELFTEST_SEED, cases)?,
    })
}
