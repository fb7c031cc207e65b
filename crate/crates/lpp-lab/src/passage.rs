//! Exact last passage time computation.
//!
//! All kernels share one recursion. Writing `xi(p)` for the weight at `p`,
//! the passage time from a fixed source satisfies
//!
//! ```text
//! T(source) = 0
//! T(v) = max( T(v - e1) + xi(v - e1),  T(v - e2) + xi(v - e2) )
//! ```
//!
//! with the one-sided cases on the source row/column. A path's weight counts
//! every vertex except the last, so `T(u,v) + xi(v)`-free concatenation holds
//! exactly: `T(u,w) + T(w,v) = T(u,v)` iff `w` lies on an optimal path.
//!
//! Determinism: rows are scanned bottom to top, cells left to right, and
//! every path sum is accumulated in path order. Two runs over the same
//! weights produce bit-identical values. Ties in the max are broken toward
//! the below-predecessor and counted; with continuous weights they almost
//! surely never fire, so a nonzero count on sampled weights is itself a
//! diagnostic.

use std::collections::BTreeMap;

use crate::lattice::{pt, LatticePoint, Rect, WeightSource};
use crate::{Error, Result};

/// Cap on dense DP cells (stores 8 bytes/cell).
pub const MAX_DENSE_DP_CELLS: u64 = 1 << 27;
/// Cap on trace DP cells (stores 1 bit/cell plus two scan rows).
pub const MAX_TRACE_DP_CELLS: u64 = 1 << 33;

/// Predecessor direction of a cell in the DP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    FromLeft,
    FromBelow,
}

fn check_span(source: LatticePoint, corner: LatticePoint) -> Result<()> {
    if !source.leq(corner) {
        return Err(Error::Contract(format!(
            "DP corner {corner} not reachable from source {source}"
        )));
    }
    Ok(())
}

fn group_targets(
    source: LatticePoint,
    corner: LatticePoint,
    targets: &[LatticePoint],
) -> Result<BTreeMap<i64, Vec<(usize, i64)>>> {
    let mut by_row: BTreeMap<i64, Vec<(usize, i64)>> = BTreeMap::new();
    for (i, t) in targets.iter().enumerate() {
        if !(source.leq(*t) && t.leq(corner)) {
            return Err(Error::Contract(format!(
                "target {t} outside DP span [{source}, {corner}]"
            )));
        }
        by_row.entry(t.y).or_default().push((i, t.x));
    }
    Ok(by_row)
}

/// Streamed forward DP: passage times `T(source, t)` for each requested
/// target, plus the tie count. Memory is two rows regardless of height.
pub fn forward_values<W: WeightSource>(
    weights: &W,
    source: LatticePoint,
    corner: LatticePoint,
    targets: &[LatticePoint],
) -> Result<(Vec<f64>, u64)> {
    check_span(source, corner)?;
    let by_row = group_targets(source, corner, targets)?;
    let width = (corner.x - source.x + 1) as usize;
    let mut out = vec![f64::NAN; targets.len()];
    let mut ties = 0u64;
    let mut t_prev = vec![0.0f64; width];
    let mut t_cur = vec![0.0f64; width];
    let mut w_prev = vec![0.0f64; width];
    let mut w_cur = vec![0.0f64; width];
    for y in source.y..=corner.y {
        weights.fill_row(y, source.x, &mut w_cur);
        if y == source.y {
            t_cur[0] = 0.0;
            for i in 1..width {
                t_cur[i] = t_cur[i - 1] + w_cur[i - 1];
            }
        } else {
            t_cur[0] = t_prev[0] + w_prev[0];
            for i in 1..width {
                let left = t_cur[i - 1] + w_cur[i - 1];
                let below = t_prev[i] + w_prev[i];
                ties += (left == below) as u64;
                t_cur[i] = if left > below { left } else { below };
            }
        }
        if let Some(row) = by_row.get(&y) {
            for &(ti, x) in row {
                out[ti] = t_cur[(x - source.x) as usize];
            }
        }
        std::mem::swap(&mut t_prev, &mut t_cur);
        std::mem::swap(&mut w_prev, &mut w_cur);
    }
    Ok((out, ties))
}

/// Streamed backward DP: passage times `T(s, target)` for each requested
/// source at once. Recursion from the target,
/// `T(u, target) = xi(u) + max(T(u + e1, target), T(u + e2, target))`.
pub fn backward_values<W: WeightSource>(
    weights: &W,
    target: LatticePoint,
    lo_corner: LatticePoint,
    sources: &[LatticePoint],
) -> Result<(Vec<f64>, u64)> {
    check_span(lo_corner, target)?;
    let mut by_row: BTreeMap<i64, Vec<(usize, i64)>> = BTreeMap::new();
    for (i, s) in sources.iter().enumerate() {
        if !(lo_corner.leq(*s) && s.leq(target)) {
            return Err(Error::Contract(format!(
                "source {s} outside DP span [{lo_corner}, {target}]"
            )));
        }
        by_row.entry(s.y).or_default().push((i, s.x));
    }
    let width = (target.x - lo_corner.x + 1) as usize;
    let mut out = vec![f64::NAN; sources.len()];
    let mut ties = 0u64;
    let mut t_above = vec![0.0f64; width];
    let mut t_cur = vec![0.0f64; width];
    let mut w_cur = vec![0.0f64; width];
    for y in (lo_corner.y..=target.y).rev() {
        weights.fill_row(y, lo_corner.x, &mut w_cur);
        // Right to left within the row; each cell adds its own weight.
        for i in (0..width).rev() {
            if y == target.y {
                t_cur[i] = if i == width - 1 {
                    0.0
                } else {
                    w_cur[i] + t_cur[i + 1]
                };
            } else if i == width - 1 {
                t_cur[i] = w_cur[i] + t_above[i];
            } else {
                let up = t_above[i];
                let right = t_cur[i + 1];
                ties += (up == right) as u64;
                t_cur[i] = w_cur[i] + if right > up { right } else { up };
            }
        }
        if let Some(row) = by_row.get(&y) {
            for &(si, x) in row {
                out[si] = t_cur[(x - lo_corner.x) as usize];
            }
        }
        std::mem::swap(&mut t_above, &mut t_cur);
    }
    Ok((out, ties))
}

/// Forward DP that keeps one predecessor bit per cell so geodesics can be
/// traced, but streams the values (two rows). Bit set means the optimum came
/// from the left; ties take the below-predecessor.
pub struct TraceDp {
    source: LatticePoint,
    corner: LatticePoint,
    width: usize,
    bits: Vec<u64>,
    pub tie_count: u64,
}

impl TraceDp {
    /// Run the DP over `[source, corner]`, returning traceable predecessor
    /// bits and the values at `targets`.
    pub fn build<W: WeightSource>(
        weights: &W,
        source: LatticePoint,
        corner: LatticePoint,
        targets: &[LatticePoint],
    ) -> Result<(TraceDp, Vec<f64>)> {
        check_span(source, corner)?;
        let by_row = group_targets(source, corner, targets)?;
        let width = (corner.x - source.x + 1) as usize;
        let height = (corner.y - source.y + 1) as usize;
        let cells = (width as u64) * (height as u64);
        if cells > MAX_TRACE_DP_CELLS {
            return Err(Error::Capacity {
                what: "trace DP cells",
                needed: cells,
                budget: MAX_TRACE_DP_CELLS,
            });
        }
        let mut bits = vec![0u64; ((cells + 63) / 64) as usize];
        let mut out = vec![f64::NAN; targets.len()];
        let mut ties = 0u64;
        let mut t_prev = vec![0.0f64; width];
        let mut t_cur = vec![0.0f64; width];
        let mut w_prev = vec![0.0f64; width];
        let mut w_cur = vec![0.0f64; width];
        for y in source.y..=corner.y {
            let row = (y - source.y) as usize;
            let base = row * width;
            weights.fill_row(y, source.x, &mut w_cur);
            if y == source.y {
                t_cur[0] = 0.0;
                for i in 1..width {
                    t_cur[i] = t_cur[i - 1] + w_cur[i - 1];
                    let idx = base + i;
                    bits[idx >> 6] |= 1u64 << (idx & 63);
                }
            } else {
                t_cur[0] = t_prev[0] + w_prev[0];
                // Branch-free: the left-vs-below outcome is a coin flip on
                // random weights, so a branch here mispredicts every other
                // cell.
                for i in 1..width {
                    let left = t_cur[i - 1] + w_cur[i - 1];
                    let below = t_prev[i] + w_prev[i];
                    ties += (left == below) as u64;
                    t_cur[i] = if left > below { left } else { below };
                    let idx = base + i;
                    bits[idx >> 6] |= ((left > below) as u64) << (idx & 63);
                }
            }
            if let Some(rowts) = by_row.get(&y) {
                for &(ti, x) in rowts {
                    out[ti] = t_cur[(x - source.x) as usize];
                }
            }
            std::mem::swap(&mut t_prev, &mut t_cur);
            std::mem::swap(&mut w_prev, &mut w_cur);
        }
        Ok((
            TraceDp {
                source,
                corner,
                width,
                bits,
                tie_count: ties,
            },
            out,
        ))
    }

    pub fn source(&self) -> LatticePoint {
        self.source
    }

    fn step_back(&self, v: LatticePoint) -> Step {
        if v.y == self.source.y {
            return Step::FromLeft;
        }
        if v.x == self.source.x {
            return Step::FromBelow;
        }
        let idx =
            ((v.y - self.source.y) as usize) * self.width + ((v.x - self.source.x) as usize);
        if self.bits[idx >> 6] >> (idx & 63) & 1 == 1 {
            Step::FromLeft
        } else {
            Step::FromBelow
        }
    }

    /// Full geodesic from the source to `v`, in path order.
    pub fn trace(&self, v: LatticePoint) -> Result<Vec<LatticePoint>> {
        self.trace_from_level(v, i64::MIN)
    }

    /// Suffix of the geodesic to `v` covering levels `>= level_lo`, in path
    /// order. `level_lo <= source.level()` recovers the full geodesic.
    pub fn trace_from_level(&self, v: LatticePoint, level_lo: i64) -> Result<Vec<LatticePoint>> {
        let mut path = Vec::new();
        self.trace_into(v, level_lo, &mut path)?;
        Ok(path)
    }

    /// Allocation-free variant for hot loops: clears `buf` and fills it with
    /// the suffix in path order.
    pub(crate) fn trace_into(
        &self,
        v: LatticePoint,
        level_lo: i64,
        buf: &mut Vec<LatticePoint>,
    ) -> Result<()> {
        if !(self.source.leq(v) && v.leq(self.corner)) {
            return Err(Error::Contract(format!(
                "trace target {v} outside DP span"
            )));
        }
        buf.clear();
        let mut cur = v;
        loop {
            if cur.level() >= level_lo {
                buf.push(cur);
            }
            if cur == self.source || cur.level() < level_lo {
                break;
            }
            cur = match self.step_back(cur) {
                Step::FromLeft => pt(cur.x - 1, cur.y),
                Step::FromBelow => pt(cur.x, cur.y - 1),
            };
        }
        buf.reverse();
        Ok(())
    }
}

/// Dense passage-time field from one source: values and predecessor bits
/// over the rectangle spanned by the source and the region's top corner.
pub struct PassageField {
    pub source: LatticePoint,
    /// DP domain: `[source, region max corner]`.
    pub domain: Rect,
    t: Vec<f64>,
    trace: TraceDp,
}

/// Compute the dense passage-time field of `source` over `region`.
/// Values exist for every `v` in `region` with `source <= v`.
pub fn passage_field<W: WeightSource>(
    weights: &W,
    source: LatticePoint,
    region: Rect,
) -> Result<PassageField> {
    if !region.contains(source) {
        return Err(Error::Contract(format!(
            "source {source} outside region"
        )));
    }
    let domain = Rect::new(source.x, source.y, region.x1, region.y1)?;
    if domain.area() > MAX_DENSE_DP_CELLS {
        return Err(Error::Capacity {
            what: "dense DP cells",
            needed: domain.area(),
            budget: MAX_DENSE_DP_CELLS,
        });
    }
    let corner = domain.max_corner();
    // Row-major value matrix alongside the bit matrix; one extra pass of
    // the same recursion keeps the two in lockstep.
    let (trace, _) = TraceDp::build(weights, source, corner, &[])?;
    let width = domain.width() as usize;
    let mut t = Vec::with_capacity(domain.area() as usize);
    let mut t_prev = vec![0.0f64; width];
    let mut w_prev = vec![0.0f64; width];
    let mut w_cur = vec![0.0f64; width];
    for y in source.y..=corner.y {
        for (i, x) in (source.x..=corner.x).enumerate() {
            w_cur[i] = weights.weight(pt(x, y));
        }
        let base = t.len();
        if y == source.y {
            t.push(0.0);
            for i in 1..width {
                let v = t[base + i - 1] + w_cur[i - 1];
                t.push(v);
            }
        } else {
            t.push(t_prev[0] + w_prev[0]);
            for i in 1..width {
                let left = t[base + i - 1] + w_cur[i - 1];
                let below = t_prev[i] + w_prev[i];
                t.push(if left > below { left } else { below });
            }
        }
        t_prev.copy_from_slice(&t[base..base + width]);
        std::mem::swap(&mut w_prev, &mut w_cur);
    }
    Ok(PassageField {
        source,
        domain,
        t,
        trace,
    })
}

impl PassageField {
    /// `T(source, v)`, or `None` when `v` is not reachable in the domain.
    pub fn value(&self, v: LatticePoint) -> Option<f64> {
        if !self.domain.contains(v) {
            return None;
        }
        let i = ((v.y - self.domain.y0) as usize) * (self.domain.width() as usize)
            + ((v.x - self.domain.x0) as usize);
        Some(self.t[i])
    }

    /// Predecessor direction at `v`; `None` at the source or outside.
    pub fn backstep(&self, v: LatticePoint) -> Option<Step> {
        if !self.domain.contains(v) || v == self.source {
            return None;
        }
        Some(self.trace.step_back(v))
    }

    pub fn tie_count(&self) -> u64 {
        self.trace.tie_count
    }

    /// Geodesic from the source to `v`.
    pub fn trace(&self, v: LatticePoint) -> Result<Geodesic> {
        Geodesic::new(self.trace.trace(v)?)
    }
}

/// An up/right lattice path, stored as its full vertex sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Geodesic {
    pub vertices: Vec<LatticePoint>,
}

impl Geodesic {
    /// Validates unit up/right steps.
    pub fn new(vertices: Vec<LatticePoint>) -> Result<Geodesic> {
        if vertices.is_empty() {
            return Err(Error::Contract("empty path".into()));
        }
        for w in vertices.windows(2) {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            if !((dx == 1 && dy == 0) || (dx == 0 && dy == 1)) {
                return Err(Error::Contract(format!(
                    "non-unit step {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Geodesic { vertices })
    }

    pub fn source(&self) -> LatticePoint {
        self.vertices[0]
    }

    pub fn target(&self) -> LatticePoint {
        *self.vertices.last().unwrap()
    }
}

/// Weight of an explicit path: the sum of its vertex weights except the
/// last vertex, accumulated in path order.
pub fn path_weight<W: WeightSource>(weights: &W, path: &[LatticePoint]) -> Result<f64> {
    let g = Geodesic::new(path.to_vec())?;
    let mut sum = 0.0;
    for v in &g.vertices[..g.vertices.len() - 1] {
        sum += weights.weight(*v);
    }
    Ok(sum)
}

/// The almost surely unique maximizing path from `u` to `v`.
pub fn geodesic<W: WeightSource>(weights: &W, u: LatticePoint, v: LatticePoint) -> Result<Geodesic> {
    if !u.leq(v) {
        return Err(Error::Contract(format!("{v} not reachable from {u}")));
    }
    let (dp, _) = TraceDp::build(weights, u, v, &[])?;
    Geodesic::new(dp.trace(v)?)
}

/// Result of exhaustive path enumeration.
pub struct BruteForceResult {
    pub value: f64,
    pub path: Vec<LatticePoint>,
    /// True when exactly one path attains the maximum (exact f64 compare).
    pub unique_argmax: bool,
}

/// Maximum number of steps `(dx + dy)` the enumeration oracle accepts.
pub const BRUTE_FORCE_MAX_STEPS: i64 = 26;

/// Independent oracle: enumerate every up/right path from `u` to `v` and
/// take the maximum path weight directly.
pub fn brute_force<W: WeightSource>(
    weights: &W,
    u: LatticePoint,
    v: LatticePoint,
) -> Result<BruteForceResult> {
    if !u.leq(v) {
        return Err(Error::Contract(format!("{v} not reachable from {u}")));
    }
    let steps = (v.x - u.x) + (v.y - u.y);
    if steps > BRUTE_FORCE_MAX_STEPS {
        return Err(Error::Capacity {
            what: "brute force steps",
            needed: steps as u64,
            budget: BRUTE_FORCE_MAX_STEPS as u64,
        });
    }
    struct Dfs<'a, W: WeightSource> {
        weights: &'a W,
        v: LatticePoint,
        path: Vec<LatticePoint>,
        best: f64,
        best_path: Vec<LatticePoint>,
        unique: bool,
    }
    impl<W: WeightSource> Dfs<'_, W> {
        fn go(&mut self, cur: LatticePoint, sum: f64) {
            if cur == self.v {
                if sum > self.best {
                    self.best = sum;
                    self.best_path = self.path.clone();
                    self.best_path.push(cur);
                    self.unique = true;
                } else if sum == self.best {
                    self.unique = false;
                }
                return;
            }
            let s2 = sum + self.weights.weight(cur);
            self.path.push(cur);
            if cur.x < self.v.x {
                self.go(pt(cur.x + 1, cur.y), s2);
            }
            if cur.y < self.v.y {
                self.go(pt(cur.x, cur.y + 1), s2);
            }
            self.path.pop();
        }
    }
    let mut dfs = Dfs {
        weights,
        v,
        path: Vec::new(),
        best: f64::NEG_INFINITY,
        best_path: Vec::new(),
        unique: false,
    };
    dfs.go(u, 0.0);
    Ok(BruteForceResult {
        value: dfs.best,
        path: dfs.best_path,
        unique_argmax: dfs.unique,
    })
}

// ---------------------------------------------------------------------------
// Stage-constrained best path
// ---------------------------------------------------------------------------

use crate::lattice::AntidiagSegment;

/// A waypoint grid: `stages + 1` anti-diagonal stage lines between the start
/// and end segments, each line cut into cells of width `n^(2/3) / m` (in
/// anti-diagonal offset units) around the straight start-to-end chord.
/// Cell `j` on a line covers offsets `[lo + b(j), lo + b(j+1))` with
/// `b(j) = 2 * floor(j * n^(2/3) / m)` relative to the chord.
#[derive(Clone, Debug)]
pub struct StageGrid {
    pub start: AntidiagSegment,
    pub end: AntidiagSegment,
    /// Number of stage gaps `h`; `h = 0` means endpoints only, unconstrained.
    pub stages: usize,
    /// Cells per `n^(2/3)` of width (`m`).
    pub cells_per_unit: i64,
    /// Encoding indices live in `[-max_cell, max_cell)`.
    pub max_cell: i64,
    n23: f64,
    levels: Vec<i64>,
    centers: Vec<i64>,
}

impl StageGrid {
    /// Build the grid for scale `n`. `width_mult` is the half-width of the
    /// gridded corridor in units of `n^(2/3)` (its floor times `m` gives the
    /// cell index range).
    pub fn new(
        n: i64,
        stages: usize,
        cells_per_unit: i64,
        width_mult: f64,
        start: AntidiagSegment,
        end: AntidiagSegment,
    ) -> Result<StageGrid> {
        if n < 1 || cells_per_unit < 1 {
            return Err(Error::Contract(format!(
                "bad grid parameters n={n}, m={cells_per_unit}"
            )));
        }
        if !(width_mult >= 1.0) {
            return Err(Error::Contract(format!(
                "corridor width multiplier {width_mult} below 1"
            )));
        }
        let s_a = start.level();
        let s_b = end.level();
        if s_b <= s_a {
            return Err(Error::Contract(
                "end segment not strictly after start segment".into(),
            ));
        }
        let n23 = ((n as f64) * (n as f64)).cbrt();
        // Cell boundaries 2*floor(j*n23/m) are strictly increasing only for
        // n23/m >= 1; narrower cells would be empty.
        if n23 < cells_per_unit as f64 {
            return Err(Error::Contract(format!(
                "cell width below one lattice step (n={n}, m={cells_per_unit})"
            )));
        }
        let max_cell = (width_mult.floor() as i64) * cells_per_unit;
        let d_a = start.center.diag_offset();
        let d_b = end.center.diag_offset();
        let count = if stages == 0 { 2 } else { stages + 1 };
        let mut levels = Vec::with_capacity(count);
        let mut centers = Vec::with_capacity(count);
        let last = if stages == 0 { 1 } else { stages };
        for i in 0..=last {
            let frac = i as f64 / last as f64;
            let mut s = s_a + ((s_b - s_a) as f64 * frac).round() as i64;
            if i == 0 {
                s = s_a;
            }
            if i == last {
                s = s_b;
            }
            let c_real = d_a as f64 + (d_b - d_a) as f64 * ((s - s_a) as f64 / (s_b - s_a) as f64);
            // Offset parity must match the line parity for lattice points;
            // round down so a centered diagonal path stays in cell 0.
            let mut c = c_real.round() as i64;
            if (c - s).rem_euclid(2) != 0 {
                c -= 1;
            }
            levels.push(s);
            centers.push(c);
        }
        Ok(StageGrid {
            start,
            end,
            stages,
            cells_per_unit,
            max_cell,
            n23,
            levels,
            centers,
        })
    }

    /// Stage line count, including both endpoint lines.
    pub fn line_count(&self) -> usize {
        self.levels.len()
    }

    /// Anti-diagonal level of stage line `i`.
    pub fn level(&self, i: usize) -> i64 {
        self.levels[i]
    }

    /// Offset boundary of cell index `j`, relative to the chord center, in
    /// `d = y - x` units.
    fn boundary(&self, j: i64) -> i64 {
        2 * ((j as f64) * self.n23 / (self.cells_per_unit as f64)).floor() as i64
    }

    /// Lattice points of cell `j` on stage line `i` (unfiltered corridor
    /// cell; endpoint lines additionally intersect with the segments).
    pub fn cell_points(&self, i: usize, j: i64) -> Vec<LatticePoint> {
        let s = self.levels[i];
        let c = self.centers[i];
        let lo = c + self.boundary(j);
        let hi = c + self.boundary(j + 1);
        let mut d = lo;
        // First d >= lo with d = s (mod 2).
        if (d - s).rem_euclid(2) != 0 {
            d += 1;
        }
        let mut out = Vec::new();
        while d < hi {
            out.push(pt((s - d) / 2, (s + d) / 2));
            d += 2;
        }
        out
    }

    /// Cell index containing offset `d` on stage line `i`, or `None` when it
    /// falls outside the corridor `[-max_cell, max_cell)`.
    pub fn cell_of(&self, i: usize, d: i64) -> Option<i64> {
        let rel = d - self.centers[i];
        // Invert the floor boundary by a guarded local search around the
        // continuous estimate.
        let guess =
            ((rel as f64) * (self.cells_per_unit as f64) / (2.0 * self.n23)).floor() as i64;
        for j in (guess - 2)..=(guess + 2) {
            if self.boundary(j) <= rel && rel < self.boundary(j + 1) {
                if j < -self.max_cell || j >= self.max_cell {
                    return None;
                }
                return Some(j);
            }
        }
        None
    }
}

/// A cell-index sequence through a stage grid, one index per stage line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridEncoding {
    /// Stage gap count `h`.
    pub stages: usize,
    /// Cells per width unit `m`.
    pub cells_per_unit: i64,
    /// Cell index per stage line; length `h + 1` (length 1 when `h = 0`).
    pub j: Vec<i64>,
}

impl GridEncoding {
    pub fn new(stages: usize, cells_per_unit: i64, j: Vec<i64>) -> Result<GridEncoding> {
        let want = if stages == 0 { 1 } else { stages + 1 };
        if j.len() != want {
            return Err(Error::Contract(format!(
                "encoding length {} for {} stage gaps",
                j.len(),
                stages
            )));
        }
        Ok(GridEncoding {
            stages,
            cells_per_unit,
            j,
        })
    }

    /// The all-zero (central corridor) encoding.
    pub fn central(stages: usize, cells_per_unit: i64) -> GridEncoding {
        let len = if stages == 0 { 1 } else { stages + 1 };
        GridEncoding {
            stages,
            cells_per_unit,
            j: vec![0; len],
        }
    }
}

/// Outcome of the constrained optimization: the best value, or a marker that
/// no path visits the requested cell sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constrained {
    Value(f64),
    Infeasible,
}

impl Constrained {
    pub fn value(self) -> Option<f64> {
        match self {
            Constrained::Value(v) => Some(v),
            Constrained::Infeasible => None,
        }
    }
}

/// Best weight over paths from the start segment to the end segment that
/// pass through the encoded cell on every stage line. Returns the
/// infeasibility marker (not an error) when some cell is empty or no
/// ordered pair of waypoints connects two consecutive stages.
pub fn constrained_best<W: WeightSource>(
    weights: &W,
    grid: &StageGrid,
    enc: &GridEncoding,
) -> Result<Constrained> {
    if enc.stages != grid.stages || enc.cells_per_unit != grid.cells_per_unit {
        return Err(Error::Contract(
            "encoding shape does not match grid".into(),
        ));
    }
    for &j in &enc.j {
        if j < -grid.max_cell || j >= grid.max_cell {
            return Err(Error::Contract(format!(
                "cell index {j} outside corridor [{}, {})",
                -grid.max_cell, grid.max_cell
            )));
        }
    }
    // Waypoint sets per stage line.
    let line_count = grid.line_count();
    let mut stage_pts: Vec<Vec<LatticePoint>> = Vec::with_capacity(line_count);
    for i in 0..line_count {
        let pts = if grid.stages == 0 {
            // Endpoints only: the single cell is the whole segment.
            if i == 0 {
                grid.start.points()
            } else {
                grid.end.points()
            }
        } else {
            let mut cell = grid.cell_points(i, enc.j[i]);
            if i == 0 {
                cell.retain(|p| grid.start.contains(*p));
            } else if i == line_count - 1 {
                cell.retain(|p| grid.end.contains(*p));
            }
            cell
        };
        if pts.is_empty() {
            return Ok(Constrained::Infeasible);
        }
        stage_pts.push(pts);
    }
    let mut vals = vec![0.0f64; stage_pts[0].len()];
    for i in 0..line_count - 1 {
        let cur = &stage_pts[i];
        let next = &stage_pts[i + 1];
        let mut next_vals = vec![f64::NEG_INFINITY; next.len()];
        for (wi, &w) in cur.iter().enumerate() {
            if vals[wi] == f64::NEG_INFINITY {
                continue;
            }
            let reachable: Vec<(usize, LatticePoint)> = next
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, q)| w.leq(*q))
                .collect();
            if reachable.is_empty() {
                continue;
            }
            let corner = pt(
                reachable.iter().map(|(_, q)| q.x).max().unwrap(),
                reachable.iter().map(|(_, q)| q.y).max().unwrap(),
            );
            let targets: Vec<LatticePoint> = reachable.iter().map(|&(_, q)| q).collect();
            let (tvals, _) = forward_values(weights, w, corner, &targets)?;
            for ((qi, _), tv) in reachable.iter().zip(tvals) {
                let cand = vals[wi] + tv;
                if cand > next_vals[*qi] {
                    next_vals[*qi] = cand;
                }
            }
        }
        if next_vals.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Ok(Constrained::Infeasible);
        }
        vals = next_vals;
    }
    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Constrained::Value(best))
}

/// Deliberately wrong forward kernel used only by the self-test harness to
/// prove the oracle comparison can fail: it drops the source vertex weight
/// from every path.
#[doc(hidden)]
pub fn forward_value_mutated<W: WeightSource>(
    weights: &W,
    source: LatticePoint,
    target: LatticePoint,
) -> Result<f64> {
    let (vals, _) = forward_values(weights, source, target, &[target])?;
    if source == target {
        return Ok(vals[0]);
    }
    Ok(vals[0] - weights.weight(source))
}
