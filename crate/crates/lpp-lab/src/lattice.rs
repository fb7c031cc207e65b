//! Lattice geometry and the seeded weight field.
//!
//! Coordinates are `i64` throughout; all containment and ordering tests are
//! exact integer arithmetic. Anti-diagonal lines are indexed by their level
//! `s = x + y`. A point's signed offset along an anti-diagonal is measured by
//! `d = y - x`, which increases in the `(-1, 1)` direction.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A vertex of Z^2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

/// Shorthand constructor.
pub const fn pt(x: i64, y: i64) -> LatticePoint {
    LatticePoint { x, y }
}

impl LatticePoint {
    /// Coordinatewise partial order: `self <= other` in both coordinates.
    /// This is the reachability order for up/right paths.
    pub fn leq(self, other: LatticePoint) -> bool {
        self.x <= other.x && self.y <= other.y
    }

    /// Anti-diagonal level `x + y`.
    pub fn level(self) -> i64 {
        self.x + self.y
    }

    /// Signed offset `y - x` within an anti-diagonal.
    pub fn diag_offset(self) -> i64 {
        self.y - self.x
    }
}

impl std::ops::Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: LatticePoint) -> LatticePoint {
        pt(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Largest integer `k >= 0` with `k^3 <= n^2`, i.e. `floor(n^(2/3))` computed
/// exactly in integers. Floating-point `powf` can round `8^(2/3)` below 4;
/// scale cutoffs must not wobble like that.
pub fn floor_npow23(n: i64) -> i64 {
    assert!(n >= 0, "floor_npow23 needs n >= 0");
    let n2 = (n as i128) * (n as i128);
    let (mut lo, mut hi) = (0i128, 1i128 << 43);
    // Invariant: lo^3 <= n2 < hi^3 (n <= 2^63 so n2 < 2^126 <= (2^43)^3).
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if mid * mid * mid <= n2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo as i64
}

/// `floor(w * n^(2/3))` for a configurable width factor. The `w == 1.0` case
/// is delegated to the exact integer routine; other factors go through f64,
/// which is as good as the factor itself.
pub fn scaled_npow23(n: i64, width_factor: f64) -> i64 {
    if width_factor == 1.0 {
        floor_npow23(n)
    } else {
        let v = width_factor * ((n as f64) * (n as f64)).cbrt();
        v.floor() as i64
    }
}

/// Inclusive axis-aligned rectangle of lattice points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Rect> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::Contract(format!(
                "empty rectangle [{x0},{x1}]x[{y0},{y1}]"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    /// Smallest rectangle containing both corners.
    pub fn spanning(a: LatticePoint, b: LatticePoint) -> Rect {
        Rect {
            x0: a.x.min(b.x),
            y0: a.y.min(b.y),
            x1: a.x.max(b.x),
            y1: a.y.max(b.y),
        }
    }

    /// Smallest rectangle containing both rectangles.
    pub fn hull(self, other: Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn width(&self) -> i64 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> u64 {
        (self.width() as u64) * (self.height() as u64)
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    pub fn min_corner(&self) -> LatticePoint {
        pt(self.x0, self.y0)
    }

    pub fn max_corner(&self) -> LatticePoint {
        pt(self.x1, self.y1)
    }

    fn index_of(&self, p: LatticePoint) -> usize {
        debug_assert!(self.contains(p));
        ((p.y - self.y0) as usize) * (self.width() as usize) + ((p.x - self.x0) as usize)
    }
}

/// A segment of consecutive points on one anti-diagonal, ordered in the
/// `(-1, 1)` direction. Point `i`, for `i` in `[-half_span, half_span]`, is
/// `center + i * (-1, 1)`; all points share the level `center.x + center.y`.
///
/// Every pair of distinct points on one anti-diagonal is incomparable under
/// `leq`, so a segment is an antichain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntidiagSegment {
    pub center: LatticePoint,
    pub half_span: i64,
}

impl AntidiagSegment {
    pub fn new(center: LatticePoint, half_span: i64) -> Result<AntidiagSegment> {
        if half_span < 0 {
            return Err(Error::Contract(format!(
                "negative half_span {half_span}"
            )));
        }
        Ok(AntidiagSegment { center, half_span })
    }

    /// Number of points, `2 * half_span + 1`.
    pub fn len(&self) -> usize {
        (2 * self.half_span + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Point at signed index `i` in `[-half_span, half_span]`.
    pub fn point(&self, i: i64) -> LatticePoint {
        debug_assert!(i.abs() <= self.half_span);
        pt(self.center.x - i, self.center.y + i)
    }

    /// All points in segment order (lowest `d = y - x` first).
    pub fn points(&self) -> Vec<LatticePoint> {
        (-self.half_span..=self.half_span)
            .map(|i| self.point(i))
            .collect()
    }

    /// Anti-diagonal level shared by all points.
    pub fn level(&self) -> i64 {
        self.center.level()
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        p.level() == self.level() && (p.diag_offset() - self.center.diag_offset()).abs() <= 2 * self.half_span
            && (p.diag_offset() - self.center.diag_offset()) % 2 == 0
    }

    pub fn bounding_rect(&self) -> Rect {
        Rect::spanning(self.point(-self.half_span), self.point(self.half_span))
    }
}

/// The standard scale-`n` anti-diagonal segment: centered at `center`,
/// half-span `floor(width_factor * n^(2/3))`.
pub fn antidiag_segment(n: i64, center: LatticePoint, width_factor: f64) -> Result<AntidiagSegment> {
    if n < 1 {
        return Err(Error::Contract(format!("segment scale n = {n} < 1")));
    }
    if !(width_factor > 0.0) {
        return Err(Error::Contract(format!(
            "width_factor {width_factor} must be positive"
        )));
    }
    AntidiagSegment::new(center, scaled_npow23(n, width_factor))
}

/// Axis direction of a straight lattice segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// A segment of consecutive points along one axis, `start + i * dir` for
/// `i` in `[0, len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisSegment {
    pub start: LatticePoint,
    pub axis: Axis,
    pub len: i64,
}

impl AxisSegment {
    pub fn new(start: LatticePoint, axis: Axis, len: i64) -> Result<AxisSegment> {
        if len < 1 {
            return Err(Error::Contract(format!("axis segment len {len} < 1")));
        }
        Ok(AxisSegment { start, axis, len })
    }

    pub fn point(&self, i: i64) -> LatticePoint {
        debug_assert!(0 <= i && i < self.len);
        match self.axis {
            Axis::Horizontal => pt(self.start.x + i, self.start.y),
            Axis::Vertical => pt(self.start.x, self.start.y + i),
        }
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    pub fn bounding_rect(&self) -> Rect {
        Rect::spanning(self.point(0), self.point(self.len - 1))
    }
}

/// A base segment for a parallelogram: either anti-diagonal or axis-aligned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseSegment {
    Antidiag(AntidiagSegment),
    Axis(AxisSegment),
}

impl BaseSegment {
    pub fn endpoints(&self) -> (LatticePoint, LatticePoint) {
        match self {
            BaseSegment::Antidiag(s) => (s.point(-s.half_span), s.point(s.half_span)),
            BaseSegment::Axis(s) => (s.point(0), s.point(s.len - 1)),
        }
    }

    pub fn points(&self) -> Vec<LatticePoint> {
        match self {
            BaseSegment::Antidiag(s) => s.points(),
            BaseSegment::Axis(s) => s.points(),
        }
    }
}

/// A parallelogram region of lattice points: the base segment swept along a
/// displacement vector. Containment is exact (integer cross products on the
/// four bounding half-planes).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelogramRegion {
    pub base: BaseSegment,
    pub displacement: LatticePoint,
}

fn cross(o: LatticePoint, a: LatticePoint, b: LatticePoint) -> i64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ParallelogramRegion {
    pub fn new(base: BaseSegment, displacement: LatticePoint) -> Result<ParallelogramRegion> {
        if displacement.x == 0 && displacement.y == 0 {
            return Err(Error::Contract("zero displacement".into()));
        }
        Ok(ParallelogramRegion { base, displacement })
    }

    /// Corner cycle (base end A, base end B, B + disp, A + disp).
    pub fn corners(&self) -> [LatticePoint; 4] {
        let (a, b) = self.base.endpoints();
        [a, b, b + self.displacement, a + self.displacement]
    }

    /// Slope of the displacement as an exact rational `(dy, dx)`.
    pub fn slope(&self) -> (i64, i64) {
        (self.displacement.y, self.displacement.x)
    }

    /// Exact membership: `p` lies inside or on the boundary.
    pub fn contains(&self, p: LatticePoint) -> bool {
        let c = self.corners();
        // Corner order may wind either way; test against the actual winding.
        let mut pos = false;
        let mut neg = false;
        for i in 0..4 {
            let s = cross(c[i], c[(i + 1) % 4], p);
            if s > 0 {
                pos = true;
            }
            if s < 0 {
                neg = true;
            }
        }
        !(pos && neg)
    }

    pub fn bounding_rect(&self) -> Rect {
        let c = self.corners();
        let mut r = Rect::spanning(c[0], c[1]);
        r = r.hull(Rect::spanning(c[2], c[3]));
        r
    }
}

// ---------------------------------------------------------------------------
// Seeded weights
// ---------------------------------------------------------------------------

/// 64-bit finalizer with full avalanche (splitmix64's mixing function).
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit hash of `(seed, x, y)`. Each coordinate is folded in
/// with its own odd multiplier and re-mixed, so single-coordinate increments
/// decorrelate fully.
#[inline]
fn point_key(seed: u64, x: i64, y: i64) -> u64 {
    let mut h = mix64(seed ^ 0x9E37_79B9_7F4A_7C15);
    h = mix64(h ^ (x as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    h = mix64(h ^ (y as u64).wrapping_mul(0x9FB2_1C65_1E98_DF25));
    h
}

/// Map a 64-bit hash to Exp(1) by inverse transform on the open unit
/// interval. `u = (h >> 11 + 0.5) * 2^-53` never hits 0 or 1, so the weight
/// is strictly positive and finite.
#[inline]
fn exp1_from_key(h: u64) -> f64 {
    let u = ((h >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0);
    -u.ln()
}

/// Source of vertex weights. The two implementations (dense field, lazy
/// sampler) agree bit for bit on every vertex for equal seeds.
pub trait WeightSource: Sync {
    fn weight(&self, p: LatticePoint) -> f64;

    /// Fill `buf[i] = weight((x0 + i, y))` for one row. Dense sources
    /// override this with a bulk copy; the default recomputes per point.
    fn fill_row(&self, y: i64, x0: i64, buf: &mut [f64]) {
        for (i, w) in buf.iter_mut().enumerate() {
            *w = self.weight(pt(x0 + i as i64, y));
        }
    }
}

/// Lazy weight source: recomputes the hash on every lookup, O(1) memory.
#[derive(Clone, Copy, Debug)]
pub struct PointSampler {
    pub seed: u64,
}

impl PointSampler {
    pub fn new(seed: u64) -> PointSampler {
        PointSampler { seed }
    }
}

impl WeightSource for PointSampler {
    #[inline]
    fn weight(&self, p: LatticePoint) -> f64 {
        exp1_from_key(point_key(self.seed, p.x, p.y))
    }
}

/// Dense materialized weight field over a rectangle, row-major from the
/// minimum corner.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub seed: u64,
    pub region: Rect,
    weights: Vec<f64>,
}

/// Default cap on materialized field cells (1 GiB of f64).
pub const DEFAULT_MAX_FIELD_CELLS: u64 = 1 << 27;

/// Sample a dense field with the default memory budget.
pub fn sample_field(seed: u64, region: Rect) -> Result<WeightField> {
    sample_field_with_budget(seed, region, DEFAULT_MAX_FIELD_CELLS)
}

/// Sample a dense field, refusing regions beyond `max_cells`.
pub fn sample_field_with_budget(seed: u64, region: Rect, max_cells: u64) -> Result<WeightField> {
    if region.area() > max_cells {
        return Err(Error::Capacity {
            what: "weight field cells",
            needed: region.area(),
            budget: max_cells,
        });
    }
    let sampler = PointSampler::new(seed);
    let mut weights = Vec::with_capacity(region.area() as usize);
    for y in region.y0..=region.y1 {
        for x in region.x0..=region.x1 {
            weights.push(sampler.weight(pt(x, y)));
        }
    }
    Ok(WeightField {
        seed,
        region,
        weights,
    })
}

impl WeightField {
    /// Build a field from explicit rows (row 0 = minimum y). Test scaffolding
    /// for hand-constructed landscapes; `seed` is recorded as 0.
    pub fn from_rows(region: Rect, rows: &[Vec<f64>]) -> Result<WeightField> {
        if rows.len() != region.height() as usize
            || rows.iter().any(|r| r.len() != region.width() as usize)
        {
            return Err(Error::Contract(
                "row data does not match region dimensions".into(),
            ));
        }
        let mut weights = Vec::with_capacity(region.area() as usize);
        for row in rows {
            weights.extend_from_slice(row);
        }
        Ok(WeightField {
            seed: 0,
            region,
            weights,
        })
    }

    pub fn region(&self) -> Rect {
        self.region
    }
}

impl WeightSource for WeightField {
    #[inline]
    fn weight(&self, p: LatticePoint) -> f64 {
        assert!(
            self.region.contains(p),
            "weight lookup outside field region: {p}"
        );
        self.weights[self.region.index_of(p)]
    }

    fn fill_row(&self, y: i64, x0: i64, buf: &mut [f64]) {
        if buf.is_empty() {
            return;
        }
        let x1 = x0 + buf.len() as i64 - 1;
        assert!(
            self.region.contains(pt(x0, y)) && self.region.contains(pt(x1, y)),
            "weight row outside field region: y={y} x={x0}..={x1}"
        );
        let lo = self.region.index_of(pt(x0, y));
        buf.copy_from_slice(&self.weights[lo..lo + buf.len()]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partial_order_basics() {
        assert!(pt(0, 0).leq(pt(3, 5)));
        assert!(pt(2, 2).leq(pt(2, 2)));
        assert!(!pt(1, 0).leq(pt(0, 1)));
        assert!(!pt(0, 1).leq(pt(1, 0)));
    }

    #[test]
    fn npow23_exact_values() {
        // 8^(2/3) = 4 exactly; f64 powf may land just below 4.
        assert_eq!(floor_npow23(8), 4);
        assert_eq!(floor_npow23(1), 1);
        assert_eq!(floor_npow23(0), 0);
        assert_eq!(floor_npow23(1000), 100);
        assert_eq!(floor_npow23(27), 9);
        assert_eq!(floor_npow23(26), 8);
        // Brute check against integer cube condition over a range.
        for n in 0..2000i64 {
            let k = floor_npow23(n);
            let n2 = (n as i128) * (n as i128);
            assert!((k as i128).pow(3) <= n2);
            assert!(((k + 1) as i128).pow(3) > n2);
        }
    }

    #[test]
    fn segment_points_and_order() {
        let seg = antidiag_segment(8, pt(0, 0), 1.0).unwrap();
        assert_eq!(seg.half_span, 4);
        assert_eq!(seg.len(), 9);
        assert_eq!(seg.point(-4), pt(4, -4));
        assert_eq!(seg.point(0), pt(0, 0));
        assert_eq!(seg.point(4), pt(-4, 4));
        let pts = seg.points();
        assert_eq!(pts.len(), 9);
        // Common level, strictly increasing diag offset.
        for w in pts.windows(2) {
            assert_eq!(w[0].level(), w[1].level());
            assert!(w[0].diag_offset() < w[1].diag_offset());
        }
        // Antichain: no two distinct points comparable.
        for a in &pts {
            for b in &pts {
                if a != b {
                    assert!(!a.leq(*b) && !b.leq(*a));
                }
            }
        }
    }

    #[test]
    fn segment_membership() {
        let seg = AntidiagSegment::new(pt(3, 3), 2).unwrap();
        assert!(seg.contains(pt(3, 3)));
        assert!(seg.contains(pt(1, 5)));
        assert!(seg.contains(pt(5, 1)));
        assert!(!seg.contains(pt(0, 6)));
        assert!(!seg.contains(pt(3, 4)));
    }

    #[test]
    fn parallelogram_contains_matches_corner_sweep() {
        let base = BaseSegment::Antidiag(AntidiagSegment::new(pt(0, 0), 2).unwrap());
        let region = ParallelogramRegion::new(base, pt(5, 3)).unwrap();
        // Every swept base point is inside.
        for i in -2..=2 {
            let b = AntidiagSegment::new(pt(0, 0), 2).unwrap().point(i);
            assert!(region.contains(b));
            assert!(region.contains(b + pt(5, 3)));
        }
        assert!(region.contains(pt(2, 1)));
        assert!(!region.contains(pt(-3, 3)));
        assert!(!region.contains(pt(6, 0)));
        assert_eq!(region.slope(), (3, 5));
    }

    #[test]
    fn parallelogram_axis_base() {
        let base = BaseSegment::Axis(AxisSegment::new(pt(0, 0), Axis::Vertical, 4).unwrap());
        let region = ParallelogramRegion::new(base, pt(6, 2)).unwrap();
        assert!(region.contains(pt(0, 3)));
        assert!(region.contains(pt(6, 5)));
        assert!(region.contains(pt(3, 2)));
        assert!(!region.contains(pt(0, 4)));
        assert!(!region.contains(pt(3, 0)));
    }

    #[test]
    fn field_matches_sampler_and_is_deterministic() {
        let region = Rect::new(-7, -3, 12, 9).unwrap();
        let f1 = sample_field(0xFEED_5EED, region).unwrap();
        let f2 = sample_field(0xFEED_5EED, region).unwrap();
        let lazy = PointSampler::new(0xFEED_5EED);
        for y in region.y0..=region.y1 {
            for x in region.x0..=region.x1 {
                let p = pt(x, y);
                assert_eq!(f1.weight(p).to_bits(), f2.weight(p).to_bits());
                assert_eq!(f1.weight(p).to_bits(), lazy.weight(p).to_bits());
                assert!(f1.weight(p) > 0.0);
                assert!(f1.weight(p).is_finite());
            }
        }
    }

    #[test]
    fn subregion_resample_is_identical() {
        let region = Rect::new(0, 0, 40, 40).unwrap();
        let big = sample_field(99, region).unwrap();
        let mut s = 1234u64;
        for _ in 0..100 {
            s = mix64(s.wrapping_add(1));
            let x0 = (s % 30) as i64;
            let y0 = ((s >> 8) % 30) as i64;
            let x1 = x0 + ((s >> 16) % 10) as i64;
            let y1 = y0 + ((s >> 24) % 10) as i64;
            let sub = Rect::new(x0, y0, x1, y1).unwrap();
            let small = sample_field(99, sub).unwrap();
            for y in sub.y0..=sub.y1 {
                for x in sub.x0..=sub.x1 {
                    assert_eq!(small.weight(pt(x, y)).to_bits(), big.weight(pt(x, y)).to_bits());
                }
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let region = Rect::new(0, 0, 999, 999).unwrap();
        let err = sample_field_with_budget(1, region, 1000).unwrap_err();
        match err {
            Error::Capacity { needed, budget, .. } => {
                assert_eq!(needed, 1_000_000);
                assert_eq!(budget, 1000);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn weight_distribution_is_exp1() {
        // Frozen seed; thresholds sized for n = 1e5 (KS) and 1e6 (mean/tail).
        let sampler = PointSampler::new(20260816);
        let n_big = 1_000_000i64;
        let mut sum = 0.0f64;
        let mut tail = 0u64;
        for i in 0..n_big {
            let w = sampler.weight(pt(i % 1000, i / 1000));
            sum += w;
            if w > 1.0 {
                tail += 1;
            }
        }
        let mean = sum / n_big as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let tail_frac = tail as f64 / n_big as f64;
        assert!(
            (tail_frac - (-1.0f64).exp()).abs() < 0.002,
            "tail {tail_frac}"
        );

        // KS distance against 1 - e^-t on 1e5 draws.
        let mut xs: Vec<f64> = (0..100_000)
            .map(|i| sampler.weight(pt(i % 317, 5000 + i / 317)))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = xs.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let f = 1.0 - (-x).exp();
            d = d.max((f - i as f64 / m).abs());
            d = d.max(((i + 1) as f64 / m - f).abs());
        }
        assert!(d < 0.01, "ks {d}");
    }

    #[test]
    fn no_two_weights_equal_in_a_million() {
        let sampler = PointSampler::new(7);
        let mut xs: Vec<f64> = (0..1_000_000)
            .map(|i| sampler.weight(pt(i % 1000, i / 1000)))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in xs.windows(2) {
            assert!(w[0] < w[1], "duplicate weight {}", w[0]);
        }
    }

    proptest! {
        #[test]
        fn order_is_transitive_and_antisymmetric(
            ax in -50i64..50, ay in -50i64..50,
            bx in -50i64..50, by in -50i64..50,
            cx in -50i64..50, cy in -50i64..50,
        ) {
            let (a, b, c) = (pt(ax, ay), pt(bx, by), pt(cx, cy));
            if a.leq(b) && b.leq(c) {
                prop_assert!(a.leq(c));
            }
            if a.leq(b) && b.leq(a) {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn scaled_half_span_monotone_in_n(n in 1i64..5000) {
            prop_assert!(scaled_npow23(n, 1.0) <= scaled_npow23(n + 1, 1.0));
            let k = scaled_npow23(n, 0.5);
            prop_assert!(k >= 0);
            prop_assert!(k <= scaled_npow23(n, 1.5));
        }

        #[test]
        fn parallelogram_membership_is_exact_on_grid(dx in 1i64..9, dy in 0i64..9, hs in 0i64..4) {
            // Compare against rasterization by sweeping the base along the
            // displacement in fine rational steps is overkill; instead verify
            // corners and segment sweeps are inside and far points are not.
            let seg = AntidiagSegment::new(pt(0, 0), hs).unwrap();
            let region = ParallelogramRegion::new(BaseSegment::Antidiag(seg), pt(dx, dy)).unwrap();
            for c in region.corners() {
                prop_assert!(region.contains(c));
            }
            let far = pt(dx + hs + 3, -hs - 3);
            prop_assert!(!region.contains(far));
        }
    }
}
