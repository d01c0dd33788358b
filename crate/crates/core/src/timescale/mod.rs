//! Time scales and Δ-calculus primitives.
//!
//! A [`TimeScale`] is a canonical, sorted list of disjoint closed segments
//! (a degenerate segment `[a, a]` is an isolated point), optionally continued
//! to infinity by a [`Continuation`] rule. All numerics run on a finite
//! [`Grid`] built from a window of the scale.

mod descriptor;
mod grid;

pub use descriptor::{PatternDescriptor, ScaleDescriptor};
pub(crate) use grid::fornberg_weights;
pub use grid::{Grid, GridPoint, PointKind, Quadrature};

use crate::{time_tol, Error, Result};
use serde::{Deserialize, Serialize};

/// Closed interval `[left, right]`; `right` may be `+inf` for the last segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
}

impl Segment {
    pub fn new(left: f64, right: f64) -> Self {
        Segment { left, right }
    }

    pub fn point(t: f64) -> Self {
        Segment { left: t, right: t }
    }

    pub fn is_point(&self) -> bool {
        self.right - self.left <= time_tol(self.left)
    }

    fn shifted(&self, by: f64) -> Self {
        Segment::new(self.left + by, self.right + by)
    }
}

/// How a bounded list of segments continues beyond its last segment.
#[derive(Clone, Debug, PartialEq)]
pub enum Continuation {
    /// `segments[cell_start..]` repeat forever with the given period.
    Periodic { period: f64, cell_start: usize },
    /// Isolated points following the last segment.
    Sequence(PointRule),
}

/// Rule generating the isolated points of a [`Continuation::Sequence`].
/// With `base` the right end of the last bounded segment, the n-th point
/// (n >= 1) is:
#[derive(Clone, Debug, PartialEq)]
pub enum PointRule {
    /// `base * ratio^n`
    Geometric { ratio: f64 },
    /// `base^(exponent^n)`; `base = 3, exponent = 3` gives `3^(3^n)`.
    Power { exponent: f64 },
    /// an explicit finite list
    Explicit(Vec<f64>),
}

impl PointRule {
    fn nth(&self, base: f64, n: usize) -> Option<f64> {
        let v = match self {
            PointRule::Geometric { ratio } => base * ratio.powi(n as i32),
            PointRule::Power { exponent } => (base.ln() * exponent.powi(n as i32)).exp(),
            PointRule::Explicit(points) => *points.get(n - 1)?,
        };
        v.is_finite().then_some(v)
    }
}

/// Right/left classification of a point of a time scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RightKind {
    RightDense,
    RightScattered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeftKind {
    LeftDense,
    LeftScattered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeScale {
    segments: Vec<Segment>,
    continuation: Option<Continuation>,
}

impl TimeScale {
    /// Merge, sort and validate raw intervals into canonical form.
    pub fn canonicalize(raw: &[(f64, f64)]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidScale("empty interval list".into()));
        }
        let mut segs = Vec::with_capacity(raw.len());
        let mut unbounded = 0;
        for &(l, r) in raw {
            if !l.is_finite() || r.is_nan() || l > r {
                return Err(Error::InvalidScale(format!("bad interval [{l}, {r}]")));
            }
            if r == f64::INFINITY {
                unbounded += 1;
            }
            segs.push(Segment::new(l, r));
        }
        if unbounded > 1 {
            return Err(Error::InvalidScale("more than one unbounded interval".into()));
        }
        segs.sort_by(|a, b| a.left.total_cmp(&b.left));
        let mut merged: Vec<Segment> = Vec::with_capacity(segs.len());
        for s in segs {
            match merged.last_mut() {
                Some(last) if s.left <= last.right + time_tol(last.right) => {
                    last.right = last.right.max(s.right);
                }
                _ => merged.push(s),
            }
        }
        Ok(TimeScale { segments: merged, continuation: None })
    }

    /// Canonical segments continued periodically from `segments[cell_start..]`.
    pub fn periodic(raw: &[(f64, f64)], period: f64, cell_start: usize) -> Result<Self> {
        let mut ts = Self::canonicalize(raw)?;
        let segs = &ts.segments;
        if !(period > 0.0) || cell_start >= segs.len() {
            return Err(Error::InvalidScale("bad periodic pattern".into()));
        }
        let last = segs[segs.len() - 1];
        let first = segs[cell_start];
        if !last.right.is_finite() || first.left + period <= last.right + time_tol(last.right) {
            return Err(Error::InvalidScale("periodic cell must be bounded and shorter than its period".into()));
        }
        ts.continuation = Some(Continuation::Periodic { period, cell_start });
        Ok(ts)
    }

    /// Canonical segments followed by isolated points from `rule`.
    pub fn with_sequence(raw: &[(f64, f64)], rule: PointRule) -> Result<Self> {
        let mut ts = Self::canonicalize(raw)?;
        let base = ts.segments[ts.segments.len() - 1].right;
        if !base.is_finite() {
            return Err(Error::InvalidScale("sequence after an unbounded segment".into()));
        }
        match &rule {
            PointRule::Geometric { ratio } if !(*ratio > 1.0 && base > 0.0) => {
                return Err(Error::InvalidScale("geometric rule needs ratio > 1, base > 0".into()))
            }
            PointRule::Power { exponent } if !(*exponent > 1.0 && base > 1.0) => {
                return Err(Error::InvalidScale("power rule needs exponent > 1, base > 1".into()))
            }
            PointRule::Explicit(pts) => {
                let mut prev = base;
                for &p in pts {
                    if !(p > prev + time_tol(prev)) || !p.is_finite() {
                        return Err(Error::InvalidScale("explicit points must increase past the last segment".into()));
                    }
                    prev = p;
                }
            }
            _ => {}
        }
        ts.continuation = Some(Continuation::Sequence(rule));
        Ok(ts)
    }

    /// `[0, +inf)`.
    pub fn real() -> Self {
        TimeScale { segments: vec![Segment::new(0.0, f64::INFINITY)], continuation: None }
    }

    /// `hZ` restricted to `t >= 0`.
    pub fn integers(h: f64) -> Result<Self> {
        Self::periodic(&[(0.0, 0.0)], h, 0)
    }

    /// `[0, 1]` followed by the integers `2, 3, ...`.
    pub fn union() -> Self {
        Self::periodic(&[(0.0, 1.0), (2.0, 2.0)], 1.0, 1).expect("valid builtin")
    }

    /// `{q^n : n >= 0}`.
    pub fn geometric(q: f64) -> Result<Self> {
        Self::with_sequence(&[(1.0, 1.0)], PointRule::Geometric { ratio: q })
    }

    /// `{3^(3^n) : n >= 0}`; with `max_n` the scale is truncated to `n <= max_n`.
    /// Points past `n = 5` overflow `f64` and the scale ends there.
    pub fn tower3(max_n: Option<usize>) -> Result<Self> {
        match max_n {
            None => Self::with_sequence(&[(3.0, 3.0)], PointRule::Power { exponent: 3.0 }),
            Some(n) => {
                let pts: Vec<(f64, f64)> = (0..=n)
                    .map(|k| (3f64.ln() * 3f64.powi(k as i32)).exp())
                    .take_while(|p| p.is_finite())
                    .map(|p| (p, p))
                    .collect();
                Self::canonicalize(&pts)
            }
        }
    }

    /// A seeded random periodic scale whose gaps never exceed `mu_max`.
    pub fn random_syndetic(seed: u64, mu_max: f64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        if !(mu_max > 0.0) {
            return Err(Error::InvalidScale("mu_max must be positive".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        let mut raw = Vec::new();
        for _ in 0..6 {
            let len = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.2..1.5) };
            raw.push((t, t + len));
            t += len + rng.random_range(0.25 * mu_max..=mu_max);
        }
        Self::periodic(&raw, t, 0)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn continuation(&self) -> Option<&Continuation> {
        self.continuation.as_ref()
    }

    pub fn inf(&self) -> f64 {
        self.segments[0].left
    }

    pub fn sup(&self) -> f64 {
        match &self.continuation {
            Some(Continuation::Periodic { .. }) => f64::INFINITY,
            Some(Continuation::Sequence(PointRule::Explicit(p))) => *p.last().unwrap_or(&self.last_right()),
            Some(Continuation::Sequence(_)) => f64::INFINITY,
            None => self.last_right(),
        }
    }

    fn last_right(&self) -> f64 {
        self.segments[self.segments.len() - 1].right
    }

    /// Segment number `idx` in the infinite virtual enumeration of the scale.
    pub fn nth_segment(&self, idx: usize) -> Option<Segment> {
        let m = self.segments.len();
        if idx < m {
            return Some(self.segments[idx]);
        }
        match &self.continuation {
            None => None,
            Some(Continuation::Periodic { period, cell_start }) => {
                let k = m - cell_start;
                let j = idx - cell_start;
                let rep = (j / k) as f64;
                Some(self.segments[cell_start + j % k].shifted(rep * period))
            }
            Some(Continuation::Sequence(rule)) => rule.nth(self.last_right(), idx - m + 1).map(Segment::point),
        }
    }

    /// Largest virtual index whose segment starts at or before `t`.
    fn last_at_or_before(&self, t: f64) -> Option<usize> {
        let tol = time_tol(t);
        if t < self.segments[0].left - tol {
            return None;
        }
        let m = self.segments.len();
        let r = self.segments.partition_point(|s| s.left <= t + tol);
        if r < m || self.continuation.is_none() {
            return Some(r - 1);
        }
        let mut idx = match &self.continuation {
            Some(Continuation::Periodic { period, cell_start }) => {
                let k = m - cell_start;
                let rep = ((t - self.segments[*cell_start].left) / period).floor().max(0.0) as usize;
                (cell_start + rep * k).max(m - 1)
            }
            _ => m - 1,
        };
        while idx > 0 && self.nth_segment(idx).is_some_and(|s| s.left > t + tol) {
            idx -= 1;
        }
        while self.nth_segment(idx + 1).is_some_and(|s| s.left <= t + tol) {
            idx += 1;
        }
        Some(idx)
    }

    /// Index of the segment containing `t`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let idx = self.last_at_or_before(t)?;
        let seg = self.nth_segment(idx)?;
        (t <= seg.right + time_tol(t)).then_some(idx)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.locate(t).is_some()
    }

    /// Forward jump `sigma(t) = inf { s in T : s > t }`, or `sup T` when empty.
    pub fn forward_jump(&self, t: f64) -> Result<f64> {
        let idx = self.locate(t).ok_or(Error::NotInScale(t))?;
        let seg = self.nth_segment(idx).expect("located");
        if t < seg.right - time_tol(t) {
            return Ok(t);
        }
        Ok(self.nth_segment(idx + 1).map_or(t, |s| s.left))
    }

    pub fn backward_jump(&self, t: f64) -> Result<f64> {
        let idx = self.locate(t).ok_or(Error::NotInScale(t))?;
        let seg = self.nth_segment(idx).expect("located");
        if t > seg.left + time_tol(t) || idx == 0 {
            return Ok(t);
        }
        Ok(self.nth_segment(idx - 1).expect("previous segment").right)
    }

    /// Graininess `mu(t) = sigma(t) - t`.
    pub fn graininess(&self, t: f64) -> Result<f64> {
        Ok(self.forward_jump(t)? - t)
    }

    pub fn classify(&self, t: f64) -> Result<(RightKind, LeftKind)> {
        let right = if self.graininess(t)? > 0.0 { RightKind::RightScattered } else { RightKind::RightDense };
        let left = if t - self.backward_jump(t)? > 0.0 { LeftKind::LeftScattered } else { LeftKind::LeftDense };
        Ok((right, left))
    }

    /// The bounded scale `T ∩ (-inf, end]`, with no continuation.
    pub fn truncated(&self, end: f64) -> Result<Self> {
        let raw: Vec<(f64, f64)> = self
            .segments_in(self.inf(), end)
            .into_iter()
            .filter(|(_, seg)| seg.left <= end)
            .map(|(_, seg)| (seg.left, seg.right.min(end)))
            .collect();
        if raw.is_empty() {
            return Err(Error::EmptyWindow(self.inf(), end));
        }
        Self::canonicalize(&raw)
    }

    /// Segments (with virtual indices) meeting `[a, b]`.
    pub fn segments_in(&self, a: f64, b: f64) -> Vec<(usize, Segment)> {
        self.segments_iter(a, b).collect()
    }

    pub(crate) fn segments_iter(&self, a: f64, b: f64) -> impl Iterator<Item = (usize, Segment)> + '_ {
        let start = self.last_at_or_before(a).unwrap_or(0);
        (start..)
            .map_while(move |idx| self.nth_segment(idx).map(|seg| (idx, seg)))
            .take_while(move |(_, seg)| seg.left <= b + time_tol(b))
            .filter(move |(_, seg)| seg.right >= a - time_tol(a))
    }

    /// Largest graininess. With a window, the sup of `mu(t)` over
    /// `t in T ∩ [a, b)`; without one, over the whole scale as determined by
    /// the continuation rule (`+inf` for growing sequences).
    pub fn mu_star(&self, window: Option<(f64, f64)>) -> f64 {
        if let Some((a, b)) = window {
            let mut best: f64 = 0.0;
            for (idx, seg) in self.segments_in(a, b) {
                if seg.right >= a - time_tol(a) && seg.right < b - time_tol(b) {
                    if let Some(next) = self.nth_segment(idx + 1) {
                        best = best.max(next.left - seg.right);
                    }
                }
            }
            return best;
        }
        let gaps = |segs: &[Segment]| segs.windows(2).map(|w| w[1].left - w[0].right).fold(0.0, f64::max);
        let base = gaps(&self.segments);
        match &self.continuation {
            None => base,
            Some(Continuation::Periodic { period, cell_start }) => {
                let wrap = self.segments[*cell_start].left + period - self.last_right();
                base.max(wrap)
            }
            Some(Continuation::Sequence(PointRule::Explicit(pts))) => {
                let mut prev = self.last_right();
                let mut best = base;
                for &p in pts {
                    best = best.max(p - prev);
                    prev = p;
                }
                best
            }
            Some(Continuation::Sequence(_)) => f64::INFINITY,
        }
    }

    pub fn is_syndetic(&self) -> bool {
        self.mu_star(None).is_finite()
    }

    /// `1/mu*`, or `+inf` when the scale has no gaps.
    pub fn nu_star(&self) -> f64 {
        let mu = self.mu_star(None);
        if mu > 0.0 {
            1.0 / mu
        } else {
            f64::INFINITY
        }
    }

    /// Sample `T ∩ [a, b]` with dense step at most `h`.
    pub fn grid(&self, window: (f64, f64), h: f64) -> Result<Grid> {
        Grid::build(self, window, h)
    }
}
