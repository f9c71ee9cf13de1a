//! Time scales as ordered unions of segments with exact canonical coordinates.
//!
//! Lattice points carry integer indices so jump operators and builtin shifts
//! stay bit-exact; real coordinates appear only inside interval segments.
//! Infinite scales are materialized over explicit index windows (default
//! [-32, 32]); operations that step outside report window exhaustion instead
//! of clamping.

use crate::error::{Error, Result, ScaleError};
use crate::expr::{Env, Expression};

/// Default lattice index window for infinite scales.
pub const DEFAULT_WINDOW: (i64, i64) = (-32, 32);

/// Default relative tolerance for real-coordinate membership queries.
pub const DEFAULT_TOL: f64 = 1e-9;

/// One build instruction for a scale segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentSpec {
    /// A single closed interval `[a, b]`, or a family of them when `repeat`
    /// is set (`a, b` scaled by `factor^n` or translated by `n * step`).
    Interval {
        a: f64,
        b: f64,
        repeat: Option<Repeat>,
    },
    /// Points `offset + n * step` for `n` in the index range.
    Uniform {
        offset: f64,
        step: f64,
        n_min: i64,
        n_max: i64,
        hard_min: bool,
        hard_max: bool,
    },
    /// Points `base^n` for `n` in the index range.
    Geometric {
        base: f64,
        n_min: i64,
        n_max: i64,
        hard_min: bool,
        hard_max: bool,
    },
    /// A finite list of exact points.
    Points { values: Vec<f64> },
    /// Points `expr(n)` for `n` in the index range; the expression binds the
    /// index to variable `t` and must be strictly increasing.
    Parametric {
        expr: Expression,
        n_min: i64,
        n_max: i64,
        hard_min: bool,
        hard_max: bool,
    },
}

/// Repetition rule for interval families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Repeat {
    /// Segments `factor^n * [a, b]`; requires `0 < a < b` and `factor > 1`.
    ScaleBy { factor: f64, n_min: i64, n_max: i64 },
    /// Segments `[a + n*step, b + n*step]`; requires `step > b - a`.
    StepBy { step: f64, n_min: i64, n_max: i64 },
}

/// Build recipe for a [`TimeScale`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaleSpec {
    pub segments: Vec<SegmentSpec>,
    /// Values excluded from the restricted set on which shifts act
    /// (accumulation boundary points such as 0 in the closure of a
    /// geometric lattice).
    pub exclude_from_star: Vec<f64>,
}

impl ScaleSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn geometric(base: f64, n_min: i64, n_max: i64) -> Self {
        ScaleSpec::new().with(SegmentSpec::Geometric {
            base,
            n_min,
            n_max,
            hard_min: false,
            hard_max: false,
        })
    }

    pub fn uniform(step: f64, n_min: i64, n_max: i64) -> Self {
        ScaleSpec::new().with(SegmentSpec::Uniform {
            offset: 0.0,
            step,
            n_min,
            n_max,
            hard_min: false,
            hard_max: false,
        })
    }

    pub fn interval(a: f64, b: f64) -> Self {
        ScaleSpec::new().with(SegmentSpec::Interval { a, b, repeat: None })
    }

    pub fn with(mut self, seg: SegmentSpec) -> Self {
        self.segments.push(seg);
        self
    }

    pub fn excluding(mut self, values: &[f64]) -> Self {
        self.exclude_from_star.extend_from_slice(values);
        self
    }

    /// Parse the line-oriented `key=value` text format.
    ///
    /// ```text
    /// kind=geometric q=2 n_min=-20 n_max=20
    /// kind=points values=0
    /// exclude_from_star=0
    /// ```
    pub fn parse(text: &str) -> Result<ScaleSpec> {
        let mut spec = ScaleSpec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields = split_fields(line)
                .map_err(|m| bad_spec(format!("line {}: {}", lineno + 1, m)))?;
            let mut map = FieldMap::new(&fields, lineno + 1)?;
            if let Some(vals) = map.take("exclude_from_star") {
                for v in vals.split(',') {
                    let x: f64 = v.trim().parse().map_err(|_| {
                        bad_spec(format!("line {}: bad exclude value `{}`", lineno + 1, v))
                    })?;
                    spec.exclude_from_star.push(x);
                }
                map.finish()?;
                continue;
            }
            let kind = map
                .take("kind")
                .ok_or_else(|| bad_spec(format!("line {}: missing `kind`", lineno + 1)))?;
            let seg = match kind.as_str() {
                "geometric" => SegmentSpec::Geometric {
                    base: map.num("q")?,
                    n_min: map.int_or("n_min", DEFAULT_WINDOW.0)?,
                    n_max: map.int_or("n_max", DEFAULT_WINDOW.1)?,
                    hard_min: map.flag("hard_min")?,
                    hard_max: map.flag("hard_max")?,
                },
                "uniform" => SegmentSpec::Uniform {
                    offset: map.num_or("offset", 0.0)?,
                    step: map.num("h")?,
                    n_min: map.int_or("n_min", DEFAULT_WINDOW.0)?,
                    n_max: map.int_or("n_max", DEFAULT_WINDOW.1)?,
                    hard_min: map.flag("hard_min")?,
                    hard_max: map.flag("hard_max")?,
                },
                "interval" => {
                    let a = map.num("a")?;
                    let b = map.num("b")?;
                    let repeat = if let Some(f) = map.opt_num("scale_by")? {
                        Some(Repeat::ScaleBy {
                            factor: f,
                            n_min: map.int_or("n_min", DEFAULT_WINDOW.0)?,
                            n_max: map.int_or("n_max", DEFAULT_WINDOW.1)?,
                        })
                    } else if let Some(d) = map.opt_num("step_by")? {
                        Some(Repeat::StepBy {
                            step: d,
                            n_min: map.int_or("n_min", DEFAULT_WINDOW.0)?,
                            n_max: map.int_or("n_max", DEFAULT_WINDOW.1)?,
                        })
                    } else {
                        None
                    };
                    SegmentSpec::Interval { a, b, repeat }
                }
                "points" => {
                    let raw = map.take("values").ok_or_else(|| {
                        bad_spec(format!("line {}: points needs `values`", lineno + 1))
                    })?;
                    let mut values = Vec::new();
                    for v in raw.split(',') {
                        values.push(v.trim().parse().map_err(|_| {
                            bad_spec(format!("line {}: bad point value `{}`", lineno + 1, v))
                        })?);
                    }
                    SegmentSpec::Points { values }
                }
                "parametric" => {
                    let raw = map.take("expr").ok_or_else(|| {
                        bad_spec(format!("line {}: parametric needs `expr`", lineno + 1))
                    })?;
                    SegmentSpec::Parametric {
                        expr: Expression::parse(&raw)?,
                        n_min: map.int_or("n_min", DEFAULT_WINDOW.0)?,
                        n_max: map.int_or("n_max", DEFAULT_WINDOW.1)?,
                        hard_min: map.flag("hard_min")?,
                        hard_max: map.flag("hard_max")?,
                    }
                }
                other => {
                    return Err(bad_spec(format!(
                        "line {}: unknown kind `{}`",
                        lineno + 1,
                        other
                    )))
                }
            };
            map.finish()?;
            spec.segments.push(seg);
        }
        Ok(spec)
    }
}

fn bad_spec(message: String) -> Error {
    Error::Scale(ScaleError::BadSpec(message))
}

fn split_fields(line: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut fields = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            break;
        }
        let key_start = i;
        while i < bytes.len() && bytes[i] != b'=' && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() || bytes[i] != b'=' {
            return Err(format!("expected `key=value` near `{}`", &line[key_start..]));
        }
        let key = line[key_start..i].to_string();
        i += 1;
        let value;
        if i < bytes.len() && bytes[i] == b'"' {
            i += 1;
            let vstart = i;
            while i < bytes.len() && bytes[i] != b'"' {
                i += 1;
            }
            if i >= bytes.len() {
                return Err("unterminated quote".into());
            }
            value = line[vstart..i].to_string();
            i += 1;
        } else {
            let vstart = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            value = line[vstart..i].to_string();
        }
        fields.push((key, value));
    }
    Ok(fields)
}

struct FieldMap {
    fields: Vec<(String, String)>,
    line: usize,
}

impl FieldMap {
    fn new(fields: &[(String, String)], line: usize) -> Result<FieldMap> {
        Ok(FieldMap {
            fields: fields.to_vec(),
            line,
        })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let idx = self.fields.iter().position(|(k, _)| k == key)?;
        Some(self.fields.remove(idx).1)
    }

    fn num(&mut self, key: &str) -> Result<f64> {
        self.opt_num(key)?
            .ok_or_else(|| bad_spec(format!("line {}: missing `{}`", self.line, key)))
    }

    fn opt_num(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                bad_spec(format!("line {}: bad number for `{}`: `{}`", self.line, key, v))
            }),
        }
    }

    fn num_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_num(key)?.unwrap_or(default))
    }

    fn int_or(&mut self, key: &str, default: i64) -> Result<i64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                bad_spec(format!("line {}: bad integer for `{}`: `{}`", self.line, key, v))
            }),
        }
    }

    fn flag(&mut self, key: &str) -> Result<bool> {
        match self.take(key) {
            None => Ok(false),
            Some(v) => match v.as_str() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                other => Err(bad_spec(format!(
                    "line {}: bad flag for `{}`: `{}`",
                    self.line, key, other
                ))),
            },
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((k, _)) = self.fields.first() {
            return Err(bad_spec(format!("line {}: unknown key `{}`", self.line, k)));
        }
        Ok(())
    }
}

/// How a lattice segment generates its point values.
#[derive(Debug, Clone, PartialEq)]
pub enum LatticeFamily {
    Uniform { offset: f64, step: f64 },
    Geometric { base: f64 },
    Explicit,
    Parametric { expr: Expression },
}

/// A materialized run of isolated points indexed by `n_min..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub family: LatticeFamily,
    pub n_min: i64,
    /// `values[i]` is the point at index `n_min + i`, strictly increasing.
    pub values: Vec<f64>,
}

impl Lattice {
    pub fn n_max(&self) -> i64 {
        self.n_min + self.values.len() as i64 - 1
    }

    pub fn value(&self, n: i64) -> Option<f64> {
        if n < self.n_min || n > self.n_max() {
            None
        } else {
            Some(self.values[(n - self.n_min) as usize])
        }
    }
}

/// A normalized component of a time scale.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    Interval { lo: f64, hi: f64 },
    Lattice(Lattice),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Whether stepping below/above this segment is a genuine non-membership
    /// (hard) rather than window truncation (soft). Only consulted when the
    /// segment owns a global edge of the scale.
    pub lo_hard: bool,
    pub hi_hard: bool,
}

impl Segment {
    pub fn lo(&self) -> f64 {
        match &self.kind {
            SegmentKind::Interval { lo, .. } => *lo,
            SegmentKind::Lattice(l) => l.values[0],
        }
    }

    pub fn hi(&self) -> f64 {
        match &self.kind {
            SegmentKind::Interval { hi, .. } => *hi,
            SegmentKind::Lattice(l) => *l.values.last().unwrap(),
        }
    }
}

/// Exact coordinate of a point inside its segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    /// Lattice index in the segment's own index space.
    Index(i64),
    /// Real coordinate inside an interval segment.
    Coord(f64),
}

/// A point of the scale tagged with its segment and exact parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalPoint {
    pub segment: usize,
    pub param: Param,
    pub value: f64,
}

impl std::fmt::Display for CanonicalPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Point classification relative to the forward jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightClass {
    Dense,
    Scattered,
}

/// Point classification relative to the backward jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftClass {
    Dense,
    Scattered,
}

/// Detailed membership verdict used by the check suites to separate window
/// truncation from genuine non-membership.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Point(CanonicalPoint),
    /// Outside the enumerated window in a direction where the scale keeps
    /// going conceptually.
    OutOfWindow,
    /// Provably not a point of the scale.
    NotMember,
}

/// Outcome of the classic periodicity baseline check.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicReport {
    pub holds: bool,
    /// First `t` whose translate left the scale, with the offending value.
    pub counterexample: Option<(CanonicalPoint, f64)>,
    pub checked: usize,
    pub skipped: usize,
}

/// An ordered union of segments materialized over an explicit window.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    segments: Vec<Segment>,
    star_excluded: Vec<f64>,
    spec: ScaleSpec,
}

/// Normalize a [`ScaleSpec`] into a [`TimeScale`].
pub fn build_timescale(spec: ScaleSpec) -> Result<TimeScale> {
    TimeScale::build(spec)
}

impl TimeScale {
    pub fn build(spec: ScaleSpec) -> Result<TimeScale> {
        let mut segments = Vec::new();
        for seg in &spec.segments {
            expand_segment(seg, &mut segments)?;
        }
        if segments.is_empty() {
            return Err(Error::Scale(ScaleError::Empty));
        }
        segments.sort_by(|a, b| a.lo().partial_cmp(&b.lo()).unwrap());
        for pair in segments.windows(2) {
            if pair[1].lo() <= pair[0].hi() {
                return Err(Error::Scale(ScaleError::Overlap(
                    pair[0].lo(),
                    pair[0].hi(),
                    pair[1].lo(),
                    pair[1].hi(),
                )));
            }
        }
        let mut scale = TimeScale {
            segments,
            star_excluded: Vec::new(),
            spec: spec.clone(),
        };
        for &x in &spec.exclude_from_star {
            let cp = scale.contains(x, DEFAULT_TOL).ok_or_else(|| {
                bad_spec(format!("exclude_from_star value {} is not a scale point", x))
            })?;
            scale.star_excluded.push(cp.value);
        }
        Ok(scale)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn spec(&self) -> &ScaleSpec {
        &self.spec
    }

    pub fn global_lo(&self) -> f64 {
        self.segments[0].lo()
    }

    pub fn global_hi(&self) -> f64 {
        self.segments.last().unwrap().hi()
    }

    fn lo_is_hard(&self) -> bool {
        self.segments[0].lo_hard
    }

    fn hi_is_hard(&self) -> bool {
        self.segments.last().unwrap().hi_hard
    }

    /// Recompute a canonical point from its segment and parameter.
    pub fn point(&self, segment: usize, param: Param) -> Result<CanonicalPoint> {
        let seg = self
            .segments
            .get(segment)
            .ok_or_else(|| Error::Invalid(format!("segment {} out of range", segment)))?;
        match (&seg.kind, param) {
            (SegmentKind::Lattice(l), Param::Index(n)) => match l.value(n) {
                Some(v) => Ok(CanonicalPoint {
                    segment,
                    param,
                    value: v,
                }),
                None => {
                    let hard = if n < l.n_min { seg.lo_hard } else { seg.hi_hard };
                    if hard {
                        Err(Error::NotInScale(n as f64))
                    } else {
                        Err(Error::WindowExhausted)
                    }
                }
            },
            (SegmentKind::Interval { lo, hi }, Param::Coord(x)) => {
                if x < *lo || x > *hi {
                    Err(Error::NotInScale(x))
                } else {
                    Ok(CanonicalPoint {
                        segment,
                        param,
                        value: x,
                    })
                }
            }
            _ => Err(Error::Invalid("parameter kind does not match segment".into())),
        }
    }

    /// Resolve a lattice index, distinguishing window truncation from hard
    /// non-membership.
    pub fn lattice_point(&self, segment: usize, n: i64) -> Result<CanonicalPoint> {
        self.point(segment, Param::Index(n))
    }

    /// Membership with window awareness.
    pub fn membership(&self, x: f64, tol: f64) -> Membership {
        if let Some(cp) = self.contains(x, tol) {
            return Membership::Point(cp);
        }
        let slack = tol * x.abs().max(1.0);
        if x < self.global_lo() - slack {
            return if self.lo_is_hard() {
                Membership::NotMember
            } else {
                Membership::OutOfWindow
            };
        }
        if x > self.global_hi() + slack {
            return if self.hi_is_hard() {
                Membership::NotMember
            } else {
                Membership::OutOfWindow
            };
        }
        Membership::NotMember
    }

    /// Find the scale point within relative tolerance of `x`, if any.
    pub fn contains(&self, x: f64, tol: f64) -> Option<CanonicalPoint> {
        let slack = tol * x.abs().max(1.0);
        let mut best: Option<(f64, CanonicalPoint)> = None;
        for (si, seg) in self.segments.iter().enumerate() {
            if x < seg.lo() - slack {
                break;
            }
            if x > seg.hi() + slack {
                continue;
            }
            let candidate = match &seg.kind {
                SegmentKind::Interval { lo, hi } => {
                    // Snap near-endpoint queries to the exact endpoint value.
                    let coord = if (x - lo).abs() <= slack {
                        *lo
                    } else if (x - hi).abs() <= slack {
                        *hi
                    } else {
                        x
                    };
                    Some((
                        (coord - x).abs(),
                        CanonicalPoint {
                            segment: si,
                            param: Param::Coord(coord),
                            value: coord,
                        },
                    ))
                }
                SegmentKind::Lattice(l) => {
                    let i = match l
                        .values
                        .binary_search_by(|v| v.partial_cmp(&x).unwrap())
                    {
                        Ok(i) => i,
                        Err(i) => i,
                    };
                    let mut nearest: Option<(f64, usize)> = None;
                    for j in i.saturating_sub(1)..=(i.min(l.values.len() - 1)) {
                        let d = (l.values[j] - x).abs();
                        if nearest.map_or(true, |(bd, _)| d < bd) {
                            nearest = Some((d, j));
                        }
                    }
                    nearest.and_then(|(d, j)| {
                        if d <= slack {
                            Some((
                                d,
                                CanonicalPoint {
                                    segment: si,
                                    param: Param::Index(l.n_min + j as i64),
                                    value: l.values[j],
                                },
                            ))
                        } else {
                            None
                        }
                    })
                }
            };
            if let Some((d, cp)) = candidate {
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, cp));
                }
            }
        }
        best.map(|(_, cp)| cp)
    }

    /// Whether the point belongs to the restricted set the shifts act on.
    pub fn in_star(&self, cp: &CanonicalPoint) -> bool {
        !self.star_excluded.iter().any(|&v| v == cp.value)
    }

    pub fn star_excluded_values(&self) -> &[f64] {
        &self.star_excluded
    }

    /// Forward jump: the least scale point strictly above `t`, or `t` itself
    /// when `t` is right-dense.
    pub fn sigma(&self, t: &CanonicalPoint) -> Result<CanonicalPoint> {
        let seg = &self.segments[t.segment];
        match (&seg.kind, t.param) {
            (SegmentKind::Interval { hi, .. }, Param::Coord(x)) if x < *hi => Ok(*t),
            (SegmentKind::Lattice(l), Param::Index(n)) if n < l.n_max() => {
                self.point(t.segment, Param::Index(n + 1))
            }
            _ => self.first_point_of(t.segment + 1),
        }
    }

    /// Backward jump, the mirror of [`TimeScale::sigma`].
    pub fn rho(&self, t: &CanonicalPoint) -> Result<CanonicalPoint> {
        let seg = &self.segments[t.segment];
        match (&seg.kind, t.param) {
            (SegmentKind::Interval { lo, .. }, Param::Coord(x)) if x > *lo => Ok(*t),
            (SegmentKind::Lattice(l), Param::Index(n)) if n > l.n_min => {
                self.point(t.segment, Param::Index(n - 1))
            }
            _ => {
                if t.segment == 0 {
                    Err(Error::WindowExhausted)
                } else {
                    self.last_point_of(t.segment - 1)
                }
            }
        }
    }

    fn first_point_of(&self, segment: usize) -> Result<CanonicalPoint> {
        let seg = self.segments.get(segment).ok_or(Error::WindowExhausted)?;
        Ok(match &seg.kind {
            SegmentKind::Interval { lo, .. } => CanonicalPoint {
                segment,
                param: Param::Coord(*lo),
                value: *lo,
            },
            SegmentKind::Lattice(l) => CanonicalPoint {
                segment,
                param: Param::Index(l.n_min),
                value: l.values[0],
            },
        })
    }

    fn last_point_of(&self, segment: usize) -> Result<CanonicalPoint> {
        let seg = self.segments.get(segment).ok_or(Error::WindowExhausted)?;
        Ok(match &seg.kind {
            SegmentKind::Interval { hi, .. } => CanonicalPoint {
                segment,
                param: Param::Coord(*hi),
                value: *hi,
            },
            SegmentKind::Lattice(l) => CanonicalPoint {
                segment,
                param: Param::Index(l.n_max()),
                value: *l.values.last().unwrap(),
            },
        })
    }

    /// Graininess `sigma(t) - t`; exact on lattice segments.
    pub fn graininess(&self, t: &CanonicalPoint) -> Result<f64> {
        Ok(self.sigma(t)?.value - t.value)
    }

    /// Classify a window-interior point; errors at the window boundary.
    pub fn classify(&self, t: &CanonicalPoint) -> Result<(RightClass, LeftClass)> {
        let sigma = self.sigma(t)?;
        let rho = self.rho(t)?;
        let right = if sigma.value > t.value {
            RightClass::Scattered
        } else {
            RightClass::Dense
        };
        let left = if rho.value < t.value {
            LeftClass::Scattered
        } else {
            LeftClass::Dense
        };
        Ok((right, left))
    }

    /// All scattered points of `[a, b]` plus `dense_samples` equispaced
    /// interior samples per interval segment, in increasing order.
    pub fn enumerate_points(&self, a: f64, b: f64, dense_samples: usize) -> Vec<CanonicalPoint> {
        let mut out = Vec::new();
        if a > b {
            return out;
        }
        for (si, seg) in self.segments.iter().enumerate() {
            if seg.hi() < a || seg.lo() > b {
                continue;
            }
            match &seg.kind {
                SegmentKind::Lattice(l) => {
                    for (i, &v) in l.values.iter().enumerate() {
                        if v >= a && v <= b {
                            out.push(CanonicalPoint {
                                segment: si,
                                param: Param::Index(l.n_min + i as i64),
                                value: v,
                            });
                        }
                    }
                }
                SegmentKind::Interval { lo, hi } => {
                    let u = lo.max(a);
                    let v = hi.min(b);
                    if u > v {
                        continue;
                    }
                    let mut push = |x: f64| {
                        out.push(CanonicalPoint {
                            segment: si,
                            param: Param::Coord(x),
                            value: x,
                        })
                    };
                    push(u);
                    if v > u {
                        for k in 1..=dense_samples {
                            let x = u + (v - u) * k as f64 / (dense_samples + 1) as f64;
                            push(x);
                        }
                        push(v);
                    }
                }
            }
        }
        out.dedup_by(|a, b| a.value == b.value);
        out
    }

    /// Baseline check of fixed-translation periodicity: every enumerated `t`
    /// must keep both `t + p` and `t - p` inside the scale. Window edges are
    /// skipped and counted.
    pub fn check_classic_periodic(
        &self,
        p: f64,
        tol: f64,
        dense_samples: usize,
    ) -> ClassicReport {
        assert!(p > 0.0, "period must be positive");
        let points = self.enumerate_points(self.global_lo(), self.global_hi(), dense_samples);
        let mut checked = 0usize;
        let mut skipped = 0usize;
        for t in &points {
            for y in [t.value + p, t.value - p] {
                match self.membership(y, tol) {
                    Membership::Point(_) => checked += 1,
                    Membership::OutOfWindow => skipped += 1,
                    Membership::NotMember => {
                        return ClassicReport {
                            holds: false,
                            counterexample: Some((*t, y)),
                            checked,
                            skipped,
                        }
                    }
                }
            }
        }
        ClassicReport {
            holds: true,
            counterexample: None,
            checked,
            skipped,
        }
    }
}

fn expand_segment(spec: &SegmentSpec, out: &mut Vec<Segment>) -> Result<()> {
    match spec {
        SegmentSpec::Interval { a, b, repeat } => {
            if !(a < b) {
                return Err(bad_spec(format!("interval needs a < b, got [{}, {}]", a, b)));
            }
            match repeat {
                None => out.push(Segment {
                    kind: SegmentKind::Interval { lo: *a, hi: *b },
                    lo_hard: true,
                    hi_hard: true,
                }),
                Some(Repeat::ScaleBy { factor, n_min, n_max }) => {
                    if !(*factor > 1.0) {
                        return Err(bad_spec("scale_by factor must be > 1".into()));
                    }
                    if !(*a > 0.0) {
                        return Err(bad_spec("scaled interval family needs a > 0".into()));
                    }
                    if !(*b < a * factor) {
                        return Err(bad_spec(
                            "scaled interval family overlaps itself (needs b < a * factor)".into(),
                        ));
                    }
                    check_range(*n_min, *n_max)?;
                    for n in *n_min..=*n_max {
                        let scale = factor.powi(n as i32);
                        out.push(Segment {
                            kind: SegmentKind::Interval {
                                lo: a * scale,
                                hi: b * scale,
                            },
                            lo_hard: n != *n_min,
                            hi_hard: n != *n_max,
                        });
                    }
                }
                Some(Repeat::StepBy { step, n_min, n_max }) => {
                    if !(*step > b - a) {
                        return Err(bad_spec(
                            "stepped interval family overlaps itself (needs step > b - a)".into(),
                        ));
                    }
                    check_range(*n_min, *n_max)?;
                    for n in *n_min..=*n_max {
                        let shift = step * n as f64;
                        out.push(Segment {
                            kind: SegmentKind::Interval {
                                lo: a + shift,
                                hi: b + shift,
                            },
                            lo_hard: n != *n_min,
                            hi_hard: n != *n_max,
                        });
                    }
                }
            }
        }
        SegmentSpec::Uniform {
            offset,
            step,
            n_min,
            n_max,
            hard_min,
            hard_max,
        } => {
            if !(*step > 0.0) {
                return Err(bad_spec("uniform lattice needs h > 0".into()));
            }
            check_range(*n_min, *n_max)?;
            let values: Vec<f64> = (*n_min..=*n_max).map(|n| offset + step * n as f64).collect();
            out.push(Segment {
                kind: SegmentKind::Lattice(Lattice {
                    family: LatticeFamily::Uniform {
                        offset: *offset,
                        step: *step,
                    },
                    n_min: *n_min,
                    values,
                }),
                lo_hard: *hard_min,
                hi_hard: *hard_max,
            });
        }
        SegmentSpec::Geometric {
            base,
            n_min,
            n_max,
            hard_min,
            hard_max,
        } => {
            if !(*base > 1.0) {
                return Err(bad_spec("geometric lattice needs q > 1".into()));
            }
            check_range(*n_min, *n_max)?;
            let values: Vec<f64> = (*n_min..=*n_max).map(|n| base.powi(n as i32)).collect();
            out.push(Segment {
                kind: SegmentKind::Lattice(Lattice {
                    family: LatticeFamily::Geometric { base: *base },
                    n_min: *n_min,
                    values,
                }),
                lo_hard: *hard_min,
                hi_hard: *hard_max,
            });
        }
        SegmentSpec::Points { values } => {
            if values.is_empty() {
                return Err(bad_spec("points segment needs at least one value".into()));
            }
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.dedup();
            // Single-point segments interleave freely with other segments.
            for v in sorted {
                out.push(Segment {
                    kind: SegmentKind::Lattice(Lattice {
                        family: LatticeFamily::Explicit,
                        n_min: 0,
                        values: vec![v],
                    }),
                    lo_hard: true,
                    hi_hard: true,
                });
            }
        }
        SegmentSpec::Parametric {
            expr,
            n_min,
            n_max,
            hard_min,
            hard_max,
        } => {
            check_range(*n_min, *n_max)?;
            let mut values = Vec::with_capacity((n_max - n_min + 1) as usize);
            for n in *n_min..=*n_max {
                let v = expr
                    .eval(Env::t(n as f64))
                    .map_err(|e| bad_spec(format!("parametric expr failed at n={}: {}", n, e)))?;
                if let Some(&prev) = values.last() {
                    if v <= prev {
                        return Err(Error::Scale(ScaleError::NonMonotone(n)));
                    }
                }
                values.push(v);
            }
            out.push(Segment {
                kind: SegmentKind::Lattice(Lattice {
                    family: LatticeFamily::Parametric { expr: expr.clone() },
                    n_min: *n_min,
                    values,
                }),
                lo_hard: *hard_min,
                hi_hard: *hard_max,
            });
        }
    }
    Ok(())
}

fn check_range(n_min: i64, n_max: i64) -> Result<()> {
    if n_min > n_max {
        return Err(bad_spec(format!("empty index range [{}, {}]", n_min, n_max)));
    }
    if n_max - n_min > 1_000_000 {
        return Err(bad_spec("index range too large to materialize".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pow2(n_min: i64, n_max: i64) -> TimeScale {
        build_timescale(ScaleSpec::geometric(2.0, n_min, n_max)).unwrap()
    }

    fn t3() -> TimeScale {
        build_timescale(ScaleSpec::new().with(SegmentSpec::Interval {
            a: 1.0,
            b: 2.0,
            repeat: Some(Repeat::ScaleBy {
                factor: 4.0,
                n_min: -5,
                n_max: 5,
            }),
        }))
        .unwrap()
    }

    #[test]
    fn build_qz_closure() {
        let spec = ScaleSpec::geometric(2.0, -20, 20)
            .with(SegmentSpec::Points { values: vec![0.0] })
            .excluding(&[0.0]);
        let ts = build_timescale(spec).unwrap();
        assert_eq!(ts.global_lo(), 0.0);
        let zero = ts.contains(0.0, 0.0).unwrap();
        assert!(!ts.in_star(&zero));
        let eight = ts.contains(8.0, 1e-9).unwrap();
        assert_eq!(eight.param, Param::Index(3));
        assert!(ts.in_star(&eight));
    }

    #[test]
    fn overlapping_segments_rejected() {
        let spec = ScaleSpec::interval(0.0, 2.0).with(SegmentSpec::Interval {
            a: 1.0,
            b: 3.0,
            repeat: None,
        });
        assert!(matches!(
            build_timescale(spec),
            Err(Error::Scale(ScaleError::Overlap(..)))
        ));
    }

    #[test]
    fn empty_scale_rejected() {
        assert!(matches!(
            build_timescale(ScaleSpec::new()),
            Err(Error::Scale(ScaleError::Empty))
        ));
    }

    #[test]
    fn non_monotone_parametric_rejected() {
        let spec = ScaleSpec::new().with(SegmentSpec::Parametric {
            expr: Expression::parse("t^2").unwrap(),
            n_min: -3,
            n_max: 3,
            hard_min: false,
            hard_max: false,
        });
        assert!(matches!(
            build_timescale(spec),
            Err(Error::Scale(ScaleError::NonMonotone(_)))
        ));
    }

    #[test]
    fn membership_on_lattice_and_interval() {
        let ts = pow2(-20, 20);
        assert_eq!(ts.contains(8.0, 1e-9).unwrap().param, Param::Index(3));
        assert!(ts.contains(3.0, 1e-9).is_none());
        let t3 = t3();
        let p = t3.contains(1.5, 1e-9).unwrap();
        assert_eq!(p.param, Param::Coord(1.5));
    }

    #[test]
    fn sigma_and_rho_on_lattice() {
        let ts = pow2(-20, 20);
        let four = ts.contains(4.0, 0.0).unwrap();
        assert_eq!(ts.sigma(&four).unwrap().value, 8.0);
        let eight = ts.contains(8.0, 0.0).unwrap();
        assert_eq!(ts.rho(&eight).unwrap().value, 4.0);
        assert_eq!(ts.graininess(&four).unwrap(), 4.0);
    }

    #[test]
    fn sigma_across_interval_gap() {
        let t3 = t3();
        let two = t3.contains(2.0, 0.0).unwrap();
        assert_eq!(t3.sigma(&two).unwrap().value, 4.0);
        let four = t3.contains(4.0, 0.0).unwrap();
        assert_eq!(t3.rho(&four).unwrap().value, 2.0);
        let mid = t3.contains(1.5, 0.0).unwrap();
        assert_eq!(t3.sigma(&mid).unwrap().value, 1.5);
        assert_eq!(t3.graininess(&mid).unwrap(), 0.0);
    }

    #[test]
    fn classify_points() {
        let t3 = t3();
        let two = t3.contains(2.0, 0.0).unwrap();
        assert_eq!(
            t3.classify(&two).unwrap(),
            (RightClass::Scattered, LeftClass::Dense)
        );
        let mid = t3.contains(1.5, 0.0).unwrap();
        assert_eq!(
            t3.classify(&mid).unwrap(),
            (RightClass::Dense, LeftClass::Dense)
        );
        let ts = pow2(-20, 20);
        let four = ts.contains(4.0, 0.0).unwrap();
        assert_eq!(
            ts.classify(&four).unwrap(),
            (RightClass::Scattered, LeftClass::Scattered)
        );
    }

    #[test]
    fn window_exhaustion_at_edges() {
        let ts = pow2(-3, 3);
        let top = ts.contains(8.0, 0.0).unwrap();
        assert_eq!(ts.sigma(&top), Err(Error::WindowExhausted));
        let bottom = ts.contains(0.125, 0.0).unwrap();
        assert_eq!(ts.rho(&bottom), Err(Error::WindowExhausted));
    }

    #[test]
    fn enumerate_lattice_window() {
        let ts = pow2(-20, 20);
        let pts: Vec<f64> = ts.enumerate_points(1.0, 8.0, 0).iter().map(|p| p.value).collect();
        assert_eq!(pts, vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn enumerate_with_dense_samples() {
        let t3 = t3();
        let pts: Vec<f64> = t3.enumerate_points(1.0, 4.0, 3).iter().map(|p| p.value).collect();
        assert_eq!(pts, vec![1.0, 1.25, 1.5, 1.75, 2.0, 4.0]);
    }

    #[test]
    fn enumerate_empty_range() {
        let ts = pow2(-20, 20);
        assert!(ts.enumerate_points(5.0, 4.0, 3).is_empty());
    }

    #[test]
    fn classic_periodicity_examples() {
        let hz = build_timescale(ScaleSpec::uniform(1.0, -32, 32)).unwrap();
        assert!(hz.check_classic_periodic(1.0, 1e-9, 0).holds);

        // Union of [(2i-1)h, 2ih] has classic period 2h.
        let union = build_timescale(ScaleSpec::new().with(SegmentSpec::Interval {
            a: -1.0,
            b: 0.0,
            repeat: Some(Repeat::StepBy {
                step: 2.0,
                n_min: -16,
                n_max: 16,
            }),
        }))
        .unwrap();
        assert!(union.check_classic_periodic(2.0, 1e-9, 4).holds);
        assert!(!union.check_classic_periodic(1.0, 1e-9, 4).holds);

        // The closure of the geometric lattice fails at t = 0.
        let qz = build_timescale(
            ScaleSpec::geometric(2.0, -20, 20)
                .with(SegmentSpec::Points { values: vec![0.0] })
                .excluding(&[0.0]),
        )
        .unwrap();
        let report = qz.check_classic_periodic(1.0, 1e-9, 0);
        assert!(!report.holds);
        let (t, y) = report.counterexample.unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(y, -1.0);
    }

    #[test]
    fn spec_text_round_trip() {
        let text = "\
# the closure of the base-2 geometric lattice
kind=geometric q=2 n_min=-20 n_max=20
kind=points values=0
exclude_from_star=0
";
        let spec = ScaleSpec::parse(text).unwrap();
        let ts = build_timescale(spec).unwrap();
        assert_eq!(ts.contains(1024.0, 1e-9).unwrap().param, Param::Index(10));
        assert_eq!(ts.star_excluded_values(), &[0.0]);
    }

    #[test]
    fn parametric_signed_square_scale() {
        let spec = ScaleSpec::new().with(SegmentSpec::Parametric {
            expr: Expression::parse("piecewise(t >= 0, t^2, -(t^2))").unwrap(),
            n_min: -10,
            n_max: 10,
            hard_min: false,
            hard_max: false,
        });
        let ts = build_timescale(spec).unwrap();
        let four = ts.contains(4.0, 1e-9).unwrap();
        assert_eq!(four.param, Param::Index(2));
        assert_eq!(ts.sigma(&four).unwrap().value, 9.0);
        let neg = ts.contains(-9.0, 1e-9).unwrap();
        assert_eq!(neg.param, Param::Index(-3));
        assert_eq!(ts.sigma(&neg).unwrap().value, -4.0);
    }
}
