//! Planar polygons, the affine deformation families used throughout the
//! crate, and the critical times / angles of the triangle configurations.
//!
//! Conventions: polygons are simple, counterclockwise, with at least three
//! vertices. Edge `i` joins vertex `i` to vertex `i + 1 (mod N)` and carries
//! an opaque side tag that survives affine flows.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Area floor below which a flow image counts as degenerate.
pub const AREA_EPS: f64 = 1e-12;

/// Relative margin at which theorem side-length orderings count as ties.
const HYPOTHESIS_TIE_TOL: f64 = 1e-12;

/// Opaque label attached to one polygon side.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SideTag(pub String);

impl SideTag {
    pub fn new(s: impl Into<String>) -> Self {
        SideTag(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SideTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SideTag {
    fn from(s: &str) -> Self {
        SideTag(s.to_owned())
    }
}

/// Simple counterclockwise polygon with tagged sides.
#[derive(Clone, Debug)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    tags: Vec<SideTag>,
}

impl Polygon {
    /// Build a polygon with default side tags `s0, s1, ...`.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let tags = (0..vertices.len())
            .map(|i| SideTag(format!("s{i}")))
            .collect();
        Self::with_tags(vertices, tags)
    }

    /// Build a polygon with explicit side tags (edge `i` = vertex `i` to `i+1`).
    pub fn with_tags(vertices: Vec<Vec2>, tags: Vec<SideTag>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if tags.len() != vertices.len() {
            return Err(Error::InvalidPolygon(format!(
                "{} tags for {} edges",
                tags.len(),
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let unique: BTreeSet<&SideTag> = tags.iter().collect();
        if unique.len() != tags.len() {
            return Err(Error::InvalidPolygon("duplicate side tag".into()));
        }
        let p = Polygon { vertices, tags };
        if p.signed_area() <= 0.0 {
            return Err(Error::InvalidPolygon(format!(
                "orientation must be counterclockwise (signed area {:.3e})",
                p.signed_area()
            )));
        }
        if !p.is_simple() {
            return Err(Error::InvalidPolygon("self-intersecting boundary".into()));
        }
        Ok(p)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn tags(&self) -> &[SideTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Endpoints of edge `i`.
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    /// Index of the edge carrying `tag`.
    pub fn edge_index(&self, tag: &SideTag) -> Result<usize> {
        self.tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTag(tag.0.clone()))
    }

    pub fn side_length(&self, tag: &SideTag) -> Result<f64> {
        let i = self.edge_index(tag)?;
        let (a, b) = self.edge(i);
        Ok((b - a).norm())
    }

    fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a.x * b.y - b.x * a.y;
        }
        0.5 * s
    }

    /// Shoelace area (positive by the orientation invariant).
    pub fn area(&self) -> f64 {
        self.signed_area()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                (b - a).norm()
            })
            .sum()
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.vertices.len() {
            for j in (i + 1)..self.vertices.len() {
                d = d.max((self.vertices[i] - self.vertices[j]).norm());
            }
        }
        d
    }

    /// Vertex average (used as the fan apex by the mesher).
    pub fn vertex_centroid(&self) -> Vec2 {
        let mut c = Vec2::zeros();
        for v in &self.vertices {
            c += v;
        }
        c / self.vertices.len() as f64
    }

    /// Area centroid.
    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::zeros();
        let mut a6 = 0.0;
        let n = self.vertices.len();
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            c += (p + q) * cross;
            a6 += cross;
        }
        c / (3.0 * a6)
    }

    /// Check convexity: all consecutive-edge cross products >= -1e-12 * diam^2.
    pub fn is_convex(&self) -> bool {
        let tol = -1e-12 * self.diameter().powi(2);
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let u = b - a;
            let v = c - b;
            u.x * v.y - u.y * v.x >= tol
        })
    }

    fn is_simple(&self) -> bool {
        // Pairwise proper-intersection test; adjacent edges share an endpoint
        // and are skipped.
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = self.edge(i);
            for j in (i + 1)..n {
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (c, d) = self.edge(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Unit outer normal of edge `i` (boundary is counterclockwise).
    pub fn outer_normal(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        let t = (b - a).normalize();
        Vec2::new(t.y, -t.x)
    }

    /// Parse the plain-text format: one `x y [tag]` line per vertex,
    /// counterclockwise; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut tags = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::InvalidPolygon(format!("line {}: expected `x y [tag]`", ln + 1));
            let x: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let y: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let tag = it.next().map(|s| SideTag::new(s));
            vertices.push(Vec2::new(x, y));
            tags.push(tag);
        }
        let n = vertices.len();
        let tags: Vec<SideTag> = tags
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.unwrap_or_else(|| SideTag(format!("s{i}"))))
            .collect();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("only {n} vertices in file")));
        }
        Self::with_tags(vertices, tags)
    }

    /// Render the plain-text vertex-list format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (v, t) in self.vertices.iter().zip(&self.tags) {
            s.push_str(&format!("{} {} {}\n", v.x, v.y, t));
        }
        s
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2| -> bool {
        orient(p, q, r) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

/// Named parametric deformation family: flow map `F_t` plus the generating
/// velocity field `eta(t, x)` with `d/dt F_t(x) = eta(t, F_t(x))`.
#[derive(Clone, Debug, PartialEq)]
pub enum AffineFlow {
    /// `F_t(x, y) = (x, (1+t) y)`; stretches the height above the x-axis.
    HeightStretch,
    /// `F_t(x, y) = (x, (1-t) y)`; compresses the height, needs `t < 1`.
    HeightCompress,
    /// `F_t(x, y) = ((1+t) x - t cot(alpha) y, y)`; slides the apex ray so the
    /// leg through the origin stretches while the opposite vertex stays put.
    LegStretch { alpha: f64 },
    /// Same map as `HeightStretch`, applied to the rhombus family with the
    /// vertical diagonal stretching.
    RhombusDiagonal,
    /// `F_t(x, y) = ((1+t) x, y)`; stretches one rectangle side.
    RectangleSide,
    /// Rigid translation `F_t(x) = x + t d` (analytic test fixture).
    Translate { direction: Vec2 },
    /// Homothety `F_t(x) = e^t x` (analytic test fixture).
    Scale,
}

impl AffineFlow {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AffineFlow::HeightStretch => "height-stretch",
            AffineFlow::HeightCompress => "height-compress",
            AffineFlow::LegStretch { .. } => "leg-stretch",
            AffineFlow::RhombusDiagonal => "rhombus-diagonal",
            AffineFlow::RectangleSide => "rectangle-side",
            AffineFlow::Translate { .. } => "translate",
            AffineFlow::Scale => "scale",
        }
    }

    /// Whether `t` is inside the kind's admissible open range.
    pub fn admissible(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        match self {
            AffineFlow::HeightStretch | AffineFlow::RhombusDiagonal => t > -1.0,
            AffineFlow::HeightCompress => t < 1.0,
            AffineFlow::LegStretch { .. } | AffineFlow::RectangleSide => t > -1.0,
            AffineFlow::Translate { .. } | AffineFlow::Scale => true,
        }
    }

    /// Flow map `F_t`.
    pub fn map(&self, t: f64, p: Vec2) -> Vec2 {
        match self {
            AffineFlow::HeightStretch | AffineFlow::RhombusDiagonal => {
                Vec2::new(p.x, (1.0 + t) * p.y)
            }
            AffineFlow::HeightCompress => Vec2::new(p.x, (1.0 - t) * p.y),
            AffineFlow::LegStretch { alpha } => {
                let cot = alpha.cos() / alpha.sin();
                Vec2::new((1.0 + t) * p.x - t * cot * p.y, p.y)
            }
            AffineFlow::RectangleSide => Vec2::new((1.0 + t) * p.x, p.y),
            AffineFlow::Translate { direction } => p + t * direction,
            AffineFlow::Scale => p * t.exp(),
        }
    }

    /// Velocity field `eta(t, x)` evaluated at a point of the *deformed*
    /// domain, so that `d/dt F_t(x) = eta(t, F_t(x))` exactly.
    pub fn velocity(&self, t: f64, x: Vec2) -> Vec2 {
        match self {
            AffineFlow::HeightStretch | AffineFlow::RhombusDiagonal => {
                Vec2::new(0.0, x.y / (1.0 + t))
            }
            AffineFlow::HeightCompress => Vec2::new(0.0, -x.y / (1.0 - t)),
            AffineFlow::LegStretch { alpha } => {
                let cot = alpha.cos() / alpha.sin();
                Vec2::new((x.x - x.y * cot) / (1.0 + t), 0.0)
            }
            AffineFlow::RectangleSide => Vec2::new(x.x / (1.0 + t), 0.0),
            AffineFlow::Translate { direction } => *direction,
            AffineFlow::Scale => x,
        }
    }
}

/// Map a polygon through `F_t`, preserving tags and orientation.
pub fn apply_flow(f: &AffineFlow, t: f64, p: &Polygon) -> Result<Polygon> {
    if !f.admissible(t) {
        return Err(Error::DegenerateFlowTime {
            t,
            reason: format!("outside admissible range of {}", f.kind_name()),
        });
    }
    let vertices: Vec<Vec2> = p.vertices.iter().map(|&v| f.map(t, v)).collect();
    let q = Polygon::with_tags(vertices, p.tags.clone()).map_err(|e| Error::DegenerateFlowTime {
        t,
        reason: e.to_string(),
    })?;
    if q.area() < AREA_EPS {
        return Err(Error::DegenerateFlowTime {
            t,
            reason: format!("image area {:.3e} below {AREA_EPS:.0e}", q.area()),
        });
    }
    Ok(q)
}

/// Velocity field of `f` at time `t` and point `x` (thin wrapper kept as a
/// named operation).
pub fn flow_velocity(f: &AffineFlow, t: f64, x: Vec2) -> Result<Vec2> {
    if !f.admissible(t) {
        return Err(Error::DegenerateFlowTime {
            t,
            reason: format!("outside admissible range of {}", f.kind_name()),
        });
    }
    Ok(f.velocity(t, x))
}

/// Rescale about the origin so the area equals `target`.
pub fn normalize_area(p: &Polygon, target: f64) -> Result<Polygon> {
    if !(target > 0.0) {
        return Err(Error::InvalidPolygon(format!(
            "normalize_area target must be positive, got {target}"
        )));
    }
    let s = (target / p.area()).sqrt();
    let vertices = p.vertices.iter().map(|&v| v * s).collect();
    Polygon::with_tags(vertices, p.tags.clone())
}

/// Which critical time a triangle configuration is asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticalKind {
    /// Height stretch `C_t = (1+t) C`; hypothesis `|AB| > |BC| >= |AC|`.
    Stretch,
    /// Height compress `C_t = (1-t) C`; hypothesis `|AB| < |BC| <= |AC|`,
    /// non-obtuse.
    Compress,
}

/// A triangle placed per one of the theorem hypotheses, with named roles.
///
/// For the stretch/compress configurations: `A = (-a, 0)`, `B = (b, 0)` with
/// `a, b > 0` and `C = (0, h)` on the positive y-axis. For the isosceles
/// leg-stretch configuration: `A` at the origin, `B = (1, 0)`,
/// `C = (cos alpha, sin alpha)`.
#[derive(Clone, Debug)]
pub struct TriangleConfig {
    pub a: Vec2,
    pub b: Vec2,
    pub c: Vec2,
}

impl TriangleConfig {
    /// Canonicalize an arbitrary vertex triple into the height-stretch
    /// placement: longest side AB on the x-axis, C on the positive y-axis,
    /// `|AB| > |BC| >= |AC|`. Boundary cases within relative 1e-12 of the
    /// equality `|AB| = |BC|` count as violations (floating point cannot
    /// represent the exact tie).
    pub fn stretch(raw: [Vec2; 3]) -> Result<Self> {
        let cfg = canonicalize_on_longest_or_shortest(raw, true)?;
        let (ab, bc, ac) = cfg.side_lengths();
        if !(ab - bc > HYPOTHESIS_TIE_TOL * ab && bc >= ac - HYPOTHESIS_TIE_TOL * ab) {
            return Err(Error::HypothesisViolated(format!(
                "need |AB| > |BC| >= |AC|, got {ab:.6} / {bc:.6} / {ac:.6}"
            )));
        }
        Ok(cfg)
    }

    /// Canonicalize into the height-compress placement: shortest side AB on
    /// the x-axis, C on the positive y-axis, `|AB| < |BC| <= |AC|`,
    /// non-obtuse. The same 1e-12 tie tolerance as [`Self::stretch`].
    pub fn compress(raw: [Vec2; 3]) -> Result<Self> {
        let cfg = canonicalize_on_longest_or_shortest(raw, false)?;
        let (ab, bc, ac) = cfg.side_lengths();
        if !(bc - ab > HYPOTHESIS_TIE_TOL * bc && bc <= ac + HYPOTHESIS_TIE_TOL * bc) {
            return Err(Error::HypothesisViolated(format!(
                "need |AB| < |BC| <= |AC|, got {ab:.6} / {bc:.6} / {ac:.6}"
            )));
        }
        if !cfg.is_non_obtuse() {
            return Err(Error::HypothesisViolated(
                "compress configuration requires a non-obtuse triangle".into(),
            ));
        }
        Ok(cfg)
    }

    /// Isosceles configuration for the leg-stretch flow: `|AB| = |AC| = 1`,
    /// aperture `alpha` at the origin.
    pub fn isosceles(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
            return Err(Error::HypothesisViolated(format!(
                "aperture must lie in (0, pi), got {alpha}"
            )));
        }
        Ok(TriangleConfig {
            a: Vec2::zeros(),
            b: Vec2::new(1.0, 0.0),
            c: Vec2::new(alpha.cos(), alpha.sin()),
        })
    }

    pub fn side_lengths(&self) -> (f64, f64, f64) {
        (
            (self.b - self.a).norm(),
            (self.c - self.b).norm(),
            (self.c - self.a).norm(),
        )
    }

    pub fn is_non_obtuse(&self) -> bool {
        let dot_at = |p: Vec2, q: Vec2, r: Vec2| (q - p).dot(&(r - p));
        let tol = -1e-12 * (self.b - self.a).norm_squared();
        dot_at(self.a, self.b, self.c) >= tol
            && dot_at(self.b, self.a, self.c) >= tol
            && dot_at(self.c, self.a, self.b) >= tol
    }

    /// Counterclockwise polygon with sides tagged AB, BC, CA.
    pub fn polygon(&self) -> Result<Polygon> {
        Polygon::with_tags(
            vec![self.a, self.b, self.c],
            vec![SideTag::new("AB"), SideTag::new("BC"), SideTag::new("CA")],
        )
    }
}

/// Rotate/reflect/translate a raw triangle so that the longest (stretch) or
/// shortest (compress) side lies on the x-axis with the foot of the altitude
/// from the remaining vertex at the origin and that vertex above.
fn canonicalize_on_longest_or_shortest(raw: [Vec2; 3], longest: bool) -> Result<TriangleConfig> {
    let area2 = orient(raw[0], raw[1], raw[2]).abs();
    let scale = raw
        .iter()
        .flat_map(|v| [v.x.abs(), v.y.abs()])
        .fold(1.0f64, f64::max);
    if area2 <= 1e-12 * scale * scale {
        return Err(Error::HypothesisViolated("collinear vertices".into()));
    }
    // Pick the base side.
    let mut best = 0usize;
    for i in 1..3 {
        let li = (raw[(i + 1) % 3] - raw[i]).norm();
        let lb = (raw[(best + 1) % 3] - raw[best]).norm();
        if (longest && li > lb) || (!longest && li < lb) {
            best = i;
        }
    }
    let p = raw[best];
    let q = raw[(best + 1) % 3];
    let c = raw[(best + 2) % 3];
    // Rigid motion sending p-q to the x-axis.
    let t_hat = (q - p).normalize();
    let rot = |v: Vec2| Vec2::new(t_hat.x * v.x + t_hat.y * v.y, -t_hat.y * v.x + t_hat.x * v.y);
    let mut p2 = Vec2::zeros();
    let mut q2 = rot(q - p);
    let mut c2 = rot(c - p);
    q2.y = 0.0;
    if c2.y < 0.0 {
        // Reflect across the x-axis.
        c2.y = -c2.y;
    }
    // Shift the foot of the altitude from C to the origin.
    let shift = c2.x;
    p2.x -= shift;
    q2.x -= shift;
    c2.x = 0.0;
    // Assign roles: A on the negative x-axis, B on the positive side, with
    // the labeling chosen so B is the endpoint farther from the foot for the
    // stretch case (|BC| >= |AC|) and nearer for the compress case.
    let (mut a_pt, mut b_pt) = if p2.x <= q2.x { (p2, q2) } else { (q2, p2) };
    // Now a_pt.x <= 0 <= b_pt.x is not guaranteed (foot may fall outside the
    // base for obtuse triangles); role assignment only needs the ordering.
    let dist_a = (c2 - a_pt).norm();
    let dist_b = (c2 - b_pt).norm();
    let want_b_farther = longest;
    let b_is_farther = dist_b >= dist_a;
    if want_b_farther != b_is_farther {
        std::mem::swap(&mut a_pt, &mut b_pt);
        // Re-mirror so the triangle keeps A left of B.
        a_pt.x = -a_pt.x;
        b_pt.x = -b_pt.x;
    }
    Ok(TriangleConfig {
        a: a_pt,
        b: b_pt,
        c: c2,
    })
}

/// Critical time of the stretch (`t1`) or compress (`t2`) flow: the unique
/// positive solution of `|BA| = |BC_t|`.
pub fn critical_time(cfg: &TriangleConfig, kind: CriticalKind) -> Result<f64> {
    let (ab, bc, ac) = cfg.side_lengths();
    let h = cfg.c.y;
    let b = cfg.b.x.abs();
    match kind {
        CriticalKind::Stretch => {
            if !(ab - bc > HYPOTHESIS_TIE_TOL * ab && bc >= ac - HYPOTHESIS_TIE_TOL * ab) {
                return Err(Error::HypothesisViolated(format!(
                    "stretch needs |AB| > |BC| >= |AC|, got {ab:.6} / {bc:.6} / {ac:.6}"
                )));
            }
            // (1+t)^2 h^2 + b^2 = |AB|^2
            let rhs = (ab * ab - b * b) / (h * h);
            Ok(rhs.sqrt() - 1.0)
        }
        CriticalKind::Compress => {
            if !(bc - ab > HYPOTHESIS_TIE_TOL * bc && bc <= ac + HYPOTHESIS_TIE_TOL * bc) {
                return Err(Error::HypothesisViolated(format!(
                    "compress needs |AB| < |BC| <= |AC|, got {ab:.6} / {bc:.6} / {ac:.6}"
                )));
            }
            // (1-t)^2 h^2 + b^2 = |AB|^2
            let rhs = (ab * ab - b * b) / (h * h);
            Ok(1.0 - rhs.sqrt())
        }
    }
}

/// `cot(theta_t) = 2 cot(alpha) + cot(beta)` -- the median angle identity of
/// the leg-stretch flow (law of sines applied twice).
pub fn median_cot_theta(alpha: f64, beta: f64) -> f64 {
    2.0 * alpha.cos() / alpha.sin() + beta.cos() / beta.sin()
}

/// Convenience constructors for the standard domains.
pub mod shapes {
    use super::*;

    /// Axis-aligned rectangle `[0, w] x [0, h]`, sides tagged AB (bottom),
    /// BC (right), CD (top), DA (left).
    pub fn rectangle(w: f64, h: f64) -> Result<Polygon> {
        Polygon::with_tags(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(w, 0.0),
                Vec2::new(w, h),
                Vec2::new(0.0, h),
            ],
            vec![
                SideTag::new("AB"),
                SideTag::new("BC"),
                SideTag::new("CD"),
                SideTag::new("DA"),
            ],
        )
    }

    /// Unit square `[0, 1]^2`.
    pub fn unit_square() -> Polygon {
        rectangle(1.0, 1.0).expect("unit square is valid")
    }

    /// Square `[-s/2, s/2]^2` centered at the origin.
    pub fn centered_square(s: f64) -> Polygon {
        let h = 0.5 * s;
        Polygon::with_tags(
            vec![
                Vec2::new(-h, -h),
                Vec2::new(h, -h),
                Vec2::new(h, h),
                Vec2::new(-h, h),
            ],
            vec![
                SideTag::new("AB"),
                SideTag::new("BC"),
                SideTag::new("CD"),
                SideTag::new("DA"),
            ],
        )
        .expect("centered square is valid")
    }

    /// Rhombus with vertices `A=(-a,0)`, `B=(0,-a(1+t))`, `C=(a,0)`,
    /// `D=(0,a(1+t))`; `t = 0` is the diagonal square.
    pub fn rhombus(a: f64, t: f64) -> Result<Polygon> {
        Polygon::with_tags(
            vec![
                Vec2::new(-a, 0.0),
                Vec2::new(0.0, -a * (1.0 + t)),
                Vec2::new(a, 0.0),
                Vec2::new(0.0, a * (1.0 + t)),
            ],
            vec![
                SideTag::new("AB"),
                SideTag::new("BC"),
                SideTag::new("CD"),
                SideTag::new("DA"),
            ],
        )
    }

    /// Regular n-gon inscribed in the circle of radius `r` about the origin.
    pub fn regular_ngon(n: usize, r: f64) -> Result<Polygon> {
        let vertices = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Vec2::new(r * th.cos(), r * th.sin())
            })
            .collect();
        Polygon::new(vertices)
    }

    /// Equilateral triangle with side `s`, base on the x-axis from the origin.
    pub fn equilateral(s: f64) -> Polygon {
        Polygon::with_tags(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(s, 0.0),
                Vec2::new(0.5 * s, 0.5 * 3f64.sqrt() * s),
            ],
            vec![SideTag::new("AB"), SideTag::new("BC"), SideTag::new("CA")],
        )
        .expect("equilateral triangle is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn area_examples() {
        assert_relative_eq!(shapes::unit_square().area(), 1.0, max_relative = 1e-15);
        let tri = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_relative_eq!(tri.area(), 0.5, max_relative = 1e-15);
        let a = 1.3;
        let t = 0.4;
        let rh = shapes::rhombus(a, t).unwrap();
        assert_relative_eq!(rh.area(), 2.0 * a * a * (1.0 + t), max_relative = 1e-14);
    }

    #[test]
    fn orientation_and_simplicity_enforced() {
        let cw = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.0),
        ]);
        assert!(matches!(cw, Err(Error::InvalidPolygon(_))));
        let bowtie = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ]);
        assert!(bowtie.is_err());
    }

    #[test]
    fn apply_flow_examples() {
        let sq = shapes::unit_square();
        let same = apply_flow(&AffineFlow::HeightStretch, 0.0, &sq).unwrap();
        for (u, v) in sq.vertices().iter().zip(same.vertices()) {
            assert_eq!(u, v);
        }
        let tall = apply_flow(&AffineFlow::HeightStretch, 1.0, &sq).unwrap();
        assert_relative_eq!(tall.area(), 2.0, max_relative = 1e-15);
        assert_eq!(tall.vertices()[2], Vec2::new(1.0, 2.0));
        assert_eq!(tall.tags(), sq.tags());

        // Leg stretch moves B to (1+t, 0) and keeps C fixed.
        let alpha = 1.1;
        let cfg = TriangleConfig::isosceles(alpha).unwrap();
        let tri = cfg.polygon().unwrap();
        let t = 0.7;
        let out = apply_flow(&AffineFlow::LegStretch { alpha }, t, &tri).unwrap();
        assert_relative_eq!(out.vertices()[1].x, 1.0 + t, max_relative = 1e-14);
        assert_relative_eq!(out.vertices()[1].y, 0.0, epsilon = 1e-14);
        assert_relative_eq!(out.vertices()[2].x, alpha.cos(), max_relative = 1e-12);
        assert_relative_eq!(out.vertices()[2].y, alpha.sin(), max_relative = 1e-14);
    }

    #[test]
    fn flow_velocity_examples() {
        let v = flow_velocity(&AffineFlow::HeightStretch, 0.0, Vec2::new(3.0, 2.0)).unwrap();
        assert_eq!(v, Vec2::new(0.0, 2.0));
        let v = flow_velocity(&AffineFlow::RectangleSide, 1.0, Vec2::new(4.0, 7.0)).unwrap();
        assert_eq!(v, Vec2::new(2.0, 0.0));
        let v = flow_velocity(
            &AffineFlow::LegStretch {
                alpha: std::f64::consts::FRAC_PI_2,
            },
            0.0,
            Vec2::new(0.3, 0.9),
        )
        .unwrap();
        assert_relative_eq!(v.x, 0.3, max_relative = 1e-15);
        assert_eq!(v.y, 0.0);
    }

    #[test]
    fn flow_map_velocity_consistency() {
        // Central difference of F_t matches eta(t, F_t) to O(h^2).
        let flows = [
            AffineFlow::HeightStretch,
            AffineFlow::HeightCompress,
            AffineFlow::LegStretch { alpha: 0.9 },
            AffineFlow::RhombusDiagonal,
            AffineFlow::RectangleSide,
            AffineFlow::Translate {
                direction: Vec2::new(0.3, -0.8),
            },
            AffineFlow::Scale,
        ];
        let h = 1e-4;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for f in &flows {
            for _ in 0..100 {
                let t = 0.4 * next().abs();
                let x = Vec2::new(2.0 * next(), 2.0 * next());
                let fd = (f.map(t + h, x) - f.map(t - h, x)) / (2.0 * h);
                let eta = f.velocity(t, f.map(t, x));
                assert!(
                    (fd - eta).norm() <= 50.0 * h * h,
                    "{} fd {:?} vs eta {:?}",
                    f.kind_name(),
                    fd,
                    eta
                );
            }
        }
    }

    #[test]
    fn height_stretch_area_is_exact() {
        let tri = Polygon::new(vec![
            Vec2::new(-0.4, 0.0),
            Vec2::new(1.2, 0.0),
            Vec2::new(0.0, 0.5),
        ])
        .unwrap();
        for &t in &[0.1, 0.5, 1.0, 2.0] {
            let out = apply_flow(&AffineFlow::HeightStretch, t, &tri).unwrap();
            assert_relative_eq!(out.area(), (1.0 + t) * tri.area(), max_relative = 1e-14);
        }
    }

    #[test]
    fn normalize_area_examples() {
        let sq = shapes::unit_square();
        let big = normalize_area(&sq, 4.0).unwrap();
        assert_relative_eq!(big.area(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(big.vertices()[2].x, 2.0, max_relative = 1e-12);

        let rect = shapes::rectangle(1.0, 2.0).unwrap();
        let unit = normalize_area(&rect, 1.0).unwrap();
        assert_relative_eq!(unit.area(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            unit.vertices()[1].x,
            1.0 / 2f64.sqrt(),
            max_relative = 1e-12
        );

        // Identity at the current area, and idempotent at a fixed target.
        let same = normalize_area(&rect, rect.area()).unwrap();
        assert_relative_eq!(same.vertices()[2].y, 2.0, max_relative = 1e-12);
        let twice = normalize_area(&normalize_area(&rect, 3.0).unwrap(), 3.0).unwrap();
        let once = normalize_area(&rect, 3.0).unwrap();
        for (u, v) in twice.vertices().iter().zip(once.vertices()) {
            assert_relative_eq!((u - v).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn critical_time_examples() {
        let cfg = TriangleConfig::stretch([
            Vec2::new(-0.4, 0.0),
            Vec2::new(1.2, 0.0),
            Vec2::new(0.0, 0.5),
        ])
        .unwrap();
        let t1 = critical_time(&cfg, CriticalKind::Stretch).unwrap();
        assert_relative_eq!(t1, 4.48f64.sqrt() - 1.0, max_relative = 1e-12);
        // |BA| = |BC_{t1}| at the critical time.
        let c_t = Vec2::new(0.0, (1.0 + t1) * cfg.c.y);
        assert_relative_eq!(
            (cfg.b - cfg.a).norm(),
            (c_t - cfg.b).norm(),
            max_relative = 1e-12
        );

        // Equilateral: |AB| = |BC| is a boundary case and must be rejected.
        let eq = shapes::equilateral(1.0);
        let raw = [eq.vertices()[0], eq.vertices()[1], eq.vertices()[2]];
        assert!(matches!(
            TriangleConfig::stretch(raw),
            Err(Error::HypothesisViolated(_))
        ));

        let cfg = TriangleConfig::compress([
            Vec2::new(-0.8, 0.0),
            Vec2::new(0.4, 0.0),
            Vec2::new(0.0, 1.5),
        ])
        .unwrap();
        let t2 = critical_time(&cfg, CriticalKind::Compress).unwrap();
        assert_relative_eq!(t2, 1.0 - 1.28f64.sqrt() / 1.5, max_relative = 1e-12);
        let c_t = Vec2::new(0.0, (1.0 - t2) * cfg.c.y);
        assert_relative_eq!(
            (cfg.b - cfg.a).norm(),
            (c_t - cfg.b).norm(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn canonicalization_accepts_shuffled_and_displaced_triangles() {
        // Same triangle as above but rotated, translated, and re-ordered.
        let rot = 0.83f64;
        let (s, c) = rot.sin_cos();
        let xf = |v: Vec2| Vec2::new(c * v.x - s * v.y + 3.0, s * v.x + c * v.y - 2.0);
        let raw = [
            xf(Vec2::new(0.0, 0.5)),
            xf(Vec2::new(1.2, 0.0)),
            xf(Vec2::new(-0.4, 0.0)),
        ];
        let cfg = TriangleConfig::stretch(raw).unwrap();
        assert_relative_eq!(cfg.a.x, -0.4, max_relative = 1e-12);
        assert_relative_eq!(cfg.b.x, 1.2, max_relative = 1e-12);
        assert_relative_eq!(cfg.c.y, 0.5, max_relative = 1e-12);
        let t1 = critical_time(&cfg, CriticalKind::Stretch).unwrap();
        assert_relative_eq!(t1, 4.48f64.sqrt() - 1.0, max_relative = 1e-10);
    }

    #[test]
    fn median_cot_theta_examples() {
        use std::f64::consts::PI;
        assert_relative_eq!(
            median_cot_theta(PI / 3.0, PI / 3.0),
            3f64.sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            median_cot_theta(PI / 2.0, PI / 4.0),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            median_cot_theta(PI / 3.0, PI / 2.0),
            2.0 / 3f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn polygon_text_roundtrip() {
        let p = shapes::rectangle(2.0, 1.0).unwrap();
        let text = p.to_text();
        let q = Polygon::parse(&text).unwrap();
        assert_eq!(p.len(), q.len());
        for (u, v) in p.vertices().iter().zip(q.vertices()) {
            assert_eq!(u, v);
        }
        assert_eq!(p.tags(), q.tags());

        let with_comments = "# a triangle\n0 0 base\n1 0\n0.2 0.9 hyp # apex edge\n";
        let t = Polygon::parse(with_comments).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.tags()[0], SideTag::new("base"));
        assert_eq!(t.tags()[1], SideTag::new("s1"));
    }

    #[test]
    fn degenerate_flow_time_rejected() {
        let sq = shapes::unit_square();
        assert!(matches!(
            apply_flow(&AffineFlow::HeightCompress, 1.0, &sq),
            Err(Error::DegenerateFlowTime { .. })
        ));
        assert!(matches!(
            apply_flow(&AffineFlow::HeightCompress, 1.0 - 1e-14, &sq),
            Err(Error::DegenerateFlowTime { .. })
        ));
    }
}
