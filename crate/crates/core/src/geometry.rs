//! Billiard tables, their boundary parameterization and boundary openings.
//!
//! Conventions:
//! - Regular polygons are inscribed in a circle of radius `r` centred at the
//!   origin. Vertex `k` sits at angle `2πk/m`; side `k` runs from vertex `k`
//!   to vertex `k + 1` (counterclockwise).
//! - The circle table is centred at the origin.
//! - The Sinai table is the square `[0, L]²` with the scatterer disk centred at
//!   `(L/2, L/2)`.
//! - Arclength `s = 0` is at vertex 0 (polygon), at `(r, 0)` (circle) and at
//!   the corner `(0, 0)` (Sinai). The Sinai square sides occupy `[0, 4L)`
//!   and the disk occupies `[4L, 4L + 2πR)`, traversed counterclockwise from
//!   its rightmost point.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, Result};
use crate::vec2::Vec2;

/// Geometry parameters of a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TableSpec {
    /// Regular `m`-gon inscribed in a circle of radius `r`.
    Polygon {
        m: u32,
        r: f64,
    },
    Circle {
        r: f64,
    },
    /// Square of side `l` with a central disk of radius `radius`.
    Sinai {
        l: f64,
        radius: f64,
    },
}

impl TableSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TableSpec::Polygon { m, r } => {
                if m < 3 {
                    return Err(BilliardError::validation(format!(
                        "polygon needs m >= 3 sides, got m = {m}"
                    )));
                }
                check_length("polygon circumradius r", r)
            }
            TableSpec::Circle { r } => check_length("circle radius r", r),
            TableSpec::Sinai { l, radius } => {
                check_length("Sinai square side L", l)?;
                check_length("Sinai disk radius R", radius)?;
                if radius >= l / 2.0 {
                    return Err(BilliardError::validation(format!(
                        "Sinai disk must lie strictly inside the square: R = {radius} >= L/2 = {}",
                        l / 2.0
                    )));
                }
                Ok(())
            }
        }
    }

    /// Length scale used for tolerances: the circumradius or the square side.
    pub fn scale(&self) -> f64 {
        match *self {
            TableSpec::Polygon { r, .. } | TableSpec::Circle { r } => r,
            TableSpec::Sinai { l, .. } => l,
        }
    }
}

fn check_length(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(BilliardError::validation(format!(
            "{name} must be a positive finite number, got {value}"
        )))
    }
}

/// Which side of a circular arc is accessible to the particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcSide {
    /// Particle moves inside the circle (circle table).
    Inside,
    /// Particle moves outside the circle (Sinai scatterer).
    Outside,
}

/// One piece of the table boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line {
        start: Vec2,
        end: Vec2,
        /// Unit normal pointing into the accessible region.
        normal: Vec2,
        length: f64,
    },
    Arc {
        center: Vec2,
        radius: f64,
        side: ArcSide,
    },
}

impl Segment {
    fn line(start: Vec2, end: Vec2) -> Self {
        let edge = end - start;
        let length = edge.norm();
        // Counterclockwise boundary: the interior is on the left.
        let normal = (edge * (1.0 / length)).perp();
        Segment::Line {
            start,
            end,
            normal,
            length,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { length, .. } => length,
            Segment::Arc { radius, .. } => TAU * radius,
        }
    }

    /// Inward unit normal at a point on this segment.
    pub fn normal_at(&self, p: Vec2) -> Vec2 {
        match *self {
            Segment::Line { normal, .. } => normal,
            Segment::Arc { center, side, .. } => {
                let radial = (p - center).normalized();
                match side {
                    ArcSide::Inside => -radial,
                    ArcSide::Outside => radial,
                }
            }
        }
    }

    /// Arclength of `p` measured from the start of this segment.
    pub fn local_arclength(&self, p: Vec2) -> f64 {
        match *self {
            Segment::Line { start, length, .. } => (p - start).norm().min(length),
            Segment::Arc { center, radius, .. } => radius * (p - center).angle(),
        }
    }

    /// Point at local arclength `u` along the segment.
    pub fn point_at(&self, u: f64) -> Vec2 {
        match *self {
            Segment::Line {
                start, end, length, ..
            } => start + (end - start) * (u / length),
            Segment::Arc { center, radius, .. } => center + Vec2::from_angle(u / radius) * radius,
        }
    }
}

/// A table built from a [`TableSpec`], immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    spec: TableSpec,
    segments: Vec<Segment>,
    /// Arclength at which each segment starts.
    offsets: Vec<f64>,
    /// Corner positions, in boundary order.
    corners: Vec<Vec2>,
    area: f64,
    perimeter: f64,
}

/// Result of [`Table::boundary_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Vec2,
    /// Inward unit normal; `None` at a corner where it is undefined.
    pub normal: Option<Vec2>,
    pub segment: usize,
    pub at_vertex: bool,
}

impl Table {
    /// Builds the table geometry. Fails when the spec violates its invariants.
    pub fn new(spec: TableSpec) -> Result<Self> {
        spec.validate()?;
        let (segments, corners, area, perimeter) = match spec {
            TableSpec::Polygon { m, r } => {
                let mf = m as f64;
                let corners: Vec<Vec2> = (0..m)
                    .map(|k| Vec2::from_angle(TAU * k as f64 / mf) * r)
                    .collect();
                let segments = (0..m as usize)
                    .map(|k| Segment::line(corners[k], corners[(k + 1) % m as usize]))
                    .collect();
                let area = 0.5 * mf * r * r * (TAU / mf).sin();
                let perimeter = 2.0 * mf * r * (PI / mf).sin();
                (segments, corners, area, perimeter)
            }
            TableSpec::Circle { r } => {
                let seg = Segment::Arc {
                    center: Vec2::ZERO,
                    radius: r,
                    side: ArcSide::Inside,
                };
                (vec![seg], Vec::new(), PI * r * r, TAU * r)
            }
            TableSpec::Sinai { l, radius } => {
                let corners = vec![
                    Vec2::new(0.0, 0.0),
                    Vec2::new(l, 0.0),
                    Vec2::new(l, l),
                    Vec2::new(0.0, l),
                ];
                let mut segments: Vec<Segment> = (0..4)
                    .map(|k| Segment::line(corners[k], corners[(k + 1) % 4]))
                    .collect();
                segments.push(Segment::Arc {
                    center: Vec2::new(l / 2.0, l / 2.0),
                    radius,
                    side: ArcSide::Outside,
                });
                let area = l * l - PI * radius * radius;
                let perimeter = 4.0 * l + TAU * radius;
                (segments, corners, area, perimeter)
            }
        };
        let mut offsets = Vec::with_capacity(segments.len());
        let mut running = 0.0;
        for seg in &segments {
            offsets.push(running);
            running += seg.length();
        }
        Ok(Self {
            spec,
            segments,
            offsets,
            corners,
            area,
            perimeter,
        })
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Polygon vertices or Sinai square corners; empty for the circle.
    pub fn vertices(&self) -> &[Vec2] {
        &self.corners
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn scale(&self) -> f64 {
        self.spec.scale()
    }

    /// Mean free flight time `πA/P` under the uniform phase-space measure
    /// (unit speed).
    pub fn mean_collision_time(&self) -> f64 {
        PI * self.area / self.perimeter
    }

    /// Arclength interval `[start, end)` covered by segment `id`.
    pub fn segment_span(&self, id: usize) -> (f64, f64) {
        let start = self.offsets[id];
        (start, start + self.segments[id].length())
    }

    /// Global arclength of a point lying on segment `id`.
    pub fn arclength_of(&self, id: usize, p: Vec2) -> f64 {
        let s = self.offsets[id] + self.segments[id].local_arclength(p);
        if s >= self.perimeter {
            s - self.perimeter
        } else {
            s
        }
    }

    /// Maps arclength `s` (taken modulo the perimeter) to a segment id and
    /// the local arclength along it.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.rem_euclid(self.perimeter);
        let id = match self.offsets.partition_point(|&o| o <= s) {
            0 => 0,
            k => k - 1,
        };
        (id, (s - self.offsets[id]).min(self.segments[id].length()))
    }

    /// Boundary position, inward normal and segment at arclength `s`.
    pub fn boundary_point(&self, s: f64) -> BoundaryPoint {
        let (segment, u) = self.locate(s);
        let seg = &self.segments[segment];
        let at_vertex = match seg {
            Segment::Line { length, .. } => u == 0.0 || u == *length,
            Segment::Arc { .. } => false,
        };
        let position = match seg {
            Segment::Line { start, end, .. } if at_vertex => {
                if u == 0.0 {
                    *start
                } else {
                    *end
                }
            }
            _ => seg.point_at(u),
        };
        BoundaryPoint {
            position,
            normal: (!at_vertex).then(|| seg.normal_at(position)),
            segment,
            at_vertex,
        }
    }

    /// True iff `p` lies strictly inside the accessible region.
    pub fn contains(&self, p: Vec2) -> bool {
        match self.spec {
            TableSpec::Circle { r } => p.norm_sq() < r * r,
            TableSpec::Polygon { .. } => self.segments.iter().all(|seg| match *seg {
                Segment::Line { start, normal, .. } => (p - start).dot(normal) > 0.0,
                Segment::Arc { .. } => unreachable!("polygons have straight sides"),
            }),
            TableSpec::Sinai { l, radius } => {
                let c = Vec2::new(l / 2.0, l / 2.0);
                p.x > 0.0 && p.x < l && p.y > 0.0 && p.y < l && (p - c).norm_sq() > radius * radius
            }
        }
    }

    /// Axis-aligned box `(min, max)` enclosing the accessible region.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self.spec {
            TableSpec::Circle { r } => (Vec2::new(-r, -r), Vec2::new(r, r)),
            TableSpec::Sinai { l, .. } => (Vec2::ZERO, Vec2::new(l, l)),
            TableSpec::Polygon { .. } => {
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in &self.corners {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        }
    }

    /// Distance from a point on segment `id` to the nearest corner that
    /// terminates the segment, or `None` for arcs.
    pub fn corner_distance(&self, id: usize, p: Vec2) -> Option<f64> {
        match self.segments[id] {
            Segment::Line { start, end, .. } => Some(p.distance(start).min(p.distance(end))),
            Segment::Arc { .. } => None,
        }
    }

    /// Arclength position of corner `k`.
    pub fn vertex_arclength(&self, k: usize) -> Result<f64> {
        if k >= self.corners.len() {
            return Err(BilliardError::validation(format!(
                "vertex index {k} out of range: table has {} vertices",
                self.corners.len()
            )));
        }
        Ok(self.offsets[k])
    }

    /// Inward unit bisector of the corner of segment `id` nearest to `p`.
    pub(crate) fn corner_bisector(&self, id: usize, p: Vec2) -> Option<Vec2> {
        let n = self.corners.len();
        let (start, end) = match self.segments[id] {
            Segment::Line { start, end, .. } => (start, end),
            Segment::Arc { .. } => return None,
        };
        // Corner k joins segment k - 1 (arriving) and segment k (leaving).
        let corner = if p.distance(start) <= p.distance(end) {
            id
        } else {
            (id + 1) % n
        };
        let leaving = self.segments[corner].normal_at(p);
        let arriving = self.segments[(corner + n - 1) % n].normal_at(p);
        Some((leaving + arriving).normalized())
    }
}

/// Where to center an opening on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "at", content = "value", rename_all = "lowercase")]
pub enum Placement {
    /// Midpoint of segment `k`.
    Side(usize),
    /// Centered on corner `k`.
    Vertex(usize),
    /// Explicit arclength.
    Arclength(f64),
}

impl Placement {
    /// Default placement: midpoint of segment 0 for polygons and the Sinai
    /// table, `s = 0` for the circle.
    pub fn default_for(spec: &TableSpec) -> Self {
        match spec {
            TableSpec::Circle { .. } => Placement::Arclength(0.0),
            _ => Placement::Side(0),
        }
    }

    pub fn resolve(&self, table: &Table) -> Result<f64> {
        match *self {
            Placement::Side(k) => {
                if k >= table.segments().len() {
                    return Err(BilliardError::validation(format!(
                        "side index {k} out of range: table has {} segments",
                        table.segments().len()
                    )));
                }
                let (a, b) = table.segment_span(k);
                Ok(0.5 * (a + b))
            }
            Placement::Vertex(k) => table.vertex_arclength(k),
            Placement::Arclength(s) => {
                if !s.is_finite() {
                    return Err(BilliardError::validation(
                        "opening arclength must be finite",
                    ));
                }
                Ok(s.rem_euclid(table.perimeter()))
            }
        }
    }
}

impl std::str::FromStr for Placement {
    type Err = BilliardError;

    /// Parses `side:k`, `vertex:k` or `s:<value>`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || {
            BilliardError::validation(format!(
                "placement must be side:k, vertex:k or s:<value>, got '{text}'"
            ))
        };
        let (kind, value) = text.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "side" => value.trim().parse().map(Placement::Side).map_err(|_| bad()),
            "vertex" => value
                .trim()
                .parse()
                .map(Placement::Vertex)
                .map_err(|_| bad()),
            "s" => value
                .trim()
                .parse()
                .map(Placement::Arclength)
                .map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Placement::Side(k) => write!(f, "side:{k}"),
            Placement::Vertex(k) => write!(f, "vertex:{k}"),
            Placement::Arclength(s) => write!(f, "s:{s}"),
        }
    }
}

/// A hole in the boundary: the open arclength interval
/// `(center - width/2, center + width/2)` taken modulo the perimeter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    center: f64,
    width: f64,
    perimeter: f64,
    hosts: Vec<(usize, (f64, f64))>,
}

impl Opening {
    pub fn new(table: &Table, center: f64, width: f64) -> Result<Self> {
        let perimeter = table.perimeter();
        if !(width.is_finite() && width > 0.0) {
            return Err(BilliardError::validation(format!(
                "opening width must be positive, got {width}"
            )));
        }
        if width >= perimeter {
            return Err(BilliardError::validation(format!(
                "opening width {width} must be smaller than the perimeter {perimeter}"
            )));
        }
        if !center.is_finite() {
            return Err(BilliardError::validation("opening center must be finite"));
        }
        let center = center.rem_euclid(perimeter);
        let lo = center - width / 2.0;
        let hi = center + width / 2.0;

        if let TableSpec::Sinai { l, .. } = table.spec() {
            let square = 4.0 * l;
            // Interval must stay inside [0, 4L) after wrapping.
            let ok = if lo >= 0.0 && hi <= square {
                true
            } else if lo < 0.0 {
                lo + perimeter >= square && hi <= square
            } else {
                false
            };
            if !ok {
                return Err(BilliardError::validation(
                    "Sinai opening must lie on the outer square, not on the disk",
                ));
            }
        }

        let mut hosts = Vec::new();
        for id in 0..table.segments().len() {
            let (a, b) = table.segment_span(id);
            for shift in [-perimeter, 0.0, perimeter] {
                let (ilo, ihi) = (lo.max(a + shift), hi.min(b + shift));
                if ilo < ihi {
                    hosts.push((id, (ilo - shift, ihi - shift)));
                }
            }
        }
        hosts.sort_by(|x, y| x.0.cmp(&y.0).then(x.1 .0.total_cmp(&y.1 .0)));

        Ok(Self {
            center,
            width,
            perimeter,
            hosts,
        })
    }

    pub fn from_placement(table: &Table, placement: Placement, width: f64) -> Result<Self> {
        Self::new(table, placement.resolve(table)?, width)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// `(segment id, local arclength sub-interval)` pieces covered by the opening.
    pub fn hosts(&self) -> &[(usize, (f64, f64))] {
        &self.hosts
    }

    /// True iff boundary arclength `s` lies strictly inside the opening.
    pub fn covers(&self, s: f64) -> bool {
        let mut d = (s - self.center).rem_euclid(self.perimeter);
        if d > self.perimeter / 2.0 {
            d -= self.perimeter;
        }
        d.abs() < self.width / 2.0
    }
}
