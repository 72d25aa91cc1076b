//! Event-driven free flight with specular reflection.
//!
//! Particles move at unit speed. Between collisions the motion is a straight
//! line, so the state only changes at boundary events. A trajectory restarts
//! from the exact collision point; re-hitting the same straight side is ruled
//! out by excluding it from the candidate set, and circular arcs require a
//! flight time above [`STEP_FLOOR`] times the table scale.

use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, Result};
use crate::geometry::{ArcSide, Opening, Segment, Table};
use crate::vec2::Vec2;

/// Minimum flight time (relative to the table scale) accepted for an arc hit.
pub const STEP_FLOOR: f64 = 1e-12;

/// Default vertex tolerance relative to the table scale.
pub const DEFAULT_VERTEX_TOLERANCE: f64 = 1e-12;

/// Default per-trajectory event cap.
pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;

/// Phase-space point of a single particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Vec2,
    /// Unit velocity.
    pub direction: Vec2,
    pub time: f64,
    pub collisions: u64,
    /// Segment of the most recent collision, excluded from the next search.
    pub last_segment: Option<usize>,
}

impl ParticleState {
    /// A fresh particle at `position` launched at angle `theta`.
    pub fn new(position: Vec2, theta: f64) -> Self {
        Self::with_direction(position, Vec2::from_angle(theta))
    }

    pub fn with_direction(position: Vec2, direction: Vec2) -> Self {
        Self {
            position,
            direction: direction.normalized(),
            time: 0.0,
            collisions: 0,
            last_segment: None,
        }
    }

    /// Same point with the velocity reversed, ready to retrace its past.
    pub fn reversed(&self) -> Self {
        Self {
            direction: -self.direction,
            last_segment: None,
            ..*self
        }
    }
}

/// One boundary collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Absolute time of the collision.
    pub time: f64,
    pub position: Vec2,
    pub segment: usize,
    /// Inward normal at the collision point.
    pub normal: Vec2,
    /// Angle between the incoming ray and the normal, in `[0, π/2]`.
    pub angle: f64,
    /// Within the default vertex tolerance of a corner.
    pub at_vertex: bool,
    /// Boundary arclength in `[0, P)`.
    pub arclength: f64,
}

/// How a trajectory that meets a corner is continued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexPolicy {
    /// Stop the trajectory and flag it.
    #[default]
    Terminate,
    /// Reflect across the bisector of the corner angle and carry on.
    Bisector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvanceOptions {
    /// Corner tolerance relative to the table scale.
    pub vertex_tolerance: f64,
    pub vertex_policy: VertexPolicy,
    pub event_cap: u64,
}

impl Default for AdvanceOptions {
    fn default() -> Self {
        Self {
            vertex_tolerance: DEFAULT_VERTEX_TOLERANCE,
            vertex_policy: VertexPolicy::Terminate,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    TimeBudget,
    Escaped { time: f64 },
    VertexHit { time: f64 },
    EventCap,
}

impl Termination {
    /// Vertex hits and cap hits are excluded from ensemble statistics.
    pub fn is_flagged(&self) -> bool {
        matches!(self, Termination::VertexHit { .. } | Termination::EventCap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub termination: Termination,
    pub final_state: ParticleState,
    /// Collisions with time `<= t` for each requested sample time `t`.
    pub counts: Vec<u64>,
}

/// Specular reflection `d - 2(d·n)n`, renormalized. The sign of `normal` is
/// irrelevant.
#[inline]
pub fn reflect(direction: Vec2, normal: Vec2) -> Vec2 {
    let n = normal.normalized();
    (direction - n * (2.0 * direction.dot(n))).normalized()
}

/// Angle between `direction` and the normal line, in `[0, π/2]`.
#[inline]
pub fn collision_angle(direction: Vec2, normal: Vec2) -> f64 {
    // atan2 keeps full precision near both 0 and π/2 where arccos does not.
    direction
        .cross(normal)
        .abs()
        .atan2(direction.dot(normal).abs())
        .clamp(0.0, std::f64::consts::FRAC_PI_2)
}

/// True iff the event lies within `tolerance` (absolute length) of a corner.
pub fn is_vertex_hit(event: &CollisionEvent, table: &Table, tolerance: f64) -> bool {
    table
        .corner_distance(event.segment, event.position)
        .is_some_and(|d| d <= tolerance)
}

/// Earliest boundary collision along the ray of `state`.
pub fn next_collision(table: &Table, state: &ParticleState) -> Result<CollisionEvent> {
    let scale = table.scale();
    let floor = STEP_FLOOR * scale;
    let p = state.position;
    let d = state.direction;

    let mut best: Option<(f64, usize)> = None;
    for (id, seg) in table.segments().iter().enumerate() {
        let hit = match *seg {
            Segment::Line { start, normal, .. } => {
                if state.last_segment == Some(id) {
                    continue;
                }
                let closing = -d.dot(normal);
                if closing <= 0.0 {
                    continue;
                }
                Some(((p - start).dot(normal) / closing).max(0.0))
            }
            Segment::Arc {
                center,
                radius,
                side,
            } => arc_hit(p - center, d, radius, side, state.last_segment == Some(id))
                .filter(|&t| t > floor),
        };
        if let Some(t) = hit {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, id));
            }
        }
    }

    let (flight, segment) = best.ok_or_else(|| {
        BilliardError::Internal(format!(
            "ray from {:?} along {:?} never meets the boundary",
            p, d
        ))
    })?;

    let seg = &table.segments()[segment];
    let mut position = p + d * flight;
    // Remove the rounding residue normal to the wall.
    match *seg {
        Segment::Line { start, normal, .. } => {
            position = position - normal * (position - start).dot(normal);
        }
        Segment::Arc { center, radius, .. } => {
            let rel = position - center;
            position = center + rel * (radius / rel.norm());
        }
    }
    let normal = seg.normal_at(position);
    let event = CollisionEvent {
        time: state.time + flight,
        position,
        segment,
        normal,
        angle: collision_angle(d, normal),
        at_vertex: false,
        arclength: table.arclength_of(segment, position),
    };
    Ok(CollisionEvent {
        at_vertex: is_vertex_hit(&event, table, DEFAULT_VERTEX_TOLERANCE * scale),
        ..event
    })
}

/// Flight time to a circle of radius `radius`, with `rel` the position
/// relative to the centre.
fn arc_hit(rel: Vec2, d: Vec2, radius: f64, side: ArcSide, just_hit: bool) -> Option<f64> {
    let b = d.dot(rel);
    let c = rel.norm_sq() - radius * radius;
    let disc = b * b - c;
    match side {
        ArcSide::Inside => {
            let root = disc.max(0.0).sqrt();
            // Larger root of t² + 2bt + c = 0, in a cancellation-free form.
            Some(if b <= 0.0 { root - b } else { -c / (b + root) })
        }
        ArcSide::Outside => {
            // A convex scatterer cannot be hit twice in a row.
            if just_hit || b >= 0.0 || disc < 0.0 {
                return None;
            }
            Some(c / (disc.sqrt() - b))
        }
    }
}

/// Moves the particle to the collision point and applies the reflection.
fn apply_collision(state: &mut ParticleState, event: &CollisionEvent, normal: Vec2) {
    state.position = event.position;
    state.direction = reflect(state.direction, normal);
    state.time = event.time;
    state.collisions += 1;
    state.last_segment = Some(event.segment);
}

/// Evolves a trajectory up to `t_max`, recording collision counts at the
/// ascending `sample_times`.
pub fn advance(
    table: &Table,
    state: ParticleState,
    t_max: f64,
    sample_times: &[f64],
    opening: Option<&Opening>,
    options: &AdvanceOptions,
) -> Result<TrajectoryOutcome> {
    advance_observed(
        table,
        state,
        t_max,
        sample_times,
        opening,
        options,
        |_, _| {},
    )
}

/// Like [`advance`], calling `observe(event, outgoing_direction)` after every
/// reflection.
pub fn advance_observed<F>(
    table: &Table,
    mut state: ParticleState,
    t_max: f64,
    sample_times: &[f64],
    opening: Option<&Opening>,
    options: &AdvanceOptions,
    mut observe: F,
) -> Result<TrajectoryOutcome>
where
    F: FnMut(&CollisionEvent, Vec2),
{
    if options.event_cap == 0 {
        return Err(BilliardError::validation("event cap must be at least 1"));
    }
    if sample_times.last().is_some_and(|&t| t > t_max) {
        return Err(BilliardError::validation(
            "sample times must not exceed t_max",
        ));
    }
    let corner_tol = options.vertex_tolerance * table.scale();
    let mut counts = Vec::with_capacity(sample_times.len());
    let mut pending = sample_times.iter().copied().peekable();
    let start_count = state.collisions;

    let termination = loop {
        let event = next_collision(table, &state)?;
        while pending.next_if(|&t| t < event.time).is_some() {
            counts.push(state.collisions - start_count);
        }
        if event.time > t_max {
            state.position += state.direction * (t_max - state.time);
            state.time = t_max;
            break Termination::TimeBudget;
        }
        if opening.is_some_and(|o| o.covers(event.arclength)) {
            state.position = event.position;
            state.time = event.time;
            break Termination::Escaped { time: event.time };
        }
        if is_vertex_hit(&event, table, corner_tol) {
            match options.vertex_policy {
                VertexPolicy::Terminate => {
                    state.position = event.position;
                    state.time = event.time;
                    break Termination::VertexHit { time: event.time };
                }
                VertexPolicy::Bisector => {
                    let bisector = table
                        .corner_bisector(event.segment, event.position)
                        .unwrap_or(event.normal);
                    apply_collision(&mut state, &event, bisector);
                }
            }
        } else {
            apply_collision(&mut state, &event, event.normal);
        }
        observe(&event, state.direction);
        if state.collisions - start_count >= options.event_cap {
            break Termination::EventCap;
        }
    };

    let last = state.collisions - start_count;
    counts.extend(pending.map(|_| last));
    Ok(TrajectoryOutcome {
        termination,
        final_state: state,
        counts,
    })
}
