use std::f64::consts::PI;

use geo::{Area, BooleanOps, Coord, LineString, MultiPolygon, Polygon};

use super::{GeoError, ProjectedPoint};

/// Buffer width on each side of a street polyline, in meters.
pub const DEFAULT_BUFFER_M: f64 = 22.5;

/// Maximum gap between a polygonized arc and the true circle.
pub const POLYGON_TOLERANCE_M: f64 = 0.1;

const MIN_ARC_VERTICES: usize = 32;

/// A street polyline dilated by `width` meters with round joins and caps.
///
/// Membership is exact: a point belongs to the buffer when its Euclidean
/// distance to the polyline is at most `width`. [`BufferedSegment::polygon`]
/// gives the polygonized outline within [`POLYGON_TOLERANCE_M`].
#[derive(Debug, Clone)]
pub struct BufferedSegment {
    pub segment_id: String,
    pub polyline: Vec<ProjectedPoint>,
    pub width: f64,
    min: [f64; 2],
    max: [f64; 2],
}

pub fn buffer_polyline(
    segment_id: &str,
    polyline: Vec<ProjectedPoint>,
    width: f64,
) -> Result<BufferedSegment, GeoError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(GeoError::BadWidth(width));
    }
    let length: f64 = polyline.windows(2).map(|w| w[0].distance(w[1])).sum();
    if polyline.len() < 2 || length <= 0.0 {
        return Err(GeoError::ZeroLength(segment_id.to_string()));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in &polyline {
        min = [min[0].min(p.x - width), min[1].min(p.y - width)];
        max = [max[0].max(p.x + width), max[1].max(p.y + width)];
    }
    Ok(BufferedSegment {
        segment_id: segment_id.to_string(),
        polyline,
        width,
        min,
        max,
    })
}

fn point_segment_distance(p: ProjectedPoint, a: ProjectedPoint, b: ProjectedPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(ProjectedPoint::new(a.x + t * dx, a.y + t * dy))
}

/// Vertex count for a full circle so the chord sagitta stays within tolerance.
fn arc_vertices(radius: f64) -> usize {
    let ratio = (1.0 - POLYGON_TOLERANCE_M / radius).clamp(-1.0, 1.0);
    let needed = (PI / ratio.acos()).ceil() as usize;
    needed.max(MIN_ARC_VERTICES)
}

fn capsule(a: ProjectedPoint, b: ProjectedPoint, r: f64, n: usize) -> Polygon<f64> {
    let heading = (b.y - a.y).atan2(b.x - a.x);
    let half = n.div_ceil(2);
    let mut ring = Vec::with_capacity(2 * half + 3);
    for (center, start) in [(b, heading - PI / 2.0), (a, heading + PI / 2.0)] {
        for k in 0..=half {
            let t = start + PI * k as f64 / half as f64;
            ring.push(Coord {
                x: center.x + r * t.cos(),
                y: center.y + r * t.sin(),
            });
        }
    }
    Polygon::new(LineString::new(ring), vec![])
}

impl BufferedSegment {
    /// Minimum distance from `p` to the polyline.
    pub fn distance_to(&self, p: ProjectedPoint) -> f64 {
        self.polyline
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: ProjectedPoint) -> bool {
        self.envelope_contains(p) && self.distance_to(p) <= self.width
    }

    pub fn envelope(&self) -> ([f64; 2], [f64; 2]) {
        (self.min, self.max)
    }

    pub fn envelope_contains(&self, p: ProjectedPoint) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Union of the per-edge capsules. Disks use at least 32 vertices.
    pub fn polygon(&self) -> MultiPolygon<f64> {
        let n = arc_vertices(self.width);
        let mut edges = self
            .polyline
            .windows(2)
            .filter(|w| w[0] != w[1])
            .map(|w| capsule(w[0], w[1], self.width, n));
        let first = MultiPolygon::new(vec![edges.next().expect("non-empty polyline")]);
        edges.fold(first, |acc, cap| acc.union(&MultiPolygon::new(vec![cap])))
    }

    pub fn polygon_area(&self) -> f64 {
        self.polygon().unsigned_area()
    }
}
