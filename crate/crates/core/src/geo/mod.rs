//! Local projection, segment buffering and photo-to-segment assignment.

mod assign;
mod buffer;
mod index;

pub use assign::{assign_photos, assign_photos_with, dedup_photos, SegmentRow, SegmentTagTable, SegmentTags};
pub use buffer::{buffer_polyline, BufferedSegment, DEFAULT_BUFFER_M, POLYGON_TOLERANCE_M};
pub use index::SpatialIndex;

use thiserror::Error;

use crate::ingest::StreetSegment;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("segment `{0}` has zero length after projection")]
    ZeroLength(String),
    #[error("buffer width must be positive, got {0}")]
    BadWidth(f64),
    #[error("no segments to derive a projection reference from")]
    NoSegments,
}

/// Planar coordinates in meters east/north of the projection reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
}

impl ProjectedPoint {
    pub fn new(x: f64, y: f64) -> Self {
        ProjectedPoint { x, y }
    }

    pub fn distance(self, other: ProjectedPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Equirectangular projection around a fixed reference point.
///
/// `x = R·Δlon·cos(lat_ref)`, `y = R·Δlat`, angles in radians. Distortion at
/// city scale (< 60 km) stays far below the buffer width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProjection {
    pub ref_lon: f64,
    pub ref_lat: f64,
    cos_ref: f64,
}

impl LocalProjection {
    pub fn new(ref_lon: f64, ref_lat: f64) -> Self {
        LocalProjection {
            ref_lon,
            ref_lat,
            cos_ref: ref_lat.to_radians().cos(),
        }
    }

    /// Reference at the mean of all segment vertices.
    pub fn centroid_of(segments: &[StreetSegment]) -> Result<Self, GeoError> {
        let (mut lon, mut lat, mut n) = (0.0, 0.0, 0usize);
        for v in segments.iter().flat_map(|s| &s.polyline) {
            lon += v[0];
            lat += v[1];
            n += 1;
        }
        if n == 0 {
            return Err(GeoError::NoSegments);
        }
        Ok(LocalProjection::new(lon / n as f64, lat / n as f64))
    }

    pub fn project(&self, lon: f64, lat: f64) -> ProjectedPoint {
        ProjectedPoint {
            x: EARTH_RADIUS_M * (lon - self.ref_lon).to_radians() * self.cos_ref,
            y: EARTH_RADIUS_M * (lat - self.ref_lat).to_radians(),
        }
    }

    pub fn unproject(&self, p: ProjectedPoint) -> [f64; 2] {
        [
            self.ref_lon + (p.x / (EARTH_RADIUS_M * self.cos_ref)).to_degrees(),
            self.ref_lat + (p.y / EARTH_RADIUS_M).to_degrees(),
        ]
    }

    pub fn project_polyline(&self, polyline: &[[f64; 2]]) -> Vec<ProjectedPoint> {
        polyline.iter().map(|v| self.project(v[0], v[1])).collect()
    }
}

pub fn project(lon: f64, lat: f64, reference: [f64; 2]) -> ProjectedPoint {
    LocalProjection::new(reference[0], reference[1]).project(lon, lat)
}

/// Mean of the projected vertices; used as the segment's location in spatial statistics.
pub fn vertex_centroid(points: &[ProjectedPoint]) -> ProjectedPoint {
    let n = points.len().max(1) as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    ProjectedPoint::new(sx / n, sy / n)
}

/// Buffers every segment with one projection; fails on the first zero-length polyline.
pub fn buffer_segments(
    segments: &[StreetSegment],
    projection: &LocalProjection,
    width: f64,
) -> Result<Vec<BufferedSegment>, GeoError> {
    segments
        .iter()
        .map(|s| {
            buffer_polyline(
                &s.segment_id,
                projection.project_polyline(&s.polyline),
                width,
            )
        })
        .collect()
}
