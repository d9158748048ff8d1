use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use super::{BufferedSegment, ProjectedPoint};

type Entry = GeomWithData<Rectangle<[f64; 2]>, u32>;

/// R-tree over buffer envelopes with an exact capsule test on the candidates.
/// Built once and read-only afterwards.
pub struct SpatialIndex {
    segments: Vec<BufferedSegment>,
    tree: RTree<Entry>,
}

impl SpatialIndex {
    pub fn build(segments: Vec<BufferedSegment>) -> Self {
        let entries = segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (min, max) = s.envelope();
                GeomWithData::new(Rectangle::from_corners(min, max), i as u32)
            })
            .collect();
        SpatialIndex {
            segments,
            tree: RTree::bulk_load(entries),
        }
    }

    pub fn segments(&self) -> &[BufferedSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Positions of all segments whose buffer contains `p`, ascending.
    pub fn query(&self, p: ProjectedPoint) -> Vec<u32> {
        let envelope = AABB::from_point([p.x, p.y]);
        let mut hits: Vec<u32> = self
            .tree
            .locate_in_envelope_intersecting(&envelope)
            .map(|e| e.data)
            .filter(|&i| self.segments[i as usize].contains(p))
            .collect();
        hits.sort_unstable();
        hits
    }

    pub fn query_ids(&self, p: ProjectedPoint) -> Vec<&str> {
        self.query(p)
            .into_iter()
            .map(|i| self.segments[i as usize].segment_id.as_str())
            .collect()
    }

    /// Brute-force reference for [`SpatialIndex::query`].
    pub fn linear_scan(&self, p: ProjectedPoint) -> Vec<u32> {
        (0..self.segments.len() as u32)
            .filter(|&i| self.segments[i as usize].distance_to(p) <= self.segments[i as usize].width)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::buffer_polyline;
    use super::*;

    fn seg(id: &str, a: (f64, f64), b: (f64, f64)) -> BufferedSegment {
        buffer_polyline(
            id,
            vec![ProjectedPoint::new(a.0, a.1), ProjectedPoint::new(b.0, b.1)],
            22.5,
        )
        .unwrap()
    }

    #[test]
    fn empty_and_single_hits() {
        let index = SpatialIndex::build(vec![
            seg("a", (0.0, 0.0), (100.0, 0.0)),
            seg("b", (0.0, 200.0), (100.0, 200.0)),
        ]);
        assert!(index.query(ProjectedPoint::new(500.0, 500.0)).is_empty());
        assert_eq!(index.query_ids(ProjectedPoint::new(50.0, 10.0)), vec!["a"]);
        assert_eq!(index.query_ids(ProjectedPoint::new(50.0, 190.0)), vec!["b"]);
    }

    #[test]
    fn overlapping_buffers_both_hit() {
        let index = SpatialIndex::build(vec![
            seg("a", (0.0, 0.0), (100.0, 0.0)),
            seg("b", (0.0, 30.0), (100.0, 30.0)),
        ]);
        assert_eq!(index.query_ids(ProjectedPoint::new(50.0, 15.0)), vec!["a", "b"]);
    }
}
