use std::collections::{HashMap, HashSet};

use super::{LocalProjection, SpatialIndex};
use crate::ingest::PhotoRecord;
use crate::lexicon::normalize;
use crate::par::Exec;

/// Normalized tags collected on one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentTags {
    pub segment_id: String,
    /// Photos whose position falls inside the segment buffer.
    pub photo_count: u64,
    /// `(tag id, multiplicity)` sorted by tag id; ids index [`SegmentTagTable::vocab`].
    pub tags: Vec<(u32, u64)>,
}

impl SegmentTags {
    pub fn tag_total(&self) -> u64 {
        self.tags.iter().map(|&(_, n)| n).sum()
    }
}

/// `(segment_id, photo_count, [(tag, count)])`.
pub type SegmentRow = (String, u64, Vec<(String, u64)>);

/// Per-segment tag multisets, one entry per input segment in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentTagTable {
    /// Distinct normalized tags, sorted.
    pub vocab: Vec<String>,
    pub segments: Vec<SegmentTags>,
    /// Photos that fell in no buffer.
    pub unassigned: u64,
}

impl SegmentTagTable {
    pub fn tag(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    /// `(tag, multiplicity)` pairs for a segment, in tag order.
    pub fn tags_of(&self, segment: usize) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.segments[segment]
            .tags
            .iter()
            .map(move |&(id, n)| (self.tag(id), n))
    }

    pub fn total_tags(&self) -> u64 {
        self.segments.iter().map(SegmentTags::tag_total).sum()
    }

    /// Builds a table from `(segment_id, photo_count, [(tag, count)])` rows.
    /// Segment order follows `rows`; counts of repeated tags are summed.
    pub fn from_rows(rows: Vec<SegmentRow>, unassigned: u64) -> Self {
        let mut vocab: Vec<String> = rows
            .iter()
            .flat_map(|(_, _, tags)| tags.iter().map(|(t, _)| t.clone()))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        vocab.sort();
        let ids: HashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();
        let segments = rows
            .iter()
            .map(|(segment_id, photo_count, tags)| {
                let mut counts: HashMap<u32, u64> = HashMap::new();
                for (t, n) in tags {
                    *counts.entry(ids[t.as_str()]).or_default() += n;
                }
                let mut tags: Vec<(u32, u64)> = counts.into_iter().filter(|&(_, n)| n > 0).collect();
                tags.sort_unstable();
                SegmentTags {
                    segment_id: segment_id.clone(),
                    photo_count: *photo_count,
                    tags,
                }
            })
            .collect();
        SegmentTagTable {
            vocab,
            segments,
            unassigned,
        }
    }
}

/// Adds each photo's normalized tags to every segment whose buffer contains it.
/// Overlapping buffers all receive the photo; the result does not depend on
/// photo order.
pub fn assign_photos(
    photos: &[PhotoRecord],
    index: &SpatialIndex,
    projection: &LocalProjection,
) -> SegmentTagTable {
    assign_photos_with(photos, index, projection, Exec::default())
}

pub fn assign_photos_with(
    photos: &[PhotoRecord],
    index: &SpatialIndex,
    projection: &LocalProjection,
    exec: Exec,
) -> SegmentTagTable {
    struct Hit {
        segments: Vec<u32>,
        tags: Vec<String>,
    }

    let hits: Vec<Vec<Hit>> = exec.map_chunks(photos, 2048, |chunk| {
        chunk
            .iter()
            .map(|photo| {
                let segments = index.query(projection.project(photo.lon, photo.lat));
                let tags = if segments.is_empty() {
                    Vec::new()
                } else {
                    photo.tags.iter().filter_map(|t| normalize(t)).collect()
                };
                Hit { segments, tags }
            })
            .collect()
    });

    let n = index.len();
    let mut photo_counts = vec![0u64; n];
    let mut per_segment: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut provisional: HashMap<String, u32> = HashMap::new();
    let mut words: Vec<String> = Vec::new();
    let mut unassigned = 0u64;
    let mut ids = Vec::new();
    for hit in hits.into_iter().flatten() {
        if hit.segments.is_empty() {
            unassigned += 1;
            continue;
        }
        ids.clear();
        for tag in hit.tags {
            let next = words.len() as u32;
            let id = *provisional.entry(tag).or_insert_with_key(|k| {
                words.push(k.clone());
                next
            });
            ids.push(id);
        }
        for &s in &hit.segments {
            photo_counts[s as usize] += 1;
            per_segment[s as usize].extend_from_slice(&ids);
        }
    }

    // Renumber tags alphabetically so the table is independent of photo order.
    let mut order: Vec<u32> = (0..words.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| words[a as usize].cmp(&words[b as usize]));
    let mut remap = vec![0u32; words.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let vocab: Vec<String> = order.iter().map(|&i| words[i as usize].clone()).collect();

    let segments = index
        .segments()
        .iter()
        .zip(per_segment)
        .zip(photo_counts)
        .map(|((seg, mut ids), photo_count)| {
            for id in ids.iter_mut() {
                *id = remap[*id as usize];
            }
            ids.sort_unstable();
            let mut tags: Vec<(u32, u64)> = Vec::new();
            for id in ids {
                match tags.last_mut() {
                    Some((last, n)) if *last == id => *n += 1,
                    _ => tags.push((id, 1)),
                }
            }
            SegmentTags {
                segment_id: seg.segment_id.clone(),
                photo_count,
                tags,
            }
        })
        .collect();

    SegmentTagTable {
        vocab,
        segments,
        unassigned,
    }
}

/// Collapses photos sharing owner, coordinates and tag set (bulk uploads),
/// keeping the first of each group.
pub fn dedup_photos(photos: &[PhotoRecord]) -> Vec<PhotoRecord> {
    let mut seen = HashSet::new();
    photos
        .iter()
        .filter(|p| {
            let mut tags: Vec<String> = p.tags.iter().filter_map(|t| normalize(t)).collect();
            tags.sort();
            tags.dedup();
            seen.insert((
                p.owner.clone(),
                p.lon.to_bits(),
                p.lat.to_bits(),
                tags,
            ))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    use super::super::{buffer_polyline, ProjectedPoint};
    use super::*;

    fn photo(id: &str, lon: f64, lat: f64, tags: &[&str]) -> PhotoRecord {
        PhotoRecord {
            photo_id: id.into(),
            lon,
            lat,
            tags: tags.iter().map(|t| t.to_string()).collect(),
            timestamp: None,
            owner: None,
        }
    }

    fn setup() -> (SpatialIndex, LocalProjection) {
        let proj = LocalProjection::new(0.0, 0.0);
        let mk = |id: &str, a: (f64, f64), b: (f64, f64)| {
            buffer_polyline(
                id,
                vec![ProjectedPoint::new(a.0, a.1), ProjectedPoint::new(b.0, b.1)],
                22.5,
            )
            .unwrap()
        };
        let index = SpatialIndex::build(vec![
            mk("a", (0.0, 0.0), (100.0, 0.0)),
            mk("b", (0.0, 30.0), (100.0, 30.0)),
            mk("c", (0.0, 500.0), (100.0, 500.0)),
        ]);
        (index, proj)
    }

    fn at(proj: &LocalProjection, x: f64, y: f64) -> (f64, f64) {
        let ll = proj.unproject(ProjectedPoint::new(x, y));
        (ll[0], ll[1])
    }

    #[test]
    fn single_segment_multiset() {
        let (index, proj) = setup();
        let (lon, lat) = at(&proj, 50.0, -5.0);
        let table = assign_photos(&[photo("p", lon, lat, &["Bird", "car"])], &index, &proj);
        let tags: Vec<(&str, u64)> = table.tags_of(0).collect();
        assert_eq!(tags, vec![("bird", 1), ("car", 1)]);
        assert_eq!(table.segments[0].photo_count, 1);
        assert_eq!(table.segments[1].photo_count, 0);
    }

    #[test]
    fn overlap_counts_for_both() {
        let (index, proj) = setup();
        let (lon, lat) = at(&proj, 50.0, 15.0);
        let table = assign_photos(&[photo("p", lon, lat, &["wind"])], &index, &proj);
        assert_eq!(table.segments[0].tag_total(), 1);
        assert_eq!(table.segments[1].tag_total(), 1);
        assert_eq!(table.total_tags(), 2);
    }

    #[test]
    fn unassigned_counted() {
        let (index, proj) = setup();
        let (lon, lat) = at(&proj, 900.0, 900.0);
        let table = assign_photos(&[photo("p", lon, lat, &["x"])], &index, &proj);
        assert_eq!(table.unassigned, 1);
        assert_eq!(table.total_tags(), 0);
    }

    #[test]
    fn permutation_invariant() {
        let (index, proj) = setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut photos: Vec<PhotoRecord> = (0..300)
            .map(|i| {
                let (lon, lat) = at(&proj, (i * 7 % 140) as f64 - 20.0, (i * 13 % 560) as f64 - 30.0);
                let tags = [["bird", "car", "rain"][i % 3], ["horn", "Bird"][i % 2]];
                photo(&format!("p{i}"), lon, lat, &tags)
            })
            .collect();
        let reference = assign_photos(&photos, &index, &proj);
        for _ in 0..5 {
            photos.shuffle(&mut rng);
            assert_eq!(assign_photos(&photos, &index, &proj), reference);
            assert_eq!(
                assign_photos_with(&photos, &index, &proj, Exec::Sequential),
                reference
            );
        }
    }

    #[test]
    fn rows_round_trip() {
        let (index, proj) = setup();
        let (lon, lat) = at(&proj, 50.0, 15.0);
        let table = assign_photos(&[photo("p", lon, lat, &["wind", "rain", "wind"])], &index, &proj);
        let rows = table
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let tags = table.tags_of(i).map(|(t, n)| (t.to_string(), n)).collect();
                (s.segment_id.clone(), s.photo_count, tags)
            })
            .collect();
        assert_eq!(SegmentTagTable::from_rows(rows, table.unassigned), table);
    }

    #[test]
    fn dedup_collapses_bulk_uploads() {
        let mut a = photo("1", 0.1, 0.1, &["Bird", "tree"]);
        a.owner = Some("u".into());
        let mut b = a.clone();
        b.photo_id = "2".into();
        b.tags = vec!["tree".into(), "bird".into()];
        let mut c = a.clone();
        c.photo_id = "3".into();
        c.owner = Some("v".into());
        let kept = dedup_photos(&[a, b, c]);
        let ids: Vec<&str> = kept.iter().map(|p| p.photo_id.as_str()).collect();
        assert_eq!(ids, vec!["1", "3"]);
    }
}
