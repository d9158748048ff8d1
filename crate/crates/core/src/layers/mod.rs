//! Per-segment layers: sound and emotion profiles, z-scores, street-type
//! averages, dominant categories and Shannon diversity.

mod correlate;
mod diversity;
mod emotion;

pub use correlate::{correlate_columns, CorrelationCell, MIN_SHARED_SEGMENTS};
pub use diversity::{diversity, diversity_report, DiversityReport, TAG_BUCKETS};
pub use emotion::{emotion_profile, emotion_profiles, EmotionLexicon, EmotionProfile};

use std::fmt;

use crate::categories::{argmax_first, SoundCategory};
use crate::geo::SegmentTagTable;
use crate::ingest::StreetType;
use crate::lexicon::SoundLexicon;
use crate::par::Exec;
use crate::stats::StatsError;

/// Sound-tag counts of one segment per top-level category.
///
/// `tag_total` counts only tags that match a sound term, so the fractions of
/// a defined profile sum to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundProfile {
    pub segment: usize,
    pub segment_id: String,
    pub counts: [u64; SoundCategory::COUNT],
    pub tag_total: u64,
}

impl SoundProfile {
    pub fn fraction(&self, c: SoundCategory) -> f64 {
        self.counts[c.index()] as f64 / self.tag_total as f64
    }

    pub fn fractions(&self) -> [f64; SoundCategory::COUNT] {
        SoundCategory::ALL.map(|c| self.fraction(c))
    }
}

/// `None` when no tag matches a sound term.
pub fn sound_profile<'a>(
    segment: usize,
    segment_id: &str,
    tags: impl IntoIterator<Item = (&'a str, u64)>,
    lexicon: &SoundLexicon,
) -> Option<SoundProfile> {
    let mut counts = [0u64; SoundCategory::COUNT];
    for (tag, n) in tags {
        if let Some(c) = lexicon.category(tag) {
            counts[c.index()] += n;
        }
    }
    let tag_total = counts.iter().sum();
    (tag_total > 0).then(|| SoundProfile {
        segment,
        segment_id: segment_id.to_string(),
        counts,
        tag_total,
    })
}

/// Defined profiles of all segments, in segment order.
pub fn sound_profiles(table: &SegmentTagTable, lexicon: &SoundLexicon, exec: Exec) -> Vec<SoundProfile> {
    exec.map_range(table.segments.len(), |s| {
        sound_profile(s, &table.segments[s].segment_id, table.tags_of(s), lexicon)
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Per-column standardization of a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScores<const K: usize> {
    pub z: Vec<[f64; K]>,
    pub mean: [f64; K],
    /// Population standard deviation.
    pub sd: [f64; K],
    /// Columns whose σ vanished; their z are all 0.
    pub degenerate: [bool; K],
}

/// Below this σ a column counts as constant.
pub const SIGMA_EPS: f64 = 1e-12;

/// `z = (x − μ)/σ` per column with population σ; constant columns get z = 0.
pub fn zscores<const K: usize>(rows: &[[f64; K]]) -> Result<ZScores<K>, StatsError> {
    if rows.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; K];
    let mut sd = [0.0; K];
    let mut degenerate = [false; K];
    for k in 0..K {
        mean[k] = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        sd[k] = (rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
        degenerate[k] = sd[k] < SIGMA_EPS;
        if degenerate[k] {
            log::warn!("column {k} is constant across {} rows; z set to 0", rows.len());
        }
    }
    let z = rows
        .iter()
        .map(|r| {
            let mut out = [0.0; K];
            for k in 0..K {
                if !degenerate[k] {
                    out[k] = (r[k] - mean[k]) / sd[k];
                }
            }
            out
        })
        .collect();
    Ok(ZScores {
        z,
        mean,
        sd,
        degenerate,
    })
}

/// Mean z of one category over the segments of one street type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeAverage {
    pub category: SoundCategory,
    pub street_type: StreetType,
    pub n: usize,
    pub mean: f64,
    /// Normal-approximation 95% interval `mean ± 1.96·s/√n`; `None` for n = 1.
    pub ci: Option<(f64, f64)>,
}

/// Rows ordered by category, then street type; types without segments are omitted.
pub fn street_type_average(z: &[[f64; SoundCategory::COUNT]], types: &[StreetType]) -> Vec<TypeAverage> {
    assert_eq!(z.len(), types.len(), "one street type per z row");
    let mut out = Vec::new();
    for c in SoundCategory::ALL {
        for t in StreetType::ALL {
            let values: Vec<f64> = z
                .iter()
                .zip(types)
                .filter(|(_, &ty)| ty == t)
                .map(|(row, _)| row[c.index()])
                .collect();
            if values.is_empty() {
                continue;
            }
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let ci = (n > 1).then(|| {
                let s = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                let half = 1.96 * s / (n as f64).sqrt();
                (mean - half, mean + half)
            });
            out.push(TypeAverage {
                category: c,
                street_type: t,
                n,
                mean,
                ci,
            });
        }
    }
    out
}

/// Default minimum number of sound tags for a dominant-category label.
pub const DEFAULT_MIN_TAGS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominant {
    Category(SoundCategory),
    Insufficient,
}

impl fmt::Display for Dominant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dominant::Category(c) => c.fmt(f),
            Dominant::Insufficient => f.write_str("insufficient"),
        }
    }
}

/// Category with the highest z; ties go to the earlier category in
/// transport, mechanical, human, music, nature, indoor order.
pub fn dominant_category(z: &[f64; SoundCategory::COUNT], tag_total: u64, min_tags: u64) -> Dominant {
    if tag_total < min_tags {
        return Dominant::Insufficient;
    }
    match argmax_first(z) {
        Some(i) => Dominant::Category(SoundCategory::ALL[i]),
        None => Dominant::Insufficient,
    }
}
