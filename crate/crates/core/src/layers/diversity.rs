use super::SoundProfile;

/// Shannon index `−Σ p·ln p` over the non-zero entries, in `[0, ln K]`.
pub fn diversity(fractions: &[f64]) -> f64 {
    let h: f64 = fractions
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    h.max(0.0)
}

/// Lower edges of the tag-count buckets used for the diversity curve; the
/// last bucket is open-ended.
pub const TAG_BUCKETS: [u64; 19] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20, 30, 50, 100, 200, 500, 1000];

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityReport {
    pub segments: usize,
    /// Fraction of profiled segments with zero diversity.
    pub zero_fraction: f64,
    /// Equal-width bins over `(0, ln 6]`: `(lower, upper, count)`, zero-diversity segments excluded.
    pub histogram: Vec<(f64, f64, usize)>,
    /// Per tag-count bucket: `(lower edge, segments, mean diversity)`, zero-diversity segments excluded.
    pub by_tags: Vec<(u64, usize, f64)>,
}

pub fn diversity_report(profiles: &[SoundProfile], bins: usize) -> DiversityReport {
    let bins = bins.max(1);
    let top = (super::SoundCategory::COUNT as f64).ln();
    let width = top / bins as f64;
    let mut histogram: Vec<(f64, f64, usize)> =
        (0..bins).map(|b| (b as f64 * width, (b + 1) as f64 * width, 0)).collect();
    let mut sums = vec![(0usize, 0.0f64); TAG_BUCKETS.len()];
    let mut zeros = 0;
    for p in profiles {
        let h = diversity(&p.fractions());
        if h <= 0.0 {
            zeros += 1;
            continue;
        }
        let b = ((h / width).ceil() as usize).clamp(1, bins) - 1;
        histogram[b].2 += 1;
        let t = TAG_BUCKETS.partition_point(|&edge| edge <= p.tag_total) - 1;
        sums[t].0 += 1;
        sums[t].1 += h;
    }
    if zeros == profiles.len() {
        histogram.clear();
    }
    DiversityReport {
        segments: profiles.len(),
        zero_fraction: if profiles.is_empty() {
            0.0
        } else {
            zeros as f64 / profiles.len() as f64
        },
        histogram,
        by_tags: TAG_BUCKETS
            .iter()
            .zip(sums)
            .filter(|(_, (n, _))| *n > 0)
            .map(|(&edge, (n, s))| (edge, n, s / n as f64))
            .collect(),
    }
}
