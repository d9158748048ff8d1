//! Soundwalk analysis and the sound-to-perception projection onto segments.

use nalgebra::{SMatrix, SymmetricEigen};
use thiserror::Error;

use crate::categories::{argmax_first, Perception, SoundCategory, WalkSound};
use crate::ingest::SoundwalkRecord;
use crate::stats::{quartile_flags, spearman_matrix};

const NS: usize = WalkSound::COUNT;
const NF: usize = Perception::COUNT;
const NC: usize = SoundCategory::COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("need at least {needed} soundwalk records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("category map: {0}")]
    BadCategoryMap(String),
}

fn require(records: usize, needed: usize) -> Result<(), PerceptionError> {
    if records < needed {
        return Err(PerceptionError::TooFewRecords { needed, got: records });
    }
    Ok(())
}

fn sound_column(records: &[SoundwalkRecord], c: WalkSound) -> Vec<f64> {
    records.iter().map(|r| f64::from(r.sound(c))).collect()
}

fn perception_column(records: &[SoundwalkRecord], f: Perception) -> Vec<f64> {
    records.iter().map(|r| f64::from(r.perception(f))).collect()
}

/// Spearman matrices among the sound scores and among the perception scores.
/// Cells involving a constant column are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundwalkCorrelations {
    pub sounds: Vec<Vec<Option<f64>>>,
    pub perceptions: Vec<Vec<Option<f64>>>,
}

pub fn soundwalk_cross_correlations(records: &[SoundwalkRecord]) -> Result<SoundwalkCorrelations, PerceptionError> {
    require(records.len(), 10)?;
    let sounds: Vec<Vec<f64>> = WalkSound::ALL.iter().map(|&c| sound_column(records, c)).collect();
    let perceptions: Vec<Vec<f64>> = Perception::ALL.iter().map(|&f| perception_column(records, f)).collect();
    let out = SoundwalkCorrelations {
        sounds: spearman_matrix(&sounds),
        perceptions: spearman_matrix(&perceptions),
    };
    for (name, m) in [("sound", &out.sounds), ("perception", &out.perceptions)] {
        if m.iter().flatten().any(Option::is_none) {
            log::warn!("constant {name} column: some correlations are undefined");
        }
    }
    Ok(out)
}

/// Upper-quartile co-occurrence counts of soundwalk scores and the derived
/// probabilities.
///
/// With `Q4(x)` the number of records where column `x` is in its upper
/// quartile, `Q4(c*) = Σ_c Q4(c)` and `Q4(f*) = Σ_f Q4(f)`:
/// `p(c|f) = Q4(c∧f)/Q4(f)`, `p(c) = Q4(c)/Q4(c*)`, `p(f) = Q4(f)/Q4(f*)` and
/// `p(f|c) = p(c|f)·p(f)/p(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    pub records: usize,
    pub q4_sound: [u64; NS],
    pub q4_perception: [u64; NF],
    /// `[sound][perception]`.
    pub q4_joint: [[u64; NF]; NS],
    pub p_sound: [f64; NS],
    pub p_perception: [f64; NF],
    pub p_sound_given_perception: [[f64; NF]; NS],
    pub p_perception_given_sound: [[f64; NF]; NS],
    /// Perceptions never in their upper quartile; their conditionals are set to 0.
    pub undefined: [bool; NF],
}

impl ConditionalTable {
    pub fn q4_sound_total(&self) -> u64 {
        self.q4_sound.iter().sum()
    }

    pub fn q4_perception_total(&self) -> u64 {
        self.q4_perception.iter().sum()
    }

    pub fn p(&self, f: Perception, c: WalkSound) -> f64 {
        self.p_perception_given_sound[c.index()][f.index()]
    }

    /// Derives every probability from the counts.
    pub fn from_counts(
        records: usize,
        q4_sound: [u64; NS],
        q4_perception: [u64; NF],
        q4_joint: [[u64; NF]; NS],
    ) -> Self {
        let c_star: u64 = q4_sound.iter().sum();
        let f_star: u64 = q4_perception.iter().sum();
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p_sound = q4_sound.map(|q| ratio(q, c_star));
        let p_perception = q4_perception.map(|q| ratio(q, f_star));
        let undefined = q4_perception.map(|q| q == 0);
        if undefined.iter().any(|&u| u) {
            log::warn!("a perception never reaches its upper quartile; its conditionals are set to 0");
        }
        let mut p_cf = [[0.0; NF]; NS];
        let mut p_fc = [[0.0; NF]; NS];
        let mut clamped = false;
        for c in 0..NS {
            for f in 0..NF {
                p_cf[c][f] = ratio(q4_joint[c][f], q4_perception[f]);
                if !undefined[f] && p_sound[c] > 0.0 {
                    let p = p_cf[c][f] * p_perception[f] / p_sound[c];
                    clamped |= p > 1.0;
                    p_fc[c][f] = p.min(1.0);
                }
            }
        }
        if clamped {
            log::warn!("some p(f|c) exceeded 1 and were capped");
        }
        ConditionalTable {
            records,
            q4_sound,
            q4_perception,
            q4_joint,
            p_sound,
            p_perception,
            p_sound_given_perception: p_cf,
            p_perception_given_sound: p_fc,
            undefined,
        }
    }
}

pub fn conditional_probabilities(records: &[SoundwalkRecord]) -> Result<ConditionalTable, PerceptionError> {
    require(records.len(), 8)?;
    let flags = |col: Vec<f64>| quartile_flags(&col).expect("at least four values").flags;
    let sound: Vec<Vec<bool>> = WalkSound::ALL.iter().map(|&c| flags(sound_column(records, c))).collect();
    let perc: Vec<Vec<bool>> = Perception::ALL.iter().map(|&f| flags(perception_column(records, f))).collect();
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as u64;
    let mut joint = [[0u64; NF]; NS];
    for c in 0..NS {
        for f in 0..NF {
            joint[c][f] = sound[c].iter().zip(&perc[f]).filter(|(a, b)| **a && **b).count() as u64;
        }
    }
    Ok(ConditionalTable::from_counts(
        records.len(),
        std::array::from_fn(|c| count(&sound[c])),
        std::array::from_fn(|f| count(&perc[f])),
        joint,
    ))
}

/// Principal axes of the perception scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: [f64; NF],
    /// Eigenvalues of the sample covariance, descending.
    pub variances: [f64; NF],
    /// Share of total variance per component; sums to 1 unless all variance is zero.
    pub explained: [f64; NF],
    /// `components[k]` holds the loadings of component `k`; the first
    /// non-zero loading of each is positive.
    pub components: [[f64; NF]; NF],
    pub rank_deficient: bool,
}

impl Pca {
    /// Coordinates of a row in component space.
    pub fn scores(&self, row: &[f64; NF]) -> [f64; NF] {
        std::array::from_fn(|k| (0..NF).map(|i| (row[i] - self.mean[i]) * self.components[k][i]).sum())
    }
}

pub fn principal_components(records: &[SoundwalkRecord]) -> Result<Pca, PerceptionError> {
    let rows: Vec<[f64; NF]> = records.iter().map(|r| r.perceptions.map(f64::from)).collect();
    principal_components_of(&rows)
}

/// Eigen-decomposition of the sample covariance of `rows`.
pub fn principal_components_of(rows: &[[f64; NF]]) -> Result<Pca, PerceptionError> {
    require(rows.len(), 9)?;
    let n = rows.len() as f64;
    let mean: [f64; NF] = std::array::from_fn(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n);
    let mut cov = SMatrix::<f64, NF, NF>::zeros();
    for r in rows {
        for i in 0..NF {
            for j in 0..NF {
                cov[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    cov /= n - 1.0;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..NF).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let variances: [f64; NF] = std::array::from_fn(|k| eig.eigenvalues[order[k]].max(0.0));
    let total: f64 = variances.iter().sum();
    let components: [[f64; NF]; NF] = std::array::from_fn(|k| {
        let mut v: [f64; NF] = std::array::from_fn(|i| eig.eigenvectors[(i, order[k])]);
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = v.map(|x| -x);
            }
        }
        v
    });
    let tol = 1e-10 * variances[0].max(1.0);
    let rank_deficient = variances.iter().any(|&v| v <= tol);
    if rank_deficient {
        log::warn!("perception covariance is rank-deficient");
    }
    Ok(Pca {
        mean,
        variances,
        explained: variances.map(|v| if total > 0.0 { v / total } else { 0.0 }),
        components,
        rank_deficient,
    })
}

/// Weights from the six taxonomy categories to the five soundwalk sound
/// categories; each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMap {
    pub weights: [[f64; NS]; NC],
}

impl Default for CategoryMap {
    /// transport→traffic, mechanical→other, human→individuals,
    /// music→individuals, nature→nature, indoor→other.
    fn default() -> Self {
        let mut weights = [[0.0; NS]; NC];
        for (c, s) in [
            (SoundCategory::Transport, WalkSound::Traffic),
            (SoundCategory::Mechanical, WalkSound::Other),
            (SoundCategory::Human, WalkSound::Individuals),
            (SoundCategory::Music, WalkSound::Individuals),
            (SoundCategory::Nature, WalkSound::Nature),
            (SoundCategory::Indoor, WalkSound::Other),
        ] {
            weights[c.index()][s.index()] = 1.0;
        }
        CategoryMap { weights }
    }
}

impl CategoryMap {
    /// Reads `taxonomy_category,soundwalk_category,weight` rows. Categories
    /// without rows are an error, as are rows that do not sum to 1.
    pub fn parse<R: std::io::Read>(reader: R) -> Result<Self, PerceptionError> {
        let bad = PerceptionError::BadCategoryMap;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_lowercase)
            .collect();
        if header != ["taxonomy_category", "soundwalk_category", "weight"] {
            return Err(bad(format!(
                "expected header taxonomy_category,soundwalk_category,weight, got {}",
                header.join(",")
            )));
        }
        let mut weights = [[0.0; NS]; NC];
        let mut seen = [false; NC];
        for (k, record) in rdr.records().enumerate() {
            let line = k + 2;
            let record = record.map_err(|e| bad(format!("line {line}: {e}")))?;
            let c: SoundCategory = record[0].parse().map_err(|e| bad(format!("line {line}: {e}")))?;
            let s: WalkSound = record[1].parse().map_err(|e| bad(format!("line {line}: {e}")))?;
            let w: f64 = record[2]
                .parse()
                .ok()
                .filter(|w: &f64| w.is_finite() && *w >= 0.0)
                .ok_or_else(|| bad(format!("line {line}: weight `{}` is not a non-negative number", &record[2])))?;
            weights[c.index()][s.index()] += w;
            seen[c.index()] = true;
        }
        for c in SoundCategory::ALL {
            let sum: f64 = weights[c.index()].iter().sum();
            if !seen[c.index()] || (sum - 1.0).abs() > 1e-9 {
                return Err(bad(format!("weights for `{c}` sum to {sum}, expected 1")));
            }
        }
        Ok(CategoryMap { weights })
    }

    /// Soundwalk-category shares of a six-category profile.
    pub fn apply(&self, fractions: &[f64; NC]) -> [f64; NS] {
        std::array::from_fn(|s| (0..NC).map(|c| fractions[c] * self.weights[c][s]).sum())
    }
}

/// Perception scores of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionRow {
    /// `p_j(f) = Σ_c p(f|c)·p_j(c)`.
    pub p: [f64; NF],
    /// `None` below the tag threshold.
    pub argmax: Option<Perception>,
    /// Every `p_j(f)` is zero, so the argmax is only the tie-break order.
    pub degenerate: bool,
}

/// `Σ_c p(f|c)·p_c` for a distribution over the soundwalk categories.
pub fn perception_scores(shares: &[f64; NS], table: &ConditionalTable) -> [f64; NF] {
    std::array::from_fn(|f| (0..NS).map(|c| table.p_perception_given_sound[c][f] * shares[c]).sum())
}

pub fn segment_perception(
    fractions: &[f64; NC],
    tag_total: u64,
    table: &ConditionalTable,
    map: &CategoryMap,
    min_tags: u64,
) -> PerceptionRow {
    let p = perception_scores(&map.apply(fractions), table);
    let degenerate = p.iter().all(|&v| v == 0.0);
    let argmax = (tag_total >= min_tags)
        .then(|| argmax_first(&p).map(|i| Perception::ALL[i]))
        .flatten();
    PerceptionRow { p, argmax, degenerate }
}
