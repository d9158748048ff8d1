//! Rank statistics: Spearman correlation, a spatially corrected significance
//! test, and upper-quartile indicators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::geo::ProjectedPoint;
use crate::par::Exec;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: a series is constant")]
    Constant,
}

/// Default number of equal-width distance classes for the spatial correction.
pub const DISTANCE_CLASSES: usize = 20;
/// Pair budget for autocorrelation estimates; larger sets are subsampled.
pub const MAX_PAIRS: usize = 1_000_000;
const PAIR_SAMPLE_SEED: u64 = 0x5eed_c11f;

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(a: &[f64], b: &[f64], needed: usize) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < needed {
        return Err(StatsError::TooFew {
            needed,
            got: a.len(),
        });
    }
    Ok(())
}

/// Spearman's ρ: the Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_pair(a, b, 3)?;
    pearson(&average_ranks(a), &average_ranks(b)).ok_or(StatsError::Constant)
}

/// Pairwise Spearman matrix over columns; undefined cells are `None`.
pub fn spearman_matrix(columns: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let ranks: Vec<Vec<f64>> = columns.iter().map(|c| average_ranks(c)).collect();
    (0..columns.len())
        .map(|i| {
            (0..columns.len())
                .map(|j| {
                    if columns[i].len() < 3 {
                        None
                    } else {
                        pearson(&ranks[i], &ranks[j])
                    }
                })
                .collect()
        })
        .collect()
}

/// Two-sided p-value of a correlation `rho` under Student-t with `n - 2` degrees of freedom.
/// `n` may be fractional (effective sample size).
pub fn correlation_p_value(rho: f64, n: f64) -> f64 {
    let df = n - 2.0;
    if rho == 0.0 {
        return 1.0;
    }
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    if df <= 0.0 {
        return f64::NAN;
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Pair structure for autocorrelation estimates by distance class.
///
/// Classes are equal-width up to the 90th percentile of pairwise distances;
/// farther pairs are ignored. With more than [`MAX_PAIRS`] pairs a fixed-seed
/// uniform sample stands in for the full set.
#[derive(Debug, Clone)]
pub struct SpatialLags {
    n: usize,
    classes: usize,
    pairs: Vec<(u32, u32, u16)>,
    /// Unordered pairs represented by one stored pair.
    scale: f64,
    pub max_distance: f64,
}

impl SpatialLags {
    pub fn new(locations: &[ProjectedPoint], classes: usize) -> Self {
        Self::with_exec(locations, classes, Exec::default())
    }

    pub fn with_exec(locations: &[ProjectedPoint], classes: usize, exec: Exec) -> Self {
        let n = locations.len();
        let classes = classes.max(1);
        let total = n * n.saturating_sub(1) / 2;
        let raw: Vec<(u32, u32)> = if total <= MAX_PAIRS {
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i as u32, j as u32)))
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SAMPLE_SEED);
            (0..MAX_PAIRS)
                .map(|_| {
                    let i = rng.gen_range(0..n);
                    let mut j = rng.gen_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i.min(j) as u32, i.max(j) as u32)
                })
                .collect()
        };
        let distances: Vec<f64> = exec
            .map_chunks(&raw, 65_536, |chunk| {
                chunk
                    .iter()
                    .map(|&(i, j)| locations[i as usize].distance(locations[j as usize]))
                    .collect::<Vec<_>>()
            })
            .concat();

        let max_distance = if distances.is_empty() {
            0.0
        } else {
            let mut sorted = distances.clone();
            sorted.sort_by(f64::total_cmp);
            let rank = ((0.9 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            sorted[rank - 1]
        };
        let width = max_distance / classes as f64;
        let pairs = if max_distance > 0.0 {
            raw.iter()
                .zip(&distances)
                .filter(|&(_, &d)| d <= max_distance)
                .map(|(&(i, j), &d)| (i, j, ((d / width) as usize).min(classes - 1) as u16))
                .collect()
        } else {
            Vec::new()
        };
        SpatialLags {
            n,
            classes,
            pairs,
            scale: if raw.is_empty() {
                0.0
            } else {
                total as f64 / raw.len() as f64
            },
            max_distance,
        }
    }

    /// All points coincide, so no distance structure exists.
    pub fn is_degenerate(&self) -> bool {
        self.max_distance <= 0.0
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `Σ_d W_d·r_a(d)·r_b(d)` including the zero-lag term `W_0 = n`, where
    /// `W_d` counts ordered pairs in class `d` and `r(d)` is the Moran-type
    /// autocorrelation of the series at that class.
    pub fn cross_autocorrelation_sum(&self, a: &[f64], b: &[f64], exec: Exec) -> f64 {
        let center = |x: &[f64]| -> (Vec<f64>, f64) {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            let z: Vec<f64> = x.iter().map(|v| v - m).collect();
            let var = z.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
            (z, var)
        };
        let (za, va) = center(a);
        let (zb, vb) = center(b);
        let k = self.classes;
        let partials = exec.map_chunks(&self.pairs, 65_536, |chunk| {
            let mut sa = vec![0.0; k];
            let mut sb = vec![0.0; k];
            let mut count = vec![0u64; k];
            for &(i, j, c) in chunk {
                let (i, j, c) = (i as usize, j as usize, c as usize);
                sa[c] += za[i] * za[j];
                sb[c] += zb[i] * zb[j];
                count[c] += 1;
            }
            (sa, sb, count)
        });
        let mut sa = vec![0.0; k];
        let mut sb = vec![0.0; k];
        let mut count = vec![0u64; k];
        for (pa, pb, pc) in partials {
            for c in 0..k {
                sa[c] += pa[c];
                sb[c] += pb[c];
                count[c] += pc[c];
            }
        }
        let mut total = self.n as f64;
        for c in 0..k {
            if count[c] == 0 {
                continue;
            }
            let m = count[c] as f64;
            let ra = sa[c] / (m * va);
            let rb = sb[c] / (m * vb);
            total += 2.0 * m * self.scale * ra * rb;
        }
        total
    }
}

/// Outcome of the spatially corrected correlation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CliffordTest {
    pub rho: f64,
    pub n: usize,
    pub n_eff: f64,
    pub p: f64,
    /// p-value of the uncorrected test with `n - 2` degrees of freedom.
    pub classical_p: f64,
    /// Locations carried no distance structure; the classical test was used.
    pub fallback: bool,
}

/// Spearman ρ with Clifford's modified t-test,
/// applied to the ranked series.
///
/// `n_eff = 1 + n² / Σ_d W_d·r_a(d)·r_b(d)`, clamped to `[3, n]`, then
/// `t = ρ·sqrt((n_eff − 2)/(1 − ρ²))` against Student-t with `n_eff − 2`
/// degrees of freedom.
pub fn clifford_pvalue(
    a: &[f64],
    b: &[f64],
    locations: &[ProjectedPoint],
    distance_classes: usize,
) -> Result<CliffordTest, StatsError> {
    if locations.len() != a.len() {
        return Err(StatsError::LengthMismatch(a.len(), locations.len()));
    }
    check_pair(a, b, 20)?;
    let lags = SpatialLags::new(locations, distance_classes);
    clifford_with_lags(a, b, &lags)
}

/// [`clifford_pvalue`] reusing a precomputed pair structure.
pub fn clifford_with_lags(
    a: &[f64],
    b: &[f64],
    lags: &SpatialLags,
) -> Result<CliffordTest, StatsError> {
    check_pair(a, b, 20)?;
    if lags.len() != a.len() {
        return Err(StatsError::LengthMismatch(a.len(), lags.len()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let rho = pearson(&ra, &rb).ok_or(StatsError::Constant)?;
    let n = a.len();
    let nf = n as f64;
    let classical_p = correlation_p_value(rho, nf);

    if lags.is_degenerate() {
        log::warn!("all locations coincide; falling back to the classical correlation test");
        return Ok(CliffordTest {
            rho,
            n,
            n_eff: nf,
            p: classical_p,
            classical_p,
            fallback: true,
        });
    }
    let denom = lags.cross_autocorrelation_sum(&ra, &rb, Exec::default());
    let n_eff = if denom.is_finite() && denom > 0.0 {
        (1.0 + nf * nf / denom).clamp(3.0_f64.min(nf), nf)
    } else {
        nf
    };
    Ok(CliffordTest {
        rho,
        n,
        n_eff,
        p: correlation_p_value(rho, n_eff),
        classical_p,
        fallback: false,
    })
}

/// Upper-quartile indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct QuartileFlags {
    pub flags: Vec<bool>,
    pub threshold: f64,
    /// Every value was flagged (constant input).
    pub degenerate: bool,
}

impl QuartileFlags {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Flags `v ≥ Q3`, where Q3 is the value at 1-based rank `⌊3n/4⌋ + 1` of the
/// sorted data. Boundary ties are all flagged, so at least `⌈n/4⌉` values are.
pub fn quartile_flags(values: &[f64]) -> Result<QuartileFlags, StatsError> {
    let n = values.len();
    if n < 4 {
        return Err(StatsError::TooFew { needed: 4, got: n });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[3 * n / 4];
    let flags: Vec<bool> = values.iter().map(|&v| v >= threshold).collect();
    let degenerate = flags.iter().all(|&f| f);
    if degenerate {
        log::warn!("quartile split degenerate: all {n} values flagged");
    }
    Ok(QuartileFlags {
        flags,
        threshold,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_orders() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        // Pearson of (1, 2.5, 2.5, 4) and (1, 3, 2, 4): 4.5 / sqrt(4.5 · 5) = 0.948683
        let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tie_free_matches_d_squared_formula() {
        let a = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0];
        let b = [2.0, 7.0, 1.0, 8.0, 2.8, 1.8, 2.9, 4.0];
        let (ra, rb) = (average_ranks(&a), average_ranks(&b));
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        let formula = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!((spearman(&a, &b).unwrap() - formula).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::Constant));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFew { needed: 3, got: 2 }));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0]), Err(StatsError::LengthMismatch(3, 1)));
    }

    #[test]
    fn zero_rho_has_unit_p() {
        assert_eq!(correlation_p_value(0.0, 12.5), 1.0);
        assert_eq!(correlation_p_value(1.0, 50.0), 0.0);
        // t = 0.5·sqrt(28/0.75) = 3.05505; two-sided p with 28 df = 0.00489993
        assert!((correlation_p_value(0.5, 30.0) - 0.004899934).abs() < 1e-8);
    }

    #[test]
    fn clifford_zero_rho() {
        // a is symmetric around the middle, b is the index: ranks are uncorrelated.
        let n = 21;
        let a: Vec<f64> = (0..n).map(|i| ((i as f64) - 10.0).abs()).collect();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let loc: Vec<ProjectedPoint> = (0..n).map(|i| ProjectedPoint::new(i as f64, 0.0)).collect();
        let t = clifford_pvalue(&a, &b, &loc, DISTANCE_CLASSES).unwrap();
        assert_eq!(t.rho, 0.0);
        assert_eq!(t.p, 1.0);
        assert!(t.n_eff <= n as f64 + 0.5);
    }

    #[test]
    fn clifford_needs_twenty() {
        let x = vec![1.0; 10];
        let loc = vec![ProjectedPoint::new(0.0, 0.0); 10];
        assert!(matches!(clifford_pvalue(&x, &x, &loc, 20), Err(StatsError::TooFew { .. })));
    }

    #[test]
    fn coincident_points_fall_back() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64).collect();
        let loc = vec![ProjectedPoint::new(5.0, 5.0); 30];
        let t = clifford_pvalue(&a, &b, &loc, 20).unwrap();
        assert!(t.fallback);
        assert_eq!(t.p, t.classical_p);
        assert_eq!(t.n_eff, 30.0);
    }

    #[test]
    fn lags_subsample_large_sets() {
        let loc: Vec<ProjectedPoint> = (0..1500)
            .map(|i| ProjectedPoint::new((i % 40) as f64, (i / 40) as f64))
            .collect();
        let lags = SpatialLags::new(&loc, 20);
        assert!(lags.pairs.len() <= MAX_PAIRS);
        assert!((lags.scale - (1500.0 * 1499.0 / 2.0) / MAX_PAIRS as f64).abs() < 1e-9);
    }

    #[test]
    fn quartile_examples() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        let q = quartile_flags(&v).unwrap();
        assert_eq!(q.flags, vec![false, false, false, false, false, false, true, true]);
        let q = quartile_flags(&[3.0; 6]).unwrap();
        assert!(q.degenerate && q.count() == 6);
        // Q3 is the 4th smallest of (1, 1, 1, 10) → 10.
        let q = quartile_flags(&[1.0, 1.0, 1.0, 10.0]).unwrap();
        assert_eq!(q.flags, vec![false, false, false, true]);
        assert!(quartile_flags(&[1.0, 2.0, 3.0]).is_err());
    }

    /// Nearest-rank percentile computed by counting, independent of sorting.
    fn counting_q3(values: &[f64]) -> f64 {
        let n = values.len();
        let rank = 3 * n / 4 + 1;
        *values
            .iter()
            .find(|&&v| {
                let below = values.iter().filter(|&&w| w < v).count();
                let at_or_below = values.iter().filter(|&&w| w <= v).count();
                below < rank && rank <= at_or_below
            })
            .unwrap()
    }

    proptest! {
        #[test]
        fn quartile_count_bounds(v in proptest::collection::vec(0u8..6, 4..40)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let q = quartile_flags(&v).unwrap();
            let n = v.len();
            prop_assert!(q.count() >= n.div_ceil(4) && q.count() <= n);
            prop_assert_eq!(q.threshold, counting_q3(&v));
        }

        #[test]
        fn spearman_symmetric_and_rank_invariant(
            pairs in proptest::collection::vec((-100i32..100, -100i32..100), 3..40)
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            match (spearman(&a, &b), spearman(&b, &a)) {
                (Ok(x), Ok(y)) => {
                    prop_assert_eq!(x, y);
                    let ta: Vec<f64> = a.iter().map(|v| v.powi(3) + 2.0 * v).collect();
                    let tb: Vec<f64> = b.iter().map(|v| (v / 50.0).exp()).collect();
                    let z = spearman(&ta, &tb).unwrap();
                    prop_assert!((z - x).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&x));
                }
                (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
                _ => prop_assert!(false, "asymmetric outcome"),
            }
        }

        #[test]
        fn rank_sum(v in proptest::collection::vec(-5i32..5, 1..50)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let n = v.len() as f64;
            let s: f64 = average_ranks(&v).iter().sum();
            prop_assert!((s - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }
    }
}
