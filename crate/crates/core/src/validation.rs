//! Day-evening-night noise levels and the noise vs. sound-category sweep.

use crate::categories::SoundCategory;
use crate::geo::ProjectedPoint;
use crate::par::Exec;
use crate::stats::{clifford_with_lags, SpatialLags, DISTANCE_CLASSES};

/// Hours per period: day 7–21 h, evening 21–23 h, night 23–7 h.
pub const PERIOD_HOURS: [f64; 3] = [14.0, 2.0, 8.0];
/// Penalties added to the evening and night levels, dB.
pub const EVENING_PENALTY_DB: f64 = 5.0;
pub const NIGHT_PENALTY_DB: f64 = 10.0;

pub const DEFAULT_THRESHOLDS: [u64; 7] = [1, 5, 10, 25, 50, 100, 200];
/// Sweep points with fewer segments are omitted.
pub const MIN_SWEEP_SEGMENTS: usize = 20;

/// Energetic day-evening-night mean with evening and night penalties:
/// `10·log10[(14·10^(Ld/10) + 2·10^((Le+5)/10) + 8·10^((Ln+10)/10)) / 24]`.
pub fn ewl(l_day: f64, l_evening: f64, l_night: f64) -> f64 {
    ewl_with_penalties(l_day, l_evening, l_night, EVENING_PENALTY_DB, NIGHT_PENALTY_DB)
}

pub fn ewl_with_penalties(l_day: f64, l_evening: f64, l_night: f64, evening_penalty: f64, night_penalty: f64) -> f64 {
    let [hd, he, hn] = PERIOD_HOURS;
    let energy = hd * 10f64.powf(l_day / 10.0)
        + he * 10f64.powf((l_evening + evening_penalty) / 10.0)
        + hn * 10f64.powf((l_night + night_penalty) / 10.0);
    10.0 * (energy / (hd + he + hn)).log10()
}

/// One point of a correlation curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub threshold: u64,
    pub category: SoundCategory,
    pub n: usize,
    /// `None` when the category fraction or the noise level is constant.
    pub rho: Option<f64>,
    pub n_eff: Option<f64>,
    pub p: Option<f64>,
}

/// For each threshold `N`, Spearman ρ between `noise` and every category
/// fraction over the segments with at least `N` sound tags, with spatially
/// corrected p-values. Thresholds leaving fewer than
/// [`MIN_SWEEP_SEGMENTS`] segments are skipped.
pub fn noise_correlation_sweep(
    fractions: &[[f64; SoundCategory::COUNT]],
    tag_totals: &[u64],
    noise: &[f64],
    locations: &[ProjectedPoint],
    thresholds: &[u64],
    exec: Exec,
) -> Vec<SweepPoint> {
    assert!(
        fractions.len() == tag_totals.len() && noise.len() == tag_totals.len() && locations.len() == tag_totals.len(),
        "sweep inputs must be aligned"
    );
    let mut out = Vec::new();
    for &threshold in thresholds {
        let keep: Vec<usize> = (0..tag_totals.len()).filter(|&i| tag_totals[i] >= threshold).collect();
        if keep.len() < MIN_SWEEP_SEGMENTS {
            log::warn!(
                "noise sweep: only {} segments with at least {threshold} tags; point omitted",
                keep.len()
            );
            continue;
        }
        let loc: Vec<ProjectedPoint> = keep.iter().map(|&i| locations[i]).collect();
        let lags = SpatialLags::with_exec(&loc, DISTANCE_CLASSES, exec);
        let y: Vec<f64> = keep.iter().map(|&i| noise[i]).collect();
        let points = exec.map(&SoundCategory::ALL, |&c| {
            let x: Vec<f64> = keep.iter().map(|&i| fractions[i][c.index()]).collect();
            let t = clifford_with_lags(&y, &x, &lags).ok();
            SweepPoint {
                threshold,
                category: c,
                n: keep.len(),
                rho: t.map(|t| t.rho),
                n_eff: t.map(|t| t.n_eff),
                p: t.map(|t| t.p),
            }
        });
        out.extend(points);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_levels() {
        // 10·log10[(14 + 2·10^0.5 + 8·10)/24] + 60
        let expected = 60.0 + 10.0 * ((14.0 + 2.0 * 10f64.sqrt() + 80.0) / 24.0).log10();
        assert!((ewl(60.0, 60.0, 60.0) - expected).abs() < 1e-12);
        assert!((ewl(60.0, 60.0, 60.0) - 66.21).abs() < 0.01);
        assert_eq!(ewl_with_penalties(57.0, 57.0, 57.0, 0.0, 0.0), 57.0);
        let v = 48.0;
        let e = ewl(v, v, v);
        assert!(e > v && e < v + 10.0);
    }

    #[test]
    fn silent_evening_and_night() {
        let e = ewl(70.0, -300.0, -300.0);
        assert!((e - (70.0 + 10.0 * (14.0f64 / 24.0).log10())).abs() < 1e-9);
        assert!((e - 67.66).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn monotone_in_each_period(l in proptest::array::uniform3(20.0f64..100.0), k in 0usize..3) {
            let base = ewl(l[0], l[1], l[2]);
            let mut up = l;
            up[k] += 1.0;
            prop_assert!(ewl(up[0], up[1], up[2]) > base);
        }
    }

    fn city(n: usize, seed: u64, coupled: bool) -> (Vec<[f64; 6]>, Vec<u64>, Vec<f64>, Vec<ProjectedPoint>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        let mut loc = Vec::new();
        for i in 0..n {
            let transport: f64 = rng.gen();
            let nature = (1.0 - transport) * rng.gen::<f64>();
            f.push([transport, 0.0, (1.0 - transport - nature) / 2.0, 0.0, nature, (1.0 - transport - nature) / 2.0]);
            t.push(rng.gen_range(1..120));
            let noise = rng.gen_range(-3.0..3.0);
            y.push(if coupled { 55.0 + 15.0 * transport + noise } else { 60.0 + noise });
            loc.push(ProjectedPoint::new((i % 20) as f64 * 100.0, (i / 20) as f64 * 100.0));
        }
        (f, t, y, loc)
    }

    #[test]
    fn planted_transport_coupling() {
        let (f, t, y, loc) = city(400, 3, true);
        let sweep = noise_correlation_sweep(&f, &t, &y, &loc, &[1, 5, 10, 25], Exec::default());
        let transport: Vec<_> = sweep.iter().filter(|p| p.category == SoundCategory::Transport).collect();
        assert_eq!(transport.len(), 4);
        for p in transport {
            assert!(p.rho.unwrap() > 0.0 && p.p.unwrap() < 0.01);
        }
        // Constant columns stay undefined.
        assert!(sweep.iter().filter(|p| p.category == SoundCategory::Music).all(|p| p.rho.is_none()));
    }

    #[test]
    fn independent_noise_is_mostly_insignificant() {
        let mut significant = 0;
        let mut total = 0;
        for seed in 0..10 {
            let (f, t, y, loc) = city(300, seed, false);
            for p in noise_correlation_sweep(&f, &t, &y, &loc, &[1], Exec::default()) {
                if let (Some(rho), Some(pv)) = (p.rho, p.p) {
                    total += 1;
                    assert!(rho.abs() < 0.25);
                    significant += usize::from(pv < 0.01);
                }
            }
        }
        assert!(significant * 10 < total, "{significant} of {total}");
    }

    #[test]
    fn restriction_reproduces_point() {
        let (f, t, y, loc) = city(200, 5, true);
        let sweep = noise_correlation_sweep(&f, &t, &y, &loc, &[1, 40], Exec::default());
        let keep: Vec<usize> = (0..200).filter(|&i| t[i] >= 40).collect();
        let pick = |v: &[[f64; 6]]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let again = noise_correlation_sweep(
            &pick(&f),
            &keep.iter().map(|&i| t[i]).collect::<Vec<_>>(),
            &keep.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            &keep.iter().map(|&i| loc[i]).collect::<Vec<_>>(),
            &[40],
            Exec::Sequential,
        );
        let at_40: Vec<_> = sweep.into_iter().filter(|p| p.threshold == 40).collect();
        assert_eq!(at_40, again);
    }

    #[test]
    fn small_points_omitted() {
        let (f, t, y, loc) = city(30, 1, true);
        let sweep = noise_correlation_sweep(&f, &t, &y, &loc, &[1, 1000], Exec::default());
        assert!(sweep.iter().all(|p| p.threshold == 1));
    }
}
