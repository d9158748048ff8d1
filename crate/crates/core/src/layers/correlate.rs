use crate::geo::ProjectedPoint;
use crate::par::Exec;
use crate::stats::{clifford_with_lags, correlation_p_value, spearman, SpatialLags, StatsError, DISTANCE_CLASSES};

/// Fewest shared segments for a correlation matrix between layers.
pub const MIN_SHARED_SEGMENTS: usize = 10;
/// The spatial correction needs this many points; smaller sets use the classical test.
const MIN_CORRECTED: usize = 20;

/// One entry of a correlation matrix between two sets of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCell {
    pub row: String,
    pub column: String,
    pub n: usize,
    /// `None` when either column is constant.
    pub rho: Option<f64>,
    pub n_eff: Option<f64>,
    pub p: Option<f64>,
}

/// Spearman ρ between every column of `rows` and every column of `columns`
/// over the same segments, with spatially corrected p-values.
pub fn correlate_columns(
    rows: &[(String, Vec<f64>)],
    columns: &[(String, Vec<f64>)],
    locations: &[ProjectedPoint],
    exec: Exec,
) -> Result<Vec<CorrelationCell>, StatsError> {
    let n = locations.len();
    for (_, v) in rows.iter().chain(columns) {
        if v.len() != n {
            return Err(StatsError::LengthMismatch(v.len(), n));
        }
    }
    if n < MIN_SHARED_SEGMENTS {
        return Err(StatsError::TooFew {
            needed: MIN_SHARED_SEGMENTS,
            got: n,
        });
    }
    let lags = (n >= MIN_CORRECTED).then(|| SpatialLags::with_exec(locations, DISTANCE_CLASSES, exec));
    if lags.is_none() {
        log::warn!("only {n} shared segments; p-values use the uncorrected test");
    }
    let pairs: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|i| (0..columns.len()).map(move |j| (i, j)))
        .collect();
    let cells = exec.map(&pairs, |&(i, j)| {
        let (a, b) = (&rows[i].1, &columns[j].1);
        let (rho, n_eff, p) = match &lags {
            Some(lags) => match clifford_with_lags(a, b, lags) {
                Ok(t) => (Some(t.rho), Some(t.n_eff), Some(t.p)),
                Err(_) => (None, None, None),
            },
            None => match spearman(a, b) {
                Ok(r) => (Some(r), Some(n as f64), Some(correlation_p_value(r, n as f64))),
                Err(_) => (None, None, None),
            },
        };
        CorrelationCell {
            row: rows[i].0.clone(),
            column: columns[j].0.clone(),
            n,
            rho,
            n_eff,
            p,
        }
    });
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<ProjectedPoint> {
        (0..n).map(|i| ProjectedPoint::new((i % 10) as f64 * 50.0, (i / 10) as f64 * 50.0)).collect()
    }

    #[test]
    fn monotone_constructions() {
        let music: Vec<f64> = (0..60).map(|i| ((i * 37) % 60) as f64 / 60.0).collect();
        let joy: Vec<f64> = music.iter().map(|m| m * m + 0.1).collect();
        let sadness: Vec<f64> = music.iter().map(|m| 1.0 - m.sqrt()).collect();
        let cells = correlate_columns(
            &[("music".into(), music)],
            &[("joy".into(), joy), ("sadness".into(), sadness), ("flat".into(), vec![0.0; 60])],
            &grid(60),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(cells[0].rho, Some(1.0));
        assert_eq!(cells[1].rho, Some(-1.0));
        assert_eq!(cells[2].rho, None);
        assert_eq!(cells[0].p, Some(0.0));
    }

    #[test]
    fn too_few_shared_segments() {
        let v = vec![("a".to_string(), vec![1.0; 5])];
        assert!(matches!(
            correlate_columns(&v, &v, &grid(5), Exec::Sequential),
            Err(StatsError::TooFew { needed: 10, got: 5 })
        ));
    }

    #[test]
    fn small_sets_use_classical_test() {
        let a: Vec<f64> = (0..12).map(f64::from).collect();
        let b: Vec<f64> = (0..12).map(|i| f64::from((i * 5) % 12)).collect();
        let cells = correlate_columns(&[("a".into(), a)], &[("b".into(), b)], &grid(12), Exec::Sequential).unwrap();
        assert_eq!(cells[0].n_eff, Some(12.0));
    }
}
