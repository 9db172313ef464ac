//! KP-Centrality ranking: pairwise distances under a pluggable metric,
//! per-column support sets, and a membership-count ranking over passages.
//! The pipeline is identical for real-valued columns and bit-hash columns;
//! only the metric changes.

use crate::sbe::{self, BitHash};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error)]
pub enum CentralityError {
    #[error("metric {metric:?} is not valid for {columns} columns")]
    MetricMismatch { metric: Metric, columns: &'static str },
    #[error("column index {0} out of range ({1} columns)")]
    BadIndex(usize, usize),
    #[error("k must be at least 1 for the k-nearest strategy")]
    BadK,
    #[error("n must be at least 1")]
    BadN,
    #[error(transparent)]
    Sbe(#[from] sbe::SbeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    Euclidean,
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    MeanThreshold,
    KNearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportSetConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub include_keyphrases_as_members: bool,
}

impl Default for SupportSetConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::MeanThreshold,
            k: 1,
            include_keyphrases_as_members: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    pub center: usize,
    pub members: BTreeSet<usize>,
}

/// Passages ordered by nonincreasing support count; never contains
/// key-phrase columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedPassages(pub Vec<(usize, usize)>);

impl RankedPassages {
    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|&(i, _)| i).collect()
    }
}

pub enum ColumnSet<'a> {
    Real(&'a [Vec<f64>]),
    Hashed(&'a [BitHash]),
}

impl ColumnSet<'_> {
    pub fn len(&self) -> usize {
        match self {
            ColumnSet::Real(cols) => cols.len(),
            ColumnSet::Hashed(cols) => cols.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    1.0 - dot / (nu * nv)
}

fn euclidean_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn pairwise_distances(
    columns: &ColumnSet,
    metric: Metric,
) -> Result<Vec<Vec<f64>>, CentralityError> {
    let n = columns.len();
    let mut d = vec![vec![0.0; n]; n];
    match (columns, metric) {
        (ColumnSet::Real(cols), Metric::Cosine) => {
            for i in 0..n {
                for j in i + 1..n {
                    let v = cosine_distance(&cols[i], &cols[j]);
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
        }
        (ColumnSet::Real(cols), Metric::Euclidean) => {
            for i in 0..n {
                for j in i + 1..n {
                    let v = euclidean_distance(&cols[i], &cols[j]);
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
        }
        (ColumnSet::Hashed(cols), Metric::Hamming) => {
            for i in 0..n {
                for j in i + 1..n {
                    let v = sbe::normalized_hamming(&cols[i], &cols[j])?;
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
        }
        (ColumnSet::Real(_), Metric::Hamming) => {
            return Err(CentralityError::MetricMismatch { metric, columns: "real" })
        }
        (ColumnSet::Hashed(_), _) => {
            return Err(CentralityError::MetricMismatch { metric, columns: "hashed" })
        }
    }
    Ok(d)
}

/// Support set for column `i`. Candidates are every other column; when
/// `include_keyphrases_as_members` is off, key-phrase columns (index >=
/// `num_passages`) are excluded from both the member set and the mean.
pub fn support_set(
    i: usize,
    distances: &[Vec<f64>],
    config: &SupportSetConfig,
    num_passages: usize,
) -> Result<SupportSet, CentralityError> {
    let n = distances.len();
    if i >= n {
        return Err(CentralityError::BadIndex(i, n));
    }
    let candidates: Vec<usize> = (0..n)
        .filter(|&s| s != i && (config.include_keyphrases_as_members || s < num_passages))
        .collect();
    let members = match config.strategy {
        Strategy::MeanThreshold => {
            if candidates.is_empty() {
                BTreeSet::new()
            } else {
                let mean: f64 =
                    candidates.iter().map(|&s| distances[i][s]).sum::<f64>() / candidates.len() as f64;
                candidates
                    .into_iter()
                    .filter(|&s| distances[i][s] < mean)
                    .collect()
            }
        }
        Strategy::KNearest => {
            if config.k == 0 {
                return Err(CentralityError::BadK);
            }
            let mut by_distance = candidates;
            by_distance.sort_by(|&a, &b| {
                distances[i][a]
                    .partial_cmp(&distances[i][b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            by_distance.into_iter().take(config.k).collect()
        }
    };
    Ok(SupportSet { center: i, members })
}

/// Counts, for each passage, the support sets it belongs to, and returns the
/// top `n` by count. Key-phrase columns contribute support sets but never
/// appear in the ranking. Ties, and passages with zero count, resolve by
/// occurrence order.
pub fn rank_passages(
    support_sets: &[SupportSet],
    n: usize,
    num_passages: usize,
) -> Result<RankedPassages, CentralityError> {
    if n == 0 {
        return Err(CentralityError::BadN);
    }
    let mut counts = vec![0usize; num_passages];
    for set in support_sets {
        for &member in &set.members {
            if member < num_passages {
                counts[member] += 1;
            }
        }
    }
    let mut ranked: Vec<(usize, usize)> = counts.into_iter().enumerate().collect();
    ranked.sort_by(|&(ia, sa), &(ib, sb)| sb.cmp(&sa).then(ia.cmp(&ib)));
    ranked.truncate(n.min(num_passages));
    Ok(RankedPassages(ranked))
}

/// The two-step method end to end: distances, one support set per column
/// (passages and key phrases alike), ranking over passages only.
pub fn retrieve(
    columns: &ColumnSet,
    num_passages: usize,
    n: usize,
    metric: Metric,
    config: &SupportSetConfig,
) -> Result<RankedPassages, CentralityError> {
    let distances = pairwise_distances(columns, metric)?;
    let mut sets = Vec::with_capacity(distances.len());
    for i in 0..distances.len() {
        sets.push(support_set(i, &distances, config, num_passages)?);
    }
    rank_passages(&sets, n, num_passages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn distance_basics() {
        let cols = vec![unit(&[1.0, 0.0]), unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let cos = pairwise_distances(&ColumnSet::Real(&cols), Metric::Cosine).unwrap();
        let euc = pairwise_distances(&ColumnSet::Real(&cols), Metric::Euclidean).unwrap();
        assert_eq!(cos[0][1], 0.0);
        assert_eq!(euc[0][1], 0.0);
        assert!((cos[0][2] - 1.0).abs() < 1e-15);
        assert!((euc[0][2] - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(cos[2][0], cos[0][2]);
        assert_eq!(cos[0][0], 0.0);
    }

    #[test]
    fn euclidean_squared_is_twice_cosine_on_unit_columns() {
        let cols = vec![
            unit(&[1.0, 2.0, 0.5]),
            unit(&[0.3, 1.0, 1.0]),
            unit(&[2.0, 0.1, 0.7]),
        ];
        let cos = pairwise_distances(&ColumnSet::Real(&cols), Metric::Cosine).unwrap();
        let euc = pairwise_distances(&ColumnSet::Real(&cols), Metric::Euclidean).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((euc[i][j] * euc[i][j] - 2.0 * cos[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_vector_cosine_is_one() {
        let cols = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let cos = pairwise_distances(&ColumnSet::Real(&cols), Metric::Cosine).unwrap();
        assert_eq!(cos[0][1], 1.0);
        assert_eq!(cos[0][0], 0.0);
    }

    #[test]
    fn metric_column_mismatch() {
        let cols = vec![vec![1.0]];
        assert!(pairwise_distances(&ColumnSet::Real(&cols), Metric::Hamming).is_err());
        let hashes = vec![crate::sbe::BitHash::zeros(8)];
        assert!(pairwise_distances(&ColumnSet::Hashed(&hashes), Metric::Cosine).is_err());
    }

    #[test]
    fn mean_threshold_example() {
        // d(0,.) = [0, 0.2, 0.8], mean over candidates = 0.5 -> members {1}
        let d = vec![
            vec![0.0, 0.2, 0.8],
            vec![0.2, 0.0, 0.6],
            vec![0.8, 0.6, 0.0],
        ];
        let s = support_set(0, &d, &SupportSetConfig::default(), 3).unwrap();
        assert_eq!(s.members, BTreeSet::from([1]));
    }

    #[test]
    fn mean_threshold_all_equal_is_empty() {
        let d = vec![
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ];
        for i in 0..3 {
            let s = support_set(i, &d, &SupportSetConfig::default(), 3).unwrap();
            assert!(s.members.is_empty());
        }
    }

    #[test]
    fn k_nearest_tie_breaks_by_index() {
        let d = vec![
            vec![0.0, 0.2, 0.2],
            vec![0.2, 0.0, 0.3],
            vec![0.2, 0.3, 0.0],
        ];
        let config = SupportSetConfig {
            strategy: Strategy::KNearest,
            k: 1,
            include_keyphrases_as_members: true,
        };
        let s = support_set(0, &d, &config, 3).unwrap();
        assert_eq!(s.members, BTreeSet::from([1]));
    }

    #[test]
    fn single_column_support_set_is_empty() {
        let d = vec![vec![0.0]];
        let s = support_set(0, &d, &SupportSetConfig::default(), 1).unwrap();
        assert!(s.members.is_empty());
    }

    #[test]
    fn rank_counts_membership() {
        // S_0={1}, S_1={0,2}, S_2={1} -> counts p0:1, p1:2, p2:1
        let sets = vec![
            SupportSet { center: 0, members: BTreeSet::from([1]) },
            SupportSet { center: 1, members: BTreeSet::from([0, 2]) },
            SupportSet { center: 2, members: BTreeSet::from([1]) },
        ];
        let r = rank_passages(&sets, 1, 3).unwrap();
        assert_eq!(r.0, vec![(1, 2)]);
        let r = rank_passages(&sets, 10, 3).unwrap();
        assert_eq!(r.0, vec![(1, 2), (0, 1), (2, 1)]);
    }

    #[test]
    fn rank_empty_sets_falls_back_to_occurrence_order() {
        let sets = vec![
            SupportSet { center: 0, members: BTreeSet::new() },
            SupportSet { center: 1, members: BTreeSet::new() },
        ];
        let r = rank_passages(&sets, 2, 2).unwrap();
        assert_eq!(r.0, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn rank_excludes_keyphrase_columns() {
        // column 2 is a key phrase present in every set
        let sets = vec![
            SupportSet { center: 0, members: BTreeSet::from([1, 2]) },
            SupportSet { center: 1, members: BTreeSet::from([0, 2]) },
            SupportSet { center: 2, members: BTreeSet::from([0, 1, 2]) },
        ];
        let r = rank_passages(&sets, 5, 2).unwrap();
        assert!(r.indices().iter().all(|&i| i < 2));
    }

    #[test]
    fn retrieve_single_passage() {
        let cols = vec![vec![1.0, 0.0]];
        let r = retrieve(
            &ColumnSet::Real(&cols),
            1,
            3,
            Metric::Euclidean,
            &SupportSetConfig::default(),
        )
        .unwrap();
        assert_eq!(r.indices(), vec![0]);
    }

    #[test]
    fn score_bound() {
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|i| unit(&[(i as f64).sin() + 2.0, (i as f64).cos() + 2.0, i as f64]))
            .collect();
        let r = retrieve(
            &ColumnSet::Real(&cols),
            4,
            4,
            Metric::Euclidean,
            &SupportSetConfig::default(),
        )
        .unwrap();
        for (_, score) in r.0 {
            assert!(score <= 5);
        }
    }
}
