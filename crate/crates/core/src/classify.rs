//! Multi-label k-nearest-neighbor voting in the latent space.

use std::io::Write;

use crate::error::{Error, Result};
use crate::manifold::knn_search;
use crate::matrix::Matrix;
use crate::store::{Label, LabelSet, VoxelRecord};

/// Vote weights are kept as integer multiples of `1 / VOTE_UNIT`, the least
/// common multiple of 1..=14, so every `1/m` share and every sum is exact.
const VOTE_UNIT: u64 = 360_360;
const N_LABELS: usize = Label::ALL.len();

/// Paper-recommended neighbor count for a latent dimension.
pub fn default_k(d: usize) -> Result<usize> {
    match d {
        2 => Ok(100),
        3 => Ok(75),
        4 => Ok(50),
        _ => Err(Error::ExplicitKRequired(d)),
    }
}

/// Labeled training points in the latent space.
#[derive(Debug, Clone)]
pub struct LabeledLatentSet {
    coords: Matrix,
    labels: Vec<LabelSet>,
    subjects: Vec<String>,
}

impl LabeledLatentSet {
    /// Keeps points with at least one votable label. `Conflicted` is votable
    /// only when `include_conflicted` is set.
    pub fn new(
        coords: &Matrix,
        labels: &[LabelSet],
        subjects: &[String],
        include_conflicted: bool,
    ) -> Result<Self> {
        if labels.len() != coords.rows() || subjects.len() != coords.rows() {
            return Err(Error::DimensionMismatch {
                expected: coords.rows(),
                got: labels.len().min(subjects.len()),
            });
        }
        if !coords.all_finite() {
            return Err(Error::NonFinite("latent coordinates"));
        }
        let mut keep = Vec::new();
        let mut kept_labels = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let l = if include_conflicted { *l } else { l.nuclei() };
            if !l.is_empty() {
                keep.push(i);
                kept_labels.push(l);
            }
        }
        if keep.is_empty() {
            return Err(Error::EmptyLabeledSet);
        }
        Ok(Self {
            coords: coords.select_rows(&keep),
            labels: kept_labels,
            subjects: keep.iter().map(|&i| subjects[i].clone()).collect(),
        })
    }

    pub fn from_records(coords: &Matrix, records: &[VoxelRecord], include_conflicted: bool) -> Result<Self> {
        let labels: Vec<LabelSet> = records.iter().map(|r| r.labels).collect();
        let subjects: Vec<String> = records.iter().map(|r| r.subject.clone()).collect();
        Self::new(coords, &labels, &subjects, include_conflicted)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn coords(&self) -> &Matrix {
        &self.coords
    }

    pub fn labels(&self) -> &[LabelSet] {
        &self.labels
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    pub winner: Label,
    pub k: usize,
    units: [u64; N_LABELS],
    /// Mean distance of the neighbors carrying each label; `NaN` if none do.
    pub mean_distance: [f64; N_LABELS],
}

impl VoteResult {
    /// Accumulated weight of `label`.
    pub fn weight(&self, label: Label) -> f64 {
        self.units[label.index()] as f64 / VOTE_UNIT as f64
    }

    /// Weights summed exactly; always equals `k`.
    pub fn total_weight(&self) -> f64 {
        self.units.iter().sum::<u64>() as f64 / VOTE_UNIT as f64
    }

    /// Labels with positive weight, heaviest first, in tie-break order.
    pub fn ranked(&self) -> Vec<(Label, f64)> {
        let mut ls: Vec<Label> = Label::ALL.into_iter().filter(|l| self.units[l.index()] > 0).collect();
        ls.sort_by(|&x, &y| self.compare(y, x));
        ls.into_iter().map(|l| (l, self.weight(l))).collect()
    }

    /// Orders by weight, then smaller mean distance, then earlier schema
    /// position; `Greater` means `x` beats `y`.
    fn compare(&self, x: Label, y: Label) -> std::cmp::Ordering {
        self.units[x.index()]
            .cmp(&self.units[y.index()])
            .then(self.mean_distance[y.index()].total_cmp(&self.mean_distance[x.index()]))
            .then(y.index().cmp(&x.index()))
    }
}

/// Tallies one query's neighbors given as `(training index, distance)`.
pub fn tally(neighbors: impl IntoIterator<Item = (usize, f64)>, labels: &[LabelSet]) -> VoteResult {
    let mut units = [0u64; N_LABELS];
    let mut dist_sum = [0.0f64; N_LABELS];
    let mut count = [0usize; N_LABELS];
    let mut k = 0;
    for (j, d) in neighbors {
        k += 1;
        let set = labels[j];
        let share = VOTE_UNIT / set.len() as u64;
        for l in set.iter() {
            units[l.index()] += share;
            dist_sum[l.index()] += d;
            count[l.index()] += 1;
        }
    }
    let mut mean_distance = [f64::NAN; N_LABELS];
    for i in 0..N_LABELS {
        if count[i] > 0 {
            mean_distance[i] = dist_sum[i] / count[i] as f64;
        }
    }
    let mut result = VoteResult {
        winner: Label::NUCLEI[0],
        k,
        units,
        mean_distance,
    };
    let winner = Label::ALL
        .into_iter()
        .filter(|l| units[l.index()] > 0)
        .max_by(|&x, &y| result.compare(x, y))
        .unwrap_or(Label::NUCLEI[0]);
    result.winner = winner;
    result
}

/// Votes among the `k` nearest labeled points of `query`.
pub fn knn_vote(query: &[f64], set: &LabeledLatentSet, k: usize) -> Result<VoteResult> {
    let q = Matrix::from_vec(1, query.len(), query.to_vec())?;
    Ok(classify_points(set, &q, k)?.pop().expect("one query"))
}

/// Exact-search vote for every row of `queries`.
pub fn classify_points(set: &LabeledLatentSet, queries: &Matrix, k: usize) -> Result<Vec<VoteResult>> {
    if set.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    if k == 0 || k > set.len() {
        return Err(Error::TooManyNeighbors { k, n: set.len() });
    }
    if !queries.all_finite() {
        return Err(Error::NonFinite("query coordinates"));
    }
    let knn = knn_search(&set.coords, queries, k)?;
    Ok((0..queries.rows())
        .map(|q| {
            let nb = knn
                .neighbors(q)
                .iter()
                .zip(knn.distances(q))
                .map(|(&j, &d)| (j as usize, d));
            tally(nb, &set.labels)
        })
        .collect())
}

/// Writes `subject, i, j, k, predicted_label` and the top three labels with
/// their weights.
pub fn write_predictions<W: Write>(mut w: W, records: &[VoxelRecord], votes: &[VoteResult]) -> Result<()> {
    writeln!(
        w,
        "subject\ti\tj\tk\tpredicted_label\ttop1\tweight1\ttop2\tweight2\ttop3\tweight3"
    )?;
    for (r, v) in records.iter().zip(votes) {
        write!(w, "{}\t{}\t{}\t{}\t{}", r.subject, r.ijk[0], r.ijk[1], r.ijk[2], v.winner)?;
        let ranked = v.ranked();
        for slot in 0..3 {
            match ranked.get(slot) {
                Some((l, wt)) => write!(w, "\t{l}\t{wt:.4}")?,
                None => w.write_all(b"\t\t")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
