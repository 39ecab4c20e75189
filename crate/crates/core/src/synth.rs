//! Synthetic datasets with known cluster structure, and the embedding-quality
//! scores used to check them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dist, Matrix};
use crate::store::{Dataset, FeatureGroup, FeatureGroupSpec, Label, LabelSet, VoxelRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub voxels_per_subject: usize,
    pub n_clusters: usize,
    /// Stored groups to emit; Coord is always derivable from the grid.
    pub groups: FeatureGroupSpec,
    /// Mean inter-centroid distance over the noise norm `sigma`.
    pub separation: f64,
    pub sigma: f64,
    /// Fraction of voxels carrying two labels.
    pub overlap: f64,
    /// Fraction of voxels with no label.
    pub unlabeled: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 25,
            voxels_per_subject: 200,
            n_clusters: 13,
            groups: FeatureGroupSpec::all(),
            separation: 8.0,
            sigma: 1.0,
            overlap: 0.05,
            unlabeled: 0.0,
            seed: 0,
        }
    }
}

/// Groups whose columns carry cluster signal; the connectivity groups are
/// cluster-independent noise.
fn informative(g: FeatureGroup) -> bool {
    matches!(g, FeatureGroup::Base | FeatureGroup::MultiTi)
}

impl SynthSpec {
    pub fn total_voxels(&self) -> usize {
        self.n_subjects * self.voxels_per_subject
    }

    pub fn grid_side(&self) -> usize {
        let mut s = (self.voxels_per_subject as f64).cbrt().ceil() as usize;
        while s * s * s < self.voxels_per_subject {
            s += 1;
        }
        s.max(1)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InfeasibleSpec(m.to_string()));
        if self.n_subjects == 0 || self.voxels_per_subject == 0 {
            return bad("no voxels");
        }
        if self.n_clusters == 0 || self.n_clusters > Label::NUCLEI.len() {
            return bad("cluster count must be 1..=13");
        }
        if self.n_clusters > self.total_voxels() {
            return bad("more clusters than voxels");
        }
        if !(self.separation > 0.0) || !(self.sigma > 0.0) {
            return bad("separation and sigma must be positive");
        }
        for f in [self.overlap, self.unlabeled] {
            if !(0.0..1.0).contains(&f) {
                return bad("fractions must lie in [0, 1)");
            }
        }
        if self.overlap_count() + self.unlabeled_count() > self.total_voxels() {
            return bad("overlap and unlabeled fractions exceed the voxel count");
        }
        Ok(())
    }

    pub fn overlap_count(&self) -> usize {
        (self.overlap * self.total_voxels() as f64).round() as usize
    }

    pub fn unlabeled_count(&self) -> usize {
        (self.unlabeled * self.total_voxels() as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    /// Cluster each voxel's features were drawn from.
    pub cluster: Vec<usize>,
    /// Labels before any were withheld as unlabeled.
    pub truth: Vec<LabelSet>,
}

/// Gaussian clusters in the informative columns over Voronoi label blobs on
/// each subject's grid.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let side = spec.grid_side();
    let c = spec.n_clusters;

    let inf_dim: usize = spec.groups.groups().filter(|&g| informative(g)).map(|g| g.dim()).sum();
    let noise_sd = spec.sigma / (inf_dim.max(1) as f64).sqrt();
    let mut centroids = vec![vec![0.0; inf_dim]; c];
    for v in centroids.iter_mut().flatten() {
        *v = rng.sample(StandardNormal);
    }
    if c > 1 && inf_dim > 0 {
        let mut total = 0.0;
        for a in 0..c {
            for b in a + 1..c {
                total += dist(&centroids[a], &centroids[b]);
            }
        }
        let mean = total / (c * (c - 1) / 2) as f64;
        let scale = spec.separation * spec.sigma / mean;
        centroids.iter_mut().flatten().for_each(|v| *v *= scale);
    }

    let seeds: Vec<[f64; 3]> = (0..c)
        .map(|_| [0; 3].map(|_| rng.random_range(0.0..side as f64)))
        .collect();

    let n = spec.total_voxels();
    let mut records = Vec::with_capacity(n);
    let mut cluster = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut margin = Vec::with_capacity(n);
    for s in 0..spec.n_subjects {
        let jitter = 0.05 * side as f64;
        let local: Vec<[f64; 3]> = seeds
            .iter()
            .map(|p| p.map(|x| x + rng.random_range(-jitter..=jitter)))
            .collect();
        for v in 0..spec.voxels_per_subject {
            let ijk = [v % side, (v / side) % side, v / (side * side)];
            let centre = ijk.map(|x| x as f64 + 0.5);
            let mut order: Vec<(f64, usize)> = local
                .iter()
                .enumerate()
                .map(|(q, p)| (dist(&centre, p), q))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cluster.push(order[0].1);
            second.push(order.get(1).map_or(order[0].1, |o| o.1));
            margin.push(order.get(1).map_or(f64::INFINITY, |o| o.0 - order[0].0));
            records.push(VoxelRecord {
                subject: format!("sub{:03}", s + 1),
                ijk: ijk.map(|x| x as i64),
                labels: LabelSet::single(Label::NUCLEI[order[0].1]),
            });
        }
    }

    // boundary voxels get the neighboring cell's label as well
    let mut by_margin: Vec<usize> = (0..n).collect();
    by_margin.sort_by(|&a, &b| margin[a].total_cmp(&margin[b]).then(a.cmp(&b)));
    let n_overlap = spec.overlap_count();
    if c > 1 {
        for &i in &by_margin[..n_overlap] {
            records[i].labels.insert(Label::NUCLEI[second[i]]);
        }
    }
    let truth: Vec<LabelSet> = records.iter().map(|r| r.labels).collect();
    let mut rest = by_margin[n_overlap..].to_vec();
    rest.shuffle(&mut rng);
    for &i in &rest[..spec.unlabeled_count()] {
        records[i].labels = LabelSet::EMPTY;
    }

    let noise = Normal::new(0.0, noise_sd).expect("finite sd");
    let mut groups = BTreeMap::new();
    let mut offset = 0;
    for g in spec.groups.groups().filter(|g| g.is_stored()) {
        let mut m = Matrix::zeros(n, g.dim());
        for (i, row) in (0..n).zip(m.as_mut_slice().chunks_mut(g.dim())) {
            for (j, v) in row.iter_mut().enumerate() {
                let mu = if informative(g) { centroids[cluster[i]][offset + j] } else { 0.0 };
                *v = mu + noise.sample(&mut rng);
            }
        }
        if informative(g) {
            offset += g.dim();
        }
        groups.insert(g, m);
    }
    let dataset = Dataset::new(records, groups, true)?;
    Ok(SynthData {
        dataset,
        cluster,
        truth,
    })
}

/// `n` points around `centers` well-separated Gaussian centroids in `dim`
/// dimensions, with their cluster ids.
pub fn blobs(n: usize, centers: usize, dim: usize, separation: f64, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..dim).map(|_| rng.random_range(-separation..separation)).collect())
        .collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers;
        ids.push(c);
        for m in &mu[c] {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + z);
        }
    }
    (Matrix::from_vec(n, dim, data).expect("shape"), ids)
}

/// Ranks (1-based, self excluded) of every point by distance from row `i`.
fn ambient_ranks(x: &Matrix, i: usize) -> Vec<usize> {
    let n = x.rows();
    let mut order: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| (dist(x.row(i), x.row(j)), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut rank = vec![0; n];
    for (r, &(_, j)) in order.iter().enumerate() {
        rank[j] = r + 1;
    }
    rank
}

fn nearest(x: &Matrix, i: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..x.rows())
        .filter(|&j| j != i)
        .map(|j| (dist(x.row(i), x.row(j)), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(k);
    order.into_iter().map(|(_, j)| j).collect()
}

/// `1 − 2/(n k (2n − 3k − 1)) Σᵢ Σ_{j ∈ Uₖ(i)} (r(i,j) − k)`, where `Uₖ(i)`
/// are the latent neighbors of `i` that are not among its `k` ambient ones.
pub fn trustworthiness(x: &Matrix, y: &Matrix, k: usize) -> Result<f64> {
    let n = x.rows();
    if y.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.rows() });
    }
    if k == 0 || k >= n {
        return Err(Error::TooManyNeighbors { k, n });
    }
    let penalty: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let rank = ambient_ranks(x, i);
            nearest(y, i, k)
                .into_iter()
                .map(|j| rank[j].saturating_sub(k) as f64)
                .sum::<f64>()
        })
        .sum();
    let (nf, kf) = (n as f64, k as f64);
    let denom = nf * kf * (2.0 * nf - 3.0 * kf - 1.0);
    if denom <= 0.0 {
        return Err(Error::TooManyNeighbors { k, n });
    }
    Ok(1.0 - 2.0 * penalty / denom)
}

/// Mean silhouette coefficient under l2; points in singleton clusters score 0.
pub fn silhouette(y: &Matrix, labels: &[usize]) -> Result<f64> {
    let n = y.rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_insert(0) += 1;
    }
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least two clusters".into()));
    }
    let slot: BTreeMap<usize, usize> = sizes.keys().enumerate().map(|(s, &l)| (l, s)).collect();
    let counts: Vec<usize> = sizes.values().copied().collect();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = slot[&labels[i]];
            if counts[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; counts.len()];
            for j in 0..n {
                if j != i {
                    sums[slot[&labels[j]]] += dist(y.row(i), y.row(j));
                }
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..counts.len())
                .filter(|&c| c != own)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n_subjects: 3,
            voxels_per_subject: 60,
            overlap: 0.1,
            unlabeled: 0.05,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn counts_and_columns() {
        let spec = small(3);
        let d = generate(&spec).unwrap();
        assert_eq!(d.dataset.len(), 180);
        let two = d.dataset.records().iter().filter(|r| r.labels.len() == 2).count();
        assert_eq!(two, 18);
        let empty = d.dataset.records().iter().filter(|r| r.labels.is_empty()).count();
        assert_eq!(empty, 9);
        let x = d.dataset.select_features(&FeatureGroupSpec::all()).unwrap();
        assert_eq!(x.matrix.cols(), 167);
    }

    #[test]
    fn same_seed_same_bytes() {
        let table = |seed| {
            let mut out = Vec::new();
            generate(&small(seed)).unwrap().dataset.write_table(&mut out).unwrap();
            out
        };
        assert_eq!(table(5), table(5));
        assert_ne!(table(5), table(6));
    }

    #[test]
    fn infeasible() {
        let spec = SynthSpec {
            n_subjects: 1,
            voxels_per_subject: 5,
            n_clusters: 13,
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn identity_embedding_is_trustworthy() {
        let (x, _) = blobs(120, 3, 4, 5.0, 1);
        assert!((trustworthiness(&x, &x, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!(trustworthiness(&x, &x, 120).is_err());
    }

    #[test]
    fn silhouette_conventions() {
        let y = Matrix::from_rows(&[[0.0], [0.1], [10.0], [10.1]]).unwrap();
        assert!(silhouette(&y, &[0, 0, 1, 1]).unwrap() > 0.9);
        assert_eq!(silhouette(&y, &[0, 1, 2, 3]).unwrap(), 0.0);
        assert!(silhouette(&y, &[0, 0, 0, 0]).is_err());
    }
}
