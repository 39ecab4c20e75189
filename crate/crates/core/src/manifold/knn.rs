//! Exact and approximate k-nearest-neighbor graphs under the l2 metric.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// For every point, its `k` nearest other points in ascending distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    indices: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.indices.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Fraction of `exact` neighbor slots also present in `self`.
    pub fn recall_against(&self, exact: &NeighborGraph) -> f64 {
        assert_eq!(self.len(), exact.len());
        let mut hits = 0usize;
        for i in 0..exact.len() {
            let mine = self.neighbors(i);
            hits += exact.neighbors(i).iter().filter(|j| mine.contains(j)).count();
        }
        hits as f64 / (exact.len() * exact.k) as f64
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("n_neighbors must be positive".into()));
    }
    if k >= n {
        return Err(Error::TooManyNeighbors { k, n });
    }
    Ok(())
}

/// The `k` smallest `(distance, index)` pairs, ties broken by index.
fn k_smallest(mut cand: Vec<(f64, u32)>, k: usize) -> Vec<(f64, u32)> {
    let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand
}

fn assemble(k: usize, rows: Vec<Vec<(f64, u32)>>) -> NeighborGraph {
    let mut indices = Vec::with_capacity(rows.len() * k);
    let mut distances = Vec::with_capacity(rows.len() * k);
    for row in rows {
        for (d2, j) in row {
            indices.push(j);
            distances.push(d2.sqrt());
        }
    }
    NeighborGraph {
        k,
        indices,
        distances,
    }
}

/// Brute-force neighbors; rows are computed in parallel on the current rayon pool.
pub fn knn_graph_exact(x: &Matrix, k: usize) -> Result<NeighborGraph> {
    let n = x.rows();
    check_k(n, k)?;
    let rows: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let cand: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xi, x.row(j)), j as u32))
                .collect();
            k_smallest(cand, k)
        })
        .collect();
    Ok(assemble(k, rows))
}

/// Exact `k` nearest reference rows for each query row (no self exclusion).
pub fn knn_search(reference: &Matrix, queries: &Matrix, k: usize) -> Result<NeighborGraph> {
    if reference.cols() != queries.cols() {
        return Err(Error::DimensionMismatch {
            expected: reference.cols(),
            got: queries.cols(),
        });
    }
    if k == 0 || k > reference.rows() {
        return Err(Error::TooManyNeighbors {
            k,
            n: reference.rows(),
        });
    }
    let rows: Vec<_> = (0..queries.rows())
        .into_par_iter()
        .map(|q| {
            let xq = queries.row(q);
            let cand: Vec<(f64, u32)> = (0..reference.rows())
                .map(|j| (sq_dist(xq, reference.row(j)), j as u32))
                .collect();
            k_smallest(cand, k)
        })
        .collect();
    Ok(assemble(k, rows))
}

#[derive(Debug, Clone, Copy)]
pub struct NnDescentParams {
    pub max_iters: usize,
    /// Stop once fewer than `delta · n · k` heap updates happen in an iteration.
    pub delta: f64,
    /// Cap on sampled forward/reverse candidates per point and iteration.
    pub max_candidates: usize,
}

impl Default for NnDescentParams {
    fn default() -> Self {
        Self {
            max_iters: 20,
            delta: 0.001,
            max_candidates: 60,
        }
    }
}

/// Bounded max-heap of squared distances with "new" flags.
struct NeighborHeap {
    items: Vec<(f64, u32, bool)>,
}

impl NeighborHeap {
    fn worst(&self) -> f64 {
        self.items[0].0
    }

    fn push(&mut self, d: f64, j: u32) -> bool {
        if d >= self.worst() || self.items.iter().any(|it| it.1 == j) {
            return false;
        }
        self.items[0] = (d, j, true);
        let n = self.items.len();
        let mut pos = 0;
        loop {
            let l = 2 * pos + 1;
            let r = l + 1;
            let mut largest = pos;
            if l < n && self.items[l].0 > self.items[largest].0 {
                largest = l;
            }
            if r < n && self.items[r].0 > self.items[largest].0 {
                largest = r;
            }
            if largest == pos {
                break;
            }
            self.items.swap(pos, largest);
            pos = largest;
        }
        true
    }
}

fn build_heap(mut items: Vec<(f64, u32, bool)>) -> NeighborHeap {
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    // descending order is a valid max-heap
    NeighborHeap { items }
}

/// NN-descent approximate neighbor graph. Deterministic for a fixed seed
/// regardless of the rayon pool size. Falls back to the exact builder when
/// `n <= 2k`.
pub fn knn_graph_approx(x: &Matrix, k: usize, seed: u64) -> Result<NeighborGraph> {
    knn_graph_approx_with(x, k, seed, NnDescentParams::default())
}

pub fn knn_graph_approx_with(
    x: &Matrix,
    k: usize,
    seed: u64,
    params: NnDescentParams,
) -> Result<NeighborGraph> {
    let n = x.rows();
    check_k(n, k)?;
    if n <= 2 * k {
        return knn_graph_exact(x, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut heaps: Vec<NeighborHeap> = (0..n)
        .map(|i| {
            let items = sample(&mut rng, n - 1, k)
                .into_iter()
                .map(|j| {
                    let j = if j >= i { j + 1 } else { j };
                    (sq_dist(x.row(i), x.row(j)), j as u32, true)
                })
                .collect();
            build_heap(items)
        })
        .collect();

    let max_cand = params.max_candidates.max(1);
    const BLOCK: usize = 512;
    for _iter in 0..params.max_iters {
        // forward and reverse candidate sets
        let mut new_c: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut old_c: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, h) in heaps.iter_mut().enumerate() {
            let mut fresh: Vec<usize> = (0..h.items.len()).filter(|&s| h.items[s].2).collect();
            if fresh.len() > max_cand {
                let keep = sample(&mut rng, fresh.len(), max_cand).into_vec();
                let mut kept: Vec<usize> = keep.into_iter().map(|s| fresh[s]).collect();
                kept.sort_unstable();
                fresh = kept;
            }
            for &s in &fresh {
                h.items[s].2 = false;
                new_c[i].push(h.items[s].1);
            }
            for it in &h.items {
                if !it.2 && !new_c[i].contains(&it.1) {
                    old_c[i].push(it.1);
                }
            }
        }
        let mut rev_new: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut rev_old: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in 0..n {
            for &j in &new_c[i] {
                rev_new[j as usize].push(i as u32);
            }
            for &j in &old_c[i] {
                rev_old[j as usize].push(i as u32);
            }
        }
        for i in 0..n {
            for (fwd, rev) in [(&mut new_c[i], &mut rev_new[i]), (&mut old_c[i], &mut rev_old[i])] {
                if rev.len() > max_cand {
                    let pick = sample(&mut rng, rev.len(), max_cand).into_vec();
                    let mut picked: Vec<u32> = pick.into_iter().map(|s| rev[s]).collect();
                    picked.sort_unstable();
                    *rev = picked;
                }
                for &j in rev.iter() {
                    if !fwd.contains(&j) {
                        fwd.push(j);
                    }
                }
            }
        }

        // local join, evaluated block-wise in parallel and applied in order
        let mut updates = 0usize;
        for start in (0..n).step_by(BLOCK) {
            let end = (start + BLOCK).min(n);
            let proposals: Vec<Vec<(u32, u32, f64)>> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let mut out = Vec::new();
                    let new = &new_c[i];
                    let old = &old_c[i];
                    for (a, &u) in new.iter().enumerate() {
                        let others = new[a + 1..].iter().chain(old.iter());
                        for &v in others {
                            if u == v {
                                continue;
                            }
                            let d = sq_dist(x.row(u as usize), x.row(v as usize));
                            if d < heaps[u as usize].worst() || d < heaps[v as usize].worst() {
                                out.push((u, v, d));
                            }
                        }
                    }
                    out
                })
                .collect();
            for list in proposals {
                for (u, v, d) in list {
                    updates += heaps[u as usize].push(d, v) as usize;
                    updates += heaps[v as usize].push(d, u) as usize;
                }
            }
        }
        if (updates as f64) < params.delta * (n * k) as f64 {
            break;
        }
    }
    let rows = heaps
        .into_iter()
        .map(|h| {
            let mut row: Vec<(f64, u32)> = h.items.into_iter().map(|(d, j, _)| (d, j)).collect();
            row.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            row
        })
        .collect();
    Ok(assemble(k, rows))
}
