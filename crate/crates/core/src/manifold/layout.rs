//! Stochastic layout optimization with negative sampling.
//!
//! An edge of membership `w` is updated on `⌈w·epochs⌉` epochs: its `m`-th
//! update (1-based) happens at epoch `⌊(m − 1)/w⌋`. Each edge records the
//! epoch of its next update; an epoch processes the due edges in index order.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fuzzy::FuzzyGraph;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    pub a: f64,
    pub b: f64,
    pub epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub repulsion_strength: f64,
    /// Per-coordinate bound on a single gradient step.
    pub clip: f64,
}

impl LayoutParams {
    pub fn new(a: f64, b: f64, epochs: usize) -> Self {
        Self {
            a,
            b,
            epochs,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            repulsion_strength: 1.0,
            clip: 4.0,
        }
    }

    #[inline]
    fn alpha(&self, epoch: usize) -> f64 {
        self.learning_rate * (1.0 - epoch as f64 / self.epochs as f64)
    }

    #[inline]
    fn attraction(&self, r2: f64) -> f64 {
        if r2 > 0.0 {
            let pb = r2.powf(self.b);
            -2.0 * self.a * self.b * (pb / r2) / (self.a * pb + 1.0)
        } else {
            0.0
        }
    }

    #[inline]
    fn repulsion(&self, r2: f64) -> f64 {
        if r2 > 0.0 {
            2.0 * self.repulsion_strength * self.b / ((0.001 + r2) * (self.a * r2.powf(self.b) + 1.0))
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayoutMode {
    /// Single-threaded and bit-reproducible for a fixed seed.
    #[default]
    Sequential,
    /// Unsynchronized concurrent updates; lost updates are tolerated.
    Parallel,
}

/// Whether an edge of weight `w` is due at `epoch`.
#[inline]
pub fn is_due(w: f64, epoch: usize) -> bool {
    (w * (epoch + 1) as f64).ceil() > (w * epoch as f64).ceil()
}

trait Coords {
    fn read(&self, p: usize, out: &mut [f64]);
    fn add(&mut self, p: usize, delta: &[f64], sign: f64);
}

struct Plain<'a> {
    data: &'a mut [f64],
    dim: usize,
}

impl Coords for Plain<'_> {
    #[inline]
    fn read(&self, p: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[p * self.dim..(p + 1) * self.dim]);
    }

    #[inline]
    fn add(&mut self, p: usize, delta: &[f64], sign: f64) {
        for (v, d) in self.data[p * self.dim..(p + 1) * self.dim].iter_mut().zip(delta) {
            *v += sign * d;
        }
    }
}

#[derive(Clone, Copy)]
struct Shared<'a> {
    data: &'a [AtomicU64],
    dim: usize,
}

impl Coords for Shared<'_> {
    #[inline]
    fn read(&self, p: usize, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.data[p * self.dim..(p + 1) * self.dim]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn add(&mut self, p: usize, delta: &[f64], sign: f64) {
        for (a, d) in self.data[p * self.dim..(p + 1) * self.dim].iter().zip(delta) {
            let v = f64::from_bits(a.load(Ordering::Relaxed)) + sign * d;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

struct EdgeList {
    heads: Vec<u32>,
    tails: Vec<u32>,
    weights: Vec<f64>,
}

impl EdgeList {
    fn from_graph(g: &FuzzyGraph) -> Self {
        let mut heads = Vec::with_capacity(g.n_edges());
        for i in 0..g.n_vertices() {
            let len = g.indptr[i + 1] - g.indptr[i];
            heads.extend(std::iter::repeat_n(i as u32, len));
        }
        Self {
            heads,
            tails: g.indices.clone(),
            weights: g.weights.iter().map(|w| w.min(1.0)).collect(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_edges<C: Coords>(
    due: &[u32],
    edges: &EdgeList,
    n_vertices: usize,
    dim: usize,
    coords: &mut C,
    rng: &mut ChaCha8Rng,
    p: &LayoutParams,
    alpha: f64,
) {
    let mut yi = vec![0.0; dim];
    let mut yo = vec![0.0; dim];
    let mut delta = vec![0.0; dim];
    for &e in due {
        let i = edges.heads[e as usize] as usize;
        let j = edges.tails[e as usize] as usize;
        coords.read(i, &mut yi);
        coords.read(j, &mut yo);
        let r2: f64 = yi.iter().zip(&yo).map(|(a, b)| (a - b) * (a - b)).sum();
        let coeff = p.attraction(r2);
        for d in 0..dim {
            delta[d] = (coeff * (yi[d] - yo[d])).clamp(-p.clip, p.clip) * alpha;
            yi[d] += delta[d];
        }
        coords.add(i, &delta, 1.0);
        coords.add(j, &delta, -1.0);

        for _ in 0..p.negative_sample_rate {
            let k = rng.random_range(0..n_vertices);
            if k == i {
                continue;
            }
            coords.read(k, &mut yo);
            let r2: f64 = yi.iter().zip(&yo).map(|(a, b)| (a - b) * (a - b)).sum();
            let coeff = p.repulsion(r2);
            if coeff <= 0.0 {
                continue;
            }
            for d in 0..dim {
                delta[d] = (coeff * (yi[d] - yo[d])).clamp(-p.clip, p.clip) * alpha;
                yi[d] += delta[d];
            }
            coords.add(i, &delta, 1.0);
        }
    }
}

fn check_finite(coords: &[f64], dim: usize, epoch: usize) -> Result<()> {
    match coords.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::LayoutDiverged {
            epoch,
            point: pos / dim,
        }),
        None => Ok(()),
    }
}

const PARALLEL_CHUNK: usize = 4096;

fn chunk_seed(seed: u64, epoch: usize, chunk: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (chunk as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Runs `params.epochs` epochs of attractive edge updates and negative
/// sampling starting from `init`.
pub fn optimize_layout(
    init: Matrix,
    graph: &FuzzyGraph,
    params: &LayoutParams,
    seed: u64,
    mode: LayoutMode,
) -> Result<Matrix> {
    if params.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let n = init.rows();
    let dim = init.cols();
    if graph.n_vertices() != n {
        return Err(Error::DimensionMismatch {
            expected: graph.n_vertices(),
            got: n,
        });
    }
    if n < 2 || dim == 0 {
        return Ok(init);
    }
    let edges = EdgeList::from_graph(graph);
    let epochs = params.epochs;
    // epoch of each edge's next update; `u32::MAX` once its budget is spent
    let mut next = vec![0u32; edges.heads.len()];
    let mut done = vec![0u32; edges.heads.len()];
    let mut due: Vec<u32> = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = init.into_vec();
    let shared: Option<Vec<AtomicU64>> = match mode {
        LayoutMode::Sequential => None,
        LayoutMode::Parallel => Some(data.iter().map(|v| AtomicU64::new(v.to_bits())).collect()),
    };

    for epoch in 0..epochs {
        due.clear();
        due.extend(
            next.iter()
                .enumerate()
                .filter(|(_, &t)| t as usize == epoch)
                .map(|(e, _)| e as u32),
        );
        let alpha = params.alpha(epoch);
        match &shared {
            None => {
                let mut c = Plain {
                    data: &mut data,
                    dim,
                };
                run_edges(&due, &edges, n, dim, &mut c, &mut rng, params, alpha);
                check_finite(&data, dim, epoch)?;
            }
            Some(atoms) => {
                due.par_chunks(PARALLEL_CHUNK)
                    .enumerate()
                    .for_each(|(chunk, slice)| {
                        let mut c = Shared { data: atoms, dim };
                        let mut r = ChaCha8Rng::seed_from_u64(chunk_seed(seed, epoch, chunk));
                        run_edges(slice, &edges, n, dim, &mut c, &mut r, params, alpha);
                    });
                if let Some(pos) = atoms
                    .iter()
                    .position(|a| !f64::from_bits(a.load(Ordering::Relaxed)).is_finite())
                {
                    return Err(Error::LayoutDiverged {
                        epoch,
                        point: pos / dim,
                    });
                }
            }
        }
        for &e in &due {
            let m = &mut done[e as usize];
            *m += 1;
            let t = (*m as f64 / edges.weights[e as usize]).floor();
            next[e as usize] = if t < epochs as f64 { t as u32 } else { u32::MAX };
        }
    }

    if let Some(atoms) = shared {
        data = atoms.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
    }
    Matrix::from_vec(n, dim, data)
}

/// Refines one new point against a fixed reference layout. `neighbors` holds
/// `(reference index, membership)` pairs.
pub fn refine_point(
    y: &mut [f64],
    neighbors: &[(usize, f64)],
    reference: &Matrix,
    params: &LayoutParams,
    rng: &mut ChaCha8Rng,
) {
    let dim = y.len();
    let n_ref = reference.rows();
    let mut delta = vec![0.0; dim];
    for epoch in 0..params.epochs {
        let alpha = params.alpha(epoch);
        for &(j, w) in neighbors {
            if !is_due(w.min(1.0), epoch) {
                continue;
            }
            let yo = reference.row(j);
            let r2: f64 = y.iter().zip(yo).map(|(a, b)| (a - b) * (a - b)).sum();
            let coeff = params.attraction(r2);
            for d in 0..dim {
                delta[d] = (coeff * (y[d] - yo[d])).clamp(-params.clip, params.clip) * alpha;
                y[d] += delta[d];
            }
            for _ in 0..params.negative_sample_rate {
                let k = rng.random_range(0..n_ref);
                let yo = reference.row(k);
                let r2: f64 = y.iter().zip(yo).map(|(a, b)| (a - b) * (a - b)).sum();
                let coeff = params.repulsion(r2);
                if coeff <= 0.0 {
                    continue;
                }
                for d in 0..dim {
                    y[d] += (coeff * (y[d] - yo[d])).clamp(-params.clip, params.clip) * alpha;
                }
            }
        }
    }
}
