//! Spectral initialization from the symmetric normalized graph Laplacian.
//!
//! The bottom nontrivial eigenvectors of `L = I − D^{-1/2} W D^{-1/2}` are the
//! top eigenvectors of the normalized adjacency, which Lanczos with full
//! reorthogonalization finds after deflating the trivial `√deg` direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::fuzzy::FuzzyGraph;
use crate::matrix::Matrix;

pub const INIT_RADIUS: f64 = 10.0;
const LANCZOS_MAX_STEPS: usize = 300;
const LANCZOS_TOL: f64 = 1e-4;
const INIT_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    Spectral,
    /// Seeded uniform noise in `[−10, 10]^d`.
    Random,
}

/// Implicit QL on a symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples `i` and `i + 1`). Each row of `z` is
/// rotated along, so passing identity rows yields the matching rows of the
/// eigenvector matrix. Eigenvalues are left unsorted in `diag`.
pub fn tridiagonal_eigen(diag: &mut [f64], off: &[f64], z: &mut [Vec<f64>]) -> bool {
    let n = diag.len();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return false;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    true
}

/// Indices of `values` sorted descending.
fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));
    order
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct NormalizedAdjacency<'a> {
    graph: &'a FuzzyGraph,
    inv_sqrt_deg: Vec<f64>,
}

impl NormalizedAdjacency<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (idx, w) = self.graph.row(i);
            let s: f64 = idx
                .iter()
                .zip(w)
                .map(|(&j, &wij)| wij * self.inv_sqrt_deg[j as usize] * x[j as usize])
                .sum();
            *yi = self.inv_sqrt_deg[i] * s;
        }
    }
}

/// Top `d` nontrivial eigenvectors of the normalized adjacency, as an
/// `n × d` matrix, or `None` when Lanczos does not converge.
pub fn spectral_vectors(graph: &FuzzyGraph, d: usize, seed: u64) -> Option<Matrix> {
    let n = graph.n_vertices();
    if n < d + 2 {
        return None;
    }
    let deg = graph.degrees();
    if deg.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let op = NormalizedAdjacency {
        graph,
        inv_sqrt_deg: deg.iter().map(|x| 1.0 / x.sqrt()).collect(),
    };
    let mut trivial: Vec<f64> = deg.iter().map(|x| x.sqrt()).collect();
    let tn = dot(&trivial, &trivial).sqrt();
    trivial.iter_mut().for_each(|x| *x /= tn);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5bec);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut q: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let c = dot(&q, &trivial);
    axpy(&mut q, -c, &trivial);
    let qn = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= qn);

    let max_steps = LANCZOS_MAX_STEPS.min(n - 1);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut result: Option<usize> = None;

    for j in 0..max_steps {
        op.apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            let c = dot(&w, &trivial);
            axpy(&mut w, -c, &trivial);
            for b in &basis {
                let c = dot(&w, b);
                axpy(&mut w, -c, b);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        let m = j + 1;
        let breakdown = bnorm < 1e-10;
        if m >= d && (breakdown || m % 10 == 0 || m == max_steps) {
            let mut vals = alpha.clone();
            let mut last = vec![vec![0.0; m]];
            last[0][m - 1] = 1.0;
            if !tridiagonal_eigen(&mut vals, &beta, &mut last) {
                return None;
            }
            let order = descending(&vals);
            let converged =
                breakdown || order[..d].iter().all(|&c| (bnorm * last[0][c]).abs() <= LANCZOS_TOL);
            if converged {
                result = Some(m);
                break;
            }
        }
        if breakdown {
            break;
        }
        beta.push(bnorm);
        basis.push(w.iter().map(|x| x / bnorm).collect());
    }

    let m = result?;
    let mut vals = alpha[..m].to_vec();
    let mut z: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut row = vec![0.0; m];
            row[r] = 1.0;
            row
        })
        .collect();
    if !tridiagonal_eigen(&mut vals, &beta[..m.saturating_sub(1)], &mut z) {
        return None;
    }
    let order = descending(&vals);
    let mut out = Matrix::zeros(n, d);
    for (c, &col) in order[..d].iter().enumerate() {
        for (s, b) in basis.iter().take(m).enumerate() {
            let coef = z[s][col];
            for (i, bi) in b.iter().enumerate() {
                let v = out.get(i, c) + coef * bi;
                out.set(i, c, v);
            }
        }
    }
    out.all_finite().then_some(out)
}

/// Initial latent coordinates: spectral layout scaled so the largest
/// absolute coordinate is [`INIT_RADIUS`], plus a tiny seeded jitter; seeded
/// uniform noise when the eigensolve fails.
pub fn initialize_embedding(graph: &FuzzyGraph, d: usize, seed: u64) -> (Matrix, InitMethod) {
    let n = graph.n_vertices();
    if n <= 1 {
        return (Matrix::zeros(n, d), InitMethod::Spectral);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some(mut m) = spectral_vectors(graph, d, seed) {
        let max = m.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if max > 0.0 {
            let jitter = Normal::new(0.0, INIT_JITTER).expect("jitter");
            let expansion = INIT_RADIUS / max;
            for v in m.as_mut_slice() {
                *v = *v * expansion + jitter.sample(&mut rng);
            }
            return (m, InitMethod::Spectral);
        }
    }
    (random_init(n, d, &mut rng), InitMethod::Random)
}

pub fn random_init(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..n * d)
        .map(|_| rng.random_range(-INIT_RADIUS..=INIT_RADIUS))
        .collect();
    Matrix::from_vec(n, d, data).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let mut d = vec![2.0, 2.0];
        let mut z = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(tridiagonal_eigen(&mut d, &[1.0], &mut z));
        let order = descending(&d);
        assert!((d[order[0]] - 3.0).abs() < 1e-14 && (d[order[1]] - 1.0).abs() < 1e-14);
        assert!((z[0][order[0]].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn single_point_at_origin() {
        let g = FuzzyGraph {
            indptr: vec![0, 0],
            indices: vec![],
            weights: vec![],
            calibration: vec![],
        };
        let (m, _) = initialize_embedding(&g, 2, 1);
        assert_eq!(m.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn fallback_is_seeded() {
        // isolated vertices have no spectral layout
        let g = FuzzyGraph {
            indptr: vec![0; 6],
            indices: vec![],
            weights: vec![],
            calibration: vec![],
        };
        let (a, how) = initialize_embedding(&g, 3, 42);
        let (b, _) = initialize_embedding(&g, 3, 42);
        assert_eq!(how, InitMethod::Random);
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|v| v.abs() <= INIT_RADIUS));
        assert_ne!(a, initialize_embedding(&g, 3, 43).0);
    }
}
