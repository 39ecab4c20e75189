//! Smooth-kNN bandwidth calibration and the symmetric fuzzy neighbor graph.

use super::knn::NeighborGraph;

pub const CALIBRATION_TOLERANCE: f64 = 1e-6;
pub const CALIBRATION_MAX_ITER: usize = 64;
/// Bandwidth floor as a fraction of the row's mean neighbor distance.
pub const MIN_SIGMA_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub rho: f64,
    pub sigma: f64,
    /// The target sum could not be reached and `sigma` sits at its floor.
    pub degenerate: bool,
}

impl Calibration {
    /// Membership strength of a neighbor at distance `d`.
    #[inline]
    pub fn weight(&self, d: f64) -> f64 {
        let excess = d - self.rho;
        if excess <= 0.0 {
            1.0
        } else if self.sigma > 0.0 {
            (-excess / self.sigma).exp()
        } else {
            0.0
        }
    }
}

fn membership_sum(distances: &[f64], rho: f64, sigma: f64) -> f64 {
    distances
        .iter()
        .map(|&d| {
            let e = d - rho;
            if e > 0.0 {
                (-e / sigma).exp()
            } else {
                1.0
            }
        })
        .sum()
}

/// Finds `rho` (smallest positive distance) and `sigma` such that
/// `Σ exp(−max(0, d − rho)/sigma) = log2(k)`, by bisection.
pub fn calibrate_smooth_knn(distances: &[f64], k: usize) -> Calibration {
    let target = (k.max(2) as f64).log2();
    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let mean = if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    let floor = MIN_SIGMA_SCALE * mean;
    if mean <= 0.0 {
        return Calibration {
            rho: 0.0,
            sigma: floor,
            degenerate: true,
        };
    }

    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut mid = mean;
    let mut residual = f64::INFINITY;
    for _ in 0..CALIBRATION_MAX_ITER {
        let sum = membership_sum(distances, rho, mid);
        residual = sum - target;
        if residual.abs() <= CALIBRATION_TOLERANCE {
            break;
        }
        if residual > 0.0 {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    let converged = residual.abs() <= CALIBRATION_TOLERANCE;
    if mid < floor {
        return Calibration {
            rho,
            sigma: floor,
            degenerate: true,
        };
    }
    Calibration {
        rho,
        sigma: mid,
        degenerate: !converged,
    }
}

/// Probabilistic t-conorm: `a + b − a·b`.
#[inline]
pub fn fuzzy_union(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Symmetric sparse membership graph in CSR form, both directions stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub weights: Vec<f64>,
    pub calibration: Vec<Calibration>,
}

impl FuzzyGraph {
    pub fn n_vertices(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.weights[r])
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (idx, w) = self.row(i);
        idx.binary_search(&(j as u32)).map_or(0.0, |p| w[p])
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n_vertices()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Directed memberships from calibrated neighbor rows, combined with
    /// [`fuzzy_union`].
    pub fn from_neighbors(graph: &NeighborGraph) -> FuzzyGraph {
        let n = graph.len();
        let k = graph.k();
        let calibration: Vec<Calibration> = (0..n)
            .map(|i| calibrate_smooth_knn(graph.distances(i), k))
            .collect();
        // (row, col, forward weight, transposed weight)
        let mut entries: Vec<(u32, u32, f64, f64)> = Vec::with_capacity(2 * n * k);
        for i in 0..n {
            let cal = calibration[i];
            for (&j, &d) in graph.neighbors(i).iter().zip(graph.distances(i)) {
                let w = cal.weight(d);
                if w > 0.0 {
                    entries.push((i as u32, j, w, 0.0));
                    entries.push((j, i as u32, 0.0, w));
                }
            }
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut weights = Vec::with_capacity(entries.len());
        let mut pos = 0;
        while pos < entries.len() {
            let (r, c) = (entries[pos].0, entries[pos].1);
            let (mut fwd, mut back) = (0.0f64, 0.0f64);
            while pos < entries.len() && entries[pos].0 == r && entries[pos].1 == c {
                fwd = fwd.max(entries[pos].2);
                back = back.max(entries[pos].3);
                pos += 1;
            }
            let w = fuzzy_union(fwd, back);
            if w > 0.0 {
                indices.push(c);
                weights.push(w);
                indptr[r as usize + 1] += 1;
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        FuzzyGraph {
            indptr,
            indices,
            weights,
            calibration,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::knn::knn_graph_exact;
    use crate::matrix::Matrix;

    #[test]
    fn union_examples() {
        let x = 0.37;
        assert_eq!(fuzzy_union(0.0, x), x);
        assert_eq!(fuzzy_union(1.0, x), 1.0);
        assert_eq!(fuzzy_union(0.5, 0.5), 0.75);
    }

    #[test]
    fn worked_calibration() {
        let c = calibrate_smooth_knn(&[1.0, 2.0, 3.0, 4.0], 4);
        assert_eq!(c.rho, 1.0);
        assert!(!c.degenerate);
        // t + t² + t³ = 1 with t = exp(−1/σ); brentq root gives σ = 1.6410179…
        assert!((c.sigma - 1.641_017_93).abs() < 1e-3, "{}", c.sigma);
        let s = membership_sum(&[1.0, 2.0, 3.0, 4.0], c.rho, c.sigma);
        assert!((s - 2.0).abs() <= CALIBRATION_TOLERANCE);
    }

    #[test]
    fn equal_distances_hit_floor() {
        let c = calibrate_smooth_knn(&[2.0; 8], 8);
        assert!(c.degenerate);
        assert_eq!(c.sigma, MIN_SIGMA_SCALE * 2.0);
        assert_eq!(c.rho, 2.0);
    }

    #[test]
    fn all_zero_row() {
        let c = calibrate_smooth_knn(&[0.0; 5], 5);
        assert_eq!(c.rho, 0.0);
        assert_eq!(c.sigma, 0.0);
        assert!(c.degenerate);
        assert_eq!(c.weight(0.0), 1.0);
    }

    #[test]
    fn scale_equivariance() {
        let d = [0.5, 0.9, 1.3, 2.0, 2.2, 3.1];
        let base = calibrate_smooth_knn(&d, 6);
        for c in [0.01, 3.0, 250.0] {
            let scaled: Vec<f64> = d.iter().map(|v| v * c).collect();
            let s = calibrate_smooth_knn(&scaled, 6);
            assert!((s.rho - base.rho * c).abs() <= 1e-12 * c);
            assert!((s.sigma / c - base.sigma).abs() <= 1e-6 * base.sigma, "{c}");
        }
    }

    #[test]
    fn fuzzy_graph_symmetric() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [2.5, 2.5], [0.3, 0.1]])
            .unwrap();
        let g = FuzzyGraph::from_neighbors(&knn_graph_exact(&x, 3).unwrap());
        for i in 0..6 {
            let (idx, w) = g.row(i);
            for (&j, &wij) in idx.iter().zip(w) {
                assert!(wij > 0.0 && wij <= 1.0);
                assert_eq!(wij, g.weight(j as usize, i));
                assert_ne!(j as usize, i);
            }
        }
    }
}
