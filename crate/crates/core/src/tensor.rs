//! Scalar and orientation features derived from diffusion tensors.

use crate::error::{Error, Result};

/// Symmetric 3×3 diffusion tensor stored by its six unique components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionTensor {
    pub dxx: f64,
    pub dyy: f64,
    pub dzz: f64,
    pub dxy: f64,
    pub dxz: f64,
    pub dyz: f64,
}

impl DiffusionTensor {
    pub fn new(dxx: f64, dyy: f64, dzz: f64, dxy: f64, dxz: f64, dyz: f64) -> Self {
        Self {
            dxx,
            dyy,
            dzz,
            dxy,
            dxz,
            dyz,
        }
    }

    pub fn diagonal(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c, 0.0, 0.0, 0.0)
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.dxx, self.dxy, self.dxz],
            [self.dxy, self.dyy, self.dyz],
            [self.dxz, self.dyz, self.dzz],
        ]
    }

    pub fn is_finite(&self) -> bool {
        [self.dxx, self.dyy, self.dzz, self.dxy, self.dxz, self.dyz]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorEigen {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

impl TensorEigen {
    /// Eigen pair built directly from sorted eigenvalues with axis-aligned vectors.
    pub fn from_values(values: [f64; 3]) -> Self {
        Self {
            values,
            vectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn principal(&self) -> [f64; 3] {
        self.vectors[0]
    }

    /// Σ λᵢ eᵢ eᵢᵀ
    pub fn reconstruct(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (l, e) in self.values.iter().zip(&self.vectors) {
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += l * e[r] * e[c];
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarMaps {
    pub fa: f64,
    pub md: f64,
    pub rd: f64,
    pub ad: f64,
    pub tr: f64,
    pub mode: f64,
}

/// Five-component antipodally symmetric orientation encoding.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KnutssonVector(pub [f64; 5]);

impl KnutssonVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigen-decomposition by cyclic Jacobi rotations.
pub fn eigen_decompose(tensor: &DiffusionTensor) -> Result<TensorEigen> {
    if !tensor.is_finite() {
        return Err(Error::NonFinite("diffusion tensor"));
    }
    let mut a = tensor.to_matrix();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    let scale: f64 = a.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        for _sweep in 0..64 {
            let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
            if off <= f64::EPSILON * 1e-2 * scale {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A ← Jᵀ A J
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (slot, &col) in order.iter().enumerate() {
        values[slot] = a[col][col];
        let e = [v[0][col], v[1][col], v[2][col]];
        let n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        vectors[slot] = [e[0] / n, e[1] / n, e[2] / n];
    }
    Ok(TensorEigen { values, vectors })
}

/// FA, MD, RD, AD, trace and mode from sorted eigenvalues.
///
/// A zero tensor yields all zeros. FA is clamped to `[0, 1]`, which only
/// matters for tensors with negative eigenvalues.
pub fn scalar_maps(eig: &TensorEigen) -> ScalarMaps {
    let [l1, l2, l3] = eig.values;
    let tr = l1 + l2 + l3;
    let md = tr / 3.0;
    let dev = [l1 - md, l2 - md, l3 - md];
    let dev_norm = (dev[0] * dev[0] + dev[1] * dev[1] + dev[2] * dev[2]).sqrt();
    let norm = (l1 * l1 + l2 * l2 + l3 * l3).sqrt();

    let fa = if norm > 0.0 {
        ((1.5f64).sqrt() * dev_norm / norm).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mode = if dev_norm > 0.0 {
        let det = dev[0] * dev[1] * dev[2] / (dev_norm * dev_norm * dev_norm);
        (3.0 * 6f64.sqrt() * det).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    ScalarMaps {
        fa,
        md,
        rd: (l2 + l3) / 2.0,
        ad: l1,
        tr,
        mode,
    }
}

/// Linear, planar and spherical shares normalized by the largest eigenvalue.
pub fn westin_indices(eig: &TensorEigen) -> Result<(f64, f64, f64)> {
    let [l1, l2, l3] = eig.values;
    if !(l1 > 0.0) {
        return Err(Error::DegenerateTensor(l1));
    }
    Ok(((l1 - l2) / l1, (l2 - l3) / l1, l3 / l1))
}

pub fn knutsson_map(direction: [f64; 3]) -> Result<KnutssonVector> {
    let n = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
    if !n.is_finite() {
        return Err(Error::NonFinite("direction"));
    }
    if n < 1e-12 {
        return Err(Error::ZeroDirection);
    }
    let [x, y, z] = [direction[0] / n, direction[1] / n, direction[2] / n];
    Ok(KnutssonVector([
        x * x - y * y,
        2.0 * x * y,
        2.0 * x * z,
        2.0 * y * z,
        (2.0 * z * z - x * x - y * y) / 3f64.sqrt(),
    ]))
}

/// Regular 3-D lattice of values, `i` varying fastest.
#[derive(Debug, Clone)]
pub struct Lattice<T> {
    dims: [usize; 3],
    values: Vec<T>,
    mask: Option<Vec<bool>>,
}

impl<T: Copy> Lattice<T> {
    pub fn new(dims: [usize; 3], values: Vec<T>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        Ok(Self {
            dims,
            values,
            mask: None,
        })
    }

    /// Lattice where only voxels with `mask == true` carry data. Differences
    /// fall back to one-sided, or zero, where neighbors are missing.
    pub fn with_mask(dims: [usize; 3], values: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        let mut lat = Self::new(dims, values)?;
        if mask.len() != lat.values.len() {
            return Err(Error::DimensionMismatch {
                expected: lat.values.len(),
                got: mask.len(),
            });
        }
        lat.mask = Some(mask);
        Ok(lat)
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f(i, j, k));
                }
            }
        }
        Self {
            dims,
            values,
            mask: None,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    fn present(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Per-voxel Frobenius norm of the 5×3 spatial Jacobian of a Knutsson field.
pub fn knutsson_edge_map(field: &Lattice<KnutssonVector>, spacing: [f64; 3]) -> Result<Lattice<f64>> {
    let dims = field.dims;
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::LatticeTooSmall(dims));
    }
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidArgument(format!("lattice spacing {spacing:?}")));
    }
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut out = vec![0.0; field.values.len()];
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let idx = field.index(i, j, k);
                if !field.present(idx) {
                    continue;
                }
                let pos = [i, j, k];
                let mut sum = 0.0;
                for axis in 0..3 {
                    let lo = (pos[axis] > 0)
                        .then(|| idx - strides[axis])
                        .filter(|&n| field.present(n));
                    let hi = (pos[axis] + 1 < dims[axis])
                        .then(|| idx + strides[axis])
                        .filter(|&n| field.present(n));
                    let (a, b, h) = match (lo, hi) {
                        (Some(l), Some(r)) => (l, r, 2.0 * spacing[axis]),
                        (None, Some(r)) => (idx, r, spacing[axis]),
                        (Some(l), None) => (l, idx, spacing[axis]),
                        (None, None) => continue,
                    };
                    let fa = field.values[a].0;
                    let fb = field.values[b].0;
                    for c in 0..5 {
                        let d = (fb[c] - fa[c]) / h;
                        sum += d * d;
                    }
                }
                out[idx] = sum.sqrt();
            }
        }
    }
    Ok(Lattice {
        dims,
        values: out,
        mask: field.mask.clone(),
    })
}

/// All per-voxel tensor outputs used by the Base feature group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TensorFeatures {
    pub scalars: ScalarMaps,
    pub westin: (f64, f64, f64),
    pub knutsson: KnutssonVector,
}

/// Scalars, Westin indices and principal-direction Knutsson vector.
/// Degenerate tensors (λ1 ≤ 0) produce zero Westin and Knutsson entries.
pub fn tensor_features(tensor: &DiffusionTensor) -> Result<TensorFeatures> {
    let eig = eigen_decompose(tensor)?;
    let scalars = scalar_maps(&eig);
    match westin_indices(&eig) {
        Ok(westin) => Ok(TensorFeatures {
            scalars,
            westin,
            knutsson: knutsson_map(eig.principal())?,
        }),
        Err(Error::DegenerateTensor(_)) => Ok(TensorFeatures {
            scalars,
            ..Default::default()
        }),
        Err(e) => Err(e),
    }
}
