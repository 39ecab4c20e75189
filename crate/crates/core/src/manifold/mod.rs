//! UMAP: neighbor graph, fuzzy simplicial set, spectral initialization,
//! stochastic layout and placement of unseen points.

pub mod curve;
pub mod fuzzy;
pub mod knn;
pub mod layout;
pub mod spectral;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use curve::fit_curve;
pub use fuzzy::{calibrate_smooth_knn, fuzzy_union, Calibration, FuzzyGraph};
pub use knn::{knn_graph_approx, knn_graph_exact, knn_search, NeighborGraph};
pub use layout::{optimize_layout, LayoutMode, LayoutParams};
pub use spectral::{initialize_embedding, InitMethod};

/// Neighbor count used when none is configured for large data.
pub const DEFAULT_N_NEIGHBORS: usize = 2000;
pub const DEFAULT_EPOCHS: usize = 1000;
/// Brute force is used below this many points when the method is `Auto`.
pub const EXACT_KNN_LIMIT: usize = 10_000;

/// `min(2000, max(15, n/15))`, capped at `n − 1`.
pub fn scaled_n_neighbors(n: usize) -> usize {
    DEFAULT_N_NEIGHBORS
        .min((n / 15).max(15))
        .min(n.saturating_sub(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborCount {
    /// Scaled with the data size, see [`scaled_n_neighbors`].
    #[default]
    Auto,
    Fixed(usize),
}

impl NeighborCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            NeighborCount::Auto => scaled_n_neighbors(n),
            NeighborCount::Fixed(k) => k.min(n.saturating_sub(1)),
        }
    }
}

impl fmt::Display for NeighborCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborCount::Auto => f.write_str("auto"),
            NeighborCount::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for NeighborCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(NeighborCount::Auto),
            v => v
                .parse()
                .map(NeighborCount::Fixed)
                .map_err(|_| Error::InvalidArgument(format!("n_neighbors `{v}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnMethod {
    #[default]
    Auto,
    Exact,
    Approx,
}

impl fmt::Display for KnnMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnnMethod::Auto => "auto",
            KnnMethod::Exact => "exact",
            KnnMethod::Approx => "approx",
        })
    }
}

impl FromStr for KnnMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(KnnMethod::Auto),
            "exact" => Ok(KnnMethod::Exact),
            "approx" => Ok(KnnMethod::Approx),
            v => Err(Error::InvalidArgument(format!("knn method `{v}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UmapParams {
    pub n_neighbors: NeighborCount,
    pub n_components: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub mode: LayoutMode,
    pub knn: KnnMethod,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            n_neighbors: NeighborCount::Auto,
            n_components: 2,
            min_dist: 0.1,
            spread: 1.0,
            epochs: DEFAULT_EPOCHS,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            seed: 0,
            mode: LayoutMode::Sequential,
            knn: KnnMethod::Auto,
        }
    }
}

/// Trained latent layout plus what is needed to place new points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub coords: Matrix,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
    pub epochs: usize,
    pub n_neighbors: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub init: InitMethod,
    pub calibration: Vec<Calibration>,
    /// Feature rows the layout was trained on, as given to [`fit`].
    pub train_features: Matrix,
}

pub fn neighbor_graph(x: &Matrix, k: usize, method: KnnMethod, seed: u64) -> Result<NeighborGraph> {
    match method {
        KnnMethod::Exact => knn_graph_exact(x, k),
        KnnMethod::Approx => knn_graph_approx(x, k, seed),
        KnnMethod::Auto if x.rows() <= EXACT_KNN_LIMIT => knn_graph_exact(x, k),
        KnnMethod::Auto => knn_graph_approx(x, k, seed),
    }
}

/// Learns a `params.n_components`-dimensional embedding of the rows of `x`.
pub fn fit(x: &Matrix, params: &UmapParams) -> Result<EmbeddingModel> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 points, got {n}")));
    }
    if params.n_components == 0 {
        return Err(Error::InvalidArgument("latent dimension must be positive".into()));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("embedding input"));
    }
    let k = params.n_neighbors.resolve(n);
    let knn = neighbor_graph(x, k, params.knn, params.seed)?;
    let graph = FuzzyGraph::from_neighbors(&knn);
    let (a, b) = fit_curve(params.min_dist, params.spread)?;
    let (init, init_method) = initialize_embedding(&graph, params.n_components, params.seed);
    let layout = LayoutParams {
        negative_sample_rate: params.negative_sample_rate,
        learning_rate: params.learning_rate,
        ..LayoutParams::new(a, b, params.epochs)
    };
    let coords = optimize_layout(init, &graph, &layout, params.seed, params.mode)?;
    Ok(EmbeddingModel {
        coords,
        a,
        b,
        seed: params.seed,
        epochs: params.epochs,
        n_neighbors: k,
        negative_sample_rate: params.negative_sample_rate,
        learning_rate: params.learning_rate,
        init: init_method,
        calibration: graph.calibration,
        train_features: x.clone(),
    })
}

/// Membership-weighted mean of the neighbors' latent coordinates.
pub fn initial_placement(neighbors: &[(usize, f64)], coords: &Matrix) -> Vec<f64> {
    let mut y = vec![0.0; coords.cols()];
    let total: f64 = neighbors.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return y;
    }
    for &(j, w) in neighbors {
        for (v, c) in y.iter_mut().zip(coords.row(j)) {
            *v += w * c / total;
        }
    }
    y
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.coords.cols()
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    /// Epochs spent refining each new point.
    pub fn transform_epochs(&self) -> usize {
        (self.epochs / 10).max(1)
    }

    /// Places new points: weighted mean of their training neighbors' latent
    /// coordinates, then refinement against the fixed training layout.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.train_features.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.train_features.cols(),
                got: x.cols(),
            });
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("transform input"));
        }
        if x.rows() == 0 {
            return Ok(Matrix::zeros(0, self.dim()));
        }
        let k = self.n_neighbors.min(self.len());
        let knn = knn_search(&self.train_features, x, k)?;
        let params = LayoutParams {
            negative_sample_rate: self.negative_sample_rate,
            learning_rate: self.learning_rate / 4.0,
            ..LayoutParams::new(self.a, self.b, self.transform_epochs())
        };
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|q| {
                let cal = calibrate_smooth_knn(knn.distances(q), k);
                let neighbors: Vec<(usize, f64)> = knn
                    .neighbors(q)
                    .iter()
                    .zip(knn.distances(q))
                    .map(|(&j, &d)| (j as usize, cal.weight(d)))
                    .collect();
                let mut y = initial_placement(&neighbors, &self.coords);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(q as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
                layout::refine_point(&mut y, &neighbors, &self.coords, &params, &mut rng);
                y
            })
            .collect();
        let out = Matrix::from_rows(&rows)?;
        if let Some(pos) = out.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::LayoutDiverged {
                epoch: self.transform_epochs(),
                point: pos / self.dim(),
            });
        }
        Ok(out)
    }

    /// Text artifact: header, then coordinate, calibration and feature blocks.
    /// Numbers use shortest round-trip formatting, so identical models give
    /// identical bytes.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#embedding-model\tv1")?;
        writeln!(w, "d\t{}", self.dim())?;
        writeln!(w, "n\t{}", self.len())?;
        writeln!(w, "a\t{}", self.a)?;
        writeln!(w, "b\t{}", self.b)?;
        writeln!(w, "seed\t{}", self.seed)?;
        writeln!(w, "epochs\t{}", self.epochs)?;
        writeln!(w, "n_neighbors\t{}", self.n_neighbors)?;
        writeln!(w, "negative_sample_rate\t{}", self.negative_sample_rate)?;
        writeln!(w, "learning_rate\t{}", self.learning_rate)?;
        let init = match self.init {
            InitMethod::Spectral => "spectral",
            InitMethod::Random => "random",
        };
        writeln!(w, "init\t{init}")?;
        writeln!(w, "feature_dim\t{}", self.train_features.cols())?;
        writeln!(w, "#coords")?;
        write_block(&mut w, &self.coords)?;
        writeln!(w, "#calibration")?;
        for c in &self.calibration {
            writeln!(w, "{}\t{}\t{}", c.rho, c.sigma, c.degenerate as u8)?;
        }
        writeln!(w, "#features")?;
        write_block(&mut w, &self.train_features)?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Artifact("unexpected end of model file".into()))?
                .map_err(Error::from)
        };
        let magic = next()?;
        if magic != "#embedding-model\tv1" {
            return Err(Error::Artifact(format!("bad model header `{magic}`")));
        }
        let mut header = std::collections::BTreeMap::new();
        loop {
            let line = next()?;
            if line == "#coords" {
                break;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::Artifact(format!("bad header line `{line}`")))?;
            header.insert(k.to_string(), v.to_string());
        }
        fn field<T: FromStr>(h: &std::collections::BTreeMap<String, String>, k: &str) -> Result<T> {
            h.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Artifact(format!("missing or bad header field `{k}`")))
        }
        let d: usize = field(&header, "d")?;
        let n: usize = field(&header, "n")?;
        let fdim: usize = field(&header, "feature_dim")?;
        let init = match header.get("init").map(String::as_str) {
            Some("spectral") => InitMethod::Spectral,
            Some("random") => InitMethod::Random,
            other => return Err(Error::Artifact(format!("bad init `{other:?}`"))),
        };
        let coords = read_block(&mut next, n, d)?;
        if next()? != "#calibration" {
            return Err(Error::Artifact("missing calibration block".into()));
        }
        let mut calibration = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next()?;
            let f: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Artifact(format!("bad number `{s}`")))
            };
            if f.len() != 3 {
                return Err(Error::Artifact(format!("bad calibration line `{line}`")));
            }
            calibration.push(Calibration {
                rho: num(f[0])?,
                sigma: num(f[1])?,
                degenerate: f[2] == "1",
            });
        }
        if next()? != "#features" {
            return Err(Error::Artifact("missing feature block".into()));
        }
        let train_features = read_block(&mut next, n, fdim)?;
        Ok(EmbeddingModel {
            coords,
            a: field(&header, "a")?,
            b: field(&header, "b")?,
            seed: field(&header, "seed")?,
            epochs: field(&header, "epochs")?,
            n_neighbors: field(&header, "n_neighbors")?,
            negative_sample_rate: field(&header, "negative_sample_rate")?,
            learning_rate: field(&header, "learning_rate")?,
            init,
            calibration,
            train_features,
        })
    }
}

fn write_block<W: Write>(w: &mut W, m: &Matrix) -> Result<()> {
    for row in m.iter_rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b"\t")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn read_block(next: &mut impl FnMut() -> Result<String>, rows: usize, cols: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = next()?;
        let before = data.len();
        if cols > 0 {
            for s in line.split('\t') {
                data.push(
                    s.parse::<f64>()
                        .map_err(|_| Error::Artifact(format!("bad number `{s}`")))?,
                );
            }
        }
        if data.len() - before != cols {
            return Err(Error::Artifact(format!(
                "expected {cols} values, found {}",
                data.len() - before
            )));
        }
    }
    Matrix::from_vec(rows, cols, data)
}
