//! Run configuration: defaults, then a `key=value` file, then flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thalparc_core::manifold::DEFAULT_EPOCHS;
use thalparc_core::{Error, FeatureGroupSpec, KnnMethod, NeighborCount, Result};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "THALPARC_OUT";
pub const DEFAULT_OUT: &str = "thalparc-out";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub groups: FeatureGroupSpec,
    pub dim: usize,
    pub n_neighbors: NeighborCount,
    pub epochs: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub knn: KnnMethod,
    /// Voting neighbors; `None` uses the default for `dim`.
    pub k: Option<usize>,
    pub folds: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub include_conflicted: bool,
    /// Semicolon-separated group lists for ablation.
    pub subsets: Option<String>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        use thalparc_core::FeatureGroup::*;
        Self {
            data: None,
            groups: FeatureGroupSpec::new([Base, Coord, MultiTi]).expect("non-empty"),
            dim: 2,
            n_neighbors: NeighborCount::Auto,
            epochs: DEFAULT_EPOCHS,
            min_dist: 0.1,
            spread: 1.0,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            knn: KnnMethod::Auto,
            k: None,
            folds: 5,
            seed: 0,
            deterministic: false,
            include_conflicted: false,
            subsets: None,
            out: PathBuf::from(DEFAULT_OUT),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("bad value `{v}` for `{key}`"))),
    }
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    read_kv(&std::fs::read_to_string(path)?)
}

impl RunConfig {
    /// Applies one setting by key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(v)),
            "groups" => self.groups = FeatureGroupSpec::parse(v)?,
            "dim" => self.dim = parse(key, v)?,
            "n_neighbors" => self.n_neighbors = v.parse()?,
            "epochs" => self.epochs = parse(key, v)?,
            "min_dist" => self.min_dist = parse(key, v)?,
            "spread" => self.spread = parse(key, v)?,
            "negative_sample_rate" => self.negative_sample_rate = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "knn" => self.knn = v.parse()?,
            "k" => {
                self.k = match v.trim() {
                    "auto" => None,
                    s => Some(parse(key, s)?),
                }
            }
            "folds" => self.folds = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            "include_conflicted" => self.include_conflicted = parse_bool(key, v)?,
            "subsets" => self.subsets = Some(v.to_string()),
            "out" => self.out = PathBuf::from(v),
            _ => return Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Every setting as `key=value` lines, sorted by key.
    pub fn to_kv(&self) -> String {
        let mut kv = BTreeMap::new();
        if let Some(d) = &self.data {
            kv.insert("data", d.display().to_string());
        }
        kv.insert("groups", self.groups.to_string());
        kv.insert("dim", self.dim.to_string());
        kv.insert("n_neighbors", self.n_neighbors.to_string());
        kv.insert("epochs", self.epochs.to_string());
        kv.insert("min_dist", self.min_dist.to_string());
        kv.insert("spread", self.spread.to_string());
        kv.insert("negative_sample_rate", self.negative_sample_rate.to_string());
        kv.insert("learning_rate", self.learning_rate.to_string());
        kv.insert("knn", self.knn.to_string());
        kv.insert("k", self.k.map_or("auto".to_string(), |k| k.to_string()));
        kv.insert("folds", self.folds.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("deterministic", self.deterministic.to_string());
        kv.insert("include_conflicted", self.include_conflicted.to_string());
        if let Some(s) = &self.subsets {
            kv.insert("subsets", s.clone());
        }
        let mut s = String::new();
        for (k, v) in kv {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    pub fn umap_params(&self) -> thalparc_core::UmapParams {
        thalparc_core::UmapParams {
            n_neighbors: self.n_neighbors,
            n_components: self.dim,
            min_dist: self.min_dist,
            spread: self.spread,
            epochs: self.epochs,
            negative_sample_rate: self.negative_sample_rate,
            learning_rate: self.learning_rate,
            seed: self.seed,
            mode: if self.deterministic {
                thalparc_core::LayoutMode::Sequential
            } else {
                thalparc_core::LayoutMode::Parallel
            },
            knn: self.knn,
        }
    }

    pub fn crossval(&self) -> thalparc_core::CrossvalConfig {
        thalparc_core::CrossvalConfig {
            groups: self.groups.clone(),
            umap: self.umap_params(),
            k: self.k,
            folds: self.folds,
            seed: self.seed,
            include_conflicted: self.include_conflicted,
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("no dataset given (--data or `data=` in the config)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_roundtrip() {
        let mut c = RunConfig::default();
        c.apply(&read_kv("# run\ndim = 3\nk=auto\nn-neighbors=40\ngroups=base,multiti\n").unwrap())
            .unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.n_neighbors, NeighborCount::Fixed(40));
        let mut d = RunConfig::default();
        d.apply(&read_kv(&c.to_kv()).unwrap()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_key() {
        let mut c = RunConfig::default();
        assert!(c.set("colour", "red").is_err());
        assert!(read_kv("novalue").is_err());
    }
}
