//! Command-line front end: feature extraction, synthetic data, embedding,
//! classification, cross-validation, ablation and plotting.

pub mod config;
pub mod features;
pub mod output;
pub mod plot;

use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use thalparc_core::classify::{classify_points, default_k, write_predictions, LabeledLatentSet};
use thalparc_core::eval::{
    ablation_subsets, aggregate_ablation, per_nucleus_dice, run_crossval, write_ablation_table, write_dice_table,
    write_summary,
};
use thalparc_core::manifold;
use thalparc_core::store::{read_dataset, VoxelRecord};
use thalparc_core::{
    load_dataset, Dataset, EmbeddingModel, Error, FeatureGroup, FeatureGroupSpec, Label, LabelSet, Matrix, Result,
    RobustScaler, SynthSpec,
};

use config::{read_kv, read_kv_file, RunConfig, DEFAULT_OUT, OUT_ENV};
use output::Staging;

pub const RESOLVED_CONFIG: &str = "config.resolved";

#[derive(Debug, Parser)]
#[command(name = "thalparc", version, about = "Thalamic nucleus parcellation in a learned latent space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute DTI feature columns from a table of tensor components.
    Features(FeaturesArgs),
    /// Generate a synthetic feature table with known cluster structure.
    Synth(SynthArgs),
    /// Fit the scaler and embedding on a dataset.
    Fit(RunArgs),
    /// Label voxels with a fitted model.
    Classify(ClassifyArgs),
    /// Subject-level k-fold cross-validation.
    Crossval(RunArgs),
    /// Cross-validate each feature-group subset.
    Ablate(AblateArgs),
    /// Scatter plot of a 2-D latent table.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutArg {
    /// Output directory [default: $THALPARC_OUT or ./thalparc-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated feature groups, e.g. base,coord,multiti.
    #[arg(long)]
    pub groups: Option<String>,
    /// Latent dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Neighbor count for the fuzzy graph, or `auto`.
    #[arg(long)]
    pub n_neighbors: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub min_dist: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    /// Graph construction: auto, exact or approx.
    #[arg(long)]
    pub knn: Option<String>,
    /// Voting neighbors, or `auto` for the latent-dimension default.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single-threaded, bit-reproducible run.
    #[arg(long)]
    pub deterministic: bool,
    /// Let `Conflicted` voxels vote as their own class.
    #[arg(long)]
    pub include_conflicted: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags; the output directory
    /// falls back to the environment.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut file_out = None;
        if let Some(path) = &self.config {
            let mut kv = read_kv_file(path)?;
            file_out = kv.remove("out");
            cfg.apply(&kv)?;
        }
        let mut flags: BTreeMap<String, String> = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.insert(k.to_string(), v);
            }
        };
        put("data", self.data.as_ref().map(|p| p.display().to_string()));
        put("groups", self.groups.clone());
        put("dim", self.dim.map(|v| v.to_string()));
        put("n_neighbors", self.n_neighbors.clone());
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("min_dist", self.min_dist.map(|v| v.to_string()));
        put("spread", self.spread.map(|v| v.to_string()));
        put("knn", self.knn.clone());
        put("k", self.k.clone());
        put("folds", self.folds.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        if self.deterministic {
            put("deterministic", Some("true".into()));
        }
        if self.include_conflicted {
            put("include_conflicted", Some("true".into()));
        }
        cfg.apply(&flags)?;
        cfg.out = OutArg {
            out: self.out.clone().or(file_out.map(PathBuf::from)),
        }
        .resolve();
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeaturesArgs {
    /// Tab-separated table with subject, i, j, k, dxx, dyy, dzz, dxy, dxz, dyz.
    #[arg(long)]
    pub input: PathBuf,
    /// Voxel spacing along i, j, k.
    #[arg(long, default_value = "1,1,1")]
    pub spacing: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    /// key=value spec file; flags override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub voxels: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Mean inter-centroid distance over the noise norm.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Fraction of voxels with two labels.
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Fraction of voxels with no label.
    #[arg(long)]
    pub unlabeled: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stored groups to emit.
    #[arg(long)]
    pub groups: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label every voxel instead of only the manually labeled ones.
    #[arg(long)]
    pub all_voxels: bool,
    /// Voting neighbors; overrides the fitted configuration.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Semicolon-separated group lists, e.g. "base;base,coord".
    /// Defaults to the seven standard subsets.
    #[arg(long)]
    pub subsets: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Latent table written by `fit`.
    #[arg(long)]
    pub latent: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

/// Runs `f` on a single-thread pool when `deterministic` is set.
fn with_pool<T: Send>(deterministic: bool, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(f)
    } else {
        f()
    }
}

/// Runs a parsed command; returns the artifacts written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Features(a) => cmd_features(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Fit(a) => cmd_fit(&a.resolve()?),
        Command::Classify(a) => cmd_classify(&a),
        Command::Crossval(a) => cmd_crossval(&a.resolve()?),
        Command::Ablate(a) => {
            let mut cfg = a.run.resolve()?;
            if a.subsets.is_some() {
                cfg.subsets = a.subsets.clone();
            }
            cmd_ablate(&cfg)
        }
        Command::Plot(a) => cmd_plot(&a),
    }
}

/// The single line printed on failure.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error kind={} msg={msg}", e.kind())
}

fn parse_spacing(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("spacing `{s}`")))?;
    <[f64; 3]>::try_from(v).map_err(|_| Error::InvalidArgument(format!("spacing `{s}` needs three values")))
}

pub fn cmd_features(a: &FeaturesArgs) -> Result<Vec<PathBuf>> {
    let spacing = parse_spacing(&a.spacing)?;
    let input = std::fs::File::open(&a.input)?;
    let mut st = Staging::new(&a.out.resolve())?;
    st.write("features.tsv", |w| features::tensor_table_features(input, w, spacing))?;
    st.commit()
}

fn synth_spec(a: &SynthArgs) -> Result<SynthSpec> {
    let mut spec = SynthSpec::default();
    let mut kv = match &a.spec {
        Some(p) => read_kv_file(p)?,
        None => BTreeMap::new(),
    };
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    };
    put("subjects", a.subjects.map(|v| v.to_string()));
    put("voxels", a.voxels.map(|v| v.to_string()));
    put("clusters", a.clusters.map(|v| v.to_string()));
    put("separation", a.separation.map(|v| v.to_string()));
    put("sigma", a.sigma.map(|v| v.to_string()));
    put("overlap", a.overlap.map(|v| v.to_string()));
    put("unlabeled", a.unlabeled.map(|v| v.to_string()));
    put("seed", a.seed.map(|v| v.to_string()));
    put("groups", a.groups.clone());
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
        v.trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad value `{v}` for `{k}`")))
    }
    for (k, v) in &kv {
        match k.as_str() {
            "subjects" => spec.n_subjects = num(k, v)?,
            "voxels" => spec.voxels_per_subject = num(k, v)?,
            "clusters" => spec.n_clusters = num(k, v)?,
            "separation" => spec.separation = num(k, v)?,
            "sigma" => spec.sigma = num(k, v)?,
            "overlap" => spec.overlap = num(k, v)?,
            "unlabeled" => spec.unlabeled = num(k, v)?,
            "seed" => spec.seed = num(k, v)?,
            "groups" => spec.groups = FeatureGroupSpec::parse(v)?,
            _ => return Err(Error::InvalidArgument(format!("unknown spec key `{k}`"))),
        }
    }
    Ok(spec)
}

fn synth_spec_text(s: &SynthSpec) -> String {
    format!(
        "clusters={}\ngroups={}\noverlap={}\nseed={}\nseparation={}\nsigma={}\nsubjects={}\nunlabeled={}\nvoxels={}\n",
        s.n_clusters, s.groups, s.overlap, s.seed, s.separation, s.sigma, s.n_subjects, s.unlabeled, s.voxels_per_subject
    )
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Vec<PathBuf>> {
    let spec = synth_spec(a)?;
    let data = thalparc_core::generate(&spec)?;
    let mut st = Staging::new(&a.out.resolve())?;
    st.write("dataset.tsv", |w| data.dataset.write_table(w))?;
    st.write_str("synth.spec", &synth_spec_text(&spec))?;
    st.commit()
}

fn load(cfg: &RunConfig, groups: &FeatureGroupSpec) -> Result<Dataset> {
    let path = cfg.data_path()?;
    info!("loading {}", path.display());
    load_dataset(path, groups)
}

/// Writes `subject, i, j, k, z1..zd, labels`.
pub fn write_latent<W: Write + ?Sized>(w: &mut W, records: &[VoxelRecord], coords: &Matrix) -> Result<()> {
    write!(w, "subject\ti\tj\tk")?;
    for d in 1..=coords.cols() {
        write!(w, "\tz{d}")?;
    }
    writeln!(w, "\tlabels")?;
    for (r, z) in records.iter().zip(coords.iter_rows()) {
        write!(w, "{}\t{}\t{}\t{}", r.subject, r.ijk[0], r.ijk[1], r.ijk[2])?;
        for v in z {
            write!(w, "\t{v}")?;
        }
        writeln!(w, "\t{}", r.labels)?;
    }
    Ok(())
}

pub fn read_latent(path: &Path) -> Result<(Vec<VoxelRecord>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path)?;
    let header = rdr.headers()?.clone();
    let zcols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('z') && h[1..].parse::<usize>().is_ok())
        .map(|(i, _)| i)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (cs, ci, cj, ck, cl) = (col("subject")?, col("i")?, col("j")?, col("k")?, col("labels")?);
    let mut records = Vec::new();
    let mut data = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            let v = rec.get(c).unwrap_or("");
            v.parse().map_err(|_| Error::Parse {
                row: n + 1,
                column: header[c].to_string(),
                value: v.to_string(),
            })
        };
        records.push(VoxelRecord {
            subject: rec.get(cs).unwrap_or("").to_string(),
            ijk: [num(ci)? as i64, num(cj)? as i64, num(ck)? as i64],
            labels: LabelSet::parse(rec.get(cl).unwrap_or(""))?,
        });
        for &c in &zcols {
            data.push(num(c)?);
        }
    }
    let m = Matrix::from_vec(records.len(), zcols.len(), data)?;
    Ok((records, m))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load(cfg, &cfg.groups)?;
    let mut st = Staging::new(&cfg.out)?;
    with_pool(cfg.deterministic, || {
        let f = data.select_features(&cfg.groups)?;
        let scaler = RobustScaler::fit_named(&f.matrix, &f.directional, f.columns.clone())?;
        let x = scaler.transform(&f.matrix)?;
        let model = manifold::fit(&x, &cfg.umap_params())?;
        info!("fitted {} points into {} dimensions", model.len(), model.dim());
        st.write("model.tsv", |w| model.write_tsv(w))?;
        st.write("scaler.tsv", |w| scaler.write_tsv(w))?;
        st.write("latent.tsv", |w| write_latent(w, data.records(), &model.coords))?;
        st.write_str(RESOLVED_CONFIG, &cfg.to_kv())
    })?;
    st.commit()
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<Vec<PathBuf>> {
    let mut cfg = RunConfig::default();
    cfg.apply(&read_kv(&std::fs::read_to_string(a.model.join(RESOLVED_CONFIG))?)?)?;
    let k = match a.k.or(cfg.k) {
        Some(k) => k,
        None => default_k(cfg.dim)?,
    };
    let open = |name: &str| -> Result<BufReader<std::fs::File>> {
        Ok(BufReader::new(std::fs::File::open(a.model.join(name))?))
    };
    let model = EmbeddingModel::read_tsv(open("model.tsv")?)?;
    let scaler = RobustScaler::read_tsv(open("scaler.tsv")?)?;
    let (train_records, _) = read_latent(&a.model.join("latent.tsv"))?;
    let data = read_dataset(std::fs::File::open(&a.data)?, &cfg.groups)?;
    let rows: Vec<usize> = (0..data.len())
        .filter(|&r| a.all_voxels || !data.records()[r].labels.nuclei().is_empty())
        .collect();
    let data = data.subset(&rows);

    let mut st = Staging::new(&a.out.resolve())?;
    with_pool(cfg.deterministic, || {
        let labeled = LabeledLatentSet::from_records(&model.coords, &train_records, cfg.include_conflicted)?;
        let x = scaler.transform(&data.select_features(&cfg.groups)?.matrix)?;
        let y = model.transform(&x)?;
        let votes = classify_points(&labeled, &y, k)?;
        st.write("predictions.tsv", |w| write_predictions(w, data.records(), &votes))?;
        if !a.all_voxels {
            let pred: Vec<Label> = votes.iter().map(|v| v.winner).collect();
            let truth: Vec<LabelSet> = data.records().iter().map(|r| r.labels).collect();
            let scores = per_nucleus_dice(&pred, &truth);
            let mut s = format!("k={k}\noverall={}\n", scores.overall()?);
            for l in Label::TABLE_ORDER {
                s.push_str(&format!("dice_{l}={}\n", scores.dice[l.index()]));
            }
            st.write_str("summary.txt", &s)?;
        }
        Ok(())
    })?;
    st.commit()
}

pub fn cmd_crossval(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load(cfg, &cfg.groups)?;
    let mut st = Staging::new(&cfg.out)?;
    with_pool(cfg.deterministic, || {
        let report = run_crossval(&data, &cfg.crossval())?;
        for f in &report.folds {
            info!("fold {}: overall Dice {:.4}", f.row.fold + 1, f.row.overall);
            let dir = format!("fold{}", f.row.fold + 1);
            st.write(&format!("{dir}/model.tsv"), |w| f.model.write_tsv(w))?;
            st.write(&format!("{dir}/scaler.tsv"), |w| f.scaler.write_tsv(w))?;
        }
        st.write("dice.tsv", |w| write_dice_table(w, &report.rows()))?;
        st.write("summary.txt", |w| write_summary(w, &report))?;
        st.write_str(RESOLVED_CONFIG, &cfg.to_kv())
    })?;
    st.commit()
}

pub fn parse_subsets(s: &str) -> Result<Vec<FeatureGroupSpec>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(FeatureGroupSpec::parse)
        .collect()
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let subsets = match &cfg.subsets {
        Some(s) => parse_subsets(s)?,
        None => ablation_subsets(),
    };
    let needed = FeatureGroupSpec::new(
        FeatureGroup::ALL
            .into_iter()
            .filter(|&g| subsets.iter().any(|s| s.contains(g))),
    )?;
    let data = load(cfg, &needed)?;
    let mut st = Staging::new(&cfg.out)?;
    with_pool(cfg.deterministic, || {
        let mut rows = Vec::new();
        let mut summary = String::new();
        for (n, groups) in subsets.iter().enumerate() {
            let run = RunConfig {
                groups: groups.clone(),
                ..cfg.clone()
            };
            let report = run_crossval(&data, &run.crossval())?;
            let row = aggregate_ablation(&report.rows(), groups)?;
            info!("{groups}: {:.4} ± {:.4}", row.mean, row.std);
            summary.push_str(&format!(
                "subset{n}_groups={groups}\nsubset{n}_dim={}\nsubset{n}_mean={}\nsubset{n}_std={}\n",
                row.dim, row.mean, row.std
            ));
            st.write(&format!("dice_{}.tsv", groups.to_string().replace(',', "+")), |w| {
                write_dice_table(w, &report.rows())
            })?;
            rows.push(row);
        }
        st.write("ablation.tsv", |w| write_ablation_table(w, &rows))?;
        st.write_str("summary.txt", &summary)?;
        let list: Vec<String> = subsets.iter().map(|s| s.to_string()).collect();
        let resolved = RunConfig {
            subsets: Some(list.join(";")),
            ..cfg.clone()
        };
        st.write_str(RESOLVED_CONFIG, &resolved.to_kv())
    })?;
    st.commit()
}

pub fn cmd_plot(a: &PlotArgs) -> Result<Vec<PathBuf>> {
    let (records, z) = read_latent(&a.latent)?;
    if z.cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "plotting needs at least 2 latent columns, found {}",
            z.cols()
        )));
    }
    let pts: Vec<(f64, f64, LabelSet)> = records
        .iter()
        .zip(z.iter_rows())
        .map(|(r, row)| (row[0], row[1], r.labels))
        .collect();
    let mut st = Staging::new(&a.out.resolve())?;
    st.write_str("embedding.svg", &plot::scatter_svg(&pts))?;
    st.commit()
}
