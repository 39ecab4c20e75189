//! Per-voxel dataset: label schema, feature groups, table I/O and folds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Nucleus codes plus the auxiliary `Conflicted` code.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    AN,
    CL,
    CM,
    LD,
    LP,
    MD,
    PuA,
    PuI,
    VA,
    VLa,
    VLP,
    VPL,
    VPM,
    Conflicted,
}

impl Label {
    /// The thirteen scored nuclei in schema order (used for tie-breaking).
    pub const NUCLEI: [Label; 13] = [
        Label::AN,
        Label::CL,
        Label::CM,
        Label::LD,
        Label::LP,
        Label::MD,
        Label::PuA,
        Label::PuI,
        Label::VA,
        Label::VLa,
        Label::VLP,
        Label::VPL,
        Label::VPM,
    ];

    /// Column order of the per-fold Dice tables (VLP precedes VLa there).
    pub const TABLE_ORDER: [Label; 13] = [
        Label::AN,
        Label::CL,
        Label::CM,
        Label::LD,
        Label::LP,
        Label::MD,
        Label::PuA,
        Label::PuI,
        Label::VA,
        Label::VLP,
        Label::VLa,
        Label::VPL,
        Label::VPM,
    ];

    pub const ALL: [Label; 14] = [
        Label::AN,
        Label::CL,
        Label::CM,
        Label::LD,
        Label::LP,
        Label::MD,
        Label::PuA,
        Label::PuI,
        Label::VA,
        Label::VLa,
        Label::VLP,
        Label::VPL,
        Label::VPM,
        Label::Conflicted,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::AN => "AN",
            Label::CL => "CL",
            Label::CM => "CM",
            Label::LD => "LD",
            Label::LP => "LP",
            Label::MD => "MD",
            Label::PuA => "PuA",
            Label::PuI => "PuI",
            Label::VA => "VA",
            Label::VLa => "VLa",
            Label::VLP => "VLP",
            Label::VPL => "VPL",
            Label::VPM => "VPM",
            Label::Conflicted => "Conflicted",
        }
    }

    pub fn is_nucleus(self) -> bool {
        self != Label::Conflicted
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.code() == s)
            // the caption key spells it "VLA"
            .or_else(|| (s == "VLA").then_some(Label::VLa))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Set of labels carried by one voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn single(l: Label) -> Self {
        LabelSet(1 << l.index())
    }

    pub fn insert(&mut self, l: Label) {
        self.0 |= 1 << l.index();
    }

    pub fn contains(&self, l: Label) -> bool {
        self.0 & (1 << l.index()) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// The same set with `Conflicted` removed.
    pub fn nuclei(&self) -> LabelSet {
        LabelSet(self.0 & !(1 << Label::Conflicted.index()))
    }

    /// Labels in schema order.
    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        Label::ALL.iter().copied().filter(move |l| self.contains(*l))
    }

    pub fn parse(cell: &str) -> Result<Self> {
        let mut set = LabelSet::EMPTY;
        for code in cell.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            set.insert(code.parse()?);
        }
        Ok(set)
    }
}

impl FromIterator<Label> for LabelSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut s = LabelSet::EMPTY;
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, l) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(";")?;
            }
            f.write_str(l.code())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureGroup {
    Base,
    Coord,
    MultiTi,
    Conn6,
    Conn98,
}

/// Base columns in table order.
pub const BASE_COLUMNS: [&str; 19] = [
    "mprage", "t2w", "fgatir", "t1map_a", "t1map_b", "fa", "md", "rd", "ad", "tr", "westin_cl",
    "westin_cp", "westin_cs", "knut1", "knut2", "knut3", "knut4", "knut5", "knut_edge",
];

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Base,
        FeatureGroup::Coord,
        FeatureGroup::MultiTi,
        FeatureGroup::Conn6,
        FeatureGroup::Conn98,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureGroup::Base => 19,
            FeatureGroup::Coord => 3,
            FeatureGroup::MultiTi => 41,
            FeatureGroup::Conn6 => 6,
            FeatureGroup::Conn98 => 98,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Base => "base",
            FeatureGroup::Coord => "coord",
            FeatureGroup::MultiTi => "multiti",
            FeatureGroup::Conn6 => "conn6",
            FeatureGroup::Conn98 => "conn98",
        }
    }

    /// Column names as they appear in feature tables. Coord is derived from
    /// the voxel indices and never stored.
    pub fn columns(self) -> Vec<String> {
        match self {
            FeatureGroup::Base => BASE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            FeatureGroup::Coord => ["coord_x", "coord_y", "coord_z"].map(String::from).to_vec(),
            FeatureGroup::MultiTi => (0..41).map(|i| format!("ti_{i:03}")).collect(),
            FeatureGroup::Conn6 => (0..6).map(|i| format!("conn6_{i}")).collect(),
            FeatureGroup::Conn98 => (0..98).map(|i| format!("conn98_{i}")).collect(),
        }
    }

    pub fn is_stored(self) -> bool {
        self != FeatureGroup::Coord
    }

    /// Per-column directionality; only the Knutsson components are directional.
    pub fn directional(self) -> Vec<bool> {
        match self {
            FeatureGroup::Base => BASE_COLUMNS
                .iter()
                .map(|c| c.starts_with("knut") && *c != "knut_edge")
                .collect(),
            other => vec![false; other.dim()],
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        FeatureGroup::ALL
            .iter()
            .copied()
            .find(|g| g.name() == lower || (lower == "multi-ti" && *g == FeatureGroup::MultiTi))
            .ok_or_else(|| Error::UnknownGroup(s.to_string()))
    }
}

/// Selection of feature groups, always concatenated in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureGroupSpec {
    groups: BTreeSet<FeatureGroup>,
}

impl FeatureGroupSpec {
    pub fn new(groups: impl IntoIterator<Item = FeatureGroup>) -> Result<Self> {
        let groups: BTreeSet<_> = groups.into_iter().collect();
        if groups.is_empty() {
            return Err(Error::InvalidArgument("empty feature-group selection".into()));
        }
        Ok(Self { groups })
    }

    pub fn all() -> Self {
        Self {
            groups: FeatureGroup::ALL.into_iter().collect(),
        }
    }

    /// Parses `base,coord,multiti`.
    pub fn parse(list: &str) -> Result<Self> {
        let groups = list
            .split([',', '+'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<FeatureGroup>>>()?;
        Self::new(groups)
    }

    pub fn groups(&self) -> impl Iterator<Item = FeatureGroup> + '_ {
        self.groups.iter().copied()
    }

    pub fn contains(&self, g: FeatureGroup) -> bool {
        self.groups.contains(&g)
    }

    pub fn dim(&self) -> usize {
        self.groups().map(FeatureGroup::dim).sum()
    }

    pub fn directional(&self) -> Vec<bool> {
        self.groups().flat_map(FeatureGroup::directional).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.groups().flat_map(FeatureGroup::columns).collect()
    }
}

impl fmt::Display for FeatureGroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.groups().map(FeatureGroup::name).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelRecord {
    pub subject: String,
    pub ijk: [i64; 3],
    pub labels: LabelSet,
}

/// Validated per-voxel records with one feature matrix per loaded group.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<VoxelRecord>,
    groups: BTreeMap<FeatureGroup, Matrix>,
}

/// Concatenated features with their column metadata.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
    pub columns: Vec<String>,
    pub directional: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset from records and stored groups; Coord is derived
    /// when requested and missing.
    pub fn new(
        records: Vec<VoxelRecord>,
        mut groups: BTreeMap<FeatureGroup, Matrix>,
        derive_coord: bool,
    ) -> Result<Self> {
        for (g, m) in &groups {
            if m.rows() != records.len() || m.cols() != g.dim() {
                return Err(Error::Artifact(format!(
                    "group {g} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    records.len(),
                    g.dim()
                )));
            }
            if !m.all_finite() {
                return Err(Error::NonFinite("feature group"));
            }
        }
        if derive_coord && !groups.contains_key(&FeatureGroup::Coord) {
            groups.insert(FeatureGroup::Coord, coord_matrix(&records));
        }
        Ok(Self { records, groups })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[VoxelRecord] {
        &self.records
    }

    pub fn group(&self, g: FeatureGroup) -> Option<&Matrix> {
        self.groups.get(&g)
    }

    pub fn loaded_groups(&self) -> impl Iterator<Item = FeatureGroup> + '_ {
        self.groups.keys().copied()
    }

    /// Distinct subject ids in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        self.subject_counts().into_keys().collect()
    }

    pub fn subject_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.subject.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Row indices belonging to any of the given subjects, in file order.
    pub fn rows_for_subjects(&self, subjects: &[String]) -> Vec<usize> {
        let wanted: BTreeSet<&str> = subjects.iter().map(String::as_str).collect();
        (0..self.records.len())
            .filter(|&i| wanted.contains(self.records[i].subject.as_str()))
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            records: rows.iter().map(|&i| self.records[i].clone()).collect(),
            groups: self
                .groups
                .iter()
                .map(|(g, m)| (*g, m.select_rows(rows)))
                .collect(),
        }
    }

    pub fn select_features(&self, spec: &FeatureGroupSpec) -> Result<FeatureMatrix> {
        let mut parts = Vec::new();
        for g in spec.groups() {
            parts.push(self.groups.get(&g).ok_or(Error::GroupNotLoaded(g.name()))?);
        }
        let matrix = if parts.is_empty() {
            Matrix::zeros(self.len(), 0)
        } else {
            Matrix::hstack(&parts)?
        };
        Ok(FeatureMatrix {
            matrix,
            columns: spec.column_names(),
            directional: spec.directional(),
        })
    }

    /// Writes the tab-separated feature-table format, with the stored groups
    /// in canonical order.
    pub fn write_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
        let stored: Vec<(FeatureGroup, &Matrix)> = self
            .groups
            .iter()
            .filter(|(g, _)| g.is_stored())
            .map(|(g, m)| (*g, m))
            .collect();
        let mut header: Vec<String> = ["subject", "i", "j", "k", "labels"].map(String::from).to_vec();
        for (g, _) in &stored {
            header.extend(g.columns());
        }
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for (n, r) in self.records.iter().enumerate() {
            row.clear();
            row.push(r.subject.clone());
            row.extend(r.ijk.iter().map(|v| v.to_string()));
            row.push(r.labels.to_string());
            for (_, m) in &stored {
                row.extend(m.row(n).iter().map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads a feature table, keeping the groups named in `spec`.
pub fn load_dataset(path: &Path, spec: &FeatureGroupSpec) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, spec)
}

pub fn read_dataset<R: Read>(input: R, spec: &FeatureGroupSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_cols = [
        position("subject")?,
        position("i")?,
        position("j")?,
        position("k")?,
        position("labels")?,
    ];
    let stored: Vec<FeatureGroup> = spec.groups().filter(|g| g.is_stored()).collect();
    let mut group_cols: Vec<(FeatureGroup, Vec<(String, usize)>)> = Vec::new();
    for g in &stored {
        let cols = g
            .columns()
            .into_iter()
            .map(|c| position(&c).map(|p| (c, p)))
            .collect::<Result<Vec<_>>>()?;
        group_cols.push((*g, cols));
    }

    let mut records = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); stored.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let parse_int = |c: usize, name: &str| -> Result<i64> {
            field(c).parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                value: field(c).to_string(),
            })
        };
        let subject = field(id_cols[0]).to_string();
        let ijk = [
            parse_int(id_cols[1], "i")?,
            parse_int(id_cols[2], "j")?,
            parse_int(id_cols[3], "k")?,
        ];
        let labels = LabelSet::parse(field(id_cols[4]))?;
        for ((_, cols), out) in group_cols.iter().zip(data.iter_mut()) {
            for (name, c) in cols {
                let v: f64 = field(*c).parse().map_err(|_| Error::Parse {
                    row,
                    column: name.clone(),
                    value: field(*c).to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteCell {
                        row,
                        column: name.clone(),
                        subject,
                        i: ijk[0],
                        j: ijk[1],
                        k: ijk[2],
                    });
                }
                out.push(v);
            }
        }
        records.push(VoxelRecord {
            subject,
            ijk,
            labels,
        });
    }
    let n = records.len();
    let mut groups = BTreeMap::new();
    for (g, values) in stored.into_iter().zip(data) {
        groups.insert(g, Matrix::from_vec(n, g.dim(), values)?);
    }
    Dataset::new(records, groups, spec.contains(FeatureGroup::Coord))
}

/// Offsets of voxel indices from the midpoint of their bounding box.
pub fn recenter_coords(ijk: &[[i64; 3]]) -> Vec<[f64; 3]> {
    if ijk.is_empty() {
        return Vec::new();
    }
    let mut lo = ijk[0];
    let mut hi = ijk[0];
    for p in ijk {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mid = [0, 1, 2].map(|a| (lo[a] + hi[a]) as f64 / 2.0);
    ijk.iter()
        .map(|p| [0, 1, 2].map(|a| p[a] as f64 - mid[a]))
        .collect()
}

fn coord_matrix(records: &[VoxelRecord]) -> Matrix {
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (n, r) in records.iter().enumerate() {
        by_subject.entry(r.subject.as_str()).or_default().push(n);
    }
    let mut m = Matrix::zeros(records.len(), 3);
    for rows in by_subject.values() {
        let pts: Vec<[i64; 3]> = rows.iter().map(|&n| records[n].ijk).collect();
        for (&n, c) in rows.iter().zip(recenter_coords(&pts)) {
            m.row_mut(n).copy_from_slice(&c);
        }
    }
    m
}

/// Subject-level partition for cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn test_subjects(&self, fold: usize) -> &[String] {
        &self.folds[fold]
    }

    pub fn train_subjects(&self, fold: usize) -> Vec<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, s)| s.iter().cloned())
            .collect()
    }
}

/// Shuffles subjects with `seed` and deals them round-robin into folds.
pub fn make_folds(subject_ids: &[String], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::TooFewFolds {
            need: 2,
            got: n_folds,
        });
    }
    let mut subjects: Vec<String> = subject_ids
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if n_folds > subjects.len() {
        return Err(Error::InvalidArgument(format!(
            "{n_folds} folds for {} subjects",
            subjects.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); n_folds];
    for (n, s) in subjects.into_iter().enumerate() {
        folds[n % n_folds].push(s);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(extra_header: &str, rows: &[String]) -> String {
        let mut cols: Vec<String> = ["subject", "i", "j", "k", "labels"].map(String::from).to_vec();
        cols.extend(FeatureGroup::Base.columns().into_iter().filter(|c| c != extra_header));
        let mut s = cols.join("\t");
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    fn base_row(subject: &str, ijk: [i64; 3], labels: &str, n_feat: usize, v: &str) -> String {
        let mut parts = vec![
            subject.to_string(),
            ijk[0].to_string(),
            ijk[1].to_string(),
            ijk[2].to_string(),
            labels.to_string(),
        ];
        parts.extend(std::iter::repeat_n(v.to_string(), n_feat));
        parts.join("\t")
    }

    fn base_spec() -> FeatureGroupSpec {
        FeatureGroupSpec::new([FeatureGroup::Base]).unwrap()
    }

    #[test]
    fn load_two_subjects() {
        let mut rows = Vec::new();
        for s in ["s1", "s2"] {
            for n in 0..100 {
                rows.push(base_row(s, [n % 10, n / 10, 0], "MD;CL", 19, "0.5"));
            }
        }
        let ds = read_dataset(table("", &rows).as_bytes(), &base_spec()).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.subject_counts()["s2"], 100);
        assert!(ds.records()[0].labels.contains(Label::CL));
        assert_eq!(ds.records()[0].labels.len(), 2);
    }

    #[test]
    fn missing_column_named() {
        let rows = vec![base_row("s1", [0, 0, 0], "", 18, "1")];
        let err = read_dataset(table("fa", &rows).as_bytes(), &base_spec()).unwrap_err();
        match err {
            Error::MissingColumn(c) => assert_eq!(c, "fa"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn nan_cell_cites_voxel() {
        let mut row = base_row("s7", [3, 4, 5], "AN", 19, "1");
        row = row.replacen("\t1", "\tNaN", 1);
        let err = read_dataset(table("", &[row]).as_bytes(), &base_spec()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::NonFiniteCell { .. }));
        assert!(msg.contains("s7") && msg.contains("(3, 4, 5)"), "{msg}");
    }

    #[test]
    fn unknown_label_rejected() {
        let rows = vec![base_row("s1", [0, 0, 0], "MD;XYZ", 19, "1")];
        let err = read_dataset(table("", &rows).as_bytes(), &base_spec()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel(ref c) if c == "XYZ"));
    }

    #[test]
    fn table_dimensions() {
        let dim = |gs: &[FeatureGroup]| FeatureGroupSpec::new(gs.iter().copied()).unwrap().dim();
        use FeatureGroup::*;
        assert_eq!(dim(&[Base]), 19);
        assert_eq!(dim(&[Base, Coord]), 22);
        assert_eq!(dim(&[Base, Coord, MultiTi]), 63);
        assert_eq!(dim(&[Base, Coord, MultiTi, Conn98]), 161);
        assert_eq!(dim(&[Base, Coord, MultiTi, Conn6, Conn98]), 167);
        assert_eq!(dim(&[Conn98, Conn6]), 104);
    }

    #[test]
    fn directional_columns_are_knutsson() {
        let spec = FeatureGroupSpec::all();
        let names = spec.column_names();
        let dirs: Vec<&str> = names
            .iter()
            .zip(spec.directional())
            .filter(|(_, d)| *d)
            .map(|(n, _)| n.as_str())
            .collect();
        assert_eq!(dirs, ["knut1", "knut2", "knut3", "knut4", "knut5"]);
    }

    #[test]
    fn unloaded_group_rejected() {
        let rows = vec![base_row("s1", [0, 0, 0], "", 19, "1")];
        let ds = read_dataset(table("", &rows).as_bytes(), &base_spec()).unwrap();
        let spec = FeatureGroupSpec::new([FeatureGroup::Base, FeatureGroup::Conn6]).unwrap();
        assert!(matches!(ds.select_features(&spec), Err(Error::GroupNotLoaded("conn6"))));
    }

    #[test]
    fn recenter_examples() {
        assert_eq!(recenter_coords(&[[4, 5, 6]]), vec![[0.0, 0.0, 0.0]]);
        let c = recenter_coords(&[[1, 0, 0], [5, 0, 0]]);
        assert_eq!(c[0][0], -2.0);
        assert_eq!(c[1][0], 2.0);
        let c = recenter_coords(&[[0, 0, 0], [3, 1, 0]]);
        assert_eq!(c[1], [1.5, 0.5, 0.0]);
    }

    #[test]
    fn folds_balanced_and_seeded() {
        let subjects: Vec<String> = (0..30).map(|i| format!("sub{i:02}")).collect();
        let plan = make_folds(&subjects, 5, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 6));
        assert_eq!(plan, make_folds(&subjects, 5, 1).unwrap());
        assert_ne!(plan, make_folds(&subjects, 5, 2).unwrap());

        let ten: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        assert!(make_folds(&ten, 5, 0).unwrap().folds.iter().all(|f| f.len() == 2));
        assert!(matches!(make_folds(&ten, 1, 0), Err(Error::TooFewFolds { .. })));
        assert!(make_folds(&ten, 11, 0).is_err());
    }

    #[test]
    fn label_set_display_roundtrip() {
        let s = LabelSet::parse("VPM; MD").unwrap();
        assert_eq!(s.to_string(), "MD;VPM");
        assert_eq!(LabelSet::parse(&s.to_string()).unwrap(), s);
        assert_eq!(LabelSet::parse("").unwrap(), LabelSet::EMPTY);
        assert_eq!("VLA".parse::<Label>().unwrap(), Label::VLa);
    }
}
