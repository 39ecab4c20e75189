//! Dice scoring, fold aggregation, the cross-validation driver and the
//! report tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};

use crate::classify::{classify_points, default_k, LabeledLatentSet};
use crate::error::{Error, Result};
use crate::manifold::{self, EmbeddingModel, UmapParams};
use crate::normalize::RobustScaler;
use crate::store::{make_folds, Dataset, FeatureGroup, FeatureGroupSpec, FoldPlan, Label, LabelSet};

/// `2|A∩B| / (|A|+|B|)` from counts; 1 when both sets are empty.
pub fn dice_from_counts(intersection: usize, a: usize, b: usize) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (a + b) as f64
    }
}

pub fn dice<T: Ord>(pred: &BTreeSet<T>, truth: &BTreeSet<T>) -> f64 {
    dice_from_counts(pred.intersection(truth).count(), pred.len(), truth.len())
}

/// Per-nucleus Dice in schema order, with the truth volumes that weight the
/// overall score.
#[derive(Debug, Clone, PartialEq)]
pub struct NucleusScores {
    pub dice: [f64; 13],
    pub intersection: [usize; 13],
    pub truth_volume: [usize; 13],
    pub pred_volume: [usize; 13],
}

impl NucleusScores {
    /// Volume-weighted Dice evaluated exactly from the counts and rounded
    /// once, so it is the nearest double to the true ratio.
    pub fn overall(&self) -> Result<f64> {
        let total: usize = self.truth_volume.iter().sum();
        if total == 0 {
            return Err(Error::ZeroVolume);
        }
        let mut sum = BigRational::zero();
        for i in 0..13 {
            let (tv, pv) = (self.truth_volume[i], self.pred_volume[i]);
            if tv == 0 {
                continue;
            }
            let num = 2 * tv as u64 * self.intersection[i] as u64;
            sum += BigRational::new(BigInt::from(num), BigInt::from((tv + pv) as u64));
        }
        let r = sum / BigRational::from_integer(BigInt::from(total as u64));
        Ok(r.to_f64().expect("finite ratio"))
    }
}

/// Scores single-label predictions against possibly multi-label truth over
/// the voxels that carry at least one nucleus label.
pub fn per_nucleus_dice(pred: &[Label], truth: &[LabelSet]) -> NucleusScores {
    let mut inter = [0usize; 13];
    let mut tv = [0usize; 13];
    let mut pv = [0usize; 13];
    for (&p, t) in pred.iter().zip(truth) {
        let t = t.nuclei();
        if t.is_empty() {
            continue;
        }
        for l in t.iter() {
            tv[l.index()] += 1;
        }
        if p.is_nucleus() {
            pv[p.index()] += 1;
            if t.contains(p) {
                inter[p.index()] += 1;
            }
        }
    }
    let mut dice = [0.0; 13];
    for i in 0..13 {
        dice[i] = dice_from_counts(inter[i], pv[i], tv[i]);
    }
    NucleusScores {
        dice,
        intersection: inter,
        truth_volume: tv,
        pred_volume: pv,
    }
}

/// Volume-weighted mean `Σ vᵢdᵢ / Σ vᵢ`.
pub fn overall_dice(dice: &[f64], volumes: &[f64]) -> Result<f64> {
    if dice.len() != volumes.len() {
        return Err(Error::DimensionMismatch {
            expected: dice.len(),
            got: volumes.len(),
        });
    }
    if volumes.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("negative volume".into()));
    }
    let total: f64 = volumes.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    Ok(dice.iter().zip(volumes).map(|(d, v)| d * v).sum::<f64>() / total)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewFolds {
            need: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiceRow {
    pub fold: usize,
    pub scores: NucleusScores,
    pub overall: f64,
}

impl DiceRow {
    /// Dice of `label` (a nucleus).
    pub fn get(&self, label: Label) -> f64 {
        self.scores.dice[label.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub groups: FeatureGroupSpec,
    pub dim: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn aggregate_ablation(rows: &[DiceRow], groups: &FeatureGroupSpec) -> Result<AblationRow> {
    let overalls: Vec<f64> = rows.iter().map(|r| r.overall).collect();
    let (mean, std) = mean_std(&overalls)?;
    Ok(AblationRow {
        groups: groups.clone(),
        dim: groups.dim(),
        mean,
        std,
    })
}

/// The seven feature-group subsets of the ablation table, in table order.
pub fn ablation_subsets() -> Vec<FeatureGroupSpec> {
    use FeatureGroup::*;
    let rows: [&[FeatureGroup]; 7] = [
        &[Base],
        &[Base, Coord],
        &[Base, MultiTi],
        &[Base, Coord, MultiTi],
        &[Base, Coord, MultiTi, Conn6],
        &[Base, Coord, MultiTi, Conn98],
        &[Conn6, Conn98],
    ];
    rows.iter()
        .map(|r| FeatureGroupSpec::new(r.iter().copied()).expect("non-empty"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CrossvalConfig {
    pub groups: FeatureGroupSpec,
    pub umap: UmapParams,
    /// Voting neighbors; `None` picks [`default_k`] for the latent dimension.
    pub k: Option<usize>,
    pub folds: usize,
    pub seed: u64,
    pub include_conflicted: bool,
}

impl CrossvalConfig {
    pub fn resolved_k(&self) -> Result<usize> {
        match self.k {
            Some(k) => Ok(k),
            None => default_k(self.umap.n_components),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub row: DiceRow,
    pub scaler: RobustScaler,
    pub model: EmbeddingModel,
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub plan: FoldPlan,
    pub folds: Vec<FoldOutcome>,
    pub k: usize,
    pub mean: f64,
    pub std: f64,
}

impl EvaluationReport {
    pub fn rows(&self) -> Vec<DiceRow> {
        self.folds.iter().map(|f| f.row.clone()).collect()
    }
}

/// One fold: fit the scaler on training subjects, embed them, place the test
/// subjects, vote, score.
pub fn run_fold(data: &Dataset, plan: &FoldPlan, fold: usize, cfg: &CrossvalConfig, k: usize) -> Result<FoldOutcome> {
    let test_subjects = plan.test_subjects(fold);
    let train_subjects = plan.train_subjects(fold);
    let train_rows = data.rows_for_subjects(&train_subjects);
    let test_rows: Vec<usize> = data
        .rows_for_subjects(test_subjects)
        .into_iter()
        .filter(|&r| !data.records()[r].labels.nuclei().is_empty())
        .collect();
    debug_assert!(train_rows.iter().all(|r| !test_rows.contains(r)));

    let features = data.select_features(&cfg.groups)?;
    let train_x = features.matrix.select_rows(&train_rows);
    let test_x = features.matrix.select_rows(&test_rows);
    let scaler = RobustScaler::fit_named(&train_x, &features.directional, features.columns.clone())?;
    let train_x = scaler.transform(&train_x)?;
    let test_x = scaler.transform(&test_x)?;

    let params = UmapParams {
        seed: cfg.seed.wrapping_add(fold as u64),
        ..cfg.umap.clone()
    };
    let model = manifold::fit(&train_x, &params)?;
    let test_y = model.transform(&test_x)?;

    let train_records: Vec<_> = train_rows.iter().map(|&r| data.records()[r].clone()).collect();
    let labeled = LabeledLatentSet::from_records(&model.coords, &train_records, cfg.include_conflicted)?;
    let votes = classify_points(&labeled, &test_y, k)?;
    let pred: Vec<Label> = votes.iter().map(|v| v.winner).collect();
    let truth: Vec<LabelSet> = test_rows.iter().map(|&r| data.records()[r].labels).collect();
    let scores = per_nucleus_dice(&pred, &truth);
    let overall = scores.overall()?;
    Ok(FoldOutcome {
        row: DiceRow {
            fold,
            scores,
            overall,
        },
        scaler,
        model,
    })
}

/// Subject-level k-fold cross-validation of the full pipeline.
pub fn run_crossval(data: &Dataset, cfg: &CrossvalConfig) -> Result<EvaluationReport> {
    let k = cfg.resolved_k()?;
    let plan = make_folds(&data.subjects(), cfg.folds, cfg.seed)?;
    let mut folds = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        folds.push(run_fold(data, &plan, fold, cfg, k).map_err(|e| e.in_fold(fold))?);
    }
    let overalls: Vec<f64> = folds.iter().map(|f| f.row.overall).collect();
    let (mean, std) = mean_std(&overalls)?;
    Ok(EvaluationReport {
        plan,
        folds,
        k,
        mean,
        std,
    })
}

pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.3} ± {std:.3}")
}

/// Ablation table: dimension, one mark column per group, mean ± std.
pub fn write_ablation_table<W: Write>(mut w: W, rows: &[AblationRow]) -> Result<()> {
    let mut s = String::from("Dim.\tBase\tCoord\tMulti-TI\tConn6\tConn98\tMean ± Std. Dev.\n");
    for r in rows {
        write!(s, "{}", r.dim).unwrap();
        for g in FeatureGroup::ALL {
            s.push('\t');
            if r.groups.contains(g) {
                s.push('x');
            }
        }
        writeln!(s, "\t{}", format_mean_std(r.mean, r.std)).unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Per-fold Dice table with columns `Label, Overall` and the nuclei in
/// table order.
pub fn write_dice_table<W: Write>(mut w: W, rows: &[DiceRow]) -> Result<()> {
    let mut s = String::from("Label\tOverall");
    for l in Label::TABLE_ORDER {
        write!(s, "\t{l}").unwrap();
    }
    s.push('\n');
    for r in rows {
        write!(s, "Fold {}\t{:.2}", r.fold + 1, r.overall).unwrap();
        for l in Label::TABLE_ORDER {
            write!(s, "\t{:.2}", r.get(l)).unwrap();
        }
        s.push('\n');
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// `key=value` lines; floats at full precision.
pub fn write_summary<W: Write>(mut w: W, report: &EvaluationReport) -> Result<()> {
    writeln!(w, "folds={}", report.folds.len())?;
    writeln!(w, "k={}", report.k)?;
    writeln!(w, "overall_mean={}", report.mean)?;
    writeln!(w, "overall_std={}", report.std)?;
    for f in &report.folds {
        writeln!(w, "fold{}_overall={}", f.row.fold + 1, f.row.overall)?;
        writeln!(w, "fold{}_n_test={}", f.row.fold + 1, f.row.scores.truth_volume.iter().sum::<usize>())?;
        writeln!(w, "fold{}_test_subjects={}", f.row.fold + 1, report.plan.test_subjects(f.row.fold).join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn dice_examples() {
        let a: BTreeSet<u32> = [1, 2, 3, 4].into();
        let b: BTreeSet<u32> = [3, 4, 5, 6].into();
        let c: BTreeSet<u32> = [7, 8].into();
        let e = BTreeSet::<u32>::new();
        assert_eq!(dice(&a, &a), 1.0);
        assert_eq!(dice(&a, &c), 0.0);
        assert_eq!(dice(&a, &b), 0.5);
        assert_eq!(dice(&e, &e), 1.0);
        assert_eq!(dice(&a, &e), 0.0);
    }

    #[test]
    fn weighted_overall() {
        assert!((overall_dice(&[0.8, 0.4], &[3.0, 1.0]).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(overall_dice(&[0.5], &[0.0]), Err(Error::ZeroVolume)));
    }

    #[test]
    fn multilabel_truth() {
        let truth = [[MD, CL].into_iter().collect::<LabelSet>()];
        let s = per_nucleus_dice(&[MD], &truth);
        assert_eq!(s.truth_volume[MD.index()], 1);
        assert_eq!(s.truth_volume[CL.index()], 1);
        assert_eq!(s.dice[MD.index()], 1.0);
        assert_eq!(s.dice[CL.index()], 0.0);
    }

    #[test]
    fn unlabeled_voxels_ignored() {
        let truth = [LabelSet::single(MD), LabelSet::EMPTY, LabelSet::single(Conflicted)];
        let s = per_nucleus_dice(&[MD, CL, CL], &truth);
        assert_eq!(s.pred_volume[CL.index()], 0);
        assert_eq!(s.overall().unwrap(), 1.0);
    }

    #[test]
    fn fold_aggregation() {
        let (m, s) = mean_std(&[0.66, 0.66, 0.62, 0.64, 0.64]).unwrap();
        assert!((m - 0.644).abs() < 1e-12);
        assert!((s - 0.014966629547095779).abs() < 1e-12);
        assert_eq!(mean_std(&[0.5; 4]).unwrap().1, 0.0);
        assert!(matches!(mean_std(&[0.5]), Err(Error::TooFewFolds { .. })));
    }

    #[test]
    fn ablation_dims() {
        let dims: Vec<usize> = ablation_subsets().iter().map(|s| s.dim()).collect();
        assert_eq!(dims, [19, 22, 60, 63, 69, 161, 104]);
    }

    #[test]
    fn dice_table_header() {
        let mut out = Vec::new();
        write_dice_table(&mut out, &[]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "Label\tOverall\tAN\tCL\tCM\tLD\tLP\tMD\tPuA\tPuI\tVA\tVLP\tVLa\tVPL\tVPM\n"
        );
    }
}
