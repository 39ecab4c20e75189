use std::collections::BTreeSet;

use proptest::prelude::*;
use thalparc_core::store::{read_dataset, recenter_coords};
use thalparc_core::{generate, make_folds, FeatureGroup, FeatureGroupSpec, Label, LabelSet, SynthSpec};

fn small_spec() -> SynthSpec {
    SynthSpec {
        n_subjects: 3,
        voxels_per_subject: 30,
        seed: 4,
        ..SynthSpec::default()
    }
}

#[test]
fn select_features_all_subsets() {
    let data = generate(&small_spec()).unwrap().dataset;
    for mask in 1u32..32 {
        let groups: Vec<FeatureGroup> = FeatureGroup::ALL
            .iter()
            .enumerate()
            .filter(|(b, _)| mask & (1 << b) != 0)
            .map(|(_, g)| *g)
            .collect();
        let want: usize = groups.iter().map(|g| g.dim()).sum();
        let spec = FeatureGroupSpec::new(groups).unwrap();
        let fm = data.select_features(&spec).unwrap();
        assert_eq!(fm.matrix.cols(), want, "{spec}");
        assert_eq!(fm.columns.len(), want);
        assert_eq!(fm.directional.len(), want);
        assert_eq!(fm.matrix.rows(), data.len());
    }
}

#[test]
fn table_roundtrip() {
    let data = generate(&small_spec()).unwrap().dataset;
    let mut buf = Vec::new();
    data.write_table(&mut buf).unwrap();
    let back = read_dataset(buf.as_slice(), &FeatureGroupSpec::all()).unwrap();
    assert_eq!(back.records(), data.records());
    for g in FeatureGroup::ALL {
        assert_eq!(back.group(g), data.group(g), "{g}");
    }
}

#[test]
fn rejects_non_finite_cells() {
    let data = generate(&SynthSpec {
        groups: FeatureGroupSpec::new([FeatureGroup::Base]).unwrap(),
        ..small_spec()
    })
    .unwrap()
    .dataset;
    let mut buf = Vec::new();
    data.write_table(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[3].split('\t').map(String::from).collect();
    cells[7] = "NaN".into();
    lines[3] = cells.join("\t");
    let bad = lines.join("\n");
    let err = read_dataset(bad.as_bytes(), &FeatureGroupSpec::new([FeatureGroup::Base]).unwrap()).unwrap_err();
    assert!(err.to_string().contains("non-finite"), "{err}");
}

#[test]
fn multi_label_cells() {
    let l = LabelSet::parse("MD;CL").unwrap();
    assert!(l.contains(Label::MD) && l.contains(Label::CL));
    assert_eq!(l.len(), 2);
    assert!(LabelSet::parse("").unwrap().is_empty());
    assert!(LabelSet::parse("XYZ").is_err());
}

#[test]
fn recenter_examples() {
    assert_eq!(recenter_coords(&[[4, 5, 6]]), vec![[0.0; 3]]);
    let c = recenter_coords(&[[1, 0, 0], [5, 0, 0]]);
    assert_eq!(c[0][0], -2.0);
    assert_eq!(c[1][0], 2.0);
}

#[test]
fn fold_examples() {
    let ids: Vec<String> = (0..30).map(|i| format!("s{i:02}")).collect();
    let plan = make_folds(&ids, 5, 1).unwrap();
    assert!(plan.folds.iter().all(|f| f.len() == 6));
    let plan = make_folds(&ids[..10], 5, 1).unwrap();
    assert!(plan.folds.iter().all(|f| f.len() == 2));
    assert_eq!(make_folds(&ids, 5, 9).unwrap(), make_folds(&ids, 5, 9).unwrap());
    assert_ne!(make_folds(&ids, 5, 9).unwrap(), make_folds(&ids, 5, 10).unwrap());
    assert!(make_folds(&ids, 1, 0).is_err());
    assert!(make_folds(&ids[..3], 5, 0).is_err());
}

proptest! {
    #[test]
    fn folds_partition_subjects(n in 2usize..60, f in 2usize..8, seed in any::<u64>()) {
        prop_assume!(f <= n);
        let ids: Vec<String> = (0..n).map(|i| format!("sub{i}")).collect();
        let plan = make_folds(&ids, f, seed).unwrap();
        let mut seen = BTreeSet::new();
        for fold in &plan.folds {
            for s in fold {
                prop_assert!(seen.insert(s.clone()));
            }
        }
        prop_assert_eq!(seen.len(), n);
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for k in 0..f {
            let train: BTreeSet<_> = plan.train_subjects(k).into_iter().collect();
            prop_assert!(plan.test_subjects(k).iter().all(|s| !train.contains(s)));
        }
    }

    #[test]
    fn recenter_translation_invariant(
        pts in prop::collection::vec(prop::array::uniform3(-50i64..50), 1..40),
        shift in prop::array::uniform3(-1000i64..1000),
    ) {
        let a = recenter_coords(&pts);
        let moved: Vec<[i64; 3]> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect();
        prop_assert_eq!(&a, &recenter_coords(&moved));
        for axis in 0..3 {
            let lo = a.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
            let hi = a.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((lo + hi).abs() <= 0.5);
        }
    }
}
