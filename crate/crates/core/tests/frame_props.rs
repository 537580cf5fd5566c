use credo_core::frame::{
    drop_sparse_features, encode, fit_scaler, impute, split, Column, ColumnKind, EncodedTarget, Frame, ScalerMode,
};
use proptest::prelude::*;

type Cells = (Vec<Vec<Option<f64>>>, Vec<Vec<Option<String>>>, Vec<String>);

/// Mixed frames: numeric and categorical columns with holes, plus a
/// two-or-three-class categorical target with every class at least twice.
fn cells() -> impl Strategy<Value = Cells> {
    (4usize..30, 1usize..4, 0usize..3).prop_flat_map(|(n, nn, nc)| {
        let num = proptest::collection::vec(
            proptest::collection::vec(proptest::option::weighted(0.7, -100.0f64..100.0), n),
            nn,
        );
        let cat = proptest::collection::vec(
            proptest::collection::vec(proptest::option::weighted(0.8, "[abc]".prop_map(String::from)), n),
            nc,
        );
        let target = proptest::collection::vec("[xyz]".prop_map(String::from), n);
        (num, cat, target)
    })
}

fn build((num, cat, target): &Cells) -> Frame {
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (j, c) in num.iter().enumerate() {
        names.push(format!("n{j}"));
        cols.push(Column::numeric(c.clone()).unwrap());
    }
    for (j, c) in cat.iter().enumerate() {
        names.push(format!("c{j}"));
        cols.push(Column::categorical(c.clone()));
    }
    names.push("target".into());
    // Pin the first two rows so the target always has two classes.
    let mut target = target.clone();
    target[0] = "x".into();
    target[1] = "y".into();
    cols.push(Column::categorical(target.into_iter().map(Some).collect()));
    Frame::new(names, cols).unwrap()
}

fn observed_somewhere(f: &Frame) -> bool {
    f.columns().iter().all(|c| c.missing_count() < c.len())
}

proptest! {
    #[test]
    fn drop_sparse_is_idempotent(c in cells(), t in 0.05f64..1.0) {
        let f = build(&c);
        if let Ok(once) = drop_sparse_features(&f, t) {
            let twice = drop_sparse_features(&once, t).unwrap();
            prop_assert_eq!(once.names(), twice.names());
            prop_assert!(once.columns().iter().all(|c| c.null_fraction() <= t));
        }
    }

    #[test]
    fn imputation_only_touches_missing_cells(c in cells()) {
        let f = build(&c);
        prop_assume!(observed_somewhere(&f));
        let g = impute(&f).unwrap();
        for (a, b) in f.columns().iter().zip(g.columns()) {
            prop_assert_eq!(b.missing_count(), 0);
            for i in 0..a.len() {
                if !a.is_missing(i) {
                    prop_assert_eq!(a.cell_text(i), b.cell_text(i));
                }
            }
        }
    }

    #[test]
    fn one_hot_groups_sum_to_one(c in cells()) {
        let f = build(&c);
        prop_assume!(observed_somewhere(&f));
        let g = encode(&impute(&f).unwrap(), "target").unwrap();
        prop_assert!(g.columns().iter().all(|c| c.kind() == ColumnKind::Numeric));
        for j in 0..c.1.len() {
            let prefix = format!("c{j}=");
            let group: Vec<&[f64]> = g
                .names()
                .iter()
                .zip(g.columns())
                .filter(|(n, _)| n.starts_with(&prefix))
                .map(|(_, c)| c.as_numeric().unwrap())
                .collect();
            prop_assert!(!group.is_empty());
            for i in 0..g.n_rows() {
                prop_assert_eq!(group.iter().map(|c| c[i]).sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn scaler_inverse_round_trips(c in cells(), minmax in any::<bool>()) {
        let f = build(&c);
        prop_assume!(observed_somewhere(&f));
        let g = encode(&impute(&f).unwrap(), "target").unwrap();
        let mode = if minmax { ScalerMode::MinMax } else { ScalerMode::ZScore };
        let p = fit_scaler(&g, mode).unwrap();
        let back = p.inverse(&p.apply(&g).unwrap()).unwrap();
        let (a, b) = (g.feature_matrix().unwrap(), back.feature_matrix().unwrap());
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0));
        }
    }

    #[test]
    fn split_partitions_rows(labels in proptest::collection::vec(0usize..3, 6..80), frac in 0.2f64..0.9, seed in 0u64..1000) {
        let mut counts = [0usize; 3];
        for &l in &labels {
            counts[l] += 1;
        }
        prop_assume!(counts.iter().all(|&c| c == 0 || c >= 2));
        let n = labels.len();
        let ids = Column::dense((0..n).map(|i| i as f64).collect()).unwrap();
        let target = EncodedTarget::new(labels.clone(), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let f = Frame::new(vec!["id".into()], vec![ids]).unwrap().with_target(target).unwrap();
        let (train, test) = split(&f, frac, seed).unwrap();
        let mut seen: Vec<usize> = train
            .column("id").unwrap().as_numeric().unwrap().iter()
            .chain(test.column("id").unwrap().as_numeric().unwrap())
            .map(|&v| v as usize)
            .collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(train.n_rows(), (frac * n as f64).round() as usize);
        // Every class present in the data keeps at least one row on each side
        // once its quota allows it.
        for c in 0..3 {
            let tr = train.target().unwrap().labels().iter().filter(|&&l| l == c).count();
            prop_assert!((tr as f64 - frac * counts[c] as f64).abs() <= 1.0 + 1e-9);
        }
    }
}
