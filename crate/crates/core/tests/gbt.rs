use credo_core::gbt::{extract_leaf_indices, extract_margins, fit_gbt, predict_gbt, split_gain, GbtConfig, RegNode};
use credo_core::{Matrix, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line() -> (Matrix, Vec<usize>) {
    (Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]), vec![0, 0, 1, 1])
}

fn stump() -> GbtConfig {
    GbtConfig { rounds: 1, max_depth: 1, min_child_weight: 0.0, ..GbtConfig::default() }
}

fn xor(seed: u64, per: usize) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (cx, cy, label) in [(-1.0, -1.0, 0), (1.0, 1.0, 0), (-1.0, 1.0, 1), (1.0, -1.0, 1)] {
        for _ in 0..per {
            rows.push([cx + rng.gen_range(-0.3..0.3), cy + rng.gen_range(-0.3..0.3)]);
            y.push(label);
        }
    }
    (Matrix::from_rows(&rows), y)
}

/// Exhaustive stump oracle: every midpoint between sorted values, gain
/// evaluated from the closed form, first maximum kept.
fn oracle_stump(x: &[f64], g: &[f64], h: &[f64], lambda: f64) -> (f64, f64, f64) {
    let mut v: Vec<f64> = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for w in v.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            if x[i] <= t {
                gl += g[i];
                hl += h[i];
            } else {
                gr += g[i];
                hr += h[i];
            }
        }
        let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - (gl + gr).powi(2) / (hl + hr + lambda));
        if gain > best.0 {
            best = (gain, t, -gl / (hl + lambda), -gr / (hr + lambda));
        }
    }
    (best.1, best.2, best.3)
}

#[test]
fn stump_matches_exhaustive_oracle() {
    let (x, y) = line();
    let m = fit_gbt(&x, &y, 2, &stump()).unwrap();
    let xs = x.column(0);
    for c in 0..2 {
        // Base score equals the class priors, so p = 0.5 everywhere.
        let g: Vec<f64> = y.iter().map(|&l| 0.5 - if l == c { 1.0 } else { 0.0 }).collect();
        let h = vec![0.25; 4];
        let (t, wl, wr) = oracle_stump(&xs, &g, &h, 1.0);
        let tree = &m.trees[c];
        let RegNode::Split { threshold, left, right, .. } = tree.nodes[0] else { panic!("expected a split") };
        assert!((threshold - t).abs() <= 1e-12);
        let RegNode::Leaf { weight: a, .. } = tree.nodes[left] else { panic!() };
        let RegNode::Leaf { weight: b, .. } = tree.nodes[right] else { panic!() };
        assert!((a - wl).abs() <= 1e-12, "{a} vs {wl}");
        assert!((b - wr).abs() <= 1e-12, "{b} vs {wr}");
    }
    // Row 0 falls in the oracle's left leaf.
    let idx = extract_leaf_indices(&m, &x).unwrap();
    assert_eq!(idx[0], vec![0, 0]);
    assert!(idx.iter().flatten().all(|&i| i <= 1));
}

#[test]
fn training_loss_nonincreasing() {
    let (x, y) = xor(3, 15);
    let m = fit_gbt(&x, &y, 2, &GbtConfig { rounds: 30, max_depth: 2, ..GbtConfig::default() }).unwrap();
    assert_eq!(m.train_loss.len(), 31);
    for w in m.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn recorded_gain_matches_child_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<[f64; 3]> = (0..60).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let y: Vec<usize> = rows.iter().map(|r| ((r[0] + r[1] * 2.0) * 1.5) as usize % 3).collect();
    let x = Matrix::from_rows(&rows);
    let cfg = GbtConfig { rounds: 5, max_depth: 3, gamma: 0.01, ..GbtConfig::default() };
    let m = fit_gbt(&x, &y, 3, &cfg).unwrap();
    let mut checked = 0;
    for t in &m.trees {
        for node in &t.nodes {
            if let RegNode::Split { left, right, gain, grad, hess, .. } = *node {
                let (gl, hl) = t.nodes[left].sums();
                let (gr, hr) = t.nodes[right].sums();
                assert!(((gl + gr) - grad).abs() <= 1e-10 && ((hl + hr) - hess).abs() <= 1e-10);
                let recomputed = split_gain(gl, hl, gr, hr, cfg.lambda, cfg.gamma);
                assert!((recomputed - gain).abs() <= 1e-10, "{recomputed} vs {gain}");
                assert!(gain > 0.0);
                assert!(hl >= cfg.min_child_weight && hr >= cfg.min_child_weight);
                checked += 1;
            }
        }
    }
    assert!(checked > 10);
}

#[test]
fn large_lambda_shrinks_weights() {
    let (x, y) = line();
    let mut prev = f64::INFINITY;
    for lambda in [0.0, 1.0, 10.0, 100.0, 1e4, 1e8] {
        let m = fit_gbt(&x, &y, 2, &GbtConfig { lambda, ..stump() }).unwrap();
        let max = m
            .trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| if let RegNode::Leaf { weight, .. } = n { Some(weight.abs()) } else { None })
            .fold(0.0, f64::max);
        assert!(max < prev);
        prev = max;
    }
    assert!(prev < 1e-7);
}

#[test]
fn xor_fits_exactly() {
    let (x, y) = xor(5, 20);
    let m = fit_gbt(&x, &y, 2, &GbtConfig { rounds: 50, max_depth: 2, learning_rate: 0.3, ..GbtConfig::default() }).unwrap();
    assert_eq!(m.predict(&x).unwrap(), y);
}

#[test]
fn margins_grow_with_rounds() {
    let (x, y) = line();
    let m = fit_gbt(&x, &y, 2, &GbtConfig { rounds: 10, ..stump() }).unwrap();
    let point = Matrix::from_rows(&[[0.0]]);
    let trace: Vec<f64> = (0..=10).map(|r| extract_margins(&m.truncated(r), &point).unwrap()[(0, 0)]).collect();
    assert!(trace.windows(2).all(|w| w[1] > w[0]), "{trace:?}");
}

#[test]
fn predictions_are_softmax_of_margins() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<[f64; 4]> = (0..200).map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()]).collect();
    let y: Vec<usize> = (0..200).map(|i| i % 10).collect();
    let x = Matrix::from_rows(&rows);
    let m = fit_gbt(&x, &y, 10, &GbtConfig { rounds: 3, ..GbtConfig::default() }).unwrap();
    assert_eq!(m.trees.len(), 3 * 10);
    let probe = Matrix::from_rows(&(0..20).map(|_| [rng.gen_range(-2.0..2.0), rng.gen(), rng.gen(), rng.gen()]).collect::<Vec<_>>());
    let margins = extract_margins(&m, &probe).unwrap();
    assert_eq!(margins.cols(), 10);
    let p = predict_gbt(&m, &probe).unwrap();
    for (mr, pr) in margins.iter_rows().zip(p.iter_rows()) {
        let z: f64 = mr.iter().map(|v| v.exp()).sum();
        for (a, b) in mr.iter().zip(pr) {
            assert!((a.exp() / z - b).abs() <= 1e-12);
        }
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let same = Matrix::from_rows(&[probe.row(0), probe.row(0)]);
    let idx = extract_leaf_indices(&m, &same).unwrap();
    assert_eq!(idx[0], idx[1]);
    assert_eq!(idx[0].len(), 30);
}

#[test]
fn deterministic() {
    let (x, y) = xor(8, 10);
    let cfg = GbtConfig { rounds: 10, max_depth: 3, ..GbtConfig::default() };
    assert_eq!(fit_gbt(&x, &y, 2, &cfg).unwrap(), fit_gbt(&x, &y, 2, &cfg).unwrap());
}
