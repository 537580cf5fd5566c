//! Classification metrics: confusion counts, macro one-vs-rest rates,
//! G-mean, F1 and the H-measure.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn column_total(&self, predicted: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n_classes).all(|t| (0..self.n_classes).all(|p| t == p || self.get(t, p) == 0))
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_classes).map(<[u64]>::to_vec).collect()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension { expected: truth.len(), got: predicted.len() });
    }
    if truth.is_empty() {
        return Err(Error::data("cannot build a confusion matrix from zero rows"));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::data(format!("label {} out of range for {n_classes} classes", t.max(p))));
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

/// One-vs-rest rates for a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    /// Macro-averaged true positive rate.
    pub sensitivity: f64,
    /// Macro-averaged true negative rate.
    pub specificity: f64,
    /// `sqrt(sensitivity × specificity)` of the macro pair.
    pub g_mean: f64,
    pub f1: f64,
    pub h_measure: Option<f64>,
    pub averaging: &'static str,
    pub per_class: Vec<ClassMetrics>,
    /// Every 0/0 rate replaced by 1, described.
    pub conventions: Vec<String>,
    /// Classes left out of the H-measure average.
    pub h_skipped: Vec<usize>,
}

pub fn g_mean(sensitivity: f64, specificity: f64) -> f64 {
    math::sqrt(sensitivity * specificity)
}

fn ratio_or_one(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (1.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// All metrics except the H-measure, macro-averaged one-vs-rest.
pub fn basic_metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::data("empty confusion matrix"));
    }
    let c = cm.n_classes();
    let mut per_class = Vec::with_capacity(c);
    let mut conventions = Vec::new();
    for k in 0..c {
        let tp = cm.get(k, k);
        let fn_ = cm.row_total(k) - tp;
        let fp = cm.column_total(k) - tp;
        let tn = total - tp - fn_ - fp;
        let (sensitivity, s0) = ratio_or_one(tp, tp + fn_);
        let (specificity, t0) = ratio_or_one(tn, tn + fp);
        let (f1, f0) = ratio_or_one(2 * tp, 2 * tp + fp + fn_);
        if s0 {
            conventions.push(format!("class {k}: absent from truth, sensitivity taken as 1"));
        }
        if t0 {
            conventions.push(format!("class {k}: no negatives, specificity taken as 1"));
        }
        if f0 {
            conventions.push(format!("class {k}: absent and never predicted, F1 taken as 1"));
        }
        per_class.push(ClassMetrics { support: tp + fn_, tp, fp, fn_, tn, sensitivity, specificity, f1 });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    let sensitivity = mean(|m| m.sensitivity);
    let specificity = mean(|m| m.specificity);
    let f1 = mean(|m| m.f1);
    Ok(MetricReport {
        accuracy: cm.trace() as f64 / total as f64,
        sensitivity,
        specificity,
        g_mean: g_mean(sensitivity, specificity),
        f1,
        h_measure: None,
        averaging: "macro",
        per_class,
        conventions,
        h_skipped: Vec::new(),
    })
}

/// Confusion-based metrics from argmax predictions plus the H-measure on
/// the probability matrix.
pub fn evaluate(truth: &[usize], proba: &Matrix) -> Result<MetricReport> {
    if proba.rows() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: proba.rows() });
    }
    let predicted: Vec<usize> = proba.iter_rows().map(math::argmax).collect();
    let mut report = basic_metrics(&confusion(truth, &predicted, proba.cols())?)?;
    let h = h_measure(truth, proba, Severity::default())?;
    report.h_measure = Some(h.value);
    report.h_skipped = h.skipped;
    Ok(report)
}

// ---------------------------------------------------------------------------
// H-measure

/// Beta(a, b) distribution over cost ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Severity {
    pub a: f64,
    pub b: f64,
}

impl Default for Severity {
    fn default() -> Self {
        Severity { a: 2.0, b: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HMeasure {
    /// Macro average over evaluated classes.
    pub value: f64,
    /// Per-class H, `None` where the one-vs-rest problem is degenerate.
    pub per_class: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = math::lgamma(a + b) - math::lgamma(a) - math::lgamma(b) + a * math::ln(x) + b * math::ln(1.0 - x);
    let front = math::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_fraction(1.0 - x, b, a) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz iteration.
fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for aa in [m * (b - m) * x / ((qam + m2) * (a + m2)), -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))] {
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// ROC points `(F0, F1)`: fraction of negatives and positives scoring at or
/// below each distinct threshold, starting at (0, 0).
fn roc_points(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let n1 = positive.iter().filter(|&&p| p).count() as f64;
    let n0 = scores.len() as f64 - n1;
    let mut pts = vec![(0.0, 0.0)];
    let (mut c0, mut c1) = (0usize, 0usize);
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        while k < idx.len() && scores[idx[k]] == s {
            if positive[idx[k]] {
                c1 += 1;
            } else {
                c0 += 1;
            }
            k += 1;
        }
        pts.push((c0 as f64 / n0, c1 as f64 / n1));
    }
    pts
}

/// Lower convex hull of points already sorted by F0 (ties by F1).
fn lower_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Binary H-measure: positives are expected to score high. `None` when one
/// of the two groups is empty.
pub fn h_measure_binary(scores: &[f64], positive: &[bool], severity: Severity) -> Option<f64> {
    let n1 = positive.iter().filter(|&&p| p).count();
    let n0 = positive.len() - n1;
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let (pi0, pi1) = (n0 as f64 / positive.len() as f64, n1 as f64 / positive.len() as f64);
    let Severity { a, b } = severity;
    let mean = a / (a + b);
    // ∫ u and ∫ c·u over [lo, hi]
    let mass = |lo: f64, hi: f64| incomplete_beta(hi, a, b) - incomplete_beta(lo, a, b);
    let first = |lo: f64, hi: f64| mean * (incomplete_beta(hi, a + 1.0, b) - incomplete_beta(lo, a + 1.0, b));

    let hull = lower_hull(roc_points(scores, positive));
    // Vertex k is optimal for c between consecutive breakpoints.
    let mut loss = 0.0;
    let mut lo = 0.0;
    for k in 0..hull.len() {
        let hi = if k + 1 < hull.len() {
            let (d0, d1) = (hull[k + 1].0 - hull[k].0, hull[k + 1].1 - hull[k].1);
            if d0 <= 0.0 {
                1.0
            } else {
                let m = d1 / d0;
                pi1 * m / (pi0 + pi1 * m)
            }
        } else {
            1.0
        };
        let hi = hi.clamp(lo, 1.0);
        if hi > lo {
            let (f0, f1) = hull[k];
            let (m0, m1) = (mass(lo, hi), first(lo, hi));
            loss += pi0 * (1.0 - f0) * m1 + pi1 * f1 * (m0 - m1);
        }
        lo = hi;
    }
    let max = pi0 * first(0.0, pi1) + pi1 * (mass(pi1, 1.0) - first(pi1, 1.0));
    Some(1.0 - loss / max)
}

/// Macro one-vs-rest H-measure of each probability column.
pub fn h_measure(truth: &[usize], scores: &Matrix, severity: Severity) -> Result<HMeasure> {
    if scores.rows() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: scores.rows() });
    }
    let c = scores.cols();
    if let Some(&l) = truth.iter().find(|&&l| l >= c) {
        return Err(Error::data(format!("label {l} out of range")));
    }
    let mut present = vec![false; c];
    truth.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::data("H-measure needs at least two distinct labels"));
    }
    let mut per_class = Vec::with_capacity(c);
    let mut skipped = Vec::new();
    for k in 0..c {
        let positive: Vec<bool> = truth.iter().map(|&l| l == k).collect();
        let h = h_measure_binary(&scores.column(k), &positive, severity);
        if h.is_none() {
            skipped.push(k);
        }
        per_class.push(h);
    }
    let vals: Vec<f64> = per_class.iter().flatten().copied().collect();
    Ok(HMeasure { value: vals.iter().sum::<f64>() / vals.len() as f64, per_class, skipped })
}
