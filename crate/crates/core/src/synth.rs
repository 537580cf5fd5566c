//! Synthetic loan-status data shaped like a consumer-lending export:
//! long-tailed classes, a mix of informative and noise columns, a few
//! categoricals, and exact per-column null rates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::{Column, Frame};
use crate::math;

pub const TARGET: &str = "loan_status";

/// Loan statuses, most frequent first.
const STATUSES: [&str; 10] = [
    "Current",
    "Fully Paid",
    "Charged Off",
    "Late (31-120 days)",
    "In Grace Period",
    "Late (16-30 days)",
    "Issued",
    "Does not meet the credit policy. Status:Fully Paid",
    "Does not meet the credit policy. Status:Charged Off",
    "Default",
];

const NUMERIC_NAMES: [&str; 27] = [
    "loan_amnt",
    "funded_amnt",
    "int_rate",
    "installment",
    "annual_inc",
    "dti",
    "out_prncp",
    "total_pymnt",
    "total_rec_prncp",
    "total_rec_int",
    "total_rec_late_fee",
    "recoveries",
    "last_pymnt_amnt",
    "revol_bal",
    "revol_util",
    "open_acc",
    "total_acc",
    "delinq_2yrs",
    "inq_last_6mths",
    "pub_rec",
    "tot_cur_bal",
    "total_rev_hi_lim",
    "acc_now_delinq",
    "collections_12_mths_ex_med",
    "mths_since_last_delinq",
    "mths_since_last_record",
    "mths_since_last_major_derog",
];

const GRADES: [&str; 7] = ["A", "B", "C", "D", "E", "F", "G"];
const HOME: [&str; 3] = ["MORTGAGE", "OWN", "RENT"];
const PURPOSE: [&str; 5] = ["car", "credit_card", "debt_consolidation", "home_improvement", "other"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    /// Feature columns, target excluded. Three are categorical when there
    /// are at least six.
    pub features: usize,
    pub classes: usize,
    /// Class weights are proportional to `1 / (k + 1)^imbalance`.
    pub imbalance: f64,
    pub min_per_class: usize,
    /// Spread of class prototypes in units of within-class noise.
    pub separation: f64,
    /// Per-feature null rate; `None` uses the built-in profile.
    pub null_rates: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            rows: 20_000,
            features: 30,
            classes: 10,
            imbalance: 1.0,
            min_per_class: 10,
            separation: 1.5,
            null_rates: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn n_categorical(&self) -> usize {
        if self.features >= 6 {
            3
        } else {
            0
        }
    }

    pub fn n_numeric(&self) -> usize {
        self.features - self.n_categorical()
    }

    /// Informative numeric columns come first; the rest are noise.
    pub fn n_informative(&self) -> usize {
        self.n_numeric().div_ceil(3)
    }

    pub fn class_names(&self) -> Vec<String> {
        if self.classes == STATUSES.len() {
            STATUSES.iter().map(ToString::to_string).collect()
        } else {
            (0..self.classes).map(|k| format!("class_{k}")).collect()
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let numeric = self.n_numeric();
        let mut names: Vec<String> = if numeric <= NUMERIC_NAMES.len() && self.features == 30 {
            NUMERIC_NAMES[..numeric].iter().map(ToString::to_string).collect()
        } else {
            (0..numeric).map(|j| format!("num_{j}")).collect()
        };
        if self.n_categorical() > 0 {
            names.extend(["grade", "home_ownership", "purpose"].map(String::from));
        }
        names
    }

    /// Built-in null profile: the last three numeric columns are mostly
    /// empty, every fourth noise column has a few gaps, and `purpose` has 2%.
    pub fn default_null_rates(&self) -> Vec<f64> {
        let numeric = self.n_numeric();
        let informative = self.n_informative();
        let mut rates = vec![0.0; self.features];
        for (j, r) in rates.iter_mut().enumerate().take(numeric).skip(informative) {
            if j % 4 == 0 {
                *r = 0.05;
            }
        }
        let sparse = [0.55, 0.7, 0.9];
        for (k, &rate) in sparse.iter().enumerate() {
            if numeric > informative + k {
                rates[numeric - 1 - k] = rate;
            }
        }
        if self.n_categorical() > 0 {
            rates[self.features - 1] = 0.02;
        }
        rates
    }

    fn validate(&self) -> Result<Vec<f64>> {
        if self.classes < 2 {
            return Err(Error::param("at least two classes are required"));
        }
        if self.features == 0 {
            return Err(Error::param("at least one feature is required"));
        }
        if self.rows < self.classes * self.min_per_class.max(1) {
            return Err(Error::param(format!(
                "{} rows cannot hold {} classes with at least {} rows each",
                self.rows,
                self.classes,
                self.min_per_class.max(1)
            )));
        }
        if !(self.imbalance >= 0.0) || !(self.separation >= 0.0) {
            return Err(Error::param("imbalance and separation must be nonnegative"));
        }
        let rates = self.null_rates.clone().unwrap_or_else(|| self.default_null_rates());
        if rates.len() != self.features {
            return Err(Error::Dimension { expected: self.features, got: rates.len() });
        }
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::param("null rates must lie in [0, 1]"));
        }
        Ok(rates)
    }
}

/// Class label per row: every class gets `min_per_class`, the rest is drawn
/// from the long-tailed weights, then rows are shuffled.
fn draw_labels(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let floor = spec.min_per_class.max(1);
    let weights: Vec<f64> = (0..spec.classes).map(|k| libm::pow((k + 1) as f64, -spec.imbalance)).collect();
    let total: f64 = weights.iter().sum();
    let mut labels: Vec<usize> = (0..spec.classes).flat_map(|k| core::iter::repeat_n(k, floor)).collect();
    while labels.len() < spec.rows {
        let mut u = rng.gen::<f64>() * total;
        let mut k = 0;
        while k + 1 < spec.classes && u >= weights[k] {
            u -= weights[k];
            k += 1;
        }
        labels.push(k);
    }
    labels.shuffle(rng);
    labels
}

/// Generates the raw frame; the target is the categorical column `loan_status`.
pub fn generate(spec: &SynthSpec) -> Result<Frame> {
    let rates = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = draw_labels(spec, &mut rng);
    let (n, numeric, informative) = (spec.rows, spec.n_numeric(), spec.n_informative());

    let prototypes: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..informative).map(|_| spec.separation * math::standard_normal(&mut rng)).collect())
        .collect();
    // Column-specific location and scale so values look like raw amounts.
    let shape: Vec<(f64, f64)> =
        (0..numeric).map(|j| (rng.gen_range(0.0..50.0) * (j % 3) as f64, rng.gen_range(0.5..20.0))).collect();

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); numeric];
    let mut cats: Vec<Vec<String>> = vec![Vec::with_capacity(n); spec.n_categorical()];
    for &c in &labels {
        for (j, col) in cols.iter_mut().enumerate() {
            let z = math::standard_normal(&mut rng);
            let latent = if j < informative { prototypes[c][j] + z } else { z };
            let (loc, scale) = shape[j];
            // Every third column is right-skewed, like balances and incomes.
            let v = if j % 3 == 2 { math::exp(latent / 2.0) * scale } else { loc + scale * latent };
            col.push(v);
        }
        if !cats.is_empty() {
            let g = (c as f64 * 0.7 + 0.8 * math::standard_normal(&mut rng)).clamp(0.0, 6.0);
            cats[0].push(GRADES[math::round(g) as usize].to_string());
            cats[1].push(HOME[rng.gen_range(0..HOME.len())].to_string());
            cats[2].push(PURPOSE[rng.gen_range(0..PURPOSE.len())].to_string());
        }
    }

    let names = spec.feature_names();
    let mut columns = Vec::with_capacity(spec.features + 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut missing_rows = |rate: f64, rng: &mut ChaCha8Rng| -> Vec<bool> {
        let k = math::round(rate * n as f64) as usize;
        let (chosen, _) = order.partial_shuffle(rng, k);
        let mut mask = vec![false; n];
        chosen.iter().for_each(|&i| mask[i] = true);
        mask
    };
    for (j, col) in cols.into_iter().enumerate() {
        let mask = missing_rows(rates[j], &mut rng);
        columns.push(Column::numeric(col.into_iter().zip(mask).map(|(v, m)| (!m).then_some(v)).collect())?);
    }
    for (k, col) in cats.into_iter().enumerate() {
        let mask = missing_rows(rates[numeric + k], &mut rng);
        columns.push(Column::categorical(col.into_iter().zip(mask).map(|(v, m)| (!m).then_some(v)).collect()));
    }
    let class_names = spec.class_names();
    columns.push(Column::categorical(labels.iter().map(|&c| Some(class_names[c].clone())).collect()));
    let mut all_names = names;
    all_names.push(TARGET.to_string());
    Frame::new(all_names, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::ColumnKind;

    #[test]
    fn default_shape() {
        let spec = SynthSpec { rows: 2000, ..SynthSpec::default() };
        let f = generate(&spec).unwrap();
        assert_eq!(f.n_cols(), 31);
        assert_eq!(f.n_rows(), 2000);
        let cats = f.columns().iter().filter(|c| c.kind() == ColumnKind::Categorical).count();
        assert_eq!(cats, 4);
        let target = f.column(TARGET).unwrap().as_categorical().unwrap();
        let mut seen: Vec<&String> = target.iter().collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 10);
        let current = target.iter().filter(|s| *s == "Current").count();
        let default = target.iter().filter(|s| *s == "Default").count();
        assert!(current > 4 * default);
        assert!(default >= 10);
    }

    #[test]
    fn null_rates_are_exact() {
        let spec = SynthSpec { rows: 1000, ..SynthSpec::default() };
        let f = generate(&spec).unwrap();
        for (col, rate) in f.columns().iter().zip(spec.default_null_rates()) {
            assert_eq!(col.missing_count(), (rate * 1000.0).round() as usize);
        }
        assert_eq!(f.columns().iter().filter(|c| c.null_fraction() > 0.5).count(), 3);
    }

    fn cells(f: &Frame) -> Vec<Option<String>> {
        f.columns().iter().flat_map(|c| (0..c.len()).map(|i| c.cell_text(i))).collect()
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec { rows: 300, classes: 5, ..SynthSpec::default() };
        assert_eq!(cells(&generate(&spec).unwrap()), cells(&generate(&spec).unwrap()));
        let other = SynthSpec { seed: 1, ..spec.clone() };
        assert_ne!(cells(&generate(&spec).unwrap()), cells(&generate(&other).unwrap()));
    }

    #[test]
    fn rejects_impossible_specs() {
        assert!(generate(&SynthSpec { rows: 50, classes: 10, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { classes: 1, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { rows: 100, null_rates: Some(vec![0.0; 3]), ..SynthSpec::default() }).is_err());
    }
}
