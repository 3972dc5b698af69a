//! Circular evaluation metrics.
//!
//! Accuracy bins are ground-truth angle ranges `[b·w, (b+1)·w)` with
//! `w = 360 / B`, matching how per-angle accuracy is usually plotted. Label
//! histograms instead use the label-space binning of
//! [`CircularLabelSpace::degrees_to_bin`].

use std::fmt::Write as _;

use crate::circular::{angular_difference_deg, normalize_degrees, CircularLabelSpace};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

pub const DEFAULT_BINS: usize = 36;
pub const DEFAULT_CORRECT_WITHIN_DEG: f64 = 10.0;

/// Median of circular absolute errors; even counts average the two middle values.
pub fn median_angular_error(pred_deg: &[f64], gt_deg: &[f64]) -> Result<f64> {
    if pred_deg.len() != gt_deg.len() {
        return Err(Error::input(format!(
            "{} predictions for {} ground-truth angles",
            pred_deg.len(),
            gt_deg.len()
        )));
    }
    if pred_deg.is_empty() {
        return Err(Error::input("median angular error of an empty set"));
    }
    let mut errs: Vec<f64> = pred_deg
        .iter()
        .zip(gt_deg)
        .map(|(&p, &g)| angular_difference_deg(p, g))
        .collect();
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    Ok(if n % 2 == 1 {
        errs[n / 2]
    } else {
        (errs[n / 2 - 1] + errs[n / 2]) / 2.0
    })
}

fn range_bin(theta: f64, bins: usize) -> usize {
    let w = 360.0 / bins as f64;
    ((normalize_degrees(theta) / w).floor() as usize).min(bins - 1)
}

fn check_bins(bins: usize) -> Result<()> {
    if bins == 0 || 360 % bins != 0 {
        return Err(Error::input(format!(
            "bin count {bins} does not divide 360"
        )));
    }
    Ok(())
}

/// Fraction of predictions within `correct_within` degrees, per ground-truth
/// angle range. Ranges without samples are `None`.
pub fn accuracy_by_bin(
    pred_deg: &[f64],
    gt_deg: &[f64],
    bins: usize,
    correct_within: f64,
) -> Result<Vec<Option<f64>>> {
    check_bins(bins)?;
    if pred_deg.len() != gt_deg.len() {
        return Err(Error::input("prediction and ground-truth lengths differ"));
    }
    let mut hits = vec![0usize; bins];
    let mut counts = vec![0usize; bins];
    for (&p, &g) in pred_deg.iter().zip(gt_deg) {
        let b = range_bin(g, bins);
        counts[b] += 1;
        if angular_difference_deg(p, g) <= correct_within {
            hits[b] += 1;
        }
    }
    Ok(hits
        .iter()
        .zip(&counts)
        .map(|(&h, &c)| (c > 0).then(|| h as f64 / c as f64))
        .collect())
}

/// Entropy (natural log) of accuracies normalized to a distribution.
/// Missing bins are skipped; `0 · ln 0 = 0`.
pub fn accuracy_entropy(per_bin: &[Option<f64>]) -> Result<f64> {
    let present: Vec<f64> = per_bin.iter().flatten().copied().collect();
    if present.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::input("accuracies must be finite and non-negative"));
    }
    let total: f64 = present.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("entropy of an all-zero accuracy vector"));
    }
    Ok(-present
        .iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| {
            let q = a / total;
            q * q.ln()
        })
        .sum::<f64>())
}

/// Per-bin label counts using nearest-center binning with `bins` classes.
pub fn label_histogram(manifest: &DatasetManifest, bins: usize) -> Result<Vec<usize>> {
    let space = CircularLabelSpace::new(bins)?;
    let mut h = vec![0usize; bins];
    for row in &manifest.rows {
        h[space.degrees_to_bin(row.azimuth_deg)] += 1;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub n_evaluated: usize,
    pub median_angular_error_deg: f64,
    pub correct_within_deg: f64,
    pub per_bin_accuracy: Vec<Option<f64>>,
    /// `None` when every accuracy is zero.
    pub accuracy_entropy: Option<f64>,
}

impl EvalReport {
    pub fn evaluate(
        label: impl Into<String>,
        pred_deg: &[f64],
        gt_deg: &[f64],
        bins: usize,
        correct_within: f64,
    ) -> Result<Self> {
        let mae = median_angular_error(pred_deg, gt_deg)?;
        let per_bin = accuracy_by_bin(pred_deg, gt_deg, bins, correct_within)?;
        let entropy = accuracy_entropy(&per_bin).ok();
        Ok(Self {
            label: label.into(),
            n_evaluated: pred_deg.len(),
            median_angular_error_deg: mae,
            correct_within_deg: correct_within,
            per_bin_accuracy: per_bin,
            accuracy_entropy: entropy,
        })
    }

    pub fn overall_accuracy(&self, gt_deg: &[f64]) -> f64 {
        let bins = self.per_bin_accuracy.len();
        let mut counts = vec![0usize; bins];
        for &g in gt_deg {
            counts[range_bin(g, bins)] += 1;
        }
        let hits: f64 = self
            .per_bin_accuracy
            .iter()
            .zip(&counts)
            .map(|(a, &c)| a.unwrap_or(0.0) * c as f64)
            .sum();
        hits / gt_deg.len().max(1) as f64
    }

    /// One `key=value` per line. Missing bins print as `NA`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "label={}", self.label);
        let _ = writeln!(s, "n_evaluated={}", self.n_evaluated);
        let _ = writeln!(
            s,
            "median_angular_error_deg={}",
            self.median_angular_error_deg
        );
        let _ = writeln!(s, "correct_within_deg={}", self.correct_within_deg);
        let _ = writeln!(s, "bins={}", self.per_bin_accuracy.len());
        let _ = writeln!(
            s,
            "accuracy_entropy={}",
            self.accuracy_entropy
                .map_or("NA".to_string(), |e| e.to_string())
        );
        let _ = writeln!(
            s,
            "per_bin_accuracy={}",
            join_accuracies(&self.per_bin_accuracy)
        );
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut label = None;
        let mut n = None;
        let mut mae = None;
        let mut within = None;
        let mut bins = None;
        let mut entropy = None;
        let mut per_bin = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::input(format!("report line without '=': {line:?}")))?;
            match key {
                "label" => label = Some(value.to_string()),
                "n_evaluated" => n = Some(parse(key, value)?),
                "median_angular_error_deg" => mae = Some(parse(key, value)?),
                "correct_within_deg" => within = Some(parse(key, value)?),
                "bins" => bins = Some(parse::<usize>(key, value)?),
                "accuracy_entropy" => {
                    entropy = Some(if value == "NA" {
                        None
                    } else {
                        Some(parse(key, value)?)
                    })
                }
                "per_bin_accuracy" => per_bin = Some(split_accuracies(value)?),
                other => return Err(Error::input(format!("unknown report key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::input(format!("report is missing {k}"));
        let per_bin_accuracy: Vec<Option<f64>> =
            per_bin.ok_or_else(|| missing("per_bin_accuracy"))?;
        if bins.is_some_and(|b| b != per_bin_accuracy.len()) {
            return Err(Error::input("bins does not match per_bin_accuracy length"));
        }
        Ok(Self {
            label: label.unwrap_or_default(),
            n_evaluated: n.ok_or_else(|| missing("n_evaluated"))?,
            median_angular_error_deg: mae.ok_or_else(|| missing("median_angular_error_deg"))?,
            correct_within_deg: within.unwrap_or(DEFAULT_CORRECT_WITHIN_DEG),
            per_bin_accuracy,
            accuracy_entropy: entropy.ok_or_else(|| missing("accuracy_entropy"))?,
        })
    }

    /// `bin_start_deg,bin_end_deg,accuracy` rows.
    pub fn per_bin_csv(&self) -> String {
        let bins = self.per_bin_accuracy.len();
        let w = 360 / bins.max(1);
        let mut s = String::from("bin_start_deg,bin_end_deg,accuracy\n");
        for (b, a) in self.per_bin_accuracy.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", b * w, (b + 1) * w, fmt_acc(*a));
        }
        s
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::input(format!("bad value for {key}: {value:?}")))
}

fn fmt_acc(a: Option<f64>) -> String {
    a.map_or("NA".to_string(), |v| v.to_string())
}

fn join_accuracies(v: &[Option<f64>]) -> String {
    v.iter().map(|a| fmt_acc(*a)).collect::<Vec<_>>().join(",")
}

fn split_accuracies(s: &str) -> Result<Vec<Option<f64>>> {
    s.split(',')
        .map(|t| {
            if t == "NA" {
                Ok(None)
            } else {
                parse("per_bin_accuracy", t).map(Some)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{ManifestRow, Source};
    use proptest::prelude::*;

    #[test]
    fn mae_examples() {
        let gt = [0.0, 90.0, 200.0, 10.0];
        assert_eq!(median_angular_error(&gt, &gt).unwrap(), 0.0);
        // errors 0, 10, 10, 180
        let pred = [0.0, 80.0, 20.0, 350.0];
        let gt = [0.0, 90.0, 200.0, 0.0];
        assert_eq!(median_angular_error(&pred, &gt).unwrap(), 10.0);
        let gt = [3.0, 100.0, 271.5];
        let pred: Vec<f64> = gt.iter().map(|g| g + 180.0).collect();
        assert_eq!(median_angular_error(&pred, &gt).unwrap(), 180.0);
        assert!(median_angular_error(&[], &[]).is_err());
        assert!(median_angular_error(&[1.0], &[]).is_err());
    }

    #[test]
    fn perfect_predictor_has_unit_accuracy() {
        let gt: Vec<f64> = (0..360).map(f64::from).collect();
        let acc = accuracy_by_bin(&gt, &gt, 36, 10.0).unwrap();
        assert!(acc.iter().all(|a| *a == Some(1.0)));
        assert!((accuracy_entropy(&acc).unwrap() - 36f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_matches_enumeration() {
        let gt: Vec<f64> = (0..360).map(f64::from).collect();
        let pred = vec![5.0; 360];
        let acc = accuracy_by_bin(&pred, &gt, 36, 10.0).unwrap();
        // Oracle: count integers in each 10° range within 10° of 5°.
        for (b, a) in acc.iter().enumerate() {
            let hits = (b * 10..b * 10 + 10)
                .filter(|&g| {
                    let d = (g as i64 - 5).rem_euclid(360);
                    d.min(360 - d) <= 10
                })
                .count();
            assert_eq!(a.unwrap(), hits as f64 / 10.0, "bin {b}");
        }
        assert_eq!(acc[0], Some(1.0));
        assert_eq!(acc[1], Some(0.6));
        assert_eq!(acc[35], Some(0.5));
        assert_eq!(acc[2], Some(0.0));
    }

    #[test]
    fn empty_bins_are_missing() {
        let acc = accuracy_by_bin(&[3.0], &[3.0], 36, 10.0).unwrap();
        assert_eq!(acc[0], Some(1.0));
        assert!(acc[1..].iter().all(Option::is_none));
        assert_eq!(accuracy_entropy(&acc).unwrap(), 0.0);
        assert!(accuracy_by_bin(&[3.0], &[3.0], 7, 10.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((accuracy_entropy(&vec![Some(0.7); 36]).unwrap() - 3.5835).abs() < 1e-4);
        let mut single = vec![Some(0.0); 36];
        single[4] = Some(0.3);
        assert_eq!(accuracy_entropy(&single).unwrap(), 0.0);
        let e = accuracy_entropy(&[Some(0.5), Some(0.25), Some(0.25)]).unwrap();
        let want = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((e - want).abs() < 1e-15);
        assert!((e - 1.0397).abs() < 1e-4);
        assert!(accuracy_entropy(&[Some(0.0), None]).is_err());
    }

    fn manifest_of(degs: &[f64]) -> DatasetManifest {
        DatasetManifest::new(
            degs.iter()
                .enumerate()
                .map(|(i, &d)| ManifestRow {
                    sample_id: i.to_string(),
                    source: Source::Synthetic,
                    path_or_theta: format!("img{i}.png"),
                    seed: 0,
                    azimuth_deg: d,
                    azimuth_bin: 0,
                })
                .collect(),
        )
    }

    #[test]
    fn histogram_examples() {
        let uniform: Vec<f64> = (0..360).map(f64::from).collect();
        let h = label_histogram(&manifest_of(&uniform), 36).unwrap();
        assert!(h.iter().all(|&c| c == 10));
        let h = label_histogram(&DatasetManifest::default(), 36).unwrap();
        assert_eq!(h, vec![0; 36]);
        let h = label_histogram(&manifest_of(&[0.0, 1.0, 359.0, 180.0, 182.0, 90.0]), 36).unwrap();
        assert_eq!(h[0], 3);
        assert_eq!(h[18], 2);
        assert_eq!(h[9], 1);
    }

    #[test]
    fn report_text_round_trip() {
        let gt: Vec<f64> = (0..100).map(|i| f64::from(i) * 3.3).collect();
        let pred: Vec<f64> = gt.iter().map(|g| g + 7.5).collect();
        let r = EvalReport::evaluate("sm", &pred, &gt, 36, 10.0).unwrap();
        let text = r.to_text();
        let back = EvalReport::from_text(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_text(), text);
        assert!(r
            .per_bin_csv()
            .starts_with("bin_start_deg,bin_end_deg,accuracy\n0,10,"));
    }

    proptest! {
        #[test]
        fn mae_symmetric_and_periodic(
            pairs in prop::collection::vec((-720.0f64..720.0, -720.0f64..720.0), 1..40),
            shift in -3i32..3,
        ) {
            let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = median_angular_error(&p, &g).unwrap();
            prop_assert_eq!(a, median_angular_error(&g, &p).unwrap());
            let shifted: Vec<f64> = p.iter().map(|x| x + 360.0 * f64::from(shift)).collect();
            prop_assert!((a - median_angular_error(&shifted, &g).unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&a));
        }

        #[test]
        fn accuracy_bounds_and_weighted_mean(
            pairs in prop::collection::vec((0.0f64..360.0, 0.0f64..360.0), 1..200),
            within in 0.0f64..90.0,
        ) {
            let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = EvalReport::evaluate("x", &p, &g, 36, within).unwrap();
            for a in r.per_bin_accuracy.iter().flatten() {
                prop_assert!((0.0..=1.0).contains(a));
            }
            let direct = p.iter().zip(&g).filter(|(a, b)| angular_difference_deg(**a, **b) <= within).count() as f64 / p.len() as f64;
            prop_assert!((r.overall_accuracy(&g) - direct).abs() < 1e-12);
            if let Some(e) = r.accuracy_entropy {
                prop_assert!(e >= 0.0 && e <= 36f64.ln() + 1e-12);
            }
        }

        #[test]
        fn entropy_maximal_only_when_uniform(acc in prop::collection::vec(0.0f64..1.0, 36)) {
            let v: Vec<Option<f64>> = acc.iter().map(|a| Some(*a)).collect();
            if let Ok(e) = accuracy_entropy(&v) {
                let max = 36f64.ln();
                prop_assert!(e <= max + 1e-12);
                let all_equal = acc.iter().all(|a| (a - acc[0]).abs() < 1e-15);
                if !all_equal {
                    prop_assert!(e < max);
                }
            }
        }
    }
}
