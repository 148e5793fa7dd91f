//! Confusion counts, the thirteen group metrics, ROC/AUC and threshold selection.
//!
//! A row is predicted positive iff its score is `>= t`. Rate metrics whose
//! denominator is zero are imputed as `0.0`, and AUC on a single-class sample
//! as `0.5`; either way the entry is flagged in [`MetricVector::imputed`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn predicted_positive(&self) -> u64 {
        self.tp + self.fp
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// The thirteen group metrics, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "AUC")]
    Auc,
    #[serde(rename = "A")]
    Accuracy,
    #[serde(rename = "BA")]
    BalancedAccuracy,
    #[serde(rename = "FPR")]
    Fpr,
    #[serde(rename = "TPR")]
    Tpr,
    #[serde(rename = "FNR")]
    Fnr,
    #[serde(rename = "TNR")]
    Tnr,
    #[serde(rename = "PPV")]
    Ppv,
    #[serde(rename = "NPV")]
    Npv,
    #[serde(rename = "FDR")]
    Fdr,
    #[serde(rename = "FOR")]
    For,
    #[serde(rename = "PPR")]
    Ppr,
    #[serde(rename = "PPREV")]
    Pprev,
}

pub const METRIC_COUNT: usize = 13;

impl Metric {
    pub const ALL: [Metric; METRIC_COUNT] = [
        Metric::Auc,
        Metric::Accuracy,
        Metric::BalancedAccuracy,
        Metric::Fpr,
        Metric::Tpr,
        Metric::Fnr,
        Metric::Tnr,
        Metric::Ppv,
        Metric::Npv,
        Metric::Fdr,
        Metric::For,
        Metric::Ppr,
        Metric::Pprev,
    ];

    /// Metric pairs that sum to one whenever their shared denominator is nonzero.
    pub const COMPLEMENTS: [(Metric, Metric); 4] = [
        (Metric::Tpr, Metric::Fnr),
        (Metric::Tnr, Metric::Fpr),
        (Metric::Ppv, Metric::Fdr),
        (Metric::Npv, Metric::For),
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "AUC",
            Metric::Accuracy => "A",
            Metric::BalancedAccuracy => "BA",
            Metric::Fpr => "FPR",
            Metric::Tpr => "TPR",
            Metric::Fnr => "FNR",
            Metric::Tnr => "TNR",
            Metric::Ppv => "PPV",
            Metric::Npv => "NPV",
            Metric::Fdr => "FDR",
            Metric::For => "FOR",
            Metric::Ppr => "PPR",
            Metric::Pprev => "PPREV",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Values of the thirteen metrics for one group, with per-entry imputation flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub values: [f64; METRIC_COUNT],
    pub imputed: [bool; METRIC_COUNT],
}

impl MetricVector {
    pub fn get(&self, m: Metric) -> f64 {
        self.values[m.index()]
    }

    pub fn is_imputed(&self, m: Metric) -> bool {
        self.imputed[m.index()]
    }

    /// Placeholder for a group with no rows: every entry imputed.
    pub fn fully_imputed() -> Self {
        let mut values = [0.0; METRIC_COUNT];
        values[Metric::Auc.index()] = 0.5;
        MetricVector {
            values,
            imputed: [true; METRIC_COUNT],
        }
    }

    pub fn any_imputed(&self) -> bool {
        self.imputed.iter().any(|&f| f)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Prediction counts for a threshold; score `>= t` is a positive prediction.
pub fn confusion_at_threshold(scores: &[f64], labels: &[bool], t: f64) -> Result<ConfusionCounts> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= t, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Build the metric vector of a group from its counts.
///
/// `n_total` is the size of the whole evaluated population (denominator of
/// PPR); the group size (denominator of PPREV) is the counts' total.
pub fn compute_metric_vector(
    counts: &ConfusionCounts,
    auc: f64,
    auc_imputed: bool,
    n_total: u64,
) -> Result<MetricVector> {
    let n_group = counts.total();
    if n_group == 0 {
        return Err(Error::EmptyCounts);
    }
    if n_total < n_group {
        return Err(Error::Dimension {
            expected: n_group as usize,
            actual: n_total as usize,
        });
    }
    let ConfusionCounts { tp, fp, tn, fn_ } = *counts;
    let mut values = [0.0; METRIC_COUNT];
    let mut imputed = [false; METRIC_COUNT];
    let mut set = |m: Metric, (v, flag): (f64, bool)| {
        values[m.index()] = v;
        imputed[m.index()] = flag;
    };

    let tpr = ratio(tp, tp + fn_);
    let tnr = ratio(tn, tn + fp);
    set(Metric::Auc, (auc, auc_imputed));
    set(Metric::Accuracy, ratio(tp + tn, n_group));
    set(
        Metric::BalancedAccuracy,
        ((tpr.0 + tnr.0) / 2.0, tpr.1 || tnr.1),
    );
    set(Metric::Tpr, tpr);
    set(Metric::Fnr, ratio(fn_, tp + fn_));
    set(Metric::Tnr, tnr);
    set(Metric::Fpr, ratio(fp, tn + fp));
    set(Metric::Ppv, ratio(tp, tp + fp));
    set(Metric::Fdr, ratio(fp, tp + fp));
    set(Metric::Npv, ratio(tn, tn + fn_));
    set(Metric::For, ratio(fn_, tn + fn_));
    set(Metric::Ppr, ratio(tp + fp, n_total));
    set(Metric::Pprev, ratio(tp + fp, n_group));
    Ok(MetricVector { values, imputed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Points ordered by decreasing threshold; the first has threshold `+inf`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Indices sorted by descending score; ties keep input order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// ROC curve and its area. The area is the Mann-Whitney statistic, computed
/// from integer pair counts (ties contribute one half).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Training("non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let order = descending_order(scores);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    // twice the number of won pairs, so that ties stay integral
    let mut won2: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        // positives in this tie group beat every negative still below them
        let neg_below = n_neg - fp - gn;
        won2 += 2 * gp as u128 * neg_below as u128 + gp as u128 * gn as u128;
        tp += gp;
        fp += gn;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = won2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

/// AUC with the single-class fallback: `(0.5, true)` when undefined.
pub fn auc_or_imputed(scores: &[f64], labels: &[bool]) -> Result<(f64, bool)> {
    match roc_auc(scores, labels) {
        Ok(c) => Ok((c.auc, false)),
        Err(Error::SingleClass) => Ok((0.5, true)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub t_max: f64,
    pub achieved_ba: f64,
    pub candidates: usize,
    /// Set when validation labels had a single class and `t_max` fell back to 0.5.
    pub fallback: bool,
}

pub const THRESHOLD_EPSILON: f64 = 1e-9;

fn balanced_accuracy(tp: u64, tn: u64, n_pos: u64, n_neg: u64) -> f64 {
    (tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64) / 2.0
}

/// Pick the threshold maximizing balanced accuracy on validation data.
///
/// Candidates are the midpoints between consecutive distinct scores plus two
/// end thresholds that predict every row positive or every row negative.
/// Among equal balanced accuracies the smallest threshold wins.
pub fn select_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdChoice> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&y| y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(ThresholdChoice {
            t_max: 0.5,
            achieved_ba: f64::NAN,
            candidates: 0,
            fallback: true,
        });
    }

    // ascending distinct scores with per-value class counts
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut distinct: Vec<(f64, u64, u64)> = Vec::new();
    for &i in &order {
        let s = scores[i];
        match distinct.last_mut() {
            Some(last) if last.0 == s => {
                if labels[i] {
                    last.1 += 1
                } else {
                    last.2 += 1
                }
            }
            _ => distinct.push((s, labels[i] as u64, (!labels[i]) as u64)),
        }
    }

    let s_min = distinct[0].0;
    let s_max = distinct[distinct.len() - 1].0;
    // both end thresholds sit at or beyond the extreme scores
    let low = if s_min >= THRESHOLD_EPSILON {
        THRESHOLD_EPSILON
    } else if s_min > 0.0 {
        s_min / 2.0
    } else {
        s_min
    };
    let high = if s_max < 1.0 - THRESHOLD_EPSILON {
        1.0 - THRESHOLD_EPSILON
    } else {
        (s_max + 1.0) / 2.0
    };

    // sweeping upwards: below distinct[k] the rows of distinct[..k] are negative
    let mut best = ThresholdChoice {
        t_max: low,
        achieved_ba: 0.5,
        candidates: 1,
        fallback: false,
    };
    let (mut tn, mut fn_) = (0u64, 0u64);
    for k in 1..distinct.len() {
        tn += distinct[k - 1].2;
        fn_ += distinct[k - 1].1;
        let t = (distinct[k - 1].0 + distinct[k].0) / 2.0;
        let ba = balanced_accuracy(n_pos - fn_, tn, n_pos, n_neg);
        best.candidates += 1;
        if ba > best.achieved_ba {
            best.t_max = t;
            best.achieved_ba = ba;
        }
    }
    let high_ba = if high > s_max {
        0.5
    } else {
        let top = distinct[distinct.len() - 1];
        balanced_accuracy(top.1, n_neg - top.2, n_pos, n_neg)
    };
    best.candidates += 1;
    if high_ba > best.achieved_ba {
        best.t_max = high;
        best.achieved_ba = high_ba;
    }
    Ok(best)
}

/// Per-group metric vectors for one scored sample at threshold `t`.
///
/// `groups[i]` is the group id of row `i` in `0..n_groups`. A group without
/// rows yields [`MetricVector::fully_imputed`].
pub fn group_metric_vectors(
    scores: &[f64],
    labels: &[bool],
    groups: &[usize],
    n_groups: usize,
    t: f64,
    n_total: u64,
) -> Result<Vec<MetricVector>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if groups.len() != scores.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            actual: groups.len(),
        });
    }
    (0..n_groups)
        .map(|g| {
            let (s, y): (Vec<f64>, Vec<bool>) = groups
                .iter()
                .zip(scores.iter().zip(labels))
                .filter(|(&gi, _)| gi == g)
                .map(|(_, (&s, &y))| (s, y))
                .unzip();
            if s.is_empty() {
                return Ok(MetricVector::fully_imputed());
            }
            let counts = confusion_at_threshold(&s, &y, t)?;
            let (auc, flag) = auc_or_imputed(&s, &y)?;
            compute_metric_vector(&counts, auc, flag, n_total)
        })
        .collect()
}
