//! ROC-based evaluation with an emphasis on the low false-positive regime.
//!
//! A sample is called machine-generated when its score is strictly above the
//! threshold, so ties at the threshold never count as false positives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite score {bad}")));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Input(format!("label {bad} not in {{0,1}}")));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn from_parts(positives: &[f64], negatives: &[f64]) -> Result<Self> {
        let scores = positives.iter().chain(negatives).copied().collect();
        let labels = std::iter::repeat_n(1, positives.len())
            .chain(std::iter::repeat_n(0, negatives.len()))
            .collect();
        Self::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (pos, self.labels.len() - pos)
    }

    fn class_scores(&self, label: u8) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.labels)
            .filter(|(_, &y)| y == label)
            .map(|(&s, _)| s)
            .collect()
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (pos, neg) = self.counts();
        if pos == 0 || neg == 0 {
            return Err(Error::Metric(format!(
                "need both classes, got {pos} positive and {neg} negative"
            )));
        }
        Ok((pos, neg))
    }
}

/// Mann-Whitney form: `P(pos > neg) + P(tie) / 2`, computed from midranks.
pub fn auroc(set: &ScoredSet) -> Result<f64> {
    let (n_pos, n_neg) = set.require_both_classes()?;
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_block = order[i..=j].iter().filter(|&&o| set.labels[o] == 1).count();
        pos_rank_sum += mid * pos_in_block as f64;
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((pos_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Samples scoring at or above this value are called positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC vertices from (0,0) to (1,1), one per distinct score.
pub fn roc_curve(set: &ScoredSet) -> Result<Vec<RocPoint>> {
    let (n_pos, n_neg) = set.require_both_classes()?;
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = set.scores[order[i]];
        while i < order.len() && set.scores[order[i]] == threshold {
            if set.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under [`roc_curve`].
pub fn auroc_trapezoid(set: &ScoredSet) -> Result<f64> {
    let curve = roc_curve(set)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum())
}

/// TPR at the smallest threshold `t` whose false-positive rate (scores
/// strictly above `t`) stays within `floor(target_fpr * n_neg)` negatives.
pub fn tpr_at_fpr(set: &ScoredSet, target_fpr: f64) -> Result<f64> {
    let (n_pos, n_neg) = set.require_both_classes()?;
    if !(0.0..1.0).contains(&target_fpr) {
        return Err(Error::Input(format!("target FPR must lie in [0,1), got {target_fpr}")));
    }
    let allowed = (target_fpr * n_neg as f64).floor() as usize;
    let mut negatives = set.class_scores(0);
    negatives.sort_by(|a, b| b.total_cmp(a));
    let tp = match negatives.get(allowed) {
        Some(&threshold) => set.class_scores(1).iter().filter(|&&s| s > threshold).count(),
        None => n_pos,
    };
    Ok(tp as f64 / n_pos as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: usize,
    /// Counts for label 1 (machine).
    pub pos: Vec<usize>,
    /// Counts for label 0 (human).
    pub neg: Vec<usize>,
}

/// Uniform bins over `[0, 1]`; a score of exactly 1 lands in the last bin and
/// out-of-range scores are clamped.
pub fn score_histogram(set: &ScoredSet, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Input("histogram needs at least one bin".into()));
    }
    let mut hist = Histogram {
        bins,
        pos: vec![0; bins],
        neg: vec![0; bins],
    };
    for (&s, &y) in set.scores.iter().zip(&set.labels) {
        let b = ((s.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        if y == 1 {
            hist.pos[b] += 1;
        } else {
            hist.neg[b] += 1;
        }
    }
    Ok(hist)
}

pub fn fpr_key(target: f64) -> String {
    format!("{target}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: f64,
    pub tpr_at_fpr: BTreeMap<String, f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
}

impl MetricReport {
    pub fn compute(set: &ScoredSet, fpr_targets: &[f64], bins: Option<usize>) -> Result<Self> {
        let (n_pos, n_neg) = set.require_both_classes()?;
        let mut tpr = BTreeMap::new();
        for &t in fpr_targets {
            tpr.insert(fpr_key(t), tpr_at_fpr(set, t)?);
        }
        Ok(MetricReport {
            auroc: auroc(set)?,
            tpr_at_fpr: tpr,
            n_pos,
            n_neg,
            histogram: bins.map(|b| score_histogram(set, b)).transpose()?,
        })
    }
}

/// Per-partition reports plus their arithmetic average.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportCollection {
    pub partitions: BTreeMap<String, MetricReport>,
    pub avg: Option<MetricReport>,
    /// Partitions left out because a class was missing.
    pub skipped: Vec<String>,
}

pub const AVG_KEY: &str = "avg";

pub fn report(
    groups: &BTreeMap<String, ScoredSet>,
    fpr_targets: &[f64],
    bins: Option<usize>,
) -> Result<ReportCollection> {
    let mut out = ReportCollection::default();
    for (name, set) in groups {
        match MetricReport::compute(set, fpr_targets, bins) {
            Ok(r) => {
                out.partitions.insert(name.clone(), r);
            }
            Err(Error::Metric(msg)) => {
                log::info!("skipping partition `{name}`: {msg}");
                out.skipped.push(name.clone());
            }
            Err(e) => return Err(e),
        }
    }
    out.avg = average(out.partitions.values());
    Ok(out)
}

fn average<'a>(reports: impl Iterator<Item = &'a MetricReport>) -> Option<MetricReport> {
    let reports: Vec<&MetricReport> = reports.collect();
    let first = reports.first()?;
    let n = reports.len() as f64;
    let mut tpr = BTreeMap::new();
    for key in first.tpr_at_fpr.keys() {
        let sum: f64 = reports.iter().map(|r| r.tpr_at_fpr.get(key).copied().unwrap_or(0.0)).sum();
        tpr.insert(key.clone(), sum / n);
    }
    Some(MetricReport {
        auroc: reports.iter().map(|r| r.auroc).sum::<f64>() / n,
        tpr_at_fpr: tpr,
        n_pos: reports.iter().map(|r| r.n_pos).sum(),
        n_neg: reports.iter().map(|r| r.n_neg).sum(),
        histogram: None,
    })
}

impl ReportCollection {
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (name, r) in &self.partitions {
            map.insert(name.clone(), serde_json::to_value(r).expect("report serializes"));
        }
        if let Some(avg) = &self.avg {
            map.insert(AVG_KEY.into(), serde_json::to_value(avg).expect("report serializes"));
        }
        serde_json::Value::Object(map)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Input("metrics JSON must be an object".into()))?;
        let mut out = ReportCollection::default();
        for (name, v) in obj {
            let r: MetricReport = serde_json::from_value(v.clone())?;
            if name == AVG_KEY {
                out.avg = Some(r);
            } else {
                out.partitions.insert(name.clone(), r);
            }
        }
        Ok(out)
    }
}
