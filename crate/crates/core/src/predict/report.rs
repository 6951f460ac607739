//! Per-rung accuracy report: R², MAE, and JND violations on the test side.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::dataset::{EvalRecord, Side, Split};
use super::{default_jnd, predict_features, within_jnd};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::lstm::LstmModel;
use crate::metric::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    /// JND threshold; `None` uses the metric default (6 for VMAF, unset
    /// otherwise).
    pub jnd: Option<f64>,
    /// Score every matching record regardless of split side.
    pub include_train: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordPrediction {
    pub segment_id: String,
    pub chain: String,
    pub predicted: f64,
    pub ground_truth: f64,
    /// `|predicted - ground_truth| < jnd`, when a threshold applies.
    pub within_jnd: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// Rung of the first stage, `b̃_1`.
    pub rung: String,
    pub resolution: String,
    pub mbps: f64,
    pub n: usize,
    /// Undefined when the row's ground truth is constant.
    pub r2: Option<f64>,
    pub mae: f64,
    pub jnd_violations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    pub stages: usize,
    pub rows: Vec<EvalRow>,
    /// Mean of the defined per-row R² values.
    pub average_r2: Option<f64>,
    /// Mean of the per-row MAE values.
    pub average_mae: f64,
    pub pooled_r2: Option<f64>,
    pub pooled_mae: f64,
    pub jnd: Option<f64>,
    pub jnd_violation_rate: Option<f64>,
    /// Every scored record in canonical order.
    pub predictions: Vec<RecordPrediction>,
}

pub fn mean_absolute_error(predictions: &[f64], targets: &[f64]) -> Option<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return None;
    }
    Some(
        predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t).abs())
            .sum::<f64>()
            / predictions.len() as f64,
    )
}

/// Coefficient of determination `1 - SS_res / SS_tot`; `None` when the
/// targets are constant or the inputs are empty.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Option<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return None;
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Some(1.0 - ss_res / ss_tot)
}

fn canonical(a: &RecordPrediction, b: &RecordPrediction) -> Ordering {
    a.segment_id
        .cmp(&b.segment_id)
        .then_with(|| a.chain.cmp(&b.chain))
        .then_with(|| a.ground_truth.total_cmp(&b.ground_truth))
        .then_with(|| a.predicted.total_cmp(&b.predicted))
}

/// Scores the records matching the model's metric and stage count that fall
/// on the test side of `split`, grouped by first-stage rung.
pub fn evaluate(records: &[EvalRecord], model: &LstmModel, split: &Split, options: &EvalOptions) -> Result<EvalReport> {
    let metric = model.header.metric;
    let stages = model.header.stages;
    let jnd = options.jnd.or_else(|| default_jnd(metric));
    let selected: Vec<&EvalRecord> = records
        .iter()
        .filter(|r| r.metric == metric && r.chain.len() == stages)
        .filter(|r| options.include_train || split.side(&r.segment_id) == Side::Test)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no {metric} M={stages} records on the evaluated side of the split"
        )));
    }

    let scored: Vec<(String, String, f64, RecordPrediction)> = selected
        .par_iter()
        .map(|r| {
            let score = predict_features(&r.features, &r.chain, model)?;
            let first = r.chain.first();
            Ok((
                first.name.clone(),
                first.resolution.clone(),
                first.mbps,
                RecordPrediction {
                    segment_id: r.segment_id.clone(),
                    chain: score.chain,
                    predicted: score.value,
                    ground_truth: r.ground_truth,
                    within_jnd: jnd.map(|j| within_jnd(score.value, r.ground_truth, j)),
                },
            ))
        })
        .collect::<Result<_>>()?;

    // Rows keyed by bitrate so they come out in ladder order.
    let mut groups: BTreeMap<u64, (String, String, f64, Vec<RecordPrediction>)> = BTreeMap::new();
    for (rung, res, mbps, pred) in scored {
        groups
            .entry(mbps.to_bits())
            .or_insert_with(|| (rung, res, mbps, Vec::new()))
            .3
            .push(pred);
    }

    let mut rows = Vec::with_capacity(groups.len());
    let mut all = Vec::new();
    for (_, (rung, resolution, mbps, mut preds)) in groups {
        preds.sort_by(canonical);
        let (p, t): (Vec<f64>, Vec<f64>) = preds.iter().map(|r| (r.predicted, r.ground_truth)).unzip();
        rows.push(EvalRow {
            rung,
            resolution,
            mbps,
            n: preds.len(),
            r2: r_squared(&p, &t),
            mae: mean_absolute_error(&p, &t).expect("group is non-empty"),
            jnd_violations: jnd.map(|_| preds.iter().filter(|r| r.within_jnd == Some(false)).count()),
        });
        all.extend(preds);
    }
    all.sort_by(canonical);

    let defined: Vec<f64> = rows.iter().filter_map(|r| r.r2).collect();
    let average_r2 = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let average_mae = rows.iter().map(|r| r.mae).sum::<f64>() / rows.len() as f64;
    let (p, t): (Vec<f64>, Vec<f64>) = all.iter().map(|r| (r.predicted, r.ground_truth)).unzip();
    let jnd_violation_rate = jnd.map(|_| {
        all.iter().filter(|r| r.within_jnd == Some(false)).count() as f64 / all.len() as f64
    });
    Ok(EvalReport {
        metric,
        stages,
        rows,
        average_r2,
        average_mae,
        pooled_r2: r_squared(&p, &t),
        pooled_mae: mean_absolute_error(&p, &t).expect("records are non-empty"),
        jnd,
        jnd_violation_rate,
        predictions: all,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_else(|| "-".to_owned())
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rung,resolution,mbps,M,metric,n,r2,mae,jnd_violations\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.rung,
                r.resolution,
                r.mbps,
                self.stages,
                self.metric,
                r.n,
                r.r2.map(sig9).unwrap_or_default(),
                sig9(r.mae),
                r.jnd_violations.map(|v| v.to_string()).unwrap_or_default()
            );
        }
        let violations: Option<usize> = self
            .jnd
            .map(|_| self.predictions.iter().filter(|p| p.within_jnd == Some(false)).count());
        let _ = writeln!(
            out,
            "average,,,{},{},{},{},{},{}",
            self.stages,
            self.metric,
            self.predictions.len(),
            self.average_r2.map(sig9).unwrap_or_default(),
            sig9(self.average_mae),
            violations.map(|v| v.to_string()).unwrap_or_default()
        );
        out
    }

    /// Aligned text table, one line per first-stage rung plus an average.
    pub fn to_table(&self) -> String {
        let unit = self.metric.unit();
        let header = [
            "rung".to_owned(),
            "res".to_owned(),
            "bitrate".to_owned(),
            "n".to_owned(),
            format!("{} M={} R²", self.metric, self.stages),
            "MAE".to_owned(),
        ];
        let mut lines: Vec<[String; 6]> = vec![header];
        let fmt_mae = |m: f64| {
            if unit.is_empty() {
                format!("{m:.2}")
            } else {
                format!("{m:.2} {unit}")
            }
        };
        let fmt_r2 = |r: Option<f64>| r.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"));
        for r in &self.rows {
            lines.push([
                r.rung.clone(),
                r.resolution.clone(),
                format!("{:.3} Mbps", r.mbps),
                r.n.to_string(),
                fmt_r2(r.r2),
                fmt_mae(r.mae),
            ]);
        }
        lines.push([
            "Average".to_owned(),
            String::new(),
            String::new(),
            self.predictions.len().to_string(),
            fmt_r2(self.average_r2),
            fmt_mae(self.average_mae),
        ]);
        let widths: Vec<usize> = (0..6)
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    let pad = w - s.chars().count();
                    if c < 3 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
            if i == 0 || i == lines.len() - 2 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        if let (Some(j), Some(rate)) = (self.jnd, self.jnd_violation_rate) {
            let _ = writeln!(out, "JND {j}: {:.1}% of predictions outside", 100.0 * rate);
        }
        let _ = writeln!(out, "pooled R² {} MAE {}", opt(self.pooled_r2), sig9(self.pooled_mae));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ChunkFeatures, FeatureMeta, SegmentFeatures};
    use crate::lstm::{LstmParams, ModelHeader, NormStats, MODEL_FILE_VERSION};
    use crate::transcode::{default_hls_ladder, TranscodeChain};

    #[test]
    fn r2_and_mae_by_hand() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&t, &t), Some(1.0));
        assert_eq!(mean_absolute_error(&t, &t), Some(0.0));
        let p = [2.0, 2.0, 2.0];
        assert_eq!(r_squared(&p, &t), Some(0.0));
        assert!((mean_absolute_error(&p, &t).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r_squared(&[1.0, 2.0], &[5.0, 5.0]), None);
    }

    fn record(id: &str, chain: &str, truth: f64) -> EvalRecord {
        EvalRecord {
            segment_id: id.into(),
            features: SegmentFeatures {
                segment_id: id.into(),
                meta: FeatureMeta {
                    block_size: 32,
                    chunk_frames: 15,
                    frame_count: 15,
                    width: 64,
                    height: 64,
                },
                chunks: vec![ChunkFeatures {
                    spatial_energy: 1.0,
                    temporal_energy: 0.0,
                    luminance: 0.1,
                }],
            },
            chain: TranscodeChain::parse(chain, &default_hls_ladder()).unwrap(),
            metric: Metric::Vmaf,
            ground_truth: truth,
        }
    }

    fn bias_model(bias: f64) -> LstmModel {
        let mut params = LstmParams::zeros(2, 4);
        params.set_head_bias(bias);
        LstmModel::new(
            ModelHeader {
                metric: Metric::Vmaf,
                stages: 1,
                steps: 1,
                chunk_frames: 15,
                block_size: 32,
                version: MODEL_FILE_VERSION,
            },
            NormStats::identity(4),
            params,
        )
        .unwrap()
    }

    #[test]
    fn constant_truth_row_has_undefined_r2() {
        let records = vec![record("a", "16.8", 70.0), record("b", "16.8", 70.0), record("c", "2.4", 60.0), record("d", "2.4", 80.0)];
        let opts = EvalOptions {
            include_train: true,
            ..Default::default()
        };
        let rep = evaluate(&records, &bias_model(70.0), &Split::default(), &opts).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].rung, "b6");
        assert_eq!(rep.rows[0].r2, Some(0.0));
        assert_eq!(rep.rows[0].mae, 10.0);
        assert_eq!(rep.rows[0].jnd_violations, Some(2));
        assert_eq!(rep.rows[1].rung, "b12");
        assert_eq!(rep.rows[1].r2, None);
        assert_eq!(rep.rows[1].mae, 0.0);
        assert_eq!(rep.jnd, Some(6.0));
        assert_eq!(rep.jnd_violation_rate, Some(0.5));
        assert!(rep.to_table().contains("Average"));
        assert_eq!(rep.to_csv().lines().count(), 4);
    }

    #[test]
    fn empty_test_side() {
        let records = vec![record("a", "16.8", 70.0)];
        let split = Split::new(0, 1.0).unwrap();
        assert!(matches!(
            evaluate(&records, &bias_model(1.0), &split, &EvalOptions::default()).unwrap_err(),
            Error::EmptyDataset(_)
        ));
    }
}
