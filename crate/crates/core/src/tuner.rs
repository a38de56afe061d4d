//! Choosing ensemble weights on validation data.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_model::{DatasetIndex, Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::evaluator::{confusion_metrics, map_at, map_range, restrict};
use crate::fusion::{fuse, to_detection_set, EnsembleConfig};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Objective {
    #[default]
    #[serde(rename = "map_50", alias = "map50")]
    Map50,
    #[serde(rename = "map_50_95", alias = "map50_95")]
    Map50To95,
    #[serde(rename = "accuracy")]
    Accuracy,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Map50 => "map_50",
            Objective::Map50To95 => "map_50_95",
            Objective::Accuracy => "accuracy",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "map50" | "map_50" => Ok(Objective::Map50),
            "map50_95" | "map_50_95" => Ok(Objective::Map50To95),
            "accuracy" => Ok(Objective::Accuracy),
            _ => Err(Error::config(format!(
                "unknown objective {s:?} (expected map50, map50_95 or accuracy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TuneMethod {
    Grid {
        #[serde(default = "default_step")]
        resolution: f64,
    },
    CoordinateAscent {
        #[serde(default = "default_rounds")]
        max_rounds: usize,
        #[serde(default = "default_step")]
        step: f64,
    },
    Proportional,
}

fn default_step() -> f64 {
    0.05
}

fn default_rounds() -> usize {
    20
}

impl Default for TuneMethod {
    fn default() -> Self {
        TuneMethod::Grid {
            resolution: default_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneSpec {
    pub method: TuneMethod,
    pub objective: Objective,
    /// Score cut used by the accuracy objective.
    pub score_threshold: f64,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            method: TuneMethod::default(),
            objective: Objective::default(),
            score_threshold: 0.5,
        }
    }
}

impl TuneSpec {
    pub fn validate(&self) -> Result<()> {
        let step_ok = |s: f64| s > 0.0 && s <= 0.5;
        match self.method {
            TuneMethod::Grid { resolution } if !step_ok(resolution) => Err(Error::config(format!(
                "grid resolution must lie in (0, 0.5], got {resolution}"
            ))),
            TuneMethod::Grid { resolution } if grid_divisions(resolution).is_none() => {
                Err(Error::config(format!(
                    "grid resolution must divide 1 evenly, got {resolution}"
                )))
            }
            TuneMethod::CoordinateAscent { step, .. } if !step_ok(step) => Err(Error::config(
                format!("ascent step must lie in (0, 0.5], got {step}"),
            )),
            TuneMethod::CoordinateAscent { max_rounds: 0, .. } => {
                Err(Error::config("ascent needs at least one round"))
            }
            _ if !(0.0..=1.0).contains(&self.score_threshold) => Err(Error::config(format!(
                "score threshold must lie in [0, 1], got {}",
                self.score_threshold
            ))),
            _ => Ok(()),
        }
    }
}

fn grid_divisions(resolution: f64) -> Option<usize> {
    let n = (1.0 / resolution).round();
    ((n * resolution - 1.0).abs() < 1e-9 && n >= 1.0).then_some(n as usize)
}

/// One evaluated weight vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Best objective seen up to and including this row.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub config: EnsembleConfig,
    pub objective: f64,
    pub trace: Vec<TraceRow>,
}

/// Objective of already-fused (or single-model) detections on `gt`.
pub fn objective_value(
    dets: &[&Detection],
    gt: &DatasetIndex,
    objective: Objective,
    score_threshold: f64,
) -> Result<f64> {
    match objective {
        Objective::Map50 => map_at(dets, gt, 0.5),
        Objective::Map50To95 => map_range(dets, gt),
        Objective::Accuracy => Ok(confusion_metrics(dets, gt, score_threshold).accuracy),
    }
}

struct Problem<'a> {
    gt: &'a DatasetIndex,
    sets: Vec<DetectionSet>,
    base: &'a EnsembleConfig,
    spec: &'a TuneSpec,
}

impl Problem<'_> {
    fn score(&self, weights: &[f64]) -> Result<f64> {
        let config = self.base.with_weights(weights)?;
        let fused = to_detection_set(&fuse(&self.sets, &config)?, None)?;
        let dets: Vec<&Detection> = fused.detections().iter().collect();
        objective_value(
            &dets,
            self.gt,
            self.spec.objective,
            self.spec.score_threshold,
        )
    }

    fn finish(
        &self,
        weights: Vec<f64>,
        objective: f64,
        trace: Vec<TraceRow>,
    ) -> Result<TuneResult> {
        Ok(TuneResult {
            config: self.base.with_weights(&weights)?,
            objective,
            trace,
        })
    }
}

/// Tunes the weights of `base` (thresholds are kept) on the validation
/// set. Detections outside `val_gt` are ignored. Deterministic.
pub fn tune_weights(
    val_gt: &DatasetIndex,
    sets: &[DetectionSet],
    spec: &TuneSpec,
    base: &EnsembleConfig,
) -> Result<TuneResult> {
    spec.validate()?;
    if val_gt.is_empty() {
        return Err(Error::Evaluation("validation set is empty".into()));
    }
    if spec.objective != Objective::Accuracy && val_gt.class_counts().total() == 0 {
        return Err(Error::Evaluation(
            "validation set has no ground-truth objects, mAP is undefined".into(),
        ));
    }
    let problem = Problem {
        gt: val_gt,
        sets: sets
            .iter()
            .map(|s| restrict(s, val_gt))
            .collect::<Result<_>>()?,
        base,
        spec,
    };
    match spec.method {
        TuneMethod::Grid { resolution } => {
            grid(&problem, grid_divisions(resolution).expect("validated"))
        }
        TuneMethod::CoordinateAscent { max_rounds, step } => ascent(&problem, max_rounds, step),
        TuneMethod::Proportional => proportional(&problem),
    }
}

/// All vectors of `m` non-negative integers summing to `n`, in
/// lexicographic order.
fn compositions(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=n {
            prefix.push(k);
            go(n - k, m - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(n, m, &mut Vec::with_capacity(m), &mut out);
    out
}

fn grid(p: &Problem, n: usize) -> Result<TuneResult> {
    let m = p.base.model_weights().len();
    let candidates: Vec<Vec<f64>> = compositions(n, m)
        .into_iter()
        .map(|ks| ks.into_iter().map(|k| k as f64 / n as f64).collect())
        .collect();
    let scores = par::map(&candidates, |w| p.score(w));

    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        let s = s?;
        // Candidates are in lexicographic order, so strict improvement keeps
        // the smallest vector among ties.
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
        trace.push(TraceRow {
            weights: candidates[i].clone(),
            objective: s,
            best: best.expect("set above").1,
        });
    }
    let (i, s) = best.expect("grid is never empty");
    p.finish(candidates[i].clone(), s, trace)
}

fn ascent(p: &Problem, max_rounds: usize, step: f64) -> Result<TuneResult> {
    let m = p.base.model_weights().len();
    let mut current = vec![1.0 / m as f64; m];
    let mut best = p.score(&current)?;
    let mut trace = vec![TraceRow {
        weights: current.clone(),
        objective: best,
        best,
    }];
    for _ in 0..max_rounds {
        let mut improved = false;
        for i in 0..m {
            for delta in [step, -step] {
                let mut w = current.clone();
                w[i] = (w[i] + delta).max(0.0);
                let sum: f64 = w.iter().sum();
                if sum <= 0.0 {
                    continue;
                }
                w.iter_mut().for_each(|x| *x /= sum);
                if w == current {
                    continue;
                }
                let s = p.score(&w)?;
                if s > best {
                    best = s;
                    current = w.clone();
                    improved = true;
                }
                trace.push(TraceRow {
                    weights: w,
                    objective: s,
                    best,
                });
            }
        }
        if !improved {
            break;
        }
    }
    p.finish(current, best, trace)
}

/// `w_m = score_m / sum(score)`.
pub fn proportional_weights(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::config(
            "model scores must be finite and non-negative",
        ));
    }
    let sum: f64 = scores.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Evaluation(
            "every model scores zero, proportional weights are undefined".into(),
        ));
    }
    Ok(scores.iter().map(|s| s / sum).collect())
}

fn proportional(p: &Problem) -> Result<TuneResult> {
    let mut singles = Vec::new();
    for model in p.base.model_weights().keys() {
        let s = match p.sets.iter().find(|s| s.model_id() == model) {
            Some(set) => {
                let dets: Vec<&Detection> = set.detections().iter().collect();
                objective_value(&dets, p.gt, p.spec.objective, p.spec.score_threshold)?
            }
            None => 0.0,
        };
        singles.push(s);
    }
    let weights = proportional_weights(&singles)?;
    let s = p.score(&weights)?;
    let trace = vec![TraceRow {
        weights: weights.clone(),
        objective: s,
        best: s,
    }];
    p.finish(weights, s, trace)
}

/// Search trace as CSV: one `w_<model>` column per model, then the
/// objective and the running best.
pub fn write_trace_csv(result: &TuneResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Evaluation(format!("CSV output failed: {other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = result
        .config
        .model_weights()
        .keys()
        .map(|m| format!("w_{m}"))
        .collect();
    header.extend(["objective".to_string(), "best".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for row in &result.trace {
        let mut rec: Vec<String> = row.weights.iter().map(|x| x.to_string()).collect();
        rec.push(row.objective.to_string());
        rec.push(row.best.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
