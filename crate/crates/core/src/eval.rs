//! Labeled evaluation corpora and confusion-matrix scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{Feature, FeatureFlags};
use crate::model::AppModel;
use crate::simulate::{simulate, PlanError, SimulationPlan};

/// Per-feature booleans for one app.
pub type FeatureVector = BTreeMap<Feature, bool>;

/// Features a simulation plan can produce.
pub const SIMULATED_FEATURES: [Feature; 7] = [
    Feature::ClassNameObfuscated,
    Feature::MethodNameObfuscated,
    Feature::FieldNameObfuscated,
    Feature::OverloadingDetected,
    Feature::DebugInfoRemoved,
    Feature::AnnotationsRemoved,
    Feature::SourceFilesRemoved,
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("{predictions} predictions for {labels} labels")]
    Length { predictions: usize, labels: usize },
    #[error("row {0}: predicted and labeled features differ")]
    Features(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Matthews correlation coefficient; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        (tp * tn - fp * fn_) / denom.sqrt()
    }

    /// Counts with positive and negative classes swapped.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: Feature,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub mcc: f64,
}

/// Scores predictions against labels, feature by feature. Rows must agree
/// in length and in the set of features they carry.
pub fn score(predictions: &[FeatureVector], labels: &[FeatureVector]) -> Result<Vec<FeatureScore>, ScoreError> {
    if predictions.len() != labels.len() {
        return Err(ScoreError::Length {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut counts: BTreeMap<Feature, ConfusionCounts> = BTreeMap::new();
    if let Some(first) = labels.first() {
        for f in first.keys() {
            counts.insert(*f, ConfusionCounts::default());
        }
    }
    for (row, (p, l)) in predictions.iter().zip(labels).enumerate() {
        if !p.keys().eq(l.keys()) || !l.keys().eq(counts.keys()) {
            return Err(ScoreError::Features(row));
        }
        for (f, actual) in l {
            counts.get_mut(f).expect("checked above").record(p[f], *actual);
        }
    }
    Ok(counts
        .into_iter()
        .map(|(feature, counts)| FeatureScore {
            feature,
            counts,
            mcc: counts.mcc(),
        })
        .collect())
}

/// Restricts a report view to the given features.
pub fn prediction(flags: &FeatureFlags, features: &[Feature]) -> FeatureVector {
    features.iter().map(|f| (*f, flags.get(*f))).collect()
}

/// Ground truth for the obfuscated version of an app under `plan`.
pub fn plan_labels(plan: &SimulationPlan) -> FeatureVector {
    SIMULATED_FEATURES
        .iter()
        .map(|f| {
            let on = match f {
                Feature::ClassNameObfuscated => plan.rename_classes,
                Feature::MethodNameObfuscated => plan.rename_methods,
                Feature::FieldNameObfuscated => plan.rename_fields,
                Feature::OverloadingDetected => plan.overload_aggressively,
                Feature::DebugInfoRemoved => plan.strip_debug,
                Feature::AnnotationsRemoved => plan.strip_annotations,
                Feature::SourceFilesRemoved => plan.strip_source,
                Feature::WindowsKeywordsDetected => false,
            };
            (*f, on)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledApp {
    pub model: AppModel,
    pub labels: FeatureVector,
    /// True for the untouched original, false for the simulated version.
    pub original: bool,
}

/// Suffix appended to the app id of a simulated version.
pub const SIMULATED_SUFFIX: &str = "+obfuscated";

/// The original (all labels negative) and simulated version of one app.
pub fn label_pair(app: &AppModel, plan: &SimulationPlan) -> Result<[LabeledApp; 2], PlanError> {
    let mut sim = simulate(app, plan)?.app;
    sim.app_id = format!("{}{SIMULATED_SUFFIX}", app.app_id);
    let negative = SIMULATED_FEATURES.iter().map(|f| (*f, false)).collect();
    Ok([
        LabeledApp {
            model: app.clone(),
            labels: negative,
            original: true,
        },
        LabeledApp {
            model: sim,
            labels: plan_labels(plan),
            original: false,
        },
    ])
}

pub fn make_eval_corpus(apps: &[AppModel], plan: &SimulationPlan) -> Result<Vec<LabeledApp>, PlanError> {
    let mut out = Vec::with_capacity(apps.len() * 2);
    for app in apps {
        out.extend(label_pair(app, plan)?);
    }
    Ok(out)
}

/// One row of a labeled corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model_path: String,
    pub labels: FeatureVector,
}

/// Metrics table as CSV: `Feature,TP,TN,FP,FN,MCC`.
pub fn metrics_csv(scores: &[FeatureScore]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Feature", "TP", "TN", "FP", "FN", "MCC"]).expect("in-memory write");
    for s in scores {
        let c = s.counts;
        w.write_record([
            s.feature.label().to_string(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            format!("{:.3}", s.mcc),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
