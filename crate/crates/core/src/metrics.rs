//! Confusion-matrix accumulation and the three evaluation measures:
//! true-positive rate TP/(TP+FN), false-positive rate FP/(FP+TN), and
//! accuracy (TP+TN)/total. Malicious is the positive class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledSequence;
use crate::nn::{model_forward, DropoutMode, ModelConfig, ModelParams, NnError};
use crate::trace::Label;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{rate} undefined: denominator is zero")]
    UndefinedRate { rate: &'static str },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// TP/FN/FP/TN counters. Accumulation is order-invariant and matrices
/// merge additively, so evaluation can shard freely across threads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    /// Increments exactly one counter.
    pub fn accumulate(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Malicious, Label::Malicious) => self.tp += 1,
            (Label::Benign, Label::Malicious) => self.fn_ += 1,
            (Label::Malicious, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
        }
    }

    pub fn merge(mut self, other: ConfusionMatrix) -> ConfusionMatrix {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.tn += other.tn;
        self
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// True-positive rate TP/(TP+FN).
    pub fn tpr(&self) -> Result<f64, MetricsError> {
        let denom = self.tp + self.fn_;
        if denom == 0 {
            return Err(MetricsError::UndefinedRate {
                rate: "true positive rate",
            });
        }
        Ok(self.tp as f64 / denom as f64)
    }

    /// False-positive rate FP/(FP+TN).
    pub fn fpr(&self) -> Result<f64, MetricsError> {
        let denom = self.fp + self.tn;
        if denom == 0 {
            return Err(MetricsError::UndefinedRate {
                rate: "false positive rate",
            });
        }
        Ok(self.fp as f64 / denom as f64)
    }

    /// Accuracy (TP+TN)/(TP+TN+FP+FN).
    pub fn acc(&self) -> Result<f64, MetricsError> {
        let total = self.total();
        if total == 0 {
            return Err(MetricsError::EmptyMatrix);
        }
        Ok((self.tp + self.tn) as f64 / total as f64)
    }
}

/// Classifies every sequence in inference mode and accumulates the matrix.
/// Sharded across threads; matrix merging is order-invariant.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    test_set: &[LabeledSequence],
) -> Result<ConfusionMatrix, MetricsError> {
    if test_set.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let partials: Result<Vec<ConfusionMatrix>, MetricsError> = test_set
        .par_chunks(1024)
        .map(|chunk| {
            let mut cm = ConfusionMatrix::new();
            for item in chunk {
                let probs = model_forward(&item.sequence, params, config, DropoutMode::Infer)?;
                let predicted = if probs[1] > probs[0] {
                    Label::Malicious
                } else {
                    Label::Benign
                };
                cm.accumulate(predicted, item.label);
            }
            Ok(cm)
        })
        .collect();
    Ok(partials?
        .into_iter()
        .fold(ConfusionMatrix::new(), ConfusionMatrix::merge))
}

/// Evaluation report: raw counts plus the three rates at full precision,
/// tagged with the data mode, sequence length, and model checksum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub maxlen: usize,
    pub model_checksum: String,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub tpr: f64,
    pub fpr: f64,
    pub acc: f64,
}

impl EvalReport {
    pub fn new(
        cm: &ConfusionMatrix,
        config: &ModelConfig,
        model_checksum: String,
    ) -> Result<Self, MetricsError> {
        Ok(EvalReport {
            mode: config.mode.as_str().to_string(),
            maxlen: config.maxlen,
            model_checksum,
            tp: cm.tp,
            fn_: cm.fn_,
            fp: cm.fp,
            tn: cm.tn,
            tpr: cm.tpr()?,
            fpr: cm.fpr()?,
            acc: cm.acc()?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable one-liner with percentages rounded half-up to two
    /// decimals.
    pub fn human_summary(&self) -> String {
        format!(
            "tpr={}% fpr={}% acc={}% (tp={} fn={} fp={} tn={})",
            format_percent(self.tpr),
            format_percent(self.fpr),
            format_percent(self.acc),
            self.tp,
            self.fn_,
            self.fp,
            self.tn
        )
    }
}

/// Formats a fraction as a percentage rounded half-up to two decimals.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}", (fraction * 10_000.0).round() / 100.0)
}

/// FNV-1a 64-bit hash, hex-formatted; used to fingerprint checkpoints.
pub fn checksum(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_increments_one_counter() {
        let mut cm = ConfusionMatrix::new();
        cm.accumulate(Label::Malicious, Label::Malicious);
        assert_eq!(cm, ConfusionMatrix::from_counts(1, 0, 0, 0));
        cm.accumulate(Label::Benign, Label::Malicious);
        cm.accumulate(Label::Malicious, Label::Benign);
        cm.accumulate(Label::Benign, Label::Benign);
        assert_eq!(cm, ConfusionMatrix::from_counts(1, 1, 1, 1));
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn accumulation_is_order_invariant() {
        let stream = [
            (Label::Malicious, Label::Malicious),
            (Label::Benign, Label::Benign),
            (Label::Malicious, Label::Benign),
            (Label::Benign, Label::Malicious),
            (Label::Malicious, Label::Malicious),
        ];
        let mut forward = ConfusionMatrix::new();
        for &(p, a) in &stream {
            forward.accumulate(p, a);
        }
        let mut reversed = ConfusionMatrix::new();
        for &(p, a) in stream.iter().rev() {
            reversed.accumulate(p, a);
        }
        assert_eq!(forward, reversed);
    }

    #[test]
    fn merging_partials_equals_single_stream() {
        let mut a = ConfusionMatrix::new();
        a.accumulate(Label::Malicious, Label::Malicious);
        a.accumulate(Label::Benign, Label::Benign);
        let mut b = ConfusionMatrix::new();
        b.accumulate(Label::Malicious, Label::Benign);
        let merged = a.merge(b);
        assert_eq!(merged, ConfusionMatrix::from_counts(1, 0, 1, 1));
    }

    #[test]
    fn ism_reference_counts_reproduce_known_rates() {
        let cm = ConfusionMatrix::from_counts(34_810_727, 2_951_034, 5_544_678, 24_691_072);
        assert_eq!(format_percent(cm.tpr().unwrap()), "92.19");
        assert_eq!(format_percent(cm.fpr().unwrap()), "18.34");
        assert_eq!(format_percent(cm.acc().unwrap()), "87.51");
    }

    #[test]
    fn bsm_reference_counts_reproduce_known_rates() {
        let cm = ConfusionMatrix::from_counts(8_705_965, 13_816, 70_625, 2_628_383);
        assert_eq!(format_percent(cm.tpr().unwrap()), "99.84");
        assert_eq!(format_percent(cm.fpr().unwrap()), "2.62");
        assert_eq!(format_percent(cm.acc().unwrap()), "99.26");
    }

    #[test]
    fn degenerate_rates() {
        let cm = ConfusionMatrix::from_counts(5, 0, 0, 3);
        assert_eq!(cm.tpr().unwrap(), 1.0);
        assert_eq!(cm.fpr().unwrap(), 0.0);
        assert_eq!(cm.acc().unwrap(), 1.0);

        let no_positives = ConfusionMatrix::from_counts(0, 0, 2, 2);
        assert!(matches!(
            no_positives.tpr(),
            Err(MetricsError::UndefinedRate { .. })
        ));
        let no_negatives = ConfusionMatrix::from_counts(2, 2, 0, 0);
        assert!(matches!(
            no_negatives.fpr(),
            Err(MetricsError::UndefinedRate { .. })
        ));
        let empty = ConfusionMatrix::new();
        assert!(matches!(empty.acc(), Err(MetricsError::EmptyMatrix)));
    }

    #[test]
    fn rates_are_fractions_when_defined() {
        let cm = ConfusionMatrix::from_counts(13, 7, 5, 25);
        for value in [cm.tpr().unwrap(), cm.fpr().unwrap(), cm.acc().unwrap()] {
            assert!((0.0..=1.0).contains(&value));
        }
    }

    #[test]
    fn checksum_is_stable_and_input_sensitive() {
        assert_eq!(checksum(b"abc"), checksum(b"abc"));
        assert_ne!(checksum(b"abc"), checksum(b"abd"));
        assert_eq!(checksum(b"").len(), 16);
    }

    #[test]
    fn report_json_has_spec_fields() {
        let cm = ConfusionMatrix::from_counts(4, 1, 2, 3);
        let cfg = ModelConfig::new(crate::dataset::SequenceMode::Bsm, 10, 0);
        let report = EvalReport::new(&cm, &cfg, "deadbeef".into()).unwrap();
        let json = report.to_json();
        for key in [
            "\"tp\"",
            "\"fn\"",
            "\"fp\"",
            "\"tn\"",
            "\"tpr\"",
            "\"fpr\"",
            "\"acc\"",
            "\"mode\"",
            "\"maxlen\"",
            "\"model_checksum\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        let parsed: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(format_percent(0.921851), "92.19");
        assert_eq!(format_percent(0.921849), "92.18");
        assert_eq!(format_percent(0.5), "50.00");
    }

    #[test]
    fn constant_malicious_classifier_is_all_tpr_all_fpr() {
        use crate::dataset::{LabeledSequence, SequenceMode};
        use crate::text::TokenSequence;
        let mut cfg = ModelConfig::new(SequenceMode::Ism, 6, 1);
        cfg.embed_dim = 3;
        cfg.hidden = 2;
        cfg.maxlen = 4;
        cfg.dense_hidden = 4;
        // biasing the output layer forces the malicious verdict everywhere
        let mut params = crate::nn::ModelParams::zeros(&cfg);
        params.dense2_b = vec![-5.0, 5.0];
        let set: Vec<LabeledSequence> = (0..20)
            .map(|i| LabeledSequence {
                sequence: TokenSequence {
                    indices: vec![(i % 6) as u32, 0, 0, 0],
                    true_length: 1,
                },
                label: if i % 2 == 0 {
                    Label::Malicious
                } else {
                    Label::Benign
                },
                source_id: std::sync::Arc::from("x"),
                ordinal: i,
            })
            .collect();
        let cm = evaluate(&params, &cfg, &set).unwrap();
        assert_eq!(cm.tn, 0);
        assert_eq!(cm.fn_, 0);
        assert_eq!(cm.tpr().unwrap(), 1.0);
        assert_eq!(cm.fpr().unwrap(), 1.0);
        assert_eq!(cm.total(), 20);
    }

    #[test]
    fn evaluate_rejects_empty_set() {
        let cfg = ModelConfig::new(crate::dataset::SequenceMode::Ism, 6, 1);
        let params = crate::nn::ModelParams::zeros(&cfg);
        assert!(matches!(
            evaluate(&params, &cfg, &[]),
            Err(MetricsError::EmptyDataset)
        ));
    }
}
