//! Experiment log: JSONL schema, per-epoch metric records, BRB events,
//! run summary, and the timing breakdown with the amortized BRB share.
//!
//! Logs are byte-deterministic for a fixed config and seed except for
//! wall-clock fields; every timing field name ends in `_s`, and
//! `canonical_jsonl` zeroes those so determinism can be checked (and
//! diffed) mechanically.

use serde::{Deserialize, Serialize};

use crate::brb::BrbEvent;
use crate::error::{Error, Result};
use crate::metrics::DistanceRatioHistogram;

pub const SCHEMA_VERSION: u32 = 1;

/// One evaluation epoch. ACC and NMI are scaled to [0, 100], ARI to
/// [-100, 100]. Loss fields are epoch means over batches; `loss_ssl` and
/// `loss_cluster` are the unweighted terms and `loss_total` the weighted
/// objective. Supervised metrics are null for unlabeled data; the
/// quadratic diagnostics (intra/inter-CD, silhouette, rho histogram) are
/// null off their cadence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub intra_cd: Option<f64>,
    pub inter_cd: Option<f64>,
    pub silhouette: Option<f64>,
    pub cl_change: Option<f64>,
    pub loss_total: f64,
    pub loss_ssl: f64,
    pub loss_cluster: f64,
    pub decoder_grad_norm: f64,
    pub epoch_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Cluster,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epochs: usize,
    pub brb_events: usize,
    pub last_acc: Option<f64>,
    pub last_nmi: Option<f64>,
    pub last_ari: Option<f64>,
    pub best_acc: Option<f64>,
    pub best_nmi: Option<f64>,
    pub best_ari: Option<f64>,
    /// Reconstruction loss of the pretraining holdout slice before and
    /// after pretraining (None in scenario 2).
    pub pretrain_holdout_initial: Option<f64>,
    pub pretrain_holdout_final: Option<f64>,
    pub pretrain_s: f64,
    pub cluster_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Config { schema: u32, config: serde_json::Value },
    Metrics(MetricRecord),
    BrbEvent(BrbEvent),
    Rho(DistanceRatioHistogram),
    Summary(RunSummary),
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentLog {
    pub lines: Vec<LogLine>,
}

impl ExperimentLog {
    pub fn push(&mut self, line: LogLine) {
        self.lines.push(line);
    }

    pub fn metrics(&self) -> impl Iterator<Item = &MetricRecord> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Metrics(m) => Some(m),
            _ => None,
        })
    }

    pub fn brb_events(&self) -> impl Iterator<Item = &BrbEvent> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::BrbEvent(e) => Some(e),
            _ => None,
        })
    }

    pub fn summary(&self) -> Option<&RunSummary> {
        self.lines.iter().rev().find_map(|l| match l {
            LogLine::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn config(&self) -> Option<&serde_json::Value> {
        self.lines.iter().find_map(|l| match l {
            LogLine::Config { config, .. } => Some(config),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&serde_json::to_string(line).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: LogLine = serde_json::from_str(raw).map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad log line: {e}"),
            })?;
            lines.push(line);
        }
        Ok(ExperimentLog { lines })
    }

    pub fn write_jsonl(&self, path: &std::path::Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read_jsonl(path: &std::path::Path) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    /// JSONL with every wall-clock field (keys ending in `_s`) zeroed;
    /// byte-equal across reruns of the same config and seed.
    pub fn canonical_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let mut value = serde_json::to_value(line).expect("log lines serialize");
            zero_timing_fields(&mut value);
            out.push_str(&serde_json::to_string(&value).expect("value serializes"));
            out.push('\n');
        }
        out
    }
}

fn zero_timing_fields(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if key.ends_with("_s") && v.is_number() {
                    *v = serde_json::Value::from(0.0);
                } else {
                    zero_timing_fields(v);
                }
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                zero_timing_fields(v);
            }
        }
        _ => {}
    }
}

/// Per-event timing breakdown plus the amortized BRB share of the
/// clustering runtime: share% = 100 * B / (T * E) where B is the mean BRB
/// event time and E the mean clustering epoch time with BRB portions
/// removed. Equivalently 100 * (ratio - 1) for the amortized ratio
/// (T*E + B) / (T*E).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingReport {
    pub events: Vec<BrbEvent>,
    pub mean_reset_s: f64,
    pub mean_embed_s: f64,
    pub mean_cluster_s: f64,
    pub mean_momentum_reset_s: f64,
    pub mean_event_s: f64,
    pub mean_epoch_s: f64,
    pub interval: usize,
    pub amortized_ratio: f64,
    pub brb_share_percent: f64,
}

pub fn timing_report(log: &ExperimentLog) -> Result<TimingReport> {
    let interval = log
        .config()
        .and_then(|c| c.get("interval"))
        .and_then(|v| v.as_u64())
        .unwrap_or(1) as usize;
    let events: Vec<BrbEvent> = log.brb_events().cloned().collect();
    let cluster_epochs: Vec<&MetricRecord> =
        log.metrics().filter(|m| m.phase == Phase::Cluster).collect();
    if cluster_epochs.is_empty() {
        return Err(Error::Input("log has no clustering epochs".into()));
    }
    let n_ev = events.len() as f64;
    let mean = |f: fn(&BrbEvent) -> f64| {
        if events.is_empty() { 0.0 } else { events.iter().map(f).sum::<f64>() / n_ev }
    };
    let mean_event_s = mean(BrbEvent::total_s);
    // epoch time with the BRB portion of BRB epochs removed
    let mut epoch_total = 0.0;
    for m in &cluster_epochs {
        let brb_here: f64 = events
            .iter()
            .filter(|e| e.epoch == m.epoch)
            .map(BrbEvent::total_s)
            .sum();
        epoch_total += (m.epoch_s - brb_here).max(0.0);
    }
    let mean_epoch_s = epoch_total / cluster_epochs.len() as f64;
    let denom = interval as f64 * mean_epoch_s;
    let (ratio, share) = if events.is_empty() || denom <= 0.0 {
        (1.0, 0.0)
    } else {
        (1.0 + mean_event_s / denom, 100.0 * mean_event_s / denom)
    };
    Ok(TimingReport {
        mean_reset_s: mean(|e| e.reset_s),
        mean_embed_s: mean(|e| e.embed_s),
        mean_cluster_s: mean(|e| e.cluster_s),
        mean_momentum_reset_s: mean(|e| e.momentum_reset_s),
        mean_event_s,
        mean_epoch_s,
        interval,
        amortized_ratio: ratio,
        brb_share_percent: share,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brb::BrbVariant;

    fn metric(epoch: usize, epoch_s: f64) -> MetricRecord {
        MetricRecord {
            epoch,
            phase: Phase::Cluster,
            acc: Some(50.0),
            nmi: None,
            ari: None,
            intra_cd: None,
            inter_cd: None,
            silhouette: None,
            cl_change: None,
            loss_total: 1.0,
            loss_ssl: 1.0,
            loss_cluster: 0.0,
            decoder_grad_norm: 0.0,
            epoch_s,
        }
    }

    fn event(epoch: usize, total: f64) -> BrbEvent {
        BrbEvent {
            epoch,
            variant: BrbVariant::Brb,
            subsample_used: 10,
            centroids_replaced: true,
            momentum_reset_applied: true,
            reset_s: total / 4.0,
            embed_s: total / 4.0,
            cluster_s: total / 4.0,
            momentum_reset_s: total / 4.0,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let mut log = ExperimentLog::default();
        log.push(LogLine::Config {
            schema: SCHEMA_VERSION,
            config: serde_json::json!({"interval": 20, "algorithm": "dec"}),
        });
        log.push(LogLine::Metrics(metric(0, 1.5)));
        log.push(LogLine::BrbEvent(event(20, 0.4)));
        log.push(LogLine::Summary(RunSummary { epochs: 1, ..Default::default() }));
        let text = log.to_jsonl();
        let back = ExperimentLog::from_jsonl(&text).unwrap();
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.metrics().count(), 1);
        assert_eq!(back.brb_events().count(), 1);
        assert!(back.summary().is_some());
    }

    #[test]
    fn canonical_jsonl_zeroes_only_timing() {
        let mut log = ExperimentLog::default();
        let mut m = metric(3, 2.25);
        m.acc = Some(61.25);
        log.push(LogLine::Metrics(m));
        log.push(LogLine::BrbEvent(event(20, 1.0)));
        let canon = log.canonical_jsonl();
        assert!(canon.contains("\"epoch_s\":0.0"));
        assert!(canon.contains("\"reset_s\":0.0"));
        assert!(canon.contains("61.25"), "metric values survive");
        // differing timings canonicalize identically
        let mut log2 = ExperimentLog::default();
        let mut m2 = metric(3, 9.75);
        m2.acc = Some(61.25);
        log2.push(LogLine::Metrics(m2));
        log2.push(LogLine::BrbEvent(event(20, 123.0)));
        assert_eq!(log.canonical_jsonl(), log2.canonical_jsonl());
        assert_ne!(log.to_jsonl(), log2.to_jsonl());
    }

    #[test]
    fn timing_report_off_variant_share_zero() {
        let mut log = ExperimentLog::default();
        log.push(LogLine::Config {
            schema: SCHEMA_VERSION,
            config: serde_json::json!({"interval": 20}),
        });
        for e in 0..5 {
            log.push(LogLine::Metrics(metric(e, 1.0)));
        }
        let rep = timing_report(&log).unwrap();
        assert_eq!(rep.brb_share_percent, 0.0);
        assert_eq!(rep.amortized_ratio, 1.0);
    }

    #[test]
    fn timing_report_amortization_formula() {
        // BRB event 1s, clean epoch 1s, T = 20 -> share = 1/20 = 5%
        let mut log = ExperimentLog::default();
        log.push(LogLine::Config {
            schema: SCHEMA_VERSION,
            config: serde_json::json!({"interval": 20}),
        });
        for e in 0..40 {
            let is_brb = e > 0 && e % 20 == 0;
            // epoch wall time includes the BRB second on BRB epochs
            log.push(LogLine::Metrics(metric(e, if is_brb { 2.0 } else { 1.0 })));
            if is_brb {
                log.push(LogLine::BrbEvent(event(e, 1.0)));
            }
        }
        let rep = timing_report(&log).unwrap();
        assert!((rep.mean_epoch_s - 1.0).abs() < 1e-12);
        assert!((rep.mean_event_s - 1.0).abs() < 1e-12);
        assert!((rep.brb_share_percent - 5.0).abs() < 1e-9);
        assert!((rep.amortized_ratio - 1.05).abs() < 1e-12);
    }
}
