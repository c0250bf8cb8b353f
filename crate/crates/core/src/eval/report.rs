use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, mcc, ndcg, spearman, top_fraction_recall, Threshold};
use crate::error::{Error, Result};

/// Row kinds in a report, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Assay,
    Group,
    Aggregate,
}

/// Metrics of one assay, one breakdown group, or the aggregate. A metric is
/// `None` when it is undefined on the input (single class, no rank
/// variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub kind: RowKind,
    pub name: String,
    pub n_variants: usize,
    pub spearman: Option<f64>,
    pub auc: Option<f64>,
    pub mcc: Option<f64>,
    pub ndcg: Option<f64>,
    pub recall10: Option<f64>,
}

impl MetricRow {
    pub fn values(&self) -> [Option<f64>; 5] {
        [self.spearman, self.auc, self.mcc, self.ndcg, self.recall10]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub metric: String,
    pub reference: String,
    pub mean_difference: f64,
    pub stderr: f64,
    pub n_boot: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config_hash: String,
    pub rows: Vec<MetricRow>,
    pub significance: Option<Significance>,
}

pub const RECALL_FRACTION: f64 = 0.1;

/// All five metrics of one scored assay.
pub fn evaluate_assay(name: &str, kind: RowKind, scores: &[f64], dms: &[f64], labels: &[u8]) -> Result<MetricRow> {
    if scores.len() != dms.len() || scores.len() != labels.len() {
        return Err(Error::invalid(format!("assay {name}: scores, DMS values and labels differ in length")));
    }
    if scores.is_empty() {
        return Err(Error::invalid(format!("assay {name}: no variants")));
    }
    Ok(MetricRow {
        kind,
        name: name.to_string(),
        n_variants: scores.len(),
        spearman: spearman(scores, dms).ok(),
        auc: auc(scores, labels).ok(),
        mcc: mcc(scores, labels, Threshold::Median).ok(),
        ndcg: ndcg(scores, dms).ok(),
        recall10: top_fraction_recall(scores, dms, RECALL_FRACTION).ok(),
    })
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Unweighted mean over rows of each metric, skipping undefined entries.
pub fn aggregate(name: &str, kind: RowKind, rows: &[MetricRow]) -> MetricRow {
    let col = |k: usize| mean_defined(rows.iter().map(|r| r.values()[k]));
    MetricRow {
        kind,
        name: name.to_string(),
        n_variants: rows.iter().map(|r| r.n_variants).sum(),
        spearman: col(0),
        auc: col(1),
        mcc: col(2),
        ndcg: col(3),
        recall10: col(4),
    }
}

/// One scored assay plus optional per-variant group keys.
#[derive(Debug, Clone)]
pub struct ScoredAssay {
    pub name: String,
    pub scores: Vec<f64>,
    pub dms: Vec<f64>,
    pub labels: Vec<u8>,
    pub groups: Option<Vec<String>>,
}

/// Per-assay rows, one row per group key (mean over the assays containing
/// it), and the unweighted aggregate over assays.
pub fn build_report(assays: &[ScoredAssay], config_hash: &str) -> Result<MetricReport> {
    if assays.is_empty() {
        return Err(Error::invalid("report needs at least one assay"));
    }
    let mut rows = Vec::new();
    let mut per_group: BTreeMap<String, Vec<MetricRow>> = BTreeMap::new();
    for a in assays {
        rows.push(evaluate_assay(&a.name, RowKind::Assay, &a.scores, &a.dms, &a.labels)?);
        if let Some(keys) = &a.groups {
            let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, k) in keys.iter().enumerate() {
                members.entry(k.as_str()).or_default().push(i);
            }
            for (k, idx) in members {
                let pick = |xs: &[f64]| idx.iter().map(|&i| xs[i]).collect::<Vec<_>>();
                let labels: Vec<u8> = idx.iter().map(|&i| a.labels[i]).collect();
                let row = evaluate_assay(k, RowKind::Group, &pick(&a.scores), &pick(&a.dms), &labels)?;
                per_group.entry(k.to_string()).or_default().push(row);
            }
        }
    }
    let agg = aggregate("all", RowKind::Aggregate, &rows);
    for (k, g) in per_group {
        rows.push(aggregate(&k, RowKind::Group, &g));
    }
    rows.push(agg);
    Ok(MetricReport { config_hash: config_hash.to_string(), rows, significance: None })
}

const CSV_HEADER: [&str; 8] = ["kind", "name", "n_variants", "spearman", "auc", "mcc", "ndcg", "recall10"];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl MetricReport {
    pub fn aggregate_row(&self) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.kind == RowKind::Aggregate)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = Vec::new();
        writeln!(out, "# config_hash={}", self.config_hash).expect("write to memory");
        if let Some(s) = &self.significance {
            writeln!(
                out,
                "# significance metric={} reference={} mean_difference={:?} stderr={:?} n_boot={} seed={}",
                s.metric, s.reference, s.mean_difference, s.stderr, s.n_boot, s.seed
            )
            .expect("write to memory");
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let kind = match r.kind {
                RowKind::Assay => "assay",
                RowKind::Group => "group",
                RowKind::Aggregate => "aggregate",
            };
            let mut rec = vec![kind.to_string(), r.name.clone(), r.n_variants.to_string()];
            rec.extend(r.values().iter().map(|v| fmt_opt(*v)));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii output"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parse the output of [`MetricReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut config_hash = String::new();
        let mut significance = None;
        for line in text.lines().filter(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(h) = body.strip_prefix("config_hash=") {
                config_hash = h.to_string();
            } else if let Some(rest) = body.strip_prefix("significance ") {
                let kv: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|t| t.split_once('=')).collect();
                let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::Format(format!("significance line lacks `{k}`")));
                let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Format(format!("bad `{k}`"))) };
                significance = Some(Significance {
                    metric: get("metric")?.to_string(),
                    reference: get("reference")?.to_string(),
                    mean_difference: num("mean_difference")?,
                    stderr: num("stderr")?,
                    n_boot: num("n_boot")? as usize,
                    seed: num("seed")? as u64,
                });
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let kind = match field(0) {
                "assay" => RowKind::Assay,
                "group" => RowKind::Group,
                "aggregate" => RowKind::Aggregate,
                other => return Err(Error::Format(format!("unknown row kind `{other}`"))),
            };
            let opt = |i: usize| -> Result<Option<f64>> {
                let f = field(i);
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse().map(Some).map_err(|_| Error::Format(format!("bad number `{f}`")))
                }
            };
            rows.push(MetricRow {
                kind,
                name: field(1).to_string(),
                n_variants: field(2).parse().map_err(|_| Error::Format("bad n_variants".into()))?,
                spearman: opt(3)?,
                auc: opt(4)?,
                mcc: opt(5)?,
                ndcg: opt(6)?,
                recall10: opt(7)?,
            });
        }
        Ok(MetricReport { config_hash, rows, significance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assay(name: &str, scores: Vec<f64>, dms: Vec<f64>) -> ScoredAssay {
        let m = super::super::metrics::median(&dms);
        let labels = dms.iter().map(|&d| u8::from(d > m)).collect();
        ScoredAssay { name: name.into(), scores, dms, labels, groups: None }
    }

    #[test]
    fn single_assay_aggregate_equals_row() {
        let r = build_report(&[assay("a", vec![1.0, 3.0, 2.0, 4.0], vec![1.0, 2.0, 3.0, 4.0])], "h").unwrap();
        let agg = r.aggregate_row().unwrap();
        assert_eq!(agg.values(), r.rows[0].values());
    }

    #[test]
    fn csv_round_trip() {
        let mut a = assay("a", vec![1.0, 3.0, 2.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]);
        a.groups = Some(vec!["1".into(), "1".into(), "2".into(), "2".into()]);
        let mut r = build_report(&[a], "abc").unwrap();
        r.significance = Some(Significance {
            metric: "spearman".into(),
            reference: "b".into(),
            mean_difference: 0.125,
            stderr: 0.01,
            n_boot: 10,
            seed: 3,
        });
        let back = MetricReport::from_csv(&r.to_csv().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(MetricReport::from_json(&back.to_json().unwrap()).unwrap(), r);
    }
}
