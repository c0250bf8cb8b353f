use std::fmt::Write as _;

use super::score::{Provenance, VariantScore};
use crate::error::{Error, Result};

/// One row of a scores file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub mutant: String,
    pub score: f64,
    pub provenance: Provenance,
    /// Z-score sum with an external score list, when ensembling.
    pub ensemble: Option<f64>,
}

/// `mutant,score,provenance[,ensemble]` under a `# config_hash=` line.
pub fn write_scores_csv(scores: &[VariantScore], ensemble: Option<&[f64]>, config_hash: &str) -> Result<String> {
    if let Some(e) = ensemble {
        if e.len() != scores.len() {
            return Err(Error::invalid("ensemble column length differs from the scores"));
        }
    }
    let mut out = format!("# config_hash={config_hash}\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["mutant", "score", "provenance"];
    if ensemble.is_some() {
        header.push("ensemble");
    }
    w.write_record(&header)?;
    for (i, s) in scores.iter().enumerate() {
        let mut rec = vec![s.mutant.clone(), format!("{:?}", s.score), s.provenance.as_str().to_string()];
        if let Some(e) = ensemble {
            rec.push(format!("{:?}", e[i]));
        }
        w.write_record(&rec)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write!(out, "{}", String::from_utf8(body).expect("utf-8 fields")).expect("write to string");
    Ok(out)
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mutant = col("mutant").ok_or_else(|| Error::Format("scores: missing column `mutant`".into()))?;
    let score = col("score").ok_or_else(|| Error::Format("scores: missing column `score`".into()))?;
    let prov = col("provenance");
    let ens = col("ensemble");
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let num = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.trim().parse().map_err(|_| Error::parse(line, format!("bad number `{raw}`")))
        };
        rows.push(ScoreRow {
            mutant: rec.get(mutant).unwrap_or("").to_string(),
            score: num(score)?,
            provenance: match prov {
                Some(c) => Provenance::parse(rec.get(c).unwrap_or("")).map_err(|e| Error::parse(line, e.to_string()))?,
                None => Provenance::Model,
            },
            ensemble: ens.map(num).transpose()?,
        });
    }
    Ok(rows)
}
