use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AssayVariant {
    pub mutant: String,
    pub dms_score: f64,
    pub dms_bin: Option<u8>,
    /// Any additional columns, keyed by header name (used for grouping).
    pub extra: BTreeMap<String, String>,
}

/// Variants of one protein with their experimental scores, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct AssayTable {
    pub protein_id: String,
    pub variants: Vec<AssayVariant>,
    pub has_bins: bool,
}

impl AssayTable {
    pub fn scores(&self) -> Vec<f64> {
        self.variants.iter().map(|v| v.dms_score).collect()
    }

    pub fn mutants(&self) -> Vec<&str> {
        self.variants.iter().map(|v| v.mutant.as_str()).collect()
    }

    /// Binary labels: the supplied bins, or a median split of the scores
    /// (strictly above the median is positive) when the assay has none.
    pub fn labels(&self) -> Vec<u8> {
        if self.has_bins {
            return self.variants.iter().map(|v| v.dms_bin.unwrap_or(0)).collect();
        }
        let scores = self.scores();
        let m = crate::eval::median(&scores);
        scores.iter().map(|&s| u8::from(s > m)).collect()
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

pub fn parse_assay<R: Read>(input: R, protein_id: &str) -> Result<AssayTable> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mutant_col = col("mutant").ok_or_else(|| Error::Format("assay: missing column `mutant`".into()))?;
    let score_col =
        col("DMS_score").ok_or_else(|| Error::Format("assay: missing column `DMS_score`".into()))?;
    let bin_col = col("DMS_score_bin");

    let mut variants = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let field = |c: usize| rec.get(c).unwrap_or("");
        let raw = field(score_col);
        let dms_score: f64 = raw
            .parse()
            .map_err(|_| Error::parse(line, format!("unparseable DMS_score `{raw}`")))?;
        if !dms_score.is_finite() {
            return Err(Error::parse(line, format!("non-finite DMS_score `{raw}`")));
        }
        let dms_bin = match bin_col {
            None => None,
            Some(c) => {
                let raw = field(c);
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::parse(line, format!("unparseable DMS_score_bin `{raw}`")))?;
                if v != 0.0 && v != 1.0 {
                    return Err(Error::parse(line, format!("DMS_score_bin must be 0 or 1, got `{raw}`")));
                }
                Some(v as u8)
            }
        };
        let extra = headers
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != mutant_col && *c != score_col && Some(*c) != bin_col)
            .map(|(c, h)| (h.to_string(), field(c).to_string()))
            .collect();
        variants.push(AssayVariant { mutant: field(mutant_col).to_string(), dms_score, dms_bin, extra });
    }
    Ok(AssayTable { protein_id: protein_id.to_string(), variants, has_bins: bin_col.is_some() })
}

/// Load an assay CSV; the protein id is the file stem.
pub fn load_assay(path: &Path) -> Result<AssayTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("assay");
    parse_assay(file, id).map_err(|e| e.in_file(path))
}

pub fn parse_external_scores<R: Read>(input: R) -> Result<HashMap<String, f64>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let mutant_col = headers
        .iter()
        .position(|h| h == "mutant")
        .ok_or_else(|| Error::Format("score file: missing column `mutant`".into()))?;
    let score_col = headers
        .iter()
        .position(|h| h == "score")
        .ok_or_else(|| Error::Format("score file: missing column `score`".into()))?;
    let mut map = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let key = rec.get(mutant_col).unwrap_or("").to_string();
        let raw = rec.get(score_col).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::parse(line, format!("unparseable score `{raw}`")))?;
        if !v.is_finite() {
            return Err(Error::parse(line, format!("non-finite score for `{key}`")));
        }
        if map.insert(key.clone(), v).is_some() {
            return Err(Error::parse(line, format!("duplicate mutant `{key}`")));
        }
    }
    Ok(map)
}

pub fn load_external_scores(path: &Path) -> Result<HashMap<String, f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_external_scores(file).map_err(|e| e.in_file(path))
}
