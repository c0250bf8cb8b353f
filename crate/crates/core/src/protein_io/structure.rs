use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::residue::Residue;

/// A single-chain protein reduced to one alpha carbon per residue.
#[derive(Debug, Clone, PartialEq)]
pub struct Protein {
    pub id: String,
    pub sequence: Vec<Residue>,
    /// Alpha-carbon coordinates in Å.
    pub ca_coords: Vec<[f64; 3]>,
    /// Per-residue structure confidence in `[0, 100]`.
    pub plddt: Vec<f64>,
    /// Shift between mutation-string numbering and sequence indices.
    pub chain_offset: i64,
}

impl Protein {
    /// Build a protein, checking the length and finiteness invariants.
    /// Missing confidence values default to 100.
    pub fn new(
        id: impl Into<String>,
        sequence: Vec<Residue>,
        ca_coords: Vec<[f64; 3]>,
        plddt: Option<Vec<f64>>,
    ) -> Result<Self> {
        let plddt = plddt.unwrap_or_else(|| vec![100.0; sequence.len()]);
        let p = Protein { id: id.into(), sequence, ca_coords, plddt, chain_offset: 0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sequence.len();
        if self.ca_coords.len() != n || self.plddt.len() != n {
            return Err(Error::invalid(format!(
                "protein {}: sequence length {n}, {} coordinates, {} confidence values",
                self.id,
                self.ca_coords.len(),
                self.plddt.len()
            )));
        }
        if self.ca_coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("protein {}: non-finite coordinate", self.id)));
        }
        if self.plddt.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 100.0) {
            return Err(Error::invalid(format!("protein {}: confidence outside [0, 100]", self.id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn with_offset(mut self, offset: i64) -> Self {
        self.chain_offset = offset;
        self
    }

    /// Apply `x -> R x + t` to every coordinate.
    pub fn transformed(&self, rot: &[[f64; 3]; 3], shift: [f64; 3]) -> Protein {
        let mut p = self.clone();
        for c in &mut p.ca_coords {
            *c = crate::geometry::rigid_apply(rot, shift, *c);
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureFormat {
    /// Fixed-column PDB, ATOM records with atom name CA only.
    PdbMin,
    /// Tab-separated `index, one-letter code, x, y, z, plddt`.
    Tsv,
}

impl StructureFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pdb") || e.eq_ignore_ascii_case("ent") => {
                StructureFormat::PdbMin
            }
            _ => StructureFormat::Tsv,
        }
    }
}

impl FromStr for StructureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pdb-min" | "pdb" => Ok(StructureFormat::PdbMin),
            "tsv" => Ok(StructureFormat::Tsv),
            other => Err(Error::Config(format!("unknown structure format `{other}`"))),
        }
    }
}

pub fn parse_structure(bytes: &[u8], format: StructureFormat, id: &str) -> Result<Protein> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Format(format!("structure is not valid UTF-8: {e}")))?;
    match format {
        StructureFormat::PdbMin => parse_pdb_min(text, id),
        StructureFormat::Tsv => parse_tsv(text, id),
    }
}

/// Read a structure file; the protein id is the file stem.
pub fn load_structure(path: &Path, format: Option<StructureFormat>) -> Result<Protein> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = format.unwrap_or_else(|| StructureFormat::from_path(path));
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("protein")
        .to_string();
    parse_structure(&bytes, format, &id).map_err(|e| e.in_file(path))
}

fn column(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        return "";
    }
    line.get(start..end).unwrap_or("").trim()
}

fn parse_f64(field: &str, line_no: usize, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(line_no, format!("cannot parse {what} `{field}`")))
}

fn parse_pdb_min(text: &str, id: &str) -> Result<Protein> {
    let mut sequence = Vec::new();
    let mut coords = Vec::new();
    let mut plddt = Vec::new();
    let mut seen = HashSet::new();
    let mut chain: Option<String> = None;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM") || column(line, 12, 16) != "CA" {
            continue;
        }
        let alt = column(line, 16, 17);
        if !(alt.is_empty() || alt == "A") {
            continue;
        }
        let chain_id = column(line, 21, 22).to_string();
        match &chain {
            None => chain = Some(chain_id),
            Some(c) if *c != chain_id => continue,
            Some(_) => {}
        }
        let res_name = column(line, 17, 20);
        let residue = Residue::from_three_letter(res_name)
            .ok_or_else(|| Error::parse(line_no, format!("unknown residue code `{res_name}`")))?;
        let res_key = (column(line, 22, 26).to_string(), column(line, 26, 27).to_string());
        if !seen.insert(res_key.clone()) {
            return Err(Error::parse(
                line_no,
                format!("duplicate residue index {}{}", res_key.0, res_key.1),
            ));
        }
        let x = parse_f64(column(line, 30, 38), line_no, "x coordinate")?;
        let y = parse_f64(column(line, 38, 46), line_no, "y coordinate")?;
        let z = parse_f64(column(line, 46, 54), line_no, "z coordinate")?;
        let b = column(line, 60, 66);
        let b = if b.is_empty() { 100.0 } else { parse_f64(b, line_no, "B-factor")? };
        sequence.push(residue);
        coords.push([x, y, z]);
        plddt.push(b);
    }
    if sequence.is_empty() {
        return Err(Error::Format("no alpha carbons".into()));
    }
    Protein::new(id, sequence, coords, Some(plddt))
}

fn parse_tsv(text: &str, id: &str) -> Result<Protein> {
    let mut sequence = Vec::new();
    let mut coords = Vec::new();
    let mut plddt = Vec::new();
    let mut seen = HashSet::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(Error::parse(
                line_no,
                format!("expected 5 or 6 tab-separated columns, found {}", fields.len()),
            ));
        }
        let index: i64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad residue index `{}`", fields[0])))?;
        if !seen.insert(index) {
            return Err(Error::parse(line_no, format!("duplicate residue index {index}")));
        }
        let mut chars = fields[1].chars();
        let residue = match (chars.next(), chars.next()) {
            (Some(c), None) => Residue::from_one_letter(c),
            _ => None,
        }
        .ok_or_else(|| Error::parse(line_no, format!("unknown residue code `{}`", fields[1])))?;
        let x = parse_f64(fields[2], line_no, "x coordinate")?;
        let y = parse_f64(fields[3], line_no, "y coordinate")?;
        let z = parse_f64(fields[4], line_no, "z coordinate")?;
        let p = match fields.get(5) {
            Some(f) if !f.is_empty() => parse_f64(f, line_no, "plddt")?,
            _ => 100.0,
        };
        sequence.push(residue);
        coords.push([x, y, z]);
        plddt.push(p);
    }
    if sequence.is_empty() {
        return Err(Error::Format("no alpha carbons".into()));
    }
    Protein::new(id, sequence, coords, Some(plddt))
}

/// Serialize to the tsv structure format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_tsv(protein: &Protein) -> String {
    let mut out = format!("# id={}\n", protein.id);
    for (i, ((r, c), p)) in protein
        .sequence
        .iter()
        .zip(&protein.ca_coords)
        .zip(&protein.plddt)
        .enumerate()
    {
        let _ = writeln!(out, "{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}", i + 1, r, c[0], c[1], c[2], p);
    }
    out
}
