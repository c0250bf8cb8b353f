use std::fmt;

use crate::error::{Error, Result};
use crate::residue::Residue;

use super::Protein;

/// One substitution: 0-based position, wild-type and mutant residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub position: usize,
    pub wt: Residue,
    pub mt: Residue,
}

/// The substitutions that define one variant, sorted by position.
///
/// An empty set denotes the wild type itself.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MutationSet {
    sites: Vec<Site>,
}

impl MutationSet {
    /// Sort the sites and check the set invariants.
    pub fn new(mut sites: Vec<Site>) -> Result<Self> {
        sites.sort_by_key(|s| s.position);
        for w in sites.windows(2) {
            if w[0].position == w[1].position {
                return Err(Error::invalid(format!(
                    "position {} mutated twice",
                    w[0].position + 1
                )));
            }
        }
        if let Some(s) = sites.iter().find(|s| s.wt == s.mt) {
            return Err(Error::invalid(format!(
                "site {}: wild type equals mutant ({})",
                s.position + 1,
                s.wt
            )));
        }
        Ok(MutationSet { sites })
    }

    pub fn wild_type() -> Self {
        MutationSet { sites: Vec::new() }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn positions(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.position).collect()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Check the set against a target protein.
    pub fn check_against(&self, protein: &Protein) -> Result<()> {
        for s in &self.sites {
            let Some(actual) = protein.sequence.get(s.position) else {
                return Err(Error::invalid(format!(
                    "position {} (index {}) outside protein {} of length {}",
                    s.position as i64 + 1 + protein.chain_offset,
                    s.position,
                    protein.id,
                    protein.len()
                )));
            };
            if *actual != s.wt {
                return Err(Error::invalid(format!(
                    "wild-type mismatch at position {} (index {}): mutation says {}, sequence has {}",
                    s.position as i64 + 1 + protein.chain_offset,
                    s.position,
                    s.wt,
                    actual
                )));
            }
        }
        Ok(())
    }

    /// Apply the substitutions to a sequence.
    pub fn apply(&self, sequence: &[Residue]) -> Vec<Residue> {
        let mut out = sequence.to_vec();
        for s in &self.sites {
            out[s.position] = s.mt;
        }
        out
    }

    /// Render with the given numbering offset (inverse of parsing).
    pub fn to_string_with_offset(&self, offset: i64) -> String {
        self.sites
            .iter()
            .map(|s| format!("{}{}{}", s.wt, s.position as i64 + 1 + offset, s.mt))
            .collect::<Vec<_>>()
            .join(":")
    }
}

impl fmt::Display for MutationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("WT");
        }
        f.write_str(&self.to_string_with_offset(0))
    }
}

/// Strings that name the unmutated reference sequence in assay files.
pub fn is_wild_type_string(text: &str) -> bool {
    matches!(text.trim(), "" | "WT" | "wt" | "_wt" | "_WT" | "wildtype" | "wild_type")
}

/// Parse `<WT><pos><MT>` tokens joined by `:` without a sequence check.
/// Positions in the text are 1-based and shifted by `offset`.
pub fn parse_mutation_unchecked(text: &str, offset: i64) -> Result<MutationSet> {
    if is_wild_type_string(text) {
        return Ok(MutationSet::wild_type());
    }
    let mut sites = Vec::new();
    for token in text.trim().split(':') {
        let token = token.trim();
        let malformed = || Error::invalid(format!("malformed mutation token `{token}`"));
        let mut chars = token.chars();
        let wt = chars.next().and_then(Residue::from_one_letter).ok_or_else(malformed)?;
        let mt = chars.next_back().and_then(Residue::from_one_letter).ok_or_else(malformed)?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let pos: i64 = digits.parse().map_err(|_| malformed())?;
        let index = pos - 1 - offset;
        if index < 0 {
            return Err(Error::invalid(format!(
                "mutation `{token}` maps before the first residue (offset {offset})"
            )));
        }
        sites.push(Site { position: index as usize, wt, mt });
    }
    MutationSet::new(sites)
}

/// Parse a mutation string against a protein, using its numbering offset
/// and checking every wild-type letter.
pub fn parse_mutation(text: &str, protein: &Protein) -> Result<MutationSet> {
    let set = parse_mutation_unchecked(text, protein.chain_offset)?;
    set.check_against(protein)?;
    Ok(set)
}
