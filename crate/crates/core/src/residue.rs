//! The twenty standard amino-acid types and their text encodings.

use std::fmt;

/// One-letter codes in canonical index order.
pub const ALPHABET: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

const THREE_LETTER: [&str; 20] = [
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU", "MET", "ASN", "PRO",
    "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR",
];

pub const NUM_RESIDUE_TYPES: usize = 20;

/// Token id used for a masked position by the toy embedder.
pub const MASK_TOKEN: u8 = 20;

/// A residue type code in `0..20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Residue(u8);

impl Residue {
    pub fn new(code: u8) -> Option<Self> {
        ((code as usize) < NUM_RESIDUE_TYPES).then_some(Residue(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_one_letter(c: char) -> Option<Self> {
        let upper = c.to_ascii_uppercase();
        ALPHABET
            .iter()
            .position(|&a| a as char == upper)
            .map(|i| Residue(i as u8))
    }

    pub fn from_three_letter(name: &str) -> Option<Self> {
        let name = name.trim().to_ascii_uppercase();
        THREE_LETTER
            .iter()
            .position(|&t| t == name)
            .map(|i| Residue(i as u8))
    }

    pub fn one_letter(self) -> char {
        ALPHABET[self.index()] as char
    }

    pub fn three_letter(self) -> &'static str {
        THREE_LETTER[self.index()]
    }

    pub fn all() -> impl Iterator<Item = Residue> {
        (0..NUM_RESIDUE_TYPES as u8).map(Residue)
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_letter())
    }
}

/// Parse a one-letter sequence string.
pub fn parse_sequence(text: &str) -> Option<Vec<Residue>> {
    text.chars().map(Residue::from_one_letter).collect()
}

pub fn sequence_string(seq: &[Residue]) -> String {
    seq.iter().map(|r| r.one_letter()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for r in Residue::all() {
            assert_eq!(Residue::from_one_letter(r.one_letter()), Some(r));
            assert_eq!(Residue::from_three_letter(r.three_letter()), Some(r));
        }
        assert_eq!(Residue::from_one_letter('X'), None);
        assert_eq!(Residue::from_three_letter("MSE"), None);
        assert_eq!(Residue::new(20), None);
    }
}
