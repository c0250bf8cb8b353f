//! Synthetic backbones, corpora and assays for desk-scale runs.
//!
//! The motif corpus ties every interior residue type to the bend angle of
//! the chain at that residue, so the types are recoverable from geometry
//! alone.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{add, cross, dot, normalize, norm, scale, sub, Vec3};
use crate::protein_io::{write_tsv, MutationSet, Protein, Site};
use crate::residue::Residue;

/// Alpha-carbon spacing along the chain, Å.
pub const CA_BOND: f64 = 3.8;

/// Bend-angle class centers (degrees) of the motif corpus.
pub const MOTIF_ANGLES: [f64; 4] = [85.0, 100.0, 115.0, 130.0];
/// Residue type of each bend class, one-letter codes.
pub const MOTIF_TYPES: [char; 4] = ['A', 'D', 'L', 'S'];
/// Type placed at the two chain ends, which have no bend angle.
pub const MOTIF_END: char = 'G';

/// Place the atom after `c` given the previous two, a bend angle at `c`
/// and a dihedral about `b -> c`.
fn place(a: Vec3, b: Vec3, c: Vec3, bend: f64, torsion: f64) -> Vec3 {
    let bc = normalize(sub(c, b)).expect("distinct chain atoms");
    let n = normalize(cross(sub(b, a), bc)).unwrap_or_else(|| {
        let axis = if bc[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        normalize(cross(bc, axis)).expect("non-parallel axis")
    });
    let m = cross(n, bc);
    let d = [
        -CA_BOND * bend.cos(),
        CA_BOND * bend.sin() * torsion.cos(),
        CA_BOND * bend.sin() * torsion.sin(),
    ];
    add(add(add(c, scale(bc, d[0])), scale(m, d[1])), scale(n, d[2]))
}

/// Chain whose bend angle at atom `i` (for `1 <= i < n - 1`) is
/// `bends[i - 1]` radians, with the given dihedrals.
pub fn chain_from_angles(bends: &[f64], torsions: &[f64]) -> Vec<Vec3> {
    let n = bends.len() + 2;
    let mut x: Vec<Vec3> = vec![[0.0; 3], [CA_BOND, 0.0, 0.0]];
    if n >= 3 {
        let b = bends[0];
        x.push([CA_BOND - CA_BOND * b.cos(), CA_BOND * b.sin(), 0.0]);
    }
    for i in 3..n {
        let t = torsions.get(i - 3).copied().unwrap_or(0.0);
        let next = place(x[i - 3], x[i - 2], x[i - 1], bends[i - 2], t);
        x.push(next);
    }
    x
}

/// Bend angle at every interior atom, radians.
pub fn bend_angles(x: &[Vec3]) -> Vec<f64> {
    (1..x.len().saturating_sub(1))
        .map(|i| {
            let u = sub(x[i - 1], x[i]);
            let v = sub(x[i + 1], x[i]);
            (dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos()
        })
        .collect()
}

/// Ideal alpha-carbon helix: radius 2.3 Å, rise 1.5 Å, 100 degrees per residue.
pub fn helix(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let t = (100.0f64).to_radians() * i as f64;
            [2.3 * t.cos(), 2.3 * t.sin(), 1.5 * i as f64]
        })
        .collect()
}

/// Chain with bend angles uniform in `[80, 140]` degrees and uniform
/// dihedrals.
pub fn random_coil<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec3> {
    let bends: Vec<f64> = (0..n.saturating_sub(2)).map(|_| rng.random_range(80.0f64..140.0).to_radians()).collect();
    let tors: Vec<f64> = (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
    chain_from_angles(&bends, &tors)
}

fn residue(c: char) -> Residue {
    Residue::from_one_letter(c).expect("motif letters are valid")
}

/// Protein with uniformly random residue types on a random coil.
pub fn random_protein<R: Rng + ?Sized>(id: &str, n: usize, rng: &mut R) -> Protein {
    let coords = random_coil(n, rng);
    let seq = (0..n).map(|_| Residue::new(rng.random_range(0..20)).expect("in range")).collect();
    Protein::new(id, seq, coords, None).expect("generated protein is valid")
}

/// Residue type implied by a bend angle (radians): the nearest class center.
pub fn motif_type(bend: f64) -> Residue {
    let deg = bend.to_degrees();
    let k = (0..MOTIF_ANGLES.len())
        .min_by(|&a, &b| (MOTIF_ANGLES[a] - deg).abs().total_cmp(&(MOTIF_ANGLES[b] - deg).abs()))
        .expect("nonempty");
    residue(MOTIF_TYPES[k])
}

/// One motif protein: bend classes drawn uniformly with ±2 degree jitter,
/// dihedrals near a compact 50 degrees with ±40 degree spread.
pub fn motif_protein<R: Rng + ?Sized>(id: &str, n: usize, rng: &mut R) -> Protein {
    assert!(n >= 3, "motif proteins need at least 3 residues");
    let bends: Vec<f64> = (0..n - 2)
        .map(|_| {
            let c = MOTIF_ANGLES[rng.random_range(0..MOTIF_ANGLES.len())];
            (c + rng.random_range(-2.0..2.0)).to_radians()
        })
        .collect();
    let tors: Vec<f64> = (0..n).map(|_| rng.random_range(10.0f64..90.0).to_radians()).collect();
    let coords = chain_from_angles(&bends, &tors);
    let mut seq = vec![residue(MOTIF_END); n];
    for (i, b) in bend_angles(&coords).into_iter().enumerate() {
        seq[i + 1] = motif_type(b);
    }
    Protein::new(id, seq, coords, None).expect("generated protein is valid")
}

pub fn motif_corpus(count: usize, len: usize, seed: u64) -> Vec<Protein> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| motif_protein(&format!("motif_{i:03}"), len, &mut rng)).collect()
}

/// Write each protein as `<id>.tsv` under `dir`.
pub fn write_corpus(dir: &Path, proteins: &[Protein]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for p in proteins {
        let path = dir.join(format!("{}.tsv", p.id));
        std::fs::write(&path, write_tsv(p)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// `count` distinct random variants with 1 to `max_depth` substitutions.
pub fn random_variants<R: Rng + ?Sized>(protein: &Protein, count: usize, max_depth: usize, rng: &mut R) -> Vec<MutationSet> {
    let n = protein.len();
    let mut out: Vec<MutationSet> = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while out.len() < count && attempts < count * 100 {
        attempts += 1;
        let depth = rng.random_range(1..=max_depth.min(n).max(1));
        let positions = rand::seq::index::sample(rng, n, depth).into_vec();
        let sites = positions
            .into_iter()
            .map(|p| {
                let wt = protein.sequence[p];
                let mut mt = Residue::new(rng.random_range(0..19)).expect("in range");
                if mt.code() >= wt.code() {
                    mt = Residue::new(mt.code() + 1).expect("in range");
                }
                Site { position: p, wt, mt }
            })
            .collect();
        let set = MutationSet::new(sites).expect("distinct positions, wt != mt");
        let key = set.to_string_with_offset(protein.chain_offset);
        if seen.insert(key) {
            out.push(set);
        }
    }
    out
}

/// Assay CSV text (`mutant,DMS_score[,depth]`).
pub fn assay_csv(protein: &Protein, variants: &[MutationSet], scores: &[f64]) -> String {
    let mut s = String::from("mutant,DMS_score,depth\n");
    for (v, y) in variants.iter().zip(scores) {
        s.push_str(&format!("{},{y:?},{}\n", v.to_string_with_offset(protein.chain_offset), v.len()));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    #[test]
    fn chain_has_requested_geometry() {
        let bends = [1.6, 2.0, 1.8, 2.2];
        let tors = [0.5, -1.0, 2.0];
        let x = chain_from_angles(&bends, &tors);
        assert_eq!(x.len(), 6);
        for w in x.windows(2) {
            assert!((dist(w[0], w[1]) - CA_BOND).abs() < 1e-12);
        }
        for (got, want) in bend_angles(&x).iter().zip(bends) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn motif_types_follow_bends() {
        let p = motif_protein("m", 30, &mut ChaCha8Rng::seed_from_u64(4));
        let bends = bend_angles(&p.ca_coords);
        for i in 1..p.len() - 1 {
            assert_eq!(p.sequence[i], motif_type(bends[i - 1]));
        }
        assert_eq!(p.sequence[0].one_letter(), MOTIF_END);
    }

    #[test]
    fn variants_are_distinct_and_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_protein("r", 25, &mut rng);
        let vs = random_variants(&p, 60, 2, &mut rng);
        assert_eq!(vs.len(), 60);
        for v in &vs {
            v.check_against(&p).unwrap();
        }
    }
}
