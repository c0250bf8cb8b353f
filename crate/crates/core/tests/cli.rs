mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use protfit::eval::{bootstrap_diff_stderr, MetricReport, RowKind};
use protfit::gvp::load_checkpoint;
use protfit::protein_io::{load_assay, write_tsv, Protein};
use protfit::scoring::parse_scores_csv;
use protfit::surface::{read_cloud, smooth_distance, SurfaceConfig};
use protfit::toy::{assay_csv, motif_corpus, random_protein, random_variants, write_corpus};
use rand::Rng;

fn protfit(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protfit"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

#[test]
fn surface_dump_lies_on_the_level_set() {
    let dir = tempfile::tempdir().unwrap();
    let p = random_protein("p", 30, &mut rng(1));
    let tsv = write(&dir.path().join("p.tsv"), &write_tsv(&p));
    let out = dir.path().join("p.surf");
    ok(protfit(&[&"surface", &tsv, &"-o", &out]));
    let cloud = read_cloud(&out).unwrap();
    let cfg = SurfaceConfig::default();
    assert!(cloud.len() >= cfg.target_points.0 && cloud.len() <= cfg.target_points.1);
    assert_eq!(cloud.feature_dim, cfg.feature_dim());
    for x in &cloud.points {
        // the dump keeps the shortest round-trip representation
        assert!((smooth_distance(*x, &p.ca_coords, cfg.smoothing) - cfg.level()).abs() < 1e-3);
    }
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("# source=p config_hash="));
}

#[test]
fn helix_dump_passes_the_level_set_check() {
    let dir = tempfile::tempdir().unwrap();
    let coords = protfit::toy::helix(24);
    let seq = (0..24).map(|i| protfit::residue::Residue::new(i % 20).unwrap()).collect();
    let p = Protein::new("helix", seq, coords, None).unwrap();
    let tsv = write(&dir.path().join("helix.tsv"), &write_tsv(&p));
    let out = dir.path().join("helix.surf");
    let run = ok(protfit(&[&"surface", &tsv, &"-o", &out]));
    let cfg = SurfaceConfig::default();
    let cloud = read_cloud(&out).unwrap();
    assert!(cloud.points.iter().all(|x| (smooth_distance(*x, &p.ca_coords, cfg.smoothing) - cfg.level()).abs() < 1e-3));
    // the resolved config is logged alongside the hash written into the dump
    let text = std::fs::read_to_string(&out).unwrap();
    let hash = text.lines().next().unwrap().split("config_hash=").nth(1).unwrap();
    let log = String::from_utf8_lossy(&run.stderr);
    assert!(log.contains(&format!("config {hash} {{")), "{log}");
}

#[test]
fn full_scale_surface_point_budget() {
    let dir = tempfile::tempdir().unwrap();
    let p = random_protein("big", 160, &mut rng(2));
    let tsv = write(&dir.path().join("big.tsv"), &write_tsv(&p));
    let out = dir.path().join("big.surf");
    ok(protfit(&[&"surface", &tsv, &"-o", &out, &"--paper-scale"]));
    let n = read_cloud(&out).unwrap().len();
    assert!((6000..=20000).contains(&n), "{n} points");
}

#[test]
fn errors_name_the_file_and_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = protfit(&[&"surface", &missing, &"-o", &dir.path().join("x.surf")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));

    let bad = write(&dir.path().join("bad.tsv"), "1\tA\t0\t0\n");
    let out = protfit(&[&"surface", &bad, &"-o", &dir.path().join("x.surf")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.tsv") && err.contains("line 1"), "{err}");

    let out = protfit(&[&"pretrain"]);
    assert_eq!(out.status.code(), Some(1));
    let cfg = write(&dir.path().join("c.toml"), "[train]\nbatch_size = 0\n");
    let out = protfit(&[&"--config", &cfg, &"surface", &bad, &"-o", &dir.path().join("x.surf")]);
    assert_eq!(out.status.code(), Some(1));
}

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
    target: Protein,
    checkpoint: PathBuf,
}

/// A small s3f corpus pretrained for a few epochs.
fn pretrained(mode: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = root.join("corpus");
    let proteins = motif_corpus(3, 24, 5);
    write_corpus(&corpus, &proteins).unwrap();
    let out = root.join("run");
    ok(protfit(&[&"--mode", &mode, &"pretrain", &corpus, &"-o", &out, &"--epochs", &"5"]));
    Run { _dir: dir, target: proteins[0].clone(), checkpoint: out.join("final.s3fc"), root }
}

#[test]
fn pretraining_is_reproducible_and_mode_aware() {
    let a = pretrained("s3f");
    let b = pretrained("s3f");
    assert_eq!(std::fs::read(&a.checkpoint).unwrap(), std::fs::read(&b.checkpoint).unwrap());
    let ck = load_checkpoint(&a.checkpoint).unwrap();
    assert!(ck.tensors.iter().any(|(n, _)| n.starts_with("surf.")));
    let log = std::fs::read_to_string(a.root.join("run").join("loss_log.csv")).unwrap();
    assert_eq!(protfit::training::parse_loss_log(&log).unwrap().len(), 5);

    let s = pretrained("s2f");
    let ck = load_checkpoint(&s.checkpoint).unwrap();
    assert!(ck.tensors.iter().all(|(n, _)| !n.starts_with("surf.")));
    assert!(ck.tensors.iter().any(|(n, _)| n.starts_with("struct.")));
}

#[test]
fn score_gating_and_ensemble() {
    let run = pretrained("s2f");
    let dir = &run.root;
    let mut r = rng(7);
    let variants = random_variants(&run.target, 30, 2, &mut r);
    let dms: Vec<f64> = (0..variants.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut csv = assay_csv(&run.target, &variants, &dms);
    csv.push_str("WT,0.0,0\n");
    let assay = write(&dir.join("assay.csv"), &csv);
    let structure = write(&dir.join("target.tsv"), &write_tsv(&run.target));
    let table = load_assay(&assay).unwrap();
    let ext: Vec<f64> = (0..table.variants.len()).map(|_| r.random_range(-5.0..5.0)).collect();
    let mut ext_csv = String::from("mutant,score\n");
    for (v, e) in table.variants.iter().zip(&ext) {
        ext_csv.push_str(&format!("{},{e:?}\n", v.mutant));
    }
    let ext_path = write(&dir.join("ext.csv"), &ext_csv);
    let out = dir.join("scores.csv");
    ok(protfit(&[
        &"score", &"--checkpoint", &run.checkpoint, &"--structure", &structure, &"--assay", &assay, &"--ensemble",
        &ext_path, &"-o", &out,
    ]));
    let rows = parse_scores_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), table.variants.len());
    assert_eq!(rows.last().unwrap().mutant, "WT");
    assert_eq!(rows.last().unwrap().score, 0.0);
    let zs = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        x.iter().map(|v| (v - m) / sd).collect::<Vec<_>>()
    };
    let ours: Vec<f64> = rows.iter().map(|r| r.score).collect();
    for ((row, a), b) in rows.iter().zip(zs(&ours)).zip(zs(&ext)) {
        assert!((row.ensemble.unwrap() - (a + b)).abs() < 1e-12);
    }

    // one residue below the confidence threshold and no baseline: usage error
    let mut low = run.target.clone();
    let site = variants[0].sites()[0].position;
    low.plddt[site] = 69.0;
    let low_path = write(&dir.join("low.tsv"), &write_tsv(&low));
    let fail = protfit(&[
        &"score", &"--checkpoint", &run.checkpoint, &"--structure", &low_path, &"--assay", &assay, &"-o",
        &dir.join("x.csv"),
    ]);
    assert_eq!(fail.status.code(), Some(1));
    // at 70 the same structure is scored by the model
    low.plddt[site] = 70.0;
    let ok_path = write(&dir.join("ok.tsv"), &write_tsv(&low));
    let again = dir.join("again.csv");
    ok(protfit(&[
        &"score", &"--checkpoint", &run.checkpoint, &"--structure", &ok_path, &"--assay", &assay, &"-o", &again,
    ]));
    let rows2 = parse_scores_csv(&std::fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(rows2.iter().map(|r| r.score).collect::<Vec<_>>(), ours);

    // shifted numbering with a matching offset scores the same variants
    let shifted = run.target.clone().with_offset(100);
    let shifted_assay = write(&dir.join("shifted.csv"), &assay_csv(&shifted, &variants, &dms));
    let out_shift = dir.join("shifted_scores.csv");
    ok(protfit(&[
        &"score", &"--checkpoint", &run.checkpoint, &"--structure", &structure, &"--assay", &shifted_assay,
        &"--offset", &"100", &"-o", &out_shift,
    ]));
    let rows3 = parse_scores_csv(&std::fs::read_to_string(&out_shift).unwrap()).unwrap();
    assert_eq!(rows3.iter().map(|r| r.score).collect::<Vec<_>>(), ours[..variants.len()]);
    let wrong = protfit(&[
        &"score", &"--checkpoint", &run.checkpoint, &"--structure", &structure, &"--assay", &shifted_assay, &"-o",
        &dir.join("z.csv"),
    ]);
    assert_eq!(wrong.status.code(), Some(2));

    let clash = protfit(&[
        &"--mode", &"s3f", &"score", &"--checkpoint", &run.checkpoint, &"--structure", &structure, &"--assay",
        &assay, &"-o", &dir.join("y.csv"),
    ]);
    assert_eq!(clash.status.code(), Some(1));
}

fn assay_file(dir: &Path, name: &str, p: &Protein, dms: &[f64], seed: u64) -> PathBuf {
    let variants = random_variants(p, dms.len(), 2, &mut rng(seed));
    write(&dir.join(format!("{name}.csv")), &assay_csv(p, &variants, dms))
}

/// Score file assigning `scores` to the assay's variants in order.
fn score_file(path: &Path, assay: &Path, scores: &[f64]) -> PathBuf {
    let table = load_assay(assay).unwrap();
    let mut s = String::from("mutant,score\n");
    for (v, x) in table.variants.iter().zip(scores) {
        s.push_str(&format!("{},{x:?}\n", v.mutant));
    }
    write(path, &s)
}

#[test]
fn eval_reports_and_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = random_protein("prot", 40, &mut rng(3));
    let dms: Vec<f64> = (0..60).map(|i| (i as f64 * 0.7).sin() + i as f64 * 0.01).collect();
    let assay = assay_file(d, "a", &p, &dms, 1);
    let scores = score_file(&d.join("a.scores.csv"), &assay, &dms);
    let out = d.join("report.csv");
    ok(protfit(&[&"eval", &"--scores", &scores, &"--assay", &assay, &"--group-by", &"depth", &"-o", &out]));
    let report = MetricReport::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let agg = report.aggregate_row().unwrap();
    assert_eq!(agg.spearman, Some(1.0));
    assert_eq!(agg.ndcg, Some(1.0));
    assert_eq!(agg.recall10, Some(1.0));
    assert_eq!(agg.auc, Some(1.0));
    let kinds: Vec<RowKind> = report.rows.iter().map(|r| r.kind).collect();
    assert_eq!(kinds, vec![RowKind::Assay, RowKind::Group, RowKind::Group, RowKind::Aggregate]);
    assert_eq!(report.rows[1].name, "1");
    assert_eq!(report.rows[1].n_variants + report.rows[2].n_variants, 60);

    // three assays against a reference model
    let mut r = rng(9);
    let (mut assays, mut ours, mut refs) = (vec![], vec![], vec![]);
    let (mut sp_ours, mut sp_ref) = (vec![], vec![]);
    for k in 0..3 {
        let y: Vec<f64> = (0..50).map(|_| r.random_range(0.0..1.0)).collect();
        let a: Vec<f64> = y.iter().map(|v| v + r.random_range(0.0..0.5)).collect();
        let b: Vec<f64> = y.iter().map(|v| v + r.random_range(0.0..2.0)).collect();
        sp_ours.push(naive_spearman(&a, &y));
        sp_ref.push(naive_spearman(&b, &y));
        let ap = assay_file(d, &format!("m{k}"), &p, &y, 10 + k);
        ours.push(score_file(&d.join(format!("m{k}.ours.csv")), &ap, &a));
        refs.push(score_file(&d.join(format!("m{k}.ref.csv")), &ap, &b));
        assays.push(ap);
    }
    let json = d.join("report.json");
    let mut args: Vec<&dyn AsRef<std::ffi::OsStr>> = vec![&"--seed", &"4", &"eval", &"--scores"];
    args.extend(ours.iter().map(|p| p as &dyn AsRef<std::ffi::OsStr>));
    args.push(&"--assay");
    args.extend(assays.iter().map(|p| p as &dyn AsRef<std::ffi::OsStr>));
    args.push(&"--reference");
    args.extend(refs.iter().map(|p| p as &dyn AsRef<std::ffi::OsStr>));
    args.extend([&"--bootstrap" as &dyn AsRef<std::ffi::OsStr>, &"--format", &"json", &"-o", &json]);
    ok(protfit(&args));
    let report = MetricReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let sig = report.significance.unwrap();
    assert_eq!(sig.n_boot, 10_000);
    let diff = sp_ours.iter().zip(&sp_ref).map(|(a, b)| a - b).sum::<f64>() / 3.0;
    assert!((sig.mean_difference - diff).abs() < 1e-12);
    let want = bootstrap_diff_stderr(&sp_ours, &sp_ref, 10_000, 4).unwrap();
    assert!((sig.stderr - want).abs() < 1e-12);
    for (row, s) in report.rows.iter().zip(&sp_ours) {
        assert!((row.spearman.unwrap() - s).abs() < 1e-12);
    }
}

#[test]
fn embed_pack_writes_tagged_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(&dir.path().join("m.txt"), "# 3 x 2\n1 2\n3 4\n\n5 6\n");
    let out = dir.path().join("m.s3fe");
    ok(protfit(&[&"embed-pack", &m, &"-o", &out, &"--mask", &"2,0"]));
    let e = protfit::protein_io::load_embeddings(&out).unwrap();
    assert_eq!(e.n_residues(), 3);
    assert_eq!(e.context_tag, protfit::protein_io::context_tag_for(&[0, 2]));
    let fail = protfit(&[&"embed-pack", &m, &"-o", &out, &"--mask", &"3"]);
    assert_eq!(fail.status.code(), Some(2));
}
