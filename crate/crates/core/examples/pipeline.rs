//! The four batch commands chained on a toy corpus: surface dumps,
//! pre-training, scoring a synthetic assay, and the metric report.

use std::path::Path;

use protfit::cli::main_with_args;
use protfit::toy::{assay_csv, motif_corpus, random_variants, write_corpus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn protfit(args: &[&str]) {
    println!("$ protfit {}", args.join(" "));
    let mut argv = vec!["protfit"];
    argv.extend_from_slice(args);
    let code = main_with_args(argv);
    assert_eq!(code, 0, "command failed");
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let corpus = dir.path().join("corpus");
    let proteins = motif_corpus(8, 40, 11);
    write_corpus(&corpus, &proteins).expect("write corpus");

    for p in &proteins {
        let tsv = corpus.join(format!("{}.tsv", p.id));
        let surf = corpus.join(format!("{}.surf", p.id));
        protfit(&["surface", s(&tsv), "-o", s(&surf)]);
    }
    let run = dir.path().join("run");
    protfit(&["pretrain", s(&corpus), "-o", s(&run), "--epochs", "10"]);

    let target = &proteins[0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let variants = random_variants(target, 100, 2, &mut rng);
    let dms: Vec<f64> = (0..variants.len()).map(|i| (i as f64 * 0.37).sin()).collect();
    let assay = dir.path().join(format!("{}.csv", target.id));
    std::fs::write(&assay, assay_csv(target, &variants, &dms)).expect("write assay");

    let scores = dir.path().join("scores.csv");
    let structure = corpus.join(format!("{}.tsv", target.id));
    let cloud = corpus.join(format!("{}.surf", target.id));
    protfit(&[
        "score",
        "--checkpoint",
        s(&run.join("final.s3fc")),
        "--structure",
        s(&structure),
        "--cloud",
        s(&cloud),
        "--assay",
        s(&assay),
        "-o",
        s(&scores),
    ]);
    let report = dir.path().join("report.csv");
    protfit(&["eval", "--scores", s(&scores), "--assay", s(&assay), "--group-by", "depth", "-o", s(&report)]);
    print!("{}", std::fs::read_to_string(&report).expect("report"));
}
