use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::config::{config_hash, RunConfig};
use super::{EmbedPackArgs, EvalArgs, PretrainArgs, ReportFormat, ScoreArgs, SurfaceArgs};
use crate::error::{Error, Result};
use crate::eval::{bootstrap_diff_stderr, build_report, spearman, ScoredAssay, Significance};
use crate::gvp::{load_checkpoint, EmbedderSpec, Mode};
use crate::protein_io::{
    context_tag_for, load_assay, load_external_scores, load_structure, parse_mutation_unchecked, save_embeddings,
    ResidueEmbeddings,
};
use crate::scoring::{ensemble_zscores, parse_scores_csv, score_assay, write_scores_csv, EmbeddingSource, EmbeddingStore};
use crate::surface::{build_surface, read_cloud, write_cloud, SurfaceConfig};
use crate::training::{pretrain, OptimizerKind, PretrainOptions};

/// Hash of the fully resolved run, which is also logged to stderr.
fn hash_of(command: &str, args: &impl Serialize, cfg: &RunConfig) -> String {
    let resolved = json!({ "command": command, "args": args, "config": cfg });
    let hash = config_hash(&resolved);
    eprintln!("config {hash} {resolved}");
    hash
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn run_surface(args: &SurfaceArgs, cfg: RunConfig) -> Result<String> {
    let mut cfg = cfg;
    if args.paper_scale {
        cfg.surface = SurfaceConfig { seed: cfg.surface.seed, ..SurfaceConfig::full_scale() };
    }
    let cfg = cfg.finalize()?;
    let hash = hash_of("surface", args, &cfg);
    let protein = load_structure(&args.structure, None)?;
    let cloud = build_surface(&protein, &cfg.surface).map_err(|e| e.in_file(&args.structure))?;
    write_cloud(&args.out, &cloud, &hash)?;
    Ok(format!("{} surface points -> {}", cloud.len(), args.out.display()))
}

pub fn run_pretrain(args: &PretrainArgs, cfg: RunConfig) -> Result<String> {
    let mut cfg = cfg;
    let t = &mut cfg.train;
    if let Some(e) = args.epochs {
        t.epochs = e;
    }
    if let Some(b) = args.batch_size {
        t.batch_size = b;
    }
    if let Some(lr) = args.lr {
        t.optimizer.learning_rate = lr;
    }
    if args.sgd {
        t.optimizer.kind = OptimizerKind::Sgd;
    }
    if let Some(k) = args.checkpoint_every {
        t.checkpoint_every = k;
    }
    let cfg = cfg.finalize()?;
    let hash = hash_of("pretrain", args, &cfg);
    let opts = PretrainOptions {
        model: cfg.model.clone(),
        train: cfg.train.clone(),
        surface: cfg.surface.clone(),
        out_dir: args.out.clone(),
        resume: args.resume.clone(),
        config_hash: hash,
    };
    let out = pretrain(&args.corpus, &opts)?;
    let last = out
        .history
        .last()
        .map(|h| format!(", final loss {:.4}, masked accuracy {:.3}", h.loss, h.masked_acc))
        .unwrap_or_default();
    Ok(format!("{} epochs{last} -> {}", out.trainer.epoch, out.final_checkpoint.display()))
}

pub fn run_score(args: &ScoreArgs, cfg: RunConfig, mode_flag: Option<Mode>) -> Result<String> {
    let mut cfg = cfg;
    if let Some(t) = args.plddt_threshold {
        cfg.scoring.plddt_threshold = t;
    }
    if args.per_site_gating {
        cfg.scoring.per_site = true;
    }
    let ck = load_checkpoint(&args.checkpoint)?;
    let model = ck.to_model().map_err(|e| e.in_file(&args.checkpoint))?;
    if let Some(m) = mode_flag.filter(|&m| m != model.config.mode) {
        return Err(Error::Config(format!("--mode {m} conflicts with the checkpoint's mode {}", model.config.mode)));
    }
    cfg.model = model.config.clone();
    let cfg = cfg.finalize()?;
    let hash = hash_of("score", args, &cfg);

    let protein = load_structure(&args.structure, None)?.with_offset(args.offset);
    let assay = load_assay(&args.assay)?;
    let cloud = if model.config.mode.uses_surface() {
        Some(match &args.cloud {
            Some(p) => read_cloud(p)?,
            None => build_surface(&protein, &cfg.surface).map_err(|e| e.in_file(&args.structure))?,
        })
    } else {
        None
    };
    let store;
    let src = match model.config.embedder {
        EmbedderSpec::Toy { .. } => EmbeddingSource::Toy,
        EmbedderSpec::File { .. } => {
            let dir = args
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("the checkpoint uses file embeddings; pass --embeddings DIR".into()))?;
            store = EmbeddingStore::from_dir(dir)?;
            EmbeddingSource::Store(&store)
        }
    };
    let baseline = args.baseline.as_deref().map(load_external_scores).transpose()?;
    let scores = score_assay(&model, &protein, &assay, src, cloud.as_ref(), baseline.as_ref(), &cfg.scoring)
        .map_err(|e| e.in_file(&args.assay))?;
    let ensemble = match &args.ensemble {
        Some(p) => {
            let ext = load_external_scores(p)?;
            let b: Vec<f64> = scores
                .iter()
                .map(|s| ext.get(&s.mutant).copied().ok_or_else(|| Error::invalid(format!("no external score for `{}`", s.mutant))))
                .collect::<Result<_>>()
                .map_err(|e| e.in_file(p))?;
            let a: Vec<f64> = scores.iter().map(|s| s.score).collect();
            Some(ensemble_zscores(&a, &b)?)
        }
        None => None,
    };
    write_file(&args.out, &write_scores_csv(&scores, ensemble.as_deref(), &hash)?)?;
    Ok(format!("{} variants scored -> {}", scores.len(), args.out.display()))
}

/// Scores of one file in the order of `mutants`.
fn scores_for(path: &Path, column: &str, mutants: &[&str]) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = parse_scores_csv(&text).map_err(|e| e.in_file(path))?;
    let map: HashMap<&str, f64> = rows
        .iter()
        .map(|r| {
            let v = match column {
                "score" => Ok(r.score),
                "ensemble" => r.ensemble.ok_or_else(|| Error::Format("no `ensemble` column".into())),
                other => Err(Error::Config(format!("unknown score column `{other}`"))),
            };
            v.map(|v| (r.mutant.as_str(), v))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_file(path))?;
    mutants
        .iter()
        .map(|m| map.get(m).copied().ok_or_else(|| Error::invalid(format!("no score for `{m}`")).in_file(path)))
        .collect()
}

fn group_keys(assay: &crate::protein_io::AssayTable, column: &str) -> Result<Vec<String>> {
    assay
        .variants
        .iter()
        .map(|v| match v.extra.get(column) {
            Some(k) => Ok(k.clone()),
            None if column == "depth" => Ok(parse_mutation_unchecked(&v.mutant, 0)?.len().to_string()),
            None => Err(Error::Config(format!("assay has no column `{column}`"))),
        })
        .collect()
}

pub fn run_eval(args: &EvalArgs, cfg: RunConfig) -> Result<String> {
    let mut cfg = cfg;
    if let Some(n) = args.n_boot {
        cfg.eval.n_boot = n;
    }
    let cfg = cfg.finalize()?;
    if args.scores.len() != args.assay.len() {
        return Err(Error::Config(format!("{} score files for {} assays", args.scores.len(), args.assay.len())));
    }
    if !args.reference.is_empty() && args.reference.len() != args.assay.len() {
        return Err(Error::Config("--reference needs one score file per assay".into()));
    }
    if args.bootstrap && args.reference.is_empty() {
        return Err(Error::Config("--bootstrap compares against --reference score files".into()));
    }
    let hash = hash_of("eval", args, &cfg);
    let mut assays = Vec::new();
    let mut ref_spearman = Vec::new();
    for (i, (sp, ap)) in args.scores.iter().zip(&args.assay).enumerate() {
        let table = load_assay(ap)?;
        let mutants = table.mutants();
        let scores = scores_for(sp, &args.column, &mutants)?;
        let dms = table.scores();
        if let Some(rp) = args.reference.get(i) {
            let r = scores_for(rp, &args.column, &mutants)?;
            ref_spearman.push(spearman(&r, &dms).map_err(|e| e.in_file(rp))?);
        }
        let groups = args.group_by.as_deref().map(|c| group_keys(&table, c)).transpose().map_err(|e| e.in_file(ap))?;
        assays.push(ScoredAssay { name: table.protein_id.clone(), labels: table.labels(), scores, dms, groups });
    }
    let mut report = build_report(&assays, &hash)?;
    if args.bootstrap {
        let ours: Vec<f64> = assays
            .iter()
            .map(|a| spearman(&a.scores, &a.dms))
            .collect::<Result<_>>()?;
        let stderr = bootstrap_diff_stderr(&ours, &ref_spearman, cfg.eval.n_boot, cfg.seed)?;
        let diff = (ours.iter().sum::<f64>() - ref_spearman.iter().sum::<f64>()) / ours.len() as f64;
        report.significance = Some(Significance {
            metric: "spearman".into(),
            reference: "reference".into(),
            mean_difference: diff,
            stderr,
            n_boot: cfg.eval.n_boot,
            seed: cfg.seed,
        });
    }
    let text = match args.format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json()?,
    };
    write_file(&args.out, &text)?;
    let agg = report.aggregate_row().and_then(|r| r.spearman);
    Ok(format!(
        "{} assays, aggregate spearman {} -> {}",
        assays.len(),
        agg.map(|s| format!("{s:.4}")).unwrap_or_else(|| "undefined".into()),
        args.out.display()
    ))
}

/// Rows of whitespace-separated numbers; blank lines and `#` lines skipped.
pub fn parse_text_matrix(text: &str) -> Result<(usize, Vec<f32>)> {
    let mut dim = None;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f32> = line
            .split_whitespace()
            .map(|t| t.parse::<f32>().map_err(|_| Error::parse(i + 1, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => return Err(Error::parse(i + 1, format!("{} columns, expected {d}", row.len()))),
            _ => {}
        }
        data.extend(row);
    }
    let dim = dim.ok_or_else(|| Error::Format("embedding matrix is empty".into()))?;
    Ok((dim, data))
}

pub fn run_embed_pack(args: &EmbedPackArgs, _cfg: RunConfig) -> Result<String> {
    let text = std::fs::read_to_string(&args.matrix).map_err(|e| Error::io(&args.matrix, e))?;
    let (dim, rows) = parse_text_matrix(&text).map_err(|e| e.in_file(&args.matrix))?;
    let tag = context_tag_for(&args.mask);
    let e = ResidueEmbeddings::new(dim, rows, tag.clone()).map_err(|e| e.in_file(&args.matrix))?;
    if let Some(&p) = args.mask.iter().find(|&&p| p >= e.n_residues()) {
        return Err(Error::invalid(format!("masked position {p} beyond {} residues", e.n_residues())));
    }
    save_embeddings(&args.out, &e)?;
    Ok(format!("{} x {dim} embeddings (tag `{tag}`) -> {}", e.n_residues(), args.out.display()))
}
