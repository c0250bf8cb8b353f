//! Ranking metrics of a noisy predictor and the bootstrap standard error of
//! its Spearman advantage over a noisier one.

use protfit::eval::{bootstrap_diff_stderr, build_report, median, spearman, ScoredAssay};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noisy(truth: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    truth.iter().map(|t| t + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn main() -> protfit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ours = Vec::new();
    let (mut rho_a, mut rho_b) = (Vec::new(), Vec::new());
    for k in 0..8 {
        let dms: Vec<f64> = (0..150).map(|_| rng.sample(StandardNormal)).collect();
        let a = noisy(&dms, 0.8, &mut rng);
        let b = noisy(&dms, 1.5, &mut rng);
        rho_a.push(spearman(&a, &dms)?);
        rho_b.push(spearman(&b, &dms)?);
        let m = median(&dms);
        let labels = dms.iter().map(|&d| u8::from(d > m)).collect();
        let groups = Some((0..dms.len()).map(|i| if i % 4 == 0 { "multi" } else { "single" }.to_string()).collect());
        ours.push(ScoredAssay { name: format!("assay_{k}"), scores: a, dms, labels, groups });
    }
    let report = build_report(&ours, "example")?;
    print!("{}", report.to_csv()?);

    let diff = rho_a.iter().zip(&rho_b).map(|(a, b)| a - b).sum::<f64>() / rho_a.len() as f64;
    let se = bootstrap_diff_stderr(&rho_a, &rho_b, 10_000, 0)?;
    println!("\nmean spearman gain {diff:.4} +- {se:.4} (10k bootstrap resamples)");
    Ok(())
}
