use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Numeric order in which `-0.0 == 0.0`; NaN falls back to the total order.
fn num_cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.total_cmp(&b))
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| num_cmp(*a, *b));
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// 1-based ranks with tied values sharing their mean rank.
pub fn mid_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| num_cmp(xs[a], xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn check_pair(x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min_len {
        return Err(Error::invalid(format!("need at least {min_len} values, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }
    Ok(())
}

/// Pearson correlation of the mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let (rx, ry) = (mid_ranks(x), mid_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("spearman: an input has no rank variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_labels(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok((pos, neg))
}

/// `P(score_pos > score_neg) + P(equal) / 2`, from the rank-sum statistic.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    check_pair(scores, scores, 1)?;
    let (pos, neg) = check_labels(labels)?;
    let ranks = mid_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// Binarization threshold for [`mcc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Median of the scores.
    Median,
    Value(f64),
}

/// Matthews correlation of `score > threshold` against the labels; zero when
/// any confusion-matrix marginal is empty.
pub fn mcc(scores: &[f64], labels: &[u8], threshold: Threshold) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    check_pair(scores, scores, 1)?;
    check_labels(labels)?;
    let t = match threshold {
        Threshold::Median => median(scores),
        Threshold::Value(v) => v,
    };
    let (mut tp, mut tn, mut fp, mut fneg) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > t, l == 1) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
        }
    }
    let denom = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fneg) / denom.sqrt())
}

/// Indices sorted by descending value, ties by ascending index.
pub fn descending_order(xs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| num_cmp(xs[b], xs[a]).then(a.cmp(&b)));
    order
}

/// NDCG over the full list with gains min-max scaled to `[0, 1]`; equal
/// gains give 1.
pub fn ndcg(scores: &[f64], gains: &[f64]) -> Result<f64> {
    check_pair(scores, gains, 1)?;
    let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(1.0);
    }
    let g: Vec<f64> = gains.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let dcg = |order: &[usize]| -> f64 {
        order.iter().enumerate().map(|(r, &i)| g[i] / ((r + 2) as f64).log2()).sum()
    };
    Ok(dcg(&descending_order(scores)) / dcg(&descending_order(&g)))
}

/// Overlap of the top `k = max(1, floor(frac n))` items by score and by
/// gain, divided by `k`.
pub fn top_fraction_recall(scores: &[f64], gains: &[f64], frac: f64) -> Result<f64> {
    check_pair(scores, gains, 1)?;
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::invalid("fraction must lie in (0, 1]"));
    }
    let n = scores.len();
    let k = ((frac * n as f64).floor() as usize).max(1);
    let top = |xs: &[f64]| {
        let mut mark = vec![false; n];
        for &i in &descending_order(xs)[..k] {
            mark[i] = true;
        }
        mark
    };
    let (a, b) = (top(scores), top(gains));
    let hits = a.iter().zip(&b).filter(|(x, y)| **x && **y).count();
    Ok(hits as f64 / k as f64)
}
