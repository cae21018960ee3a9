use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite score at index {i}")));
    }
    let mut pos = 0;
    for (i, y) in labels.iter().enumerate() {
        match y {
            0 => {}
            1 => pos += 1,
            _ => return Err(Error::invalid(format!("label {y} at index {i} is not 0 or 1"))),
        }
    }
    Ok((pos, labels.len() - pos))
}

/// Midranks (1-based) of `values`; tied values share their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties count 1/2.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid(format!(
            "AUROC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, y)| **y == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Area under the precision-recall curve, step-wise: each recall increment
/// is weighted by the best precision reached at that recall or beyond.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::invalid("AUPRC needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    // (recall, precision) at each distinct threshold, descending.
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64));
    }
    let mut envelope = vec![0.0; points.len()];
    let mut best: f64 = 0.0;
    for (k, (_, p)) in points.iter().enumerate().rev() {
        best = best.max(*p);
        envelope[k] = best;
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for ((r, _), p) in points.iter().zip(envelope) {
        area += (r - prev_recall) * p;
        prev_recall = *r;
    }
    Ok(area)
}
