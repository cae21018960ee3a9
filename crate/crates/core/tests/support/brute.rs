//! Brute-force metric oracles and frozen reference t-tests.

use dcae::rng::Streams;
use rand::Rng;

/// Fraction of (positive, negative) pairs ranked correctly, ties 1/2.
pub fn auroc_pairs(s: &[f64], y: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Enumerates every distinct score as a threshold (`score >= t` is
/// positive), then sums recall steps weighted by the best precision at
/// that recall or higher.
pub fn auprc_thresholds(s: &[f64], y: &[u8]) -> f64 {
    let pos = y.iter().filter(|v| **v == 1).count() as f64;
    let mut ts: Vec<f64> = s.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let curve: Vec<(f64, f64)> = ts
        .iter()
        .map(|t| {
            let tp = s.iter().zip(y).filter(|(v, l)| **v >= *t && **l == 1).count() as f64;
            let called = s.iter().filter(|v| **v >= *t).count() as f64;
            (tp / pos, tp / called)
        })
        .collect();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (i, (r, _)) in curve.iter().enumerate() {
        let best = curve[i..].iter().map(|c| c.1).fold(0.0, f64::max);
        area += (r - prev_recall) * best;
        prev_recall = *r;
    }
    area
}

/// Small instance (n <= 12) with both classes and plenty of ties.
pub fn random_instance(seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = Streams::new(seed).rng("metrics");
    let n = rng.random_range(2..=12);
    let mut y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    y[0] = 1;
    y[1] = 0;
    let s = (0..n).map(|_| f64::from(rng.random_range(0..6)) * 0.25).collect();
    (s, y)
}

/// `(a, b, t, df, p)` from scipy.stats.ttest_ind(a, b, equal_var=False).
pub const WELCH_CASES: [(&[f64], &[f64], f64, f64, f64); 5] = [
    (
        &[1.0, 2.0, 3.0, 4.0, 5.0],
        &[2.0, 3.0, 4.0, 5.0, 6.0],
        -1.0,
        8.0,
        0.34659350708733416,
    ),
    (
        &[19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0],
        &[
            28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3, 20.4,
            23.9, 13.3,
        ],
        -2.225512039969852,
        24.524634944257343,
        0.035484530830010325,
    ),
    (
        &[0.9319, 0.9301, 0.9335, 0.9290, 0.9342],
        &[0.9102, 0.9250, 0.8977, 0.9311, 0.9050, 0.9188],
        3.263634084940715,
        5.363154332766523,
        0.020188786855664644,
    ),
    (
        &[3.1, 2.9, 3.3],
        &[1.0, 5.0, 2.0, 4.5, 0.2, 3.9, 2.2],
        0.5943172012833599,
        6.328227494853497,
        0.5729213129226134,
    ),
    (
        &[10.0, 12.5, 11.0, 9.5, 10.5, 12.0, 11.5, 10.0],
        &[10.2, 10.4, 10.3, 10.1],
        1.6425107995440105,
        7.405789694635593,
        0.14213454125161423,
    ),
];
