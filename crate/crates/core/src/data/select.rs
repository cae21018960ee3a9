use std::collections::{BTreeSet, HashMap, HashSet};

use super::ExpressionDataset;
use crate::error::{Error, Result};

/// Indices of the `k` features with the largest share of distinct values
/// (after rounding to 6 decimals), ties broken by feature name.
pub fn select_top_varied(ds: &ExpressionDataset, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("feature count k must be > 0"));
    }
    let (n, d) = (ds.n_samples(), ds.n_features());
    if k > d {
        return Err(Error::invalid(format!("cannot select {k} of {d} features")));
    }
    if n == 0 {
        return Err(Error::invalid("feature selection on an empty dataset"));
    }
    let mut scored: Vec<(f64, usize)> = (0..d)
        .map(|j| {
            let distinct: HashSet<i64> = (0..n)
                .map(|i| (f64::from(ds.matrix[i * d + j]) * 1e6).round() as i64)
                .collect();
            (distinct.len() as f64 / n as f64, j)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| ds.feature_names[a.1].cmp(&ds.feature_names[b.1]))
    });
    Ok(scored.into_iter().take(k).map(|(_, j)| j).collect())
}

/// Sorted union of two feature sets.
pub fn union_features(a: &[String], b: &[String]) -> Result<Vec<String>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("feature union needs two nonempty sets"));
    }
    Ok(a.iter()
        .chain(b)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect())
}

/// Columns of `ds` reordered to `names`. Every name must be present.
pub fn reindex_features(ds: &ExpressionDataset, names: &[String]) -> Result<ExpressionDataset> {
    let pos: HashMap<&str, usize> = ds
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| !pos.contains_key(n.as_str()))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        return Err(Error::invalid(format!(
            "{} of the selected features are absent from the {} data, e.g. {shown:?}",
            missing.len(),
            ds.domain
        )));
    }
    let cols: Vec<usize> = names.iter().map(|n| pos[n.as_str()]).collect();
    let mut matrix = Vec::with_capacity(ds.n_samples() * cols.len());
    for i in 0..ds.n_samples() {
        let row = ds.row(i);
        matrix.extend(cols.iter().map(|j| row[*j]));
    }
    Ok(ExpressionDataset {
        sample_ids: ds.sample_ids.clone(),
        feature_names: names.to_vec(),
        matrix,
        domain: ds.domain,
        labels: ds.labels.clone(),
        strata: ds.strata.clone(),
    })
}
