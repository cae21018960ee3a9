use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

pub const OTHER_STRATUM: &str = "other";

/// Strata with fewer than `min_size` members renamed to [`OTHER_STRATUM`].
/// Returns the new strata and the names that were merged.
pub fn merge_small_strata(strata: &[String], min_size: usize) -> (Vec<String>, Vec<String>) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in strata {
        *counts.entry(s).or_default() += 1;
    }
    let small: Vec<String> = counts
        .iter()
        .filter(|(_, c)| **c < min_size)
        .map(|(s, _)| s.to_string())
        .collect();
    if !small.is_empty() {
        log::warn!(
            "merging {} strata with fewer than {min_size} samples into {OTHER_STRATUM:?}: {}",
            small.len(),
            small.join(", ")
        );
    }
    let merged = strata
        .iter()
        .map(|s| {
            if small.contains(s) {
                OTHER_STRATUM.to_string()
            } else {
                s.clone()
            }
        })
        .collect();
    (merged, small)
}

/// Fold index per sample. Samples are grouped by stratum (and label when
/// given), each group is shuffled, and the groups are dealt round-robin in
/// sorted order with the deal continuing across groups. Every group and
/// every stratum is spread over the folds with counts differing by at most
/// one.
pub fn stratified_kfold(strata: &[String], labels: Option<&[u8]>, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let n = strata.len();
    if k == 0 {
        return Err(Error::invalid("fold count must be > 0"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} folds for {n} samples")));
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::invalid(format!("{} labels for {n} samples", l.len())));
        }
    }
    let mut groups: BTreeMap<(&str, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let y = labels.map_or(0, |l| l[i]);
        groups.entry((&strata[i], y)).or_default().push(i);
    }
    let mut fold = vec![0; n];
    let mut next = 0;
    for idx in groups.values_mut() {
        idx.shuffle(rng);
        for &i in idx.iter() {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn count(fold: &[usize], strata: &[String], s: &str, f: usize) -> usize {
        fold.iter().zip(strata).filter(|(x, t)| **x == f && *t == s).count()
    }

    #[test]
    fn two_strata_of_ten() {
        let strata: Vec<String> = (0..20).map(|i| if i < 10 { "a" } else { "b" }.to_string()).collect();
        let fold = stratified_kfold(&strata, None, 10, &mut Streams::new(1).rng("folds")).unwrap();
        for f in 0..10 {
            assert_eq!(count(&fold, &strata, "a", f), 1);
            assert_eq!(count(&fold, &strata, "b", f), 1);
        }
        let again = stratified_kfold(&strata, None, 10, &mut Streams::new(1).rng("folds")).unwrap();
        assert_eq!(fold, again);
    }

    #[test]
    fn rejects_more_folds_than_samples() {
        let strata = vec!["a".to_string(); 3];
        assert!(stratified_kfold(&strata, None, 4, &mut Streams::new(1).rng("folds")).is_err());
    }

    #[test]
    fn small_strata_merge() {
        let mut strata = vec!["big".to_string(); 12];
        strata.extend(vec!["tiny".to_string(); 3]);
        strata.extend(vec!["rare".to_string(); 2]);
        let (merged, names) = merge_small_strata(&strata, 10);
        assert_eq!(names, vec!["rare", "tiny"]);
        assert_eq!(merged.iter().filter(|s| *s == OTHER_STRATUM).count(), 5);
    }
}
