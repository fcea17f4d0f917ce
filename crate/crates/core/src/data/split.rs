//! Train/test protocols: per-class stratified and subject-disjoint.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("train fraction must lie in (0, 1), got {f}")))
    }
}

/// Per-class shuffled split. Each class contributes `⌊fraction · count⌋` training
/// samples (kept within `1..count`); with `balanced`, every class contributes
/// `⌊fraction · minority⌋` instead so the training side is class-balanced.
/// Returned index lists are ascending.
pub fn stratified_indices(
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
    balanced: bool,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class
            .get_mut(y)
            .ok_or_else(|| Error::Parameter(format!("label {y} outside 0..{num_classes}")))?
            .push(i);
    }
    let present: Vec<usize> = by_class.iter().map(Vec::len).filter(|&c| c > 0).collect();
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() == 1) {
        return Err(Error::Protocol(format!(
            "class {c} has {} sample(s); stratified split needs at least 2",
            members.len()
        )));
    }
    let minority = present.iter().copied().min().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut members in by_class {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let basis = if balanced { minority } else { members.len() };
        // The epsilon absorbs representation error, e.g. 0.7 · 10.
        let k = ((fraction * basis as f64 + 1e-9).floor() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_stratified<T: Scalar>(
    ds: &Dataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (tr, te) = stratified_indices(&ds.labels, ds.num_classes(), fraction, false, seed)?;
    Ok((ds.subset(&tr), ds.subset(&te)))
}

/// Stratified split with every class capped at the minority class's training count.
pub fn split_stratified_balanced<T: Scalar>(
    ds: &Dataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (tr, te) = stratified_indices(&ds.labels, ds.num_classes(), fraction, true, seed)?;
    Ok((ds.subset(&tr), ds.subset(&te)))
}

/// Partitions subjects (not samples). `round(fraction · S)` subjects, kept within
/// `1..S`, go to training; they are chosen greedily in shuffled order so each
/// class's training share tracks `fraction`.
pub fn subject_disjoint_indices(
    labels: &[usize],
    subjects: &[String],
    num_classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    if subjects.len() != labels.len() {
        return Err(Error::Protocol("subject list does not match sample count".into()));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in subjects.iter().enumerate() {
        groups.entry(s.as_str()).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::Protocol(format!(
            "subject-disjoint split needs at least 2 subjects, found {}",
            groups.len()
        )));
    }

    // Majority class of each subject, ties toward the smaller index.
    let mut subj: Vec<(usize, Vec<usize>)> = groups
        .into_values()
        .map(|idx| {
            let mut counts = vec![0usize; num_classes];
            for &i in &idx {
                counts[labels[i]] += 1;
            }
            let class = (0..num_classes).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
            (class, idx)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subj.shuffle(&mut rng);

    let total = subj.len();
    let k = ((fraction * total as f64).round() as usize).clamp(1, total - 1);
    let mut class_size = vec![0usize; num_classes];
    for (c, idx) in &subj {
        class_size[*c] += idx.len();
    }
    let target: Vec<f64> = class_size.iter().map(|&s| fraction * s as f64).collect();
    let mut in_train = vec![0usize; num_classes];

    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut taken = 0;
    for (pos, (c, idx)) in subj.into_iter().enumerate() {
        let slots = k - taken;
        let remaining = total - pos;
        let to_train = if slots == 0 {
            false
        } else if slots == remaining {
            true
        } else {
            in_train[c] as f64 + idx.len() as f64 / 2.0 <= target[c]
        };
        if to_train {
            taken += 1;
            in_train[c] += idx.len();
            train.extend(idx);
        } else {
            test.extend(idx);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_subject_disjoint<T: Scalar>(
    ds: &Dataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let subjects = ds
        .subjects
        .as_ref()
        .ok_or_else(|| Error::Protocol("dataset has no subject identifiers".into()))?;
    let (tr, te) = subject_disjoint_indices(&ds.labels, subjects, ds.num_classes(), fraction, seed)?;
    Ok((ds.subset(&tr), ds.subset(&te)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn ds(labels: Vec<usize>, subjects: Option<Vec<&str>>) -> Dataset<f64> {
        let n = labels.len();
        let l = labels.iter().max().unwrap() + 1;
        Dataset::new(
            Matrix::from_fn(1, n, |_, j| j as f64),
            labels,
            subjects.map(|s| s.into_iter().map(String::from).collect()),
            (0..l).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn seventy_thirty_on_ten_plus_ten() {
        let d = ds((0..20).map(|i| i / 10).collect(), None);
        let (tr, te) = split_stratified(&d, 0.7, 3).unwrap();
        assert_eq!(tr.class_counts(), vec![7, 7]);
        assert_eq!(te.class_counts(), vec![3, 3]);
    }

    #[test]
    fn balanced_caps_at_minority() {
        let d = ds((0..30).map(|i| usize::from(i >= 20)).collect(), None);
        let (tr, te) = split_stratified_balanced(&d, 0.5, 3).unwrap();
        assert_eq!(tr.class_counts(), vec![5, 5]);
        assert_eq!(te.class_counts(), vec![15, 5]);
    }

    #[test]
    fn singleton_class_is_a_protocol_error() {
        let d = ds(vec![0, 0, 0, 1], None);
        assert!(matches!(split_stratified(&d, 0.7, 1), Err(Error::Protocol(_))));
        assert!(matches!(split_stratified(&d, 1.0, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn two_subjects_one_per_side() {
        let d = ds(vec![0, 0, 0, 0, 0, 1], Some(vec!["a", "a", "a", "a", "a", "b"]));
        for seed in 0..10 {
            let (tr, te) = split_subject_disjoint(&d, 0.7, seed).unwrap();
            let st: Vec<_> = tr.subjects.unwrap();
            let se: Vec<_> = te.subjects.unwrap();
            assert!(!st.is_empty() && !se.is_empty());
            assert!(st.iter().all(|s| !se.contains(s)));
        }
    }

    #[test]
    fn missing_subjects_is_a_protocol_error() {
        let d = ds(vec![0, 1, 0, 1], None);
        assert!(matches!(split_subject_disjoint(&d, 0.5, 0), Err(Error::Protocol(_))));
    }
}
