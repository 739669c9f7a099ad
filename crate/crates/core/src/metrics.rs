//! Partition agreement.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::Partition;

/// Co-assignment counts between two labelings of the same items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        let rows = dense_codes(a);
        let cols = dense_codes(b);
        let (k1, k2) = (rows.len(), cols.len());
        let mut counts = vec![vec![0u64; k2]; k1];
        for (x, y) in a.iter().zip(b) {
            counts[rows[x]][cols[y]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..k2).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            total: a.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// True when the two labelings are the same partition up to renaming.
    pub fn is_bijective(&self) -> bool {
        self.counts.len() == self.col_sums.len()
            && self
                .counts
                .iter()
                .all(|r| r.iter().filter(|&&c| c > 0).count() == 1)
    }
}

fn dense_codes(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut codes = BTreeMap::new();
    for &l in labels {
        codes.entry(l).or_insert(0);
    }
    for (code, v) in codes.values_mut().enumerate() {
        *v = code;
    }
    codes
}

fn pairs(k: u64) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index. May be negative. When the expected
/// and maximal indices coincide the result is 1 for identical partitions
/// (up to relabeling) and 0 otherwise.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    ari_labels(a.labels(), b.labels())
}

pub fn ari_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(a, b)?;
    if table.total < 2 {
        return Err(Error::TooFewItems(table.total as usize));
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = table.row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = table.col_sums.iter().map(|&c| pairs(c)).sum();
    let expected = sum_a * sum_b / pairs(table.total);
    let max_index = 0.5 * (sum_a + sum_b);
    let denominator = max_index - expected;
    if denominator == 0.0 {
        return Ok(if table.is_bijective() { 1.0 } else { 0.0 });
    }
    if table.is_bijective() {
        return Ok(1.0);
    }
    Ok((index - expected) / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(labels: &[usize]) -> Partition {
        Partition::new(labels.to_vec())
    }

    #[test]
    fn identical_partitions_score_one() {
        let a = p(&[0, 0, 1, 2, 2, 1, 3]);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let relabeled = p(&[5, 5, 9, 0, 0, 9, 1]);
        assert_eq!(adjusted_rand_index(&a, &relabeled).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_denominators() {
        let one = p(&[0, 0, 0, 0]);
        let singletons = p(&[0, 1, 2, 3]);
        assert_eq!(adjusted_rand_index(&one, &singletons).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&one, &one).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&singletons, &singletons).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            adjusted_rand_index(&p(&[0, 1]), &p(&[0])),
            Err(Error::LengthMismatch(2, 1))
        );
        assert_eq!(
            adjusted_rand_index(&p(&[0]), &p(&[0])),
            Err(Error::TooFewItems(1))
        );
    }

    #[test]
    fn contingency_marginals() {
        let t = ContingencyTable::new(&[0, 0, 1, 1, 1], &[2, 3, 3, 3, 2]).unwrap();
        assert_eq!(t.counts(), &[vec![1, 1], vec![1, 2]]);
        assert_eq!(t.row_sums(), &[2, 3]);
        assert_eq!(t.col_sums(), &[2, 3]);
        assert_eq!(t.total(), 5);
    }
}
