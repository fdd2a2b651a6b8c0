//! External evaluation metrics: accuracy, NMI, ARI and macro-F1.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Rows are predicted labels, columns true classes, both in ascending id
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(predicted: &[usize], truth: &[usize]) -> Result<Self> {
        check(predicted, truth)?;
        let rows = index_of(predicted);
        let cols = index_of(truth);
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (p, t) in predicted.iter().zip(truth) {
            counts[rows[p]][cols[t]] += 1;
        }
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..cols.len())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(ContingencyTable {
            predicted: rows.into_keys().collect(),
            truth: cols.into_keys().collect(),
            counts,
            row_sums,
            col_sums,
            total: predicted.len() as u64,
        })
    }
}

fn index_of(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut map: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

fn check(predicted: &[usize], truth: &[usize]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "label length mismatch: {} predicted vs {} true",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("no labels to score".into()));
    }
    Ok(())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    check(predicted, truth)?;
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

fn entropy(marginal: &[u64], n: f64) -> f64 {
    marginal
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the geometric mean of the two entropies.
pub fn nmi(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(predicted, truth)?;
    let n = table.total as f64;
    let hu = entropy(&table.row_sums, n);
    let hv = entropy(&table.col_sums, n);
    if hu == 0.0 || hv == 0.0 {
        // Both single-cluster: identical partitions.
        return Ok(if hu == 0.0 && hv == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            let outer = table.row_sums[i] as f64 * table.col_sums[j] as f64;
            mi += c / n * (n * c / outer).ln();
        }
    }
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

fn comb2(n: u64) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Hubert-Arabie adjusted Rand index.
///
/// Numerator and denominator are formed exactly in integers, so the only
/// rounding is the final division.
pub fn ari(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(predicted, truth)?;
    let index: i128 = table.counts.iter().flatten().map(|&c| comb2(c)).sum();
    let rows: i128 = table.row_sums.iter().map(|&c| comb2(c)).sum();
    let cols: i128 = table.col_sums.iter().map(|&c| comb2(c)).sum();
    let pairs = comb2(table.total);
    // (index - E) / (max - E) with E = rows * cols / pairs, scaled by 2 * pairs.
    let num = 2 * (pairs * index - rows * cols);
    let den = pairs * (rows + cols) - 2 * rows * cols;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Unweighted mean of per-class F1 over the true classes.
pub fn macro_f1(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    check(predicted, truth)?;
    let classes: BTreeMap<usize, ()> = truth.iter().map(|&c| (c, ())).collect();
    let mut total = 0.0;
    for &c in classes.keys() {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == c, t == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / classes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub nmi: f64,
    pub ari: f64,
    pub macro_f1: f64,
}

pub fn score_all(predicted: &[usize], truth: &[usize]) -> Result<Scores> {
    Ok(Scores {
        accuracy: accuracy(predicted, truth)?,
        nmi: nmi(predicted, truth)?,
        ari: ari(predicted, truth)?,
        macro_f1: macro_f1(predicted, truth)?,
    })
}
