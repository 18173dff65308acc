//! Edit distances over token sequences.
//!
//! Tokens only need equality (and hashing, for the transposition table), so
//! the same routines compare primary-action ids, event identities and
//! secondary-action sets.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Unit-cost insert, delete and substitute.
    Lev,
    /// Unit-cost add, delete and adjacent shift; no substitution.
    #[default]
    Mod,
}

impl Metric {
    pub fn distance<T: Eq + Hash>(self, a: &[T], b: &[T]) -> u32 {
        match self {
            Metric::Lev => levenshtein(a, b),
            Metric::Mod => modified_levenshtein(a, b),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lev" => Ok(Metric::Lev),
            "mod" => Ok(Metric::Mod),
            other => Err(format!("unknown metric `{other}` (expected lev or mod)")),
        }
    }
}

/// Classic Levenshtein distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> u32 {
    let (a, b) = if a.len() > b.len() { (b, a) } else { (a, b) };
    let mut row: Vec<u32> = (0..=a.len() as u32).collect();
    for (j, bj) in b.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j as u32 + 1;
        for (i, ai) in a.iter().enumerate() {
            let above = row[i + 1];
            row[i + 1] = if ai == bj {
                diag
            } else {
                1 + diag.min(above).min(row[i])
            };
            diag = above;
        }
    }
    row[a.len()]
}

const ADD: u32 = 1;
const DELETE: u32 = 1;
const SHIFT: u32 = 1;
// a replacement is a delete followed by an add
const REPLACE: u32 = ADD + DELETE;

/// Edit distance with unit-cost add, delete and adjacent shift.
///
/// Computed with the Lowrance-Wagner recurrence: a shift of two tokens may
/// span tokens that are deleted between them on one side and added between
/// them on the other, which is exactly what a sequence of adjacent shifts,
/// adds and deletes can reach. Valid because `2 * SHIFT >= ADD + DELETE`.
pub fn modified_levenshtein<T: Eq + Hash>(a: &[T], b: &[T]) -> u32 {
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m as u32 * ADD;
    }
    if m == 0 {
        return n as u32 * DELETE;
    }
    let inf = (n + m) as u32 * REPLACE + 1;
    let width = m + 2;
    // d[(i + 1) * width + (j + 1)] is the distance between a[..i] and b[..j];
    // row and column 0 are sentinels.
    let mut d = vec![inf; (n + 2) * width];
    for i in 0..=n {
        d[(i + 1) * width + 1] = i as u32 * DELETE;
    }
    for j in 0..=m {
        d[width + j + 1] = j as u32 * ADD;
    }
    let mut last_row: HashMap<&T, usize> = HashMap::new();
    for i in 1..=n {
        let mut last_col = 0usize;
        for j in 1..=m {
            let k = last_row.get(&b[j - 1]).copied().unwrap_or(0);
            let l = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                REPLACE
            };
            let diag = d[i * width + j] + cost;
            let add = d[(i + 1) * width + j] + ADD;
            let delete = d[i * width + j + 1] + DELETE;
            let mut best = diag.min(add).min(delete);
            if k > 0 && l > 0 {
                let shift = d[k * width + l]
                    + (i - k - 1) as u32 * DELETE
                    + SHIFT
                    + (j - l - 1) as u32 * ADD;
                best = best.min(shift);
            }
            d[(i + 1) * width + j + 1] = best;
        }
        last_row.insert(&a[i - 1], i);
    }
    d[(n + 1) * width + m + 1]
}

/// Symmetric, zero-diagonal matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::MalformedMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        let m = Self { n, values };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::MalformedMatrix(format!("non-zero diagonal at {i}")));
            }
            for j in 0..self.n {
                let v = self.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::MalformedMatrix(format!("bad entry {v} at ({i},{j})")));
                }
                if v != self.get(j, i) {
                    return Err(Error::MalformedMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise distances between all sequences.
pub fn distance_matrix<T: Eq + Hash>(seqs: &[Vec<T>], metric: Metric) -> DistanceMatrix {
    let n = seqs.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = f64::from(metric.distance(&seqs[i], &seqs[j]));
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix { n, values }
}
