//! Difficult-sample selection and the consistency between selections.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ErrorKey, ErrorSource};

pub const DEFAULT_TOP_M: usize = 150;

/// The `m` samples with the largest error under one key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSet {
    pub method_id: String,
    pub key: ErrorKey,
    /// Selected ids, largest error first.
    pub sample_ids: Vec<String>,
}

impl SelectionSet {
    pub fn m(&self) -> usize {
        self.sample_ids.len()
    }
}

/// Picks the `m` samples with the largest `key` value. Ties are broken by
/// ascending sample id so the selection is deterministic.
pub fn select_top_m<R: ErrorSource>(
    method_id: &str,
    records: &[R],
    key: ErrorKey,
    m: usize,
) -> Result<SelectionSet> {
    if m > records.len() {
        return Err(Error::MTooLarge {
            m,
            n: records.len(),
        });
    }
    let mut keyed = records
        .iter()
        .map(|r| Ok((r.require(key)?, r.sample_id())))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(b.1),
        o => o,
    });
    Ok(SelectionSet {
        method_id: method_id.to_string(),
        key,
        sample_ids: keyed[..m].iter().map(|(_, id)| id.to_string()).collect(),
    })
}

/// Fraction of common samples between two selections of equal size.
pub fn consistency(s1: &SelectionSet, s2: &SelectionSet) -> Result<f64> {
    if s1.m() != s2.m() {
        return Err(Error::MMismatch(s1.m(), s2.m()));
    }
    if s1.m() == 0 {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    let a: BTreeSet<&str> = s1.sample_ids.iter().map(String::as_str).collect();
    let common = s2
        .sample_ids
        .iter()
        .filter(|id| a.contains(id.as_str()))
        .count();
    Ok(common as f64 / s1.m() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsistencyMode {
    /// Rows select by mirror error, columns by alignment error.
    EmVsEa,
    EmVsEm,
    EaVsEa,
}

impl ConsistencyMode {
    pub fn keys(self) -> (ErrorKey, ErrorKey) {
        match self {
            ConsistencyMode::EmVsEa => (ErrorKey::MirrorError, ErrorKey::AlignmentError),
            ConsistencyMode::EmVsEm => (ErrorKey::MirrorError, ErrorKey::MirrorError),
            ConsistencyMode::EaVsEa => (ErrorKey::AlignmentError, ErrorKey::AlignmentError),
        }
    }
}

impl fmt::Display for ConsistencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConsistencyMode::EmVsEa => "em-ea",
            ConsistencyMode::EmVsEm => "em-em",
            ConsistencyMode::EaVsEa => "ea-ea",
        })
    }
}

impl FromStr for ConsistencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em-ea" => Ok(ConsistencyMode::EmVsEa),
            "em-em" => Ok(ConsistencyMode::EmVsEm),
            "ea-ea" => Ok(ConsistencyMode::EaVsEa),
            _ => Err(Error::InvalidConfig(format!("unknown consistency mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyMatrix {
    pub method_ids: Vec<String>,
    pub mode: ConsistencyMode,
    pub m: usize,
    pub n: usize,
    /// `values[i][j]` compares method `i` (row key) with method `j` (column key).
    pub values: Vec<Vec<f64>>,
}

impl ConsistencyMatrix {
    /// Expected consistency of two independent random selections, `m / n`.
    pub fn chance_rate(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

pub fn consistency_matrix<R: ErrorSource>(
    methods: &[(String, Vec<R>)],
    mode: ConsistencyMode,
    m: usize,
) -> Result<ConsistencyMatrix> {
    let universe = |rs: &[R]| -> BTreeSet<String> {
        rs.iter().map(|r| r.sample_id().to_string()).collect()
    };
    let n = methods.first().map(|(_, rs)| rs.len()).unwrap_or(0);
    if let Some((first_id, first)) = methods.first() {
        let reference = universe(first);
        if reference.len() != first.len() {
            return Err(Error::UniverseMismatch(format!(
                "{first_id} contains duplicate sample ids"
            )));
        }
        for (id, rs) in &methods[1..] {
            if rs.len() != first.len() || universe(rs) != reference {
                return Err(Error::UniverseMismatch(format!(
                    "{id} does not cover the same samples as {first_id}"
                )));
            }
        }
    }
    let (row_key, col_key) = mode.keys();
    let rows = methods
        .iter()
        .map(|(id, rs)| select_top_m(id, rs, row_key, m))
        .collect::<Result<Vec<_>>>()?;
    let cols = methods
        .iter()
        .map(|(id, rs)| select_top_m(id, rs, col_key, m))
        .collect::<Result<Vec<_>>>()?;
    let values = rows
        .iter()
        .map(|r| cols.iter().map(|c| consistency(r, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyMatrix {
        method_ids: methods.iter().map(|(id, _)| id.clone()).collect(),
        mode,
        m,
        n,
        values,
    })
}
