//! Observation containers for the three kernel families.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Observations in one of three shapes. Categorical codes and Markov states
/// are stored zero-based; file formats are one-based (see the CSV loaders).
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// N x r real matrix.
    Real(DMatrix<f64>),
    /// N rows of r categorical codes, with `cats[j]` categories in column j.
    Categorical { rows: Vec<Vec<usize>>, cats: Vec<usize> },
    /// Ragged categorical sequences over `states` states, each of length >= 2.
    Sequences { seqs: Vec<Vec<usize>>, states: usize },
}

impl Dataset {
    pub fn n(&self) -> usize {
        match self {
            Dataset::Real(m) => m.nrows(),
            Dataset::Categorical { rows, .. } => rows.len(),
            Dataset::Sequences { seqs, .. } => seqs.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dataset::Real(m) => {
                if m.nrows() == 0 || m.ncols() == 0 {
                    return Err(Error::Data("empty real data matrix".into()));
                }
                if !m.iter().all(|x| x.is_finite()) {
                    return Err(Error::Data("real data contains non-finite values".into()));
                }
            }
            Dataset::Categorical { rows, cats } => {
                if rows.is_empty() || cats.is_empty() {
                    return Err(Error::Data("empty categorical data".into()));
                }
                if cats.iter().any(|&d| d < 2) {
                    return Err(Error::Data("each categorical column needs >= 2 categories".into()));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != cats.len() {
                        return Err(Error::Data(format!(
                            "row {i} has {} entries, expected {}",
                            row.len(),
                            cats.len()
                        )));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if v >= cats[j] {
                            return Err(Error::Data(format!(
                                "row {i} column {j}: category {} out of range (D_j = {})",
                                v + 1,
                                cats[j]
                            )));
                        }
                    }
                }
            }
            Dataset::Sequences { seqs, states } => {
                if seqs.is_empty() {
                    return Err(Error::Data("empty sequence data".into()));
                }
                if *states < 2 {
                    return Err(Error::Data("need at least 2 states".into()));
                }
                for (i, s) in seqs.iter().enumerate() {
                    if s.len() < 2 {
                        return Err(Error::Data(format!(
                            "sequence {i} has length {}, need >= 2 for transitions",
                            s.len()
                        )));
                    }
                    if let Some(&bad) = s.iter().find(|&&v| v >= *states) {
                        return Err(Error::Data(format!(
                            "sequence {i}: state {} out of range (L = {states})",
                            bad + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn split_csv_line(line: &str) -> Vec<&str> {
    line.split(',').map(|f| f.trim()).collect()
}

/// Real-valued data CSV: header row, then one decimal row per observation.
pub fn parse_real_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty data file".into()))?;
    let r = split_csv_line(header).len();
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let fields = split_csv_line(line);
        if fields.len() != r {
            return Err(Error::Data(format!(
                "data row {}: expected {r} columns, got {}",
                i + 1,
                fields.len()
            )));
        }
        for f in fields {
            rows.push(f.parse::<f64>().map_err(|_| {
                Error::Data(format!("data row {}: cannot parse '{f}' as a number", i + 1))
            })?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data("data file has a header but no rows".into()));
    }
    let ds = Dataset::Real(DMatrix::from_row_slice(n, r, &rows));
    ds.validate()?;
    Ok(ds)
}

/// Categorical data CSV: header row, then 1-based integer codes. Category
/// counts default to the per-column maximum; pass `cats` to override.
pub fn parse_categorical_csv(text: &str, cats: Option<Vec<usize>>) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty data file".into()))?;
    let r = split_csv_line(header).len();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields = split_csv_line(line);
        if fields.len() != r {
            return Err(Error::Data(format!(
                "data row {}: expected {r} columns, got {}",
                i + 1,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(r);
        for f in fields {
            let v: usize = f.parse().map_err(|_| {
                Error::Data(format!("data row {}: cannot parse '{f}' as a category", i + 1))
            })?;
            if v == 0 {
                return Err(Error::Data(format!("data row {}: categories are 1-based", i + 1)));
            }
            row.push(v - 1);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("data file has a header but no rows".into()));
    }
    let cats = match cats {
        Some(c) => c,
        None => (0..r)
            .map(|j| rows.iter().map(|row| row[j] + 1).max().unwrap().max(2))
            .collect(),
    };
    let ds = Dataset::Categorical { rows, cats };
    ds.validate()?;
    Ok(ds)
}

/// Markov sequence file: header line `seq`, then one variable-length row of
/// comma-separated 1-based states per individual.
pub fn parse_sequences_csv(text: &str, states: Option<usize>) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    lines
        .next()
        .ok_or_else(|| Error::Data("empty data file".into()))?;
    let mut seqs = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut seq = Vec::new();
        for f in split_csv_line(line) {
            let v: usize = f.parse().map_err(|_| {
                Error::Data(format!("sequence {}: cannot parse '{f}' as a state", i + 1))
            })?;
            if v == 0 {
                return Err(Error::Data(format!("sequence {}: states are 1-based", i + 1)));
            }
            seq.push(v - 1);
        }
        seqs.push(seq);
    }
    if seqs.is_empty() {
        return Err(Error::Data("data file has a header but no rows".into()));
    }
    let states = match states {
        None => seqs.iter().flatten().map(|&v| v + 1).max().unwrap().max(2),
        Some(l) => l,
    };
    let ds = Dataset::Sequences { seqs, states };
    ds.validate()?;
    Ok(ds)
}

/// Write the dataset in the matching CSV format (1-based codes/states).
pub fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    match data {
        Dataset::Real(m) => {
            let header: Vec<String> = (1..=m.ncols()).map(|j| format!("x{j}")).collect();
            out.push_str(&header.join(","));
            out.push('\n');
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        Dataset::Categorical { rows, cats } => {
            let header: Vec<String> = (1..=cats.len()).map(|j| format!("x{j}")).collect();
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                let fields: Vec<String> = row.iter().map(|&v| (v + 1).to_string()).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        Dataset::Sequences { seqs, .. } => {
            out.push_str("seq\n");
            for seq in seqs {
                let fields: Vec<String> = seq.iter().map(|&v| (v + 1).to_string()).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
    }
    out
}
