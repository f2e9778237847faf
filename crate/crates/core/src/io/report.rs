use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{ComparisonRow, ComparisonSample};
use crate::metrics::{CurveRow, ErrorKey, ErrorRow, PerPointStats, Skipped};
use crate::selection::{ConsistencyMatrix, SelectionSet};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance lines written at the top of every table, each prefixed by `#`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportHeader {
    pub seed: Option<u64>,
    pub norm: Option<String>,
    pub extra: Vec<(String, String)>,
}

impl ReportHeader {
    pub fn new(seed: Option<u64>, norm: Option<String>) -> Self {
        Self {
            seed,
            norm,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# mirrorability {TOOL_VERSION}")?;
        match self.seed {
            Some(s) => writeln!(w, "# seed: {s}")?,
            None => writeln!(w, "# seed: none")?,
        }
        writeln!(w, "# norm: {}", self.norm.as_deref().unwrap_or("none"))?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_json<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_per_sample<W: Write>(w: &mut W, header: &ReportHeader, rows: &[ErrorRow]) -> Result<()> {
    header.write(w)?;
    writeln!(w, "sample_id,e_m,e_a,e_a_mirror")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.sample_id, opt(r.e_m), opt(r.e_a), opt(r.e_a_mirror))?;
    }
    Ok(())
}

/// Reads a per-sample error table. Columns are located by name; `e_m`, `e_a`
/// and `e_a_mirror` are each optional and empty cells mean "not available".
pub fn read_error_table<R: Read>(reader: R) -> Result<Vec<ErrorRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("sample_id").ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "missing sample_id column".into(),
    })?;
    let (em, ea, eam) = (col("e_m"), col("e_a"), col("e_a_mirror"));
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |c: Option<usize>| -> Result<Option<f64>> {
            match c.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => s.parse().map(Some).map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("{s:?} is not a number"),
                }),
            }
        };
        let sample_id = record.get(id_col).unwrap_or_default().to_string();
        if !seen.insert(sample_id.clone()) {
            return Err(Error::DuplicateId { line, id: sample_id });
        }
        rows.push(ErrorRow {
            sample_id,
            e_m: cell(em)?,
            e_a: cell(ea)?,
            e_a_mirror: cell(eam)?,
        });
    }
    Ok(rows)
}

pub fn parse_error_table(path: &Path) -> Result<Vec<ErrorRow>> {
    read_error_table(BufReader::new(File::open(path)?))
}

pub fn write_curve<W: Write>(w: &mut W, header: &ReportHeader, rows: &[CurveRow]) -> Result<()> {
    header.write(w)?;
    writeln!(w, "rank,sample_id,e_a,e_m")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.rank, r.sample_id, r.e_a, r.e_m)?;
    }
    Ok(())
}

pub fn write_per_point<W: Write>(w: &mut W, header: &ReportHeader, stats: &PerPointStats) -> Result<()> {
    header.write(w)?;
    match &stats.alignment_mean {
        Some(_) => writeln!(w, "landmark,mirror_mean,mirror_std,alignment_mean")?,
        None => writeln!(w, "landmark,mirror_mean,mirror_std")?,
    }
    for k in 0..stats.mirror_mean.len() {
        write!(w, "{k},{},{}", stats.mirror_mean[k], stats.mirror_std[k])?;
        if let Some(a) = &stats.alignment_mean {
            write!(w, ",{}", a[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_skipped<W: Write>(w: &mut W, header: &ReportHeader, skipped: &[Skipped]) -> Result<()> {
    header.write(w)?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["sample_id", "category", "message"])?;
    for s in skipped {
        out.write_record([s.sample_id.as_str(), s.error.category(), &s.error.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Selected ids one per line, most difficult first.
pub fn write_selection<W: Write>(w: &mut W, header: &ReportHeader, set: &SelectionSet) -> Result<()> {
    header.write(w)?;
    writeln!(w, "# method: {}", set.method_id)?;
    writeln!(w, "# key: {}", set.key)?;
    writeln!(w, "# top: {}", set.m())?;
    for id in &set.sample_ids {
        writeln!(w, "{id}")?;
    }
    Ok(())
}

pub fn read_selection<R: Read>(reader: R, method_id: &str, key: ErrorKey) -> Result<SelectionSet> {
    let mut sample_ids = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() && !line.starts_with('#') {
            sample_ids.push(line.to_string());
        }
    }
    Ok(SelectionSet {
        method_id: method_id.to_string(),
        key,
        sample_ids,
    })
}

pub fn write_matrix<W: Write>(w: &mut W, header: &ReportHeader, matrix: &ConsistencyMatrix) -> Result<()> {
    header.write(w)?;
    writeln!(w, "# mode: {}", matrix.mode)?;
    writeln!(w, "# top: {}", matrix.m)?;
    writeln!(w, "# samples: {}", matrix.n)?;
    writeln!(w, "# chance_rate: {}", matrix.chance_rate())?;
    write!(w, "method")?;
    for id in &matrix.method_ids {
        write!(w, ",{id}")?;
    }
    writeln!(w)?;
    for (id, row) in matrix.method_ids.iter().zip(&matrix.values) {
        write!(w, "{id}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Summary of an `evaluate` run; alignment fields are absent without ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub tool_version: String,
    pub norm: String,
    pub num_samples: usize,
    pub num_skipped: usize,
    pub mean_e_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_e_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_e_a_mirror: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman_r: Option<f64>,
}

pub fn write_comparison<W: Write>(w: &mut W, header: &ReportHeader, rows: &[ComparisonRow]) -> Result<()> {
    header.write(w)?;
    writeln!(
        w,
        "method,n_inits,max_rounds,threshold,mean_e_a,mean_rounds,trigger_rate,precision,recall"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.n_inits,
            r.max_rounds,
            opt(r.threshold),
            r.mean_e_a,
            r.mean_rounds,
            r.trigger_rate,
            opt(r.precision),
            opt(r.recall)
        )?;
    }
    Ok(())
}

pub fn write_comparison_samples<W: Write>(
    w: &mut W,
    header: &ReportHeader,
    samples: &[ComparisonSample],
) -> Result<()> {
    header.write(w)?;
    writeln!(
        w,
        "sample_id,difficulty,e_a_no_restart,e_a_variance,e_a_f1,e_a_f2,first_spread,f1_first_e_m,f1_best_e_m,f1_rounds,f2_best_e_m,f2_rounds,variance_rounds"
    )?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.sample_id,
            s.difficulty,
            s.e_a_no_restart,
            s.e_a_variance,
            s.e_a_f1,
            s.e_a_f2,
            s.first_spread,
            s.f1_round_e_m[0],
            s.f1_best_e_m,
            s.f1_round_e_m.len(),
            s.f2_best_e_m,
            s.f2_round_e_m.len(),
            s.variance_rounds
        )?;
    }
    Ok(())
}
