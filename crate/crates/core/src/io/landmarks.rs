use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::shape::{ImageMeta, Point, Shape};

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn is_header(record: &csv::StringRecord) -> bool {
    record
        .get(0)
        .is_some_and(|f| f.eq_ignore_ascii_case("sample_id"))
}

fn parse_number(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("{what} {field:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            line,
            reason: format!("{what} {field:?} is not finite"),
        });
    }
    Ok(v)
}

/// Reads `sample_id,x_0,y_0,...` rows. An optional first row starting with
/// `sample_id` is treated as a header; lines starting with `#` are ignored.
/// `K` is taken from `expected_k`, or from the first row.
pub fn read_landmarks<R: Read>(reader: R, expected_k: Option<usize>) -> Result<Vec<(String, Shape)>> {
    let mut rdr = csv_reader(reader);
    let mut k = expected_k;
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if i == 0 && is_header(&record) {
            continue;
        }
        let line = line_of(&record);
        let id = record.get(0).unwrap_or_default();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty sample id".into(),
            });
        }
        let n = record.len() - 1;
        if n == 0 || n % 2 != 0 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected an even, non-zero number of coordinates, found {n}"),
            });
        }
        let expected = *k.get_or_insert(n / 2);
        if n / 2 != expected {
            return Err(Error::InconsistentK {
                line,
                expected,
                found: n / 2,
            });
        }
        let coords = record
            .iter()
            .skip(1)
            .map(|f| parse_number(f, line, "coordinate"))
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        let points = coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        rows.push((id.to_string(), Shape::new(points)));
    }
    Ok(rows)
}

pub fn parse_landmarks(path: &Path, expected_k: Option<usize>) -> Result<Vec<(String, Shape)>> {
    read_landmarks(File::open(path)?, expected_k)
}

/// Writes a header plus one row per shape. Values use shortest round-trip
/// formatting, so parsing the output gives back identical shapes.
pub fn write_landmarks<W: Write>(w: &mut W, rows: &[(String, Shape)]) -> Result<()> {
    let k = rows.first().map_or(0, |(_, s)| s.len());
    write!(w, "sample_id")?;
    for i in 0..k {
        write!(w, ",x{i},y{i}")?;
    }
    writeln!(w)?;
    for (id, shape) in rows {
        write!(w, "{id}")?;
        for p in shape.points() {
            write!(w, ",{},{}", p.x, p.y)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads `sample_id,width[,height]` rows into image metadata keyed by id.
/// A missing height is recorded as NaN; only widths enter the mirror transform.
pub fn read_widths<R: Read>(reader: R) -> Result<BTreeMap<String, ImageMeta>> {
    let mut rdr = csv_reader(reader);
    let mut out = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if i == 0 && is_header(&record) {
            continue;
        }
        let line = line_of(&record);
        if !(2..=3).contains(&record.len()) {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected sample_id,width[,height], found {} fields", record.len()),
            });
        }
        let id = record[0].to_string();
        let width = parse_number(&record[1], line, "width")?;
        let height = match record.get(2) {
            Some(h) => parse_number(h, line, "height")?,
            None => f64::NAN,
        };
        if width <= 0.0 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("width must be positive, found {width}"),
            });
        }
        if out.contains_key(&id) {
            return Err(Error::DuplicateId { line, id });
        }
        out.insert(id.clone(), ImageMeta::new(id, width, height));
    }
    Ok(out)
}

pub fn parse_widths(path: &Path) -> Result<BTreeMap<String, ImageMeta>> {
    read_widths(File::open(path)?)
}
