use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::SymmetryMap;

/// JSON form of a symmetry map:
/// `{"num_points": 5, "pairs": [[0, 4], [1, 3]], "self": [2]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryFile {
    pub num_points: usize,
    pub pairs: Vec<[usize; 2]>,
    #[serde(rename = "self")]
    pub self_points: Vec<usize>,
}

impl SymmetryFile {
    pub fn to_map(&self) -> Result<SymmetryMap> {
        if let Some([i, j]) = self.pairs.iter().find(|[i, j]| i >= j) {
            return Err(Error::InvalidConfig(format!(
                "symmetry pair [{i}, {j}] must be written with the smaller index first"
            )));
        }
        let pairs: Vec<(usize, usize)> = self.pairs.iter().map(|&[i, j]| (i, j)).collect();
        SymmetryMap::from_pairs(self.num_points, &pairs, &self.self_points)
    }
}

impl From<&SymmetryMap> for SymmetryFile {
    fn from(map: &SymmetryMap) -> Self {
        Self {
            num_points: map.num_points(),
            pairs: map.pairs().into_iter().map(|(i, j)| [i, j]).collect(),
            self_points: map.fixed_points(),
        }
    }
}

pub fn read_symmetry_map<R: Read>(reader: R) -> Result<SymmetryMap> {
    let file: SymmetryFile = serde_json::from_reader(reader)?;
    file.to_map()
}

pub fn parse_symmetry_file(path: &Path) -> Result<SymmetryMap> {
    read_symmetry_map(BufReader::new(File::open(path)?))
}

pub fn write_symmetry_map<W: Write>(w: &mut W, map: &SymmetryMap) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, &SymmetryFile::from(map))?;
    writeln!(w)?;
    Ok(())
}
