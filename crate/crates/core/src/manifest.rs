//! Labeled sample lists stored as CSV.
//!
//! Header: `sample_id,source,path_or_theta,seed,azimuth_deg,azimuth_bin`.
//! For glyph rows `path_or_theta` holds the rendering angle; for real and
//! synthetic rows it is an image path, relative paths resolved against the
//! manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circular::CircularLabelSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Real,
    Synthetic,
    Glyph,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Real => "Real",
            Source::Synthetic => "Synthetic",
            Source::Glyph => "Glyph",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(Source::Real),
            "synthetic" | "synth" => Ok(Source::Synthetic),
            "glyph" => Ok(Source::Glyph),
            _ => Err(Error::input(format!("unknown source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sample_id: String,
    pub source: Source,
    pub path_or_theta: String,
    pub seed: u64,
    pub azimuth_deg: f64,
    pub azimuth_bin: usize,
}

impl ManifestRow {
    /// Glyph rows reference their angle; everything else an image file.
    pub fn is_rendered_glyph(&self) -> bool {
        self.source == Source::Glyph || self.path_or_theta.parse::<f64>().is_ok()
    }

    pub fn glyph_theta(&self) -> Option<f64> {
        self.path_or_theta.parse().ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative image paths are resolved against.
    pub base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn new(rows: Vec<ManifestRow>) -> Self {
        Self {
            rows,
            base_dir: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks id uniqueness and that every bin agrees with its angle under `space`.
    pub fn validate(&self, space: &CircularLabelSpace) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.rows.len());
        for row in &self.rows {
            if !seen.insert(row.sample_id.as_str()) {
                return Err(Error::input(format!(
                    "duplicate sample_id {:?}",
                    row.sample_id
                )));
            }
            let expected = space.degrees_to_bin(row.azimuth_deg);
            if row.azimuth_bin != expected {
                return Err(Error::input(format!(
                    "sample {:?}: bin {} inconsistent with {}° (expected {expected} for K = {})",
                    row.sample_id,
                    row.azimuth_bin,
                    row.azimuth_deg,
                    space.k()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve_path(&self, row: &ManifestRow) -> PathBuf {
        let p = Path::new(&row.path_or_theta);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
        Ok(Self::new(rows))
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.rows.is_empty() {
            wtr.write_record([
                "sample_id",
                "source",
                "path_or_theta",
                "seed",
                "azimuth_deg",
                "azimuth_bin",
            ])?;
        }
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush().map_err(|e| Error::io("writing manifest", e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening manifest {}", path.display()), e))?;
        let mut m = Self::read_from(std::io::BufReader::new(file))?;
        m.base_dir = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating manifest {}", path.display()), e))?;
        self.write_to(std::io::BufWriter::new(file))
    }
}
