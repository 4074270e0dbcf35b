//! Output directory bookkeeping and file formats.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geomppca_core::Manifold;
use nalgebra::DVector;
use serde::Serialize;

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Files written by one run. Dropping it without [`Outputs::commit`] deletes
/// them again, together with the directory if the run created it.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, written: Vec::new(), committed: false })
    }

    fn claim(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        path
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.claim(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.claim(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        core::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// `x1..xd`.
pub fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

pub fn emb_header() -> Vec<String> {
    ["emb_x", "emb_y", "emb_z"].iter().map(|s| s.to_string()).collect()
}

/// Embedded coordinates: the surface embedding, or the chart point padded with
/// zeros for flat charts of dimension at most 3, or NaN.
pub fn embedding(chart: &dyn Manifold, x: &DVector<f64>) -> [f64; 3] {
    if let Some(e) = chart.embed(x.as_slice()) {
        return e;
    }
    if x.len() <= 3 {
        let mut e = [0.0; 3];
        e[..x.len()].copy_from_slice(x.as_slice());
        e
    } else {
        [f64::NAN; 3]
    }
}

pub fn point_fields(chart: &dyn Manifold, x: &DVector<f64>) -> Vec<String> {
    x.iter().copied().chain(embedding(chart, x)).map(num).collect()
}

/// Reads data points of dimension `d` from a CSV file with a header row.
pub fn read_points(path: &Path, d: usize) -> Result<Vec<DVector<f64>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let named: Option<Vec<usize>> =
        (1..=d).map(|i| header.iter().position(|h| h.trim() == format!("x{i}"))).collect();
    let columns = match named {
        Some(c) => c,
        None if header.len() == d => (0..d).collect(),
        None => bail!("{}: expected columns x1..x{d} or exactly {d} columns", path.display()),
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let x: Result<Vec<f64>> = columns
            .iter()
            .map(|&c| {
                let field = rec.get(c).unwrap_or("");
                field.trim().parse::<f64>().with_context(|| format!("{} row {}: '{field}'", path.display(), line + 1))
            })
            .collect();
        out.push(DVector::from_vec(x?));
    }
    if out.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(out)
}
