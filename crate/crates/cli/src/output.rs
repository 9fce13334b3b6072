use std::fs;
use std::path::{Path, PathBuf};

use depthforge::depth::{BitMask, Grid};
use depthforge::io::{to_gray8, write_mask_pgm, write_pfm, write_pgm};
use depthforge::run::RunConfig;
use depthforge::Result;

/// Name of the resolved configuration written next to every output.
pub const RESOLVED_CONFIG: &str = "config.txt";

/// Output directory of a run, created if missing.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out_dir)?;
        let out = Self {
            root: cfg.out_dir.clone(),
        };
        out.text(RESOLVED_CONFIG, &cfg.to_key_values().to_text())?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        Ok(fs::write(self.path(name), body)?)
    }

    pub fn csv(&self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut body = String::with_capacity(64 * (rows.len() + 1));
        body.push_str(header);
        body.push('\n');
        for r in rows {
            body.push_str(r);
            body.push('\n');
        }
        self.text(name, &body)
    }

    pub fn pfm(&self, name: &str, grid: &Grid<f64>) -> Result<()> {
        write_pfm(grid, self.path(name))
    }

    pub fn mask(&self, name: &str, mask: &BitMask) -> Result<()> {
        write_mask_pgm(mask, self.path(name))
    }

    /// Linear grayscale panel over the field's own range, or `range`.
    pub fn panel(&self, name: &str, grid: &Grid<f64>, range: Option<(f64, f64)>) -> Result<()> {
        write_pgm(&to_gray8(grid, range, 1.0), self.path(name))
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}
