//! Artifact writers. Floats use Rust's shortest round-trip formatting so the
//! same run always produces the same bytes.

use std::path::{Path, PathBuf};

use llso_core::TraceRow;

use crate::error::{CliError, CliResult};

pub struct Csv {
    path: PathBuf,
    w: csv::Writer<std::fs::File>,
}

impl Csv {
    pub fn create(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref().to_path_buf();
        let w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e.into()))?;
        Ok(Csv { path, w })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w
            .write_record(fields)
            .map_err(|e| CliError::io(&self.path, e.into()))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> CliResult<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRow]) -> CliResult<()> {
    let mut out = Csv::create(path)?;
    out.row(TraceRow::HEADER.split(','))?;
    for r in trace {
        out.row([
            r.generation.to_string(),
            r.gbest_fitness.to_string(),
            r.gbest_f.to_string(),
            r.mean_fitness.to_string(),
            r.diversity.to_string(),
            r.num_levels.to_string(),
            r.phi.to_string(),
            r.feasible_count.to_string(),
        ])?;
    }
    out.finish()
}
