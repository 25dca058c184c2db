//! CSV files with an audit header: tool version, model hash, grid step and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Tool name and version written into every header.
pub const TOOL: &str = concat!("rhawkes ", env!("CARGO_PKG_VERSION"));

/// Provenance written as `#` comment lines before the CSV header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub model_hash: String,
    pub delta: f64,
    pub seed: Option<u64>,
    pub extra: Vec<(String, String)>,
}

impl Header {
    pub fn new(model_hash: String, delta: f64, seed: Option<u64>) -> Self {
        Self {
            model_hash,
            delta,
            seed,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# {TOOL}"),
            format!("# model_sha256 {}", self.model_hash),
            format!("# delta {}", self.delta),
        ];
        if let Some(s) = self.seed {
            out.push(format!("# seed {s}"));
        }
        out.extend(self.extra.iter().map(|(k, v)| format!("# {k} {v}")));
        out
    }
}

/// Creates `dir` if needed and checks that it accepts files.
pub fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    let meta = std::fs::metadata(dir)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    if meta.permissions().readonly() {
        return Err(CliError::Config(format!(
            "output directory {} is not writable",
            dir.display()
        )));
    }
    Ok(())
}

/// Writes `rows` under `columns` to `dir/name` and returns the path.
pub fn write_csv<I>(
    dir: &Path,
    name: &str,
    header: &Header,
    columns: &[&str],
    rows: I,
) -> Result<PathBuf, CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let path = dir.join(name);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut file = BufWriter::new(File::create(&path).map_err(io)?);
    for line in header.lines() {
        writeln!(file, "{line}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(columns).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(path)
}

/// Reads a CSV written by [`write_csv`], skipping the comment lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let columns = r
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map(|r| r.iter().map(String::from).collect())
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    Ok((columns, rows))
}
