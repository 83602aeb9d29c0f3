//! Shared output plumbing: formats, dB conversion, CSV writing.

use anyhow::{Context, Result};
use clap::ValueEnum;
use std::io::Write;
use std::path::Path;

/// Version tag stamped as the first line of every CSV artifact.
pub const CSV_VERSION: &str = "# im3-kit v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// Powers below this floor clamp to a finite dB value so CSV stays
/// machine-parseable.
const POWER_FLOOR: f64 = 1e-40;

pub fn power_db(power: f64, db_ref: f64) -> f64 {
    10.0 * (power.max(POWER_FLOOR) / db_ref).log10()
}

/// Print CSV to stdout: version line, header, rows.
pub fn print_csv(header: &str, rows: impl IntoIterator<Item = String>) {
    println!("{CSV_VERSION}");
    println!("{header}");
    for row in rows {
        println!("{row}");
    }
}

/// Write a CSV file with the version line and header.
pub fn write_csv_file(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(out, "{CSV_VERSION}")?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}
