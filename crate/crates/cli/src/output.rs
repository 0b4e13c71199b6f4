//! Artifact writing: CSV result tables plus a TOML metadata record that
//! embeds the full manifest snapshot, so any run can be reproduced from its
//! own metadata.

use crate::experiments::{RunOutput, Table};
use crate::manifest::ExperimentManifest;
use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub fn manifest_sha256(manifest: &ExperimentManifest) -> Result<String> {
    let canonical = toml::to_string(manifest).context("serializing manifest")?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_table(dir: &Path, table: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(&table.header)?;
    for row in &table.rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(path)
}

/// Write all tables and the metadata record into `dir`. Returns the written
/// file paths (metadata last).
pub fn write_run(
    dir: &Path,
    manifest: &ExperimentManifest,
    output: &RunOutput,
    wall_seconds: f64,
    started_unix: u64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for table in &output.tables {
        written.push(write_table(dir, table)?);
    }

    let mut record = toml::value::Table::new();
    record.insert("kind".into(), toml::Value::String(manifest.kind.name().into()));
    record.insert("seed".into(), toml::Value::Integer(manifest.seed as i64));
    record.insert(
        "config_sha256".into(),
        toml::Value::String(manifest_sha256(manifest)?),
    );
    record.insert(
        "crate_version".into(),
        toml::Value::String(env!("CARGO_PKG_VERSION").into()),
    );
    record.insert("started_unix".into(), toml::Value::Integer(started_unix as i64));
    record.insert("wall_seconds".into(), toml::Value::Float(wall_seconds));
    record.insert(
        "tables".into(),
        toml::Value::Array(
            output
                .tables
                .iter()
                .map(|t| toml::Value::String(format!("{}.csv", t.name)))
                .collect(),
        ),
    );
    record.insert(
        "figures".into(),
        toml::Value::Array(
            manifest
                .kind
                .figures()
                .iter()
                .map(|&f| toml::Value::String(f.into()))
                .collect(),
        ),
    );
    if !output.derived.is_empty() {
        let mut derived = toml::value::Table::new();
        for (key, value) in &output.derived {
            derived.insert(key.clone(), value.clone());
        }
        record.insert("derived".into(), toml::Value::Table(derived));
    }
    let snapshot =
        toml::Value::try_from(manifest).context("embedding manifest snapshot")?;
    record.insert("manifest".into(), snapshot);

    let meta_path = dir.join("run.toml");
    std::fs::write(&meta_path, toml::to_string_pretty(&toml::Value::Table(record))?)
        .with_context(|| format!("writing {}", meta_path.display()))?;
    written.push(meta_path);
    Ok(written)
}
