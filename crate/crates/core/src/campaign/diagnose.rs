use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    ensure_dir, io_err, write_json, CampaignError, ConditionSource, ErrorLine, RecordLine, RunConfig, MANIFEST_FILE,
    RECORDS_FILE,
};
use crate::geometry::{diagnose_point, sample_orthonormal_basis, LatentPoint, SubspaceBasis};
use crate::seeding::{derive_seed, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub condition: String,
    /// Byte offset of the cell's line in the records file.
    pub offset: u64,
    pub status: CellStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub total_cells: usize,
    pub complete: bool,
    pub cells: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub total_cells: usize,
    /// Cells found intact from an earlier run.
    pub resumed: usize,
    pub computed: usize,
    pub errors: usize,
}

struct Cell {
    seed: u64,
    condition: usize,
}

/// Runs every `(seed, condition)` cell and appends one line per cell to
/// `records.jsonl` in canonical order: seeds ascending, conditions in config
/// order.
///
/// Work proceeds in batches; after each batch the records are flushed and
/// the manifest is replaced atomically. On restart with the same config the
/// longest valid canonical prefix of the records file is kept, a torn final
/// line is cut off, and only the remaining cells are computed. Without a
/// manifest the directory is treated as fresh.
///
/// The subspace basis is drawn once from the run seed and shared by every
/// cell with the same latent dimension.
pub fn cmd_diagnose(config: &RunConfig) -> Result<DiagnoseReport, CampaignError> {
    config.validate()?;
    let out = &config.out_dir;
    ensure_dir(out)?;
    let sources: Vec<ConditionSource> = config.conditions.iter().map(ConditionSource::resolve).collect::<Result<_, _>>()?;
    let seeds = config.seed_list();
    let cells: Vec<Cell> = seeds
        .iter()
        .flat_map(|&seed| (0..sources.len()).map(move |condition| Cell { seed, condition }))
        .collect();

    let mut bases: HashMap<usize, SubspaceBasis> = HashMap::new();
    for (source, cond) in sources.iter().zip(&config.conditions) {
        let dim = source.generator(seeds[0])?.descriptor().latent_dim;
        if let std::collections::hash_map::Entry::Vacant(slot) = bases.entry(dim) {
            let basis = sample_orthonormal_basis(dim, config.probe.subspace_dim, derive_seed(config.seed, stream::BASIS))
                .map_err(|e| CampaignError::Config(format!("condition {}: {e}", cond.name)))?;
            slot.insert(basis);
        }
    }

    let records_path = out.join(RECORDS_FILE);
    let manifest_path = out.join(MANIFEST_FILE);
    let hash = config.content_hash();
    let mut entries = resume(&records_path, &manifest_path, &hash, config, &cells)?;
    let resumed = entries.len();

    let mut file = OpenOptions::new().create(true).append(true).open(&records_path).map_err(io_err(&records_path))?;
    let mut offset = file.metadata().map_err(io_err(&records_path))?.len();
    let settings = config.settings();
    let pool = config.thread_pool()?;
    let batch = pool.current_num_threads().max(1) * 4;
    let mut manifest = CampaignManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        total_cells: cells.len(),
        complete: false,
        cells: Vec::new(),
    };

    let compute = |cell: &Cell| -> RecordLine {
        let name = &config.conditions[cell.condition].name;
        let result = sources[cell.condition].generator(cell.seed).and_then(|g| {
            let dim = g.descriptor().latent_dim;
            let basis = bases
                .get(&dim)
                .ok_or_else(|| CampaignError::Generator(format!("latent dimension changed to {dim} at seed {}", cell.seed)))?;
            let z = LatentPoint::gaussian(cell.seed, dim);
            diagnose_point(g.as_ref(), basis, &z, cell.seed, &settings)
                .map_err(|e| CampaignError::Generator(e.to_string()))
        });
        match result {
            Ok(d) => {
                let record = d.into_record(cell.seed, name.clone());
                match record.validate() {
                    Ok(()) => RecordLine::Record(record),
                    Err(e) => error_line(cell.seed, name, format!("record failed validation: {e}")),
                }
            }
            Err(e) => error_line(cell.seed, name, e.to_string()),
        }
    };

    let mut computed = 0;
    for chunk in cells[resumed..].chunks(batch) {
        let lines: Vec<RecordLine> = pool.install(|| chunk.par_iter().map(compute).collect());
        let mut buf = String::new();
        for line in &lines {
            let (seed, condition) = line.cell();
            entries.push(ManifestEntry {
                seed,
                condition: condition.to_string(),
                offset: offset + buf.len() as u64,
                status: status_of(line),
            });
            buf.push_str(&line.to_json());
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err(&records_path))?;
        file.flush().map_err(io_err(&records_path))?;
        file.sync_data().map_err(io_err(&records_path))?;
        offset += buf.len() as u64;
        computed += lines.len();
        manifest.cells.clone_from(&entries);
        write_json(&manifest_path, &manifest)?;
    }

    manifest.cells = entries;
    manifest.complete = true;
    write_json(&manifest_path, &manifest)?;
    let errors = manifest.cells.iter().filter(|c| c.status == CellStatus::Error).count();
    Ok(DiagnoseReport { total_cells: cells.len(), resumed, computed, errors })
}

fn error_line(seed: u64, condition: &str, error: String) -> RecordLine {
    RecordLine::Error(ErrorLine { seed, condition: condition.to_string(), error })
}

fn status_of(line: &RecordLine) -> CellStatus {
    match line {
        RecordLine::Record(_) => CellStatus::Ok,
        RecordLine::Error(_) => CellStatus::Error,
    }
}

/// Returns manifest entries for the intact prefix of an earlier run and
/// truncates the records file right after it.
fn resume(
    records_path: &Path,
    manifest_path: &Path,
    hash: &str,
    config: &RunConfig,
    cells: &[Cell],
) -> Result<Vec<ManifestEntry>, CampaignError> {
    let manifest: Option<CampaignManifest> = match fs::read(manifest_path) {
        Ok(bytes) => serde_json::from_slice(&bytes).ok(),
        Err(_) => None,
    };
    let Some(manifest) = manifest else {
        fs::write(records_path, b"").map_err(io_err(records_path))?;
        return Ok(Vec::new());
    };
    if manifest.config_hash != hash {
        return Err(CampaignError::Config(format!(
            "{} belongs to a campaign with a different configuration; use a fresh output directory",
            manifest_path.parent().unwrap_or(manifest_path).display()
        )));
    }
    let bytes = fs::read(records_path).unwrap_or_default();
    let mut entries = Vec::new();
    let mut valid = 0usize;
    for (cell, line) in cells.iter().zip(bytes.split_inclusive(|&b| b == b'\n')) {
        if line.last() != Some(&b'\n') {
            break;
        }
        let Ok(text) = std::str::from_utf8(&line[..line.len() - 1]) else { break };
        let Ok(parsed) = RecordLine::parse(text) else { break };
        let expected = (cell.seed, config.conditions[cell.condition].name.as_str());
        if parsed.cell() != expected {
            break;
        }
        entries.push(ManifestEntry {
            seed: cell.seed,
            condition: expected.1.to_string(),
            offset: valid as u64,
            status: status_of(&parsed),
        });
        valid += line.len();
    }
    if valid != bytes.len() {
        let f = OpenOptions::new().write(true).open(records_path).map_err(io_err(records_path))?;
        f.set_len(valid as u64).map_err(io_err(records_path))?;
        f.sync_all().map_err(io_err(records_path))?;
    }
    Ok(entries)
}
