//! CSV tables and run manifests.
//!
//! Every file is rendered in memory, then written to a temporary file in the
//! target directory and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::scenarios::{Cell, Check, RunOutput, Table};

pub const TOOLKIT: &str = "collide";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.toml";

/// Where the seed of a run came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Flag,
    Environment,
    Config,
    Default,
}

impl SeedSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedSource::Flag => "flag",
            SeedSource::Environment => "COLLIDE_SEED",
            SeedSource::Config => "config",
            SeedSource::Default => "default",
        }
    }
}

/// Reals in 17 significant digits; infinities as `inf`.
pub fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Int(i) => i.to_string(),
        Cell::Real(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.to_string(),
        Cell::Real(x) => format!("{x:.16e}"),
        Cell::Empty => String::new(),
    }
}

/// The table restricted to `columns` (in table order), or `None` if no column survives.
pub fn select(table: &Table, columns: Option<&[String]>) -> Option<(Vec<&'static str>, Vec<Vec<Cell>>)> {
    let keep: Vec<usize> = (0..table.def.columns.len())
        .filter(|&i| columns.is_none_or(|cs| cs.iter().any(|c| c == table.def.columns[i])))
        .collect();
    if keep.is_empty() {
        return None;
    }
    let header = keep.iter().map(|&i| table.def.columns[i]).collect();
    let rows = table.rows.iter().map(|r| keep.iter().map(|&i| r[i]).collect()).collect();
    Some((header, rows))
}

pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> std::io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(format_cell))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tolerances of the library in force for every run.
pub fn library_tolerances() -> Vec<(&'static str, f64)> {
    use collide::{linalg, master_eq, nonmarkov, states, thermo, trajectories};
    vec![
        ("linalg.hermitian", linalg::HERMITIAN_TOL),
        ("states.trace", states::TRACE_TOL),
        ("states.positivity", states::POSITIVITY_TOL),
        ("states.tail_mass", states::TAIL_MASS_TOL),
        ("master_eq.psd", master_eq::PSD_TOL),
        ("master_eq.max_step_fraction", master_eq::MAX_STEP_FRACTION),
        ("trajectories.completeness", trajectories::COMPLETENESS_TOL),
        ("trajectories.norm", trajectories::NORM_TOL),
        ("trajectories.weak_measurement_guard", trajectories::WEAK_MEASUREMENT_GUARD),
        ("thermo.first_law", thermo::FIRST_LAW_TOL),
        ("thermo.sigma", thermo::SIGMA_TOL),
        ("thermo.decomposition", thermo::DECOMPOSITION_TOL),
        ("nonmarkov.weight", nonmarkov::WEIGHT_TOL),
        ("nonmarkov.delay_step_guard", nonmarkov::DELAY_STEP_GUARD),
    ]
}

pub struct ManifestInfo<'a> {
    pub config: &'a ScenarioConfig,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub wall_clock_seconds: f64,
    pub files: &'a [String],
    pub checks: &'a [Check],
}

pub fn render_manifest(info: &ManifestInfo<'_>) -> String {
    let cfg = info.config;
    let mut root = toml::Table::new();
    root.insert("toolkit".into(), TOOLKIT.into());
    root.insert("version".into(), VERSION.into());
    root.insert("scenario".into(), cfg.def.name.into());
    root.insert("family".into(), cfg.def.family.command().into());
    root.insert("config_sha256".into(), sha256_hex(cfg.canonical().as_bytes()).into());
    // TOML integers are signed; seeds above i64::MAX are stored as strings
    root.insert(
        "seed".into(),
        i64::try_from(info.seed).map_or_else(|_| info.seed.to_string().into(), toml::Value::Integer),
    );
    root.insert("seed_source".into(), info.seed_source.as_str().into());
    root.insert("wall_clock_seconds".into(), info.wall_clock_seconds.into());
    root.insert("files".into(), info.files.to_vec().into());
    let mut tolerances: toml::Table = library_tolerances().into_iter().map(|(k, v)| (k.to_string(), v.into())).collect();
    if let Some(tol) = cfg.numeric_opt("tolerance") {
        tolerances.insert("scenario.check".into(), tol.into());
    }
    root.insert("tolerances".into(), tolerances.into());
    let checks: Vec<toml::Value> = info
        .checks
        .iter()
        .map(|c| {
            let mut t = toml::Table::new();
            t.insert("name".into(), c.name.clone().into());
            t.insert("passed".into(), c.passed.into());
            t.insert("detail".into(), c.detail.clone().into());
            t.into()
        })
        .collect();
    root.insert("checks".into(), checks.into());
    toml::to_string(&root).expect("plain tables serialize")
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

/// Writes the CSV tables of a run and then its manifest; returns the CSV file names.
pub fn write_run(
    dir: &Path,
    config: &ScenarioConfig,
    output: &RunOutput,
    seed: u64,
    seed_source: SeedSource,
    wall_clock_seconds: f64,
) -> std::io::Result<Vec<String>> {
    let mut rendered = Vec::new();
    for table in &output.tables {
        if let Some((header, rows)) = select(table, config.columns.as_deref()) {
            rendered.push((table.def.file.to_string(), render_csv(&header, &rows)?));
        }
    }
    std::fs::create_dir_all(dir)?;
    let files: Vec<String> = rendered.iter().map(|(name, _)| name.clone()).collect();
    for (name, bytes) in &rendered {
        write_atomic(dir, name, bytes)?;
    }
    let manifest = render_manifest(&ManifestInfo {
        config,
        seed,
        seed_source,
        wall_clock_seconds,
        files: &files,
        checks: &output.checks,
    });
    write_atomic(dir, MANIFEST, manifest.as_bytes())?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_use_seventeen_significant_digits() {
        assert_eq!(format_cell(&Cell::Real(0.1)), "1.0000000000000001e-1");
        assert_eq!(format_cell(&Cell::Real(-2.5)), "-2.5000000000000000e0");
        assert_eq!(format_cell(&Cell::Int(42)), "42");
        assert_eq!(format_cell(&Cell::Real(f64::INFINITY)), "inf");
        assert_eq!(format_cell(&Cell::Empty), "");
    }

    #[test]
    fn csv_has_header_and_crlf_rows() {
        let bytes = render_csv(&["n", "x"], &[vec![Cell::Int(0), Cell::Real(1.0)]]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "n,x\r\n0,1.0000000000000000e0\r\n");
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
