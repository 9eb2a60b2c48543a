//! Dataset files, as text or binary. Both round-trip bit-exactly.
//!
//! Text: an optional `# provenance` line, then CSV with header
//! `timestep,ix,iy,iz,<38 feature names>,target_K,category`; names holding
//! commas are quoted. Floats use the shortest representation that parses
//! back to the same value.
//!
//! Binary (little-endian):
//!
//! ```text
//! "VXDS" | u32 version | u32 n_features | u64 n_rows | u32 len | provenance
//! per row: u64 timestep | u32 ix | u32 iy | u32 iz | u8 category
//!          | f64 x n_features | f64 target
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use voxtherm_core::features::{Dataset, FeatureRow, VoxelCategory, FEATURE_COUNT, FEATURE_NAMES};
use voxtherm_core::VoxelIndex;

use crate::error::{Error, Result};
use crate::history_io::csv_error;

pub const DATASET_MAGIC: &[u8; 4] = b"VXDS";
const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Text,
    Binary,
}

pub fn dataset_header() -> Vec<String> {
    ["timestep", "ix", "iy", "iz"]
        .into_iter()
        .chain(FEATURE_NAMES)
        .chain(["target_K", "category"])
        .map(String::from)
        .collect()
}

pub fn write_dataset(path: &Path, dataset: &Dataset, format: DataFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        DataFormat::Text => write_text(&mut w, dataset),
        DataFormat::Binary => write_binary(&mut w, dataset),
    }
    .and_then(|()| w.flush())
    .map_err(|e| Error::io(path, e))
}

fn write_text(w: &mut impl Write, dataset: &Dataset) -> std::io::Result<()> {
    if !dataset.provenance.is_empty() {
        writeln!(w, "# {}", dataset.provenance.replace('\n', " "))?;
    }
    // several feature names contain commas, so fields go through the csv quoting
    let mut out = csv::Writer::from_writer(w);
    out.write_record(dataset_header())?;
    let mut fields = Vec::with_capacity(FEATURE_COUNT + 6);
    for r in &dataset.rows {
        fields.clear();
        fields.extend([r.timestep, r.voxel.ix, r.voxel.iy, r.voxel.iz].map(|v| v.to_string()));
        fields.extend(r.features.iter().map(f64::to_string));
        fields.push(r.target.to_string());
        fields.push(r.category.name().to_string());
        out.write_record(&fields)?;
    }
    out.flush()
}

fn write_binary(w: &mut impl Write, dataset: &Dataset) -> std::io::Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(FEATURE_COUNT as u32).to_le_bytes())?;
    w.write_all(&(dataset.rows.len() as u64).to_le_bytes())?;
    w.write_all(&(dataset.provenance.len() as u32).to_le_bytes())?;
    w.write_all(dataset.provenance.as_bytes())?;
    for r in &dataset.rows {
        w.write_all(&(r.timestep as u64).to_le_bytes())?;
        for c in [r.voxel.ix, r.voxel.iy, r.voxel.iz] {
            w.write_all(&(c as u32).to_le_bytes())?;
        }
        w.write_all(&[r.category.code()])?;
        for x in &r.features {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&r.target.to_le_bytes())?;
    }
    Ok(())
}

/// Read either format; binary files are recognised by their magic bytes.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let head = r.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(DATASET_MAGIC) {
        read_binary(path, r)
    } else {
        read_text(path, r)
    }
}

fn read_text(path: &Path, mut r: BufReader<File>) -> Result<Dataset> {
    let mut provenance = String::new();
    if r.fill_buf().map_err(|e| Error::io(path, e))?.starts_with(b"#") {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        provenance = line
            .trim_end_matches(['\n', '\r'])
            .trim_start_matches('#')
            .trim_start()
            .to_string();
    }
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(dataset_header().iter().map(String::as_str)) {
        return Err(Error::format(path, "unexpected dataset header"));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::format(path, format!("row {}: {what}", line + 1));
        if record.len() != FEATURE_COUNT + 6 {
            return Err(bad("wrong field count"));
        }
        let int = |i: usize| record[i].parse::<usize>().map_err(|_| bad("bad integer"));
        let float = |i: usize| record[i].parse::<f64>().map_err(|_| bad("bad number"));
        let mut features = [0.0; FEATURE_COUNT];
        for (j, x) in features.iter_mut().enumerate() {
            *x = float(4 + j)?;
        }
        rows.push(FeatureRow {
            timestep: int(0)?,
            voxel: VoxelIndex::new(int(1)?, int(2)?, int(3)?),
            features,
            target: float(4 + FEATURE_COUNT)?,
            category: VoxelCategory::from_name(&record[5 + FEATURE_COUNT])
                .ok_or_else(|| bad("unknown category"))?,
        });
    }
    Ok(Dataset { rows, provenance })
}

fn read_binary(path: &Path, mut r: impl Read) -> Result<Dataset> {
    let short = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(path, "truncated dataset")
        } else {
            Error::io(path, e)
        }
    };
    let mut buf4 = [0u8; 4];
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf4).map_err(short)?;
    let mut u32le = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut buf4).map_err(short)?;
        Ok(u32::from_le_bytes(buf4))
    };
    let version = u32le(&mut r)?;
    if version != DATASET_VERSION {
        return Err(Error::format(path, format!("unsupported dataset version {version}")));
    }
    let n_features = u32le(&mut r)? as usize;
    if n_features != FEATURE_COUNT {
        return Err(Error::format(
            path,
            format!("{n_features} features, expected {FEATURE_COUNT}"),
        ));
    }
    r.read_exact(&mut buf8).map_err(short)?;
    let n_rows = u64::from_le_bytes(buf8) as usize;
    let plen = u32le(&mut r)? as usize;
    let mut pbytes = vec![0u8; plen];
    r.read_exact(&mut pbytes).map_err(short)?;
    let provenance =
        String::from_utf8(pbytes).map_err(|_| Error::format(path, "provenance is not UTF-8"))?;

    const ROW_BYTES: usize = 8 + 12 + 1 + 8 * FEATURE_COUNT + 8;
    let mut row = [0u8; ROW_BYTES];
    let mut rows = Vec::with_capacity(n_rows.min(1 << 24));
    let f64_at = |b: &[u8], at: usize| f64::from_le_bytes(b[at..at + 8].try_into().unwrap());
    let u32_at = |b: &[u8], at: usize| u32::from_le_bytes(b[at..at + 4].try_into().unwrap()) as usize;
    for i in 0..n_rows {
        r.read_exact(&mut row).map_err(short)?;
        let mut features = [0.0; FEATURE_COUNT];
        for (j, x) in features.iter_mut().enumerate() {
            *x = f64_at(&row, 21 + 8 * j);
        }
        rows.push(FeatureRow {
            timestep: u64::from_le_bytes(row[..8].try_into().unwrap()) as usize,
            voxel: VoxelIndex::new(u32_at(&row, 8), u32_at(&row, 12), u32_at(&row, 16)),
            category: VoxelCategory::from_code(row[20])
                .ok_or_else(|| Error::format(path, format!("row {i}: bad category code")))?,
            features,
            target: f64_at(&row, 21 + 8 * FEATURE_COUNT),
        });
    }
    if r.read(&mut buf4).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after last row"));
    }
    Ok(Dataset { rows, provenance })
}
