//! CSV and manifest output.
//!
//! Every file uses `\n` line endings and formats floats with 9 significant
//! digits (C `%.9g` style), so identical runs give identical bytes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{SimulationConfig, BS_POSITION};
use crate::drop::ChannelSnapshot;
use crate::error::{Error, Result};
use crate::evolution::{Environment, WarningCounters};
use crate::field::CorrelatedGridMap;
use crate::los::LosStateMap;

pub const CIR_FILE: &str = "cir.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ANGLES_FILE: &str = "angles.csv";
pub const DELAYS_FILE: &str = "delays.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Formats like C's `%.9g`.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_fraction(mantissa), sign, exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Reproducibility record for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub rng_seed: u64,
    /// Resolved configuration; enough to reproduce the run.
    pub config: SimulationConfig,
    pub start_time_unix_s: f64,
    pub end_time_unix_s: f64,
    pub snapshots: usize,
    pub warnings: WarningCountsRecord,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningCountsRecord {
    pub delay_clamps: u64,
    pub azimuth_wraps: u64,
    pub zenith_reflections: u64,
    pub los_transitions: u64,
}

impl From<WarningCounters> for WarningCountsRecord {
    fn from(c: WarningCounters) -> Self {
        Self {
            delay_clamps: c.delay_clamps,
            azimuth_wraps: c.azimuth_wraps,
            zenith_reflections: c.zenith_reflections,
            los_transitions: c.los_transitions,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` through `f` into `dir/name` and returns its record.
fn emit(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<OutputFile> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    f(&mut buf).map_err(io_err(&path))?;
    fs::write(&path, &buf).map_err(io_err(&path))?;
    Ok(OutputFile {
        name: name.to_string(),
        bytes: buf.len() as u64,
        sha256: hex::encode(Sha256::digest(&buf)),
    })
}

fn deg(rad: f64) -> String {
    fmt_sig9(rad.to_degrees())
}

pub fn write_cir<W: Write>(snapshots: &[ChannelSnapshot], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "time_s,step,cluster_id,subpath_id,excess_delay_ns,power_dbm,phase_rad,aod_az_deg,zod_deg,aoa_az_deg,zoa_deg,is_los"
    )?;
    for snap in snapshots {
        for (c, s) in snap.subpaths() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_sig9(snap.time),
                snap.step,
                c.id,
                s.id,
                fmt_sig9(s.excess_delay_ns),
                fmt_sig9(10.0 * s.power_mw.log10()),
                fmt_sig9(s.phase_rad),
                deg(s.aod_az),
                deg(s.zod),
                deg(s.aoa_az),
                deg(s.zoa),
                u8::from(s.is_los_component)
            )?;
        }
    }
    Ok(())
}

pub fn write_summary<W: Write>(snapshots: &[ChannelSnapshot], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "time_s,x_m,y_m,d_2d_m,d_3d_m,los_state,path_loss_db,rx_power_dbm,num_clusters"
    )?;
    for s in snapshots {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig9(s.time),
            fmt_sig9(s.ut_position.x),
            fmt_sig9(s.ut_position.y),
            fmt_sig9(s.d_2d),
            fmt_sig9(s.d_3d),
            s.los_state,
            fmt_sig9(s.path_loss_db),
            fmt_sig9(s.rx_power_dbm()),
            s.clusters.len()
        )?;
    }
    Ok(())
}

pub fn write_angles<W: Write>(snapshots: &[ChannelSnapshot], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "time_s,step,cluster_id,subpath_id,aod_az_deg,zod_deg,aoa_az_deg,zoa_deg"
    )?;
    for snap in snapshots {
        for (c, s) in snap.subpaths() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                fmt_sig9(snap.time),
                snap.step,
                c.id,
                s.id,
                deg(s.aod_az),
                deg(s.zod),
                deg(s.aoa_az),
                deg(s.zoa)
            )?;
        }
    }
    Ok(())
}

pub fn write_delays<W: Write>(snapshots: &[ChannelSnapshot], mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_s,step,cluster_id,cluster_excess_delay_ns")?;
    for snap in snapshots {
        for c in &snap.clusters {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_sig9(snap.time),
                snap.step,
                c.id,
                fmt_sig9(c.excess_delay_ns())
            )?;
        }
    }
    Ok(())
}

fn emit_map(dir: &Path, name: &str, map: &CorrelatedGridMap) -> Result<OutputFile> {
    emit(dir, name, |buf| map.write_csv(buf))
}

/// Map CSVs of the run environment.
pub fn write_environment_maps(env: &Environment, dir: &Path) -> Result<Vec<OutputFile>> {
    let mut files = vec![
        emit_map(dir, "map_los_field.csv", &env.los_map)?,
        emit_map(
            dir,
            "map_los_state.csv",
            &LosStateMap::from_gaussian(&env.los_map, &env.los_model, BS_POSITION).underlying,
        )?,
        emit_map(dir, "map_large_scale_sf.csv", &env.large_scale_sf)?,
    ];
    for (c, map) in env.shadowing.cluster.iter().enumerate() {
        files.push(emit_map(dir, &format!("map_sigma_z_c{c}.csv"), map)?);
    }
    for (c, maps) in env.shadowing.subpath.iter().enumerate() {
        for (k, map) in maps.iter().enumerate() {
            files.push(emit_map(
                dir,
                &format!("map_sigma_u_c{c}_s{}.csv", k + 1),
                map,
            )?);
        }
    }
    Ok(files)
}

/// Writes a standalone map CSV, returning its record.
pub fn write_map_file(dir: &Path, name: &str, map: &CorrelatedGridMap) -> Result<OutputFile> {
    emit_map(dir, name, map)
}

/// Writes the four CSVs (plus environment maps when given), fills in the
/// manifest's output list and writes `manifest.json` last.
pub fn write_outputs(
    snapshots: &[ChannelSnapshot],
    manifest: &mut RunManifest,
    out_dir: &Path,
    maps: Option<&Environment>,
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = vec![
        emit(out_dir, CIR_FILE, |b| write_cir(snapshots, b))?,
        emit(out_dir, SUMMARY_FILE, |b| write_summary(snapshots, b))?,
        emit(out_dir, ANGLES_FILE, |b| write_angles(snapshots, b))?,
        emit(out_dir, DELAYS_FILE, |b| write_delays(snapshots, b))?,
    ];
    if let Some(env) = maps {
        files.extend(write_environment_maps(env, out_dir)?);
    }
    manifest.outputs = files;
    let path = out_dir.join(MANIFEST_FILE);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, manifest)
        .map_err(std::io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    Ok(path)
}
