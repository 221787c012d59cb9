//! Binary detector container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `ARGUSMDL` |
//! | 4 | format version (`u32`) |
//! | 8 | header length `h` (`u64`) |
//! | h | JSON header ([`ModelHeader`]) |
//! | 8 | parameter count `p` (`u64`) |
//! | 8·p | parameters (`f64`) |
//!
//! Nothing may follow the parameters. Parameters are stored raw, so a saved
//! model scores bit-identically after loading.

use std::io::{Read, Write};

use argus_core::detector::DetectorModel;
use argus_core::nn::{Architecture, AutoencoderModel, TrainingMeta, Variant};
use argus_core::preprocess::StateMapCatalog;
use argus_core::threshold::{Calibration, ThresholdConfig, ThresholdState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ARGUSMDL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub n_devices: usize,
    pub window_len: usize,
    pub variant: Variant,
    pub architecture: Architecture,
    pub training: TrainingMeta,
    /// Hex SHA-256 of the catalog's canonical JSON.
    pub catalog_sha256: String,
    pub catalog: StateMapCatalog,
    pub threshold: ThresholdConfig,
    pub calibration: Calibration,
    pub bootstrap_t: f64,
    pub context_depth: usize,
    /// Threshold state of an interrupted detection run, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume: Option<ThresholdState>,
}

pub fn catalog_hash(catalog: &StateMapCatalog) -> String {
    let json = serde_json::to_vec(catalog).expect("catalog serializes");
    hex::encode(Sha256::digest(&json))
}

pub fn save_model(det: &DetectorModel, resume: Option<&ThresholdState>, mut out: impl Write) -> Result<()> {
    let arch = &det.model.arch;
    let header = ModelHeader {
        n_devices: arch.n_devices,
        window_len: arch.window_len,
        variant: arch.variant,
        architecture: arch.clone(),
        training: det.model.meta.clone(),
        catalog_sha256: catalog_hash(&det.catalog),
        catalog: det.catalog.clone(),
        threshold: det.threshold,
        calibration: det.calibration.clone(),
        bootstrap_t: det.bootstrap_t,
        context_depth: det.context_depth,
        resume: resume.cloned(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    out.write_all(&(det.model.params.len() as u64).to_le_bytes())?;
    let mut raw = Vec::with_capacity(det.model.params.len() * 8);
    for p in &det.model.params {
        raw.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&raw)?;
    Ok(())
}

pub fn model_to_bytes(det: &DetectorModel, resume: Option<&ThresholdState>) -> Vec<u8> {
    let mut buf = Vec::new();
    save_model(det, resume, &mut buf).expect("writing to memory");
    buf
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(bad(format!("truncated while reading {what}")));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn take_u64(bytes: &mut &[u8], what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(take(bytes, 8, what)?.try_into().expect("8 bytes")))
}

/// Parses a container, checking magic, version, catalog hash, shapes and
/// exact length.
pub fn model_from_bytes(mut bytes: &[u8]) -> Result<(DetectorModel, Option<ThresholdState>)> {
    let b = &mut bytes;
    if take(b, 8, "magic")? != MAGIC {
        return Err(bad("not an argus model file"));
    }
    let version = u32::from_le_bytes(take(b, 4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}, expected {VERSION}")));
    }
    let h = take_u64(b, "header length")? as usize;
    let header: ModelHeader = serde_json::from_slice(take(b, h, "header")?)?;
    let p = take_u64(b, "parameter count")? as usize;
    let raw = take(b, p.checked_mul(8).ok_or_else(|| bad("parameter count overflows"))?, "parameters")?;
    if !b.is_empty() {
        return Err(bad(format!("{} trailing bytes", b.len())));
    }

    if catalog_hash(&header.catalog) != header.catalog_sha256 {
        return Err(bad("catalog hash mismatch"));
    }
    let arch = header.architecture;
    if arch.n_devices != header.n_devices || arch.window_len != header.window_len || arch.variant != header.variant {
        return Err(bad("header fields disagree with the architecture"));
    }
    arch.validate()?;
    if arch.param_count() != p {
        return Err(bad(format!("architecture needs {} parameters, file has {p}", arch.param_count())));
    }
    let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let det = DetectorModel {
        catalog: header.catalog,
        model: AutoencoderModel { arch, params, meta: header.training },
        threshold: header.threshold,
        calibration: header.calibration,
        bootstrap_t: header.bootstrap_t,
        context_depth: header.context_depth,
    };
    det.check_compatible()?;
    Ok((det, header.resume))
}

pub fn load_model(mut input: impl Read) -> Result<(DetectorModel, Option<ThresholdState>)> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    model_from_bytes(&buf)
}

/// Refuses a model whose state maps differ from `catalog`.
pub fn ensure_catalog(det: &DetectorModel, catalog: &StateMapCatalog) -> Result<()> {
    if det.catalog.n_devices() != catalog.n_devices() {
        return Err(Error::Core(argus_core::Error::Incompatible(format!(
            "model expects {} devices, catalog has {}",
            det.catalog.n_devices(),
            catalog.n_devices()
        ))));
    }
    if catalog_hash(&det.catalog) != catalog_hash(catalog) {
        return Err(Error::Core(argus_core::Error::Incompatible("catalog hash mismatch".into())));
    }
    Ok(())
}
