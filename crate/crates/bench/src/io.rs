//! File formats: return matrices, run traces, network checkpoints and the
//! output manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cadam_core::linalg::Matrix;
use cadam_core::meta::{Activation, Architecture};
use cadam_core::problems::PortfolioData;
use cadam_core::RunTrace;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{BenchError, DataError, Result};

/// Reads a return matrix with header `r_1,...,r_n` and one row per time point.
pub fn load_returns_csv(path: &Path) -> Result<PortfolioData<f64>> {
    let unreadable = |message: String| DataError::Unreadable {
        path: path.to_path_buf(),
        message,
    };
    let bytes = fs::read(path).map_err(|e| unreadable(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(DataError::EmptyFile { path: path.to_path_buf() }.into()),
        Some(r) => r.map_err(|e| unreadable(e.to_string()))?,
    };
    let width = header.len();
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| unreadable(e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(DataError::MalformedRow {
                path: path.to_path_buf(),
                row,
                expected: width,
                found: rec.len(),
            }
            .into());
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(DataError::NonNumericCell {
                    path: path.to_path_buf(),
                    row,
                    column: c + 1,
                    cell: cell.to_string(),
                }),
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyFile { path: path.to_path_buf() }.into());
    }
    PortfolioData::from_rows(&rows).map_err(|e| unreadable(e.to_string()).into())
}

/// Return matrix in the format read by [`load_returns_csv`].
pub fn returns_csv(data: &PortfolioData<f64>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=data.n()).map(|j| format!("r_{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.m() {
        let cells: Vec<String> = data.reward(i).iter().map(|v| fmt_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub const TRACE_HEADER: &str = "t,cumulative_samples,j_exact,grad_norm_sq,tracking_err,alpha,beta,wallclock_ns";

/// One row per recorded step; quantities the problem cannot evaluate are empty.
pub fn trace_csv(trace: &RunTrace<f64>) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.cumulative_samples,
            fmt_opt(r.j_exact),
            fmt_opt(r.grad_norm_sq),
            fmt_opt(r.tracking_err),
            fmt_float(r.alpha),
            fmt_float(r.beta),
            r.wallclock_ns
        );
    }
    out
}

const CHECKPOINT_MAGIC: &str = "cadam-mlp-v1";

/// Text header line naming the layer sizes, activation and bias flag, then
/// the flat parameters as little-endian `f64`.
pub fn encode_checkpoint(arch: &Architecture, params: &[f64]) -> Result<Vec<u8>> {
    if params.len() != arch.param_count() {
        return Err(BenchError::Config(format!(
            "checkpoint has {} parameters, architecture needs {}",
            params.len(),
            arch.param_count()
        )));
    }
    let sizes: Vec<String> = arch.sizes().iter().map(|s| s.to_string()).collect();
    let header = format!(
        "{CHECKPOINT_MAGIC} sizes={} activation={} bias={}\n",
        sizes.join(","),
        activation_name(arch.hidden()),
        u8::from(arch.has_bias())
    );
    let mut out = header.into_bytes();
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Architecture, Vec<f64>)> {
    let bad = |m: &str| BenchError::Data(DataError::Unreadable {
        path: PathBuf::from("<checkpoint>"),
        message: m.to_string(),
    });
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not text"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("unknown checkpoint format"));
    }
    let (mut sizes, mut act, mut bias) = (None, None, None);
    for f in fields {
        match f.split_once('=') {
            Some(("sizes", v)) => {
                sizes = Some(
                    v.split(',')
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad layer sizes"))?,
                )
            }
            Some(("activation", v)) => act = Some(parse_activation(v).map_err(|_| bad("bad activation"))?),
            Some(("bias", v)) => bias = Some(v == "1"),
            _ => return Err(bad("unknown header field")),
        }
    }
    let sizes = sizes.ok_or_else(|| bad("missing layer sizes"))?;
    let mut arch = Architecture::new(sizes, act.ok_or_else(|| bad("missing activation"))?)
        .map_err(|e| bad(&e.to_string()))?;
    if bias == Some(false) {
        arch = arch.without_bias();
    }
    let body = &bytes[nl + 1..];
    if body.len() != 8 * arch.param_count() {
        return Err(bad("parameter count does not match the header"));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((arch, params))
}

pub fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

pub fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(BenchError::Config(format!("unknown activation {other:?}"))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a matrix, used as a cache key.
pub fn matrix_hash(tag: &str, parts: &[&Matrix<f64>], vectors: &[&[f64]]) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for m in parts {
        h.update((m.rows() as u64).to_le_bytes());
        h.update((m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    for v in vectors {
        h.update((v.len() as u64).to_le_bytes());
        for x in *v {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Output directory that records every file it writes, so the manifest is
/// complete and a failed command can remove what it left behind.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
    created_root: bool,
}

pub const MANIFEST: &str = "manifest.json";

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root).map_err(|e| BenchError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            entries: Vec::new(),
            created_root,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| BenchError::io(&path, e))?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    /// Writes `manifest.json` listing every file plus `metadata`.
    pub fn finish(self, metadata: serde_json::Value) -> Result<PathBuf> {
        let mut entries = self.entries.clone();
        entries.sort_by(|a, b| a.file.cmp(&b.file));
        let doc = serde_json::json!({ "files": entries, "metadata": metadata });
        let text = serde_json::to_string_pretty(&doc).expect("manifest serialises");
        let path = self.root.join(MANIFEST);
        fs::write(&path, text + "\n").map_err(|e| BenchError::io(&path, e))?;
        Ok(path)
    }

    /// Removes everything this command wrote.
    pub fn discard(self) {
        for e in &self.entries {
            let _ = fs::remove_file(self.root.join(&e.file));
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let arch = Architecture::new(vec![1, 3, 2, 1], Activation::Tanh).unwrap().without_bias();
        let params: Vec<f64> = (0..arch.param_count()).map(|i| i as f64 * 0.25 - 1.0).collect();
        let bytes = encode_checkpoint(&arch, &params).unwrap();
        let (a2, p2) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(a2, arch);
        assert_eq!(p2, params);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(encode_checkpoint(&arch, &params[1..]).is_err());
    }

    #[test]
    fn hashes_are_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
