//! Machine-readable record written next to every output file.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full parameter set; loadable again with `--config <manifest>`.
    pub config: serde_json::Value,
    pub warnings: Vec<String>,
    pub formulas: BTreeMap<String, String>,
    pub duration_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// Definitions of the discrete quantities written by the tool.
pub fn formulas() -> BTreeMap<String, String> {
    [
        ("fourier", "u(x) = sum_{|j|<=N} u_j e^{ijx}; sum_j |u_j|^2 = (1/2pi) int |u|^2 dx"),
        ("grid", "x_i = 2 pi i / M, i = 0..M-1; default M = 4(2N+1) rounded up to a power of two"),
        ("mass", "sum_j |u_j|^2 (and likewise for v)"),
        ("momentum", "sum_j j (|u_j|^2 + sigma |v_j|^2)"),
        (
            "energy",
            "sum_j j^2 (|u_j|^2 + sigma |v_j|^2) + eps^2 (1/M) sum_i |u(x_i)|^2 |v(x_i)|^2",
        ),
        (
            "step",
            "Strang: u_j *= e^{-i j^2 dt/2}; u(x_i) *= e^{i V_u dt}, v(x_i) *= e^{i V_v dt} with V_u = -eps^2 |v|^2, V_v = -sigma eps^2 |u|^2 frozen at entry; u_j *= e^{-i j^2 dt/2}",
        ),
        ("potential", "V(t_k, x_i) = -eps^2 |v(x_i)|^2 at entry of the nonlinear substep of step k"),
        ("sobolev", "homogeneous sum_j |j|^{2s} |u_j|^2; inhomogeneous (sum_j (1+j^2)^s |u_j|^2)^{1/2}"),
        ("gevrey", "max_j |c_j| e^{B |j|^{1/alpha}}"),
        ("tail_fit", "least squares ln|c_j| = ln C - rho |j| over modes outside {p, q} with |c_j| > 1e-300"),
        ("reduced", "K0 = |u_q|^2, K1 = |u_p|^2 + |u_q|^2, K2 = |v_p|^2 + |v_q|^2, K3 = |u_q|^2 + |v_q|^2, psi0 = arg(u_q conj(u_p) v_p conj(v_q))"),
        ("pendulum", "psi' = -2(1-2K) cos psi, K' = -2K(1-K) sin psi, H = 2K(1-K) cos psi, slow time eps^2 t"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, warnings: Vec<String>) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            warnings,
            formulas: formulas(),
            duration_seconds: 0.0,
            outputs: Vec::new(),
        })
    }

    /// Record the size and checksum of a file that has been written.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let (bytes, sha256) = sha256_file(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.outputs.push(OutputFile { name, bytes, sha256 });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Byte count and hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let mut f = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((total, format!("{:x}", hasher.finalize())))
}
