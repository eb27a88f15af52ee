//! File emission helpers. All floats are written with the shortest
//! round-trip representation so that re-parsing an emitted CSV recovers the
//! exact f64s the statistics were computed from.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// Writes a file, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Builds a CSV document from a header and rows of already-formatted cells.
pub fn csv_document(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Shortest round-trip decimal form of a float (`inf`/`NaN` spelled out).
pub fn fmt_f64(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x}").expect("formatting f64 cannot fail");
    s
}

/// Hex SHA-256 of a string, used to fingerprint instance manifests.
pub fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("formatting hex cannot fail");
    }
    out
}

/// The machine-readable failure document printed to stderr on a nonzero
/// exit.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_display() {
        for x in [0.1, 1.0 / 3.0, 2.5e-17, f64::MAX, -0.0] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn sha256_is_stable() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
