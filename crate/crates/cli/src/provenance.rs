//! Headers that tie every output file to the run that produced it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Tool version, command, seed and input digests. Deliberately carries no
/// clock time so that reruns produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Provenance {
        Provenance {
            tool: "gamette".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, label: impl Into<String>, bytes: &[u8]) -> Provenance {
        self.inputs.push(InputDigest { path: label.into(), sha256: hex::encode(Sha256::digest(bytes)) });
        self
    }

    pub fn with_file(self, path: &Path) -> anyhow::Result<Provenance> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(self.with_input(path.display().to_string(), &bytes))
    }

    /// One `#` comment line for tabular outputs.
    pub fn header_line(&self) -> String {
        let mut line = format!("# {} {} | {}", self.tool, self.version, self.command);
        if let Some(seed) = self.seed {
            line.push_str(&format!(" | seed={seed}"));
        }
        for i in &self.inputs {
            line.push_str(&format!(" | {}={}", i.path, &i.sha256[..16]));
        }
        line.push('\n');
        line
    }
}

/// Writes `body` under `dir/name` behind a header line.
pub fn write_table(dir: &Path, name: &str, prov: &Provenance, body: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, format!("{}{}", prov.header_line(), body)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes `body` as pretty JSON with a `provenance` field alongside.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, prov: &Provenance, body: &T) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&Wrapped { provenance: prov, body })?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_stable() {
        let p = Provenance::new("simulate --weeks 3", Some(4)).with_input("x.toml", b"abc");
        assert_eq!(p.inputs[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(
            p.header_line(),
            format!("# gamette {} | simulate --weeks 3 | seed=4 | x.toml=ba7816bf8f01cfea\n", env!("CARGO_PKG_VERSION"))
        );
    }
}
