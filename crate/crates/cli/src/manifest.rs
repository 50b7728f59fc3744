//! Run manifests: the resolved configuration, tool version and SHA-256
//! digests of every input and output file, written as `key=value` lines.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Configuration pairs in a fixed order.
    pub config: Vec<(String, String)>,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn set<K: Into<String>, V: ToString>(&mut self, key: K, value: V) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        self.inputs
            .push((name.into(), format!("sha256:{}", file_digest(path)?)));
        Ok(())
    }

    pub fn output(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        self.outputs
            .push((name.into(), format!("sha256:{}", file_digest(path)?)));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# evtrack run manifest\n");
        let _ = writeln!(s, "tool_version={TOOL_VERSION}");
        let _ = writeln!(s, "command={}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k}={v}");
        }
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "input.{k}={v}");
        }
        for (k, v) in &self.outputs {
            let _ = writeln!(s, "output.{k}={v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn render_layout() {
        let mut m = RunManifest::new("track");
        m.set("n", 100);
        m.inputs.push(("events".into(), "sha256:00".into()));
        m.outputs.push(("track".into(), "sha256:ff".into()));
        let text = m.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# evtrack run manifest");
        assert_eq!(lines[1], format!("tool_version={TOOL_VERSION}"));
        assert_eq!(
            &lines[2..],
            [
                "command=track",
                "n=100",
                "input.events=sha256:00",
                "output.track=sha256:ff"
            ]
        );
    }
}
