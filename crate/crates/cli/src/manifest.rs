//! Run manifests: what was run, on which bytes, producing which bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub seed: u64,
    /// Fully resolved configuration of the command.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Collects the manifest of one command while it runs.
pub struct Run {
    command: String,
    argv: Vec<String>,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: BTreeMap<String, f64>,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, argv: Vec<String>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            argv,
            seed,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_config(&mut self, config: &impl Serialize) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn output(&mut self, path: &Path) {
        if !self.outputs.iter().any(|p| p == path) {
            self.outputs.push(path.to_path_buf());
        }
    }

    /// Runs `f` and records its duration under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self)?;
        *self.timings.entry(phase.to_string()).or_default() += t.elapsed().as_secs_f64();
        Ok(out)
    }

    /// Hashes inputs and outputs and writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<Manifest> {
        self.timings.insert("total".into(), self.started.elapsed().as_secs_f64());
        let digest = |v: &[PathBuf]| v.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>();
        let manifest = Manifest {
            tool: format!("strokeseg {}", env!("CARGO_PKG_VERSION")),
            command: self.command,
            argv: self.argv,
            cwd: std::env::current_dir()?,
            seed: self.seed,
            config: self.config,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            timings: self.timings,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec_pretty(&manifest)?)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(manifest)
    }
}

/// `argv` without any `--manifest` option, so a replay can pick its own.
pub fn strip_manifest_flag(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--manifest" {
            skip = true;
        } else if !a.starts_with("--manifest=") {
            out.push(a.clone());
        }
    }
    out
}

/// Path the replayed run writes its own manifest to.
pub fn replay_manifest_path(original: &Path) -> PathBuf {
    let mut name = original.file_stem().unwrap_or_default().to_os_string();
    name.push(".replay.json");
    original.with_file_name(name)
}

/// Outputs whose checksum differs between two manifests, matched by path.
pub fn mismatched_outputs(recorded: &Manifest, replayed: &Manifest) -> Vec<String> {
    let mut bad = Vec::new();
    for r in &recorded.outputs {
        match replayed.outputs.iter().find(|o| o.path == r.path) {
            Some(o) if o.sha256 == r.sha256 => {}
            Some(_) => bad.push(format!("{}: checksum differs", r.path.display())),
            None => bad.push(format!("{}: not produced", r.path.display())),
        }
    }
    for o in &replayed.outputs {
        if !recorded.outputs.iter().any(|r| r.path == o.path) {
            bad.push(format!("{}: not in the recorded manifest", o.path.display()));
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_flag_is_stripped() {
        let argv: Vec<String> = ["render", "--manifest", "m.json", "x", "--manifest=n.json", "--out-dir", "o"]
            .map(String::from)
            .to_vec();
        assert_eq!(strip_manifest_flag(&argv), ["render", "x", "--out-dir", "o"]);
        assert_eq!(replay_manifest_path(Path::new("a/b/run.json")), Path::new("a/b/run.replay.json"));
    }
}
