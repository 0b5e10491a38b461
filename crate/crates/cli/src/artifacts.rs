//! Output staging and manifests.
//!
//! A command writes into a hidden staging directory. On success the files
//! move into the output directory next to a `<command>.manifest` that echoes
//! the configuration and records a SHA-256 per file; on failure the staging
//! directory is deleted, so no partial output is left behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_HEADER: &str = "dysuse-manifest v1";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub struct Staging {
    command: String,
    out: PathBuf,
    tmp: PathBuf,
    files: Vec<String>,
    inputs: Vec<(PathBuf, String)>,
    done: bool,
}

impl Staging {
    pub fn new(out: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let tmp = out.join(format!(".staging-{command}-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        Ok(Staging {
            command: command.to_string(),
            out: out.to_path_buf(),
            tmp,
            files: Vec::new(),
            inputs: Vec::new(),
            done: false,
        })
    }

    /// Path inside the staging area for output `name`.
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.tmp.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    /// Records an input file and its hash in the manifest.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        self.inputs.push((path.to_path_buf(), hash));
        Ok(())
    }

    /// Moves every staged file into place and writes the manifest.
    pub fn commit(mut self, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
        let mut manifest = format!("{MANIFEST_HEADER}\ncommand = {}\n", self.command);
        writeln!(
            manifest,
            "created = {}",
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        )?;
        for (k, v) in cfg.values() {
            writeln!(manifest, "config.{k} = {v}")?;
        }
        for (p, h) in &self.inputs {
            writeln!(manifest, "input {} sha256 {h}", p.display())?;
        }
        let mut placed = Vec::new();
        for name in &self.files {
            let from = self.tmp.join(name);
            if !from.exists() {
                bail!("internal error: staged output {name} was never written");
            }
            writeln!(manifest, "file {name} sha256 {}", sha256_file(&from)?)?;
        }
        for name in &self.files {
            let to = self.out.join(name);
            fs::rename(self.tmp.join(name), &to)?;
            placed.push(to);
        }
        let mpath = self.out.join(format!("{}.manifest", self.command));
        fs::write(&mpath, manifest)?;
        placed.push(mpath);
        fs::remove_dir_all(&self.tmp)?;
        self.done = true;
        Ok(placed)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

/// Checks `path` against every manifest in its directory that lists it.
/// Returns whether some manifest covered the file.
pub fn verify(path: &Path) -> Result<bool> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .with_context(|| format!("bad artifact path {}", path.display()))?;
    let mut covered = false;
    let mut actual = None;
    for entry in fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))? {
        let mpath = entry?.path();
        if mpath.extension().and_then(|e| e.to_str()) != Some("manifest") {
            continue;
        }
        let text = fs::read_to_string(&mpath)?;
        if text.lines().next() != Some(MANIFEST_HEADER) {
            continue;
        }
        for line in text.lines() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() == 4 && f[0] == "file" && f[1] == name && f[2] == "sha256" {
                let got = match &actual {
                    Some(h) => h,
                    None => actual.insert(sha256_file(path)?),
                };
                if got != f[3] {
                    bail!(
                        "{} does not match the hash recorded in {}; the file was modified or corrupted",
                        path.display(),
                        mpath.display()
                    );
                }
                covered = true;
            }
        }
    }
    Ok(covered)
}
