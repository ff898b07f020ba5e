//! Output directory handling: files, PGM frames and the digest manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use navtl::env::Observation;

pub const MANIFEST: &str = "manifest.txt";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// `sha256  relative/path` for every file below the root, sorted; the
    /// manifest itself is left out.
    pub fn write_manifest(&self) -> Result<()> {
        let mut files = vec![];
        collect(&self.root, &mut files)?;
        let mut rels: Vec<(String, PathBuf)> = files
            .into_iter()
            .map(|p| (p.strip_prefix(&self.root).unwrap().to_string_lossy().replace('\\', "/"), p))
            .filter(|(rel, _)| rel != MANIFEST)
            .collect();
        rels.sort();
        let mut out = String::new();
        for (rel, path) in rels {
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let _ = writeln!(out, "{}  {rel}", hex::encode(Sha256::digest(&bytes)));
        }
        self.write(MANIFEST, out)?;
        Ok(())
    }
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// One observation channel as a plain-text (P2) graymap, 0..=255.
pub fn pgm(obs: &Observation, channel: usize) -> String {
    let (h, w) = (obs.height, obs.width);
    let mut s = format!("P2\n{w} {h}\n255\n");
    let values: Vec<u8> = obs.channel(channel).map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    for row in values.chunks(w) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}
