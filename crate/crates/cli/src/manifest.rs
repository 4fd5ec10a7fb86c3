use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    /// sha256 of each input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: &'static str,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

pub struct Recorder {
    manifest: RunManifest,
    record_time: bool,
    started: Instant,
}

impl Recorder {
    pub fn new<C: Serialize>(command: &'static str, config: &C, seed: Option<u64>, no_timings: bool) -> Result<Self> {
        Ok(Self {
            manifest: RunManifest {
                command,
                config: serde_json::to_value(config)?,
                inputs: BTreeMap::new(),
                seed,
                version: env!("CARGO_PKG_VERSION"),
                timings: BTreeMap::new(),
            },
            record_time: !no_timings,
            started: Instant::now(),
        })
    }

    /// Read a file and record its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }

    /// Run `f` and record its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        let secs = if self.record_time { t.elapsed().as_secs_f64() } else { 0.0 };
        self.manifest.timings.insert(phase.to_owned(), secs);
        out
    }

    pub fn finish(mut self) -> RunManifest {
        let total = if self.record_time {
            self.started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.manifest.timings.insert("total".into(), total);
        self.manifest
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: &'a T,
}

pub fn emit<T: Serialize>(manifest: &RunManifest, body: &T, path: Option<&Path>) -> Result<()> {
    let mut json = serde_json::to_string_pretty(&Report { manifest, body })?;
    json.push('\n');
    match path {
        Some(p) => fs::write(p, json).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
