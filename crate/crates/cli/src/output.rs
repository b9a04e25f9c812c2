//! Staged output: every artifact is built in memory, written to a hidden
//! sibling directory and renamed into place once the run has succeeded.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::render::Header;

pub struct Artifacts {
    pub header: Header,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(header: Header) -> Self {
        Self { header, files: Vec::new() }
    }

    /// CSV with a provenance comment line, a header row and LF endings.
    pub fn csv<I, R>(&mut self, name: &str, columns: &[&str], rows: I)
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut buf = format!(
            "# fpp command={} seed={} config={}\n",
            self.header.command, self.header.seed, self.header.config_hash
        )
        .into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(columns).expect("in-memory write");
            for row in rows {
                w.write_record(row).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        self.files.push((name.to_string(), buf));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("summaries serialize");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    pub fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes everything to `<outdir>/<dirname>`, replacing any previous
    /// run with the same name.
    pub fn commit(&self, outdir: &Path, dirname: &str) -> io::Result<PathBuf> {
        fs::create_dir_all(outdir)?;
        let target = outdir.join(dirname);
        let staging = outdir.join(format!(".{dirname}.tmp-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        let written = self
            .files
            .iter()
            .try_for_each(|(name, bytes)| fs::write(staging.join(name), bytes));
        if let Err(e) = written {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::rename(&staging, &target)?;
        Ok(target)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn vtx(v: fpp_core::Vertex) -> String {
    format!("{}:{}", v.x, v.y)
}
