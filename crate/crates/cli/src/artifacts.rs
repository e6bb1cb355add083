//! Files exchanged between subcommands. Every artifact carries the
//! provenance of the run that wrote it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Provenance;
use crate::Failure;

pub const PLAN_JSON: &str = "plan.json";
pub const MAP_BIN: &str = "map.bin";
pub const HBT_JSON: &str = "hbt.json";
pub const ANALYSIS_JSON: &str = "analysis.json";

pub fn tally_json(distance_mm: f64) -> String {
    format!("tally_{distance_mm}mm.json")
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    provenance: Provenance,
    data: T,
}

pub struct OutputDir {
    dir: PathBuf,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), provenance, written: Vec::new() })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    /// CSV with a `# provenance` comment line ahead of the column header.
    pub fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), Failure> {
        let line = self.provenance.line();
        let mut w = self.open(name)?;
        writeln!(w, "# {line}")
            .and_then(|_| body(&mut w))
            .and_then(|_| w.flush())
            .map_err(|e| Failure::Io(format!("writing {name}: {e}")))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), Failure> {
        let envelope = Envelope { provenance: self.provenance.clone(), data };
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, &envelope)
            .map_err(std::io::Error::from)
            .and_then(|_| writeln!(w))
            .and_then(|_| w.flush())
            .map_err(|e| Failure::Io(format!("writing {name}: {e}")))
    }

    pub fn raw(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Failure>,
    ) -> Result<(), Failure> {
        let mut w = self.open(name)?;
        body(&mut w)?;
        w.flush().map_err(|e| Failure::Io(format!("writing {name}: {e}")))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Errors name the subcommand that produces a missing input.
pub fn require(path: &Path, producer: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::MissingInput { path: path.display().to_string(), producer: producer.into() })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path, producer: &str) -> Result<(T, Provenance), Failure> {
    require(path, producer)?;
    let f = File::open(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    let envelope: Envelope<T> = serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Failure::Io(format!("{} is not a valid `{producer}` artifact: {e}", path.display())))?;
    Ok((envelope.data, envelope.provenance))
}
