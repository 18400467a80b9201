//! JSON-lines scenario datasets.
//!
//! Line 1 is a header object carrying the schema version, the PRNG used to
//! generate the data, the record count and the generator parameters. Every
//! following line is one [`ScenarioInstance`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioInstance;
use crate::{Error, Result};

pub const FORMAT_NAME: &str = "jamloc-scenarios";
pub const FORMAT_VERSION: u32 = 1;
pub const PRNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub prng: String,
    pub count: usize,
    #[serde(default)]
    pub generator: serde_json::Value,
}

impl DatasetHeader {
    pub fn new(count: usize, generator: serde_json::Value) -> Self {
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            prng: PRNG_NAME.into(),
            count,
            generator,
        }
    }
}

pub fn write_to<W: Write>(
    mut w: W,
    instances: &[ScenarioInstance],
    generator: serde_json::Value,
) -> Result<()> {
    let header = DatasetHeader::new(instances.len(), generator);
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for inst in instances {
        serde_json::to_writer(&mut w, inst).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    instances: &[ScenarioInstance],
    generator: serde_json::Value,
) -> Result<()> {
    write_to(BufWriter::new(File::create(path)?), instances, generator)
}

pub fn read_from<R: BufRead>(r: R) -> Result<(DatasetHeader, Vec<ScenarioInstance>)> {
    let mut lines = r.lines();
    let header_line = lines.next().transpose()?.ok_or_else(|| Error::Parse {
        line: 1,
        record: 0,
        message: "missing header".into(),
    })?;
    let header: DatasetHeader = serde_json::from_str(&header_line).map_err(|e| Error::Parse {
        line: 1,
        record: 0,
        message: format!("bad header: {e}"),
    })?;
    if header.format != FORMAT_NAME {
        return Err(Error::Parse {
            line: 1,
            record: 0,
            message: format!("unknown format '{}'", header.format),
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    let mut instances = Vec::with_capacity(header.count);
    for (record, line) in lines.enumerate() {
        let line_no = record + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: ScenarioInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            record,
            message: e.to_string(),
        })?;
        inst.validate().map_err(|e| Error::Parse {
            line: line_no,
            record,
            message: e.to_string(),
        })?;
        instances.push(inst);
    }
    if instances.len() != header.count {
        return Err(Error::Parse {
            line: instances.len() + 2,
            record: instances.len(),
            message: format!(
                "header declares {} records, found {}",
                header.count,
                instances.len()
            ),
        });
    }
    Ok((header, instances))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<ScenarioInstance>)> {
    read_from(BufReader::new(File::open(path)?))
}
