use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, Format};

#[derive(Serialize)]
pub struct Header {
    pub version: &'static str,
    pub timestamp: String,
    pub config: ExperimentConfig,
}

/// A checked inequality or bound; any `holds == false` is a violation.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub name: String,
    pub holds: bool,
    pub detail: Value,
}

impl Certificate {
    pub fn new(name: &str, holds: bool, detail: Value) -> Self {
        Self { name: name.into(), holds, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub name: String,
    pub detail: Value,
}

impl Witness {
    pub fn new(name: &str, detail: Value) -> Self {
        Self { name: name.into(), detail }
    }
}

/// One CSV table: a header row and string cells in a fixed column order.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// What an experiment produces before it is wrapped in a header.
pub struct Outcome {
    pub results: Value,
    pub certificates: Vec<Certificate>,
    pub witnesses: Vec<Witness>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn violated(&self) -> bool {
        self.certificates.iter().any(|c| !c.holds)
    }
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub header: Header,
    pub results: &'a Value,
    pub certificates: &'a [Certificate],
    pub witnesses: &'a [Witness],
}

pub fn render_json(config: &ExperimentConfig, outcome: &Outcome) -> serde_json::Result<String> {
    let report = Report {
        header: Header {
            version: frechet_core::VERSION,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            config: config.clone(),
        },
        results: &outcome.results,
        certificates: &outcome.certificates,
        witnesses: &outcome.witnesses,
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    Ok(s)
}

/// Writes the report files into `dir`, or to stdout when `dir` is `None`.
pub fn emit(config: &ExperimentConfig, outcome: &Outcome, dir: Option<&Path>) -> std::io::Result<Vec<String>> {
    let name = config.experiment.name();
    let json = matches!(config.format, Format::Json | Format::Both);
    let csv = matches!(config.format, Format::Csv | Format::Both);
    let mut written = Vec::new();
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if json {
                let path = dir.join(format!("{name}.json"));
                std::fs::write(&path, render_json(config, outcome)?)?;
                written.push(path.display().to_string());
            }
            if csv {
                for t in &outcome.tables {
                    let path = dir.join(format!("{name}-{}.csv", t.name));
                    t.write(std::fs::File::create(&path)?)?;
                    written.push(path.display().to_string());
                }
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if json {
                lock.write_all(render_json(config, outcome)?.as_bytes())?;
            }
            if csv {
                for t in &outcome.tables {
                    if json || outcome.tables.len() > 1 {
                        writeln!(lock, "# {}", t.name)?;
                    }
                    t.write(&mut lock)?;
                }
            }
        }
    }
    Ok(written)
}
