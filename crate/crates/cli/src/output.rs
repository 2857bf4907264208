//! Tables and summaries. Floats in CSV carry 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Float(v) => s.serialize_f64(*v),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerance {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Flag {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Collects tolerances and PASS/FAIL flags of one run.
#[derive(Debug, Default)]
pub struct Checks {
    pub tolerances: Vec<Tolerance>,
    pub flags: Vec<Flag>,
}

impl Checks {
    pub fn tol(&mut self, name: &'static str, value: f64) {
        self.tolerances.push(Tolerance { name, value });
    }

    /// Flags `value < threshold`.
    pub fn below(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        let pass = value < threshold;
        self.flags.push(Flag {
            name: name.into(),
            value,
            threshold,
            pass,
        });
        pass
    }

    /// Flags `value > threshold`.
    pub fn above(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        let pass = value > threshold;
        self.flags.push(Flag {
            name: name.into(),
            value,
            threshold,
            pass,
        });
        pass
    }

    pub fn all_pass(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }
}

#[derive(Serialize)]
struct Summary<'a, D: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    tolerances: &'a [Tolerance],
    checks: &'a [Flag],
    pass: bool,
    outputs: &'a [String],
    data: &'a D,
}

/// Writes tables and the summary of one subcommand into the output directory.
pub struct Writer<'a> {
    pub config: &'a RunConfig,
    dir: PathBuf,
    outputs: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(format!("{}: {e}", path.display()))
}

impl<'a> Writer<'a> {
    pub fn new(config: &'a RunConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&config.out_dir);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Writer {
            config,
            dir,
            outputs: Vec::new(),
        })
    }

    pub fn table(&mut self, t: &Table) -> Result<(), CliError> {
        match self.config.format {
            Format::Csv => {
                let name = format!("{}.csv", t.name);
                let path = self.dir.join(&name);
                let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
                w.write_record(&t.columns).map_err(|e| io_err(&path, e))?;
                for row in &t.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(|e| io_err(&path, e))?;
                }
                w.flush().map_err(|e| io_err(&path, e))?;
                self.outputs.push(name);
            }
            Format::Json => {
                let name = format!("{}.json", t.name);
                self.json(&name, t)?;
            }
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `<command>_summary.json`, prints the flags, and returns the overall verdict.
    pub fn finish<D: Serialize>(mut self, command: &str, checks: &Checks, data: &D) -> Result<bool, CliError> {
        let pass = checks.all_pass();
        let name = format!("{}_summary.json", command.replace('-', "_"));
        let mut outputs = self.outputs.clone();
        outputs.push(name.clone());
        let summary = Summary {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: self.config,
            tolerances: &checks.tolerances,
            checks: &checks.flags,
            pass,
            outputs: &outputs,
            data,
        };
        self.json(&name, &summary)?;
        for f in &checks.flags {
            println!(
                "{} {}: {:.6e} (threshold {:.3e})",
                if f.pass { "PASS" } else { "FAIL" },
                f.name,
                f.value,
                f.threshold
            );
        }
        println!("wrote {} files to {}", self.outputs.len(), self.dir.display());
        Ok(pass)
    }
}
