//! CSV and JSON writers. CSV numbers carry 17 significant digits so doubles
//! round-trip; rows are time-major, then x, then y.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use heatpar_core::oracle::{OracleReport, Snapshots};
use heatpar_core::KernelSeries;
use serde_json::json;

use crate::document::GraphDocument;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct IdentityLine {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tail: f64,
}

pub struct Sink {
    w: Box<dyn Write>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let w: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self { w })
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.w.flush()?;
        Ok(())
    }

    fn json(mut self, v: serde_json::Value) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut self.w, &v).map_err(|e| CliError::Input(e.to_string()))?;
        writeln!(self.w)?;
        self.finish()
    }

    pub fn kernel(mut self, format: Format, method: &str, doc: &GraphDocument, snaps: &Snapshots) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                writeln!(self.w, "t,x,y,value")?;
                for (t, m) in snaps {
                    for x in 0..m.n() {
                        for y in 0..m.n() {
                            writeln!(self.w, "{},{x},{y},{}", num(*t), num(m[(x, y)]))?;
                        }
                    }
                }
                self.finish()
            }
            Format::Json => {
                let times: Vec<f64> = snaps.iter().map(|(t, _)| *t).collect();
                let values: Vec<Vec<Vec<f64>>> = snaps.iter().map(|(_, m)| (0..m.n()).map(|x| m.row(x).to_vec()).collect()).collect();
                self.json(json!({
                    "method": method,
                    "vertices": names(doc),
                    "times": times,
                    "values": values,
                }))
            }
        }
    }

    pub fn series(mut self, format: Format, method: &str, doc: &GraphDocument, parts: &[(&str, &KernelSeries)]) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                writeln!(self.w, "series,t,x,y,value")?;
                for (name, s) in parts {
                    for (j, &t) in s.grid().nodes().iter().enumerate() {
                        for x in 0..s.n() {
                            for y in 0..s.n() {
                                writeln!(self.w, "{name},{},{x},{y},{}", num(t), num(s.get(x, y, j)))?;
                            }
                        }
                    }
                }
                self.finish()
            }
            Format::Json => {
                let times = parts.first().map(|(_, s)| s.grid().nodes().to_vec()).unwrap_or_default();
                let mut series = serde_json::Map::new();
                for (name, s) in parts {
                    let values: Vec<Vec<Vec<f64>>> = (0..s.grid().len()).map(|j| (0..s.n()).map(|x| s.at(j).row(x).to_vec()).collect()).collect();
                    series.insert(name.to_string(), json!(values));
                }
                self.json(json!({
                    "method": method,
                    "vertices": names(doc),
                    "times": times,
                    "series": series,
                }))
            }
        }
    }

    pub fn report(mut self, format: Format, method: &str, reference: &str, r: &OracleReport) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                writeln!(self.w, "t,error")?;
                for (t, e) in r.times.iter().zip(&r.per_time) {
                    writeln!(self.w, "{},{}", num(*t), num(*e))?;
                }
                self.finish()
            }
            Format::Json => self.json(json!({
                "method": method,
                "reference": reference,
                "budget": r.budget,
                "sup": r.sup,
                "within_budget": r.within_budget(),
                "first_exceeding": r.first_exceeding.map(|(j, t)| json!({ "index": j, "t": t })),
                "times": r.times,
                "errors": r.per_time,
            })),
        }
    }

    pub fn identity(mut self, format: Format, l: &IdentityLine) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                writeln!(self.w, "identity,lhs,rhs,residual,tail")?;
                writeln!(self.w, "{},{},{},{},{}", l.name, num(l.lhs), num(l.rhs), num(l.residual), num(l.tail))?;
                self.finish()
            }
            Format::Json => self.json(json!({
                "identity": l.name,
                "lhs": l.lhs,
                "rhs": l.rhs,
                "residual": l.residual,
                "tail": l.tail,
            })),
        }
    }
}

fn names(doc: &GraphDocument) -> Vec<String> {
    doc.names.iter().map(|n| n.to_string()).collect()
}
