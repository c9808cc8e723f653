use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{ScenarioKind, SimError};

/// Which row of a sweep point: a single trial or an aggregate over trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TrialTag {
    Trial(usize),
    Mean,
    Std,
}

impl fmt::Display for TrialTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialTag::Trial(i) => write!(f, "{i}"),
            TrialTag::Mean => f.write_str("mean"),
            TrialTag::Std => f.write_str("std"),
        }
    }
}

impl FromStr for TrialTag {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(TrialTag::Mean),
            "std" => Ok(TrialTag::Std),
            _ => s
                .parse()
                .map(TrialTag::Trial)
                .map_err(|_| SimError::Config(format!("bad trial tag `{s}`"))),
        }
    }
}

impl From<TrialTag> for String {
    fn from(t: TrialTag) -> Self {
        t.to_string()
    }
}

impl TryFrom<String> for TrialTag {
    type Error = SimError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub value: f64,
}

/// Metrics of one (parameter point, trial) pair, or an aggregate row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scenario: ScenarioKind,
    pub param_name: &'static str,
    pub param_value: f64,
    pub trial: TrialTag,
    pub metrics: Vec<Metric>,
}

impl TrialResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

/// One output line: `scenario,param_name,param_value,trial,metric,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: ScenarioKind,
    pub param_name: String,
    pub param_value: f64,
    pub trial: TrialTag,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

pub fn to_records(results: &[TrialResult]) -> Vec<Record> {
    results
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(move |m| Record {
                scenario: r.scenario,
                param_name: r.param_name.to_string(),
                param_value: r.param_value,
                trial: r.trial,
                metric: m.name.to_string(),
                value: m.value,
            })
        })
        .collect()
}

pub fn write_results<W: Write>(results: &[TrialResult], format: OutputFormat, out: W) -> Result<(), SimError> {
    if results.is_empty() {
        return Err(SimError::EmptyResults);
    }
    let records = to_records(results);
    if let Some(r) = records.iter().find(|r| !r.value.is_finite() || !r.param_value.is_finite()) {
        return Err(SimError::NonFinite(format!("{} at {} = {}", r.metric, r.param_name, r.param_value)));
    }
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            for r in &records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &records)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_results(results: &[TrialResult], format: OutputFormat, path: &Path) -> Result<(), SimError> {
    if results.is_empty() {
        return Err(SimError::EmptyResults);
    }
    let file = File::create(path).map_err(|e| SimError::Output(format!("{}: {e}", path.display())))?;
    write_results(results, format, BufWriter::new(file))
}

pub fn read_csv_records<R: std::io::Read>(input: R) -> Result<Vec<Record>, SimError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(SimError::from)).collect()
}
