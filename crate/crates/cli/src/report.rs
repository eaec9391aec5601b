use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use reeb_lab::dynamics::Trajectory;
use reeb_lab::sampling::RNG_NAME;
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

/// Everything that determines a report; echoed verbatim into it.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: &'static str,
    rng: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    result: &'a T,
}

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(config: &RunConfig, result: &T) -> io::Result<()> {
    let envelope = Envelope { schema_version: SCHEMA_VERSION, rng: RNG_NAME, config, result };
    let mut w = sink(config.out.as_deref())?;
    serde_json::to_writer(&mut w, &envelope)?;
    writeln!(w)?;
    w.flush()
}

/// Header comment, column row, one row per step, then a `# closure` comment.
pub fn write_csv(config: &RunConfig, traj: &Trajectory, columns: &[&str], closure: &[(&str, f64)]) -> io::Result<()> {
    let mut w = sink(config.out.as_deref())?;
    writeln!(
        w,
        "# flow={} t_end={} dt={} seed={} rng={} schema_version={}",
        traj.flow,
        traj.times.last().copied().unwrap_or(0.0),
        traj.dt,
        config.seed,
        RNG_NAME,
        SCHEMA_VERSION
    )?;
    writeln!(w, "t,{},constraint_drift,energy_drift", columns.join(","))?;
    for (i, t) in traj.times.iter().enumerate() {
        write!(w, "{t}")?;
        for x in &traj.states[i] {
            write!(w, ",{x}")?;
        }
        writeln!(w, ",{},{}", traj.constraint_drift[i], traj.energy_drift[i])?;
    }
    let fields: Vec<String> = closure.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
    writeln!(w, "# closure {}", fields.join(" "))?;
    w.flush()
}
