//! Line-oriented dataset files.
//!
//! A few `# key value` header lines precede the records. Tuple files hold
//! one `s a r s_next` record per line; trajectory files hold one episode per
//! line as `s,a,r,s_next;...`, with `-` for an empty episode. Floats use the
//! shortest representation that parses back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Trajectory, TrajectoryDataset, Transition, TupleDataset};
use crate::error::{Error, Result};
use crate::mdp::{OccupancyMeasure, StationaryPolicy};

const TUPLE_MAGIC: &str = "offrl-tuples v1";
const TRAJ_MAGIC: &str = "offrl-trajectories v1";

pub fn write_tuples<W: Write>(ds: &TupleDataset, mut w: W) -> Result<()> {
    writeln!(w, "# {TUPLE_MAGIC}")?;
    writeln!(w, "# seed {}", ds.seed)?;
    writeln!(w, "# count {}", ds.tuples.len())?;
    if let Some(d) = &ds.data_dist {
        writeln!(w, "# data_dist {}", serde_json::to_string(d)?)?;
    }
    for t in &ds.tuples {
        writeln!(w, "{} {} {} {}", t.s, t.a, t.r, t.s_next)?;
    }
    Ok(())
}

pub fn write_trajectories<W: Write>(ds: &TrajectoryDataset, mut w: W) -> Result<()> {
    writeln!(w, "# {TRAJ_MAGIC}")?;
    writeln!(w, "# seed {}", ds.seed)?;
    writeln!(w, "# horizon {}", ds.horizon)?;
    writeln!(w, "# count {}", ds.trajectories.len())?;
    writeln!(w, "# behavior {}", serde_json::to_string(&ds.behavior)?)?;
    for traj in &ds.trajectories {
        if traj.steps.is_empty() {
            writeln!(w, "-")?;
            continue;
        }
        let parts: Vec<String> = traj.steps.iter().map(|t| format!("{},{},{},{}", t.s, t.a, t.r, t.s_next)).collect();
        writeln!(w, "{}", parts.join(";"))?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_transition(fields: &[&str], line: usize) -> Result<Transition> {
    if fields.len() != 4 {
        return Err(parse_err(line, format!("expected 4 fields, found {}", fields.len())));
    }
    let int = |x: &str| x.parse::<usize>().map_err(|e| parse_err(line, format!("`{x}`: {e}")));
    let r = fields[2].parse::<f64>().map_err(|e| parse_err(line, format!("`{}`: {e}", fields[2])))?;
    Ok(Transition { s: int(fields[0])?, a: int(fields[1])?, r, s_next: int(fields[3])? })
}

struct Header {
    pairs: Vec<(String, String, usize)>,
}

impl Header {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.pairs.iter().find(|(k, _, _)| k == key).map(|(_, v, l)| (v.as_str(), *l))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((v, l)) => v.parse().map(Some).map_err(|_| parse_err(l, format!("bad `{key}` value"))),
        }
    }
}

/// Splits header lines from records; returns the header and numbered records.
fn split<R: BufRead>(r: R, magic: &str) -> Result<(Header, Vec<(usize, String)>)> {
    let mut pairs = Vec::new();
    let mut records = Vec::new();
    let mut saw_magic = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if rest == magic {
                saw_magic = true;
                continue;
            }
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            pairs.push((k.to_string(), v.trim().to_string(), no));
        } else if !line.trim().is_empty() {
            records.push((no, line));
        }
    }
    if !saw_magic {
        return Err(parse_err(1, format!("missing `# {magic}` header")));
    }
    Ok((Header { pairs }, records))
}

pub fn read_tuples<R: BufRead>(r: R) -> Result<TupleDataset> {
    let (header, records) = split(r, TUPLE_MAGIC)?;
    let mut tuples = Vec::with_capacity(records.len());
    for (no, line) in &records {
        let fields: Vec<&str> = line.split_whitespace().collect();
        tuples.push(parse_transition(&fields, *no)?);
    }
    if let Some(count) = header.number::<usize>("count")? {
        if count != tuples.len() {
            let last = records.last().map(|(l, _)| *l).unwrap_or(1);
            return Err(parse_err(last, format!("header declares {count} records, found {}", tuples.len())));
        }
    }
    let data_dist = match header.get("data_dist") {
        None => None,
        Some((v, l)) => Some(
            serde_json::from_str::<OccupancyMeasure>(v).map_err(|e| parse_err(l, format!("data_dist: {e}")))?,
        ),
    };
    Ok(TupleDataset { tuples, data_dist, seed: header.number("seed")?.unwrap_or(0) })
}

pub fn read_trajectories<R: BufRead>(r: R) -> Result<TrajectoryDataset> {
    let (header, records) = split(r, TRAJ_MAGIC)?;
    let (behavior_text, l) = header.get("behavior").ok_or_else(|| parse_err(1, "missing behavior header"))?;
    let behavior: StationaryPolicy =
        serde_json::from_str(behavior_text).map_err(|e| parse_err(l, format!("behavior: {e}")))?;
    let mut trajectories = Vec::with_capacity(records.len());
    for (no, line) in &records {
        let line = line.trim();
        if line == "-" {
            trajectories.push(Trajectory::default());
            continue;
        }
        let steps = line
            .split(';')
            .map(|step| parse_transition(&step.split(',').map(str::trim).collect::<Vec<_>>(), *no))
            .collect::<Result<Vec<_>>>()?;
        trajectories.push(Trajectory { steps });
    }
    if let Some(count) = header.number::<usize>("count")? {
        if count != trajectories.len() {
            let last = records.last().map(|(l, _)| *l).unwrap_or(1);
            return Err(parse_err(last, format!("header declares {count} records, found {}", trajectories.len())));
        }
    }
    Ok(TrajectoryDataset {
        trajectories,
        behavior,
        horizon: header.number("horizon")?.unwrap_or(0),
        seed: header.number("seed")?.unwrap_or(0),
    })
}

pub fn save_tuples(ds: &TupleDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tuples(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_tuples(path: impl AsRef<Path>) -> Result<TupleDataset> {
    read_tuples(BufReader::new(File::open(path)?))
}

pub fn save_trajectories(ds: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trajectories(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    read_trajectories(BufReader::new(File::open(path)?))
}
