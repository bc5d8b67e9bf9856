//! Result tables on disk: fixed column order, 12 significant digits, and a
//! separate summary file with median absolute errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::experiment::{summarize, Format, ResultRow, ResultTable};
use crate::error::{Error, Result};

pub const COLUMNS: &[&str] = &[
    "scenario", "estimator", "n", "seed", "point", "lower", "upper", "truth", "abs_error", "j_cp", "gap", "c_inf", "chi_sq",
    "sigma_min_d", "error_code",
];

/// `1.23456789012e0` style, `inf`/`-inf`/`NaN` otherwise.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

fn parse_float(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| Error::Parse { line: 0, msg: format!("bad number `{s}`: {e}") })
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn floats(r: &ResultRow) -> [Option<f64>; 10] {
    [r.point, r.lower, r.upper, r.truth, r.abs_error, r.j_cp, r.gap, r.c_inf, r.chi_sq, r.sigma_min_d]
}

fn record(r: &ResultRow) -> Vec<String> {
    let mut out = vec![r.scenario.clone(), r.estimator.clone(), r.n.to_string(), r.seed.to_string()];
    out.extend(floats(r).iter().map(|x| opt(*x)));
    out.push(r.error_code.clone());
    out
}

/// Path of the summary written next to `path`: `results.csv` becomes
/// `results.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.summary.{ext}"))
}

pub fn write_csv<W: Write>(table: &ResultTable, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(COLUMNS)?;
    for r in &table.rows {
        wr.write_record(record(r))?;
    }
    wr.flush()?;
    Ok(())
}

fn json_float(x: Option<f64>) -> Value {
    match x {
        None => Value::Null,
        Some(v) if v.is_finite() => json!(format_float(v).parse::<f64>().expect("round trip")),
        Some(v) => Value::String(format_float(v)),
    }
}

pub fn table_to_json(table: &ResultTable) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("scenario".into(), json!(r.scenario));
            m.insert("estimator".into(), json!(r.estimator));
            m.insert("n".into(), json!(r.n));
            m.insert("seed".into(), json!(r.seed));
            for (k, v) in COLUMNS[4..14].iter().zip(floats(r)) {
                m.insert((*k).into(), json_float(v));
            }
            m.insert("error_code".into(), json!(r.error_code));
            Value::Object(m)
        })
        .collect();
    json!({ "columns": COLUMNS, "rows": rows, "selections": serde_json::to_value(&table.selections).expect("serializable") })
}

fn write_summary(table: &ResultTable, format: Format, path: &Path) -> Result<()> {
    let summary = summarize(table);
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(file);
            wr.write_record(["estimator", "n", "median_abs_error", "count"])?;
            for (m, n, med, count) in summary {
                wr.write_record([m, n.to_string(), format_float(med), count.to_string()])?;
            }
            wr.flush()?;
        }
        Format::Json => {
            let rows: Vec<Value> = summary
                .into_iter()
                .map(|(m, n, med, count)| json!({ "estimator": m, "n": n, "median_abs_error": json_float(Some(med)), "count": count }))
                .collect();
            serde_json::to_writer_pretty(file, &json!({ "summary": rows }))?;
        }
    }
    Ok(())
}

/// Write the table and its summary file.
pub fn emit_report(table: &ResultTable, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(table, file)?,
        Format::Json => {
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, &table_to_json(table))?;
            file.flush()?;
        }
    }
    write_summary(table, format, &summary_path(path))
}

pub fn read_csv<R: Read>(r: R) -> Result<ResultTable> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    if header != COLUMNS {
        return Err(Error::Parse { line: 1, msg: "unexpected columns".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let f = |k: usize| parse_float(&rec[k]).map_err(|_| Error::Parse { line, msg: format!("bad value in column {}", COLUMNS[k]) });
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| Error::Parse { line, msg: format!("bad integer in column {}", COLUMNS[k]) });
        rows.push(ResultRow {
            scenario: rec[0].to_string(),
            estimator: rec[1].to_string(),
            n: int(2)?,
            seed: int(3)?,
            point: f(4)?,
            lower: f(5)?,
            upper: f(6)?,
            truth: f(7)?,
            abs_error: f(8)?,
            j_cp: f(9)?,
            gap: f(10)?,
            c_inf: f(11)?,
            chi_sq: f(12)?,
            sigma_min_d: f(13)?,
            error_code: rec[14].to_string(),
        });
    }
    Ok(ResultTable { rows, selections: Default::default() })
}

pub fn read_json<R: Read>(r: R) -> Result<ResultTable> {
    let v: Value = serde_json::from_reader(r)?;
    let bad = |msg: &str| Error::Parse { line: 0, msg: msg.to_string() };
    let rows = v.get("rows").and_then(Value::as_array).ok_or_else(|| bad("missing rows"))?;
    let num = |x: &Value| -> Result<Option<f64>> {
        match x {
            Value::Null => Ok(None),
            Value::Number(n) => Ok(n.as_f64()),
            Value::String(s) => parse_float(s),
            _ => Err(bad("bad float")),
        }
    };
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let s = |k: &str| r.get(k).and_then(Value::as_str).map(String::from).ok_or_else(|| bad(k));
        let u = |k: &str| r.get(k).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad(k));
        let f = |k: &str| num(r.get(k).unwrap_or(&Value::Null));
        out.push(ResultRow {
            scenario: s("scenario")?,
            estimator: s("estimator")?,
            n: u("n")?,
            seed: u("seed")?,
            point: f("point")?,
            lower: f("lower")?,
            upper: f("upper")?,
            truth: f("truth")?,
            abs_error: f("abs_error")?,
            j_cp: f("j_cp")?,
            gap: f("gap")?,
            c_inf: f("c_inf")?,
            chi_sq: f("chi_sq")?,
            sigma_min_d: f("sigma_min_d")?,
            error_code: s("error_code")?,
        });
    }
    let selections = match v.get("selections") {
        Some(s) => serde_json::from_value(s.clone())?,
        None => Default::default(),
    };
    Ok(ResultTable { rows: out, selections })
}

/// Load a table written by [`emit_report`]; the format follows the extension.
pub fn load_table(path: impl AsRef<Path>) -> Result<ResultTable> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_json(file),
        _ => read_csv(file),
    }
}
