//! On-disk formats shared by the subcommands: JSONL datasets, training
//! curve CSVs, and the evaluation report. Every file carries the config
//! hash and seed of the run that produced it so mixed artifacts are caught
//! when read back, not when results look wrong.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{at_path, AppError, AppResult};

/// First line of every JSONL dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub count: usize,
    pub note: String,
}

/// Writes a header line followed by one JSON record per line.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: &DatasetHeader,
    records: &[T],
) -> AppResult<()> {
    let file = File::create(path).map_err(|e| at_path(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |value: String| -> AppResult<()> {
        writeln!(out, "{value}").map_err(|e| at_path(path, e))
    };
    emit(serde_json::to_string(header).map_err(|e| at_path(path, e))?)?;
    for record in records {
        emit(serde_json::to_string(record).map_err(|e| at_path(path, e))?)?;
    }
    out.flush().map_err(|e| at_path(path, e))
}

/// Reads a JSONL dataset back, checking the kind tag and the record count
/// promised by the header. Parse failures report the offending line.
pub fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    expected_kind: &str,
) -> AppResult<(DatasetHeader, Vec<T>)> {
    let file = File::open(path).map_err(|e| at_path(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad_line = |n: usize, err: serde_json::Error| {
        AppError::Io(format!("{}:{n}: {err}", path.display()))
    };

    let first = match lines.next() {
        Some(line) => line.map_err(|e| at_path(path, e))?,
        None => return Err(AppError::Io(format!("{}: empty file", path.display()))),
    };
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| bad_line(1, e))?;
    if header.kind != expected_kind {
        return Err(AppError::Io(format!(
            "{}: expected a {expected_kind} dataset, found {:?}",
            path.display(),
            header.kind
        )));
    }

    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| at_path(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| bad_line(i + 2, e))?);
    }
    if records.len() != header.count {
        return Err(AppError::Io(format!(
            "{}: header promises {} records, found {}",
            path.display(),
            header.count,
            records.len()
        )));
    }
    Ok((header, records))
}

/// One CSV row: the iteration index plus one value per curve column.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub iteration: u64,
    pub values: Vec<f64>,
}

/// A parsed curve CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub config_hash: String,
    pub seed: u64,
    pub note: String,
    pub columns: Vec<String>,
    pub rows: Vec<CurveRecord>,
}

fn check_increasing(rows: &[CurveRecord], path: &Path) -> AppResult<()> {
    for pair in rows.windows(2) {
        if pair[1].iteration <= pair[0].iteration {
            return Err(AppError::Io(format!(
                "{}: iteration {} repeats or goes backwards",
                path.display(),
                pair[1].iteration
            )));
        }
    }
    Ok(())
}

fn write_curve_rows(out: &mut impl Write, rows: &[CurveRecord]) -> std::io::Result<()> {
    for row in rows {
        write!(out, "{}", row.iteration)?;
        for v in &row.values {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes a curve CSV: a `#` comment with provenance, a header line, then
/// one row per iteration. Iterations must be strictly increasing.
pub fn write_curve_csv(
    path: &Path,
    config_hash: &str,
    seed: u64,
    note: &str,
    columns: &[&str],
    rows: &[CurveRecord],
) -> AppResult<()> {
    check_increasing(rows, path)?;
    for row in rows {
        if row.values.len() != columns.len() {
            return Err(AppError::Io(format!(
                "{}: row at iteration {} has {} values for {} columns",
                path.display(),
                row.iteration,
                row.values.len(),
                columns.len()
            )));
        }
    }
    let file = File::create(path).map_err(|e| at_path(path, e))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "# config_hash={config_hash} seed={seed} note={note}")?;
        writeln!(out, "iteration,{}", columns.join(","))?;
        write_curve_rows(&mut out, rows)?;
        out.flush()
    })()
    .map_err(|e| at_path(path, e))
}

/// Appends rows to an existing curve CSV without repeating the header.
/// Used by resumed runs; the strictly increasing check is re-applied over
/// the stored tail plus the new rows.
pub fn append_curve_rows(path: &Path, rows: &[CurveRecord]) -> AppResult<()> {
    let existing = read_curve_csv(path)?;
    let mut combined = existing.rows;
    combined.extend(rows.iter().cloned());
    check_increasing(&combined, path)?;
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| at_path(path, e))?;
    let mut out = BufWriter::new(file);
    write_curve_rows(&mut out, rows).map_err(|e| at_path(path, e))?;
    out.flush().map_err(|e| at_path(path, e))
}

/// Parses a curve CSV written by [`write_curve_csv`], validating the
/// provenance comment, the header, and the iteration ordering.
pub fn read_curve_csv(path: &Path) -> AppResult<CurveFile> {
    let file = File::open(path).map_err(|e| at_path(path, e))?;
    let mut reader = BufReader::new(file);
    let mut comment = String::new();
    reader
        .read_line(&mut comment)
        .map_err(|e| at_path(path, e))?;
    let bad = |line: usize, what: &str| {
        AppError::Io(format!("{}:{line}: {what}", path.display()))
    };

    let comment = comment.trim();
    let rest = comment
        .strip_prefix("# ")
        .ok_or_else(|| bad(1, "missing provenance comment"))?;
    let mut config_hash = None;
    let mut seed = None;
    let mut note = None;
    for field in rest.splitn(3, ' ') {
        match field.split_once('=') {
            Some(("config_hash", v)) => config_hash = Some(v.to_string()),
            Some(("seed", v)) => {
                seed = Some(v.parse().map_err(|_| bad(1, "seed is not an integer"))?)
            }
            Some(("note", v)) => note = Some(v.to_string()),
            _ => return Err(bad(1, "malformed provenance comment")),
        }
    }
    let (config_hash, seed, note) = match (config_hash, seed, note) {
        (Some(h), Some(s), Some(n)) => (h, s, n),
        _ => return Err(bad(1, "provenance comment is missing a field")),
    };

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = csv.headers().map_err(|e| at_path(path, e))?;
    let mut columns: Vec<String> = headers.iter().map(str::to_string).collect();
    if columns.first().map(String::as_str) != Some("iteration") {
        return Err(bad(2, "first column must be iteration"));
    }
    columns.remove(0);

    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let line = i + 3;
        let record = record.map_err(|_| bad(line, "malformed row"))?;
        if record.len() != columns.len() + 1 {
            return Err(bad(line, "wrong number of fields"));
        }
        let iteration = record[0]
            .parse()
            .map_err(|_| bad(line, "iteration is not an integer"))?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| f.parse())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| bad(line, "value is not a number"))?;
        rows.push(CurveRecord { iteration, values });
    }
    check_increasing(&rows, path)?;
    Ok(CurveFile {
        config_hash,
        seed,
        note,
        columns,
        rows,
    })
}

/// Per-scenario outcome in the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub id: u64,
    pub cube: [f64; 2],
    pub target: [f64; 2],
    pub success: bool,
    pub final_cube_target_dist: f64,
    pub steps: usize,
}

/// Evaluation summary written as pretty JSON. `success_rate` is null when
/// no scenarios ran; `success_rate_defined` makes that case explicit for
/// consumers that coerce null to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub note: String,
    pub success_threshold: f64,
    pub scenarios: Vec<ScenarioResult>,
    pub success_rate: Option<f64>,
    pub success_rate_defined: bool,
}

pub fn write_eval_report(path: &Path, report: &EvalReport) -> AppResult<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| at_path(path, e))?;
    std::fs::write(path, json + "\n").map_err(|e| at_path(path, e))
}

pub fn read_eval_report(path: &Path) -> AppResult<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| at_path(path, e))?;
    serde_json::from_str(&text).map_err(|e| at_path(path, e))
}

/// Refuses to clobber existing outputs unless `--overwrite` was passed.
pub fn guard_outputs(paths: &[&Path], overwrite: bool) -> AppResult<()> {
    if overwrite {
        return Ok(());
    }
    for path in paths {
        if path.exists() {
            return Err(AppError::Io(format!(
                "{} already exists; pass --overwrite to replace it",
                path.display()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn header(kind: &str, count: usize) -> DatasetHeader {
        DatasetHeader {
            kind: kind.into(),
            config_hash: "deadbeefdeadbeef".into(),
            seed: 7,
            count,
            note: "test".into(),
        }
    }

    #[test]
    fn jsonl_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let records = vec![vec![0.1, 0.2 + 0.1], vec![f64::MIN_POSITIVE, -1.5e300]];
        write_jsonl(&path, &header("vecs", 2), &records).unwrap();
        let (h, back): (_, Vec<Vec<f64>>) = read_jsonl(&path, "vecs").unwrap();
        assert_eq!(h, header("vecs", 2));
        assert_eq!(back, records);
        let bits: Vec<u64> = back.iter().flatten().map(|v| v.to_bits()).collect();
        let orig: Vec<u64> = records.iter().flatten().map(|v| v.to_bits()).collect();
        assert_eq!(bits, orig);
    }

    #[test]
    fn jsonl_kind_and_count_are_checked() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        write_jsonl(&path, &header("vecs", 1), &[vec![1.0]]).unwrap();
        let err = read_jsonl::<Vec<f64>>(&path, "other").unwrap_err();
        assert!(err.to_string().contains("expected a other dataset"), "{err}");

        write_jsonl(&path, &header("vecs", 3), &[vec![1.0]]).unwrap();
        let err = read_jsonl::<Vec<f64>>(&path, "vecs").unwrap_err();
        assert!(err.to_string().contains("promises 3 records"), "{err}");
    }

    #[test]
    fn jsonl_parse_errors_name_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        write_jsonl(&path, &header("vecs", 2), &[vec![1.0], vec![2.0]]).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("[2.0]", "[2.0");
        std::fs::write(&path, text).unwrap();
        let err = read_jsonl::<Vec<f64>>(&path, "vecs").unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_IO);
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    fn rows() -> Vec<CurveRecord> {
        vec![
            CurveRecord { iteration: 0, values: vec![1.5, 0.25] },
            CurveRecord { iteration: 1, values: vec![1.25, 0.125] },
            CurveRecord { iteration: 4, values: vec![0.75, 0.0625] },
        ]
    }

    #[test]
    fn curve_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&path, "cafecafecafecafe", 3, "loss curve", &["a", "b"], &rows())
            .unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back.config_hash, "cafecafecafecafe");
        assert_eq!(back.seed, 3);
        assert_eq!(back.note, "loss curve");
        assert_eq!(back.columns, vec!["a", "b"]);
        assert_eq!(back.rows, rows());
    }

    #[test]
    fn curve_append_continues_the_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&path, "h", 0, "n", &["a", "b"], &rows()).unwrap();
        let more = vec![CurveRecord { iteration: 6, values: vec![0.5, 0.5] }];
        append_curve_rows(&path, &more).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back.rows.len(), 4);
        assert_eq!(back.rows[3], more[0]);

        let stale = vec![CurveRecord { iteration: 4, values: vec![0.0, 0.0] }];
        assert!(append_curve_rows(&path, &stale).is_err());
    }

    #[test]
    fn curve_rejects_non_increasing_iterations() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let bad = vec![
            CurveRecord { iteration: 2, values: vec![1.0] },
            CurveRecord { iteration: 2, values: vec![0.5] },
        ];
        let err = write_curve_csv(&path, "h", 0, "n", &["a"], &bad).unwrap_err();
        assert!(err.to_string().contains("repeats or goes backwards"), "{err}");
    }

    #[test]
    fn curve_read_reports_malformed_rows_with_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&path, "h", 0, "n", &["a", "b"], &rows()).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("1,1.25,0.125", "1,1.25,oops");
        std::fs::write(&path, text).unwrap();
        let err = read_curve_csv(&path).unwrap_err();
        assert!(err.to_string().contains(":4:"), "{err}");

        std::fs::write(&path, "iteration,a\n0,1.0\n").unwrap();
        let err = read_curve_csv(&path).unwrap_err();
        assert!(err.to_string().contains("provenance"), "{err}");
    }

    #[test]
    fn eval_report_round_trips_and_keeps_null_rate() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = EvalReport {
            kind: "eval".into(),
            config_hash: "h".into(),
            seed: 0,
            note: "n".into(),
            success_threshold: 0.05,
            scenarios: Vec::new(),
            success_rate: None,
            success_rate_defined: false,
        };
        write_eval_report(&path, &report).unwrap();
        let back = read_eval_report(&path).unwrap();
        assert_eq!(back, report);
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.contains("\"success_rate\": null"), "{raw}");
    }

    #[test]
    fn guard_refuses_existing_outputs_without_overwrite() {
        let dir = tempdir().unwrap();
        let exists = dir.path().join("present.bin");
        std::fs::write(&exists, b"x").unwrap();
        let missing = dir.path().join("missing.bin");
        assert!(guard_outputs(&[&missing], false).is_ok());
        let err = guard_outputs(&[&missing, &exists], false).unwrap_err();
        assert!(err.to_string().contains("--overwrite"), "{err}");
        assert!(guard_outputs(&[&exists], true).is_ok());
    }
}
