//! Metrics CSV files.
//!
//! Columns are `t,loss,grad_l1,grad_l2,est_err_sq,bits_up,bits_down,envelope_ok`.
//! Floats use `{:.16e}`, which round-trips every `f64`; `envelope_ok` is 0/1.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricsRow;
use crate::verify::pairwise_sum;

pub const HEADER: &str = "t,loss,grad_l1,grad_l2,est_err_sq,bits_up,bits_down,envelope_ok";

pub fn format_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(HEADER.len() + 1 + rows.len() * 128);
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.t,
            r.loss,
            r.grad_l1,
            r.grad_l2,
            r.est_err_sq,
            r.bits_up,
            r.bits_down,
            u8::from(r.envelope_ok)
        );
    }
    out
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: Option<&str>) -> Result<T> {
    s.and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad or missing `{name}`")))
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(Error::Parse("unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let n = i + 2;
        let mut it = line.split(',');
        let row = MetricsRow {
            t: field(n, "t", it.next())?,
            loss: field(n, "loss", it.next())?,
            grad_l1: field(n, "grad_l1", it.next())?,
            grad_l2: field(n, "grad_l2", it.next())?,
            est_err_sq: field(n, "est_err_sq", it.next())?,
            bits_up: field(n, "bits_up", it.next())?,
            bits_down: field(n, "bits_down", it.next())?,
            envelope_ok: field::<u8>(n, "envelope_ok", it.next())? == 1,
        };
        if it.next().is_some() {
            return Err(Error::Parse(format!("line {n}: too many fields")));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    parse_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Writes to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    if let Err(e) = std::fs::write(&tmp, bytes) {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(&tmp, e));
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_atomic(path, format_csv(rows).as_bytes())
}

/// Row-wise seed average. Float columns use pairwise sums in seed order, bit
/// counts the integer mean, and `envelope_ok` holds only if it holds for
/// every seed.
pub fn mean_rows(per_seed: &[&[MetricsRow]]) -> Result<Vec<MetricsRow>> {
    let Some(first) = per_seed.first() else {
        return Err(Error::InvalidInput("no runs to average".into()));
    };
    if per_seed.iter().any(|rows| rows.len() != first.len()) {
        return Err(Error::InvalidInput("runs have different row counts".into()));
    }
    let k = per_seed.len() as f64;
    let mut out = Vec::with_capacity(first.len());
    for (i, row) in first.iter().enumerate() {
        if per_seed.iter().any(|rows| rows[i].t != row.t) {
            return Err(Error::InvalidInput(format!(
                "row {i} has mismatched t across runs"
            )));
        }
        let avg = |f: fn(&MetricsRow) -> f64| {
            pairwise_sum(&per_seed.iter().map(|rows| f(&rows[i])).collect::<Vec<_>>()) / k
        };
        let avg_bits = |f: fn(&MetricsRow) -> u64| {
            per_seed
                .iter()
                .map(|rows| f(&rows[i]) as u128)
                .sum::<u128>()
                / per_seed.len() as u128
        };
        out.push(MetricsRow {
            t: row.t,
            loss: avg(|r| r.loss),
            grad_l1: avg(|r| r.grad_l1),
            grad_l2: avg(|r| r.grad_l2),
            est_err_sq: avg(|r| r.est_err_sq),
            bits_up: avg_bits(|r| r.bits_up) as u64,
            bits_down: avg_bits(|r| r.bits_down) as u64,
            envelope_ok: per_seed.iter().all(|rows| rows[i].envelope_ok),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64, v: f64) -> MetricsRow {
        MetricsRow {
            t,
            loss: v,
            grad_l1: v * 2.0,
            grad_l2: v / 3.0,
            est_err_sq: 0.1 + v,
            bits_up: 16,
            bits_down: 8,
            envelope_ok: t.is_multiple_of(2),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let rows: Vec<MetricsRow> = (1..20)
            .map(|t| row(t, 1.0 / (t as f64 * 7.0) + 1e-300))
            .collect();
        assert_eq!(parse_csv(&format_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn mean_of_two_runs() {
        let a = vec![row(1, 1.0), row(2, 3.0)];
        let b = vec![row(1, 2.0), row(2, 5.0)];
        let m = mean_rows(&[&a, &b]).unwrap();
        assert_eq!(m[0].loss, 1.5);
        assert_eq!(m[1].grad_l1, 8.0);
        assert_eq!(m[1].bits_up, 16);
        assert!(mean_rows(&[&a, &b[..1]]).is_err());
        assert!(parse_csv("t,loss\n1,2\n").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, &[row(1, 1.0)]).unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.csv")]);
        assert!(write_csv(&dir.path().join("missing/x.csv"), &[]).is_err());
    }
}
