//! Trace CSV: one `# key=value ...` metadata line, then a fixed header and one row
//! per outer iteration. Absent quantities are empty fields.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::alm::ALMTrace;
use crate::error::{HippmError, Result};
use crate::solver::IterateTrace;

pub const HEADER: [&str; 10] = [
    "k",
    "c_k",
    "eps_k",
    "residual",
    "envelope",
    "dist_to_star",
    "feas_max",
    "obj_gap",
    "inner_iters",
    "criterion_ok",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub c_k: Option<f64>,
    pub eps_k: Option<f64>,
    pub residual: Option<f64>,
    pub envelope: Option<f64>,
    pub dist_to_star: Option<f64>,
    pub feas_max: Option<f64>,
    pub obj_gap: Option<f64>,
    pub inner_iters: Option<usize>,
    pub criterion_ok: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceFile {
    pub metadata: BTreeMap<String, String>,
    pub rows: Vec<CsvRow>,
}

impl TraceFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        let v = self
            .meta(key)
            .ok_or_else(|| HippmError::MissingData(format!("trace metadata lacks {key:?}")))?;
        v.parse()
            .map_err(|_| HippmError::MissingData(format!("trace metadata {key:?} is not a number")))
    }
}

fn fmt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn sanitize(v: &str) -> String {
    v.chars()
        .map(|ch| if ch.is_whitespace() || ch == '=' { '_' } else { ch })
        .collect()
}

pub fn write_trace<W: Write>(out: W, trace: &TraceFile) -> Result<()> {
    let mut out = out;
    let meta: Vec<String> = trace
        .metadata
        .iter()
        .map(|(k, v)| format!("{}={}", sanitize(k), sanitize(v)))
        .collect();
    writeln!(out, "# {}", meta.join(" "))?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| HippmError::Io(e.to_string());
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &trace.rows {
        w.write_record([
            r.k.to_string(),
            fmt_f(r.c_k),
            fmt_f(r.eps_k),
            fmt_f(r.residual),
            fmt_f(r.envelope),
            fmt_f(r.dist_to_star),
            fmt_f(r.feas_max),
            fmt_f(r.obj_gap),
            r.inner_iters.map(|v| v.to_string()).unwrap_or_default(),
            r.criterion_ok.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(field: &str, line: usize, col: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| HippmError::Parse {
        line,
        msg: format!("bad {col} value {field:?}"),
    })
}

pub fn read_trace<R: Read>(input: R) -> Result<TraceFile> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let meta_line = first
        .trim_end()
        .strip_prefix('#')
        .ok_or_else(|| HippmError::Parse {
            line: 1,
            msg: "missing metadata line".into(),
        })?;
    let metadata = meta_line
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| HippmError::Parse { line: 2, msg: e.to_string() })?
        .clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(HippmError::Parse {
            line: 2,
            msg: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| HippmError::Parse { line, msg: e.to_string() })?;
        let f = |j: usize| rec.get(j).unwrap_or("");
        let ok = match f(9) {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            other => {
                return Err(HippmError::Parse {
                    line,
                    msg: format!("bad criterion_ok {other:?}"),
                })
            }
        };
        rows.push(CsvRow {
            k: parse_opt(f(0), line, "k")?.ok_or_else(|| HippmError::Parse {
                line,
                msg: "empty k".into(),
            })?,
            c_k: parse_opt(f(1), line, "c_k")?,
            eps_k: parse_opt(f(2), line, "eps_k")?,
            residual: parse_opt(f(3), line, "residual")?,
            envelope: parse_opt(f(4), line, "envelope")?,
            dist_to_star: parse_opt(f(5), line, "dist_to_star")?,
            feas_max: parse_opt(f(6), line, "feas_max")?,
            obj_gap: parse_opt(f(7), line, "obj_gap")?,
            inner_iters: parse_opt(f(8), line, "inner_iters")?,
            criterion_ok: ok,
        });
    }
    Ok(TraceFile { metadata, rows })
}

/// Rows of an inclusion trace; `envelope(k)` fills the envelope column when given.
pub fn rows_from_iterate_trace(trace: &IterateTrace, envelope: Option<&dyn Fn(usize) -> f64>) -> Vec<CsvRow> {
    trace
        .rows
        .iter()
        .map(|r| CsvRow {
            k: r.k,
            c_k: Some(r.c),
            eps_k: Some(r.eps_used),
            residual: r.residual,
            envelope: match envelope {
                Some(f) if r.k >= 1 => Some(f(r.k)),
                _ => None,
            },
            dist_to_star: r.dist_to_star,
            feas_max: None,
            obj_gap: None,
            inner_iters: Some(r.inner_iterations),
            criterion_ok: Some(r.criterion_ok),
        })
        .collect()
}

/// Rows of an ALM trace. Row `k` carries `x̃ᵏ⁺¹` feasibility and objective gap and
/// `‖yᵏ − y*‖` when `y*` is given.
pub fn rows_from_alm_trace(trace: &ALMTrace, y_star: Option<&crate::Vector>) -> Vec<CsvRow> {
    trace
        .rows
        .iter()
        .map(|r| CsvRow {
            k: r.k,
            c_k: Some(r.c),
            eps_k: Some(r.eps),
            residual: None,
            envelope: None,
            dist_to_star: y_star.map(|ys| (&r.y - ys).norm()),
            feas_max: Some(r.feas_max),
            obj_gap: r.obj_gap,
            inner_iters: Some(r.inner_iterations),
            criterion_ok: Some(r.criterion_ok()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_absent_fields() {
        let mut t = TraceFile::default();
        t.metadata.insert("method".into(), "halpern".into());
        t.metadata.insert("anchor".into(), "1;0".into());
        t.rows.push(CsvRow {
            k: 0,
            c_k: Some(1.0),
            eps_k: Some(0.25),
            residual: Some(std::f64::consts::FRAC_1_SQRT_2),
            inner_iters: Some(3),
            criterion_ok: Some(true),
            ..Default::default()
        });
        let mut buf = Vec::new();
        write_trace(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("k,c_k,eps_k,residual,envelope,dist_to_star,feas_max,obj_gap,inner_iters,criterion_ok"));
        assert!(text.contains("0,1.0000000000000000e0,2.5000000000000000e-1,7.0710678118654757e-1,,,,,3,1"));
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_wrong_header() {
        let text = "# a=b\nk,c\n0,1\n";
        assert!(read_trace(text.as_bytes()).is_err());
    }
}
