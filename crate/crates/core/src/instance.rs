//! Line-oriented instance files.
//!
//! ```text
//! # comment
//! kind inclusion          # or qp
//! name skew2
//! family affine           # affine | box_normal_cone | scaled_skew | quadratic_box
//! dimension 2
//! [M]
//! 0 -1
//! 1 0
//! [q]
//! 0 0
//! [anchor]
//! 1 0
//! ```
//!
//! Key lines are `key value`; a `[section]` header is followed by whitespace-separated
//! numbers, matrices row-major with one row per line. Recognized sections:
//! `M q S Q A b lower upper anchor z_star x_star y_star y0`, plus the keys `mu`,
//! `constraints` and `optimum`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::alm::{ConvexProgram, KnownSolution};
use crate::error::{HippmError, Result};
use crate::linalg::{Matrix, Vector};
use crate::operator::{
    AffineOperator, BoxNormalCone, MonotoneOperator, QuadraticBoxSubdifferential, ScaledIdentityPlusSkew,
};

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceBody {
    Inclusion {
        op: MonotoneOperator,
        anchor: Option<Vector>,
        z_star: Option<Vector>,
    },
    Qp {
        program: ConvexProgram,
        y0: Option<Vector>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub dimension: usize,
    pub body: InstanceBody,
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self.body {
            InstanceBody::Inclusion { .. } => "inclusion",
            InstanceBody::Qp { .. } => "qp",
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse(&text)
    }
}

struct Section {
    line: usize,
    rows: Vec<Vec<f64>>,
}

struct Raw {
    keys: BTreeMap<String, (usize, String)>,
    sections: BTreeMap<String, Section>,
}

fn perr(line: usize, msg: impl Into<String>) -> HippmError {
    HippmError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| perr(line, format!("not a number: {tok:?}")))?;
    if v.is_nan() {
        return Err(perr(line, "NaN is not allowed"));
    }
    Ok(v)
}

fn tokenize(text: &str) -> Result<Raw> {
    let mut keys = BTreeMap::new();
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(line, "unterminated section header"))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(perr(line, format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), Section { line, rows: Vec::new() });
            current = Some(name);
            continue;
        }
        let first = content.split_whitespace().next().unwrap_or("");
        let starts_numeric = first
            .chars()
            .next()
            .is_some_and(|ch| ch.is_ascii_digit() || matches!(ch, '-' | '+' | '.'))
            || first.eq_ignore_ascii_case("inf");
        match (&current, starts_numeric) {
            (Some(name), true) => {
                let row = content
                    .split_whitespace()
                    .map(|t| parse_number(t, line))
                    .collect::<Result<Vec<f64>>>()?;
                sections.get_mut(name).expect("open section").rows.push(row);
            }
            (None, true) => return Err(perr(line, "numeric data outside a section")),
            _ => {
                let mut parts = content.splitn(2, char::is_whitespace);
                let key = parts.next().unwrap_or("").to_string();
                let value = parts.next().unwrap_or("").trim().to_string();
                if value.is_empty() {
                    return Err(perr(line, format!("key {key:?} has no value")));
                }
                if keys.insert(key.clone(), (line, value)).is_some() {
                    return Err(perr(line, format!("duplicate key {key:?}")));
                }
                current = None;
            }
        }
    }
    Ok(Raw { keys, sections })
}

impl Raw {
    fn key(&self, name: &str) -> Result<(usize, &str)> {
        self.keys
            .get(name)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| perr(0, format!("missing key {name:?}")))
    }

    fn count(&self, name: &str) -> Result<usize> {
        let (line, v) = self.key(name)?;
        v.parse()
            .map_err(|_| perr(line, format!("{name} must be a nonnegative integer")))
    }

    fn vector(&self, name: &str, len: usize) -> Result<Option<Vector>> {
        let Some(sec) = self.sections.get(name) else {
            return Ok(None);
        };
        let flat: Vec<f64> = sec.rows.iter().flatten().copied().collect();
        if flat.len() != len {
            return Err(perr(
                sec.line,
                format!("[{name}] has {} entries, expected {len}", flat.len()),
            ));
        }
        Ok(Some(Vector::from_vec(flat)))
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Option<Matrix>> {
        let Some(sec) = self.sections.get(name) else {
            return Ok(None);
        };
        if sec.rows.len() != rows || sec.rows.iter().any(|r| r.len() != cols) {
            return Err(perr(
                sec.line,
                format!("[{name}] must be {rows}×{cols}, one row per line"),
            ));
        }
        Ok(Some(Matrix::from_row_iterator(
            rows,
            cols,
            sec.rows.iter().flatten().copied(),
        )))
    }

    fn require<T>(&self, name: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| perr(0, format!("missing section [{name}]")))
    }

    fn region(&self, n: usize) -> Result<BoxNormalCone> {
        let lower = self
            .vector("lower", n)?
            .unwrap_or_else(|| Vector::from_element(n, f64::NEG_INFINITY));
        let upper = self
            .vector("upper", n)?
            .unwrap_or_else(|| Vector::from_element(n, f64::INFINITY));
        BoxNormalCone::new(lower, upper)
    }

    fn finite(&self, name: &str, n: usize) -> Result<Option<Vector>> {
        let v = self.vector(name, n)?;
        if let Some(v) = &v {
            if v.iter().any(|x| !x.is_finite()) {
                let line = self.sections[name].line;
                return Err(perr(line, format!("[{name}] must be finite")));
            }
        }
        Ok(v)
    }
}

pub fn parse(text: &str) -> Result<Instance> {
    let raw = tokenize(text)?;
    let kind = raw.key("kind")?.1.to_string();
    let name = raw.key("name")?.1.to_string();
    let n = raw.count("dimension")?;
    if n == 0 {
        return Err(perr(raw.key("dimension")?.0, "dimension must be ≥ 1"));
    }
    let body = match kind.as_str() {
        "inclusion" => {
            let (fline, family) = raw.key("family")?;
            let op: MonotoneOperator = match family {
                "affine" => {
                    let m = raw.matrix("M", n, n)?;
                    let q = raw.vector("q", n)?.unwrap_or_else(|| Vector::zeros(n));
                    AffineOperator::new(raw.require("M", m)?, q)?.into()
                }
                "box_normal_cone" => raw.region(n)?.into(),
                "scaled_skew" => {
                    let (mline, mu) = raw.key("mu")?;
                    let mu = parse_number(mu, mline)?;
                    let s = raw.matrix("S", n, n)?;
                    ScaledIdentityPlusSkew::new(mu, raw.require("S", s)?)?.into()
                }
                "quadratic_box" => {
                    let qm = raw.matrix("Q", n, n)?;
                    let q = raw.vector("q", n)?.unwrap_or_else(|| Vector::zeros(n));
                    QuadraticBoxSubdifferential::new(raw.require("Q", qm)?, q, raw.region(n)?)?.into()
                }
                other => return Err(perr(fline, format!("unknown family {other:?}"))),
            };
            InstanceBody::Inclusion {
                op,
                anchor: raw.finite("anchor", n)?,
                z_star: raw.finite("z_star", n)?,
            }
        }
        "qp" => {
            let m = raw.count("constraints")?;
            let qm = raw.matrix("Q", n, n)?;
            let q = raw.vector("q", n)?.unwrap_or_else(|| Vector::zeros(n));
            let a = if m == 0 {
                Some(Matrix::zeros(0, n))
            } else {
                raw.matrix("A", m, n)?
            };
            let b = raw.vector("b", m)?.unwrap_or_else(|| Vector::zeros(m));
            let mut program =
                ConvexProgram::new(raw.require("Q", qm)?, q, raw.require("A", a)?, b, raw.region(n)?)?;
            let optimum = match raw.keys.get("optimum") {
                Some((line, v)) => {
                    let o = parse_number(v, *line)?;
                    if !o.is_finite() {
                        return Err(perr(*line, "optimum must be finite"));
                    }
                    Some(o)
                }
                None => None,
            };
            let x = raw.finite("x_star", n)?;
            let y = raw.finite("y_star", m)?;
            if x.is_some() || y.is_some() || optimum.is_some() {
                program = program.with_solution(KnownSolution { x, y, optimum })?;
            }
            InstanceBody::Qp {
                program,
                y0: raw.finite("y0", m)?,
            }
        }
        other => return Err(perr(raw.key("kind")?.0, format!("unknown kind {other:?}"))),
    };
    Ok(Instance {
        name,
        dimension: n,
        body,
    })
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

fn write_vector(out: &mut String, name: &str, v: &Vector) {
    let _ = writeln!(out, "[{name}]");
    let row: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    let _ = writeln!(out, "{}", row.join(" "));
}

fn write_matrix(out: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(out, "[{name}]");
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_num(m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn write_region(out: &mut String, region: &BoxNormalCone) {
    write_vector(out, "lower", region.lower());
    write_vector(out, "upper", region.upper());
}

/// Canonical text form; `parse(write(i)) == i` and `write` is idempotent through `parse`.
pub fn write(inst: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind {}", inst.kind());
    let _ = writeln!(out, "name {}", inst.name);
    let _ = writeln!(out, "dimension {}", inst.dimension);
    match &inst.body {
        InstanceBody::Inclusion { op, anchor, z_star } => {
            let _ = writeln!(out, "family {}", op.family());
            match op {
                MonotoneOperator::Affine(a) => {
                    write_matrix(&mut out, "M", a.matrix());
                    write_vector(&mut out, "q", a.offset());
                }
                MonotoneOperator::BoxNormalCone(b) => write_region(&mut out, b),
                MonotoneOperator::ScaledIdentityPlusSkew(s) => {
                    let _ = writeln!(out, "mu {}", fmt_num(s.mu()));
                    write_matrix(&mut out, "S", s.skew());
                }
                MonotoneOperator::QuadraticBox(qb) => {
                    write_matrix(&mut out, "Q", qb.quad());
                    write_vector(&mut out, "q", qb.linear());
                    write_region(&mut out, qb.region());
                }
            }
            if let Some(a) = anchor {
                write_vector(&mut out, "anchor", a);
            }
            if let Some(z) = z_star {
                write_vector(&mut out, "z_star", z);
            }
        }
        InstanceBody::Qp { program, y0 } => {
            let _ = writeln!(out, "constraints {}", program.constraints());
            if let Some(o) = program.optimum() {
                let _ = writeln!(out, "optimum {}", fmt_num(o));
            }
            write_matrix(&mut out, "Q", program.quad());
            write_vector(&mut out, "q", program.linear());
            if program.constraints() > 0 {
                write_matrix(&mut out, "A", program.constraint_matrix());
                write_vector(&mut out, "b", program.constraint_offset());
            }
            write_region(&mut out, program.region());
            if let Some(sol) = &program.solution {
                if let Some(x) = &sol.x {
                    write_vector(&mut out, "x_star", x);
                }
                if let Some(y) = &sol.y {
                    write_vector(&mut out, "y_star", y);
                }
            }
            if let Some(y) = y0 {
                write_vector(&mut out, "y0", y);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SKEW: &str = "\
# 2-D rotation
kind inclusion
name skew2
family affine
dimension 2
[M]
0 -1
1 0
[q]
0 0
[anchor]
1 0
";

    const CANONICAL_QP: &str = "\
kind qp
name canonical
dimension 2
constraints 1
optimum 0.5
[Q]
1 0
0 1
[A]
-1 0
[b]
-1
[x_star]
1 0
[y_star]
1
";

    #[test]
    fn parses_affine_inclusion() {
        let inst = parse(SKEW).unwrap();
        assert_eq!(inst.name, "skew2");
        match &inst.body {
            InstanceBody::Inclusion { op, anchor, .. } => {
                assert_eq!(op.family(), "affine");
                assert_eq!(anchor.as_ref().unwrap()[0], 1.0);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn parses_qp_with_solution() {
        let inst = parse(CANONICAL_QP).unwrap();
        match &inst.body {
            InstanceBody::Qp { program, .. } => {
                assert_eq!(program.constraints(), 1);
                assert_eq!(program.optimum(), Some(0.5));
                assert!(program.region().lower()[0].is_infinite());
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn canonical_form_is_stable() {
        for text in [SKEW, CANONICAL_QP] {
            let once = write(&parse(text).unwrap());
            let twice = write(&parse(&once).unwrap());
            assert_eq!(once, twice);
            assert_eq!(parse(&once).unwrap(), parse(text).unwrap());
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let bad = SKEW.replace("1 0\n[q]", "1 0 7\n[q]");
        assert!(matches!(parse(&bad), Err(HippmError::Parse { .. })));
        let bad = SKEW.replace("dimension 2", "dimension 3");
        assert!(parse(&bad).is_err());
        let bad = SKEW.replace("0 -1", "0 nan");
        assert!(parse(&bad).is_err());
        assert!(parse("kind inclusion\nname x\ndimension 2\nfamily bogus\n").is_err());
        assert!(parse("1 2 3\n").is_err());
    }
}
