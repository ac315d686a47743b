//! MPS reader and writer.
//!
//! Fields are split on whitespace, so fixed-format files parse as long as
//! names contain no spaces. `G` rows are negated into `<=` rows and ranged
//! rows become two `<=` rows.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Bound, DenseMatrix, MilpInstance, RowSense};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowKind {
    L,
    G,
    E,
}

struct RowDef {
    kind: RowKind,
    rhs: f64,
    range: Option<f64>,
}

struct ColDef {
    cost: f64,
    entries: Vec<(usize, f64)>,
    integer: bool,
    lo: f64,
    hi: f64,
    lo_set: bool,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Mps { line, msg: msg.into() }
}

fn number(line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| err(line, format!("bad number '{tok}'")))?;
    if v.is_nan() {
        return Err(err(line, "NaN value"));
    }
    Ok(v)
}

/// Parses MPS text; the result is not validated.
pub fn parse_mps(text: &str) -> Result<MilpInstance> {
    let mut section = Section::None;
    let mut name = String::new();
    let mut maximize = false;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<RowDef> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<ColDef> = Vec::new();
    let mut in_integer_block = false;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if header {
            section = match tokens[0] {
                "NAME" => {
                    name = tokens[1..].join(" ");
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = tokens.get(1) {
                        maximize = parse_sense(line, s)?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(err(line, format!("unsupported section '{other}'"))),
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::Name | Section::End => return Err(err(line, "data outside a section")),
            Section::ObjSense => maximize = parse_sense(line, tokens[0])?,
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(err(line, "ROWS entry needs a type and a name"));
                }
                let kind = match tokens[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(tokens[1].to_string());
                        }
                        continue;
                    }
                    "L" => RowKind::L,
                    "G" => RowKind::G,
                    "E" => RowKind::E,
                    t => return Err(err(line, format!("unknown row type '{t}'"))),
                };
                if row_index.insert(tokens[1].to_string(), rows.len()).is_some() {
                    return Err(err(line, format!("duplicate row '{}'", tokens[1])));
                }
                rows.push(RowDef { kind, rhs: 0.0, range: None });
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1].trim_matches('\'') == "MARKER" {
                    match tokens[2].trim_matches('\'') {
                        "INTORG" => in_integer_block = true,
                        "INTEND" => in_integer_block = false,
                        m => return Err(err(line, format!("unknown marker '{m}'"))),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(line, "COLUMNS entry needs a column and one or two (row, value) pairs"));
                }
                let j = match col_index.get(tokens[0]) {
                    Some(&j) => j,
                    None => {
                        col_index.insert(tokens[0].to_string(), cols.len());
                        let (lo, hi) = (0.0, f64::INFINITY);
                        cols.push(ColDef { cost: 0.0, entries: Vec::new(), integer: in_integer_block, lo, hi, lo_set: false });
                        cols.len() - 1
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = number(line, pair[1])?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        cols[j].cost = v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        cols[j].entries.push((i, v));
                    } else {
                        return Err(err(line, format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                // The set name is optional when an odd number of fields follows.
                let body = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                if body.is_empty() || body.len() % 2 != 0 {
                    return Err(err(line, "expected (row, value) pairs"));
                }
                for pair in body.chunks(2) {
                    let v = number(line, pair[1])?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        if section == Section::Rhs && v != 0.0 {
                            return Err(err(line, "objective constants are not supported"));
                        }
                        continue;
                    }
                    let &i = row_index.get(pair[0]).ok_or_else(|| err(line, format!("unknown row '{}'", pair[0])))?;
                    if section == Section::Rhs {
                        rows[i].rhs = v;
                    } else {
                        rows[i].range = Some(v);
                    }
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err(line, "BOUNDS entry too short"));
                }
                let kind = tokens[0];
                let needs_value = !matches!(kind, "FR" | "MI" | "PL" | "BV");
                let (col, value) = match (needs_value, tokens.len()) {
                    (true, 4) => (tokens[2], Some(number(line, tokens[3])?)),
                    (true, 3) => (tokens[1], Some(number(line, tokens[2])?)),
                    (false, 3) => (tokens[2], None),
                    (false, 2) => (tokens[1], None),
                    (false, 4) => (tokens[2], None),
                    _ => return Err(err(line, "malformed BOUNDS entry")),
                };
                let &j = col_index.get(col).ok_or_else(|| err(line, format!("unknown column '{col}'")))?;
                let c = &mut cols[j];
                match (kind, value) {
                    ("UP", Some(v)) | ("UI", Some(v)) => {
                        if v < 0.0 && c.lo == 0.0 && !c.lo_set {
                            c.lo = f64::NEG_INFINITY;
                        }
                        c.hi = v;
                        c.integer |= kind == "UI";
                    }
                    ("LO", Some(v)) | ("LI", Some(v)) => {
                        c.lo = v;
                        c.lo_set = true;
                        c.integer |= kind == "LI";
                    }
                    ("FX", Some(v)) => {
                        c.lo = v;
                        c.hi = v;
                        c.lo_set = true;
                    }
                    ("FR", None) => {
                        c.lo = f64::NEG_INFINITY;
                        c.hi = f64::INFINITY;
                        c.lo_set = true;
                    }
                    ("MI", None) => {
                        c.lo = f64::NEG_INFINITY;
                        c.lo_set = true;
                    }
                    ("PL", None) => c.hi = f64::INFINITY,
                    ("BV", None) => {
                        c.lo = 0.0;
                        c.hi = 1.0;
                        c.lo_set = true;
                        c.integer = true;
                    }
                    (k, _) => return Err(err(line, format!("unsupported bound type '{k}'"))),
                }
            }
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing ENDATA"));
    }
    if obj_row.is_none() {
        return Err(err(0, "no objective (N) row"));
    }
    assemble(name, maximize, rows, cols)
}

fn parse_sense(line: usize, tok: &str) -> Result<bool> {
    match tok {
        "MIN" | "MINIMIZE" => Ok(false),
        "MAX" | "MAXIMIZE" => Ok(true),
        t => Err(err(line, format!("unknown objective sense '{t}'"))),
    }
}

fn assemble(name: String, maximize: bool, rows: Vec<RowDef>, cols: Vec<ColDef>) -> Result<MilpInstance> {
    let n = cols.len();
    let mut dense = vec![vec![0.0; n]; rows.len()];
    for (j, c) in cols.iter().enumerate() {
        for &(i, v) in &c.entries {
            dense[i][j] += v;
        }
    }
    let mut a = DenseMatrix::zeros(0, n);
    let mut b = Vec::new();
    let mut row_sense = Vec::new();
    let mut push = |coeffs: Vec<f64>, rhs: f64, sense: RowSense| {
        a.push_row(&coeffs);
        b.push(rhs);
        row_sense.push(sense);
    };
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
    for (row, coeffs) in rows.iter().zip(dense) {
        // Interval [lo, hi] for the row activity.
        let (lo, hi) = match (row.kind, row.range) {
            (RowKind::L, None) => (f64::NEG_INFINITY, row.rhs),
            (RowKind::G, None) => (row.rhs, f64::INFINITY),
            (RowKind::E, None) => (row.rhs, row.rhs),
            (RowKind::L, Some(r)) => (row.rhs - r.abs(), row.rhs),
            (RowKind::G, Some(r)) => (row.rhs, row.rhs + r.abs()),
            (RowKind::E, Some(r)) if r >= 0.0 => (row.rhs, row.rhs + r),
            (RowKind::E, Some(r)) => (row.rhs + r, row.rhs),
        };
        if lo == hi {
            push(coeffs, hi, RowSense::Eq);
            continue;
        }
        if hi.is_finite() {
            push(coeffs.clone(), hi, RowSense::Le);
        }
        if lo.is_finite() {
            push(neg(&coeffs), -lo, RowSense::Le);
        }
    }
    let sign = if maximize { -1.0 } else { 1.0 };
    let c = cols.iter().map(|c| sign * c.cost).collect();
    let integers = cols.iter().enumerate().filter(|(_, c)| c.integer).map(|(j, _)| j).collect();
    let bounds = cols.iter().map(|c| Bound::new(c.lo, c.hi)).collect();
    Ok(MilpInstance { name, c, a, b, row_sense, integers, bounds })
}

/// Writes `inst` as free-format MPS with generated row and column names.
pub fn serialize_mps(inst: &MilpInstance) -> String {
    let mut out = String::new();
    let name = if inst.name.is_empty() { "UNNAMED" } else { inst.name.as_str() };
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n N OBJ\n");
    for (i, s) in inst.row_sense.iter().enumerate() {
        let t = if *s == RowSense::Eq { 'E' } else { 'L' };
        let _ = writeln!(out, " {t} R{i}");
    }
    out.push_str("COLUMNS\n");
    let mut marker = 0;
    let mut in_block = false;
    for j in 0..inst.n() {
        let int = inst.is_integer(j);
        if int != in_block {
            let tag = if int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " M{marker} 'MARKER' '{tag}'");
            marker += 1;
            in_block = int;
        }
        let _ = writeln!(out, " C{j} OBJ {}", inst.c[j]);
        for i in 0..inst.m() {
            let v = inst.a.get(i, j);
            if v != 0.0 {
                let _ = writeln!(out, " C{j} R{i} {v}");
            }
        }
    }
    if in_block {
        let _ = writeln!(out, " M{marker} 'MARKER' 'INTEND'");
    }
    out.push_str("RHS\n");
    for (i, &v) in inst.b.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, " RHS R{i} {v}");
        }
    }
    out.push_str("BOUNDS\n");
    for (j, bd) in inst.bounds.iter().enumerate() {
        let (lo, hi) = (bd.lo, bd.hi);
        if lo == hi {
            let _ = writeln!(out, " FX BND C{j} {lo}");
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND C{j}");
            }
            (false, true) => {
                let _ = writeln!(out, " MI BND C{j}");
                let _ = writeln!(out, " UP BND C{j} {hi}");
            }
            (true, _) => {
                // An explicit lower bound also disarms the negative-UP convention.
                if lo != 0.0 || (hi.is_finite() && hi < 0.0) {
                    let _ = writeln!(out, " LO BND C{j} {lo}");
                }
                if hi.is_finite() {
                    let _ = writeln!(out, " UP BND C{j} {hi}");
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
