//! Fixed-format-compatible MPS writer and a reader for our own files.
//!
//! Column and row names come from [`MilpModel::column_name`] and
//! [`MilpModel::row_name`], so they fit the 8-character fixed-format fields.
//! Numbers are printed in shortest round-trip form; values that need more than
//! 12 characters spill past the fixed field width, which free-format readers
//! (HiGHS, CBC, GLPK `--freemps`) accept.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::model::{Family, MilpModel, Sense, VarKey, VarKind};
use crate::{Error, Result};

const MAX_NOTE: &str = "* objective negated: model maximizes, MPS minimizes";

pub(crate) fn fmt_num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let exp = format!("{v:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

fn field_line(out: &mut String, code: &str, name: &str, entries: &[(&str, String)]) {
    // Fixed-format columns: 2-3 code, 5-12 name, 15-22 / 40-47 row, 25-36 / 50-61 value.
    let mut line = format!(" {code:<2} {name:<8}");
    for (k, (row, value)) in entries.iter().enumerate() {
        if k == 1 {
            while line.len() < 36 {
                line.push(' ');
            }
            line.push_str("   ");
        } else {
            line.push_str("  ");
        }
        let _ = write!(line, "{row:<8}  {value:>12}");
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

/// Renders the model as MPS text. Identical models give identical text.
pub fn to_mps_string(model: &MilpModel) -> String {
    let sign = if model.maximize { -1.0 } else { 1.0 };
    let mut out = String::new();
    out.push_str("* ecmarket canonical MILP\n");
    let _ = writeln!(out, "* {} columns, {} rows, {} binaries", model.variables.len(), model.rows.len(), model.num_binaries());
    if model.maximize {
        out.push_str(MAX_NOTE);
        out.push('\n');
    }
    out.push_str("NAME          ECMARKET\nROWS\n N  OBJ\n");
    for (i, row) in model.rows.iter().enumerate() {
        let code = match row.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {code}  {}", model.row_name(crate::model::RowId(i)));
    }

    let n = model.variables.len();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in model.rows.iter().enumerate() {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.terms.len());
        for &(v, a) in &row.terms {
            match merged.iter_mut().find(|(j, _)| *j == v.0) {
                Some(e) => e.1 += a,
                None => merged.push((v.0, a)),
            }
        }
        for (j, a) in merged {
            if a != 0.0 {
                columns[j].push((i, a));
            }
        }
    }
    let objective = model.dense_objective();

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for j in 0..n {
        let binary = model.variables[j].kind == VarKind::Binary;
        if binary != in_int {
            let tag = if binary { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER                 'MARKER'                 {tag}");
            in_int = binary;
        }
        let name = model.column_name(crate::model::VarId(j));
        let mut entries: Vec<(String, String)> = Vec::new();
        if objective[j] != 0.0 {
            entries.push(("OBJ".into(), fmt_num(sign * objective[j])));
        }
        for &(i, a) in &columns[j] {
            entries.push((model.row_name(crate::model::RowId(i)), fmt_num(a)));
        }
        if entries.is_empty() {
            // Keep the column declared even when it appears nowhere.
            entries.push(("OBJ".into(), "0".into()));
        }
        for pair in entries.chunks(2) {
            let refs: Vec<(&str, String)> = pair.iter().map(|(r, v)| (r.as_str(), v.clone())).collect();
            field_line(&mut out, "", &name, &refs);
        }
    }
    if in_int {
        out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
    }

    out.push_str("RHS\n");
    let rhs: Vec<(String, String)> = model
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.rhs != 0.0)
        .map(|(i, r)| (model.row_name(crate::model::RowId(i)), fmt_num(r.rhs)))
        .collect();
    for pair in rhs.chunks(2) {
        let refs: Vec<(&str, String)> = pair.iter().map(|(r, v)| (r.as_str(), v.clone())).collect();
        field_line(&mut out, "", "RHS", &refs);
    }

    out.push_str("BOUNDS\n");
    for (j, var) in model.variables.iter().enumerate() {
        let name = model.column_name(crate::model::VarId(j));
        let (l, u) = (var.lower, var.upper);
        let mut bound = |code: &str, value: Option<f64>| {
            let mut line = format!(" {code:<2} BND       {name:<8}");
            if let Some(v) = value {
                let _ = write!(line, "  {:>12}", fmt_num(v));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        };
        if l == u {
            bound("FX", Some(l));
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => bound("FR", None),
            (false, true) => {
                bound("MI", None);
                bound("UP", Some(u));
            }
            (true, _) => {
                if l != 0.0 {
                    bound("LO", Some(l));
                }
                if u.is_finite() {
                    bound("UP", Some(u));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Writes the model to `path` in MPS format.
pub fn write_mps(model: &MilpModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_mps_string(model)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

/// Parses MPS text produced by [`to_mps_string`] (or any free-format MPS
/// without RANGES). Columns get [`VarKey::aux`] keys in file order and all
/// rows land in [`Family::User`].
pub fn parse_mps(text: &str) -> Result<MilpModel> {
    let err = |line: usize, message: String| Error::Parse { path: "<mps>".into(), line, message };
    let maximize = text.lines().any(|l| l.trim_end() == MAX_NOTE);
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut section = Section::None;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut senses: Vec<Sense> = Vec::new();
    let mut row_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<(f64, f64, VarKind, f64)> = Vec::new();
    let mut integer = false;

    let number = |line: usize, s: &str| s.parse::<f64>().map_err(|_| err(line, format!("bad number {s:?}")));

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match tokens[0] {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(line_no, format!("unsupported section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err(line_no, "data line outside a section".into())),
            Section::Rows => {
                let [code, name] = tokens[..] else {
                    return Err(err(line_no, "expected sense and row name".into()));
                };
                let sense = match code {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(line_no, format!("unknown row type {other}"))),
                };
                row_index.insert(name.to_string(), senses.len());
                senses.push(sense);
                row_terms.push(Vec::new());
                rhs.push(0.0);
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    integer = match tokens[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        other => return Err(err(line_no, format!("unknown marker {other}"))),
                    };
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(line_no, "expected column, row, value pairs".into()));
                }
                let j = *col_index.entry(tokens[0].to_string()).or_insert_with(|| {
                    let kind = if integer { VarKind::Binary } else { VarKind::Continuous };
                    let upper = if integer { 1.0 } else { f64::INFINITY };
                    cols.push((0.0, upper, kind, 0.0));
                    cols.len() - 1
                });
                for pair in tokens[1..].chunks(2) {
                    let value = number(line_no, pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        cols[j].3 += sign * value;
                    } else {
                        let &i = row_index.get(pair[0]).ok_or_else(|| err(line_no, format!("unknown row {}", pair[0])))?;
                        row_terms[i].push((j, value));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(line_no, "expected set name and row, value pairs".into()));
                }
                for pair in tokens[1..].chunks(2) {
                    let value = number(line_no, pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        continue;
                    }
                    let &i = row_index.get(pair[0]).ok_or_else(|| err(line_no, format!("unknown row {}", pair[0])))?;
                    rhs[i] = value;
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err(line_no, "expected bound type, set name and column".into()));
                }
                let &j = col_index.get(tokens[2]).ok_or_else(|| err(line_no, format!("unknown column {}", tokens[2])))?;
                let value = || -> Result<f64> {
                    let s = tokens.get(3).ok_or_else(|| err(line_no, "missing bound value".into()))?;
                    number(line_no, s)
                };
                let c = &mut cols[j];
                match tokens[0] {
                    "UP" => c.1 = value()?,
                    "LO" => c.0 = value()?,
                    "FX" => {
                        let v = value()?;
                        c.0 = v;
                        c.1 = v;
                    }
                    "FR" => {
                        c.0 = f64::NEG_INFINITY;
                        c.1 = f64::INFINITY;
                    }
                    "MI" => c.0 = f64::NEG_INFINITY,
                    "PL" => c.1 = f64::INFINITY,
                    "BV" => {
                        c.0 = 0.0;
                        c.1 = 1.0;
                        c.2 = VarKind::Binary;
                    }
                    other => return Err(err(line_no, format!("unsupported bound type {other}"))),
                }
            }
        }
    }

    let mut model = MilpModel::new(maximize);
    let ids: Vec<_> = cols
        .iter()
        .enumerate()
        .map(|(j, &(l, u, kind, _))| model.add_var(VarKey::aux(j), l, u, kind))
        .collect();
    for (j, &(.., c)) in cols.iter().enumerate() {
        if c != 0.0 {
            model.add_objective(ids[j], c);
        }
    }
    for (i, terms) in row_terms.into_iter().enumerate() {
        let terms = terms.into_iter().map(|(j, a)| (ids[j], a)).collect();
        model.add_row(Family::User, terms, senses[i], rhs[i]);
    }
    Ok(model)
}

pub fn read_mps(path: &Path) -> Result<MilpModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mps(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse { path: path.to_path_buf(), line, message },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use crate::solver::solve_reference;

    fn tiny() -> MilpModel {
        let mut m = MilpModel::new(true);
        let x = m.add_var(VarKey::aux(0), 0.0, f64::INFINITY, VarKind::Continuous);
        m.add_row(Family::User, vec![(x, 1.0)], Sense::Le, 3.0);
        m.add_objective(x, 1.0);
        m
    }

    #[test]
    fn skeleton_and_sign_note() {
        let text = to_mps_string(&tiny());
        for section in ["ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.lines().any(|l| l == section), "missing {section}\n{text}");
        }
        assert!(text.contains(MAX_NOTE));
        assert!(text.contains("    C0000001  OBJ                 -1   R0000001             1"), "{text}");
    }

    #[test]
    fn binaries_use_markers() {
        let mut m = MilpModel::new(false);
        m.add_var(VarKey::aux(0), 0.0, 1.0, VarKind::Binary);
        let text = to_mps_string(&m);
        assert!(text.contains("'INTORG'") && text.contains("'INTEND'"));
        assert!(text.contains(" UP BND       C0000001             1"), "{text}");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-11, 1e20, 123456789.123, -0.0] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(3.0), "3");
    }

    #[test]
    fn round_trip_preserves_optimum() {
        let mut m = MilpModel::new(true);
        let b = m.add_var(VarKey::aux(0), 0.0, 1.0, VarKind::Binary);
        let x = m.add_var(VarKey::aux(1), -1.0, 2.5, VarKind::Continuous);
        let y = m.add_var(VarKey::aux(2), f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        let z = m.add_var(VarKey::aux(3), f64::NEG_INFINITY, 4.0, VarKind::Continuous);
        m.add_row(Family::User, vec![(x, 1.0), (b, 1.0)], Sense::Le, 3.0);
        m.add_row(Family::User, vec![(y, 1.0), (x, -1.0)], Sense::Eq, 0.5);
        m.add_row(Family::User, vec![(z, 1.0), (y, 1.0)], Sense::Ge, -10.0);
        m.add_row(Family::User, vec![(z, 1.0)], Sense::Le, 1.0 / 3.0);
        m.add_objective(b, 2.0);
        m.add_objective(x, 1.0);
        m.add_objective(z, 0.1);
        let text = to_mps_string(&m);
        let back = parse_mps(&text).unwrap();
        assert!(back.maximize);
        assert_eq!(back.variables.len(), 4);
        assert_eq!(back.variables[2].lower, f64::NEG_INFINITY);
        assert_eq!(back.variables[3].upper, 4.0);
        assert_eq!(back.variables[0].kind, VarKind::Binary);
        assert_eq!(to_mps_string(&back), text);
        let a = solve_reference(&m).unwrap().objective;
        let b2 = solve_reference(&back).unwrap().objective;
        assert!((a - b2).abs() < 1e-12);
        assert_eq!(back.rows[1].terms, vec![(VarId(1), -1.0), (VarId(2), 1.0)]);
    }
}
