//! Fixed-format MPS output and a matching reader.
//!
//! Names are mangled to eight characters (`C0000001`, `R0000001`, ...) so that
//! every column lands in its fixed field; the mapping back to model names is
//! returned as a [`NameMap`] and can be written next to the model file.
//! Numbers are printed in their shortest round-trip form. Values that need
//! more than twelve characters spill past their field; the reader, like most
//! external ones, splits on whitespace so this is harmless.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::MilpError;
use crate::problem::{MilpProblem, Row, Sense, VarType};

const OBJ_ROW: &str = "OBJ";

/// Mangled name to original name, for columns and rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NameMap {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<(String, String)>,
}

impl NameMap {
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,mangled,name")?;
        for (m, n) in &self.columns {
            writeln!(out, "column,{m},{n}")?;
        }
        for (m, n) in &self.rows {
            writeln!(out, "row,{m},{n}")?;
        }
        Ok(())
    }
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        return s;
    }
    let e = format!("{v:e}");
    if e.len() < s.len() {
        e
    } else {
        s
    }
}

fn field_line(out: &mut impl Write, kind: &str, a: &str, b: &str, v: f64) -> std::io::Result<()> {
    writeln!(out, " {:<2} {:<8}  {:<8}  {:>12}", kind, a, b, num(v))
}

/// Writes `problem` with `objective` as the cost row.
pub fn write_mps<W: Write>(problem: &MilpProblem, objective: &str, mut out: W) -> Result<NameMap, MilpError> {
    problem.validate()?;
    let obj = problem.objective(objective)?;
    let n = problem.columns.len();
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in problem.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            by_col[j].push((i, a));
        }
    }
    let mut cost = vec![0.0; n];
    for &(j, c) in &obj.coeffs {
        cost[j] += c;
    }

    writeln!(out, "NAME          {}", objective.chars().filter(|c| !c.is_whitespace()).take(8).collect::<String>())?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N  {OBJ_ROW}")?;
    for (i, r) in problem.rows.iter().enumerate() {
        let k = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        writeln!(out, " {k}  {}", row_name(i))?;
    }
    writeln!(out, "COLUMNS")?;
    let mut in_int = false;
    let mut marker = 0;
    for (j, c) in problem.columns.iter().enumerate() {
        let integral = c.var_type.is_integral();
        if integral != in_int {
            let tag = if integral { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    {:<8}  'MARKER'                 {tag}", format!("MARKER{marker:02}"))?;
            marker += 1;
            in_int = integral;
        }
        let name = col_name(j);
        if cost[j] != 0.0 || by_col[j].is_empty() {
            field_line(&mut out, "", &name, OBJ_ROW, cost[j])?;
        }
        for &(i, a) in &by_col[j] {
            field_line(&mut out, "", &name, &row_name(i), a)?;
        }
    }
    if in_int {
        writeln!(out, "    {:<8}  'MARKER'                 'INTEND'", format!("MARKER{marker:02}"))?;
    }
    writeln!(out, "RHS")?;
    if obj.constant != 0.0 {
        field_line(&mut out, "", "RHS", OBJ_ROW, -obj.constant)?;
    }
    for (i, r) in problem.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            field_line(&mut out, "", "RHS", &row_name(i), r.rhs)?;
        }
    }
    if problem.rows.iter().any(|r| r.range.is_some()) {
        writeln!(out, "RANGES")?;
        for (i, r) in problem.rows.iter().enumerate() {
            if let Some(v) = r.range {
                field_line(&mut out, "", "RNG", &row_name(i), v)?;
            }
        }
    }
    writeln!(out, "BOUNDS")?;
    for (j, c) in problem.columns.iter().enumerate() {
        let name = col_name(j);
        let (l, u) = (c.lower, c.upper);
        if c.var_type == VarType::Binary && l == 0.0 && u == 1.0 {
            field_line(&mut out, "BV", "BND", &name, 1.0)?;
            continue;
        }
        if l == u {
            field_line(&mut out, "FX", "BND", &name, l)?;
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => writeln!(out, " FR BND       {name}")?,
            (false, true) => {
                writeln!(out, " MI BND       {name}")?;
                field_line(&mut out, "UP", "BND", &name, u)?;
            }
            (true, _) => {
                if l != 0.0 {
                    field_line(&mut out, "LO", "BND", &name, l)?;
                }
                if u.is_finite() {
                    field_line(&mut out, "UP", "BND", &name, u)?;
                } else if c.var_type.is_integral() {
                    writeln!(out, " PL BND       {name}")?;
                }
            }
        }
    }
    writeln!(out, "ENDATA")?;

    Ok(NameMap {
        columns: problem.columns.iter().enumerate().map(|(j, c)| (col_name(j), c.name.clone())).collect(),
        rows: problem.rows.iter().enumerate().map(|(i, r)| (row_name(i), r.name.clone())).collect(),
    })
}

/// Writes `path` and a `<path>.names.csv` mapping file; returns the mapping path.
pub fn write_mps_file(problem: &MilpProblem, objective: &str, path: &Path) -> Result<PathBuf, MilpError> {
    let mut w = BufWriter::new(File::create(path)?);
    let map = write_mps(problem, objective, &mut w)?;
    w.flush()?;
    let mut map_path = path.as_os_str().to_owned();
    map_path.push(".names.csv");
    let map_path = PathBuf::from(map_path);
    let mut mw = BufWriter::new(File::create(&map_path)?);
    map.write_to(&mut mw)?;
    mw.flush()?;
    Ok(map_path)
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Parses an MPS model. The first `N` row becomes an objective carrying that
/// row's name; further `N` rows are ignored.
pub fn read_mps<R: BufRead>(input: R) -> Result<MilpProblem, MilpError> {
    let mut p = MilpProblem::new();
    let mut section = Section::None;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut obj_name: Option<String> = None;
    let mut obj_coeffs: Vec<(usize, f64)> = Vec::new();
    let mut obj_constant = 0.0;
    let mut free_rows: Vec<String> = Vec::new();
    let mut integer = false;
    let mut row_coeffs: Vec<Vec<(usize, f64)>> = Vec::new();

    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let err = |msg: &str| MilpError::MpsParse { line: lineno, msg: msg.to_string() };
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with(' ') && !line.starts_with('\t') {
            let head = line.split_whitespace().next().unwrap_or("");
            section = match head {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(&format!("unknown section {other}"))),
            };
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number {s}")));
        match section {
            Section::None => return Err(err("data before ROWS")),
            Section::Rows => {
                if tok.len() != 2 {
                    return Err(err("expected type and name"));
                }
                let sense = match tok[0] {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(tok[1].to_string());
                        } else {
                            free_rows.push(tok[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    t => return Err(err(&format!("unknown row type {t}"))),
                };
                rows.insert(tok[1].to_string(), p.rows.len());
                p.rows.push(Row { name: tok[1].to_string(), coeffs: Vec::new(), sense, rhs: 0.0, range: None });
                row_coeffs.push(Vec::new());
            }
            Section::Columns => {
                if tok.len() >= 3 && tok[1] == "'MARKER'" {
                    match tok[2] {
                        "'INTORG'" => integer = true,
                        "'INTEND'" => integer = false,
                        t => return Err(err(&format!("unknown marker {t}"))),
                    }
                    continue;
                }
                if tok.len() != 3 && tok.len() != 5 {
                    return Err(err("expected column, row, value pairs"));
                }
                let j = match cols.get(tok[0]) {
                    Some(&j) => j,
                    None => {
                        // Integer columns default to [0, +inf) here; a BV or UP
                        // bound narrows them.
                        let vt = if integer { VarType::Integer } else { VarType::Continuous };
                        let j = p.add_column(tok[0], 0.0, f64::INFINITY, vt);
                        cols.insert(tok[0].to_string(), j);
                        j
                    }
                };
                for pair in tok[1..].chunks(2) {
                    let v = parse(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        obj_coeffs.push((j, v));
                    } else if let Some(&i) = rows.get(pair[0]) {
                        row_coeffs[i].push((j, v));
                    } else if !free_rows.iter().any(|r| r == pair[0]) {
                        return Err(err(&format!("unknown row {}", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = match tok.len() {
                    2 => &tok[..],
                    3 | 5 => &tok[1..],
                    _ => return Err(err("expected row, value pairs")),
                };
                for pair in pairs.chunks(2) {
                    let v = parse(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        if section == Section::Rhs {
                            obj_constant = -v;
                        }
                    } else if let Some(&i) = rows.get(pair[0]) {
                        if section == Section::Rhs {
                            p.rows[i].rhs = v;
                        } else {
                            p.rows[i].range = Some(v);
                        }
                    } else if !free_rows.iter().any(|r| r == pair[0]) {
                        return Err(err(&format!("unknown row {}", pair[0])));
                    }
                }
            }
            Section::Bounds => {
                if tok.len() < 3 {
                    return Err(err("expected bound type, set and column"));
                }
                let j = *cols.get(tok[2]).ok_or_else(|| err(&format!("unknown column {}", tok[2])))?;
                let value = if tok.len() >= 4 { Some(parse(tok[3])?) } else { None };
                let need = || value.ok_or_else(|| err("missing bound value"));
                let c = &mut p.columns[j];
                match tok[0] {
                    "UP" => {
                        let v = need()?;
                        c.upper = v;
                        if v < 0.0 && c.lower == 0.0 {
                            c.lower = f64::NEG_INFINITY;
                        }
                    }
                    "LO" => c.lower = need()?,
                    "FX" => {
                        let v = need()?;
                        c.lower = v;
                        c.upper = v;
                    }
                    "FR" => {
                        c.lower = f64::NEG_INFINITY;
                        c.upper = f64::INFINITY;
                    }
                    "MI" => c.lower = f64::NEG_INFINITY,
                    "PL" => c.upper = f64::INFINITY,
                    "BV" => {
                        c.var_type = VarType::Binary;
                        c.lower = 0.0;
                        c.upper = 1.0;
                    }
                    "LI" => {
                        c.var_type = VarType::Integer;
                        c.lower = need()?;
                    }
                    "UI" => {
                        c.var_type = VarType::Integer;
                        c.upper = need()?;
                    }
                    t => return Err(err(&format!("unknown bound type {t}"))),
                }
            }
        }
    }
    for (r, c) in p.rows.iter_mut().zip(row_coeffs) {
        r.coeffs = c;
    }
    let name = obj_name.unwrap_or_else(|| OBJ_ROW.to_string());
    p.add_objective(name, obj_coeffs, obj_constant);
    Ok(p)
}

pub fn read_mps_file(path: &Path) -> Result<MilpProblem, MilpError> {
    read_mps(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_is_wrapped_in_markers_with_bv_bound() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, 2.0);
        let b = p.add_binary("b");
        p.add_row("r", vec![(x, 1.0), (b, -2.0)], Sense::Le, 0.0);
        p.add_objective("cost", vec![(x, -1.0)], 0.0);
        let mut buf = Vec::new();
        write_mps(&p, "cost", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let org = text.find("'INTORG'").unwrap();
        let end = text.find("'INTEND'").unwrap();
        let bcol = text.find(" C0000002  R0000001").unwrap();
        assert!(org < bcol && bcol < end);
        assert!(text.contains(" BV BND       C0000002"));
        assert!(text.contains(" UP BND       C0000001"));
    }

    #[test]
    fn single_variable_bounds_survive() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", -3.5, 7.25);
        p.add_objective("o", vec![(x, 1.0)], 2.0);
        let mut buf = Vec::new();
        write_mps(&p, "o", &mut buf).unwrap();
        let q = read_mps(&buf[..]).unwrap();
        assert_eq!((q.columns[0].lower, q.columns[0].upper), (-3.5, 7.25));
        assert_eq!(q.objectives[0].constant, 2.0);
        assert_eq!(q.objectives[0].coeffs, vec![(0, 1.0)]);
    }

    #[test]
    fn fixed_fields_line_up() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, f64::INFINITY);
        p.add_row("r", vec![(x, 1.5)], Sense::Ge, 1.0);
        p.add_objective("o", vec![(x, 1.0)], 0.0);
        let mut buf = Vec::new();
        write_mps(&p, "o", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().find(|l| l.contains("R0000001") && l.contains("C0000001")).unwrap();
        assert_eq!(&line[4..12], "C0000001");
        assert_eq!(&line[14..22], "R0000001");
        assert_eq!(line[24..36].trim(), "1.5");
    }
}
