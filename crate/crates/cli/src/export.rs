//! Plain-text columnar field dumps: a header row of column names, then one
//! tab-separated row per grid point.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use covdyn::grid::BodyGrid;

/// Tabular data under construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Numbers print in shortest round-trip form, so reruns are bit-identical.
    pub fn write_to(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join("\t"))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join("\t"))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()
    }
}

/// Column names `prefix1..prefixN`.
pub fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Header `t, x1..xd, <field columns>`.
pub fn field_header(grid: &BodyGrid, fields: &[Vec<String>]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(numbered("x", grid.dim()));
    for f in fields {
        h.extend(f.iter().cloned());
    }
    h
}

/// Appends one row per grid point at time `t`; each field is laid out
/// point-major with the given number of components.
pub fn push_slice(table: &mut Table, grid: &BodyGrid, t: f64, fields: &[(&[f64], usize)]) {
    for p in 0..grid.len() {
        let mut row = vec![t];
        row.extend(grid.point(p));
        for (values, k) in fields {
            row.extend_from_slice(&values[p * k..(p + 1) * k]);
        }
        table.push(row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_header_and_rows() {
        let grid = BodyGrid::new(1, 5).unwrap();
        let mut t = Table::new(field_header(&grid, &[numbered("y", 2)]));
        push_slice(
            &mut t,
            &grid,
            0.5,
            &[(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], 2)],
        );
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t\tx1\ty1\ty2");
        assert_eq!(lines[2], "5e-1\t2.5e-1\t3e0\t4e0");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn values_round_trip() {
        let mut t = Table::new(["v"]);
        t.push(vec![0.1 + 0.2]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.1 + 0.2);
    }
}
