//! CSV tables. Every file starts with one comment line naming the table kind
//! and its schema version, then a header row. Numbers use the shortest
//! representation that reads back exactly, so reruns are byte-identical.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

fn write_cell(out: &mut String, c: &Cell) {
    match c {
        Cell::Real(x) if x.is_nan() => out.push_str("nan"),
        Cell::Real(x) => {
            let _ = write!(out, "{x:e}");
        }
        Cell::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                out.push('"');
                out.push_str(&s.replace('"', "\"\""));
                out.push('"');
            } else {
                out.push_str(s);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub kind: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(kind: &'static str, columns: &[&'static str]) -> Self {
        Table {
            kind,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width of table {}",
            self.kind
        );
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = format!("# upconv {} schema v{}\n", self.kind, SCHEMA_VERSION);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write_cell(&mut s, c);
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut t = Table::new("demo", &["a", "b", "c"]);
        t.push(vec![0.1.into(), 3usize.into(), "x,y".into()]);
        t.push(vec![f64::NAN.into(), 0usize.into(), "ok".into()]);
        assert_eq!(
            t.render(),
            "# upconv demo schema v1\na,b,c\n1e-1,3,\"x,y\"\nnan,0,ok\n"
        );
    }

    #[test]
    fn numbers_read_back() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let mut s = String::new();
            write_cell(&mut s, &Cell::Real(x));
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
