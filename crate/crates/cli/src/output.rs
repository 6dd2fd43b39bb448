//! CSV rendering with a `#` metadata block.

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(x) => format!("{x:.16e}"),
            Field::Int(n) => n.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
            Field::Empty => String::new(),
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<u64> for Field {
    fn from(n: u64) -> Self {
        Field::Int(n)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<bool> for Field {
    fn from(b: bool) -> Self {
        Field::Bool(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }
}

/// Tool version and command, the resolved config as `# key = value` lines,
/// then the header row and data.
pub fn render_csv(command: &str, cfg: &RunConfig, table: &Table) -> String {
    let mut out = format!("# covsense {} {command}\n", env!("CARGO_PKG_VERSION"));
    for line in cfg.to_text().lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Field::render).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Recovers the config from a rendered file's metadata block.
pub fn config_from_csv(text: &str) -> Result<RunConfig, crate::config::ConfigError> {
    let body: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| l.contains('='))
        .map(|l| format!("{l}\n"))
        .collect();
    RunConfig::parse_text(&body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(Field::Num(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Field::Num(1.0 / 3.0).render().parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(Field::Empty.render(), "");
    }

    #[test]
    fn metadata_block_recovers_config() {
        let mut cfg = RunConfig::default();
        cfg.set("kappa", "0.3").unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.5.into(), "x".into()]);
        let text = render_csv("tradeoff", &cfg, &t);
        assert!(text.starts_with("# covsense "));
        assert!(text.ends_with("a,b\n1.5000000000000000e0,x\n"));
        assert_eq!(config_from_csv(&text).unwrap(), cfg);
    }
}
