use std::io::Write;

/// CSV output: `# key = value` header lines, a column line, then rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub header: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.header.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in &self.header {
            for (i, line) in v.lines().enumerate() {
                if i == 0 {
                    writeln!(w, "# {k} = {line}")?;
                } else {
                    writeln!(w, "#   {line}")?;
                }
            }
            if v.is_empty() {
                writeln!(w, "# {k} =")?;
            }
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Value of a header key.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Shortest round-trip formatting, so output is stable across runs.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.meta("seed", 3).meta("config", "x = 1\ny = 2");
        t.push(vec![num(0.1), num(2.0)]);
        assert_eq!(
            t.to_csv_string(),
            "# seed = 3\n# config = x = 1\n#   y = 2\na,b\n0.1,2\n"
        );
        assert_eq!(t.meta_value("seed"), Some("3"));
    }
}
