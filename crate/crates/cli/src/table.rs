/// Rows of preformatted cells; every row gets `seed` and `config_hash`
/// appended on output.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(cols: &[&str]) -> Self {
        Table {
            header: cols.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self, seed: u64, hash: &str) -> String {
        let mut out = self.header.join(",");
        out.push_str(",seed,config_hash\n");
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push_str(&format!(",{seed},{hash}\n"));
        }
        out
    }
}
