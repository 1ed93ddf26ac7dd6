//! Command output: reports plus tables, written as JSON or CSV.

use anyhow::Result;
use branchform::report::Report;
use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

/// Shortest round-trip decimal.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub refine: usize,
    pub quad_order: usize,
    pub tolerance: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Output {
    pub scenario: String,
    pub command: String,
    pub pass: bool,
    pub settings: Settings,
    pub reports: Vec<Report>,
    pub tables: Vec<Table>,
}

impl Output {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One record per report value, prefactor and witness, then the tables.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(["section", "name", "value"])?;
        w.write_record(["scenario", "name", &self.scenario])?;
        w.write_record(["scenario", "command", &self.command])?;
        w.write_record(["scenario", "pass", &self.pass.to_string()])?;
        w.write_record(["settings", "refine", &self.settings.refine.to_string()])?;
        w.write_record(["settings", "quad_order", &self.settings.quad_order.to_string()])?;
        w.write_record(["settings", "tolerance", &num(self.settings.tolerance)])?;
        w.write_record(["settings", "seed", &self.settings.seed.to_string()])?;
        for r in &self.reports {
            let section = format!("report:{}", r.operation);
            w.write_record([section.as_str(), "pass", &r.pass.to_string()])?;
            w.write_record([section.as_str(), "tolerance", &num(r.tolerance)])?;
            for v in &r.values {
                w.write_record([section.as_str(), &v.name, &num(v.value)])?;
            }
            for p in &r.prefactors {
                w.write_record([section.as_str(), "prefactor", p])?;
            }
            for wit in &r.witnesses {
                let point: Vec<String> = wit.point.iter().map(|v| num(*v)).collect();
                w.write_record([section.as_str(), "witness", &wit.description, &point.join(" "), &num(wit.value)])?;
            }
        }
        for t in &self.tables {
            let section = format!("table:{}", t.name);
            let mut header = vec![section.clone()];
            header.extend(t.columns.iter().cloned());
            w.write_record(&header)?;
            for row in &t.rows {
                let mut rec = vec![section.clone()];
                rec.extend(row.iter().cloned());
                w.write_record(&rec)?;
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}
