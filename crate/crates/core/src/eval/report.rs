use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::welch::{mean_var, welch_t_test};
use crate::error::{Error, Result};

pub const AUROC: &str = "auroc";
pub const AUPRC: &str = "auprc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub variant: String,
    pub seed: u64,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single record.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub metric: String,
    pub variant_a: String,
    pub variant_b: String,
    /// `None` when the test is undefined (too few records, zero variance).
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
}

/// Per-fold records with their aggregates and pairwise Welch tests on AUROC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<Aggregate>,
    pub tests: Vec<PairTest>,
}

pub const REPORT_JSON: &str = "report.json";
pub const RECORDS_CSV: &str = "records.csv";

impl EvalReport {
    pub fn from_records(mut records: Vec<MetricRecord>) -> Self {
        records.sort_by(|a, b| (&a.variant, a.seed, a.fold, &a.metric).cmp(&(&b.variant, b.seed, b.fold, &b.metric)));
        let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
        for r in &records {
            groups.entry((&r.variant, &r.metric)).or_default().push(r.value);
        }
        let aggregates = groups
            .iter()
            .map(|((variant, metric), values)| {
                let (mean, var) = mean_var(values);
                Aggregate {
                    variant: variant.to_string(),
                    metric: metric.to_string(),
                    n: values.len(),
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect();
        let auroc_groups: Vec<(&str, &Vec<f64>)> = groups
            .iter()
            .filter(|((_, m), _)| *m == AUROC)
            .map(|((v, _), vals)| (*v, vals))
            .collect();
        let mut tests = Vec::new();
        for (i, (va, a)) in auroc_groups.iter().enumerate() {
            for (vb, b) in &auroc_groups[i + 1..] {
                let r = welch_t_test(a, b).ok();
                tests.push(PairTest {
                    metric: AUROC.to_string(),
                    variant_a: va.to_string(),
                    variant_b: vb.to_string(),
                    t: r.map(|r| r.t),
                    df: r.map(|r| r.df),
                    p: r.map(|r| r.p),
                });
            }
        }
        Self {
            records,
            aggregates,
            tests,
        }
    }

    pub fn variants(&self) -> Vec<String> {
        let mut v: Vec<String> = self.records.iter().map(|r| r.variant.clone()).collect();
        v.dedup();
        v
    }

    pub fn count(&self, variant: &str, metric: &str) -> usize {
        self.records
            .iter()
            .filter(|r| r.variant == variant && r.metric == metric)
            .count()
    }

    pub fn aggregate(&self, variant: &str, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.variant == variant && a.metric == metric)
    }

    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)
                .map_err(|e| Error::invalid(format!("records csv: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::invalid(format!("records csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn parse_records_csv(text: &str) -> Result<Vec<MetricRecord>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        r.deserialize()
            .enumerate()
            .map(|(i, rec)| {
                rec.map_err(|e| Error::Parse {
                    row: i + 2,
                    column: 0,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// Long-format plot data, one row per record.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("variant,seed,iteration,metric,value\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.variant, r.seed, r.fold, r.metric, r.value);
        }
        out
    }

    /// Plain-text `mean±std` table per variant plus the pairwise tests.
    pub fn table(&self) -> String {
        let metrics: Vec<&str> = {
            let mut m: Vec<&str> = self.aggregates.iter().map(|a| a.metric.as_str()).collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        let variants = self.variants();
        let width = variants.iter().map(String::len).max().unwrap_or(7).max(7);
        let mut out = String::new();
        let _ = write!(out, "{:width$}", "variant");
        for m in &metrics {
            let _ = write!(out, "  {:>15}", m.to_uppercase());
        }
        out.push('\n');
        for v in &variants {
            let _ = write!(out, "{v:width$}");
            for m in &metrics {
                match self.aggregate(v, m) {
                    Some(a) => {
                        let _ = write!(out, "  {:>15}", format!("{:.4}±{:.4}", a.mean, a.std));
                    }
                    None => {
                        let _ = write!(out, "  {:>15}", "-");
                    }
                }
            }
            out.push('\n');
        }
        if !self.tests.is_empty() {
            out.push_str("\nWelch t-tests (AUROC, two-sided)\n");
            for t in &self.tests {
                match (t.t, t.p) {
                    (Some(tv), Some(p)) => {
                        let _ = writeln!(out, "{} vs {}: t = {tv:.4}, p = {p:.4e}", t.variant_a, t.variant_b);
                    }
                    _ => {
                        let _ = writeln!(out, "{} vs {}: undefined", t.variant_a, t.variant_b);
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.json` and `records.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(REPORT_JSON);
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join(RECORDS_CSV);
        std::fs::write(&csv, self.records_csv()?).map_err(|e| Error::io(&csv, e))
    }

    /// Reads a report from `report.json`, or from a directory holding one.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(REPORT_JSON)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let report: EvalReport = serde_json::from_str(&text)?;
        if report.records.is_empty() {
            return Err(Error::invalid(format!("{} holds no records", file.display())));
        }
        Ok(report)
    }
}
