use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::io::{save_expression, write_labels, LabelRecord};
use super::ExpressionDataset;
use crate::error::{Error, Result};
use crate::models::Domain;
use crate::rng::{SeededRng, Streams};

/// Files written by [`SynthData::save`], in order.
pub const SYNTH_FILES: [&str; 4] = ["cell_lines.tsv", "tissues.tsv", "labels.csv", "truth.json"];

/// Drug name used in the synthetic label file.
pub const SYNTH_DRUG: &str = "synthetic";

/// Two-domain generator: `x = A s + gamma * B_domain u + sigma * e` with
/// shared factors `s ~ N(0, I_rank)`, domain confounder factors
/// `u ~ N(0, I_rank)` and label `1{<w, s> > 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Samples per domain.
    pub n: usize,
    pub dim: usize,
    pub rank: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Number of sample types used as strata.
    pub strata: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 200,
            rank: 8,
            gamma: 3.0,
            sigma: 0.5,
            seed: 0,
            strata: 4,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n < 2 {
            errs.push(format!("n must be >= 2, got {}", self.n));
        }
        if self.rank < 1 {
            errs.push("rank must be >= 1".to_string());
        }
        if self.dim <= self.rank {
            errs.push(format!("dim ({}) must exceed rank ({})", self.dim, self.rank));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            errs.push(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            errs.push(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if self.strata < 1 {
            errs.push("strata must be >= 1".to_string());
        }
        errs
    }
}

/// Ground truth behind a synthetic draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub spec: SynthSpec,
    /// Label direction in factor space, unit norm.
    pub w: Vec<f64>,
    /// Shared map `A`, row-major `dim × rank`.
    pub shared_map: Vec<f64>,
    /// Confounder maps per domain, row-major `dim × rank`, before scaling.
    pub confounder_cell_line: Vec<f64>,
    pub confounder_tissue: Vec<f64>,
    /// Shared factors per sample, row-major `n × rank`.
    pub factors_cell_line: Vec<f64>,
    pub factors_tissue: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub cell_lines: ExpressionDataset,
    pub tissues: ExpressionDataset,
    /// Response AUC per sample, `sigmoid(-2 <w, s>)`, so `auc < 0.5` exactly
    /// when the label is 1.
    pub auc_cell_line: Vec<f64>,
    pub auc_tissue: Vec<f64>,
    pub truth: SynthTruth,
}

fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize, sd: f64) -> Vec<f64> {
    (0..rows * cols)
        .map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect()
}

struct Draw {
    ds: ExpressionDataset,
    auc: Vec<f64>,
    factors: Vec<f64>,
}

fn draw_domain(spec: &SynthSpec, a: &[f64], b: &[f64], w: &[f64], domain: Domain, rng: &mut SeededRng) -> Result<Draw> {
    let (n, d, r) = (spec.n, spec.dim, spec.rank);
    let s = gaussian_matrix(rng, n, r, 1.0);
    let u = gaussian_matrix(rng, n, r, 1.0);
    let mut x = Vec::with_capacity(n * d);
    for i in 0..n {
        let (si, ui) = (&s[i * r..(i + 1) * r], &u[i * r..(i + 1) * r]);
        for j in 0..d {
            let (aj, bj) = (&a[j * r..(j + 1) * r], &b[j * r..(j + 1) * r]);
            let signal: f64 = aj.iter().zip(si).map(|(p, q)| p * q).sum();
            let conf: f64 = bj.iter().zip(ui).map(|(p, q)| p * q).sum();
            let noise: f64 = Distribution::<f64>::sample(&StandardNormal, rng);
            x.push((signal + spec.gamma * conf + spec.sigma * noise) as f32);
        }
    }
    let prefix = match domain {
        Domain::CellLine => "CL",
        Domain::Tissue => "TS",
    };
    let ids = (0..n).map(|i| format!("{prefix}{i:04}")).collect();
    let names = (0..d).map(|j| format!("g{j:04}")).collect();
    let mut ds = ExpressionDataset::new(ids, names, x, domain)?;
    let mut labels = Vec::with_capacity(n);
    let mut auc = Vec::with_capacity(n);
    let mut strata = Vec::with_capacity(n);
    for i in 0..n {
        let score: f64 = w.iter().zip(&s[i * r..(i + 1) * r]).map(|(p, q)| p * q).sum();
        labels.push(u8::from(score > 0.0));
        auc.push(1.0 / (1.0 + (2.0 * score).exp()));
        strata.push(format!("type_{}", rng.random_range(0..spec.strata)));
    }
    ds.labels = Some(labels);
    ds.strata = Some(strata);
    Ok(Draw { ds, auc, factors: s })
}

/// Draws both domains. Bit-reproducible for a fixed spec.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    let errs = spec.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let streams = Streams::new(spec.seed);
    let mut maps = streams.rng("synth.maps");
    let (d, r) = (spec.dim, spec.rank);
    let sd = 1.0 / (r as f64).sqrt();
    let a = gaussian_matrix(&mut maps, d, r, sd);
    let bc = gaussian_matrix(&mut maps, d, r, sd);
    let bt = gaussian_matrix(&mut maps, d, r, sd);
    let mut w = gaussian_matrix(&mut maps, r, 1, 1.0);
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    w.iter_mut().for_each(|v| *v /= norm);

    let c = draw_domain(spec, &a, &bc, &w, Domain::CellLine, &mut streams.rng("synth.cell_line"))?;
    let t = draw_domain(spec, &a, &bt, &w, Domain::Tissue, &mut streams.rng("synth.tissue"))?;
    Ok(SynthData {
        cell_lines: c.ds,
        tissues: t.ds,
        auc_cell_line: c.auc,
        auc_tissue: t.auc,
        truth: SynthTruth {
            seed: spec.seed,
            spec: spec.clone(),
            w,
            shared_map: a,
            confounder_cell_line: bc,
            confounder_tissue: bt,
            factors_cell_line: c.factors,
            factors_tissue: t.factors,
        },
    })
}

impl SynthData {
    pub fn label_records(&self) -> Vec<LabelRecord> {
        let mut out = Vec::new();
        for (ds, auc) in [
            (&self.cell_lines, &self.auc_cell_line),
            (&self.tissues, &self.auc_tissue),
        ] {
            let strata = ds.strata.as_deref().unwrap_or_default();
            for (i, id) in ds.sample_ids.iter().enumerate() {
                out.push(LabelRecord {
                    sample_id: id.clone(),
                    drug: SYNTH_DRUG.to_string(),
                    auc: auc[i],
                    stratum: strata.get(i).cloned(),
                });
            }
        }
        out
    }

    /// Writes [`SYNTH_FILES`] into `dir`. Existing files are only replaced
    /// with `force`.
    pub fn save(&self, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths: Vec<PathBuf> = SYNTH_FILES.iter().map(|f| dir.join(f)).collect();
        if !force {
            let existing: Vec<String> = paths
                .iter()
                .filter(|p| p.exists())
                .map(|p| p.display().to_string())
                .collect();
            if !existing.is_empty() {
                return Err(Error::invalid(format!(
                    "refusing to overwrite {} (use --force)",
                    existing.join(", ")
                )));
            }
        }
        save_expression(&self.cell_lines, &paths[0])?;
        save_expression(&self.tissues, &paths[1])?;
        write_labels(&self.label_records(), &paths[2])?;
        let json = serde_json::to_vec_pretty(&self.truth)?;
        std::fs::write(&paths[3], json).map_err(|e| Error::io(&paths[3], e))?;
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n: 300,
            dim: 20,
            rank: 3,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let a = synth_generate(&small(5)).unwrap();
        let b = synth_generate(&small(5)).unwrap();
        let c = synth_generate(&small(6)).unwrap();
        assert_eq!(a.cell_lines, b.cell_lines);
        assert_eq!(a.tissues, b.tissues);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.cell_lines.matrix, c.cell_lines.matrix);
    }

    #[test]
    fn labels_follow_factors_and_auc() {
        let s = synth_generate(&small(1)).unwrap();
        let r = s.truth.spec.rank;
        let labels = s.cell_lines.labels().unwrap();
        for i in 0..labels.len() {
            let f = &s.truth.factors_cell_line[i * r..(i + 1) * r];
            let score: f64 = f.iter().zip(&s.truth.w).map(|(p, q)| p * q).sum();
            assert_eq!(labels[i], u8::from(score > 0.0));
            assert_eq!(labels[i], u8::from(s.auc_cell_line[i] < 0.5));
        }
    }

    #[test]
    fn noiseless_zero_gamma_is_the_shared_map() {
        let spec = SynthSpec {
            gamma: 0.0,
            sigma: 0.0,
            ..small(2)
        };
        let s = synth_generate(&spec).unwrap();
        let (d, r) = (spec.dim, spec.rank);
        for (ds, f) in [
            (&s.cell_lines, &s.truth.factors_cell_line),
            (&s.tissues, &s.truth.factors_tissue),
        ] {
            for i in 0..3 {
                for j in 0..d {
                    let v: f64 = (0..r).map(|q| s.truth.shared_map[j * r + q] * f[i * r + q]).sum();
                    assert!((f64::from(ds.row(i)[j]) - v).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            SynthSpec {
                gamma: -1.0,
                ..small(0)
            },
            SynthSpec { rank: 0, ..small(0) },
            SynthSpec { dim: 3, ..small(0) },
        ] {
            assert!(matches!(synth_generate(&spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn writes_four_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = synth_generate(&small(3)).unwrap();
        let paths = s.save(dir.path(), false).unwrap();
        assert_eq!(paths.len(), 4);
        assert!(paths.iter().all(|p| p.exists()));
        assert!(s.save(dir.path(), false).is_err());
        s.save(dir.path(), true).unwrap();
    }
}
