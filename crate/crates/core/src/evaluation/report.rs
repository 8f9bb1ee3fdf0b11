use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::Rate;
use super::protocols::{AblationPoint, EvalCell, Protocol};
use crate::error::{Error, Result};

/// Results of one protocol run with the provenance needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub encoder_id: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default)]
    pub cells: Vec<EvalCell>,
    #[serde(default)]
    pub ablation: Vec<AblationPoint>,
    #[serde(default)]
    pub ablation_target: Option<String>,
}

fn percent(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

fn percent_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), percent)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

impl EvalReport {
    /// One row per cell, full precision.
    pub fn cells_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "protocol",
            "train_sources",
            "test_target",
            "encoder_id",
            "n_test",
            "tp",
            "fp",
            "tn",
            "fn",
            "acc",
            "fpr",
            "fnr",
            "train_seed",
            "best_epoch",
            "seed",
            "config_hash",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.protocol.as_str().to_string(),
                c.train_sources.join("+"),
                c.test_target.clone(),
                c.encoder_id.clone(),
                c.n_test.to_string(),
                c.counts.tp.to_string(),
                c.counts.fp.to_string(),
                c.counts.tn.to_string(),
                c.counts.fn_.to_string(),
                c.acc.to_string(),
                Rate(c.fpr).to_string(),
                Rate(c.fnr).to_string(),
                c.train_seed.to_string(),
                c.best_epoch.to_string(),
                self.seed.to_string(),
                self.config_hash.clone(),
            ])?;
        }
        finish(w)
    }

    /// Accuracy grid with sources as rows and targets as columns, in the
    /// order generators first appear.
    pub fn transfer_grid_csv(&self) -> Result<String> {
        let mut order: Vec<&str> = Vec::new();
        for c in &self.cells {
            for id in c.train_sources.iter().map(String::as_str).chain([c.test_target.as_str()]) {
                if !order.contains(&id) {
                    order.push(id);
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["source".to_string()];
        header.extend(order.iter().map(|s| s.to_string()));
        header.push("seed".into());
        header.push("config_hash".into());
        w.write_record(&header)?;
        for src in &order {
            let mut row = vec![src.to_string()];
            for tgt in &order {
                let cell = self
                    .cells
                    .iter()
                    .find(|c| c.train_sources.len() == 1 && c.train_sources[0] == *src && c.test_target == *tgt);
                row.push(cell.map_or_else(String::new, |c| c.acc.to_string()));
            }
            row.push(self.seed.to_string());
            row.push(self.config_hash.clone());
            w.write_record(&row)?;
        }
        finish(w)
    }

    pub fn ablation_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "k", "mean_acc", "accs", "run_seeds", "target", "seed", "config_hash"])?;
        for p in &self.ablation {
            let join = |v: Vec<String>| v.join(";");
            w.write_record([
                p.n.to_string(),
                p.accs.len().to_string(),
                p.mean_acc.to_string(),
                join(p.accs.iter().map(f64::to_string).collect()),
                join(p.seeds.iter().map(u64::to_string).collect()),
                self.ablation_target.clone().unwrap_or_default(),
                self.seed.to_string(),
                self.config_hash.clone(),
            ])?;
        }
        finish(w)
    }

    /// Summary table with percentages rounded to one decimal.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} report\n", self.protocol.as_str());
        let _ = writeln!(s, "- encoder: `{}`", self.encoder_id);
        let _ = writeln!(s, "- seed: {}", self.seed);
        let _ = writeln!(s, "- config hash: `{}`\n", self.config_hash);
        if !self.cells.is_empty() {
            s.push_str("| train | target | n | Acc (%) | FPR (%) | FNR (%) |\n");
            s.push_str("|---|---|---:|---:|---:|---:|\n");
            for c in &self.cells {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    c.train_sources.join(" + "),
                    c.test_target,
                    c.n_test,
                    percent(c.acc),
                    percent_rate(c.fpr),
                    percent_rate(c.fnr)
                );
            }
            if self.cells.len() > 1 {
                let mean = self.cells.iter().map(|c| c.acc).sum::<f64>() / self.cells.len() as f64;
                let _ = writeln!(s, "\nMean accuracy: {}%", percent(mean));
            }
        }
        if !self.ablation.is_empty() {
            if let Some(t) = &self.ablation_target {
                let _ = writeln!(s, "Target: {t}\n");
            }
            s.push_str("| n | runs | mean Acc (%) |\n|---:|---:|---:|\n");
            for p in &self.ablation {
                let _ = writeln!(s, "| {} | {} | {} |", p.n, p.accs.len(), percent(p.mean_acc));
            }
        }
        s
    }

    /// Writes `<stem>.csv`, `<stem>.md` and `<stem>.json`, plus
    /// `<stem>_grid.csv` for transfer runs and `<stem>_curve.csv` for
    /// ablations. Returns the paths written.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = Vec::new();
        let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
            let p = dir.join(name);
            write_file(&p, &bytes)?;
            out.push(p);
            Ok(())
        };
        put(format!("{stem}.json"), serde_json::to_vec_pretty(self)?)?;
        put(format!("{stem}.md"), self.to_markdown().into_bytes())?;
        if self.protocol == Protocol::Ablation {
            put(format!("{stem}_curve.csv"), self.ablation_csv()?.into_bytes())?;
        } else {
            put(format!("{stem}.csv"), self.cells_csv()?.into_bytes())?;
        }
        if self.protocol == Protocol::Transfer {
            put(format!("{stem}_grid.csv"), self.transfer_grid_csv()?.into_bytes())?;
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
