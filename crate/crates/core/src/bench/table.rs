//! Mean ± sd tables over seeds, one per noise level.

use std::fmt::Write as _;
use std::io::Write;

use crate::activations::Variant;
use crate::data::Recipe;
use crate::error::{Error, Result};

use super::ExperimentResult;

/// Aggregate of the runs sharing a dataset, activation and noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub runs: usize,
    pub diverged: usize,
    /// Mean and sample standard deviation of the converged runs.
    pub mean: f64,
    pub sd: f64,
}

impl Cell {
    pub fn from_runs(rmse: &[Option<f64>]) -> Option<Self> {
        if rmse.is_empty() {
            return None;
        }
        let ok: Vec<f64> = rmse.iter().flatten().copied().collect();
        let n = ok.len() as f64;
        let mean = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().sum::<f64>() / n
        };
        let sd = if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self {
            runs: rmse.len(),
            diverged: rmse.len() - ok.len(),
            mean,
            sd,
        })
    }
}

impl std::fmt::Display for Cell {
    /// Any divergence hides the statistics, as in "(8/10 NaN)".
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.diverged > 0 {
            return write!(f, "({}/{} NaN)", self.diverged, self.runs);
        }
        let places = if self.mean < 0.1 { 4 } else { 3 };
        write!(f, "{:.*}±{:.*}", places, self.mean, places, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub noise_sd: f64,
    pub datasets: Vec<Recipe>,
    pub activations: Vec<Variant>,
    /// `cells[activation][dataset]`
    pub cells: Vec<Vec<Option<Cell>>>,
}

/// Groups results by noise level; rows and columns follow the canonical
/// activation and dataset order.
pub fn build_tables(results: &[ExperimentResult]) -> Result<Vec<ResultTable>> {
    if results.is_empty() {
        return Err(Error::Empty("results"));
    }
    let mut datasets: Vec<Recipe> = results.iter().map(|r| r.dataset).collect();
    datasets.sort();
    datasets.dedup();
    let mut activations: Vec<Variant> = results.iter().map(|r| r.activation).collect();
    activations.sort();
    activations.dedup();
    let mut noises: Vec<f64> = results.iter().map(|r| r.noise_sd).collect();
    noises.sort_by(f64::total_cmp);
    noises.dedup();

    Ok(noises
        .into_iter()
        .map(|noise_sd| {
            let cells = activations
                .iter()
                .map(|&a| {
                    datasets
                        .iter()
                        .map(|&d| {
                            let rmse: Vec<Option<f64>> = results
                                .iter()
                                .filter(|r| {
                                    r.activation == a && r.dataset == d && r.noise_sd == noise_sd
                                })
                                .map(|r| if r.diverged { None } else { r.rmse })
                                .collect();
                            Cell::from_runs(&rmse)
                        })
                        .collect()
                })
                .collect();
            ResultTable {
                noise_sd,
                datasets: datasets.clone(),
                activations: activations.clone(),
                cells,
            }
        })
        .collect())
}

impl ResultTable {
    pub fn cell(&self, activation: Variant, dataset: Recipe) -> Option<Cell> {
        let a = self.activations.iter().position(|&v| v == activation)?;
        let d = self.datasets.iter().position(|&v| v == dataset)?;
        self.cells[a][d]
    }

    fn row_strings(&self) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| c.map(|c| c.to_string()).unwrap_or_else(|| "-".into()))
                    .collect()
            })
            .collect()
    }

    pub fn render_text(&self) -> String {
        let rows = self.row_strings();
        let mut header = vec!["activation".to_string()];
        header.extend(self.datasets.iter().map(|d| d.name().to_string()));
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for (a, row) in self.activations.iter().zip(&rows) {
            widths[0] = widths[0].max(a.name().len());
            for (w, s) in widths[1..].iter_mut().zip(row) {
                *w = (*w).max(s.chars().count());
            }
        }
        let line = |cols: &[String]| -> String {
            cols.iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "noise_sd = {}", self.noise_sd);
        let _ = writeln!(out, "{}", line(&header));
        for (a, row) in self.activations.iter().zip(rows) {
            let mut cols = vec![a.name().to_string()];
            cols.extend(row);
            let _ = writeln!(out, "{}", line(&cols));
        }
        out
    }
}

pub fn render_text(tables: &[ResultTable]) -> String {
    tables
        .iter()
        .map(ResultTable::render_text)
        .collect::<Vec<_>>()
        .join("\n")
}

/// One row per (noise level, activation); columns are datasets.
pub fn write_csv<W: Write>(tables: &[ResultTable], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = tables.first() {
        let mut header = vec!["noise_sd".to_string(), "activation".to_string()];
        header.extend(first.datasets.iter().map(|d| d.name().to_string()));
        w.write_record(&header)?;
    }
    for t in tables {
        for (a, row) in t.activations.iter().zip(t.row_strings()) {
            let mut rec = vec![t.noise_sd.to_string(), a.name().to_string()];
            rec.extend(row);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(
        activation: Variant,
        dataset: Recipe,
        seed: u64,
        rmse: Option<f64>,
    ) -> ExperimentResult {
        ExperimentResult {
            dataset,
            activation,
            noise_sd: 0.01,
            seed,
            run_seed: seed,
            rmse,
            diverged: rmse.is_none(),
            diverged_epoch: rmse.is_none().then_some(3),
            epochs: 300,
            param_count: 0,
            final_train_loss: rmse,
            wall_time: None,
            history: None,
            activation_stats: None,
        }
    }

    #[test]
    fn cell_formatting() {
        assert_eq!(
            Cell::from_runs(&[Some(0.0113)]).unwrap().to_string(),
            "0.0113±0.0000"
        );
        assert_eq!(
            Cell::from_runs(&[None; 10]).unwrap().to_string(),
            "(10/10 NaN)"
        );
        let mut mixed = vec![None; 8];
        mixed.extend([Some(0.1), Some(0.2)]);
        assert_eq!(Cell::from_runs(&mixed).unwrap().to_string(), "(8/10 NaN)");
        assert_eq!(
            Cell::from_runs(&[Some(0.1), Some(0.3)])
                .unwrap()
                .to_string(),
            "0.200±0.141"
        );
        assert!(Cell::from_runs(&[]).is_none());
    }

    #[test]
    fn tables_are_laid_out_by_activation_and_dataset() {
        let results = vec![
            result(Variant::ClExtrapolate, Recipe::Gravity, 0, Some(0.02)),
            result(Variant::Relu, Recipe::Pendulum, 0, Some(0.15)),
            result(Variant::Relu, Recipe::Pendulum, 1, Some(0.17)),
            result(Variant::ClExtrapolate, Recipe::Pendulum, 0, None),
        ];
        let tables = build_tables(&results).unwrap();
        assert_eq!(tables.len(), 1);
        let t = &tables[0];
        assert_eq!(t.datasets, vec![Recipe::Pendulum, Recipe::Gravity]);
        assert_eq!(t.activations, vec![Variant::Relu, Variant::ClExtrapolate]);
        assert!(t.cell(Variant::Relu, Recipe::Gravity).is_none());
        assert_eq!(t.cell(Variant::Relu, Recipe::Pendulum).unwrap().runs, 2);

        let text = t.render_text();
        assert!(text.contains("(1/1 NaN)"));
        assert!(text.lines().nth(1).unwrap().starts_with("activation"));

        let mut buf = Vec::new();
        write_csv(&tables, &mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "noise_sd,activation,pendulum,gravity"
        );
        assert_eq!(csv.lines().nth(1).unwrap(), "0.01,relu,0.160±0.014,-");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(build_tables(&[]).is_err());
    }
}
