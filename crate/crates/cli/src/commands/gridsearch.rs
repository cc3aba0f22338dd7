//! `gridsearch`: deterministic sweep over the tuning grids (dropout, batch
//! size, filter count, window, pooling length, hidden units, vocabulary
//! percent), selecting by dev accuracy with ties going to the first cell.

use std::path::PathBuf;

use crisiscnn_core::corpus::Origin;
use crisiscnn_core::error::{Error, Result};

use crate::config::RunConfig;
use crate::io::{atomic_write_str, thread_count, PreparedDir};
use crate::pipeline::{self, ModelKind};

pub const DROPOUT_GRID: [f64; 4] = [0.0, 0.2, 0.4, 0.5];
pub const BATCH_GRID: [usize; 3] = [32, 64, 128];
pub const FILTER_GRID: [usize; 3] = [100, 150, 200];
pub const WINDOW_GRID: [usize; 3] = [2, 3, 4];
pub const POOL_GRID: [usize; 3] = [2, 3, 4];
pub const HIDDEN_GRID: [usize; 3] = [100, 150, 200];
pub const VOCAB_GRID: [f64; 3] = [80.0, 85.0, 90.0];

#[derive(Debug, Clone, Default)]
pub struct GridRestriction {
    pub dropout: Option<Vec<f64>>,
    pub batch: Option<Vec<usize>>,
    pub filters: Option<Vec<usize>>,
    pub window: Option<Vec<usize>>,
    pub pool: Option<Vec<usize>>,
    pub hidden: Option<Vec<usize>>,
    pub vocab: Option<Vec<f64>>,
}

impl GridRestriction {
    pub fn is_full_default(&self) -> bool {
        self.dropout.is_none()
            && self.batch.is_none()
            && self.filters.is_none()
            && self.window.is_none()
            && self.pool.is_none()
            && self.hidden.is_none()
            && self.vocab.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub dropout: f64,
    pub batch_size: usize,
    pub num_filters: usize,
    pub window: usize,
    pub pool_len: usize,
    pub dense_units: usize,
    pub vocab_percent: f64,
}

/// Cells in the fixed iteration order: dropout, batch, filters, window,
/// pooling, hidden units, vocabulary percent.
pub fn enumerate_cells(restriction: &GridRestriction) -> Vec<GridCell> {
    let dropout = restriction.dropout.clone().unwrap_or_else(|| DROPOUT_GRID.to_vec());
    let batch = restriction.batch.clone().unwrap_or_else(|| BATCH_GRID.to_vec());
    let filters = restriction.filters.clone().unwrap_or_else(|| FILTER_GRID.to_vec());
    let window = restriction.window.clone().unwrap_or_else(|| WINDOW_GRID.to_vec());
    let pool = restriction.pool.clone().unwrap_or_else(|| POOL_GRID.to_vec());
    let hidden = restriction.hidden.clone().unwrap_or_else(|| HIDDEN_GRID.to_vec());
    let vocab = restriction.vocab.clone().unwrap_or_else(|| VOCAB_GRID.to_vec());

    let mut cells = Vec::new();
    for &d in &dropout {
        for &b in &batch {
            for &n in &filters {
                for &w in &window {
                    for &p in &pool {
                        for &h in &hidden {
                            for &v in &vocab {
                                cells.push(GridCell {
                                    dropout: d,
                                    batch_size: b,
                                    num_filters: n,
                                    window: w,
                                    pool_len: p,
                                    dense_units: h,
                                    vocab_percent: v,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

pub struct GridSearchArgs {
    pub run: RunConfig,
    pub event_data: PathBuf,
    pub out_dir: PathBuf,
    pub restriction: GridRestriction,
    pub confirmed: bool,
}

pub fn run(args: &GridSearchArgs) -> Result<()> {
    let cells = enumerate_cells(&args.restriction);
    println!("grid search over {} cells", cells.len());
    if args.restriction.is_full_default() && !args.confirmed {
        return Err(Error::invalid(format!(
            "the full default grid has {} cells; pass --confirm to run it, or restrict with --grid-* flags",
            cells.len()
        )));
    }

    let threads = thread_count();
    let event = PreparedDir::load(&args.event_data, Origin::Event)?;
    let kind = ModelKind::parse(&args.run.model)?;

    let mut csv = String::from(
        "dropout,batch_size,num_filters,window,pool_len,dense_units,vocab_percent,dev_accuracy\n",
    );
    let mut best: Option<(GridCell, f64)> = None;
    for cell in &cells {
        let run = apply_cell(&args.run, cell);
        let trained = pipeline::train_cnn_model(
            &run,
            kind,
            &event.train,
            &event.dev,
            &event.schema,
            run.embeddings.as_deref(),
            threads,
        )?;
        let accuracy = trained.best_accuracy;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            cell.dropout,
            cell.batch_size,
            cell.num_filters,
            cell.window,
            cell.pool_len,
            cell.dense_units,
            cell.vocab_percent,
            accuracy
        ));
        // Strictly-greater keeps the first cell on ties.
        if best.as_ref().is_none_or(|(_, a)| accuracy > *a) {
            best = Some((cell.clone(), accuracy));
        }
    }

    let (best_cell, best_accuracy) = best.expect("at least one cell ran");
    let best_run = apply_cell(&args.run, &best_cell);
    atomic_write_str(&args.out_dir.join("cells.csv"), &csv)?;
    atomic_write_str(&args.out_dir.join("best.config"), &best_run.to_file_format())?;
    println!(
        "best dev accuracy {:.4} at dropout {}, batch {}, filters {}, window {}, pool {}, hidden {}, vocab {}%",
        best_accuracy,
        best_cell.dropout,
        best_cell.batch_size,
        best_cell.num_filters,
        best_cell.window,
        best_cell.pool_len,
        best_cell.dense_units,
        best_cell.vocab_percent
    );
    Ok(())
}

fn apply_cell(base: &RunConfig, cell: &GridCell) -> RunConfig {
    RunConfig {
        dropout: cell.dropout,
        batch_size: cell.batch_size,
        num_filters: cell.num_filters,
        window: cell.window,
        pool_len: cell.pool_len,
        dense_units: cell.dense_units,
        vocab_percent: cell.vocab_percent,
        ..base.clone()
    }
}

pub fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::invalid(format!("bad {what} list entry {s:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_default_grid_has_2916_cells() {
        let cells = enumerate_cells(&GridRestriction::default());
        assert_eq!(cells.len(), 4 * 3 * 3 * 3 * 3 * 3 * 3);
        assert_eq!(cells.len(), 2916);
    }

    #[test]
    fn restricted_grid_multiplies_out() {
        let restriction = GridRestriction {
            dropout: Some(vec![0.5]),
            batch: Some(vec![32]),
            filters: Some(vec![10, 20]),
            window: Some(vec![2]),
            pool: Some(vec![2]),
            hidden: Some(vec![8]),
            vocab: Some(vec![100.0]),
        };
        assert_eq!(enumerate_cells(&restriction).len(), 2);
    }

    #[test]
    fn iteration_order_is_documented_order() {
        let restriction = GridRestriction {
            dropout: Some(vec![0.0, 0.5]),
            batch: Some(vec![32]),
            filters: Some(vec![10]),
            window: Some(vec![2]),
            pool: Some(vec![2]),
            hidden: Some(vec![8]),
            vocab: Some(vec![90.0, 100.0]),
        };
        let cells = enumerate_cells(&restriction);
        assert_eq!(cells[0].dropout, 0.0);
        assert_eq!(cells[0].vocab_percent, 90.0);
        assert_eq!(cells[1].vocab_percent, 100.0);
        assert_eq!(cells[2].dropout, 0.5);
    }
}
