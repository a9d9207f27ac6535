//! Hyperparameter grid over embedding size and learning rate, scored on a
//! validation carve-out of the train window.

use serde::{Deserialize, Serialize};

use super::fit::{fit, TrainConfig};
use crate::data::{build_all_incidences, ColdStartSplit, Hierarchy};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_cold, CandidateMode};
use crate::models::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub learning_rates: Vec<f32>,
    /// Cutoff of the selection metric, PR@k.
    pub k: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dims: (1..=10).map(|i| 20 * i).collect(),
            learning_rates: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub d: usize,
    pub learning_rate: f32,
    /// `None` when training diverged.
    pub precision: Option<f64>,
    pub hit_rate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub k: usize,
    pub best: GridCell,
    pub best_config: TrainConfig,
    /// Whether the chosen learning rate lies strictly inside the grid.
    pub learning_rate_interior: bool,
    pub table: Vec<GridCell>,
}

impl GridResult {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("d\tlearning_rate\tprecision_at_{0}\thit_rate_at_{0}\n", self.k);
        let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        for c in &self.table {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                c.d,
                c.learning_rate,
                f(c.precision),
                f(c.hit_rate)
            ));
        }
        out
    }
}

/// Trains one model per `(d, learning_rate)` cell on the validation split
/// and picks the cell with the highest PR@k; ties go to the smaller `d`,
/// then the smaller learning rate.
pub fn grid_search(
    kind: ModelKind,
    split: &ColdStartSplit,
    hierarchy: Option<&Hierarchy>,
    base: &TrainConfig,
    spec: &GridSpec,
) -> Result<GridResult> {
    if spec.dims.is_empty() || spec.learning_rates.is_empty() || spec.k == 0 {
        return Err(Error::Config("grid needs at least one d, one learning rate and k >= 1".into()));
    }
    let validation = split.validation_split()?;
    let levels: Vec<_> = match hierarchy {
        Some(h) => build_all_incidences(h, &validation.items)?
            .into_iter()
            .map(|l| l.incidence)
            .collect(),
        None => Vec::new(),
    };
    let mut dims = spec.dims.clone();
    dims.sort_unstable();
    dims.dedup();
    let mut lrs = spec.learning_rates.clone();
    lrs.sort_by(f32::total_cmp);
    lrs.dedup();
    let mut table = Vec::with_capacity(dims.len() * lrs.len());
    for &d in &dims {
        for &lr in &lrs {
            let cfg = TrainConfig {
                d,
                learning_rate: lr,
                ..*base
            };
            let cell = match fit(kind, &validation, &levels, &cfg) {
                Ok(out) => {
                    let report = evaluate_cold(&out.model, &validation, &[spec.k], CandidateMode::Cold)?;
                    let m = &report.metrics[0];
                    GridCell {
                        d,
                        learning_rate: lr,
                        precision: Some(m.precision),
                        hit_rate: Some(m.hit_rate),
                        error: None,
                    }
                }
                Err(e @ Error::Numerical(_)) => GridCell {
                    d,
                    learning_rate: lr,
                    precision: None,
                    hit_rate: None,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            };
            log::info!("grid d={d} lr={lr}: PR@{} {:?}", spec.k, cell.precision);
            table.push(cell);
        }
    }
    let mut best: Option<&GridCell> = None;
    for c in &table {
        if let Some(p) = c.precision {
            if best.is_none_or(|b| p > b.precision.unwrap()) {
                best = Some(c);
            }
        }
    }
    let best = best
        .ok_or_else(|| Error::Numerical("every grid cell diverged".into()))?
        .clone();
    let interior = lrs.len() >= 3
        && best.learning_rate != lrs[0]
        && best.learning_rate != *lrs.last().unwrap();
    if !interior {
        log::warn!("grid picked learning rate {} at the edge of the grid", best.learning_rate);
    }
    Ok(GridResult {
        k: spec.k,
        best_config: TrainConfig {
            d: best.d,
            learning_rate: best.learning_rate,
            ..*base
        },
        best,
        learning_rate_interior: interior,
        table,
    })
}
