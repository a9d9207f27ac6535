//! The subcommands behind the `hge` binary. Each writes its outputs and the
//! resolved config into one output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{
    binarize, build_all_incidences, cold_start_split, k_core_filter, load_hierarchy,
    load_interactions, load_prepared, merge_small_categories, save_prepared, synth_generate,
    BadRows, ColdStartSplit, Hierarchy, SplitManifest,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    cluster_report, evaluate_cold, export_embeddings, ClusterReport, EvalReport, TimingReport,
};
use crate::numerics::SparseIncidence;
use crate::training::{
    fit, grid_search, load_checkpoint, save_checkpoint, Checkpoint, GridResult,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOSS_FILE: &str = "loss_history.json";
pub const REPORT_FILE: &str = "report.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const GRID_FILE: &str = "grid.json";
pub const BEST_CONFIG_FILE: &str = "best_config.json";
pub const TIMING_FILE: &str = "timing.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const SYNTH_INTERACTIONS_FILE: &str = "interactions.csv";
pub const SYNTH_HIERARCHY_FILE: &str = "hierarchy.csv";

/// A split with its hierarchy and per-level incidences over the split's items.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: ColdStartSplit,
    pub hierarchy: Hierarchy,
    pub levels: Vec<SparseIncidence>,
}

impl Dataset {
    fn new(split: ColdStartSplit, hierarchy: Hierarchy) -> Result<Self> {
        let levels = build_all_incidences(&hierarchy, &split.items)?
            .into_iter()
            .map(|l| l.incidence)
            .collect();
        Ok(Self {
            split,
            hierarchy,
            levels,
        })
    }
}

/// Reads the raw CSVs and applies binarisation, k-core filtering, category
/// merging and the cold-start split.
pub fn prepare_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let d = &cfg.data;
    let (Some(interactions), Some(hierarchy)) = (&d.interactions, &d.hierarchy) else {
        return Err(Error::Config(
            "data.interactions and data.hierarchy are required to prepare a dataset".into(),
        ));
    };
    let bad_rows = if d.skip_bad_rows {
        BadRows::Skip
    } else {
        BadRows::Reject
    };
    let raw = load_interactions(interactions, bad_rows)?;
    let mut log = binarize(&raw, d.threshold);
    if log.is_empty() {
        return Err(Error::EmptyData(format!(
            "no event reaches the threshold {}",
            d.threshold
        )));
    }
    if d.k_core > 1 {
        log = k_core_filter(&log, d.k_core)?;
    }
    let split = cold_start_split(&log, cfg.split)?;
    let mut h = load_hierarchy(hierarchy)?.restrict(|id| split.items.get(id).is_some());
    if d.min_category_items > 0 {
        for level in 1..=h.n_levels() {
            h = merge_small_categories(&h, level, d.min_category_items)?;
        }
    }
    Dataset::new(split, h)
}

/// The dataset named by the config: a prepared directory if given, the raw
/// CSVs otherwise.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data.prepared {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(Error::io(
                    dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "prepared directory not found"),
                ));
            }
            let (split, h) = load_prepared(dir)?;
            Dataset::new(split, h)
        }
        None => prepare_dataset(cfg),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn start(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.write_resolved(out)?;
    Ok(())
}

/// Writes the prepared split (binary event tables, index files, manifest and
/// the filtered hierarchy) into `out`.
pub fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<SplitManifest> {
    let ds = prepare_dataset(cfg)?;
    start(cfg, out)?;
    save_prepared(out, &ds.split, &ds.hierarchy)?;
    Ok(ds.split.manifest())
}

/// Writes a synthetic interaction log and hierarchy as CSV into `out`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let (log, h) = synth_generate(&cfg.synth)?;
    start(cfg, out)?;
    let (li, lh) = (out.join(SYNTH_INTERACTIONS_FILE), out.join(SYNTH_HIERARCHY_FILE));
    log.write_csv(&li)?;
    h.write_csv(&lh)?;
    Ok((li, lh))
}

/// Trains the configured model and writes its checkpoint and loss history.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Checkpoint> {
    let ds = load_dataset(cfg)?;
    let tc = cfg.train_config();
    let fitted = fit(cfg.model.kind, &ds.split, &ds.levels, &tc)?;
    start(cfg, out)?;
    let ckpt = Checkpoint::new(fitted.model, cfg.to_json(), &fitted.loss_history)?;
    save_checkpoint(&ckpt, &out.join(CHECKPOINT_FILE))?;
    write_json(&out.join(LOSS_FILE), &fitted.loss_history)?;
    Ok(ckpt)
}

/// Grid search over `d` and the learning rate on the validation carve-out.
/// `best_config.json` is the run config with the winning cell filled in.
pub fn cmd_grid(cfg: &RunConfig, out: &Path, tsv: bool) -> Result<GridResult> {
    let ds = load_dataset(cfg)?;
    let result = grid_search(
        cfg.model.kind,
        &ds.split,
        Some(&ds.hierarchy),
        &cfg.train_config(),
        &cfg.grid,
    )?;
    start(cfg, out)?;
    write_json(&out.join(GRID_FILE), &result)?;
    let best = cfg.clone().with_tuned(&result.best_config);
    write_text(&out.join(BEST_CONFIG_FILE), &best.to_json())?;
    if tsv {
        write_text(&out.join("grid.tsv"), &result.to_tsv())?;
    }
    Ok(result)
}

/// Reads a checkpoint, reporting a missing file as an IO error on its path.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found"),
        ));
    }
    load_checkpoint(path)
}

/// Cold-start HR@k / PR@k of a checkpoint, plus the clustering report when
/// enabled and the model has item embeddings.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoint: &Path,
    out: &Path,
    tsv: bool,
) -> Result<(EvalReport, Option<ClusterReport>)> {
    let ckpt = read_checkpoint(checkpoint)?;
    let ds = load_dataset(cfg)?;
    let mut report = evaluate_cold(&ckpt.model, &ds.split, &cfg.eval.ks, cfg.eval.candidates)?;
    report.seed = cfg.seed;
    report.config = serde_json::from_str(&ckpt.config_json).unwrap_or(serde_json::Value::Null);
    let clusters = match (cfg.eval.clusters, ckpt.model.item_embeddings()) {
        (true, Some(e)) if !ds.levels.is_empty() => Some(cluster_report(&e, &ds.levels, cfg.seed)?),
        _ => None,
    };
    start(cfg, out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    if tsv {
        write_text(&out.join("report.tsv"), &report.to_tsv())?;
    }
    if let Some(c) = &clusters {
        write_json(&out.join(CLUSTERS_FILE), c)?;
        if tsv {
            write_text(&out.join("clusters.tsv"), &c.to_tsv())?;
        }
    }
    Ok((report, clusters))
}

/// MF-vs-HGE epoch timing per embedding size.
pub fn cmd_benchmark(cfg: &RunConfig, out: &Path, tsv: bool) -> Result<TimingReport> {
    let ds = load_dataset(cfg)?;
    let report = cfg.benchmark.run(&ds.split, &ds.levels, &cfg.train_config())?;
    start(cfg, out)?;
    write_json(&out.join(TIMING_FILE), &report)?;
    if tsv {
        write_text(&out.join("timing.tsv"), &report.to_tsv())?;
    }
    Ok(report)
}

/// Writes the final item embeddings of a checkpoint, one row per item with
/// its category path.
pub fn cmd_export(cfg: &RunConfig, checkpoint: &Path, path: &Path) -> Result<()> {
    let ckpt = read_checkpoint(checkpoint)?;
    let ds = load_dataset(cfg)?;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    export_embeddings(&ckpt.model, &ds.split.items, Some(&ds.hierarchy), path)
}
