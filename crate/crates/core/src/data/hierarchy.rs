use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::index::IdIndex;
use super::log::csv_io;
use crate::error::{Error, Result};
use crate::numerics::SparseIncidence;

/// Label given to categories merged by [`merge_small_categories`].
pub const OTHER_CATEGORY: &str = "__OTHER__";

/// Multilevel item taxonomy: one category label per item per level.
///
/// Level 1 is the finest (closest to the items); the last level is the
/// coarsest. Levels are addressed 1-based throughout the public API.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hierarchy {
    levels: Vec<BTreeMap<String, String>>,
}

impl Hierarchy {
    pub fn new(levels: Vec<BTreeMap<String, String>>) -> Self {
        Self { levels }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Item to category map at `level` (1-based).
    pub fn level(&self, level: usize) -> Result<&BTreeMap<String, String>> {
        check_level(level, self.n_levels())?;
        Ok(&self.levels[level - 1])
    }

    pub fn category(&self, level: usize, item: &str) -> Option<&str> {
        self.levels
            .get(level.checked_sub(1)?)?
            .get(item)
            .map(String::as_str)
    }

    /// Every item with an assignment at every level.
    pub fn items(&self) -> BTreeSet<&str> {
        let Some(first) = self.levels.first() else {
            return BTreeSet::new();
        };
        first
            .keys()
            .filter(|id| self.levels.iter().all(|l| l.contains_key(id.as_str())))
            .map(String::as_str)
            .collect()
    }

    /// Drops items not in `keep`.
    pub fn restrict<'a>(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .map(|l| {
                    l.iter()
                        .filter(|(k, _)| keep(k))
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect()
                })
                .collect(),
        }
    }

    /// Members per category label at `level`.
    pub fn category_sizes(&self, level: usize) -> Result<BTreeMap<&str, usize>> {
        let mut sizes = BTreeMap::new();
        for cat in self.level(level)?.values() {
            *sizes.entry(cat.as_str()).or_insert(0) += 1;
        }
        Ok(sizes)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = vec!["item_id".to_string()];
        header.extend((1..=self.n_levels()).map(|l| format!("level_{l}")));
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for item in self.items() {
            let mut row = vec![item];
            row.extend(self.levels.iter().map(|l| l[item].as_str()));
            w.write_record(&row).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_level(level: usize, n_levels: usize) -> Result<()> {
    if level == 0 || level > n_levels {
        Err(Error::Parameter(format!(
            "level {level} out of range 1..={n_levels}"
        )))
    } else {
        Ok(())
    }
}

/// Reads a hierarchy CSV with header `item_id,level_1,...,level_L`.
pub fn load_hierarchy(path: &Path) -> Result<Hierarchy> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    if headers.get(0) != Some("item_id") {
        return Err(Error::Data(format!(
            "{}: first column must be `item_id`",
            path.display()
        )));
    }
    let n_levels = headers.len() - 1;
    for (l, h) in headers.iter().skip(1).enumerate() {
        if h != format!("level_{}", l + 1) {
            return Err(Error::Data(format!(
                "{}: expected column `level_{}`, found `{h}`",
                path.display(),
                l + 1
            )));
        }
    }
    if n_levels == 0 {
        return Err(Error::Data(format!("{}: no level columns", path.display())));
    }
    let mut levels = vec![BTreeMap::new(); n_levels];
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let item = rec[0].to_string();
        for (l, level) in levels.iter_mut().enumerate() {
            let cat = &rec[l + 1];
            if cat.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("item `{item}` has an empty level_{} category", l + 1),
                });
            }
            level.insert(item.clone(), cat.to_string());
        }
    }
    Ok(Hierarchy { levels })
}

/// Relabels every category at `level` with fewer than `min_items` members to
/// [`OTHER_CATEGORY`].
pub fn merge_small_categories(h: &Hierarchy, level: usize, min_items: usize) -> Result<Hierarchy> {
    let sizes = h.category_sizes(level)?;
    let small: BTreeSet<String> = sizes
        .into_iter()
        .filter(|&(_, n)| n < min_items)
        .map(|(c, _)| c.to_string())
        .collect();
    let mut out = h.clone();
    for cat in out.levels[level - 1].values_mut() {
        if small.contains(cat) {
            *cat = OTHER_CATEGORY.to_string();
        }
    }
    Ok(out)
}

/// Per-level incidence over the indexed items, together with the category
/// labels in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelIncidence {
    pub incidence: SparseIncidence,
    pub labels: Vec<String>,
}

/// Builds the incidence at `level` over the items of `items`.
///
/// Categories are numbered in sorted label order.
pub fn build_incidence(h: &Hierarchy, level: usize, items: &IdIndex) -> Result<LevelIncidence> {
    let map = h.level(level)?;
    let mut cats = Vec::with_capacity(items.len());
    for id in items.ids() {
        let c = map.get(id.as_str()).ok_or_else(|| {
            Error::Data(format!("item `{id}` has no category at level {level}"))
        })?;
        cats.push(c.as_str());
    }
    let labels: Vec<String> = cats
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let lookup: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let assignment = cats.iter().map(|c| lookup[c]).collect();
    Ok(LevelIncidence {
        incidence: SparseIncidence::from_assignment(assignment, labels.len())?,
        labels,
    })
}

/// [`build_incidence`] for every level, finest first.
pub fn build_all_incidences(h: &Hierarchy, items: &IdIndex) -> Result<Vec<LevelIncidence>> {
    (1..=h.n_levels())
        .map(|l| build_incidence(h, l, items))
        .collect()
}
