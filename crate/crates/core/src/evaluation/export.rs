//! Item embeddings as TSV for external projection tools.

use std::io::Write;
use std::path::Path;

use crate::data::{Hierarchy, IdIndex};
use crate::error::{Error, Result};
use crate::models::Model;

/// Writes `item_id, level_1.., e_1..` with six significant digits per value.
pub fn export_embeddings(model: &Model, items: &IdIndex, hierarchy: Option<&Hierarchy>, path: &Path) -> Result<()> {
    let e = model
        .item_embeddings()
        .ok_or_else(|| Error::Evaluation(format!("model `{}` has no item embeddings", model.kind())))?;
    if e.rows() != items.len() {
        return Err(Error::Shape(format!(
            "{} embedding rows for {} item ids",
            e.rows(),
            items.len()
        )));
    }
    let n_levels = hierarchy.map_or(0, Hierarchy::n_levels);
    let mut out = String::from("item_id");
    for l in 1..=n_levels {
        out.push_str(&format!("\tlevel_{l}"));
    }
    for k in 1..=e.cols() {
        out.push_str(&format!("\te_{k}"));
    }
    out.push('\n');
    for (i, id) in items.ids().iter().enumerate() {
        out.push_str(id);
        if let Some(h) = hierarchy {
            for l in 1..=n_levels {
                let c = h.category(l, id).ok_or_else(|| {
                    Error::Data(format!("item `{id}` has no category at level {l}"))
                })?;
                out.push('\t');
                out.push_str(c);
            }
        }
        for x in e.row(i) {
            out.push_str(&format!("\t{x:.5e}"));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|err| Error::io(path, err))?;
    f.write_all(out.as_bytes()).map_err(|err| Error::io(path, err))
}
