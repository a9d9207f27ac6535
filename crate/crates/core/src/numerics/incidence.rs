use crate::error::{Error, Result};

/// Bipartite item-category membership for one hierarchy level.
///
/// Two items are adjacent in the induced item-item graph exactly when they
/// share a category, so after sorting items by category that graph is block
/// diagonal. Nothing quadratic in the item count is ever stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseIncidence {
    category_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl SparseIncidence {
    /// Builds the incidence from each item's category index.
    ///
    /// Every category in `0..n_categories` must have at least one member.
    pub fn from_assignment(category_of: Vec<usize>, n_categories: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); n_categories];
        for (item, &c) in category_of.iter().enumerate() {
            if c >= n_categories {
                return Err(Error::Data(format!(
                    "item {item} assigned to category {c}, only {n_categories} exist"
                )));
            }
            members[c].push(item);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::Data(format!("category {empty} has no items")));
        }
        Ok(Self {
            category_of,
            members,
        })
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.category_of.len()
    }

    #[inline]
    pub fn n_categories(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn category_of(&self, item: usize) -> usize {
        self.category_of[item]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.category_of
    }

    /// Sorted member items of `category`.
    #[inline]
    pub fn members(&self, category: usize) -> &[usize] {
        &self.members[category]
    }

    pub fn categories(&self) -> impl Iterator<Item = &[usize]> {
        self.members.iter().map(Vec::as_slice)
    }

    /// Whether items `a` and `b` are adjacent in the induced item graph.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.category_of[a] == self.category_of[b]
    }
}
