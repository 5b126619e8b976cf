//! A small column store keyed by block-group id.
//!
//! Measures, profiles and trend summaries are joined into one [`Table`]
//! before modeling; missing or undefined values are `None`.

use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Default)]
pub struct Table {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    columns: BTreeMap<String, Vec<Option<f64>>>,
}

impl Table {
    pub fn new(ids: Vec<String>) -> Self {
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self { ids, index, columns: BTreeMap::new() }
    }

    /// Adds or replaces a column.
    ///
    /// # Panics
    /// If `values` does not have one entry per row.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.ids.len(), "column length must match row count");
        self.columns.insert(name.into(), values);
    }

    /// Adds a column from an id-keyed map; ids absent from the map get `None`.
    pub fn insert_map(&mut self, name: impl Into<String>, values: &BTreeMap<String, f64>) {
        let col = self.ids.iter().map(|id| values.get(id).copied()).collect();
        self.insert(name, col);
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn get(&self, id: &str, column: &str) -> Option<f64> {
        let row = self.row_of(id)?;
        self.columns.get(column)?[row]
    }

    /// Defined values of a column keyed by id.
    pub fn column_map(&self, name: &str) -> Option<BTreeMap<String, f64>> {
        let col = self.columns.get(name)?;
        Some(
            self.ids
                .iter()
                .zip(col)
                .filter_map(|(id, v)| v.map(|v| (id.clone(), v)))
                .collect(),
        )
    }
}
