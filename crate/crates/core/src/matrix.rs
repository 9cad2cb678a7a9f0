use std::sync::Arc;

use crate::corpus::FieldId;

/// Entity x field matrix stored as one sorted sparse row per entity.
///
/// Rows are indexed by the entity list of the corpus the matrix was derived
/// from; that list is shared (`Arc`) between every matrix built off the same
/// corpus so alignment checks are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows<T> {
    entities: Arc<Vec<String>>,
    fields: Arc<Vec<FieldId>>,
    rows: Vec<Vec<(u32, T)>>,
}

impl<T: Copy + Default + PartialEq> SparseRows<T> {
    pub fn empty(entities: Arc<Vec<String>>, fields: Arc<Vec<FieldId>>) -> Self {
        let rows = vec![Vec::new(); entities.len()];
        Self {
            entities,
            fields,
            rows,
        }
    }

    /// `rows[i]` must be sorted by column with no duplicate columns.
    pub fn from_rows(
        entities: Arc<Vec<String>>,
        fields: Arc<Vec<FieldId>>,
        rows: Vec<Vec<(u32, T)>>,
    ) -> Self {
        debug_assert_eq!(entities.len(), rows.len());
        debug_assert!(rows.iter().all(|r| r.windows(2).all(|w| w[0].0 < w[1].0)));
        Self {
            entities,
            fields,
            rows,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.rows.len()
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn entities(&self) -> &Arc<Vec<String>> {
        &self.entities
    }

    pub fn fields(&self) -> &Arc<Vec<FieldId>> {
        &self.fields
    }

    pub fn row(&self, entity: usize) -> &[(u32, T)] {
        &self.rows[entity]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(u32, T)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn get(&self, entity: usize, field: usize) -> T {
        let row = &self.rows[entity];
        match row.binary_search_by_key(&(field as u32), |(c, _)| *c) {
            Ok(i) => row[i].1,
            Err(_) => T::default(),
        }
    }

    pub fn dense_row(&self, entity: usize) -> Vec<T> {
        let mut out = vec![T::default(); self.n_fields()];
        for &(c, v) in &self.rows[entity] {
            out[c as usize] = v;
        }
        out
    }

    /// Number of stored (non-default) entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Same entity list and field list as `other`.
    pub fn aligned_with<U>(&self, other: &SparseRows<U>) -> bool {
        (Arc::ptr_eq(&self.entities, &other.entities) || self.entities == other.entities)
            && (Arc::ptr_eq(&self.fields, &other.fields) || self.fields == other.fields)
    }

    pub fn map<U, F>(&self, mut f: F) -> SparseRows<U>
    where
        U: Copy + Default + PartialEq,
        F: FnMut(T) -> U,
    {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&(c, v)| (c, f(v)))
                    .filter(|(_, v)| *v != U::default())
                    .collect()
            })
            .collect();
        SparseRows {
            entities: Arc::clone(&self.entities),
            fields: Arc::clone(&self.fields),
            rows,
        }
    }

    /// Iterates `(entity, field, value)` over stored entries in row order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(e, r)| r.iter().map(move |&(c, v)| (e, c as usize, v)))
    }
}
