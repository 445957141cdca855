use crate::error::{Error, Result};

/// Learnable per-traversal latent rows `z_j`, kept in registration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AppearanceTable {
    dim: usize,
    ids: Vec<u32>,
    pub rows: Vec<f32>,
    /// Row used for traversal ids that were never registered.
    pub default_id: Option<u32>,
}

impl AppearanceTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Adds (or overwrites) the row for `j`.
    pub fn register(&mut self, j: u32, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DecoderInputShape {
                expected: self.dim,
                got: row.len(),
            });
        }
        match self.index_of(j) {
            Some(i) => self.rows[i * self.dim..(i + 1) * self.dim].copy_from_slice(row),
            None => {
                self.ids.push(j);
                self.rows.extend_from_slice(row);
            }
        }
        Ok(())
    }

    pub fn index_of(&self, j: u32) -> Option<usize> {
        self.ids.iter().position(|&id| id == j)
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.rows[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f32] {
        &mut self.rows[index * self.dim..(index + 1) * self.dim]
    }

    pub fn embed(&self, j: u32) -> Result<&[f32]> {
        self.index_of(j)
            .map(|i| self.row(i))
            .ok_or(Error::UnknownTraversal(j))
    }

    pub fn embed_or_default(&self, j: u32) -> Result<&[f32]> {
        match (self.index_of(j), self.default_id) {
            (Some(i), _) => Ok(self.row(i)),
            (None, Some(d)) => self.embed(d),
            (None, None) => Err(Error::UnknownTraversal(j)),
        }
    }

    /// Componentwise mean of all rows.
    pub fn mean_row(&self) -> Result<Vec<f32>> {
        if self.is_empty() {
            return Err(Error::EmptyAppearanceTable);
        }
        let mut acc = vec![0.0f64; self.dim];
        for i in 0..self.len() {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += *v as f64;
            }
        }
        Ok(acc.iter().map(|a| (a / self.len() as f64) as f32).collect())
    }

    pub(crate) fn from_parts(dim: usize, ids: Vec<u32>, rows: Vec<f32>, default_id: Option<u32>) -> Result<Self> {
        if rows.len() != ids.len() * dim {
            return Err(Error::InvalidScene("appearance rows".into()));
        }
        for (k, id) in ids.iter().enumerate() {
            if ids[..k].contains(id) {
                return Err(Error::DuplicateTraversal(*id));
            }
        }
        if let Some(d) = default_id {
            if !ids.contains(&d) {
                return Err(Error::UnknownTraversal(d));
            }
        }
        Ok(Self {
            dim,
            ids,
            rows,
            default_id,
        })
    }
}

/// `z_j = Emb(j)`: a pure lookup of the stored row.
pub fn embed_traversal(table: &AppearanceTable, j: u32) -> Result<&[f32]> {
    table.embed(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_then_embed() {
        let mut t = AppearanceTable::new(2);
        t.register(3, &[0.5, -0.5]).unwrap();
        assert_eq!(embed_traversal(&t, 3).unwrap(), &[0.5, -0.5]);
        assert_eq!(embed_traversal(&t, 3).unwrap(), embed_traversal(&t, 3).unwrap());
    }

    #[test]
    fn unknown_id_errors_without_default() {
        let mut t = AppearanceTable::new(2);
        t.register(3, &[0.5, -0.5]).unwrap();
        let err = embed_traversal(&t, 99).unwrap_err();
        assert!(err.to_string().contains("unknown traversal id"));
        t.default_id = Some(3);
        assert_eq!(t.embed_or_default(99).unwrap(), &[0.5, -0.5]);
    }

    #[test]
    fn mean_of_empty_table_errors() {
        let t = AppearanceTable::new(4);
        assert!(t.mean_row().unwrap_err().to_string().contains("empty appearance table"));
    }
}
