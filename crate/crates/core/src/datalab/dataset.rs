use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// Whether an instance (or a whole co-attack group) was used for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Membership {
    Member,
    Nonmember,
}

impl Membership {
    pub fn is_member(self) -> bool {
        self == Membership::Member
    }

    pub fn flipped(self) -> Self {
        match self {
            Membership::Member => Membership::Nonmember,
            Membership::Nonmember => Membership::Member,
        }
    }
}

impl fmt::Display for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Membership::Member => "member",
            Membership::Nonmember => "nonmember",
        })
    }
}

/// Rows of features in `[0,1]^d` with unique ids. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    dim: usize,
    ids: Vec<u64>,
    contributors: Option<Vec<u32>>,
    classes: Option<Vec<u8>>,
    index: HashMap<u64, usize>,
}

impl Dataset {
    /// Builds a dataset with ids `0..rows.len()`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len() as u64).collect();
        Self::with_ids(rows, ids)
    }

    pub fn with_ids(rows: Vec<Vec<f64>>, ids: Vec<u64>) -> Result<Self> {
        if rows.len() != ids.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} ids",
                rows.len(),
                ids.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has value {v} outside [0,1]"
                )));
            }
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate id {id}")));
            }
        }
        Ok(Dataset {
            rows,
            dim,
            ids,
            contributors: None,
            classes: None,
            index,
        })
    }

    pub fn with_contributors(mut self, contributors: Vec<u32>) -> Result<Self> {
        if contributors.len() != self.rows.len() {
            return Err(Error::InvalidArgument("one contributor per row required".into()));
        }
        self.contributors = Some(contributors);
        Ok(self)
    }

    pub fn with_classes(mut self, classes: Vec<u8>) -> Result<Self> {
        if classes.len() != self.rows.len() {
            return Err(Error::InvalidArgument("one class label per row required".into()));
        }
        self.classes = Some(classes);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn contributors(&self) -> Option<&[u32]> {
        self.contributors.as_deref()
    }

    pub fn classes(&self) -> Option<&[u8]> {
        self.classes.as_deref()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, id: u64) -> Option<&[f64]> {
        self.position(id).map(|i| self.rows[i].as_slice())
    }

    /// Feature rows for `ids`, in the given order.
    pub fn select(&self, ids: &[u64]) -> Result<Vec<Vec<f64>>> {
        ids.iter()
            .map(|&id| {
                self.get(id)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown id {id}")))
            })
            .collect()
    }

    /// CSV with an `id` column followed by `f0..f{d-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "id")?;
        for j in 0..self.dim {
            write!(w, ",f{j}")?;
        }
        writeln!(w)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            write!(w, "{id}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Dataset::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).is_ok());
        assert!(Dataset::new(vec![vec![0.0, 1.5]]).is_err());
        assert!(Dataset::new(vec![vec![0.0, f64::NAN]]).is_err());
        assert!(Dataset::new(vec![vec![0.0], vec![0.0, 0.0]]).is_err());
        assert!(Dataset::with_ids(vec![vec![0.1], vec![0.2]], vec![4, 4]).is_err());
    }

    #[test]
    fn csv_has_id_column() {
        let ds = Dataset::with_ids(vec![vec![0.0, 1.0], vec![0.25, 0.5]], vec![7, 9]).unwrap();
        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "id,f0,f1\n7,0,1\n9,0.25,0.5\n");
        assert_eq!(ds.get(9), Some(&[0.25, 0.5][..]));
        assert!(ds.select(&[1]).is_err());
    }
}
