//! Sparse array geometry: index sets, selection operators, difference
//! co-arrays, and the Cantor array family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// A strictly increasing set of indices inside an ambient dimension.
///
/// Serializes as `{"indices": [...], "ambient": n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawIndexSet", into = "RawIndexSet")]
pub struct IndexSet {
    indices: Vec<usize>,
    ambient: usize,
}

#[derive(Serialize, Deserialize)]
struct RawIndexSet {
    indices: Vec<usize>,
    ambient: usize,
}

impl TryFrom<RawIndexSet> for IndexSet {
    type Error = Error;
    fn try_from(raw: RawIndexSet) -> Result<Self> {
        IndexSet::new(raw.indices, raw.ambient)
    }
}

impl From<IndexSet> for RawIndexSet {
    fn from(set: IndexSet) -> Self {
        RawIndexSet { indices: set.indices, ambient: set.ambient }
    }
}

impl IndexSet {
    /// Sorts and deduplicates; every index must lie below `ambient`.
    pub fn new(mut indices: Vec<usize>, ambient: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= ambient) {
            return Err(Error::IndexOutOfRange { index: bad, ambient });
        }
        Ok(Self { indices, ambient })
    }

    pub fn full(ambient: usize) -> Self {
        Self { indices: (0..ambient).collect(), ambient }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Position of `index` within the set, if present.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    pub fn max(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.ambient
    }

    pub fn complement(&self) -> Self {
        let indices = (0..self.ambient).filter(|&i| !self.contains(i)).collect();
        Self { indices, ambient: self.ambient }
    }

    pub fn union(&self, other: &IndexSet) -> Result<Self> {
        if self.ambient != other.ambient {
            return Err(Error::ShapeMismatch(format!(
                "union of index sets with ambients {} and {}",
                self.ambient, other.ambient
            )));
        }
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        Self::new(indices, self.ambient)
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Nonnegative half of the difference co-array: all values `a - b` with
    /// `a >= b` drawn from the set, in the same ambient dimension.
    pub fn difference_set(&self) -> Self {
        let mut mask = vec![false; self.ambient];
        for (k, &a) in self.indices.iter().enumerate() {
            for &b in &self.indices[..=k] {
                mask[a - b] = true;
            }
        }
        let indices = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &hit)| hit.then_some(i))
            .collect();
        Self { indices, ambient: self.ambient }
    }

    /// Whether the difference co-array covers every lag `0..ambient-1`.
    pub fn is_complete(&self) -> bool {
        self.difference_set().len() == self.ambient
    }

    pub fn selection(&self) -> SelectionOperator {
        SelectionOperator { set: self.clone() }
    }
}

/// The row-selection operator `P` of an index set: `select` extracts the
/// chosen coordinates, `embed` is its adjoint `P^H` (scatter, zero-fill).
#[derive(Debug, Clone)]
pub struct SelectionOperator {
    set: IndexSet,
}

impl SelectionOperator {
    pub fn set(&self) -> &IndexSet {
        &self.set
    }

    pub fn select(&self, x: &CVec) -> Result<CVec> {
        if x.len() != self.set.ambient {
            return Err(Error::ShapeMismatch(format!(
                "select: vector length {} vs ambient {}",
                x.len(),
                self.set.ambient
            )));
        }
        Ok(CVec::from_fn(self.set.len(), |k, _| x[self.set.indices[k]]))
    }

    pub fn embed(&self, x: &CVec) -> Result<CVec> {
        if x.len() != self.set.len() {
            return Err(Error::ShapeMismatch(format!(
                "embed: vector length {} vs set size {}",
                x.len(),
                self.set.len()
            )));
        }
        let mut out = CVec::zeros(self.set.ambient);
        for (k, &i) in self.set.indices.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }

    /// Principal submatrix `P H P^H` on the selected rows and columns.
    pub fn gather_principal(&self, h: &CMat) -> Result<CMat> {
        let n = self.set.ambient;
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "gather: matrix is {}x{}, ambient {}",
                h.nrows(),
                h.ncols(),
                n
            )));
        }
        let idx = &self.set.indices;
        Ok(CMat::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]))
    }

    /// Adjoint of `gather_principal`: scatter a small matrix back to the
    /// ambient dimension, zero elsewhere.
    pub fn embed_principal(&self, h: &CMat) -> Result<CMat> {
        let m = self.set.len();
        if h.nrows() != m || h.ncols() != m {
            return Err(Error::ShapeMismatch(format!(
                "embed: matrix is {}x{}, set size {}",
                h.nrows(),
                h.ncols(),
                m
            )));
        }
        let mut out = CMat::zeros(self.set.ambient, self.set.ambient);
        for (a, &i) in self.set.indices.iter().enumerate() {
            for (b, &j) in self.set.indices.iter().enumerate() {
                out[(i, j)] = h[(a, b)];
            }
        }
        Ok(out)
    }
}

/// Cantor array of the given order inside its natural ambient dimension
/// `3^(order-1) + 1`: order 1 is `{0, 1}`, and each further order appends a
/// copy of the previous one shifted by `2 * 3^(order-2)`.
pub fn cantor_array(order: u32) -> Result<IndexSet> {
    if order == 0 {
        return Err(Error::Schema("cantor order must be at least 1".into()));
    }
    let ambient = 3usize
        .checked_pow(order - 1)
        .and_then(|p| p.checked_add(1))
        .ok_or(Error::CapacityOverflow(order))?;
    let mut indices: Vec<usize> = vec![0, 1];
    for k in 2..=order {
        let shift = 2 * 3usize.pow(k - 2);
        let moved: Vec<usize> = indices.iter().map(|&i| i + shift).collect();
        indices.extend(moved);
    }
    IndexSet::new(indices, ambient)
}

/// Hypothesis report for compressing the semidefinite constraint of a
/// recovery program to the rows of `i_set`.
#[derive(Debug, Clone, Serialize)]
pub struct CompressionReport {
    /// The compression set must contain index 0 so the trace term survives.
    pub contains_zero: bool,
    /// Lags of the compression co-array that the observation set misses.
    pub boundary_missing: Vec<usize>,
    /// Strictly fewer sources than compression rows.
    pub sources_below_rows: bool,
    pub num_sources: usize,
    pub num_rows: usize,
}

impl CompressionReport {
    pub fn all_pass(&self) -> bool {
        self.contains_zero && self.boundary_missing.is_empty() && self.sources_below_rows
    }
}

/// Check the exact-recovery hypotheses: `0` in the compression set, its
/// difference co-array inside the observation set, and `num_sources`
/// strictly below the number of compression rows.
pub fn validate_compression(
    i_set: &IndexSet,
    omega: &IndexSet,
    num_sources: usize,
) -> CompressionReport {
    let boundary = i_set.difference_set();
    let boundary_missing = boundary
        .indices()
        .iter()
        .copied()
        .filter(|&d| !omega.contains(d))
        .collect();
    CompressionReport {
        contains_zero: i_set.contains(0),
        boundary_missing,
        sources_below_rows: num_sources < i_set.len(),
        num_sources,
        num_rows: i_set.len(),
    }
}
