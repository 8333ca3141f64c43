use std::sync::Arc;

/// Row-compressed sparsity structure. Column indices are sorted and unique
/// within every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (sorted and deduplicated here).
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<usize>>) -> Pattern {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Pattern { nrows: rows.len(), ncols, row_ptr, col_idx }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage position of entry `(i, j)`, if it is structurally present.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct SparseMat {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMat {
    pub fn zeros_with_pattern(pattern: Arc<Pattern>) -> SparseMat {
        let values = vec![0.0; pattern.nnz()];
        SparseMat { pattern, values }
    }

    pub fn from_parts(pattern: Arc<Pattern>, values: Vec<f64>) -> SparseMat {
        assert_eq!(pattern.nnz(), values.len());
        SparseMat { pattern, values }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> SparseMat {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push(j);
        }
        let pattern = Arc::new(Pattern::from_rows(ncols, rows));
        let mut mat = SparseMat::zeros_with_pattern(pattern);
        for &(i, j, v) in triplets {
            mat.add_at(i, j, v);
        }
        mat
    }

    pub fn identity(n: usize) -> SparseMat {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMat::from_triplets(n, n, &trip)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> SparseMat {
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut trip = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        SparseMat::from_triplets(rows.len(), ncols, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entries of row `i` as (column, value) pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
        self.pattern.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` to a structurally present entry.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pattern.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in pattern"));
        self.values[p] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in rp[i]..rp[i + 1] {
                s += self.values[k] * x[ci[k]];
            }
            *yi = s;
        }
    }

    /// `y^T A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.nrows()).map(|i| y[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> SparseMat {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows() {
            trip.extend(self.row(i).map(|(j, v)| (j, i, v)));
        }
        SparseMat::from_triplets(self.ncols(), self.nrows(), &trip)
    }

    pub fn scaled(&self, s: f64) -> SparseMat {
        SparseMat { pattern: self.pattern.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `sum_k c_k A_k`. Matrices sharing one pattern are combined entrywise,
    /// otherwise the union pattern is formed.
    pub fn linear_combination(terms: &[(f64, &SparseMat)]) -> SparseMat {
        let (_, first) = terms[0];
        if terms.iter().all(|(_, m)| Arc::ptr_eq(&m.pattern, &first.pattern) || m.pattern == first.pattern) {
            let mut values = vec![0.0; first.nnz()];
            for (c, m) in terms {
                for (acc, v) in values.iter_mut().zip(&m.values) {
                    *acc += c * v;
                }
            }
            return SparseMat { pattern: first.pattern.clone(), values };
        }
        let mut trip = Vec::new();
        for (c, m) in terms {
            assert_eq!((m.nrows(), m.ncols()), (first.nrows(), first.ncols()));
            for i in 0..m.nrows() {
                trip.extend(m.row(i).map(|(j, v)| (i, j, c * v)));
            }
        }
        SparseMat::from_triplets(first.nrows(), first.ncols(), &trip)
    }

    /// Assembles a block matrix. `None` blocks are structurally zero; every
    /// block row and block column must contain at least one block.
    pub fn from_blocks(blocks: &[Vec<Option<&SparseMat>>]) -> SparseMat {
        let nbr = blocks.len();
        let nbc = blocks[0].len();
        let row_sizes: Vec<usize> =
            (0..nbr).map(|r| blocks[r].iter().flatten().next().expect("empty block row").nrows()).collect();
        let col_sizes: Vec<usize> =
            (0..nbc).map(|c| blocks.iter().filter_map(|r| r[c]).next().expect("empty block column").ncols()).collect();
        let col_off: Vec<usize> = col_sizes
            .iter()
            .scan(0, |s, &n| {
                let o = *s;
                *s += n;
                Some(o)
            })
            .collect();
        let ncols: usize = col_sizes.iter().sum();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (br, &nr) in row_sizes.iter().enumerate() {
            for i in 0..nr {
                for (bc, blk) in blocks[br].iter().enumerate() {
                    if let Some(m) = blk {
                        assert_eq!((m.nrows(), m.ncols()), (nr, col_sizes[bc]), "block ({br},{bc}) size mismatch");
                        for (j, v) in m.row(i) {
                            col_idx.push(col_off[bc] + j);
                            values.push(v);
                        }
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let nrows = row_ptr.len() - 1;
        SparseMat { pattern: Arc::new(Pattern { nrows, ncols, row_ptr, col_idx }), values }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows().min(self.ncols())).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols()]; self.nrows()];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest |A_ij - A_ji| relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows() {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMat::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)]);
        assert_eq!(m.pattern().row(0), &[0, 2]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![6.5, -2.0]);
    }

    #[test]
    fn blocks_and_transpose() {
        let a = SparseMat::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let d = SparseMat::from_dense(&[vec![4.0, 5.0]]);
        let dt = d.transpose();
        let k = SparseMat::from_blocks(&[vec![Some(&a), Some(&dt)], vec![Some(&d), None]]);
        assert_eq!(k.to_dense(), vec![vec![1.0, 2.0, 4.0], vec![0.0, 3.0, 5.0], vec![4.0, 5.0, 0.0]]);
    }

    #[test]
    fn combination_over_distinct_patterns() {
        let a = SparseMat::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = SparseMat::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let c = SparseMat::linear_combination(&[(2.0, &a), (-1.0, &b)]);
        assert_eq!(c.to_dense(), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert!(c.asymmetry() == 0.0);
    }
}
