//! Sparse LU factorization of the simplex basis.
//!
//! Left-looking (Gilbert-Peierls) elimination: basis columns are processed in
//! order of increasing density, each is solved against the `L` built so far and
//! a pivot row is chosen by threshold partial pivoting with a static row-count
//! tie-break. Basis changes between refactorizations are kept as a
//! product-form eta file.
//!
//! Two index spaces appear throughout: *rows* of the constraint matrix and
//! *slots* of the basis (position of a basic variable in the basis heads).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;
const DENSE_ROW: usize = 32;

/// Returned when some basis columns could not be pivoted. Each slot in `slots`
/// should be replaced by the logical column of the matching entry of `rows`.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub slots: Vec<usize>,
    pub rows: Vec<usize>,
}

struct Eta {
    slot: usize,
    pivot: f64,
    start: usize,
    end: usize,
}

pub(crate) struct LuFactors {
    m: usize,
    /// Pivot row chosen at each elimination step.
    pivot_row: Vec<usize>,
    /// Basis slot eliminated at each step.
    step_slot: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// Off-diagonal `U` entries by column; indices are elimination steps.
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
    scratch: Vec<f64>,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose column for slot `k` is `columns[k]`
    /// given as `(row, value)` pairs.
    pub fn factorize(m: usize, columns: &[&[(usize, f64)]]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut row_count = vec![0usize; m];
        for col in columns {
            for &(i, _) in col.iter() {
                row_count[i] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&k| (columns[k].len(), k));

        let mut lu = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            step_slot: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
            eta_idx: Vec::new(),
            eta_val: Vec::new(),
            scratch: vec![0.0; m],
        };

        let mut step_of_row = vec![usize::MAX; m];
        let mut work = vec![0.0f64; m];
        let mut mark = vec![false; m];
        let mut nz: Vec<usize> = Vec::new();
        let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
        let mut failed_slots = Vec::new();

        // Columns whose only acceptable pivots lie in dense rows are put off
        // to a second pass so those rows are eliminated last and do not
        // spread fill through the rest of the factors.
        let mut deferred = Vec::new();
        for pass in 0..2 {
            let queue = if pass == 0 {
                std::mem::take(&mut order)
            } else {
                std::mem::take(&mut deferred)
            };
            for &slot in &queue {
                for &(i, v) in columns[slot].iter() {
                    if !mark[i] {
                        mark[i] = true;
                        nz.push(i);
                        if step_of_row[i] != usize::MAX {
                            heap.push(Reverse(step_of_row[i]));
                        }
                    }
                    work[i] += v;
                }
                while let Some(Reverse(j)) = heap.pop() {
                    let xj = work[lu.pivot_row[j]];
                    if xj == 0.0 {
                        continue;
                    }
                    for p in lu.l_start[j]..lu.l_start[j + 1] {
                        let i = lu.l_idx[p];
                        if !mark[i] {
                            mark[i] = true;
                            nz.push(i);
                            if step_of_row[i] != usize::MAX {
                                heap.push(Reverse(step_of_row[i]));
                            }
                        }
                        work[i] -= lu.l_val[p] * xj;
                    }
                }

                let mut max_abs: f64 = 0.0;
                for &i in &nz {
                    if step_of_row[i] == usize::MAX {
                        max_abs = max_abs.max(work[i].abs());
                    }
                }
                if max_abs <= SINGULAR_TOL {
                    failed_slots.push(slot);
                    for &i in &nz {
                        work[i] = 0.0;
                        mark[i] = false;
                    }
                    nz.clear();
                    continue;
                }
                let mut best: Option<usize> = None;
                for &i in &nz {
                    if step_of_row[i] != usize::MAX || work[i].abs() < PIVOT_THRESHOLD * max_abs {
                        continue;
                    }
                    best = match best {
                        None => Some(i),
                        Some(b) => {
                            let key_i = (row_count[i], i);
                            let key_b = (row_count[b], b);
                            if key_i < key_b {
                                Some(i)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
                let piv = best.expect("pivot candidate exists above threshold");
                if pass == 0 && row_count[piv] > DENSE_ROW {
                    deferred.push(slot);
                    for &i in &nz {
                        work[i] = 0.0;
                        mark[i] = false;
                    }
                    nz.clear();
                    continue;
                }
                let step = lu.pivot_row.len();
                let pivot_val = work[piv];
                for &i in &nz {
                    let v = work[i];
                    if i == piv || v.abs() <= DROP_TOL {
                        continue;
                    }
                    let s = step_of_row[i];
                    if s != usize::MAX {
                        lu.u_idx.push(s);
                        lu.u_val.push(v);
                    } else {
                        lu.l_idx.push(i);
                        lu.l_val.push(v / pivot_val);
                    }
                }
                lu.u_start.push(lu.u_idx.len());
                lu.l_start.push(lu.l_idx.len());
                lu.u_diag.push(pivot_val);
                lu.pivot_row.push(piv);
                lu.step_slot.push(slot);
                step_of_row[piv] = step;
                for &i in &nz {
                    work[i] = 0.0;
                    mark[i] = false;
                }
                nz.clear();
            }
        }

        if !failed_slots.is_empty() {
            let rows: Vec<usize> = (0..m).filter(|&i| step_of_row[i] == usize::MAX).collect();
            debug_assert_eq!(rows.len(), failed_slots.len());
            return Err(Singular {
                slots: failed_slots,
                rows,
            });
        }
        Ok(lu)
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Solves `B z = b`. Input is indexed by row, output by slot.
    pub fn ftran(&mut self, b: &mut [f64]) {
        let m = self.m;
        for j in 0..m {
            let wj = b[self.pivot_row[j]];
            if wj != 0.0 {
                for p in self.l_start[j]..self.l_start[j + 1] {
                    b[self.l_idx[p]] -= self.l_val[p] * wj;
                }
            }
        }
        let w = &mut self.scratch;
        for k in 0..m {
            w[k] = b[self.pivot_row[k]];
        }
        for k in (0..m).rev() {
            let yk = w[k] / self.u_diag[k];
            w[k] = yk;
            if yk != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    w[self.u_idx[p]] -= self.u_val[p] * yk;
                }
            }
        }
        for k in 0..m {
            b[self.step_slot[k]] = w[k];
        }
        for e in &self.etas {
            let xr = b[e.slot] / e.pivot;
            b[e.slot] = xr;
            if xr != 0.0 {
                for p in e.start..e.end {
                    b[self.eta_idx[p]] -= self.eta_val[p] * xr;
                }
            }
        }
    }

    /// Solves `B^T y = c`. Input is indexed by slot, output by row.
    pub fn btran(&mut self, c: &mut [f64]) {
        let m = self.m;
        for e in self.etas.iter().rev() {
            let mut s = c[e.slot];
            for p in e.start..e.end {
                s -= self.eta_val[p] * c[self.eta_idx[p]];
            }
            c[e.slot] = s / e.pivot;
        }
        let v = &mut self.scratch;
        for k in 0..m {
            let mut s = c[self.step_slot[k]];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * v[self.u_idx[p]];
            }
            v[k] = s / self.u_diag[k];
        }
        for j in (0..m).rev() {
            let mut s = v[j];
            for p in self.l_start[j]..self.l_start[j + 1] {
                s -= self.l_val[p] * c[self.l_idx[p]];
            }
            c[self.pivot_row[j]] = s;
        }
    }

    /// Records that the basic variable in `slot` is replaced by a column whose
    /// FTRAN image is `alpha`.
    pub fn update(&mut self, slot: usize, alpha: &[f64]) {
        let start = self.eta_idx.len();
        for (i, &a) in alpha.iter().enumerate() {
            if i != slot && a.abs() > DROP_TOL {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.etas.push(Eta {
            slot,
            pivot: alpha[slot],
            start,
            end: self.eta_idx.len(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], z: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * z[k];
            }
        }
        out
    }

    fn dense_tmul(cols: &[Vec<(usize, f64)>], y: &[f64]) -> Vec<f64> {
        cols.iter()
            .map(|col| col.iter().map(|&(i, v)| v * y[i]).sum())
            .collect()
    }

    fn sample() -> Vec<Vec<(usize, f64)>> {
        vec![
            vec![(0, 4.0), (2, 1.0)],
            vec![(1, -1.0)],
            vec![(0, 2.0), (1, 3.0), (3, 1.0)],
            vec![(2, 5.0), (3, -2.0)],
        ]
    }

    #[test]
    fn ftran_btran_solve_the_factored_system() {
        let cols = sample();
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut lu = LuFactors::factorize(4, &refs).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let mut z = b.clone();
        lu.ftran(&mut z);
        let back = dense_mul(&cols, &z, 4);
        for i in 0..4 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let c = vec![0.3, 1.0, -4.0, 2.0];
        let mut y = c.clone();
        lu.btran(&mut y);
        let back = dense_tmul(&cols, &y);
        for k in 0..4 {
            assert!((back[k] - c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut cols = sample();
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut lu = LuFactors::factorize(4, &refs).unwrap();
        let new_col = vec![(1, 2.0), (2, 1.0), (3, 7.0)];
        let mut alpha = vec![0.0; 4];
        for &(i, v) in &new_col {
            alpha[i] = v;
        }
        lu.ftran(&mut alpha);
        lu.update(1, &alpha);
        cols[1] = new_col;
        let b = vec![0.0, 1.0, 2.0, -1.0];
        let mut z = b.clone();
        lu.ftran(&mut z);
        let back = dense_mul(&cols, &z, 4);
        for i in 0..4 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let c = vec![1.0, 1.0, 0.0, -3.0];
        let mut y = c.clone();
        lu.btran(&mut y);
        let back = dense_tmul(&cols, &y);
        for k in 0..4 {
            assert!((back[k] - c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_basis_reports_replaceable_slots() {
        let cols = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 2.0), (1, 2.0)],
            vec![(2, 1.0)],
        ];
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let err = LuFactors::factorize(3, &refs).err().unwrap();
        assert_eq!(err.slots.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
