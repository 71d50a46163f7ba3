//! Small dense integer matrices: products, skew normal form, kernels.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    /// `[[0, I], [-I, 0]]` of size `2g`.
    pub fn standard_symplectic(g: usize) -> Self {
        let mut m = Self::zeros(2 * g, 2 * g);
        for i in 0..g {
            m[(i, g + i)] = 1;
            m[(g + i, i)] = -1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn from_cols(cols: &[Vec<i64>]) -> Self {
        Self::from_rows(cols).transpose()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.checked_mul(o).expect("integer overflow in matrix product")
    }

    pub fn checked_mul(&self, o: &Self) -> Option<Self> {
        assert_eq!(self.cols, o.rows);
        let mut r = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                for j in 0..o.cols {
                    let p = a.checked_mul(o[(k, j)])?;
                    r.data[i * o.cols + j] = r.data[i * o.cols + j].checked_add(p)?;
                }
            }
        }
        Some(r)
    }

    pub fn mul_vec(&self, v: &[i64]) -> Vec<i64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn neg(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| -x).collect() }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.rows)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] as f64)
    }

    /// Determinant by fraction-free elimination.
    pub fn det(&self) -> i128 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a: Vec<Vec<i128>> =
            (0..n).map(|i| self.row(i).iter().map(|&x| x as i128).collect()).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k][k] == 0 {
                match (k + 1..n).find(|&i| a[i][k] != 0) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return 0,
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
                }
            }
            prev = a[k][k];
        }
        if n == 0 {
            1
        } else {
            sign * a[n - 1][n - 1]
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of reducing an integer skew form: rows of `basis` are the new vectors
/// (in the old coordinates); `invariants[i]` pairs `basis[2i]` with `basis[2i+1]`;
/// the remaining rows span the radical.
#[derive(Debug, Clone)]
pub struct SkewNormalForm {
    pub basis: IntMatrix,
    pub invariants: Vec<i64>,
}

/// Congruence reduction `P A Pᵀ = ⊕ [[0, d], [-d, 0]] ⊕ 0`.
pub fn skew_normal_form(form: &IntMatrix) -> SkewNormalForm {
    let n = form.rows;
    let mut a = form.clone();
    let mut p = IntMatrix::identity(n);

    // v_k <- v_k + c v_l
    fn add(a: &mut IntMatrix, p: &mut IntMatrix, k: usize, l: usize, c: i64) {
        let n = a.rows;
        for j in 0..n {
            let x = a[(l, j)];
            a[(k, j)] += c * x;
        }
        for i in 0..n {
            let x = a[(i, l)];
            a[(i, k)] += c * x;
        }
        for j in 0..p.cols {
            let x = p[(l, j)];
            p[(k, j)] += c * x;
        }
    }
    fn swap(a: &mut IntMatrix, p: &mut IntMatrix, k: usize, l: usize) {
        if k == l {
            return;
        }
        let n = a.rows;
        for j in 0..n {
            a.data.swap(k * n + j, l * n + j);
        }
        for i in 0..n {
            a.data.swap(i * n + k, i * n + l);
        }
        let c = p.cols;
        for j in 0..c {
            p.data.swap(k * c + j, l * c + j);
        }
    }
    fn negate(a: &mut IntMatrix, p: &mut IntMatrix, k: usize) {
        let n = a.rows;
        for j in 0..n {
            a[(k, j)] = -a[(k, j)];
            a[(j, k)] = -a[(j, k)];
        }
        for j in 0..p.cols {
            p[(k, j)] = -p[(k, j)];
        }
    }

    let mut invariants = Vec::new();
    let mut pos = 0;
    'outer: while pos + 1 < n {
        loop {
            let mut best: Option<(usize, usize, i64)> = None;
            for i in pos..n {
                for j in i + 1..n {
                    let x = a[(i, j)].abs();
                    if x != 0 && best.is_none_or(|b| x < b.2) {
                        best = Some((i, j, x));
                    }
                }
            }
            let Some((i, j, _)) = best else { break 'outer };
            swap(&mut a, &mut p, pos, i);
            let j = if j == pos { i } else { j };
            swap(&mut a, &mut p, pos + 1, j);
            if a[(pos, pos + 1)] < 0 {
                negate(&mut a, &mut p, pos + 1);
            }
            let d = a[(pos, pos + 1)];
            let mut clean = true;
            for k in pos + 2..n {
                let q = a[(pos, k)].div_euclid(d);
                if q != 0 {
                    add(&mut a, &mut p, k, pos + 1, -q);
                }
                if a[(pos, k)] != 0 {
                    clean = false;
                }
                let q = a[(pos + 1, k)].div_euclid(-d);
                if q != 0 {
                    add(&mut a, &mut p, k, pos, -q);
                }
                if a[(pos + 1, k)] != 0 {
                    clean = false;
                }
            }
            if clean {
                invariants.push(d);
                pos += 2;
                break;
            }
        }
    }
    SkewNormalForm { basis: p, invariants }
}

/// Integer basis (as columns) of the kernel of `m`, primitive in `Zⁿ`.
pub fn integer_kernel(m: &IntMatrix) -> IntMatrix {
    let (r, n) = (m.rows, m.cols);
    // column operations on [m; I]
    let mut a = m.clone();
    let mut u = IntMatrix::identity(n);
    let mut pivot_col = 0;
    for row in 0..r {
        if pivot_col >= n {
            break;
        }
        loop {
            let nz: Vec<usize> = (pivot_col..n).filter(|&j| a[(row, j)] != 0).collect();
            if nz.is_empty() {
                break;
            }
            let jmin = *nz.iter().min_by_key(|&&j| a[(row, j)].abs()).unwrap();
            swap_cols(&mut a, &mut u, pivot_col, jmin);
            let pv = a[(row, pivot_col)];
            let mut done = true;
            for j in pivot_col + 1..n {
                let q = a[(row, j)].div_euclid(pv);
                if q != 0 {
                    add_col(&mut a, &mut u, j, pivot_col, -q);
                }
                if a[(row, j)] != 0 {
                    done = false;
                }
            }
            if done {
                pivot_col += 1;
                break;
            }
        }
    }
    let cols: Vec<Vec<i64>> = (pivot_col..n).map(|j| u.col(j)).collect();
    if cols.is_empty() {
        return IntMatrix::zeros(n, 0);
    }
    IntMatrix::from_cols(&cols)
}

fn swap_cols(a: &mut IntMatrix, u: &mut IntMatrix, i: usize, j: usize) {
    if i == j {
        return;
    }
    for r in 0..a.rows {
        let c = a.cols;
        a.data.swap(r * c + i, r * c + j);
    }
    for r in 0..u.rows {
        let c = u.cols;
        u.data.swap(r * c + i, r * c + j);
    }
}

fn add_col(a: &mut IntMatrix, u: &mut IntMatrix, k: usize, l: usize, c: i64) {
    for r in 0..a.rows {
        let x = a[(r, l)];
        a[(r, k)] += c * x;
    }
    for r in 0..u.rows {
        let x = u[(r, l)];
        u[(r, k)] += c * x;
    }
}
