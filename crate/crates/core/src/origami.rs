//! Square-tiled surfaces: cell structure, homology basis, intersection form,
//! and the chain maps of the affine generators `S` and `T`.
//!
//! Chains live on the dual graph: index `j` is the edge `h_j` from square `j` to
//! `h(j)` through its right side, index `n + j` is `v_j` from `j` to `v(j)`.

use crate::intlin::{skew_normal_form, IntMatrix};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrigamiError {
    #[error("field `{field}`: {msg}")]
    Malformed { field: String, msg: String },
    #[error("the gluing group does not act transitively; the surface is disconnected")]
    NotConnected,
    #[error("genus 1 surface has no tautological complement")]
    TrivialComplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    S,
    T,
}

/// Origami given by 0-indexed permutations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PermPair {
    pub h: Vec<usize>,
    pub v: Vec<usize>,
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut q = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        q[x] = i;
    }
    q
}

fn check_perm(p: &[usize], n: usize, field: &str) -> Result<(), OrigamiError> {
    if p.len() != n {
        return Err(OrigamiError::Malformed {
            field: field.into(),
            msg: format!("expected {} entries, found {}", n, p.len()),
        });
    }
    let mut seen = vec![false; n];
    for (i, &x) in p.iter().enumerate() {
        if x >= n {
            return Err(OrigamiError::Malformed {
                field: field.into(),
                msg: format!("entry {} = {} out of range 1..={}", i + 1, x + 1, n),
            });
        }
        if seen[x] {
            return Err(OrigamiError::Malformed {
                field: field.into(),
                msg: format!("value {} repeated; not a permutation", x + 1),
            });
        }
        seen[x] = true;
    }
    Ok(())
}

impl PermPair {
    pub fn new(h: Vec<usize>, v: Vec<usize>) -> Result<Self, OrigamiError> {
        if h.is_empty() {
            return Err(OrigamiError::Malformed { field: "n".into(), msg: "no squares".into() });
        }
        check_perm(&h, h.len(), "h")?;
        check_perm(&v, h.len(), "v")?;
        Ok(Self { h, v })
    }

    /// From 1-indexed image arrays.
    pub fn from_one_indexed(h: &[usize], v: &[usize]) -> Result<Self, OrigamiError> {
        let conv = |p: &[usize], field: &str| -> Result<Vec<usize>, OrigamiError> {
            p.iter()
                .enumerate()
                .map(|(i, &x)| {
                    x.checked_sub(1).ok_or_else(|| OrigamiError::Malformed {
                        field: field.into(),
                        msg: format!("entry {} is 0; images are 1-indexed", i + 1),
                    })
                })
                .collect()
        };
        Self::new(conv(h, "h")?, conv(v, "v")?)
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn is_transitive(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = q.pop_front() {
            for y in [self.h[x], self.v[x]] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    q.push_back(y);
                }
            }
        }
        count == n
    }

    /// Image under an affine generator with the same square labels.
    pub fn apply(&self, gen: Generator) -> PermPair {
        match gen {
            // shear: v' = v ∘ h⁻¹
            Generator::T => {
                let hi = invert(&self.h);
                PermPair { h: self.h.clone(), v: hi.iter().map(|&x| self.v[x]).collect() }
            }
            // quarter turn: h' = v⁻¹, v' = h
            Generator::S => PermPair { h: invert(&self.v), v: self.h.clone() },
        }
    }

    /// Relabel by `pi` (old label -> new label).
    pub fn relabel(&self, pi: &[usize]) -> PermPair {
        let n = self.n();
        let mut h = vec![0; n];
        let mut v = vec![0; n];
        for x in 0..n {
            h[pi[x]] = pi[self.h[x]];
            v[pi[x]] = pi[self.v[x]];
        }
        PermPair { h, v }
    }

    /// Lexicographically least relabelling over BFS numberings from every start square.
    pub fn canonical(&self) -> (PermPair, Vec<usize>) {
        let n = self.n();
        let mut best: Option<(PermPair, Vec<usize>)> = None;
        for start in 0..n {
            let mut label = vec![usize::MAX; n];
            label[start] = 0;
            let mut next = 1;
            let mut q = VecDeque::from([start]);
            while let Some(x) = q.pop_front() {
                for y in [self.h[x], self.v[x]] {
                    if label[y] == usize::MAX {
                        label[y] = next;
                        next += 1;
                        q.push_back(y);
                    }
                }
            }
            let cand = self.relabel(&label);
            let better = match &best {
                None => true,
                Some((b, _)) => (&cand.h, &cand.v) < (&b.h, &b.v),
            };
            if better {
                best = Some((cand, label));
            }
        }
        best.unwrap()
    }

    /// Number of cycles of the commutator `v⁻¹ h⁻¹ v h`.
    pub fn commutator_cycles(&self) -> usize {
        let hi = invert(&self.h);
        let vi = invert(&self.v);
        let c: Vec<usize> = (0..self.n()).map(|x| vi[hi[self.v[self.h[x]]]]).collect();
        let mut seen = vec![false; self.n()];
        let mut cycles = 0;
        for s in 0..self.n() {
            if !seen[s] {
                cycles += 1;
                let mut x = s;
                while !seen[x] {
                    seen[x] = true;
                    x = c[x];
                }
            }
        }
        cycles
    }
}

/// Origami with its cell structure and a symplectic homology basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Origami {
    pub perms: PermPair,
    pub h_inv: Vec<usize>,
    pub v_inv: Vec<usize>,
    /// Vertex class of the bottom-left corner of each square.
    pub vertex_of: Vec<usize>,
    pub vertex_sizes: Vec<usize>,
    pub genus: usize,
    /// Cycles `c_0 .. c_{2g-1}` on the dual graph with pairing `standard_symplectic(g)`.
    pub basis: Vec<Vec<i64>>,
    pub j: IntMatrix,
}

fn find(p: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while p[r] != r {
        r = p[r];
    }
    let mut y = x;
    while p[y] != r {
        let nx = p[y];
        p[y] = r;
        y = nx;
    }
    r
}

impl Origami {
    pub fn build(perms: PermPair) -> Result<Self, OrigamiError> {
        if !perms.is_transitive() {
            return Err(OrigamiError::NotConnected);
        }
        let n = perms.n();
        let (h, v) = (&perms.h, &perms.v);
        let mut uf: Vec<usize> = (0..n).collect();
        for i in 0..n {
            // top-right corner of i seen from both diagonal routes
            let a = find(&mut uf, v[h[i]]);
            let b = find(&mut uf, h[v[i]]);
            uf[a] = b;
        }
        let mut root_id = vec![usize::MAX; n];
        let mut vertex_of = vec![0; n];
        let mut vertex_sizes = Vec::new();
        for i in 0..n {
            let r = find(&mut uf, i);
            if root_id[r] == usize::MAX {
                root_id[r] = vertex_sizes.len();
                vertex_sizes.push(0);
            }
            vertex_of[i] = root_id[r];
            vertex_sizes[root_id[r]] += 1;
        }
        let vcount = vertex_sizes.len();
        let genus = (n + 2 - vcount) / 2;
        let mut o = Origami {
            h_inv: invert(h),
            v_inv: invert(v),
            perms,
            vertex_of,
            vertex_sizes,
            genus,
            basis: Vec::new(),
            j: IntMatrix::standard_symplectic(genus),
        };
        o.basis = o.symplectic_basis();
        Ok(o)
    }

    pub fn n(&self) -> usize {
        self.perms.n()
    }

    pub fn h(&self) -> &[usize] {
        &self.perms.h
    }

    pub fn v(&self) -> &[usize] {
        &self.perms.v
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_sizes.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - 2 * self.n() as i64 + self.n() as i64
    }

    /// Zero orders `k_i` of the stratum `H(k_1, ..)`, descending.
    pub fn stratum(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.vertex_sizes.iter().filter(|&&c| c > 1).map(|c| c - 1).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Cone angles in units of 2π.
    pub fn cone_angles(&self) -> Vec<usize> {
        self.vertex_sizes.clone()
    }

    /// Algebraic intersection of two dual-graph chains.
    pub fn intersection(&self, a: &[i64], b: &[i64]) -> i64 {
        let n = self.n();
        let mut s = 0;
        for i in 0..n {
            s += a[i] * b[n + self.v_inv[i]];
            s -= a[n + i] * b[self.h_inv[i]];
        }
        s
    }

    /// Holonomy `(Σ h-coefficients, Σ v-coefficients)`.
    pub fn holonomy(&self, z: &[i64]) -> (i64, i64) {
        let n = self.n();
        (z[..n].iter().sum(), z[n..].iter().sum())
    }

    /// Whether `z` is closed (a cycle of the dual graph).
    pub fn is_cycle(&self, z: &[i64]) -> bool {
        let n = self.n();
        let mut div = vec![0i64; n];
        for j in 0..n {
            div[j] -= z[j] + z[n + j];
            div[self.perms.h[j]] += z[j];
            div[self.perms.v[j]] += z[n + j];
        }
        div.iter().all(|&x| x == 0)
    }

    fn fundamental_cycles(&self) -> Vec<Vec<i64>> {
        let n = self.n();
        let mut path: Vec<Option<Vec<i64>>> = vec![None; n];
        let mut tree_edge = vec![false; 2 * n];
        path[0] = Some(vec![0; 2 * n]);
        let mut q = VecDeque::from([0]);
        while let Some(x) = q.pop_front() {
            let px = path[x].clone().unwrap();
            // outgoing h_x, v_x and incoming h_{h⁻¹x}, v_{v⁻¹x}
            let moves = [
                (x, self.perms.h[x], 1i64),
                (n + x, self.perms.v[x], 1),
                (self.h_inv[x], self.h_inv[x], -1),
                (n + self.v_inv[x], self.v_inv[x], -1),
            ];
            for (e, y, sgn) in moves {
                if path[y].is_none() {
                    let mut py = px.clone();
                    py[e] += sgn;
                    path[y] = Some(py);
                    tree_edge[e] = true;
                    q.push_back(y);
                }
            }
        }
        let mut cycles = Vec::new();
        for e in 0..2 * n {
            if tree_edge[e] {
                continue;
            }
            let (src, dst) = if e < n { (e, self.perms.h[e]) } else { (e - n, self.perms.v[e - n]) };
            let mut c = path[src].clone().unwrap();
            c[e] += 1;
            for (ci, pi) in c.iter_mut().zip(path[dst].as_ref().unwrap()) {
                *ci -= pi;
            }
            cycles.push(c);
        }
        cycles
    }

    fn symplectic_basis(&self) -> Vec<Vec<i64>> {
        let cycles = self.fundamental_cycles();
        let m = cycles.len();
        let mut form = IntMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                form[(a, b)] = self.intersection(&cycles[a], &cycles[b]);
            }
        }
        let snf = skew_normal_form(&form);
        assert_eq!(snf.invariants.len(), self.genus, "homology rank mismatch");
        assert!(snf.invariants.iter().all(|&d| d == 1), "intersection form not unimodular");
        let combine = |row: usize| -> Vec<i64> {
            let mut z = vec![0i64; 2 * self.n()];
            for (k, c) in cycles.iter().enumerate() {
                let w = snf.basis[(row, k)];
                if w != 0 {
                    for (zi, ci) in z.iter_mut().zip(c) {
                        *zi += w * ci;
                    }
                }
            }
            z
        };
        let g = self.genus;
        let mut basis = vec![Vec::new(); 2 * g];
        for i in 0..g {
            basis[i] = combine(2 * i);
            basis[g + i] = combine(2 * i + 1);
        }
        basis
    }

    /// Intersection matrix of the stored basis.
    pub fn basis_form(&self) -> IntMatrix {
        let m = self.basis.len();
        let mut f = IntMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                f[(a, b)] = self.intersection(&self.basis[a], &self.basis[b]);
            }
        }
        f
    }

    /// Coordinates of a cycle in the stored basis.
    pub fn coordinates(&self, z: &[i64]) -> Vec<i64> {
        let g = self.genus;
        let y: Vec<i64> = self.basis.iter().map(|c| self.intersection(c, z)).collect();
        // x = -J y with J = [[0, I], [-I, 0]]
        let mut x = vec![0; 2 * g];
        for i in 0..g {
            x[i] = -y[g + i];
            x[g + i] = y[i];
        }
        x
    }

    /// Image chain of the edge chain `z` under the generator (same square labels).
    pub fn push_chain(&self, gen: Generator, z: &[i64]) -> Vec<i64> {
        let n = self.n();
        let mut out = vec![0i64; 2 * n];
        match gen {
            Generator::T => {
                for j in 0..n {
                    out[j] += z[j];
                    out[j] += z[n + j];
                    out[n + self.perms.h[j]] += z[n + j];
                }
            }
            Generator::S => {
                for j in 0..n {
                    out[n + j] += z[j];
                    out[self.perms.v[j]] -= z[n + j];
                }
            }
        }
        out
    }
}

/// Relabel a chain by `pi` (old square -> new square).
pub fn relabel_chain(z: &[i64], pi: &[usize]) -> Vec<i64> {
    let n = pi.len();
    let mut out = vec![0; 2 * n];
    for j in 0..n {
        out[pi[j]] = z[j];
        out[n + pi[j]] = z[n + j];
    }
    out
}

pub fn torus() -> PermPair {
    PermPair { h: vec![0], v: vec![0] }
}

/// Three squares, `h = (1 2 3)`, `v = (1 2)`.
pub fn h2_three_square() -> PermPair {
    PermPair { h: vec![1, 2, 0], v: vec![1, 0, 2] }
}

/// Eight squares labelled by the quaternion group, `h(x) = x·i`, `v(x) = x·j`.
pub fn eierlegende_wollmilchsau() -> PermPair {
    // labels: 0:1 1:-1 2:i 3:-i 4:j 5:-j 6:k 7:-k
    fn mul(a: usize, b: usize) -> usize {
        let (sa, ea) = (a % 2, a / 2);
        let (sb, eb) = (b % 2, b / 2);
        // unit table for 1,i,j,k: (sign, unit)
        const T: [[(usize, usize); 4]; 4] = [
            [(0, 0), (0, 1), (0, 2), (0, 3)],
            [(0, 1), (1, 0), (0, 3), (1, 2)],
            [(0, 2), (1, 3), (1, 0), (0, 1)],
            [(0, 3), (0, 2), (1, 1), (1, 0)],
        ];
        let (s, e) = T[ea][eb];
        2 * e + (sa + sb + s) % 2
    }
    let h = (0..8).map(|x| mul(x, 2)).collect();
    let v = (0..8).map(|x| mul(x, 4)).collect();
    PermPair { h, v }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrigamiFile {
    pub n: usize,
    pub h: Vec<usize>,
    pub v: Vec<usize>,
}

impl OrigamiFile {
    pub fn to_perms(&self) -> Result<PermPair, OrigamiError> {
        if self.h.len() != self.n {
            return Err(OrigamiError::Malformed {
                field: "h".into(),
                msg: format!("expected {} entries, found {}", self.n, self.h.len()),
            });
        }
        if self.v.len() != self.n {
            return Err(OrigamiError::Malformed {
                field: "v".into(),
                msg: format!("expected {} entries, found {}", self.n, self.v.len()),
            });
        }
        PermPair::from_one_indexed(&self.h, &self.v)
    }

    pub fn from_perms(p: &PermPair) -> Self {
        Self {
            n: p.n(),
            h: p.h.iter().map(|x| x + 1).collect(),
            v: p.v.iter().map(|x| x + 1).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_labels() {
        let ew = eierlegende_wollmilchsau();
        // 1·i = i, i·i = -1, -1·i = -i, -i·i = 1
        assert_eq!(ew.h[0], 2);
        assert_eq!(ew.h[2], 1);
        assert_eq!(ew.h[1], 3);
        assert_eq!(ew.h[3], 0);
        // i·j = k
        assert_eq!(ew.v[2], 6);
    }

    #[test]
    fn basis_cycles_are_closed() {
        for p in [torus(), h2_three_square(), eierlegende_wollmilchsau()] {
            let o = Origami::build(p).unwrap();
            for c in &o.basis {
                assert!(o.is_cycle(c));
            }
            assert_eq!(o.basis_form(), o.j);
        }
    }
}
