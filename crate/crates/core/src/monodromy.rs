//! Action of `S` and `T` on the homology of every origami in an `SL(2,Z)`-orbit.

use crate::intlin::{integer_kernel, skew_normal_form, IntMatrix};
use crate::origami::{relabel_chain, Generator, Origami, OrigamiError, PermPair};
use num_rational::Ratio;
use std::collections::{HashMap, VecDeque};

/// A generator move or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    S,
    SInv,
    T,
    TInv,
}

impl Move {
    pub fn inverse(self) -> Move {
        match self {
            Move::S => Move::SInv,
            Move::SInv => Move::S,
            Move::T => Move::TInv,
            Move::TInv => Move::T,
        }
    }
}

/// Homology action of the generators over a finite set of markings.
#[derive(Debug, Clone)]
pub struct MonodromyRep {
    pub markings: Vec<Origami>,
    /// `matrix[m][S | T]`: coordinates in the target basis of the pushed source basis.
    pub matrix: Vec<[IntMatrix; 2]>,
    pub target: Vec<[usize; 2]>,
    pub source: Vec<[usize; 2]>,
    pub inverse: Vec<[IntMatrix; 2]>,
    pub j: IntMatrix,
    pub dim: usize,
}

fn gen_index(g: Generator) -> usize {
    match g {
        Generator::S => 0,
        Generator::T => 1,
    }
}

/// Matrix of `gen` from `o` to the canonical form of its image, and that form's labelling.
pub fn homology_action(o: &Origami, gen: Generator) -> (IntMatrix, PermPair) {
    let image = o.perms.apply(gen);
    let (canon, pi) = image.canonical();
    let target = Origami::build(canon.clone()).expect("image of a connected origami is connected");
    let cols: Vec<Vec<i64>> = o
        .basis
        .iter()
        .map(|c| target.coordinates(&relabel_chain(&o.push_chain(gen, c), &pi)))
        .collect();
    (IntMatrix::from_cols(&cols), canon)
}

/// `M⁻¹ = -J Mᵀ J` for `Mᵀ J M = J`, `J² = -1`.
pub fn symplectic_inverse(m: &IntMatrix, j: &IntMatrix) -> IntMatrix {
    j.mul(&m.transpose()).mul(j).neg()
}

impl MonodromyRep {
    pub fn build(base: PermPair) -> Result<Self, OrigamiError> {
        let (canon, _) = base.canonical();
        let first = Origami::build(canon.clone())?;
        let mut index: HashMap<PermPair, usize> = HashMap::new();
        index.insert(canon, 0);
        let mut markings = vec![first];
        let mut matrix: Vec<[IntMatrix; 2]> = Vec::new();
        let mut target: Vec<[usize; 2]> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        let mut pending: Vec<Option<([IntMatrix; 2], [usize; 2])>> = vec![None];
        while let Some(m) = queue.pop_front() {
            let mut mats = Vec::new();
            let mut tg = [0; 2];
            for gen in [Generator::S, Generator::T] {
                let (mat, image) = homology_action(&markings[m], gen);
                let id = match index.get(&image) {
                    Some(&id) => id,
                    None => {
                        let id = markings.len();
                        index.insert(image.clone(), id);
                        markings.push(Origami::build(image)?);
                        pending.push(None);
                        queue.push_back(id);
                        id
                    }
                };
                tg[gen_index(gen)] = id;
                mats.push(mat);
            }
            let t = mats.pop().unwrap();
            let s = mats.pop().unwrap();
            pending[m] = Some(([s, t], tg));
        }
        for p in pending {
            let (mats, tg) = p.unwrap();
            matrix.push(mats);
            target.push(tg);
        }
        let j = markings[0].j.clone();
        let dim = j.rows;
        Ok(Self::assemble(markings, matrix, target, j, dim))
    }

    fn assemble(
        markings: Vec<Origami>,
        matrix: Vec<[IntMatrix; 2]>,
        target: Vec<[usize; 2]>,
        j: IntMatrix,
        dim: usize,
    ) -> Self {
        let n = target.len();
        let mut source = vec![[usize::MAX; 2]; n];
        for m in 0..n {
            for g in 0..2 {
                source[target[m][g]][g] = m;
            }
        }
        let inverse = (0..n)
            .map(|m| {
                [0, 1].map(|g| {
                    let src = source[m][g];
                    let mat = &matrix[src][g];
                    let inv = symplectic_inverse(mat, &j);
                    debug_assert!(inv.mul(mat).is_identity());
                    inv
                })
            })
            .collect();
        Self { markings, matrix, target, source, inverse, j, dim }
    }

    pub fn orbit_size(&self) -> usize {
        self.target.len()
    }

    pub fn genus(&self) -> usize {
        self.markings[0].genus
    }

    /// Matrix and next marking for a move from marking `m`.
    pub fn step(&self, m: usize, mv: Move) -> (&IntMatrix, usize) {
        match mv {
            Move::S => (&self.matrix[m][0], self.target[m][0]),
            Move::T => (&self.matrix[m][1], self.target[m][1]),
            Move::SInv => (&self.inverse[m][0], self.source[m][0]),
            Move::TInv => (&self.inverse[m][1], self.source[m][1]),
        }
    }

    /// Product of the matrices along a word of moves, with the final marking.
    pub fn word(&self, m0: usize, moves: &[Move]) -> (IntMatrix, usize) {
        let mut a = IntMatrix::identity(self.dim);
        let mut m = m0;
        for &mv in moves {
            let (mat, next) = self.step(m, mv);
            a = mat.mul(&a);
            m = next;
        }
        (a, m)
    }

    pub fn is_symplectic(&self) -> bool {
        self.matrix.iter().flatten().chain(self.inverse.iter().flatten()).all(|m| {
            m.transpose().mul(&self.j).mul(m) == self.j
        })
    }

    /// Restriction to the kernel of the holonomy map (the complement of the tautological plane).
    pub fn tautological_complement(&self) -> Result<Complement, OrigamiError> {
        let g = self.genus();
        if g < 2 {
            return Err(OrigamiError::TrivialComplement);
        }
        let mut bases = Vec::with_capacity(self.orbit_size());
        for o in &self.markings {
            let hol: Vec<Vec<i64>> = o
                .basis
                .iter()
                .map(|c| {
                    let (x, y) = o.holonomy(c);
                    vec![x, y]
                })
                .collect();
            let hol = IntMatrix::from_cols(&hol);
            let k = integer_kernel(&hol);
            // put the restricted form in skew normal form
            let form = k.transpose().mul(&self.j).mul(&k);
            let snf = skew_normal_form(&form);
            let b = k.mul(&reorder_symplectic(&snf.basis.transpose(), snf.invariants.len()));
            bases.push(b);
        }
        let jk = bases[0].transpose().mul(&self.j).mul(&bases[0]);
        let n = self.orbit_size();
        let mut matrix = Vec::with_capacity(n);
        for m in 0..n {
            matrix.push([0, 1].map(|g| {
                restrict(&self.matrix[m][g], &bases[m], &bases[self.target[m][g]])
            }));
        }
        let dim = bases[0].cols;
        for b in &bases {
            assert_eq!(b.transpose().mul(&self.j).mul(b), jk, "restricted forms differ");
        }
        let unimodular = jk.det().abs() == 1;
        let rep = MonodromyRep::assemble_general(
            self.markings.clone(),
            matrix,
            self.target.clone(),
            jk.clone(),
            dim,
        );
        Ok(Complement { bases, rep, unimodular })
    }

    fn assemble_general(
        markings: Vec<Origami>,
        matrix: Vec<[IntMatrix; 2]>,
        target: Vec<[usize; 2]>,
        j: IntMatrix,
        dim: usize,
    ) -> Self {
        let n = target.len();
        let mut source = vec![[usize::MAX; 2]; n];
        for m in 0..n {
            for g in 0..2 {
                source[target[m][g]][g] = m;
            }
        }
        let inverse = (0..n)
            .map(|m| [0, 1].map(|g| integer_inverse(&matrix[source[m][g]][g])))
            .collect();
        Self { markings, matrix, target, source, inverse, j, dim }
    }
}

/// Columns `e_1..e_g, f_1..f_g` from interleaved pairs.
fn reorder_symplectic(cols: &IntMatrix, g: usize) -> IntMatrix {
    let mut order: Vec<usize> = (0..g).map(|i| 2 * i).collect();
    order.extend((0..g).map(|i| 2 * i + 1));
    order.extend(2 * g..cols.cols);
    let c: Vec<Vec<i64>> = order.iter().map(|&j| cols.col(j)).collect();
    IntMatrix::from_cols(&c)
}

/// Solve `B_tgt X = M B_src` exactly over the rationals; the result must be integral.
fn restrict(m: &IntMatrix, src: &IntMatrix, tgt: &IntMatrix) -> IntMatrix {
    let rhs = m.mul(src);
    let x = rational_solve(tgt, &rhs);
    x.expect("restricted action is not integral")
}

fn rational_solve(a: &IntMatrix, b: &IntMatrix) -> Option<IntMatrix> {
    // least squares via normal equations in exact arithmetic: (AᵀA) X = Aᵀ B
    let at = a.transpose();
    let n = a.cols;
    let ata = at.mul(a);
    let atb = at.mul(b);
    let mut aug: Vec<Vec<Ratio<i128>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Ratio::from_integer(ata[(i, j)] as i128))
                .chain((0..b.cols).map(|j| Ratio::from_integer(atb[(i, j)] as i128)))
                .collect()
        })
        .collect();
    for k in 0..n {
        let p = (k..n).find(|&i| aug[i][k] != Ratio::from_integer(0))?;
        aug.swap(k, p);
        let piv = aug[k][k];
        for x in aug[k].iter_mut() {
            *x /= piv;
        }
        for i in 0..n {
            if i != k && aug[i][k] != Ratio::from_integer(0) {
                let f = aug[i][k];
                let rowk = aug[k].clone();
                for (x, y) in aug[i].iter_mut().zip(rowk) {
                    *x -= f * y;
                }
            }
        }
    }
    let mut out = IntMatrix::zeros(n, b.cols);
    for i in 0..n {
        for j in 0..b.cols {
            let r = aug[i][n + j];
            if !r.is_integer() {
                return None;
            }
            out[(i, j)] = *r.numer() as i64;
        }
    }
    // verify exactness
    if a.mul(&out) != *b {
        return None;
    }
    Some(out)
}

fn integer_inverse(m: &IntMatrix) -> IntMatrix {
    rational_solve(m, &IntMatrix::identity(m.rows)).expect("generator matrix not unimodular")
}

/// Restricted representation on the tautological complement.
#[derive(Debug, Clone)]
pub struct Complement {
    /// Per marking, columns = complement basis in full homology coordinates.
    pub bases: Vec<IntMatrix>,
    pub rep: MonodromyRep,
    pub unimodular: bool,
}

/// Closure of the matrices reachable from marking `m0` (bounded by `limit` elements).
pub fn orbit_group_size(rep: &MonodromyRep, limit: usize) -> Option<usize> {
    let mut seen: HashMap<(usize, IntMatrix), ()> = HashMap::new();
    let id = IntMatrix::identity(rep.dim);
    let mut q = VecDeque::from([(0usize, id.clone())]);
    seen.insert((0, id), ());
    while let Some((m, a)) = q.pop_front() {
        for mv in [Move::S, Move::T] {
            let (mat, next) = rep.step(m, mv);
            let b = mat.mul(&a);
            if b.data.iter().any(|x| x.abs() > 1 << 20) {
                return None;
            }
            if seen.insert((next, b.clone()), ()).is_none() {
                if seen.len() > limit {
                    return None;
                }
                q.push_back((next, b));
            }
        }
    }
    Some(seen.len())
}
