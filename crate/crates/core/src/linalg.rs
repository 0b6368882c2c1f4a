//! Exact rational linear algebra: dense matrices over Q, canonical
//! subspaces in reduced row echelon form, flags, and frame coordinates.
//!
//! Subspaces are always stored as the unique RREF basis of their row
//! space, so subspace equality is matrix equality. Target sizes are
//! small (ambient dimension at most 16); everything is dense.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rat::Rat;

/// A dense matrix over Q, row major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Rat::one();
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[Vec<Rat>]) -> Result<Self> {
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row of length {} in a {}-column matrix",
                    r.len(),
                    cols
                )));
            }
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().cloned()).collect(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_vec(&self) -> Vec<Vec<Rat>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *t.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        t
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// In-place reduction to reduced row echelon form. Returns the pivot
    /// columns. Zero rows are truncated.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self.at(i, c).is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self.at(r, c).recip();
            for j in c..self.cols {
                let v = self.at(r, j) * &inv;
                *self.at_mut(r, j) = v;
            }
            for i in 0..self.rows {
                if i != r && !self.at(i, c).is_zero() {
                    let f = self.at(i, c).clone();
                    for j in c..self.cols {
                        let v = self.at(i, j) - &(&f * self.at(r, j));
                        *self.at_mut(i, j) = v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        self.rows = r;
        self.data.truncate(r * self.cols);
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref();
        m.nrows()
    }

    /// A basis of the right kernel {x : M x = 0}.
    pub fn kernel(&self) -> Vec<Vec<Rat>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let mut basis = Vec::new();
        let is_pivot = |c: usize| pivots.binary_search(&c).is_ok();
        for free in (0..self.cols).filter(|&c| !is_pivot(c)) {
            let mut v = vec![Rat::zero(); self.cols];
            v[free] = Rat::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m.at(r, free).clone();
            }
            basis.push(v);
        }
        basis
    }

    /// Any solution x of M x = b, if one exists.
    pub fn solve(&self, b: &[Rat]) -> Option<Vec<Rat>> {
        assert_eq!(b.len(), self.rows, "dimension mismatch");
        let mut aug = Matrix::zero(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *aug.at_mut(i, j) = self.at(i, j).clone();
            }
            *aug.at_mut(i, self.cols) = b[i].clone();
        }
        let pivots = aug.rref();
        if pivots.contains(&self.cols) {
            return None; // inconsistent
        }
        let mut x = vec![Rat::zero(); self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug.at(r, self.cols).clone();
        }
        Some(x)
    }
}

/// A linear subspace of Q^n in canonical form: the unique RREF basis of
/// its row space. Equality of subspaces is structural equality.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "SubspaceJson", into = "SubspaceJson")]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<Rat>>,
}

#[derive(Serialize, Deserialize)]
struct SubspaceJson {
    ambient: usize,
    basis: Vec<Vec<Rat>>,
}

impl From<Subspace> for SubspaceJson {
    fn from(s: Subspace) -> Self {
        SubspaceJson {
            ambient: s.ambient,
            basis: s.basis,
        }
    }
}

impl TryFrom<SubspaceJson> for Subspace {
    type Error = Error;
    fn try_from(j: SubspaceJson) -> Result<Subspace> {
        Subspace::span(j.ambient, &j.basis)
    }
}

impl Subspace {
    /// Canonical subspace spanned by the given rows.
    pub fn span(ambient: usize, rows: &[Vec<Rat>]) -> Result<Self> {
        let mut m = Matrix::from_rows(ambient, rows)?;
        m.rref();
        Ok(Subspace {
            ambient,
            basis: m.rows_vec(),
        })
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Matrix::identity(ambient).rows_vec(),
        }
    }

    pub fn line(gen: &[Rat]) -> Result<Self> {
        let s = Subspace::span(gen.len(), std::slice::from_ref(&gen.to_vec()))?;
        if s.dim() != 1 {
            return Err(Error::InvalidValuation("zero vector spans no line".into()));
        }
        Ok(s)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }

    pub fn basis_rows(&self) -> &[Vec<Rat>] {
        &self.basis
    }

    fn check_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch(self.ambient, other.ambient));
        }
        Ok(())
    }

    pub fn contains_vec(&self, e: &[Rat]) -> bool {
        assert_eq!(e.len(), self.ambient, "dimension mismatch");
        // reduce e against the RREF basis; membership iff residual is zero
        let mut v = e.to_vec();
        for row in &self.basis {
            let pivot = row.iter().position(|x| !x.is_zero()).expect("RREF row");
            if !v[pivot].is_zero() {
                let f = v[pivot].clone();
                for j in pivot..self.ambient {
                    let w = &v[j] - &(&f * &row[j]);
                    v[j] = w;
                }
            }
        }
        v.iter().all(|x| x.is_zero())
    }

    pub fn contains_sub(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|r| self.contains_vec(r))
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.check_ambient(other)?;
        let rows: Vec<Vec<Rat>> = self.basis.iter().chain(&other.basis).cloned().collect();
        Subspace::span(self.ambient, &rows)
    }

    /// Intersection via the Zassenhaus block trick: row reduce
    /// [A | A; B | 0] and read the intersection from rows of the form
    /// [0 | C].
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        self.check_ambient(other)?;
        let n = self.ambient;
        let mut rows = Vec::new();
        for r in &self.basis {
            let mut row = r.clone();
            row.extend(r.iter().cloned());
            rows.push(row);
        }
        for r in &other.basis {
            let mut row = r.clone();
            row.extend(vec![Rat::zero(); n]);
            rows.push(row);
        }
        let mut m = Matrix::from_rows(2 * n, &rows)?;
        m.rref();
        let mut inter_rows = Vec::new();
        for i in 0..m.nrows() {
            if m.row(i)[..n].iter().all(|x| x.is_zero()) {
                inter_rows.push(m.row(i)[n..].to_vec());
            }
        }
        Subspace::span(n, &inter_rows)
    }

    /// Extends `self`'s basis with rows of `inside` until it spans
    /// `self` + `inside`; returns the added vectors.
    pub fn extension_vectors(&self, inside: &Subspace) -> Vec<Vec<Rat>> {
        let mut acc = self.clone();
        let mut added = Vec::new();
        for r in &inside.basis {
            if !acc.contains_vec(r) {
                acc = acc
                    .sum(&Subspace::span(self.ambient, std::slice::from_ref(r)).unwrap())
                    .unwrap();
                added.push(r.clone());
            }
        }
        added
    }
}

/// Orders subspaces by dimension, then lexicographically on the RREF basis.
pub fn subspace_order(a: &Subspace, b: &Subspace) -> std::cmp::Ordering {
    a.dim()
        .cmp(&b.dim())
        .then_with(|| a.basis_rows().cmp(b.basis_rows()))
}

/// A complete flag fragment: strictly increasing subspaces ending in the
/// full space.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Flag {
    subspaces: Vec<Subspace>,
}

impl Flag {
    pub fn new(subspaces: Vec<Subspace>) -> Result<Self> {
        if subspaces.is_empty() {
            return Err(Error::InvalidValuation("empty flag".into()));
        }
        let ambient = subspaces[0].ambient_dim();
        for w in subspaces.windows(2) {
            if w[0].ambient_dim() != ambient || w[1].ambient_dim() != ambient {
                return Err(Error::AmbientMismatch(
                    w[0].ambient_dim(),
                    w[1].ambient_dim(),
                ));
            }
            if !(w[1].contains_sub(&w[0]) && w[1].dim() > w[0].dim()) {
                return Err(Error::InvalidValuation(
                    "flag subspaces must be strictly increasing".into(),
                ));
            }
        }
        if !subspaces.last().unwrap().is_full() {
            return Err(Error::InvalidValuation("flag must end in the full space".into()));
        }
        Ok(Flag { subspaces })
    }

    pub fn steps(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn ambient_dim(&self) -> usize {
        self.subspaces[0].ambient_dim()
    }
}

/// Decomposes `e` along a frame of lines summing directly to the whole
/// space: returns components, one per line, summing to `e`.
pub fn coords_in_frame(lines: &[Subspace], e: &[Rat]) -> Result<Vec<Vec<Rat>>> {
    let r = e.len();
    if lines.len() != r {
        return Err(Error::NotAFrame(format!(
            "{} lines in ambient dimension {}",
            lines.len(),
            r
        )));
    }
    let mut gens = Vec::with_capacity(r);
    for l in lines {
        if l.ambient_dim() != r || l.dim() != 1 {
            return Err(Error::NotAFrame("frame members must be lines".into()));
        }
        gens.push(l.basis_rows()[0].clone());
    }
    // columns are the line generators
    let m = Matrix::from_rows(r, &gens)?.transpose();
    let coeffs = m
        .solve(e)
        .ok_or_else(|| Error::NotAFrame("lines do not sum directly to the space".into()))?;
    if Matrix::from_rows(r, &gens)?.rank() != r {
        return Err(Error::NotAFrame("lines are linearly dependent".into()));
    }
    Ok(coeffs
        .iter()
        .zip(&gens)
        .map(|(c, g)| g.iter().map(|x| c * x).collect())
        .collect())
}
