//! Integer lattice computations: Hermite normal form, saturated kernels,
//! integral solves, and canonical representatives modulo a sublattice.
//!
//! Matrices here are tiny (lattice rank at most 4 or 5), so the plain
//! column-reduction HNF with i64 entries is adequate.

use crate::rat::dot_ii;

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Divides out the gcd of the coordinates. The zero vector is returned
/// unchanged; otherwise the first nonzero coordinate keeps its sign.
pub fn primitive(v: &[i64]) -> Vec<i64> {
    let g = v.iter().fold(0, |acc, &x| gcd(acc, x));
    if g == 0 {
        return v.to_vec();
    }
    v.iter().map(|&x| x / g).collect()
}

pub fn neg(v: &[i64]) -> Vec<i64> {
    v.iter().map(|&x| -x).collect()
}

/// Column-style Hermite reduction: returns (H, U) with A * U = H, U
/// unimodular and H in column echelon form (pivot rows weakly increase,
/// zero columns last).
fn column_hnf(a: &[Vec<i64>]) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut h: Vec<Vec<i64>> = a.to_vec();
    // U as cols x cols, identity
    let mut u: Vec<Vec<i64>> = (0..cols)
        .map(|i| (0..cols).map(|j| i64::from(i == j)).collect())
        .collect();

    let col_op_swap = |h: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, c1: usize, c2: usize| {
        for row in h.iter_mut() {
            row.swap(c1, c2);
        }
        for row in u.iter_mut() {
            row.swap(c1, c2);
        }
    };
    // col[c1] += k * col[c2]
    let col_op_add = |h: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, c1: usize, c2: usize, k: i64| {
        for row in h.iter_mut() {
            row[c1] += k * row[c2];
        }
        for row in u.iter_mut() {
            row[c1] += k * row[c2];
        }
    };

    let mut lead = 0usize;
    for r in 0..rows {
        if lead == cols {
            break;
        }
        // gcd-reduce the row r across columns lead..cols
        loop {
            let mut nonzero: Vec<usize> = (lead..cols).filter(|&c| h[r][c] != 0).collect();
            if nonzero.is_empty() {
                break;
            }
            if nonzero.len() == 1 {
                let c = nonzero[0];
                col_op_swap(&mut h, &mut u, lead, c);
                if h[r][lead] < 0 {
                    for row in h.iter_mut() {
                        row[lead] = -row[lead];
                    }
                    for row in u.iter_mut() {
                        row[lead] = -row[lead];
                    }
                }
                lead += 1;
                break;
            }
            // reduce the column with larger |entry| by the smaller
            nonzero.sort_by_key(|&c| h[r][c].abs());
            let (small, big) = (nonzero[0], nonzero[1]);
            let q = h[r][big] / h[r][small];
            col_op_add(&mut h, &mut u, big, small, -q);
        }
    }
    (h, u)
}

/// A basis of the saturated lattice {x in Z^n : <row, x> = 0 for every row}.
pub fn int_kernel(rows: &[Vec<i64>], n: usize) -> Vec<Vec<i64>> {
    if rows.is_empty() {
        return (0..n)
            .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
            .collect();
    }
    debug_assert!(rows.iter().all(|r| r.len() == n));
    let (h, u) = column_hnf(rows);
    let mut kernel = Vec::new();
    for c in 0..n {
        if h.iter().all(|row| row[c] == 0) {
            kernel.push(u.iter().map(|urow| urow[c]).collect());
        }
    }
    kernel
}

/// An integral solution u of <u, row_i> = rhs_i for every i, if one exists.
/// Rows here are lattice vectors paired against the unknown character.
pub fn int_solve(rows: &[Vec<i64>], rhs: &[i64]) -> Option<Vec<i64>> {
    assert_eq!(rows.len(), rhs.len());
    if rows.is_empty() {
        return Some(Vec::new());
    }
    let n = rows[0].len();
    let (h, u) = column_hnf(rows);
    // Solve H y = rhs by forward substitution over the echelon columns.
    let mut y = vec![0i64; n];
    let mut rem: Vec<i64> = rhs.to_vec();
    for c in 0..n {
        // pivot row of column c: first nonzero entry
        let Some(pr) = (0..rows.len()).find(|&r| h[r][c] != 0) else {
            continue;
        };
        if rem[pr] % h[pr][c] != 0 {
            return None;
        }
        let q = rem[pr] / h[pr][c];
        y[c] = q;
        for r in 0..rows.len() {
            rem[r] -= q * h[r][c];
        }
    }
    if rem.iter().any(|&x| x != 0) {
        return None;
    }
    // u = U y
    let sol: Vec<i64> = (0..n).map(|i| dot_ii(&u[i], &y)).collect();
    debug_assert!(rows.iter().zip(rhs).all(|(r, &b)| dot_ii(&sol, r) == b));
    Some(sol)
}

/// Row-style Hermite normal form of the lattice spanned by the rows:
/// positive pivots, entries above a pivot reduced into [0, pivot).
pub fn row_hnf(rows: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<i64>> = rows.iter().filter(|r| r.iter().any(|&x| x != 0)).cloned().collect();
    if m.is_empty() {
        return m;
    }
    let n = m[0].len();
    let mut pivot_rows: Vec<Vec<i64>> = Vec::new();
    let mut col = 0;
    while col < n && !m.is_empty() {
        // gcd-reduce entries of this column across remaining rows
        loop {
            m.retain(|r| r.iter().any(|&x| x != 0));
            let mut nz: Vec<usize> = (0..m.len()).filter(|&i| m[i][col] != 0).collect();
            if nz.is_empty() {
                break;
            }
            if nz.len() == 1 {
                let mut row = m.remove(nz[0]);
                if row[col] < 0 {
                    row.iter_mut().for_each(|x| *x = -*x);
                }
                pivot_rows.push(row);
                break;
            }
            nz.sort_by_key(|&i| m[i][col].abs());
            let (small, big) = (nz[0], nz[1]);
            let q = m[big][col] / m[small][col];
            let small_row = m[small].clone();
            for (x, s) in m[big].iter_mut().zip(&small_row) {
                *x -= q * s;
            }
        }
        col += 1;
    }
    // reduce entries above each pivot
    for i in (0..pivot_rows.len()).rev() {
        let pc = pivot_rows[i].iter().position(|&x| x != 0).unwrap();
        let p = pivot_rows[i][pc];
        for j in 0..i {
            let q = pivot_rows[j][pc].div_euclid(p);
            if q != 0 {
                let pr = pivot_rows[i].clone();
                for (x, s) in pivot_rows[j].iter_mut().zip(&pr) {
                    *x -= q * s;
                }
            }
        }
    }
    pivot_rows
}

/// Canonical representative of `u` modulo the lattice spanned by `basis`
/// (rows). Two vectors get the same representative iff they differ by a
/// lattice element.
pub fn reduce_mod_lattice(u: &[i64], basis: &[Vec<i64>]) -> Vec<i64> {
    let h = row_hnf(basis);
    let mut v = u.to_vec();
    for row in &h {
        let pc = row.iter().position(|&x| x != 0).unwrap();
        let q = v[pc].div_euclid(row[pc]);
        if q != 0 {
            for (x, s) in v.iter_mut().zip(row) {
                *x -= q * s;
            }
        }
    }
    v
}

/// An integral vector v with <w, v> = 1, for primitive w.
pub fn dual_vector(w: &[i64]) -> Option<Vec<i64>> {
    int_solve(std::slice::from_ref(&w.to_vec()), &[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_vectors() {
        assert_eq!(primitive(&[2, 4, -6]), vec![1, 2, -3]);
        assert_eq!(primitive(&[0, 0]), vec![0, 0]);
        assert_eq!(primitive(&[-3, 0]), vec![-1, 0]);
    }

    #[test]
    fn kernels_are_saturated() {
        // kernel of (1,0): span (0,1)
        let k = int_kernel(&[vec![1, 0]], 2);
        assert_eq!(k.len(), 1);
        assert_eq!(k[0][0], 0);
        assert_eq!(k[0][1].abs(), 1);
        // kernel of (2,4) must contain (2,-1), not just (4,-2)
        let k = int_kernel(&[vec![2, 4]], 2);
        assert_eq!(k.len(), 1);
        assert_eq!(dot_ii(&k[0], &[2, 4]), 0);
        assert_eq!(gcd(k[0][0], k[0][1]), 1);
        // full kernel
        let k = int_kernel(&[], 3);
        assert_eq!(k.len(), 3);
    }

    #[test]
    fn integral_solves() {
        // <u, (1,0)> = 3, <u, (1,1)> = 5  =>  u = (3, 2)
        let u = int_solve(&[vec![1, 0], vec![1, 1]], &[3, 5]).unwrap();
        assert_eq!(u, vec![3, 2]);
        // <u, (2,0)> = 1 has no integral solution
        assert!(int_solve(&[vec![2, 0]], &[1]).is_none());
        // underdetermined: <u, (1,1,1)> = 2
        let u = int_solve(&[vec![1, 1, 1]], &[2]).unwrap();
        assert_eq!(u.iter().sum::<i64>(), 2);
        // inconsistent
        assert!(int_solve(&[vec![1, 0], vec![2, 0]], &[1, 3]).is_none());
    }

    #[test]
    fn quotient_representatives() {
        // mod span{(0,1)}: representative keeps first coordinate
        let r = reduce_mod_lattice(&[3, 7], &[vec![0, 1]]);
        assert_eq!(r, vec![3, 0]);
        let r2 = reduce_mod_lattice(&[3, -4], &[vec![0, 1]]);
        assert_eq!(r, r2);
        // mod the full lattice everything is 0
        let r = reduce_mod_lattice(&[5, -2], &[vec![1, 0], vec![0, 1]]);
        assert_eq!(r, vec![0, 0]);
        // mod nothing: identity
        let r = reduce_mod_lattice(&[5, -2], &[]);
        assert_eq!(r, vec![5, -2]);
    }

    #[test]
    fn dual_vectors() {
        let v = dual_vector(&[2, 3]).unwrap();
        assert_eq!(dot_ii(&v, &[2, 3]), 1);
        assert!(dual_vector(&[2, 4]).is_none());
        assert_eq!(dual_vector(&[1]).unwrap(), vec![1]);
    }
}

