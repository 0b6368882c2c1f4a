//! The Klyachko subspace arrangement, its representable matroid realized
//! by a generic spanning set, the parliament of polytopes, and
//! weight-space dimensions of global sections.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fan::Character;
use crate::klyachko::KlyachkoBundle;
use crate::linalg::{subspace_order, Matrix, Subspace};
use crate::plfunc::{PlFunction, Polytope};
use crate::rat::{dot_ii, Rat};

/// A finite subspace arrangement closed under intersection, containing 0
/// and the full space, in canonical order (dimension, then basis).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Arrangement {
    ambient: usize,
    members: Vec<Subspace>,
}

impl Arrangement {
    /// The intersection closure of the given subspaces together with 0
    /// and the full space.
    pub fn closure(ambient: usize, subspaces: &[Subspace]) -> Result<Self> {
        let mut members: Vec<Subspace> = vec![Subspace::zero(ambient), Subspace::full(ambient)];
        for s in subspaces {
            if s.ambient_dim() != ambient {
                return Err(Error::AmbientMismatch(s.ambient_dim(), ambient));
            }
            if !members.contains(s) {
                members.push(s.clone());
            }
        }
        loop {
            let mut new_members = Vec::new();
            for (i, a) in members.iter().enumerate() {
                for b in members.iter().skip(i + 1) {
                    let c = a.intersect(b)?;
                    if !members.contains(&c) && !new_members.contains(&c) {
                        new_members.push(c);
                    }
                }
            }
            if new_members.is_empty() {
                break;
            }
            members.extend(new_members);
        }
        members.sort_by(subspace_order);
        members.dedup();
        Ok(Arrangement { ambient, members })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn members(&self) -> &[Subspace] {
        &self.members
    }

    pub fn contains(&self, s: &Subspace) -> bool {
        self.members.contains(s)
    }

    /// Members that are not the sum of the other members they contain
    /// (the building blocks carrying ground-set vectors). 0 is excluded:
    /// it is the empty sum.
    pub fn irreducible_members(&self) -> Vec<&Subspace> {
        self.members
            .iter()
            .filter(|u| {
                if u.is_zero() {
                    return false;
                }
                let mut sum = Subspace::zero(self.ambient);
                for v in &self.members {
                    if *v != **u && u.contains_sub(v) {
                        sum = sum.sum(v).expect("same ambient");
                    }
                }
                sum != **u
            })
            .collect()
    }

    /// True iff every pairwise intersection of members is a member.
    pub fn is_intersection_closed(&self) -> bool {
        self.members.iter().enumerate().all(|(i, a)| {
            self.members
                .iter()
                .skip(i + 1)
                .all(|b| self.members.contains(&a.intersect(b).expect("same ambient")))
        })
    }
}

/// The intersection closure of all subspaces appearing in the ray
/// filtrations of the bundle.
pub fn klyachko_arrangement(bundle: &KlyachkoBundle) -> Result<Arrangement> {
    let mut subs = Vec::new();
    for f in bundle.filtrations() {
        for (_, s) in f.steps() {
            subs.push(s.clone());
        }
    }
    Arrangement::closure(bundle.rank(), &subs)
}

/// The intersection closure of the level subspaces E_{v >= u} over a
/// finite set of characters u (the subspaces of fiber vectors whose ray
/// valuations dominate the pairing with u).
pub fn character_arrangement(
    bundle: &KlyachkoBundle,
    weights: &[Character],
) -> Result<Arrangement> {
    let mut subs = Vec::new();
    for u in weights {
        let mut v = Subspace::full(bundle.rank());
        for (i, ray) in bundle.fan().rays().iter().enumerate() {
            v = v.intersect(&bundle.filtrations()[i].at_level(dot_ii(u, ray)))?;
        }
        subs.push(v);
    }
    Arrangement::closure(bundle.rank(), &subs)
}

/// A ground-set vector of a matroid realization with its source member.
#[derive(Clone, Debug, Serialize)]
pub struct GroundElement {
    pub vector: Vec<Rat>,
    pub source: usize,
}

/// A generic spanning set realizing the matroid of an arrangement:
/// one basis per irreducible member, drawn by a seeded generator and
/// verified generic.
#[derive(Clone, Debug)]
pub struct MatroidRealization {
    ambient: usize,
    ground: Vec<GroundElement>,
    member_spans: Vec<Subspace>,
    pub seed: u64,
}

/// Deterministic splitmix64 stream.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn small_int(&mut self, bound: u64) -> i64 {
        (self.next() % (2 * bound + 1)) as i64 - bound as i64
    }
}

impl MatroidRealization {
    /// Draws a generic ground set for the arrangement with the given
    /// seed, verifying the genericity condition exhaustively and
    /// retrying with fresh draws a bounded number of times.
    pub fn generic(arr: &Arrangement, seed: u64) -> Result<Self> {
        let mut rng = Rng(seed.wrapping_mul(0x5851f42d4c957f2d).wrapping_add(1));
        let irreducible: Vec<Subspace> = arr.irreducible_members().into_iter().cloned().collect();
        const RETRIES: u32 = 32;
        for _ in 0..RETRIES {
            let mut ground = Vec::new();
            for (src, u) in irreducible.iter().enumerate() {
                let basis = u.basis_rows();
                let d = basis.len();
                for _ in 0..d {
                    let coeffs: Vec<i64> = (0..d).map(|_| rng.small_int(9)).collect();
                    let vector: Vec<Rat> = (0..u.ambient_dim())
                        .map(|j| {
                            let mut acc = Rat::zero();
                            for (c, row) in coeffs.iter().zip(basis) {
                                acc += &(&Rat::from(*c) * &row[j]);
                            }
                            acc
                        })
                        .collect();
                    ground.push(GroundElement {
                        vector,
                        source: src,
                    });
                }
            }
            let cand = MatroidRealization {
                ambient: arr.ambient_dim(),
                ground,
                member_spans: irreducible.clone(),
                seed,
            };
            if cand.spans_match() && cand.is_generic() {
                return Ok(cand);
            }
        }
        Err(Error::GenericityFailure(RETRIES))
    }

    pub fn ground(&self) -> &[GroundElement] {
        &self.ground
    }

    pub fn len(&self) -> usize {
        self.ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }

    pub fn sources(&self) -> &[Subspace] {
        &self.member_spans
    }

    /// Matroid rank of a subset of ground indices: the dimension of the
    /// span of the corresponding vectors.
    pub fn rank(&self, subset: &[usize]) -> usize {
        let rows: Vec<Vec<Rat>> = subset
            .iter()
            .map(|&i| self.ground[i].vector.clone())
            .collect();
        Matrix::from_rows(self.ambient, &rows)
            .expect("ground vectors have the ambient length")
            .rank()
    }

    /// The vectors drawn for each member must actually span it.
    fn spans_match(&self) -> bool {
        self.member_spans.iter().enumerate().all(|(src, u)| {
            let rows: Vec<Vec<Rat>> = self
                .ground
                .iter()
                .filter(|g| g.source == src)
                .map(|g| g.vector.clone())
                .collect();
            Subspace::span(self.ambient, &rows).expect("valid rows") == *u
        })
    }

    /// The genericity condition: for every subset B0 of the ground set
    /// and every ground vector e (drawn for member U) outside B0, e lies
    /// in span(B0) iff all of U does.
    pub fn is_generic(&self) -> bool {
        let n = self.ground.len();
        debug_assert!(n <= 20, "exhaustive genericity check is exponential");
        for mask in 0u64..(1 << n) {
            let rows: Vec<Vec<Rat>> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| self.ground[i].vector.clone())
                .collect();
            let span = Subspace::span(self.ambient, &rows).expect("valid rows");
            for (i, e) in self.ground.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    continue;
                }
                let u = &self.member_spans[e.source];
                if span.contains_vec(&e.vector) != span.contains_sub(u) {
                    return false;
                }
            }
        }
        true
    }
}

/// One parliament member: a ground vector with its piecewise linear
/// valuation value and the attached polytope.
#[derive(Clone, Debug)]
pub struct ParliamentEntry {
    pub ground_index: usize,
    pub pl: PlFunction,
    pub polytope: Polytope,
}

/// The parliament of polytopes of a bundle over a matroid realization.
#[derive(Clone, Debug)]
pub struct Parliament {
    pub realization: MatroidRealization,
    pub entries: Vec<ParliamentEntry>,
}

/// Attaches the valuation value and polytope to every ground vector.
pub fn parliament(bundle: &KlyachkoBundle, realization: MatroidRealization) -> Result<Parliament> {
    let entries = realization
        .ground()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let pl = bundle.pl_valuation(&g.vector)?;
            let polytope = pl.polytope();
            Ok(ParliamentEntry {
                ground_index: i,
                pl,
                polytope,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Parliament {
        realization,
        entries,
    })
}

/// The parliament of the Klyachko arrangement with the given seed.
pub fn parliament_of_bundle(bundle: &KlyachkoBundle, seed: u64) -> Result<Parliament> {
    let arr = klyachko_arrangement(bundle)?;
    let realization = MatroidRealization::generic(&arr, seed)?;
    parliament(bundle, realization)
}

impl Parliament {
    /// The matroid rank of the ground vectors whose polytopes contain u.
    pub fn weight_dim(&self, u: &Character) -> usize {
        let subset: Vec<usize> = self
            .entries
            .iter()
            .filter(|e| e.polytope.contains_int(u))
            .map(|e| e.ground_index)
            .collect();
        self.realization.rank(&subset)
    }

    /// The integer bounding box of all parliament polytopes, padded by 1.
    pub fn weight_box(&self) -> (Vec<i64>, Vec<i64>) {
        let n = self
            .entries
            .first()
            .map(|e| e.polytope.ambient_dim())
            .unwrap_or(0);
        let mut lo = vec![i64::MAX; n];
        let mut hi = vec![i64::MIN; n];
        for e in &self.entries {
            for v in e.polytope.vertices() {
                for j in 0..n {
                    lo[j] = lo[j].min(v[j].floor().try_into().unwrap_or(i64::MAX));
                    hi[j] = hi[j].max(v[j].ceil().try_into().unwrap_or(i64::MIN));
                }
            }
        }
        for j in 0..n {
            if lo[j] > hi[j] {
                (lo[j], hi[j]) = (0, 0);
            }
            lo[j] -= 1;
            hi[j] += 1;
        }
        (lo, hi)
    }
}

/// Exact dimension of the weight-u space of global sections: the
/// intersection of the ray filtration subspaces at the pairing levels.
pub fn h0_weight_dim_direct(bundle: &KlyachkoBundle, u: &Character) -> Result<usize> {
    let mut v = Subspace::full(bundle.rank());
    for (i, ray) in bundle.fan().rays().iter().enumerate() {
        v = v.intersect(&bundle.filtrations()[i].at_level(dot_ii(u, ray)))?;
    }
    Ok(v.dim())
}

/// All nonzero weight dimensions, computed with the direct formula and
/// cross-checked against the matroid formula at every weight of the
/// parliament's padded bounding box.
pub fn h0_all(bundle: &KlyachkoBundle, seed: u64) -> Result<BTreeMap<Character, usize>> {
    let parl = parliament_of_bundle(bundle, seed)?;
    let (lo, hi) = parl.weight_box();
    let n = lo.len();
    let mut out = BTreeMap::new();
    let mut u = lo.clone();
    loop {
        let direct = h0_weight_dim_direct(bundle, &u)?;
        let matroid = parl.weight_dim(&u);
        assert_eq!(
            direct, matroid,
            "direct and matroid weight dimensions must agree at {u:?}"
        );
        if direct > 0 {
            out.insert(u.clone(), direct);
        }
        let mut j = 0;
        loop {
            if j == n {
                return Ok(out);
            }
            if u[j] < hi[j] {
                u[j] += 1;
                for k in 0..j {
                    u[k] = lo[k];
                }
                break;
            }
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::rat::rat_vec;

    #[test]
    fn tp2_arrangement() {
        let b = examples::tangent_pn(2).unwrap();
        let arr = klyachko_arrangement(&b).unwrap();
        // {0, span v1, span v2, span v3, E}
        assert_eq!(arr.members().len(), 5);
        assert!(arr.is_intersection_closed());
        let irr = arr.irreducible_members();
        assert_eq!(irr.len(), 3);
        assert!(irr.iter().all(|u| u.dim() == 1));
    }

    #[test]
    fn arrangements_of_simple_bundles() {
        // rank 1: {0, E}
        let b = examples::o_d_on_pn(2, 3).unwrap();
        let arr = klyachko_arrangement(&b).unwrap();
        assert_eq!(arr.members().len(), 2);
        assert_eq!(arr.irreducible_members().len(), 1);
        // split rank 2 with diagonal data: {0, e1, e2, E}
        let fan = examples::fan_pn(1).unwrap();
        let filts = vec![
            crate::klyachko::Filtration::new(
                2,
                vec![
                    (0, Subspace::full(2)),
                    (1, Subspace::line(&rat_vec(&[1, 0])).unwrap()),
                ],
            )
            .unwrap(),
            crate::klyachko::Filtration::new(
                2,
                vec![
                    (0, Subspace::full(2)),
                    (1, Subspace::line(&rat_vec(&[0, 1])).unwrap()),
                ],
            )
            .unwrap(),
        ];
        let b = crate::klyachko::KlyachkoBundle::new(fan, filts).unwrap();
        let arr = klyachko_arrangement(&b).unwrap();
        assert_eq!(arr.members().len(), 4);
    }

    #[test]
    fn character_arrangement_matches() {
        let b = examples::tangent_pn(2).unwrap();
        let mut box_weights = Vec::new();
        for x in -2i64..=2 {
            for y in -2i64..=2 {
                box_weights.push(vec![x, y]);
            }
        }
        let ca = character_arrangement(&b, &box_weights).unwrap();
        let ka = klyachko_arrangement(&b).unwrap();
        assert_eq!(ca, ka);
        for m in ca.members() {
            assert!(ka.contains(m));
        }
    }

    #[test]
    fn tp2_matroid_is_uniform() {
        let b = examples::tangent_pn(2).unwrap();
        let arr = klyachko_arrangement(&b).unwrap();
        for seed in [0u64, 1, 2] {
            let m = MatroidRealization::generic(&arr, seed).unwrap();
            assert_eq!(m.len(), 3);
            // uniform rank 2 on 3 elements
            for i in 0..3 {
                assert_eq!(m.rank(&[i]), 1);
                for j in (i + 1)..3 {
                    assert_eq!(m.rank(&[i, j]), 2);
                }
            }
            assert_eq!(m.rank(&[0, 1, 2]), 2);
        }
    }

    #[test]
    fn free_matroid_for_trivial_arrangement() {
        let arr = Arrangement::closure(3, &[]).unwrap();
        let m = MatroidRealization::generic(&arr, 0).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.rank(&[0, 1, 2]), 3);
    }

    #[test]
    fn tp2_parliament_triangles() {
        let b = examples::tangent_pn(2).unwrap();
        let parl = parliament_of_bundle(&b, 0).unwrap();
        assert_eq!(parl.entries.len(), 3);
        let expected: Vec<std::collections::BTreeSet<Vec<Rat>>> = vec![
            [rat_vec(&[0, 0]), rat_vec(&[1, 0]), rat_vec(&[1, -1])]
                .into_iter()
                .collect(),
            [rat_vec(&[0, 0]), rat_vec(&[0, 1]), rat_vec(&[-1, 1])]
                .into_iter()
                .collect(),
            [rat_vec(&[0, 0]), rat_vec(&[-1, 0]), rat_vec(&[0, -1])]
                .into_iter()
                .collect(),
        ];
        for exp in &expected {
            assert!(
                parl.entries.iter().any(|e| e.polytope.vertex_set() == *exp),
                "expected a triangle with vertices {exp:?}"
            );
        }
    }

    #[test]
    fn tp2_weight_dims() {
        let b = examples::tangent_pn(2).unwrap();
        assert_eq!(h0_weight_dim_direct(&b, &vec![0, 0]).unwrap(), 2);
        assert_eq!(h0_weight_dim_direct(&b, &vec![1, 0]).unwrap(), 1);
        assert_eq!(h0_weight_dim_direct(&b, &vec![1, 1]).unwrap(), 0);
        let h0 = h0_all(&b, 0).unwrap();
        let total: usize = h0.values().sum();
        assert_eq!(total, 8);
        assert_eq!(h0.get(&vec![0, 0]), Some(&2));
        for u in [[1i64, 0], [-1, 0], [0, 1], [0, -1], [1, -1], [-1, 1]] {
            assert_eq!(h0.get(&u.to_vec()), Some(&1), "weight {u:?}");
        }
    }

    #[test]
    fn h0_of_line_bundles() {
        // O(1) on P^2: three weights of dimension 1
        let b = examples::o_d_on_pn(2, 1).unwrap();
        let h0 = h0_all(&b, 0).unwrap();
        assert_eq!(h0.len(), 3);
        assert!(h0.values().all(|&d| d == 1));
        // O(-1) on P^1: empty
        let b = examples::o_d_on_pn(1, -1).unwrap();
        assert!(h0_all(&b, 0).unwrap().is_empty());
        // O on P^1: single weight 0
        let b = examples::o_d_on_pn(1, 0).unwrap();
        let h0 = h0_all(&b, 0).unwrap();
        assert_eq!(h0.len(), 1);
        assert_eq!(h0.get(&vec![0]), Some(&1));
    }
}
