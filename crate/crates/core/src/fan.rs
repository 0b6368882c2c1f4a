//! Rational polyhedral cones and complete fans.
//!
//! Cones carry both generators (primitive extreme rays) and a facet
//! description, computed exactly by brute-force dual enumeration; at the
//! sizes this library targets (lattice rank at most 4 or 5, a handful of
//! rays per cone) this beats maintaining an incremental double
//! description. Fans are stored face-closed with cones keyed by their
//! sorted generator sets, so refinement and wall enumeration are
//! canonical.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dual_vector, int_kernel, neg, primitive, reduce_mod_lattice, row_hnf};
use crate::linalg::Matrix;
use crate::rat::{dot_int, dot_ii, rat_vec, Rat};

/// A primitive lattice vector spanning a ray of N.
pub type RayVector = Vec<i64>;
/// A character of the torus, i.e. a vector of M paired against N by the
/// dot product.
pub type Character = Vec<i64>;

fn rank_of(vectors: &[Vec<i64>], n: usize) -> usize {
    let rows: Vec<Vec<Rat>> = vectors.iter().map(|v| rat_vec(v)).collect();
    match Matrix::from_rows(n, &rows) {
        Ok(m) => m.rank(),
        Err(_) => 0,
    }
}

/// A strictly convex rational polyhedral cone.
///
/// `generators` are the primitive extreme rays, sorted; `facets` and
/// `equations` give the matching H-description: the cone is
/// {x : <f, x> >= 0 for facets f, <g, x> = 0 for equations g}.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Cone {
    ambient: usize,
    generators: Vec<RayVector>,
    facets: Vec<Character>,
    equations: Vec<Character>,
    dim: usize,
}

impl Cone {
    /// The cone spanned by the given vectors. Fails if the result is not
    /// strictly convex.
    pub fn from_generators(ambient: usize, gens: &[Vec<i64>]) -> Result<Cone> {
        for g in gens {
            if g.len() != ambient {
                return Err(Error::InvalidCone(format!(
                    "generator of length {} in ambient dimension {ambient}",
                    g.len()
                )));
            }
        }
        let mut prim: Vec<Vec<i64>> = gens
            .iter()
            .map(|g| primitive(g))
            .filter(|g| g.iter().any(|&x| x != 0))
            .collect();
        prim.sort();
        prim.dedup();
        let dim = rank_of(&prim, ambient);
        let equations = int_kernel(&prim, ambient);
        let facets = facet_normals(ambient, &prim, dim, &equations)?;

        // strict convexity: the face where every constraint is tight is {0}
        let mut all_constraints = facets.clone();
        all_constraints.extend(equations.iter().cloned());
        if rank_of(&all_constraints, ambient) != ambient {
            return Err(Error::InvalidCone("cone contains a line".into()));
        }

        // keep only the extreme rays
        let extreme: Vec<Vec<i64>> = prim
            .iter()
            .filter(|g| {
                let mut tight: Vec<Vec<i64>> =
                    facets.iter().filter(|f| dot_ii(f, g) == 0).cloned().collect();
                tight.extend(equations.iter().cloned());
                rank_of(&tight, ambient) == ambient - 1
            })
            .cloned()
            .collect();

        let cone = Cone {
            ambient,
            generators: extreme,
            facets,
            equations,
            dim,
        };
        debug_assert!(prim.iter().all(|g| cone.contains_int(g)));
        Ok(cone)
    }

    /// The cone {x : <e, x> = 0, <f, x> >= 0}. Fails if not strictly convex.
    pub fn from_hrep(ambient: usize, equations: &[Vec<i64>], inequalities: &[Vec<i64>]) -> Result<Cone> {
        let rays = rays_of_hrep(ambient, equations, inequalities);
        Cone::from_generators(ambient, &rays)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[RayVector] {
        &self.generators
    }

    pub fn facets(&self) -> &[Character] {
        &self.facets
    }

    pub fn equations(&self) -> &[Character] {
        &self.equations
    }

    pub fn is_zero(&self) -> bool {
        self.dim == 0
    }

    pub fn contains_int(&self, x: &[i64]) -> bool {
        self.equations.iter().all(|e| dot_ii(e, x) == 0)
            && self.facets.iter().all(|f| dot_ii(f, x) >= 0)
    }

    pub fn contains_rat(&self, x: &[Rat]) -> bool {
        self.equations.iter().all(|e| dot_int(x, e).is_zero())
            && self.facets.iter().all(|f| !dot_int(x, f).is_negative())
    }

    pub fn contains_cone(&self, other: &Cone) -> bool {
        other.generators.iter().all(|g| self.contains_int(g))
    }

    /// A lattice point interior to the cone (relative interior): the sum
    /// of the generators.
    pub fn interior_point(&self) -> Vec<i64> {
        let mut p = vec![0i64; self.ambient];
        for g in &self.generators {
            for (a, b) in p.iter_mut().zip(g) {
                *a += b;
            }
        }
        p
    }

    /// Canonical key: the sorted generator set.
    pub fn key(&self) -> Vec<RayVector> {
        self.generators.clone()
    }

    /// All faces, including {0} and the cone itself.
    pub fn faces(&self) -> Vec<Cone> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let nf = self.facets.len();
        for mask in 0..(1u64 << nf) {
            let tight: Vec<&Character> = (0..nf).filter(|i| mask >> i & 1 == 1).map(|i| &self.facets[i]).collect();
            let gens: Vec<Vec<i64>> = self
                .generators
                .iter()
                .filter(|g| tight.iter().all(|f| dot_ii(f, g) == 0))
                .cloned()
                .collect();
            if seen.insert(gens.clone()) {
                out.push(Cone::from_generators(self.ambient, &gens).expect("face of a valid cone"));
            }
        }
        out
    }

    /// The intersection with another cone, via the combined H-description.
    pub fn intersect(&self, other: &Cone) -> Result<Cone> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch(self.ambient, other.ambient));
        }
        let mut eqs = self.equations.clone();
        eqs.extend(other.equations.iter().cloned());
        let mut ineqs = self.facets.clone();
        ineqs.extend(other.facets.iter().cloned());
        Cone::from_hrep(self.ambient, &eqs, &ineqs)
    }

    /// Splits the cone along the hyperplane <cut, x> = 0; returns the
    /// full-dimensional (relative to the cone) pieces.
    pub fn split_by(&self, cut: &[i64]) -> Vec<Cone> {
        let signs: Vec<i64> = self.generators.iter().map(|g| dot_ii(cut, g).signum()).collect();
        if signs.iter().all(|&s| s >= 0) || signs.iter().all(|&s| s <= 0) {
            return vec![self.clone()];
        }
        let mut pieces = Vec::new();
        for side in [cut.to_vec(), neg(cut)] {
            let mut ineqs = self.facets.clone();
            ineqs.push(side);
            if let Ok(c) = Cone::from_hrep(self.ambient, &self.equations, &ineqs) {
                if c.dim == self.dim {
                    pieces.push(c);
                }
            }
        }
        pieces
    }
}

/// Facet normals of cone(gens), canonical modulo the span's orthogonal
/// lattice and sign-normalized nonnegative on the generators.
fn facet_normals(
    ambient: usize,
    gens: &[Vec<i64>],
    dim: usize,
    equations: &[Vec<i64>],
) -> Result<Vec<Character>> {
    if dim == 0 {
        return Ok(Vec::new());
    }
    let mut out: BTreeSet<Character> = BTreeSet::new();
    // every facet is spanned by generators lying on it, so some
    // (dim-1)-subset of generators spans its hyperplane within the span
    let m = gens.len();
    let k = dim - 1;
    let mut subset = vec![0usize; k];
    enumerate_subsets(m, k, &mut subset, 0, 0, &mut |idx: &[usize]| {
        let chosen: Vec<Vec<i64>> = idx.iter().map(|&i| gens[i].clone()).collect();
        if rank_of(&chosen, ambient) != k {
            return;
        }
        let kernel = int_kernel(&chosen, ambient);
        // kernel contains span^perp; the candidate normal generates the
        // rank-1 quotient kernel / span^perp
        for cand in &kernel {
            let red = reduce_mod_lattice(cand, equations);
            if red.iter().all(|&x| x == 0) {
                continue;
            }
            let red = primitive(&red);
            for f in [red.clone(), neg(&red)] {
                let vals: Vec<i64> = gens.iter().map(|g| dot_ii(&f, g)).collect();
                if vals.iter().all(|&v| v >= 0) && vals.iter().any(|&v| v > 0) {
                    // genuine facet: tight generators span a (dim-1)-face
                    let tight: Vec<Vec<i64>> = gens
                        .iter()
                        .zip(&vals)
                        .filter(|(_, &v)| v == 0)
                        .map(|(g, _)| g.clone())
                        .collect();
                    if rank_of(&tight, ambient) == k {
                        out.insert(f);
                    }
                }
            }
        }
    });
    if dim == 1 {
        // single ray: one supporting inequality positive on the generator
        // (not valid if the generators span a line)
        let g = &gens[0];
        if let Some(f) = dual_vector(&primitive(g)) {
            if gens.iter().all(|h| dot_ii(&f, h) > 0) {
                out.insert(reduce_mod_lattice(&f, equations));
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn enumerate_subsets(
    m: usize,
    k: usize,
    buf: &mut Vec<usize>,
    pos: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if pos == k {
        f(buf);
        return;
    }
    for i in start..m {
        buf[pos] = i;
        enumerate_subsets(m, k, buf, pos + 1, i + 1, f);
    }
}

/// Extreme rays of {x : <e,x> = 0, <f,x> >= 0}, assuming the set is a
/// pointed cone.
fn rays_of_hrep(ambient: usize, equations: &[Vec<i64>], inequalities: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut ineqs: Vec<Vec<i64>> = inequalities.iter().map(|f| primitive(f)).collect();
    ineqs.sort();
    ineqs.dedup();
    let mut rays: BTreeSet<Vec<i64>> = BTreeSet::new();
    let m = ineqs.len();
    let satisfies = |x: &[i64]| {
        equations.iter().all(|e| dot_ii(e, x) == 0) && ineqs.iter().all(|f| dot_ii(f, x) >= 0)
    };
    // a ray is cut out by the equations plus tight inequalities of total
    // rank ambient-1; enumerate inequality subsets (m is tiny)
    for mask in 0..(1u64 << m) {
        if (mask.count_ones() as usize) > ambient.saturating_sub(1) {
            continue;
        }
        let mut rows: Vec<Vec<i64>> = equations.to_vec();
        for i in 0..m {
            if mask >> i & 1 == 1 {
                rows.push(ineqs[i].clone());
            }
        }
        if rank_of(&rows, ambient) != ambient - 1 {
            continue;
        }
        let kernel = int_kernel(&rows, ambient);
        debug_assert_eq!(kernel.len(), 1);
        let g = primitive(&kernel[0]);
        for cand in [g.clone(), neg(&g)] {
            if satisfies(&cand) {
                rays.insert(cand);
            }
        }
    }
    rays.into_iter().collect()
}

/// Data attached to a wall (codimension-1 cone between two maximal cones).
#[derive(Clone, Debug)]
pub struct WallData {
    /// Index of the maximal cone on the positive side of `normal`.
    pub sigma: usize,
    /// Index of the maximal cone on the negative side.
    pub sigma_prime: usize,
    /// Primitive generator of the wall's orthogonal lattice, nonnegative
    /// on `sigma`.
    pub normal: Character,
    /// Integral vector in `sigma` pairing to 1 with `normal`.
    pub dual_ray: RayVector,
}

/// A fan: rays, cones closed under faces, and the maximal cones.
#[derive(Clone, Debug)]
pub struct Fan {
    ambient: usize,
    rays: Vec<RayVector>,
    cones: Vec<Cone>,
    maximal: Vec<usize>,
}

impl PartialEq for Fan {
    fn eq(&self, other: &Self) -> bool {
        self.ambient == other.ambient && self.cone_keys() == other.cone_keys()
    }
}
impl Eq for Fan {}

#[derive(Serialize, Deserialize)]
struct FanJson {
    rank: usize,
    rays: Vec<Vec<i64>>,
    maximal_cones: Vec<Vec<usize>>,
}

impl Serialize for Fan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FanJson {
            rank: self.ambient,
            rays: self.rays.clone(),
            maximal_cones: self
                .maximal
                .iter()
                .map(|&c| {
                    self.cones[c]
                        .generators()
                        .iter()
                        .map(|g| self.ray_index(g).expect("maximal cone generator is a ray"))
                        .collect()
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = FanJson::deserialize(d)?;
        Fan::new(j.rank, j.rays, &j.maximal_cones).map_err(serde::de::Error::custom)
    }
}

impl Fan {
    /// Builds a fan from rays and maximal cones given as ray index lists,
    /// validating primitivity, face closure, and the fan property.
    pub fn new(ambient: usize, rays: Vec<Vec<i64>>, maximal_cones: &[Vec<usize>]) -> Result<Fan> {
        for r in &rays {
            if r.len() != ambient {
                return Err(Error::InvalidFan("ray has wrong length".into()));
            }
            if primitive(r) != *r || r.iter().all(|&x| x == 0) {
                return Err(Error::InvalidFan(format!("ray {r:?} is not primitive")));
            }
        }
        let mut maximal = Vec::new();
        for idx in maximal_cones {
            let gens: Vec<Vec<i64>> = idx
                .iter()
                .map(|&i| {
                    rays.get(i)
                        .cloned()
                        .ok_or_else(|| Error::InvalidFan(format!("ray index {i} out of range")))
                })
                .collect::<Result<_>>()?;
            let cone = Cone::from_generators(ambient, &gens)?;
            if cone.generators().len() != gens.len() {
                return Err(Error::InvalidFan(format!(
                    "cone on rays {idx:?}: some listed rays are not extreme"
                )));
            }
            maximal.push(cone);
        }
        for (i, a) in maximal.iter().enumerate() {
            for (j, b) in maximal.iter().enumerate() {
                if i != j && a.key() != b.key() && b.contains_cone(a) {
                    return Err(Error::InvalidFan(format!(
                        "cone {:?} is contained in cone {:?}",
                        a.generators(),
                        b.generators()
                    )));
                }
            }
        }
        let mut fan = Fan::from_maximal_cones(ambient, maximal)?;
        // keep the caller's ray order: filtration lists and diagram rows
        // are indexed by it
        let mut sorted = rays.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != rays.len() {
            return Err(Error::InvalidFan("duplicate ray listed".into()));
        }
        if sorted != fan.rays {
            return Err(Error::InvalidFan(
                "the listed rays must be exactly the rays of the fan".into(),
            ));
        }
        fan.rays = rays;
        Ok(fan)
    }

    /// Builds a fan from its maximal cones (cones contained in another
    /// given cone are dropped).
    pub fn from_maximal_cones(ambient: usize, mut maximal: Vec<Cone>) -> Result<Fan> {
        if maximal.is_empty() {
            return Err(Error::InvalidFan("no cones".into()));
        }
        maximal.sort_by(|a, b| a.key().cmp(&b.key()));
        maximal.dedup_by(|a, b| a.key() == b.key());
        let redundant: Vec<bool> = maximal
            .iter()
            .map(|c| {
                maximal
                    .iter()
                    .any(|d| d.key() != c.key() && d.contains_cone(c))
            })
            .collect();
        let maximal: Vec<Cone> = maximal
            .into_iter()
            .zip(redundant)
            .filter(|(_, r)| !r)
            .map(|(c, _)| c)
            .collect();

        // fan property: pairwise intersections are faces of each
        for (i, a) in maximal.iter().enumerate() {
            for b in maximal.iter().skip(i + 1) {
                let inter = a.intersect(b)?;
                let is_face =
                    |c: &Cone, f: &Cone| c.faces().iter().any(|x| x.key() == f.key());
                if !is_face(a, &inter) || !is_face(b, &inter) {
                    return Err(Error::InvalidFan(format!(
                        "cones {:?} and {:?} do not meet along a common face",
                        a.generators(),
                        b.generators()
                    )));
                }
            }
        }

        // face closure
        let mut by_key: BTreeMap<Vec<RayVector>, Cone> = BTreeMap::new();
        for c in &maximal {
            for f in c.faces() {
                by_key.entry(f.key()).or_insert(f);
            }
        }
        let cones: Vec<Cone> = by_key.into_values().collect();
        let maximal_idx: Vec<usize> = maximal
            .iter()
            .map(|m| cones.iter().position(|c| c.key() == m.key()).unwrap())
            .collect();
        let mut rays: Vec<Vec<i64>> = cones
            .iter()
            .filter(|c| c.dim() == 1)
            .map(|c| c.generators()[0].clone())
            .collect();
        rays.sort();
        rays.dedup();
        Ok(Fan {
            ambient,
            rays,
            cones,
            maximal: maximal_idx,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn rays(&self) -> &[RayVector] {
        &self.rays
    }

    pub fn ray_index(&self, v: &[i64]) -> Option<usize> {
        self.rays.iter().position(|r| r == v)
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn maximal_cones(&self) -> impl Iterator<Item = &Cone> {
        self.maximal.iter().map(|&i| &self.cones[i])
    }

    pub fn maximal_cone(&self, i: usize) -> &Cone {
        &self.cones[self.maximal[i]]
    }

    pub fn n_maximal(&self) -> usize {
        self.maximal.len()
    }

    fn cone_keys(&self) -> BTreeSet<Vec<RayVector>> {
        self.cones.iter().map(|c| c.key()).collect()
    }

    /// Index (into the maximal list) of some maximal cone containing x.
    pub fn max_cone_containing(&self, x: &[Rat]) -> Option<usize> {
        (0..self.maximal.len()).find(|&i| self.maximal_cone(i).contains_rat(x))
    }

    pub fn max_cone_containing_int(&self, x: &[i64]) -> Option<usize> {
        (0..self.maximal.len()).find(|&i| self.maximal_cone(i).contains_int(x))
    }

    /// True iff the fan covers all of N_R: every maximal cone is
    /// full-dimensional, every codimension-1 face of a maximal cone is
    /// shared by exactly two of them, and the wall-adjacency graph is
    /// connected.
    pub fn is_complete(&self) -> bool {
        if self.maximal.iter().any(|&i| self.cones[i].dim() != self.ambient) {
            return false;
        }
        if self.ambient == 0 {
            return true;
        }
        let mut wall_owners: BTreeMap<Vec<RayVector>, Vec<usize>> = BTreeMap::new();
        for (mi, &ci) in self.maximal.iter().enumerate() {
            for f in self.cones[ci].faces() {
                if f.dim() == self.ambient - 1 {
                    wall_owners.entry(f.key()).or_default().push(mi);
                }
            }
        }
        if wall_owners.values().any(|v| v.len() != 2) {
            return false;
        }
        // connectivity of the wall graph
        let n = self.maximal.len();
        let mut adj = vec![Vec::new(); n];
        for owners in wall_owners.values() {
            adj[owners[0]].push(owners[1]);
            adj[owners[1]].push(owners[0]);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// The walls of a complete fan: codimension-1 cones with their two
    /// maximal neighbors.
    pub fn walls(&self) -> Result<Vec<(Cone, usize, usize)>> {
        if !self.is_complete() {
            return Err(Error::NotComplete);
        }
        let mut owners: BTreeMap<Vec<RayVector>, Vec<usize>> = BTreeMap::new();
        for (mi, &ci) in self.maximal.iter().enumerate() {
            for f in self.cones[ci].faces() {
                if f.dim() == self.ambient - 1 {
                    owners.entry(f.key()).or_default().push(mi);
                }
            }
        }
        let mut out = Vec::new();
        for (key, own) in owners {
            let cone = Cone::from_generators(self.ambient, &key)?;
            out.push((cone, own[0], own[1]));
        }
        Ok(out)
    }

    /// Wall data for a codimension-1 cone tau: the two neighboring maximal
    /// cones, the primitive normal w of tau's orthogonal (nonnegative on
    /// the first neighbor), and an integral v in the first neighbor with
    /// <w, v> = 1.
    pub fn wall_data(&self, tau: &Cone) -> Result<WallData> {
        if tau.dim() + 1 != self.ambient {
            return Err(Error::NotAWall);
        }
        let owners: Vec<usize> = (0..self.maximal.len())
            .filter(|&i| {
                self.maximal_cone(i)
                    .faces()
                    .iter()
                    .any(|f| f.key() == tau.key())
            })
            .collect();
        if owners.len() != 2 {
            return Err(Error::NotAWall);
        }
        let (sigma, sigma_prime) = (owners[0], owners[1]);
        let kernel = int_kernel(tau.generators(), self.ambient);
        debug_assert_eq!(kernel.len(), 1);
        let mut w = primitive(&kernel[0]);
        let sig = &self.cones[self.maximal[sigma]];
        if sig.generators().iter().any(|g| dot_ii(&w, g) < 0) {
            w = neg(&w);
        }
        debug_assert!(sig.generators().iter().all(|g| dot_ii(&w, g) >= 0));

        // v0 with <w, v0> = 1, pushed into sigma along tau's interior
        let v0 = dual_vector(&w).expect("w is primitive");
        let t0 = tau.interior_point();
        let mut k: i64 = 0;
        for f in sig.facets() {
            let fv = dot_ii(f, &v0);
            if fv < 0 {
                let ft = dot_ii(f, &t0);
                assert!(ft > 0, "wall interior must be interior to other facets");
                // smallest k with fv + k*ft >= 0
                let need = (-fv + ft - 1) / ft;
                k = k.max(need);
            }
        }
        let dual_ray: Vec<i64> = v0.iter().zip(&t0).map(|(a, b)| a + k * b).collect();
        debug_assert!(sig.contains_int(&dual_ray));
        debug_assert_eq!(dot_ii(&w, &dual_ray), 1);
        Ok(WallData {
            sigma,
            sigma_prime,
            normal: w,
            dual_ray,
        })
    }

    /// The common refinement: all intersections of maximal cones, kept
    /// maximal under inclusion.
    pub fn common_refinement(&self, other: &Fan) -> Result<Fan> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch(self.ambient, other.ambient));
        }
        let mut pieces: Vec<Cone> = Vec::new();
        for a in self.maximal_cones() {
            for b in other.maximal_cones() {
                let c = a.intersect(b)?;
                if !c.is_zero() {
                    pieces.push(c);
                }
            }
        }
        if pieces.is_empty() {
            pieces.push(Cone::from_generators(self.ambient, &[])?);
        }
        Fan::from_maximal_cones(self.ambient, pieces)
    }

    /// Refines the fan by splitting every maximal cone along each of the
    /// given hyperplanes.
    pub fn subdivide_by_hyperplanes(&self, cuts: &[Vec<i64>]) -> Result<Fan> {
        let cuts: Vec<Vec<i64>> = {
            let mut cs: Vec<Vec<i64>> = cuts
                .iter()
                .filter(|c| c.iter().any(|&x| x != 0))
                .map(|c| {
                    let p = primitive(c);
                    if p.iter().find(|&&x| x != 0).copied().unwrap_or(0) < 0 {
                        neg(&p)
                    } else {
                        p
                    }
                })
                .collect();
            cs.sort();
            cs.dedup();
            cs
        };
        let mut pieces: Vec<Cone> = self.maximal_cones().cloned().collect();
        for cut in &cuts {
            pieces = pieces.into_iter().flat_map(|c| c.split_by(cut)).collect();
        }
        Fan::from_maximal_cones(self.ambient, pieces)
    }

    /// True iff every maximal cone of `self` lies inside some maximal
    /// cone of `coarser`.
    pub fn refines(&self, coarser: &Fan) -> bool {
        self.maximal_cones()
            .all(|c| coarser.maximal_cones().any(|d| d.contains_cone(c)))
    }
}

/// Canonical representative of the class of `u` in M_sigma, the character
/// lattice modulo sigma's orthogonal sublattice.
pub fn class_in_m_sigma(u: &[i64], sigma: &Cone) -> Vec<i64> {
    let perp = int_kernel(sigma.generators(), sigma.ambient_dim());
    reduce_mod_lattice(u, &row_hnf(&perp))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn fan_p2() -> Fan {
        Fan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, -1]],
            &[vec![0, 1], vec![1, 2], vec![0, 2]],
        )
        .unwrap()
    }

    pub fn fan_p1() -> Fan {
        Fan::new(1, vec![vec![1], vec![-1]], &[vec![0], vec![1]]).unwrap()
    }

    pub fn fan_p1xp1() -> Fan {
        Fan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1]],
            &[vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
        )
        .unwrap()
    }

    #[test]
    fn cone_membership() {
        let quad = Cone::from_generators(2, &[vec![1, 0], vec![0, 1]]).unwrap();
        assert!(quad.contains_int(&[1, 1]));
        assert!(!quad.contains_int(&[-1, 0]));
        // Example cone sigma_1 of the P^2 fan contains the third ray direction
        let sigma1 = Cone::from_generators(2, &[vec![0, 1], vec![-1, -1]]).unwrap();
        assert!(sigma1.contains_int(&[-1, -1]));
        assert!(sigma1.contains_rat(&rat_vec(&[-1, 0])));
    }

    #[test]
    fn cone_rejects_lines() {
        assert!(Cone::from_generators(2, &[vec![1, 0], vec![-1, 0]]).is_err());
    }

    #[test]
    fn double_description_consistency() {
        for gens in [
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![0, 1], vec![-1, -1]],
            vec![vec![1, 0], vec![1, 2]],
            vec![vec![2, 1], vec![1, 3]],
        ] {
            let c = Cone::from_generators(2, &gens).unwrap();
            let back = Cone::from_hrep(2, c.equations(), c.facets()).unwrap();
            assert_eq!(c.key(), back.key());
        }
        // 3d including a non-simplicial cone over a square
        let c = Cone::from_generators(
            3,
            &[vec![1, 0, 1], vec![0, 1, 1], vec![-1, 0, 1], vec![0, -1, 1]],
        )
        .unwrap();
        assert_eq!(c.generators().len(), 4);
        assert_eq!(c.facets().len(), 4);
        let back = Cone::from_hrep(3, c.equations(), c.facets()).unwrap();
        assert_eq!(c.key(), back.key());
    }

    #[test]
    fn lower_dimensional_cones() {
        let ray = Cone::from_generators(3, &[vec![1, 1, 0]]).unwrap();
        assert_eq!(ray.dim(), 1);
        assert_eq!(ray.equations().len(), 2);
        assert!(ray.contains_int(&[2, 2, 0]));
        assert!(!ray.contains_int(&[1, 1, 1]));
        assert!(!ray.contains_int(&[-1, -1, 0]));
        let zero = Cone::from_generators(2, &[]).unwrap();
        assert!(zero.is_zero());
        assert!(zero.contains_int(&[0, 0]));
        assert!(!zero.contains_int(&[1, 0]));
    }

    #[test]
    fn nonextreme_generators_are_dropped() {
        let c = Cone::from_generators(2, &[vec![1, 0], vec![1, 1], vec![0, 1]]).unwrap();
        assert_eq!(c.key(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn completeness() {
        assert!(fan_p2().is_complete());
        assert!(fan_p1().is_complete());
        assert!(fan_p1xp1().is_complete());
        let quadrant = Fan::new(2, vec![vec![1, 0], vec![0, 1]], &[vec![0, 1]]).unwrap();
        assert!(!quadrant.is_complete());
    }

    #[test]
    fn completeness_vs_random_cover() {
        // Monte-Carlo agreement: every random rational point lies in some
        // maximal cone of a complete fan.
        let fans = [fan_p2(), fan_p1xp1()];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for fan in &fans {
            for _ in 0..1000 {
                let x: Vec<Rat> = (0..2)
                    .map(|_| {
                        let n = (next() % 2001) as i64 - 1000;
                        let d = (next() % 9 + 1) as i64;
                        Rat::new(n, d)
                    })
                    .collect();
                assert!(fan.max_cone_containing(&x).is_some());
            }
        }
    }

    #[test]
    fn wall_data_p2() {
        let fan = fan_p2();
        let tau = Cone::from_generators(2, &[vec![1, 0]]).unwrap();
        let wd = fan.wall_data(&tau).unwrap();
        assert_eq!(wd.normal.len(), 2);
        assert_eq!(wd.normal[0], 0);
        assert_eq!(wd.normal[1].abs(), 1);
        assert_eq!(dot_ii(&wd.normal, &wd.dual_ray), 1);
        assert!(fan.maximal_cone(wd.sigma).contains_int(&wd.dual_ray));
        // normal vanishes on the wall and has opposite signs on the two sides
        for g in fan.maximal_cone(wd.sigma).generators() {
            assert!(dot_ii(&wd.normal, g) >= 0);
        }
        for g in fan.maximal_cone(wd.sigma_prime).generators() {
            assert!(dot_ii(&wd.normal, g) <= 0);
        }
    }

    #[test]
    fn wall_data_p1() {
        let fan = fan_p1();
        let tau = Cone::from_generators(1, &[]).unwrap();
        let wd = fan.wall_data(&tau).unwrap();
        assert_eq!(wd.normal.len(), 1);
        assert_eq!(wd.normal[0].abs(), 1);
        assert_eq!(dot_ii(&wd.normal, &wd.dual_ray), 1);
    }

    #[test]
    fn wall_data_p1xp1() {
        let fan = fan_p1xp1();
        let tau = Cone::from_generators(2, &[vec![1, 0]]).unwrap();
        let wd = fan.wall_data(&tau).unwrap();
        assert_eq!(wd.normal[0], 0);
        assert_eq!(wd.normal[1].abs(), 1);
        let sig = fan.maximal_cone(wd.sigma);
        assert!(sig.generators().iter().all(|g| dot_ii(&wd.normal, g) >= 0));
    }

    #[test]
    fn all_walls_of_p2() {
        let fan = fan_p2();
        let walls = fan.walls().unwrap();
        assert_eq!(walls.len(), 3);
        for (tau, a, b) in &walls {
            assert_eq!(tau.dim(), 1);
            assert_ne!(a, b);
        }
    }

    #[test]
    fn refinement_identity_and_assoc() {
        let fan = fan_p2();
        let same = fan.common_refinement(&fan).unwrap();
        assert_eq!(same, fan);
        let other = fan_p1xp1();
        let ab = fan.common_refinement(&other).unwrap();
        assert!(ab.refines(&fan));
        assert!(ab.refines(&other));
        let ba = other.common_refinement(&fan).unwrap();
        assert_eq!(ab, ba);
        // associativity up to cone-set equality
        let third = fan
            .subdivide_by_hyperplanes(&[vec![1, -1]])
            .unwrap();
        let left = ab.common_refinement(&third).unwrap();
        let right = fan.common_refinement(&other.common_refinement(&third).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn subdivision() {
        let quadrant = Fan::new(2, vec![vec![1, 0], vec![0, 1]], &[vec![0, 1]]).unwrap();
        let cut = quadrant.subdivide_by_hyperplanes(&[vec![1, -1]]).unwrap();
        assert_eq!(cut.n_maximal(), 2);
        assert_eq!(cut.rays().len(), 3);
        assert!(cut.ray_index(&[1, 1]).is_some());
        // empty cut list: unchanged
        let same = quadrant.subdivide_by_hyperplanes(&[]).unwrap();
        assert_eq!(same, quadrant);
        // P^1: any cut passes through 0, fan unchanged
        let p1 = fan_p1();
        assert_eq!(p1.subdivide_by_hyperplanes(&[vec![5]]).unwrap(), p1);
        // P^2 subdivided along x1 = x2 splits sigma_3 only
        let p2cut = fan_p2().subdivide_by_hyperplanes(&[vec![1, -1]]).unwrap();
        assert_eq!(p2cut.n_maximal(), 4);
    }

    #[test]
    fn m_sigma_classes() {
        // full-dimensional cone: representative is u itself
        let quad = Cone::from_generators(2, &[vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(class_in_m_sigma(&[3, -7], &quad), vec![3, -7]);
        // ray (1,0): class determined by the first coordinate
        let ray = Cone::from_generators(2, &[vec![1, 0]]).unwrap();
        assert_eq!(class_in_m_sigma(&[3, 7], &ray), vec![3, 0]);
        assert_eq!(class_in_m_sigma(&[3, -2], &ray), vec![3, 0]);
        // zero cone: everything is equivalent
        let zero = Cone::from_generators(2, &[]).unwrap();
        assert_eq!(class_in_m_sigma(&[3, 7], &zero), vec![0, 0]);
    }

    #[test]
    fn fan_rejects_overlapping_cones() {
        let res = Fan::new(
            2,
            vec![vec![1, 0], vec![0, 1], vec![1, 1]],
            &[vec![0, 1], vec![0, 2]],
        );
        assert!(res.is_err());
    }

    #[test]
    fn fan_json_round_trip() {
        let fan = fan_p2();
        let s = serde_json::to_string(&fan).unwrap();
        let back: Fan = serde_json::from_str(&s).unwrap();
        assert_eq!(fan, back);
        assert!(s.contains("\"rank\":2"));
    }
}
