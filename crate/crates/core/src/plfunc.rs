//! Piecewise linear functions on complete fans, polytopes, and the
//! duality between concave functions and polytopes.
//!
//! A `PlFunction` always carries its own fan; binary operations build a
//! common refinement internally, subdivided further along the locus where
//! the two arguments agree when taking minima. All comparisons reduce to
//! exact linear-part checks at the extreme rays of refined cones.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fan::{Cone, Fan};
use crate::lattice::primitive;
use crate::linalg::Matrix;
use crate::rat::{dot, dot_int, rat_vec, Rat};

/// Clears denominators and common factors: the primitive integer vector
/// on the ray spanned by `xs` (zero stays zero).
pub fn scale_to_integers(xs: &[Rat]) -> Vec<i64> {
    let mut lcm = BigInt::one();
    for x in xs {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = xs
        .iter()
        .map(|x| x.numer() * (&lcm / x.denom()))
        .collect();
    let mut g = BigInt::zero();
    for v in &ints {
        g = g.gcd(v);
    }
    if g.is_zero() {
        return vec![0; xs.len()];
    }
    ints.iter()
        .map(|v| (v / &g).to_i64().expect("coordinate fits in i64"))
        .collect()
}

/// A piecewise linear function, linear on each maximal cone of a
/// complete fan.
#[derive(Clone, Debug)]
pub struct PlFunction {
    fan: Fan,
    /// Linear functional per maximal cone, as a rational covector.
    parts: Vec<Vec<Rat>>,
    integral: bool,
}

impl PartialEq for PlFunction {
    fn eq(&self, other: &Self) -> bool {
        self.leq(other) && other.leq(self)
    }
}
impl Eq for PlFunction {}

#[derive(Serialize, Deserialize)]
struct PlFunctionJson {
    fan: Fan,
    values_on_rays: Vec<Rat>,
    linear_parts: Vec<Vec<Rat>>,
}

impl Serialize for PlFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlFunctionJson {
            fan: self.fan.clone(),
            values_on_rays: self.values_on_rays(),
            linear_parts: self.parts.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PlFunctionJson::deserialize(d)?;
        let f = PlFunction::new(j.fan, j.linear_parts).map_err(serde::de::Error::custom)?;
        if f.values_on_rays() != j.values_on_rays {
            return Err(serde::de::Error::custom(
                "values_on_rays disagree with linear_parts",
            ));
        }
        Ok(f)
    }
}

impl PlFunction {
    /// Builds a function from one linear part per maximal cone, checking
    /// completeness of the fan and agreement of adjacent parts on shared
    /// faces.
    pub fn new(fan: Fan, parts: Vec<Vec<Rat>>) -> Result<Self> {
        if !fan.is_complete() {
            return Err(Error::NotComplete);
        }
        if parts.len() != fan.n_maximal() {
            return Err(Error::InvalidPlFunction(format!(
                "{} linear parts for {} maximal cones",
                parts.len(),
                fan.n_maximal()
            )));
        }
        let n = fan.ambient_dim();
        for p in &parts {
            if p.len() != n {
                return Err(Error::InvalidPlFunction("linear part has wrong length".into()));
            }
        }
        // agreement on shared faces, checked at each common ray
        for ray in fan.rays() {
            let mut val: Option<Rat> = None;
            for i in 0..fan.n_maximal() {
                if fan.maximal_cone(i).contains_int(ray) {
                    let v = dot_int(&parts[i], ray);
                    match &val {
                        None => val = Some(v),
                        Some(w) => {
                            if *w != v {
                                return Err(Error::InvalidPlFunction(format!(
                                    "linear parts disagree at ray {ray:?}"
                                )));
                            }
                        }
                    }
                }
            }
        }
        let integral = parts.iter().all(|p| p.iter().all(|x| x.is_integer()));
        Ok(PlFunction { fan, parts, integral })
    }

    /// The globally linear function x -> <u, x> on the given fan.
    pub fn linear(fan: Fan, u: &[Rat]) -> Result<Self> {
        let parts = vec![u.to_vec(); fan.n_maximal()];
        PlFunction::new(fan, parts)
    }

    /// Interpolates prescribed values at the rays, cone by cone. Fails if
    /// some maximal cone's ray values admit no linear functional.
    pub fn from_ray_values(fan: &Fan, values: &[Rat]) -> Result<Self> {
        if values.len() != fan.rays().len() {
            return Err(Error::InvalidPlFunction(format!(
                "{} values for {} rays",
                values.len(),
                fan.rays().len()
            )));
        }
        let n = fan.ambient_dim();
        let mut parts = Vec::new();
        for i in 0..fan.n_maximal() {
            let cone = fan.maximal_cone(i);
            let rows: Vec<Vec<Rat>> = cone.generators().iter().map(|g| rat_vec(g)).collect();
            let rhs: Vec<Rat> = cone
                .generators()
                .iter()
                .map(|g| values[fan.ray_index(g).expect("generator is a ray")].clone())
                .collect();
            let m = Matrix::from_rows(n, &rows)?;
            let u = m.solve(&rhs).ok_or_else(|| {
                Error::InconsistentInterpolation(format!(
                    "values at the rays of cone {:?} are not linear",
                    cone.generators()
                ))
            })?;
            parts.push(u);
        }
        PlFunction::new(fan.clone(), parts)
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn parts(&self) -> &[Vec<Rat>] {
        &self.parts
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    pub fn eval(&self, x: &[Rat]) -> Rat {
        let i = self
            .fan
            .max_cone_containing(x)
            .expect("complete fan covers every point");
        dot(&self.parts[i], x)
    }

    pub fn eval_int(&self, x: &[i64]) -> Rat {
        self.eval(&rat_vec(x))
    }

    pub fn values_on_rays(&self) -> Vec<Rat> {
        self.fan
            .rays()
            .iter()
            .map(|r| {
                let i = self.fan.max_cone_containing_int(r).expect("complete");
                dot_int(&self.parts[i], r)
            })
            .collect()
    }

    /// Rewrites the function on a finer fan (which must refine this one).
    pub fn on_refinement(&self, finer: &Fan) -> Result<PlFunction> {
        if !finer.refines(&self.fan) {
            return Err(Error::NotARefinement);
        }
        let parts = (0..finer.n_maximal())
            .map(|i| {
                let p = finer.maximal_cone(i).interior_point();
                let parent = self
                    .fan
                    .max_cone_containing_int(&p)
                    .expect("refinement piece lies in a parent cone");
                self.parts[parent].clone()
            })
            .collect();
        PlFunction::new(finer.clone(), parts)
    }

    /// Both functions rewritten on the common refinement of their fans.
    pub fn aligned(&self, other: &PlFunction) -> Result<(PlFunction, PlFunction)> {
        let fan = self.fan.common_refinement(&other.fan)?;
        Ok((self.on_refinement(&fan)?, other.on_refinement(&fan)?))
    }

    /// Pointwise minimum. The result's fan is the common refinement
    /// subdivided along the locus where the two functions agree.
    pub fn min(&self, other: &PlFunction) -> Result<PlFunction> {
        let (a, b) = self.aligned(other)?;
        let cuts: Vec<Vec<i64>> = (0..a.fan.n_maximal())
            .map(|i| {
                let diff: Vec<Rat> = a.parts[i]
                    .iter()
                    .zip(&b.parts[i])
                    .map(|(x, y)| x - y)
                    .collect();
                scale_to_integers(&diff)
            })
            .filter(|c| c.iter().any(|&x| x != 0))
            .collect();
        let fine = a.fan.subdivide_by_hyperplanes(&cuts)?;
        let (a, b) = (a.on_refinement(&fine)?, b.on_refinement(&fine)?);
        let parts = (0..fine.n_maximal())
            .map(|i| {
                let p = rat_vec(&fine.maximal_cone(i).interior_point());
                if dot(&a.parts[i], &p) <= dot(&b.parts[i], &p) {
                    a.parts[i].clone()
                } else {
                    b.parts[i].clone()
                }
            })
            .collect();
        PlFunction::new(fine, parts)
    }

    /// Pointwise sum.
    pub fn add(&self, other: &PlFunction) -> Result<PlFunction> {
        let (a, b) = self.aligned(other)?;
        let parts = a
            .parts
            .iter()
            .zip(&b.parts)
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| x + y).collect())
            .collect();
        PlFunction::new(a.fan, parts)
    }

    pub fn negate(&self) -> PlFunction {
        let parts = self
            .parts
            .iter()
            .map(|p| p.iter().map(|x| -x).collect())
            .collect();
        PlFunction {
            fan: self.fan.clone(),
            parts,
            integral: self.integral,
        }
    }

    /// Exact pointwise comparison: self(x) <= other(x) for all x. Decided
    /// on the common refinement at extreme rays of each maximal cone.
    pub fn leq(&self, other: &PlFunction) -> bool {
        let (a, b) = self.aligned(other).expect("same ambient space");
        (0..a.fan.n_maximal()).all(|i| {
            a.fan
                .maximal_cone(i)
                .generators()
                .iter()
                .all(|g| dot_int(&a.parts[i], g) <= dot_int(&b.parts[i], g))
        })
    }

    /// The polytope {y : <v_rho, y> <= phi(v_rho)} cut out by the rays of
    /// the function's own fan. Within each cone the inequality at the
    /// extreme rays implies it on the whole cone, so this is exactly
    /// {y : <x, y> <= phi(x) for all x}.
    pub fn polytope(&self) -> Polytope {
        let ineqs: Vec<(Vec<i64>, Rat)> = self
            .fan
            .rays()
            .iter()
            .zip(self.values_on_rays())
            .map(|(r, v)| (r.clone(), v))
            .collect();
        Polytope::from_inequalities(self.fan.ambient_dim(), &ineqs)
    }

    /// The dual-sign polytope {y : <x, y> >= phi(x) for all x}.
    pub fn upper_polytope(&self) -> Polytope {
        let ineqs: Vec<(Vec<i64>, Rat)> = self
            .fan
            .rays()
            .iter()
            .zip(self.values_on_rays())
            .map(|(r, v)| (r.iter().map(|x| -x).collect(), -v))
            .collect();
        Polytope::from_inequalities(self.fan.ambient_dim(), &ineqs)
    }

    /// True iff the function equals the pointwise maximum of its own
    /// linear parts, i.e. iff it is the upper support function
    /// x -> max{<x, y> : y in P_phi} of its polytope. This is the
    /// positivity-side convexity of ray-value functions: a rank-1 bundle
    /// with jump levels phi(v_rho) is nef iff phi has this property.
    pub fn is_upper_convex(&self) -> bool {
        self.negate().is_concave()
    }

    /// True iff the function equals the pointwise minimum of its own
    /// linear parts, i.e. iff it is concave (equivalently, the support
    /// function of its upper polytope reproduces it).
    pub fn is_concave(&self) -> bool {
        let mut dedup: Vec<&Vec<Rat>> = Vec::new();
        for p in &self.parts {
            if !dedup.contains(&p) {
                dedup.push(p);
            }
        }
        (0..self.fan.n_maximal()).all(|i| {
            self.fan.maximal_cone(i).generators().iter().all(|g| {
                let own = dot_int(&self.parts[i], g);
                dedup.iter().all(|p| dot_int(p, g) >= own)
            })
        })
    }
}

/// A convex polytope in M_R, stored by inequalities `<normal, y> <= bound`
/// with primitive integer normals, plus the derived vertex set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polytope {
    ambient: usize,
    ineqs: Vec<(Vec<i64>, Rat)>,
    vertices: Vec<Vec<Rat>>,
    bounded: bool,
}

#[derive(Serialize, Deserialize)]
struct IneqJson {
    normal: Vec<i64>,
    bound: Rat,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    ambient: usize,
    inequalities: Vec<IneqJson>,
    #[serde(default)]
    vertices: Vec<Vec<Rat>>,
}

impl Serialize for Polytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolytopeJson {
            ambient: self.ambient,
            inequalities: self
                .ineqs
                .iter()
                .map(|(n, b)| IneqJson {
                    normal: n.clone(),
                    bound: b.clone(),
                })
                .collect(),
            vertices: self.vertices.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PolytopeJson::deserialize(d)?;
        let ineqs: Vec<(Vec<i64>, Rat)> = j
            .inequalities
            .into_iter()
            .map(|i| (i.normal, i.bound))
            .collect();
        Ok(Polytope::from_inequalities(j.ambient, &ineqs))
    }
}

impl Polytope {
    pub fn from_inequalities(ambient: usize, raw: &[(Vec<i64>, Rat)]) -> Polytope {
        // primitive normals with scaled bounds, tightest bound per direction
        let mut by_dir: Vec<(Vec<i64>, Rat)> = Vec::new();
        for (d, b) in raw {
            assert_eq!(d.len(), ambient, "dimension mismatch");
            if d.iter().all(|&x| x == 0) {
                continue;
            }
            let g = d.iter().fold(0i64, |a, &x| crate::lattice::gcd(a, x));
            let nd = primitive(d);
            let nb = b / &Rat::from(g);
            match by_dir.iter_mut().find(|(e, _)| *e == nd) {
                Some((_, existing)) => {
                    if nb < *existing {
                        *existing = nb;
                    }
                }
                None => by_dir.push((nd, nb)),
            }
        }
        by_dir.sort();
        let vertices = enumerate_vertices(ambient, &by_dir);
        let bounded = check_bounded(ambient, &by_dir);
        // prune inequalities not tight at any vertex (a valid
        // irredundancy criterion for nonempty bounded polytopes)
        let ineqs = if bounded && !vertices.is_empty() {
            by_dir
                .into_iter()
                .filter(|(d, b)| vertices.iter().any(|v| &dot_int(v, d) == b))
                .collect()
        } else {
            by_dir
        };
        Polytope {
            ambient,
            ineqs,
            vertices,
            bounded,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn inequalities(&self) -> &[(Vec<i64>, Rat)] {
        &self.ineqs
    }

    pub fn vertices(&self) -> &[Vec<Rat>] {
        &self.vertices
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn is_empty(&self) -> bool {
        if self.bounded {
            self.vertices.is_empty()
        } else {
            let ineqs: Vec<(Vec<Rat>, Rat)> = self
                .ineqs
                .iter()
                .map(|(d, b)| (rat_vec(d), b.clone()))
                .collect();
            !fm_feasible(self.ambient, &ineqs)
        }
    }

    pub fn contains(&self, y: &[Rat]) -> bool {
        assert_eq!(y.len(), self.ambient, "dimension mismatch");
        self.ineqs.iter().all(|(d, b)| &dot_int(y, d) <= b)
    }

    pub fn contains_int(&self, y: &[i64]) -> bool {
        self.contains(&rat_vec(y))
    }

    /// Vertex sets serve as canonical identity for bounded polytopes.
    pub fn vertex_set(&self) -> BTreeSet<Vec<Rat>> {
        self.vertices.iter().cloned().collect()
    }

    /// All lattice points, by bounding-box scan with exact membership.
    pub fn lattice_points(&self) -> Result<Vec<Vec<i64>>> {
        if !self.bounded {
            return Err(Error::UnboundedPolytope);
        }
        if self.vertices.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.ambient;
        let lo: Vec<i64> = (0..n)
            .map(|j| {
                self.vertices
                    .iter()
                    .map(|v| v[j].ceil())
                    .min()
                    .unwrap()
                    .to_i64()
                    .expect("box fits i64")
            })
            .collect();
        let hi: Vec<i64> = (0..n)
            .map(|j| {
                self.vertices
                    .iter()
                    .map(|v| v[j].floor())
                    .max()
                    .unwrap()
                    .to_i64()
                    .expect("box fits i64")
            })
            .collect();
        if (0..n).any(|j| lo[j] > hi[j]) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut point = lo.clone();
        loop {
            if self.contains_int(&point) {
                out.push(point.clone());
            }
            let mut j = 0;
            loop {
                if j == n {
                    return Ok(out);
                }
                if point[j] < hi[j] {
                    point[j] += 1;
                    for k in 0..j {
                        point[k] = lo[k];
                    }
                    break;
                }
                j += 1;
            }
        }
    }

    /// The support function x -> min over the polytope of <x, y>, a
    /// piecewise linear function on a complete fan refining the normal
    /// fan.
    pub fn support_function(&self) -> Result<PlFunction> {
        if !self.bounded {
            return Err(Error::UnboundedPolytope);
        }
        if self.is_empty() {
            return Err(Error::EmptyPolytope);
        }
        let n = self.ambient;
        let base = orthant_fan(n)?;
        let mut cuts = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            for w in self.vertices.iter().skip(i + 1) {
                let diff: Vec<Rat> = v.iter().zip(w).map(|(a, b)| a - b).collect();
                cuts.push(scale_to_integers(&diff));
            }
        }
        let fan = base.subdivide_by_hyperplanes(&cuts)?;
        let parts = (0..fan.n_maximal())
            .map(|i| {
                let p = rat_vec(&fan.maximal_cone(i).interior_point());
                self.vertices
                    .iter()
                    .min_by(|a, b| dot(a, &p).cmp(&dot(b, &p)))
                    .expect("nonempty")
                    .clone()
            })
            .collect();
        PlFunction::new(fan, parts)
    }
}

/// The fan of coordinate orthants.
pub fn orthant_fan(n: usize) -> Result<Fan> {
    let mut rays = Vec::new();
    for i in 0..n {
        let mut p = vec![0i64; n];
        p[i] = 1;
        rays.push(p.clone());
        p[i] = -1;
        rays.push(p);
    }
    let mut maximal = Vec::new();
    for signs in 0..(1usize << n) {
        let idx: Vec<usize> = (0..n).map(|i| 2 * i + (signs >> i & 1)).collect();
        maximal.push(idx);
    }
    Fan::new(n, rays, &maximal)
}

fn enumerate_vertices(n: usize, ineqs: &[(Vec<i64>, Rat)]) -> Vec<Vec<Rat>> {
    let m = ineqs.len();
    let mut vertices: BTreeSet<Vec<Rat>> = BTreeSet::new();
    if m < n {
        return Vec::new();
    }
    let mut subset = vec![0usize; n];
    enumerate_subsets_rec(m, n, &mut subset, 0, 0, &mut |idx: &[usize]| {
        let rows: Vec<Vec<Rat>> = idx.iter().map(|&i| rat_vec(&ineqs[i].0)).collect();
        let mat = match Matrix::from_rows(n, &rows) {
            Ok(m) => m,
            Err(_) => return,
        };
        if mat.rank() != n {
            return;
        }
        let rhs: Vec<Rat> = idx.iter().map(|&i| ineqs[i].1.clone()).collect();
        if let Some(y) = mat.solve(&rhs) {
            if ineqs.iter().all(|(d, b)| &dot_int(&y, d) <= b) {
                vertices.insert(y);
            }
        }
    });
    vertices.into_iter().collect()
}

fn enumerate_subsets_rec(
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
        enumerate_subsets_rec(m, k, buf, pos + 1, i + 1, f);
    }
}

/// Bounded iff the recession cone {y : <d, y> <= 0 for all d} is {0}.
fn check_bounded(n: usize, ineqs: &[(Vec<i64>, Rat)]) -> bool {
    let dirs: Vec<Vec<Rat>> = ineqs.iter().map(|(d, _)| rat_vec(d)).collect();
    match Matrix::from_rows(n, &dirs) {
        Ok(m) => {
            if m.rank() != n {
                return false;
            }
        }
        Err(_) => return n == 0,
    }
    let neg_dirs: Vec<Vec<i64>> = ineqs
        .iter()
        .map(|(d, _)| d.iter().map(|x| -x).collect())
        .collect();
    match Cone::from_hrep(n, &[], &neg_dirs) {
        Ok(c) => c.is_zero(),
        Err(_) => false, // contains a line: unbounded
    }
}

/// Fourier-Motzkin feasibility of {y : <c_i, y> <= b_i}.
fn fm_feasible(n: usize, ineqs: &[(Vec<Rat>, Rat)]) -> bool {
    if n == 0 {
        return ineqs.iter().all(|(_, b)| !b.is_negative());
    }
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    let mut rest = Vec::new();
    for (c, b) in ineqs {
        let lead = &c[0];
        if lead.is_zero() {
            rest.push((c[1..].to_vec(), b.clone()));
        } else {
            let inv = lead.recip();
            let tail: Vec<Rat> = c[1..].iter().map(|x| x * &inv).collect();
            let bound = b * &inv;
            if lead.is_positive() {
                // y0 <= bound - <tail, y'>
                uppers.push((tail, bound));
            } else {
                // y0 >= bound - <tail, y'>
                lowers.push((tail, bound));
            }
        }
    }
    for (cu, bu) in &uppers {
        for (cl, bl) in &lowers {
            // bl - <cl, y'> <= bu - <cu, y'>  i.e.  <cu - cl, y'> <= bu - bl
            let c: Vec<Rat> = cu.iter().zip(cl).map(|(u, l)| u - l).collect();
            rest.push((c, bu - bl));
        }
    }
    fm_feasible(n - 1, &rest)
}
