//! The bundle core: filtrations of the fiber, vector-space valuations,
//! frames, per-cone compatibility data, the piecewise linear map given by
//! evaluation at points of the fan, the piecewise linear valuation, and
//! splitting along invariant curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fan::{class_in_m_sigma, Character, Cone, Fan};
use crate::lattice::{dual_vector, int_solve, neg};
use crate::linalg::{coords_in_frame, Flag, Matrix, Subspace};
use crate::plfunc::PlFunction;
use crate::rat::{dot_ii, dot_int, rat_vec, Rat};

/// A rational value or infinity (the value of a valuation at 0).
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Val {
    Finite(Rat),
    Infinity,
}

impl PartialOrd for Val {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Val {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Val::*;
        match (self, other) {
            (Infinity, Infinity) => std::cmp::Ordering::Equal,
            (Infinity, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Infinity) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl Val {
    pub fn finite(self) -> Option<Rat> {
        match self {
            Val::Finite(r) => Some(r),
            Val::Infinity => None,
        }
    }
}

/// A decreasing Z-filtration of the fiber, exhaustive and separated.
/// `steps` lists only the levels where the subspace changes: the subspace
/// at level i is the one attached to the smallest listed level >= i, the
/// full space below every listed level (the first step), and 0 above.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Filtration {
    ambient: usize,
    steps: Vec<(i64, Subspace)>,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    level: i64,
    basis: Vec<Vec<Rat>>,
}

impl Filtration {
    pub fn new(ambient: usize, mut steps: Vec<(i64, Subspace)>) -> Result<Self> {
        steps.sort_by_key(|(l, _)| *l);
        steps.retain(|(_, s)| !s.is_zero());
        // normalize: a subspace repeated at several levels only matters
        // at the highest one
        let mut dedup: Vec<(i64, Subspace)> = Vec::new();
        for (l, s) in steps {
            if let Some(last) = dedup.last_mut() {
                if last.1 == s {
                    last.0 = l;
                    continue;
                }
            }
            dedup.push((l, s));
        }
        let steps = dedup;
        if steps.is_empty() || !steps[0].1.is_full() {
            return Err(Error::InvalidFiltration(
                "the lowest listed subspace must be the full space".into(),
            ));
        }
        for (_, s) in &steps {
            if s.ambient_dim() != ambient {
                return Err(Error::AmbientMismatch(s.ambient_dim(), ambient));
            }
        }
        for w in steps.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidFiltration("duplicate level".into()));
            }
            if !(w[0].1.contains_sub(&w[1].1) && w[0].1.dim() > w[1].1.dim()) {
                return Err(Error::InvalidFiltration(
                    "subspaces must strictly decrease along increasing levels".into(),
                ));
            }
        }
        Ok(Filtration { ambient, steps })
    }

    /// The filtration that is the full space up to `level` and 0 above.
    pub fn trivial(ambient: usize, level: i64) -> Self {
        Filtration {
            ambient,
            steps: vec![(level, Subspace::full(ambient))],
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn steps(&self) -> &[(i64, Subspace)] {
        &self.steps
    }

    pub fn levels(&self) -> Vec<i64> {
        self.steps.iter().map(|(l, _)| *l).collect()
    }

    pub fn at_level(&self, i: i64) -> Subspace {
        for (l, s) in &self.steps {
            if *l >= i {
                return s.clone();
            }
        }
        Subspace::zero(self.ambient)
    }

    /// The valuation value of e: the largest level whose subspace still
    /// contains e; None encodes infinity (e = 0).
    pub fn value_of(&self, e: &[Rat]) -> Option<i64> {
        if e.iter().all(|x| x.is_zero()) {
            return None;
        }
        let mut best = None;
        for (l, s) in &self.steps {
            if s.contains_vec(e) {
                best = Some(*l);
            }
        }
        best
    }

    pub fn to_valuation(&self) -> Valuation {
        let flag: Vec<Subspace> = self.steps.iter().rev().map(|(_, s)| s.clone()).collect();
        let values: Vec<Rat> = self.steps.iter().rev().map(|(l, _)| Rat::from(*l)).collect();
        Valuation::new(Flag::new(flag).expect("filtration steps form a flag"), values)
            .expect("filtration data is a valuation")
    }

    pub fn from_valuation(v: &Valuation) -> Result<Self> {
        let mut steps = Vec::new();
        for (sub, val) in v.flag().steps().iter().zip(v.values()) {
            let level = val
                .to_i64()
                .ok_or_else(|| Error::NonIntegral(format!("valuation value {val}")))?;
            steps.push((level, sub.clone()));
        }
        Filtration::new(v.flag().ambient_dim(), steps)
    }

    fn to_json_steps(&self) -> Vec<StepJson> {
        self.steps
            .iter()
            .map(|(l, s)| StepJson {
                level: *l,
                basis: s.basis_rows().to_vec(),
            })
            .collect()
    }

    fn from_json_steps(ambient: usize, steps: Vec<StepJson>) -> Result<Self> {
        let steps = steps
            .into_iter()
            .map(|st| Ok((st.level, Subspace::span(ambient, &st.basis)?)))
            .collect::<Result<Vec<_>>>()?;
        Filtration::new(ambient, steps)
    }
}

/// A vector-space valuation on the fiber, packaged as a flag together
/// with strictly decreasing rational values, one per flag step. The value
/// of e is the value at the smallest flag member containing it.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Valuation {
    flag: Vec<Subspace>,
    values: Vec<Rat>,
}

impl Valuation {
    pub fn new(flag: Flag, values: Vec<Rat>) -> Result<Self> {
        if flag.steps().len() != values.len() {
            return Err(Error::InvalidValuation(
                "one value per flag step required".into(),
            ));
        }
        for w in values.windows(2) {
            if w[0] <= w[1] {
                return Err(Error::InvalidValuation(
                    "values must strictly decrease along the flag".into(),
                ));
            }
        }
        Ok(Valuation {
            flag: flag.steps().to_vec(),
            values,
        })
    }

    /// The valuation adapted to a frame of lines with prescribed values.
    pub fn adapted(lines: &[Subspace], line_values: &[Rat]) -> Result<Self> {
        if lines.len() != line_values.len() || lines.is_empty() {
            return Err(Error::InvalidValuation("one value per line".into()));
        }
        let ambient = lines[0].ambient_dim();
        let mut distinct: Vec<Rat> = line_values.to_vec();
        distinct.sort();
        distinct.dedup();
        distinct.reverse();
        let mut flag = Vec::new();
        for a in &distinct {
            let rows: Vec<Vec<Rat>> = lines
                .iter()
                .zip(line_values)
                .filter(|(_, v)| *v >= a)
                .flat_map(|(l, _)| l.basis_rows().to_vec())
                .collect();
            flag.push(Subspace::span(ambient, &rows)?);
        }
        Valuation::new(Flag::new(flag)?, distinct)
    }

    pub fn flag(&self) -> Flag {
        Flag::new(self.flag.clone()).expect("stored flag is valid")
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn ambient_dim(&self) -> usize {
        self.flag[0].ambient_dim()
    }

    pub fn apply(&self, e: &[Rat]) -> Val {
        if e.iter().all(|x| x.is_zero()) {
            return Val::Infinity;
        }
        for (sub, val) in self.flag.iter().zip(&self.values) {
            if sub.contains_vec(e) {
                return Val::Finite(val.clone());
            }
        }
        unreachable!("flag ends in the full space")
    }

    /// The level set {e : v(e) >= a}.
    pub fn level_set(&self, a: &Rat) -> Subspace {
        let mut out = Subspace::zero(self.ambient_dim());
        for (sub, val) in self.flag.iter().zip(&self.values) {
            if val >= a {
                out = sub.clone();
            }
        }
        out
    }

    /// Pointwise comparison v <= w, decided by level-set inclusion over
    /// the merged value set.
    pub fn leq(&self, other: &Valuation) -> bool {
        let mut thresholds: Vec<Rat> = self.values.iter().chain(&other.values).cloned().collect();
        thresholds.sort();
        thresholds.dedup();
        thresholds
            .iter()
            .all(|a| other.level_set(a).contains_sub(&self.level_set(a)))
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.is_integer())
    }
}

/// A frame: a decomposition of the fiber into a direct sum of lines.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Frame {
    lines: Vec<Subspace>,
}

impl Frame {
    pub fn new(lines: Vec<Subspace>) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::NotAFrame("no lines".into()));
        }
        let ambient = lines[0].ambient_dim();
        if lines.len() != ambient {
            return Err(Error::NotAFrame(format!(
                "{} lines in dimension {}",
                lines.len(),
                ambient
            )));
        }
        let rows: Vec<Vec<Rat>> = lines
            .iter()
            .map(|l| {
                if l.dim() != 1 || l.ambient_dim() != ambient {
                    return Err(Error::NotAFrame("frame members must be lines".into()));
                }
                Ok(l.basis_rows()[0].clone())
            })
            .collect::<Result<_>>()?;
        if Matrix::from_rows(ambient, &rows)?.rank() != ambient {
            return Err(Error::NotAFrame("lines do not sum directly".into()));
        }
        Ok(Frame { lines })
    }

    pub fn lines(&self) -> &[Subspace] {
        &self.lines
    }

    pub fn generators(&self) -> Vec<Vec<Rat>> {
        self.lines.iter().map(|l| l.basis_rows()[0].clone()).collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.lines[0].ambient_dim()
    }

    /// True iff every listed subspace of the filtration is a sum of
    /// frame lines.
    pub fn is_adapted_to(&self, filt: &Filtration) -> bool {
        filt.steps().iter().all(|(_, sub)| {
            let rows: Vec<Vec<Rat>> = self
                .lines
                .iter()
                .filter(|l| sub.contains_sub(l))
                .flat_map(|l| l.basis_rows().to_vec())
                .collect();
            Subspace::span(sub.ambient_dim(), &rows).expect("valid rows") == *sub
        })
    }
}

/// Searches for a frame adapted to every filtration at once, by greedy
/// selection over the multi-indexed intersections in decreasing order of
/// level sum, with a final exact adaptedness verification. A handful of
/// deterministic order permutations are retried before giving up.
pub fn common_frame(filts: &[Filtration]) -> Option<Frame> {
    assert!(!filts.is_empty(), "need at least one filtration");
    let ambient = filts[0].ambient_dim();
    assert!(
        filts.iter().all(|f| f.ambient_dim() == ambient),
        "ambient dimensions differ"
    );
    let level_sets: Vec<Vec<i64>> = filts.iter().map(|f| f.levels()).collect();
    let mut indices: Vec<Vec<i64>> = vec![Vec::new()];
    for levels in &level_sets {
        let mut next = Vec::new();
        for partial in &indices {
            for &l in levels {
                let mut p = partial.clone();
                p.push(l);
                next.push(p);
            }
        }
        indices = next;
    }

    for attempt in 0..4u32 {
        let mut order = indices.clone();
        order.sort_by(|a, b| {
            let (sa, sb) = (a.iter().sum::<i64>(), b.iter().sum::<i64>());
            let by_sum = sb.cmp(&sa);
            if attempt & 1 == 0 {
                by_sum.then(b.cmp(a))
            } else {
                by_sum.then(a.cmp(b))
            }
        });
        let mut chosen: Vec<Vec<Rat>> = Vec::new();
        let mut span = Subspace::zero(ambient);
        for a in &order {
            let mut inter = Subspace::full(ambient);
            for (f, &l) in filts.iter().zip(a) {
                inter = inter.intersect(&f.at_level(l)).expect("same ambient");
            }
            let mut rows: Vec<Vec<Rat>> = inter.basis_rows().to_vec();
            if attempt & 2 != 0 {
                rows.reverse();
            }
            for row in rows {
                if !span.contains_vec(&row) {
                    span = span
                        .sum(&Subspace::span(ambient, std::slice::from_ref(&row)).unwrap())
                        .unwrap();
                    chosen.push(row);
                }
            }
        }
        if chosen.len() != ambient {
            continue;
        }
        let lines: Vec<Subspace> = chosen
            .iter()
            .map(|r| Subspace::line(r).expect("nonzero"))
            .collect();
        let Ok(frame) = Frame::new(lines) else {
            continue;
        };
        if filts.iter().all(|f| frame.is_adapted_to(f)) {
            return Some(frame);
        }
    }
    None
}

/// Compatibility data on one maximal cone: a frame splitting every ray
/// filtration of the cone, and the character class (canonical
/// representative in M_sigma) attached to each line.
#[derive(Clone, Debug, Serialize)]
pub struct CompatibleStructure {
    pub frame: Frame,
    pub characters: Vec<Character>,
}

/// One pair of an invariant-curve splitting: the two characters and the
/// degree of the corresponding line-bundle summand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitPair {
    pub u: Character,
    pub u_prime: Character,
    pub degree: i64,
}

/// The splitting of the bundle restricted to the invariant curve of a
/// wall.
#[derive(Clone, Debug, Serialize)]
pub struct CurveSplitting {
    pub wall_rays: Vec<Vec<i64>>,
    pub sigma: usize,
    pub sigma_prime: usize,
    pub pairs: Vec<SplitPair>,
}

impl CurveSplitting {
    pub fn degrees(&self) -> Vec<i64> {
        let mut d: Vec<i64> = self.pairs.iter().map(|p| p.degree).collect();
        d.sort();
        d
    }
}

/// A toric vector bundle in Klyachko form: a complete fan, one filtration
/// of the fiber per ray, and (verified at construction) a compatible
/// frame with characters on every maximal cone.
#[derive(Clone, Debug)]
pub struct KlyachkoBundle {
    fan: Fan,
    rank: usize,
    filtrations: Vec<Filtration>,
    compat: Vec<CompatibleStructure>,
}

#[derive(Serialize, Deserialize)]
struct BundleJson {
    fan: Fan,
    rank: usize,
    filtrations: BTreeMap<String, Vec<StepJson>>,
}

impl Serialize for KlyachkoBundle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BundleJson {
            fan: self.fan.clone(),
            rank: self.rank,
            filtrations: self
                .filtrations
                .iter()
                .enumerate()
                .map(|(i, f)| (i.to_string(), f.to_json_steps()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KlyachkoBundle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let j = BundleJson::deserialize(d)?;
        let n_rays = j.fan.rays().len();
        let mut filts: Vec<Option<Filtration>> = vec![None; n_rays];
        for (key, steps) in j.filtrations {
            let idx: usize = key
                .parse()
                .map_err(|_| DeError::custom(format!("bad ray index key {key:?}")))?;
            if idx >= n_rays {
                return Err(DeError::custom(format!("ray index {idx} out of range")));
            }
            filts[idx] =
                Some(Filtration::from_json_steps(j.rank, steps).map_err(DeError::custom)?);
        }
        let filtrations: Vec<Filtration> = filts
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                f.ok_or_else(|| DeError::custom(format!("missing filtration for ray {i}")))
            })
            .collect::<std::result::Result<_, _>>()?;
        KlyachkoBundle::new(j.fan, filtrations).map_err(DeError::custom)
    }
}

impl KlyachkoBundle {
    /// Validates the Klyachko compatibility condition on every maximal
    /// cone and caches the per-cone frames and characters.
    pub fn new(fan: Fan, filtrations: Vec<Filtration>) -> Result<Self> {
        if !fan.is_complete() {
            return Err(Error::NotComplete);
        }
        if filtrations.len() != fan.rays().len() {
            return Err(Error::InvalidFiltration(format!(
                "{} filtrations for {} rays",
                filtrations.len(),
                fan.rays().len()
            )));
        }
        let rank = filtrations[0].ambient_dim();
        if filtrations.iter().any(|f| f.ambient_dim() != rank) {
            return Err(Error::InvalidFiltration("ambient dimensions differ".into()));
        }
        let mut compat = Vec::new();
        for mi in 0..fan.n_maximal() {
            let cone = fan.maximal_cone(mi);
            compat.push(compatible_structure(&fan, &filtrations, cone)?);
        }
        Ok(KlyachkoBundle {
            fan,
            rank,
            filtrations,
            compat,
        })
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn filtrations(&self) -> &[Filtration] {
        &self.filtrations
    }

    pub fn filtration_of_ray(&self, ray: &[i64]) -> &Filtration {
        let i = self.fan.ray_index(ray).expect("ray of the fan");
        &self.filtrations[i]
    }

    pub fn compat(&self, max_cone_index: usize) -> &CompatibleStructure {
        &self.compat[max_cone_index]
    }

    /// The valuation Phi(x): adapted to the frame of a maximal cone
    /// containing x, with line values <u_j, x>.
    pub fn phi_eval(&self, x: &[Rat]) -> Valuation {
        let mi = self
            .fan
            .max_cone_containing(x)
            .expect("complete fan covers x");
        let cs = &self.compat[mi];
        let values: Vec<Rat> = cs.characters.iter().map(|u| dot_int(x, u)).collect();
        Valuation::adapted(cs.frame.lines(), &values).expect("frame data is a valuation")
    }

    /// The piecewise linear valuation evaluated at e: the function
    /// x -> Phi(x)(e), assembled on a subdivision of the fan.
    pub fn pl_valuation(&self, e: &[Rat]) -> Result<PlFunction> {
        if e.iter().all(|x| x.is_zero()) {
            return Err(Error::InvalidValuation(
                "the zero vector has value infinity".into(),
            ));
        }
        // per maximal cone: the characters of the lines supporting e
        let mut candidates: Vec<Vec<Character>> = Vec::new();
        let mut cuts: Vec<Vec<i64>> = Vec::new();
        for cs in &self.compat {
            let comps = coords_in_frame(cs.frame.lines(), e)?;
            let mut cands: Vec<Character> = cs
                .characters
                .iter()
                .zip(&comps)
                .filter(|(_, c)| c.iter().any(|x| !x.is_zero()))
                .map(|(u, _)| u.clone())
                .collect();
            cands.sort();
            cands.dedup();
            for (i, a) in cands.iter().enumerate() {
                for b in cands.iter().skip(i + 1) {
                    cuts.push(a.iter().zip(b).map(|(x, y)| x - y).collect());
                }
            }
            candidates.push(cands);
        }
        let fine = self.fan.subdivide_by_hyperplanes(&cuts)?;
        let parts: Vec<Vec<Rat>> = (0..fine.n_maximal())
            .map(|i| {
                let p = fine.maximal_cone(i).interior_point();
                let parent = self
                    .fan
                    .max_cone_containing_int(&p)
                    .expect("piece lies in a parent cone");
                let best = candidates[parent]
                    .iter()
                    .min_by_key(|u| dot_ii(u, &p))
                    .expect("e has support in every frame");
                rat_vec(best)
            })
            .collect();
        PlFunction::new(fine, parts)
    }

    /// A frame adapted to every ray filtration simultaneously, if one
    /// exists: the bundle splits equivariantly iff this returns Some.
    pub fn is_equivariantly_split(&self) -> Option<Frame> {
        common_frame(&self.filtrations)
    }

    /// All walls of the fan with their curve splittings.
    pub fn curve_splittings(&self) -> Result<Vec<CurveSplitting>> {
        self.fan
            .walls()?
            .into_iter()
            .map(|(tau, _, _)| self.curve_splitting(&tau))
            .collect()
    }

    /// Splits the restriction of the bundle to the invariant curve of the
    /// wall `tau` into line bundles: matched character pairs (u, u') with
    /// u - u' a multiple of the wall normal, and the degree of each
    /// summand.
    ///
    /// The matching is constructed per character class in M_tau from the
    /// graded piece of the multi-filtration of tau's rays: the two
    /// filtrations induced on the graded piece (from evaluation at
    /// integral lifts of the two sides of the wall) split there by a
    /// common frame, whose line values select the paired characters.
    /// Characters of a fixed class are pinned by their pairing with the
    /// lift, so the pair multiset does not depend on tie-breaking.
    pub fn curve_splitting(&self, tau: &Cone) -> Result<CurveSplitting> {
        let wd = self.fan.wall_data(tau)?;
        let cs = &self.compat[wd.sigma];
        let cs_p = &self.compat[wd.sigma_prime];
        // integral lift on the sigma' side: <w, v'> = -1
        let v_prime = {
            let v0 = dual_vector(&neg(&wd.normal)).expect("normal is primitive");
            let t0 = tau.interior_point();
            let sig_p = self.fan.maximal_cone(wd.sigma_prime);
            let mut k: i64 = 0;
            for f in sig_p.facets() {
                let fv = dot_ii(f, &v0);
                if fv < 0 {
                    let ft = dot_ii(f, &t0);
                    assert!(ft > 0);
                    k = k.max((-fv + ft - 1) / ft);
                }
            }
            let v: Vec<i64> = v0.iter().zip(&t0).map(|(a, b)| a + k * b).collect();
            debug_assert!(sig_p.contains_int(&v));
            v
        };

        // group the two character multisets by class in M_tau
        let class_of = |u: &Character| class_in_m_sigma(u, tau);
        let mut classes: Vec<Character> = cs.characters.iter().map(&class_of).collect();
        classes.sort();
        classes.dedup();
        {
            let mut other: Vec<Character> = cs_p.characters.iter().map(&class_of).collect();
            other.sort();
            other.dedup();
            assert_eq!(classes, other, "wall classes of the two sides must agree");
        }

        let tau_ray_filts: Vec<&Filtration> = tau
            .generators()
            .iter()
            .map(|g| self.filtration_of_ray(g))
            .collect();

        let phi_plus = self.phi_eval(&rat_vec(&wd.dual_ray));
        let phi_minus = self.phi_eval(&rat_vec(&v_prime));

        let mut pairs = Vec::new();
        for class in &classes {
            // profile of the class against tau's rays, read off any member
            let rep = cs
                .characters
                .iter()
                .find(|u| class_of(u) == *class)
                .expect("class is inhabited");
            let profile: Vec<i64> = tau.generators().iter().map(|g| dot_ii(rep, g)).collect();
            // W = intersection of the tau-ray filtrations at the profile,
            // W_plus = the sum over unit bumps of the profile
            let mut w = Subspace::full(self.rank);
            for (f, &p) in tau_ray_filts.iter().zip(&profile) {
                w = w.intersect(&f.at_level(p))?;
            }
            let mut w_plus = Subspace::zero(self.rank);
            for bump in 0..tau_ray_filts.len() {
                let mut inter = Subspace::full(self.rank);
                for (j, (f, &p)) in tau_ray_filts.iter().zip(&profile).enumerate() {
                    let lv = if j == bump { p + 1 } else { p };
                    inter = inter.intersect(&f.at_level(lv))?;
                }
                w_plus = w_plus.sum(&inter)?;
            }
            let quotient = QuotientSpace::new(&w, &w.intersect(&w_plus)?)?;
            if quotient.dim == 0 {
                continue;
            }

            // filtrations induced on the graded piece from the two sides
            let f_plus = quotient.induced_filtration(&w, &phi_plus)?;
            let f_minus = quotient.induced_filtration(&w, &phi_minus)?;
            let frame = common_frame(&[f_plus.clone(), f_minus.clone()])
                .expect("two filtrations always split");

            // unused class members on each side, keyed by their pairing
            // with the corresponding lift
            let mut side: Vec<&Character> = cs
                .characters
                .iter()
                .filter(|u| class_of(u) == *class)
                .collect();
            let mut side_p: Vec<&Character> = cs_p
                .characters
                .iter()
                .filter(|u| class_of(u) == *class)
                .collect();
            for line in frame.lines() {
                let g = &line.basis_rows()[0];
                let t_plus = f_plus.value_of(g).expect("nonzero line");
                let t_minus = f_minus.value_of(g).expect("nonzero line");
                let i = side
                    .iter()
                    .position(|u| dot_ii(u, &wd.dual_ray) == t_plus)
                    .expect("graded value matches the character multiset");
                let u = side.remove(i).clone();
                let j = side_p
                    .iter()
                    .position(|u| dot_ii(u, &v_prime) == t_minus)
                    .expect("graded value matches the character multiset");
                let u_prime = side_p.remove(j).clone();
                let degree = dot_ii(&u, &wd.dual_ray) - dot_ii(&u_prime, &wd.dual_ray);
                pairs.push(SplitPair { u, u_prime, degree });
            }
            assert!(
                side.is_empty() && side_p.is_empty(),
                "all class members paired"
            );
        }
        assert_eq!(pairs.len(), self.rank, "one pair per line summand");
        for p in &pairs {
            // u - u' must be degree times the wall normal
            let diff: Vec<i64> = p.u.iter().zip(&p.u_prime).map(|(a, b)| a - b).collect();
            let scaled: Vec<i64> = wd.normal.iter().map(|x| x * p.degree).collect();
            assert_eq!(diff, scaled, "pair difference lies on the wall normal");
        }
        Ok(CurveSplitting {
            wall_rays: tau.generators().to_vec(),
            sigma: wd.sigma,
            sigma_prime: wd.sigma_prime,
            pairs,
        })
    }

    /// Rebuilds the bundle on a finer complete fan: old rays keep their
    /// filtrations, new rays interpolate via Phi.
    pub fn refine(&self, finer: &Fan) -> Result<KlyachkoBundle> {
        if !finer.is_complete() {
            return Err(Error::NotComplete);
        }
        if !finer.refines(&self.fan) {
            return Err(Error::NotARefinement);
        }
        let filtrations = finer
            .rays()
            .iter()
            .map(|r| {
                if let Some(i) = self.fan.ray_index(r) {
                    Ok(self.filtrations[i].clone())
                } else {
                    Filtration::from_valuation(&self.phi_eval(&rat_vec(r)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        KlyachkoBundle::new(finer.clone(), filtrations)
    }
}

/// Verifies the compatibility condition on one maximal cone and returns
/// its frame and canonical character representatives.
fn compatible_structure(
    fan: &Fan,
    filtrations: &[Filtration],
    cone: &Cone,
) -> Result<CompatibleStructure> {
    let describe = |c: &Cone| format!("{:?}", c.generators());
    let ray_filts: Vec<&Filtration> = cone
        .generators()
        .iter()
        .map(|g| &filtrations[fan.ray_index(g).expect("cone generator is a ray")])
        .collect();
    let owned: Vec<Filtration> = ray_filts.iter().map(|f| (*f).clone()).collect();
    let frame = common_frame(&owned).ok_or_else(|| Error::IncompatibleFiltrations {
        cone: describe(cone),
    })?;

    let mut characters = Vec::new();
    for line in frame.lines() {
        let gen = &line.basis_rows()[0];
        let rhs: Vec<i64> = ray_filts
            .iter()
            .map(|f| f.value_of(gen).expect("line generator is nonzero"))
            .collect();
        let u =
            int_solve(cone.generators(), &rhs).ok_or_else(|| Error::IncompatibleFiltrations {
                cone: describe(cone),
            })?;
        characters.push(class_in_m_sigma(&u, cone));
    }

    // exact verification of the compatibility equation on every ray and
    // listed level
    for (ray, filt) in cone.generators().iter().zip(&ray_filts) {
        for (level, sub) in filt.steps() {
            let rows: Vec<Vec<Rat>> = frame
                .lines()
                .iter()
                .zip(&characters)
                .filter(|(_, u)| dot_ii(u, ray) >= *level)
                .flat_map(|(l, _)| l.basis_rows().to_vec())
                .collect();
            let span = Subspace::span(filt.ambient_dim(), &rows)?;
            if span != *sub {
                return Err(Error::IncompatibleFiltrations {
                    cone: describe(cone),
                });
            }
        }
    }
    Ok(CompatibleStructure { frame, characters })
}

/// Exact quotient W / Z with projection of vectors of W to quotient
/// coordinates.
struct QuotientSpace {
    w_rows: Vec<Vec<Rat>>,
    z_in_coords: Subspace,
    nonpivot: Vec<usize>,
    dim: usize,
}

impl QuotientSpace {
    fn new(w: &Subspace, z: &Subspace) -> Result<Self> {
        assert!(w.contains_sub(z), "quotient requires Z inside W");
        let d = w.dim();
        let w_rows = w.basis_rows().to_vec();
        let mat = Matrix::from_rows(w.ambient_dim(), &w_rows)?.transpose();
        let z_rows: Vec<Vec<Rat>> = z
            .basis_rows()
            .iter()
            .map(|r| mat.solve(r).expect("vector lies in W"))
            .collect();
        let z_in_coords = Subspace::span(d, &z_rows)?;
        let pivots: Vec<usize> = z_in_coords
            .basis_rows()
            .iter()
            .map(|r| r.iter().position(|x| !x.is_zero()).expect("RREF row"))
            .collect();
        let nonpivot: Vec<usize> = (0..d).filter(|i| !pivots.contains(i)).collect();
        let dim = nonpivot.len();
        Ok(QuotientSpace {
            w_rows,
            z_in_coords,
            nonpivot,
            dim,
        })
    }

    /// Quotient coordinates of a vector of W.
    fn project(&self, v: &[Rat]) -> Vec<Rat> {
        let ambient = v.len();
        let mat = Matrix::from_rows(ambient, &self.w_rows)
            .expect("valid basis")
            .transpose();
        let mut alpha = mat.solve(v).expect("vector lies in W");
        for row in self.z_in_coords.basis_rows() {
            let pivot = row.iter().position(|x| !x.is_zero()).expect("RREF row");
            if !alpha[pivot].is_zero() {
                let f = alpha[pivot].clone();
                for (a, r) in alpha.iter_mut().zip(row) {
                    let v = &*a - &(&f * r);
                    *a = v;
                }
            }
        }
        self.nonpivot.iter().map(|&i| alpha[i].clone()).collect()
    }

    /// The filtration induced on the quotient by intersecting the level
    /// sets of a valuation with W and projecting.
    fn induced_filtration(&self, w: &Subspace, val: &Valuation) -> Result<Filtration> {
        let mut steps: Vec<(i64, Subspace)> = Vec::new();
        for t in val.values() {
            let level = t
                .to_i64()
                .ok_or_else(|| Error::NonIntegral(format!("valuation value {t}")))?;
            let inter = val.level_set(t).intersect(w)?;
            let rows: Vec<Vec<Rat>> = inter.basis_rows().iter().map(|r| self.project(r)).collect();
            let sub = Subspace::span(self.dim, &rows)?;
            if sub.is_zero() {
                continue;
            }
            // values decrease along the loop, so the first occurrence of
            // a subspace is its highest level
            if steps.iter().any(|(_, s)| *s == sub) {
                continue;
            }
            steps.push((level, sub));
        }
        steps.reverse();
        Filtration::new(self.dim, steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::rat::rat_vec;

    fn sp(ambient: usize, rows: &[&[i64]]) -> Subspace {
        let rows: Vec<Vec<Rat>> = rows.iter().map(|r| rat_vec(r)).collect();
        Subspace::span(ambient, &rows).unwrap()
    }

    #[test]
    fn filtration_round_trip() {
        // trivial filtration: flag (E), values (0)
        let f = Filtration::trivial(2, 0);
        let v = f.to_valuation();
        assert_eq!(v.values(), &[Rat::zero()]);
        assert_eq!(Filtration::from_valuation(&v).unwrap(), f);
        // TP^2 ray filtration: flag (span v1 < E), values (1, 0)
        let f = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, 0]]))]).unwrap();
        let v = f.to_valuation();
        assert_eq!(v.values(), &[Rat::from(1), Rat::zero()]);
        assert_eq!(Filtration::from_valuation(&v).unwrap(), f);
        // two-step filtration in Q^3
        let f = Filtration::new(
            3,
            vec![
                (-1, Subspace::full(3)),
                (2, sp(3, &[&[1, 0, 0], &[0, 1, 0]])),
                (5, sp(3, &[&[0, 1, 0]])),
            ],
        )
        .unwrap();
        let v = f.to_valuation();
        assert_eq!(v.flag().steps().len(), 3);
        assert_eq!(Filtration::from_valuation(&v).unwrap(), f);
    }

    #[test]
    fn valuation_apply() {
        let f = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, 0]]))]).unwrap();
        let v = f.to_valuation();
        assert_eq!(v.apply(&rat_vec(&[0, 0])), Val::Infinity);
        assert_eq!(v.apply(&rat_vec(&[1, 0])), Val::Finite(Rat::from(1)));
        assert_eq!(v.apply(&rat_vec(&[0, 1])), Val::Finite(Rat::zero()));
        assert_eq!(v.apply(&rat_vec(&[3, 5])), Val::Finite(Rat::zero()));
    }

    #[test]
    fn valuation_order() {
        let f1 = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, 0]]))]).unwrap();
        let f2 = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[0, 1]]))]).unwrap();
        let (v1, v2) = (f1.to_valuation(), f2.to_valuation());
        assert!(v1.leq(&v1));
        // the two ray valuations of TP^2 are incomparable
        assert!(!v1.leq(&v2));
        assert!(!v2.leq(&v1));
        // shifting all levels up dominates
        let shifted = Filtration::new(2, vec![(1, Subspace::full(2)), (2, sp(2, &[&[1, 0]]))])
            .unwrap()
            .to_valuation();
        assert!(v1.leq(&shifted));
    }

    #[test]
    fn common_frame_examples() {
        // two transverse lines: already a frame
        let f1 = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, 0]]))]).unwrap();
        let f2 = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[0, 1]]))]).unwrap();
        let frame = common_frame(&[f1.clone(), f2.clone()]).unwrap();
        assert!(frame.is_adapted_to(&f1) && frame.is_adapted_to(&f2));
        // three distinct lines in Q^2: no frame of two lines fits
        let f3 = Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, 1]]))]).unwrap();
        assert!(common_frame(&[f1.clone(), f2, f3]).is_none());
        // nested data with interleaved levels splits
        let g1 = Filtration::new(
            3,
            vec![
                (0, Subspace::full(3)),
                (1, sp(3, &[&[1, 0, 0], &[0, 1, 0]])),
                (2, sp(3, &[&[0, 1, 0]])),
            ],
        )
        .unwrap();
        let g2 = Filtration::new(
            3,
            vec![(0, Subspace::full(3)), (2, sp(3, &[&[1, 1, 0], &[0, 0, 1]]))],
        )
        .unwrap();
        let frame = common_frame(&[g1.clone(), g2.clone()])
            .expect("two filtrations always admit a common frame");
        assert!(frame.is_adapted_to(&g1) && frame.is_adapted_to(&g2));
    }

    #[test]
    fn tangent_p2_compat() {
        let b = examples::tangent_pn(2).unwrap();
        // u(sigma_3) = {w1, w2} for the cone on rays v1, v2
        let mi = (0..b.fan().n_maximal())
            .find(|&i| b.fan().maximal_cone(i).key() == vec![vec![0, 1], vec![1, 0]])
            .unwrap();
        let mut chars = b.compat(mi).characters.clone();
        chars.sort();
        assert_eq!(chars, vec![vec![0, 1], vec![1, 0]]);
        // u(sigma_1) = {-w1, w2-w1} for the cone on rays v2, v3
        let mi = (0..b.fan().n_maximal())
            .find(|&i| b.fan().maximal_cone(i).key() == vec![vec![-1, -1], vec![0, 1]])
            .unwrap();
        let mut chars = b.compat(mi).characters.clone();
        chars.sort();
        assert_eq!(chars, vec![vec![-1, 0], vec![-1, 1]]);
    }

    #[test]
    fn phi_extends_ray_data() {
        let b = examples::tangent_pn(2).unwrap();
        for (i, ray) in b.fan().rays().iter().enumerate() {
            let v = b.phi_eval(&rat_vec(ray));
            let w = b.filtrations()[i].to_valuation();
            assert!(v.leq(&w) && w.leq(&v), "Phi interpolates the ray data");
        }
        // x = (1,1) in sigma_3: both line values equal 1
        let v = b.phi_eval(&rat_vec(&[1, 1]));
        assert_eq!(v.values(), &[Rat::from(1)]);
        assert_eq!(v.apply(&rat_vec(&[1, 0])), Val::Finite(Rat::from(1)));
        // x = 0: the trivial valuation
        let v = b.phi_eval(&rat_vec(&[0, 0]));
        assert_eq!(v.apply(&rat_vec(&[1, 7])), Val::Finite(Rat::zero()));
    }

    #[test]
    fn pl_valuation_tp2() {
        let b = examples::tangent_pn(2).unwrap();
        let f = b.pl_valuation(&rat_vec(&[1, 0])).unwrap();
        // sigma_3 branch x1, sigma_2 branch x1-x2, sigma_1 branch
        // min(x2-x1, -x1)
        assert_eq!(f.eval(&rat_vec(&[2, 1])), Rat::from(2));
        assert_eq!(f.eval(&rat_vec(&[1, -1])), Rat::from(2));
        assert_eq!(f.eval(&rat_vec(&[-1, 0])), Rat::from(1));
        assert_eq!(f.eval(&rat_vec(&[-2, 1])), Rat::from(2)); // min(3, 2)
        assert!(f.is_integral());
        let f3 = b.pl_valuation(&rat_vec(&[-1, -1])).unwrap();
        assert_eq!(f3.eval(&rat_vec(&[2, 1])), Rat::from(1)); // min(x1,x2)
        assert_eq!(f3.eval(&rat_vec(&[-1, 0])), Rat::from(1)); // -x1
        assert_eq!(f3.eval(&rat_vec(&[0, -2])), Rat::from(2)); // -x2
        // the zero vector is rejected
        assert!(b.pl_valuation(&rat_vec(&[0, 0])).is_err());
    }

    #[test]
    fn split_detection() {
        let b = examples::tangent_pn(2).unwrap();
        assert!(b.is_equivariantly_split().is_none());
        let t = examples::trivial_bundle(examples::fan_pn(2).unwrap(), 3).unwrap();
        assert!(t.is_equivariantly_split().is_some());
    }

    #[test]
    fn curve_splitting_tp2() {
        let b = examples::tangent_pn(2).unwrap();
        for split in b.curve_splittings().unwrap() {
            assert_eq!(split.degrees(), vec![1, 2]);
        }
    }

    #[test]
    fn curve_splitting_p1_generic_lines() {
        // two different lines on the two rays of P^1: splits as
        // O(1) + O(1), not O(2) + O
        let fan = examples::fan_pn(1).unwrap();
        let f_plus =
            Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, 1]]))]).unwrap();
        let f_minus =
            Filtration::new(2, vec![(0, Subspace::full(2)), (1, sp(2, &[&[1, -1]]))]).unwrap();
        let b = KlyachkoBundle::new(fan, vec![f_plus, f_minus]).unwrap();
        let splits = b.curve_splittings().unwrap();
        assert_eq!(splits.len(), 1);
        assert_eq!(splits[0].degrees(), vec![1, 1]);
    }

    #[test]
    fn curve_splitting_p1_mixed_levels() {
        // split bundle O(1 D+ + 5 D-) + O(3 D+ - 2 D-): degrees 6 and 1
        let fan = examples::fan_pn(1).unwrap();
        let f_plus =
            Filtration::new(2, vec![(1, Subspace::full(2)), (3, sp(2, &[&[0, 1]]))]).unwrap();
        let f_minus =
            Filtration::new(2, vec![(-2, Subspace::full(2)), (5, sp(2, &[&[1, 0]]))]).unwrap();
        let b = KlyachkoBundle::new(fan, vec![f_plus, f_minus]).unwrap();
        let splits = b.curve_splittings().unwrap();
        assert_eq!(splits[0].degrees(), vec![1, 6]);
    }

    #[test]
    fn curve_splitting_pullback_p1xp1() {
        // pullback of O(1)+O(1) from the first factor: the wall of a
        // trivial-direction ray splits with degrees {1, 1}
        let fan = examples::fan_p1xp1().unwrap();
        let l1 = sp(2, &[&[1, 1]]);
        let l2 = sp(2, &[&[1, -1]]);
        let filts: Vec<Filtration> = fan
            .rays()
            .iter()
            .map(|r| match r.as_slice() {
                [1, 0] => {
                    Filtration::new(2, vec![(0, Subspace::full(2)), (1, l1.clone())]).unwrap()
                }
                [-1, 0] => {
                    Filtration::new(2, vec![(0, Subspace::full(2)), (1, l2.clone())]).unwrap()
                }
                _ => Filtration::trivial(2, 0),
            })
            .collect();
        let b = KlyachkoBundle::new(fan, filts).unwrap();
        let tau = Cone::from_generators(2, &[vec![0, 1]]).unwrap();
        let split = b.curve_splitting(&tau).unwrap();
        assert_eq!(split.degrees(), vec![1, 1]);
        // the curve of a horizontal ray is a fiber of the projection, so
        // the pullback restricts trivially there
        let tau = Cone::from_generators(2, &[vec![1, 0]]).unwrap();
        let split = b.curve_splitting(&tau).unwrap();
        assert_eq!(split.degrees(), vec![0, 0]);
    }

    #[test]
    fn incompatible_three_lines() {
        // three pairwise distinct lines at level 1 on the three rays of
        // one maximal cone: no compatible frame of two lines exists
        let fan = crate::fan::Fan::new(
            3,
            vec![
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![-1, -1, -1],
            ],
            &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]],
        )
        .unwrap();
        let line = |a: i64, b: i64| sp(2, &[&[a, b]]);
        let filts = vec![
            Filtration::new(2, vec![(0, Subspace::full(2)), (1, line(1, 0))]).unwrap(),
            Filtration::new(2, vec![(0, Subspace::full(2)), (1, line(0, 1))]).unwrap(),
            Filtration::new(2, vec![(0, Subspace::full(2)), (1, line(1, 1))]).unwrap(),
            Filtration::trivial(2, 0),
        ];
        let err = KlyachkoBundle::new(fan, filts).unwrap_err();
        match err {
            Error::IncompatibleFiltrations { cone } => {
                assert!(cone.contains("[1, 0, 0]") && cone.contains("[0, 0, 1]"));
            }
            other => panic!("expected IncompatibleFiltrations, got {other}"),
        }
    }

    #[test]
    fn refine_bundle() {
        let b = examples::tangent_pn(2).unwrap();
        let finer = b.fan().subdivide_by_hyperplanes(&[vec![1, -1]]).unwrap();
        let rb = b.refine(&finer).unwrap();
        // the new ray (1,1) gets the filtration of Phi((1,1)): values
        // (1,1) on the sigma_3 frame, so E at levels <= 1 and 0 above
        let f = rb.filtration_of_ray(&[1, 1]);
        assert_eq!(f.steps().len(), 1);
        assert_eq!(f.steps()[0].0, 1);
        assert!(f.steps()[0].1.is_full());
        // refining by the fan itself is the identity
        let same = b.refine(b.fan()).unwrap();
        assert_eq!(same.filtrations(), b.filtrations());
        // pl valuations agree after refinement
        let e = rat_vec(&[1, 0]);
        assert_eq!(rb.pl_valuation(&e).unwrap(), b.pl_valuation(&e).unwrap());
    }

    #[test]
    fn bundle_json_round_trip() {
        let b = examples::tangent_pn(2).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: KlyachkoBundle = serde_json::from_str(&s).unwrap();
        assert_eq!(back.filtrations(), b.filtrations());
        assert_eq!(back.fan(), b.fan());
    }
}

