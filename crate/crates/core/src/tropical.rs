//! Tropicalization of linear ideals over the piecewise linear semifield:
//! membership of tuples of piecewise linear functions, reconstruction of
//! the bundle a tropical point determines, and the diagram matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fan::Fan;
use crate::klyachko::{Filtration, KlyachkoBundle, Val, Valuation};
use crate::linalg::{Matrix, Subspace};
use crate::plfunc::{scale_to_integers, PlFunction};
use crate::rat::{rat_vec, Rat};

/// An idempotent semifield: commutative idempotent addition with neutral
/// element infinity, invertible multiplication with neutral element zero.
pub trait IdempotentSemifield {
    type Elem: Clone;
    /// The idempotent addition (here: minimum).
    fn plus(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    /// The multiplication (here: pointwise sum).
    fn times(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    /// The additive neutral element, absorbing for multiplication.
    fn infinity(&self) -> Self::Elem;
    /// The multiplicative neutral element.
    fn unit(&self) -> Self::Elem;
    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> bool;
}

/// The real tropical semifield (R with infinity, min, +).
pub struct RealMinPlus;

impl IdempotentSemifield for RealMinPlus {
    type Elem = Val;

    fn plus(&self, a: &Val, b: &Val) -> Val {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn times(&self, a: &Val, b: &Val) -> Val {
        match (a, b) {
            (Val::Finite(x), Val::Finite(y)) => Val::Finite(x + y),
            _ => Val::Infinity,
        }
    }

    fn infinity(&self) -> Val {
        Val::Infinity
    }

    fn unit(&self) -> Val {
        Val::Finite(Rat::zero())
    }

    fn equal(&self, a: &Val, b: &Val) -> bool {
        a == b
    }
}

/// An integral piecewise linear function or the infinity element.
#[derive(Clone, Debug)]
pub enum PlBar {
    Finite(PlFunction),
    Infinity,
}

impl PlBar {
    pub fn finite(self) -> Option<PlFunction> {
        match self {
            PlBar::Finite(f) => Some(f),
            PlBar::Infinity => None,
        }
    }
}

/// The semifield of integral piecewise linear functions on N_R with a
/// unique infinity element, under pointwise min and +.
pub struct PlMinPlus {
    pub dim: usize,
}

impl IdempotentSemifield for PlMinPlus {
    type Elem = PlBar;

    fn plus(&self, a: &PlBar, b: &PlBar) -> PlBar {
        match (a, b) {
            (PlBar::Infinity, x) | (x, PlBar::Infinity) => x.clone(),
            (PlBar::Finite(f), PlBar::Finite(g)) => {
                PlBar::Finite(f.min(g).expect("same ambient space"))
            }
        }
    }

    fn times(&self, a: &PlBar, b: &PlBar) -> PlBar {
        match (a, b) {
            (PlBar::Infinity, _) | (_, PlBar::Infinity) => PlBar::Infinity,
            (PlBar::Finite(f), PlBar::Finite(g)) => {
                PlBar::Finite(f.add(g).expect("same ambient space"))
            }
        }
    }

    fn infinity(&self) -> PlBar {
        PlBar::Infinity
    }

    fn unit(&self) -> PlBar {
        let fan = crate::plfunc::orthant_fan(self.dim).expect("orthant fan");
        PlBar::Finite(
            PlFunction::linear(fan, &vec![Rat::zero(); self.dim]).expect("zero function"),
        )
    }

    fn equal(&self, a: &PlBar, b: &PlBar) -> bool {
        match (a, b) {
            (PlBar::Infinity, PlBar::Infinity) => true,
            (PlBar::Finite(f), PlBar::Finite(g)) => f == g,
            _ => false,
        }
    }
}

/// The tropicalization of a linear form with the given support drops the
/// coefficients (the base field carries the trivial valuation), so a
/// point satisfies it iff the minimum over the support is attained after
/// removing any one index.
pub fn circuit_satisfied<S: IdempotentSemifield>(
    sf: &S,
    values: &[S::Elem],
    support: &[usize],
) -> bool {
    let total = support
        .iter()
        .map(|&i| values[i].clone())
        .reduce(|a, b| sf.plus(&a, &b))
        .expect("nonempty support");
    support.iter().all(|&beta| {
        let dropped = support
            .iter()
            .filter(|&&i| i != beta)
            .map(|&i| values[i].clone())
            .reduce(|a, b| sf.plus(&a, &b));
        match dropped {
            Some(d) => sf.equal(&d, &total),
            None => false, // a one-term relation is never satisfied
        }
    })
}

/// A circuit of the column configuration: a support-minimal linear
/// relation, stored with full-length coefficients whose first nonzero
/// entry is 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Circuit {
    pub support: Vec<usize>,
    pub coeffs: Vec<Rat>,
}

/// A spanning set of the fiber as columns of a matrix, with the circuits
/// of its column matroid.
#[derive(Clone, Debug)]
pub struct LinearConfiguration {
    ambient: usize,
    columns: Vec<Vec<Rat>>,
    circuits: Vec<Circuit>,
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    ambient_dim: usize,
    vectors: Vec<Vec<Rat>>,
}

impl Serialize for LinearConfiguration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigJson {
            ambient_dim: self.ambient,
            vectors: self.columns.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearConfiguration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ConfigJson::deserialize(d)?;
        LinearConfiguration::new(j.ambient_dim, j.vectors).map_err(serde::de::Error::custom)
    }
}

impl LinearConfiguration {
    pub fn new(ambient: usize, columns: Vec<Vec<Rat>>) -> Result<Self> {
        for c in &columns {
            if c.len() != ambient {
                return Err(Error::DimensionMismatch(format!(
                    "column of length {} in dimension {ambient}",
                    c.len()
                )));
            }
            if c.iter().all(|x| x.is_zero()) {
                return Err(Error::InvalidValuation(
                    "spanning set elements must be nonzero".into(),
                ));
            }
        }
        if Matrix::from_rows(ambient, &columns)?.rank() != ambient {
            return Err(Error::InvalidValuation(
                "the columns must span the fiber".into(),
            ));
        }
        let circuits = circuits_of(ambient, &columns)?;
        Ok(LinearConfiguration {
            ambient,
            columns,
            circuits,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn columns(&self) -> &[Vec<Rat>] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn circuits(&self) -> &[Circuit] {
        &self.circuits
    }

    /// All bases of the column matroid (index sets of full-rank
    /// r-subsets).
    pub fn bases(&self) -> Vec<Vec<usize>> {
        let r = self.ambient;
        let s = self.columns.len();
        let mut out = Vec::new();
        let mut buf = vec![0usize; r];
        subsets(s, r, &mut buf, 0, 0, &mut |idx: &[usize]| {
            let rows: Vec<Vec<Rat>> = idx.iter().map(|&i| self.columns[i].clone()).collect();
            let full_rank = Matrix::from_rows(r, &rows)
                .map(|m| m.rank() == r)
                .unwrap_or(false);
            if full_rank {
                out.push(idx.to_vec());
            }
        });
        out
    }
}

fn subsets(
    n: usize,
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
    for i in start..n {
        buf[pos] = i;
        subsets(n, k, buf, pos + 1, i + 1, f);
    }
}

/// All circuits, by enumerating supports in increasing size with exact
/// kernel computation: a support is a circuit iff its columns have a
/// one-dimensional kernel with full support.
fn circuits_of(ambient: usize, columns: &[Vec<Rat>]) -> Result<Vec<Circuit>> {
    let s = columns.len();
    let mut out: Vec<Circuit> = Vec::new();
    for size in 2..=(ambient + 1).min(s) {
        let mut buf = vec![0usize; size];
        let mut found: Vec<(Vec<usize>, Vec<Rat>)> = Vec::new();
        subsets(s, size, &mut buf, 0, 0, &mut |idx: &[usize]| {
            // skip supersets of known circuits
            if out.iter().any(|c| c.support.iter().all(|i| idx.contains(i))) {
                return;
            }
            let rows: Vec<Vec<Rat>> = idx.iter().map(|&i| columns[i].clone()).collect();
            let mat = match Matrix::from_rows(ambient, &rows) {
                Ok(m) => m.transpose(),
                Err(_) => return,
            };
            let kernel = mat.kernel();
            if kernel.len() != 1 || kernel[0].iter().any(|x| x.is_zero()) {
                return;
            }
            // canonical scaling: first nonzero coefficient 1
            let scale = kernel[0][0].recip();
            let mut coeffs = vec![Rat::zero(); s];
            for (slot, &col) in idx.iter().enumerate() {
                coeffs[col] = &kernel[0][slot] * &scale;
            }
            found.push((idx.to_vec(), coeffs));
        });
        for (support, coeffs) in found {
            out.push(Circuit { support, coeffs });
        }
    }
    Ok(out)
}

/// A tuple of integral piecewise linear functions, one per spanning-set
/// element.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TropPoint {
    pub functions: Vec<PlFunction>,
}

impl TropPoint {
    pub fn new(functions: Vec<PlFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidValuation("empty tuple".into()));
        }
        for f in &functions {
            if !f.is_integral() {
                return Err(Error::NonIntegral(
                    "tropical points consist of integral functions".into(),
                ));
            }
        }
        Ok(TropPoint { functions })
    }

    pub fn dim(&self) -> usize {
        self.functions[0].fan().ambient_dim()
    }

    /// The real tuple of values at a point.
    pub fn eval(&self, x: &[Rat]) -> Vec<Val> {
        self.functions
            .iter()
            .map(|f| Val::Finite(f.eval(x)))
            .collect()
    }
}

/// A constructive witness against membership: a lattice point and the
/// circuit whose tropicalized relation attains its minimum only once
/// there.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub point: Vec<i64>,
    pub circuit: Vec<usize>,
}

/// The outcome of a membership test.
#[derive(Clone, Debug, Serialize)]
pub struct Membership {
    pub member: bool,
    pub witness: Option<Witness>,
}

/// The common refinement of all tuple fans, further subdivided so every
/// pairwise comparison of tuple entries has constant sign per cone.
fn order_fan(pt: &TropPoint) -> Result<(Fan, Vec<Vec<Vec<Rat>>>)> {
    let mut fan = pt.functions[0].fan().clone();
    for f in pt.functions.iter().skip(1) {
        fan = fan.common_refinement(f.fan())?;
    }
    let aligned: Vec<PlFunction> = pt
        .functions
        .iter()
        .map(|f| f.on_refinement(&fan))
        .collect::<Result<_>>()?;
    let mut cuts = Vec::new();
    for mi in 0..fan.n_maximal() {
        for i in 0..aligned.len() {
            for j in (i + 1)..aligned.len() {
                let diff: Vec<Rat> = aligned[i].parts()[mi]
                    .iter()
                    .zip(&aligned[j].parts()[mi])
                    .map(|(a, b)| a - b)
                    .collect();
                let cut = scale_to_integers(&diff);
                if cut.iter().any(|&x| x != 0) {
                    cuts.push(cut);
                }
            }
        }
    }
    let fine = fan.subdivide_by_hyperplanes(&cuts)?;
    let parts: Vec<Vec<Vec<Rat>>> = pt
        .functions
        .iter()
        .map(|f| Ok(f.on_refinement(&fine)?.parts().to_vec()))
        .collect::<Result<_>>()?;
    Ok((fine, parts))
}

/// Checks every circuit against the tuple over the piecewise linear
/// semifield; on failure returns a witness point where the minimum is
/// attained only once.
fn circuit_check(pt: &TropPoint, cfg: &LinearConfiguration) -> Result<Option<Witness>> {
    let sf = PlMinPlus { dim: pt.dim() };
    let values: Vec<PlBar> = pt
        .functions
        .iter()
        .map(|f| PlBar::Finite(f.clone()))
        .collect();
    for circuit in cfg.circuits() {
        if circuit_satisfied(&sf, &values, &circuit.support) {
            continue;
        }
        // locate a point where the minimum over the support is attained
        // once: on the order fan the attainment pattern is constant per
        // cone, so an interior point of some maximal cone witnesses it
        let (fine, parts) = order_fan(pt)?;
        let real = RealMinPlus;
        for mi in 0..fine.n_maximal() {
            let x = fine.maximal_cone(mi).interior_point();
            let _ = &parts;
            let vals = pt.eval(&rat_vec(&x));
            if !circuit_satisfied(&real, &vals, &circuit.support) {
                return Ok(Some(Witness {
                    point: x,
                    circuit: circuit.support.clone(),
                }));
            }
        }
        unreachable!("a failed circuit has a witness on some cone");
    }
    Ok(None)
}

/// Finds a basis of the column matroid adapted to the real point `a`
/// (tried in order of increasing weight), verifying that the adapted
/// valuation reproduces every coordinate. Returns the basis and the
/// valuation.
pub fn real_point_to_valuation(
    a: &[Rat],
    cfg: &LinearConfiguration,
) -> Result<(Vec<usize>, Valuation)> {
    if a.len() != cfg.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} columns",
            a.len(),
            cfg.len()
        )));
    }
    // precondition: the real point satisfies every circuit
    let real = RealMinPlus;
    let vals: Vec<Val> = a.iter().map(|x| Val::Finite(x.clone())).collect();
    for c in cfg.circuits() {
        if !circuit_satisfied(&real, &vals, &c.support) {
            return Err(Error::NotInTropicalVariety(format!(
                "the minimum over circuit {:?} is attained only once",
                c.support
            )));
        }
    }
    let mut bases = cfg.bases();
    bases.sort_by(|x, y| {
        let wx: Rat = x.iter().map(|&i| a[i].clone()).sum();
        let wy: Rat = y.iter().map(|&i| a[i].clone()).sum();
        wx.cmp(&wy).then(x.cmp(y))
    });
    'bases: for basis in &bases {
        let lines: Vec<Subspace> = basis
            .iter()
            .map(|&i| Subspace::line(&cfg.columns()[i]))
            .collect::<Result<_>>()?;
        let values: Vec<Rat> = basis.iter().map(|&i| a[i].clone()).collect();
        let v = Valuation::adapted(&lines, &values)?;
        for (j, col) in cfg.columns().iter().enumerate() {
            if v.apply(col) != Val::Finite(a[j].clone()) {
                continue 'bases;
            }
        }
        return Ok((basis.clone(), v));
    }
    Err(Error::NotInTropicalVariety(
        "no basis of the configuration is adapted to the point".into(),
    ))
}

/// Reconstructs the toric vector bundle determined by a tropical point:
/// on the order fan of the tuple, every maximal cone picks an adapted
/// basis (verified), consistency of the induced min-decomposition is
/// verified cone by cone, and the ray filtrations are extracted from the
/// point valuations at the ray generators.
pub fn reconstruct_valuation(
    pt: &TropPoint,
    cfg: &LinearConfiguration,
) -> Result<KlyachkoBundle> {
    if pt.functions.len() != cfg.len() {
        return Err(Error::DimensionMismatch(format!(
            "tuple of length {} for {} columns",
            pt.functions.len(),
            cfg.len()
        )));
    }
    let (fine, parts) = order_fan(pt)?;
    let witness_at = |x: &[i64]| -> Option<Witness> {
        let real = RealMinPlus;
        let vals = pt.eval(&rat_vec(x));
        for c in cfg.circuits() {
            if !circuit_satisfied(&real, &vals, &c.support) {
                return Some(Witness {
                    point: x.to_vec(),
                    circuit: c.support.clone(),
                });
            }
        }
        None
    };
    let fail = |w: Witness| Error::NotATropicalPoint {
        witness: w
            .point
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", "),
        relation: format!("x{:?}", w.circuit),
    };

    for mi in 0..fine.n_maximal() {
        let x0 = fine.maximal_cone(mi).interior_point();
        let a: Vec<Rat> = pt.functions.iter().map(|f| f.eval_int(&x0)).collect();
        let basis = match real_point_to_valuation(&a, cfg) {
            Ok((b, _)) => b,
            Err(_) => {
                let w = witness_at(&x0).expect("an unrealizable point violates a circuit");
                return Err(fail(w));
            }
        };
        // the induced min-decomposition must reproduce every tuple entry
        // as a linear function on this cone
        let basis_rows: Vec<Vec<Rat>> = basis.iter().map(|&i| cfg.columns()[i].clone()).collect();
        let mat = Matrix::from_rows(cfg.ambient_dim(), &basis_rows)?.transpose();
        for (j, col) in cfg.columns().iter().enumerate() {
            let coords = mat.solve(col).expect("basis spans the fiber");
            let support: Vec<usize> = coords
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, _)| basis[k])
                .collect();
            let best = support
                .iter()
                .min_by(|&&p, &&q| a[p].cmp(&a[q]))
                .copied()
                .expect("nonzero vector has support");
            // linear parts must agree on the whole cone
            if parts[best][mi] != parts[j][mi] {
                let w = witness_at(&x0)
                    .or_else(|| {
                        fine.maximal_cone(mi)
                            .generators()
                            .iter()
                            .find_map(|g| witness_at(g))
                    })
                    .expect("inconsistent decomposition violates a circuit");
                return Err(fail(w));
            }
        }
    }

    // ray filtrations from the point valuations at the ray generators
    let filtrations = fine
        .rays()
        .iter()
        .map(|ray| {
            let a: Vec<Rat> = pt.functions.iter().map(|f| f.eval_int(ray)).collect();
            let (_, v) = real_point_to_valuation(&a, cfg).map_err(|_| {
                fail(witness_at(ray).expect("an unrealizable ray point violates a circuit"))
            })?;
            Filtration::from_valuation(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    KlyachkoBundle::new(fine, filtrations)
}

/// Two-tier membership: the circuit test is a fast filter with a
/// constructive witness; the authoritative criterion is that the
/// reconstruction succeeds. The two verdicts must agree.
pub fn trop_membership(pt: &TropPoint, cfg: &LinearConfiguration) -> Result<Membership> {
    let circuit_witness = circuit_check(pt, cfg)?;
    let reconstructed = reconstruct_valuation(pt, cfg);
    match (&circuit_witness, &reconstructed) {
        (None, Ok(_)) => Ok(Membership {
            member: true,
            witness: None,
        }),
        (Some(w), Err(_)) => Ok(Membership {
            member: false,
            witness: Some(w.clone()),
        }),
        (None, Err(e)) => panic!("circuit test passed but reconstruction failed: {e}"),
        (Some(_), Ok(_)) => panic!("circuit test failed but reconstruction succeeded"),
    }
}

/// The diagram of a bundle with respect to a spanning set: the m x s
/// integer matrix whose column i holds the valuation values of b_i at
/// the ray generators.
pub fn diagram_of_bundle(
    bundle: &KlyachkoBundle,
    cfg: &LinearConfiguration,
) -> Result<Vec<Vec<i64>>> {
    if cfg.ambient_dim() != bundle.rank() {
        return Err(Error::DimensionMismatch(
            "spanning set lives in the fiber".into(),
        ));
    }
    bundle
        .filtrations()
        .iter()
        .map(|f| {
            cfg.columns()
                .iter()
                .map(|b| {
                    f.value_of(b)
                        .ok_or_else(|| Error::InvalidValuation("zero column".into()))
                })
                .collect()
        })
        .collect()
}

/// The diagram of a tropical point on a fan: row per ray, column per
/// tuple entry.
pub fn diagram_of_point(pt: &TropPoint, fan: &Fan) -> Result<Vec<Vec<i64>>> {
    fan.rays()
        .iter()
        .map(|ray| {
            pt.functions
                .iter()
                .map(|f| {
                    f.eval_int(ray)
                        .to_i64()
                        .ok_or_else(|| Error::NonIntegral("diagram entry".into()))
                })
                .collect()
        })
        .collect()
}

/// Rebuilds the bundle of a diagram on the given fan. Every row is a
/// real tropical point of the ideal whose valuation gives the filtration
/// of that ray; the assembled data must satisfy the compatibility
/// condition, and the bundle's own diagram must reproduce the input.
/// (Column values are only linear on each cone after passing to the
/// subdivision carrying the tuple, so recovery goes through the rows,
/// not through per-cone interpolation of the columns.)
pub fn bundle_from_diagram(
    cfg: &LinearConfiguration,
    fan: &Fan,
    diagram: &[Vec<i64>],
) -> Result<KlyachkoBundle> {
    let m = fan.rays().len();
    let s = cfg.len();
    if diagram.len() != m || diagram.iter().any(|row| row.len() != s) {
        return Err(Error::DimensionMismatch(format!(
            "diagram must be {m} rows of {s} entries"
        )));
    }
    let filtrations = diagram
        .iter()
        .map(|row| {
            let a: Vec<Rat> = row.iter().map(|&v| Rat::from(v)).collect();
            let (_, v) = real_point_to_valuation(&a, cfg)?;
            Filtration::from_valuation(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    let bundle = KlyachkoBundle::new(fan.clone(), filtrations)?;
    let back = diagram_of_bundle(&bundle, cfg)?;
    if back != diagram {
        return Err(Error::InconsistentInterpolation(
            "the reconstructed bundle does not reproduce the diagram".into(),
        ));
    }
    Ok(bundle)
}
