//! Builders for the standard fans and bundle fixtures used throughout
//! the test suite and shipped by the command-line tool.

use crate::error::Result;
use crate::fan::Fan;
use crate::klyachko::{Filtration, KlyachkoBundle};
use crate::linalg::Subspace;
use crate::plfunc::PlFunction;
use crate::rat::{rat_vec, Rat};

/// The fan of projective n-space: rays e_1, ..., e_n and -(e_1+...+e_n),
/// maximal cones on every n-subset.
pub fn fan_pn(n: usize) -> Result<Fan> {
    let mut rays = Vec::new();
    for i in 0..n {
        let mut v = vec![0i64; n];
        v[i] = 1;
        rays.push(v);
    }
    rays.push(vec![-1; n]);
    let maximal: Vec<Vec<usize>> = (0..=n)
        .map(|skip| (0..=n).filter(|&j| j != skip).collect())
        .collect();
    Fan::new(n, rays, &maximal)
}

/// The fan of P^1 x P^1: the four quadrants.
pub fn fan_p1xp1() -> Result<Fan> {
    Fan::new(
        2,
        vec![vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1]],
        &[vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
    )
}

/// The tangent bundle of P^n in Klyachko form: the filtration of the ray
/// through v jumps from the full fiber to span(v) at level 1.
pub fn tangent_pn(n: usize) -> Result<KlyachkoBundle> {
    let fan = fan_pn(n)?;
    let filtrations = fan
        .rays()
        .iter()
        .map(|v| {
            Filtration::new(
                n,
                vec![(0, Subspace::full(n)), (1, Subspace::line(&rat_vec(v))?)],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    KlyachkoBundle::new(fan, filtrations)
}

/// The trivial bundle of the given rank: every ray filtration jumps from
/// the full fiber to 0 above level 0.
pub fn trivial_bundle(fan: Fan, rank: usize) -> Result<KlyachkoBundle> {
    let filtrations = fan
        .rays()
        .iter()
        .map(|_| Filtration::trivial(rank, 0))
        .collect();
    KlyachkoBundle::new(fan, filtrations)
}

/// The rank-1 bundle of an integral piecewise linear function: the ray
/// through v jumps from the fiber to 0 above level phi(v).
pub fn line_bundle(phi: &PlFunction) -> Result<KlyachkoBundle> {
    let filtrations = phi
        .fan()
        .rays()
        .iter()
        .zip(phi.values_on_rays())
        .map(|(_, v)| {
            let level = v
                .to_i64()
                .ok_or_else(|| crate::error::Error::NonIntegral(format!("ray value {v}")))?;
            Ok(Filtration::trivial(1, level))
        })
        .collect::<Result<Vec<_>>>()?;
    KlyachkoBundle::new(phi.fan().clone(), filtrations)
}

/// O(d) on P^n as a rank-1 bundle: ray value d on the ray -(e_1+...+e_n)
/// and 0 elsewhere.
pub fn o_d_on_pn(n: usize, d: i64) -> Result<KlyachkoBundle> {
    let fan = fan_pn(n)?;
    let filtrations = fan
        .rays()
        .iter()
        .map(|v| {
            let level = if v.iter().all(|&x| x == -1) { d } else { 0 };
            Filtration::trivial(1, level)
        })
        .collect();
    KlyachkoBundle::new(fan, filtrations)
}

/// The values of the tangent-bundle valuation of P^2 on the vectors
/// v1, v2, v3, as piecewise linear functions built directly from the
/// closed branch formulas (a test oracle independent of the bundle
/// machinery).
pub fn tp2_valuation_closed_forms() -> Result<[PlFunction; 3]> {
    let base = fan_pn(2)?;
    let mk = |cut: Vec<i64>, ray_vals: &[(Vec<i64>, i64)]| -> Result<PlFunction> {
        let fan = base.subdivide_by_hyperplanes(&[cut])?;
        let values: Vec<Rat> = fan
            .rays()
            .iter()
            .map(|r| {
                let v = ray_vals
                    .iter()
                    .find(|(x, _)| x == r)
                    .map(|(_, v)| *v)
                    .expect("value listed for every ray");
                Rat::from(v)
            })
            .collect();
        PlFunction::from_ray_values(&fan, &values)
    };
    // v(v1): min(x2-x1, -x1) on sigma_1, x1-x2 on sigma_2, x1 on sigma_3;
    // sigma_1 is subdivided along x2 = 0 with new ray (-1, 0)
    let f1 = mk(
        vec![0, 1],
        &[
            (vec![1, 0], 1),
            (vec![0, 1], 0),
            (vec![-1, -1], 0),
            (vec![-1, 0], 1),
        ],
    )?;
    // v(v2): x2-x1 on sigma_1, min(x1-x2, -x2) on sigma_2, x2 on sigma_3;
    // sigma_2 is subdivided along x1 = 0 with new ray (0, -1)
    let f2 = mk(
        vec![1, 0],
        &[
            (vec![1, 0], 0),
            (vec![0, 1], 1),
            (vec![-1, -1], 0),
            (vec![0, -1], 1),
        ],
    )?;
    // v(v3): -x1 on sigma_1, -x2 on sigma_2, min(x1, x2) on sigma_3;
    // sigma_3 is subdivided along x1 = x2 with new ray (1, 1)
    let f3 = mk(
        vec![1, -1],
        &[
            (vec![1, 0], 0),
            (vec![0, 1], 0),
            (vec![-1, -1], 1),
            (vec![1, 1], 1),
        ],
    )?;
    Ok([f1, f2, f3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pn_fans_are_complete() {
        for n in 1..=3 {
            assert!(fan_pn(n).unwrap().is_complete());
        }
        assert!(fan_p1xp1().unwrap().is_complete());
    }

    #[test]
    fn tangent_bundles_build() {
        for n in 1..=3 {
            let b = tangent_pn(n).unwrap();
            assert_eq!(b.rank(), n);
        }
    }

    #[test]
    fn closed_forms_match_formulas() {
        let [f1, f2, f3] = tp2_valuation_closed_forms().unwrap();
        // spot values straight from the branch formulas
        assert_eq!(f1.eval(&rat_vec(&[-1, 0])), Rat::from(1));
        assert_eq!(f2.eval(&rat_vec(&[0, -2])), Rat::from(2));
        assert_eq!(f3.eval(&rat_vec(&[2, 1])), Rat::from(1));
    }
}
