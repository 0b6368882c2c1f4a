// exploratory search: nef but not globally generated (run with --ignored)
use klytor_core::examples;
use klytor_core::fan::Fan;
use klytor_core::klyachko::{Filtration, KlyachkoBundle};
use klytor_core::linalg::Subspace;
use klytor_core::positivity::{is_globally_generated, is_nef};
use klytor_core::rat::{rat_vec, Rat};

fn sp(ambient: usize, rows: &[&[i64]]) -> Subspace {
    let rows: Vec<Vec<Rat>> = rows.iter().map(|r| rat_vec(r)).collect();
    Subspace::span(ambient, &rows).unwrap()
}

fn rank2_options(lines: &[Vec<i64>], bases: &[i64], spans: &[i64]) -> Vec<Filtration> {
    let mut out = vec![Filtration::trivial(2, 0)];
    for &base in bases {
        for &d in spans {
            for l in lines {
                out.push(
                    Filtration::new(
                        2,
                        vec![
                            (base, Subspace::full(2)),
                            (base + d, Subspace::line(&rat_vec(l)).unwrap()),
                        ],
                    )
                    .unwrap(),
                );
            }
        }
    }
    out
}

fn rank3_options() -> Vec<Filtration> {
    let planes = [
        sp(3, &[&[1, 0, 0], &[0, 1, 0]]),
        sp(3, &[&[1, 0, 0], &[0, 0, 1]]),
        sp(3, &[&[0, 1, 0], &[0, 0, 1]]),
        sp(3, &[&[1, 0, 1], &[0, 1, 0]]),
        sp(3, &[&[1, 1, 0], &[0, 0, 1]]),
        sp(3, &[&[1, 0, 0], &[0, 1, 1]]),
    ];
    let lines = [
        sp(3, &[&[1, 0, 0]]),
        sp(3, &[&[0, 1, 0]]),
        sp(3, &[&[0, 0, 1]]),
        sp(3, &[&[1, 1, 1]]),
        sp(3, &[&[1, 1, 0]]),
    ];
    let mut out = vec![Filtration::trivial(3, 0)];
    for p in &planes {
        out.push(Filtration::new(3, vec![(0, Subspace::full(3)), (1, p.clone())]).unwrap());
    }
    for l in &lines {
        out.push(Filtration::new(3, vec![(0, Subspace::full(3)), (1, l.clone())]).unwrap());
    }
    // two-step flags
    for (p, l) in [(0usize, 0usize), (0, 1), (2, 2), (3, 1), (1, 3)] {
        if planes[p].contains_sub(&lines[l]) {
            out.push(
                Filtration::new(
                    3,
                    vec![
                        (0, Subspace::full(3)),
                        (1, planes[p].clone()),
                        (2, lines[l].clone()),
                    ],
                )
                .unwrap(),
            );
        }
    }
    out
}

fn search(fan: &Fan, opts: &[Filtration], name: &str) -> bool {
    let n = fan.rays().len();
    let total = opts.len().pow(n as u32);
    let mut count_nef = 0u64;
    for idx in 0..total {
        let mut k = idx;
        let mut filts = Vec::with_capacity(n);
        for _ in 0..n {
            filts.push(opts[k % opts.len()].clone());
            k /= opts.len();
        }
        let Ok(b) = KlyachkoBundle::new(fan.clone(), filts) else { continue };
        let Ok(nef) = is_nef(&b) else { continue };
        if !nef {
            continue;
        }
        count_nef += 1;
        if !is_globally_generated(&b).unwrap() {
            println!("WITNESS on {name}: idx {idx}");
            for (i, f) in b.filtrations().iter().enumerate() {
                println!(
                    "  ray {:?}: {:?}",
                    fan.rays()[i],
                    f.steps()
                        .iter()
                        .map(|(l, s)| (l, s.basis_rows()))
                        .collect::<Vec<_>>()
                );
            }
            return true;
        }
    }
    println!("no witness on {name} ({count_nef} nef bundles of {total})");
    false
}

#[test]
#[ignore]
fn search_nef_not_gg() {
    let lines5 = vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1], vec![1, 2]];
    let p2 = examples::fan_pn(2).unwrap();

    // rank 3 on P^2 first (cheap pool)
    if search(&p2, &rank3_options(), "P2 rank3") {
        return;
    }

    let f2 = Fan::new(
        2,
        vec![vec![1, 0], vec![0, 1], vec![-1, 2], vec![0, -1]],
        &[vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
    )
    .unwrap();
    if search(&f2, &rank2_options(&lines5, &[-1, 0], &[1, 2]), "F2 rank2") {
        return;
    }

    if search(
        &p2,
        &rank2_options(&lines5, &[-2, -1, 0], &[1, 2, 3, 4]),
        "P2 rank2 deep",
    ) {
        return;
    }

    let p1p1 = examples::fan_p1xp1().unwrap();
    if search(
        &p1p1,
        &rank2_options(&lines5, &[-1, 0], &[1, 2, 3]),
        "P1xP1 rank2 deep",
    ) {
        return;
    }
    panic!("no witness found");
}
