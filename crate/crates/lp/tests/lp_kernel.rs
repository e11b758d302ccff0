use proptest::prelude::*;
use vppfr_lp::{
    complementary_slackness, duality_gap, primal_residual, solve_lp, solve_milp, to_lp_string, LpError, LpProblem,
    RowSense, Status,
};

const INF: f64 = f64::INFINITY;

/// Smallest objective over all vertices of `{x : rows, 0 <= x <= ub}`,
/// found by solving every n-subset of active constraints densely.
fn vertex_oracle(c: &[f64], rows: &[(Vec<f64>, RowSense, f64)], ub: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), 0.0));
        planes.push((e, ub[j]));
    }
    let feasible = |x: &[f64]| {
        x.iter().zip(ub).all(|(v, u)| *v >= -1e-7 && *v <= u + 1e-7)
            && rows.iter().all(|(a, s, b)| {
                let act: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                match s {
                    RowSense::Le => act <= b + 1e-7,
                    RowSense::Ge => act >= b - 1e-7,
                    RowSense::Eq => (act - b).abs() <= 1e-7,
                }
            })
    };
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        // dense Gaussian elimination with partial pivoting
        let mut m: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                let mut r = planes[i].0.clone();
                r.push(planes[i].1);
                r
            })
            .collect();
        let mut ok = true;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            if m[piv][col].abs() < 1e-10 {
                ok = false;
                break;
            }
            m.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for cc in col..=n {
                        m[r][cc] -= f * m[col][cc];
                    }
                }
            }
        }
        if ok {
            let x: Vec<f64> = (0..n).map(|i| m[i][n] / m[i][i]).collect();
            if feasible(&x) {
                let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn single_floor_row_prices_at_one() {
    let mut p = LpProblem::new();
    let x = p.add_var("x", 0.0, INF, 1.0).unwrap();
    p.add_row("floor", &[(x, 1.0)], RowSense::Ge, 1.0).unwrap();
    let sol = solve_lp(&p).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-12);
    assert!((sol.objective - 1.0).abs() < 1e-12);
    assert!((sol.duals[0] - 1.0).abs() < 1e-12);
}

#[test]
fn shared_capacity_row_has_unit_shadow_price() {
    let mut p = LpProblem::new();
    let x = p.add_var("x", 0.0, INF, -1.0).unwrap();
    let y = p.add_var("y", 0.0, INF, -1.0).unwrap();
    p.add_row("cap", &[(x, 1.0), (y, 1.0)], RowSense::Le, 1.0).unwrap();
    let sol = solve_lp(&p).unwrap();
    assert!((sol.objective + 1.0).abs() < 1e-12);
    // relaxing the cap by one unit lowers the minimised objective by one
    assert!((sol.duals[0] + 1.0).abs() < 1e-12);
    assert!((sol.duals[0].abs() - 1.0).abs() < 1e-12);
    assert!(duality_gap(&p, &sol) < 1e-12);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut p = LpProblem::new();
    let x = p.add_var("x", 0.0, INF, 1.0).unwrap();
    p.add_row("lo", &[(x, 1.0)], RowSense::Ge, 2.0).unwrap();
    p.add_row("hi", &[(x, 1.0)], RowSense::Le, 1.0).unwrap();
    assert_eq!(solve_lp(&p).unwrap().status, Status::Infeasible);
}

#[test]
fn unbounded_ray_is_reported() {
    let mut p = LpProblem::new();
    let x = p.add_var("x", 0.0, INF, -1.0).unwrap();
    let y = p.add_var("y", 0.0, INF, 0.0).unwrap();
    p.add_row("r", &[(x, 1.0), (y, -1.0)], RowSense::Le, 1.0).unwrap();
    assert_eq!(solve_lp(&p).unwrap().status, Status::Unbounded);
}

#[test]
fn integrality_marks_are_rejected_by_the_lp_entry_point() {
    let mut p = LpProblem::new();
    p.add_binary("b", 1.0).unwrap();
    assert_eq!(solve_lp(&p).unwrap_err(), LpError::HasIntegers);
}

#[test]
fn duplicate_names_and_bad_bounds_are_errors() {
    let mut p = LpProblem::new();
    p.add_var("x", 0.0, 1.0, 0.0).unwrap();
    assert!(matches!(p.add_var("x", 0.0, 1.0, 0.0), Err(LpError::DuplicateName(_))));
    assert!(matches!(
        p.add_var("z", 2.0, 1.0, 0.0),
        Err(LpError::InconsistentBounds { .. })
    ));
}

#[test]
fn binary_knapsack_picks_the_heavier_item() {
    let mut p = LpProblem::new();
    let x = p.add_binary("x", -3.0).unwrap();
    let y = p.add_binary("y", -2.0).unwrap();
    p.add_row("cap", &[(x, 1.0), (y, 1.0)], RowSense::Le, 1.0).unwrap();
    let sol = solve_milp(&p).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.x, vec![1.0, 0.0]);
    assert!((sol.objective + 3.0).abs() < 1e-12);
}

#[test]
fn integral_relaxation_needs_no_branching() {
    let mut p = LpProblem::new();
    let x = p.add_binary("x", 1.0).unwrap();
    p.add_row("on", &[(x, 1.0)], RowSense::Ge, 1.0).unwrap();
    let sol = solve_milp(&p).unwrap();
    let rep = sol.milp.unwrap();
    assert_eq!(rep.nodes, 1);
    assert_eq!(sol.x, vec![1.0]);
    assert_eq!(rep.root_bound, sol.objective);
}

#[test]
fn fractional_relaxation_branches_to_integer_optimum() {
    // max 5a + 4b + 3c, 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
    let mut p = LpProblem::new();
    let a = p.add_binary("a", -5.0).unwrap();
    let b = p.add_binary("b", -4.0).unwrap();
    let c = p.add_binary("c", -3.0).unwrap();
    let w = p.add_var("w", 0.0, 1.5, -1.0).unwrap();
    p.add_row("r1", &[(a, 2.0), (b, 3.0), (c, 1.0), (w, 1.0)], RowSense::Le, 4.5)
        .unwrap();
    p.add_row("r2", &[(a, 4.0), (b, 1.0), (c, 2.0)], RowSense::Le, 11.0)
        .unwrap();
    p.add_row("r3", &[(a, 3.0), (b, 4.0), (c, 2.0), (w, 2.0)], RowSense::Le, 8.0)
        .unwrap();
    let sol = solve_milp(&p).unwrap();
    // enumerate binaries, optimise w in closed form
    let mut best = f64::INFINITY;
    for bits in 0..8u32 {
        let (va, vb, vc) = ((bits & 1) as f64, ((bits >> 1) & 1) as f64, ((bits >> 2) & 1) as f64);
        if 4.0 * va + vb + 2.0 * vc > 11.0 {
            continue;
        }
        let wmax = (4.5 - 2.0 * va - 3.0 * vb - vc)
            .min((8.0 - 3.0 * va - 4.0 * vb - 2.0 * vc) / 2.0)
            .min(1.5);
        if wmax < 0.0 {
            continue;
        }
        best = best.min(-5.0 * va - 4.0 * vb - 3.0 * vc - wmax);
    }
    assert!((sol.objective - best).abs() < 1e-9, "{} vs {best}", sol.objective);
    let relax = solve_lp(&p.relaxation()).unwrap();
    assert!(relax.objective <= sol.objective + 1e-12);
}

#[test]
fn lp_text_dump_lists_every_section() {
    let mut p = LpProblem::new();
    let x = p.add_var("x", 0.0, 4.0, 1.0).unwrap();
    let t = p.add_var("theta", -INF, INF, 0.0).unwrap();
    let b = p.add_binary("on", 2.0).unwrap();
    p.add_row("bal", &[(x, 1.0), (t, -2.5), (b, 1.0)], RowSense::Eq, 1.0)
        .unwrap();
    let s = to_lp_string(&p);
    for needle in [
        "Minimize",
        "Subject To",
        "bal:",
        "- 2.5 theta",
        "theta free",
        "Binaries",
        "End",
    ] {
        assert!(s.contains(needle), "missing {needle} in\n{s}");
    }
}

#[test]
fn degenerate_transportation_problem_is_solved_with_certificates() {
    // 3 supplies x 4 demands with equal totals: highly degenerate
    let supply = [20.0, 30.0, 25.0];
    let demand = [10.0, 25.0, 15.0, 25.0];
    let cost = [[4.0, 6.0, 9.0, 5.0], [5.0, 3.0, 8.0, 7.0], [6.0, 4.0, 3.0, 5.0]];
    let mut p = LpProblem::new();
    let mut v = vec![];
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            v.push(p.add_var(format!("x{i}{j}"), 0.0, INF, c).unwrap());
        }
    }
    for (i, &s) in supply.iter().enumerate() {
        let coeffs: Vec<_> = (0..4).map(|j| (v[i * 4 + j], 1.0)).collect();
        p.add_row(format!("s{i}"), &coeffs, RowSense::Le, s).unwrap();
    }
    for (j, &d) in demand.iter().enumerate() {
        let coeffs: Vec<_> = (0..3).map(|i| (v[i * 4 + j], 1.0)).collect();
        p.add_row(format!("d{j}"), &coeffs, RowSense::Ge, d).unwrap();
    }
    let sol = solve_lp(&p).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!(primal_residual(&p, &sol.x) < 1e-9);
    assert!(duality_gap(&p, &sol) < 1e-9);
    assert!(complementary_slackness(&p, &sol) < 1e-9);
    // demand rows are >= rows in a minimisation: nonnegative prices
    for j in 0..4 {
        assert!(sol.duals[3 + j] >= -1e-12);
    }
}

fn sense_strategy() -> impl Strategy<Value = RowSense> {
    prop_oneof![Just(RowSense::Le), Just(RowSense::Ge), Just(RowSense::Eq)]
}

fn small_lp() -> impl Strategy<Value = (Vec<f64>, Vec<(Vec<f64>, RowSense, f64)>, Vec<f64>)> {
    (1usize..=3, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), sense_strategy(), -6i32..=10), m),
            prop::collection::vec(1i32..=6, n),
        )
            .prop_map(|(c, rows, ub)| {
                (
                    c.into_iter().map(f64::from).collect(),
                    rows.into_iter()
                        .map(|(a, s, b)| (a.into_iter().map(f64::from).collect(), s, f64::from(b)))
                        .collect(),
                    ub.into_iter().map(f64::from).collect(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vertex_enumeration_with_certificates((c, rows, ub) in small_lp()) {
        let mut p = LpProblem::new();
        let vars: Vec<_> = c.iter().enumerate()
            .map(|(j, &cj)| p.add_var(format!("x{j}"), 0.0, ub[j], cj).unwrap())
            .collect();
        for (i, (a, s, b)) in rows.iter().enumerate() {
            let coeffs: Vec<_> = a.iter().enumerate().map(|(j, &aj)| (vars[j], aj)).collect();
            p.add_row(format!("r{i}"), &coeffs, *s, *b).unwrap();
        }
        let sol = solve_lp(&p).unwrap();
        match vertex_oracle(&c, &rows, &ub) {
            None => prop_assert_eq!(sol.status, Status::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, Status::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-7, "{} vs {}", sol.objective, best);
                prop_assert!(primal_residual(&p, &sol.x) <= 1e-8);
                prop_assert!(duality_gap(&p, &sol) <= 1e-8);
                prop_assert!(complementary_slackness(&p, &sol) <= 1e-8);
            }
        }
    }

    #[test]
    fn milp_never_beats_its_relaxation((c, rows, ub) in small_lp()) {
        let mut p = LpProblem::new();
        let vars: Vec<_> = c.iter().enumerate()
            .map(|(j, &cj)| if j == 0 {
                p.add_binary("b0", cj).unwrap()
            } else {
                p.add_var(format!("x{j}"), 0.0, ub[j], cj).unwrap()
            })
            .collect();
        for (i, (a, s, b)) in rows.iter().enumerate() {
            let coeffs: Vec<_> = a.iter().enumerate().map(|(j, &aj)| (vars[j], aj)).collect();
            p.add_row(format!("r{i}"), &coeffs, *s, *b).unwrap();
        }
        let mip = solve_milp(&p).unwrap();
        let relax = solve_lp(&p.relaxation()).unwrap();
        if mip.status == Status::Optimal {
            prop_assert_eq!(relax.status, Status::Optimal);
            prop_assert!(relax.objective <= mip.objective + 1e-9);
            prop_assert!(primal_residual(&p, &mip.x) <= 1e-8);
            prop_assert!(mip.x[0] == 0.0 || mip.x[0] == 1.0);
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical((c, rows, ub) in small_lp()) {
        let mut p = LpProblem::new();
        let vars: Vec<_> = c.iter().enumerate()
            .map(|(j, &cj)| p.add_var(format!("x{j}"), 0.0, ub[j], cj).unwrap())
            .collect();
        for (i, (a, s, b)) in rows.iter().enumerate() {
            let coeffs: Vec<_> = a.iter().enumerate().map(|(j, &aj)| (vars[j], aj)).collect();
            p.add_row(format!("r{i}"), &coeffs, *s, *b).unwrap();
        }
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.duals, b.duals);
    }
}
