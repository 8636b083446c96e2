mod common;

use std::sync::Arc;

use proptest::prelude::*;
use tsfrac::conditions::{
    contraction_constant, estimate_constants, existence_beta_search, HypothesisConstants, Sampling,
};
use tsfrac::expr::{Bindings, Expr, Role};
use tsfrac::frac::{caputo_nabla, caputo_via_rl, rl_nabla};
use tsfrac::nabla::{nabla_derivative, nabla_integral};
use tsfrac::solver::{apply_impulse, solve, Impulse, ImpulsiveProblem, SolverConfig};
use tsfrac::timescale::{Grid, TimeScale};
use tsfrac::{FracOrder, GridFunction};

#[test]
fn parser_matches_precedence_oracle() {
    common::prop_parser_precedence(1000).unwrap();
}

#[test]
fn classification_matches_graininess() {
    common::prop_classification(1000).unwrap();
}

#[test]
fn grid_refinement_keeps_nodes() {
    common::prop_grid_monotone(1000).unwrap();
}

#[test]
fn csv_output_is_deterministic() {
    common::prop_csv_deterministic(1000).unwrap();
}

#[test]
fn oracle_handles_known_cases() {
    use common::Tok::*;
    let b = Bindings::default();
    let tokens = [Num(2.0), Op('^'), Num(3.0), Op('^'), Num(2.0)];
    assert_eq!(common::shunting_yard(&tokens, &b), Some(512.0));
    let tokens = [Op('-'), Num(2.0), Op('^'), Num(2.0)];
    assert_eq!(common::shunting_yard(&tokens, &b), Some(-4.0));
    let tokens = [Num(1.0), Op('-'), Num(2.0), Op('-'), Num(3.0)];
    assert_eq!(common::shunting_yard(&tokens, &b), Some(-4.0));
    let tokens = [Ident("ln"), Open, Num(0.0), Close];
    assert_eq!(common::shunting_yard(&tokens, &b), None);
}

fn constants() -> impl Strategy<Value = (HypothesisConstants, usize)> {
    (0usize..4).prop_flat_map(|m| {
        (
            0.0f64..1.0,
            0.0f64..0.95,
            0.0f64..1.0,
            0.0f64..1.0,
            0.0f64..0.95,
            prop::collection::vec(0.0f64..1.0, m),
            prop::collection::vec(0.0f64..0.5, m),
            0.0f64..1.0,
            0.0f64..1.0,
        )
            .prop_map(move |(k, g, a, f, e, mb, ml, mu, h)| {
                (
                    HypothesisConstants {
                        lipschitz_p: k,
                        lipschitz_h: g,
                        growth_offset: a,
                        growth_p: f,
                        growth_h: e,
                        impulse_bound: mb,
                        impulse_lipschitz: ml,
                        phi_growth: mu,
                        phi_lipschitz: h,
                    },
                    m,
                )
            })
    })
}

proptest! {
    #[test]
    fn contraction_constant_is_monotone(
        (c, m) in constants(),
        w in 0.05f64..0.95,
        horizon in 0.1f64..5.0,
        bump in 0.0f64..1.0,
    ) {
        let w = FracOrder::new(w).unwrap();
        let base = contraction_constant(&c, w, horizon, m).u;
        prop_assert_eq!(base, {
            let r = contraction_constant(&c, w, horizon, m);
            r.impulse_term + r.phi_term + r.rhs_term
        });

        let mut up = c.clone();
        up.lipschitz_p += bump;
        prop_assert!(contraction_constant(&up, w, horizon, m).u >= base);
        let mut up = c.clone();
        up.phi_lipschitz += bump;
        prop_assert!(contraction_constant(&up, w, horizon, m).u >= base);
        for i in 0..m {
            let mut up = c.clone();
            up.impulse_lipschitz[i] += bump;
            prop_assert!(contraction_constant(&up, w, horizon, m).u >= base);
        }
        prop_assert!(contraction_constant(&c, w, horizon + bump, m).u >= base);
        let mut more = c.clone();
        more.impulse_lipschitz.push(0.0);
        more.impulse_bound.push(0.0);
        prop_assert!(contraction_constant(&more, w, horizon, m + 1).u >= base);
    }

    #[test]
    fn beta_exists_iff_slope_below_one((c, m) in constants(), w in 0.05f64..0.95, horizon in 0.1f64..3.0) {
        let w = FracOrder::new(w).unwrap();
        let r = existence_beta_search(&c, w, horizon, m);
        prop_assert_eq!(r.beta.is_some(), r.slope < 1.0);
        if let Some(beta) = r.beta {
            prop_assert!(beta > 0.0);
            // direct re-evaluation of the condition from the constants
            let wv = w.value();
            let factor = (m as f64 + 1.0) * horizon.powf(wv)
                / (common::gamma_oracle(wv + 1.0) * (1.0 - c.growth_h));
            let lhs = c.phi_growth * beta
                + c.impulse_bound.iter().sum::<f64>()
                + factor * (c.growth_offset + c.growth_p * beta);
            prop_assert!(lhs < beta, "lhs {} >= beta {}", lhs, beta);
        }
    }

    #[test]
    fn estimates_do_not_exceed_linear_coefficients(
        a in -0.9f64..0.9,
        b in -0.9f64..0.9,
        c in -1.0f64..1.0,
    ) {
        let rhs = Expr::parse(&format!("{a}*p + {b}*h + {c}"), Role::Rhs).unwrap();
        let problem = ImpulsiveProblem::new(
            TimeScale::interval(0.0, 1.0).unwrap(),
            FracOrder::new(0.5).unwrap(),
            rhs,
            vec![],
            Expr::parse("0", Role::Phi).unwrap(),
            None,
        ).unwrap();
        let s = Sampling { resolution: 9, random_pairs: 16, ..Default::default() };
        let est = estimate_constants(&problem, &s).unwrap().constants;
        // quotients of an affine map are exact up to rounding of its values
        let roundoff = 1e-12;
        prop_assert!(est.lipschitz_p <= a.abs() + roundoff);
        prop_assert!(est.lipschitz_h <= b.abs() + roundoff);
        prop_assert!((est.lipschitz_p - a.abs()).abs() < 1e-9);
        prop_assert!((est.lipschitz_h - b.abs()).abs() < 1e-9);
    }

    #[test]
    fn integer_backward_jump(n in 1i64..50, k in 1i64..50) {
        let ts = TimeScale::integers(0, n).unwrap();
        let theta = (k % n + 1) as f64;
        prop_assert_eq!(ts.backward_jump(theta).unwrap(), theta - 1.0);
        prop_assert_eq!(ts.graininess(theta).unwrap(), 1.0);
    }

    #[test]
    fn integral_is_linear(ts in common::time_scale(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let g = common::grid(&ts, 0.05);
        let f = GridFunction::from_fn(Arc::clone(&g), f64::sin).unwrap();
        let h = GridFunction::from_fn(Arc::clone(&g), |t| t * t).unwrap();
        let combo = GridFunction::new(
            Arc::clone(&g),
            f.values().iter().zip(h.values()).map(|(a, b)| x * a + y * b).collect(),
        ).unwrap();
        let last = g.len() - 1;
        if last > 0 {
            let lhs = nabla_integral(&combo, 0, last).unwrap();
            let rhs = x * nabla_integral(&f, 0, last).unwrap() + y * nabla_integral(&h, 0, last).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn fundamental_relation_on_integers(values in prop::collection::vec(-100i32..100, 9)) {
        let g = Arc::new(Grid::build(&TimeScale::integers(0, 8).unwrap(), 1.0, &[]).unwrap());
        let f = GridFunction::new(Arc::clone(&g), values.iter().map(|&v| v as f64).collect()).unwrap();
        let d: Vec<f64> = std::iter::once(0.0)
            .chain((1..9).map(|i| nabla_derivative(&f, i).unwrap()))
            .collect();
        let d = GridFunction::new(Arc::clone(&g), d).unwrap();
        for a in 0..9 {
            for b in a..9 {
                prop_assert_eq!(nabla_integral(&d, a, b).unwrap(), f.value(b) - f.value(a));
            }
        }
    }

    #[test]
    fn shifted_rl_matches_rl_when_start_value_vanishes(
        ts in common::time_scale(),
        w in 0.05f64..0.95,
        freq in 0.5f64..3.0,
    ) {
        let g = common::grid(&ts, 0.1);
        prop_assume!(g.len() > 2);
        let start = g.node(0);
        let f = GridFunction::from_fn(Arc::clone(&g), |t| (freq * (t - start)).sin()).unwrap();
        let w = FracOrder::new(w).unwrap();
        for i in 1..g.len() {
            prop_assert_eq!(caputo_via_rl(&f, w, 0, i).unwrap(), rl_nabla(&f, w, 0, i).unwrap());
        }
    }

    #[test]
    fn caputo_equals_rl_on_integers_when_start_value_vanishes(
        values in prop::collection::vec(-5.0f64..5.0, 8),
        w in 0.05f64..0.95,
    ) {
        let g = Arc::new(Grid::build(&TimeScale::integers(0, 8).unwrap(), 1.0, &[]).unwrap());
        let mut v = vec![0.0];
        v.extend(values);
        let f = GridFunction::new(Arc::clone(&g), v).unwrap();
        let w = FracOrder::new(w).unwrap();
        for i in 1..9 {
            let c = caputo_nabla(&f, w, 0, i).unwrap();
            let r = rl_nabla(&f, w, 0, i).unwrap();
            prop_assert!((c - r).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn jumps_reevaluate_bitwise(
        a in -1.0f64..1.0,
        k in -0.5f64..0.5,
        l in -0.5f64..0.5,
        m0 in -1.0f64..1.0,
        at in 0.1f64..0.9,
    ) {
        let problem = ImpulsiveProblem::new(
            TimeScale::interval(0.0, 1.0).unwrap(),
            FracOrder::new(0.5).unwrap(),
            Expr::parse(&format!("{a} + {k}*p"), Role::Rhs).unwrap(),
            vec![Impulse { at, map: Expr::parse(&format!("{l}*p + {m0}"), Role::Impulse).unwrap() }],
            Expr::parse("0.5", Role::Phi).unwrap(),
            None,
        ).unwrap();
        let sol = solve(&problem, &SolverConfig { mesh: 1.0 / 64.0, ..Default::default() }).unwrap();
        let j = sol.jumps()[0];
        prop_assert_eq!(j.p_plus.to_bits(), apply_impulse(&problem, 0, j.p_minus).unwrap().to_bits());
        let segs = sol.segments();
        prop_assert_eq!(segs[0].p[segs[0].p.len() - 1], j.p_minus);
        prop_assert_eq!(segs[1].p[0], j.p_plus);
    }

    #[test]
    fn outer_ratios_respect_contraction_constant(
        k in 0.0f64..0.4,
        g in 0.0f64..0.4,
        hphi in 0.1f64..0.6,
        l in 0.0f64..0.3,
        w in 0.3f64..0.9,
    ) {
        let w_order = FracOrder::new(w).unwrap();
        let c = HypothesisConstants {
            lipschitz_p: k,
            lipschitz_h: g,
            growth_offset: 1.0,
            growth_p: k,
            growth_h: g,
            impulse_bound: vec![1.0],
            impulse_lipschitz: vec![l],
            phi_growth: hphi,
            phi_lipschitz: hphi,
        };
        let report = contraction_constant(&c, w_order, 1.0, 1);
        prop_assume!(report.satisfied);
        let problem = ImpulsiveProblem::new(
            TimeScale::interval(0.0, 1.0).unwrap(),
            w_order,
            Expr::parse(&format!("1 + {k}*p + {g}*h"), Role::Rhs).unwrap(),
            vec![Impulse { at: 0.5, map: Expr::parse(&format!("{l}*p + 0.1"), Role::Impulse).unwrap() }],
            Expr::parse(&format!("{hphi}*pa + 0.2"), Role::Phi).unwrap(),
            None,
        ).unwrap();
        let cfg = SolverConfig { mesh: 1.0 / 64.0, max_outer: 1000, ..Default::default() };
        let sol = solve(&problem, &cfg).unwrap();
        for r in sol.outer_ratios().iter().skip(2) {
            if sol.outer_deltas().iter().any(|d| *d < 1e-13) {
                break;
            }
            prop_assert!(*r <= report.u + 0.1, "ratio {} vs U {}", r, report.u);
        }
    }

    #[test]
    fn expression_eval_is_deterministic(tokens in common::flat(3), b in common::bindings()) {
        let text = common::render(&tokens);
        let e = Expr::parse(&text, Role::Rhs).unwrap();
        let first = e.eval(&b).map(f64::to_bits);
        prop_assert_eq!(first, e.eval(&b).map(f64::to_bits));
    }
}
