//! Independent oracles and property bodies shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use statrs::function::gamma::gamma as statrs_gamma;
use tsfrac::expr::{Bindings, Expr, Role};
use tsfrac::solver::{solve, ImpulsiveProblem, SolverConfig};
use tsfrac::timescale::{Component, Grid, PointKind, TimeScale};
use tsfrac::FracOrder;

// ---------------------------------------------------------------------------
// Exact sums on ℤ: α(ζ) = ζ − 1 and ∫_a^θ g ∇ζ = Σ_{ζ=a+1}^{θ} g(ζ).

fn z_kernel(theta: usize, zeta: usize, w: f64) -> f64 {
    ((theta + 1 - zeta) as f64).powf(w - 1.0) / statrs_gamma(w)
}

/// `𝒥ʷ_a f(θ)` on the integers.
pub fn z_integral(f: &[f64], w: f64, a: usize, theta: usize) -> f64 {
    (a + 1..=theta).map(|z| z_kernel(theta, z, w) * f[z]).sum()
}

pub fn z_caputo(f: &[f64], w: f64, a: usize, theta: usize) -> f64 {
    (a + 1..=theta)
        .map(|z| z_kernel(theta, z, 1.0 - w) * (f[z] - f[z - 1]))
        .sum()
}

pub fn z_rl(f: &[f64], w: f64, a: usize, theta: usize) -> f64 {
    let g = |t: usize| {
        if t <= a {
            0.0
        } else {
            z_integral(f, 1.0 - w, a, t)
        }
    };
    g(theta) - g(theta - 1)
}

/// Double sum for `𝒥ʷ 𝒥ᵘ f(θ)` on the integers.
pub fn z_iterated_integral(f: &[f64], w: f64, u: f64, a: usize, theta: usize) -> f64 {
    (a + 1..=theta)
        .map(|z| z_kernel(theta, z, w) * z_integral(f, u, a, z))
        .sum()
}

// ---------------------------------------------------------------------------
// Series and gamma oracles.

/// `Σ_{k<terms} θ^{kw} / Γ(kw + 1)`.
pub fn mittag_leffler_series(theta: f64, w: f64, terms: usize) -> f64 {
    (0..terms)
        .map(|k| {
            let kw = k as f64 * w;
            theta.powf(kw) / statrs_gamma(kw + 1.0)
        })
        .sum()
}

pub fn gamma_oracle(x: f64) -> f64 {
    statrs_gamma(x)
}

// ---------------------------------------------------------------------------
// Expression precedence oracle: shunting-yard evaluation of a token list with
// `^` (right-assoc) > unary minus > `* /` > `+ -`.

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Ident(&'static str),
    Op(char),
    Open,
    Close,
}

pub fn render(tokens: &[Tok]) -> String {
    tokens
        .iter()
        .map(|t| match t {
            Tok::Num(x) => format!("{x}"),
            Tok::Ident(s) => s.to_string(),
            Tok::Op(c) => c.to_string(),
            Tok::Open => "(".into(),
            Tok::Close => ")".into(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

const FUNCS: [&str; 6] = ["exp", "abs", "sqrt", "sin", "cos", "ln"];
const VARS: [&str; 3] = ["theta", "p", "h"];

fn apply_func(name: &str, x: f64) -> f64 {
    match name {
        "exp" => x.exp(),
        "abs" => x.abs(),
        "sqrt" => x.sqrt(),
        "sin" => x.sin(),
        "cos" => x.cos(),
        "ln" if x > 0.0 => x.ln(),
        "ln" => f64::NAN,
        other => panic!("unknown function {other}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StackOp {
    Binary(char),
    Neg,
    Open,
    Func(&'static str),
}

fn prec(op: StackOp) -> u8 {
    match op {
        StackOp::Binary('+' | '-') => 1,
        StackOp::Binary('*' | '/') => 2,
        StackOp::Neg => 3,
        StackOp::Binary('^') => 4,
        _ => 0,
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn reduce(values: &mut Vec<f64>, op: StackOp) -> Option<()> {
    let r = match op {
        StackOp::Neg => -values.pop()?,
        StackOp::Func(name) => apply_func(name, values.pop()?),
        StackOp::Binary(c) => {
            let b = values.pop()?;
            let a = values.pop()?;
            match c {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                '^' => a.powf(b),
                _ => unreachable!(),
            }
        }
        StackOp::Open => return None,
    };
    values.push(finite(r)?);
    Some(())
}

/// Value of the token list, or `None` when any intermediate is non-finite.
pub fn shunting_yard(tokens: &[Tok], b: &Bindings) -> Option<f64> {
    let mut values: Vec<f64> = Vec::new();
    let mut ops: Vec<StackOp> = Vec::new();
    let mut expect_operand = true;
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i] {
            Tok::Num(x) => {
                values.push(*x);
                expect_operand = false;
            }
            Tok::Ident(name) if FUNCS.contains(name) => {
                ops.push(StackOp::Func(name));
                ops.push(StackOp::Open);
                i += 1; // the following Open token
            }
            Tok::Ident(name) => {
                values.push(match *name {
                    "theta" => b.theta,
                    "p" => b.p,
                    "h" => b.h,
                    "pi" => std::f64::consts::PI,
                    "e" => std::f64::consts::E,
                    other => panic!("unknown identifier {other}"),
                });
                expect_operand = false;
            }
            Tok::Op('-') if expect_operand => ops.push(StackOp::Neg),
            Tok::Op(c) => {
                let incoming = StackOp::Binary(*c);
                let right_assoc = *c == '^';
                while let Some(&top) = ops.last() {
                    let pops =
                        prec(top) > prec(incoming) || (prec(top) == prec(incoming) && !right_assoc);
                    if top == StackOp::Open || !pops {
                        break;
                    }
                    ops.pop();
                    reduce(&mut values, top)?;
                }
                ops.push(incoming);
                expect_operand = true;
            }
            Tok::Open => {
                ops.push(StackOp::Open);
                expect_operand = true;
            }
            Tok::Close => {
                loop {
                    let top = ops.pop()?;
                    if top == StackOp::Open {
                        break;
                    }
                    reduce(&mut values, top)?;
                }
                if let Some(&StackOp::Func(_)) = ops.last() {
                    let f = ops.pop()?;
                    reduce(&mut values, f)?;
                }
                expect_operand = false;
            }
        }
        i += 1;
    }
    while let Some(top) = ops.pop() {
        reduce(&mut values, top)?;
    }
    (values.len() == 1).then(|| values[0])
}

fn operand(depth: u32) -> BoxedStrategy<Vec<Tok>> {
    let number = prop_oneof![
        (0u32..10).prop_map(|n| n as f64),
        (1u32..100).prop_map(|n| n as f64 / 8.0),
    ]
    .prop_map(|x| vec![Tok::Num(x)]);
    let ident =
        prop::sample::select(vec!["theta", "p", "h", "pi", "e"]).prop_map(|s| vec![Tok::Ident(s)]);
    let leaf = prop_oneof![number, ident];
    let atom = if depth == 0 {
        leaf.boxed()
    } else {
        let inner = flat(depth - 1);
        prop_oneof![
            3 => leaf,
            1 => inner.clone().prop_map(|mut t| {
                t.insert(0, Tok::Open);
                t.push(Tok::Close);
                t
            }),
            1 => (prop::sample::select(FUNCS.to_vec()), inner).prop_map(|(f, mut t)| {
                t.insert(0, Tok::Open);
                t.insert(0, Tok::Ident(f));
                t.push(Tok::Close);
                t
            }),
        ]
        .boxed()
    };
    (0usize..3, atom)
        .prop_map(|(negs, mut t)| {
            for _ in 0..negs {
                t.insert(0, Tok::Op('-'));
            }
            t
        })
        .boxed()
}

/// A flat chain `operand (op operand)*`; parentheses and calls nest up to
/// `depth` levels.
pub fn flat(depth: u32) -> BoxedStrategy<Vec<Tok>> {
    let ops = prop::sample::select(vec!['+', '-', '*', '/', '^']);
    (
        operand(depth),
        prop::collection::vec((ops, operand(depth)), 0..4),
    )
        .prop_map(|(first, rest)| {
            let mut t = first;
            for (op, o) in rest {
                t.push(Tok::Op(op));
                t.extend(o);
            }
            t
        })
        .boxed()
}

pub fn bindings() -> impl Strategy<Value = Bindings> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(theta, p, h)| Bindings {
        theta,
        p,
        h,
        pa: 0.0,
    })
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

type PropResult = Result<(), String>;

fn outcome<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> PropResult {
    r.map_err(|e| e.to_string())
}

/// Parser and evaluator against the shunting-yard oracle, plus print/parse
/// round-trip stability.
pub fn prop_parser_precedence(cases: u32) -> PropResult {
    outcome(runner(cases).run(&(flat(6), bindings()), |(tokens, b)| {
        let text = render(&tokens);
        let parsed = Expr::parse(&text, Role::Rhs)
            .map_err(|e| TestCaseError::fail(format!("`{text}` failed to parse: {e}")))?;
        let ours = parsed.eval(&b).ok();
        let oracle = shunting_yard(&tokens, &b);
        prop_assert_eq!(
            ours.map(f64::to_bits),
            oracle.map(f64::to_bits),
            "`{}`",
            text
        );

        let printed = parsed.to_string();
        let again = Expr::parse(&printed, Role::Rhs)
            .map_err(|e| TestCaseError::fail(format!("`{printed}` failed to re-parse: {e}")))?;
        prop_assert_eq!(&again, &parsed, "`{}` printed as `{}`", text, printed);
        Ok(())
    }))
}

/// Random time scales: increasing points and intervals separated by gaps.
pub fn time_scale() -> impl Strategy<Value = TimeScale> {
    prop::collection::vec((0.05f64..1.0, prop::option::of(0.05f64..1.5)), 1..6).prop_map(|parts| {
        let mut at = 0.0;
        let mut comps = Vec::new();
        for (gap, len) in parts {
            at += gap;
            match len {
                Some(len) => {
                    comps.push(Component::Interval {
                        lo: at,
                        hi: at + len,
                    });
                    at += len;
                }
                None => comps.push(Component::Point(at)),
            }
        }
        TimeScale::new(comps).expect("disjoint components")
    })
}

/// `classify` is `LeftDense` exactly where the graininess vanishes, at every
/// grid node above the minimum.
pub fn prop_classification(cases: u32) -> PropResult {
    outcome(
        runner(cases).run(&(time_scale(), 0.01f64..0.5), |(ts, mesh)| {
            let grid = Grid::build(&ts, mesh, &[]).unwrap();
            for &theta in &grid.nodes()[1..] {
                let dense = ts.classify(theta).unwrap() == PointKind::LeftDense;
                let zero = ts.graininess(theta).unwrap() == 0.0;
                prop_assert_eq!(dense, zero, "theta = {}", theta);
            }
            Ok(())
        }),
    )
}

/// Halving the mesh keeps every node, bit for bit.
pub fn prop_grid_monotone(cases: u32) -> PropResult {
    outcome(
        runner(cases).run(&(time_scale(), 0.01f64..0.5), |(ts, mesh)| {
            let coarse = Grid::build(&ts, mesh, &[]).unwrap();
            let fine = Grid::build(&ts, mesh / 2.0, &[]).unwrap();
            for &x in coarse.nodes() {
                prop_assert!(
                    fine.nodes().iter().any(|&y| y.to_bits() == x.to_bits()),
                    "node {} lost after refinement",
                    x
                );
            }
            prop_assert!(fine.len() >= coarse.len());
            Ok(())
        }),
    )
}

/// Solving the same problem twice writes byte-identical CSV.
pub fn prop_csv_deterministic(cases: u32) -> PropResult {
    let strategy = (
        -1.0f64..1.0,
        -0.5f64..0.5,
        -0.4f64..0.4,
        0.1f64..0.9,
        0.0f64..1.0,
    );
    outcome(runner(cases).run(&strategy, |(a, b, g, w, c)| {
        let rhs = Expr::parse(&format!("{a} + {b}*p + {g}*h + sin(theta)"), Role::Rhs).unwrap();
        let phi = Expr::parse(&format!("{c}"), Role::Phi).unwrap();
        let problem = ImpulsiveProblem::new(
            TimeScale::interval(0.0, 1.0).unwrap(),
            FracOrder::new(w).unwrap(),
            rhs,
            vec![],
            phi,
            None,
        )
        .unwrap();
        let cfg = SolverConfig {
            mesh: 1.0 / 32.0,
            ..Default::default()
        };
        let render = || {
            let sol = solve(&problem, &cfg).unwrap();
            let mut buf = Vec::new();
            sol.write_csv(&mut buf).unwrap();
            buf
        };
        prop_assert_eq!(render(), render());
        Ok(())
    }))
}

/// Shared grid helper.
pub fn grid(ts: &TimeScale, mesh: f64) -> Arc<Grid> {
    Arc::new(Grid::build(ts, mesh, &[]).unwrap())
}
