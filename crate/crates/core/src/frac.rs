//! Fractional nabla operators on a grid.
//!
//! All operators share one product-integration rule for the weakly singular
//! kernel `(θ − α(ζ))^(ν−1) / Γ(ν)`:
//!
//! * a step into a left-scattered node `t` contributes
//!   `ν(t)·(θ − α(t))^(ν−1)/Γ(ν)` times the step value;
//! * a step `[t₀, t₁]` inside an interval integrates the kernel exactly,
//!   giving `((θ − t₀)^ν − (θ − t₁)^ν)/Γ(ν + 1)` times the step value.
//!
//! The step value is the segment average for the fractional integral and the
//! difference quotient for the Caputo derivative.

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;

use crate::nabla::{nabla_derivative, CalculusError, GridFunction};
use crate::special::gamma;
use crate::timescale::Grid;

/// Tables larger than this many weights are computed row by row on demand.
const MAX_CACHED_WEIGHTS: usize = 1 << 24;

/// A fractional order `w` with `0 < w < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(w: f64) -> Result<Self, CalculusError> {
        if w > 0.0 && w < 1.0 {
            Ok(FracOrder(w))
        } else {
            Err(CalculusError::InvalidOrder(w))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The order `1 − w`.
    pub fn complement(self) -> FracOrder {
        FracOrder(1.0 - self.0)
    }
}

struct KernelConsts {
    order: f64,
    gamma_order: f64,
    gamma_order_plus_one: f64,
}

impl KernelConsts {
    fn new(order: FracOrder) -> Self {
        let order = order.value();
        KernelConsts {
            order,
            gamma_order: gamma(order),
            gamma_order_plus_one: gamma(order + 1.0),
        }
    }

    /// Weight of step `j` (node `j-1` to node `j`) at node `i >= j`.
    fn weight(&self, grid: &Grid, i: usize, j: usize) -> f64 {
        let nodes = grid.nodes();
        let x = nodes[i] - nodes[j - 1];
        let width = nodes[j] - nodes[j - 1];
        if grid.is_left_scattered(j) {
            width * x.powf(self.order - 1.0) / self.gamma_order
        } else {
            // x^ν − (x − width)^ν without cancellation
            -x.powf(self.order) * (self.order * (-width / x).ln_1p()).exp_m1()
                / self.gamma_order_plus_one
        }
    }

    fn row(&self, grid: &Grid, i: usize) -> Vec<f64> {
        (1..=i).map(|j| self.weight(grid, i, j)).collect()
    }
}

/// Product-integration weights for one grid and one order, for every node.
///
/// Row `i` holds the weights of steps `1..=i` at node `i`; element `j - 1`
/// belongs to step `j`. Weights do not depend on where integration starts, so
/// one table serves every lower limit.
pub struct KernelTable {
    grid: Arc<Grid>,
    order: FracOrder,
    consts: KernelConsts,
    rows: Option<Vec<Vec<f64>>>,
}

impl KernelTable {
    pub fn new(grid: Arc<Grid>, order: FracOrder) -> Self {
        let consts = KernelConsts::new(order);
        let n = grid.len();
        let rows = (n * (n + 1) / 2 <= MAX_CACHED_WEIGHTS).then(|| {
            (0..n)
                .into_par_iter()
                .map(|i| consts.row(&grid, i))
                .collect()
        });
        KernelTable {
            grid,
            order,
            consts,
            rows,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match &self.rows {
            Some(rows) => Cow::Borrowed(&rows[i]),
            None => Cow::Owned(self.consts.row(&self.grid, i)),
        }
    }

    /// `Σ_{j=from+1}^{i} weight(i, j) · step_values[j]`.
    pub fn apply(&self, i: usize, from: usize, step_values: &[f64]) -> f64 {
        if i <= from {
            return 0.0;
        }
        let row = self.row(i);
        row[from..i]
            .iter()
            .zip(&step_values[from + 1..=i])
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Step values for integrating node values: the node value at scattered steps,
/// the segment mean on interval steps. Index 0 is unused.
pub fn average_step_values(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for j in 1..values.len() {
        out[j] = if grid.is_left_scattered(j) {
            values[j]
        } else {
            0.5 * (values[j - 1] + values[j])
        };
    }
    out
}

/// Difference quotient of each step. Index 0 is unused.
pub fn slope_step_values(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut out = vec![0.0; values.len()];
    for j in 1..values.len() {
        out[j] = (values[j] - values[j - 1]) / (nodes[j] - nodes[j - 1]);
    }
    out
}

fn weighted_sum(grid: &Grid, order: FracOrder, a: usize, theta: usize, step_values: &[f64]) -> f64 {
    let consts = KernelConsts::new(order);
    (a + 1..=theta)
        .map(|j| consts.weight(grid, theta, j) * step_values[j])
        .sum()
}

/// Nabla fractional integral `𝒥ʷ_a f(θ)` for nodes `a <= θ`.
pub fn frac_integral(
    f: &GridFunction,
    w: FracOrder,
    a: usize,
    theta: usize,
) -> Result<f64, CalculusError> {
    f.check_range(a, theta)?;
    let grid = f.grid();
    let steps = average_step_values(grid, f.values());
    Ok(weighted_sum(grid, w, a, theta, &steps))
}

/// `𝒥ʷ_a f` on every node; zero at and before `a`.
pub fn frac_integral_function(
    f: &GridFunction,
    w: FracOrder,
    a: usize,
) -> Result<GridFunction, CalculusError> {
    f.check_range(a, a)?;
    let table = KernelTable::new(Arc::clone(f.grid()), w);
    let steps = average_step_values(f.grid(), f.values());
    let values = (0..f.grid().len())
        .map(|i| table.apply(i, a, &steps))
        .collect();
    GridFunction::new(Arc::clone(f.grid()), values)
}

/// Caputo nabla derivative `ᶜ𝒟ʷ_a f(θ)`: the order-(1−w) integral of the
/// nabla derivative, for nodes `a < θ`.
pub fn caputo_nabla(
    f: &GridFunction,
    w: FracOrder,
    a: usize,
    theta: usize,
) -> Result<f64, CalculusError> {
    f.check_range(a, theta)?;
    if a == theta {
        return Err(CalculusError::NodesOutOfOrder { a, b: theta });
    }
    let grid = f.grid();
    let slopes = slope_step_values(grid, f.values());
    Ok(weighted_sum(grid, w.complement(), a, theta, &slopes))
}

/// Riemann–Liouville nabla derivative `𝒟ʷ_a f(θ)`: the nabla derivative of
/// `g = 𝒥^(1−w)_a f` at θ, for nodes `a < θ`.
pub fn rl_nabla(
    f: &GridFunction,
    w: FracOrder,
    a: usize,
    theta: usize,
) -> Result<f64, CalculusError> {
    f.check_range(a, theta)?;
    if a == theta {
        return Err(CalculusError::NodesOutOfOrder { a, b: theta });
    }
    let order = w.complement();
    let at_theta = frac_integral(f, order, a, theta)?;
    let prev = theta - 1;
    let at_prev = if prev == a {
        0.0
    } else {
        frac_integral(f, order, a, prev)?
    };
    let mut g = vec![0.0; f.grid().len()];
    g[prev] = at_prev;
    g[theta] = at_theta;
    let g = GridFunction::new(Arc::clone(f.grid()), g)?;
    nabla_derivative(&g, theta)
}

/// Caputo derivative through the RL derivative of the shifted function
/// `f − f(ρ)`, valid for `0 < w < 1`.
pub fn caputo_via_rl(
    f: &GridFunction,
    w: FracOrder,
    rho: usize,
    theta: usize,
) -> Result<f64, CalculusError> {
    f.check_node(rho)?;
    let shifted = f.shifted(f.value(rho));
    rl_nabla(&shifted, w, rho, theta)
}

/// The three derivatives at one node, as produced by [`derivative_profiles`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeRow {
    pub node: usize,
    pub caputo: f64,
    pub rl: f64,
    pub caputo_via_rl: f64,
}

/// Caputo, Riemann–Liouville and shifted-RL derivatives from `ρ` at every
/// node after it, sharing one weight table. Matches the per-node functions.
pub fn derivative_profiles(
    f: &GridFunction,
    w: FracOrder,
    rho: usize,
) -> Result<Vec<DerivativeRow>, CalculusError> {
    f.check_range(rho, rho)?;
    let grid = f.grid();
    let table = KernelTable::new(Arc::clone(grid), w.complement());
    let slopes = slope_step_values(grid, f.values());
    let averages = average_step_values(grid, f.values());
    let shifted = average_step_values(grid, f.shifted(f.value(rho)).values());
    let nodes = grid.nodes();
    let rows = (rho + 1..grid.len())
        .into_par_iter()
        .map(|i| {
            let width = nodes[i] - nodes[i - 1];
            let diff = |steps: &[f64]| {
                (table.apply(i, rho, steps) - table.apply(i - 1, rho, steps)) / width
            };
            DerivativeRow {
                node: i,
                caputo: table.apply(i, rho, &slopes),
                rl: diff(&averages),
                caputo_via_rl: diff(&shifted),
            }
        })
        .collect();
    Ok(rows)
}
