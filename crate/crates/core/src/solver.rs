//! Numerical solution of impulsive fractional dynamic equations
//!
//! ```text
//! ᶜ𝒟ʷ p(θ) = L(θ, p(θ), ᶜ𝒟ʷ p(θ)),   θ ≠ θ_k
//! p(θ_k⁺) − p(θ_k⁻) = I_k(θ_k, p(θ_k⁻))
//! p(t₀) = φ(p)
//! ```
//!
//! through the piecewise integral representation
//!
//! ```text
//! p(θ) = φ(p) + Σ_{i≤k} [ 𝒥ʷ_{θ_{i−1}} h (θ_i) + I_i ] + 𝒥ʷ_{θ_k} h (θ),   θ ∈ [θ_k, θ_{k+1}]
//! ```
//!
//! with `h = ᶜ𝒟ʷ p` solving `h = L(θ, p, h)` pointwise. Three nested loops do
//! the work: a scalar fixed point for `h` at every node, a Picard sweep per
//! segment between impulses, and an outer fixed point on the initial value
//! `c = φ(p(anchor))`.
//!
//! [`HistoryVariant::Memory`] replaces the per-segment history terms by the
//! single integral `𝒥ʷ_{t₀} h (θ)` over all earlier segments, the usual
//! memory-carrying formulation, for side-by-side comparison.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{Bindings, Expr, ExprError, Var};
use crate::frac::{average_step_values, FracOrder, KernelTable};
use crate::output::format_float;
use crate::timescale::{Grid, TimeScale, TimeScaleError};

/// Iterates larger than this in magnitude count as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("time scale is a single point")]
    DegenerateTimeScale,
    #[error("impulse {index} at {at} is not in the time scale")]
    ImpulseNotInTimeScale { index: usize, at: f64 },
    #[error("impulse {index} at {at} is not strictly inside ({start}, {end})")]
    ImpulseOutsideHorizon {
        index: usize,
        at: f64,
        start: f64,
        end: f64,
    },
    #[error("impulse {index} at {at} does not come after the previous impulse")]
    ImpulseOutOfOrder { index: usize, at: f64 },
    #[error("anchor point {0} is not in the time scale")]
    AnchorNotInTimeScale(f64),
    #[error("{0} expression uses a variable outside its role")]
    ExpressionRole(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(
        "inner loop h = L(theta, p, h) diverged at theta = {theta}, p = {p} \
         after {iterations} iterations (last iterate {last})"
    )]
    InnerDiverged {
        theta: f64,
        p: f64,
        iterations: usize,
        last: f64,
    },
    #[error(
        "Picard loop diverged on segment {segment} after {iterations} sweeps \
         (last change {last_change}, empirical ratio {ratio})"
    )]
    PicardDiverged {
        segment: usize,
        iterations: usize,
        last_change: f64,
        ratio: f64,
        last_iterate: Vec<f64>,
    },
    #[error(
        "outer loop p(t0) = phi(p) diverged after {iterations} iterations (last value {last})"
    )]
    OuterDiverged { iterations: usize, last: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] TimeScaleError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

impl SolveError {
    /// True for the three loop-divergence errors.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            SolveError::InnerDiverged { .. }
                | SolveError::PicardDiverged { .. }
                | SolveError::OuterDiverged { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Impulse {
    pub at: f64,
    pub map: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveProblem {
    ts: TimeScale,
    order: FracOrder,
    rhs: Expr,
    impulses: Vec<Impulse>,
    phi: Expr,
    anchor: f64,
}

impl ImpulsiveProblem {
    /// `anchor` is where φ reads the solution; it defaults to the horizon.
    pub fn new(
        ts: TimeScale,
        order: FracOrder,
        rhs: Expr,
        impulses: Vec<Impulse>,
        phi: Expr,
        anchor: Option<f64>,
    ) -> Result<Self, ProblemError> {
        if ts.is_degenerate() {
            return Err(ProblemError::DegenerateTimeScale);
        }
        if rhs.uses(Var::Pa) {
            return Err(ProblemError::ExpressionRole("rhs"));
        }
        if phi.uses(Var::Theta) || phi.uses(Var::P) || phi.uses(Var::H) {
            return Err(ProblemError::ExpressionRole("phi"));
        }
        let (start, end) = (ts.min(), ts.max());
        let mut impulses = impulses;
        let mut last = start;
        for (index, imp) in impulses.iter_mut().enumerate() {
            if imp.map.uses(Var::H) || imp.map.uses(Var::Pa) {
                return Err(ProblemError::ExpressionRole("impulse"));
            }
            let at = ts
                .snap(imp.at)
                .map_err(|_| ProblemError::ImpulseNotInTimeScale { index, at: imp.at })?;
            if at <= start || at >= end {
                return Err(ProblemError::ImpulseOutsideHorizon {
                    index,
                    at,
                    start,
                    end,
                });
            }
            if index > 0 && at <= last {
                return Err(ProblemError::ImpulseOutOfOrder { index, at });
            }
            imp.at = at;
            last = at;
        }
        let anchor = anchor.unwrap_or(end);
        let anchor = ts
            .snap(anchor)
            .map_err(|_| ProblemError::AnchorNotInTimeScale(anchor))?;
        Ok(ImpulsiveProblem {
            ts,
            order,
            rhs,
            impulses,
            phi,
            anchor,
        })
    }

    pub fn time_scale(&self) -> &TimeScale {
        &self.ts
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn rhs(&self) -> &Expr {
        &self.rhs
    }

    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }

    pub fn phi(&self) -> &Expr {
        &self.phi
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn start(&self) -> f64 {
        self.ts.min()
    }

    pub fn horizon(&self) -> f64 {
        self.ts.max()
    }

    fn phi_at(&self, pa: f64) -> Result<f64, ExprError> {
        self.phi.eval(&Bindings {
            pa,
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryVariant {
    /// History terms frozen at segment ends, `(θ_i − α(ζ))^(w−1)`.
    #[default]
    Frozen,
    /// Single kernel `(θ − α(ζ))^(w−1)` over the whole past.
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mesh: f64,
    pub tol_h: f64,
    pub tol_picard: f64,
    pub tol_outer: f64,
    pub max_inner: usize,
    pub max_picard: usize,
    pub max_outer: usize,
    pub history: HistoryVariant,
    /// Starting initial value for the outer loop; `φ(0)` when absent.
    pub outer_seed: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mesh: 1e-3,
            tol_h: 1e-12,
            tol_picard: 1e-10,
            tol_outer: 1e-10,
            max_inner: 100,
            max_picard: 200,
            max_outer: 100,
            history: HistoryVariant::Frozen,
            outer_seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = [
            ("mesh", self.mesh),
            ("tol_h", self.tol_h),
            ("tol_picard", self.tol_picard),
            ("tol_outer", self.tol_outer),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolveError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let counts = [
            ("max_inner", self.max_inner),
            ("max_picard", self.max_picard),
            ("max_outer", self.max_outer),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(SolveError::InvalidConfig(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        if let Some(seed) = self.outer_seed {
            if !seed.is_finite() {
                return Err(SolveError::InvalidConfig(
                    "outer_seed must be finite".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolution {
    pub h: f64,
    pub iterations: usize,
}

/// Solves `h = rhs(θ, p, h)` by fixed-point iteration from `h = 0`.
pub fn solve_inner_h(
    theta: f64,
    p: f64,
    rhs: &Expr,
    cfg: &SolverConfig,
) -> Result<InnerSolution, SolveError> {
    let mut b = Bindings {
        theta,
        p,
        h: 0.0,
        pa: 0.0,
    };
    if !rhs.uses(Var::H) {
        return Ok(InnerSolution {
            h: rhs.eval(&b)?,
            iterations: 1,
        });
    }
    for iterations in 1..=cfg.max_inner {
        let next = rhs.eval(&b)?;
        if next.abs() > DIVERGENCE_BOUND {
            return Err(SolveError::InnerDiverged {
                theta,
                p,
                iterations,
                last: next,
            });
        }
        if (next - b.h).abs() <= cfg.tol_h {
            return Ok(InnerSolution {
                h: next,
                iterations,
            });
        }
        b.h = next;
    }
    Err(SolveError::InnerDiverged {
        theta,
        p,
        iterations: cfg.max_inner,
        last: b.h,
    })
}

/// `p(θ_k⁺) = p(θ_k⁻) + I_k(θ_k, p(θ_k⁻))`; `k` is zero-based.
pub fn apply_impulse(
    problem: &ImpulsiveProblem,
    k: usize,
    p_minus: f64,
) -> Result<f64, SolveError> {
    let imp = &problem.impulses[k];
    let jump = imp.map.eval(&Bindings {
        theta: imp.at,
        p: p_minus,
        ..Default::default()
    })?;
    Ok(p_minus + jump)
}

/// One segment `[θ_k, θ_{k+1}]` of the grid, by node index.
#[derive(Debug, Clone, Copy)]
pub struct SegmentSpec<'a> {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// `p(θ_k⁺)`, or the initial value on the first segment.
    pub p_start: f64,
    /// Extra history term per segment node; zero at the first node.
    pub history: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSolution {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub sweeps: usize,
    pub max_inner_iterations: usize,
}

fn solve_h_on_nodes(
    nodes: &[f64],
    p: &[f64],
    rhs: &Expr,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, usize), SolveError> {
    let inner: Vec<InnerSolution> = nodes
        .par_iter()
        .zip(p.par_iter())
        .map(|(&theta, &p)| solve_inner_h(theta, p, rhs, cfg))
        .collect::<Result<_, _>>()?;
    let max_it = inner.iter().map(|s| s.iterations).max().unwrap_or(0);
    Ok((inner.into_iter().map(|s| s.h).collect(), max_it))
}

/// Picard iteration on one segment:
/// `p⁽ʲ⁺¹⁾(θ) = p_start + history(θ) + 𝒥ʷ_{θ_k} h⁽ʲ⁾(θ)` with `h⁽ʲ⁾` solving
/// `h = L(θ, p⁽ʲ⁾, h)` at each node, starting from the constant `p_start`.
pub fn picard_segment(
    problem: &ImpulsiveProblem,
    kernel: &KernelTable,
    seg: &SegmentSpec<'_>,
    cfg: &SolverConfig,
) -> Result<SegmentSolution, SolveError> {
    let grid = kernel.grid();
    let nodes = &grid.nodes()[seg.start..=seg.end];
    let n = nodes.len();
    debug_assert_eq!(seg.history.len(), n);

    let mut p = vec![seg.p_start; n];
    let mut step_values = vec![0.0; seg.end + 1];
    let mut prev_change = f64::NAN;
    let mut max_inner = 0;

    for sweep in 1..=cfg.max_picard {
        let (h, inner_its) = solve_h_on_nodes(nodes, &p, &problem.rhs, cfg)?;
        max_inner = max_inner.max(inner_its);
        let local = average_step_values(grid, &padded(seg.start, &h));
        step_values[seg.start + 1..].copy_from_slice(&local[seg.start + 1..]);

        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                seg.p_start + seg.history[k] + kernel.apply(seg.start + k, seg.start, &step_values)
            })
            .collect();
        let change = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ratio = change / prev_change;
        if !change.is_finite() || next.iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
            return Err(SolveError::PicardDiverged {
                segment: seg.index,
                iterations: sweep,
                last_change: change,
                ratio,
                last_iterate: next,
            });
        }
        p = next;
        if change <= cfg.tol_picard {
            let (h, inner_its) = solve_h_on_nodes(nodes, &p, &problem.rhs, cfg)?;
            return Ok(SegmentSolution {
                index: seg.index,
                start: seg.start,
                end: seg.end,
                p,
                h,
                sweeps: sweep,
                max_inner_iterations: max_inner.max(inner_its),
            });
        }
        prev_change = change;
        if sweep == cfg.max_picard {
            return Err(SolveError::PicardDiverged {
                segment: seg.index,
                iterations: sweep,
                last_change: change,
                ratio,
                last_iterate: p,
            });
        }
    }
    unreachable!("max_picard is at least 1")
}

/// Places segment-local values at their global node indices.
fn padded(start: usize, local: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; start + local.len()];
    out[start..].copy_from_slice(local);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub theta: f64,
    pub p_minus: f64,
    pub p_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationStats {
    pub outer: usize,
    /// Picard sweeps summed over segments and outer iterations.
    pub picard_sweeps: usize,
    pub max_inner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub theta: f64,
    pub segment: usize,
    pub p: f64,
    pub h: f64,
    pub impulse_left: bool,
    pub impulse_right: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    grid: Arc<Grid>,
    segments: Vec<SegmentSolution>,
    jumps: Vec<Jump>,
    initial_value: f64,
    anchor_value: f64,
    outer_deltas: Vec<f64>,
    iterations: IterationStats,
    residual: f64,
    history: HistoryVariant,
}

impl Solution {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn segments(&self) -> &[SegmentSolution] {
        &self.segments
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// `p(t₀)`, the converged initial value.
    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// `p(anchor)` as read by φ.
    pub fn anchor_value(&self) -> f64 {
        self.anchor_value
    }

    pub fn iterations(&self) -> IterationStats {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn history(&self) -> HistoryVariant {
        self.history
    }

    /// `|c_{j+1} − c_j|` for every outer iteration.
    pub fn outer_deltas(&self) -> &[f64] {
        &self.outer_deltas
    }

    /// Successive outer contraction ratios `δ_j / δ_{j−1}`.
    pub fn outer_ratios(&self) -> Vec<f64> {
        self.outer_deltas.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// `p` at the final node.
    pub fn final_value(&self) -> f64 {
        *self
            .segments
            .last()
            .and_then(|s| s.p.last())
            .expect("non-empty")
    }

    /// `p` at grid node `i`; at an impulse time this is the left limit.
    pub fn p_at_node(&self, i: usize) -> Option<f64> {
        if i == 0 {
            return self.segments.first().map(|s| s.p[0]);
        }
        self.segments
            .iter()
            .find(|s| s.start < i && i <= s.end)
            .map(|s| s.p[i - s.start])
    }

    pub fn p_at(&self, theta: f64) -> Option<f64> {
        self.grid.index_of(theta).and_then(|i| self.p_at_node(i))
    }

    /// One row per segment node; impulse times appear twice, as the left
    /// limit closing one segment and the right limit opening the next.
    pub fn rows(&self) -> Vec<SolutionRow> {
        let last = self.segments.len() - 1;
        let mut rows = Vec::new();
        for seg in &self.segments {
            let n = seg.p.len();
            for k in 0..n {
                rows.push(SolutionRow {
                    theta: self.grid.node(seg.start + k),
                    segment: seg.index,
                    p: seg.p[k],
                    h: seg.h[k],
                    impulse_left: k == n - 1 && seg.index < last,
                    impulse_right: k == 0 && seg.index > 0,
                });
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "theta",
            "segment_index",
            "p",
            "h",
            "is_impulse_left",
            "is_impulse_right",
        ])?;
        for r in self.rows() {
            w.write_record([
                format_float(r.theta),
                r.segment.to_string(),
                format_float(r.p),
                format_float(r.h),
                u8::from(r.impulse_left).to_string(),
                u8::from(r.impulse_right).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Pass {
    segments: Vec<SegmentSolution>,
    jumps: Vec<Jump>,
    sweeps: usize,
    max_inner: usize,
}

struct Layout {
    bounds: Vec<(usize, usize)>,
    anchor: usize,
}

fn layout(problem: &ImpulsiveProblem, grid: &Grid) -> Layout {
    let mut cuts = vec![0];
    for imp in &problem.impulses {
        cuts.push(grid.index_of(imp.at).expect("impulse times are grid nodes"));
    }
    cuts.push(grid.len() - 1);
    Layout {
        bounds: cuts.windows(2).map(|w| (w[0], w[1])).collect(),
        anchor: grid
            .index_of(problem.anchor)
            .expect("anchor is a grid node"),
    }
}

fn run_pass(
    problem: &ImpulsiveProblem,
    kernel: &KernelTable,
    layout: &Layout,
    initial: f64,
    cfg: &SolverConfig,
) -> Result<Pass, SolveError> {
    let n_nodes = kernel.grid().len();
    let mut global_steps = vec![0.0; n_nodes];
    let mut segments = Vec::with_capacity(layout.bounds.len());
    let mut jumps = Vec::new();
    let mut p_start = initial;
    let mut sweeps = 0;
    let mut max_inner = 0;

    for (index, &(start, end)) in layout.bounds.iter().enumerate() {
        let history: Vec<f64> = match cfg.history {
            HistoryVariant::Frozen => vec![0.0; end - start + 1],
            HistoryVariant::Memory => {
                let base = kernel.apply(start, 0, &global_steps);
                (start..=end)
                    .into_par_iter()
                    .map(|i| kernel.apply(i, 0, &global_steps) - base)
                    .collect()
            }
        };
        let spec = SegmentSpec {
            index,
            start,
            end,
            p_start,
            history: &history,
        };
        let seg = picard_segment(problem, kernel, &spec, cfg)?;
        sweeps += seg.sweeps;
        max_inner = max_inner.max(seg.max_inner_iterations);

        if cfg.history == HistoryVariant::Memory {
            let steps = average_step_values(kernel.grid(), &padded(start, &seg.h));
            global_steps[start + 1..=end].copy_from_slice(&steps[start + 1..=end]);
        }
        if index < problem.impulses.len() {
            let p_minus = seg.p[seg.p.len() - 1];
            let p_plus = apply_impulse(problem, index, p_minus)?;
            jumps.push(Jump {
                theta: problem.impulses[index].at,
                p_minus,
                p_plus,
            });
            p_start = p_plus;
        }
        segments.push(seg);
    }
    Ok(Pass {
        segments,
        jumps,
        sweeps,
        max_inner,
    })
}

fn anchor_value(segments: &[SegmentSolution], anchor: usize) -> f64 {
    if anchor == 0 {
        return segments[0].p[0];
    }
    let seg = segments
        .iter()
        .find(|s| s.start < anchor && anchor <= s.end)
        .expect("anchor lies in a segment");
    seg.p[anchor - seg.start]
}

/// Solves the problem; see the module documentation for the scheme.
pub fn solve(problem: &ImpulsiveProblem, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    cfg.validate()?;
    let mut extra: Vec<f64> = problem.impulses.iter().map(|i| i.at).collect();
    extra.push(problem.anchor);
    let grid = Arc::new(Grid::build(&problem.ts, cfg.mesh, &extra)?);
    let kernel = KernelTable::new(Arc::clone(&grid), problem.order);
    let layout = layout(problem, &grid);

    let mut c = match cfg.outer_seed {
        Some(seed) => seed,
        None => problem.phi_at(0.0)?,
    };
    let mut deltas = Vec::new();
    let mut stats = IterationStats::default();

    for outer in 1..=cfg.max_outer {
        let pass = run_pass(problem, &kernel, &layout, c, cfg)?;
        stats.outer = outer;
        stats.picard_sweeps += pass.sweeps;
        stats.max_inner = stats.max_inner.max(pass.max_inner);

        let pa = anchor_value(&pass.segments, layout.anchor);
        let next = problem.phi_at(pa)?;
        if next.abs() > DIVERGENCE_BOUND {
            return Err(SolveError::OuterDiverged {
                iterations: outer,
                last: next,
            });
        }
        let delta = (next - c).abs();
        deltas.push(delta);
        if delta <= cfg.tol_outer {
            let mut sol = Solution {
                grid,
                segments: pass.segments,
                jumps: pass.jumps,
                initial_value: c,
                anchor_value: pa,
                outer_deltas: deltas,
                iterations: stats,
                residual: 0.0,
                history: cfg.history,
            };
            sol.residual = residual_with(&sol, problem, &kernel);
            return Ok(sol);
        }
        c = next;
    }
    Err(SolveError::OuterDiverged {
        iterations: cfg.max_outer,
        last: c,
    })
}

/// Largest defect over all segment nodes when the solution and its stored
/// `h` channel are substituted into the integral representation.
pub fn residual(sol: &Solution, problem: &ImpulsiveProblem) -> f64 {
    let kernel = KernelTable::new(Arc::clone(&sol.grid), problem.order);
    residual_with(sol, problem, &kernel)
}

fn residual_with(sol: &Solution, problem: &ImpulsiveProblem, kernel: &KernelTable) -> f64 {
    let Ok(phi) = problem.phi_at(sol.anchor_value) else {
        return f64::INFINITY;
    };
    let grid = &sol.grid;
    let mut steps = vec![0.0; grid.len()];
    for seg in &sol.segments {
        let local = average_step_values(grid, &padded(seg.start, &seg.h));
        steps[seg.start + 1..=seg.end].copy_from_slice(&local[seg.start + 1..=seg.end]);
    }

    let mut carry = phi;
    let mut worst: f64 = 0.0;
    for seg in &sol.segments {
        let from = match sol.history {
            HistoryVariant::Frozen => seg.start,
            HistoryVariant::Memory => 0,
        };
        for (k, p) in seg.p.iter().enumerate() {
            let rhs = carry + kernel.apply(seg.start + k, from, &steps);
            worst = worst.max((p - rhs).abs());
        }
        if seg.index < problem.impulses.len() {
            if sol.history == HistoryVariant::Frozen {
                carry += kernel.apply(seg.end, seg.start, &steps);
            }
            let p_minus = seg.p[seg.p.len() - 1];
            match apply_impulse(problem, seg.index, p_minus) {
                Ok(p_plus) => carry += p_plus - p_minus,
                Err(_) => return f64::INFINITY,
            }
        }
    }
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}
