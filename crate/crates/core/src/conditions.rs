//! Hypothesis constants, the uniqueness contraction constant, the existence
//! radius search, and numerical estimation of the constants.
//!
//! The constants bound the right-hand side `L`, the impulse maps `I_k` and
//! the non-local functional `φ`:
//!
//! ```text
//! |L(θ,p,h) − L(θ,p̄,h̄)| ≤ K|p − p̄| + G|h − h̄|        0 < G < 1
//! |L(θ,p,h)|            ≤ A + F|p| + E|h|            0 < E < 1
//! |I_k(θ,p)| ≤ M_k,   |I_k(θ,p) − I_k(θ,p̄)| ≤ L_k|p − p̄|
//! |φ(p)| ≤ μ|p|,      |φ(p) − φ(p̄)| ≤ H|p − p̄|
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{Bindings, Expr, ExprError};
use crate::frac::FracOrder;
use crate::solver::ImpulsiveProblem;
use crate::special::gamma;
use crate::timescale::{Grid, TimeScaleError};

/// Relative margin added to the smallest admissible existence radius.
pub const BETA_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionsError {
    #[error("constant {name} = {value} is out of range ({rule})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },
    #[error("{name} has {got} entries but the problem has {expected} impulses")]
    ImpulseCount {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid sampling: {0}")]
    Sampling(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] TimeScaleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisConstants {
    /// `K`: Lipschitz constant of `L` in `p`.
    pub lipschitz_p: f64,
    /// `G`: Lipschitz constant of `L` in `h`.
    pub lipschitz_h: f64,
    /// `A`: offset of the affine growth bound on `L`.
    pub growth_offset: f64,
    /// `F`: coefficient of `|p|` in the growth bound.
    pub growth_p: f64,
    /// `E`: coefficient of `|h|` in the growth bound.
    pub growth_h: f64,
    /// `M_k`: bounds on the impulse maps.
    pub impulse_bound: Vec<f64>,
    /// `L_k`: Lipschitz constants of the impulse maps.
    pub impulse_lipschitz: Vec<f64>,
    /// `μ`: linear growth coefficient of `φ`.
    pub phi_growth: f64,
    /// `H`: Lipschitz constant of `φ`.
    pub phi_lipschitz: f64,
}

impl HypothesisConstants {
    pub fn impulse_count(&self) -> usize {
        self.impulse_bound.len()
    }

    /// Checks ranges and that both impulse lists have `m` entries.
    pub fn validate(&self, m: usize) -> Result<(), ConditionsError> {
        let scalars = [
            ("K", self.lipschitz_p),
            ("A", self.growth_offset),
            ("F", self.growth_p),
            ("mu", self.phi_growth),
            ("H", self.phi_lipschitz),
        ];
        for (name, value) in scalars {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConditionsError::OutOfRange {
                    name,
                    value,
                    rule: "finite and >= 0",
                });
            }
        }
        for (name, value) in [("G", self.lipschitz_h), ("E", self.growth_h)] {
            if !(0.0..1.0).contains(&value) {
                return Err(ConditionsError::OutOfRange {
                    name,
                    value,
                    rule: "0 <= value < 1",
                });
            }
        }
        for (name, list) in [("M", &self.impulse_bound), ("L", &self.impulse_lipschitz)] {
            if list.len() != m {
                return Err(ConditionsError::ImpulseCount {
                    name,
                    got: list.len(),
                    expected: m,
                });
            }
            if let Some(&value) = list.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(ConditionsError::OutOfRange {
                    name,
                    value,
                    rule: "finite and >= 0",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    /// `𝒰`, the sum of the three terms below.
    pub u: f64,
    /// `Σ L_k`.
    pub impulse_term: f64,
    /// `H`.
    pub phi_term: f64,
    /// `K T^w (m+1) / ((1 − G) Γ(w+1))`.
    pub rhs_term: f64,
    pub satisfied: bool,
    /// Radius of the invariant ball, when its denominator is positive.
    pub sigma: Option<f64>,
}

/// `(m+1) T^w / (Γ(w+1) (1 − q))`, the factor shared by every bound.
fn horizon_factor(w: FracOrder, horizon: f64, m: usize, q: f64) -> f64 {
    let w = w.value();
    (m as f64 + 1.0) * horizon.powf(w) / (gamma(w + 1.0) * (1.0 - q))
}

/// Affine coefficients `(a, b)` of the existence condition `a·β + b < β`.
fn existence_coefficients(
    c: &HypothesisConstants,
    w: FracOrder,
    horizon: f64,
    m: usize,
) -> (f64, f64) {
    let factor = horizon_factor(w, horizon, m, c.growth_h);
    let a = c.phi_growth + factor * c.growth_p;
    let b = c.impulse_bound.iter().sum::<f64>() + factor * c.growth_offset;
    (a, b)
}

pub fn contraction_constant(
    c: &HypothesisConstants,
    w: FracOrder,
    horizon: f64,
    m: usize,
) -> ContractionReport {
    let impulse_term: f64 = c.impulse_lipschitz.iter().sum();
    let phi_term = c.phi_lipschitz;
    let rhs_term = c.lipschitz_p * horizon_factor(w, horizon, m, c.lipschitz_h);
    let u = impulse_term + phi_term + rhs_term;
    let (a, b) = existence_coefficients(c, w, horizon, m);
    let sigma = (a < 1.0).then(|| b / (1.0 - a));
    ContractionReport {
        u,
        impulse_term,
        phi_term,
        rhs_term,
        satisfied: u < 1.0,
        sigma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceReport {
    /// Coefficient of `β` on the left-hand side.
    pub slope: f64,
    /// Constant part of the left-hand side.
    pub offset: f64,
    pub beta: Option<f64>,
}

impl ExistenceReport {
    /// Left-hand side of the existence condition at `beta`.
    pub fn lhs(&self, beta: f64) -> f64 {
        self.slope * beta + self.offset
    }
}

/// Finds `β > 0` with `a·β + b < β`; none when `a >= 1`.
pub fn existence_beta_search(
    c: &HypothesisConstants,
    w: FracOrder,
    horizon: f64,
    m: usize,
) -> ExistenceReport {
    let (slope, offset) = existence_coefficients(c, w, horizon, m);
    let mut report = ExistenceReport {
        slope,
        offset,
        beta: None,
    };
    if slope.is_nan() || slope >= 1.0 || !offset.is_finite() {
        return report;
    }
    let base = offset / (1.0 - slope);
    if base <= 0.0 {
        report.beta = Some(1.0);
        return report;
    }
    let mut margin = BETA_MARGIN;
    while margin < 1.0 {
        let beta = base * (1.0 + margin);
        if report.lhs(beta) < beta {
            report.beta = Some(beta);
            break;
        }
        margin *= 10.0;
    }
    report
}

/// Box and resolution for estimating constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub p_range: (f64, f64),
    pub h_range: (f64, f64),
    /// Lattice points per axis.
    pub resolution: usize,
    /// Random point pairs per `θ` lattice point.
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            p_range: (0.0, 1.0),
            h_range: (0.0, 1.0),
            resolution: 33,
            random_pairs: 64,
            seed: 0x5eed,
        }
    }
}

impl Sampling {
    fn validate(&self) -> Result<(), ConditionsError> {
        for (name, (lo, hi)) in [("p", self.p_range), ("h", self.h_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ConditionsError::Sampling(format!(
                    "{name} range [{lo}, {hi}] is empty or not finite"
                )));
            }
        }
        if self.resolution < 2 {
            return Err(ConditionsError::Sampling(
                "resolution must be at least 2".into(),
            ));
        }
        Ok(())
    }

    fn lattice(&self, range: (f64, f64)) -> Vec<f64> {
        Self::spaced(range, self.resolution)
    }

    /// Finer lattice for one-dimensional maps: as many points as one
    /// `(p, h)` slice of the right-hand side.
    fn fine_lattice(&self, range: (f64, f64)) -> Vec<f64> {
        Self::spaced(range, self.resolution * self.resolution)
    }

    fn spaced((lo, hi): (f64, f64), points: usize) -> Vec<f64> {
        let n = points - 1;
        (0..=n)
            .map(|i| lo + (hi - lo) * (i as f64 / n as f64))
            .collect()
    }
}

/// Empirical lower bounds for the constants: the largest observed values and
/// difference quotients over the sampling box, not certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedConstants {
    pub constants: HypothesisConstants,
    pub sampling: Sampling,
    pub evaluations: usize,
}

fn quotient(f1: f64, f2: f64, x1: f64, x2: f64) -> f64 {
    if x1 == x2 {
        0.0
    } else {
        ((f1 - f2) / (x1 - x2)).abs()
    }
}

/// Random pairs closer than this fraction of the range are skipped; their
/// quotients are dominated by cancellation.
const MIN_PAIR_SEPARATION: f64 = 1e-3;

fn separated(x1: f64, x2: f64, (lo, hi): (f64, f64)) -> bool {
    (x1 - x2).abs() >= MIN_PAIR_SEPARATION * (hi - lo)
}

struct RhsStats {
    k: f64,
    g: f64,
    a: f64,
    evaluations: usize,
}

fn rhs_stats_at(
    rhs: &Expr,
    theta: f64,
    ps: &[f64],
    hs: &[f64],
    s: &Sampling,
    seed: u64,
) -> Result<RhsStats, ExprError> {
    let eval = |p: f64, h: f64| {
        rhs.eval(&Bindings {
            theta,
            p,
            h,
            pa: 0.0,
        })
    };
    let mut st = RhsStats {
        k: 0.0,
        g: 0.0,
        a: eval(0.0, 0.0)?.abs(),
        evaluations: 1,
    };
    let mut values = vec![vec![0.0; hs.len()]; ps.len()];
    for (i, &p) in ps.iter().enumerate() {
        for (j, &h) in hs.iter().enumerate() {
            values[i][j] = eval(p, h)?;
        }
    }
    st.evaluations += ps.len() * hs.len();
    for i in 0..ps.len() {
        for j in 0..hs.len() {
            if i + 1 < ps.len() {
                st.k =
                    st.k.max(quotient(values[i + 1][j], values[i][j], ps[i + 1], ps[i]));
            }
            if j + 1 < hs.len() {
                st.g =
                    st.g.max(quotient(values[i][j + 1], values[i][j], hs[j + 1], hs[j]));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..s.random_pairs {
        let p1 = rng.random_range(s.p_range.0..=s.p_range.1);
        let p2 = rng.random_range(s.p_range.0..=s.p_range.1);
        let h1 = rng.random_range(s.h_range.0..=s.h_range.1);
        let h2 = rng.random_range(s.h_range.0..=s.h_range.1);
        if separated(p1, p2, s.p_range) {
            st.k = st.k.max(quotient(eval(p1, h1)?, eval(p2, h1)?, p1, p2));
            st.evaluations += 2;
        }
        if separated(h1, h2, s.h_range) {
            st.g = st.g.max(quotient(eval(p1, h1)?, eval(p1, h2)?, h1, h2));
            st.evaluations += 2;
        }
    }
    Ok(st)
}

/// Largest value and largest lattice-neighbour quotient of a scalar map.
fn scalar_stats(values: &[f64], xs: &[f64]) -> (f64, f64) {
    let bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lip = values
        .windows(2)
        .zip(xs.windows(2))
        .map(|(v, x)| quotient(v[1], v[0], x[1], x[0]))
        .fold(0.0, f64::max);
    (bound, lip)
}

/// Estimates every constant over the sampling box, with `θ` on a lattice of
/// the problem's time scale.
///
/// `F` and `E` are taken equal to the estimated `K` and `G`, since the
/// Lipschitz bounds imply the growth bound with `A = sup |L(θ, 0, 0)|`.
/// `μ` is `sup |φ| / sup |pa|` over the `p` range. Impulse maps and `φ` are
/// sampled on `resolution²` points.
pub fn estimate_constants(
    problem: &ImpulsiveProblem,
    sampling: &Sampling,
) -> Result<EstimatedConstants, ConditionsError> {
    sampling.validate()?;
    let ts = problem.time_scale();
    let span = ts.max() - ts.min();
    let theta_grid = Grid::build(ts, span / (sampling.resolution - 1) as f64, &[])?;
    let ps = sampling.lattice(sampling.p_range);
    let hs = sampling.lattice(sampling.h_range);

    let per_theta: Vec<RhsStats> = theta_grid
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let seed = sampling.seed.wrapping_add(i as u64);
            rhs_stats_at(problem.rhs(), theta, &ps, &hs, sampling, seed)
        })
        .collect::<Result<_, _>>()?;
    let mut evaluations: usize = per_theta.iter().map(|s| s.evaluations).sum();
    let k = per_theta.iter().map(|s| s.k).fold(0.0, f64::max);
    let g = per_theta.iter().map(|s| s.g).fold(0.0, f64::max);
    let a = per_theta.iter().map(|s| s.a).fold(0.0, f64::max);

    let ps = sampling.fine_lattice(sampling.p_range);
    let mut impulse_bound = Vec::new();
    let mut impulse_lipschitz = Vec::new();
    for imp in problem.impulses() {
        let values = ps
            .iter()
            .map(|&p| {
                imp.map.eval(&Bindings {
                    theta: imp.at,
                    p,
                    ..Default::default()
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (bound, lip) = scalar_stats(&values, &ps);
        impulse_bound.push(bound);
        impulse_lipschitz.push(lip);
        evaluations += values.len();
    }

    let phi_values = ps
        .iter()
        .map(|&pa| {
            problem.phi().eval(&Bindings {
                pa,
                ..Default::default()
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    evaluations += phi_values.len();
    let (phi_sup, phi_lip) = scalar_stats(&phi_values, &ps);
    let pa_sup = sampling.p_range.0.abs().max(sampling.p_range.1.abs());

    Ok(EstimatedConstants {
        constants: HypothesisConstants {
            lipschitz_p: k,
            lipschitz_h: g,
            growth_offset: a,
            growth_p: k,
            growth_h: g,
            impulse_bound,
            impulse_lipschitz,
            phi_growth: phi_sup / pa_sup,
            phi_lipschitz: phi_lip,
        },
        sampling: sampling.clone(),
        evaluations,
    })
}
