//! First-order nabla calculus on a [`Grid`].
//!
//! Steps into a left-scattered node contribute `ν(θ)·f(θ)` to integrals; steps
//! inside a continuous interval use the trapezoid rule. Derivatives are
//! backward difference quotients over the preceding node.

use std::sync::Arc;

use thiserror::Error;

use crate::timescale::Grid;

/// Absolute tolerance for the extension inequality.
pub const EXTENSION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("{values} values supplied for a grid of {nodes} nodes")]
    LengthMismatch { nodes: usize, values: usize },
    #[error("non-finite value at node {0}")]
    NonFiniteValue(usize),
    #[error("node index {0} is out of range")]
    NodeOutOfRange(usize),
    #[error("node {0} has no predecessor")]
    NoPredecessor(usize),
    #[error("nodes out of order: {a} > {b}")]
    NodesOutOfOrder { a: usize, b: usize },
    #[error("function decreases at node {0}")]
    NotIncreasing(usize),
    #[error("grid has a single node; there is no interval to work on")]
    DegenerateGrid,
    #[error("fractional order must lie in (0, 1), got {0}")]
    InvalidOrder(f64),
}

/// Function values sampled on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, CalculusError> {
        if grid.len() != values.len() {
            return Err(CalculusError::LengthMismatch {
                nodes: grid.len(),
                values: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CalculusError::NonFiniteValue(i));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self, CalculusError> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Pointwise `self - c`.
    pub fn shifted(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v - c).collect(),
        }
    }

    pub(crate) fn check_node(&self, i: usize) -> Result<(), CalculusError> {
        if i < self.values.len() {
            Ok(())
        } else {
            Err(CalculusError::NodeOutOfRange(i))
        }
    }

    pub(crate) fn check_range(&self, a: usize, b: usize) -> Result<(), CalculusError> {
        if self.grid.len() < 2 {
            return Err(CalculusError::DegenerateGrid);
        }
        self.check_node(a)?;
        self.check_node(b)?;
        if a > b {
            return Err(CalculusError::NodesOutOfOrder { a, b });
        }
        Ok(())
    }
}

/// Backward difference quotient into node `i`. At a left-scattered node the
/// predecessor is α(θ), so this is the exact nabla derivative there.
pub fn nabla_derivative(f: &GridFunction, i: usize) -> Result<f64, CalculusError> {
    f.check_node(i)?;
    if i == 0 {
        return Err(CalculusError::NoPredecessor(0));
    }
    let nodes = f.grid.nodes();
    Ok((f.values[i] - f.values[i - 1]) / (nodes[i] - nodes[i - 1]))
}

/// Nabla derivative on every node but the first, as a function on the grid
/// with its first node removed. Repeated application gives higher orders.
pub fn derivative_function(f: &GridFunction) -> Result<GridFunction, CalculusError> {
    if f.grid.len() < 2 {
        return Err(CalculusError::DegenerateGrid);
    }
    let values = (1..f.grid.len())
        .map(|i| nabla_derivative(f, i))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = Arc::new(f.grid.without_first());
    GridFunction::new(grid, values)
}

fn step_contribution(f: &GridFunction, j: usize) -> f64 {
    let nodes = f.grid.nodes();
    let width = nodes[j] - nodes[j - 1];
    if f.grid.is_left_scattered(j) {
        width * f.values[j]
    } else {
        0.5 * width * (f.values[j - 1] + f.values[j])
    }
}

/// ∫_a^b f(x) ∇x between nodes `a <= b`.
pub fn nabla_integral(f: &GridFunction, a: usize, b: usize) -> Result<f64, CalculusError> {
    f.check_range(a, b)?;
    Ok((a + 1..=b).map(|j| step_contribution(f, j)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the nabla integral of a non-decreasing `f` with the real-line
/// integral of its extension, which carries `f(θ)` across each gap
/// `(α(θ), θ)` and interpolates linearly between nodes of an interval.
pub fn extension_inequality_check(
    f: &GridFunction,
    a: usize,
    b: usize,
) -> Result<ExtensionCheck, CalculusError> {
    f.check_range(a, b)?;
    if a == b {
        return Err(CalculusError::NodesOutOfOrder { a, b });
    }
    if let Some(j) = (a + 1..=b).find(|&j| f.values[j] < f.values[j - 1]) {
        return Err(CalculusError::NotIncreasing(j));
    }
    let lhs = nabla_integral(f, a, b)?;

    let nodes = f.grid.nodes();
    let mut rhs = 0.0;
    for j in a + 1..=b {
        let (x0, x1) = (nodes[j - 1], nodes[j]);
        rhs += if f.grid.is_left_scattered(j) {
            // gap (α(θ), θ): extension is the constant f(θ)
            f.values[j] * (x1 - x0)
        } else {
            // linear interpolant: ∫ = mean of endpoint values times width
            (x1 - x0) * (f.values[j - 1] + f.values[j]) / 2.0
        };
    }
    Ok(ExtensionCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + EXTENSION_TOL,
    })
}
