//! Bounded time scales: finite unions of closed intervals and isolated points.
//!
//! A [`TimeScale`] answers the structural questions the nabla calculus needs
//! (backward jump, graininess, left-dense/left-scattered classification), and
//! [`Grid`] discretizes it for the numerical operators.

use std::fmt;

use thiserror::Error;

/// Absolute tolerance used for membership and endpoint comparisons.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Refuse grids whose single piece would need more than this many steps.
const MAX_STEPS_PER_PIECE: usize = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeScaleError {
    #[error("time scale has no components")]
    Empty,
    #[error("invalid component: {0}")]
    InvalidComponent(String),
    #[error("components overlap or touch near {0}")]
    OverlappingComponents(f64),
    #[error("point {0} is not in the time scale")]
    PointNotInTimeScale(f64),
    #[error("backward jump is undefined at the minimum {0}")]
    JumpUndefinedAtMinimum(f64),
    #[error("extra grid node {0} lies outside the time scale")]
    ExtraNodeOutsideTimeScale(f64),
    #[error("mesh must be a positive finite number, got {0}")]
    InvalidMesh(f64),
    #[error("mesh {0} is too fine for this time scale")]
    MeshTooFine(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Interval { lo: f64, hi: f64 },
    Point(f64),
}

impl Component {
    pub fn inf(&self) -> f64 {
        match *self {
            Component::Interval { lo, .. } => lo,
            Component::Point(x) => x,
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Component::Interval { hi, .. } => hi,
            Component::Point(x) => x,
        }
    }

    fn contains(&self, theta: f64) -> bool {
        theta >= self.inf() - MEMBERSHIP_TOL && theta <= self.sup() + MEMBERSHIP_TOL
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Component::Interval { lo, hi } => write!(f, "interval {lo:?} {hi:?}"),
            Component::Point(x) => write!(f, "point {x:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    LeftDense,
    LeftScattered,
}

/// A bounded time scale, stored as ordered, pairwise disjoint components.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    components: Vec<Component>,
}

impl TimeScale {
    /// Builds a time scale from components given in any order. Degenerate
    /// intervals (`lo == hi`) are stored as points.
    pub fn new(components: impl IntoIterator<Item = Component>) -> Result<Self, TimeScaleError> {
        let mut parts = Vec::new();
        for c in components {
            let c = match c {
                Component::Interval { lo, hi } => {
                    if !lo.is_finite() || !hi.is_finite() || lo > hi {
                        return Err(TimeScaleError::InvalidComponent(c.to_string()));
                    }
                    if hi - lo > 0.0 {
                        c
                    } else {
                        Component::Point(lo)
                    }
                }
                Component::Point(x) => {
                    if !x.is_finite() {
                        return Err(TimeScaleError::InvalidComponent(c.to_string()));
                    }
                    c
                }
            };
            parts.push(c);
        }
        if parts.is_empty() {
            return Err(TimeScaleError::Empty);
        }
        parts.sort_by(|a, b| a.inf().total_cmp(&b.inf()));
        for pair in parts.windows(2) {
            if pair[0].sup() + MEMBERSHIP_TOL >= pair[1].inf() {
                return Err(TimeScaleError::OverlappingComponents(pair[1].inf()));
            }
        }
        Ok(TimeScale { components: parts })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, TimeScaleError> {
        Self::new([Component::Interval { lo, hi }])
    }

    /// The integer time scale ℤ ∩ [lo, hi].
    pub fn integers(lo: i64, hi: i64) -> Result<Self, TimeScaleError> {
        Self::new((lo..=hi).map(|k| Component::Point(k as f64)))
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn min(&self) -> f64 {
        self.components[0].inf()
    }

    pub fn max(&self) -> f64 {
        self.components[self.components.len() - 1].sup()
    }

    /// True when the whole time scale is a single point.
    pub fn is_degenerate(&self) -> bool {
        self.components.len() == 1 && matches!(self.components[0], Component::Point(_))
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.locate(theta).is_some()
    }

    fn locate(&self, theta: f64) -> Option<usize> {
        if !theta.is_finite() {
            return None;
        }
        let idx = self
            .components
            .partition_point(|c| c.sup() + MEMBERSHIP_TOL < theta);
        (idx < self.components.len() && self.components[idx].contains(theta)).then_some(idx)
    }

    /// Snaps a member point onto a component endpoint when it lies within
    /// [`MEMBERSHIP_TOL`] of one.
    pub fn snap(&self, theta: f64) -> Result<f64, TimeScaleError> {
        let idx = self
            .locate(theta)
            .ok_or(TimeScaleError::PointNotInTimeScale(theta))?;
        let c = self.components[idx];
        if (theta - c.inf()).abs() <= MEMBERSHIP_TOL {
            Ok(c.inf())
        } else if (theta - c.sup()).abs() <= MEMBERSHIP_TOL {
            Ok(c.sup())
        } else {
            Ok(theta)
        }
    }

    /// α(θ) = sup{ζ ∈ 𝕋 : ζ < θ}.
    pub fn backward_jump(&self, theta: f64) -> Result<f64, TimeScaleError> {
        let idx = self
            .locate(theta)
            .ok_or(TimeScaleError::PointNotInTimeScale(theta))?;
        if (theta - self.min()).abs() <= MEMBERSHIP_TOL {
            return Err(TimeScaleError::JumpUndefinedAtMinimum(theta));
        }
        let c = self.components[idx];
        match c {
            Component::Interval { lo, .. } if theta > lo + MEMBERSHIP_TOL => Ok(theta),
            _ => Ok(self.components[idx - 1].sup()),
        }
    }

    /// ν(θ) = θ − α(θ).
    pub fn graininess(&self, theta: f64) -> Result<f64, TimeScaleError> {
        let alpha = self.backward_jump(theta)?;
        Ok(theta - alpha)
    }

    pub fn classify(&self, theta: f64) -> Result<PointKind, TimeScaleError> {
        let alpha = self.backward_jump(theta)?;
        Ok(if alpha == theta {
            PointKind::LeftDense
        } else {
            PointKind::LeftScattered
        })
    }
}

impl fmt::Display for TimeScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A discretization of a time scale.
///
/// Every isolated point and interval endpoint is a node. Inside an interval the
/// pieces between forced nodes are split uniformly into a power-of-two number
/// of steps, the smallest one whose spacing does not exceed `mesh`; halving the
/// mesh therefore yields a bitwise superset of the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    left_scattered: Vec<bool>,
    mesh: f64,
}

impl Grid {
    pub fn build(ts: &TimeScale, mesh: f64, extra_nodes: &[f64]) -> Result<Grid, TimeScaleError> {
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(TimeScaleError::InvalidMesh(mesh));
        }
        let mut extras = Vec::with_capacity(extra_nodes.len());
        for &x in extra_nodes {
            let snapped = ts
                .snap(x)
                .map_err(|_| TimeScaleError::ExtraNodeOutsideTimeScale(x))?;
            extras.push(snapped);
        }
        extras.sort_by(f64::total_cmp);

        let mut nodes = Vec::new();
        let mut left_scattered = Vec::new();
        for c in ts.components() {
            match *c {
                Component::Point(x) => {
                    nodes.push(x);
                    left_scattered.push(true);
                }
                Component::Interval { lo, hi } => {
                    let mut breaks = vec![lo];
                    for &x in &extras {
                        if x > lo + MEMBERSHIP_TOL
                            && x < hi - MEMBERSHIP_TOL
                            && x - breaks[breaks.len() - 1] > MEMBERSHIP_TOL
                        {
                            breaks.push(x);
                        }
                    }
                    breaks.push(hi);
                    nodes.push(lo);
                    left_scattered.push(true);
                    for piece in breaks.windows(2) {
                        let (a, b) = (piece[0], piece[1]);
                        let len = b - a;
                        let mut steps = 1usize;
                        while len / steps as f64 > mesh {
                            steps *= 2;
                            if steps > MAX_STEPS_PER_PIECE {
                                return Err(TimeScaleError::MeshTooFine(mesh));
                            }
                        }
                        for i in 1..steps {
                            nodes.push(a + len * (i as f64 / steps as f64));
                            left_scattered.push(false);
                        }
                        nodes.push(b);
                        left_scattered.push(false);
                    }
                }
            }
        }
        // The first node has no predecessor; it is never treated as scattered.
        left_scattered[0] = false;
        Ok(Grid {
            nodes,
            left_scattered,
            mesh,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// True when node `i` is left-scattered in the underlying time scale, in
    /// which case its predecessor node is exactly α(node).
    pub fn is_left_scattered(&self, i: usize) -> bool {
        self.left_scattered[i]
    }

    pub(crate) fn without_first(&self) -> Grid {
        let mut left_scattered = self.left_scattered[1..].to_vec();
        if let Some(first) = left_scattered.first_mut() {
            *first = false;
        }
        Grid {
            nodes: self.nodes[1..].to_vec(),
            left_scattered,
            mesh: self.mesh,
        }
    }

    /// Index of the node equal to `theta` within [`MEMBERSHIP_TOL`].
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&x| x < theta - MEMBERSHIP_TOL);
        (i < self.nodes.len() && (self.nodes[i] - theta).abs() <= MEMBERSHIP_TOL).then_some(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval_and_point(x: f64) -> TimeScale {
        TimeScale::new([
            Component::Interval { lo: 0.0, hi: 1.0 },
            Component::Point(x),
        ])
        .unwrap()
    }

    #[test]
    fn backward_jump_examples() {
        assert_eq!(interval_and_point(2.0).backward_jump(2.0).unwrap(), 1.0);
        assert_eq!(
            TimeScale::interval(0.0, 1.0)
                .unwrap()
                .backward_jump(0.5)
                .unwrap(),
            0.5
        );
        assert_eq!(
            TimeScale::integers(0, 5)
                .unwrap()
                .backward_jump(3.0)
                .unwrap(),
            2.0
        );
    }

    #[test]
    fn backward_jump_errors() {
        let ts = TimeScale::interval(0.0, 1.0).unwrap();
        assert_eq!(
            ts.backward_jump(0.0),
            Err(TimeScaleError::JumpUndefinedAtMinimum(0.0))
        );
        assert_eq!(
            ts.backward_jump(1.5),
            Err(TimeScaleError::PointNotInTimeScale(1.5))
        );
    }

    #[test]
    fn graininess_examples() {
        assert_eq!(
            TimeScale::integers(0, 5).unwrap().graininess(3.0).unwrap(),
            1.0
        );
        assert_eq!(
            TimeScale::interval(0.0, 1.0)
                .unwrap()
                .graininess(0.7)
                .unwrap(),
            0.0
        );
        assert_eq!(interval_and_point(2.5).graininess(2.5).unwrap(), 1.5);
    }

    #[test]
    fn classify_examples() {
        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        assert_eq!(unit.classify(1.0).unwrap(), PointKind::LeftDense);
        let two_points = TimeScale::integers(0, 1).unwrap();
        assert_eq!(two_points.classify(1.0).unwrap(), PointKind::LeftScattered);
        let two_intervals = TimeScale::new([
            Component::Interval { lo: 0.0, hi: 1.0 },
            Component::Interval { lo: 2.0, hi: 3.0 },
        ])
        .unwrap();
        assert_eq!(
            two_intervals.classify(2.0).unwrap(),
            PointKind::LeftScattered
        );
        assert_eq!(two_intervals.backward_jump(2.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_overlap_and_bad_components() {
        let overlap = TimeScale::new([
            Component::Interval { lo: 0.0, hi: 1.0 },
            Component::Interval { lo: 0.5, hi: 2.0 },
        ]);
        assert!(matches!(
            overlap,
            Err(TimeScaleError::OverlappingComponents(_))
        ));
        let touching = TimeScale::new([
            Component::Interval { lo: 0.0, hi: 1.0 },
            Component::Point(1.0),
        ]);
        assert!(touching.is_err());
        assert!(TimeScale::interval(1.0, 0.0).is_err());
        assert_eq!(TimeScale::new([]), Err(TimeScaleError::Empty));
    }

    #[test]
    fn degenerate_interval_becomes_point() {
        let ts = TimeScale::interval(0.5, 0.5).unwrap();
        assert_eq!(ts.components(), &[Component::Point(0.5)]);
        assert!(ts.is_degenerate());
    }

    #[test]
    fn unsorted_input_is_ordered() {
        let ts = TimeScale::new([
            Component::Point(3.0),
            Component::Interval { lo: 0.0, hi: 1.0 },
        ])
        .unwrap();
        assert_eq!(ts.min(), 0.0);
        assert_eq!(ts.max(), 3.0);
    }

    #[test]
    fn grid_examples() {
        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        assert_eq!(
            Grid::build(&unit, 0.5, &[]).unwrap().nodes(),
            &[0.0, 0.5, 1.0]
        );

        let ints = TimeScale::integers(0, 3).unwrap();
        assert_eq!(
            Grid::build(&ints, 10.0, &[]).unwrap().nodes(),
            &[0.0, 1.0, 2.0, 3.0]
        );

        let forced = Grid::build(&unit, 0.4, &[1.0 / 3.0]).unwrap();
        assert!(forced.index_of(1.0 / 3.0).is_some());
        assert!(forced.nodes().windows(2).all(|w| w[1] - w[0] <= 0.4));
    }

    #[test]
    fn grid_rejects_outside_extra_and_bad_mesh() {
        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        assert_eq!(
            Grid::build(&unit, 0.1, &[1.5]),
            Err(TimeScaleError::ExtraNodeOutsideTimeScale(1.5))
        );
        assert_eq!(
            Grid::build(&unit, 0.0, &[]),
            Err(TimeScaleError::InvalidMesh(0.0))
        );
    }

    #[test]
    fn grid_scattered_flags() {
        let ts = TimeScale::new([
            Component::Interval { lo: 0.0, hi: 1.0 },
            Component::Point(1.5),
            Component::Interval { lo: 2.0, hi: 3.0 },
        ])
        .unwrap();
        let grid = Grid::build(&ts, 0.5, &[]).unwrap();
        assert_eq!(grid.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let flags: Vec<bool> = (0..grid.len()).map(|i| grid.is_left_scattered(i)).collect();
        assert_eq!(flags, [false, false, false, true, true, false, false]);
    }

    #[test]
    fn extra_node_near_endpoint_is_snapped() {
        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        let grid = Grid::build(&unit, 0.5, &[1.0 - 1e-14]).unwrap();
        assert_eq!(grid.nodes(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn halving_mesh_refines() {
        let unit = TimeScale::interval(0.0, 1.0).unwrap();
        let coarse = Grid::build(&unit, 0.3, &[0.7]).unwrap();
        let fine = Grid::build(&unit, 0.15, &[0.7]).unwrap();
        for x in coarse.nodes() {
            assert!(fine.nodes().contains(x));
        }
    }
}
