//! Line-oriented problem and constants files.
//!
//! ```text
//! # comment
//! [timescale]
//! interval 0 1
//! point 1.5
//!
//! [problem]
//! w = 0.5
//! rhs = exp(-theta) * (1 + p) / 10 + h / 5
//! phi = (1 + e^pa) / 5
//! phi_anchor = 1          # optional, defaults to the horizon
//!
//! [impulses]
//! at = 1/3
//! map = (1 + theta*exp(p)) / 10
//!
//! [solver]                # every key optional
//! mesh = 1e-3
//! history_variant = frozen
//!
//! [output]
//! csv = solution.csv
//! ```
//!
//! Numeric values accept constant expressions such as `1/3` or `2*pi`.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::conditions::HypothesisConstants;
use crate::expr::{Bindings, Expr, Role};
use crate::frac::FracOrder;
use crate::solver::{HistoryVariant, Impulse, ImpulsiveProblem, ProblemError, SolverConfig};
use crate::timescale::{Component, TimeScale};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn at(line: usize, message: impl fmt::Display) -> Self {
        ConfigError::Line {
            line,
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Line { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Evaluates a constant expression such as `1/(35*e^3)`.
pub fn parse_number(text: &str) -> Result<f64, String> {
    let e = Expr::parse(text, Role::Constant).map_err(|e| e.to_string())?;
    e.eval(&Bindings::default()).map_err(|e| e.to_string())
}

fn number(line: usize, text: &str) -> Result<f64, ConfigError> {
    parse_number(text).map_err(|m| ConfigError::at(line, m))
}

fn count(line: usize, text: &str) -> Result<usize, ConfigError> {
    text.parse().map_err(|_| {
        ConfigError::at(
            line,
            format!("expected a non-negative integer, got `{text}`"),
        )
    })
}

fn expression(line: usize, text: &str, role: Role) -> Result<Expr, ConfigError> {
    Expr::parse(text, role).map_err(|e| ConfigError::at(line, e))
}

/// Strips comments and yields `(line number, trimmed content)`.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn section_name(body: &str) -> Option<&str> {
    body.strip_prefix('[')?.strip_suffix(']').map(str::trim)
}

fn key_value(line: usize, body: &str) -> Result<(&str, &str), ConfigError> {
    let (k, v) = body
        .split_once('=')
        .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{body}`")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(ConfigError::at(line, "empty key"));
    }
    Ok((k, v))
}

#[derive(Debug, Clone)]
struct Located<T> {
    value: T,
    line: usize,
}

#[derive(Debug, Clone)]
pub struct ImpulseEntry {
    pub at: f64,
    pub map: Expr,
    line: usize,
}

/// A parsed problem file.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    components: Vec<Located<Component>>,
    w: Located<f64>,
    rhs: Expr,
    phi: Expr,
    anchor: Option<Located<f64>>,
    impulses: Vec<ImpulseEntry>,
    pub solver: SolverConfig,
    solver_line: usize,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    TimeScale,
    Problem,
    Impulses,
    Solver,
    Output,
}

impl ProblemConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section = Section::None;
        let mut components = Vec::new();
        let mut w = None;
        let mut rhs = None;
        let mut phi = None;
        let mut anchor = None;
        let mut impulses: Vec<(usize, f64, Option<Expr>)> = Vec::new();
        let mut solver = SolverConfig::default();
        let mut solver_line = 0;
        let mut seen_solver_keys: Vec<String> = Vec::new();
        let mut csv = None;

        for (line, body) in content_lines(text) {
            if let Some(name) = section_name(body) {
                section = match name {
                    "timescale" => Section::TimeScale,
                    "problem" => Section::Problem,
                    "impulses" => Section::Impulses,
                    "solver" => {
                        solver_line = line;
                        Section::Solver
                    }
                    "output" => Section::Output,
                    other => {
                        return Err(ConfigError::at(line, format!("unknown section [{other}]")))
                    }
                };
                continue;
            }
            match section {
                Section::None => {
                    return Err(ConfigError::at(
                        line,
                        "content before the first section header",
                    ));
                }
                Section::TimeScale => {
                    let words: Vec<&str> = body.split_whitespace().collect();
                    let component = match words.as_slice() {
                        ["interval", lo, hi] => Component::Interval {
                            lo: number(line, lo)?,
                            hi: number(line, hi)?,
                        },
                        ["point", x] => Component::Point(number(line, x)?),
                        _ => {
                            return Err(ConfigError::at(
                                line,
                                format!("expected `interval lo hi` or `point x`, got `{body}`"),
                            ))
                        }
                    };
                    components.push(Located {
                        value: component,
                        line,
                    });
                }
                Section::Problem => {
                    let (key, value) = key_value(line, body)?;
                    let slot_taken = match key {
                        "w" => w
                            .replace(Located {
                                value: number(line, value)?,
                                line,
                            })
                            .is_some(),
                        "rhs" => rhs.replace(expression(line, value, Role::Rhs)?).is_some(),
                        "phi" => phi.replace(expression(line, value, Role::Phi)?).is_some(),
                        "phi_anchor" => anchor
                            .replace(Located {
                                value: number(line, value)?,
                                line,
                            })
                            .is_some(),
                        other => {
                            return Err(ConfigError::at(
                                line,
                                format!("unknown key `{other}` in [problem]"),
                            ))
                        }
                    };
                    if slot_taken {
                        return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
                    }
                }
                Section::Impulses => {
                    let (key, value) = key_value(line, body)?;
                    match key {
                        "at" => impulses.push((line, number(line, value)?, None)),
                        "map" => {
                            let map = expression(line, value, Role::Impulse)?;
                            match impulses.last_mut() {
                                Some((_, _, slot @ None)) => *slot = Some(map),
                                Some(_) => {
                                    return Err(ConfigError::at(
                                        line,
                                        "`map` repeated; start a new impulse with `at`",
                                    ))
                                }
                                None => return Err(ConfigError::at(line, "`map` before any `at`")),
                            }
                        }
                        other => {
                            return Err(ConfigError::at(
                                line,
                                format!("unknown key `{other}` in [impulses]"),
                            ))
                        }
                    }
                }
                Section::Solver => {
                    let (key, value) = key_value(line, body)?;
                    if seen_solver_keys.iter().any(|k| k == key) {
                        return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
                    }
                    seen_solver_keys.push(key.to_string());
                    match key {
                        "mesh" => solver.mesh = number(line, value)?,
                        "tol_h" => solver.tol_h = number(line, value)?,
                        "tol_picard" => solver.tol_picard = number(line, value)?,
                        "tol_outer" => solver.tol_outer = number(line, value)?,
                        "max_inner" => solver.max_inner = count(line, value)?,
                        "max_picard" => solver.max_picard = count(line, value)?,
                        "max_outer" => solver.max_outer = count(line, value)?,
                        "history_variant" => solver.history = match value {
                            "frozen" => HistoryVariant::Frozen,
                            "memory" => HistoryVariant::Memory,
                            other => return Err(ConfigError::at(
                                line,
                                format!(
                                    "history_variant must be `frozen` or `memory`, got `{other}`"
                                ),
                            )),
                        },
                        "outer_seed" => solver.outer_seed = Some(number(line, value)?),
                        other => {
                            return Err(ConfigError::at(
                                line,
                                format!("unknown key `{other}` in [solver]"),
                            ))
                        }
                    }
                }
                Section::Output => {
                    let (key, value) = key_value(line, body)?;
                    match key {
                        "csv" if csv.is_none() => csv = Some(PathBuf::from(value)),
                        "csv" => return Err(ConfigError::at(line, "duplicate key `csv`")),
                        other => {
                            return Err(ConfigError::at(
                                line,
                                format!("unknown key `{other}` in [output]"),
                            ))
                        }
                    }
                }
            }
        }

        if components.is_empty() {
            return Err(ConfigError::Missing("[timescale] entries"));
        }
        let impulses = impulses
            .into_iter()
            .map(|(line, at, map)| match map {
                Some(map) => Ok(ImpulseEntry { at, map, line }),
                None => Err(ConfigError::at(line, "impulse has no `map`")),
            })
            .collect::<Result<_, _>>()?;
        Ok(ProblemConfig {
            components,
            w: w.ok_or(ConfigError::Missing("w in [problem]"))?,
            rhs: rhs.ok_or(ConfigError::Missing("rhs in [problem]"))?,
            phi: phi.ok_or(ConfigError::Missing("phi in [problem]"))?,
            anchor,
            impulses,
            solver,
            solver_line,
            csv,
        })
    }

    pub fn components(&self) -> Vec<Component> {
        self.components.iter().map(|c| c.value).collect()
    }

    pub fn order(&self) -> f64 {
        self.w.value
    }

    pub fn rhs(&self) -> &Expr {
        &self.rhs
    }

    pub fn phi(&self) -> &Expr {
        &self.phi
    }

    pub fn anchor(&self) -> Option<f64> {
        self.anchor.as_ref().map(|a| a.value)
    }

    pub fn impulses(&self) -> &[ImpulseEntry] {
        &self.impulses
    }

    pub fn time_scale(&self) -> Result<TimeScale, ConfigError> {
        TimeScale::new(self.components()).map_err(|e| ConfigError::at(self.components[0].line, e))
    }

    /// Validates everything and assembles the problem and solver settings.
    pub fn build(&self) -> Result<(ImpulsiveProblem, SolverConfig), ConfigError> {
        let ts = self.time_scale()?;
        let order = FracOrder::new(self.w.value).map_err(|e| ConfigError::at(self.w.line, e))?;
        let impulses = self
            .impulses
            .iter()
            .map(|i| Impulse {
                at: i.at,
                map: i.map.clone(),
            })
            .collect();
        let problem = ImpulsiveProblem::new(
            ts,
            order,
            self.rhs.clone(),
            impulses,
            self.phi.clone(),
            self.anchor(),
        )
        .map_err(|e| {
            let line = match &e {
                ProblemError::ImpulseNotInTimeScale { index, .. }
                | ProblemError::ImpulseOutsideHorizon { index, .. }
                | ProblemError::ImpulseOutOfOrder { index, .. } => self.impulses[*index].line,
                ProblemError::AnchorNotInTimeScale(_) => self.anchor.as_ref().map_or(0, |a| a.line),
                ProblemError::DegenerateTimeScale => self.components[0].line,
                ProblemError::ExpressionRole(_) => self.w.line,
            };
            ConfigError::at(line, e)
        })?;
        self.solver
            .validate()
            .map_err(|e| ConfigError::at(self.solver_line, e))?;
        Ok((problem, self.solver))
    }
}

impl fmt::Display for ProblemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[timescale]")?;
        for c in &self.components {
            writeln!(f, "{}", c.value)?;
        }
        writeln!(f, "\n[problem]")?;
        writeln!(f, "w = {:?}", self.w.value)?;
        writeln!(f, "rhs = {}", self.rhs)?;
        writeln!(f, "phi = {}", self.phi)?;
        if let Some(a) = &self.anchor {
            writeln!(f, "phi_anchor = {:?}", a.value)?;
        }
        if !self.impulses.is_empty() {
            writeln!(f, "\n[impulses]")?;
            for i in &self.impulses {
                writeln!(f, "at = {:?}", i.at)?;
                writeln!(f, "map = {}", i.map)?;
            }
        }
        let s = &self.solver;
        writeln!(f, "\n[solver]")?;
        writeln!(f, "mesh = {:?}", s.mesh)?;
        writeln!(f, "tol_h = {:?}", s.tol_h)?;
        writeln!(f, "tol_picard = {:?}", s.tol_picard)?;
        writeln!(f, "tol_outer = {:?}", s.tol_outer)?;
        writeln!(f, "max_inner = {}", s.max_inner)?;
        writeln!(f, "max_picard = {}", s.max_picard)?;
        writeln!(f, "max_outer = {}", s.max_outer)?;
        let variant = match s.history {
            HistoryVariant::Frozen => "frozen",
            HistoryVariant::Memory => "memory",
        };
        writeln!(f, "history_variant = {variant}")?;
        if let Some(seed) = s.outer_seed {
            writeln!(f, "outer_seed = {seed:?}")?;
        }
        if let Some(csv) = &self.csv {
            writeln!(f, "\n[output]")?;
            writeln!(f, "csv = {}", csv.display())?;
        }
        Ok(())
    }
}

/// Parses a constants file: `key = value` lines with keys
/// `K G A F E M L mu H`, where `M` and `L` are comma-separated lists with one
/// entry per impulse. A `[constants]` header is optional.
pub fn parse_constants(text: &str) -> Result<HypothesisConstants, ConfigError> {
    let mut scalars: [Option<f64>; 7] = [None; 7];
    const NAMES: [&str; 7] = ["K", "G", "A", "F", "E", "mu", "H"];
    let mut bound = None;
    let mut lipschitz = None;
    for (line, body) in content_lines(text) {
        if let Some(name) = section_name(body) {
            if name == "constants" {
                continue;
            }
            return Err(ConfigError::at(line, format!("unknown section [{name}]")));
        }
        let (key, value) = key_value(line, body)?;
        let duplicate = if let Some(i) = NAMES.iter().position(|n| *n == key) {
            scalars[i].replace(number(line, value)?).is_some()
        } else {
            let list = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| number(line, s))
                .collect::<Result<Vec<_>, _>>()?;
            match key {
                "M" => bound.replace(list).is_some(),
                "L" => lipschitz.replace(list).is_some(),
                other => return Err(ConfigError::at(line, format!("unknown constant `{other}`"))),
            }
        };
        if duplicate {
            return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
        }
    }
    let get = |i: usize| scalars[i].ok_or(ConfigError::Missing(NAMES[i]));
    Ok(HypothesisConstants {
        lipschitz_p: get(0)?,
        lipschitz_h: get(1)?,
        growth_offset: get(2)?,
        growth_p: get(3)?,
        growth_h: get(4)?,
        phi_growth: get(5)?,
        phi_lipschitz: get(6)?,
        impulse_bound: bound.ok_or(ConfigError::Missing("M"))?,
        impulse_lipschitz: lipschitz.ok_or(ConfigError::Missing("L"))?,
    })
}

pub fn constants_from_path(path: &Path) -> Result<HypothesisConstants, ConfigError> {
    parse_constants(&read(path)?)
}
