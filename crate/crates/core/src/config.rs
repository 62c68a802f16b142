//! JSON problem files.
//!
//! A config describes either a symbolic problem (`b`, `cost`, `density`) or a
//! tabulated one (`table`), which is how reduced problems are written back
//! out. Unknown keys are rejected and every error carries a JSON pointer to
//! the offending key.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DiscreteProblem, DomainError, DomainSpec, Field, GridBox, Payoff, ScreeningProblem, ToleranceSet, Topology};
use crate::expr::{parse, ParseError};
use crate::preference::SymbolicPreference;
use crate::solver::{Method, SolveOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{pointer}: {message}")]
    Json { pointer: String, message: String },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("{pointer}: {source}")]
    Expr { pointer: String, source: ParseError },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl ConfigError {
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Json { pointer, .. } | ConfigError::Invalid { pointer, .. } | ConfigError::Expr { pointer, .. } => {
                Some(pointer)
            }
            ConfigError::Domain(_) => None,
        }
    }
}

fn invalid(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { pointer: pointer.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
}

/// A box (`lower`, `upper`, `resolution`) or an explicit point list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Type weights for a point list; replaces `density`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Points this close are neighbours; absent means isolated points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
}

/// Tabulated payoff rows (one per type) and good costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub payoff: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dims: Dims,
    pub domain_x: DomainConfig,
    pub domain_y: DomainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    pub null_good: Vec<f64>,
    #[serde(default)]
    pub tolerances: ToleranceSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableConfig>,
}

/// Names of the configs compiled into the crate.
pub const BUILTINS: [&str; 4] = ["example-3-3", "reduce-types-demo", "reduce-goods-demo", "bilinear-demo"];

/// Raw text of a built-in config.
pub fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "example-3-3" => include_str!("../configs/example-3-3.json"),
        "reduce-types-demo" => include_str!("../configs/reduce-types-demo.json"),
        "reduce-goods-demo" => include_str!("../configs/reduce-goods-demo.json"),
        "bilinear-demo" => include_str!("../configs/bilinear-demo.json"),
        _ => return None,
    })
}

fn to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        s.push('/');
        match seg {
            Segment::Seq { index } => s.push_str(&index.to_string()),
            Segment::Map { key } => s.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => s.push_str(variant),
            Segment::Unknown => s.push('?'),
        }
    }
    s
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = to_pointer(e.path());
            ConfigError::Json { pointer, message: e.into_inner().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        builtin(name).map(|t| Self::from_json(t).expect("built-in configs are valid"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Shape checks that need more than one key.
    fn validate(&self) -> Result<(), ConfigError> {
        let Dims { m, n } = self.dims;
        if m == 0 {
            return Err(invalid("/dims/m", "must be positive"));
        }
        if n == 0 {
            return Err(invalid("/dims/n", "must be positive"));
        }
        if self.null_good.len() != n {
            return Err(invalid("/null_good", format!("expected {n} coordinates, got {}", self.null_good.len())));
        }
        match (&self.b, &self.table) {
            (Some(_), Some(_)) => return Err(invalid("/table/payoff", "give either `b` or a payoff table, not both")),
            (None, None) => return Err(invalid("/b", "missing preference `b`")),
            _ => {}
        }
        let table_costs = self.table.as_ref().and_then(|t| t.costs.as_ref());
        match (&self.cost, table_costs) {
            (Some(_), Some(_)) => return Err(invalid("/table/costs", "give either `cost` or tabulated costs, not both")),
            (None, None) => return Err(invalid("/cost", "missing `cost`")),
            _ => {}
        }
        if self.density.is_some() && self.domain_x.weights.is_some() {
            return Err(invalid("/domain_x/weights", "give either `density` or weights, not both"));
        }
        if self.domain_y.weights.is_some() {
            return Err(invalid("/domain_y/weights", "weights apply to types only"));
        }
        if let Some(t) = &self.table {
            if let Some(k) = t.payoff.iter().position(|r| r.len() != t.payoff[0].len()) {
                return Err(invalid(&format!("/table/payoff/{k}"), "rows must have equal length"));
            }
        }
        Ok(())
    }

    fn domain(cfg: &DomainConfig, dim: usize, key: &str) -> Result<DomainSpec, ConfigError> {
        let has_box = cfg.lower.is_some() || cfg.upper.is_some() || cfg.resolution.is_some();
        match (&cfg.points, has_box) {
            (Some(_), true) => Err(invalid(&format!("/{key}/points"), "give either points or lower/upper/resolution")),
            (Some(points), false) => {
                if let Some(k) = points.iter().position(|p| p.len() != dim) {
                    return Err(invalid(&format!("/{key}/points/{k}"), format!("expected {dim} coordinates")));
                }
                if let Some(r) = cfg.link_radius {
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(invalid(&format!("/{key}/link_radius"), "must be positive"));
                    }
                }
                Ok(DomainSpec::Points { points: points.clone(), link_radius: cfg.link_radius })
            }
            (None, _) => {
                if cfg.link_radius.is_some() {
                    return Err(invalid(&format!("/{key}/link_radius"), "only allowed with points"));
                }
                let field = |name: &str| invalid(&format!("/{key}/{name}"), "missing");
                let lower = cfg.lower.clone().ok_or_else(|| field("lower"))?;
                let upper = cfg.upper.clone().ok_or_else(|| field("upper"))?;
                let resolution = cfg.resolution.clone().ok_or_else(|| field("resolution"))?;
                if lower.len() != dim {
                    return Err(invalid(&format!("/{key}/lower"), format!("expected {dim} coordinates")));
                }
                GridBox::new(lower, upper, resolution)
                    .map(DomainSpec::Grid)
                    .map_err(|e| invalid(&format!("/{key}"), e.to_string()))
            }
        }
    }

    /// Builds the continuous-level problem.
    pub fn to_problem(&self) -> Result<ScreeningProblem, ConfigError> {
        self.validate()?;
        let Dims { m, n } = self.dims;
        let expr = |text: &str, key: &str| parse(text, m, n).map_err(|source| ConfigError::Expr { pointer: format!("/{key}"), source });
        let payoff = match (&self.b, &self.table) {
            (Some(b), _) => Payoff::Function(Arc::new(SymbolicPreference::new(expr(b, "b")?, m, n))),
            (None, Some(t)) => Payoff::Table(t.payoff.concat()),
            (None, None) => unreachable!("validated"),
        };
        let cost = match (&self.cost, self.table.as_ref().and_then(|t| t.costs.clone())) {
            (Some(c), _) => {
                let e = expr(c, "cost")?;
                if !e.depends_only_on_goods() {
                    return Err(invalid("/cost", "cost may only use y variables"));
                }
                Field::Expr(e)
            }
            (None, Some(t)) => Field::Table(t),
            (None, None) => unreachable!("validated"),
        };
        let density = match (&self.density, &self.domain_x.weights) {
            (_, Some(w)) => Field::Table(w.clone()),
            (Some(f), None) => {
                let e = expr(f, "density")?;
                if !e.depends_only_on_types() {
                    return Err(invalid("/density", "density may only use x variables"));
                }
                Field::Expr(e)
            }
            (None, None) => Field::Expr(crate::expr::Expr::constant(1.0)),
        };
        if self.domain_x.weights.is_some() && self.domain_x.points.is_none() {
            return Err(invalid("/domain_x/weights", "weights need a point list"));
        }
        self.tolerances.validate().map_err(|e| invalid("/tolerances", e.to_string()))?;
        Ok(ScreeningProblem {
            m,
            n,
            domain_x: Self::domain(&self.domain_x, m, "domain_x")?,
            domain_y: Self::domain(&self.domain_y, n, "domain_y")?,
            payoff,
            cost,
            density,
            null_good: self.null_good.clone(),
            tolerances: self.tolerances,
        })
    }

    /// Solver settings, with defaults where the config is silent.
    pub fn solve_options(&self) -> SolveOptions {
        let mut o = SolveOptions::default();
        if let Some(s) = &self.solver {
            if let Some(v) = s.price_step {
                o.step = v;
            }
            o.v_max = s.v_max;
            o.opt_tol = s.opt_tol;
            if let Some(v) = s.starts {
                o.starts = v;
            }
            if let Some(v) = s.seed {
                o.seed = v;
            }
            if let Some(v) = s.max_sweeps {
                o.max_sweeps = v;
            }
        }
        o
    }

    pub fn method(&self) -> Option<Method> {
        self.solver.as_ref().and_then(|s| s.method)
    }

    /// A tabulated config reproducing `d` exactly.
    pub fn from_discrete(d: &DiscreteProblem, name: Option<String>, solver: Option<SolverConfig>) -> Self {
        let link = |t: &Topology| match t {
            Topology::Scattered { link_radius } => Some(*link_radius),
            _ => None,
        };
        ProblemConfig {
            name,
            dims: Dims { m: d.types.dim(), n: d.goods.dim() },
            domain_x: DomainConfig {
                points: Some(d.types.to_vecs()),
                weights: Some(d.weights.clone()),
                link_radius: link(d.types.topology()),
                ..DomainConfig::default()
            },
            domain_y: DomainConfig {
                points: Some(d.goods.to_vecs()),
                link_radius: link(d.goods.topology()),
                ..DomainConfig::default()
            },
            b: None,
            cost: None,
            density: None,
            null_good: d.goods.point(d.phi).to_vec(),
            tolerances: d.tolerances,
            solver,
            table: Some(TableConfig {
                payoff: (0..d.n_types()).map(|i| d.row(i).to_vec()).collect(),
                costs: Some(d.costs.clone()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in BUILTINS {
            let cfg = ProblemConfig::builtin(name).unwrap();
            cfg.to_problem().unwrap();
        }
    }

    #[test]
    fn unknown_key_has_a_pointer() {
        let text = builtin("example-3-3").unwrap().replace("\"resolution\"", "\"resolutoin\"");
        let e = ProblemConfig::from_json(&text).unwrap_err();
        assert_eq!(e.pointer(), Some("/domain_x/resolutoin"));
        let text = builtin("example-3-3").unwrap().replace("\"price_step\": 1e-4", "\"price_step\": \"fine\"");
        let e = ProblemConfig::from_json(&text).unwrap_err();
        assert_eq!(e.pointer(), Some("/solver/price_step"));
    }

    #[test]
    fn bad_expression_points_at_its_key() {
        let text = builtin("example-3-3").unwrap().replace("y1^2", "y2^2");
        let e = ProblemConfig::from_json(&text).unwrap().to_problem().unwrap_err();
        assert_eq!(e.pointer(), Some("/cost"));
    }
}
