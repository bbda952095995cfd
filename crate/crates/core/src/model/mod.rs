//! Algebraic model representation: variables, linear expressions,
//! tagged constraints and named objectives.

mod expr;
mod gadgets;
pub mod lp;

pub use expr::LinExpr;
pub use gadgets::{linearize_abs, linearize_min};

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Build an index tuple from anything displayable.
///
/// ```
/// let k = vaxopt::ix!["D1", 3];
/// assert_eq!(k, vec!["D1".to_string(), "3".to_string()]);
/// ```
#[macro_export]
macro_rules! ix {
    () => { Vec::<String>::new() };
    ($($x:expr),+ $(,)?) => { vec![$($x.to_string()),+] };
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable {0} is already registered")]
    Duplicate(String),
    #[error("variable {name}: lower bound {lo} exceeds upper bound {hi}")]
    Bounds { name: String, lo: f64, hi: f64 },
    #[error("variable {name} registered as {existing:?}, requested {requested:?}")]
    DomainMismatch {
        name: String,
        existing: Domain,
        requested: Domain,
    },
    #[error("constraint tag {0} is not unique")]
    DuplicateTag(String),
    #[error("objective {name} already registered with sense {existing:?}")]
    ObjectiveSense { name: String, existing: ObjSense },
    #[error("big-M must be positive, got {0}")]
    BigM(f64),
    #[error("variable family {family} is used with conflicting stage tags ({detail})")]
    ConflictingStage { family: String, detail: String },
    #[error("unknown variable {0}")]
    UnknownVar(String),
    #[error("{0}")]
    Other(String),
}

/// Failure while appending a formulation to a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("missing parameter {0}")]
    Missing(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("composition error: {0}")]
    Composition(String),
}

/// Tags of the constraints a builder added.
pub type BuildResult = Result<Vec<String>, BuildError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Continuous,
    Integer,
    Binary,
}

impl Domain {
    pub fn is_integral(self) -> bool {
        !matches!(self, Domain::Continuous)
    }
}

/// Handle into a model's variable registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub family: String,
    pub indices: Vec<String>,
    pub domain: Domain,
    pub lo: f64,
    pub hi: f64,
}

impl VarInfo {
    /// Display name, e.g. `x_md[M1,D1,P1,3]`.
    pub fn name(&self) -> String {
        if self.indices.is_empty() {
            self.family.clone()
        } else {
            format!("{}[{}]", self.family, self.indices.join(","))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Constant-free left-hand side.
    pub lhs: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl Constraint {
    /// Amount by which `values` violate the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.lhs.eval(values);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub name: String,
    pub sense: ObjSense,
    pub expr: LinExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
struct ScenarioScope {
    id: String,
    weight: f64,
}

/// Build a constraint tag `builder.anchor[k=v,...]`.
pub fn tag(builder: &str, anchor: &str, keys: &[(&str, &dyn fmt::Display)]) -> String {
    let mut s = format!("{builder}.{anchor}");
    if !keys.is_empty() {
        s.push('[');
        for (n, (k, v)) in keys.iter().enumerate() {
            if n > 0 {
                s.push(',');
            }
            s.push_str(&format!("{k}={v}"));
        }
        s.push(']');
    }
    s
}

/// Compare index tuples with numeric components ordered numerically.
pub fn cmp_indices(a: &[String], b: &[String]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = match (x.parse::<i64>(), y.parse::<i64>()) {
            (Ok(p), Ok(q)) => p.cmp(&q),
            _ => x.cmp(y),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, Default)]
pub struct Model {
    vars: Vec<VarInfo>,
    lookup: HashMap<(String, Vec<String>), VarId>,
    constraints: Vec<Constraint>,
    tags: HashSet<String>,
    objectives: Vec<Objective>,
    /// Objectives turned into constraints by scalarization, kept for reporting.
    demoted: Vec<Objective>,
    pub metadata: BTreeMap<String, String>,
    scope: Option<ScenarioScope>,
    family_stage: HashMap<String, Stage>,
    scenario_objectives: BTreeMap<String, BTreeMap<String, LinExpr>>,
    aux_counter: HashMap<String, usize>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var_info(&self, v: VarId) -> &VarInfo {
        &self.vars[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn demoted_objectives(&self) -> &[Objective] {
        &self.demoted
    }

    pub fn objective(&self, name: &str) -> Option<&Objective> {
        self.objectives.iter().find(|o| o.name == name)
    }

    fn scoped_indices(&self, family: &str, indices: Vec<String>) -> Vec<String> {
        match (&self.scope, self.family_stage.get(family)) {
            (Some(_), Some(Stage::First)) => indices,
            (Some(sc), _) => {
                let mut v = indices;
                v.push(sc.id.clone());
                v
            }
            (None, _) => indices,
        }
    }

    /// Register a new variable.
    pub fn add_var(
        &mut self,
        family: &str,
        indices: Vec<String>,
        domain: Domain,
        lo: f64,
        hi: f64,
    ) -> Result<VarId, ModelError> {
        let stage = if self.scope.is_some() {
            Stage::Second
        } else {
            Stage::First
        };
        if let Some(&s) = self.family_stage.get(family) {
            if s != stage {
                return Err(ModelError::ConflictingStage {
                    family: family.to_string(),
                    detail: format!("new member {:?} created in {:?} stage", indices, stage),
                });
            }
        }
        let indices = self.scoped_indices(family, indices);
        let id = self.register(family, indices, domain, lo, hi)?;
        self.family_stage.insert(family.to_string(), stage);
        Ok(id)
    }

    fn register(
        &mut self,
        family: &str,
        indices: Vec<String>,
        domain: Domain,
        lo: f64,
        hi: f64,
    ) -> Result<VarId, ModelError> {
        let (lo, hi) = match domain {
            Domain::Binary => (lo.max(0.0), hi.min(1.0)),
            _ => (lo, hi),
        };
        let info = VarInfo {
            family: family.to_string(),
            indices,
            domain,
            lo,
            hi,
        };
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(ModelError::Bounds {
                name: info.name(),
                lo,
                hi,
            });
        }
        let key = (info.family.clone(), info.indices.clone());
        if self.lookup.contains_key(&key) {
            return Err(ModelError::Duplicate(info.name()));
        }
        let id = VarId(self.vars.len());
        self.vars.push(info);
        self.lookup.insert(key, id);
        Ok(id)
    }

    /// Look up a registered variable (scenario-aware).
    pub fn var(&self, family: &str, indices: &[String]) -> Option<VarId> {
        let idx = self.scoped_indices(family, indices.to_vec());
        self.lookup.get(&(family.to_string(), idx)).copied()
    }

    /// Look up, or register when absent. Shared families across builders use this.
    pub fn var_or_add(
        &mut self,
        family: &str,
        indices: Vec<String>,
        domain: Domain,
        lo: f64,
        hi: f64,
    ) -> Result<VarId, ModelError> {
        if let Some(v) = self.var(family, &indices) {
            let existing = self.vars[v.0].domain;
            if existing != domain {
                return Err(ModelError::DomainMismatch {
                    name: self.vars[v.0].name(),
                    existing,
                    requested: domain,
                });
            }
            return Ok(v);
        }
        self.add_var(family, indices, domain, lo, hi)
    }

    /// Fresh auxiliary variable with an automatically numbered index.
    /// Auxiliaries carry no stage tag.
    pub fn add_aux(&mut self, family: &str, domain: Domain, lo: f64, hi: f64) -> Result<VarId, ModelError> {
        loop {
            let n = self.aux_counter.entry(family.to_string()).or_insert(0);
            *n += 1;
            let idx = vec![n.to_string()];
            if !self.lookup.contains_key(&(family.to_string(), idx.clone())) {
                return self.register(family, idx, domain, lo, hi);
            }
        }
    }

    pub fn has_family(&self, family: &str) -> bool {
        self.vars.iter().any(|v| v.family == family)
    }

    /// Variables of a family in registry order.
    pub fn family_vars(&self, family: &str) -> Vec<VarId> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.family == family)
            .map(|(i, _)| VarId(i))
            .collect()
    }

    pub fn set_bounds(&mut self, v: VarId, lo: f64, hi: f64) -> Result<(), ModelError> {
        if lo > hi {
            return Err(ModelError::Bounds {
                name: self.vars[v.0].name(),
                lo,
                hi,
            });
        }
        self.vars[v.0].lo = lo;
        self.vars[v.0].hi = hi;
        Ok(())
    }

    pub fn set_domain(&mut self, v: VarId, domain: Domain) {
        self.vars[v.0].domain = domain;
        if domain == Domain::Binary {
            self.vars[v.0].lo = self.vars[v.0].lo.max(0.0);
            self.vars[v.0].hi = self.vars[v.0].hi.min(1.0);
        }
    }

    fn scoped_tag(&self, tag: String) -> String {
        match &self.scope {
            None => tag,
            Some(sc) => {
                if let Some(stripped) = tag.strip_suffix(']') {
                    format!("{stripped},scenario={}]", sc.id)
                } else {
                    format!("{tag}[scenario={}]", sc.id)
                }
            }
        }
    }

    /// Add `lhs sense rhs`; any constant in `lhs` is moved to the right.
    pub fn add_constraint(
        &mut self,
        lhs: LinExpr,
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> Result<String, ModelError> {
        let tag = self.scoped_tag(tag.into());
        if !self.tags.insert(tag.clone()) {
            return Err(ModelError::DuplicateTag(tag));
        }
        let rhs = rhs - lhs.constant();
        let lhs = lhs.without_constant();
        for (&v, _) in lhs.terms() {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVar(format!("#{}", v.0)));
            }
        }
        self.constraints.push(Constraint {
            lhs,
            sense,
            rhs,
            tag: tag.clone(),
        });
        Ok(tag)
    }

    /// Replace or create an objective.
    pub fn set_objective(&mut self, name: &str, sense: ObjSense, expr: LinExpr) {
        if let Some(o) = self.objectives.iter_mut().find(|o| o.name == name) {
            o.sense = sense;
            o.expr = expr;
        } else {
            self.objectives.push(Objective {
                name: name.to_string(),
                sense,
                expr,
            });
        }
    }

    /// Accumulate terms into an objective. Inside a scenario scope the terms
    /// are weighted by the scenario probability.
    pub fn add_objective_terms(
        &mut self,
        name: &str,
        sense: ObjSense,
        expr: LinExpr,
    ) -> Result<(), ModelError> {
        let weighted = match &self.scope {
            Some(sc) => {
                let per = self
                    .scenario_objectives
                    .entry(name.to_string())
                    .or_default()
                    .entry(sc.id.clone())
                    .or_default();
                per.add_assign_expr(&expr);
                expr.scaled(sc.weight)
            }
            None => expr,
        };
        if let Some(o) = self.objectives.iter_mut().find(|o| o.name == name) {
            if o.sense != sense {
                return Err(ModelError::ObjectiveSense {
                    name: name.to_string(),
                    existing: o.sense,
                });
            }
            o.expr.add_assign_expr(&weighted);
        } else {
            self.objectives.push(Objective {
                name: name.to_string(),
                sense,
                expr: weighted,
            });
        }
        Ok(())
    }

    pub fn remove_objective(&mut self, name: &str) -> Option<Objective> {
        let pos = self.objectives.iter().position(|o| o.name == name)?;
        Some(self.objectives.remove(pos))
    }

    pub(crate) fn push_demoted(&mut self, o: Objective) {
        self.demoted.push(o);
    }

    /// Enter a scenario scope: new non-first-stage variables get the scenario
    /// id appended to their index tuple, tags get a `scenario=` key, and
    /// objective terms are weighted by `weight`.
    pub fn enter_scenario(&mut self, id: &str, weight: f64) {
        self.scope = Some(ScenarioScope {
            id: id.to_string(),
            weight,
        });
    }

    pub fn leave_scenario(&mut self) {
        self.scope = None;
    }

    pub fn current_scenario(&self) -> Option<&str> {
        self.scope.as_ref().map(|s| s.id.as_str())
    }

    pub fn family_stage(&self, family: &str) -> Option<Stage> {
        self.family_stage.get(family).copied()
    }

    /// Unweighted objective terms added under each scenario scope.
    pub fn scenario_objectives(&self, name: &str) -> Vec<(String, LinExpr)> {
        self.scenario_objectives
            .get(name)
            .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default()
    }

    pub fn has_tag_prefix(&self, prefix: &str) -> bool {
        self.constraints.iter().any(|c| c.tag.starts_with(prefix))
    }

    pub fn constraints_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.constraints.iter().filter(move |c| c.tag.starts_with(prefix))
    }

    /// Terms of an expression ordered by (family, indices).
    pub fn canonical_terms(&self, e: &LinExpr) -> Vec<(VarId, f64)> {
        let mut t: Vec<(VarId, f64)> = e.terms().map(|(&v, &c)| (v, c)).collect();
        t.sort_by(|a, b| self.cmp_vars(a.0, b.0));
        t
    }

    pub fn cmp_vars(&self, a: VarId, b: VarId) -> Ordering {
        let x = &self.vars[a.0];
        let y = &self.vars[b.0];
        x.family
            .cmp(&y.family)
            .then_with(|| cmp_indices(&x.indices, &y.indices))
            .then(a.cmp(&b))
    }

    /// Human-readable rendering of an expression.
    pub fn render(&self, e: &LinExpr) -> String {
        let mut s = String::new();
        for (n, (v, c)) in self.canonical_terms(e).into_iter().enumerate() {
            if n > 0 {
                s.push_str(if c < 0.0 { " - " } else { " + " });
            } else if c < 0.0 {
                s.push('-');
            }
            let a = c.abs();
            if a != 1.0 {
                s.push_str(&format!("{a} "));
            }
            s.push_str(&self.vars[v.0].name());
        }
        if e.constant() != 0.0 || s.is_empty() {
            if s.is_empty() {
                s = format!("{}", e.constant());
            } else {
                s.push_str(&format!(" + {}", e.constant()));
            }
        }
        s
    }
}
