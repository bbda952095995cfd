//! Exact desk-scale solving: LP simplex, branch-and-bound, an exhaustive
//! enumeration oracle, and residual auditing.

mod audit;
mod brute;
mod milp;
mod report;
pub(crate) mod simplex;

pub use audit::{audit, conservation_summary, AuditReport, ConservationSummary, ConstraintResidual, TagSummary};
pub use brute::{brute_force_oracle, SearchBox, MAX_BRUTE_POINTS, MAX_BRUTE_VARS};
pub use milp::{solve_milp, MilpOptions};
pub use report::{read_solution_csv, solution_csv, write_solution_csv};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{Domain, Model, ObjSense, VarId};
use simplex::{LpProblem, LpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("model has {0} objectives; scalarize to one before solving")]
    MultipleObjectives(usize),
    #[error("brute force needs integer variables only; {0} is continuous")]
    ContinuousVariable(String),
    #[error("brute force needs a finite range for {0}")]
    UnboundedRange(String),
    #[error("brute force search space of {0:.3e} points exceeds the capacity of {1:.0e}")]
    TooLarge(f64, f64),
    #[error("brute force supports at most {1} integer variables, model has {0}")]
    TooManyVariables(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration_limit",
            Status::Numerical => "numerical",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<LpStatus> for Status {
    fn from(s: LpStatus) -> Self {
        match s {
            LpStatus::Optimal => Status::Optimal,
            LpStatus::Infeasible => Status::Infeasible,
            LpStatus::Unbounded => Status::Unbounded,
            LpStatus::IterationLimit => Status::IterationLimit,
            LpStatus::Numerical => Status::Numerical,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Residuals {
    pub max_constraint: f64,
    pub max_integrality: f64,
    pub max_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Values indexed by registry position.
    pub values: Vec<f64>,
    pub objective_name: Option<String>,
    /// Value of the solved objective (including its constant).
    pub objective: Option<f64>,
    /// Every registered and demoted objective evaluated at `values`.
    pub objective_values: BTreeMap<String, f64>,
    /// Best proven bound in the objective's own sense.
    pub bound: f64,
    /// Relative gap between objective and bound.
    pub gap: f64,
    pub nodes: usize,
    pub pivots: usize,
    pub residuals: Residuals,
}

impl Solution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// Value of a registered variable by family and indices (0 when absent).
    pub fn get(&self, model: &Model, family: &str, indices: &[String]) -> f64 {
        model.var(family, indices).map(|v| self.values[v.0]).unwrap_or(0.0)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub(crate) fn empty(model: &Model, status: Status) -> Self {
        Solution {
            status,
            values: vec![0.0; model.num_vars()],
            objective_name: model.objectives().first().map(|o| o.name.clone()),
            objective: None,
            objective_values: BTreeMap::new(),
            bound: f64::NAN,
            gap: f64::NAN,
            nodes: 0,
            pivots: 0,
            residuals: Residuals::default(),
        }
    }

    /// Fill objective values and residuals from `values`.
    pub(crate) fn finish(&mut self, model: &Model) {
        for o in model.objectives().iter().chain(model.demoted_objectives()) {
            self.objective_values.insert(o.name.clone(), o.expr.eval(&self.values));
        }
        if let Some(o) = model.objectives().first() {
            self.objective = Some(o.expr.eval(&self.values));
        } else if self.status == Status::Optimal {
            self.objective = Some(0.0);
        }
        self.residuals = residuals(model, &self.values);
    }
}

pub fn residuals(model: &Model, values: &[f64]) -> Residuals {
    let mut r = Residuals::default();
    for c in model.constraints() {
        r.max_constraint = r.max_constraint.max(c.violation(values));
    }
    for (i, v) in model.vars().iter().enumerate() {
        let x = values[i];
        r.max_bound = r.max_bound.max((v.lo - x).max(0.0)).max((x - v.hi).max(0.0));
        if v.domain.is_integral() {
            r.max_integrality = r.max_integrality.max((x - x.round()).abs());
        }
    }
    r
}

/// Internal minimization form of a model: costs negated for maximization.
pub(crate) struct Prepared {
    pub lp: LpProblem,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// +1 for minimize, −1 for maximize.
    pub sign: f64,
    pub constant: f64,
}

pub(crate) fn prepare(model: &Model) -> Result<Prepared, SolveError> {
    if model.objectives().len() > 1 {
        return Err(SolveError::MultipleObjectives(model.objectives().len()));
    }
    let n = model.num_vars();
    let mut cost = vec![0.0; n];
    let (sign, constant) = match model.objectives().first() {
        Some(o) => {
            let sign = if o.sense == ObjSense::Maximize { -1.0 } else { 1.0 };
            for (&v, &c) in o.expr.terms() {
                cost[v.0] = sign * c;
            }
            (sign, o.expr.constant())
        }
        None => (1.0, 0.0),
    };
    let mut rows = Vec::with_capacity(model.constraints().len());
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    for c in model.constraints() {
        rows.push(c.lhs.terms().map(|(&v, &a)| (v.0, a)).collect());
        senses.push(c.sense);
        rhs.push(c.rhs);
    }
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for v in model.vars() {
        if v.domain.is_integral() {
            lo.push(if v.lo.is_finite() { (v.lo - 1e-9).ceil() } else { v.lo });
            hi.push(if v.hi.is_finite() { (v.hi + 1e-9).floor() } else { v.hi });
        } else {
            lo.push(v.lo);
            hi.push(v.hi);
        }
    }
    Ok(Prepared {
        lp: LpProblem {
            n,
            rows,
            senses,
            rhs,
            cost,
        },
        lo,
        hi,
        sign,
        constant,
    })
}

pub(crate) const DEFAULT_MAX_PIVOTS: usize = 200_000;

/// Solve the LP relaxation (integrality ignored) with the primal simplex.
pub fn solve_lp(model: &Model) -> Result<Solution, SolveError> {
    let p = prepare(model)?;
    let res = simplex::solve(&p.lp, &p.lo, &p.hi, DEFAULT_MAX_PIVOTS);
    if res.bland_engaged {
        log::debug!("simplex switched to Bland's rule after degenerate pivots");
    }
    let mut sol = Solution::empty(model, res.status.into());
    sol.pivots = res.pivots;
    if res.status == LpStatus::Optimal {
        sol.values = res.x;
        sol.bound = p.sign * res.dual_bound + p.constant;
        sol.finish(model);
        let obj = sol.objective.unwrap_or(0.0);
        sol.gap = (obj - sol.bound).abs() / obj.abs().max(1.0);
    }
    Ok(sol)
}

/// True when every variable is continuous.
pub fn is_continuous(model: &Model) -> bool {
    model.vars().iter().all(|v| v.domain == Domain::Continuous)
}

/// Solve with the LP simplex when the model is continuous, otherwise with
/// branch-and-bound using default options.
pub fn solve(model: &Model) -> Result<Solution, SolveError> {
    if is_continuous(model) {
        solve_lp(model)
    } else {
        solve_milp(model, &MilpOptions::default())
    }
}
