//! Worst-case expectation over a finitely supported moment ambiguity set.

use std::collections::BTreeMap;

use thiserror::Error;

use super::tssp::{first_stage_vars, fix_first_stage};
use crate::data::Instance;
use crate::model::{tag, BuildError, Domain, LinExpr, Model, ModelError, ObjSense, Sense, VarId};
use crate::solve::{is_continuous, solve_lp, solve_milp, MilpOptions, Solution, SolveError, Status};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DroError {
    #[error("ambiguity set is empty: the moment bounds admit no distribution on the support")]
    EmptyAmbiguity,
    #[error("invalid ambiguity set: {0}")]
    Invalid(String),
    #[error("no first-stage decision has a feasible recourse in every scenario")]
    Infeasible,
    #[error("{0}")]
    Unsupported(String),
    #[error("subproblem ended with status {0}")]
    Status(Status),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl From<ModelError> for DroError {
    fn from(e: ModelError) -> Self {
        DroError::Build(e.into())
    }
}

/// Distributions `p ≥ 0`, `Σp = 1` on the scenario support with
/// `μ − ε^μ ≤ Σ p d ≤ μ + ε^μ` and `σ·ε̲ ≤ Σ p d² ≤ σ·ε̄` for every key.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    pub scenarios: Vec<String>,
    /// Nominal probabilities, used to split first-stage cost out of the
    /// extensive-form objective.
    pub nominal: Vec<f64>,
    /// Moment keys, usually `(vc, t)`.
    pub keys: Vec<Vec<String>>,
    /// `support[ω][key]`.
    pub support: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eps_mu: f64,
    pub eps_sigma_lo: f64,
    pub eps_sigma_hi: f64,
}

impl AmbiguitySet {
    pub fn validate(&self) -> Result<(), DroError> {
        let n = self.scenarios.len();
        if n == 0 {
            return Err(DroError::Invalid("no scenarios in the support".into()));
        }
        if self.nominal.len() != n || self.support.len() != n {
            return Err(DroError::Invalid("support and nominal probabilities must have one entry per scenario".into()));
        }
        let k = self.keys.len();
        if self.mean.len() != k || self.sigma.len() != k || self.support.iter().any(|s| s.len() != k) {
            return Err(DroError::Invalid("moment vectors must have one entry per key".into()));
        }
        if !(self.eps_mu >= 0.0) {
            return Err(DroError::Invalid(format!("ε^μ must be nonnegative, got {}", self.eps_mu)));
        }
        if !(0.0 <= self.eps_sigma_lo && self.eps_sigma_lo <= 1.0 && 1.0 <= self.eps_sigma_hi) {
            return Err(DroError::Invalid(format!(
                "need 0 ≤ ε̲^σ ≤ 1 ≤ ε̄^σ, got {} and {}",
                self.eps_sigma_lo, self.eps_sigma_hi
            )));
        }
        Ok(())
    }

    /// Support from each scenario's `Σ_p d_kpt`, moments from the
    /// instance's `ambiguity` block (nominal moments where absent).
    pub fn from_instance(inst: &Instance) -> Result<Self, DroError> {
        let spec = inst
            .ambiguity
            .as_ref()
            .ok_or_else(|| DroError::Build(BuildError::Missing("ambiguity".into())))?;
        let probs = super::scenario_probabilities(inst)?;
        let per: Vec<Instance> = inst.scenarios.iter().map(|s| inst.for_scenario(s)).collect();
        let demand = |si: &Instance, key: &[String]| -> f64 {
            let t: usize = key[1].parse().unwrap_or(0);
            si.vaccines.iter().map(|p| si.demand_kpt(&key[0], &p.id, t)).sum()
        };
        let mut keys: Vec<Vec<String>> = spec.mean.iter().map(|(k, _)| k.clone()).collect();
        for (k, _) in spec.sigma.iter() {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
        if keys.is_empty() {
            for k in &inst.vcs {
                for t in inst.periods() {
                    let key = vec![k.clone(), t.to_string()];
                    if per.iter().any(|si| demand(si, &key) != 0.0) {
                        keys.push(key);
                    }
                }
            }
        }
        keys.sort();
        for key in &keys {
            if key.len() != 2 {
                return Err(DroError::Invalid(format!("moment key {key:?} is not (vc, t)")));
            }
        }
        let support: Vec<Vec<f64>> = per.iter().map(|si| keys.iter().map(|k| demand(si, k)).collect()).collect();
        let nominal: Vec<f64> = probs.iter().map(|(_, p)| *p).collect();
        let mut mean = vec![];
        let mut sigma = vec![];
        for (i, key) in keys.iter().enumerate() {
            let idx: Vec<&str> = key.iter().map(String::as_str).collect();
            let m1: f64 = (0..per.len()).map(|w| nominal[w] * support[w][i]).sum();
            let m2: f64 = (0..per.len()).map(|w| nominal[w] * support[w][i] * support[w][i]).sum();
            mean.push(spec.mean.get(&idx).unwrap_or(m1));
            sigma.push(spec.sigma.get(&idx).unwrap_or(m2));
        }
        let set = AmbiguitySet {
            scenarios: probs.into_iter().map(|(id, _)| id).collect(),
            nominal,
            keys,
            support,
            mean,
            sigma,
            eps_mu: spec.eps_mu,
            eps_sigma_lo: spec.eps_sigma_lo,
            eps_sigma_hi: spec.eps_sigma_hi,
        };
        set.validate()?;
        Ok(set)
    }

    /// Membership test with an absolute tolerance.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.scenarios.len() || p.iter().any(|&x| x < -tol) {
            return false;
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > tol {
            return false;
        }
        (0..self.keys.len()).all(|i| {
            let m1: f64 = p.iter().zip(&self.support).map(|(w, s)| w * s[i]).sum();
            let m2: f64 = p.iter().zip(&self.support).map(|(w, s)| w * s[i] * s[i]).sum();
            let (lo1, hi1) = (self.mean[i] - self.eps_mu, self.mean[i] + self.eps_mu);
            let (lo2, hi2) = (self.sigma[i] * self.eps_sigma_lo, self.sigma[i] * self.eps_sigma_hi);
            m1 >= lo1 - tol && m1 <= hi1 + tol && m2 >= lo2 - tol && m2 <= hi2 + tol
        })
    }
}

/// `max_{p∈ℬ} Σ p_ω·costs_ω`, returning the maximizing `p` and the value.
pub fn worst_case_distribution(costs: &[f64], set: &AmbiguitySet) -> Result<(Vec<f64>, f64), DroError> {
    set.validate()?;
    if costs.len() != set.scenarios.len() {
        return Err(DroError::Invalid(format!(
            "{} costs for {} scenarios",
            costs.len(),
            set.scenarios.len()
        )));
    }
    let mut m = Model::new();
    let p: Vec<VarId> = set
        .scenarios
        .iter()
        .map(|w| m.add_var("p", vec![w.clone()], Domain::Continuous, 0.0, 1.0))
        .collect::<Result<_, _>>()?;
    m.add_constraint(LinExpr::sum(p.iter().copied()), Sense::Eq, 1.0, "uncertainty.dro.simplex")?;
    for (i, key) in set.keys.iter().enumerate() {
        let label = key.join("|");
        let mut first = LinExpr::new();
        let mut second = LinExpr::new();
        for (w, &v) in p.iter().enumerate() {
            let d = set.support[w][i];
            first.add_term(v, d);
            second.add_term(v, d * d);
        }
        let rows = [
            (first.clone(), Sense::Ge, set.mean[i] - set.eps_mu, "mean_lo"),
            (first, Sense::Le, set.mean[i] + set.eps_mu, "mean_hi"),
            (second.clone(), Sense::Ge, set.sigma[i] * set.eps_sigma_lo, "second_lo"),
            (second, Sense::Le, set.sigma[i] * set.eps_sigma_hi, "second_hi"),
        ];
        for (e, sense, rhs, anchor) in rows {
            if e.is_empty() {
                let ok = match sense {
                    Sense::Ge => 0.0 >= rhs - 1e-12,
                    Sense::Le => 0.0 <= rhs + 1e-12,
                    Sense::Eq => rhs.abs() <= 1e-12,
                };
                if !ok {
                    return Err(DroError::EmptyAmbiguity);
                }
                continue;
            }
            m.add_constraint(e, sense, rhs, tag("uncertainty.dro", anchor, &[("key", &label)]))?;
        }
    }
    let mut obj = LinExpr::new();
    for (&v, &c) in p.iter().zip(costs) {
        obj.add_term(v, c);
    }
    m.set_objective("worst_case", ObjSense::Maximize, obj);
    let sol = solve_lp(&m)?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(DroError::EmptyAmbiguity),
        s => return Err(DroError::Status(s)),
    }
    let probs: Vec<f64> = p.iter().map(|&v| sol.value(v).clamp(0.0, 1.0)).collect();
    let value = probs.iter().zip(costs).map(|(a, b)| a * b).sum();
    Ok((probs, value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DroMode {
    /// Enumerate when the first-stage lattice is small enough, otherwise
    /// cut.
    Auto,
    Enumerate,
    CuttingPlane,
}

#[derive(Debug, Clone)]
pub struct DroOptions {
    pub mode: DroMode,
    /// Absolute-or-relative bound gap for the cutting-plane loop.
    pub tol: f64,
    pub max_iterations: usize,
    pub max_lattice: usize,
    pub milp: MilpOptions,
}

impl Default for DroOptions {
    fn default() -> Self {
        DroOptions {
            mode: DroMode::Auto,
            tol: 1e-6,
            max_iterations: 200,
            max_lattice: 10_000,
            milp: MilpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroResult {
    /// First-stage values keyed by variable name.
    pub first_stage: BTreeMap<String, f64>,
    pub worst_p: Vec<(String, f64)>,
    /// First-stage cost plus worst-case expected recourse.
    pub value: f64,
    pub first_stage_cost: f64,
    /// Optimal recourse cost per scenario at the chosen first stage.
    pub recourse: Vec<f64>,
    pub mode: DroMode,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

struct Problem<'a> {
    base: Model,
    first: Vec<VarId>,
    first_cost: LinExpr,
    scen: Vec<LinExpr>,
    set: &'a AmbiguitySet,
    opts: &'a DroOptions,
}

impl Problem<'_> {
    fn run(&self, m: &Model) -> Result<Solution, DroError> {
        let sol = if is_continuous(m) {
            solve_lp(m)?
        } else {
            solve_milp(m, &self.opts.milp)?
        };
        Ok(sol)
    }

    /// Recourse cost per scenario with the first stage fixed; `None` when
    /// some scenario has no feasible recourse.
    fn recourse(&self, x: &[f64]) -> Result<Option<Vec<f64>>, DroError> {
        let fixed: Vec<(VarId, f64)> = self.first.iter().copied().zip(x.iter().copied()).collect();
        let mut fm = fix_first_stage(&self.base, &fixed)?;
        let mut out = vec![];
        for e in &self.scen {
            fm.set_objective("recourse", ObjSense::Minimize, e.clone());
            let sol = self.run(&fm)?;
            match sol.status {
                Status::Optimal => out.push(sol.objective.unwrap_or(0.0)),
                Status::Infeasible => return Ok(None),
                s => return Err(DroError::Status(s)),
            }
        }
        Ok(Some(out))
    }

    fn cost(&self, x: &[f64]) -> f64 {
        let mut vals = vec![0.0; self.base.num_vars()];
        for (&v, &xv) in self.first.iter().zip(x) {
            vals[v.0] = xv;
        }
        self.first_cost.eval(&vals)
    }
}

/// Solve `min_x c·x + max_{p∈ℬ} Σ p_ω Q(x, ω)` for an extensive form built
/// with [`super::build_tssp_extensive`], whose minimized objective
/// `objective` recorded per-scenario terms.
///
/// The inner maximization is an LP over `p`. The outer problem either
/// enumerates the integer first-stage lattice or runs a cutting-plane loop
/// on an epigraph master holding all recourse copies; the latter needs
/// continuous recourse.
pub fn dro_worst_case(m: &Model, objective: &str, set: &AmbiguitySet, opts: &DroOptions) -> Result<DroResult, DroError> {
    set.validate()?;
    let obj = m
        .objective(objective)
        .ok_or_else(|| DroError::Build(BuildError::Missing(format!("objective {objective}"))))?;
    if obj.sense != ObjSense::Minimize {
        return Err(DroError::Unsupported(format!("objective {objective} must be minimized")));
    }
    let recorded = m.scenario_objectives(objective);
    let scen: Vec<LinExpr> = set
        .scenarios
        .iter()
        .map(|id| recorded.iter().find(|(s, _)| s == id).map(|(_, e)| e.clone()).unwrap_or_default())
        .collect();
    let first = first_stage_vars(m);
    let mut split = obj.expr.clone();
    for (e, p) in scen.iter().zip(&set.nominal) {
        split.add_scaled(e, -p);
    }
    let mut first_cost = LinExpr::constant_expr(split.constant());
    for &v in &first {
        first_cost.add_term(v, split.coef(v));
    }
    let mut base = m.clone();
    let names: Vec<String> = base.objectives().iter().map(|o| o.name.clone()).collect();
    for n in names {
        base.remove_objective(&n);
    }
    let prob = Problem {
        base,
        first,
        first_cost,
        scen,
        set,
        opts,
    };

    let lattice = lattice_size(m, &prob.first);
    let recourse_continuous = (0..m.num_vars())
        .map(VarId)
        .filter(|v| !prob.first.contains(v))
        .all(|v| m.var_info(v).domain == Domain::Continuous);
    let mode = match opts.mode {
        DroMode::Auto => match lattice {
            Some(n) if n <= opts.max_lattice as f64 => DroMode::Enumerate,
            _ => DroMode::CuttingPlane,
        },
        other => other,
    };
    match mode {
        DroMode::Enumerate => {
            match lattice {
                Some(n) if n <= opts.max_lattice as f64 => {}
                Some(n) => {
                    return Err(DroError::Unsupported(format!(
                        "first-stage lattice has {n:.0} points, above the enumeration limit {}",
                        opts.max_lattice
                    )))
                }
                None => {
                    return Err(DroError::Unsupported(
                        "enumeration needs integer first-stage variables with finite bounds".into(),
                    ))
                }
            }
            enumerate(m, &prob)
        }
        _ => {
            if !recourse_continuous {
                return Err(DroError::Unsupported(
                    "cutting planes need continuous recourse; integer recourse needs an enumerable first stage".into(),
                ));
            }
            cutting_plane(m, objective, &prob)
        }
    }
}

fn lattice_size(m: &Model, first: &[VarId]) -> Option<f64> {
    let mut n = 1.0f64;
    for &v in first {
        let info = m.var_info(v);
        if info.domain == Domain::Continuous || !info.lo.is_finite() || !info.hi.is_finite() {
            return None;
        }
        n *= (info.hi.floor() - info.lo.ceil() + 1.0).max(0.0);
    }
    Some(n)
}

fn finish(prob: &Problem<'_>, x: &[f64], q: Vec<f64>, p: Vec<f64>, w: f64) -> DroResult {
    let c = prob.cost(x);
    DroResult {
        first_stage: prob
            .first
            .iter()
            .zip(x)
            .map(|(&v, &xv)| (prob.base.var_info(v).name(), xv))
            .collect(),
        worst_p: prob.set.scenarios.iter().cloned().zip(p).collect(),
        value: c + w,
        first_stage_cost: c,
        recourse: q,
        mode: DroMode::Enumerate,
        iterations: 0,
        gap: 0.0,
        converged: true,
    }
}

fn enumerate(m: &Model, prob: &Problem<'_>) -> Result<DroResult, DroError> {
    let lo: Vec<f64> = prob.first.iter().map(|&v| m.var_info(v).lo.ceil()).collect();
    let hi: Vec<f64> = prob.first.iter().map(|&v| m.var_info(v).hi.floor()).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return Err(DroError::Infeasible);
    }
    let mut x = lo.clone();
    let mut best: Option<DroResult> = None;
    let mut count = 0;
    loop {
        count += 1;
        if let Some(q) = prob.recourse(&x)? {
            let (p, w) = worst_case_distribution(&q, prob.set)?;
            let total = prob.cost(&x) + w;
            if best.as_ref().is_none_or(|b| total < b.value - 1e-12) {
                best = Some(finish(prob, &x, q, p, w));
            }
        }
        // odometer, last variable fastest
        let mut i = x.len();
        loop {
            if i == 0 {
                let mut r = best.ok_or(DroError::Infeasible)?;
                r.iterations = count;
                return Ok(r);
            }
            i -= 1;
            if x[i] < hi[i] {
                x[i] += 1.0;
                break;
            }
            x[i] = lo[i];
        }
    }
}

fn cutting_plane(m: &Model, objective: &str, prob: &Problem<'_>) -> Result<DroResult, DroError> {
    let start = prob.run(&{
        let mut nominal = m.clone();
        let names: Vec<String> = nominal.objectives().iter().map(|o| o.name.clone()).collect();
        for n in names.iter().filter(|n| *n != objective) {
            nominal.remove_objective(n);
        }
        nominal
    })?;
    if start.status != Status::Optimal {
        return Err(match start.status {
            Status::Infeasible => DroError::Infeasible,
            s => DroError::Status(s),
        });
    }
    let x0: Vec<f64> = prob.first.iter().map(|&v| start.value(v)).collect();
    let q0 = prob.recourse(&x0)?.ok_or(DroError::Infeasible)?;
    let (p0, w0) = worst_case_distribution(&q0, prob.set)?;
    let mut best = finish(prob, &x0, q0, p0.clone(), w0);
    best.mode = DroMode::CuttingPlane;

    let mut master = prob.base.clone();
    let theta = master.add_aux("theta_dro", Domain::Continuous, f64::NEG_INFINITY, f64::INFINITY)?;
    master.set_objective("dro", ObjSense::Minimize, prob.first_cost.clone() + LinExpr::from(theta));
    let mut cut_p = p0;
    let mut lb = f64::NEG_INFINITY;
    for it in 1..=prob.opts.max_iterations {
        let mut cut = LinExpr::from(theta);
        for (e, p) in prob.scen.iter().zip(&cut_p) {
            cut.add_scaled(e, -p);
        }
        master.add_constraint(cut, Sense::Ge, 0.0, tag("uncertainty.dro", "cut", &[("n", &it)]))?;
        let sol = prob.run(&master)?;
        if sol.status != Status::Optimal {
            return Err(DroError::Status(sol.status));
        }
        lb = lb.max(sol.objective.unwrap_or(f64::NEG_INFINITY));
        best.iterations = it;
        if best.value - lb <= prob.opts.tol * best.value.abs().max(1.0) {
            best.gap = (best.value - lb).max(0.0);
            return Ok(best);
        }
        let x: Vec<f64> = prob.first.iter().map(|&v| sol.value(v)).collect();
        let q = prob.recourse(&x)?.ok_or(DroError::Infeasible)?;
        let (p, w) = worst_case_distribution(&q, prob.set)?;
        let total = prob.cost(&x) + w;
        if total < best.value {
            let iterations = best.iterations;
            best = finish(prob, &x, q, p.clone(), w);
            best.mode = DroMode::CuttingPlane;
            best.iterations = iterations;
        }
        cut_p = p;
    }
    best.gap = (best.value - lb).max(0.0);
    best.converged = false;
    log::warn!(
        "distributionally robust loop stopped after {} iterations with gap {:.3e}",
        prob.opts.max_iterations,
        best.gap
    );
    Ok(best)
}
