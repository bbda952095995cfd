//! Extensive form of the two-stage stochastic program and its
//! mean-deviation robust counterpart.

use std::collections::BTreeSet;

use crate::data::Instance;
use crate::model::{linearize_abs, tag, BuildError, BuildResult, Domain, LinExpr, Model, ModelError, ObjSense, Stage, VarId};

/// A formulation builder run once (first stage) or once per scenario.
pub type StageBuilder<'a> = &'a dyn Fn(&mut Model, &Instance) -> BuildResult;

const PROB_TOL: f64 = 1e-9;

/// Scenario ids and probabilities, checked for normalization.
pub fn scenario_probabilities(inst: &Instance) -> Result<Vec<(String, f64)>, BuildError> {
    if inst.scenarios.is_empty() {
        return Err(BuildError::Missing("scenarios".into()));
    }
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for sc in &inst.scenarios {
        if !seen.insert(sc.id.as_str()) {
            return Err(BuildError::Invalid(format!("scenario id {} is repeated", sc.id)));
        }
        if !(sc.probability >= 0.0) || !sc.probability.is_finite() {
            return Err(BuildError::Invalid(format!("scenario {} has probability {}", sc.id, sc.probability)));
        }
        total += sc.probability;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(BuildError::Invalid(format!("scenario probabilities sum to {total}, expected 1")));
    }
    Ok(inst.scenarios.iter().map(|s| (s.id.clone(), s.probability)).collect())
}

/// One model holding the first-stage decisions once and a copy of every
/// second-stage block per scenario.
///
/// First-stage builders run on the base instance and fix the first-stage
/// families. Second-stage builders run inside each scenario scope on the
/// scenario's instance: their new variables are indexed by scenario, their
/// tags carry `scenario=`, and their objective terms are weighted by the
/// scenario probability. A second-stage builder that tries to create a new
/// member of a first-stage family fails with a stage conflict.
pub fn build_tssp_extensive(
    m: &mut Model,
    inst: &Instance,
    first: &[StageBuilder<'_>],
    second: &[StageBuilder<'_>],
) -> BuildResult {
    if m.current_scenario().is_some() {
        return Err(BuildError::Composition("extensive form cannot be nested in a scenario scope".into()));
    }
    let probs = scenario_probabilities(inst)?;
    let mut tags = vec![];
    for b in first {
        tags.extend(b(m, inst)?);
    }
    for sc in &inst.scenarios {
        let si = inst.for_scenario(sc);
        m.enter_scenario(&sc.id, sc.probability);
        let mut run = || -> BuildResult {
            let mut out = vec![];
            for b in second {
                out.extend(b(m, &si)?);
            }
            Ok(out)
        };
        let res = run();
        m.leave_scenario();
        tags.extend(res?);
    }
    m.metadata.insert("uncertainty.scenarios".into(), probs.len().to_string());
    Ok(tags)
}

/// Variables whose family was created outside any scenario scope.
pub fn first_stage_vars(m: &Model) -> Vec<VarId> {
    (0..m.num_vars())
        .map(VarId)
        .filter(|&v| m.family_stage(&m.var_info(v).family) == Some(Stage::First))
        .collect()
}

/// Copy of `m` with each listed variable fixed to its value (integral
/// variables are rounded).
pub fn fix_first_stage(m: &Model, fixed: &[(VarId, f64)]) -> Result<Model, ModelError> {
    let mut out = m.clone();
    for &(v, x) in fixed {
        let x = if m.var_info(v).domain == Domain::Continuous {
            x
        } else {
            x.round()
        };
        out.set_bounds(v, x, x)?;
    }
    Ok(out)
}

/// Add `M̌·Σ p_ω·|ϑ_ω − Σ p ϑ|` to the minimized objective `objective`,
/// creating it as `Σ p_ω ϑ_ω` when absent. Each absolute value gets a
/// `dev_robust[ω]` variable.
pub fn mean_deviation(m: &mut Model, objective: &str, scenarios: &[(String, f64, LinExpr)], m_check: f64) -> BuildResult {
    if !(m_check >= 0.0) || !m_check.is_finite() {
        return Err(BuildError::Invalid(format!("deviation weight must be nonnegative, got {m_check}")));
    }
    let mut mean = LinExpr::new();
    for (_, p, e) in scenarios {
        mean.add_scaled(e, *p);
    }
    match m.objective(objective) {
        Some(o) if o.sense != ObjSense::Minimize => {
            return Err(BuildError::Composition(format!("objective {objective} must be minimized")));
        }
        Some(_) => {}
        None => m.set_objective(objective, ObjSense::Minimize, mean.clone()),
    }
    let mut tags = vec![];
    let mut penalty = LinExpr::new();
    for (id, p, e) in scenarios {
        let dev = m.add_var("dev_robust", vec![id.clone()], Domain::Continuous, 0.0, f64::INFINITY)?;
        let t = tag("uncertainty.robust", "deviation", &[("scenario", id)]);
        linearize_abs(m, dev, &(e.clone() - mean.clone()), &t)?;
        tags.push(t);
        penalty.add_term(dev, m_check * p);
    }
    m.add_objective_terms(objective, ObjSense::Minimize, penalty)?;
    m.metadata.insert("uncertainty.robust.weight".into(), m_check.to_string());
    Ok(tags)
}

/// Mean-deviation robustification of an extensive form built with
/// [`build_tssp_extensive`], using the per-scenario terms recorded for
/// `objective`.
pub fn build_robust_mean_deviation(m: &mut Model, inst: &Instance, objective: &str, m_check: f64) -> BuildResult {
    let probs = scenario_probabilities(inst)?;
    let recorded = m.scenario_objectives(objective);
    if recorded.is_empty() {
        return Err(BuildError::Composition(format!(
            "no per-scenario terms recorded for objective {objective}; build the extensive form first"
        )));
    }
    let scen: Vec<(String, f64, LinExpr)> = probs
        .into_iter()
        .map(|(id, p)| {
            let e = recorded.iter().find(|(s, _)| *s == id).map(|(_, e)| e.clone()).unwrap_or_default();
            (id, p, e)
        })
        .collect();
    mean_deviation(m, objective, &scen, m_check)
}
