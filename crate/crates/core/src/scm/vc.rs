//! Vaccination center inventory, DC assignment and workforce builders.

use std::str::FromStr;

use super::upstream::{price_once, x_dv};
use super::*;
use crate::ix;
use crate::model::{tag, BuildResult, Sense};

/// How `build_vc_flow` treats demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandMode {
    /// Demand leaves inventory as a constant; infeasible under scarcity.
    Fixed,
    /// Vaccinations plus shortage equal demand.
    Shortage,
    /// Vaccinations never exceed demand.
    Capped,
}

impl FromStr for DemandMode {
    type Err = BuildError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(DemandMode::Fixed),
            "shortage" => Ok(DemandMode::Shortage),
            "capped" => Ok(DemandMode::Capped),
            _ => Err(BuildError::Invalid(format!("unknown demand mode \"{s}\" (fixed, shortage, capped)"))),
        }
    }
}

pub(crate) fn x_v(m: &mut Model, cfg: &ScmConfig, g: &str, k: &str, p: &str, t: usize) -> Result<VarId, ModelError> {
    flow(m, cfg, "x_v", ix![g, k, p, t])
}

pub(crate) fn w_vc(m: &mut Model, inst: &Instance, cfg: &ScmConfig, k: &str, p: &str, t: usize) -> Result<VarId, ModelError> {
    let v = flow(m, cfg, "w_vc", ix![k, p, t])?;
    price_once(m, v, cfg.waste(inst))?;
    Ok(v)
}

/// Vials received by VC `k` from every DC that serves it.
pub(crate) fn received(m: &mut Model, inst: &Instance, cfg: &ScmConfig, k: &str, p: &str, t: usize) -> Result<LinExpr, ModelError> {
    let mut e = LinExpr::new();
    for j in inst.dc_ids() {
        if inst.serves(j, k) {
            e.add_term(x_dv(m, inst, cfg, j, k, p, t)?, 1.0);
        }
    }
    Ok(e)
}

/// VC inventory balance against `d_kpt`. Vaccinations are `Σ_g x_v`.
pub fn build_vc_flow(m: &mut Model, inst: &Instance, cfg: &ScmConfig, mode: DemandMode) -> BuildResult {
    if !inst.has("demand", "kpt") {
        return Err(missing("demand", "kpt"));
    }
    if m.has_tag_prefix("scm.priority.") {
        return Err(BuildError::Composition(
            "priority sequencing already owns the vaccination center balance".into(),
        ));
    }
    let groups = groups(inst);
    let mut tags = vec![];
    let mut fixed = 0.0;
    let mut initial_total = 0.0;
    for k in &inst.vcs {
        let initial = initial_vc(inst, k);
        initial_total += initial;
        let mut prev: Option<VarId> = None;
        for t in inst.periods() {
            let inv = flow(m, cfg, "I_vc", ix![k, t])?;
            price_once(m, inv, inst.value_or_zero("costs", "holding_vc", &[k]))?;
            let mut bal = LinExpr::from(inv);
            match prev {
                Some(pv) => bal.add_term(pv, -1.0),
                None => bal.add_constant(-initial),
            }
            for p in &inst.vaccines {
                let p = p.id.as_str();
                let d = inst.demand_kpt(k, p, t);
                bal -= received(m, inst, cfg, k, p, t)?;
                bal.add_term(w_vc(m, inst, cfg, k, p, t)?, 1.0);
                if mode == DemandMode::Fixed {
                    bal.add_constant(d);
                    fixed += d;
                    continue;
                }
                let mut vacc = LinExpr::new();
                for g in &groups {
                    vacc.add_term(x_v(m, cfg, g, k, p, t)?, 1.0);
                }
                bal += vacc.clone();
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t)];
                if mode == DemandMode::Shortage {
                    let s = flow(m, cfg, "s_v", ix![k, p, t])?;
                    price_once(m, s, inst.value_or_zero("costs", "shortage", &[k, p]))?;
                    let e = vacc + LinExpr::from(s);
                    tags.push(m.add_constraint(e, Sense::Eq, d, tag("scm.vc_flow", "demand_split", &key))?);
                } else {
                    tags.push(m.add_constraint(vacc, Sense::Le, d, tag("scm.vc_flow", "demand_cap", &key))?);
                }
            }
            tags.push(m.add_constraint(bal, Sense::Eq, 0.0, tag("scm.vc_flow", "balance", &[("k", k), ("t", &t)]))?);
            prev = Some(inv);
        }
    }
    set_meta(m, "horizon", inst.horizon());
    set_meta(m, "scm.initial_vc", initial_total);
    refresh_initial(m);
    if mode == DemandMode::Fixed {
        set_meta(m, "scm.fixed_demand", fixed);
    }
    Ok(tags)
}

/// DC to VC linking rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    /// Flow on an arc only when the arc is assigned.
    Direct,
    /// Every VC assigned to at least one feasible DC.
    Cover,
    /// Every VC assigned to at most one feasible DC.
    Packing,
}

impl FromStr for AssignmentMode {
    type Err = BuildError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(AssignmentMode::Direct),
            "cover" => Ok(AssignmentMode::Cover),
            "packing" => Ok(AssignmentMode::Packing),
            _ => Err(BuildError::Invalid(format!(
                "unknown assignment mode \"{s}\" (direct, cover, packing)"
            ))),
        }
    }
}

pub fn build_dc_vc_assignment(m: &mut Model, inst: &Instance, cfg: &ScmConfig, mode: AssignmentMode) -> BuildResult {
    let mut tags = vec![];
    match mode {
        AssignmentMode::Direct => {
            let big = big_m(inst, cfg, inst.vaccines.len() * inst.horizon());
            for j in inst.dc_ids() {
                for k in &inst.vcs {
                    if !inst.serves(j, k) {
                        continue;
                    }
                    let a = binary(m, "x_jk", ix![j, k])?;
                    let mut e = LinExpr::term(a, -big);
                    for t in inst.periods() {
                        for p in &inst.vaccines {
                            e.add_term(x_dv(m, inst, cfg, j, k, &p.id, t)?, 1.0);
                        }
                    }
                    tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.dc_vc_assignment", "direct", &[("j", &j), ("k", k)]))?);
                }
            }
        }
        AssignmentMode::Cover | AssignmentMode::Packing => {
            if !inst.has("logistics", "dc_vc_feasible") {
                return Err(missing("logistics", "dc_vc_feasible"));
            }
            let (sense, anchor) = if mode == AssignmentMode::Cover {
                (Sense::Ge, "cover")
            } else {
                (Sense::Le, "packing")
            };
            for k in &inst.vcs {
                let mut e = LinExpr::new();
                for j in inst.dc_ids() {
                    let a = inst.value_or_zero("logistics", "dc_vc_feasible", &[k, j]);
                    let x = binary(m, "x_jk", ix![j, k])?;
                    if a != 0.0 {
                        e.add_term(x, a);
                    }
                }
                tags.push(m.add_constraint(e, sense, 1.0, tag("scm.dc_vc_assignment", anchor, &[("k", k)]))?);
            }
        }
    }
    Ok(tags)
}

/// Workforce availability: vaccinations per VC and period are limited by
/// `F_R · C^HW` with `F_R ≤ F_A + C^EH`. Hiring `F_A` costs `costs.hire`.
pub fn build_workforce(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let per = inst.scalar("capacities", "health_worker").ok_or_else(|| missing("capacities", "health_worker"))?;
    if per <= 0.0 {
        return Err(BuildError::Invalid(format!("vaccinations per health worker must be positive, got {per}")));
    }
    let groups = groups(inst);
    let mut vacc_bound = throughput_bound(inst);
    if cfg.flow_ub.is_finite() {
        vacc_bound = vacc_bound.min(cfg.flow_ub * (groups.len() * inst.vaccines.len()) as f64);
    }
    let hire_ub = (vacc_bound / per).ceil();
    let hire = inst.scalar("costs", "hire").unwrap_or(0.0);
    let mut tags = vec![];
    for k in &inst.vcs {
        for t in inst.periods() {
            let existing = inst.value_or_zero("capacities", "existing_workforce", &[k, &t.to_string()]);
            let fa = m.var_or_add("F_A", ix![k, t], Domain::Integer, 0.0, hire_ub)?;
            let fr = m.var_or_add("F_R", ix![k, t], Domain::Integer, 0.0, hire_ub + existing.floor())?;
            add_cost(m, fa, hire)?;
            let mut e = LinExpr::term(fr, -per);
            for g in &groups {
                for p in &inst.vaccines {
                    e.add_term(x_v(m, cfg, g, k, &p.id, t)?, 1.0);
                }
            }
            tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.workforce", "capacity", &[("k", k), ("t", &t)]))?);
            let e = LinExpr::from(fr) - LinExpr::from(fa);
            tags.push(m.add_constraint(e, Sense::Le, existing, tag("scm.workforce", "additional", &[("k", k), ("t", &t)]))?);
        }
    }
    Ok(tags)
}
