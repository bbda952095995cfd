//! Unopened vial shelf life, vial to dose conversion and the open-vial
//! administration window.

use super::upstream::price_once;
use super::vc::{received, w_vc, x_v};
use super::*;
use crate::ix;
use crate::model::{tag, BuildResult, Sense};

/// Opening and receiving linkage for perishable vials.
///
/// `L_v[k,p,t,t']` moves vials received at `t` to opening at `t'` with
/// `t+1 ≤ t' ≤ t+λ`. Initial stock `I⁰_kp` splits into usable `A_v` and
/// wasted `W_v` over the first `λ` periods. `N_v[k,p,t']` counts vials
/// opened at `t'`.
pub fn build_shelf_life(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let horizon = inst.horizon();
    let waste = cfg.waste(inst);
    let mut tags = vec![];
    for vac in &inst.vaccines {
        let p = vac.id.as_str();
        let lam = vac.shelf_life as usize;
        if lam < 1 {
            return Err(BuildError::Invalid(format!("vaccine {p}: shelf life must be at least 1")));
        }
        for k in &inst.vcs {
            let lv = |m: &mut Model, t: usize, t2: usize| flow(m, cfg, "L_v", ix![k, p, t, t2]);
            for t in 1..=horizon {
                let mut e = LinExpr::new();
                for t2 in (t + 1)..=(t + lam).min(horizon) {
                    e.add_term(lv(m, t, t2)?, 1.0);
                }
                e -= received(m, inst, cfg, k, p, t)?;
                e.add_term(w_vc(m, inst, cfg, k, p, t)?, 1.0);
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t)];
                if t + lam <= horizon {
                    tags.push(m.add_constraint(e, Sense::Eq, 0.0, tag("scm.shelf_life", "receive", &key))?);
                } else {
                    // openings after the horizon are not modeled
                    tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.shelf_life", "receive_tail", &key))?);
                }
            }
            let mut split = LinExpr::new();
            for t2 in 1..=horizon {
                let n = flow(m, cfg, "N_v", ix![k, p, t2])?;
                let mut e = LinExpr::from(n);
                for t in t2.saturating_sub(lam).max(1)..t2 {
                    e.add_term(lv(m, t, t2)?, -1.0);
                }
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t2)];
                if t2 > lam {
                    tags.push(m.add_constraint(e, Sense::Eq, 0.0, tag("scm.shelf_life", "open", &key))?);
                } else {
                    let a = flow(m, cfg, "A_v", ix![k, p, t2])?;
                    let w = flow(m, cfg, "W_v", ix![k, p, t2])?;
                    add_cost(m, w, waste)?;
                    e.add_term(a, -1.0);
                    split.add_term(a, 1.0);
                    split.add_term(w, 1.0);
                    tags.push(m.add_constraint(e, Sense::Eq, 0.0, tag("scm.shelf_life", "open_initial", &key))?);
                }
            }
            let initial = inst.value_or_zero("logistics", "initial_vc", &[k, p]);
            tags.push(m.add_constraint(split, Sense::Eq, initial, tag("scm.shelf_life", "initial_split", &[("k", k), ("p", &p)]))?);
        }
    }
    Ok(tags)
}

/// Doses in vials of every size opened at `(k,p,t)`.
fn opened_doses(m: &mut Model, inst: &Instance, cfg: &ScmConfig, k: &str, p: &str, t: usize) -> Result<LinExpr, ModelError> {
    let vac = inst.vaccine(p).expect("vaccine ids come from the instance");
    let mut e = LinExpr::new();
    for size in &vac.vial_sizes {
        let n = m.var_or_add("N_vs", ix![&size.id, k, p, t], Domain::Integer, 0.0, cfg.flow_ub)?;
        e.add_term(n, size.doses as f64);
    }
    Ok(e)
}

fn w_ov(m: &mut Model, inst: &Instance, cfg: &ScmConfig, k: &str, p: &str, t: usize) -> Result<VarId, ModelError> {
    let v = flow(m, cfg, "w_ov", ix![k, p, t])?;
    price_once(m, v, inst.scalar("costs", "open_vial_waste").unwrap_or(0.0))?;
    Ok(v)
}

/// Opened doses equal vaccinations plus open-vial wastage, with vials
/// counted per size `N_vs[ν,k,p,t]` and `Σ_ν N_vs = N_v`.
pub fn build_vial_dose_balance(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let groups = groups(inst);
    let mut tags = vec![];
    for k in &inst.vcs {
        for vac in &inst.vaccines {
            let p = vac.id.as_str();
            for t in inst.periods() {
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t)];
                let mut e = opened_doses(m, inst, cfg, k, p, t)?;
                for g in &groups {
                    e.add_term(x_v(m, cfg, g, k, p, t)?, -1.0);
                }
                e.add_term(w_ov(m, inst, cfg, k, p, t)?, -1.0);
                tags.push(m.add_constraint(e, Sense::Eq, 0.0, tag("scm.vial_dose", "balance", &key))?);

                let mut link = LinExpr::new();
                for size in &vac.vial_sizes {
                    let n = m.var_or_add("N_vs", ix![&size.id, k, p, t], Domain::Integer, 0.0, cfg.flow_ub)?;
                    link.add_term(n, 1.0);
                }
                link.add_term(flow(m, cfg, "N_v", ix![k, p, t])?, -1.0);
                tags.push(m.add_constraint(link, Sense::Eq, 0.0, tag("scm.vial_dose", "vial_total", &key))?);
            }
        }
    }
    Ok(tags)
}

/// Dose administration within the open-vial life `τ`.
///
/// `x_vo[g,k,p,t,t']` are doses from vials opened at `t` given at
/// `t' ∈ [t, t+τ−1]`; `x_exp[k,p,t]` are the doses of those vials that
/// expire. Vaccinations `x_v[g,k,p,t']` are tied to the window sum, and
/// `s_vg[g,k,p,t']` is group shortage against `d_gkpt`.
pub fn build_open_vial_window(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    if !inst.has("demand", "gkpt") {
        return Err(missing("demand", "gkpt"));
    }
    let horizon = inst.horizon();
    let groups = groups(inst);
    let waste = inst.scalar("costs", "open_vial_waste").unwrap_or(0.0);
    let mut tags = vec![];
    for k in &inst.vcs {
        for vac in &inst.vaccines {
            let p = vac.id.as_str();
            let tau = vac.open_vial_life as usize;
            if tau < 1 {
                return Err(BuildError::Invalid(format!("vaccine {p}: open vial life must be at least 1")));
            }
            let xvo = |m: &mut Model, g: &str, t: usize, t2: usize| flow(m, cfg, "x_vo", ix![g, k, p, t, t2]);

            for t in 1..=horizon {
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t)];
                let mut e = LinExpr::new();
                for t2 in t..=(t + tau - 1).min(horizon) {
                    for g in &groups {
                        e.add_term(xvo(m, g, t, t2)?, 1.0);
                    }
                }
                e -= opened_doses(m, inst, cfg, k, p, t)?;
                if t + tau <= horizon + 1 {
                    let x = flow(m, cfg, "x_exp", ix![k, p, t])?;
                    add_cost(m, x, waste)?;
                    e.add_term(x, 1.0);
                    tags.push(m.add_constraint(e, Sense::Eq, 0.0, tag("scm.open_vial", "forward", &key))?);
                } else {
                    tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.open_vial", "forward_tail", &key))?);
                }
            }

            for t2 in 1..=horizon {
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t2)];
                let first = (t2 + 1).saturating_sub(tau).max(1);
                let mut given = LinExpr::new();
                let mut demand = 0.0;
                for g in &groups {
                    let mut per_group = LinExpr::new();
                    for t in first..=t2 {
                        per_group.add_term(xvo(m, g, t, t2)?, 1.0);
                    }
                    given += per_group.clone();
                    demand += inst.demand_gkpt(g, k, p, t2);
                    let x = x_v(m, cfg, g, k, p, t2)?;
                    let link = per_group - LinExpr::from(x);
                    let tg = tag("scm.open_vial", "administered", &[("g", g), ("k", k), ("p", &p), ("t", &t2)]);
                    tags.push(m.add_constraint(link, Sense::Eq, 0.0, tg)?);
                }
                if t2 <= tau {
                    given.add_term(w_ov(m, inst, cfg, k, p, t2)?, 1.0);
                    tags.push(m.add_constraint(given, Sense::Le, demand, tag("scm.open_vial", "backward_initial", &key))?);
                } else {
                    for g in &groups {
                        let s = flow(m, cfg, "s_vg", ix![g, k, p, t2])?;
                        price_once(m, s, inst.value_or_zero("costs", "shortage", &[k, p]))?;
                        given.add_term(s, 1.0);
                    }
                    tags.push(m.add_constraint(given, Sense::Eq, demand, tag("scm.open_vial", "backward", &key))?);
                }
            }
        }
    }
    Ok(tags)
}
