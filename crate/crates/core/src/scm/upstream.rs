//! Manufacturer and distribution center builders.

use super::*;
use crate::data::{Cap, ColdTier};
use crate::ix;
use crate::model::{tag, BuildResult, Sense};

/// Add `c·v` to the cost objective unless `v` is already priced.
pub(crate) fn price_once(m: &mut Model, v: VarId, c: f64) -> Result<(), ModelError> {
    let priced = m.objective(COST).is_some_and(|o| o.expr.coef(v) != 0.0);
    if priced {
        return Ok(());
    }
    add_cost(m, v, c)
}

fn x_md(m: &mut Model, inst: &Instance, cfg: &ScmConfig, i: &str, j: &str, p: &str, t: usize) -> Result<VarId, ModelError> {
    let v = flow(m, cfg, "x_md", ix![i, j, p, t])?;
    price_once(m, v, inst.value_or_zero("costs", "shipping_md", &[i, j]))?;
    Ok(v)
}

pub(crate) fn x_dv(m: &mut Model, inst: &Instance, cfg: &ScmConfig, j: &str, k: &str, p: &str, t: usize) -> Result<VarId, ModelError> {
    let v = flow(m, cfg, "x_dv", ix![j, k, p, t])?;
    price_once(m, v, inst.value_or_zero("costs", "shipping_dv", &[j, k]))?;
    Ok(v)
}

fn w_dc(m: &mut Model, inst: &Instance, cfg: &ScmConfig, j: &str, p: &str, t: usize) -> Result<VarId, ModelError> {
    let v = flow(m, cfg, "w_dc", ix![j, p, t])?;
    price_once(m, v, cfg.waste(inst))?;
    Ok(v)
}

/// Arrivals at DC `j` in period `t` for vaccines satisfying `keep`.
fn arrivals(
    m: &mut Model,
    inst: &Instance,
    cfg: &ScmConfig,
    j: &str,
    t: usize,
    l: usize,
    keep: impl Fn(&str) -> bool,
) -> Result<LinExpr, ModelError> {
    let mut e = LinExpr::new();
    if t <= l {
        return Ok(e);
    }
    for i in &inst.manufacturers {
        for p in &inst.vaccines {
            if inst.produces(i, &p.id) && keep(&p.id) {
                e.add_term(x_md(m, inst, cfg, i, j, &p.id, t - l)?, 1.0);
            }
        }
    }
    Ok(e)
}

fn dc_to_vc(
    m: &mut Model,
    inst: &Instance,
    cfg: &ScmConfig,
    j: &str,
    t: usize,
    keep: impl Fn(&str) -> bool,
) -> Result<LinExpr, ModelError> {
    let mut e = LinExpr::new();
    for k in &inst.vcs {
        if !inst.serves(j, k) {
            continue;
        }
        for p in &inst.vaccines {
            if keep(&p.id) {
                e.add_term(x_dv(m, inst, cfg, j, k, &p.id, t)?, 1.0);
            }
        }
    }
    Ok(e)
}

/// Product- and period-specific production capacity:
/// `Σ_j x_md[i,j,p,t] ≤ C^M_ipt · X_m[i,t]`. Unbounded entries are omitted.
pub fn build_manufacturer_capacity(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    if !inst.has("capacities", "production") {
        return Err(missing("capacities", "production"));
    }
    let mut tags = vec![];
    for i in &inst.manufacturers {
        for t in inst.periods() {
            let active = binary(m, "X_m", ix![i, t])?;
            for p in &inst.vaccines {
                if !inst.produces(i, &p.id) {
                    continue;
                }
                let mut e = LinExpr::new();
                for j in inst.dc_ids() {
                    e.add_term(x_md(m, inst, cfg, i, j, &p.id, t)?, 1.0);
                }
                if let Cap::Finite(c) = inst.cap("capacities", "production", &[i, &p.id, &t.to_string()]) {
                    e.add_term(active, -c);
                    let tg = tag("scm.manufacturer_capacity", "production", &[("i", i), ("p", &p.id), ("t", &t)]);
                    tags.push(m.add_constraint(e, Sense::Le, 0.0, tg)?);
                }
            }
        }
    }
    Ok(tags)
}

/// At most one order per delivery period, and no new order while an
/// earlier one is outstanding.
///
/// The second family is read as printed: for an active order placed at
/// `t'` for delivery at `t`, every order placed at `t̂'` with
/// `t' < t̂' < t`, for any delivery `t̂ ≥ t̂'`, is blocked. Its big-M is the
/// number of blocked orders.
pub fn build_order_exclusivity(m: &mut Model, inst: &Instance, _cfg: &ScmConfig) -> BuildResult {
    let horizon = inst.horizon();
    let mut tags = vec![];
    for i in &inst.manufacturers {
        for p in &inst.vaccines {
            if !inst.produces(i, &p.id) {
                continue;
            }
            let order = |m: &mut Model, a: usize, b: usize| binary(m, "X_m_order", ix![i, &p.id, a, b]);
            for t in 1..=horizon {
                let mut e = LinExpr::new();
                for t0 in 1..=t {
                    e.add_term(order(m, t0, t)?, 1.0);
                }
                let tg = tag("scm.order_exclusivity", "one_order", &[("i", i), ("p", &p.id), ("t", &t)]);
                tags.push(m.add_constraint(e, Sense::Le, 1.0, tg)?);
            }
            for t in 1..=horizon {
                for t0 in 1..=t {
                    let mut e = LinExpr::new();
                    for th0 in (t0 + 1)..t {
                        for th in th0..=horizon {
                            e.add_term(order(m, th0, th)?, 1.0);
                        }
                    }
                    if e.is_empty() {
                        continue;
                    }
                    let big = e.len() as f64;
                    e.add_term(order(m, t0, t)?, big);
                    let tg = tag(
                        "scm.order_exclusivity",
                        "no_overlap",
                        &[("i", i), ("p", &p.id), ("ordered", &t0), ("t", &t)],
                    );
                    tags.push(m.add_constraint(e, Sense::Le, big, tg)?);
                }
            }
        }
    }
    Ok(tags)
}

fn check_lead(inst: &Instance, l: usize) -> Result<(), BuildError> {
    if l >= inst.horizon() {
        return Err(BuildError::Invalid(format!(
            "lead time {l} must be shorter than the horizon {}",
            inst.horizon()
        )));
    }
    Ok(())
}

/// DC inventory balance with a manufacturer lead time `l`, location forcing
/// of in- and outflows, and inventory capacity and safety stock.
pub fn build_dc_flow(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let l = cfg.lead(inst);
    check_lead(inst, l)?;
    let big = big_m(inst, cfg, (inst.manufacturers.len() + inst.dcs.len() + inst.vcs.len() + 1) * inst.vaccines.len());
    let mut tags = vec![];
    let mut initial_total = 0.0;
    for d in &inst.dcs {
        let j = d.id.as_str();
        let open = binary(m, "Y_D", ix![j])?;
        price_once(m, open, inst.value_or_zero("costs", "dc_open", &[j]))?;
        let initial = inst.value_or_zero("logistics", "initial_dc", &[j]);
        initial_total += initial;
        let mut prev: Option<VarId> = None;
        for t in inst.periods() {
            let inv = flow(m, cfg, "I_dc", ix![j, t])?;
            price_once(m, inv, inst.value_or_zero("costs", "holding", &[j]))?;
            let inflow_m = arrivals(m, inst, cfg, j, t, l, |_| true)?;
            let mut inflow_dd = LinExpr::new();
            let mut outflow_dd = LinExpr::new();
            for o in inst.dc_ids() {
                if o == j {
                    continue;
                }
                for p in &inst.vaccines {
                    inflow_dd.add_term(flow(m, cfg, "x_dd", ix![o, j, &p.id, t])?, 1.0);
                    outflow_dd.add_term(flow(m, cfg, "x_dd", ix![j, o, &p.id, t])?, 1.0);
                }
            }
            let to_vc = dc_to_vc(m, inst, cfg, j, t, |_| true)?;
            let mut wasted = LinExpr::new();
            for p in &inst.vaccines {
                wasted.add_term(w_dc(m, inst, cfg, j, &p.id, t)?, 1.0);
            }

            // I_t − I_{t−1} − inflow + outflow = 0
            let mut bal = LinExpr::from(inv) - inflow_m.clone() - inflow_dd.clone() + to_vc.clone() + outflow_dd.clone() + wasted.clone();
            match prev {
                Some(pv) => bal.add_term(pv, -1.0),
                None => bal.add_constant(-initial),
            }
            let anchor = if t > l { "balance" } else { "balance_before_lead" };
            tags.push(m.add_constraint(bal, Sense::Eq, 0.0, tag("scm.dc_flow", anchor, &[("j", &j), ("t", &t)]))?);

            let out = to_vc + outflow_dd + wasted - LinExpr::term(open, big);
            tags.push(m.add_constraint(out, Sense::Le, 0.0, tag("scm.dc_flow", "outflow_open", &[("j", &j), ("t", &t)]))?);

            let (inflow, anchor) = if t > l {
                (inflow_m + inflow_dd, "inflow_open")
            } else {
                (inflow_dd, "inflow_open_before_lead")
            };
            if !inflow.is_empty() {
                let e = inflow - LinExpr::term(open, big);
                tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.dc_flow", anchor, &[("j", &j), ("t", &t)]))?);
            }

            if let Cap::Finite(c) = inst.cap("capacities", "dc", &[j]) {
                let e = LinExpr::from(inv) - LinExpr::term(open, c);
                tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.dc_flow", "capacity", &[("j", &j), ("t", &t)]))?);
            }
            let ss = inst.value_or_zero("capacities", "safety_stock", &[j]);
            if ss > 0.0 {
                let e = LinExpr::from(inv) - LinExpr::term(open, ss);
                tags.push(m.add_constraint(e, Sense::Ge, 0.0, tag("scm.dc_flow", "safety_stock", &[("j", &j), ("t", &t)]))?);
            }
            prev = Some(inv);
        }
    }
    set_meta(m, "horizon", inst.horizon());
    set_meta(m, "scm.lead_time", l);
    set_meta(m, "scm.initial_dc", initial_total);
    refresh_initial(m);
    Ok(tags)
}

/// Cumulative DC form: outflow up to `t` never exceeds initial stock plus
/// arrivals ordered by `(t − l)⁺` less waste, per vaccine.
pub fn build_dc_flow_aggregated(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let l = cfg.lead(inst);
    check_lead(inst, l)?;
    let mut tags = vec![];
    for d in &inst.dcs {
        let j = d.id.as_str();
        let initial = inst.value_or_zero("logistics", "initial_dc", &[j]);
        for p in &inst.vaccines {
            let mut out = LinExpr::new();
            let mut arrived = LinExpr::new();
            for t in inst.periods() {
                out += dc_to_vc(m, inst, cfg, j, t, |q| q == p.id)?;
                if t > l {
                    let s = t - l;
                    for i in &inst.manufacturers {
                        if inst.produces(i, &p.id) {
                            arrived.add_term(x_md(m, inst, cfg, i, j, &p.id, s)?, 1.0);
                        }
                    }
                    arrived.add_term(w_dc(m, inst, cfg, j, &p.id, s)?, -1.0);
                }
                let e = out.clone() - arrived.clone();
                let tg = tag("scm.dc_flow_aggregated", "cumulative", &[("j", &j), ("p", &p.id), ("t", &t)]);
                tags.push(m.add_constraint(e, Sense::Le, initial, tg)?);
            }
        }
    }
    set_meta(m, "horizon", inst.horizon());
    set_meta(m, "scm.lead_time", l);
    Ok(tags)
}

/// Three-tier refrigeration capacity with per-flow location forcing.
///
/// Inflow forcing is tier specific (cold arrivals need `Y_Dc`, very cold
/// need `Y_Dvc`, ultra cold need `Y_Duc`), and ultra cold storage is only
/// added to a DC that has cold or very cold storage: `Y_Duc ≤ Y_Dc + Y_Dvc`.
pub fn build_cold_chain(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let l = cfg.lead(inst);
    check_lead(inst, l)?;
    let tier_of = |p: &str| inst.vaccine(p).map(|v| v.cold_tier).unwrap_or(ColdTier::Cold);
    let big = big_m(inst, cfg, inst.vcs.len() * inst.vaccines.len());
    let mut tags = vec![];
    for d in &inst.dcs {
        let j = d.id.as_str();
        let y_c = binary(m, "Y_Dc", ix![j])?;
        let y_vc = binary(m, "Y_Dvc", ix![j])?;
        let y_uc = binary(m, "Y_Duc", ix![j])?;
        let cap_c = inst.cap("capacities", "dc_cold", &[j]);
        let cap_vc = inst.cap("capacities", "dc_very_cold", &[j]);
        let cap_uc = inst.cap("capacities", "dc_ultra_cold", &[j]);
        let tiers = [
            (ColdTier::Cold, "cold", y_c, cap_c),
            (ColdTier::VeryCold, "very_cold", y_vc, cap_vc),
            (ColdTier::UltraCold, "ultra_cold", y_uc, cap_uc),
        ];
        let forcing_m = |cap: Cap| cap.finite().unwrap_or(big).min(big);

        let e = LinExpr::from(y_uc) - LinExpr::from(y_c) - LinExpr::from(y_vc);
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("scm.cold_chain", "ultra_on_existing", &[("j", &j)]))?);

        for (tier, name, y, cap) in tiers {
            if !inst.vaccines.iter().any(|v| v.cold_tier == tier) {
                continue;
            }
            for t in inst.periods() {
                let inflow = arrivals(m, inst, cfg, j, t, l, |p| tier_of(p) == tier)?;
                let outflow = dc_to_vc(m, inst, cfg, j, t, |p| tier_of(p) == tier)?;
                // relaxed: outflow may fall short of inflow
                let e = inflow - outflow.clone();
                let sense = if cfg.relaxed_pass_through { Sense::Ge } else { Sense::Eq };
                let tg = tag("scm.cold_chain", &format!("pass_through_{name}"), &[("j", &j), ("t", &t)]);
                tags.push(m.add_constraint(e, sense, 0.0, tg)?);
                let tg = tag("scm.cold_chain", &format!("capacity_{name}"), &[("j", &j), ("t", &t)]);
                match tier {
                    ColdTier::VeryCold => {
                        if let Cap::Finite(c) = cap_vc {
                            // very cold space shrinks by whatever is converted to ultra cold
                            let uc = cap_uc.finite().unwrap_or(0.0);
                            let e = outflow + LinExpr::term(y_uc, uc);
                            tags.push(m.add_constraint(e, Sense::Le, c, tg)?);
                        }
                    }
                    _ => {
                        if let Cap::Finite(c) = cap {
                            let e = outflow - LinExpr::term(y, c);
                            tags.push(m.add_constraint(e, Sense::Le, 0.0, tg)?);
                        }
                    }
                }
            }
            let mf = forcing_m(cap);
            for t in inst.periods() {
                for k in &inst.vcs {
                    if !inst.serves(j, k) {
                        continue;
                    }
                    for p in inst.vaccines.iter().filter(|v| v.cold_tier == tier) {
                        let x = x_dv(m, inst, cfg, j, k, &p.id, t)?;
                        let e = LinExpr::from(x) - LinExpr::term(y, mf);
                        let tg = tag("scm.cold_chain", "outflow_open", &[("j", &j), ("k", k), ("p", &p.id), ("t", &t)]);
                        tags.push(m.add_constraint(e, Sense::Le, 0.0, tg)?);
                    }
                }
                for i in &inst.manufacturers {
                    for p in inst.vaccines.iter().filter(|v| v.cold_tier == tier) {
                        if !inst.produces(i, &p.id) {
                            continue;
                        }
                        let x = x_md(m, inst, cfg, i, j, &p.id, t)?;
                        let e = LinExpr::from(x) - LinExpr::term(y, mf);
                        let tg = tag("scm.cold_chain", "inflow_open", &[("i", i), ("j", &j), ("p", &p.id), ("t", &t)]);
                        tags.push(m.add_constraint(e, Sense::Le, 0.0, tg)?);
                    }
                }
            }
        }
    }
    Ok(tags)
}

/// Aggregate fleet availability: `Σ_{j,k,p} x_dv[j,k,p,t] ≤ C^F` per period.
pub fn build_fleet_capacity(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    let cap = inst.scalar("capacities", "fleet").ok_or_else(|| missing("capacities", "fleet"))?;
    let mut tags = vec![];
    for t in inst.periods() {
        let mut e = LinExpr::new();
        for j in inst.dc_ids() {
            e += dc_to_vc(m, inst, cfg, j, t, |_| true)?;
        }
        tags.push(m.add_constraint(e, Sense::Le, cap, tag("scm.fleet", "capacity", &[("t", &t)]))?);
    }
    Ok(tags)
}
