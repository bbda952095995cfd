//! Two-group priority sequencing at vaccination centers.

use super::upstream::price_once;
use super::vc::{received, w_vc, x_v};
use super::*;
use crate::ix;
use crate::model::{linearize_min, tag, BuildResult, Sense};

/// Vaccinations `y_v[g,k,p,t]` for a high (first declared) and a low
/// priority group, `y₁ = min(d₁, avail)` and `y₂ = min(d₂, avail − y₁)`.
///
/// Availability at `t = 1` is `I⁰_k + Σ_j x_dv + lateral in − lateral out − w`,
/// and `I_vc[k,t−1] + Σ_j x_dv − w` afterwards. Lateral VC to VC shipments
/// `x_vv[k',k,p,1]` exist only in the first period. This builder owns the
/// VC inventory balance, so it does not compose with `build_vc_flow`.
pub fn build_priority_sequencing(m: &mut Model, inst: &Instance, cfg: &ScmConfig) -> BuildResult {
    if inst.groups.len() != 2 {
        return Err(BuildError::Composition(format!(
            "priority sequencing needs exactly two groups, found {}",
            inst.groups.len()
        )));
    }
    if !inst.has("demand", "gkpt") {
        return Err(missing("demand", "gkpt"));
    }
    if m.has_tag_prefix("scm.vc_flow.") {
        return Err(BuildError::Composition(
            "the vaccination center balance already comes from build_vc_flow".into(),
        ));
    }
    let (hi, lo) = (&inst.groups[0], &inst.groups[1]);
    let base_m = throughput_bound(inst);
    let mut tags = vec![];
    let mut initial_total = 0.0;

    for k in &inst.vcs {
        let initial = initial_vc(inst, k);
        initial_total += initial;
        let mut prev: Option<VarId> = None;
        for t in inst.periods() {
            let inv = flow(m, cfg, "I_vc", ix![k, t])?;
            price_once(m, inv, inst.value_or_zero("costs", "holding_vc", &[k]))?;
            let mut bal = LinExpr::from(inv);
            let stock = match prev {
                Some(pv) => LinExpr::from(pv),
                None => LinExpr::constant_expr(initial),
            };
            bal -= stock.clone();

            for vac in &inst.vaccines {
                let p = vac.id.as_str();
                let mut avail = stock.clone() + received(m, inst, cfg, k, p, t)?;
                if t == 1 {
                    for k2 in &inst.vcs {
                        if k2 == k {
                            continue;
                        }
                        avail.add_term(flow(m, cfg, "x_vv", ix![k2, k, p, t])?, 1.0);
                        avail.add_term(flow(m, cfg, "x_vv", ix![k, k2, p, t])?, -1.0);
                    }
                }
                avail.add_term(w_vc(m, inst, cfg, k, p, t)?, -1.0);
                // inventory moves by the same inflows net of vaccinations
                bal -= avail.clone() - stock.clone();

                let d1 = inst.demand_gkpt(hi, k, p, t);
                let d2 = inst.demand_gkpt(lo, k, p, t);
                let big = base_m + initial + d1 + d2 + 1.0;
                let y1 = flow(m, cfg, "y_v", ix![hi, k, p, t])?;
                let y2 = flow(m, cfg, "y_v", ix![lo, k, p, t])?;
                bal.add_term(y1, 1.0);
                bal.add_term(y2, 1.0);

                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", &p), ("t", &t)];
                let before = m.constraints().len();
                let tg = tag("scm.priority", "high", &key);
                linearize_min(m, y1, &LinExpr::constant_expr(d1), &avail, big, big, &tg)?;
                let tg = tag("scm.priority", "low", &key);
                let rest = avail - LinExpr::from(y1);
                linearize_min(m, y2, &LinExpr::constant_expr(d2), &rest, big, big, &tg)?;
                tags.extend(tags_since(m, before));

                for (g, y) in [(hi, y1), (lo, y2)] {
                    let e = LinExpr::from(x_v(m, cfg, g, k, p, t)?) - LinExpr::from(y);
                    let tg = tag("scm.priority", "link", &[("g", g), ("k", k), ("p", &p), ("t", &t)]);
                    tags.push(m.add_constraint(e, Sense::Eq, 0.0, tg)?);
                }
            }
            tags.push(m.add_constraint(bal, Sense::Eq, 0.0, tag("scm.priority", "balance", &[("k", k), ("t", &t)]))?);
            prev = Some(inv);
        }
    }
    set_meta(m, "horizon", inst.horizon());
    set_meta(m, "scm.initial_vc", initial_total);
    refresh_initial(m);
    Ok(tags)
}

/// Tags of the constraints added after the first `from`.
fn tags_since(m: &Model, from: usize) -> Vec<String> {
    m.constraints()[from..].iter().map(|c| c.tag.clone()).collect()
}
