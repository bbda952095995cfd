//! Equity, sustainability and multi-objective tools.
//!
//! Satisfaction builders read the vaccination family `x_v[g,k,p,t]` that a
//! supply chain builder registered. Regional builders work on
//! `a_rg[r,g]`, registered by [`build_regional_allocation`].

mod pareto;

pub use pareto::{
    dominates, epsilon_constraint_scalarize, nondominated, pareto_csv, pareto_sweep, senses, write_pareto_csv, ParetoPoint,
    SweepError,
};

use std::collections::BTreeMap;

use crate::data::Instance;
use crate::ix;
use crate::model::{tag, BuildError, BuildResult, Domain, LinExpr, Model, ObjSense, Sense, VarId};
use crate::scm::ALL_GROUPS;

pub const MAXIMIN: &str = "maximin";
pub const DEVIATION: &str = "equity";
pub const RAWLSIAN: &str = "rawlsian";
pub const WELFARE: &str = "welfare";
pub const EMISSION: &str = "emission";
pub const SHORTAGE: &str = "shortage";
pub const PROPORTIONAL: &str = "proportional";

/// Default segment count of the squared-deviation approximation.
pub const DEFAULT_SEGMENTS: usize = 8;

/// Demand of group `g` at VC `k` summed over vaccines and periods. The
/// implicit group reads `d_kpt` when no group demand is given.
pub fn cell_demand(inst: &Instance, g: &str, k: &str) -> f64 {
    let by_group = inst.has("demand", "gkpt");
    let mut d = 0.0;
    for p in &inst.vaccines {
        for t in inst.periods() {
            d += if !by_group && g == ALL_GROUPS {
                inst.demand_kpt(k, &p.id, t)
            } else {
                inst.demand_gkpt(g, k, &p.id, t)
            };
        }
    }
    d
}

/// `Σ_{p,t} x_v[g,k,p,t]` per `(g,k)` over the registered vaccinations.
fn vaccinations(m: &Model) -> Result<BTreeMap<(String, String), LinExpr>, BuildError> {
    let mut out: BTreeMap<(String, String), LinExpr> = BTreeMap::new();
    for v in m.family_vars("x_v") {
        let idx = &m.var_info(v).indices;
        out.entry((idx[0].clone(), idx[1].clone())).or_default().add_term(v, 1.0);
    }
    if out.is_empty() {
        return Err(BuildError::Composition("no vaccination variables x_v; add a vaccination center builder first".into()));
    }
    Ok(out)
}

/// `max z` with `z·D_gk ≤ Σ_{p,t} x_v` for every `(g,k)` with positive
/// demand. Zero-demand cells are skipped with a warning.
pub fn build_maximin_satisfaction(m: &mut Model, inst: &Instance) -> BuildResult {
    const B: &str = "equity.maximin";
    let cells = vaccinations(m)?;
    let z = m.var_or_add("z_maximin", ix![], Domain::Continuous, 0.0, f64::INFINITY)?;
    let mut tags = vec![];
    for ((g, k), given) in cells {
        let d = cell_demand(inst, &g, &k);
        if d <= 0.0 {
            log::warn!("maximin: group {g} at {k} has no demand; left out of the minimum");
            continue;
        }
        let e = LinExpr::term(z, d) - given;
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag(B, "ratio", &[("g", &g), ("k", &k)]))?);
    }
    if tags.is_empty() {
        return Err(BuildError::Invalid("maximin needs at least one cell with positive demand".into()));
    }
    m.add_objective_terms(MAXIMIN, ObjSense::Maximize, LinExpr::from(z))?;
    Ok(tags)
}

/// Minimum satisfaction rate `Σ_{p,t} x_v ≥ γ·Σ_{p,t} d` per `(g,k)`.
///
/// With `with_assignment`, shipments into each DC must also cover `γ` of
/// the demand of the VCs assigned to it: `Σ_{i,t} x_md[i,j,p,t] ≥
/// γ Σ_{k,t} d_kpt x_jk[j,k]` per `(j,p)`, which needs `x_md` and `x_jk`.
pub fn build_min_satisfaction_rate(m: &mut Model, inst: &Instance, gamma: f64, with_assignment: bool) -> BuildResult {
    const B: &str = "equity.min_rate";
    if !(0.0..=1.0).contains(&gamma) {
        return Err(BuildError::Invalid(format!("satisfaction rate {gamma} is outside [0, 1]")));
    }
    let mut tags = vec![];
    for ((g, k), given) in vaccinations(m)? {
        let d = cell_demand(inst, &g, &k);
        tags.push(m.add_constraint(given, Sense::Ge, gamma * d, tag(B, "cell", &[("g", &g), ("k", &k)]))?);
    }
    if with_assignment {
        if !m.has_family("x_jk") || !m.has_family("x_md") {
            return Err(BuildError::Composition(
                "the assignment form needs x_jk and x_md; add the assignment and DC flow builders first".into(),
            ));
        }
        for j in inst.dc_ids() {
            for vac in &inst.vaccines {
                let p = vac.id.as_str();
                let mut e = LinExpr::new();
                for v in m.family_vars("x_md") {
                    let idx = &m.var_info(v).indices;
                    if idx[1] == j && idx[2] == p {
                        e.add_term(v, 1.0);
                    }
                }
                for k in &inst.vcs {
                    let Some(x) = m.var("x_jk", &ix![j, k]) else { continue };
                    let d: f64 = inst.periods().map(|t| inst.demand_kpt(k, p, t)).sum();
                    if d != 0.0 {
                        e.add_term(x, -gamma * d);
                    }
                }
                tags.push(m.add_constraint(e, Sense::Ge, 0.0, tag(B, "assigned", &[("j", &j), ("p", &p)]))?);
            }
        }
    }
    Ok(tags)
}

/// Regional allocations `a_rg[r,g] ∈ [0, d_rg]` with `Σ a_rg ≤ supply`.
pub fn build_regional_allocation(m: &mut Model, inst: &Instance, supply: f64) -> BuildResult {
    const B: &str = "equity.allocation";
    if !(supply >= 0.0) {
        return Err(BuildError::Invalid(format!("supply must be nonnegative, got {supply}")));
    }
    let mut total = LinExpr::new();
    for r in inst.customer_regions() {
        for g in &inst.groups {
            let d = inst.value_or_zero("demand", "rg", &[r, g]);
            total.add_term(m.var_or_add("a_rg", ix![r, g], Domain::Continuous, 0.0, d)?, 1.0);
        }
    }
    m.metadata.insert("equity.supply".into(), supply.to_string());
    Ok(vec![m.add_constraint(total, Sense::Le, supply, tag(B, "supply", &[]))?])
}

fn allocations(m: &Model) -> Result<BTreeMap<(String, String), VarId>, BuildError> {
    let out: BTreeMap<_, _> = m
        .family_vars("a_rg")
        .into_iter()
        .map(|v| {
            let idx = &m.var_info(v).indices;
            ((idx[0].clone(), idx[1].clone()), v)
        })
        .collect();
    if out.is_empty() {
        return Err(BuildError::Composition("no regional allocations a_rg; call build_regional_allocation first".into()));
    }
    Ok(out)
}

fn by_region(m: &Model) -> Result<BTreeMap<String, LinExpr>, BuildError> {
    let mut out: BTreeMap<String, LinExpr> = BTreeMap::new();
    for ((r, _), v) in allocations(m)? {
        out.entry(r).or_default().add_term(v, 1.0);
    }
    Ok(out)
}

/// Deviation from the fair allocation `e_rg`: `a = e + Δ⁺ − Δ⁻`,
/// `e + Δ⁺ − Δ⁻ ≤ d`, shortfall `Π ≥ γ d − a`, and objective
/// `M̌ Σ ς Δ⁻/d + Σ (1−ς) Δ⁺/d + 𝐌 Σ Π` with `γ = demand.gamma` and
/// `𝐌 = logistics.penalty`.
pub fn build_deviation_equity(m: &mut Model, inst: &Instance, varsigma: f64, weight: f64) -> BuildResult {
    const B: &str = "equity.deviation";
    if !(0.0..=1.0).contains(&varsigma) {
        return Err(BuildError::Invalid(format!("deviation weight {varsigma} is outside [0, 1]")));
    }
    if !inst.has("logistics", "fair_allocation") {
        return Err(BuildError::Missing("logistics.fair_allocation".into()));
    }
    let gamma = inst.scalar("demand", "gamma").unwrap_or(0.0);
    let penalty = inst.scalar("logistics", "penalty").unwrap_or(0.0);
    let mut tags = vec![];
    let mut obj = LinExpr::new();
    for ((r, g), a) in allocations(m)? {
        let d = inst.value_or_zero("demand", "rg", &[&r, &g]);
        if d <= 0.0 {
            return Err(BuildError::Invalid(format!("region {r}, group {g} has no demand")));
        }
        let e = inst.value_or_zero("logistics", "fair_allocation", &[&r, &g]);
        let up = m.var_or_add("dev_pos", ix![r, g], Domain::Continuous, 0.0, f64::INFINITY)?;
        let down = m.var_or_add("dev_neg", ix![r, g], Domain::Continuous, 0.0, f64::INFINITY)?;
        let pi = m.var_or_add("shortfall", ix![r, g], Domain::Continuous, 0.0, f64::INFINITY)?;
        let key: [(&str, &dyn std::fmt::Display); 2] = [("r", &r), ("g", &g)];
        let mut dev = LinExpr::from(a);
        dev.add_term(up, -1.0);
        dev.add_term(down, 1.0);
        tags.push(m.add_constraint(dev, Sense::Eq, e, tag(B, "split", &key))?);
        let mut cap = LinExpr::from(up);
        cap.add_term(down, -1.0);
        tags.push(m.add_constraint(cap, Sense::Le, d - e, tag(B, "cap", &key))?);
        let short = LinExpr::from(pi) + LinExpr::from(a);
        tags.push(m.add_constraint(short, Sense::Ge, gamma * d, tag(B, "shortfall", &key))?);
        obj.add_term(down, weight * varsigma / d);
        obj.add_term(up, (1.0 - varsigma) / d);
        obj.add_term(pi, penalty);
    }
    m.add_objective_terms(DEVIATION, ObjSense::Minimize, obj)?;
    Ok(tags)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GiniError {
    #[error("fractions sum to zero")]
    ZeroTotal,
    #[error("fraction {0} is negative or not finite")]
    BadValue(f64),
}

/// `Σ_{g'} Σ_g |f_g − f_g'| / (2 |𝒢| Σ f)`.
pub fn gini(f: &[f64]) -> Result<f64, GiniError> {
    if let Some(&x) = f.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(GiniError::BadValue(x));
    }
    let total: f64 = f.iter().sum();
    if total <= 0.0 {
        return Err(GiniError::ZeroTotal);
    }
    let mut num = 0.0;
    for a in f {
        for b in f {
            num += (a - b).abs();
        }
    }
    Ok(num / (2.0 * f.len() as f64 * total))
}

/// `max z` with `z ≤ Σ_g a_rg` per region.
pub fn build_rawlsian(m: &mut Model, _inst: &Instance) -> BuildResult {
    let z = m.var_or_add("z_rawls", ix![], Domain::Continuous, 0.0, f64::INFINITY)?;
    let mut tags = vec![];
    for (r, alloc) in by_region(m)? {
        let e = LinExpr::from(z) - alloc;
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag("equity.rawlsian", "floor", &[("r", &r)]))?);
    }
    m.add_objective_terms(RAWLSIAN, ObjSense::Maximize, LinExpr::from(z))?;
    Ok(tags)
}

/// No-equity maximum allocation `u_r = min(Σ_g d_rg, supply)`.
pub fn max_allocation(inst: &Instance, m: &Model, r: &str) -> f64 {
    let demand: f64 = inst.groups.iter().map(|g| inst.value_or_zero("demand", "rg", &[r, g])).sum();
    let supply = m.metadata.get("equity.supply").and_then(|s| s.parse().ok()).unwrap_or(f64::INFINITY);
    demand.min(supply)
}

/// Maximize `Σ_r (u_r − a_r)²` through a piecewise-linear interpolation of
/// the square on `segments` equal pieces of `[0, u_r]`. Breakpoint weights
/// `λ` are kept adjacent by one binary per segment.
pub fn build_social_welfare_ii(m: &mut Model, inst: &Instance, segments: usize) -> BuildResult {
    const B: &str = "equity.welfare";
    if segments == 0 {
        return Err(BuildError::Invalid("need at least one segment".into()));
    }
    let mut tags = vec![];
    let mut obj = LinExpr::new();
    for (r, alloc) in by_region(m)? {
        let u = max_allocation(inst, m, &r);
        let mut lam = vec![];
        let mut seg = vec![];
        for i in 0..=segments {
            lam.push(m.var_or_add("lambda_sw", ix![r, i], Domain::Continuous, 0.0, 1.0)?);
        }
        for q in 1..=segments {
            seg.push(m.var_or_add("seg_sw", ix![r, q], Domain::Binary, 0.0, 1.0)?);
        }
        let rk: [(&str, &dyn std::fmt::Display); 1] = [("r", &r)];
        // u − a = Σ λ_i p_i
        let mut e = alloc.clone();
        for (i, &l) in lam.iter().enumerate() {
            let p = u * i as f64 / segments as f64;
            e.add_term(l, p);
            obj.add_term(l, p * p);
        }
        tags.push(m.add_constraint(e, Sense::Eq, u, tag(B, "deviation", &rk))?);
        tags.push(m.add_constraint(LinExpr::sum(lam.iter().copied()), Sense::Eq, 1.0, tag(B, "convex", &rk))?);
        tags.push(m.add_constraint(LinExpr::sum(seg.iter().copied()), Sense::Eq, 1.0, tag(B, "one_segment", &rk))?);
        for (i, &l) in lam.iter().enumerate() {
            let mut e = LinExpr::from(l);
            if i > 0 {
                e.add_term(seg[i - 1], -1.0);
            }
            if i < segments {
                e.add_term(seg[i], -1.0);
            }
            tags.push(m.add_constraint(e, Sense::Le, 0.0, tag(B, "adjacent", &[("r", &r), ("i", &i)]))?);
        }
    }
    m.add_objective_terms(WELFARE, ObjSense::Maximize, obj)?;
    Ok(tags)
}

/// Exact `Σ_r (u_r − a_r)²` at `values`, for auditing the approximation.
pub fn social_welfare_ii_exact(m: &Model, inst: &Instance, values: &[f64]) -> Result<f64, BuildError> {
    Ok(by_region(m)?
        .iter()
        .map(|(r, a)| {
            let dev = max_allocation(inst, m, r) - a.eval(values);
            dev * dev
        })
        .sum())
}

/// Continuous site counts `n_r` near the population share of `total`:
/// `n_r − σ⁺ + σ⁻ = P̂_r / ΣP̂ · total`, minimizing `Σ (σ⁺ + σ⁻)`.
pub fn build_proportional_sites(m: &mut Model, inst: &Instance, total: f64) -> BuildResult {
    const B: &str = "equity.proportional";
    let regions = inst.customer_regions();
    let pops: Vec<f64> = regions.iter().map(|r| inst.value_or_zero("demand", "population_region", &[r])).collect();
    let sum: f64 = pops.iter().sum();
    if sum <= 0.0 {
        return Err(BuildError::Missing("demand.population_region".into()));
    }
    let mut tags = vec![];
    let mut obj = LinExpr::new();
    for (r, pop) in regions.into_iter().zip(pops) {
        let n = m.var_or_add("n_sites", ix![r], Domain::Continuous, 0.0, f64::INFINITY)?;
        let up = m.var_or_add("slack_pos", ix![r], Domain::Continuous, 0.0, f64::INFINITY)?;
        let down = m.var_or_add("slack_neg", ix![r], Domain::Continuous, 0.0, f64::INFINITY)?;
        let mut e = LinExpr::from(n);
        e.add_term(up, -1.0);
        e.add_term(down, 1.0);
        tags.push(m.add_constraint(e, Sense::Eq, pop / sum * total, tag(B, "share", &[("r", &r)]))?);
        obj.add_term(up, 1.0);
        obj.add_term(down, 1.0);
    }
    m.add_objective_terms(PROPORTIONAL, ObjSense::Minimize, obj)?;
    Ok(tags)
}

/// Emission objective `c^EI (Σ Y_D + Σ Z_V) + c^CR Σ η·flow` over the
/// registered `x_md` and `x_dv` arcs, and a total shortage objective over
/// `s_v` and `s_vg`.
pub fn build_carbon_objective(m: &mut Model, inst: &Instance) -> BuildResult {
    let facility = inst.scalar("costs", "emission_facility").unwrap_or(0.0);
    let transport = inst.scalar("costs", "emission_transport").unwrap_or(0.0);
    let mut emit = LinExpr::new();
    for family in ["Y_D", "Z_V"] {
        for v in m.family_vars(family) {
            emit.add_term(v, facility);
        }
    }
    for family in ["x_md", "x_dv"] {
        for v in m.family_vars(family) {
            let idx = &m.var_info(v).indices;
            let eta = inst
                .distance(&idx[0], &idx[1])
                .ok_or_else(|| BuildError::Missing(format!("logistics.distance[{},{}]", idx[0], idx[1])))?;
            emit.add_term(v, transport * eta);
        }
    }
    let mut short = LinExpr::new();
    for family in ["s_v", "s_vg"] {
        for v in m.family_vars(family) {
            short.add_term(v, 1.0);
        }
    }
    m.add_objective_terms(EMISSION, ObjSense::Minimize, emit)?;
    m.add_objective_terms(SHORTAGE, ObjSense::Minimize, short)?;
    Ok(vec![])
}
