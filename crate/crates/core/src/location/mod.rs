//! Facility location and coverage formulations for siting vaccination
//! centers (VCs) and covering population sites (PS).
//!
//! Distances `η` come from `logistics.distance` (either direction), VC
//! opening binaries are `Z_V[k]`, and the cardinality and budget caps read
//! `capacities.max_vcs`, `costs.vc_open` and `costs.budget`.

use std::str::FromStr;

use crate::data::{Cap, Instance};
use crate::ix;
use crate::model::{tag, BuildError, BuildResult, Domain, LinExpr, Model, ObjSense, Sense, VarId};

/// Objective names registered by this module.
pub const COVERAGE: &str = "coverage";
pub const DISTANCE: &str = "distance";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// `x_sk ∈ [0,1]`.
    Fractional,
    /// `x_sk ∈ {0,1}`.
    Binary,
}

impl FromStr for Assignment {
    type Err = BuildError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fractional" => Ok(Assignment::Fractional),
            "binary" => Ok(Assignment::Binary),
            _ => Err(BuildError::Invalid(format!("unknown assignment \"{s}\" (fractional, binary)"))),
        }
    }
}

fn open_vc(m: &mut Model, k: &str) -> Result<VarId, BuildError> {
    Ok(m.var_or_add("Z_V", ix![k], Domain::Binary, 0.0, 1.0)?)
}

/// `Σ_k Z_V ≤ |V̄|` when `capacities.max_vcs` is finite.
fn cardinality(m: &mut Model, inst: &Instance, builder: &str, tags: &mut Vec<String>) -> Result<(), BuildError> {
    if let Cap::Finite(n) = inst.cap("capacities", "max_vcs", &[]) {
        if n < 1.0 {
            return Err(BuildError::Invalid(format!("at most {n} VCs may open; need at least 1")));
        }
        let mut e = LinExpr::new();
        for k in &inst.vcs {
            e.add_term(open_vc(m, k)?, 1.0);
        }
        tags.push(m.add_constraint(e, Sense::Le, n, tag(builder, "cardinality", &[]))?);
    }
    Ok(())
}

/// `Σ_k c_k Z_V ≤ b` when `costs.budget` is finite.
fn budget(m: &mut Model, inst: &Instance, builder: &str, tags: &mut Vec<String>) -> Result<(), BuildError> {
    if let Cap::Finite(b) = inst.cap("costs", "budget", &[]) {
        let mut e = LinExpr::new();
        for k in &inst.vcs {
            let c = inst.value_or_zero("costs", "vc_open", &[k]);
            let z = open_vc(m, k)?;
            if c != 0.0 {
                e.add_term(z, c);
            }
        }
        tags.push(m.add_constraint(e, Sense::Le, b, tag(builder, "budget", &[]))?);
    }
    Ok(())
}

/// Coverage coefficient `P̄_s`: `demand.coverage`, else the site
/// population, else the site demand.
pub fn coverage_weight(inst: &Instance, s: &str) -> f64 {
    inst.value("demand", "coverage", &[s])
        .or_else(|| inst.value("demand", "population_site", &[s]))
        .unwrap_or_else(|| inst.value_or_zero("demand", "site", &[s]))
}

/// Coverage levels as `(θ_q, lower, upper)` distance intervals with
/// `𝔶_0 = 0`.
pub fn levels(inst: &Instance) -> Result<Vec<(f64, f64, f64)>, BuildError> {
    let theta = inst
        .list("demand", "theta")
        .ok_or_else(|| BuildError::Missing("demand.theta".into()))?;
    let bounds = inst
        .list("logistics", "level_distances")
        .ok_or_else(|| BuildError::Missing("logistics.level_distances".into()))?;
    if theta.len() != bounds.len() {
        return Err(BuildError::Invalid(format!(
            "{} coverage fractions but {} level distances",
            theta.len(),
            bounds.len()
        )));
    }
    if theta.windows(2).any(|w| w[1] > w[0]) {
        return Err(BuildError::Invalid("coverage fractions must be nonincreasing".into()));
    }
    let mut out = vec![];
    let mut lo = 0.0;
    for (&th, &hi) in theta.iter().zip(bounds) {
        out.push((th, lo, hi));
        lo = hi;
    }
    Ok(out)
}

/// Level of a distance: the first `q` with `𝔶_{q−1} ≤ η ≤ 𝔶_q`, so a
/// distance on a breakpoint belongs to the better level.
pub fn level_of(levels: &[(f64, f64, f64)], eta: f64) -> Option<usize> {
    levels.iter().position(|&(_, lo, hi)| lo <= eta && eta <= hi)
}

/// Assignment-type location with two objectives, `coverage` (max
/// `Σ d^P_s x_sk`) and `distance` (min `Σ d^P_s η_sk x_sk`).
///
/// A missing `logistics.site_vc_feasible` table means every pair is viable.
pub fn build_assignment_location(m: &mut Model, inst: &Instance, mode: Assignment) -> BuildResult {
    const B: &str = "location.assignment";
    let domain = match mode {
        Assignment::Fractional => Domain::Continuous,
        Assignment::Binary => Domain::Binary,
    };
    let viability = inst.has("logistics", "site_vc_feasible");
    let mut tags = vec![];
    let mut cover = LinExpr::new();
    let mut dist = LinExpr::new();
    let mut load: Vec<LinExpr> = vec![LinExpr::new(); inst.vcs.len()];
    for s in &inst.sites {
        let d = inst.value_or_zero("demand", "site", &[s]);
        let mut once = LinExpr::new();
        for (ki, k) in inst.vcs.iter().enumerate() {
            let x = m.var_or_add("x_sk", ix![s, k], domain, 0.0, 1.0)?;
            let z = open_vc(m, k)?;
            once.add_term(x, 1.0);
            load[ki].add_term(x, d);
            let key: [(&str, &dyn std::fmt::Display); 2] = [("s", s), ("k", k)];
            tags.push(m.add_constraint(LinExpr::from(x) - LinExpr::from(z), Sense::Le, 0.0, tag(B, "open", &key))?);
            let a = if viability { inst.value_or_zero("logistics", "site_vc_feasible", &[s, k]) } else { 1.0 };
            tags.push(m.add_constraint(LinExpr::from(x), Sense::Le, a, tag(B, "viability", &key))?);
            cover.add_term(x, d);
            if a > 0.0 && d != 0.0 {
                let eta = inst
                    .distance(s, k)
                    .ok_or_else(|| BuildError::Missing(format!("logistics.distance[{s},{k}]")))?;
                dist.add_term(x, d * eta);
            }
        }
        tags.push(m.add_constraint(once, Sense::Le, 1.0, tag(B, "assign_once", &[("s", s)]))?);
    }
    for (ki, k) in inst.vcs.iter().enumerate() {
        if let Cap::Finite(c) = inst.cap("capacities", "vc", &[k]) {
            let e = std::mem::take(&mut load[ki]);
            tags.push(m.add_constraint(e, Sense::Le, c, tag(B, "capacity", &[("k", k)]))?);
        }
    }
    cardinality(m, inst, B, &mut tags)?;
    m.add_objective_terms(COVERAGE, ObjSense::Maximize, cover)?;
    m.add_objective_terms(DISTANCE, ObjSense::Minimize, dist)?;
    Ok(tags)
}

/// Maximal covering: `z_s ≤ Σ_{k: η_sk ≤ η_max} Z_V[k]`, with cardinality
/// and budget caps; objective `coverage` maximizes `Σ P̄_s z_s`.
pub fn build_max_coverage(m: &mut Model, inst: &Instance) -> BuildResult {
    const B: &str = "location.max_coverage";
    let eta_max = inst.cap("logistics", "max_distance", &[]).finite().unwrap_or(f64::INFINITY);
    let mut tags = vec![];
    let mut obj = LinExpr::new();
    for s in &inst.sites {
        let z = m.var_or_add("z_s", ix![s], Domain::Binary, 0.0, 1.0)?;
        let mut e = LinExpr::from(z);
        for k in &inst.vcs {
            if inst.distance(s, k).is_some_and(|d| d <= eta_max) {
                e.add_term(open_vc(m, k)?, -1.0);
            }
        }
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag(B, "cover", &[("s", s)]))?);
        obj.add_term(z, coverage_weight(inst, s));
    }
    for k in &inst.vcs {
        open_vc(m, k)?;
    }
    cardinality(m, inst, B, &mut tags)?;
    budget(m, inst, B, &mut tags)?;
    m.add_objective_terms(COVERAGE, ObjSense::Maximize, obj)?;
    Ok(tags)
}

/// Step-wise coverage levels shared by the VC and outreach variants:
/// registers `z_sq`, the per-site single-level row and the objective, and
/// returns for each `(s, q)` the VCs at that level.
fn stepwise_levels(
    m: &mut Model,
    inst: &Instance,
    builder: &str,
    tags: &mut Vec<String>,
) -> Result<Vec<(VarId, Vec<String>)>, BuildError> {
    let lv = levels(inst)?;
    let mut out = vec![];
    let mut obj = LinExpr::new();
    for s in &inst.sites {
        let mut members: Vec<Vec<String>> = vec![vec![]; lv.len()];
        for k in &inst.vcs {
            if let Some(q) = inst.distance(s, k).and_then(|d| level_of(&lv, d)) {
                members[q].push(k.clone());
            }
        }
        let mut one = LinExpr::new();
        let w = coverage_weight(inst, s);
        for (q, ks) in members.into_iter().enumerate() {
            let z = m.var_or_add("z_sq", ix![s, q + 1], Domain::Binary, 0.0, 1.0)?;
            one.add_term(z, 1.0);
            obj.add_term(z, w * lv[q].0);
            out.push((z, ks));
        }
        tags.push(m.add_constraint(one, Sense::Le, 1.0, tag(builder, "one_level", &[("s", s)]))?);
    }
    m.add_objective_terms(COVERAGE, ObjSense::Maximize, obj)?;
    Ok(out)
}

fn site_level(m: &Model, z: VarId) -> (String, String) {
    let info = m.var_info(z);
    (info.indices[0].clone(), info.indices[1].clone())
}

/// Step-wise distance coverage: `z_sq ≤ Σ_{k ∈ V_s(q)} Z_V[k]`, at most one
/// level per site, cardinality and budget caps; objective
/// `Σ P̄_s Σ_q θ_q z_sq`.
pub fn build_stepwise_coverage(m: &mut Model, inst: &Instance) -> BuildResult {
    const B: &str = "location.stepwise";
    if m.has_tag_prefix("location.outreach.") {
        return Err(BuildError::Composition("outreach coverage already owns the site levels".into()));
    }
    let mut tags = vec![];
    for (z, ks) in stepwise_levels(m, inst, B, &mut tags)? {
        let mut e = LinExpr::from(z);
        for k in &ks {
            e.add_term(open_vc(m, k)?, -1.0);
        }
        let (s, q) = site_level(m, z);
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag(B, "level", &[("s", &s), ("q", &q)]))?);
    }
    for k in &inst.vcs {
        open_vc(m, k)?;
    }
    cardinality(m, inst, B, &mut tags)?;
    budget(m, inst, B, &mut tags)?;
    Ok(tags)
}

/// Outreach centers covering VCs: `z_sq ≤ Σ_{k ∈ V_s(q)} Σ_ℓ x_ok[ℓ,k]`,
/// OC capacity `Σ_k x_ok ≤ C^O_ℓ`, distance `η_ℓk x_ok ≤ η_max` and at most
/// one OC per VC. A pair with no distance entry cannot be assigned.
pub fn build_outreach(m: &mut Model, inst: &Instance) -> BuildResult {
    const B: &str = "location.outreach";
    if m.has_tag_prefix("location.stepwise.") {
        return Err(BuildError::Composition("step-wise coverage already owns the site levels".into()));
    }
    let eta_max = inst.cap("logistics", "max_distance", &[]).finite();
    let mut tags = vec![];
    let assign = |m: &mut Model, l: &str, k: &str| -> Result<VarId, BuildError> {
        let hi = if inst.distance(l, k).is_some() { 1.0 } else { 0.0 };
        Ok(m.var_or_add("x_ok", ix![l, k], Domain::Binary, 0.0, hi)?)
    };
    for (z, ks) in stepwise_levels(m, inst, B, &mut tags)? {
        let mut e = LinExpr::from(z);
        for k in &ks {
            for l in &inst.outreach {
                e.add_term(assign(m, l, k)?, -1.0);
            }
        }
        let (s, q) = site_level(m, z);
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag(B, "level", &[("s", &s), ("q", &q)]))?);
    }
    for l in &inst.outreach {
        let mut e = LinExpr::new();
        for k in &inst.vcs {
            let x = assign(m, l, k)?;
            e.add_term(x, 1.0);
            if let (Some(max), Some(d)) = (eta_max, inst.distance(l, k)) {
                let key: [(&str, &dyn std::fmt::Display); 2] = [("l", l), ("k", k)];
                tags.push(m.add_constraint(LinExpr::term(x, d), Sense::Le, max, tag(B, "distance", &key))?);
            }
        }
        if let Cap::Finite(c) = inst.cap("capacities", "outreach", &[l]) {
            tags.push(m.add_constraint(e, Sense::Le, c, tag(B, "capacity", &[("l", l)]))?);
        }
    }
    for k in &inst.vcs {
        let mut e = LinExpr::new();
        for l in &inst.outreach {
            e.add_term(assign(m, l, k)?, 1.0);
        }
        tags.push(m.add_constraint(e, Sense::Le, 1.0, tag(B, "one_oc", &[("k", k)]))?);
    }
    Ok(tags)
}
