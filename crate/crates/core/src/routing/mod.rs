//! Vehicle routing for last-mile delivery and mobile clinics.
//!
//! Regions are nodes and the depot is region `"0"`. Arcs are
//! `y[h,r,r']` (vehicle `h` drives from `r` to `r'`), assignments are
//! `v_rh[r,h]`, and start times are `T[r]`. Travel times come from
//! `logistics.travel_time` (read in either direction when only one is
//! given) and service times from `logistics.service_time`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::data::{Cap, Instance, DEPOT};
use crate::ix;
use crate::model::lp::fmt_num;
use crate::model::{tag, BuildError, BuildResult, Domain, LinExpr, Model, ObjSense, Sense, VarId};
use crate::scm::ALL_GROUPS;
use crate::solve::{solve_milp, MilpOptions, Solution, SolveError, Status};

pub const TRAVEL: &str = "travel";
pub const SERVED: &str = "served";

/// Subtour elimination scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subtour {
    /// Subset cuts added by [`solve_with_subtour_cuts`].
    DfjLazy,
    /// Ordering variables `u[r]`.
    Mtz,
}

impl FromStr for Subtour {
    type Err = BuildError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dfj_lazy" | "dfj" => Ok(Subtour::DfjLazy),
            "mtz" => Ok(Subtour::Mtz),
            _ => Err(BuildError::Invalid(format!("unknown subtour mode \"{s}\" (dfj_lazy, mtz)"))),
        }
    }
}

/// Travel time `τ_{ab}`.
pub fn travel_time(inst: &Instance, a: &str, b: &str) -> Result<f64, BuildError> {
    inst.value("logistics", "travel_time", &[a, b])
        .or_else(|| inst.value("logistics", "travel_time", &[b, a]))
        .ok_or_else(|| BuildError::Missing(format!("logistics.travel_time[{a},{b}]")))
}

/// Demand of a region summed over groups.
pub fn region_demand(inst: &Instance, r: &str) -> f64 {
    if inst.groups.is_empty() {
        return inst.value_or_zero("demand", "rg", &[r, ALL_GROUPS]);
    }
    inst.groups.iter().map(|g| inst.value_or_zero("demand", "rg", &[r, g])).sum()
}

fn service(inst: &Instance, r: &str) -> f64 {
    inst.value_or_zero("logistics", "service_time", &[r])
}

fn nodes(inst: &Instance) -> Result<Vec<String>, BuildError> {
    if !inst.has_depot() {
        return Err(BuildError::Missing(format!("depot region \"{DEPOT}\"")));
    }
    let mut out = vec![DEPOT.to_string()];
    out.extend(inst.customer_regions().into_iter().map(String::from));
    Ok(out)
}

/// Horizon for start times: every service plus the longest outgoing leg
/// from each node.
fn time_bound(inst: &Instance, nodes: &[String]) -> Result<f64, BuildError> {
    let mut total = 0.0;
    for a in nodes {
        let mut longest = 0.0f64;
        for b in nodes {
            if a != b {
                longest = longest.max(travel_time(inst, a, b)?);
            }
        }
        total += longest + service(inst, a);
    }
    Ok(total)
}

fn arc(m: &mut Model, h: &str, a: &str, b: &str) -> Result<VarId, BuildError> {
    Ok(m.var_or_add("y", ix![h, a, b], Domain::Binary, 0.0, 1.0)?)
}

/// Arcs between two nodes summed over vehicles.
fn arc_sum(m: &Model, a: &str, b: &str) -> LinExpr {
    let mut e = LinExpr::new();
    for v in m.family_vars("y") {
        let idx = &m.var_info(v).indices;
        if idx[1] == a && idx[2] == b {
            e.add_term(v, 1.0);
        }
    }
    e
}

/// Capacitated routing: every customer region is served by one vehicle,
/// each vehicle leaves the depot at most once, vehicle loads respect
/// `capacities.vehicle`, and start times propagate along arcs with
/// `T[r'] ≥ T[r] + τ_rr' + τ^S_r − M(1 − Σ_h y[h,r,r'])`. Objective
/// `travel` minimizes total travel time.
pub fn build_vrp(m: &mut Model, inst: &Instance, subtour: Subtour) -> BuildResult {
    const B: &str = "routing.vrp";
    let nodes = nodes(inst)?;
    if inst.vehicles.is_empty() {
        return Err(BuildError::Missing("vehicles".into()));
    }
    let customers = &nodes[1..];
    let big = time_bound(inst, &nodes)?;
    let mut tags = vec![];
    let mut obj = LinExpr::new();
    for h in &inst.vehicles {
        for a in &nodes {
            for b in &nodes {
                if a != b {
                    let y = arc(m, h, a, b)?;
                    obj.add_term(y, travel_time(inst, a, b)?);
                }
            }
        }
    }
    for r in customers {
        let mut once = LinExpr::new();
        for h in &inst.vehicles {
            let v = m.var_or_add("v_rh", ix![r, h], Domain::Binary, 0.0, 1.0)?;
            once.add_term(v, 1.0);
            let mut out = LinExpr::term(v, -1.0);
            let mut inn = LinExpr::term(v, -1.0);
            for o in &nodes {
                if o != r {
                    out.add_term(arc(m, h, r, o)?, 1.0);
                    inn.add_term(arc(m, h, o, r)?, 1.0);
                }
            }
            let key: [(&str, &dyn std::fmt::Display); 2] = [("h", h), ("r", r)];
            tags.push(m.add_constraint(out, Sense::Eq, 0.0, tag(B, "out_degree", &key))?);
            tags.push(m.add_constraint(inn, Sense::Eq, 0.0, tag(B, "in_degree", &key))?);
        }
        tags.push(m.add_constraint(once, Sense::Eq, 1.0, tag(B, "assign", &[("r", r)]))?);
    }
    let mut depot_all = LinExpr::new();
    for h in &inst.vehicles {
        let mut leave = LinExpr::new();
        let mut back = LinExpr::new();
        for r in customers {
            leave.add_term(arc(m, h, DEPOT, r)?, 1.0);
            back.add_term(arc(m, h, r, DEPOT)?, 1.0);
        }
        depot_all.add_assign_expr(&leave);
        tags.push(m.add_constraint(leave.clone(), Sense::Le, 1.0, tag(B, "depot_out", &[("h", h)]))?);
        tags.push(m.add_constraint(leave - back, Sense::Eq, 0.0, tag(B, "depot_return", &[("h", h)]))?);

        if let Cap::Finite(c) = inst.cap("capacities", "vehicle", &[h]) {
            let mut load = LinExpr::new();
            for r in customers {
                load.add_term(m.var("v_rh", &ix![r, h]).expect("registered above"), region_demand(inst, r));
            }
            tags.push(m.add_constraint(load, Sense::Le, c, tag(B, "capacity", &[("h", h)]))?);
        }
    }
    let fleet = inst.vehicles.len() as f64;
    tags.push(m.add_constraint(depot_all, Sense::Le, fleet, tag(B, "depot_degree", &[]))?);

    for r in customers {
        m.var_or_add("T", ix![r], Domain::Continuous, 0.0, big)?;
    }
    for a in &nodes {
        for b in customers {
            if a == b {
                continue;
            }
            let tb = m.var("T", &ix![b]).expect("registered above");
            let mut e = LinExpr::from(tb);
            if a != DEPOT {
                e.add_term(m.var("T", &ix![a]).expect("registered above"), -1.0);
            }
            e.add_scaled(&arc_sum(m, a, b), -big);
            let lead = travel_time(inst, a, b)? + service(inst, a);
            tags.push(m.add_constraint(e, Sense::Ge, lead - big, tag(B, "start_time", &[("r", a), ("s", b)]))?);
        }
    }
    if subtour == Subtour::Mtz {
        tags.extend(mtz(m, customers, None)?);
    }
    m.metadata.insert("routing.subtour".into(), format!("{subtour:?}"));
    m.add_objective_terms(TRAVEL, ObjSense::Minimize, obj)?;
    Ok(tags)
}

/// `u[r] − u[r'] + n Σ_h y[h,r,r'] ≤ n − 1` on customer pairs. With
/// visit indicators the order variables may drop to 0 for skipped nodes.
fn mtz(m: &mut Model, customers: &[String], visits: Option<&BTreeMap<String, VarId>>) -> BuildResult {
    let n = customers.len() as f64;
    let lo = if visits.is_some() { 0.0 } else { 1.0 };
    let mut tags = vec![];
    for r in customers {
        m.var_or_add("u", ix![r], Domain::Continuous, lo, n)?;
    }
    for a in customers {
        for b in customers {
            if a == b {
                continue;
            }
            let ua = m.var("u", &ix![a]).expect("registered above");
            let ub = m.var("u", &ix![b]).expect("registered above");
            let mut e = LinExpr::from(ua) - LinExpr::from(ub);
            e.add_scaled(&arc_sum(m, a, b), n);
            tags.push(m.add_constraint(e, Sense::Le, n - 1.0, tag("routing.mtz", "order", &[("r", a), ("s", b)]))?);
        }
    }
    Ok(tags)
}

/// Depot-free cycles among the arcs set in `values`, each as a sorted node
/// list.
pub fn subtours(m: &Model, values: &[f64]) -> Vec<Vec<String>> {
    let mut next: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for v in m.family_vars("y") {
        if values[v.0] > 0.5 {
            let idx = &m.var_info(v).indices;
            next.entry(idx[1].clone()).or_default().push(idx[2].clone());
        }
    }
    let mut reach_depot: BTreeSet<String> = BTreeSet::new();
    let mut stack = vec![DEPOT.to_string()];
    while let Some(a) = stack.pop() {
        for b in next.get(&a).into_iter().flatten() {
            if reach_depot.insert(b.clone()) {
                stack.push(b.clone());
            }
        }
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = vec![];
    for start in next.keys() {
        if start == DEPOT || reach_depot.contains(start) || seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start.clone()];
        while let Some(a) = stack.pop() {
            if comp.insert(a.clone()) {
                stack.extend(next.get(&a).into_iter().flatten().cloned());
            }
        }
        seen.extend(comp.iter().cloned());
        out.push(comp.into_iter().collect());
    }
    out
}

/// Solve, add `Σ_{r,r' ∈ S} Σ_h y[h,r,r'] ≤ |S| − 1` for every depot-free
/// cycle `S`, and repeat until none remain. Returns the final solution and
/// the number of cuts added.
pub fn solve_with_subtour_cuts(m: &mut Model, opts: &MilpOptions) -> Result<(Solution, usize), SolveError> {
    let mut cuts = 0;
    loop {
        let sol = solve_milp(m, opts)?;
        if sol.status != Status::Optimal {
            return Ok((sol, cuts));
        }
        let cycles = subtours(m, &sol.values);
        if cycles.is_empty() {
            return Ok((sol, cuts));
        }
        for set in cycles {
            let mut e = LinExpr::new();
            for a in &set {
                for b in &set {
                    if a != b {
                        e.add_assign_expr(&arc_sum(m, a, b));
                    }
                }
            }
            let name = tag("routing.dfj", "subset", &[("set", &set.join("|"))]);
            if m.add_constraint(e, Sense::Le, set.len() as f64 - 1.0, name).is_ok() {
                cuts += 1;
            }
        }
    }
}

/// Single-vehicle routing that picks which regions to visit: visits
/// `Z_R[r]` replace the fixed degrees, service times `st[r] ≥ τ^S_r Z_R[r]`
/// are decisions, total travel plus service stays within `time_budget`,
/// and objective `served` maximizes `Σ d_r Z_R[r]`. Subtours are cut with
/// ordering variables.
pub fn build_selective_routing(m: &mut Model, inst: &Instance, time_budget: f64) -> BuildResult {
    const B: &str = "routing.selective";
    if !(time_budget >= 0.0) {
        return Err(BuildError::Invalid(format!("time budget must be nonnegative, got {time_budget}")));
    }
    let nodes = nodes(inst)?;
    let customers = nodes[1..].to_vec();
    let h = inst.vehicles.first().cloned().unwrap_or_else(|| "1".to_string());
    let mut tags = vec![];
    let mut visits = BTreeMap::new();
    let mut used = LinExpr::new();
    let mut obj = LinExpr::new();
    for a in &nodes {
        for b in &nodes {
            if a != b {
                used.add_term(arc(m, &h, a, b)?, travel_time(inst, a, b)?);
            }
        }
    }
    for r in &customers {
        let z = m.var_or_add("Z_R", ix![r], Domain::Binary, 0.0, 1.0)?;
        visits.insert(r.clone(), z);
        let mut out = LinExpr::term(z, -1.0);
        let mut inn = LinExpr::term(z, -1.0);
        for o in &nodes {
            if o != r {
                out.add_term(arc(m, &h, r, o)?, 1.0);
                inn.add_term(arc(m, &h, o, r)?, 1.0);
            }
        }
        tags.push(m.add_constraint(out, Sense::Eq, 0.0, tag(B, "out_degree", &[("r", r)]))?);
        tags.push(m.add_constraint(inn, Sense::Eq, 0.0, tag(B, "in_degree", &[("r", r)]))?);
        let st = m.var_or_add("st", ix![r], Domain::Continuous, 0.0, time_budget)?;
        let e = LinExpr::from(st) - LinExpr::term(z, service(inst, r));
        tags.push(m.add_constraint(e, Sense::Ge, 0.0, tag(B, "service", &[("r", r)]))?);
        let e = LinExpr::from(st) - LinExpr::term(z, time_budget);
        tags.push(m.add_constraint(e, Sense::Le, 0.0, tag(B, "service_on_visit", &[("r", r)]))?);
        used.add_term(st, 1.0);
        obj.add_term(z, region_demand(inst, r));
    }
    let mut leave = LinExpr::new();
    let mut back = LinExpr::new();
    for r in &customers {
        leave.add_term(arc(m, &h, DEPOT, r)?, 1.0);
        back.add_term(arc(m, &h, r, DEPOT)?, 1.0);
    }
    tags.push(m.add_constraint(leave.clone(), Sense::Le, 1.0, tag(B, "depot_out", &[]))?);
    tags.push(m.add_constraint(leave - back, Sense::Eq, 0.0, tag(B, "depot_return", &[]))?);
    tags.push(m.add_constraint(used, Sense::Le, time_budget, tag(B, "time_budget", &[]))?);
    tags.extend(mtz(m, &customers, Some(&visits))?);
    m.add_objective_terms(SERVED, ObjSense::Maximize, obj)?;
    Ok(tags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub region: String,
    pub arrival: f64,
    /// Load delivered so far on this route, including this stop.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub vehicle: String,
    pub stops: Vec<Stop>,
}

/// Depot-rooted routes read from a solution. Arrival is `T[r]` when the
/// model has start times, otherwise accumulated travel and service time.
pub fn routes(m: &Model, inst: &Instance, sol: &Solution) -> Vec<Route> {
    let mut succ: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut vehicles: BTreeSet<String> = BTreeSet::new();
    for v in m.family_vars("y") {
        if sol.value(v) > 0.5 {
            let idx = &m.var_info(v).indices;
            succ.insert((idx[0].clone(), idx[1].clone()), idx[2].clone());
            vehicles.insert(idx[0].clone());
        }
    }
    let mut out = vec![];
    for h in vehicles {
        let mut stops = vec![];
        let mut at = DEPOT.to_string();
        let (mut clock, mut load) = (0.0, 0.0);
        while let Some(next) = succ.get(&(h.clone(), at.clone())) {
            if next == DEPOT || stops.len() > succ.len() {
                break;
            }
            clock += travel_time(inst, &at, next).unwrap_or(0.0) + service(inst, &at);
            let arrival = m.var("T", &ix![next]).map_or(clock, |t| sol.value(t));
            load += region_demand(inst, next);
            stops.push(Stop {
                region: next.clone(),
                arrival,
                load,
            });
            at = next.clone();
        }
        if !stops.is_empty() {
            out.push(Route { vehicle: h, stops });
        }
    }
    out
}

/// `vehicle,order,region,arrival,load` rows.
pub fn route_csv(routes: &[Route]) -> String {
    let mut s = String::from("vehicle,order,region,arrival,load\n");
    for r in routes {
        for (i, st) in r.stops.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", r.vehicle, i + 1, st.region, fmt_num(st.arrival), fmt_num(st.load));
        }
    }
    s
}

pub fn write_route_csv(routes: &[Route], path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, route_csv(routes))
}
