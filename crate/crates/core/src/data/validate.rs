use std::collections::BTreeSet;
use std::fmt;

use super::schema::{self, Shape};
use super::{Instance, Param, Tensor};

/// One failed invariant: where, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

struct Out(Vec<Violation>);

impl Out {
    fn push(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        self.0.push(Violation {
            path: path.into(),
            reason: reason.into(),
        });
    }
}

const TOL: f64 = 1e-9;

/// Check every instance invariant; an empty list means the instance is clean.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Out(vec![]);
    if inst.time.horizon < 1 {
        out.push("time.horizon", "horizon must be at least 1");
    }
    sets(inst, &mut out);
    vaccines(inst, &mut out);
    params(inst, &mut out);
    scenarios(inst, &mut out);
    epi(inst, &mut out);
    ambiguity(inst, &mut out);
    out.0
}

fn unique(path: &str, ids: impl IntoIterator<Item = impl AsRef<str>>, out: &mut Out) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    for id in ids {
        let id = id.as_ref().to_string();
        if !seen.insert(id.clone()) {
            out.push(path, format!("duplicate id \"{id}\""));
        }
    }
    seen
}

fn sets(inst: &Instance, out: &mut Out) {
    unique("manufacturers", &inst.manufacturers, out);
    let vcs = unique("vaccination_centers", &inst.vcs, out);
    unique("distribution_centers", inst.dcs.iter().map(|d| &d.id), out);
    unique("population_sites", &inst.sites, out);
    unique("regions", &inst.regions, out);
    unique("groups", &inst.groups, out);
    unique("vehicles", &inst.vehicles, out);
    unique("outreach_centers", &inst.outreach, out);
    unique("vaccines", inst.vaccines.iter().map(|v| &v.id), out);
    for d in &inst.dcs {
        for k in d.serves.iter().flatten() {
            if !vcs.contains(k) {
                out.push(
                    format!("distribution_centers.{}.serves", d.id),
                    format!("\"{k}\" is not a declared vaccination center"),
                );
            }
        }
    }
}

fn vaccines(inst: &Instance, out: &mut Out) {
    for v in &inst.vaccines {
        let p = format!("vaccines.{}", v.id);
        if v.doses_per_vial < 1 {
            out.push(format!("{p}.doses_per_vial"), "must be at least 1");
        }
        if v.shelf_life < 1 {
            out.push(format!("{p}.shelf_life"), "must be at least 1");
        }
        if v.open_vial_life < 1 {
            out.push(format!("{p}.open_vial_life"), "must be at least 1");
        }
        if v.vial_sizes.is_empty() {
            out.push(format!("{p}.vial_sizes"), "at least one vial size required");
        }
        unique(&format!("{p}.vial_sizes"), v.vial_sizes.iter().map(|s| &s.id), out);
        for s in &v.vial_sizes {
            if s.doses < 1 {
                out.push(format!("{p}.vial_sizes.{}", s.id), "doses must be at least 1");
            }
        }
        for m in v.manufacturers.iter().flatten() {
            if !inst.manufacturers.contains(m) {
                out.push(format!("{p}.manufacturers"), format!("\"{m}\" is not a declared manufacturer"));
            }
        }
    }
}

fn members(inst: &Instance, kind: schema::SetKind) -> Option<Vec<String>> {
    use schema::SetKind::*;
    Some(match kind {
        Manufacturer => inst.manufacturers.clone(),
        Dc => inst.dcs.iter().map(|d| d.id.clone()).collect(),
        Vc => inst.vcs.clone(),
        Site => inst.sites.clone(),
        Region => inst.regions.clone(),
        Group => inst.groups.clone(),
        Vehicle => inst.vehicles.clone(),
        Outreach => inst.outreach.clone(),
        Vaccine => inst.vaccines.iter().map(|v| v.id.clone()).collect(),
        Time => (1..=inst.time.horizon).map(|t| t.to_string()).collect(),
        Level => (1..=inst.list("demand", "theta").map_or(0, |t| t.len())).map(|q| q.to_string()).collect(),
        Node => return None,
    })
}

fn check_param(inst: &Instance, path: &str, spec: &schema::ParamSpec, p: &Param, out: &mut Out) {
    let values: Vec<f64> = match (spec.shape, p) {
        (Shape::Scalar, Param::Scalar(v)) => vec![*v],
        (Shape::List, Param::List(v)) => v.clone(),
        (Shape::Tensor(keys), Param::Tensor(t)) => {
            tensor_refs(inst, path, keys, t, out);
            t.data.values().copied().collect()
        }
        _ => {
            out.push(path, "value has the wrong shape");
            return;
        }
    };
    if spec.nonneg && values.iter().any(|v| *v < 0.0) {
        out.push(path, "values must be nonnegative");
    }
    if values.iter().any(|v| !v.is_finite()) {
        out.push(path, "values must be finite");
    }
}

fn tensor_refs(inst: &Instance, path: &str, keys: &[(&str, schema::SetKind)], t: &Tensor, out: &mut Out) {
    let sets: Vec<Option<Vec<String>>> = keys.iter().map(|(_, k)| members(inst, *k)).collect();
    for idx in t.data.keys() {
        if idx.len() != keys.len() {
            out.push(path, format!("index {idx:?} has arity {}, expected {}", idx.len(), keys.len()));
            continue;
        }
        for ((id, (name, kind)), set) in idx.iter().zip(keys).zip(&sets) {
            if let Some(s) = set {
                if !s.contains(id) {
                    out.push(format!("{path}.{name}"), format!("\"{id}\" is not a declared member of {}", kind.label()));
                }
            }
        }
    }
}

fn unit_interval(path: &str, v: Option<f64>, out: &mut Out) {
    if let Some(v) = v {
        if !(0.0..=1.0).contains(&v) {
            out.push(path, format!("{v} must lie in [0, 1]"));
        }
    }
}

fn params(inst: &Instance, out: &mut Out) {
    for (key, p) in &inst.params {
        let (section, name) = key.split_once('.').unwrap_or((key, ""));
        match schema::spec(section, name) {
            Some(spec) => check_param(inst, key, spec, p, out),
            None => out.push(key.as_str(), "unknown parameter"),
        }
    }
    unit_interval("demand.gamma", inst.scalar("demand", "gamma"), out);
    unit_interval("demand.alpha", inst.scalar("demand", "alpha"), out);
    unit_interval("logistics.equity_weight", inst.scalar("logistics", "equity_weight"), out);
    if let Some(theta) = inst.list("demand", "theta") {
        if theta.windows(2).any(|w| w[1] > w[0]) {
            out.push("demand.theta", "coverage fractions not nonincreasing");
        }
        if theta.iter().any(|x| !(0.0..=1.0).contains(x)) {
            out.push("demand.theta", "coverage fractions must lie in [0, 1]");
        }
    }
    if let Some(levels) = inst.list("logistics", "level_distances") {
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            out.push("logistics.level_distances", "coverage distances not strictly increasing");
        }
        if let Some(theta) = inst.list("demand", "theta") {
            if theta.len() != levels.len() {
                out.push(
                    "logistics.level_distances",
                    format!("{} distances for {} coverage levels", levels.len(), theta.len()),
                );
            }
        }
    }
    if let Some(l) = inst.scalar("logistics", "lead_time") {
        if l.fract() != 0.0 {
            out.push("logistics.lead_time", "lead time must be an integer number of periods");
        }
    }
}

fn scenarios(inst: &Instance, out: &mut Out) {
    if inst.scenarios.is_empty() {
        return;
    }
    unique("scenarios", inst.scenarios.iter().map(|s| &s.id), out);
    let mut total = 0.0;
    for s in &inst.scenarios {
        if s.probability < 0.0 {
            out.push(format!("scenarios.{}.probability", s.id), "probability must be nonnegative");
        }
        total += s.probability;
        for (key, p) in &s.overrides {
            let (section, name) = key.split_once('.').unwrap_or((key, ""));
            let path = format!("scenarios.{}.{key}", s.id);
            if !schema::SCENARIO_OVERRIDABLE.contains(&(section, name)) {
                out.push(path, "parameter cannot be overridden per scenario");
            } else if let Some(spec) = schema::spec(section, name) {
                check_param(inst, &path, spec, p, out);
            }
        }
    }
    if (total - 1.0).abs() > TOL {
        out.push("scenarios", format!("probabilities sum to {total}, not 1"));
    }
}

fn epi(inst: &Instance, out: &mut Out) {
    let Some(e) = &inst.epi else { return };
    unit_interval("epi.beta", Some(e.beta), out);
    if e.alpha <= 0.0 {
        out.push("epi.alpha", "nominal infection rate must be positive");
    }
    for (name, v) in [("r_I", e.r_infection), ("r_d", e.r_detection), ("r_D", e.r_death)] {
        if v < 0.0 {
            out.push(format!("epi.{name}"), "rate must be nonnegative");
        }
    }
    if e.r_death_group.values().any(|v| *v < 0.0) {
        out.push("epi.r_D_group", "rate must be nonnegative");
    }
    if e.gamma.len() < inst.time.horizon {
        out.push(
            "epi.gamma",
            format!("response table has {} entries, horizon is {}", e.gamma.len(), inst.time.horizon),
        );
    }
    if e.gamma.iter().any(|v| *v < 0.0) {
        out.push("epi.gamma", "response values must be nonnegative");
    }
    for (name, t) in [("r_U", &e.r_undetected), ("r_H", &e.r_hospital), ("r_Q", &e.r_quarantine)] {
        if t.data.values().any(|v| *v < 0.0) {
            out.push(format!("epi.{name}"), "rate must be nonnegative");
        }
    }
    let split = !e.r_undetected.is_empty() || !e.r_hospital.is_empty() || !e.r_quarantine.is_empty();
    if split {
        'outer: for g in &inst.groups {
            for t in inst.periods() {
                let s = e.r_u(g, t) + e.r_h(g, t) + e.r_q(g, t);
                if (s - e.r_detection).abs() > 1e-9 {
                    out.push(
                        format!("epi.r_U[group={g},t={t}]"),
                        format!("r_U + r_H + r_Q = {s} differs from r_d = {}", e.r_detection),
                    );
                    break 'outer;
                }
            }
        }
    }
    if e.initial.data.values().chain(e.initial_vaccinated.data.values()).any(|v| *v < 0.0) {
        out.push("epi.initial", "initial compartments must be nonnegative");
    }
    if let Some(h) = &e.herd {
        herd(h, out);
    }
    if e.supply.as_ref().is_some_and(|s| s.iter().any(|v| *v < 0.0)) {
        out.push("epi.supply", "supply must be nonnegative");
    }
}

fn herd(h: &[(f64, f64)], out: &mut Out) {
    if h.len() < 2 {
        out.push("epi.herd", "at least two breakpoints required");
        return;
    }
    if h.iter().any(|(f, _)| !(0.0..=1.0).contains(f)) {
        out.push("epi.herd", "breakpoints must lie in [0, 1]");
    }
    if h.windows(2).any(|w| w[1].0 <= w[0].0) {
        out.push("epi.herd", "breakpoints not strictly increasing");
        return;
    }
    let slopes: Vec<f64> = h.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    if slopes.iter().any(|s| *s < -TOL) {
        out.push("epi.herd", "herd function must be nondecreasing");
    }
    if slopes.windows(2).any(|w| w[1] > w[0] + TOL) {
        out.push("epi.herd", "herd function must be concave");
    }
}

fn ambiguity(inst: &Instance, out: &mut Out) {
    let Some(a) = &inst.ambiguity else { return };
    if a.eps_mu < 0.0 {
        out.push("ambiguity.eps_mu", "must be nonnegative");
    }
    if !(0.0..=1.0).contains(&a.eps_sigma_lo) {
        out.push("ambiguity.eps_sigma_lo", "must lie in [0, 1]");
    }
    if a.eps_sigma_hi < 1.0 {
        out.push("ambiguity.eps_sigma_hi", "must be at least 1");
    }
    if inst.scenarios.is_empty() {
        out.push("ambiguity", "moment bounds need a scenario support");
    }
}
