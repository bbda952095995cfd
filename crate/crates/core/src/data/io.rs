//! JSON reading and writing for [`Instance`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::schema::{self, SetKind, Shape};
use super::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("reference error at {path}: \"{id}\" is not a declared member of {set}")]
    Reference { path: String, id: String, set: String },
}

fn schema_err(path: &str, reason: impl Into<String>) -> DataError {
    DataError::Schema {
        path: path.to_string(),
        reason: reason.into(),
    }
}

const TOP_KEYS: &[&str] = &[
    "time",
    "vaccines",
    "manufacturers",
    "distribution_centers",
    "vaccination_centers",
    "population_sites",
    "regions",
    "groups",
    "vehicles",
    "outreach_centers",
    "demand",
    "costs",
    "capacities",
    "logistics",
    "scenarios",
    "epi",
    "ambiguity",
];

pub(super) fn load(path: &Path) -> Result<Instance, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    from_str(&text)
}

pub(super) fn save(inst: &Instance, path: &Path) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(&to_value(inst)).map_err(|e| DataError::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub(super) fn from_str(text: &str) -> Result<Instance, DataError> {
    let root: Value = serde_json::from_str(text).map_err(|e| DataError::Parse(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| schema_err("$", "top level must be an object"))?;
    check_keys(obj, "$", TOP_KEYS, &["time", "vaccines"])?;

    let time = parse_time(&obj["time"])?;
    let mut inst = Instance::empty(time.horizon);
    inst.time = time;
    inst.manufacturers = id_list(obj.get("manufacturers"), "manufacturers")?;
    inst.dcs = parse_dcs(obj.get("distribution_centers"))?;
    inst.vcs = id_list(obj.get("vaccination_centers"), "vaccination_centers")?;
    inst.sites = id_list(obj.get("population_sites"), "population_sites")?;
    inst.regions = id_list(obj.get("regions"), "regions")?;
    inst.groups = id_list(obj.get("groups"), "groups")?;
    inst.vehicles = id_list(obj.get("vehicles"), "vehicles")?;
    inst.outreach = id_list(obj.get("outreach_centers"), "outreach_centers")?;
    inst.vaccines = parse_vaccines(&obj["vaccines"])?;

    let sets = SetIndex::new(&inst);
    for d in &inst.dcs {
        if let Some(list) = &d.serves {
            for k in list {
                sets.check(SetKind::Vc, k, &format!("distribution_centers.{}.serves", d.id))?;
            }
        }
    }
    for v in &inst.vaccines {
        if let Some(list) = &v.manufacturers {
            for m in list {
                sets.check(SetKind::Manufacturer, m, &format!("vaccines.{}.manufacturers", v.id))?;
            }
        }
    }

    let mut params = BTreeMap::new();
    for section in schema::SECTIONS {
        if let Some(v) = obj.get(*section) {
            let sec = v.as_object().ok_or_else(|| schema_err(section, "section must be an object"))?;
            for (name, value) in sec {
                let spec = schema::spec(section, name)
                    .ok_or_else(|| schema_err(&format!("{section}.{name}"), "unknown parameter"))?;
                let p = parse_param(spec, value, &format!("{section}.{name}"), &sets)?;
                params.insert(format!("{section}.{name}"), p);
            }
        }
    }
    inst.params = params;
    // coverage levels are resolved against theta once it is known
    let levels = inst.list("demand", "theta").map(|t| t.len()).unwrap_or(0);
    let sets = SetIndex { levels, ..sets };

    if let Some(v) = obj.get("scenarios") {
        inst.scenarios = parse_scenarios(v, &sets)?;
    }
    if let Some(v) = obj.get("epi") {
        inst.epi = Some(parse_epi(v, &sets)?);
    }
    if let Some(v) = obj.get("ambiguity") {
        inst.ambiguity = Some(parse_ambiguity(v, &sets)?);
    }
    Ok(inst)
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str], required: &[&str]) -> Result<(), DataError> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(schema_err(&format!("{path}.{k}"), "unknown key"));
        }
    }
    for r in required {
        if !obj.contains_key(*r) {
            return Err(schema_err(path, format!("missing required key \"{r}\"")));
        }
    }
    Ok(())
}

fn as_obj<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, DataError> {
    v.as_object().ok_or_else(|| schema_err(path, "expected an object"))
}

fn as_arr<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, DataError> {
    v.as_array().ok_or_else(|| schema_err(path, "expected an array"))
}

fn num(v: &Value, path: &str) -> Result<f64, DataError> {
    v.as_f64().ok_or_else(|| schema_err(path, "expected a number"))
}

fn uint(v: &Value, path: &str) -> Result<u64, DataError> {
    if let Some(u) = v.as_u64() {
        return Ok(u);
    }
    match v.as_f64() {
        Some(f) if f >= 0.0 && f.fract() == 0.0 => Ok(f as u64),
        _ => Err(schema_err(path, "expected a nonnegative integer")),
    }
}

fn string(v: &Value, path: &str) -> Result<String, DataError> {
    v.as_str().map(str::to_string).ok_or_else(|| schema_err(path, "expected a string"))
}

fn parse_time(v: &Value) -> Result<TimeGrid, DataError> {
    let o = as_obj(v, "time")?;
    check_keys(o, "time", &["horizon", "period_unit"], &["horizon"])?;
    let horizon = uint(&o["horizon"], "time.horizon")? as usize;
    let period_unit = match o.get("period_unit") {
        Some(u) => string(u, "time.period_unit")?,
        None => "period".to_string(),
    };
    Ok(TimeGrid { horizon, period_unit })
}

fn member_id(v: &Value, path: &str) -> Result<String, DataError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Object(o) => {
            check_keys(o, path, &["id"], &["id"])?;
            member_id(&o["id"], &format!("{path}.id"))
        }
        _ => Err(schema_err(path, "expected an id string or {\"id\": ...}")),
    }
}

fn id_list(v: Option<&Value>, path: &str) -> Result<Vec<String>, DataError> {
    let Some(v) = v else { return Ok(vec![]) };
    as_arr(v, path)?
        .iter()
        .enumerate()
        .map(|(n, x)| member_id(x, &format!("{path}[{n}]")))
        .collect()
}

fn parse_dcs(v: Option<&Value>) -> Result<Vec<DistributionCenter>, DataError> {
    let Some(v) = v else { return Ok(vec![]) };
    let mut out = vec![];
    for (n, x) in as_arr(v, "distribution_centers")?.iter().enumerate() {
        let path = format!("distribution_centers[{n}]");
        match x {
            Value::Object(o) => {
                check_keys(o, &path, &["id", "serves"], &["id"])?;
                let id = member_id(&o["id"], &format!("{path}.id"))?;
                let serves = match o.get("serves") {
                    Some(s) => Some(id_list(Some(s), &format!("{path}.serves"))?),
                    None => None,
                };
                out.push(DistributionCenter { id, serves });
            }
            _ => out.push(DistributionCenter {
                id: member_id(x, &path)?,
                serves: None,
            }),
        }
    }
    Ok(out)
}

fn parse_vaccines(v: &Value) -> Result<Vec<VaccineType>, DataError> {
    let mut out = vec![];
    for (n, x) in as_arr(v, "vaccines")?.iter().enumerate() {
        let path = format!("vaccines[{n}]");
        let o = as_obj(x, &path)?;
        check_keys(
            o,
            &path,
            &["id", "doses_per_vial", "shelf_life", "open_vial_life", "cold_tier", "manufacturers", "vial_sizes"],
            &["id", "doses_per_vial", "shelf_life", "open_vial_life", "cold_tier"],
        )?;
        let id = member_id(&o["id"], &format!("{path}.id"))?;
        let u32f = |k: &str| -> Result<u32, DataError> { Ok(uint(&o[k], &format!("{path}.{k}"))? as u32) };
        let doses_per_vial = u32f("doses_per_vial")?;
        let tier = string(&o["cold_tier"], &format!("{path}.cold_tier"))?;
        let cold_tier = ColdTier::parse(&tier)
            .ok_or_else(|| schema_err(&format!("{path}.cold_tier"), format!("unknown tier \"{tier}\"")))?;
        let manufacturers = match o.get("manufacturers") {
            Some(m) => Some(id_list(Some(m), &format!("{path}.manufacturers"))?),
            None => None,
        };
        let vial_sizes = match o.get("vial_sizes") {
            Some(vs) => {
                let mut sizes = vec![];
                for (q, s) in as_arr(vs, &format!("{path}.vial_sizes"))?.iter().enumerate() {
                    let sp = format!("{path}.vial_sizes[{q}]");
                    let so = as_obj(s, &sp)?;
                    check_keys(so, &sp, &["id", "doses"], &["id", "doses"])?;
                    sizes.push(VialSize {
                        id: member_id(&so["id"], &format!("{sp}.id"))?,
                        doses: uint(&so["doses"], &format!("{sp}.doses"))? as u32,
                    });
                }
                sizes
            }
            None => vec![VialSize {
                id: format!("v{doses_per_vial}"),
                doses: doses_per_vial,
            }],
        };
        out.push(VaccineType {
            id,
            doses_per_vial,
            shelf_life: u32f("shelf_life")?,
            open_vial_life: u32f("open_vial_life")?,
            cold_tier,
            manufacturers,
            vial_sizes,
        });
    }
    Ok(out)
}

/// Membership lookup for every index set.
#[derive(Clone)]
pub(super) struct SetIndex {
    members: BTreeMap<&'static str, BTreeSet<String>>,
    horizon: usize,
    levels: usize,
}

impl SetIndex {
    pub(super) fn new(inst: &Instance) -> Self {
        let mut members: BTreeMap<&'static str, BTreeSet<String>> = BTreeMap::new();
        let mut put = |k: SetKind, ids: Vec<String>| {
            members.insert(k.label(), ids.into_iter().collect());
        };
        put(SetKind::Manufacturer, inst.manufacturers.clone());
        put(SetKind::Dc, inst.dcs.iter().map(|d| d.id.clone()).collect());
        put(SetKind::Vc, inst.vcs.clone());
        put(SetKind::Site, inst.sites.clone());
        put(SetKind::Region, inst.regions.clone());
        put(SetKind::Group, inst.groups.clone());
        put(SetKind::Vehicle, inst.vehicles.clone());
        put(SetKind::Outreach, inst.outreach.clone());
        put(SetKind::Vaccine, inst.vaccines.iter().map(|v| v.id.clone()).collect());
        let nodes: BTreeSet<String> = [
            &inst.manufacturers,
            &inst.vcs,
            &inst.sites,
            &inst.regions,
            &inst.outreach,
        ]
        .into_iter()
        .flatten()
        .cloned()
        .chain(inst.dcs.iter().map(|d| d.id.clone()))
        .collect();
        members.insert(SetKind::Node.label(), nodes);
        SetIndex {
            members,
            horizon: inst.time.horizon,
            levels: inst.list("demand", "theta").map(|t| t.len()).unwrap_or(0),
        }
    }

    fn check(&self, kind: SetKind, id: &str, path: &str) -> Result<(), DataError> {
        let ok = match kind {
            SetKind::Time => id.parse::<usize>().map(|t| t >= 1 && t <= self.horizon).unwrap_or(false),
            SetKind::Level => id.parse::<usize>().map(|q| q >= 1 && q <= self.levels).unwrap_or(false),
            _ => self.members[kind.label()].contains(id),
        };
        if ok {
            Ok(())
        } else {
            Err(DataError::Reference {
                path: path.to_string(),
                id: id.to_string(),
                set: kind.label().to_string(),
            })
        }
    }
}

fn index_value(v: &Value, kind: SetKind, path: &str) -> Result<String, DataError> {
    if kind.is_numeric() {
        Ok(uint(v, path)?.to_string())
    } else {
        member_id(v, path)
    }
}

fn parse_tensor(
    keys: &[(&str, SetKind)],
    v: &Value,
    path: &str,
    sets: &SetIndex,
) -> Result<Tensor, DataError> {
    let mut t = Tensor::default();
    let mut allowed: Vec<&str> = keys.iter().map(|(k, _)| *k).collect();
    allowed.push("value");
    for (n, rec) in as_arr(v, path)?.iter().enumerate() {
        let rp = format!("{path}[{n}]");
        let o = as_obj(rec, &rp)?;
        check_keys(o, &rp, &allowed, &allowed)?;
        let mut idx = Vec::with_capacity(keys.len());
        for (k, kind) in keys {
            let id = index_value(&o[*k], *kind, &format!("{rp}.{k}"))?;
            sets.check(*kind, &id, &format!("{rp}.{k}"))?;
            idx.push(id);
        }
        let value = num(&o["value"], &format!("{rp}.value"))?;
        if t.data.insert(idx, value).is_some() {
            return Err(schema_err(&rp, "duplicate index"));
        }
    }
    Ok(t)
}

fn parse_param(spec: &schema::ParamSpec, v: &Value, path: &str, sets: &SetIndex) -> Result<Param, DataError> {
    match spec.shape {
        Shape::Scalar => Ok(Param::Scalar(num(v, path)?)),
        Shape::List => Ok(Param::List(
            as_arr(v, path)?
                .iter()
                .enumerate()
                .map(|(n, x)| num(x, &format!("{path}[{n}]")))
                .collect::<Result<_, _>>()?,
        )),
        Shape::Tensor(keys) => Ok(Param::Tensor(parse_tensor(keys, v, path, sets)?)),
    }
}

fn parse_scenarios(v: &Value, sets: &SetIndex) -> Result<Vec<Scenario>, DataError> {
    let mut out = vec![];
    for (n, x) in as_arr(v, "scenarios")?.iter().enumerate() {
        let path = format!("scenarios[{n}]");
        let o = as_obj(x, &path)?;
        let mut allowed = vec!["id", "probability"];
        allowed.extend(schema::SCENARIO_OVERRIDABLE.iter().map(|(s, _)| *s));
        check_keys(o, &path, &allowed, &["id", "probability"])?;
        let mut overrides = BTreeMap::new();
        for (section, sv) in o {
            if section == "id" || section == "probability" {
                continue;
            }
            for (name, pv) in as_obj(sv, &format!("{path}.{section}"))? {
                let pp = format!("{path}.{section}.{name}");
                if !schema::SCENARIO_OVERRIDABLE.contains(&(section.as_str(), name.as_str())) {
                    return Err(schema_err(&pp, "parameter cannot be overridden per scenario"));
                }
                let spec = schema::spec(section, name).expect("overridable parameters are in the catalog");
                overrides.insert(format!("{section}.{name}"), parse_param(spec, pv, &pp, sets)?);
            }
        }
        out.push(Scenario {
            id: member_id(&o["id"], &format!("{path}.id"))?,
            probability: num(&o["probability"], &format!("{path}.probability"))?,
            overrides,
        });
    }
    Ok(out)
}

fn compartment(v: &Value, allowed: &[&str], path: &str) -> Result<String, DataError> {
    let s = string(v, path)?;
    if allowed.contains(&s.as_str()) {
        Ok(s)
    } else {
        Err(DataError::Reference {
            path: path.to_string(),
            id: s,
            set: format!("compartments {}", allowed.join(",")),
        })
    }
}

fn parse_epi(v: &Value, sets: &SetIndex) -> Result<EpiParams, DataError> {
    let o = as_obj(v, "epi")?;
    check_keys(
        o,
        "epi",
        &[
            "beta", "alpha", "gamma", "r_I", "r_d", "r_D", "r_D_group", "r_U", "r_H", "r_Q", "initial",
            "initial_vaccinated", "herd", "deaths_weight", "infections_weight", "supply",
        ],
        &["beta", "alpha", "gamma", "r_I", "r_d", "r_D"],
    )?;
    let f = |k: &str| num(&o[k], &format!("epi.{k}"));
    let list = |k: &str| -> Result<Vec<f64>, DataError> {
        as_arr(&o[k], &format!("epi.{k}"))?
            .iter()
            .enumerate()
            .map(|(n, x)| num(x, &format!("epi.{k}[{n}]")))
            .collect()
    };
    // rate tables may extend past the horizon
    let long = SetIndex {
        horizon: usize::MAX,
        ..sets.clone()
    };
    let rate = |k: &str| -> Result<Tensor, DataError> {
        match o.get(k) {
            Some(x) => parse_tensor(&[("group", SetKind::Group), ("t", SetKind::Time)], x, &format!("epi.{k}"), &long),
            None => Ok(Tensor::default()),
        }
    };
    let mut r_death_group = BTreeMap::new();
    if let Some(x) = o.get("r_D_group") {
        for (n, rec) in as_arr(x, "epi.r_D_group")?.iter().enumerate() {
            let rp = format!("epi.r_D_group[{n}]");
            let ro = as_obj(rec, &rp)?;
            check_keys(ro, &rp, &["group", "value"], &["group", "value"])?;
            let g = member_id(&ro["group"], &format!("{rp}.group"))?;
            sets.check(SetKind::Group, &g, &format!("{rp}.group"))?;
            r_death_group.insert(g, num(&ro["value"], &format!("{rp}.value"))?);
        }
    }
    let mut initial = Tensor::default();
    if let Some(x) = o.get("initial") {
        for (n, rec) in as_arr(x, "epi.initial")?.iter().enumerate() {
            let rp = format!("epi.initial[{n}]");
            let ro = as_obj(rec, &rp)?;
            check_keys(ro, &rp, &["region", "group", "compartment", "value"], &["region", "group", "compartment", "value"])?;
            let r = member_id(&ro["region"], &format!("{rp}.region"))?;
            sets.check(SetKind::Region, &r, &format!("{rp}.region"))?;
            let g = member_id(&ro["group"], &format!("{rp}.group"))?;
            sets.check(SetKind::Group, &g, &format!("{rp}.group"))?;
            let c = compartment(&ro["compartment"], GROUP_COMPARTMENTS, &format!("{rp}.compartment"))?;
            if initial.data.insert(vec![r, g, c], num(&ro["value"], &format!("{rp}.value"))?).is_some() {
                return Err(schema_err(&rp, "duplicate index"));
            }
        }
    }
    let mut initial_vaccinated = Tensor::default();
    if let Some(x) = o.get("initial_vaccinated") {
        for (n, rec) in as_arr(x, "epi.initial_vaccinated")?.iter().enumerate() {
            let rp = format!("epi.initial_vaccinated[{n}]");
            let ro = as_obj(rec, &rp)?;
            check_keys(ro, &rp, &["region", "compartment", "value"], &["region", "compartment", "value"])?;
            let r = member_id(&ro["region"], &format!("{rp}.region"))?;
            sets.check(SetKind::Region, &r, &format!("{rp}.region"))?;
            let c = compartment(&ro["compartment"], VACCINATED_COMPARTMENTS, &format!("{rp}.compartment"))?;
            if initial_vaccinated.data.insert(vec![r, c], num(&ro["value"], &format!("{rp}.value"))?).is_some() {
                return Err(schema_err(&rp, "duplicate index"));
            }
        }
    }
    let herd = match o.get("herd") {
        Some(x) => {
            let mut pts = vec![];
            for (n, p) in as_arr(x, "epi.herd")?.iter().enumerate() {
                let pp = format!("epi.herd[{n}]");
                let a = as_arr(p, &pp)?;
                if a.len() != 2 {
                    return Err(schema_err(&pp, "breakpoint must be [f, herd(f)]"));
                }
                pts.push((num(&a[0], &pp)?, num(&a[1], &pp)?));
            }
            Some(pts)
        }
        None => None,
    };
    Ok(EpiParams {
        beta: f("beta")?,
        alpha: f("alpha")?,
        gamma: list("gamma")?,
        r_infection: f("r_I")?,
        r_detection: f("r_d")?,
        r_death: f("r_D")?,
        r_death_group,
        r_undetected: rate("r_U")?,
        r_hospital: rate("r_H")?,
        r_quarantine: rate("r_Q")?,
        initial,
        initial_vaccinated,
        herd,
        deaths_weight: if o.contains_key("deaths_weight") { f("deaths_weight")? } else { 1.0 },
        infections_weight: if o.contains_key("infections_weight") { f("infections_weight")? } else { 0.0 },
        supply: if o.contains_key("supply") { Some(list("supply")?) } else { None },
    })
}

fn parse_ambiguity(v: &Value, sets: &SetIndex) -> Result<AmbiguitySpec, DataError> {
    let o = as_obj(v, "ambiguity")?;
    check_keys(
        o,
        "ambiguity",
        &["eps_mu", "eps_sigma_lo", "eps_sigma_hi", "mean", "sigma"],
        &["eps_mu", "eps_sigma_lo", "eps_sigma_hi"],
    )?;
    let keys: &[(&str, SetKind)] = &[("vc", SetKind::Vc), ("t", SetKind::Time)];
    let tensor = |k: &str| -> Result<Tensor, DataError> {
        match o.get(k) {
            Some(x) => parse_tensor(keys, x, &format!("ambiguity.{k}"), sets),
            None => Ok(Tensor::default()),
        }
    };
    Ok(AmbiguitySpec {
        eps_mu: num(&o["eps_mu"], "ambiguity.eps_mu")?,
        eps_sigma_lo: num(&o["eps_sigma_lo"], "ambiguity.eps_sigma_lo")?,
        eps_sigma_hi: num(&o["eps_sigma_hi"], "ambiguity.eps_sigma_hi")?,
        mean: tensor("mean")?,
        sigma: tensor("sigma")?,
    })
}

// ---------------------------------------------------------------- writing

fn f64v(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn index_json(id: &str, kind: SetKind) -> Value {
    if kind.is_numeric() {
        id.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::from(id))
    } else {
        Value::from(id)
    }
}

fn tensor_json(keys: &[(&str, SetKind)], t: &Tensor) -> Value {
    let mut entries: Vec<(&Vec<String>, &f64)> = t.iter().collect();
    entries.sort_by(|a, b| crate::model::cmp_indices(a.0, b.0));
    Value::Array(
        entries
            .into_iter()
            .map(|(idx, v)| {
                let mut m = Map::new();
                for ((k, kind), id) in keys.iter().zip(idx) {
                    m.insert(k.to_string(), index_json(id, *kind));
                }
                m.insert("value".into(), f64v(*v));
                Value::Object(m)
            })
            .collect(),
    )
}

fn param_json(spec: &schema::ParamSpec, p: &Param) -> Value {
    match (spec.shape, p) {
        (_, Param::Scalar(v)) => f64v(*v),
        (_, Param::List(v)) => Value::Array(v.iter().map(|x| f64v(*x)).collect()),
        (Shape::Tensor(keys), Param::Tensor(t)) => tensor_json(keys, t),
        (_, Param::Tensor(t)) => tensor_json(&[], t),
    }
}

fn params_json(params: &BTreeMap<String, Param>, out: &mut Map<String, Value>) {
    for (key, p) in params {
        let (section, name) = key.split_once('.').expect("parameter keys are section.name");
        let Some(spec) = schema::spec(section, name) else { continue };
        let sec = out
            .entry(section.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("section is an object");
        sec.insert(name.to_string(), param_json(spec, p));
    }
}

fn ids(v: &[String]) -> Value {
    Value::Array(v.iter().map(|s| Value::from(s.as_str())).collect())
}

pub(super) fn to_value(inst: &Instance) -> Value {
    let mut root = Map::new();
    root.insert(
        "time".into(),
        json!({"horizon": inst.time.horizon, "period_unit": inst.time.period_unit}),
    );
    root.insert(
        "vaccines".into(),
        Value::Array(
            inst.vaccines
                .iter()
                .map(|v| {
                    let mut m = Map::new();
                    m.insert("id".into(), v.id.clone().into());
                    m.insert("doses_per_vial".into(), v.doses_per_vial.into());
                    m.insert("shelf_life".into(), v.shelf_life.into());
                    m.insert("open_vial_life".into(), v.open_vial_life.into());
                    m.insert("cold_tier".into(), v.cold_tier.as_str().into());
                    if let Some(ms) = &v.manufacturers {
                        m.insert("manufacturers".into(), ids(ms));
                    }
                    m.insert(
                        "vial_sizes".into(),
                        Value::Array(
                            v.vial_sizes
                                .iter()
                                .map(|s| json!({"id": s.id, "doses": s.doses}))
                                .collect(),
                        ),
                    );
                    Value::Object(m)
                })
                .collect(),
        ),
    );
    root.insert("manufacturers".into(), ids(&inst.manufacturers));
    root.insert(
        "distribution_centers".into(),
        Value::Array(
            inst.dcs
                .iter()
                .map(|d| match &d.serves {
                    Some(s) => json!({"id": d.id, "serves": ids(s)}),
                    None => Value::from(d.id.as_str()),
                })
                .collect(),
        ),
    );
    root.insert("vaccination_centers".into(), ids(&inst.vcs));
    root.insert("population_sites".into(), ids(&inst.sites));
    root.insert("regions".into(), ids(&inst.regions));
    root.insert("groups".into(), ids(&inst.groups));
    root.insert("vehicles".into(), ids(&inst.vehicles));
    root.insert("outreach_centers".into(), ids(&inst.outreach));
    params_json(&inst.params, &mut root);
    if !inst.scenarios.is_empty() {
        root.insert(
            "scenarios".into(),
            Value::Array(
                inst.scenarios
                    .iter()
                    .map(|s| {
                        let mut m = Map::new();
                        m.insert("id".into(), s.id.clone().into());
                        m.insert("probability".into(), f64v(s.probability));
                        params_json(&s.overrides, &mut m);
                        Value::Object(m)
                    })
                    .collect(),
            ),
        );
    }
    if let Some(e) = &inst.epi {
        root.insert("epi".into(), epi_json(e));
    }
    if let Some(a) = &inst.ambiguity {
        let keys: &[(&str, SetKind)] = &[("vc", SetKind::Vc), ("t", SetKind::Time)];
        root.insert(
            "ambiguity".into(),
            json!({
                "eps_mu": f64v(a.eps_mu),
                "eps_sigma_lo": f64v(a.eps_sigma_lo),
                "eps_sigma_hi": f64v(a.eps_sigma_hi),
                "mean": tensor_json(keys, &a.mean),
                "sigma": tensor_json(keys, &a.sigma),
            }),
        );
    }
    Value::Object(root)
}

fn epi_json(e: &EpiParams) -> Value {
    let rate_keys: &[(&str, SetKind)] = &[("group", SetKind::Group), ("t", SetKind::Time)];
    let fl = |v: &[f64]| Value::Array(v.iter().map(|x| f64v(*x)).collect());
    let mut m = Map::new();
    m.insert("beta".into(), f64v(e.beta));
    m.insert("alpha".into(), f64v(e.alpha));
    m.insert("gamma".into(), fl(&e.gamma));
    m.insert("r_I".into(), f64v(e.r_infection));
    m.insert("r_d".into(), f64v(e.r_detection));
    m.insert("r_D".into(), f64v(e.r_death));
    m.insert(
        "r_D_group".into(),
        Value::Array(
            e.r_death_group
                .iter()
                .map(|(g, v)| json!({"group": g, "value": f64v(*v)}))
                .collect(),
        ),
    );
    m.insert("r_U".into(), tensor_json(rate_keys, &e.r_undetected));
    m.insert("r_H".into(), tensor_json(rate_keys, &e.r_hospital));
    m.insert("r_Q".into(), tensor_json(rate_keys, &e.r_quarantine));
    m.insert(
        "initial".into(),
        tensor_json(
            &[("region", SetKind::Region), ("group", SetKind::Group), ("compartment", SetKind::Group)],
            &e.initial,
        ),
    );
    m.insert(
        "initial_vaccinated".into(),
        tensor_json(&[("region", SetKind::Region), ("compartment", SetKind::Group)], &e.initial_vaccinated),
    );
    if let Some(h) = &e.herd {
        m.insert(
            "herd".into(),
            Value::Array(h.iter().map(|(a, b)| Value::Array(vec![f64v(*a), f64v(*b)])).collect()),
        );
    }
    m.insert("deaths_weight".into(), f64v(e.deaths_weight));
    m.insert("infections_weight".into(), f64v(e.infections_weight));
    if let Some(s) = &e.supply {
        m.insert("supply".into(), fl(s));
    }
    Value::Object(m)
}
