//! Acceptance suite. Prints one line per criterion and exits nonzero when
//! any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use common::{chain, rk4_single};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vaxopt::data::{Instance, Param, Scenario, Tensor, VialSize};
use vaxopt::epi::{self, EmbeddingOptions, SimOptions, VaccinationPlan};
use vaxopt::equity::{self, dominates, epsilon_constraint_scalarize, gini, nondominated, pareto_sweep, senses};
use vaxopt::ix;
use vaxopt::location::{self, Assignment, COVERAGE, DISTANCE};
use vaxopt::model::{lp, BuildError, BuildResult, Domain, LinExpr, Model, ObjSense, Sense};
use vaxopt::routing::{self, Subtour};
use vaxopt::scm::{self, AssignmentMode, DemandMode, ScmConfig};
use vaxopt::solve::{
    audit, brute_force_oracle, conservation_summary, solution_csv, solve, solve_milp, MilpOptions, SearchBox, Solution,
    Status,
};
use vaxopt::uncertainty::{
    build_cc_constraints, build_tssp_extensive, dro_worst_case, first_stage_vars, fix_first_stage, AmbiguitySet,
    CcTarget, DroOptions,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn load(name: &str) -> Instance {
    Instance::load(fixture(name)).unwrap()
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn get(m: &Model, s: &Solution, family: &str, idx: &[&str]) -> f64 {
    let idx: Vec<String> = idx.iter().map(|x| x.to_string()).collect();
    s.get(m, family, &idx)
}

fn keep_first_objective(m: &mut Model) {
    let names: Vec<String> = m.objectives().iter().skip(1).map(|o| o.name.clone()).collect();
    for n in names {
        m.remove_objective(&n);
    }
}

fn scm_model(inst: &Instance, cfg: &ScmConfig) -> Model {
    let mut m = Model::new();
    scm::build_dc_flow(&mut m, inst, cfg).unwrap();
    scm::build_vc_flow(&mut m, inst, cfg, DemandMode::Shortage).unwrap();
    m
}

// ---- 1: exact solver against enumeration ---------------------------------

/// Every variable becomes integer with a box of at most `width + 1` points.
/// `None` when a variable has no integer point or the box is too large.
fn integerize(m: &Model, width: f64) -> Option<Model> {
    let mut out = m.clone();
    let mut points = 1.0;
    for (i, v) in m.vars().iter().enumerate() {
        let lo = if v.lo.is_finite() {
            (v.lo - 1e-9).ceil()
        } else if v.hi.is_finite() {
            (v.hi + 1e-9).floor() - width
        } else {
            -width
        };
        let hi = if v.hi.is_finite() { (v.hi + 1e-9).floor().min(lo + width) } else { lo + width };
        if lo > hi {
            return None;
        }
        points *= hi - lo + 1.0;
        let id = vaxopt::model::VarId(i);
        if v.domain != Domain::Binary {
            out.set_domain(id, Domain::Integer);
        }
        out.set_bounds(id, lo, hi).ok()?;
    }
    (points <= 2e5 && m.num_vars() <= 16).then_some(out)
}

fn fit(m: Model) -> Option<Model> {
    let mut m = m;
    keep_first_objective(&mut m);
    [4.0, 3.0, 2.0, 1.0].into_iter().find_map(|w| integerize(&m, w))
}

fn gen_scm(rng: &mut ChaCha8Rng) -> Model {
    let mut inst = chain(1, &["D1"], &["V1", "V2"]);
    inst.put("capacities", "production", &["M1", "P", "1"], rng.random_range(0..=6) as f64);
    for k in ["V1", "V2"] {
        inst.put("demand", "kpt", &[k, "P", "1"], rng.random_range(0..=4) as f64);
        inst.put("costs", "shipping_dv", &["D1", k], rng.random_range(0..=3) as f64);
        inst.put("costs", "shortage", &[k, "P"], rng.random_range(1..=9) as f64);
    }
    inst.put("costs", "shipping_md", &["M1", "D1"], rng.random_range(0..=3) as f64);
    inst.put("costs", "holding", &["D1"], 0.5 * rng.random_range(0..=2) as f64);
    scm_model(&inst, &ScmConfig::integer(6.0))
}

fn gen_priority(rng: &mut ChaCha8Rng) -> Model {
    let avail = rng.random_range(0..=6) as f64;
    priority_model(avail, rng.random_range(0..=4) as f64, rng.random_range(0..=4) as f64, 6.0)
}

fn gen_packing(rng: &mut ChaCha8Rng) -> Model {
    let mut inst = chain(1, &["D1", "D2"], &["V1", "V2", "V3"]);
    for k in ["V1", "V2", "V3"] {
        for j in ["D1", "D2"] {
            inst.put("logistics", "dc_vc_feasible", &[k, j], rng.random_range(0..=1) as f64);
        }
    }
    let mut m = Model::new();
    scm::build_dc_vc_assignment(&mut m, &inst, &ScmConfig::default(), AssignmentMode::Packing).unwrap();
    let mut obj = LinExpr::new();
    for v in m.family_vars("x_jk") {
        obj.add_term(v, rng.random_range(-2..=5) as f64);
    }
    m.set_objective("reward", ObjSense::Maximize, obj);
    m
}

fn gen_vials(rng: &mut ChaCha8Rng) -> Model {
    let inst = vial_instance(&[rng.random_range(2..=5), 1], 1, 1);
    let mut m = Model::new();
    scm::build_vial_dose_balance(&mut m, &inst, &ScmConfig::integer(8.0)).unwrap();
    let x = m.var("x_v", &ix!["G1", "V1", "P", 1]).unwrap();
    m.set_bounds(x, 0.0, rng.random_range(0..=7) as f64).unwrap();
    let mut obj = LinExpr::term(x, -3.0);
    for v in m.family_vars("N_vs") {
        obj.add_term(v, rng.random_range(1..=6) as f64);
    }
    m.set_objective("cost", ObjSense::Minimize, obj);
    m
}

fn covering_instance(pops: &[f64], costs: &[f64], reach: &[&[bool]]) -> Instance {
    let mut inst = Instance::empty(1);
    inst.sites = (1..=pops.len()).map(|i| format!("S{i}")).collect();
    inst.vcs = (1..=costs.len()).map(|k| format!("V{k}")).collect();
    for (i, s) in inst.sites.clone().iter().enumerate() {
        inst.put("demand", "site", &[s], pops[i]);
        inst.put("demand", "coverage", &[s], pops[i]);
        for (k, v) in inst.vcs.clone().iter().enumerate() {
            inst.put("logistics", "distance", &[s, v], if reach[i][k] { 1.0 } else { 10.0 });
        }
    }
    for (k, v) in inst.vcs.clone().iter().enumerate() {
        inst.put("costs", "vc_open", &[v], costs[k]);
    }
    inst.set_scalar("logistics", "max_distance", 5.0);
    inst
}

fn gen_coverage(rng: &mut ChaCha8Rng) -> Model {
    let pops: Vec<f64> = (0..3).map(|_| rng.random_range(1..=30) as f64).collect();
    let reach: Vec<Vec<bool>> = (0..3).map(|_| (0..3).map(|_| rng.random_bool(0.5)).collect()).collect();
    let refs: Vec<&[bool]> = reach.iter().map(Vec::as_slice).collect();
    let mut inst = covering_instance(&pops, &[0.0; 3], &refs);
    inst.set_scalar("capacities", "max_vcs", rng.random_range(1..=2) as f64);
    let mut m = Model::new();
    location::build_max_coverage(&mut m, &inst).unwrap();
    m
}

fn gen_assignment(rng: &mut ChaCha8Rng) -> Model {
    let pops: Vec<f64> = (0..3).map(|_| rng.random_range(1..=9) as f64 * 10.0).collect();
    let eta: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(1..=6) as f64).collect()).collect();
    let mut m = biobjective(&pops, &eta, rng.random_range(1..=2) as f64);
    if rng.random_bool(0.5) {
        m.remove_objective(COVERAGE);
    }
    m
}

fn gen_routing(rng: &mut ChaCha8Rng) -> Model {
    let n = rng.random_range(2..=3);
    let pts: Vec<(f64, f64)> = (0..=n).map(|_| (rng.random_range(0..=5) as f64, rng.random_range(0..=5) as f64)).collect();
    let demand: Vec<f64> = (0..n).map(|_| rng.random_range(1..=3) as f64).collect();
    let inst = routing_network(&manhattan(&pts), &demand, &[("H1", 9.0)]);
    let mut m = Model::new();
    routing::build_vrp(&mut m, &inst, Subtour::Mtz).unwrap();
    m
}

fn gen_maximin(rng: &mut ChaCha8Rng) -> Model {
    let demands: Vec<f64> = (0..rng.random_range(2..=3)).map(|_| rng.random_range(1..=5) as f64).collect();
    let inst = groups_instance(&demands);
    let mut m = supply_model(&inst, rng.random_range(0..=8) as f64);
    equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
    m
}

fn gen_deviation(rng: &mut ChaCha8Rng) -> Model {
    let mut inst = Instance::empty(1);
    inst.regions = vec!["R1".into(), "R2".into()];
    inst.groups = vec!["G1".into()];
    for r in ["R1", "R2"] {
        inst.put("demand", "rg", &[r, "G1"], rng.random_range(1..=4) as f64);
        inst.put("logistics", "fair_allocation", &[r, "G1"], rng.random_range(0..=3) as f64);
    }
    inst.set_scalar("demand", "gamma", 0.5);
    inst.set_scalar("logistics", "penalty", rng.random_range(0..=3) as f64);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, rng.random_range(0..=6) as f64).unwrap();
    equity::build_deviation_equity(&mut m, &inst, 0.5, 1.0).unwrap();
    m
}

fn gen_tssp(rng: &mut ChaCha8Rng) -> Model {
    let n = rng.random_range(2..=3);
    let demands: Vec<f64> = (0..n).map(|_| rng.random_range(0..=5) as f64).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let inst = capacity_instance(&demands, &probs);
    capacity_tssp(&inst, rng.random_range(1..=3) as f64, rng.random_range(1..=6) as f64, 5.0)
}

fn gen_chance(rng: &mut ChaCha8Rng) -> Model {
    let mut inst = chain(1, &["D1", "D2"], &["K1"]);
    inst.put("demand", "mean_kpt", &["K1", "P", "1"], rng.random_range(1..=5) as f64);
    inst.put("demand", "sd_kpt", &["K1", "P", "1"], rng.random_range(0..=10) as f64 / 10.0);
    inst.put("costs", "shipping_dv", &["D1", "K1"], rng.random_range(1..=3) as f64);
    inst.put("costs", "shipping_dv", &["D2", "K1"], rng.random_range(1..=3) as f64);
    let mut m = Model::new();
    let alpha = [0.01, 0.05, 0.1][rng.random_range(0..3)];
    build_cc_constraints(&mut m, &inst, &ScmConfig::integer(8.0), CcTarget::Supply, alpha).unwrap();
    m
}

fn gen_random(rng: &mut ChaCha8Rng) -> Model {
    let n = rng.random_range(2..=6);
    let mut m = Model::new();
    let xs: Vec<_> = (0..n)
        .map(|i| m.add_var("x", ix![i], Domain::Integer, 0.0, rng.random_range(1..=4) as f64).unwrap())
        .collect();
    for r in 0..rng.random_range(1..=4) {
        let mut e = LinExpr::new();
        for &x in &xs {
            e.add_term(x, rng.random_range(-3..=4) as f64);
        }
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
        m.add_constraint(e, sense, rng.random_range(-2..=10) as f64, format!("r{r}")).unwrap();
    }
    let mut obj = LinExpr::new();
    for &x in &xs {
        obj.add_term(x, rng.random_range(-5..=5) as f64 + 0.5 * rng.random_range(0..2) as f64);
    }
    let sense = if rng.random_bool(0.5) { ObjSense::Minimize } else { ObjSense::Maximize };
    m.set_objective("obj", sense, obj);
    m
}

type Generator = fn(&mut ChaCha8Rng) -> Model;

const FAMILIES: [(&str, Generator); 12] = [
    ("scm", gen_scm),
    ("priority", gen_priority),
    ("packing", gen_packing),
    ("vials", gen_vials),
    ("coverage", gen_coverage),
    ("assignment", gen_assignment),
    ("routing", gen_routing),
    ("maximin", gen_maximin),
    ("deviation", gen_deviation),
    ("tssp", gen_tssp),
    ("chance", gen_chance),
    ("random", gen_random),
];

fn criterion_1() -> Outcome {
    let mut rng = vaxopt::rng_from_env();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0;
    let mut tries = 0;
    while total < 240 {
        tries += 1;
        ensure!(tries < 5000, "only {total} instances fit the enumeration box");
        let (name, gen) = FAMILIES[tries % FAMILIES.len()];
        let Some(m) = fit(gen(&mut rng)) else { continue };
        let b = brute_force_oracle(&m, &SearchBox::model_bounds()).map_err(|e| format!("{name}: {e}"))?;
        let s = solve_milp(&m, &MilpOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        ensure!(b.status == s.status, "{name}: oracle {:?}, solver {:?}", b.status, s.status);
        if b.status == Status::Optimal {
            let (x, y) = (b.objective.unwrap(), s.objective.unwrap());
            ensure!(near(x, y, 1e-6), "{name}: oracle {x}, solver {y}");
        }
        *counts.entry(name).or_default() += 1;
        total += 1;
    }
    ensure!(counts.len() == FAMILIES.len(), "families covered: {counts:?}");
    Ok(format!("{total} instances over {} families agree", counts.len()))
}

// ---- 2: flow conservation and residuals -----------------------------------

fn toy_tssp_model(inst: &Instance, first_stage_dc: bool) -> Model {
    let cfg = ScmConfig::default();
    let dc = |m: &mut Model, si: &Instance| scm::build_dc_flow(m, si, &cfg);
    let vc = |m: &mut Model, si: &Instance| scm::build_vc_flow(m, si, &cfg, DemandMode::Shortage);
    let mut m = Model::new();
    if first_stage_dc {
        build_tssp_extensive(&mut m, inst, &[&dc], &[&vc]).unwrap();
    } else {
        build_tssp_extensive(&mut m, inst, &[], &[&dc, &vc]).unwrap();
    }
    m
}

fn criterion_2() -> Outcome {
    let toy = load("toy.json");
    let carbon = load("toy_carbon.json");
    let mut carbon_m = scm_model(&carbon, &ScmConfig::default());
    equity::build_carbon_objective(&mut carbon_m, &carbon).unwrap();
    let bounds = BTreeMap::from([(scm::COST.to_string(), 1e5), (equity::SHORTAGE.to_string(), 15.0)]);
    let carbon_m = epsilon_constraint_scalarize(&carbon_m, equity::EMISSION, &bounds).unwrap();
    // totals are summed over scenarios, so a shared first stage is checked row by row only
    let cases: Vec<(&str, Model, Option<f64>)> = vec![
        ("toy", scm_model(&toy, &ScmConfig::default()), Some(1e-6)),
        ("toy integer", scm_model(&toy, &ScmConfig::integer(100.0)), Some(0.0)),
        ("toy_tssp", toy_tssp_model(&load("toy_tssp.json"), false), Some(1e-6)),
        ("toy_tssp first stage", toy_tssp_model(&load("toy_tssp.json"), true), None),
        ("toy_carbon", carbon_m, Some(1e-6)),
    ];
    let mut worst = 0.0f64;
    for (name, m, tol) in &cases {
        let s = solve(m).map_err(|e| format!("{name}: {e}"))?;
        ensure!(s.is_optimal(), "{name}: {:?}", s.status);
        let rep = audit(m, &s);
        ensure!(rep.is_clean(), "{name}: audit\n{}", rep.to_csv());
        ensure!(s.residuals.max_constraint <= 1e-6, "{name}: residual {}", s.residuals.max_constraint);
        worst = worst.max(s.residuals.max_constraint);
        if let Some(tol) = tol {
            let c = conservation_summary(m, &s);
            ensure!(c.no_creation(*tol), "{name}: {c:?}");
        }
    }
    Ok(format!("{} solved models, max residual {worst:.1e}", cases.len()))
}

// ---- 3: shelf-life and open-vial windows -----------------------------------

fn vial_instance(sizes: &[u32], ovl: u32, horizon: usize) -> Instance {
    let mut inst = chain(horizon, &[], &["V1"]);
    inst.groups = vec!["G1".into()];
    inst.vaccines[0].open_vial_life = ovl;
    inst.vaccines[0].vial_sizes = sizes.iter().map(|&d| VialSize { id: format!("v{d}"), doses: d }).collect();
    inst.set_scalar("costs", "open_vial_waste", 1.0);
    inst
}

fn indices(m: &Model, v: vaxopt::model::VarId) -> Vec<usize> {
    m.var_info(v).indices.iter().filter_map(|x| x.parse().ok()).collect()
}

fn criterion_3() -> Outcome {
    let mut rng = vaxopt::rng_from_env();
    let mut checked = 0;
    for shelf in 1..=4u32 {
        let mut inst = chain(5, &["D1"], &["V1"]);
        inst.vaccines[0].shelf_life = shelf;
        inst.put("logistics", "initial_vc", &["V1", "P"], 3.0);
        inst.put("capacities", "production", &["M1", "P", "1"], 10.0);
        for t in 1..=5 {
            inst.put("demand", "kpt", &["V1", "P", &t.to_string()], rng.random_range(0..=4) as f64);
        }
        inst.put("costs", "shortage", &["V1", "P"], 10.0);
        inst.set_scalar("costs", "waste", 1.0);
        let cfg = ScmConfig::integer(20.0);
        let mut m = scm_model(&inst, &cfg);
        scm::build_shelf_life(&mut m, &inst, &cfg).unwrap();
        let s = solve(&m).unwrap();
        ensure!(s.is_optimal(), "shelf {shelf}: {:?}", s.status);
        for v in m.family_vars("L_v") {
            let ix = indices(&m, v);
            let (t, t2) = (ix[0], ix[1]);
            ensure!(t < t2 && t2 <= t + shelf as usize, "L_v window {:?}", m.var_info(v).indices);
            checked += 1;
        }
    }
    for ovl in 1..=3u32 {
        for _ in 0..4 {
            let mut inst = vial_instance(&[5, 2], ovl, 4);
            for t in 1..=4 {
                inst.put("demand", "gkpt", &["G1", "V1", "P", &t.to_string()], rng.random_range(0..=6) as f64);
            }
            let cfg = ScmConfig::integer(20.0);
            let mut m = Model::new();
            scm::build_vial_dose_balance(&mut m, &inst, &cfg).unwrap();
            scm::build_open_vial_window(&mut m, &inst, &cfg).unwrap();
            let mut shortage = LinExpr::new();
            for v in m.family_vars("s_vg") {
                shortage.add_term(v, 10.0);
            }
            m.add_objective_terms("cost", ObjSense::Minimize, shortage).unwrap();
            let s = solve(&m).unwrap();
            ensure!(s.is_optimal(), "open vial {ovl}: {:?}", s.status);
            for v in m.family_vars("x_vo") {
                let ix = indices(&m, v);
                let (t, t2) = (ix[0], ix[1]);
                ensure!(t <= t2 && t2 < t + ovl as usize, "x_vo window {:?}", m.var_info(v).indices);
                checked += 1;
            }
            for t in 1..=4 {
                let opened = 5.0 * get(&m, &s, "N_vs", &["v5", "V1", "P", &t.to_string()])
                    + 2.0 * get(&m, &s, "N_vs", &["v2", "V1", "P", &t.to_string()]);
                let used = get(&m, &s, "x_v", &["G1", "V1", "P", &t.to_string()])
                    + get(&m, &s, "w_ov", &["V1", "P", &t.to_string()]);
                ensure!(opened == used, "vial identity at t={t}: {opened} vs {used}");
            }
        }
    }
    Ok(format!("{checked} window variables sound, vial identity exact"))
}

// ---- 4: priority sequencing ------------------------------------------------

fn priority_model(avail: f64, d1: f64, d2: f64, ub: f64) -> Model {
    let mut inst = chain(1, &[], &["V1"]);
    inst.groups = vec!["H".into(), "L".into()];
    inst.put("logistics", "initial_vc", &["V1", "P"], avail);
    inst.put("demand", "gkpt", &["H", "V1", "P", "1"], d1);
    inst.put("demand", "gkpt", &["L", "V1", "P", "1"], d2);
    let cfg = ScmConfig { waste_cost: Some(1.0), ..ScmConfig::integer(ub) };
    let mut m = Model::new();
    scm::build_priority_sequencing(&mut m, &inst, &cfg).unwrap();
    m
}

fn criterion_4() -> Outcome {
    let mut rng = vaxopt::rng_from_env();
    let mut probed = 0;
    for n in 0..50 {
        let avail = rng.random_range(0..=6) as f64;
        let (d1, d2) = (rng.random_range(0..=4) as f64, rng.random_range(0..=4) as f64);
        let m = priority_model(avail, d1, d2, 6.0);
        let sbox = SearchBox::uniform(0, 6);
        let b = brute_force_oracle(&m, &sbox).map_err(|e| e.to_string())?;
        let s = solve(&m).unwrap();
        ensure!(b.is_optimal() && s.is_optimal(), "instance {n}: {:?} {:?}", b.status, s.status);
        let opt = b.objective.unwrap();
        ensure!(near(opt, s.objective.unwrap(), 1e-9), "instance {n}: {opt} vs {:?}", s.objective);
        let y1 = get(&m, &s, "y_v", &["H", "V1", "P", "1"]);
        ensure!(y1 == d1.min(avail), "instance {n}: high group gets {y1}");
        if d1 >= 1.0 {
            // no optimum serves the low group while the high group is short
            let mut probe = m.clone();
            let obj = probe.objectives()[0].expr.clone();
            probe.add_constraint(obj, Sense::Eq, opt, "probe.optimal").unwrap();
            let yl = probe.var("y_v", &ix!["L", "V1", "P", 1]).unwrap();
            let yh = probe.var("y_v", &ix!["H", "V1", "P", 1]).unwrap();
            probe.add_constraint(LinExpr::from(yl), Sense::Ge, 1.0, "probe.low").unwrap();
            probe.add_constraint(LinExpr::from(yh), Sense::Le, d1 - 1.0, "probe.high").unwrap();
            let p = brute_force_oracle(&probe, &sbox).map_err(|e| e.to_string())?;
            ensure!(p.status == Status::Infeasible, "instance {n}: low group served first at an optimum");
            probed += 1;
        }
    }
    Ok(format!("50 instances, {probed} exhaustive probes infeasible"))
}

// ---- 5: chance constraints -------------------------------------------------

fn criterion_5() -> Outcome {
    let mut rng = vaxopt::rng_from_env();
    let (mu, sd) = (100.0, 10.0);
    let mut worst = 0.0f64;
    for alpha in [0.01, 0.05, 0.1] {
        let mut inst = chain(1, &["D1", "D2"], &["K1"]);
        inst.put("demand", "mean_kpt", &["K1", "P", "1"], mu);
        inst.put("demand", "sd_kpt", &["K1", "P", "1"], sd);
        inst.put("costs", "shipping_dv", &["D1", "K1"], 1.0);
        inst.put("costs", "shipping_dv", &["D2", "K1"], 2.0);
        let mut m = Model::new();
        build_cc_constraints(&mut m, &inst, &ScmConfig::default(), CcTarget::Supply, alpha).unwrap();
        let s = solve(&m).unwrap();
        let shipped: f64 = m.family_vars("x_dv").iter().map(|&v| s.value(v)).sum();
        let dist = Normal::new(mu, sd).unwrap();
        let n = 100_000;
        let hits = (0..n).filter(|_| dist.sample(&mut rng) <= shipped).count();
        let frac = hits as f64 / n as f64;
        let err = (frac - (1.0 - alpha)).abs();
        ensure!(err <= 0.01, "alpha {alpha}: coverage {frac}");
        worst = worst.max(err);
    }
    Ok(format!("coverage within {worst:.4} of target for alpha 0.01, 0.05, 0.10"))
}

// ---- 6: two-stage and distributionally robust ------------------------------

fn capacity_instance(demands: &[f64], probs: &[f64]) -> Instance {
    let mut inst = chain(1, &["D1"], &["K1"]);
    inst.put("demand", "kpt", &["K1", "P", "1"], demands[0]);
    inst.scenarios = demands
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(i, (&d, &p))| {
            let mut t = Tensor::default();
            t.insert(ix!["K1", "P", 1], d);
            Scenario {
                id: format!("w{}", i + 1),
                probability: p,
                overrides: BTreeMap::from([("demand.kpt".to_string(), Param::Tensor(t))]),
            }
        })
        .collect();
    inst
}

fn capacity_tssp(inst: &Instance, c: f64, s: f64, cap_max: f64) -> Model {
    let first = move |m: &mut Model, _: &Instance| -> BuildResult {
        let x = m.add_var("capacity", vec![], Domain::Integer, 0.0, cap_max)?;
        m.add_objective_terms("cost", ObjSense::Minimize, LinExpr::term(x, c))?;
        Ok(vec![])
    };
    let second = move |m: &mut Model, si: &Instance| -> BuildResult {
        let x = m.var("capacity", &[]).ok_or_else(|| BuildError::Missing("capacity".into()))?;
        let y = m.add_var("shortfall", vec![], Domain::Continuous, 0.0, f64::INFINITY)?;
        let d = si.demand_kpt("K1", "P", 1);
        let t = m.add_constraint(LinExpr::from(x) + LinExpr::from(y), Sense::Ge, d, "test.cover")?;
        m.add_objective_terms("cost", ObjSense::Minimize, LinExpr::term(y, s))?;
        Ok(vec![t])
    };
    let mut m = Model::new();
    build_tssp_extensive(&mut m, inst, &[&first], &[&second]).unwrap();
    m
}

/// Expected cost of each scenario's own first-stage decision, evaluated in
/// the stochastic model.
fn scenario_policies(inst: &Instance, m: &Model, det: impl Fn(&Instance) -> Model) -> Vec<f64> {
    let first = first_stage_vars(m);
    inst.scenarios
        .iter()
        .map(|sc| {
            let dm = det(&inst.for_scenario(sc));
            let ds = solve(&dm).unwrap();
            let fixed: Vec<_> = first
                .iter()
                .map(|&v| {
                    let info = m.var_info(v);
                    (v, ds.get(&dm, &info.family, &info.indices))
                })
                .collect();
            solve(&fix_first_stage(m, &fixed).unwrap()).unwrap().objective.unwrap()
        })
        .collect()
}

fn three_point(eps_mu: f64, lo: f64, hi: f64) -> AmbiguitySet {
    AmbiguitySet {
        scenarios: vec!["w1".into(), "w2".into(), "w3".into()],
        nominal: vec![1.0 / 3.0; 3],
        keys: vec![ix!["K1", 1]],
        support: vec![vec![0.0], vec![10.0], vec![20.0]],
        mean: vec![10.0],
        sigma: vec![500.0 / 3.0],
        eps_mu,
        eps_sigma_lo: lo,
        eps_sigma_hi: hi,
    }
}

fn criterion_6() -> Outcome {
    let mut checks = 0;
    for name in ["toy_tssp.json", "toy_dro.json"] {
        let inst = load(name);
        let m = toy_tssp_model(&inst, true);
        let rp = solve(&m).unwrap().objective.unwrap();
        let det = |si: &Instance| scm_model(si, &ScmConfig::default());
        for (sc, eval) in inst.scenarios.iter().zip(scenario_policies(&inst, &m, det)) {
            ensure!(rp <= eval + 1e-6, "{name}: stochastic {rp} above policy of {} at {eval}", sc.id);
            checks += 1;
        }
    }
    for (demands, probs, c, s) in [
        (vec![5.0, 15.0], vec![0.5, 0.5], 2.0, 3.0),
        (vec![0.0, 10.0, 20.0], vec![0.2, 0.5, 0.3], 1.0, 4.0),
        (vec![3.0, 9.0, 14.0], vec![0.6, 0.3, 0.1], 1.5, 2.0),
    ] {
        let inst = capacity_instance(&demands, &probs);
        let m = capacity_tssp(&inst, c, s, 20.0);
        let rp = solve(&m).unwrap().objective.unwrap();
        let det = |si: &Instance| {
            let mut single = si.clone();
            let mut sc = inst.scenarios[0].clone();
            sc.probability = 1.0;
            sc.overrides.clear();
            single.scenarios = vec![sc];
            capacity_tssp(&single, c, s, 20.0)
        };
        for eval in scenario_policies(&inst, &m, det) {
            ensure!(rp <= eval + 1e-6, "capacity: stochastic {rp} above {eval}");
            checks += 1;
        }
    }

    // shrinking ambiguity never raises the worst case, and never drops below nominal
    let inst = capacity_instance(&[0.0, 10.0, 20.0], &[1.0 / 3.0; 3]);
    let m = capacity_tssp(&inst, 1.0, 3.0, 20.0);
    let nominal = solve(&m).unwrap().objective.unwrap();
    let mut last = f64::INFINITY;
    for (e, lo, hi) in [(6.0, 0.3, 2.0), (4.0, 0.5, 1.5), (2.0, 0.8, 1.2), (1.0, 0.9, 1.1), (0.0, 1.0, 1.0)] {
        let r = dro_worst_case(&m, "cost", &three_point(e, lo, hi), &DroOptions::default()).map_err(|e| e.to_string())?;
        ensure!(r.value >= nominal - 1e-6, "DRO {} below nominal {nominal}", r.value);
        ensure!(r.value <= last + 1e-6, "DRO grew from {last} to {}", r.value);
        last = r.value;
        checks += 1;
    }
    let dro = load("toy_dro.json");
    let m = toy_tssp_model(&dro, true);
    let nominal = solve(&m).unwrap().objective.unwrap();
    let set = AmbiguitySet::from_instance(&dro).map_err(|e| e.to_string())?;
    let r = dro_worst_case(&m, scm::COST, &set, &DroOptions::default()).map_err(|e| e.to_string())?;
    ensure!(r.value >= nominal - 1e-6, "toy_dro: DRO {} below nominal {nominal}", r.value);
    Ok(format!("{} comparisons hold, toy_dro worst case {:.3} vs nominal {nominal:.3}", checks + 1, r.value))
}

// ---- 7: epidemic model -----------------------------------------------------

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["epi.json", "epi_t50.json"] {
        let inst = load(name);
        let p = inst.epi.as_ref().unwrap();
        let x0 = epi::initial_state(&inst, p).unwrap();
        for dt in [1.0, 0.25] {
            let traj = epi::simulate_delphi_v(&inst, p, &x0, &VaccinationPlan::default(), &SimOptions { dt, clip: false })
                .map_err(|e| e.to_string())?;
            for pair in traj.states.windows(2) {
                for (a, b) in pair[0].regions.iter().zip(&pair[1].regions) {
                    let rel = (a.population() - b.population()).abs() / a.population();
                    worst = worst.max(rel);
                    ensure!(rel <= 1e-9, "{name}: population drift {rel}");
                }
            }
        }
    }

    let inst = load("epi_t50.json");
    let p = inst.epi.as_ref().unwrap();
    let x0 = epi::initial_state(&inst, p).unwrap();
    let traj = epi::simulate_delphi_v(&inst, p, &x0, &VaccinationPlan::default(), &SimOptions { dt: 1.0, clip: true })
        .map_err(|e| e.to_string())?;
    let euler: Vec<f64> = (0..=50).map(|t| traj.value(t, 0, 0, epi::I)).collect();
    let oracle = rk4_single(p, "g", 0.99, 0.01, 0.0, 50, 0.01);
    let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sup = euler.iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    ensure!(sup <= 0.02, "Euler against RK4: {sup}");

    let inst = load("epi.json");
    let res = epi::build_epi_embedding(&inst, &EmbeddingOptions::default(), &[]).map_err(|e| e.to_string())?;
    ensure!(res.converged && res.iterations <= 50, "embedding: {} iterations, converged {}", res.iterations, res.converged);
    ensure!(
        near(res.predicted_deaths, res.simulated_deaths, 1e-6),
        "embedding deaths {} vs {}",
        res.predicted_deaths,
        res.simulated_deaths
    );
    Ok(format!(
        "drift {worst:.1e}, Euler vs RK4 {sup:.4}, embedding converged in {} iterations",
        res.iterations
    ))
}

// ---- 8: equity -------------------------------------------------------------

fn groups_instance(demands: &[f64]) -> Instance {
    let mut inst = Instance::empty(1);
    inst.vcs = vec!["V1".into()];
    inst.vaccines = vec![vaxopt::data::VaccineType::new("P", 1, 10, 1, vaxopt::data::ColdTier::Cold)];
    inst.groups = (1..=demands.len()).map(|g| format!("G{g}")).collect();
    for (g, d) in inst.groups.clone().iter().zip(demands) {
        inst.put("demand", "gkpt", &[g, "V1", "P", "1"], *d);
    }
    inst
}

fn supply_model(inst: &Instance, supply: f64) -> Model {
    let mut m = Model::new();
    let mut total = LinExpr::new();
    for g in &inst.groups {
        let d = inst.demand_gkpt(g, "V1", "P", 1);
        total.add_term(m.add_var("x_v", ix![g, "V1", "P", 1], Domain::Integer, 0.0, d).unwrap(), 1.0);
    }
    m.add_constraint(total, Sense::Le, supply, "test.supply").unwrap();
    m
}

fn enumerate_maximin(demands: &[i64], supply: i64) -> f64 {
    let mut best = 0.0f64;
    let mut stack = vec![(0usize, 0i64, f64::INFINITY)];
    while let Some((g, used, ratio)) = stack.pop() {
        if g == demands.len() {
            best = best.max(ratio);
            continue;
        }
        for x in 0..=demands[g].min(supply - used) {
            stack.push((g + 1, used + x, ratio.min(x as f64 / demands[g] as f64)));
        }
    }
    best
}

fn biobjective(pop: &[f64], eta: &[Vec<f64>], max_vcs: f64) -> Model {
    let mut inst = Instance::empty(1);
    inst.sites = vec!["S1".into(), "S2".into(), "S3".into()];
    inst.vcs = vec!["V1".into(), "V2".into(), "V3".into()];
    for s in 0..3 {
        let sn = format!("S{}", s + 1);
        inst.put("demand", "site", &[&sn], pop[s]);
        for k in 0..3 {
            inst.put("logistics", "distance", &[&sn, &format!("V{}", k + 1)], eta[s][k]);
        }
    }
    for k in ["V1", "V2", "V3"] {
        inst.put("capacities", "vc", &[k], 120.0);
    }
    inst.set_scalar("capacities", "max_vcs", max_vcs);
    let mut m = Model::new();
    location::build_assignment_location(&mut m, &inst, Assignment::Binary).unwrap();
    m
}

fn criterion_8() -> Outcome {
    ensure!(gini(&[0.5, 0.5]).map_err(|e| e.to_string())? == 0.0, "gini of equal shares");
    ensure!(gini(&[1.0, 0.0]).map_err(|e| e.to_string())? == 0.5, "gini of (1, 0)");

    let mut rng = vaxopt::rng_from_env();
    for _ in 0..30 {
        let demands: Vec<i64> = (0..rng.random_range(2..=3)).map(|_| rng.random_range(1..=6)).collect();
        let supply = rng.random_range(0..=12);
        let df: Vec<f64> = demands.iter().map(|&d| d as f64).collect();
        let inst = groups_instance(&df);
        let mut m = supply_model(&inst, supply as f64);
        equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
        let got = solve(&m).unwrap().objective.unwrap();
        let best = enumerate_maximin(&demands, supply);
        ensure!(got >= best - 1e-6, "maximin {got} beaten by enumeration {best} for {demands:?}, supply {supply}");
        ensure!(got <= best + 1e-6, "maximin {got} above enumeration {best}");
    }

    let eta = vec![vec![1.0, 4.0, 6.0], vec![3.0, 1.0, 2.0], vec![5.0, 2.0, 1.0]];
    let m = biobjective(&[100.0, 50.0, 30.0], &eta, 2.0);
    let grid: Vec<_> = [50.0, 100.0, 150.0, 250.0]
        .into_iter()
        .map(|v| BTreeMap::from([(DISTANCE.to_string(), v)]))
        .collect();
    let points = pareto_sweep(&m, COVERAGE, &grid).map_err(|e| e.to_string())?;
    let sn = senses(&m);
    let solved: Vec<_> = points.iter().filter(|p| p.status == Status::Optimal).collect();
    for (i, a) in solved.iter().enumerate() {
        for (j, b) in solved.iter().enumerate() {
            if i != j && a.objectives != b.objectives {
                ensure!(!dominates(&a.objectives, &b.objectives, &sn, 1e-6), "point {i} dominates {j}");
            }
        }
    }
    let front = nondominated(&points, &sn, 1e-6);
    ensure!(front.len() == points.len(), "front keeps {} of {}", front.len(), points.len());
    Ok(format!("gini anchors exact, 30 maximin instances, {} sweep points nondominated", points.len()))
}

// ---- 9: routing ------------------------------------------------------------

fn routing_network(tau: &[Vec<f64>], demand: &[f64], vehicles: &[(&str, f64)]) -> Instance {
    let n = tau.len();
    let mut inst = Instance::empty(1);
    inst.regions = (0..n).map(|i| i.to_string()).collect();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                inst.put("logistics", "travel_time", &[&a.to_string(), &b.to_string()], tau[a][b]);
            }
        }
    }
    for (i, d) in demand.iter().enumerate() {
        inst.put("demand", "rg", &[&(i + 1).to_string(), "all"], *d);
    }
    inst.vehicles = vehicles.iter().map(|v| v.0.to_string()).collect();
    for (h, c) in vehicles {
        inst.put("capacities", "vehicle", &[h], *c);
    }
    inst
}

fn manhattan(points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    points.iter().map(|a| points.iter().map(|b| (a.0 - b.0).abs() + (a.1 - b.1).abs()).collect()).collect()
}

fn best_tour(tau: &[Vec<f64>], stops: &[usize]) -> f64 {
    fn go(tau: &[Vec<f64>], at: usize, left: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if left.is_empty() {
            *best = best.min(acc + tau[at][0]);
            return;
        }
        for i in 0..left.len() {
            let next = left.remove(i);
            go(tau, next, left, acc + tau[at][next], best);
            left.insert(i, next);
        }
    }
    if stops.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    go(tau, 0, &mut stops.to_vec(), 0.0, &mut best);
    best
}

/// Cheapest split of regions over vehicles with each route ordered optimally.
fn enumerate_vrp(tau: &[Vec<f64>], demand: &[f64], caps: &[f64]) -> Option<f64> {
    let (n, h) = (demand.len(), caps.len());
    let mut best: Option<f64> = None;
    for code in 0..h.pow(n as u32) {
        let owner: Vec<usize> = (0..n).map(|i| code / h.pow(i as u32) % h).collect();
        let mut total = 0.0;
        let mut ok = true;
        for (v, &cap) in caps.iter().enumerate() {
            let mine: Vec<usize> = (0..n).filter(|&i| owner[i] == v).map(|i| i + 1).collect();
            if mine.iter().map(|&i| demand[i - 1]).sum::<f64>() > cap + 1e-9 {
                ok = false;
                break;
            }
            total += best_tour(tau, &mine);
        }
        if ok && best.is_none_or(|b| total < b) {
            best = Some(total);
        }
    }
    best
}

fn solve_routing(inst: &Instance, mode: Subtour) -> Result<(f64, usize), String> {
    let mut m = Model::new();
    routing::build_vrp(&mut m, inst, mode).map_err(|e| e.to_string())?;
    let (s, _) = routing::solve_with_subtour_cuts(&mut m, &MilpOptions::default()).map_err(|e| e.to_string())?;
    if !s.is_optimal() {
        return Err(format!("{mode:?}: {:?}", s.status));
    }
    let values: Vec<f64> = (0..m.num_vars()).map(|i| s.value(vaxopt::model::VarId(i))).collect();
    Ok((s.objective.unwrap(), routing::subtours(&m, &values).len()))
}

fn criterion_9() -> Outcome {
    let mut cases: Vec<(Instance, Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> = vec![];
    let fx = load("routing.json");
    let n = fx.regions.len();
    let tau: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| if a == b { 0.0 } else { routing::travel_time(&fx, &fx.regions[a], &fx.regions[b]).unwrap() })
                .collect()
        })
        .collect();
    let demand: Vec<f64> = fx.regions[1..].iter().map(|r| routing::region_demand(&fx, r)).collect();
    let caps: Vec<f64> = fx.vehicles.iter().map(|h| fx.cap("capacities", "vehicle", &[h]).finite().unwrap()).collect();
    cases.push((fx, tau, demand, caps));

    let mut rng = vaxopt::rng_from_env();
    for n in [3, 4, 5, 6, 7, 8] {
        let pts: Vec<(f64, f64)> = (0..=n).map(|_| (rng.random_range(0..=9) as f64, rng.random_range(0..=9) as f64)).collect();
        let tau = manhattan(&pts);
        let demand: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
        let caps = if n <= 5 { vec![8.0, 8.0] } else { vec![100.0] };
        let vehicles: Vec<(String, f64)> = caps.iter().enumerate().map(|(i, &c)| (format!("H{}", i + 1), c)).collect();
        let vref: Vec<(&str, f64)> = vehicles.iter().map(|(a, b)| (a.as_str(), *b)).collect();
        cases.push((routing_network(&tau, &demand, &vref), tau, demand, caps));
    }
    for (inst, tau, demand, caps) in &cases {
        let want = enumerate_vrp(tau, demand, caps).ok_or("enumeration found no split")?;
        for mode in [Subtour::Mtz, Subtour::DfjLazy] {
            let (got, cycles) = solve_routing(inst, mode)?;
            ensure!(near(got, want, 1e-6), "{} regions {mode:?}: {got} vs {want}", demand.len());
            ensure!(cycles == 0, "{} regions {mode:?}: {cycles} depot-free cycles", demand.len());
        }
    }
    Ok(format!("{} instances up to 8 regions, both subtour modes match enumeration", cases.len()))
}

// ---- 10: determinism -------------------------------------------------------

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let toy = load("toy.json");
    let mut texts = vec![];
    let mut csvs = vec![];
    for _ in 0..2 {
        let m = scm_model(&toy, &ScmConfig::integer(100.0));
        texts.push(lp::to_lp_string(&m).map_err(|e| e.to_string())?);
        csvs.push(solution_csv(&m, &solve(&m).unwrap()));
    }
    ensure!(texts[0] == texts[1], "LP exports differ");
    ensure!(csvs[0] == csvs[1], "solution reports differ");

    let toy_path = fixture("toy.json");
    let mut outputs = vec![];
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let lp_path = dir.path().join(format!("{run}.lp"));
        let argv = ["vaxopt", "solve", toy_path.to_str().unwrap(), "-f", "scm.dc_flow,scm.vc_flow", "--out", out.to_str().unwrap()];
        let code = vaxopt::cli::run(argv, &mut Vec::new(), &mut Vec::new());
        ensure!(code == 0, "solve exited {code}");
        let argv = ["vaxopt", "export-lp", toy_path.to_str().unwrap(), "-f", "scm.dc_flow,scm.vc_flow", "--out", lp_path.to_str().unwrap()];
        let code = vaxopt::cli::run(argv, &mut Vec::new(), &mut Vec::new());
        ensure!(code == 0, "export-lp exited {code}");
        let read = |p: PathBuf| std::fs::read(p).unwrap_or_default();
        outputs.push((read(out.join("solution.csv")), read(out.join("audit.csv")), read(lp_path)));
    }
    ensure!(!outputs[0].0.is_empty() && !outputs[0].2.is_empty(), "CLI wrote no output");
    ensure!(outputs[0] == outputs[1], "CLI outputs differ between runs");
    Ok("LP export, solution and audit reports byte-identical across runs".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("solver matches enumeration", criterion_1),
        ("flow conservation", criterion_2),
        ("shelf-life and open-vial windows", criterion_3),
        ("priority sequencing", criterion_4),
        ("chance constraint calibration", criterion_5),
        ("stochastic and robust bounds", criterion_6),
        ("epidemic dynamics", criterion_7),
        ("equity measures", criterion_8),
        ("routing exactness", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let n = n + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {n} {name}: pass ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: fail ({why})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
