mod common;

use std::collections::BTreeMap;

use common::close;
use proptest::prelude::*;
use vaxopt::data::{Instance, VaccineType, ColdTier};
use vaxopt::equity::{self, dominates, epsilon_constraint_scalarize, gini, nondominated, pareto_csv, pareto_sweep, senses};
use vaxopt::ix;
use vaxopt::location::{self, Assignment, COVERAGE, DISTANCE};
use vaxopt::model::{BuildError, Domain, LinExpr, Model, ObjSense, Sense};
use vaxopt::solve::{residuals, solve, Status};

/// One VC `V1`, one vaccine, one period and the given group demands.
fn groups_instance(demands: &[f64]) -> Instance {
    let mut inst = Instance::empty(1);
    inst.vcs = vec!["V1".into()];
    inst.vaccines = vec![VaccineType::new("P", 1, 10, 1, ColdTier::Cold)];
    inst.groups = (1..=demands.len()).map(|g| format!("G{g}")).collect();
    for (g, d) in inst.groups.clone().iter().zip(demands) {
        inst.put("demand", "gkpt", &[g, "V1", "P", "1"], *d);
    }
    inst
}

/// Integer vaccinations `x_v[g,V1,P,1] ∈ [0, d_g]` sharing `supply` doses.
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

fn enumerate_maximin(demands: &[f64], supply: f64) -> f64 {
    let d: Vec<i64> = demands.iter().map(|&x| x as i64).collect();
    let mut best = 0.0f64;
    let mut stack = vec![(0usize, 0i64, f64::INFINITY)];
    while let Some((g, used, ratio)) = stack.pop() {
        if g == d.len() {
            best = best.max(ratio);
            continue;
        }
        for x in 0..=d[g].min(supply as i64 - used) {
            stack.push((g + 1, used + x, ratio.min(x as f64 / d[g] as f64)));
        }
    }
    best
}

// ---- maximin ---------------------------------------------------------------

#[test]
fn maximin_matches_enumeration_of_ten_doses() {
    let inst = groups_instance(&[10.0, 15.0]);
    let mut m = supply_model(&inst, 10.0);
    equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
    let s = solve(&m).unwrap();
    let want = enumerate_maximin(&[10.0, 15.0], 10.0);
    assert!(close(want, 0.4));
    assert!(close(s.objective.unwrap(), want));
}

#[test]
fn maximin_is_one_with_ample_supply() {
    let inst = groups_instance(&[4.0, 6.0]);
    let mut m = supply_model(&inst, 20.0);
    equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
    assert!(close(solve(&m).unwrap().objective.unwrap(), 1.0));
}

#[test]
fn maximin_single_group_is_its_rate() {
    let inst = groups_instance(&[8.0]);
    let mut m = supply_model(&inst, 6.0);
    equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
    assert!(close(solve(&m).unwrap().objective.unwrap(), 0.75));
}

#[test]
fn maximin_skips_zero_demand_cells() {
    let inst = groups_instance(&[0.0, 5.0]);
    let mut m = supply_model(&inst, 3.0);
    let tags = equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
    assert_eq!(tags, vec!["equity.maximin.ratio[g=G2,k=V1]".to_string()]);
    assert!(close(solve(&m).unwrap().objective.unwrap(), 0.6));
}

#[test]
fn maximin_needs_vaccinations() {
    let inst = groups_instance(&[1.0]);
    let err = equity::build_maximin_satisfaction(&mut Model::new(), &inst).unwrap_err();
    assert!(matches!(err, BuildError::Composition(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn maximin_never_beaten(d1 in 1u8..8, d2 in 1u8..8, d3 in 1u8..8, supply in 0u8..12) {
        let demands = [d1 as f64, d2 as f64, d3 as f64];
        let inst = groups_instance(&demands);
        let mut m = supply_model(&inst, supply as f64);
        equity::build_maximin_satisfaction(&mut m, &inst).unwrap();
        let z = solve(&m).unwrap().objective.unwrap();
        let best = enumerate_maximin(&demands, supply as f64);
        prop_assert!(best <= z + 1e-6);
        prop_assert!((best - z).abs() < 1e-6);
    }
}

// ---- minimum satisfaction rate ---------------------------------------------

#[test]
fn half_rate_feasible_set_matches_predicate() {
    let inst = groups_instance(&[10.0, 10.0]);
    let mut m = supply_model(&inst, 12.0);
    equity::build_min_satisfaction_rate(&mut m, &inst, 0.5, false).unwrap();
    let x1 = m.var("x_v", &ix!["G1", "V1", "P", 1]).unwrap();
    let x2 = m.var("x_v", &ix!["G2", "V1", "P", 1]).unwrap();
    let mut count = 0;
    for a in 0..=10 {
        for b in 0..=10 {
            let mut v = vec![0.0; m.num_vars()];
            v[x1.0] = a as f64;
            v[x2.0] = b as f64;
            let r = residuals(&m, &v);
            let feasible = r.max_constraint <= 1e-9 && r.max_bound <= 1e-9;
            let want = a + b <= 12 && a >= 5 && b >= 5;
            assert_eq!(feasible, want, "({a},{b})");
            count += want as usize;
        }
    }
    // (5,5)..(5,7), (6,5)..(6,6), (7,5)
    assert_eq!(count, 6);
}

#[test]
fn zero_rate_is_vacuous_and_full_rate_can_be_infeasible() {
    let inst = groups_instance(&[10.0, 10.0]);
    let mut m = supply_model(&inst, 12.0);
    equity::build_min_satisfaction_rate(&mut m, &inst, 0.0, false).unwrap();
    assert!(residuals(&m, &vec![0.0; m.num_vars()]).max_constraint == 0.0);

    let mut m = supply_model(&inst, 12.0);
    equity::build_min_satisfaction_rate(&mut m, &inst, 1.0, false).unwrap();
    m.set_objective("none", ObjSense::Minimize, LinExpr::new());
    assert_eq!(solve(&m).unwrap().status, Status::Infeasible);
}

#[test]
fn rate_outside_unit_interval_is_rejected() {
    let inst = groups_instance(&[1.0]);
    for g in [-0.1, 1.5] {
        let mut m = supply_model(&inst, 1.0);
        assert!(matches!(equity::build_min_satisfaction_rate(&mut m, &inst, g, false), Err(BuildError::Invalid(_))));
    }
}

#[test]
fn assignment_form_scales_assigned_demand() {
    let mut inst = groups_instance(&[10.0]);
    inst.manufacturers = vec!["M1".into()];
    inst.dcs = vec![vaxopt::data::DistributionCenter::new("D1")];
    inst.put("demand", "kpt", &["V1", "P", "1"], 10.0);
    let mut m = supply_model(&inst, 10.0);
    let md = m.add_var("x_md", ix!["M1", "D1", "P", 1], Domain::Continuous, 0.0, 100.0).unwrap();
    let jk = m.add_var("x_jk", ix!["D1", "V1"], Domain::Binary, 0.0, 1.0).unwrap();
    let tags = equity::build_min_satisfaction_rate(&mut m, &inst, 0.5, true).unwrap();
    let row = m.constraints().iter().find(|c| c.tag == "equity.min_rate.assigned[j=D1,p=P]").unwrap();
    assert!(tags.contains(&row.tag));
    assert!(close(row.lhs.coef(md), 1.0));
    assert!(close(row.lhs.coef(jk), -5.0));
    assert_eq!(row.sense, Sense::Ge);
}

// ---- regional allocation ---------------------------------------------------

fn regions_instance(demand: &[(&str, &str, f64)]) -> Instance {
    let mut inst = Instance::empty(1);
    for (r, g, d) in demand {
        if !inst.regions.iter().any(|x| x == r) {
            inst.regions.push(r.to_string());
        }
        if !inst.groups.iter().any(|x| x == g) {
            inst.groups.push(g.to_string());
        }
        inst.put("demand", "rg", &[r, g], *d);
    }
    inst
}

#[test]
fn deviation_below_fair_share_is_penalized() {
    let mut inst = regions_instance(&[("R1", "G1", 10.0)]);
    inst.put("logistics", "fair_allocation", &["R1", "G1"], 8.0);
    inst.set_scalar("demand", "gamma", 0.5);
    inst.set_scalar("logistics", "penalty", 100.0);
    let (varsigma, weight) = (0.7, 3.0);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, 6.0).unwrap();
    equity::build_deviation_equity(&mut m, &inst, varsigma, weight).unwrap();
    let s = solve(&m).unwrap();
    assert!(close(s.get(&m, "a_rg", &ix!["R1", "G1"]), 6.0));
    assert!(close(s.get(&m, "dev_neg", &ix!["R1", "G1"]), 2.0));
    assert!(close(s.objective.unwrap(), 2.0 * varsigma * weight / 10.0));
}

#[test]
fn fair_allocation_feasible_leaves_only_penalty() {
    let mut inst = regions_instance(&[("R1", "G1", 10.0), ("R2", "G1", 5.0)]);
    inst.put("logistics", "fair_allocation", &["R1", "G1"], 8.0);
    inst.put("logistics", "fair_allocation", &["R2", "G1"], 1.0);
    inst.set_scalar("demand", "gamma", 0.4);
    inst.set_scalar("logistics", "penalty", 0.01);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, 100.0).unwrap();
    equity::build_deviation_equity(&mut m, &inst, 0.5, 2.0).unwrap();
    let s = solve(&m).unwrap();
    let dev: f64 = ["dev_pos", "dev_neg"].iter().flat_map(|f| m.family_vars(f)).map(|v| s.value(v)).sum();
    let pi: f64 = m.family_vars("shortfall").iter().map(|&v| s.value(v)).sum();
    assert!(close(dev, 0.0));
    // R2 sits at 1 against γ·d = 2
    assert!(close(pi, 1.0));
    assert!(close(s.objective.unwrap(), 0.01 * pi));
}

#[test]
fn zero_varsigma_leaves_shortfall_unpenalized() {
    let mut inst = regions_instance(&[("R1", "G1", 10.0)]);
    inst.put("logistics", "fair_allocation", &["R1", "G1"], 8.0);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, 6.0).unwrap();
    equity::build_deviation_equity(&mut m, &inst, 0.0, 5.0).unwrap();
    let down = m.var("dev_neg", &ix!["R1", "G1"]).unwrap();
    assert_eq!(m.objective(equity::DEVIATION).unwrap().expr.coef(down), 0.0);
    assert!(close(solve(&m).unwrap().objective.unwrap(), 0.0));
}

#[test]
fn deviation_rejects_zero_demand_cell() {
    let mut inst = regions_instance(&[("R1", "G1", 0.0)]);
    inst.put("logistics", "fair_allocation", &["R1", "G1"], 0.0);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, 1.0).unwrap();
    assert!(matches!(equity::build_deviation_equity(&mut m, &inst, 0.5, 1.0), Err(BuildError::Invalid(_))));
}

#[test]
fn rawlsian_splits_evenly() {
    let inst = regions_instance(&[("R1", "G1", 8.0), ("R2", "G1", 8.0)]);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, 10.0).unwrap();
    equity::build_rawlsian(&mut m, &inst).unwrap();
    let s = solve(&m).unwrap();
    let mut best = (0, 0, 0);
    for a in 0..=8 {
        for b in 0..=(10 - a).min(8) {
            if a.min(b) > best.0 {
                best = (a.min(b), a, b);
            }
        }
    }
    assert_eq!(best, (5, 5, 5));
    assert!(close(s.objective.unwrap(), 5.0));
    assert!(close(s.get(&m, "a_rg", &ix!["R1", "G1"]), 5.0));
    assert!(close(s.get(&m, "a_rg", &ix!["R2", "G1"]), 5.0));
}

fn welfare_model(segments: usize) -> (Model, Instance) {
    let inst = regions_instance(&[("R1", "G1", 4.0), ("R2", "G1", 4.0)]);
    let mut m = Model::new();
    equity::build_regional_allocation(&mut m, &inst, 10.0).unwrap();
    for r in ["R1", "R2"] {
        let a = m.var("a_rg", &ix![r, "G1"]).unwrap();
        m.add_constraint(LinExpr::from(a), Sense::Ge, 1.0, format!("test.floor[r={r}]")).unwrap();
    }
    equity::build_social_welfare_ii(&mut m, &inst, segments).unwrap();
    (m, inst)
}

#[test]
fn welfare_matches_enumeration_on_grid() {
    let (m, inst) = welfare_model(equity::DEFAULT_SEGMENTS);
    let s = solve(&m).unwrap();
    let mut best = 0.0f64;
    for a in 1..=4 {
        for b in 1..=4 {
            if a + b <= 10 {
                best = best.max(((4 - a) * (4 - a) + (4 - b) * (4 - b)) as f64);
            }
        }
    }
    assert!(close(best, 18.0));
    assert!(close(s.objective.unwrap(), best));
    assert!(close(equity::social_welfare_ii_exact(&m, &inst, &s.values).unwrap(), best));
}

#[test]
fn welfare_single_segment_is_linear() {
    let (m, _) = welfare_model(1);
    let s = solve(&m).unwrap();
    // u·(u − a) with u = 4 and a = 1 in both regions
    assert!(close(s.objective.unwrap(), 24.0));
}

#[test]
fn welfare_approximation_bounds_the_square() {
    let (m, inst) = welfare_model(3);
    let s = solve(&m).unwrap();
    let exact = equity::social_welfare_ii_exact(&m, &inst, &s.values).unwrap();
    assert!(s.objective.unwrap() >= exact - 1e-9);
}

#[test]
fn proportional_sites_follow_population() {
    let mut inst = regions_instance(&[("R1", "G1", 1.0), ("R2", "G1", 1.0)]);
    inst.put("demand", "population_region", &["R1"], 300.0);
    inst.put("demand", "population_region", &["R2"], 100.0);
    let mut m = Model::new();
    equity::build_proportional_sites(&mut m, &inst, 8.0).unwrap();
    let s = solve(&m).unwrap();
    assert!(close(s.get(&m, "n_sites", &ix!["R1"]), 6.0));
    assert!(close(s.get(&m, "n_sites", &ix!["R2"]), 2.0));
    assert!(close(s.objective.unwrap(), 0.0));
}

// ---- gini ------------------------------------------------------------------

/// Sorted-rank form `2 Σ_i i·x_(i) / (n Σx) − (n+1)/n`.
fn gini_sorted(f: &[f64]) -> f64 {
    let mut v = f.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    let weighted: f64 = v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).sum();
    2.0 * weighted / (n * total) - (n + 1.0) / n
}

#[test]
fn gini_anchor_values() {
    assert_eq!(gini(&[0.5, 0.5]).unwrap(), 0.0);
    assert_eq!(gini(&[1.0, 0.0]).unwrap(), 0.5);
    assert_eq!(gini(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
    assert!(gini(&[0.0, 0.0]).is_err());
    assert!(gini(&[-1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn gini_scale_invariant_and_bounded(f in prop::collection::vec(0.0f64..10.0, 2..7), c in 0.01f64..100.0) {
        prop_assume!(f.iter().sum::<f64>() > 1e-6);
        let g = gini(&f).unwrap();
        let scaled: Vec<f64> = f.iter().map(|x| x * c).collect();
        prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-12);
        prop_assert!((g - gini_sorted(&f)).abs() < 1e-9);
        let n = f.len() as f64;
        prop_assert!(g >= -1e-12 && g <= 1.0 - 1.0 / n + 1e-12);
    }
}

// ---- carbon ----------------------------------------------------------------

#[test]
fn carbon_counts_openings_and_distance() {
    let mut inst = Instance::empty(1);
    inst.set_scalar("costs", "emission_facility", 7.0);
    inst.set_scalar("costs", "emission_transport", 0.5);
    inst.put("logistics", "distance", &["D1", "V1"], 3.0);
    let mut m = Model::new();
    let y = m.add_var("Y_D", ix!["D1"], Domain::Binary, 1.0, 1.0).unwrap();
    let z = m.add_var("Z_V", ix!["V1"], Domain::Binary, 1.0, 1.0).unwrap();
    let x = m.add_var("x_dv", ix!["D1", "V1", "P", 1], Domain::Continuous, 10.0, 10.0).unwrap();
    let s = m.add_var("s_v", ix!["V1", "P", 1], Domain::Continuous, 0.0, 4.0).unwrap();
    equity::build_carbon_objective(&mut m, &inst).unwrap();
    let mut values = vec![0.0; m.num_vars()];
    values[y.0] = 1.0;
    values[z.0] = 1.0;
    values[x.0] = 10.0;
    values[s.0] = 4.0;
    assert!(close(m.objective(equity::EMISSION).unwrap().expr.eval(&values), 7.0 * 2.0 + 0.5 * 30.0));
    assert!(close(m.objective(equity::SHORTAGE).unwrap().expr.eval(&values), 4.0));
    values.iter_mut().for_each(|v| *v = 0.0);
    assert!(close(m.objective(equity::EMISSION).unwrap().expr.eval(&values), 0.0));
}

#[test]
fn carbon_requires_arc_distances() {
    let inst = Instance::empty(1);
    let mut m = Model::new();
    m.add_var("x_md", ix!["M1", "D1", "P", 1], Domain::Continuous, 0.0, 1.0).unwrap();
    assert!(matches!(equity::build_carbon_objective(&mut m, &inst), Err(BuildError::Missing(_))));
}

// ---- ε-constraint ----------------------------------------------------------

/// Three sites, three candidates, pick two: coverage versus distance.
fn biobjective() -> Model {
    let mut inst = Instance::empty(1);
    let pop = [100.0, 50.0, 30.0];
    let eta = [[1.0, 4.0, 6.0], [3.0, 1.0, 2.0], [5.0, 2.0, 1.0]];
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
    inst.set_scalar("capacities", "max_vcs", 2.0);
    let mut m = Model::new();
    location::build_assignment_location(&mut m, &inst, Assignment::Binary).unwrap();
    m
}

fn eps(v: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([(DISTANCE.to_string(), v)])
}

#[test]
fn loose_epsilon_matches_single_objective() {
    let m = biobjective();
    let mut single = m.clone();
    single.remove_objective(DISTANCE);
    let direct = solve(&single).unwrap().objective.unwrap();
    let sm = epsilon_constraint_scalarize(&m, COVERAGE, &eps(1e6)).unwrap();
    assert_eq!(sm.objectives().len(), 1);
    assert_eq!(sm.demoted_objectives().len(), 1);
    let s = solve(&sm).unwrap();
    assert!(close(s.objective.unwrap(), direct));
    assert!(s.objective_values.contains_key(DISTANCE));
}

#[test]
fn unattainable_epsilon_is_infeasible() {
    let m = biobjective();
    let sm = epsilon_constraint_scalarize(&m, DISTANCE, &BTreeMap::from([(COVERAGE.to_string(), 1000.0)])).unwrap();
    assert_eq!(solve(&sm).unwrap().status, Status::Infeasible);
}

#[test]
fn missing_bound_is_reported() {
    let m = biobjective();
    assert!(matches!(epsilon_constraint_scalarize(&m, COVERAGE, &BTreeMap::new()), Err(BuildError::Missing(_))));
    let mut one = Model::new();
    one.set_objective("f", ObjSense::Minimize, LinExpr::new());
    assert!(matches!(epsilon_constraint_scalarize(&one, "f", &BTreeMap::new()), Err(BuildError::Invalid(_))));
}

#[test]
fn four_point_sweep_is_nondominated() {
    let m = biobjective();
    let grid: Vec<_> = [50.0, 100.0, 150.0, 250.0].into_iter().map(eps).collect();
    let points = pareto_sweep(&m, COVERAGE, &grid).unwrap();
    let sn = senses(&m);
    assert!(points.iter().all(|p| p.status == Status::Optimal));
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i != j {
                assert!(!dominates(&a.objectives, &b.objectives, &sn, 1e-6), "{i} dominates {j}");
            }
        }
    }
    assert_eq!(nondominated(&points, &sn, 1e-6).len(), points.len());
    // frontier points from enumerating sitings and assignments
    let cov: Vec<f64> = points.iter().map(|p| p.objectives[COVERAGE]).collect();
    let dist: Vec<f64> = points.iter().map(|p| p.objectives[DISTANCE]).collect();
    assert_eq!(cov, vec![50.0, 100.0, 150.0, 180.0]);
    assert_eq!(dist, vec![50.0, 100.0, 150.0, 210.0]);
    let csv = pareto_csv(&points);
    assert!(csv.starts_with("eps_distance,obj_coverage,obj_distance,status\n"));
    assert_eq!(csv.lines().count(), 5);
}
