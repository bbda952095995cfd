mod common;

use common::close;
use proptest::prelude::*;
use vaxopt::data::Instance;
use vaxopt::ix;
use vaxopt::model::{BuildError, Model};
use vaxopt::routing::{self, Subtour};
use vaxopt::solve::{MilpOptions, Status};

/// Depot `0` plus regions `1..=n` with travel times `tau[a][b]`.
fn network(tau: &[Vec<f64>], demand: &[f64], vehicles: &[(&str, f64)]) -> Instance {
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

fn solve_vrp(inst: &Instance, mode: Subtour) -> (Model, vaxopt::solve::Solution) {
    let mut m = Model::new();
    routing::build_vrp(&mut m, inst, mode).unwrap();
    let (s, _) = routing::solve_with_subtour_cuts(&mut m, &MilpOptions::default()).unwrap();
    (m, s)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = vec![];
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn tour_cost(tau: &[Vec<f64>], order: &[usize]) -> f64 {
    if order.is_empty() {
        return 0.0;
    }
    let mut c = tau[0][order[0]];
    for w in order.windows(2) {
        c += tau[w[0]][w[1]];
    }
    c + tau[*order.last().unwrap()][0]
}

/// Cheapest way to split regions over vehicles and order each route.
fn enumerate_vrp(tau: &[Vec<f64>], demand: &[f64], caps: &[f64]) -> Option<f64> {
    let n = demand.len();
    let h = caps.len();
    let mut best: Option<f64> = None;
    for code in 0..h.pow(n as u32) {
        let owner: Vec<usize> = (0..n).map(|i| code / h.pow(i as u32) % h).collect();
        let mut total = 0.0;
        let mut ok = true;
        for (v, &cap) in caps.iter().enumerate() {
            let mine: Vec<usize> = (0..n).filter(|&i| owner[i] == v).map(|i| i + 1).collect();
            let load: f64 = mine.iter().map(|&i| demand[i - 1]).sum();
            if load > cap + 1e-9 {
                ok = false;
                break;
            }
            total += permutations(&mine).iter().map(|p| tour_cost(tau, p)).fold(f64::INFINITY, f64::min);
        }
        if ok && best.is_none_or(|b| total < b) {
            best = Some(total);
        }
    }
    best
}

fn symmetric(points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| points.iter().map(|b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()).round()).collect())
        .collect()
}

#[test]
fn two_regions_unique_tour() {
    let tau = vec![vec![0.0, 2.0, 3.0], vec![2.0, 0.0, 4.0], vec![3.0, 4.0, 0.0]];
    let inst = network(&tau, &[1.0, 1.0], &[("H1", 10.0)]);
    for mode in [Subtour::DfjLazy, Subtour::Mtz] {
        let (m, s) = solve_vrp(&inst, mode);
        assert!(close(s.objective.unwrap(), 9.0));
        assert!(close(enumerate_vrp(&tau, &[1.0, 1.0], &[10.0]).unwrap(), 9.0));
        assert!(routing::subtours(&m, &s.values).is_empty());
    }
}

#[test]
fn capacity_below_single_demand_is_infeasible() {
    let tau = symmetric(&[(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)]);
    let inst = network(&tau, &[5.0, 2.0], &[("H1", 4.0)]);
    let mut m = Model::new();
    routing::build_vrp(&mut m, &inst, Subtour::Mtz).unwrap();
    let (s, _) = routing::solve_with_subtour_cuts(&mut m, &MilpOptions::default()).unwrap();
    assert_eq!(s.status, Status::Infeasible);
}

#[test]
fn zero_travel_times_stay_feasible_and_need_cuts() {
    let tau = vec![vec![0.0; 5]; 5];
    let inst = network(&tau, &[1.0; 4], &[("H1", 10.0)]);
    for mode in [Subtour::DfjLazy, Subtour::Mtz] {
        let (m, s) = solve_vrp(&inst, mode);
        assert_eq!(s.status, Status::Optimal);
        assert!(close(s.objective.unwrap(), 0.0));
        assert!(routing::subtours(&m, &s.values).is_empty());
        let routes = routing::routes(&m, &inst, &s);
        assert_eq!(routes.iter().map(|r| r.stops.len()).sum::<usize>(), 4);
    }
}

#[test]
fn two_vehicles_split_by_capacity() {
    let tau = symmetric(&[(0.0, 0.0), (3.0, 0.0), (4.0, 1.0), (-3.0, 0.0), (-4.0, -1.0)]);
    let demand = [3.0, 2.0, 2.0, 3.0];
    let caps = [5.0, 6.0];
    let inst = network(&tau, &demand, &[("H1", caps[0]), ("H2", caps[1])]);
    let want = enumerate_vrp(&tau, &demand, &caps).unwrap();
    for mode in [Subtour::DfjLazy, Subtour::Mtz] {
        let (m, s) = solve_vrp(&inst, mode);
        assert!(close(s.objective.unwrap(), want), "{mode:?}: {} vs {want}", s.objective.unwrap());
        for r in routing::routes(&m, &inst, &s) {
            let cap = if r.vehicle == "H1" { caps[0] } else { caps[1] };
            assert!(r.stops.last().unwrap().load <= cap + 1e-9);
        }
    }
}

#[test]
fn start_times_follow_the_route() {
    let tau = vec![vec![0.0, 2.0, 3.0], vec![2.0, 0.0, 4.0], vec![3.0, 4.0, 0.0]];
    let mut inst = network(&tau, &[1.0, 1.0], &[("H1", 10.0)]);
    inst.put("logistics", "service_time", &["1"], 1.5);
    inst.put("logistics", "service_time", &["2"], 1.5);
    let (m, s) = solve_vrp(&inst, Subtour::Mtz);
    let routes = routing::routes(&m, &inst, &s);
    assert_eq!(routes.len(), 1);
    let stops = &routes[0].stops;
    assert!(stops[0].arrival >= tau[0][stops[0].region.parse::<usize>().unwrap()] - 1e-9);
    let a: usize = stops[0].region.parse().unwrap();
    let b: usize = stops[1].region.parse().unwrap();
    assert!(stops[1].arrival >= stops[0].arrival + tau[a][b] + 1.5 - 1e-9);
    let csv = routing::route_csv(&routes);
    assert!(csv.starts_with("vehicle,order,region,arrival,load\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn missing_depot_and_unknown_mode_are_errors() {
    let tau = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let mut inst = network(&tau, &[1.0], &[("H1", 1.0)]);
    inst.regions = vec!["1".into()];
    assert!(matches!(routing::build_vrp(&mut Model::new(), &inst, Subtour::Mtz), Err(BuildError::Missing(_))));
    assert!(matches!("sweep".parse::<Subtour>(), Err(BuildError::Invalid(_))));
    assert_eq!("dfj_lazy".parse::<Subtour>().unwrap(), Subtour::DfjLazy);
}

#[test]
fn subtour_detection_finds_depot_free_cycles() {
    let tau = vec![vec![0.0; 5]; 5];
    let inst = network(&tau, &[1.0; 4], &[("H1", 10.0)]);
    let mut m = Model::new();
    routing::build_vrp(&mut m, &inst, Subtour::DfjLazy).unwrap();
    let mut values = vec![0.0; m.num_vars()];
    for (a, b) in [("0", "1"), ("1", "0"), ("2", "3"), ("3", "4"), ("4", "2")] {
        values[m.var("y", &ix!["H1", a, b]).unwrap().0] = 1.0;
    }
    assert_eq!(routing::subtours(&m, &values), vec![vec!["2".to_string(), "3".into(), "4".into()]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn formulations_agree_with_permutations(pts in prop::collection::vec((0i32..10, 0i32..10), 3..6)) {
        let mut all = vec![(0.0, 0.0)];
        all.extend(pts.iter().map(|&(x, y)| (x as f64, y as f64)));
        let tau = symmetric(&all);
        let demand = vec![1.0; pts.len()];
        let inst = network(&tau, &demand, &[("H1", 100.0)]);
        let want = enumerate_vrp(&tau, &demand, &[100.0]).unwrap();
        let (m1, s1) = solve_vrp(&inst, Subtour::DfjLazy);
        let (m2, s2) = solve_vrp(&inst, Subtour::Mtz);
        prop_assert!((s1.objective.unwrap() - want).abs() < 1e-6);
        prop_assert!((s2.objective.unwrap() - want).abs() < 1e-6);
        prop_assert!(routing::subtours(&m1, &s1.values).is_empty());
        prop_assert!(routing::subtours(&m2, &s2.values).is_empty());
    }
}

// ---- selective routing -----------------------------------------------------

fn selective(budget: f64, service: f64) -> (Instance, Model, vaxopt::solve::Solution) {
    let tau = vec![
        vec![0.0, 2.0, 3.0, 4.0],
        vec![2.0, 0.0, 2.0, 5.0],
        vec![3.0, 2.0, 0.0, 3.0],
        vec![4.0, 5.0, 3.0, 0.0],
    ];
    let mut inst = network(&tau, &[10.0, 7.0, 12.0], &[("H1", 100.0)]);
    for r in ["1", "2", "3"] {
        inst.put("logistics", "service_time", &[r], service);
    }
    let mut m = Model::new();
    routing::build_selective_routing(&mut m, &inst, budget).unwrap();
    let s = vaxopt::solve::solve(&m).unwrap();
    (inst, m, s)
}

/// Best demand over visit subsets and orders within the time budget.
fn enumerate_selective(tau: &[Vec<f64>], demand: &[f64], service: f64, budget: f64) -> f64 {
    let n = demand.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        let time = permutations(&chosen).iter().map(|p| tour_cost(tau, p)).fold(f64::INFINITY, f64::min)
            + service * chosen.len() as f64;
        if time <= budget + 1e-9 {
            best = best.max(chosen.iter().map(|&i| demand[i - 1]).sum());
        }
    }
    best
}

#[test]
fn zero_budget_visits_nothing() {
    let (_, m, s) = selective(0.0, 1.0);
    assert!(close(s.objective.unwrap(), 0.0));
    assert!(m.family_vars("Z_R").iter().all(|&v| close(s.value(v), 0.0)));
}

#[test]
fn budget_for_two_matches_enumeration() {
    let tau = vec![
        vec![0.0, 2.0, 3.0, 4.0],
        vec![2.0, 0.0, 2.0, 5.0],
        vec![3.0, 2.0, 0.0, 3.0],
        vec![4.0, 5.0, 3.0, 0.0],
    ];
    let budget = 10.0;
    let (_, m, s) = selective(budget, 1.0);
    let want = enumerate_selective(&tau, &[10.0, 7.0, 12.0], 1.0, budget);
    // {1,2}: 7 + 2 = 9 fits; {2,3}: 10 + 2, {1,3}: 11 + 2 and all three: 12 + 3 do not
    assert!(close(want, 17.0));
    assert!(close(s.objective.unwrap(), want));
    let visited: f64 = m.family_vars("Z_R").iter().map(|&v| s.value(v)).sum();
    assert!(close(visited, 2.0));
}

#[test]
fn large_budget_visits_all() {
    let (_, m, s) = selective(100.0, 1.0);
    assert!(close(s.objective.unwrap(), 29.0));
    assert!(routing::subtours(&m, &s.values).is_empty());
}

#[test]
fn negative_budget_is_rejected() {
    let inst = network(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0], &[("H1", 1.0)]);
    assert!(matches!(routing::build_selective_routing(&mut Model::new(), &inst, -1.0), Err(BuildError::Invalid(_))));
}
