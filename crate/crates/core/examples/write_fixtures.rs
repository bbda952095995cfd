//! Regenerate the JSON fixtures under `fixtures/` (or the directory given
//! as the first argument).

use vaxopt::data::*;
use std::collections::BTreeMap;

fn t(x: &[&str]) -> Vec<String> { x.iter().map(|s| s.to_string()).collect() }

fn toy() -> Instance {
    let mut inst = Instance::empty(3);
    inst.manufacturers = vec!["M1".into()];
    inst.dcs = vec![DistributionCenter::new("D1")];
    inst.vcs = vec!["V1".into(), "V2".into()];
    inst.vaccines = vec![VaccineType::new("P", 1, 100, 1, ColdTier::Cold)];
    for tt in 1..=3 {
        let ts = tt.to_string();
        inst.put("capacities", "production", &["M1", "P", &ts], 30.0);
        inst.put("demand", "kpt", &["V1", "P", &ts], [8.0, 10.0, 6.0][tt - 1]);
        inst.put("demand", "kpt", &["V2", "P", &ts], [5.0, 7.0, 9.0][tt - 1]);
    }
    inst.put("costs", "shipping_md", &["M1", "D1"], 1.0);
    inst.put("costs", "shipping_dv", &["D1", "V1"], 2.0);
    inst.put("costs", "shipping_dv", &["D1", "V2"], 3.0);
    inst.put("costs", "holding", &["D1"], 0.5);
    inst.put("costs", "shortage", &["V1", "P"], 40.0);
    inst.put("costs", "shortage", &["V2", "P"], 40.0);
    inst
}

fn epi(groups: &[(&str, f64, f64, f64)], horizon: usize, k: f64) -> Instance {
    let mut inst = Instance::empty(horizon);
    inst.regions = vec!["R1".into()];
    inst.groups = groups.iter().map(|g| g.0.to_string()).collect();
    let r_d = 0.1 * k;
    let mut p = EpiParams {
        beta: 0.9, alpha: 0.25 * k, gamma: vec![1.0; horizon], r_infection: 0.2 * k, r_detection: r_d,
        r_death: 0.05 * k, r_death_group: BTreeMap::new(), r_undetected: Tensor::default(),
        r_hospital: Tensor::default(), r_quarantine: Tensor::default(), initial: Tensor::default(),
        initial_vaccinated: Tensor::default(), herd: None, deaths_weight: 1.0, infections_weight: 0.0, supply: None,
    };
    for &(g, death, s, i) in groups {
        p.r_death_group.insert(g.into(), death * k);
        for tt in 1..=horizon {
            let ts = tt.to_string();
            p.r_undetected.insert(t(&[g, &ts]), 0.3 * r_d);
            p.r_hospital.insert(t(&[g, &ts]), 0.2 * r_d);
            p.r_quarantine.insert(t(&[g, &ts]), 0.5 * r_d);
        }
        p.initial.insert(t(&["R1", g, "S"]), s);
        p.initial.insert(t(&["R1", g, "I"]), i);
    }
    inst.epi = Some(p);
    inst
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir).unwrap();
    toy().save(dir.join("toy.json")).unwrap();

    let mut ts = toy();
    for (id, prob, d) in [("low", 0.4, [6.0, 8.0, 4.0]), ("high", 0.6, [14.0, 16.0, 18.0])] {
        let mut tab = Tensor::default();
        for tt in 1..=3 { tab.insert(t(&["V1", "P", &tt.to_string()]), d[tt - 1]); }
        let mut ov = BTreeMap::new();
        ov.insert("demand.kpt".to_string(), Param::Tensor(tab));
        ts.scenarios.push(Scenario { id: id.into(), probability: prob, overrides: ov });
    }
    ts.save(dir.join("toy_tssp.json")).unwrap();

    let mut dro = toy();
    for (id, prob, d) in [("low", 0.3, [6.0, 8.0, 4.0]), ("mid", 0.4, [8.0, 10.0, 6.0]), ("high", 0.3, [14.0, 16.0, 18.0])] {
        let mut tab = Tensor::default();
        for tt in 1..=3 { tab.insert(t(&["V1", "P", &tt.to_string()]), d[tt - 1]); }
        let mut ov = BTreeMap::new();
        ov.insert("demand.kpt".to_string(), Param::Tensor(tab));
        dro.scenarios.push(Scenario { id: id.into(), probability: prob, overrides: ov });
    }
    dro.ambiguity = Some(AmbiguitySpec { eps_mu: 0.1, eps_sigma_lo: 0.9, eps_sigma_hi: 1.1, mean: Tensor::default(), sigma: Tensor::default() });
    dro.save(dir.join("toy_dro.json")).unwrap();

    let mut c = toy();
    c.set_scalar("costs", "emission_facility", 5.0);
    c.set_scalar("costs", "emission_transport", 0.1);
    c.put("logistics", "distance", &["M1", "D1"], 10.0);
    c.put("logistics", "distance", &["D1", "V1"], 4.0);
    c.put("logistics", "distance", &["D1", "V2"], 12.0);
    c.save(dir.join("toy_carbon.json")).unwrap();

    let mut e = epi(&[("hi", 0.2, 0.45, 0.03), ("lo", 0.01, 0.5, 0.02)], 10, 1.0);
    e.epi.as_mut().unwrap().supply = Some(vec![0.02; 10]);
    e.save(dir.join("epi.json")).unwrap();
    epi(&[("g", 0.05, 0.99, 0.01)], 50, 0.3).save(dir.join("epi_t50.json")).unwrap();

    // depot 0 and five regions
    let pts: [(f64, f64); 6] = [(0.0, 0.0), (2.0, 1.0), (4.0, 3.0), (1.0, 5.0), (-2.0, 3.0), (-3.0, -1.0)];
    let mut r = Instance::empty(1);
    r.regions = (0..pts.len()).map(|i| i.to_string()).collect();
    for a in 0..pts.len() { for b in 0..pts.len() { if a != b {
        let d = ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt();
        r.put("logistics", "travel_time", &[&a.to_string(), &b.to_string()], (d * 100.0).round() / 100.0);
    }}}
    for (i, d) in [3.0, 4.0, 2.0, 5.0, 3.0].iter().enumerate() {
        r.put("demand", "rg", &[&(i + 1).to_string(), "all"], *d);
    }
    r.groups = vec!["all".into()];
    r.vehicles = vec!["H1".into(), "H2".into()];
    r.put("capacities", "vehicle", &["H1"], 10.0);
    r.put("capacities", "vehicle", &["H2"], 10.0);
    r.set_scalar("logistics", "time_budget", 12.0);
    r.save(dir.join("routing.json")).unwrap();
    println!("fixtures written to {}", dir.display());
}
