use std::path::{Path, PathBuf};

use vaxopt::cli::{self, exit, REGISTRY};
use vaxopt::data::Instance;
use vaxopt::model::{lp, Model};
use vaxopt::scm::{self, DemandMode, ScmConfig};
use vaxopt::solve;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = vec![];
    let mut err = vec![];
    let mut argv = vec!["vaxopt"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Number after `label` on the first line that starts with it.
fn reported(text: &str, label: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(label))
        .unwrap_or_else(|| panic!("no `{label}` in:\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

fn scm_model(inst: &Instance) -> Model {
    let mut m = Model::new();
    let cfg = ScmConfig::default();
    scm::build_dc_flow(&mut m, inst, &cfg).unwrap();
    scm::build_vc_flow(&mut m, inst, &cfg, DemandMode::Shortage).unwrap();
    m
}

#[test]
fn validate_clean_fixtures() {
    for f in ["toy.json", "toy_tssp.json", "toy_dro.json", "toy_carbon.json", "epi.json", "epi_t50.json", "routing.json"] {
        let (code, out, _) = run(&["validate", s(&fixture(f))]);
        assert_eq!(code, exit::OK, "{f}: {out}");
        assert!(out.ends_with("ok\n"));
    }
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let mut inst = Instance::load(fixture("toy_tssp.json")).unwrap();
    inst.scenarios[0].probability = 0.1;
    let path = dir.path().join("bad.json");
    inst.save(&path).unwrap();
    let (code, out, _) = run(&["validate", s(&path)]);
    assert_eq!(code, exit::VIOLATIONS);
    assert!(out.contains("scenarios: probabilities sum to"), "{out}");
}

#[test]
fn validate_missing_file_is_io_error() {
    let (code, _, err) = run(&["validate", "/nonexistent/instance.json"]);
    assert_eq!(code, exit::IO);
    assert!(err.contains("nonexistent"));
}

#[test]
fn solve_toy_cost() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&["solve", s(&fixture("toy.json")), "-f", "scm.dc_flow,scm.vc_flow", "--out", s(dir.path())]);
    assert_eq!(code, exit::OK, "{err}");
    // V1 takes 24 doses at 1 + 2 per dose, V2 takes 21 at 1 + 3.
    assert_eq!(reported(&out, "objective cost:"), 156.0);
    assert!(out.contains("audit: clean"));
    let audit = std::fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert!(audit.starts_with("tag,"));
    assert!(audit.lines().skip(1).all(|l| l.ends_with(",ok")), "{audit}");
    let sol = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(sol.starts_with("family,indices,value\n"));
}

#[test]
fn solve_outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let (code, _, _) = run(&["solve", s(&fixture("toy.json")), "-f", "scm.dc_flow,scm.vc_flow", "--out", s(d.path())]);
        assert_eq!(code, exit::OK);
    }
    for f in ["solution.csv", "audit.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tssp_equals_expected_scenario_optimum() {
    let inst = Instance::load(fixture("toy_tssp.json")).unwrap();
    let mut expect = 0.0;
    for sc in &inst.scenarios {
        let sol = solve::solve(&scm_model(&inst.for_scenario(sc))).unwrap();
        expect += sc.probability * sol.objective.unwrap();
    }
    assert!((expect - (0.4 * 138.0 + 0.6 * 228.0)).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&[
        "solve",
        s(&fixture("toy_tssp.json")),
        "-f",
        "scm.dc_flow,scm.vc_flow",
        "--uncertainty",
        "tssp",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, exit::OK, "{err}");
    assert!((reported(&out, "objective cost:") - expect).abs() < 1e-6);
}

#[test]
fn first_stage_tssp_pays_for_the_high_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[
        "solve",
        s(&fixture("toy_tssp.json")),
        "-f",
        "scm.vc_flow",
        "--first-stage",
        "scm.dc_flow",
        "--uncertainty",
        "tssp",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, exit::OK);
    let v = reported(&out, "objective cost:");
    assert!(v >= 192.0 - 1e-6 && v <= 228.0 + 1e-6, "{v}");
}

#[test]
fn unknown_formulation_lists_valid_names() {
    let (code, _, err) = run(&["solve", s(&fixture("toy.json")), "-f", "scm.dc_flow,scm.nope"]);
    assert_eq!(code, exit::USAGE);
    assert!(err.contains("scm.nope"));
    for e in REGISTRY {
        assert!(err.contains(e.name), "{} missing", e.name);
    }
}

#[test]
fn priority_sequencing_without_two_groups_is_a_composition_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "solve",
        s(&fixture("toy.json")),
        "-f",
        "scm.vc_flow,scm.priority_sequencing",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, exit::USAGE, "{err}");
    assert!(err.contains("composition"));
}

#[test]
fn bad_variant_is_rejected() {
    let (code, _, err) = run(&["solve", s(&fixture("toy.json")), "-f", "scm.vc_flow:sometimes"]);
    assert_eq!(code, exit::VIOLATIONS, "{err}");
    let (code, _, _) = run(&["solve", s(&fixture("toy.json")), "-f", "scm.dc_flow:x"]);
    assert_eq!(code, exit::VIOLATIONS);
}

#[test]
fn multi_objective_needs_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("toy_carbon.json");
    let (code, _, err) = run(&["solve", s(&f), "-f", "scm.dc_flow,scm.vc_flow,equity.carbon", "--out", s(dir.path())]);
    assert_eq!(code, exit::USAGE);
    assert!(err.contains("--objective") && err.contains("--epsilon"), "{err}");
    let (code, _, err) = run(&[
        "solve",
        s(&f),
        "-f",
        "scm.dc_flow,scm.vc_flow,equity.carbon",
        "--objective",
        "emission",
        "--epsilon",
        "shortage=10",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, exit::USAGE);
    assert!(err.contains("cost"), "{err}");
}

#[test]
fn epsilon_sweep_writes_nondominated_front() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&[
        "solve",
        s(&fixture("toy_carbon.json")),
        "-f",
        "scm.dc_flow,scm.vc_flow,equity.carbon",
        "--objective",
        "emission",
        "--epsilon",
        "shortage=0;15;30;45",
        "--epsilon",
        "cost=100000",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code, exit::OK, "{err}");
    assert!(out.contains("4 solved, 4 nondominated"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("pareto.csv")).unwrap();
    let mut rows: Vec<(f64, f64)> = vec![];
    let head: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let ie = head.iter().position(|h| *h == "obj_emission").unwrap();
    let is = head.iter().position(|h| *h == "obj_shortage").unwrap();
    for l in csv.lines().skip(1) {
        let c: Vec<&str> = l.split(',').collect();
        rows.push((c[ie].parse().unwrap(), c[is].parse().unwrap()));
    }
    // more shortage allowed, less emission: each unserved V2 dose saves its 1.2 transport emission
    for w in rows.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 > w[0].1, "{rows:?}");
    }
    assert!((rows[0].0 - 84.8).abs() < 1e-4);
    assert!(dir.path().join("solution.csv").exists());
}

#[test]
fn epsilon_parsing() {
    let g = cli::parse_epsilon(&["a=1;2".into(), "b=3;4;5".into()]).unwrap();
    assert_eq!(g.len(), 6);
    assert_eq!(g[0]["a"], 1.0);
    assert_eq!(g[5]["b"], 5.0);
    assert!(cli::parse_epsilon(&["a".into()]).is_err());
    assert!(cli::parse_epsilon(&["a=x".into()]).is_err());
    assert!(cli::parse_epsilon(&["a=1".into(), "a=2".into()]).is_err());
}

#[test]
fn routing_modes_agree_and_write_routes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (code, out_mtz, _) = run(&["solve", s(&fixture("routing.json")), "-f", "routing.vrp", "--out", s(a.path())]);
    assert_eq!(code, exit::OK);
    let (code, out_dfj, _) = run(&["solve", s(&fixture("routing.json")), "-f", "routing.vrp:dfj_lazy", "--out", s(b.path())]);
    assert_eq!(code, exit::OK);
    assert!((reported(&out_mtz, "objective travel:") - reported(&out_dfj, "objective travel:")).abs() < 1e-6);
    let routes = std::fs::read_to_string(a.path().join("routes.csv")).unwrap();
    assert!(routes.starts_with("vehicle,order,region"));
    let visited: Vec<&str> = routes.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    let mut sorted = visited.clone();
    sorted.sort();
    assert_eq!(sorted, ["1", "2", "3", "4", "5"]);
}

#[test]
fn dro_is_at_least_the_nominal_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let args = |mode: &'static str| {
        vec![
            "solve".to_string(),
            s(&fixture("toy_dro.json")).to_string(),
            "-f".into(),
            "scm.vc_flow".into(),
            "--first-stage".into(),
            "scm.dc_flow".into(),
            "--uncertainty".into(),
            mode.into(),
            "--out".into(),
            s(dir.path()).to_string(),
        ]
    };
    let a = args("tssp");
    let (code, out, _) = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, exit::OK);
    let nominal = reported(&out, "objective cost:");
    let a = args("dro");
    let (code, out, err) = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, exit::OK, "{err}");
    assert!(reported(&out, "worst-case cost:") >= nominal - 1e-6);
    assert!(dir.path().join("dro.csv").exists());
}

#[test]
fn simulate_without_plan_emits_trajectory() {
    let (code, out, _) = run(&["simulate", s(&fixture("epi.json"))]);
    assert_eq!(code, exit::OK);
    assert!(out.starts_with("region,group,period,compartment,value\n"));
    // 2 groups × 8 compartments + 4 vaccinated-class compartments at 11 time
    // points, plus the plan rate V per group for periods 1..=10
    assert_eq!(out.lines().count(), 1 + 11 * (2 * 8 + 4) + 2 * 10);
}

#[test]
fn simulate_rejects_nonpositive_step() {
    for dt in ["0", "-1"] {
        let (code, _, err) = run(&["simulate", s(&fixture("epi.json")), "--dt", dt]);
        assert_eq!(code, exit::USAGE, "{err}");
    }
}

#[test]
fn embedding_plan_replays_to_reported_deaths() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&["solve", s(&fixture("epi.json")), "-f", "epi.embedding", "--out", s(dir.path())]);
    assert_eq!(code, exit::OK, "{err}");
    let predicted = reported(&out, "predicted deaths:");
    let plan = dir.path().join("plan.csv");
    let traj = dir.path().join("replay.csv");
    let (code, sim, _) = run(&["simulate", s(&fixture("epi.json")), "--plan", s(&plan), "--out", s(&traj)]);
    assert_eq!(code, exit::OK);
    assert!((reported(&sim, "deaths:") - predicted).abs() <= 1e-6, "{sim} vs {predicted}");
    assert_eq!(
        std::fs::read(&traj).unwrap(),
        std::fs::read(dir.path().join("trajectory.csv")).unwrap()
    );
}

#[test]
fn export_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.lp");
    let b = dir.path().join("b.lp");
    for p in [&a, &b] {
        let (code, _, _) = run(&["export-lp", s(&fixture("toy.json")), "-f", "scm.dc_flow,scm.vc_flow", "--out", s(p)]);
        assert_eq!(code, exit::OK);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(std::fs::read(&b).unwrap(), text.as_bytes());
    let back = lp::parse_lp(&text).unwrap();
    let sol = solve::solve(&back).unwrap();
    assert_eq!(sol.objective, Some(156.0));
}

#[test]
fn export_refuses_unscalarized_models() {
    let (code, _, err) = run(&["export-lp", s(&fixture("toy_carbon.json")), "-f", "scm.dc_flow,scm.vc_flow,equity.carbon"]);
    assert_eq!(code, exit::USAGE);
    assert!(err.contains("--epsilon"));
    let (code, out, _) = run(&[
        "export-lp",
        s(&fixture("toy_carbon.json")),
        "-f",
        "scm.dc_flow,scm.vc_flow,equity.carbon",
        "--objective",
        "emission",
        "--epsilon",
        "cost=500",
        "--epsilon",
        "shortage=20",
    ]);
    assert_eq!(code, exit::OK);
    assert!(out.starts_with("Minimize"));
}

#[test]
fn help_lists_exactly_the_registry() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, exit::OK);
    let section = out.split("Formulations").nth(1).unwrap();
    let listed: Vec<String> = section
        .lines()
        .skip(1)
        .filter_map(|l| l.split_whitespace().next())
        .map(|w| w.split('[').next().unwrap().to_string())
        .collect();
    let names: Vec<String> = REGISTRY.iter().map(|e| e.name.to_string()).collect();
    assert_eq!(listed, names);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&[]).0, exit::USAGE);
    assert_eq!(run(&["frobnicate"]).0, exit::USAGE);
    assert_eq!(run(&["solve", s(&fixture("toy.json"))]).0, exit::USAGE);
    assert_eq!(run(&["--version"]).0, exit::OK);
}

#[test]
fn parse_formulations_splits_variants() {
    let f = cli::parse_formulations("scm.vc_flow:capped, routing.vrp").unwrap();
    assert_eq!(f.len(), 2);
    assert_eq!(f[0].variant.as_deref(), Some("capped"));
    assert_eq!(f[1].to_string(), "routing.vrp");
}
