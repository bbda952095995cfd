//! Two-stage and distributionally robust versions of the toy network.
//! Shipments into the DC are decided before demand is known.

use vaxopt::data::Instance;
use vaxopt::model::{BuildResult, Model};
use vaxopt::scm::{self, DemandMode, ScmConfig};
use vaxopt::solve::solve;
use vaxopt::uncertainty::{build_tssp_extensive, dro_worst_case, AmbiguitySet, DroOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_dro.json");
    let inst = Instance::load(path)?;
    let cfg = ScmConfig::default();

    let first = |m: &mut Model, si: &Instance| -> BuildResult { scm::build_dc_flow(m, si, &cfg) };
    let second = |m: &mut Model, si: &Instance| -> BuildResult { scm::build_vc_flow(m, si, &cfg, DemandMode::Shortage) };
    let mut m = Model::new();
    build_tssp_extensive(&mut m, &inst, &[&first], &[&second])?;

    let nominal = solve(&m)?;
    println!("expected cost under nominal probabilities: {:.3}", nominal.objective.unwrap());

    let set = AmbiguitySet::from_instance(&inst)?;
    let dro = dro_worst_case(&m, scm::COST, &set, &DroOptions::default())?;
    println!("worst-case expected cost: {:.3} ({:?}, {} iterations)", dro.value, dro.mode, dro.iterations);
    for (scenario, p) in &dro.worst_p {
        println!("  p[{scenario}] = {p:.4}");
    }
    Ok(())
}
