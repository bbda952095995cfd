//! Emission against shortage on the toy network with carbon data, traced by
//! bounding shortage and minimizing emission.

use std::collections::BTreeMap;

use vaxopt::data::Instance;
use vaxopt::equity::{self, nondominated, pareto_csv, pareto_sweep, senses};
use vaxopt::model::Model;
use vaxopt::scm::{self, DemandMode, ScmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_carbon.json");
    let inst = Instance::load(path)?;
    let cfg = ScmConfig::default();
    let mut m = Model::new();
    scm::build_dc_flow(&mut m, &inst, &cfg)?;
    scm::build_vc_flow(&mut m, &inst, &cfg, DemandMode::Shortage)?;
    equity::build_carbon_objective(&mut m, &inst)?;

    let grid: Vec<BTreeMap<String, f64>> = [0.0, 10.0, 20.0, 30.0, 40.0]
        .into_iter()
        .map(|s| BTreeMap::from([(scm::COST.to_string(), 1e5), (equity::SHORTAGE.to_string(), s)]))
        .collect();
    let points = pareto_sweep(&m, equity::EMISSION, &grid)?;
    print!("{}", pareto_csv(&points));
    let front = nondominated(&points, &senses(&m), 1e-6);
    println!("{} of {} points nondominated", front.len(), points.len());
    Ok(())
}
