//! Load the toy supply chain, solve it and print the shipments.
//!
//! `cargo run --example quickstart`

use vaxopt::data::Instance;
use vaxopt::model::Model;
use vaxopt::scm::{self, DemandMode, ScmConfig};
use vaxopt::solve::{audit, solve};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy.json");
    let inst = Instance::load(path)?;

    let cfg = ScmConfig::default();
    let mut m = Model::new();
    scm::build_dc_flow(&mut m, &inst, &cfg)?;
    scm::build_vc_flow(&mut m, &inst, &cfg, DemandMode::Shortage)?;
    println!("{} variables, {} constraints", m.num_vars(), m.constraints().len());

    let sol = solve(&m)?;
    println!("status {:?}, cost {}", sol.status, sol.objective.unwrap_or(f64::NAN));
    for v in m.family_vars("x_dv") {
        let x = sol.value(v);
        if x > 0.0 {
            println!("  {} = {x}", m.var_info(v).name());
        }
    }
    println!("audit clean: {}", audit(&m, &sol).is_clean());
    Ok(())
}
