//! Write the toy model as an LP file, read it back and solve the copy.

use vaxopt::data::Instance;
use vaxopt::model::{lp, Model};
use vaxopt::scm::{self, DemandMode, ScmConfig};
use vaxopt::solve::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy.json");
    let inst = Instance::load(path)?;
    let cfg = ScmConfig::integer(100.0);
    let mut m = Model::new();
    scm::build_dc_flow(&mut m, &inst, &cfg)?;
    scm::build_vc_flow(&mut m, &inst, &cfg, DemandMode::Shortage)?;

    let text = lp::to_lp_string(&m)?;
    let out = std::env::temp_dir().join("vaxopt_toy.lp");
    std::fs::write(&out, &text)?;
    println!("wrote {} ({} lines)", out.display(), text.lines().count());

    let back = lp::parse_lp(&text)?;
    println!("original {:?}, round trip {:?}", solve(&m)?.objective, solve(&back)?.objective);
    Ok(())
}
