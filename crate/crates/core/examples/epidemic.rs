//! Simulate the two-group epidemic without vaccines, then plan the supply
//! with the iterated linear embedding and replay the plan.

use vaxopt::data::Instance;
use vaxopt::epi::{self, EmbeddingOptions, SimOptions, VaccinationPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/epi.json");
    let inst = Instance::load(path)?;
    let p = inst.epi.as_ref().ok_or("instance has no epi block")?;

    let x0 = epi::initial_state(&inst, p)?;
    let idle = epi::simulate_delphi_v(&inst, p, &x0, &VaccinationPlan::default(), &SimOptions::default())?;
    println!("no vaccination: deaths {:.6}, infection load {:.6}", idle.deaths(), idle.infection_load());

    let res = epi::build_epi_embedding(&inst, &EmbeddingOptions::default(), &[])?;
    println!(
        "planned: deaths {:.6} (predicted {:.6}), {} iterations, converged {}",
        res.simulated_deaths, res.predicted_deaths, res.iterations, res.converged
    );
    let replay = epi::simulate_delphi_v(&inst, p, &x0, &res.plan, &SimOptions::default())?;
    println!("replayed deaths {:.6}", replay.deaths());
    Ok(())
}
