//! Vehicle routes from the depot, solved with both subtour formulations.

use vaxopt::data::Instance;
use vaxopt::model::Model;
use vaxopt::routing::{self, Subtour};
use vaxopt::solve::MilpOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/routing.json");
    let inst = Instance::load(path)?;
    for mode in [Subtour::Mtz, Subtour::DfjLazy] {
        let mut m = Model::new();
        routing::build_vrp(&mut m, &inst, mode)?;
        let (sol, cuts) = routing::solve_with_subtour_cuts(&mut m, &MilpOptions::default())?;
        println!("{mode:?}: travel time {:.2}, {cuts} cuts", sol.objective.unwrap());
        if mode == Subtour::Mtz {
            print!("{}", routing::route_csv(&routing::routes(&m, &inst, &sol)));
        }
    }

    let mut m = Model::new();
    routing::build_selective_routing(&mut m, &inst, 8.0)?;
    let (sol, _) = routing::solve_with_subtour_cuts(&mut m, &MilpOptions::default())?;
    println!("demand reached within 8 time units: {}", sol.objective.unwrap());
    Ok(())
}
