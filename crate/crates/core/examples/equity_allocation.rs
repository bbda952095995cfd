//! Split a scarce supply over three groups: maximin satisfaction first,
//! then the Gini coefficient of the resulting rates.

use vaxopt::data::{ColdTier, Instance, VaccineType};
use vaxopt::equity;
use vaxopt::ix;
use vaxopt::model::{Domain, LinExpr, Model, Sense};
use vaxopt::solve::solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demand = [("elderly", 40.0), ("workers", 60.0), ("others", 100.0)];
    let supply = 90.0;

    let mut inst = Instance::empty(1);
    inst.vcs = vec!["V1".into()];
    inst.vaccines = vec![VaccineType::new("P", 1, 10, 1, ColdTier::Cold)];
    inst.groups = demand.iter().map(|d| d.0.to_string()).collect();
    for (g, d) in demand {
        inst.put("demand", "gkpt", &[g, "V1", "P", "1"], d);
    }

    let mut m = Model::new();
    let mut total = LinExpr::new();
    for (g, d) in demand {
        total.add_term(m.add_var("x_v", ix![g, "V1", "P", 1], Domain::Integer, 0.0, d)?, 1.0);
    }
    m.add_constraint(total, Sense::Le, supply, "supply")?;
    equity::build_maximin_satisfaction(&mut m, &inst)?;

    let sol = solve(&m)?;
    println!("lowest satisfaction rate: {:.4}", sol.objective.unwrap());
    let mut rates = vec![];
    for (g, d) in demand {
        let x = sol.get(&m, "x_v", &ix![g, "V1", "P", 1]);
        println!("  {g}: {x} of {d}");
        rates.push(x / d);
    }
    println!("gini of rates: {:.4}", equity::gini(&rates)?);
    Ok(())
}
