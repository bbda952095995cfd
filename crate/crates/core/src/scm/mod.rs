//! Supply chain constraint builders for the manufacturer, distribution
//! center and vaccination center echelons.
//!
//! Every builder appends tagged constraints to a [`Model`] and adds its
//! natural cost terms to the shared `"cost"` objective. Variable families
//! are shared by name, so builders compose in any order.
//!
//! | family | indices | meaning |
//! |---|---|---|
//! | `x_md` | i, j, p, t | manufacturer to DC shipment ordered at t |
//! | `x_dv` | j, k, p, t | DC to VC shipment |
//! | `x_dd` | j, j', p, t | DC to DC transshipment |
//! | `x_vv` | k, k', p, t | VC to VC lateral shipment |
//! | `x_v` | g, k, p, t | vaccinations |
//! | `s_v` | k, p, t | shortage against `d_kpt` |
//! | `I_dc`, `I_vc` | j/k, t | inventory |
//! | `w_dc`, `w_vc` | j/k, p, t | wasted vials |
//! | `Y_D`, `Y_Dc`, `Y_Dvc`, `Y_Duc` | j | DC opening by storage tier |
//! | `X_m` | i, t | manufacturer active |

mod upstream;
mod vc;
mod vials;
mod priority;

pub use priority::build_priority_sequencing;
pub use upstream::{
    build_cold_chain, build_dc_flow, build_dc_flow_aggregated, build_fleet_capacity, build_manufacturer_capacity,
    build_order_exclusivity,
};
pub use vc::{build_dc_vc_assignment, build_vc_flow, build_workforce, AssignmentMode, DemandMode};
pub use vials::{build_open_vial_window, build_shelf_life, build_vial_dose_balance};
pub(crate) use upstream::x_dv;

use crate::data::Instance;
use crate::model::{BuildError, Domain, LinExpr, Model, ModelError, ObjSense, VarId};

/// Name of the cost objective the supply chain builders contribute to.
pub const COST: &str = "cost";

/// Group id used when an instance declares no groups.
pub const ALL_GROUPS: &str = "all";

#[derive(Debug, Clone)]
pub struct ScmConfig {
    /// Make flow, inventory and vaccination variables integer.
    pub integer_flows: bool,
    /// Upper bound on every flow variable.
    pub flow_ub: f64,
    /// Lead time override; defaults to `logistics.lead_time`.
    pub lead_time: Option<usize>,
    /// Cold chain: same-period outflow ≤ inflow instead of equality.
    pub relaxed_pass_through: bool,
    /// Waste penalty override; defaults to `costs.waste`.
    pub waste_cost: Option<f64>,
}

impl Default for ScmConfig {
    fn default() -> Self {
        ScmConfig {
            integer_flows: false,
            flow_ub: f64::INFINITY,
            lead_time: None,
            relaxed_pass_through: false,
            waste_cost: None,
        }
    }
}

impl ScmConfig {
    pub fn integer(ub: f64) -> Self {
        ScmConfig {
            integer_flows: true,
            flow_ub: ub,
            ..Default::default()
        }
    }

    pub fn flow_domain(&self) -> Domain {
        if self.integer_flows {
            Domain::Integer
        } else {
            Domain::Continuous
        }
    }

    pub fn lead(&self, inst: &Instance) -> usize {
        self.lead_time.unwrap_or_else(|| inst.lead_time())
    }

    pub fn waste(&self, inst: &Instance) -> f64 {
        self.waste_cost.unwrap_or_else(|| inst.scalar("costs", "waste").unwrap_or(0.0))
    }
}

pub(crate) fn groups(inst: &Instance) -> Vec<String> {
    if inst.groups.is_empty() {
        vec![ALL_GROUPS.to_string()]
    } else {
        inst.groups.clone()
    }
}

/// Look up or register a nonnegative flow-like variable.
pub(crate) fn flow(m: &mut Model, cfg: &ScmConfig, family: &str, idx: Vec<String>) -> Result<VarId, ModelError> {
    m.var_or_add(family, idx, cfg.flow_domain(), 0.0, cfg.flow_ub)
}

pub(crate) fn binary(m: &mut Model, family: &str, idx: Vec<String>) -> Result<VarId, ModelError> {
    m.var_or_add(family, idx, Domain::Binary, 0.0, 1.0)
}

pub(crate) fn add_cost(m: &mut Model, v: VarId, c: f64) -> Result<(), ModelError> {
    if c != 0.0 {
        m.add_objective_terms(COST, ObjSense::Minimize, LinExpr::term(v, c))?;
    }
    Ok(())
}

pub(crate) fn missing(section: &str, name: &str) -> BuildError {
    BuildError::Missing(format!("{section}.{name}"))
}

/// Initial inventory of VC `k` summed over vaccines.
pub(crate) fn initial_vc(inst: &Instance, k: &str) -> f64 {
    inst.vaccines.iter().map(|p| inst.value_or_zero("logistics", "initial_vc", &[k, &p.id])).sum()
}

/// Data-driven bound on any aggregate flow: total finite production plus
/// initial stock, or total demand plus initial stock when production is
/// unbounded. Flows above total demand are never needed in a cost-minimizing
/// plan with nonnegative costs.
pub fn throughput_bound(inst: &Instance) -> f64 {
    let initial: f64 = inst.dcs.iter().map(|d| inst.value_or_zero("logistics", "initial_dc", &[&d.id])).sum::<f64>()
        + inst.vcs.iter().map(|k| initial_vc(inst, k)).sum::<f64>();
    let mut supply = Some(0.0);
    if inst.manufacturers.is_empty() || !inst.has("capacities", "production") {
        supply = None;
    }
    for i in &inst.manufacturers {
        for p in &inst.vaccines {
            if !inst.produces(i, &p.id) {
                continue;
            }
            for t in inst.periods() {
                match (supply, inst.cap("capacities", "production", &[i, &p.id, &t.to_string()]).finite()) {
                    (Some(s), Some(c)) => supply = Some(s + c),
                    _ => supply = None,
                }
            }
        }
    }
    let demand = || -> f64 {
        let kpt: f64 = inst.tensor("demand", "kpt").map(|t| t.data.values().sum()).unwrap_or(0.0);
        let gkpt: f64 = inst.tensor("demand", "gkpt").map(|t| t.data.values().sum()).unwrap_or(0.0);
        kpt.max(gkpt)
    };
    let m = match supply {
        Some(s) => s + initial,
        None => demand() + initial,
    };
    m.max(1.0)
}

/// Big-M for forcing a flow aggregate: the throughput bound, tightened by a
/// per-variable cap when flows are bounded.
pub(crate) fn big_m(inst: &Instance, cfg: &ScmConfig, terms: usize) -> f64 {
    let tb = throughput_bound(inst);
    if cfg.flow_ub.is_finite() {
        tb.min(cfg.flow_ub * terms.max(1) as f64).max(1.0)
    } else {
        tb
    }
}

pub(crate) fn set_meta(m: &mut Model, key: &str, value: impl ToString) {
    m.metadata.insert(key.to_string(), value.to_string());
}

/// Keep `scm.initial_inventory` equal to the DC and VC parts.
pub(crate) fn refresh_initial(m: &mut Model) {
    let part = |k: &str| m.metadata.get(k).and_then(|v| v.parse::<f64>().ok()).unwrap_or(0.0);
    let total = part("scm.initial_dc") + part("scm.initial_vc");
    set_meta(m, "scm.initial_inventory", total);
}
