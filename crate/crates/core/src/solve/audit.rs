//! Residual auditing of a solution against its model.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{residuals, Solution};
use crate::model::lp::fmt_num;
use crate::model::{Model, Sense};

/// Tag groups holding inventory or dose balance equations.
pub const CONSERVATION_GROUPS: &[&str] = &[
    "scm.dc_flow.balance",
    "scm.dc_flow.balance_before_lead",
    "scm.vc_flow.balance",
    "scm.vc_flow.demand_split",
    "scm.priority.balance",
    "scm.vial_dose.balance",
    "scm.shelf_life.receive",
    "scm.shelf_life.open",
    "scm.shelf_life.open_initial",
    "scm.shelf_life.initial_split",
    "scm.open_vial.forward",
];

pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintResidual {
    pub tag: String,
    pub activity: f64,
    pub sense: Sense,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagSummary {
    pub count: usize,
    pub max_residual: f64,
    pub violated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub rows: Vec<ConstraintResidual>,
    /// Aggregation by tag group (the tag without its index brackets).
    pub groups: BTreeMap<String, TagSummary>,
    pub max_residual: f64,
    pub max_integrality: f64,
    pub max_bound: f64,
    /// Conservation groups whose residual exceeds [`AUDIT_TOL`].
    pub conservation_flags: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.max_residual <= AUDIT_TOL
            && self.max_integrality <= AUDIT_TOL
            && self.max_bound <= AUDIT_TOL
            && self.conservation_flags.is_empty()
    }

    /// CSV text: tag, activity, sense, rhs, residual, status.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tag,activity,sense,rhs,residual,status\n");
        for r in &self.rows {
            let status = if r.residual <= AUDIT_TOL { "ok" } else { "violated" };
            let _ = writeln!(
                s,
                "\"{}\",{},{},{},{},{}",
                r.tag,
                fmt_num(r.activity),
                r.sense,
                fmt_num(r.rhs),
                fmt_num(r.residual),
                status
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_csv())
    }
}

pub fn tag_group(tag: &str) -> &str {
    tag.split('[').next().unwrap_or(tag)
}

/// Per-constraint residuals, per-group aggregation, and conservation checks.
pub fn audit(model: &Model, solution: &Solution) -> AuditReport {
    let values = &solution.values;
    let mut rows = Vec::with_capacity(model.constraints().len());
    let mut groups: BTreeMap<String, TagSummary> = BTreeMap::new();
    for c in model.constraints() {
        let activity = c.lhs.eval(values);
        let residual = c.violation(values);
        let g = groups.entry(tag_group(&c.tag).to_string()).or_insert(TagSummary {
            count: 0,
            max_residual: 0.0,
            violated: 0,
        });
        g.count += 1;
        g.max_residual = g.max_residual.max(residual);
        if residual > AUDIT_TOL {
            g.violated += 1;
        }
        rows.push(ConstraintResidual {
            tag: c.tag.clone(),
            activity,
            sense: c.sense,
            rhs: c.rhs,
            residual,
        });
    }
    let r = residuals(model, values);
    let conservation_flags = groups
        .iter()
        .filter(|(name, s)| CONSERVATION_GROUPS.contains(&name.as_str()) && s.max_residual > AUDIT_TOL)
        .map(|(name, _)| name.clone())
        .collect();
    AuditReport {
        rows,
        groups,
        max_residual: r.max_constraint,
        max_integrality: r.max_integrality,
        max_bound: r.max_bound,
        conservation_flags,
    }
}

/// Whole-network accounting of a supply chain solution in vial units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConservationSummary {
    /// Initial inventories at DCs and VCs.
    pub initial: f64,
    /// Manufacturer shipments arriving within the horizon.
    pub arrived: f64,
    pub vaccinated: f64,
    pub waste: f64,
    pub terminal_inventory: f64,
}

impl ConservationSummary {
    /// Vaccinations + waste + terminal inventory never exceed what entered.
    pub fn no_creation(&self, tol: f64) -> bool {
        self.vaccinated + self.waste + self.terminal_inventory <= self.initial + self.arrived + tol
    }
}

/// Sum the supply chain families of a deterministic model. Lead time,
/// horizon and fixed demand come from metadata written by the builders.
pub fn conservation_summary(model: &Model, solution: &Solution) -> ConservationSummary {
    let meta = |k: &str| model.metadata.get(k).and_then(|v| v.parse::<f64>().ok());
    let horizon = meta("horizon").unwrap_or(f64::INFINITY);
    let lead = meta("scm.lead_time").unwrap_or(0.0);
    let mut s = ConservationSummary {
        initial: meta("scm.initial_inventory").unwrap_or(0.0),
        vaccinated: meta("scm.fixed_demand").unwrap_or(0.0),
        ..Default::default()
    };
    for (i, v) in model.vars().iter().enumerate() {
        let x = solution.values[i];
        let last_t = || v.indices.last().and_then(|t| t.parse::<f64>().ok()).unwrap_or(0.0);
        match v.family.as_str() {
            "x_md" => {
                if last_t() + lead <= horizon {
                    s.arrived += x;
                }
            }
            "x_v" | "y_v" if !model.has_family("x_v") || v.family == "x_v" => s.vaccinated += x,
            "w_dc" | "w_vc" => s.waste += x,
            "I_dc" | "I_vc" => {
                if last_t() == horizon {
                    s.terminal_inventory += x;
                }
            }
            _ => {}
        }
    }
    s
}
