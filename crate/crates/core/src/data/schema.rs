//! Parameter catalog layout: every numeric parameter, the section it
//! lives in, its shape, and the neutral value used when it is absent.

/// Set a tensor index component must belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetKind {
    Manufacturer,
    Dc,
    Vc,
    Site,
    Region,
    Group,
    Vehicle,
    Outreach,
    Vaccine,
    /// Period in `1..=horizon`.
    Time,
    /// Coverage level in `1..=|theta|`.
    Level,
    /// Any declared facility, site or region id.
    Node,
}

impl SetKind {
    pub fn label(self) -> &'static str {
        match self {
            SetKind::Manufacturer => "manufacturers",
            SetKind::Dc => "distribution_centers",
            SetKind::Vc => "vaccination_centers",
            SetKind::Site => "population_sites",
            SetKind::Region => "regions",
            SetKind::Group => "groups",
            SetKind::Vehicle => "vehicles",
            SetKind::Outreach => "outreach_centers",
            SetKind::Vaccine => "vaccines",
            SetKind::Time => "time",
            SetKind::Level => "coverage levels",
            SetKind::Node => "nodes",
        }
    }

    /// Indices serialized as JSON numbers.
    pub fn is_numeric(self) -> bool {
        matches!(self, SetKind::Time | SetKind::Level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    List,
    Tensor(&'static [(&'static str, SetKind)]),
}

/// What an absent entry means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neutral {
    Zero,
    Unbounded,
    /// No default; builders that need it report it missing.
    Required,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub section: &'static str,
    pub name: &'static str,
    pub shape: Shape,
    pub neutral: Neutral,
    /// Values must be nonnegative.
    pub nonneg: bool,
}

use Neutral::*;
use SetKind::*;
use Shape::*;

const fn p(section: &'static str, name: &'static str, shape: Shape, neutral: Neutral, nonneg: bool) -> ParamSpec {
    ParamSpec {
        section,
        name,
        shape,
        neutral,
        nonneg,
    }
}

pub const SECTIONS: &[&str] = &["demand", "costs", "capacities", "logistics"];

pub const PARAMS: &[ParamSpec] = &[
    // demand
    p("demand", "gkpt", Tensor(&[("group", Group), ("vc", Vc), ("vaccine", Vaccine), ("t", Time)]), Zero, true),
    p("demand", "kpt", Tensor(&[("vc", Vc), ("vaccine", Vaccine), ("t", Time)]), Zero, true),
    p("demand", "rg", Tensor(&[("region", Region), ("group", Group)]), Zero, true),
    p("demand", "dc_rate", Tensor(&[("dc", Dc)]), Required, true),
    p("demand", "dc_rate_sd", Tensor(&[("dc", Dc)]), Zero, true),
    p("demand", "gamma", Scalar, Required, true),
    p("demand", "site", Tensor(&[("site", Site)]), Zero, true),
    p("demand", "coverage", Tensor(&[("site", Site)]), Zero, true),
    p("demand", "theta", List, Required, true),
    p("demand", "population_region", Tensor(&[("region", Region)]), Required, true),
    p("demand", "population_site", Tensor(&[("site", Site)]), Required, true),
    p("demand", "alpha", Scalar, Required, true),
    p("demand", "mean_kpt", Tensor(&[("vc", Vc), ("vaccine", Vaccine), ("t", Time)]), Required, false),
    p("demand", "sd_kpt", Tensor(&[("vc", Vc), ("vaccine", Vaccine), ("t", Time)]), Zero, false),
    p("demand", "mean_th", Tensor(&[("t", Time), ("vehicle", Vehicle)]), Required, false),
    p("demand", "sd_th", Tensor(&[("t", Time), ("vehicle", Vehicle)]), Zero, false),
    // costs
    p("costs", "shortage", Tensor(&[("vc", Vc), ("vaccine", Vaccine)]), Zero, false),
    p("costs", "emission_facility", Scalar, Zero, false),
    p("costs", "emission_transport", Scalar, Zero, false),
    p("costs", "vc_open", Tensor(&[("vc", Vc)]), Zero, false),
    p("costs", "budget", Scalar, Unbounded, true),
    p("costs", "ordering", Tensor(&[("manufacturer", Manufacturer), ("dc", Dc)]), Zero, false),
    p("costs", "holding", Tensor(&[("dc", Dc)]), Zero, false),
    p("costs", "holding_vc", Tensor(&[("vc", Vc)]), Zero, false),
    p("costs", "waste", Scalar, Zero, false),
    p("costs", "dc_open", Tensor(&[("dc", Dc)]), Zero, false),
    p("costs", "hire", Scalar, Zero, false),
    p("costs", "shipping_md", Tensor(&[("manufacturer", Manufacturer), ("dc", Dc)]), Zero, false),
    p("costs", "shipping_dv", Tensor(&[("dc", Dc), ("vc", Vc)]), Zero, false),
    p("costs", "open_vial_waste", Scalar, Zero, false),
    // capacities
    p("capacities", "production", Tensor(&[("manufacturer", Manufacturer), ("vaccine", Vaccine), ("t", Time)]), Unbounded, true),
    p("capacities", "dc", Tensor(&[("dc", Dc)]), Unbounded, true),
    p("capacities", "vc", Tensor(&[("vc", Vc)]), Unbounded, true),
    p("capacities", "vc_total", Scalar, Unbounded, true),
    p("capacities", "fleet", Scalar, Unbounded, true),
    p("capacities", "safety_stock", Tensor(&[("dc", Dc)]), Zero, true),
    p("capacities", "outreach", Tensor(&[("outreach", Outreach)]), Unbounded, true),
    p("capacities", "vehicle", Tensor(&[("vehicle", Vehicle)]), Unbounded, true),
    p("capacities", "dc_cold", Tensor(&[("dc", Dc)]), Unbounded, true),
    p("capacities", "dc_very_cold", Tensor(&[("dc", Dc)]), Unbounded, true),
    p("capacities", "dc_ultra_cold", Tensor(&[("dc", Dc)]), Zero, true),
    p("capacities", "health_worker", Scalar, Required, true),
    p("capacities", "existing_workforce", Tensor(&[("vc", Vc), ("t", Time)]), Zero, true),
    p("capacities", "max_vcs", Scalar, Unbounded, true),
    // logistics
    p("logistics", "dc_vc_feasible", Tensor(&[("vc", Vc), ("dc", Dc)]), Zero, true),
    p("logistics", "site_vc_feasible", Tensor(&[("site", Site), ("vc", Vc)]), Zero, true),
    p("logistics", "distance", Tensor(&[("from", Node), ("to", Node)]), Required, true),
    p("logistics", "travel_time", Tensor(&[("from", Region), ("to", Region)]), Required, true),
    p("logistics", "service_time", Tensor(&[("region", Region)]), Zero, true),
    p("logistics", "max_distance", Scalar, Unbounded, true),
    p("logistics", "level_distances", List, Required, true),
    p("logistics", "fair_allocation", Tensor(&[("region", Region), ("group", Group)]), Required, true),
    p("logistics", "lead_time", Scalar, Zero, true),
    p("logistics", "lead_time_sd", Scalar, Zero, true),
    p("logistics", "initial_dc", Tensor(&[("dc", Dc)]), Zero, true),
    p("logistics", "initial_vc", Tensor(&[("vc", Vc), ("vaccine", Vaccine)]), Zero, true),
    p("logistics", "equity_weight", Scalar, Required, true),
    p("logistics", "penalty", Scalar, Zero, true),
    p("logistics", "time_budget", Scalar, Required, false),
];

pub fn spec(section: &str, name: &str) -> Option<&'static ParamSpec> {
    PARAMS.iter().find(|s| s.section == section && s.name == name)
}

/// Parameters a scenario may override.
pub const SCENARIO_OVERRIDABLE: &[(&str, &str)] = &[
    ("demand", "gkpt"),
    ("demand", "kpt"),
    ("demand", "rg"),
    ("capacities", "production"),
    ("capacities", "vc"),
    ("capacities", "dc"),
    ("capacities", "vc_total"),
];
