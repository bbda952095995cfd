//! Instance data: index sets, the parameter catalog, scenarios, epidemic
//! parameters, and JSON ingestion with referential checks.
//!
//! Tensors are stored as maps from index tuples to values. Absent entries
//! take the neutral value declared in [`schema::PARAMS`]: 0 for costs and
//! demands, [`Cap::Unbounded`] for capacities.

mod io;
pub mod schema;
mod validate;

pub use io::DataError;
pub use validate::{validate_instance, Violation};

use std::collections::BTreeMap;
use std::path::Path;

use schema::Neutral;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub horizon: usize,
    pub period_unit: String,
}

impl TimeGrid {
    pub fn periods(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColdTier {
    Cold,
    VeryCold,
    UltraCold,
}

impl ColdTier {
    pub fn as_str(self) -> &'static str {
        match self {
            ColdTier::Cold => "cold",
            ColdTier::VeryCold => "very_cold",
            ColdTier::UltraCold => "ultra_cold",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cold" => Some(ColdTier::Cold),
            "very_cold" => Some(ColdTier::VeryCold),
            "ultra_cold" => Some(ColdTier::UltraCold),
            _ => None,
        }
    }

    /// δ^(vc): needs very cold or ultra cold storage.
    pub fn needs_very_cold(self) -> bool {
        !matches!(self, ColdTier::Cold)
    }

    /// δ^(uc)
    pub fn needs_ultra_cold(self) -> bool {
        matches!(self, ColdTier::UltraCold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VialSize {
    pub id: String,
    pub doses: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaccineType {
    pub id: String,
    pub doses_per_vial: u32,
    pub shelf_life: u32,
    pub open_vial_life: u32,
    pub cold_tier: ColdTier,
    /// Manufacturers allowed to produce this vaccine; `None` means any.
    pub manufacturers: Option<Vec<String>>,
    /// Vial sizes available for opening; defaults to one size of
    /// `doses_per_vial` doses.
    pub vial_sizes: Vec<VialSize>,
}

impl VaccineType {
    /// Vaccine with a single vial size and no manufacturer restriction.
    pub fn new(id: &str, doses_per_vial: u32, shelf_life: u32, open_vial_life: u32, cold_tier: ColdTier) -> Self {
        VaccineType {
            id: id.to_string(),
            doses_per_vial,
            shelf_life,
            open_vial_life,
            cold_tier,
            manufacturers: None,
            vial_sizes: vec![VialSize {
                id: format!("v{doses_per_vial}"),
                doses: doses_per_vial,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCenter {
    pub id: String,
    /// VCs this DC may serve; `None` means all.
    pub serves: Option<Vec<String>>,
}

impl DistributionCenter {
    pub fn new(id: &str) -> Self {
        DistributionCenter {
            id: id.to_string(),
            serves: None,
        }
    }
}

/// A capacity value: a finite number or the explicit unbounded sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cap {
    Finite(f64),
    Unbounded,
}

impl Cap {
    pub fn finite(self) -> Option<f64> {
        match self {
            Cap::Finite(v) => Some(v),
            Cap::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Cap::Unbounded)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tensor {
    pub data: BTreeMap<Vec<String>, f64>,
}

impl Tensor {
    pub fn get(&self, idx: &[&str]) -> Option<f64> {
        let key: Vec<String> = idx.iter().map(|s| s.to_string()).collect();
        self.data.get(&key).copied()
    }

    pub fn insert(&mut self, idx: Vec<String>, value: f64) {
        self.data.insert(idx, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<String>, &f64)> {
        self.data.iter()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Scalar(f64),
    List(Vec<f64>),
    Tensor(Tensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub probability: f64,
    /// Overrides keyed `section.name`. Tensor entries replace the base
    /// entries with the same index; scalars replace the base value.
    pub overrides: BTreeMap<String, Param>,
}

/// Moment bounds of the ambiguity set; support comes from the scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySpec {
    pub eps_mu: f64,
    pub eps_sigma_lo: f64,
    pub eps_sigma_hi: f64,
    /// μ per (vc, t); defaults to the nominal scenario mean.
    pub mean: Tensor,
    /// σ per (vc, t), used against the second moment as printed;
    /// defaults to the nominal second moment.
    pub sigma: Tensor,
}

/// Epidemic parameters for the compartmental model.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiParams {
    /// Vaccine effectiveness β.
    pub beta: f64,
    /// Nominal infection rate α.
    pub alpha: f64,
    /// Response function γ(t) per period.
    pub gamma: Vec<f64>,
    pub r_infection: f64,
    pub r_detection: f64,
    pub r_death: f64,
    /// Per-group death rate overrides.
    pub r_death_group: BTreeMap<String, f64>,
    /// r^U_g(t), r^H_g(t), r^Q_g(t) keyed `[group, t]`.
    pub r_undetected: Tensor,
    pub r_hospital: Tensor,
    pub r_quarantine: Tensor,
    /// `[region, group, compartment]` with compartments S, Sbar, E, I, U, H, Q, D.
    pub initial: Tensor,
    /// `[region, compartment]` with compartments S, E, I, M of the vaccinated class.
    pub initial_vaccinated: Tensor,
    /// Concave herd-immunity breakpoints `(f, Herd(f))`.
    pub herd: Option<Vec<(f64, f64)>>,
    pub deaths_weight: f64,
    pub infections_weight: f64,
    /// Vaccine doses available per period for the embedding.
    pub supply: Option<Vec<f64>>,
}

impl EpiParams {
    pub fn death_rate(&self, group: &str) -> f64 {
        self.r_death_group.get(group).copied().unwrap_or(self.r_death)
    }

    pub fn gamma_at(&self, t: usize) -> f64 {
        self.gamma.get(t - 1).copied().unwrap_or(0.0)
    }

    fn rate(tab: &Tensor, g: &str, t: usize) -> f64 {
        tab.get(&[g, &t.to_string()]).unwrap_or(0.0)
    }

    pub fn r_u(&self, g: &str, t: usize) -> f64 {
        Self::rate(&self.r_undetected, g, t)
    }

    pub fn r_h(&self, g: &str, t: usize) -> f64 {
        Self::rate(&self.r_hospital, g, t)
    }

    pub fn r_q(&self, g: &str, t: usize) -> f64 {
        Self::rate(&self.r_quarantine, g, t)
    }
}

pub const GROUP_COMPARTMENTS: &[&str] = &["S", "Sbar", "E", "I", "U", "H", "Q", "D"];
pub const VACCINATED_COMPARTMENTS: &[&str] = &["S", "E", "I", "M"];

/// Immutable description of a supply network.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub time: TimeGrid,
    pub vaccines: Vec<VaccineType>,
    pub manufacturers: Vec<String>,
    pub dcs: Vec<DistributionCenter>,
    pub vcs: Vec<String>,
    pub sites: Vec<String>,
    /// Regions; id `"0"` is the routing depot when present.
    pub regions: Vec<String>,
    /// Groups in priority order (first is highest).
    pub groups: Vec<String>,
    pub vehicles: Vec<String>,
    pub outreach: Vec<String>,
    /// Catalog keyed `section.name`.
    pub params: BTreeMap<String, Param>,
    pub scenarios: Vec<Scenario>,
    pub epi: Option<EpiParams>,
    pub ambiguity: Option<AmbiguitySpec>,
}

pub const DEPOT: &str = "0";

impl Instance {
    /// Empty instance with a horizon and no sets; useful for building
    /// instances in code.
    pub fn empty(horizon: usize) -> Self {
        Instance {
            time: TimeGrid {
                horizon,
                period_unit: "period".into(),
            },
            vaccines: vec![],
            manufacturers: vec![],
            dcs: vec![],
            vcs: vec![],
            sites: vec![],
            regions: vec![],
            groups: vec![],
            vehicles: vec![],
            outreach: vec![],
            params: BTreeMap::new(),
            scenarios: vec![],
            epi: None,
            ambiguity: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        io::load(path.as_ref())
    }

    pub fn from_json_str(text: &str) -> Result<Self, DataError> {
        io::from_str(text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        io::to_value(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        io::save(self, path.as_ref())
    }

    pub fn horizon(&self) -> usize {
        self.time.horizon
    }

    pub fn periods(&self) -> std::ops::RangeInclusive<usize> {
        self.time.periods()
    }

    pub fn vaccine(&self, id: &str) -> Option<&VaccineType> {
        self.vaccines.iter().find(|v| v.id == id)
    }

    pub fn vaccine_ids(&self) -> Vec<&str> {
        self.vaccines.iter().map(|v| v.id.as_str()).collect()
    }

    pub fn dc_ids(&self) -> Vec<&str> {
        self.dcs.iter().map(|d| d.id.as_str()).collect()
    }

    /// Regions other than the depot.
    pub fn customer_regions(&self) -> Vec<&str> {
        self.regions.iter().map(String::as_str).filter(|r| *r != DEPOT).collect()
    }

    pub fn has_depot(&self) -> bool {
        self.regions.iter().any(|r| r == DEPOT)
    }

    /// Whether manufacturer `i` may supply vaccine `p` (𝒫_i).
    pub fn produces(&self, i: &str, p: &str) -> bool {
        match self.vaccine(p).and_then(|v| v.manufacturers.as_ref()) {
            Some(list) => list.iter().any(|m| m == i),
            None => true,
        }
    }

    /// Whether DC `j` may serve VC `k` (𝒱_j).
    pub fn serves(&self, j: &str, k: &str) -> bool {
        match self.dcs.iter().find(|d| d.id == j).and_then(|d| d.serves.as_ref()) {
            Some(list) => list.iter().any(|v| v == k),
            None => true,
        }
    }

    fn key(section: &str, name: &str) -> String {
        format!("{section}.{name}")
    }

    pub fn param(&self, section: &str, name: &str) -> Option<&Param> {
        self.params.get(&Self::key(section, name))
    }

    pub fn has(&self, section: &str, name: &str) -> bool {
        self.params.contains_key(&Self::key(section, name))
    }

    pub fn set_param(&mut self, section: &str, name: &str, value: Param) {
        self.params.insert(Self::key(section, name), value);
    }

    pub fn tensor(&self, section: &str, name: &str) -> Option<&Tensor> {
        match self.param(section, name) {
            Some(Param::Tensor(t)) => Some(t),
            _ => None,
        }
    }

    pub fn tensor_mut(&mut self, section: &str, name: &str) -> &mut Tensor {
        let key = Self::key(section, name);
        let entry = self.params.entry(key).or_insert_with(|| Param::Tensor(Tensor::default()));
        if !matches!(entry, Param::Tensor(_)) {
            *entry = Param::Tensor(Tensor::default());
        }
        match entry {
            Param::Tensor(t) => t,
            _ => unreachable!(),
        }
    }

    /// Set one tensor entry.
    pub fn put(&mut self, section: &str, name: &str, idx: &[&str], value: f64) {
        self.tensor_mut(section, name).insert(idx.iter().map(|s| s.to_string()).collect(), value);
    }

    pub fn set_scalar(&mut self, section: &str, name: &str, value: f64) {
        self.set_param(section, name, Param::Scalar(value));
    }

    pub fn scalar(&self, section: &str, name: &str) -> Option<f64> {
        match self.param(section, name) {
            Some(Param::Scalar(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn list(&self, section: &str, name: &str) -> Option<&[f64]> {
        match self.param(section, name) {
            Some(Param::List(v)) => Some(v),
            _ => None,
        }
    }

    /// Tensor entry or scalar value; `None` when absent.
    pub fn value(&self, section: &str, name: &str, idx: &[&str]) -> Option<f64> {
        match self.param(section, name)? {
            Param::Tensor(t) => t.get(idx),
            Param::Scalar(v) => Some(*v),
            Param::List(_) => None,
        }
    }

    /// Entry with its neutral default applied; zero-neutral parameters
    /// read 0 when absent.
    pub fn value_or_zero(&self, section: &str, name: &str, idx: &[&str]) -> f64 {
        self.value(section, name, idx).unwrap_or(0.0)
    }

    /// Capacity entry, [`Cap::Unbounded`] when absent and the parameter's
    /// neutral value is unbounded.
    pub fn cap(&self, section: &str, name: &str, idx: &[&str]) -> Cap {
        match self.value(section, name, idx) {
            Some(v) => Cap::Finite(v),
            None => match schema::spec(section, name).map(|s| s.neutral) {
                Some(Neutral::Unbounded) => Cap::Unbounded,
                _ => Cap::Finite(0.0),
            },
        }
    }

    /// Demand `d_{kpt}`.
    pub fn demand_kpt(&self, k: &str, p: &str, t: usize) -> f64 {
        self.value_or_zero("demand", "kpt", &[k, p, &t.to_string()])
    }

    /// Demand `d_{gkpt}`.
    pub fn demand_gkpt(&self, g: &str, k: &str, p: &str, t: usize) -> f64 {
        self.value_or_zero("demand", "gkpt", &[g, k, p, &t.to_string()])
    }

    /// `logistics.distance` between two nodes, read in either direction.
    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        self.value("logistics", "distance", &[a, b]).or_else(|| self.value("logistics", "distance", &[b, a]))
    }

    pub fn lead_time(&self) -> usize {
        self.scalar("logistics", "lead_time").unwrap_or(0.0).round() as usize
    }

    /// Instance with one scenario's overrides applied and no scenario set.
    pub fn for_scenario(&self, sc: &Scenario) -> Instance {
        let mut out = self.clone();
        out.scenarios.clear();
        for (key, ov) in &sc.overrides {
            match (out.params.get_mut(key), ov) {
                (Some(Param::Tensor(base)), Param::Tensor(t)) => {
                    for (idx, v) in t.iter() {
                        base.insert(idx.clone(), *v);
                    }
                }
                _ => {
                    out.params.insert(key.clone(), ov.clone());
                }
            }
        }
        out
    }
}
