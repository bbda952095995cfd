//! Compartmental epidemic dynamics with a vaccinated class, their
//! discretized embedding into a vaccination-planning LP, and herd-immunity
//! allocation.
//!
//! Group compartments per region follow [`GROUP_COMPARTMENTS`]
//! (`S, Sbar, E, I, U, H, Q, D`); the vaccinated class per region follows
//! [`VACCINATED_COMPARTMENTS`] (`S', E', I', M`).

mod embed;
mod herd;
mod sim;

pub use embed::{build_epi_embedding, EmbeddingOptions, EmbeddingResult};
pub use herd::{herd_immunity_allocate, HerdAllocation, HerdFunction, HerdRegion};
pub use sim::{conservation_defect, simulate_delphi_v, SimOptions};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::data::{EpiParams, Instance, GROUP_COMPARTMENTS, VACCINATED_COMPARTMENTS};
use crate::model::{lp::fmt_num, BuildError};
use crate::solve::{SolveError, Status};

pub const S: usize = 0;
pub const SBAR: usize = 1;
pub const E: usize = 2;
pub const I: usize = 3;
pub const U: usize = 4;
pub const H: usize = 5;
pub const Q: usize = 6;
pub const D: usize = 7;

pub const VS: usize = 0;
pub const VE: usize = 1;
pub const VI: usize = 2;
pub const VM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpiError {
    #[error("instance has no epi block")]
    NoParams,
    #[error("response table γ has {len} entries for a horizon of {horizon}")]
    GammaTooShort { len: usize, horizon: usize },
    #[error("time step must be positive and finite, got {0}")]
    Step(f64),
    #[error("initial compartment {0} is negative")]
    NegativeInitial(String),
    #[error("herd function is not concave: {0}")]
    NotConcave(String),
    #[error("{0}")]
    Invalid(String),
    #[error("embedding LP ended with status {0}")]
    Status(Status),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Vaccination rates `V_{rgt}` per period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VaccinationPlan {
    pub rates: BTreeMap<(String, String, usize), f64>,
}

impl VaccinationPlan {
    pub fn get(&self, r: &str, g: &str, t: usize) -> f64 {
        self.rates.get(&(r.to_string(), g.to_string(), t)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, r: &str, g: &str, t: usize, v: f64) {
        if v == 0.0 {
            self.rates.remove(&(r.to_string(), g.to_string(), t));
        } else {
            self.rates.insert((r.to_string(), g.to_string(), t), v);
        }
    }

    pub fn total(&self) -> f64 {
        self.rates.values().sum()
    }

    /// `Σ |a − b|` over the union of entries.
    pub fn l1_distance(&self, other: &VaccinationPlan) -> f64 {
        let mut d = 0.0;
        for (k, v) in &self.rates {
            d += (v - other.rates.get(k).copied().unwrap_or(0.0)).abs();
        }
        for (k, v) in &other.rates {
            if !self.rates.contains_key(k) {
                d += v.abs();
            }
        }
        d
    }

    /// CSV with header `region,group,period,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,group,period,value\n");
        for ((r, g, t), v) in &self.rates {
            let _ = writeln!(s, "{r},{g},{t},{}", fmt_num(*v));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, EpiError> {
        let mut plan = VaccinationPlan::default();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "region,group,period,value" => {}
            other => {
                return Err(EpiError::Invalid(format!(
                    "plan header must be region,group,period,value, got {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || EpiError::Invalid(format!("plan line {}: {line}", n + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            let t: usize = f[2].parse().map_err(|_| bad())?;
            let v: f64 = f[3].parse().map_err(|_| bad())?;
            if t == 0 || !(v >= 0.0) {
                return Err(bad());
            }
            plan.set(f[0], f[1], t, v);
        }
        Ok(plan)
    }
}

/// Compartments of one region at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionState {
    /// One row per group, ordered as [`GROUP_COMPARTMENTS`].
    pub groups: Vec<[f64; 8]>,
    /// Ordered as [`VACCINATED_COMPARTMENTS`].
    pub vaccinated: [f64; 4],
}

impl RegionState {
    /// `S+S'+E+E'+I+I'+U+H+Q+D+M` (eligibility `Sbar` is bookkeeping, not a
    /// population compartment).
    pub fn population(&self) -> f64 {
        let g: f64 = self
            .groups
            .iter()
            .map(|c| c[S] + c[E] + c[I] + c[U] + c[H] + c[Q] + c[D])
            .sum();
        g + self.vaccinated.iter().sum::<f64>()
    }

    pub fn infected(&self) -> f64 {
        self.groups.iter().map(|c| c[I]).sum::<f64>() + self.vaccinated[VI]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiState {
    pub regions: Vec<RegionState>,
}

/// Snapshots at period boundaries `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub regions: Vec<String>,
    pub groups: Vec<String>,
    pub states: Vec<EpiState>,
    pub plan: VaccinationPlan,
    /// Total mass added back by clipping negative compartments.
    pub clipped: f64,
    /// Integration step actually used.
    pub dt: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn value(&self, t: usize, r: usize, g: usize, c: usize) -> f64 {
        self.states[t].regions[r].groups[g][c]
    }

    /// Cumulative deaths at the end of the horizon.
    pub fn deaths(&self) -> f64 {
        self.states
            .last()
            .map(|s| s.regions.iter().flat_map(|r| r.groups.iter()).map(|c| c[D]).sum())
            .unwrap_or(0.0)
    }

    /// Infected person-periods `Σ_{t=1..T} (Σ_g I + I')`.
    pub fn infection_load(&self) -> f64 {
        self.states[1..].iter().flat_map(|s| s.regions.iter()).map(RegionState::infected).sum()
    }

    /// `w_D·deaths + w_I·infection load`.
    pub fn objective(&self, p: &EpiParams) -> f64 {
        p.deaths_weight * self.deaths() + p.infections_weight * self.infection_load()
    }

    /// CSV with header `region,group,period,compartment,value`. Vaccinated
    /// class rows have an empty group and primed names; `V` rows hold the
    /// plan for periods `1..=T`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,group,period,compartment,value\n");
        for (t, st) in self.states.iter().enumerate() {
            for (ri, r) in self.regions.iter().enumerate() {
                let rs = &st.regions[ri];
                for (gi, g) in self.groups.iter().enumerate() {
                    for (ci, c) in GROUP_COMPARTMENTS.iter().enumerate() {
                        let _ = writeln!(s, "{r},{g},{t},{c},{}", fmt_num(rs.groups[gi][ci]));
                    }
                    if t >= 1 {
                        let _ = writeln!(s, "{r},{g},{t},V,{}", fmt_num(self.plan.get(r, g, t)));
                    }
                }
                for (ci, c) in VACCINATED_COMPARTMENTS.iter().enumerate() {
                    let name = if *c == "M" { "M".to_string() } else { format!("{c}'") };
                    let _ = writeln!(s, "{r},,{t},{name},{}", fmt_num(rs.vaccinated[ci]));
                }
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Vaccine coverage coefficient `(1/β)·(1 − 1/α)`.
pub fn coverage_coefficient(beta: f64, alpha: f64) -> Result<f64, EpiError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(EpiError::Invalid(format!("vaccine effectiveness must be positive, got {beta}")));
    }
    if !(alpha > 0.0) {
        return Err(EpiError::Invalid(format!("infection rate must be positive, got {alpha}")));
    }
    Ok((1.0 - 1.0 / alpha) / beta)
}

/// Regions and groups the epidemic model runs over.
pub fn epi_sets(inst: &Instance) -> (Vec<String>, Vec<String>) {
    let regions = inst.customer_regions().into_iter().map(String::from).collect();
    (regions, crate::scm::groups(inst))
}

/// Initial state from `epi.initial` and `epi.initial_vaccinated`; a missing
/// `Sbar` defaults to `S`.
pub fn initial_state(inst: &Instance, p: &EpiParams) -> Result<EpiState, EpiError> {
    let (regions, groups) = epi_sets(inst);
    let mut out = vec![];
    for r in &regions {
        let mut gs = vec![];
        for g in &groups {
            let mut row = [0.0; 8];
            for (ci, c) in GROUP_COMPARTMENTS.iter().enumerate() {
                row[ci] = p.initial.get(&[r, g, c]).unwrap_or(0.0);
                if row[ci] < 0.0 {
                    return Err(EpiError::NegativeInitial(format!("{r}/{g}/{c}")));
                }
            }
            if p.initial.get(&[r, g, "Sbar"]).is_none() {
                row[SBAR] = row[S];
            }
            gs.push(row);
        }
        let mut vac = [0.0; 4];
        for (ci, c) in VACCINATED_COMPARTMENTS.iter().enumerate() {
            vac[ci] = p.initial_vaccinated.get(&[r, c]).unwrap_or(0.0);
            if vac[ci] < 0.0 {
                return Err(EpiError::NegativeInitial(format!("{r}/vaccinated/{c}")));
            }
        }
        out.push(RegionState {
            groups: gs,
            vaccinated: vac,
        });
    }
    Ok(EpiState { regions: out })
}
