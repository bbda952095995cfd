//! Optimization under uncertainty: closed-form inventory policies, the
//! two-stage extensive form, mean-deviation robustification, moment-based
//! distributionally robust evaluation, and normal chance constraints.

mod dro;
mod tssp;

pub use dro::{dro_worst_case, worst_case_distribution, AmbiguitySet, DroError, DroMode, DroOptions, DroResult};
pub use tssp::{
    build_robust_mean_deviation, build_tssp_extensive, first_stage_vars, fix_first_stage, mean_deviation,
    scenario_probabilities, StageBuilder,
};

use thiserror::Error;

use crate::data::Instance;
use crate::ix;
use crate::model::{tag, BuildError, BuildResult, LinExpr, Model, Sense};
use crate::scm::{self, ScmConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("order quantity must be positive, got {0}")]
    OrderQuantity(f64),
    #[error("service level α must lie in (0,1), got {0}")]
    Alpha(f64),
    #[error("standard deviation must be nonnegative, got {0}")]
    Sigma(f64),
    #[error("invalid costs: {0}")]
    Costs(String),
    #[error("{0}")]
    Input(String),
}

/// Inverse of the standard normal CDF (Wichura's AS241, double precision).
/// Returns ±∞ at 0 and 1 and NaN outside [0,1].
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r + 6.726_577_092_700_87e4) * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r + 3.930_789_580_009_271e4) * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 2.417_807_251_774_506e-1) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_879e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// `Z_{1−α}`.
pub fn z_upper(alpha: f64) -> Result<f64, UncertaintyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(UncertaintyError::Alpha(alpha));
    }
    Ok(inverse_normal_cdf(1.0 - alpha))
}

/// Continuous-review inputs for one distribution center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InventoryParams {
    /// Mean demand rate `d`.
    pub demand: f64,
    pub sd_demand: f64,
    /// Lead time `l`.
    pub lead: f64,
    pub sd_lead: f64,
    /// Stockout probability; service level is `1 − α`.
    pub alpha: f64,
    /// Ordering cost per order, summed over suppliers.
    pub order_cost: f64,
    /// Holding cost per unit.
    pub hold_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReorderPolicy {
    pub z: f64,
    pub total_cost: f64,
    pub reorder_point: f64,
}

/// Total cost `c_o·d/Q + h·(Q/2 + Z·√(l·σ_d²))` and reorder point
/// `d·l + Z·√(d²σ_l² + l²σ_d²)` for order quantity `q`.
///
/// ```
/// use vaxopt::uncertainty::{reorder_policy, InventoryParams};
/// let p = InventoryParams { demand: 100.0, sd_demand: 10.0, lead: 4.0, sd_lead: 0.0,
///     alpha: 0.05, order_cost: 0.0, hold_cost: 0.0 };
/// let r = reorder_policy(&p, 50.0).unwrap();
/// assert!((r.reorder_point - 465.794).abs() < 1e-3);
/// ```
pub fn reorder_policy(p: &InventoryParams, q: f64) -> Result<ReorderPolicy, UncertaintyError> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(UncertaintyError::OrderQuantity(q));
    }
    for s in [p.sd_demand, p.sd_lead] {
        if !(s >= 0.0) {
            return Err(UncertaintyError::Sigma(s));
        }
    }
    if !(p.demand >= 0.0 && p.lead >= 0.0) {
        return Err(UncertaintyError::Input(format!(
            "demand rate and lead time must be nonnegative (d={}, l={})",
            p.demand, p.lead
        )));
    }
    let z = z_upper(p.alpha)?;
    let var_d = p.sd_demand * p.sd_demand;
    let var_l = p.sd_lead * p.sd_lead;
    let total_cost = p.order_cost * p.demand / q + p.hold_cost * (q / 2.0 + z * (p.lead * var_d).sqrt());
    let reorder_point = p.demand * p.lead + z * (p.demand * p.demand * var_l + p.lead * p.lead * var_d).sqrt();
    Ok(ReorderPolicy {
        z,
        total_cost,
        reorder_point,
    })
}

/// Inventory inputs of DC `j` read from the instance: `demand.dc_rate`,
/// `demand.dc_rate_sd`, `logistics.lead_time(_sd)`, `costs.ordering` summed
/// over manufacturers and `costs.holding`.
pub fn dc_inventory_params(inst: &Instance, j: &str, alpha: f64) -> Result<InventoryParams, BuildError> {
    let demand = inst
        .value("demand", "dc_rate", &[j])
        .ok_or_else(|| BuildError::Missing(format!("demand.dc_rate[{j}]")))?;
    Ok(InventoryParams {
        demand,
        sd_demand: inst.value_or_zero("demand", "dc_rate_sd", &[j]),
        lead: inst.scalar("logistics", "lead_time").unwrap_or(0.0),
        sd_lead: inst.scalar("logistics", "lead_time_sd").unwrap_or(0.0),
        alpha,
        order_cost: inst
            .manufacturers
            .iter()
            .map(|i| inst.value_or_zero("costs", "ordering", &[i, j]))
            .sum(),
        hold_cost: inst.value_or_zero("costs", "holding", &[j]),
    })
}

/// Critical-ratio quantity `F⁻¹(c_u/(c_u+c_o))`.
///
/// An infinite overage cost gives ratio 0, so `inv_cdf` is evaluated at 0.
pub fn newsvendor_allocation(c_under: f64, c_over: f64, inv_cdf: impl Fn(f64) -> f64) -> Result<f64, UncertaintyError> {
    if c_under.is_nan() || c_over.is_nan() || c_under < 0.0 || c_over < 0.0 {
        return Err(UncertaintyError::Costs(format!("c_u={c_under}, c_o={c_over}")));
    }
    if c_under == 0.0 && c_over == 0.0 {
        return Err(UncertaintyError::Costs("both underage and overage costs are zero".into()));
    }
    if c_under.is_infinite() && c_over.is_infinite() {
        return Err(UncertaintyError::Costs("both costs are infinite".into()));
    }
    let ratio = if c_over.is_infinite() {
        0.0
    } else if c_under.is_infinite() {
        1.0
    } else {
        c_under / (c_under + c_over)
    };
    Ok(inv_cdf(ratio))
}

/// Deterministic right-hand side `μ + Z_{1−α}·σ` of a normal chance
/// constraint with the random term on the right.
pub fn cc_normal_rhs(mu: f64, sigma: f64, alpha: f64) -> Result<f64, UncertaintyError> {
    if !(sigma >= 0.0) {
        return Err(UncertaintyError::Sigma(sigma));
    }
    let z = z_upper(alpha)?;
    if sigma == 0.0 {
        return Ok(mu);
    }
    Ok(mu + z * sigma)
}

/// Where the chance constraints apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcTarget {
    /// `Σ_j x_dv[j,k,p,t] ≥ μ_kpt + Z·σ_kpt` from `demand.mean_kpt` and `demand.sd_kpt`.
    Supply,
    /// `Σ_{j,k,p} x_dvh[j,k,p,t,h] ≥ μ_th + Z·σ_th` from `demand.mean_th` and
    /// `demand.sd_th`, with the vehicle split linked to `x_dv`.
    Vehicle,
}

impl std::str::FromStr for CcTarget {
    type Err = BuildError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supply" => Ok(CcTarget::Supply),
            "vehicle" => Ok(CcTarget::Vehicle),
            _ => Err(BuildError::Invalid(format!("unknown chance-constraint target \"{s}\" (supply, vehicle)"))),
        }
    }
}

fn cc_err(e: UncertaintyError) -> BuildError {
    BuildError::Invalid(e.to_string())
}

/// Linear deterministic equivalents of normal chance constraints.
pub fn build_cc_constraints(m: &mut Model, inst: &Instance, cfg: &ScmConfig, target: CcTarget, alpha: f64) -> BuildResult {
    let mut tags = vec![];
    let mut rows = 0usize;
    match target {
        CcTarget::Supply => {
            let mean = inst.tensor("demand", "mean_kpt").ok_or_else(|| BuildError::Missing("demand.mean_kpt".into()))?;
            let entries: Vec<(Vec<String>, f64)> = mean.iter().map(|(k, v)| (k.clone(), *v)).collect();
            for (idx, mu) in entries {
                let (k, p, t) = (&idx[0], &idx[1], &idx[2]);
                let sd = inst.value_or_zero("demand", "sd_kpt", &[k, p, t]);
                let rhs = cc_normal_rhs(mu, sd, alpha).map_err(cc_err)?;
                let t_num: usize = t
                    .parse()
                    .map_err(|_| BuildError::Invalid(format!("demand.mean_kpt period \"{t}\" is not a number")))?;
                let mut e = LinExpr::new();
                for j in inst.dc_ids() {
                    if inst.serves(j, k) {
                        e.add_term(scm::x_dv(m, inst, cfg, j, k, p, t_num)?, 1.0);
                    }
                }
                if e.is_empty() && rhs > 0.0 {
                    return Err(BuildError::Invalid(format!("VC {k} has no serving DC for its chance constraint")));
                }
                let key: [(&str, &dyn std::fmt::Display); 3] = [("k", k), ("p", p), ("t", t)];
                tags.push(m.add_constraint(e, Sense::Ge, rhs, tag("uncertainty.cc", "supply", &key))?);
                rows += 1;
            }
        }
        CcTarget::Vehicle => {
            if inst.vehicles.is_empty() {
                return Err(BuildError::Missing("vehicles".into()));
            }
            let mean = inst.tensor("demand", "mean_th").ok_or_else(|| BuildError::Missing("demand.mean_th".into()))?;
            let entries: Vec<(Vec<String>, f64)> = mean.iter().map(|(k, v)| (k.clone(), *v)).collect();
            for t in inst.periods() {
                for j in inst.dc_ids() {
                    for k in &inst.vcs {
                        if !inst.serves(j, k) {
                            continue;
                        }
                        for p in &inst.vaccines {
                            let p = p.id.as_str();
                            let total = scm::x_dv(m, inst, cfg, j, k, p, t)?;
                            let mut e = LinExpr::term(total, -1.0);
                            for h in &inst.vehicles {
                                e.add_term(m.var_or_add("x_dvh", ix![j, k, p, t, h], cfg.flow_domain(), 0.0, cfg.flow_ub)?, 1.0);
                            }
                            let key: [(&str, &dyn std::fmt::Display); 4] = [("j", &j), ("k", k), ("p", &p), ("t", &t)];
                            tags.push(m.add_constraint(e, Sense::Eq, 0.0, tag("uncertainty.cc", "vehicle_split", &key))?);
                        }
                    }
                }
            }
            for (idx, mu) in entries {
                let (t, h) = (&idx[0], &idx[1]);
                let sd = inst.value_or_zero("demand", "sd_th", &[t, h]);
                let rhs = cc_normal_rhs(mu, sd, alpha).map_err(cc_err)?;
                let t_num: usize = t
                    .parse()
                    .map_err(|_| BuildError::Invalid(format!("demand.mean_th period \"{t}\" is not a number")))?;
                let mut e = LinExpr::new();
                for j in inst.dc_ids() {
                    for k in &inst.vcs {
                        if !inst.serves(j, k) {
                            continue;
                        }
                        for p in &inst.vaccines {
                            if let Some(v) = m.var("x_dvh", &ix![j, k, p.id, t_num, h]) {
                                e.add_term(v, 1.0);
                            }
                        }
                    }
                }
                let key: [(&str, &dyn std::fmt::Display); 2] = [("t", t), ("h", h)];
                tags.push(m.add_constraint(e, Sense::Ge, rhs, tag("uncertainty.cc", "vehicle", &key))?);
                rows += 1;
            }
        }
    }
    m.metadata.insert("uncertainty.cc.alpha".into(), alpha.to_string());
    log::debug!("added {rows} chance constraints at α={alpha}");
    Ok(tags)
}
