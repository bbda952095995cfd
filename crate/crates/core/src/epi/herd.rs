//! Herd-immunity allocation across regions with a concave piecewise-linear
//! protection curve.

use super::*;
use crate::ix;
use crate::model::{tag, Domain, LinExpr, Model, ObjSense, Sense};
use crate::solve::solve;

/// Concave nondecreasing piecewise-linear map from vaccinated fraction to
/// additionally protected fraction, given by breakpoints from `f = 0` to
/// `f = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HerdFunction {
    points: Vec<(f64, f64)>,
}

impl HerdFunction {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, EpiError> {
        if points.len() < 2 {
            return Err(EpiError::Invalid("herd function needs at least two breakpoints".into()));
        }
        if points.iter().any(|(f, h)| !f.is_finite() || !h.is_finite()) {
            return Err(EpiError::Invalid("herd breakpoints must be finite".into()));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(EpiError::Invalid("herd breakpoints must start at f = 0 and end at f = 1".into()));
        }
        let mut prev_slope = f64::INFINITY;
        for w in points.windows(2) {
            let (f0, h0) = w[0];
            let (f1, h1) = w[1];
            if f1 <= f0 {
                return Err(EpiError::Invalid(format!("herd breakpoints must increase in f ({f0} then {f1})")));
            }
            let slope = (h1 - h0) / (f1 - f0);
            if slope < -1e-12 {
                return Err(EpiError::Invalid(format!("herd function decreases on [{f0}, {f1}]")));
            }
            if slope > prev_slope + 1e-9 {
                return Err(EpiError::NotConcave(format!("slope rises to {slope} at f = {f0}")));
            }
            prev_slope = slope;
        }
        Ok(HerdFunction { points })
    }

    /// The zero function.
    pub fn zero() -> Self {
        HerdFunction {
            points: vec![(0.0, 0.0), (1.0, 0.0)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Linear interpolation, clamped to `[0, 1]`.
    pub fn eval(&self, f: f64) -> f64 {
        let f = f.clamp(0.0, 1.0);
        for w in self.points.windows(2) {
            let (f0, h0) = w[0];
            let (f1, h1) = w[1];
            if f <= f1 {
                return h0 + (h1 - h0) * (f - f0) / (f1 - f0);
            }
        }
        self.points[self.points.len() - 1].1
    }

    /// `(slope, intercept)` per segment; the function is their lower envelope.
    fn segments(&self) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .map(|w| {
                let a = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                (a, w[0].1 - a * w[0].0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerdRegion {
    pub id: String,
    /// Susceptible people `S_r`.
    pub susceptible: f64,
    /// Population `P̂_r`.
    pub population: f64,
}

impl HerdRegion {
    /// Customer regions with `S_r = Σ_g S` from the initial state and `P̂_r`
    /// from `demand.population_region`, falling back to the initial
    /// population.
    pub fn from_instance(inst: &Instance) -> Result<Vec<HerdRegion>, EpiError> {
        let p = inst.epi.as_ref().ok_or(EpiError::NoParams)?;
        let x0 = initial_state(inst, p)?;
        let (regions, _) = epi_sets(inst);
        Ok(regions
            .into_iter()
            .zip(&x0.regions)
            .map(|(id, rs)| {
                let population = inst
                    .value("demand", "population_region", &[&id])
                    .unwrap_or_else(|| rs.population());
                HerdRegion {
                    susceptible: rs.groups.iter().map(|c| c[S]).sum(),
                    population,
                    id,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerdAllocation {
    /// Vaccinated fraction `f_r` per region id.
    pub fractions: BTreeMap<String, f64>,
    /// `Σ P̂ f + Σ P̂ Herd(f)`.
    pub objective: f64,
    /// `Σ P̂ f`.
    pub vaccinated: f64,
}

/// Maximize directly and herd-protected people under the dose budget
/// `availability`. The hypograph of `Herd` is cut by one constraint per
/// segment, which is exact for a concave function under maximization.
pub fn herd_immunity_allocate(
    herd: &HerdFunction,
    availability: f64,
    regions: &[HerdRegion],
) -> Result<HerdAllocation, EpiError> {
    if !(availability >= 0.0) {
        return Err(EpiError::Invalid(format!("availability must be nonnegative, got {availability}")));
    }
    for r in regions {
        if !(r.population > 0.0) || !(r.susceptible >= 0.0) || r.susceptible > r.population * (1.0 + 1e-12) {
            return Err(EpiError::Invalid(format!(
                "region {}: need 0 ≤ S ≤ P̂ and P̂ > 0, got S = {}, P̂ = {}",
                r.id, r.susceptible, r.population
            )));
        }
    }
    let mut m = Model::new();
    let segs = herd.segments();
    let build = |m: &mut Model| -> Result<Vec<_>, crate::model::ModelError> {
        let mut fs = vec![];
        let mut budget = LinExpr::new();
        let mut obj = LinExpr::new();
        for r in regions {
            let cap = (r.susceptible / r.population).min(1.0);
            let f = m.add_var("f", ix![&r.id], Domain::Continuous, 0.0, cap)?;
            let h = m.add_var("herd", ix![&r.id], Domain::Continuous, f64::NEG_INFINITY, f64::INFINITY)?;
            for (k, &(a, b)) in segs.iter().enumerate() {
                let e = LinExpr::term(h, 1.0) - LinExpr::term(f, a);
                m.add_constraint(e, Sense::Le, b, tag("epi.herd", "segment", &[("r", &r.id), ("k", &k)]))?;
            }
            budget.add_term(f, r.population);
            obj.add_term(f, r.population);
            obj.add_term(h, r.population);
            fs.push(f);
        }
        m.add_constraint(budget, Sense::Le, availability, tag("epi.herd", "availability", &[]))?;
        m.set_objective("herd", ObjSense::Maximize, obj);
        Ok(fs)
    };
    let fs = build(&mut m).map_err(|e| EpiError::Build(e.into()))?;
    let sol = solve(&m)?;
    if !sol.is_optimal() {
        return Err(EpiError::Status(sol.status));
    }
    let mut fractions = BTreeMap::new();
    let mut vaccinated = 0.0;
    let mut objective = 0.0;
    for (r, &f) in regions.iter().zip(&fs) {
        let x = sol.value(f).max(0.0);
        vaccinated += r.population * x;
        objective += r.population * (x + herd.eval(x));
        fractions.insert(r.id.clone(), x);
    }
    Ok(HerdAllocation {
        fractions,
        objective,
        vaccinated,
    })
}
