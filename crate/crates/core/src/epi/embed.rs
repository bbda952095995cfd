//! Vaccination planning with the discretized dynamics embedded, solved by
//! alternating between a trajectory-frozen LP and re-simulation.

use super::*;
use crate::ix;
use crate::model::{tag, BuildResult, Domain, LinExpr, Model, ModelError, ObjSense, Sense, VarId};
use crate::solve::{solve, Solution};

/// Name of the embedding objective.
pub const EPI: &str = "epi";

#[derive(Debug, Clone)]
pub struct EmbeddingOptions {
    pub max_iterations: usize,
    /// Stop when the plan's L1 change is at most this.
    pub tol: f64,
    /// Doses per period; defaults to `epi.supply`, unlimited when absent.
    pub supply: Option<Vec<f64>>,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            max_iterations: 50,
            tol: 1e-6,
            supply: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    pub plan: VaccinationPlan,
    /// Re-simulated trajectory under `plan`.
    pub trajectory: Trajectory,
    /// Deaths and infections term as predicted by the last LP.
    pub optimizer_objective: f64,
    /// Same term from the re-simulation.
    pub simulated_objective: f64,
    pub predicted_deaths: f64,
    pub simulated_deaths: f64,
    /// Full LP objective, including any cost terms of the extra builders.
    pub total_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Plan L1 change per iteration.
    pub changes: Vec<f64>,
}

struct Vars {
    /// `[r][g][t]` for t = 0..=T, compartments as in [`GROUP_COMPARTMENTS`].
    group: Vec<Vec<Vec<[VarId; 8]>>>,
    /// `[r][t]`: S', E', I', M.
    vacc: Vec<Vec<[VarId; 4]>>,
    /// `[r][g][t]` for t = 1..=T (index t−1).
    v: Vec<Vec<Vec<VarId>>>,
}

const VACC_FAMILIES: [&str; 4] = ["Sv", "Ev", "Iv", "M"];

/// Build the LP for a frozen infection pressure `force[r][t]`
/// (`α·γ(t)·(Σ_g I + I')` at the start of period t, index t−1).
fn build_lp(
    m: &mut Model,
    inst: &Instance,
    p: &EpiParams,
    x0: &EpiState,
    force: &[Vec<f64>],
    supply: Option<&[f64]>,
) -> Result<Vars, ModelError> {
    let (regions, groups) = epi_sets(inst);
    let horizon = inst.horizon();
    let b = p.beta;
    let mut vars = Vars {
        group: vec![],
        vacc: vec![],
        v: vec![],
    };
    for (ri, r) in regions.iter().enumerate() {
        let mut gv = vec![];
        let mut vv = vec![];
        for (gi, g) in groups.iter().enumerate() {
            let mut per_t = vec![];
            for t in 0..=horizon {
                let mut row = [VarId(0); 8];
                for (ci, c) in GROUP_COMPARTMENTS.iter().enumerate() {
                    let (lo, hi) = if t == 0 {
                        (x0.regions[ri].groups[gi][ci], x0.regions[ri].groups[gi][ci])
                    } else {
                        (0.0, f64::INFINITY)
                    };
                    row[ci] = m.add_var(c, ix![r, g, t], Domain::Continuous, lo, hi)?;
                }
                per_t.push(row);
            }
            gv.push(per_t);
            let mut vs = vec![];
            for t in 1..=horizon {
                vs.push(m.add_var("V", ix![r, g, t], Domain::Continuous, 0.0, f64::INFINITY)?);
            }
            vv.push(vs);
        }
        let mut per_t = vec![];
        for t in 0..=horizon {
            let mut row = [VarId(0); 4];
            for (ci, c) in VACC_FAMILIES.iter().enumerate() {
                let x = x0.regions[ri].vaccinated[ci];
                let (lo, hi) = if t == 0 { (x, x) } else { (0.0, f64::INFINITY) };
                row[ci] = m.add_var(c, ix![r, t], Domain::Continuous, lo, hi)?;
            }
            per_t.push(row);
        }
        vars.group.push(gv);
        vars.vacc.push(per_t);
        vars.v.push(vv);
    }

    for (ri, r) in regions.iter().enumerate() {
        for t in 1..=horizon {
            let phi = force[ri][t - 1];
            let mut v_sum = LinExpr::new();
            for (gi, g) in groups.iter().enumerate() {
                let now = vars.group[ri][gi][t];
                let prev = vars.group[ri][gi][t - 1];
                let v = vars.v[ri][gi][t - 1];
                v_sum.add_term(v, 1.0);
                let rd = p.death_rate(g);
                let key: [(&str, &dyn std::fmt::Display); 3] = [("r", r), ("g", g), ("t", &t)];
                let mut row = |anchor: &str, terms: &[(VarId, f64)]| -> Result<(), ModelError> {
                    let mut e = LinExpr::new();
                    for &(x, c) in terms {
                        e.add_term(x, c);
                    }
                    m.add_constraint(e, Sense::Eq, 0.0, tag("epi.dynamics", anchor, &key))?;
                    Ok(())
                };
                row("S", &[(now[S], 1.0), (prev[S], -(1.0 - phi)), (v, b * (1.0 - phi))])?;
                row(
                    "E",
                    &[(now[E], 1.0), (prev[E], -(1.0 - p.r_infection)), (prev[S], -phi), (v, phi * b)],
                )?;
                row(
                    "I",
                    &[(now[I], 1.0), (prev[I], -(1.0 - p.r_detection)), (prev[E], -p.r_infection)],
                )?;
                row("U", &[(now[U], 1.0), (prev[U], -(1.0 - rd)), (prev[I], -p.r_u(g, t))])?;
                row("H", &[(now[H], 1.0), (prev[H], -(1.0 - rd)), (prev[I], -p.r_h(g, t))])?;
                row("Q", &[(now[Q], 1.0), (prev[Q], -(1.0 - rd)), (prev[I], -p.r_q(g, t))])?;
                row(
                    "D",
                    &[(now[D], 1.0), (prev[D], -1.0), (prev[U], -rd), (prev[H], -rd), (prev[Q], -rd)],
                )?;
                // Sbar_t ≤ Sbar_{t−1} − (S_{t−1} − S_t), the S drop carrying βV_t; V_t ≤ Sbar_{t−1}
                let mut e = LinExpr::term(now[SBAR], 1.0);
                e.add_term(prev[SBAR], -1.0);
                e.add_term(prev[S], 1.0);
                e.add_term(now[S], -1.0);
                m.add_constraint(e, Sense::Le, 0.0, tag("epi.eligibility", "carry", &key))?;
                let e = LinExpr::term(v, 1.0) - LinExpr::from(prev[SBAR]);
                m.add_constraint(e, Sense::Le, 0.0, tag("epi.eligibility", "cap", &key))?;
            }
            let now = vars.vacc[ri][t];
            let prev = vars.vacc[ri][t - 1];
            let key: [(&str, &dyn std::fmt::Display); 2] = [("r", r), ("t", &t)];
            // S'_t = (1−Φ)(S'_{t−1} + βΣV)
            let mut e = LinExpr::term(now[VS], 1.0);
            e.add_term(prev[VS], -(1.0 - phi));
            e.add_scaled(&v_sum, -b * (1.0 - phi));
            m.add_constraint(e, Sense::Eq, 0.0, tag("epi.vaccinated", "S", &key))?;
            let mut e = LinExpr::term(now[VE], 1.0);
            e.add_term(prev[VE], -(1.0 - p.r_infection));
            e.add_term(prev[VS], -phi);
            e.add_scaled(&v_sum, -phi * b);
            m.add_constraint(e, Sense::Eq, 0.0, tag("epi.vaccinated", "E", &key))?;
            let mut e = LinExpr::term(now[VI], 1.0);
            e.add_term(prev[VI], -(1.0 - p.r_detection));
            e.add_term(prev[VE], -p.r_infection);
            m.add_constraint(e, Sense::Eq, 0.0, tag("epi.vaccinated", "I", &key))?;
            let mut e = LinExpr::term(now[VM], 1.0);
            e.add_term(prev[VM], -1.0);
            e.add_term(prev[VI], -p.r_detection);
            m.add_constraint(e, Sense::Eq, 0.0, tag("epi.vaccinated", "M", &key))?;
        }
    }

    if let Some(cap) = supply {
        for t in 1..=horizon {
            let e = LinExpr::sum(vars.v.iter().flat_map(|gs| gs.iter().map(|vs| vs[t - 1])));
            let c = cap.get(t - 1).copied().unwrap_or(0.0);
            m.add_constraint(e, Sense::Le, c, tag("epi", "supply", &[("t", &t)]))?;
        }
    }

    let mut obj = LinExpr::new();
    for ri in 0..regions.len() {
        for gi in 0..groups.len() {
            obj.add_term(vars.group[ri][gi][horizon][D], p.deaths_weight);
            for t in 1..=horizon {
                obj.add_term(vars.group[ri][gi][t][I], p.infections_weight);
            }
        }
        for t in 1..=horizon {
            obj.add_term(vars.vacc[ri][t][VI], p.infections_weight);
        }
    }
    m.set_objective(EPI, ObjSense::Minimize, obj);
    Ok(vars)
}

fn pressure(p: &EpiParams, traj: &Trajectory) -> Vec<Vec<f64>> {
    let horizon = traj.horizon();
    (0..traj.regions.len())
        .map(|ri| {
            (1..=horizon)
                .map(|t| p.alpha * p.gamma_at(t) * traj.states[t - 1].regions[ri].infected())
                .collect()
        })
        .collect()
}

/// Fold every other minimized objective into [`EPI`].
fn merge_objectives(m: &mut Model) -> Result<(), EpiError> {
    let others: Vec<String> = m.objectives().iter().map(|o| o.name.clone()).filter(|n| n != EPI).collect();
    for n in others {
        let o = m.remove_objective(&n).expect("listed objective");
        if o.sense != ObjSense::Minimize {
            return Err(EpiError::Invalid(format!("objective {n} must be minimized to combine with deaths")));
        }
        m.add_objective_terms(EPI, ObjSense::Minimize, o.expr)
            .map_err(|e| EpiError::Build(e.into()))?;
    }
    Ok(())
}

/// Iterative coordinate descent over vaccination plans.
///
/// Each iteration freezes the infection pressure from the latest simulated
/// trajectory, which makes the Euler recursion (Δt = 1) linear in the
/// compartments and `V`, solves the resulting LP together with any `extra`
/// supply-side builders, and re-simulates the new plan. It stops when the
/// plan's L1 change is within `tol` or after `max_iterations`; in the latter
/// case the iterate with the best simulated objective is returned with
/// `converged = false`.
pub fn build_epi_embedding(
    inst: &Instance,
    opts: &EmbeddingOptions,
    extra: &[&dyn Fn(&mut Model, &Instance) -> BuildResult],
) -> Result<EmbeddingResult, EpiError> {
    let p = inst.epi.as_ref().ok_or(EpiError::NoParams)?;
    let x0 = initial_state(inst, p)?;
    let sim = SimOptions::default();
    let supply = opts.supply.clone().or_else(|| p.supply.clone());
    let (regions, groups) = epi_sets(inst);
    let mut prev_plan = VaccinationPlan::default();
    let mut traj = simulate_delphi_v(inst, p, &x0, &prev_plan, &sim)?;
    let mut changes = vec![];
    let mut best: Option<EmbeddingResult> = None;
    for it in 1..=opts.max_iterations.max(1) {
        let force = pressure(p, &traj);
        let mut m = Model::new();
        let vars = build_lp(&mut m, inst, p, &x0, &force, supply.as_deref()).map_err(|e| EpiError::Build(e.into()))?;
        for b in extra {
            b(&mut m, inst)?;
        }
        merge_objectives(&mut m)?;
        let sol: Solution = solve(&m)?;
        if !sol.is_optimal() {
            return Err(EpiError::Status(sol.status));
        }
        let mut plan = VaccinationPlan::default();
        for (ri, r) in regions.iter().enumerate() {
            for (gi, g) in groups.iter().enumerate() {
                for (ti, &v) in vars.v[ri][gi].iter().enumerate() {
                    let x = sol.value(v);
                    plan.set(r, g, ti + 1, if x.abs() < 1e-12 { 0.0 } else { x.max(0.0) });
                }
            }
        }
        let horizon = inst.horizon();
        let mut predicted_deaths = 0.0;
        let mut predicted_inf = 0.0;
        for ri in 0..regions.len() {
            for gi in 0..groups.len() {
                predicted_deaths += sol.value(vars.group[ri][gi][horizon][D]);
                predicted_inf += (1..=horizon).map(|t| sol.value(vars.group[ri][gi][t][I])).sum::<f64>();
            }
            predicted_inf += (1..=horizon).map(|t| sol.value(vars.vacc[ri][t][VI])).sum::<f64>();
        }
        let new_traj = simulate_delphi_v(inst, p, &x0, &plan, &sim)?;
        let change = plan.l1_distance(&prev_plan);
        changes.push(change);
        let converged = change <= opts.tol;
        let result = EmbeddingResult {
            plan: plan.clone(),
            optimizer_objective: p.deaths_weight * predicted_deaths + p.infections_weight * predicted_inf,
            simulated_objective: new_traj.objective(p),
            predicted_deaths,
            simulated_deaths: new_traj.deaths(),
            total_objective: sol.objective.unwrap_or(0.0),
            trajectory: new_traj.clone(),
            iterations: it,
            converged,
            changes: changes.clone(),
        };
        log::debug!("embedding iteration {it}: plan change {change:.3e}, simulated objective {:.6}", result.simulated_objective);
        if converged {
            return Ok(result);
        }
        if best.as_ref().is_none_or(|b| result.simulated_objective < b.simulated_objective) {
            best = Some(result);
        }
        prev_plan = plan;
        traj = new_traj;
    }
    let mut r = best.expect("at least one iteration");
    r.iterations = opts.max_iterations.max(1);
    r.changes = changes;
    log::warn!("embedding did not converge in {} iterations; returning the best iterate", r.iterations);
    Ok(r)
}
