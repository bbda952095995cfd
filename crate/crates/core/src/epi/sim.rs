//! Forward-Euler integration of the compartment flows.

use super::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Requested step in periods; rounded down to divide one period.
    pub dt: f64,
    /// Reset negative compartments to zero after each step.
    pub clip: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt: 1.0, clip: true }
    }
}

/// Largest `|r^U_g(t) + r^H_g(t) + r^Q_g(t) − r^d|`. The flows conserve
/// regional population exactly when this is zero.
pub fn conservation_defect(inst: &Instance, p: &EpiParams) -> f64 {
    let (_, groups) = epi_sets(inst);
    let mut worst: f64 = 0.0;
    for g in &groups {
        for t in inst.periods() {
            worst = worst.max((p.r_u(g, t) + p.r_h(g, t) + p.r_q(g, t) - p.r_detection).abs());
        }
    }
    worst
}

fn derivative(p: &EpiParams, groups: &[String], region: &str, t: usize, x: &RegionState, plan: &VaccinationPlan) -> RegionState {
    let force = p.alpha * p.gamma_at(t) * x.infected();
    let mut dg = vec![[0.0; 8]; groups.len()];
    let mut v_total = 0.0;
    for (gi, g) in groups.iter().enumerate() {
        let c = &x.groups[gi];
        let v = plan.get(region, g, t);
        v_total += v;
        let infect = force * (c[S] - p.beta * v);
        let rd = p.death_rate(g);
        let d = &mut dg[gi];
        d[S] = -p.beta * v - infect;
        // βV already sits inside dS; eligibility drops once per vaccinated person
        d[SBAR] = d[S];
        d[E] = infect - p.r_infection * c[E];
        d[I] = p.r_infection * c[E] - p.r_detection * c[I];
        d[U] = p.r_u(g, t) * c[I] - rd * c[U];
        d[H] = p.r_h(g, t) * c[I] - rd * c[H];
        d[Q] = p.r_q(g, t) * c[I] - rd * c[Q];
        d[D] = rd * (c[U] + c[H] + c[Q]);
    }
    let vc = &x.vaccinated;
    let infect_v = force * (vc[VS] + p.beta * v_total);
    let dv = [
        p.beta * v_total - infect_v,
        infect_v - p.r_infection * vc[VE],
        p.r_infection * vc[VE] - p.r_detection * vc[VI],
        p.r_detection * vc[VI],
    ];
    RegionState {
        groups: dg,
        vaccinated: dv,
    }
}

/// Integrate the compartment flows over the instance horizon under `plan`.
///
/// `V_{rgt}` and the period tables (γ, r^U, r^H, r^Q) are held constant
/// within a period. With clipping on, negative compartments are reset to
/// zero and the added mass is reported in [`Trajectory::clipped`].
pub fn simulate_delphi_v(
    inst: &Instance,
    p: &EpiParams,
    initial: &EpiState,
    plan: &VaccinationPlan,
    opts: &SimOptions,
) -> Result<Trajectory, EpiError> {
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(EpiError::Step(opts.dt));
    }
    let horizon = inst.horizon();
    if p.gamma.len() < horizon {
        return Err(EpiError::GammaTooShort {
            len: p.gamma.len(),
            horizon,
        });
    }
    let (regions, groups) = epi_sets(inst);
    if initial.regions.len() != regions.len() || initial.regions.iter().any(|r| r.groups.len() != groups.len()) {
        return Err(EpiError::Invalid(format!(
            "initial state shape does not match {} regions × {} groups",
            regions.len(),
            groups.len()
        )));
    }
    for ((r, g, t), v) in &plan.rates {
        if !(*v >= 0.0) {
            return Err(EpiError::Invalid(format!("negative vaccination rate at {r}/{g}/{t}")));
        }
    }
    let steps = ((1.0 / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let h = 1.0 / steps as f64;
    if (h - opts.dt).abs() > 1e-12 {
        log::debug!("time step {} rounded to {h} to divide one period", opts.dt);
    }
    let mut state = initial.clone();
    let mut states = vec![state.clone()];
    let mut clipped = 0.0;
    let mut clip_events = 0usize;
    for t in 1..=horizon {
        for _ in 0..steps {
            let mut next = state.clone();
            for (ri, r) in regions.iter().enumerate() {
                let d = derivative(p, &groups, r, t, &state.regions[ri], plan);
                let x = &mut next.regions[ri];
                for (row, drow) in x.groups.iter_mut().zip(&d.groups) {
                    for (a, b) in row.iter_mut().zip(drow) {
                        *a += h * b;
                    }
                }
                for (a, b) in x.vaccinated.iter_mut().zip(&d.vaccinated) {
                    *a += h * b;
                }
                if opts.clip {
                    for a in x.groups.iter_mut().flat_map(|row| row.iter_mut()).chain(x.vaccinated.iter_mut()) {
                        if *a < 0.0 {
                            clipped -= *a;
                            clip_events += 1;
                            *a = 0.0;
                        }
                    }
                }
            }
            state = next;
        }
        states.push(state.clone());
    }
    if clip_events > 0 {
        log::warn!("clipped {clip_events} negative compartment values (total mass {clipped:.3e})");
    }
    Ok(Trajectory {
        regions,
        groups,
        states,
        plan: plan.clone(),
        clipped,
        dt: h,
    })
}
