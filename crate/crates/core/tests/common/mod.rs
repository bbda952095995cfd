#![allow(dead_code)]

use vaxopt::data::{ColdTier, DistributionCenter, EpiParams, Instance, VaccineType};
use vaxopt::model::Model;
use vaxopt::solve::Solution;

/// One manufacturer `M1`, the given DCs and VCs, and a single-dose cold
/// vaccine `P` with a long shelf life.
pub fn chain(horizon: usize, dcs: &[&str], vcs: &[&str]) -> Instance {
    let mut inst = Instance::empty(horizon);
    inst.manufacturers = vec!["M1".into()];
    inst.dcs = dcs.iter().map(|d| DistributionCenter::new(d)).collect();
    inst.vcs = vcs.iter().map(|v| v.to_string()).collect();
    inst.vaccines = vec![VaccineType::new("P", 1, 100, 1, ColdTier::Cold)];
    inst
}

pub fn val(m: &Model, s: &Solution, family: &str, idx: &[&str]) -> f64 {
    let idx: Vec<String> = idx.iter().map(|x| x.to_string()).collect();
    s.get(m, family, &idx)
}

pub fn family_sum(m: &Model, s: &Solution, family: &str) -> f64 {
    m.family_vars(family).iter().map(|&v| s.value(v)).sum()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6
}

/// Independent RK4 over one region and one group: state
/// `[S, E, I, U, H, Q, D, S', E', I', M]`.
pub fn rk4_single(p: &EpiParams, g: &str, s0: f64, i0: f64, v: f64, horizon: usize, h: f64) -> Vec<f64> {
    let rd = p.r_death_group[g];
    let f = |tt: usize, x: &[f64; 11]| -> [f64; 11] {
        let ru = p.r_undetected.get(&[g, &tt.to_string()]).unwrap();
        let rh = p.r_hospital.get(&[g, &tt.to_string()]).unwrap();
        let rq = p.r_quarantine.get(&[g, &tt.to_string()]).unwrap();
        let lam = p.alpha * p.gamma[tt - 1] * (x[2] + x[9]);
        let bv = p.beta * v;
        [
            -bv - lam * (x[0] - bv),
            lam * (x[0] - bv) - p.r_infection * x[1],
            p.r_infection * x[1] - p.r_detection * x[2],
            ru * x[2] - rd * x[3],
            rh * x[2] - rd * x[4],
            rq * x[2] - rd * x[5],
            rd * (x[3] + x[4] + x[5]),
            bv - lam * (x[7] + bv),
            lam * (x[7] + bv) - p.r_infection * x[8],
            p.r_infection * x[8] - p.r_detection * x[9],
            p.r_detection * x[9],
        ]
    };
    let axpy = |x: &[f64; 11], k: &[f64; 11], a: f64| -> [f64; 11] { std::array::from_fn(|n| x[n] + a * k[n]) };
    let mut x = [0.0; 11];
    x[0] = s0;
    x[2] = i0;
    let mut out = vec![x[2]];
    let steps = (1.0 / h).round() as usize;
    for tt in 1..=horizon {
        for _ in 0..steps {
            let k1 = f(tt, &x);
            let k2 = f(tt, &axpy(&x, &k1, h / 2.0));
            let k3 = f(tt, &axpy(&x, &k2, h / 2.0));
            let k4 = f(tt, &axpy(&x, &k3, h));
            x = std::array::from_fn(|n| x[n] + h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]));
        }
        out.push(x[2]);
    }
    out
}
