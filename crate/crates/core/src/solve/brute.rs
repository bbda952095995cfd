//! Exhaustive enumeration over integer boxes, used as ground truth.

use std::collections::HashMap;

use super::{Solution, SolveError, Status};
use crate::model::{Domain, Model, ObjSense, Sense, VarId};

pub const MAX_BRUTE_POINTS: f64 = 1e7;
pub const MAX_BRUTE_VARS: usize = 20;
const TOL: f64 = 1e-9;

/// Integer ranges for enumeration. Each variable uses the intersection of
/// its model bounds with its override, or with `default` when it has none.
#[derive(Debug, Clone, Default)]
pub struct SearchBox {
    pub default: Option<(i64, i64)>,
    pub overrides: HashMap<VarId, (i64, i64)>,
}

impl SearchBox {
    pub fn uniform(lo: i64, hi: i64) -> Self {
        SearchBox {
            default: Some((lo, hi)),
            overrides: HashMap::new(),
        }
    }

    pub fn model_bounds() -> Self {
        SearchBox::default()
    }
}

/// Enumerate every integer point of the box in lexicographic order
/// (registry order, ascending values) and return the first optimum.
/// Partial assignments are cut only when some constraint can no longer be
/// satisfied by any completion.
pub fn brute_force_oracle(model: &Model, sbox: &SearchBox) -> Result<Solution, SolveError> {
    if model.objectives().len() > 1 {
        return Err(SolveError::MultipleObjectives(model.objectives().len()));
    }
    let n = model.num_vars();
    let mut ranges = Vec::with_capacity(n);
    let mut points = 1.0f64;
    for (i, v) in model.vars().iter().enumerate() {
        if v.domain == Domain::Continuous {
            return Err(SolveError::ContinuousVariable(v.name()));
        }
        let (mut lo, mut hi) = (v.lo, v.hi);
        let over = sbox.overrides.get(&VarId(i)).copied().or(sbox.default);
        if let Some((a, b)) = over {
            lo = lo.max(a as f64);
            hi = hi.min(b as f64);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(SolveError::UnboundedRange(v.name()));
        }
        let lo = (lo - 1e-9).ceil() as i64;
        let hi = (hi + 1e-9).floor() as i64;
        points *= (hi - lo + 1).max(0) as f64;
        ranges.push((lo, hi));
    }
    if points > MAX_BRUTE_POINTS {
        return Err(SolveError::TooLarge(points, MAX_BRUTE_POINTS));
    }
    if n > MAX_BRUTE_VARS {
        return Err(SolveError::TooManyVariables(n, MAX_BRUTE_VARS));
    }

    let (sign, cost) = match model.objectives().first() {
        Some(o) => {
            let s = if o.sense == ObjSense::Maximize { -1.0 } else { 1.0 };
            let mut c = vec![0.0; n];
            for (&v, &k) in o.expr.terms() {
                c[v.0] = k;
            }
            (s, c)
        }
        None => (1.0, vec![0.0; n]),
    };

    let cons = model.constraints();
    let m = cons.len();
    let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (ci, c) in cons.iter().enumerate() {
        for (&v, &a) in c.lhs.terms() {
            by_var[v.0].push((ci, a));
        }
    }
    // rem_min[ci*(n+1)+d]: least activity from variables d.. of constraint ci
    let mut rem_min = vec![0.0; m * (n + 1)];
    let mut rem_max = vec![0.0; m * (n + 1)];
    for ci in 0..m {
        for d in (0..n).rev() {
            let a = cons[ci].lhs.coef(VarId(d));
            let (l, h) = (ranges[d].0 as f64, ranges[d].1 as f64);
            let (mn, mx) = if a >= 0.0 { (a * l, a * h) } else { (a * h, a * l) };
            rem_min[ci * (n + 1) + d] = rem_min[ci * (n + 1) + d + 1] + mn;
            rem_max[ci * (n + 1) + d] = rem_max[ci * (n + 1) + d + 1] + mx;
        }
    }
    let mut act = vec![0.0; m];
    let mut x = vec![0i64; n];
    let mut best: Option<(f64, Vec<i64>)> = None;

    // constraints with no variables are checked once
    if cons.iter().any(|c| c.lhs.is_empty() && !ok(c.sense, 0.0, 0.0, c.rhs)) {
        return Ok(Solution::empty(model, Status::Infeasible));
    }

    struct Ctx<'a> {
        n: usize,
        ranges: &'a [(i64, i64)],
        by_var: &'a [Vec<(usize, f64)>],
        rem_min: &'a [f64],
        rem_max: &'a [f64],
        senses: Vec<Sense>,
        rhs: Vec<f64>,
        cost: &'a [f64],
        sign: f64,
        visited: usize,
    }

    fn ok(sense: Sense, lo: f64, hi: f64, rhs: f64) -> bool {
        let tol = TOL * (1.0 + rhs.abs());
        match sense {
            Sense::Le => lo <= rhs + tol,
            Sense::Ge => hi >= rhs - tol,
            Sense::Eq => lo <= rhs + tol && hi >= rhs - tol,
        }
    }

    fn rec(ctx: &mut Ctx, d: usize, act: &mut [f64], x: &mut [i64], best: &mut Option<(f64, Vec<i64>)>) {
        if d == ctx.n {
            ctx.visited += 1;
            let obj: f64 = ctx.sign * x.iter().zip(ctx.cost).map(|(&v, &c)| v as f64 * c).sum::<f64>();
            let better = match best {
                None => true,
                Some((b, _)) => obj < *b - 1e-12,
            };
            if better {
                *best = Some((obj, x.to_vec()));
            }
            return;
        }
        let (l, h) = ctx.ranges[d];
        let n1 = ctx.n + 1;
        for v in l..=h {
            x[d] = v;
            let mut feasible = true;
            for &(ci, a) in &ctx.by_var[d] {
                act[ci] += a * v as f64;
            }
            for &(ci, _) in &ctx.by_var[d] {
                let lo = act[ci] + ctx.rem_min[ci * n1 + d + 1];
                let hi = act[ci] + ctx.rem_max[ci * n1 + d + 1];
                if !ok(ctx.senses[ci], lo, hi, ctx.rhs[ci]) {
                    feasible = false;
                    break;
                }
            }
            if feasible {
                rec(ctx, d + 1, act, x, best);
            }
            for &(ci, a) in &ctx.by_var[d] {
                act[ci] -= a * v as f64;
            }
        }
    }

    let mut ctx = Ctx {
        n,
        ranges: &ranges,
        by_var: &by_var,
        rem_min: &rem_min,
        rem_max: &rem_max,
        senses: cons.iter().map(|c| c.sense).collect(),
        rhs: cons.iter().map(|c| c.rhs).collect(),
        cost: &cost,
        sign,
        visited: 0,
    };
    rec(&mut ctx, 0, &mut act, &mut x, &mut best);
    let visited = ctx.visited;
    let mut sol = match best {
        Some((_, xs)) => {
            let mut s = Solution::empty(model, Status::Optimal);
            s.values = xs.iter().map(|&v| v as f64).collect();
            s.finish(model);
            s.bound = s.objective.unwrap_or(0.0);
            s.gap = 0.0;
            s
        }
        None => Solution::empty(model, Status::Infeasible),
    };
    sol.nodes = visited;
    Ok(sol)
}
