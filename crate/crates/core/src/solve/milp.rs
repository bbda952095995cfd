//! Branch-and-bound over the simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{self, LpStatus};
use super::{prepare, Solution, SolveError, Status, DEFAULT_MAX_PIVOTS};
use crate::model::Model;

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub rel_gap: f64,
    pub node_limit: usize,
    pub max_pivots: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            rel_gap: 1e-6,
            node_limit: 200_000,
            max_pivots: DEFAULT_MAX_PIVOTS,
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // max-heap: smaller bound first, then older node first
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(o.seq.cmp(&self.seq))
    }
}

/// Best-bound branch-and-bound with depth-first dives, most-fractional
/// branching and ties broken by lowest registry index.
pub fn solve_milp(model: &Model, opts: &MilpOptions) -> Result<Solution, SolveError> {
    let p = prepare(model)?;
    let n = p.lp.n;
    let integral: Vec<bool> = model.vars().iter().map(|v| v.domain.is_integral()).collect();
    // objective values are integral when every costed variable is an
    // integer with an integer coefficient
    let integral_obj = p
        .lp
        .cost
        .iter()
        .enumerate()
        .all(|(j, &c)| c == 0.0 || (integral[j] && c == c.round()));
    let tighten = |b: f64| -> f64 {
        if integral_obj && b.is_finite() {
            (b - 1e-6).ceil()
        } else {
            b
        }
    };

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut pivots = 0usize;
    let mut hit_limit = false;
    let mut root_status = None;
    let mut current = Some(Node {
        bound: f64::NEG_INFINITY,
        seq,
        lo: p.lo.clone(),
        hi: p.hi.clone(),
    });
    let prune_tol = |inc: f64| opts.rel_gap * inc.abs().max(1.0);

    loop {
        let node = match current.take() {
            Some(nd) => nd,
            None => match heap.pop() {
                Some(nd) => nd,
                None => break,
            },
        };
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - prune_tol(*inc) {
                continue;
            }
        }
        if nodes >= opts.node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }
        nodes += 1;
        let res = simplex::solve(&p.lp, &node.lo, &node.hi, opts.max_pivots);
        pivots += res.pivots;
        if root_status.is_none() {
            root_status = Some(res.status);
        }
        match res.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 {
                    let mut s = Solution::empty(model, Status::Unbounded);
                    s.nodes = nodes;
                    return Ok(s);
                }
                continue;
            }
            LpStatus::IterationLimit | LpStatus::Numerical => {
                if nodes == 1 {
                    let mut s = Solution::empty(model, res.status.into());
                    s.nodes = nodes;
                    return Ok(s);
                }
                continue;
            }
        }
        let bound = tighten(res.objective.max(node.bound));
        if let Some((inc, _)) = &incumbent {
            if bound >= inc - prune_tol(*inc) {
                continue;
            }
        }
        // most fractional; strict comparison keeps the lowest index on ties
        let mut branch: Option<(usize, f64)> = None;
        let mut best_frac = INT_TOL;
        for j in 0..n {
            if !integral[j] {
                continue;
            }
            let x = res.x[j];
            let f = (x - x.floor()).min(x.ceil() - x);
            if f > best_frac + 1e-12 {
                best_frac = f;
                branch = Some((j, x));
            }
        }
        match branch {
            None => {
                let mut x = res.x;
                for j in 0..n {
                    if integral[j] {
                        x[j] = x[j].round();
                    }
                }
                let val = res.objective;
                let better = match &incumbent {
                    None => true,
                    Some((inc, _)) => val < *inc - 1e-12,
                };
                if better {
                    incumbent = Some((val, x));
                }
            }
            Some((j, x)) => {
                let down_hi = x.floor();
                let up_lo = x.ceil();
                let mut down = Node {
                    bound,
                    seq: 0,
                    lo: node.lo.clone(),
                    hi: node.hi.clone(),
                };
                down.hi[j] = down_hi;
                let mut up = Node {
                    bound,
                    seq: 0,
                    lo: node.lo,
                    hi: node.hi,
                };
                up.lo[j] = up_lo;
                let (mut first, mut second) = if x - x.floor() < 0.5 { (down, up) } else { (up, down) };
                seq += 1;
                first.seq = seq;
                seq += 1;
                second.seq = seq;
                heap.push(second);
                current = Some(first);
            }
        }
    }

    let open_bound = heap
        .iter()
        .map(|nd| nd.bound)
        .fold(f64::INFINITY, f64::min)
        .min(current.as_ref().map(|c| c.bound).unwrap_or(f64::INFINITY));
    let mut sol;
    match incumbent {
        Some((val, x)) => {
            let status = if hit_limit { Status::IterationLimit } else { Status::Optimal };
            sol = Solution::empty(model, status);
            sol.values = x;
            let best = if hit_limit { open_bound.min(val) } else { val };
            sol.bound = p.sign * best + p.constant;
            sol.gap = if hit_limit {
                (val - best).abs() / val.abs().max(1.0)
            } else {
                0.0
            };
            sol.finish(model);
        }
        None => {
            let status = if hit_limit {
                Status::IterationLimit
            } else {
                Status::Infeasible
            };
            sol = Solution::empty(model, status);
        }
    }
    sol.nodes = nodes;
    sol.pivots = pivots;
    Ok(sol)
}
