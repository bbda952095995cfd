//! ε-constraint scalarization and Pareto sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::model::lp::fmt_num;
use crate::model::{tag, BuildError, Model, ObjSense, Sense};
use crate::solve::{solve, SolveError, Status};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Keep `keep` as the objective and turn every other objective into a
/// bound: `f ≤ ε` when minimized, `f ≥ ε` when maximized.
pub fn epsilon_constraint_scalarize(m: &Model, keep: &str, bounds: &BTreeMap<String, f64>) -> Result<Model, BuildError> {
    if m.objectives().len() < 2 {
        return Err(BuildError::Invalid(format!(
            "scalarization needs at least two objectives, model has {}",
            m.objectives().len()
        )));
    }
    if m.objective(keep).is_none() {
        return Err(BuildError::Missing(format!("objective {keep}")));
    }
    let mut out = m.clone();
    let others: Vec<String> = m.objectives().iter().map(|o| o.name.clone()).filter(|n| n != keep).collect();
    for name in others {
        let eps = *bounds.get(&name).ok_or_else(|| BuildError::Missing(format!("ε bound for objective {name}")))?;
        let o = out.remove_objective(&name).expect("listed above");
        let sense = match o.sense {
            ObjSense::Minimize => Sense::Le,
            ObjSense::Maximize => Sense::Ge,
        };
        out.add_constraint(o.expr.clone(), sense, eps, tag("equity.epsilon", "bound", &[("objective", &name)]))?;
        out.push_demoted(o);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub epsilon: BTreeMap<String, f64>,
    pub status: Status,
    /// Every objective at the point; empty unless optimal.
    pub objectives: BTreeMap<String, f64>,
    pub values: Vec<f64>,
}

/// Solve the scalarized model for each ε vector. An optimal point is then
/// polished lexicographically: the kept objective is held at its optimum
/// and each demoted objective is optimized in name order, so returned
/// points are not weakly dominated.
pub fn pareto_sweep(m: &Model, keep: &str, grid: &[BTreeMap<String, f64>]) -> Result<Vec<ParetoPoint>, SweepError> {
    let mut out = vec![];
    for eps in grid {
        let mut sm = epsilon_constraint_scalarize(m, keep, eps)?;
        let sol = solve(&sm)?;
        if !sol.is_optimal() {
            out.push(ParetoPoint {
                epsilon: eps.clone(),
                status: sol.status,
                objectives: BTreeMap::new(),
                values: vec![],
            });
            continue;
        }
        let mut best = sol;
        let order: Vec<_> = sm.demoted_objectives().to_vec();
        let mut current = sm.objective(keep).expect("kept").clone();
        for next in order {
            let v = current.expr.eval(&best.values);
            let slack = 1e-7 * v.abs().max(1.0);
            let (sense, rhs) = match current.sense {
                ObjSense::Minimize => (Sense::Le, v + slack),
                ObjSense::Maximize => (Sense::Ge, v - slack),
            };
            sm.add_constraint(current.expr.clone(), sense, rhs, tag("equity.epsilon", "hold", &[("objective", &current.name)])).map_err(BuildError::from)?;
            sm.remove_objective(&current.name);
            sm.set_objective(&next.name, next.sense, next.expr.clone());
            let s = solve(&sm)?;
            if s.is_optimal() {
                best.values = s.values;
            }
            current = next;
        }
        let mut objectives = BTreeMap::new();
        for o in m.objectives() {
            objectives.insert(o.name.clone(), o.expr.eval(&best.values));
        }
        out.push(ParetoPoint {
            epsilon: eps.clone(),
            status: Status::Optimal,
            objectives,
            values: best.values,
        });
    }
    Ok(out)
}

/// `a` is at least as good as `b` in every objective and better by more
/// than `tol` in one.
pub fn dominates(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
    senses: &BTreeMap<String, ObjSense>,
    tol: f64,
) -> bool {
    let mut strictly = false;
    for (name, sense) in senses {
        let (x, y) = (a[name], b[name]);
        let gain = match sense {
            ObjSense::Minimize => y - x,
            ObjSense::Maximize => x - y,
        };
        if gain < -tol {
            return false;
        }
        if gain > tol {
            strictly = true;
        }
    }
    strictly
}

/// Indices of optimal points that no other optimal point dominates, with
/// ties (every objective within `tol`) kept once.
pub fn nondominated(points: &[ParetoPoint], senses: &BTreeMap<String, ObjSense>, tol: f64) -> Vec<usize> {
    let ok: Vec<usize> = (0..points.len()).filter(|&i| points[i].status == Status::Optimal).collect();
    let mut keep: Vec<usize> = vec![];
    for &i in &ok {
        let a = &points[i].objectives;
        if ok.iter().any(|&j| j != i && dominates(&points[j].objectives, a, senses, tol)) {
            continue;
        }
        let tie = keep
            .iter()
            .any(|&j| senses.keys().all(|n| (points[j].objectives[n] - a[n]).abs() <= tol));
        if !tie {
            keep.push(i);
        }
    }
    keep
}

/// Objective senses of a model, including demoted ones.
pub fn senses(m: &Model) -> BTreeMap<String, ObjSense> {
    m.objectives().iter().chain(m.demoted_objectives()).map(|o| (o.name.clone(), o.sense)).collect()
}

/// One row per point: ε per bounded objective, every objective value,
/// status.
pub fn pareto_csv(points: &[ParetoPoint]) -> String {
    let eps_names: Vec<&String> = points.first().map(|p| p.epsilon.keys().collect()).unwrap_or_default();
    let obj_names: Vec<&String> = points
        .iter()
        .find(|p| !p.objectives.is_empty())
        .map(|p| p.objectives.keys().collect())
        .unwrap_or_default();
    let mut s = String::new();
    let mut head: Vec<String> = eps_names.iter().map(|n| format!("eps_{n}")).collect();
    head.extend(obj_names.iter().map(|n| format!("obj_{n}")));
    head.push("status".into());
    s.push_str(&head.join(","));
    s.push('\n');
    for p in points {
        let mut row: Vec<String> = eps_names.iter().map(|n| fmt_num(p.epsilon[*n])).collect();
        row.extend(obj_names.iter().map(|n| p.objectives.get(*n).map(|v| fmt_num(*v)).unwrap_or_default()));
        row.push(p.status.to_string());
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn write_pareto_csv(points: &[ParetoPoint], path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, pareto_csv(points))
}
