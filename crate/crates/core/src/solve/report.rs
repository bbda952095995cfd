//! Solution CSV: `family,indices,value`, indices joined with `;`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Solution;
use crate::model::lp::fmt_num;
use crate::model::{Model, VarId};

/// Render in canonical variable order.
pub fn solution_csv(model: &Model, solution: &Solution) -> String {
    let mut order: Vec<VarId> = (0..model.num_vars()).map(VarId).collect();
    order.sort_by(|&a, &b| model.cmp_vars(a, b));
    let mut s = String::from("family,indices,value\n");
    for v in order {
        let info = model.var_info(v);
        let _ = writeln!(
            s,
            "{},{},{}",
            info.family,
            info.indices.join(";"),
            fmt_num(solution.values[v.0])
        );
    }
    s
}

pub fn write_solution_csv(model: &Model, solution: &Solution, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, solution_csv(model, solution))
}

/// Read values written by [`solution_csv`] (or an external solver exporting
/// the same columns). Unlisted variables read as 0.
pub fn read_solution_csv(model: &Model, text: &str) -> Result<Vec<f64>, String> {
    let mut values = vec![0.0; model.num_vars()];
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (Some(fam), Some(idx), Some(val)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected 3 columns", n + 1));
        };
        let indices: Vec<String> = if idx.is_empty() {
            vec![]
        } else {
            idx.split(';').map(str::to_string).collect()
        };
        let v = model
            .var(fam, &indices)
            .ok_or_else(|| format!("line {}: unknown variable {fam}[{idx}]", n + 1))?;
        values[v.0] = val.trim().parse().map_err(|e| format!("line {}: {e}", n + 1))?;
    }
    Ok(values)
}
