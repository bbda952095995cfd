//! Deterministic LP text export and a reader for the same dialect.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{Domain, LinExpr, Model, ObjSense, Sense, VarId};

#[derive(Debug, Error)]
pub enum LpError {
    #[error("LP export needs a single objective; model has {0} (scalarize first)")]
    MultipleObjectives(usize),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("LP parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Format a coefficient with at most 12 significant digits, positional
/// below 1e12.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if v.abs() >= 1e12 {
        let mant = trim_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, v);
    let s = trim_zeros(&s);
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Map every non-alphanumeric character to `_`.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// LP names for all variables, unique, in registry order.
pub fn var_names(model: &Model) -> Vec<String> {
    let mut order: Vec<VarId> = (0..model.num_vars()).map(VarId).collect();
    order.sort_by(|&a, &b| model.cmp_vars(a, b));
    let mut names = vec![String::new(); model.num_vars()];
    let mut used = HashSet::new();
    for v in order {
        let mut n = sanitize(&model.var_info(v).name());
        if n.is_empty() || n.starts_with(|c: char| c.is_ascii_digit()) {
            n = format!("v_{n}");
        }
        if !used.insert(n.clone()) {
            n = format!("{n}_{}", v.0);
            used.insert(n.clone());
        }
        names[v.0] = n;
    }
    names
}

fn write_expr(out: &mut String, model: &Model, e: &LinExpr, names: &[String]) {
    let terms = model.canonical_terms(e);
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (n, (v, c)) in terms.into_iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        let a = c.abs();
        if n == 0 {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            out.push(' ');
            out.push_str(sign);
        }
        if a != 1.0 {
            out.push(' ');
            out.push_str(&fmt_num(a));
        }
        out.push(' ');
        out.push_str(&names[v.0]);
    }
}

/// Render the model as LP text.
pub fn to_lp_string(model: &Model) -> Result<String, LpError> {
    if model.objectives().len() > 1 {
        return Err(LpError::MultipleObjectives(model.objectives().len()));
    }
    let names = var_names(model);
    let mut s = String::new();
    let (sense, expr) = match model.objectives().first() {
        Some(o) => (o.sense, o.expr.clone()),
        None => (ObjSense::Minimize, LinExpr::new()),
    };
    s.push_str(match sense {
        ObjSense::Minimize => "Minimize\n",
        ObjSense::Maximize => "Maximize\n",
    });
    s.push_str(" obj:");
    if expr.is_empty() {
        s.push(' ');
        s.push_str(&fmt_num(expr.constant()));
    } else {
        write_expr(&mut s, model, &expr, &names);
        let c = expr.constant();
        if c != 0.0 {
            s.push_str(if c < 0.0 { " - " } else { " + " });
            s.push_str(&fmt_num(c.abs()));
        }
    }
    s.push('\n');
    s.push_str("Subject To\n");
    let mut used = HashSet::new();
    for (i, c) in model.constraints().iter().enumerate() {
        let mut n = sanitize(&c.tag);
        if n.is_empty() || n.starts_with(|ch: char| ch.is_ascii_digit()) {
            n = format!("c_{n}");
        }
        if !used.insert(n.clone()) {
            n = format!("{n}_{i}");
            used.insert(n.clone());
        }
        s.push(' ');
        s.push_str(&n);
        s.push(':');
        write_expr(&mut s, model, &c.lhs, &names);
        s.push_str(&format!(" {} {}\n", c.sense, fmt_num(c.rhs)));
    }
    let mut order: Vec<VarId> = (0..model.num_vars()).map(VarId).collect();
    order.sort_by(|&a, &b| model.cmp_vars(a, b));
    let mut bounds = String::new();
    let mut generals = String::new();
    let mut binaries = String::new();
    for &v in &order {
        let info = model.var_info(v);
        let n = &names[v.0];
        let default = match info.domain {
            Domain::Binary => info.lo == 0.0 && info.hi == 1.0,
            _ => info.lo == 0.0 && info.hi == f64::INFINITY,
        };
        if !default {
            let line = if info.lo == info.hi {
                format!(" {n} = {}\n", fmt_num(info.lo))
            } else if info.lo == f64::NEG_INFINITY && info.hi == f64::INFINITY {
                format!(" {n} free\n")
            } else if info.hi == f64::INFINITY {
                format!(" {n} >= {}\n", fmt_num(info.lo))
            } else {
                format!(" {} <= {n} <= {}\n", fmt_num(info.lo), fmt_num(info.hi))
            };
            bounds.push_str(&line);
        }
        match info.domain {
            Domain::Integer => generals.push_str(&format!(" {n}\n")),
            Domain::Binary => binaries.push_str(&format!(" {n}\n")),
            Domain::Continuous => {}
        }
    }
    if !bounds.is_empty() {
        s.push_str("Bounds\n");
        s.push_str(&bounds);
    }
    if !generals.is_empty() {
        s.push_str("Generals\n");
        s.push_str(&generals);
    }
    if !binaries.is_empty() {
        s.push_str("Binaries\n");
        s.push_str(&binaries);
    }
    s.push_str("End\n");
    Ok(s)
}

/// Write the model to `path` in LP format.
pub fn export_lp(model: &Model, path: impl AsRef<Path>) -> Result<(), LpError> {
    let text = to_lp_string(model)?;
    fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

struct Reader {
    model: Model,
    ids: HashMap<String, VarId>,
}

impl Reader {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.ids.get(name) {
            return v;
        }
        let v = self
            .model
            .add_var(name, vec![], Domain::Continuous, 0.0, f64::INFINITY)
            .expect("fresh LP name");
        self.ids.insert(name.to_string(), v);
        v
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

/// Parse a linear expression from whitespace-separated tokens.
fn parse_expr(rd: &mut Reader, toks: &[&str], line: usize) -> Result<LinExpr, LpError> {
    let mut e = LinExpr::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &t in toks {
        match t {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Some(x) = parse_num(t) {
                    if let Some(prev) = coef.take() {
                        e.add_constant(prev);
                    }
                    coef = Some(sign * x);
                    sign = 1.0;
                } else {
                    let v = rd.var(t);
                    let c = coef.take().unwrap_or(sign);
                    e.add_term(v, c);
                    sign = 1.0;
                }
            }
        }
    }
    if let Some(c) = coef {
        e.add_constant(c);
    }
    let _ = line;
    Ok(e)
}

/// Read LP text produced by [`to_lp_string`] (and simple hand-written files
/// in the same dialect). Variables become name-only families.
pub fn parse_lp(text: &str) -> Result<Model, LpError> {
    let mut rd = Reader {
        model: Model::new(),
        ids: HashMap::new(),
    };
    let mut section = None;
    let mut sense = ObjSense::Minimize;
    let mut obj = LinExpr::new();
    let mut domains: BTreeMap<String, Domain> = BTreeMap::new();
    let mut pending_bounds: Vec<(String, f64, f64)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let l = raw.split('\\').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let low = l.to_ascii_lowercase();
        let header = match low.as_str() {
            "minimize" | "minimum" | "min" => Some((Section::Objective, Some(ObjSense::Minimize))),
            "maximize" | "maximum" | "max" => Some((Section::Objective, Some(ObjSense::Maximize))),
            "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, None)),
            "bounds" => Some((Section::Bounds, None)),
            "generals" | "general" | "integers" => Some((Section::Generals, None)),
            "binaries" | "binary" => Some((Section::Binaries, None)),
            "end" => Some((Section::End, None)),
            _ => None,
        };
        if let Some((sec, s)) = header {
            section = Some(sec);
            if let Some(s) = s {
                sense = s;
            }
            continue;
        }
        let err = |msg: &str| LpError::Parse {
            line,
            msg: msg.to_string(),
        };
        match section {
            None => return Err(err("content before a section header")),
            Some(Section::Objective) => {
                let body = l.split_once(':').map(|x| x.1).unwrap_or(l);
                let toks: Vec<&str> = body.split_whitespace().collect();
                obj.add_assign_expr(&parse_expr(&mut rd, &toks, line)?);
            }
            Some(Section::Constraints) => {
                let (name, body) = l.split_once(':').ok_or_else(|| err("constraint without name"))?;
                let toks: Vec<&str> = body.split_whitespace().collect();
                let pos = toks
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "=<" | "=>" | "<" | ">"))
                    .ok_or_else(|| err("constraint without relation"))?;
                let sense = match toks[pos] {
                    "<=" | "=<" | "<" => Sense::Le,
                    ">=" | "=>" | ">" => Sense::Ge,
                    _ => Sense::Eq,
                };
                let lhs = parse_expr(&mut rd, &toks[..pos], line)?;
                let rhs_e = parse_expr(&mut rd, &toks[pos + 1..], line)?;
                let mut lhs = lhs;
                lhs.add_scaled(&rhs_e.clone().without_constant(), -1.0);
                rd.model
                    .add_constraint(lhs, sense, rhs_e.constant(), name.trim())
                    .map_err(|e| err(&e.to_string()))?;
            }
            Some(Section::Bounds) => {
                let toks: Vec<&str> = l.split_whitespace().collect();
                match toks.as_slice() {
                    [n, "free"] => pending_bounds.push((n.to_string(), f64::NEG_INFINITY, f64::INFINITY)),
                    [n, "=", x] => {
                        let x = parse_num(x).ok_or_else(|| err("bad number"))?;
                        pending_bounds.push((n.to_string(), x, x));
                    }
                    [n, ">=", x] => {
                        let x = parse_num(x).ok_or_else(|| err("bad number"))?;
                        pending_bounds.push((n.to_string(), x, f64::NAN));
                    }
                    [n, "<=", x] => {
                        let x = parse_num(x).ok_or_else(|| err("bad number"))?;
                        pending_bounds.push((n.to_string(), f64::NAN, x));
                    }
                    [a, "<=", n, "<=", b] => {
                        let a = parse_num(a).ok_or_else(|| err("bad number"))?;
                        let b = parse_num(b).ok_or_else(|| err("bad number"))?;
                        pending_bounds.push((n.to_string(), a, b));
                    }
                    _ => return Err(err("unrecognized bound")),
                }
            }
            Some(Section::Generals) => {
                for n in l.split_whitespace() {
                    domains.insert(n.to_string(), Domain::Integer);
                }
            }
            Some(Section::Binaries) => {
                for n in l.split_whitespace() {
                    domains.insert(n.to_string(), Domain::Binary);
                }
            }
            Some(Section::End) => {}
        }
    }
    for (n, d) in &domains {
        let v = rd.var(n);
        rd.model.set_domain(v, *d);
    }
    for (n, lo, hi) in pending_bounds {
        let v = rd.var(&n);
        let info = rd.model.var_info(v);
        let lo = if lo.is_nan() { info.lo } else { lo };
        let hi = if hi.is_nan() { info.hi } else { hi };
        rd.model.set_bounds(v, lo, hi).map_err(|e| LpError::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
    }
    rd.model.set_objective("obj", sense, obj);
    Ok(rd.model)
}
