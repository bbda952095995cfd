//! Linearization gadgets for `min` and `abs`.

use super::{Domain, LinExpr, Model, ModelError, Sense, VarId};

/// Encode `out = min(a, b)` with a fresh binary selector δ:
/// `out ≤ a`, `out ≤ b`, `out ≥ a − M_a·δ`, `out ≥ b − M_b·(1−δ)`.
///
/// `m_a` must bound `a − b` from above and `m_b` must bound `b − a`.
pub fn linearize_min(
    model: &mut Model,
    out: VarId,
    a: &LinExpr,
    b: &LinExpr,
    m_a: f64,
    m_b: f64,
    tag: &str,
) -> Result<VarId, ModelError> {
    for m in [m_a, m_b] {
        if !(m > 0.0) || !m.is_finite() {
            return Err(ModelError::BigM(m));
        }
    }
    let delta = model.add_aux("delta_min", Domain::Binary, 0.0, 1.0)?;
    let o = LinExpr::from(out);
    model.add_constraint(o.clone() - a.clone(), Sense::Le, 0.0, with_part(tag, "le_a"))?;
    model.add_constraint(o.clone() - b.clone(), Sense::Le, 0.0, with_part(tag, "le_b"))?;
    // out - a + M_a δ >= 0
    let mut e = o.clone() - a.clone();
    e.add_term(delta, m_a);
    model.add_constraint(e, Sense::Ge, 0.0, with_part(tag, "ge_a"))?;
    // out - b - M_b δ >= -M_b
    let mut e = o - b.clone();
    e.add_term(delta, -m_b);
    model.add_constraint(e, Sense::Ge, -m_b, with_part(tag, "ge_b"))?;
    Ok(delta)
}

/// `out ≥ e` and `out ≥ −e`; exact when `out` is minimized.
pub fn linearize_abs(model: &mut Model, out: VarId, e: &LinExpr, tag: &str) -> Result<(), ModelError> {
    let o = LinExpr::from(out);
    model.add_constraint(o.clone() - e.clone(), Sense::Ge, 0.0, with_part(tag, "pos"))?;
    model.add_constraint(o + e.clone(), Sense::Ge, 0.0, with_part(tag, "neg"))?;
    Ok(())
}

fn with_part(tag: &str, part: &str) -> String {
    match tag.find('[') {
        Some(i) => format!("{}.{}{}", &tag[..i], part, &tag[i..]),
        None => format!("{tag}.{part}"),
    }
}
