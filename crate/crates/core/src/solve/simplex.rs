//! Dense bounded-variable primal simplex (two phases).
//!
//! Rows are turned into equalities with one slack each; rows whose slack
//! cannot start feasible get an artificial column. Nonbasic columns sit at
//! a bound (or at zero when free). Dantzig pricing switches to Bland's rule
//! after a run of degenerate pivots, and the tableau is rebuilt from the
//! original matrix every `REFACTOR_EVERY` pivots.

use crate::model::Sense;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
pub(crate) const BLAND_AFTER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

/// `min cᵀx` subject to sparse rows and column bounds.
#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Lagrangian lower bound from the final row duals.
    pub dual_bound: f64,
    pub pivots: usize,
    pub bland_engaged: bool,
}

struct Tableau {
    m: usize,
    ncol: usize,
    /// Original full matrix (structural + slack + artificial), row-major.
    a: Vec<f64>,
    t: Vec<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    val: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    cost: Vec<f64>,
    d: Vec<f64>,
    pivots: usize,
    degenerate: usize,
    bland: bool,
    since_refactor: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncol + j]
    }

    fn compute_d(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
                for (dj, tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        self.d = d;
    }

    fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.val).map(|(c, v)| c * v).sum()
    }

    fn can_increase(&self, j: usize) -> bool {
        self.val[j] < self.hi[j] - FEAS_TOL
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.val[j] > self.lo[j] + FEAS_TOL
    }

    fn choose_entering(&self, allowed: &dyn Fn(usize) -> bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncol {
            if self.is_basic[j] || !allowed(j) {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -OPT_TOL && self.can_increase(j) {
                1.0
            } else if dj > OPT_TOL && self.can_decrease(j) {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncol;
        let p = self.t[r * n + j];
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        let nz: Vec<usize> = (0..n).filter(|&k| pivot_row[k] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for &k in &nz {
                row[k] -= f * pivot_row[k];
            }
            row[j] = 0.0;
        }
        let fd = self.d[j];
        if fd != 0.0 {
            for &k in &nz {
                self.d[k] -= fd * pivot_row[k];
            }
            self.d[j] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
        self.d[leaving] = -fd * pivot_row[leaving];
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// One primal iteration. `allowed` filters entering candidates.
    fn step(&mut self, allowed: &dyn Fn(usize) -> bool) -> Step {
        let Some((j, dir)) = self.choose_entering(allowed) else {
            return Step::Optimal;
        };
        // ratio test
        let mut limit = self.hi[j] - self.lo[j];
        let mut leave: Option<(usize, bool)> = None; // (row, hits upper)
        let mut best_alpha = 0.0;
        for i in 0..self.m {
            let alpha = dir * self.at(i, j);
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let bi = self.basis[i];
            let v = self.val[bi];
            let (ratio, upper) = if alpha > 0.0 {
                if self.lo[bi] == f64::NEG_INFINITY {
                    continue;
                }
                (((v - self.lo[bi]) / alpha).max(0.0), false)
            } else {
                if self.hi[bi] == f64::INFINITY {
                    continue;
                }
                (((self.hi[bi] - v) / -alpha).max(0.0), true)
            };
            let better = match leave {
                None => ratio < limit - 1e-12 || (limit.is_infinite() && ratio.is_finite()),
                Some((li, _)) => {
                    if ratio < limit - 1e-12 {
                        true
                    } else if ratio <= limit + 1e-12 {
                        if self.bland {
                            bi < self.basis[li]
                        } else {
                            alpha.abs() > best_alpha
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                limit = ratio.min(limit);
                leave = Some((i, upper));
                best_alpha = alpha.abs();
            }
        }
        if limit == f64::INFINITY {
            return Step::Unbounded;
        }
        if limit <= 1e-12 {
            self.degenerate += 1;
            if self.degenerate >= BLAND_AFTER {
                self.bland = true;
            }
        }
        // move values
        if limit > 0.0 {
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    let bi = self.basis[i];
                    self.val[bi] -= dir * limit * a;
                }
            }
            self.val[j] += dir * limit;
        }
        match leave {
            None => {
                // bound flip
                self.val[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                self.pivots += 1;
            }
            Some((r, upper)) => {
                let bi = self.basis[r];
                self.val[bi] = if upper { self.hi[bi] } else { self.lo[bi] };
                self.pivot(r, j);
            }
        }
        Step::Continue
    }

    /// Rebuild `t`, basic values and reduced costs from the original matrix.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let n = self.ncol;
        // augmented [B | A | rhs']
        let w = m + n + 1;
        let mut aug = vec![0.0; m * w];
        let mut rhs = self.b.clone();
        for j in 0..n {
            if !self.is_basic[j] && self.val[j] != 0.0 {
                for i in 0..m {
                    rhs[i] -= self.a[i * n + j] * self.val[j];
                }
            }
        }
        for i in 0..m {
            for (k, &bk) in self.basis.iter().enumerate() {
                aug[i * w + k] = self.a[i * n + bk];
            }
            aug[i * w + m..i * w + m + n].copy_from_slice(&self.a[i * n..(i + 1) * n]);
            aug[i * w + m + n] = rhs[i];
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = aug[c * w + c].abs();
            for r in c + 1..m {
                let v = aug[r * w + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return false;
            }
            if piv != c {
                for k in 0..w {
                    aug.swap(c * w + k, piv * w + k);
                }
            }
            let p = aug[c * w + c];
            for k in 0..w {
                aug[c * w + k] /= p;
            }
            let prow: Vec<f64> = aug[c * w..(c + 1) * w].to_vec();
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = aug[r * w + c];
                if f != 0.0 {
                    for k in c..w {
                        aug[r * w + k] -= f * prow[k];
                    }
                }
            }
        }
        // row k of the reduced system corresponds to basis position k
        for k in 0..m {
            self.t[k * n..(k + 1) * n].copy_from_slice(&aug[k * w + m..k * w + m + n]);
            self.val[self.basis[k]] = aug[k * w + m + n];
        }
        for (k, &bk) in self.basis.clone().iter().enumerate() {
            for kk in 0..m {
                self.t[kk * n + bk] = if kk == k { 1.0 } else { 0.0 };
            }
        }
        self.compute_d();
        self.since_refactor = 0;
        true
    }

    fn run(&mut self, allowed: &dyn Fn(usize) -> bool, max_pivots: usize) -> LpStatus {
        loop {
            if self.pivots >= max_pivots {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return LpStatus::Numerical;
            }
            match self.step(allowed) {
                Step::Optimal => return LpStatus::Optimal,
                Step::Unbounded => return LpStatus::Unbounded,
                Step::Continue => {}
            }
        }
    }
}

pub(crate) fn solve(p: &LpProblem, plo: &[f64], phi: &[f64], max_pivots: usize) -> LpResult {
    let n = p.n;
    let m = p.rows.len();
    let fail = |status| LpResult {
        status,
        x: vec![0.0; n],
        objective: f64::NAN,
        dual_bound: f64::NEG_INFINITY,
        pivots: 0,
        bland_engaged: false,
    };
    for j in 0..n {
        if plo[j] > phi[j] + FEAS_TOL {
            return fail(LpStatus::Infeasible);
        }
    }
    // initial nonbasic values of structurals
    let mut xs = vec![0.0; n];
    for j in 0..n {
        xs[j] = if plo[j].is_finite() {
            plo[j]
        } else if phi[j].is_finite() {
            phi[j]
        } else {
            0.0
        };
    }
    let mut resid = p.rhs.clone();
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, a) in row {
            resid[i] -= a * xs[j];
        }
    }
    let mut art_rows = Vec::new();
    let mut slack_bounds = Vec::with_capacity(m);
    for i in 0..m {
        let (lo, hi) = match p.senses[i] {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        slack_bounds.push((lo, hi));
        let r = resid[i];
        if r < lo - FEAS_TOL || r > hi + FEAS_TOL {
            art_rows.push(i);
        }
    }
    let na = art_rows.len();
    let ncol = n + m + na;
    let mut a = vec![0.0; m * ncol];
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, v) in row {
            a[i * ncol + j] += v;
        }
        a[i * ncol + n + i] = 1.0;
    }
    let mut lo = plo.to_vec();
    let mut hi = phi.to_vec();
    let mut val = xs.clone();
    for &(l, h) in &slack_bounds {
        lo.push(l);
        hi.push(h);
        val.push(0.0);
    }
    let mut basis = vec![0; m];
    let mut is_basic = vec![false; ncol];
    let mut art_of_row = vec![None; m];
    for (k, &i) in art_rows.iter().enumerate() {
        art_of_row[i] = Some(n + m + k);
    }
    for i in 0..m {
        match art_of_row[i] {
            None => {
                basis[i] = n + i;
                val[n + i] = resid[i];
            }
            Some(_) => {}
        }
    }
    for _ in 0..na {
        lo.push(0.0);
        hi.push(f64::INFINITY);
        val.push(0.0);
    }
    for (k, &i) in art_rows.iter().enumerate() {
        let col = n + m + k;
        let (sl, sh) = slack_bounds[i];
        // slack parked at its nearest bound
        let s = resid[i].clamp(sl, sh);
        val[n + i] = s;
        let r = resid[i] - s;
        let sign = if r >= 0.0 { 1.0 } else { -1.0 };
        a[i * ncol + col] = sign;
        val[col] = r.abs();
        basis[i] = col;
    }
    for &bj in &basis {
        is_basic[bj] = true;
    }
    // tableau = B⁻¹A with B diagonal
    let mut t = a.clone();
    for i in 0..m {
        let coef = a[i * ncol + basis[i]];
        if coef != 1.0 {
            for v in &mut t[i * ncol..(i + 1) * ncol] {
                *v /= coef;
            }
        }
    }
    let mut tab = Tableau {
        m,
        ncol,
        a,
        t,
        b: p.rhs.clone(),
        lo,
        hi,
        val,
        basis,
        is_basic,
        cost: vec![0.0; ncol],
        d: vec![0.0; ncol],
        pivots: 0,
        degenerate: 0,
        bland: false,
        since_refactor: 0,
    };
    let first_art = n + m;
    if na > 0 {
        for k in 0..na {
            tab.cost[first_art + k] = 1.0;
        }
        tab.compute_d();
        let st = tab.run(&|_| true, max_pivots);
        match st {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => return fail(LpStatus::Numerical),
            other => return fail(other),
        }
        let infeas: f64 = (first_art..ncol).map(|j| tab.val[j]).sum();
        let scale = 1.0 + p.rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > 1e-7 * scale {
            let mut r = fail(LpStatus::Infeasible);
            r.pivots = tab.pivots;
            return r;
        }
        // fix artificials at zero and drive basic ones out where possible
        for j in first_art..ncol {
            tab.lo[j] = 0.0;
            tab.hi[j] = 0.0;
            if !tab.is_basic[j] {
                tab.val[j] = 0.0;
            }
        }
        for r in 0..m {
            let bj = tab.basis[r];
            if bj < first_art {
                continue;
            }
            let mut best = None;
            let mut bestv = 1e-7;
            for j in 0..first_art {
                if tab.is_basic[j] {
                    continue;
                }
                let v = tab.at(r, j).abs();
                if v > bestv {
                    bestv = v;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                tab.pivot(r, j);
            }
        }
        for j in first_art..ncol {
            if tab.is_basic[j] {
                tab.val[j] = 0.0;
            }
        }
        tab.cost = vec![0.0; ncol];
    }
    tab.cost[..n].copy_from_slice(&p.cost);
    tab.compute_d();
    let st = tab.run(&|j| j < first_art, max_pivots);
    let status = if st == LpStatus::Optimal && tab.since_refactor > 0 {
        // polish: rebuild once and continue if drift exposed new candidates
        if !tab.refactor() {
            LpStatus::Numerical
        } else {
            tab.run(&|j| j < first_art, max_pivots)
        }
    } else {
        st
    };
    let x: Vec<f64> = tab.val[..n].to_vec();
    let objective = tab.objective();
    let dual_bound = if status == LpStatus::Optimal {
        dual_bound(p, &tab)
    } else {
        f64::NEG_INFINITY
    };
    LpResult {
        status,
        x,
        objective,
        dual_bound,
        pivots: tab.pivots,
        bland_engaged: tab.bland,
    }
}

/// Lagrangian bound `yᵀb + Σ_j min_{l≤x≤u} (c_j − yᵀA_j)·x_j` using row duals
/// read off the slack columns and reduced costs recomputed from the
/// original sparse rows.
fn dual_bound(p: &LpProblem, tab: &Tableau) -> f64 {
    let n = p.n;
    let m = p.rows.len();
    let y: Vec<f64> = (0..m).map(|i| -tab.d[n + i]).collect();
    let mut red = p.cost.clone();
    for (i, row) in p.rows.iter().enumerate() {
        for &(j, a) in row {
            red[j] -= y[i] * a;
        }
    }
    let mut bound: f64 = y.iter().zip(&p.rhs).map(|(a, b)| a * b).sum();
    let term = |d: f64, lo: f64, hi: f64, cur: f64| -> f64 {
        if d.abs() <= 1e-9 {
            d * cur
        } else if d > 0.0 {
            d * lo
        } else {
            d * hi
        }
    };
    for j in 0..n {
        bound += term(red[j], tab.lo[j], tab.hi[j], tab.val[j]);
    }
    for i in 0..m {
        bound += term(-y[i], tab.lo[n + i], tab.hi[n + i], tab.val[n + i]);
    }
    bound
}
