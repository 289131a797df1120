//! Log-barrier interior-point solver for [`ConicProgram`].
//!
//! Path-following with a decreasing barrier weight `mu` (factor-10 schedule
//! starting at 1.0) and a damped Newton inner loop. The Newton system
//! exploits the structure typical of the offload subproblems: the
//! quadratic/SOC constraints couple variables into small independent
//! components, and the only cross-component rows are a handful of linear
//! inequalities, handled as rank-one corrections (Woodbury identity) around
//! the block-diagonal factorization. Infeasible or unknown starting points
//! go through a phase-I slack minimization whose slack variable is kept as a
//! bordered row/column of the same factorization.
//!
//! At the final center the per-constraint multiplier estimates satisfy
//! `lambda_i * s_i = mu` exactly, so the schedule is run down to
//! `mu = tol / (number of log terms)`, which certifies a duality gap and a
//! complementarity residual no larger than `tol`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{AffineExpr, ConicProgram, ConstraintKind};

/// Solver settings. `tol` is the target KKT residual (duality gap bound).
#[derive(Debug, Clone)]
pub struct IpmSettings {
    pub tol: f64,
    pub mu_init: f64,
    pub mu_factor: f64,
    pub max_newton_per_stage: usize,
    pub newton_tol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mu_init: 1.0,
            mu_factor: 10.0,
            max_newton_per_stage: 200,
            newton_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Optimal,
    /// No interior point found; carries the most-violated constraint label.
    Infeasible { constraint: String },
    MaxIterations,
}

#[derive(Debug, Clone, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: KktResiduals,
    /// One multiplier per program constraint (zero for rows dropped in
    /// presolve). Equality rows carry the equality multiplier.
    pub multipliers: Vec<f64>,
    /// Per-variable (lower, upper) bound multipliers.
    pub bound_multipliers: Vec<(f64, f64)>,
    pub newton_iterations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum IpmError {
    #[error("program validation failed: {0}")]
    Invalid(#[from] super::ProgramError),
    #[error("fixed variables violate constraint `{0}`")]
    FixedInfeasible(String),
    #[error("start point violates equality constraint `{0}` and projection failed")]
    EqualityProjection(String),
    #[error("problem has no barrier terms and a nonzero objective (unbounded)")]
    Unbounded,
}

/// Solve `program` to KKT residual `settings.tol`.
///
/// `start` optionally provides a strictly feasible interior point; when it is
/// absent or not strictly feasible, a phase-I slack minimization runs first.
pub fn solve_ipm(
    program: &ConicProgram,
    settings: &IpmSettings,
    start: Option<&[f64]>,
) -> Result<SolveResult, IpmError> {
    program.validate()?;
    let reduced = Reduced::build(program)?;

    if reduced.n == 0 {
        // Everything pinned by bounds; constraints were checked in presolve.
        let x = reduced.expand(&[]);
        let objective = program.objective_value(&x);
        return Ok(SolveResult {
            x,
            objective,
            status: SolveStatus::Optimal,
            residuals: KktResiduals::default(),
            multipliers: vec![0.0; program.constraints.len()],
            bound_multipliers: vec![(0.0, 0.0); program.num_vars()],
            newton_iterations: 0,
        });
    }
    if reduced.log_terms == 0 {
        if reduced.c.iter().all(|&c| c == 0.0) && reduced.eqs.is_empty() {
            let x = reduced.expand(&vec![0.0; reduced.n]);
            let objective = program.objective_value(&x);
            return Ok(SolveResult {
                x,
                objective,
                status: SolveStatus::Optimal,
                residuals: KktResiduals::default(),
                multipliers: vec![0.0; program.constraints.len()],
                bound_multipliers: vec![(0.0, 0.0); program.num_vars()],
                newton_iterations: 0,
            });
        }
        if reduced.eqs.is_empty() {
            return Err(IpmError::Unbounded);
        }
    }

    let mut x0 = match start {
        Some(s) => reduced.restrict(s),
        None => reduced.default_start(),
    };
    reduced.project_equalities(&mut x0)?;

    let mut newton_total = 0usize;
    if !reduced.strictly_feasible(&x0, 1e-10) {
        match reduced.phase_one(&x0, settings, &mut newton_total) {
            PhaseOneOutcome::Feasible(x) => x0 = x,
            PhaseOneOutcome::Infeasible(label) => {
                let x = reduced.expand(&x0);
                let objective = program.objective_value(&x);
                return Ok(SolveResult {
                    x,
                    objective,
                    status: SolveStatus::Infeasible { constraint: label },
                    residuals: KktResiduals::default(),
                    multipliers: vec![0.0; program.constraints.len()],
                    bound_multipliers: vec![(0.0, 0.0); program.num_vars()],
                    newton_iterations: newton_total,
                });
            }
        }
    }

    let (x, mu_final, converged) = reduced.barrier_solve(x0, settings, None, &mut newton_total);
    reduced.package(program, x, mu_final, converged, newton_total)
}

enum PhaseOneOutcome {
    Feasible(Vec<f64>),
    Infeasible(String),
}

/// Inequality-type row in reduced indices.
#[derive(Debug, Clone)]
enum RKind {
    Lin {
        terms: Vec<(usize, f64)>,
        rhs: f64,
    },
    Quad {
        quad: Vec<(usize, f64)>,
        terms: Vec<(usize, f64)>,
        rhs: f64,
    },
    Soc {
        rows: Vec<(Vec<(usize, f64)>, f64)>,
        bound: (Vec<(usize, f64)>, f64),
    },
}

#[derive(Debug, Clone)]
struct RCon {
    kind: RKind,
    orig: usize,
    label: String,
    /// Linear row whose support spans several components.
    coupling: bool,
    /// Component owning this row (valid when `!coupling`).
    comp: usize,
}

#[derive(Debug, Clone)]
struct REq {
    terms: Vec<(usize, f64)>,
    rhs: f64,
    orig: usize,
    label: String,
}

#[derive(Clone)]
struct Reduced {
    n: usize,
    c: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cons: Vec<RCon>,
    eqs: Vec<REq>,
    /// var -> component, component -> member vars, var -> local index
    comp_of: Vec<usize>,
    comp_vars: Vec<Vec<usize>>,
    local_of: Vec<usize>,
    /// map reduced var -> original var, and fixed values for the rest
    to_orig: Vec<usize>,
    fixed: Vec<Option<f64>>,
    log_terms: usize,
    orig_n: usize,
}

impl Reduced {
    fn build(program: &ConicProgram) -> Result<Self, IpmError> {
        let orig_n = program.num_vars();
        let mut fixed: Vec<Option<f64>> = vec![None; orig_n];
        for i in 0..orig_n {
            let (lo, hi) = program.bounds(i);
            if lo == hi {
                fixed[i] = Some(lo);
            }
        }
        // Equality rows that reduce to a single free variable pin it; repeat
        // until stable. Full elimination avoids the ill-conditioned Schur
        // path for these rows near the cone boundary.
        loop {
            let mut changed = false;
            for con in &program.constraints {
                if let ConstraintKind::LinearEq { terms, rhs } = &con.kind {
                    let mut free: Option<(usize, f64)> = None;
                    let mut shift = 0.0;
                    let mut multi = false;
                    for &(i, a) in terms {
                        match fixed[i] {
                            Some(v) => shift += a * v,
                            None => {
                                if free.replace((i, a)).is_some() {
                                    multi = true;
                                }
                            }
                        }
                    }
                    if multi {
                        continue;
                    }
                    match free {
                        Some((i, a)) if a != 0.0 => {
                            let v = (rhs - shift) / a;
                            let (lo, hi) = program.bounds(i);
                            if v < lo - 1e-9 || v > hi + 1e-9 {
                                return Err(IpmError::FixedInfeasible(con.label.clone()));
                            }
                            fixed[i] = Some(v);
                            changed = true;
                        }
                        _ => {}
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut to_orig = Vec::new();
        let mut map = vec![usize::MAX; orig_n];
        for i in 0..orig_n {
            if fixed[i].is_none() {
                map[i] = to_orig.len();
                to_orig.push(i);
            }
        }
        let n = to_orig.len();
        let c: Vec<f64> = to_orig.iter().map(|&i| program.objective()[i]).collect();
        let lower: Vec<f64> = to_orig.iter().map(|&i| program.bounds(i).0).collect();
        let upper: Vec<f64> = to_orig.iter().map(|&i| program.bounds(i).1).collect();

        // Substitute fixed variables into every row; rows left without free
        // variables must hold as constants.
        let sub_terms = |terms: &[(usize, f64)]| -> (Vec<(usize, f64)>, f64) {
            let mut out = Vec::with_capacity(terms.len());
            let mut shift = 0.0;
            for &(i, a) in terms {
                match fixed[i] {
                    Some(v) => shift += a * v,
                    None => out.push((map[i], a)),
                }
            }
            (out, shift)
        };

        let mut cons = Vec::new();
        let mut eqs = Vec::new();
        for (ci, con) in program.constraints.iter().enumerate() {
            match &con.kind {
                ConstraintKind::LinearIneq { terms, rhs } => {
                    let (t, shift) = sub_terms(terms);
                    let rhs = rhs - shift;
                    if t.is_empty() {
                        if rhs < -1e-9 {
                            return Err(IpmError::FixedInfeasible(con.label.clone()));
                        }
                        continue;
                    }
                    cons.push(RCon {
                        kind: RKind::Lin { terms: t, rhs },
                        orig: ci,
                        label: con.label.clone(),
                        coupling: false,
                        comp: 0,
                    });
                }
                ConstraintKind::LinearEq { terms, rhs } => {
                    let (t, shift) = sub_terms(terms);
                    let rhs = rhs - shift;
                    if t.is_empty() {
                        if rhs.abs() > 1e-9 {
                            return Err(IpmError::FixedInfeasible(con.label.clone()));
                        }
                        continue;
                    }
                    eqs.push(REq {
                        terms: t,
                        rhs,
                        orig: ci,
                        label: con.label.clone(),
                    });
                }
                ConstraintKind::Quadratic { quad, terms, rhs } => {
                    let (t, shift) = sub_terms(terms);
                    let mut rhs = rhs - shift;
                    let mut q = Vec::with_capacity(quad.len());
                    for &(i, qc) in quad {
                        match fixed[i] {
                            Some(v) => rhs -= qc * v * v,
                            None => q.push((map[i], qc)),
                        }
                    }
                    if q.is_empty() && t.is_empty() {
                        if rhs < -1e-9 {
                            return Err(IpmError::FixedInfeasible(con.label.clone()));
                        }
                        continue;
                    }
                    cons.push(RCon {
                        kind: RKind::Quad {
                            quad: q,
                            terms: t,
                            rhs,
                        },
                        orig: ci,
                        label: con.label.clone(),
                        coupling: false,
                        comp: 0,
                    });
                }
                ConstraintKind::SecondOrderCone { rows, bound } => {
                    let sub_expr = |e: &AffineExpr| -> (Vec<(usize, f64)>, f64) {
                        let (t, shift) = sub_terms(&e.terms);
                        (t, e.constant + shift)
                    };
                    let rrows: Vec<_> = rows.iter().map(sub_expr).collect();
                    let rbound = sub_expr(bound);
                    if rbound.0.is_empty() && rrows.iter().all(|r| r.0.is_empty()) {
                        let norm: f64 = rrows.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt();
                        if norm > rbound.1 + 1e-9 {
                            return Err(IpmError::FixedInfeasible(con.label.clone()));
                        }
                        continue;
                    }
                    cons.push(RCon {
                        kind: RKind::Soc {
                            rows: rrows,
                            bound: rbound,
                        },
                        orig: ci,
                        label: con.label.clone(),
                        coupling: false,
                        comp: 0,
                    });
                }
            }
        }

        // Union-find over quadratic and SOC supports; linear rows whose
        // support stays inside one class are absorbed there, the rest become
        // rank-one coupling rows.
        let mut uf = UnionFind::new(n);
        for con in &cons {
            match &con.kind {
                RKind::Quad { quad, terms, .. } => {
                    let mut it = quad.iter().map(|&(i, _)| i).chain(terms.iter().map(|&(i, _)| i));
                    if let Some(first) = it.next() {
                        for i in it {
                            uf.union(first, i);
                        }
                    }
                }
                RKind::Soc { rows, bound } => {
                    let mut it = rows
                        .iter()
                        .flat_map(|r| r.0.iter())
                        .chain(bound.0.iter())
                        .map(|&(i, _)| i);
                    if let Some(first) = it.next() {
                        for i in it {
                            uf.union(first, i);
                        }
                    }
                }
                RKind::Lin { .. } => {}
            }
        }
        let mut comp_of = vec![usize::MAX; n];
        let mut comp_vars: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            let root = uf.find(v);
            if comp_of[root] == usize::MAX {
                comp_of[root] = comp_vars.len();
                comp_vars.push(Vec::new());
            }
            comp_of[v] = comp_of[root];
            comp_vars[comp_of[v]].push(v);
        }
        let mut local_of = vec![0usize; n];
        for vars in &comp_vars {
            for (k, &v) in vars.iter().enumerate() {
                local_of[v] = k;
            }
        }
        for con in &mut cons {
            let support: Vec<usize> = match &con.kind {
                RKind::Lin { terms, .. } => terms.iter().map(|&(i, _)| i).collect(),
                RKind::Quad { quad, terms, .. } => quad
                    .iter()
                    .map(|&(i, _)| i)
                    .chain(terms.iter().map(|&(i, _)| i))
                    .collect(),
                RKind::Soc { rows, bound } => rows
                    .iter()
                    .flat_map(|r| r.0.iter())
                    .chain(bound.0.iter())
                    .map(|&(i, _)| i)
                    .collect(),
            };
            let comp = comp_of[support[0]];
            let same = support.iter().all(|&i| comp_of[i] == comp);
            con.comp = comp;
            con.coupling = !same;
            debug_assert!(same || matches!(con.kind, RKind::Lin { .. }));
        }

        let mut log_terms = cons.len();
        for i in 0..n {
            if lower[i].is_finite() {
                log_terms += 1;
            }
            if upper[i].is_finite() {
                log_terms += 1;
            }
        }

        Ok(Self {
            n,
            c,
            lower,
            upper,
            cons,
            eqs,
            comp_of,
            comp_vars,
            local_of,
            to_orig,
            fixed,
            log_terms,
            orig_n,
        })
    }

    fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.orig_n];
        for (i, f) in self.fixed.iter().enumerate() {
            if let Some(v) = f {
                out[i] = *v;
            }
        }
        for (r, &o) in self.to_orig.iter().enumerate() {
            out[o] = x[r];
        }
        out
    }

    fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.to_orig.iter().map(|&o| full[o]).collect()
    }

    fn default_start(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo + 1.0,
                    (false, true) => hi - 1.0,
                    (false, false) => 0.0,
                }
            })
            .collect()
    }

    fn project_equalities(&self, x: &mut [f64]) -> Result<(), IpmError> {
        if self.eqs.is_empty() {
            return Ok(());
        }
        let k = self.eqs.len();
        let mut ee = DMatrix::zeros(k, k);
        let mut resid = DVector::zeros(k);
        for (a, ea) in self.eqs.iter().enumerate() {
            resid[a] = ea.rhs - ea.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>();
            for (b, eb) in self.eqs.iter().enumerate() {
                let mut dot = 0.0;
                for &(i, ca) in &ea.terms {
                    for &(j, cb) in &eb.terms {
                        if i == j {
                            dot += ca * cb;
                        }
                    }
                }
                ee[(a, b)] = dot;
            }
        }
        let chol = Cholesky::new(ee).ok_or_else(|| {
            IpmError::EqualityProjection(
                self.eqs.first().map(|e| e.label.clone()).unwrap_or_default(),
            )
        })?;
        let w = chol.solve(&resid);
        for (a, ea) in self.eqs.iter().enumerate() {
            for &(i, c) in &ea.terms {
                x[i] += c * w[a];
            }
        }
        Ok(())
    }

    fn violation(&self, con: &RCon, x: &[f64]) -> f64 {
        match &con.kind {
            RKind::Lin { terms, rhs } => terms.iter().fold(-rhs, |a, &(i, c)| a + c * x[i]),
            RKind::Quad { quad, terms, rhs } => {
                let q: f64 = quad.iter().map(|&(i, c)| c * x[i] * x[i]).sum();
                terms.iter().fold(q - rhs, |a, &(i, c)| a + c * x[i])
            }
            RKind::Soc { rows, bound } => {
                let norm: f64 = rows
                    .iter()
                    .map(|(t, k)| {
                        let v = t.iter().fold(*k, |a, &(i, c)| a + c * x[i]);
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                norm - bound.0.iter().fold(bound.1, |a, &(i, c)| a + c * x[i])
            }
        }
    }

    fn strictly_feasible(&self, x: &[f64], margin: f64) -> bool {
        for i in 0..self.n {
            if x[i] <= self.lower[i] + margin || x[i] >= self.upper[i] - margin {
                if self.lower[i].is_finite() && x[i] <= self.lower[i] + margin {
                    return false;
                }
                if self.upper[i].is_finite() && x[i] >= self.upper[i] - margin {
                    return false;
                }
            }
        }
        self.cons.iter().all(|c| self.violation(c, x) < -margin)
    }

    /// Minimize the maximum constraint violation; bounds stay hard.
    fn phase_one(
        &self,
        x0: &[f64],
        settings: &IpmSettings,
        newton_total: &mut usize,
    ) -> PhaseOneOutcome {
        // Pull the start strictly inside its bounds first.
        let mut x = x0.to_vec();
        for i in 0..self.n {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if lo.is_finite() && hi.is_finite() {
                let pad = 1e-6 * (hi - lo);
                x[i] = x[i].clamp(lo + pad, hi - pad);
            } else if lo.is_finite() {
                x[i] = x[i].max(lo + 1e-6);
            } else if hi.is_finite() {
                x[i] = x[i].min(hi - 1e-6);
            }
        }
        let worst = self
            .cons
            .iter()
            .map(|c| self.violation(c, &x))
            .fold(f64::NEG_INFINITY, f64::max);
        let s0 = worst.max(0.0) + 1.0;
        let relaxed = self.with_slack(&x);
        let mut xs = x;
        xs.push(s0);
        let p1_settings = IpmSettings {
            tol: 1e-7,
            ..settings.clone()
        };
        let (xs, _, _) = relaxed.barrier_solve(xs, &p1_settings, Some(self), newton_total);
        let x = xs[..self.n].to_vec();
        if self.strictly_feasible(&x, 1e-10) {
            PhaseOneOutcome::Feasible(x)
        } else {
            let mut worst_label = String::new();
            let mut worst_v = f64::NEG_INFINITY;
            for c in &self.cons {
                let v = self.violation(c, &x);
                if v > worst_v {
                    worst_v = v;
                    worst_label = c.label.clone();
                }
            }
            PhaseOneOutcome::Infeasible(worst_label)
        }
    }

    /// Clone with an extra slack variable relaxing every inequality row.
    ///
    /// Variables without a finite bound get a wide synthetic box around the
    /// start point; without one the relaxed barrier has directions where it
    /// is unbounded below (a free variable can open a row's slack forever).
    fn with_slack(&self, x0: &[f64]) -> Reduced {
        let s = self.n;
        let mut cons = self.cons.clone();
        for con in &mut cons {
            match &mut con.kind {
                RKind::Lin { terms, .. } => terms.push((s, -1.0)),
                RKind::Quad { terms, .. } => terms.push((s, -1.0)),
                RKind::Soc { bound, .. } => bound.0.push((s, 1.0)),
            }
        }
        let mut c = vec![0.0; self.n + 1];
        c[s] = 1.0;
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for i in 0..self.n {
            let radius = 1e4 * (1.0 + x0[i].abs());
            if !lower[i].is_finite() {
                lower[i] = x0[i] - radius;
            }
            if !upper[i].is_finite() {
                upper[i] = x0[i] + radius;
            }
        }
        lower.push(f64::NEG_INFINITY);
        upper.push(f64::INFINITY);
        // The slack joins no component: it is handled as a bordered column.
        let mut comp_of = self.comp_of.clone();
        comp_of.push(usize::MAX);
        let mut local_of = self.local_of.clone();
        local_of.push(usize::MAX);
        let log_terms = cons.len()
            + lower.iter().filter(|v| v.is_finite()).count()
            + upper.iter().filter(|v| v.is_finite()).count();
        Reduced {
            n: self.n + 1,
            c,
            lower,
            upper,
            cons,
            eqs: self.eqs.clone(),
            comp_of,
            comp_vars: self.comp_vars.clone(),
            local_of,
            to_orig: Vec::new(),
            fixed: Vec::new(),
            log_terms,
            orig_n: 0,
        }
    }

    /// Single-component view of the same problem: every constraint is
    /// assembled into one dense Hessian. Used as a fallback when the
    /// structured Woodbury solve loses descent to cancellation (tight
    /// coupling rows meeting tight component rows near convergence).
    fn merged(&self) -> Reduced {
        let mut r = self.clone();
        r.comp_of = vec![0; r.n];
        r.comp_vars = vec![(0..r.n).collect()];
        r.local_of = (0..r.n).collect();
        for con in &mut r.cons {
            con.coupling = false;
            con.comp = 0;
        }
        r
    }

    fn has_structure(&self) -> bool {
        self.comp_vars.len() > 1 || self.border().is_some() || self.cons.iter().any(|c| c.coupling)
    }

    /// Border variable index, if this instance carries a phase-I slack.
    fn border(&self) -> Option<usize> {
        if self.comp_of.len() == self.n && self.comp_of.last() == Some(&usize::MAX) {
            Some(self.n - 1)
        } else {
            None
        }
    }

    /// Barrier value at `x`, or +inf outside the domain.
    fn barrier_value(&self, x: &[f64], inv_mu: f64) -> f64 {
        let mut phi = inv_mu * self.c.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        for i in 0..self.n {
            if self.lower[i].is_finite() {
                let s = x[i] - self.lower[i];
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                phi -= s.ln();
            }
            if self.upper[i].is_finite() {
                let s = self.upper[i] - x[i];
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                phi -= s.ln();
            }
        }
        for con in &self.cons {
            match &con.kind {
                RKind::Lin { .. } | RKind::Quad { .. } => {
                    let s = -self.violation(con, x);
                    if s <= 0.0 {
                        return f64::INFINITY;
                    }
                    phi -= s.ln();
                }
                RKind::Soc { rows, bound } => {
                    let r = bound.0.iter().fold(bound.1, |a, &(i, c)| a + c * x[i]);
                    if r <= 0.0 {
                        return f64::INFINITY;
                    }
                    let w2: f64 = rows
                        .iter()
                        .map(|(t, k)| {
                            let v = t.iter().fold(*k, |a, &(i, c)| a + c * x[i]);
                            v * v
                        })
                        .sum();
                    let u = r * r - w2;
                    if u <= 0.0 {
                        return f64::INFINITY;
                    }
                    phi -= u.ln();
                }
            }
        }
        phi
    }

    /// Largest step along `d` keeping every barrier argument positive.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        // ratio: constraint num - alpha*den > 0 with num > 0
        fn ratio(num: f64, den: f64) -> f64 {
            if den > 0.0 {
                num / den
            } else {
                f64::INFINITY
            }
        }
        let mut alpha = f64::INFINITY;
        for i in 0..self.n {
            if self.lower[i].is_finite() {
                alpha = alpha.min(ratio(x[i] - self.lower[i], -d[i]));
            }
            if self.upper[i].is_finite() {
                alpha = alpha.min(ratio(self.upper[i] - x[i], d[i]));
            }
        }
        for con in &self.cons {
            match &con.kind {
                RKind::Lin { terms, rhs } => {
                    let s = -terms.iter().fold(-rhs, |a, &(i, c)| a + c * x[i]);
                    let ad: f64 = terms.iter().map(|&(i, c)| c * d[i]).sum();
                    alpha = alpha.min(ratio(s, ad));
                }
                RKind::Quad { quad, terms, rhs: _ } => {
                    // s(alpha) = s0 - g1*alpha - g2*alpha^2, g2 >= 0
                    let s0 = -self.violation(con, x);
                    let g1: f64 = quad
                        .iter()
                        .map(|&(i, q)| 2.0 * q * x[i] * d[i])
                        .chain(terms.iter().map(|&(i, c)| c * d[i]))
                        .sum();
                    let g2: f64 = quad.iter().map(|&(i, q)| q * d[i] * d[i]).sum();
                    alpha = alpha.min(smallest_positive_root(-g2, -g1, s0));
                }
                RKind::Soc { rows, bound } => {
                    let r0 = bound.0.iter().fold(bound.1, |a, &(i, c)| a + c * x[i]);
                    let dr: f64 = bound.0.iter().map(|&(i, c)| c * d[i]).sum();
                    // u(alpha) quadratic; also keep r(alpha) > 0
                    alpha = alpha.min(ratio(r0, -dr));
                    let mut u0 = r0 * r0;
                    let mut u1 = 2.0 * r0 * dr;
                    let mut u2 = dr * dr;
                    for (t, k) in rows {
                        let w = t.iter().fold(*k, |a, &(i, c)| a + c * x[i]);
                        let dw: f64 = t.iter().map(|&(i, c)| c * d[i]).sum();
                        u0 -= w * w;
                        u1 -= 2.0 * w * dw;
                        u2 -= dw * dw;
                    }
                    alpha = alpha.min(smallest_positive_root(u2, u1, u0));
                }
            }
        }
        alpha
    }

    /// One centering run over the full mu schedule.
    /// Returns (x, final mu, converged).
    fn barrier_solve(
        &self,
        mut x: Vec<f64>,
        settings: &IpmSettings,
        early_exit_feasible: Option<&Reduced>,
        newton_total: &mut usize,
    ) -> (Vec<f64>, f64, bool) {
        let mu_target = (settings.tol / self.log_terms.max(1) as f64).max(1e-13);
        // An initial barrier weight below the objective scale of the start
        // point makes the first centering a long damped-Newton march; lift
        // it so the schedule begins near the analytic center instead.
        let obj0: f64 = self.c.iter().zip(&x).map(|(c, v)| c * v).sum();
        let mut mu = if obj0.is_finite() {
            settings.mu_init.max(obj0.abs())
        } else {
            settings.mu_init
        };
        let mut converged = true;
        loop {
            let inv_mu = 1.0 / mu;
            let mut stage_ok = false;
            for _ in 0..settings.max_newton_per_stage {
                *newton_total += 1;
                let step = self.newton_direction(&x, inv_mu).or_else(|| {
                    if self.has_structure() {
                        if std::env::var("IPM_TRACE").is_ok() {
                            eprintln!("mu={:.3e} dense fallback", mu);
                        }
                        self.merged().newton_direction(&x, inv_mu)
                    } else {
                        None
                    }
                });
                let Some((d, decrement2)) = step else {
                    if std::env::var("IPM_TRACE").is_ok() {
                        eprintln!("mu={:.3e} newton_direction=None", mu);
                    }
                    break;
                };
                if decrement2 * 0.5 <= settings.newton_tol {
                    stage_ok = true;
                    break;
                }
                let amax = 0.99 * self.max_step(&x, &d);
                let mut alpha = amax.min(1.0);
                let phi0 = self.barrier_value(&x, inv_mu);
                let slope: f64 = {
                    // grad^T d = -decrement2
                    -decrement2
                };
                let mut accepted = false;
                for _ in 0..60 {
                    let xt: Vec<f64> = x.iter().zip(&d).map(|(v, dv)| v + alpha * dv).collect();
                    let phit = self.barrier_value(&xt, inv_mu);
                    if phit.is_finite() && phit <= phi0 + 0.01 * alpha * slope {
                        x = xt;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if std::env::var("IPM_TRACE").is_ok() {
                    eprintln!(
                        "mu={:.3e} dec2={:.3e} amax={:.3e} alpha={:.3e} phi0={:.6e} accepted={}",
                        mu, decrement2, amax, alpha, phi0, accepted
                    );
                }
                if !accepted {
                    break;
                }
                if let Some(orig) = early_exit_feasible {
                    // Leave phase I only with a comfortable margin; a point
                    // hugging the boundary makes a poor phase-II start.
                    if orig.strictly_feasible(&x[..orig.n], 1e-4) {
                        return (x, mu, true);
                    }
                }
            }
            if !stage_ok {
                // Newton stalled; residuals at this mu are what we report.
                converged = mu <= mu_target * settings.mu_factor;
                break;
            }
            if mu <= mu_target {
                break;
            }
            mu = (mu / settings.mu_factor).max(mu_target);
        }
        (x, mu, converged)
    }

    /// Assemble and solve the Newton system; returns (direction, decrement^2).
    fn newton_direction(&self, x: &[f64], inv_mu: f64) -> Option<(Vec<f64>, f64)> {
        let n = self.n;
        let border = self.border();
        let ncomp = self.comp_vars.len();

        let mut grad: Vec<f64> = self.c.iter().map(|&c| c * inv_mu).collect();
        let mut comp_h: Vec<DMatrix<f64>> = self
            .comp_vars
            .iter()
            .map(|vars| DMatrix::zeros(vars.len(), vars.len()))
            .collect();
        let mut border_col: Vec<f64> = vec![0.0; n]; // H[:, s] for comp vars
        let mut border_diag = 0.0;

        // Bound barriers: diagonal.
        for i in 0..n {
            let mut diag = 0.0;
            if self.lower[i].is_finite() {
                let s = x[i] - self.lower[i];
                grad[i] -= 1.0 / s;
                diag += 1.0 / (s * s);
            }
            if self.upper[i].is_finite() {
                let s = self.upper[i] - x[i];
                grad[i] += 1.0 / s;
                diag += 1.0 / (s * s);
            }
            if Some(i) == border {
                border_diag += diag;
            } else if diag != 0.0 {
                let c = self.comp_of[i];
                let l = self.local_of[i];
                comp_h[c][(l, l)] += diag;
            }
        }

        // Scatter a dense-in-support rank-one `w * g g^T` into the component
        // Hessian, the border column, and the border diagonal.
        let add_outer = |comp_h: &mut Vec<DMatrix<f64>>,
                             border_col: &mut Vec<f64>,
                             border_diag: &mut f64,
                             support: &[usize],
                             g: &[f64],
                             w: f64| {
            for (a, &ia) in support.iter().enumerate() {
                if Some(ia) == border {
                    *border_diag += w * g[a] * g[a];
                    for (b, &ib) in support.iter().enumerate() {
                        if Some(ib) != border {
                            border_col[ib] += w * g[a] * g[b];
                        }
                    }
                } else {
                    let ca = self.comp_of[ia];
                    let la = self.local_of[ia];
                    for (b, &ib) in support.iter().enumerate() {
                        if Some(ib) == border {
                            continue;
                        }
                        debug_assert_eq!(self.comp_of[ib], ca);
                        comp_h[ca][(la, self.local_of[ib])] += w * g[a] * g[b];
                    }
                }
            }
        };

        struct WoodRow {
            terms: Vec<(usize, f64)>,
            sigma: f64,
        }
        let mut wood: Vec<WoodRow> = Vec::new();

        for con in &self.cons {
            match &con.kind {
                RKind::Lin { terms, .. } => {
                    let s = -self.violation(con, x);
                    if s <= 0.0 {
                        return None;
                    }
                    for &(i, a) in terms {
                        grad[i] += a / s;
                    }
                    if con.coupling {
                        wood.push(WoodRow {
                            terms: terms.clone(),
                            sigma: 1.0 / (s * s),
                        });
                    } else {
                        let support: Vec<usize> = terms.iter().map(|&(i, _)| i).collect();
                        let g: Vec<f64> = terms.iter().map(|&(_, a)| a).collect();
                        add_outer(
                            &mut comp_h,
                            &mut border_col,
                            &mut border_diag,
                            &support,
                            &g,
                            1.0 / (s * s),
                        );
                    }
                }
                RKind::Quad { quad, terms, .. } => {
                    let s = -self.violation(con, x);
                    if s <= 0.0 {
                        return None;
                    }
                    let mut support: Vec<usize> = Vec::new();
                    let mut g: Vec<f64> = Vec::new();
                    let mut pos = std::collections::BTreeMap::new();
                    let mut push = |i: usize, val: f64, support: &mut Vec<usize>, g: &mut Vec<f64>| {
                        let e = *pos.entry(i).or_insert_with(|| {
                            support.push(i);
                            g.push(0.0);
                            support.len() - 1
                        });
                        g[e] += val;
                    };
                    for &(i, q) in quad {
                        push(i, 2.0 * q * x[i], &mut support, &mut g);
                    }
                    for &(i, a) in terms {
                        push(i, a, &mut support, &mut g);
                    }
                    for (k, &i) in support.iter().enumerate() {
                        grad[i] += g[k] / s;
                    }
                    add_outer(
                        &mut comp_h,
                        &mut border_col,
                        &mut border_diag,
                        &support,
                        &g,
                        1.0 / (s * s),
                    );
                    // curvature term 2q/s on the diagonal
                    for &(i, q) in quad {
                        if Some(i) == border {
                            border_diag += 2.0 * q / s;
                        } else {
                            let c = self.comp_of[i];
                            let l = self.local_of[i];
                            comp_h[c][(l, l)] += 2.0 * q / s;
                        }
                    }
                }
                RKind::Soc { rows, bound } => {
                    let r = bound.0.iter().fold(bound.1, |a, &(i, c)| a + c * x[i]);
                    let mut u = r * r;
                    let mut wvals = Vec::with_capacity(rows.len());
                    for (t, k) in rows {
                        let w = t.iter().fold(*k, |a, &(i, c)| a + c * x[i]);
                        u -= w * w;
                        wvals.push(w);
                    }
                    if u <= 0.0 || r <= 0.0 {
                        return None;
                    }
                    // support union, dense gradients per affine piece
                    let mut support: Vec<usize> = Vec::new();
                    let mut pos = std::collections::BTreeMap::new();
                    for t in rows.iter().map(|(t, _)| t).chain(std::iter::once(&bound.0)) {
                        for &(i, _) in t {
                            pos.entry(i).or_insert_with(|| {
                                support.push(i);
                                support.len() - 1
                            });
                        }
                    }
                    let dense = |t: &[(usize, f64)]| -> Vec<f64> {
                        let mut v = vec![0.0; support.len()];
                        for &(i, c) in t {
                            v[pos[&i]] += c;
                        }
                        v
                    };
                    let rg = dense(&bound.0);
                    let mut du: Vec<f64> = rg.iter().map(|&v| 2.0 * r * v).collect();
                    for ((t, _), &w) in rows.iter().zip(&wvals) {
                        let wg = dense(t);
                        for (a, &v) in wg.iter().enumerate() {
                            du[a] -= 2.0 * w * v;
                        }
                        // +(2/u) wg wg^T
                        add_outer(
                            &mut comp_h,
                            &mut border_col,
                            &mut border_diag,
                            &support,
                            &wg,
                            2.0 / u,
                        );
                    }
                    // gradient -= du/u  => grad of barrier is -du/u
                    for (a, &i) in support.iter().enumerate() {
                        grad[i] -= du[a] / u;
                    }
                    // + du du^T / u^2
                    add_outer(
                        &mut comp_h,
                        &mut border_col,
                        &mut border_diag,
                        &support,
                        &du,
                        1.0 / (u * u),
                    );
                    // -(2/u) rg rg^T
                    add_outer(
                        &mut comp_h,
                        &mut border_col,
                        &mut border_diag,
                        &support,
                        &rg,
                        -2.0 / u,
                    );
                }
            }
        }

        // Factor the block diagonal (ridge fallback for roundoff).
        let mut chols: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(ncomp);
        for h in comp_h.into_iter() {
            let Some(c) = factor_with_ridge(h) else {
                if std::env::var("IPM_TRACE").is_ok() {
                    eprintln!("factor_with_ridge failed");
                }
                return None;
            };
            chols.push(c);
        }

        let solve_blockdiag = |r: &[f64], chols: &[Cholesky<f64, Dyn>]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (ci, vars) in self.comp_vars.iter().enumerate() {
                let mut rhs = DVector::zeros(vars.len());
                for (l, &v) in vars.iter().enumerate() {
                    rhs[l] = r[v];
                }
                let sol = chols[ci].solve(&rhs);
                for (l, &v) in vars.iter().enumerate() {
                    out[v] = sol[l];
                }
            }
            out
        };

        // apply B^{-1} where B = blockdiag (+ border row/col if present)
        let dinv_border = border.map(|_| solve_blockdiag(&border_col, &chols));
        let border_schur = match (&dinv_border, border) {
            (Some(z), Some(_)) => {
                let corner = border_diag
                    - border_col
                        .iter()
                        .zip(z.iter())
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                if corner <= 0.0 {
                    return None;
                }
                corner
            }
            _ => 0.0,
        };
        let apply_binv = |r: &[f64]| -> Vec<f64> {
            match border {
                None => solve_blockdiag(r, &chols),
                Some(s) => {
                    let y = solve_blockdiag(r, &chols);
                    let z = dinv_border.as_ref().unwrap();
                    let num = r[s]
                        - border_col
                            .iter()
                            .zip(y.iter())
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    let ds = num / border_schur;
                    let mut out: Vec<f64> = y
                        .iter()
                        .zip(z.iter())
                        .map(|(yi, zi)| yi - ds * zi)
                        .collect();
                    out[s] = ds;
                    out
                }
            }
        };

        // Woodbury correction.
        let kw = wood.len();
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let apply_hinv = |r: &[f64]| -> Vec<f64> {
            if kw == 0 {
                return apply_binv(r);
            }
            let z = apply_binv(r);
            // W_k = B^{-1} a_k
            let wcols: Vec<Vec<f64>> = wood
                .iter()
                .map(|row| {
                    let mut a = vec![0.0; n];
                    for &(i, c) in &row.terms {
                        a[i] = c;
                    }
                    apply_binv(&a)
                })
                .collect();
            let mut cap = DMatrix::zeros(kw, kw);
            for (a, ra) in wood.iter().enumerate() {
                for b in 0..kw {
                    let mut dot = 0.0;
                    for &(i, c) in &ra.terms {
                        dot += c * wcols[b][i];
                    }
                    cap[(a, b)] = dot;
                }
                cap[(a, a)] += 1.0 / ra.sigma;
            }
            let rhs = DVector::from_iterator(
                kw,
                wood.iter().map(|row| {
                    row.terms.iter().map(|&(i, c)| c * z[i]).sum::<f64>()
                }),
            );
            let Some(capchol) = Cholesky::new(cap) else {
                return z;
            };
            let t = capchol.solve(&rhs);
            let mut out = z;
            for (k, col) in wcols.iter().enumerate() {
                for i in 0..n {
                    out[i] -= t[k] * col[i];
                }
            }
            out
        };

        let d = if self.eqs.is_empty() {
            apply_hinv(&neg_grad)
        } else {
            let hg = apply_hinv(&neg_grad);
            let k = self.eqs.len();
            let he: Vec<Vec<f64>> = self
                .eqs
                .iter()
                .map(|e| {
                    let mut a = vec![0.0; n];
                    for &(i, c) in &e.terms {
                        a[i] = c;
                    }
                    apply_hinv(&a)
                })
                .collect();
            let mut schur = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            for (a, ea) in self.eqs.iter().enumerate() {
                rhs[a] = ea.terms.iter().map(|&(i, c)| c * hg[i]).sum::<f64>();
                for b in 0..k {
                    schur[(a, b)] = ea.terms.iter().map(|&(i, c)| c * he[b][i]).sum::<f64>();
                }
            }
            let Some(schur_chol) = Cholesky::new(schur) else {
                if std::env::var("IPM_TRACE").is_ok() {
                    eprintln!("equality schur factorization failed");
                }
                return None;
            };
            let nu = schur_chol.solve(&rhs);
            let mut d = hg;
            for (b, col) in he.iter().enumerate() {
                for i in 0..n {
                    d[i] -= nu[b] * col[i];
                }
            }
            d
        };

        let decrement2: f64 = d.iter().zip(&grad).map(|(di, gi)| -di * gi).sum();
        if !decrement2.is_finite() {
            return None;
        }
        if decrement2 < 0.0 {
            // Roundoff at a machine-precision center comes out slightly
            // negative; a genuinely indefinite system is a failure.
            let gnorm: f64 = grad.iter().map(|g| g * g).sum();
            let dnorm: f64 = d.iter().map(|v| v * v).sum();
            if decrement2.abs() <= 1e-10 * (1.0 + gnorm.sqrt() * dnorm.sqrt()) {
                return Some((d, 0.0));
            }
            if std::env::var("IPM_TRACE").is_ok() {
                eprintln!("bad decrement {decrement2:e}");
            }
            return None;
        }
        Some((d, decrement2))
    }

    /// Extract multipliers and residuals at the final center and assemble the
    /// public result.
    fn package(
        &self,
        program: &ConicProgram,
        x: Vec<f64>,
        mu: f64,
        converged: bool,
        newton_iterations: usize,
    ) -> Result<SolveResult, IpmError> {
        let mut multipliers = vec![0.0; program.constraints.len()];
        let mut complementarity: f64 = 0.0;
        let mut primal: f64 = 0.0;
        // Lagrangian gradient in original objective scale.
        let mut lagr: Vec<f64> = self.c.clone();

        for con in &self.cons {
            let v = self.violation(con, &x);
            primal = primal.max(v);
            match &con.kind {
                RKind::Lin { terms, .. } => {
                    let s = -v;
                    let lam = mu / s;
                    multipliers[con.orig] = lam;
                    complementarity = complementarity.max(lam * s);
                    for &(i, a) in terms {
                        lagr[i] += lam * a;
                    }
                }
                RKind::Quad { quad, terms, .. } => {
                    let s = -v;
                    let lam = mu / s;
                    multipliers[con.orig] = lam;
                    complementarity = complementarity.max(lam * s);
                    for &(i, q) in quad {
                        lagr[i] += lam * 2.0 * q * x[i];
                    }
                    for &(i, a) in terms {
                        lagr[i] += lam * a;
                    }
                }
                RKind::Soc { rows, bound } => {
                    let r = bound.0.iter().fold(bound.1, |a, &(i, c)| a + c * x[i]);
                    let mut u = r * r;
                    let mut wvals = Vec::with_capacity(rows.len());
                    for (t, k) in rows {
                        let w = t.iter().fold(*k, |a, &(i, c)| a + c * x[i]);
                        u -= w * w;
                        wvals.push(w);
                    }
                    let lam = 2.0 * r * mu / u;
                    multipliers[con.orig] = lam;
                    complementarity = complementarity.max(mu);
                    // mu * grad(-ln u) = lam * grad(||w|| - r) holds only at
                    // the boundary; report via the exact barrier identity:
                    for &(i, c) in &bound.0 {
                        lagr[i] -= 2.0 * r * mu / u * c;
                    }
                    for ((t, _), &w) in rows.iter().zip(&wvals) {
                        for &(i, c) in t {
                            lagr[i] += 2.0 * w * mu / u * c;
                        }
                    }
                }
            }
        }
        let mut bound_multipliers = vec![(0.0, 0.0); program.num_vars()];
        for i in 0..self.n {
            let mut lo_m = 0.0;
            let mut hi_m = 0.0;
            if self.lower[i].is_finite() {
                let s = x[i] - self.lower[i];
                lo_m = mu / s;
                lagr[i] -= lo_m;
                complementarity = complementarity.max(mu);
            }
            if self.upper[i].is_finite() {
                let s = self.upper[i] - x[i];
                hi_m = mu / s;
                lagr[i] += hi_m;
                complementarity = complementarity.max(mu);
            }
            bound_multipliers[self.to_orig[i]] = (lo_m, hi_m);
        }
        // Equality residuals and multipliers via least squares on the
        // remaining Lagrangian gradient.
        if !self.eqs.is_empty() {
            let k = self.eqs.len();
            let mut ata = DMatrix::zeros(k, k);
            let mut atb = DVector::zeros(k);
            for (a, ea) in self.eqs.iter().enumerate() {
                atb[a] = -ea.terms.iter().map(|&(i, c)| c * lagr[i]).sum::<f64>();
                for (b, eb) in self.eqs.iter().enumerate() {
                    let mut dot = 0.0;
                    for &(i, ca) in &ea.terms {
                        for &(j, cb) in &eb.terms {
                            if i == j {
                                dot += ca * cb;
                            }
                        }
                    }
                    ata[(a, b)] = dot;
                }
                let resid =
                    (ea.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - ea.rhs).abs();
                primal = primal.max(resid);
            }
            if let Some(chol) = Cholesky::new(ata) {
                let nu = chol.solve(&atb);
                for (a, ea) in self.eqs.iter().enumerate() {
                    multipliers[ea.orig] = nu[a];
                    for &(i, c) in &ea.terms {
                        lagr[i] += nu[a] * c;
                    }
                }
            }
        }
        let stationarity = lagr.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let full = self.expand(&x);
        let objective = program.objective_value(&full);
        Ok(SolveResult {
            x: full,
            objective,
            status: if converged {
                SolveStatus::Optimal
            } else {
                SolveStatus::MaxIterations
            },
            residuals: KktResiduals {
                stationarity,
                primal: primal.max(0.0),
                dual: 0.0,
                complementarity,
            },
            multipliers,
            bound_multipliers,
            newton_iterations,
        })
    }
}

/// Smallest positive root of `a x^2 + b x + c = 0` (f64::INFINITY if none);
/// used with `c > 0` so the parabola starts positive.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if a.abs() < 1e-300 {
        // linear: b x + c = 0
        if b < 0.0 {
            return -c / b;
        }
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if a > 0.0 {
            return f64::INFINITY;
        }
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = [f64::INFINITY, f64::INFINITY];
    if q != 0.0 {
        roots[0] = c / q;
    }
    if a != 0.0 {
        roots[1] = q / a;
    }
    let mut best = f64::INFINITY;
    for r in roots {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

fn factor_with_ridge(mut h: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let dmax = (0..h.nrows())
        .map(|i| h[(i, i)].abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..4 {
        if let Some(c) = Cholesky::new(h.clone()) {
            return Some(c);
        }
        ridge = if ridge == 0.0 { 1e-12 * dmax } else { ridge * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
    }
    None
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::AffineExpr;
    use approx::assert_abs_diff_eq;

    fn settings() -> IpmSettings {
        IpmSettings::default()
    }

    #[test]
    fn scalar_lp_bound() {
        // minimize x s.t. x >= 1
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.set_objective(x, 1.0);
        p.set_bounds(x, 1.0, f64::INFINITY);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn scalar_lp_row() {
        // minimize x s.t. -x <= -1, x <= 10
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.set_objective(x, 1.0);
        p.add_linear_ineq("ge_one", vec![(x, -1.0)], -1.0);
        p.add_linear_ineq("le_ten", vec![(x, 1.0)], 10.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn soc_projection_distance_with_equalities() {
        // minimize t s.t. ||[x - 3, y]|| <= t, x = 1, y = 0  =>  t* = 2
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let y = p.add_block("y", 1);
        let t = p.add_block("t", 1);
        p.set_objective(t, 1.0);
        p.add_soc(
            "dist",
            vec![
                AffineExpr::new(vec![(x, 1.0)], -3.0),
                AffineExpr::new(vec![(y, 1.0)], 0.0),
            ],
            AffineExpr::new(vec![(t, 1.0)], 0.0),
        );
        p.add_linear_eq("fix_x", vec![(x, 1.0)], 1.0);
        p.add_linear_eq("fix_y", vec![(y, 1.0)], 0.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[t], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[x], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.x[y], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn quadratic_epigraph() {
        // minimize t s.t. x^2 <= t, x >= 3  =>  x* = 3, t* = 9
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let t = p.add_block("t", 1);
        p.set_objective(t, 1.0);
        p.set_bounds(x, 3.0, 100.0);
        p.add_quadratic("epi", vec![(x, 1.0)], vec![(t, -1.0)], 0.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[x], 3.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[t], 9.0, epsilon = 1e-4);
    }

    #[test]
    fn coupled_components_via_woodbury() {
        // minimize -2x - y s.t. x^2 <= 4, y^2 <= 9, x + y <= 4, x,y in [0,10]
        // Components {x} and {y} are only joined by the linear coupling row.
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let y = p.add_block("y", 1);
        p.set_objective(x, -2.0);
        p.set_objective(y, -1.0);
        p.set_bounds(x, 0.0, 10.0);
        p.set_bounds(y, 0.0, 10.0);
        p.add_quadratic("xq", vec![(x, 1.0)], vec![], 4.0);
        p.add_quadratic("yq", vec![(y, 1.0)], vec![], 9.0);
        p.add_linear_ineq("couple", vec![(x, 1.0), (y, 1.0)], 4.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[x], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[y], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.objective, -6.0, epsilon = 1e-5);
    }

    #[test]
    fn infeasible_reports_constraint() {
        // x <= 1 and x >= 2 cannot both hold.
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.set_objective(x, 1.0);
        p.add_linear_ineq("upper", vec![(x, 1.0)], 1.0);
        p.add_linear_ineq("lower", vec![(x, -1.0)], -2.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert!(matches!(r.status, SolveStatus::Infeasible { .. }));
    }

    #[test]
    fn fixed_variables_are_eliminated() {
        // y pinned to 2; minimize x s.t. x + y >= 3  =>  x* = 1
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let y = p.add_block("y", 1);
        p.set_objective(x, 1.0);
        p.set_bounds(y, 2.0, 2.0);
        p.set_bounds(x, 0.0, 100.0);
        p.add_linear_ineq("cover", vec![(x, -1.0), (y, -1.0)], -3.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[x], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.x[y], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fully_fixed_program_checks_rows() {
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.set_bounds(x, 2.0, 2.0);
        p.add_linear_ineq("ok", vec![(x, 1.0)], 3.0);
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.x[x], 2.0);

        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.set_bounds(x, 2.0, 2.0);
        p.add_linear_ineq("broken", vec![(x, 1.0)], 1.0);
        assert!(matches!(
            solve_ipm(&p, &settings(), None),
            Err(IpmError::FixedInfeasible(_))
        ));
    }

    #[test]
    fn complementarity_at_tolerance() {
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.set_objective(x, 1.0);
        p.set_bounds(x, 1.0, 5.0);
        let s = IpmSettings {
            tol: 1e-8,
            ..Default::default()
        };
        let r = solve_ipm(&p, &s, None).unwrap();
        assert!(r.residuals.complementarity <= 1e-8 + 1e-12);
        assert!(r.residuals.stationarity <= 1e-6);
    }

    #[test]
    fn structured_and_dense_directions_agree() {
        // Random-ish multi-component program with a coupling row: the
        // Woodbury path and the merged dense path must produce the same
        // Newton direction away from degeneracy.
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 3);
        p.set_objective(x, 1.0);
        p.set_objective(x + 1, -0.5);
        p.set_objective(x + 2, 0.25);
        for i in 0..3 {
            p.set_bounds(x + i, -5.0, 5.0);
        }
        p.add_quadratic("q0", vec![(x, 1.0)], vec![], 9.0);
        p.add_quadratic("q1", vec![(x + 1, 2.0)], vec![], 9.0);
        p.add_soc(
            "s2",
            vec![AffineExpr::new(vec![(x + 2, 1.0)], 0.5)],
            AffineExpr::new(vec![], 4.0),
        );
        p.add_linear_ineq("couple01", vec![(x, 1.0), (x + 1, 1.0)], 3.0);
        p.add_linear_ineq("couple12", vec![(x + 1, 0.5), (x + 2, -1.0)], 2.0);
        let red = Reduced::build(&p).unwrap();
        assert!(red.comp_vars.len() >= 2);
        let pt = vec![0.3, -0.2, 0.1];
        let (d1, dec1) = red.newton_direction(&pt, 1.0).unwrap();
        let (d2, dec2) = red.merged().newton_direction(&pt, 1.0).unwrap();
        for (a, b) in d1.iter().zip(&d2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(dec1, dec2, epsilon = 1e-8);
    }

    #[test]
    fn rotated_cone_equivalent_soc() {
        // minimize z s.t. x^2 <= y*z encoded as ||[2x, y - z]|| <= y + z,
        // with x = 2 fixed, y = 4  =>  z* = 1
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let y = p.add_block("y", 1);
        let z = p.add_block("z", 1);
        p.set_objective(z, 1.0);
        p.set_bounds(x, 2.0, 2.0);
        p.set_bounds(y, 4.0, 4.0);
        p.set_bounds(z, 0.0, f64::INFINITY);
        p.add_soc(
            "rot",
            vec![
                AffineExpr::new(vec![(x, 2.0)], 0.0),
                AffineExpr::new(vec![(y, 1.0), (z, -1.0)], 0.0),
            ],
            AffineExpr::new(vec![(y, 1.0), (z, 1.0)], 0.0),
        );
        let r = solve_ipm(&p, &settings(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(r.x[z], 1.0, epsilon = 1e-5);
    }
}
