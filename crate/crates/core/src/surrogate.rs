//! Convex surrogate subproblem for one slot.
//!
//! The min-max delay problem is rewritten with per-TV epigraph variables,
//! per-branch bounds on transmission and computing delay, a square-root
//! substitution `delta = sqrt(share)` that turns the bilinear computing
//! constraint into a second-order cone row, a first-order minorization of
//! the nonconvex side of the partition constraint `sum delta^2 = 1`, and
//! penalized residuals on both sides of that split. The result is a
//! [`ConicProgram`] the interior-point solver consumes directly.
//!
//! Coefficients are nondimensionalized (rates in tasks/s, compute in
//! tasks/s) so every row is O(1) regardless of task size.

use crate::conic::{AffineExpr, ConicProgram};
use crate::delay::OffloadDecision;
use crate::phy::RateTable;
use crate::scenario::SlotScenario;

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(
        "tv {tv_index} (vehicle {vehicle_id}) has no reachable sv and local computing \
         needs {needed:.4} s > slot {slot:.4} s"
    )]
    StructurallyInfeasible {
        tv_index: usize,
        vehicle_id: usize,
        needed: f64,
        slot: f64,
    },
    #[error("previous iterate shape mismatch: expected {expected} rows, got {got}")]
    IterateShape { expected: usize, got: usize },
}

/// Where each logical variable landed in the flat program vector.
#[derive(Debug, Clone)]
pub struct SurrogateLayout {
    /// active[u]: SV indices with positive total rate to TV u
    pub active: Vec<Vec<usize>>,
    /// start of TV u's run inside the `delta` block (active SVs then local)
    delta_off: Vec<usize>,
    /// start of TV u's run inside the `alloc` block
    alloc_off: Vec<usize>,
    zeta: Vec<usize>,
    w1_off: Vec<usize>,
    w2_off: Vec<usize>,
    j1: Vec<usize>,
    j2: Vec<usize>,
    /// columns with no reachable SV (delta_local pinned to one)
    degenerate: Vec<bool>,
}

impl SurrogateLayout {
    pub fn delta(&self, u: usize, slot: usize) -> usize {
        self.delta_off[u] + slot
    }
    pub fn delta_local(&self, u: usize) -> usize {
        self.delta_off[u] + self.active[u].len()
    }
    pub fn alloc(&self, u: usize, slot: usize) -> usize {
        self.alloc_off[u] + slot
    }
    pub fn zeta(&self, u: usize) -> usize {
        self.zeta[u]
    }
    pub fn tx_bound(&self, u: usize, slot: usize) -> usize {
        self.w1_off[u] + slot
    }
    pub fn comp_bound(&self, u: usize, slot: usize) -> usize {
        self.w2_off[u] + slot
    }
    pub fn residual_upper(&self, u: usize) -> usize {
        self.j1[u]
    }
    pub fn residual_lower(&self, u: usize) -> usize {
        self.j2[u]
    }
}

/// A built subproblem: the conic program plus enough layout to recover the
/// decision matrices and construct interior starting points.
#[derive(Debug, Clone)]
pub struct SurrogateProblem {
    pub program: ConicProgram,
    pub layout: SurrogateLayout,
    num_svs: usize,
    num_tvs: usize,
    /// previous iterate restricted to the layout (active runs then local)
    prev: Vec<Vec<f64>>,
    /// nondimensional rate (R+S)/rho per (u, active slot)
    rate_norm: Vec<Vec<f64>>,
    /// nondimensional SV compute C_v/(rho kappa) per (u, active slot)
    compute_norm: Vec<Vec<f64>>,
    /// nondimensional local compute C_u/(rho kappa) per u
    local_norm: Vec<f64>,
    slot_duration: f64,
}

/// Assemble the penalized convex surrogate around the previous iterate.
///
/// `prev_sqrt_shares` is the square-root share matrix, one row per SV plus
/// the local row, one column per TV; columns should square-sum to one.
/// Pairs with zero total rate are pruned (their share is pinned to zero by
/// omission). A TV with no reachable SV must fit its task locally within
/// the slot, otherwise the build fails naming that TV.
pub fn build_surrogate(
    scenario: &SlotScenario,
    rates: &RateTable,
    prev_sqrt_shares: &[Vec<f64>],
    penalty_weight: f64,
) -> Result<SurrogateProblem, BuildError> {
    let nv = scenario.num_svs();
    let nu = scenario.num_tvs();
    if prev_sqrt_shares.len() != nv + 1 {
        return Err(BuildError::IterateShape {
            expected: nv + 1,
            got: prev_sqrt_shares.len(),
        });
    }
    let slot = scenario.slot_duration;

    let mut active: Vec<Vec<usize>> = Vec::with_capacity(nu);
    let mut degenerate = vec![false; nu];
    for u in 0..nu {
        let act: Vec<usize> = (0..nv).filter(|&v| rates.total(v, u) > 0.0).collect();
        if act.is_empty() {
            let task = &scenario.tasks[u];
            let needed = task.size_bits * task.intensity / scenario.tv(u).compute;
            if needed > slot * (1.0 + 1e-12) {
                return Err(BuildError::StructurallyInfeasible {
                    tv_index: u,
                    vehicle_id: scenario.tvs[u],
                    needed,
                    slot,
                });
            }
            degenerate[u] = true;
        }
        active.push(act);
    }

    let mut program = ConicProgram::new();
    let total_active: usize = active.iter().map(|a| a.len()).sum();
    let delta_block = program.add_block("delta", total_active + nu);
    let alloc_block = program.add_block("alloc", total_active);
    let zeta_block = program.add_block("tpd_bound", nu);
    let w1_block = program.add_block("tx_delay_bound", total_active);
    let w2_block = program.add_block("compute_delay_bound", total_active);
    let j1_block = program.add_block("residual_upper", nu);
    let j2_block = program.add_block("residual_lower", nu);

    let mut delta_off = Vec::with_capacity(nu);
    let mut alloc_off = Vec::with_capacity(nu);
    let mut w1_off = Vec::with_capacity(nu);
    let mut w2_off = Vec::with_capacity(nu);
    let mut cum = 0usize;
    for u in 0..nu {
        delta_off.push(delta_block + cum + u);
        alloc_off.push(alloc_block + cum);
        w1_off.push(w1_block + cum);
        w2_off.push(w2_block + cum);
        cum += active[u].len();
    }
    let layout = SurrogateLayout {
        active: active.clone(),
        delta_off,
        alloc_off,
        zeta: (0..nu).map(|u| zeta_block + u).collect(),
        w1_off,
        w2_off,
        j1: (0..nu).map(|u| j1_block + u).collect(),
        j2: (0..nu).map(|u| j2_block + u).collect(),
        degenerate: degenerate.clone(),
    };

    let mut prev = Vec::with_capacity(nu);
    let mut rate_norm: Vec<Vec<f64>> = Vec::with_capacity(nu);
    let mut compute_norm: Vec<Vec<f64>> = Vec::with_capacity(nu);
    let mut local_norm = Vec::with_capacity(nu);
    for u in 0..nu {
        let task = &scenario.tasks[u];
        let work = task.size_bits * task.intensity;
        let mut p: Vec<f64> = active[u].iter().map(|&v| prev_sqrt_shares[v][u]).collect();
        p.push(prev_sqrt_shares[nv][u]);
        prev.push(p);
        rate_norm.push(
            active[u]
                .iter()
                .map(|&v| rates.total(v, u) / task.size_bits)
                .collect(),
        );
        compute_norm.push(
            active[u]
                .iter()
                .map(|&v| scenario.sv(v).compute / work)
                .collect(),
        );
        local_norm.push(scenario.tv(u).compute / work);
    }

    // objective: average epigraph value plus penalized residuals
    let inv_u = 1.0 / nu as f64;
    for u in 0..nu {
        program.set_objective(layout.zeta(u), inv_u);
        program.set_objective(layout.residual_upper(u), penalty_weight * inv_u);
        program.set_objective(layout.residual_lower(u), penalty_weight * inv_u);
    }

    // bounds
    for u in 0..nu {
        for a in 0..active[u].len() {
            program.set_bounds(layout.delta(u, a), 0.0, 1.0);
            program.set_bounds(layout.alloc(u, a), 0.0, 1.0);
            program.set_bounds(layout.tx_bound(u, a), 0.0, f64::INFINITY);
            program.set_bounds(layout.comp_bound(u, a), 0.0, f64::INFINITY);
        }
        program.set_bounds(layout.zeta(u), 0.0, slot);
        if degenerate[u] {
            // the exact partition constraint collapses to delta_local = 1
            program.set_bounds(layout.delta_local(u), 1.0, 1.0);
            program.set_bounds(layout.residual_upper(u), 0.0, 0.0);
            program.set_bounds(layout.residual_lower(u), 0.0, 0.0);
        } else {
            program.set_bounds(layout.delta_local(u), 0.0, 1.0);
            program.set_bounds(layout.residual_upper(u), 0.0, f64::INFINITY);
            program.set_bounds(layout.residual_lower(u), 0.0, f64::INFINITY);
        }
    }

    for u in 0..nu {
        // local computing epigraph: delta_local^2 <= zeta * local_norm
        program.add_soc(
            format!("local_compute[tv={u}]"),
            vec![
                AffineExpr::new(vec![(layout.delta_local(u), 2.0)], 0.0),
                AffineExpr::new(vec![(layout.zeta(u), local_norm[u])], -1.0),
            ],
            AffineExpr::new(vec![(layout.zeta(u), local_norm[u])], 1.0),
        );
        for (a, &v) in active[u].iter().enumerate() {
            let c = compute_norm[u][a];
            let r = rate_norm[u][a];
            // computing-delay cone: delta^2 <= c * f * w2
            program.add_soc(
                format!("compute_cone[tv={u},sv={v}]"),
                vec![
                    AffineExpr::new(
                        vec![(layout.alloc(u, a), c), (layout.comp_bound(u, a), -1.0)],
                        0.0,
                    ),
                    AffineExpr::new(vec![(layout.delta(u, a), 2.0)], 0.0),
                ],
                AffineExpr::new(
                    vec![(layout.alloc(u, a), c), (layout.comp_bound(u, a), 1.0)],
                    0.0,
                ),
            );
            // transmission-delay cone: delta^2 <= r * w1
            program.add_soc(
                format!("tx_cone[tv={u},sv={v}]"),
                vec![
                    AffineExpr::new(vec![(layout.delta(u, a), 2.0)], 0.0),
                    AffineExpr::new(vec![(layout.tx_bound(u, a), r)], -1.0),
                ],
                AffineExpr::new(vec![(layout.tx_bound(u, a), r)], 1.0),
            );
            // branch delay under the epigraph: w1 + w2 <= zeta
            program.add_linear_ineq(
                format!("branch_budget[tv={u},sv={v}]"),
                vec![
                    (layout.tx_bound(u, a), 1.0),
                    (layout.comp_bound(u, a), 1.0),
                    (layout.zeta(u), -1.0),
                ],
                0.0,
            );
        }
        if !degenerate[u] {
            // relaxed partition upper side: sum delta^2 - j1 <= 1
            let quad: Vec<(usize, f64)> = (0..active[u].len())
                .map(|a| (layout.delta(u, a), 1.0))
                .chain(std::iter::once((layout.delta_local(u), 1.0)))
                .collect();
            program.add_quadratic(
                format!("partition_upper[tv={u}]"),
                quad,
                vec![(layout.residual_upper(u), -1.0)],
                1.0,
            );
            // minorized lower side: sum 2 d0 delta - j2 >= 1 + sum d0^2
            let d0_sq: f64 = prev[u].iter().map(|d| d * d).sum();
            let mut terms: Vec<(usize, f64)> = (0..active[u].len())
                .map(|a| (layout.delta(u, a), -2.0 * prev[u][a]))
                .collect();
            terms.push((
                layout.delta_local(u),
                -2.0 * prev[u][active[u].len()],
            ));
            terms.push((layout.residual_lower(u), 1.0));
            program.add_linear_ineq(
                format!("partition_lower[tv={u}]"),
                terms,
                -1.0 - d0_sq,
            );
        }
    }
    // SV capacity across columns
    for v in 0..nv {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for u in 0..nu {
            for (a, &av) in active[u].iter().enumerate() {
                if av == v {
                    terms.push((layout.alloc(u, a), 1.0));
                }
            }
        }
        if !terms.is_empty() {
            program.add_linear_ineq(format!("capacity[sv={v}]"), terms, 1.0);
        }
    }

    Ok(SurrogateProblem {
        program,
        layout,
        num_svs: nv,
        num_tvs: nu,
        prev,
        rate_norm,
        compute_norm,
        local_norm,
        slot_duration: slot,
    })
}

impl SurrogateProblem {
    /// Square the substitution variables back into share space and collect
    /// the allocation matrix; pruned pairs are zero.
    pub fn recover_decision(&self, x: &[f64]) -> OffloadDecision {
        let mut shares = vec![vec![0.0; self.num_tvs]; self.num_svs + 1];
        let mut alloc = vec![vec![0.0; self.num_tvs]; self.num_svs];
        for u in 0..self.num_tvs {
            for (a, &v) in self.layout.active[u].iter().enumerate() {
                let d = x[self.layout.delta(u, a)];
                shares[v][u] = d * d;
                alloc[v][u] = x[self.layout.alloc(u, a)];
            }
            let dl = x[self.layout.delta_local(u)];
            shares[self.num_svs][u] = dl * dl;
        }
        OffloadDecision { shares, alloc }
    }

    pub fn residual_sum(&self, x: &[f64]) -> f64 {
        (0..self.num_tvs)
            .map(|u| x[self.layout.residual_upper(u)] + x[self.layout.residual_lower(u)])
            .sum()
    }

    /// Per-TV epigraph values.
    pub fn tpd_bounds<'a>(&self, x: &'a [f64]) -> Vec<f64> {
        (0..self.num_tvs).map(|u| x[self.layout.zeta(u)]).collect()
    }

    /// Construct a strictly feasible interior start, walking the iterate
    /// toward the box ceiling until the minorized partition row opens up.
    /// Returns None when no margin can be found (phase I takes over).
    pub fn interior_start(&self) -> Option<Vec<f64>> {
        let nu = self.num_tvs;
        let mut x = vec![0.0; self.program.num_vars()];
        let f0 = 1.0 / (nu as f64 + 1.0);
        let mut ok = true;
        for u in 0..nu {
            let na = self.layout.active[u].len();
            if self.layout.degenerate[u] {
                x[self.layout.delta_local(u)] = 1.0;
                let needed = 1.0 / self.local_norm[u];
                x[self.layout.zeta(u)] =
                    (1.05 * needed).min(self.slot_duration * (1.0 - 1e-9)).max(needed * (1.0 + 1e-9));
                continue;
            }
            let mut margin = 0.0;
            let mut chosen_t = 0.5;
            for &t in &[0.5, 0.75, 0.95] {
                let delta: Vec<f64> = self.prev[u]
                    .iter()
                    .map(|&d0| (1.0 - t) * d0 + t * (1.0 - 1e-3))
                    .collect();
                let d0_sq: f64 = self.prev[u].iter().map(|d| d * d).sum();
                let g = 2.0 * self.prev[u].iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>()
                    - 1.0
                    - d0_sq;
                if g > 1e-9 {
                    margin = g;
                    chosen_t = t;
                    break;
                }
            }
            if margin <= 1e-9 {
                ok = false;
                continue;
            }
            let t = chosen_t;
            let mut zeta_needed = 0.0f64;
            for a in 0..=na {
                let d = (1.0 - t) * self.prev[u][a] + t * (1.0 - 1e-3);
                if a < na {
                    x[self.layout.delta(u, a)] = d;
                    x[self.layout.alloc(u, a)] = f0;
                    let w2 = 2.0 * d * d / (self.compute_norm[u][a] * f0);
                    let w1 = 2.0 * d * d / self.rate_norm[u][a];
                    x[self.layout.comp_bound(u, a)] = w2;
                    x[self.layout.tx_bound(u, a)] = w1;
                    zeta_needed = zeta_needed.max(w1 + w2);
                } else {
                    x[self.layout.delta_local(u)] = d;
                    zeta_needed = zeta_needed.max(d * d / self.local_norm[u]);
                }
            }
            let zeta = 1.05 * zeta_needed;
            if zeta >= self.slot_duration {
                ok = false;
            }
            x[self.layout.zeta(u)] = zeta.min(self.slot_duration * (1.0 - 1e-9));
            let sum_sq: f64 = (0..=na)
                .map(|a| {
                    let idx = if a < na {
                        self.layout.delta(u, a)
                    } else {
                        self.layout.delta_local(u)
                    };
                    x[idx] * x[idx]
                })
                .sum();
            x[self.layout.residual_upper(u)] = (sum_sq - 1.0).max(0.0) + 1.0;
            x[self.layout.residual_lower(u)] = (margin * 0.5).min(1.0);
        }
        if ok {
            Some(x)
        } else {
            None
        }
    }
}

/// Evaluate the cone form and the bilinear form of the computing-delay
/// bound on the same point: `(cone holds, product form holds)`. The two
/// agree whenever `alloc` and `bound` are nonnegative.
pub fn socp_equivalence_check(
    delta: f64,
    alloc: f64,
    bound: f64,
    size_bits: f64,
    intensity: f64,
    compute: f64,
) -> (bool, bool) {
    let cf = compute * alloc;
    let lhs = ((cf - bound).powi(2) + 4.0 * size_bits * intensity * delta * delta).sqrt();
    let cone = lhs <= cf + bound;
    let product = delta * delta * size_bits * intensity <= bound * alloc * compute;
    (cone, product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve_ipm, IpmSettings, SolveStatus};
    use crate::scenario::{SlotScenario, Task, Vehicle};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn car(id: usize, compute: f64) -> Vehicle {
        Vehicle {
            id,
            lane: 0,
            x: 10.0 * id as f64,
            y: 0.0,
            speed: 20.0,
            width: 2.2,
            length: 4.0,
            compute,
        }
    }

    fn scenario(nu: usize, nv: usize, slot: f64) -> SlotScenario {
        let vehicles: Vec<Vehicle> = (0..nu + nv).map(|i| car(i, 2e9)).collect();
        SlotScenario {
            slot_duration: slot,
            vehicles,
            tvs: (0..nu).collect(),
            svs: (nu..nu + nv).collect(),
            tasks: (0..nu)
                .map(|u| Task {
                    owner: u,
                    size_bits: 3.2e6,
                    intensity: 200.0,
                })
                .collect(),
            seed: 0,
        }
    }

    fn uniform_sqrt_shares(nv: usize, nu: usize) -> Vec<Vec<f64>> {
        // equal shares over all branches, square-summing to one
        let d = (1.0 / (nv as f64 + 1.0)).sqrt();
        vec![vec![d; nu]; nv + 1]
    }

    #[test]
    fn no_sv_column_pins_local_delta() {
        let sc = scenario(1, 0, 1.0);
        let rates = RateTable::zeros(0, 1);
        let prev = vec![vec![1.0]];
        let sp = build_surrogate(&sc, &rates, &prev, 0.4).unwrap();
        assert!(sp.program.block("delta").is_some());
        assert!(sp.program.block("tpd_bound").is_some());
        let r = solve_ipm(&sp.program, &IpmSettings::default(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let d = sp.recover_decision(&r.x);
        assert_abs_diff_eq!(d.local_share(0), 1.0, epsilon = 1e-12);
        // optimal epigraph value is the local computing delay
        assert_abs_diff_eq!(r.x[sp.layout.zeta(0)], 0.32, epsilon = 1e-4);
    }

    #[test]
    fn structurally_infeasible_column_is_reported() {
        let sc = scenario(1, 0, 0.06); // local needs 0.32 s
        let rates = RateTable::zeros(0, 1);
        let prev = vec![vec![1.0]];
        match build_surrogate(&sc, &rates, &prev, 0.4) {
            Err(BuildError::StructurallyInfeasible { tv_index, .. }) => assert_eq!(tv_index, 0),
            other => panic!("expected structural infeasibility, got {other:?}"),
        }
    }

    /// Counting oracle: 4U(V+1) variables; one cone per branch pair, one
    /// transmission cone per pair, one local cone per TV, one budget row
    /// per pair, two partition rows per TV, one capacity row per SV.
    #[test]
    fn variable_and_row_counts_match_hand_enumeration() {
        let (nu, nv) = (2usize, 3usize);
        let sc = scenario(nu, nv, 1.0);
        let mut rates = RateTable::zeros(nv, nu);
        for v in 0..nv {
            for u in 0..nu {
                rates.rf[v][u] = 2e6;
            }
        }
        let sp = build_surrogate(&sc, &rates, &uniform_sqrt_shares(nv, nu), 0.4).unwrap();
        assert_eq!(sp.program.num_vars(), 4 * nu * (nv + 1));
        let socs = nu * nv * 2 + nu; // compute + tx cones, local cones
        let lins = nu * nv + nu + nv; // budgets, minorized rows, capacity
        let quads = nu; // partition upper rows
        assert_eq!(sp.program.constraints.len(), socs + lins + quads);
        assert_eq!(sp.program.constraints.len(), 27);
    }

    /// The cone row holds with equality exactly when the bilinear form
    /// does: expanding the norm leaves 4*(work*delta^2 - C*f*w2).
    #[test]
    fn cone_equality_identity_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let c: f64 = rng.gen_range(1e8..4e9);
            let f: f64 = rng.gen_range(0.01..1.0);
            let rho: f64 = rng.gen_range(1e5..5e6);
            let kappa: f64 = rng.gen_range(50.0..300.0);
            let delta: f64 = rng.gen_range(0.0..1.0);
            let w2: f64 = rng.gen_range(1e-4..1.0);
            let lhs_sq = (c * f - w2).powi(2) + 4.0 * rho * kappa * delta * delta;
            let rhs_sq = (c * f + w2).powi(2);
            let gap = rhs_sq - lhs_sq;
            let product_gap = 4.0 * (c * f * w2 - rho * kappa * delta * delta);
            assert_abs_diff_eq!(gap, product_gap, epsilon = 1e-6 * gap.abs().max(1.0));
        }
    }

    #[test]
    fn equivalence_check_origin_and_violation() {
        assert_eq!(
            socp_equivalence_check(0.0, 0.0, 0.0, 3.2e6, 200.0, 2e9),
            (true, true)
        );
        // violate the product form by a sliver: both must be false
        let rho = 1e6;
        let kappa = 100.0;
        let c = 1e9;
        let f = 0.5;
        let w2 = 1e-3f64;
        // delta^2 = w2*f*c/(rho*kappa) * (1 + eps)
        let delta = (w2 * f * c / (rho * kappa) * 1.001).sqrt();
        assert_eq!(
            socp_equivalence_check(delta, f, w2, rho, kappa, c),
            (false, false)
        );
    }

    #[test]
    fn equivalence_check_agrees_on_random_nonnegative_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100_000 {
            let delta: f64 = rng.gen_range(0.0..1.0);
            let f: f64 = rng.gen_range(0.0..1.0);
            let w2: f64 = rng.gen_range(0.0..2.0);
            let rho: f64 = rng.gen_range(1e5..5e6);
            let kappa: f64 = rng.gen_range(10.0..400.0);
            let c: f64 = rng.gen_range(1e8..4e9);
            let (a, b) = socp_equivalence_check(delta, f, w2, rho, kappa, c);
            assert_eq!(a, b, "disagreement at delta={delta} f={f} w2={w2}");
        }
    }

    #[test]
    fn desk_solve_recovers_feasible_decision() {
        let sc = scenario(1, 1, 1.0);
        let mut rates = RateTable::zeros(1, 1);
        rates.rf[0][0] = 2e6;
        let prev = uniform_sqrt_shares(1, 1);
        let sp = build_surrogate(&sc, &rates, &prev, 0.4).unwrap();
        let start = sp.interior_start();
        assert!(start.is_some());
        let r = solve_ipm(&sp.program, &IpmSettings::default(), start.as_deref()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let d = sp.recover_decision(&r.x);
        // shares approximately sum to one at small residuals
        assert!(sp.residual_sum(&r.x) < 1e-5);
        assert_abs_diff_eq!(d.column_sum(0), 1.0, epsilon = 1e-4);
        // allocation stays within capacity
        assert!(d.alloc[0][0] <= 1.0 + 1e-9);
    }
}
