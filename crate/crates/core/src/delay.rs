//! Delay accounting: per-branch transmission and computing delays, per-TV
//! task processing delay (TPD, the max over the local branch and all
//! parallel offload branches), and the average TPD across TVs.
//!
//! Backhaul return delay is zero by model. Shares below [`SHARE_EPSILON`]
//! count as zero so solver jitter cannot produce 0/0 branches.

use crate::phy::RateTable;
use crate::scenario::SlotScenario;

/// Shares smaller than this are treated as exactly zero.
pub const SHARE_EPSILON: f64 = 1e-9;

/// Task split and compute allocation for one slot.
/// `shares[v][u]` is the proportion of TV u's task on SV v for v < V, and
/// `shares[V][u]` is the locally computed proportion. `alloc[v][u]` is the
/// compute fraction SV v grants TV u.
#[derive(Debug, Clone, PartialEq)]
pub struct OffloadDecision {
    pub shares: Vec<Vec<f64>>,
    pub alloc: Vec<Vec<f64>>,
}

impl OffloadDecision {
    pub fn all_local(num_svs: usize, num_tvs: usize) -> Self {
        let mut shares = vec![vec![0.0; num_tvs]; num_svs + 1];
        shares[num_svs] = vec![1.0; num_tvs];
        Self {
            shares,
            alloc: vec![vec![0.0; num_tvs]; num_svs],
        }
    }

    pub fn num_svs(&self) -> usize {
        self.shares.len() - 1
    }

    pub fn num_tvs(&self) -> usize {
        self.shares.first().map_or(0, |r| r.len())
    }

    pub fn local_share(&self, u: usize) -> f64 {
        self.shares[self.num_svs()][u]
    }

    /// Column sums, for the partition invariant sum_v m = 1.
    pub fn column_sum(&self, u: usize) -> f64 {
        self.shares.iter().map(|row| row[u]).sum()
    }

    /// Scale each column so its shares sum to exactly one.
    pub fn normalize_columns(&mut self) {
        for u in 0..self.num_tvs() {
            let s = self.column_sum(u);
            if s > 0.0 {
                for row in self.shares.iter_mut() {
                    row[u] /= s;
                }
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DelayError {
    #[error("tv {tv}: share {share} on sv {sv} has zero compute allocation")]
    NoCompute { tv: usize, sv: usize, share: f64 },
    #[error("tv {tv}: share {share} on sv {sv} has zero link rate")]
    NoRate { tv: usize, sv: usize, share: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Computing delay of one branch: share * size * intensity / (alloc * compute).
/// Zero share short-circuits to zero even with zero allocation.
pub fn computing_delay(
    share: f64,
    size_bits: f64,
    intensity: f64,
    alloc: f64,
    compute: f64,
) -> Result<f64, DelayError> {
    if size_bits <= 0.0 || intensity <= 0.0 || compute <= 0.0 {
        return Err(DelayError::Invalid(
            "size, intensity and compute must be positive".into(),
        ));
    }
    if share < SHARE_EPSILON {
        return Ok(0.0);
    }
    if alloc <= 0.0 {
        return Err(DelayError::NoCompute {
            tv: usize::MAX,
            sv: usize::MAX,
            share,
        });
    }
    Ok(share * size_bits * intensity / (alloc * compute))
}

/// Transmission delay of one branch: share * size / total link rate.
pub fn transmission_delay(share: f64, size_bits: f64, rate: f64) -> Result<f64, DelayError> {
    if size_bits <= 0.0 {
        return Err(DelayError::Invalid("size must be positive".into()));
    }
    if share < SHARE_EPSILON {
        return Ok(0.0);
    }
    if rate <= 0.0 {
        return Err(DelayError::NoRate {
            tv: usize::MAX,
            sv: usize::MAX,
            share,
        });
    }
    Ok(share * size_bits / rate)
}

/// Per-branch delays plus the per-TV and average TPD decomposition.
#[derive(Debug, Clone)]
pub struct DelayReport {
    /// transmission[v][u] with v over the augmented SV set (local row last,
    /// identically zero)
    pub transmission: Vec<Vec<f64>>,
    /// computing[v][u], local row = local computing delay
    pub computing: Vec<Vec<f64>>,
    /// per-TV task processing delay
    pub tpd: Vec<f64>,
    /// augmented SV index attaining each TV's TPD
    pub argmax_branch: Vec<usize>,
    /// local computing delay per TV
    pub local_delay: Vec<f64>,
    /// largest offload branch delay per TV (zero when fully local)
    pub max_offload_delay: Vec<f64>,
    pub avg_tpd: f64,
    pub max_tpd: f64,
    pub avg_local_delay: f64,
    pub avg_offload_delay: f64,
}

impl DelayReport {
    /// CSV rows (tv, branch, transmission_s, computing_s, tpd_s).
    pub fn dump_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("tv,branch,transmission_s,computing_s,tpd_s\n");
        let nv = self.transmission.len();
        for u in 0..self.tpd.len() {
            for v in 0..nv {
                writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6}",
                    u, v, self.transmission[v][u], self.computing[v][u], self.tpd[u]
                )
                .unwrap();
            }
        }
        out
    }
}

/// Evaluate every branch delay and the average TPD for a decision.
pub fn average_tpd(
    decision: &OffloadDecision,
    rates: &RateTable,
    scenario: &SlotScenario,
) -> Result<DelayReport, DelayError> {
    let nv = scenario.num_svs();
    let nu = scenario.num_tvs();
    if decision.num_svs() != nv || decision.num_tvs() != nu {
        return Err(DelayError::Invalid(format!(
            "decision shape {}x{} does not match scenario {}x{}",
            decision.num_svs(),
            decision.num_tvs(),
            nv,
            nu
        )));
    }
    let mut transmission = vec![vec![0.0; nu]; nv + 1];
    let mut computing = vec![vec![0.0; nu]; nv + 1];
    let mut tpd = vec![0.0f64; nu];
    let mut argmax_branch = vec![nv; nu];
    let mut local_delay = vec![0.0f64; nu];
    let mut max_offload = vec![0.0f64; nu];
    for u in 0..nu {
        let task = &scenario.tasks[u];
        let own_compute = scenario.tv(u).compute;
        let m_local = decision.shares[nv][u];
        let z_local =
            computing_delay(m_local, task.size_bits, task.intensity, 1.0, own_compute)?;
        computing[nv][u] = z_local;
        local_delay[u] = z_local;
        let mut best = z_local;
        let mut best_v = nv;
        for v in 0..nv {
            let m = decision.shares[v][u];
            let t = transmission_delay(m, task.size_bits, rates.total(v, u)).map_err(|e| {
                match e {
                    DelayError::NoRate { share, .. } => DelayError::NoRate { tv: u, sv: v, share },
                    other => other,
                }
            })?;
            let z = computing_delay(
                m,
                task.size_bits,
                task.intensity,
                decision.alloc[v][u],
                scenario.sv(v).compute,
            )
            .map_err(|e| match e {
                DelayError::NoCompute { share, .. } => DelayError::NoCompute { tv: u, sv: v, share },
                other => other,
            })?;
            transmission[v][u] = t;
            computing[v][u] = z;
            let branch = t + z;
            max_offload[u] = max_offload[u].max(branch);
            if branch > best {
                best = branch;
                best_v = v;
            }
        }
        tpd[u] = best;
        argmax_branch[u] = best_v;
    }
    let avg_tpd = tpd.iter().sum::<f64>() / nu as f64;
    let max_tpd = tpd.iter().fold(0.0f64, |m, &v| m.max(v));
    let avg_local_delay = local_delay.iter().sum::<f64>() / nu as f64;
    let avg_offload_delay = max_offload.iter().sum::<f64>() / nu as f64;
    Ok(DelayReport {
        transmission,
        computing,
        tpd,
        argmax_branch,
        local_delay,
        max_offload_delay: max_offload,
        avg_tpd,
        max_tpd,
        avg_local_delay,
        avg_offload_delay,
    })
}
