//! Subchannel assignment and achievable rates for the two subsystems.
//!
//! Both subsystems are OFDMA with per-subchannel binary assignment chosen
//! by the strongest-gain rule and equal transmit power on every
//! subchannel. RF rates follow the usual SINR form; VLC rates carry the
//! 1/2 pre-log and the e/(2*pi) factor of the intensity-channel capacity
//! bound. Interference on a subchannel comes from every other TV
//! transmitting on the same subchannel index.

use crate::channel::ChannelState;
use crate::scenario::SlotScenario;

pub const INTENSITY_SNR_FACTOR: f64 = std::f64::consts::E / (2.0 * std::f64::consts::PI);

#[derive(Debug, Clone)]
pub struct PhyParams {
    /// VLC subchannel count K
    pub vlc_subchannels: usize,
    /// RF subchannel count L
    pub rf_subchannels: usize,
    /// VLC subchannel bandwidth, Hz
    pub vlc_bandwidth: f64,
    /// RF subchannel bandwidth, Hz
    pub rf_bandwidth: f64,
    /// VLC noise PSD, A^2/Hz
    pub vlc_noise_psd: f64,
    /// RF noise PSD, W/Hz
    pub rf_noise_psd: f64,
    /// optical transmit power per subchannel, W
    pub vlc_power: f64,
    /// RF transmit power per subchannel, W
    pub rf_power: f64,
    /// whether a TV's power on unassigned subchannels still interferes
    pub idle_interference: bool,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            vlc_subchannels: 8,
            rf_subchannels: 8,
            vlc_bandwidth: 0.5e6,
            rf_bandwidth: 0.5e6,
            vlc_noise_psd: 1e-21,
            // -174 dBm/Hz
            rf_noise_psd: 10f64.powf((-174.0 - 30.0) / 10.0),
            vlc_power: 0.1,
            rf_power: 0.1,
            idle_interference: true,
        }
    }
}

/// Binary subchannel maps plus per-subchannel powers. `vlc_owner[u][k]`
/// (resp. `rf_owner[u][l]`) is the SV index served by TV u on that
/// subchannel, or None when no SV has a usable gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub vlc_owner: Vec<Vec<Option<usize>>>,
    pub rf_owner: Vec<Vec<Option<usize>>>,
    /// forward-lamp power per (tv, vlc subchannel), W
    pub headlamp_power: Vec<Vec<f64>>,
    /// rear-lamp power per (tv, vlc subchannel), W
    pub taillight_power: Vec<Vec<f64>>,
    /// RF power per (tv, rf subchannel), W
    pub rf_power: Vec<Vec<f64>>,
}

/// Aggregate achievable rates per (sv, tv) pair, bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// VLC aggregate R[v][u]
    pub vlc: Vec<Vec<f64>>,
    /// RF aggregate S[v][u]
    pub rf: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn num_svs(&self) -> usize {
        self.vlc.len()
    }
    pub fn num_tvs(&self) -> usize {
        self.vlc.first().map_or(0, |r| r.len())
    }
    /// R + S for a pair.
    pub fn total(&self, v: usize, u: usize) -> f64 {
        self.vlc[v][u] + self.rf[v][u]
    }
    pub fn zeros(nv: usize, nu: usize) -> Self {
        Self {
            vlc: vec![vec![0.0; nu]; nv],
            rf: vec![vec![0.0; nu]; nv],
        }
    }
    /// CSV dump (tv, sv, R_vlc_bps, S_rf_bps).
    pub fn dump_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("tv,sv,r_vlc_bps,s_rf_bps\n");
        for v in 0..self.num_svs() {
            for u in 0..self.num_tvs() {
                writeln!(out, "{},{},{:.3},{:.3}", u, v, self.vlc[v][u], self.rf[v][u]).unwrap();
            }
        }
        out
    }
}

/// Strongest-gain subchannel assignment with equal power split.
pub fn assign_subchannels(
    channel: &ChannelState,
    scenario: &SlotScenario,
    phy: &PhyParams,
) -> Assignment {
    let nu = scenario.num_tvs();
    let nv = scenario.num_svs();
    let mut vlc_owner = vec![vec![None; phy.vlc_subchannels]; nu];
    let mut rf_owner = vec![vec![None; phy.rf_subchannels]; nu];
    for u in 0..nu {
        // VLC gains do not vary across subchannels; the strongest SV (by
        // whichever direction is live) wins every subchannel of TV u.
        let mut best: Option<(usize, f64)> = None;
        for v in 0..nv {
            let g = channel.vlc_forward[v][u].max(channel.vlc_backward[v][u]);
            if g > 0.0 && best.map_or(true, |(_, bg)| g > bg) {
                best = Some((v, g));
            }
        }
        if let Some((v, _)) = best {
            for k in 0..phy.vlc_subchannels {
                vlc_owner[u][k] = Some(v);
            }
        }
        for l in 0..phy.rf_subchannels {
            let mut best: Option<(usize, f64)> = None;
            for v in 0..nv {
                let g = channel.rf_power[v][u][l];
                if g > 0.0 && best.map_or(true, |(_, bg)| g > bg) {
                    best = Some((v, g));
                }
            }
            rf_owner[u][l] = best.map(|(v, _)| v);
        }
    }
    Assignment {
        vlc_owner,
        rf_owner,
        headlamp_power: vec![vec![phy.vlc_power; phy.vlc_subchannels]; nu],
        taillight_power: vec![vec![phy.vlc_power; phy.vlc_subchannels]; nu],
        rf_power: vec![vec![phy.rf_power; phy.rf_subchannels]; nu],
    }
}

/// Whether TV `i` radiates on its subchannel `idx` of the given map.
fn transmits(owner: &[Vec<Option<usize>>], i: usize, idx: usize, idle: bool) -> bool {
    idle || owner[i][idx].is_some()
}

/// RF rate of TV u to SV v on subchannel l, bits/s.
pub fn rf_subchannel_rate(
    u: usize,
    v: usize,
    l: usize,
    assignment: &Assignment,
    channel: &ChannelState,
    phy: &PhyParams,
) -> f64 {
    let signal = channel.rf_power[v][u][l] * assignment.rf_power[u][l];
    if signal <= 0.0 {
        return 0.0;
    }
    let mut interference = 0.0;
    for i in 0..assignment.rf_power.len() {
        if i != u && transmits(&assignment.rf_owner, i, l, phy.idle_interference) {
            interference += channel.rf_power[v][i][l] * assignment.rf_power[i][l];
        }
    }
    let sinr = signal / (interference + phy.rf_noise_psd * phy.rf_bandwidth);
    phy.rf_bandwidth * (1.0 + sinr).log2()
}

/// VLC rate of TV u to SV v on subchannel k for one direction, bits/s.
/// `direction` 1 is the forward link, 2 the backward link.
pub fn vlc_subchannel_rate(
    u: usize,
    v: usize,
    k: usize,
    direction: u8,
    assignment: &Assignment,
    channel: &ChannelState,
    phy: &PhyParams,
) -> f64 {
    assert!(direction == 1 || direction == 2);
    let (gains, powers) = if direction == 1 {
        (&channel.vlc_forward, &assignment.headlamp_power)
    } else {
        (&channel.vlc_backward, &assignment.taillight_power)
    };
    let h = gains[v][u];
    let signal = h * h * powers[u][k];
    if signal <= 0.0 {
        return 0.0;
    }
    let mut interference = 0.0;
    for i in 0..powers.len() {
        if i != u && transmits(&assignment.vlc_owner, i, k, phy.idle_interference) {
            let hi = gains[v][i];
            interference += hi * hi * powers[i][k];
        }
    }
    let sinr = INTENSITY_SNR_FACTOR * signal / (interference + phy.vlc_noise_psd * phy.vlc_bandwidth);
    0.5 * phy.vlc_bandwidth * (1.0 + sinr).log2()
}

/// Sum assigned subchannel rates into the per-pair aggregate table.
pub fn aggregate_rates(
    assignment: &Assignment,
    channel: &ChannelState,
    phy: &PhyParams,
) -> RateTable {
    let nv = channel.vlc_forward.len();
    let nu = assignment.vlc_owner.len();
    let mut table = RateTable::zeros(nv, nu);
    for v in 0..nv {
        for u in 0..nu {
            let mut r = 0.0;
            for k in 0..phy.vlc_subchannels {
                if assignment.vlc_owner[u][k] == Some(v) {
                    r += vlc_subchannel_rate(u, v, k, 1, assignment, channel, phy)
                        + vlc_subchannel_rate(u, v, k, 2, assignment, channel, phy);
                }
            }
            let mut s = 0.0;
            for l in 0..phy.rf_subchannels {
                if assignment.rf_owner[u][l] == Some(v) {
                    s += rf_subchannel_rate(u, v, l, assignment, channel, phy);
                }
            }
            table.vlc[v][u] = r;
            table.rf[v][u] = s;
        }
    }
    table
}
