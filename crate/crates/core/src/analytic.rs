//! Saturation throughput model and the Monte-Carlo estimator of second-round
//! outcomes.
//!
//! A channel slot is idle, a success by exactly one of the `M + 1` nodes, or
//! a collision. A successful AP slot carries `N` downlink streams; a
//! successful STA slot opens a second contention round in which the other
//! `M − 1` STAs compete for the AP's remaining `N − 1` antennas. The number
//! of antennas used and the length of that round are estimated by simulation
//! of the slot choices alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::parallel::{par_map, Execution};
use crate::timing::{FrameTimes, Timing};

/// Independent substreams the Monte-Carlo iterations are split into. Fixed,
/// so results do not depend on the number of threads.
pub const MC_PARTITIONS: u64 = 64;

const FIXED_POINT_TOL: f64 = 1e-9;
const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_MAX_ITER: usize = 10_000;

/// How the per-slot transmission probability is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauModel {
    /// τ = 2/(CW+1), constant window.
    #[default]
    ClosedForm,
    /// Binary exponential backoff with `max_stage` doublings, solved jointly
    /// with the collision probability.
    FixedPoint { max_stage: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInputs {
    pub m: usize,
    pub n: u32,
    pub cw: u32,
    pub cw_2nd: u32,
    /// Frames per A-MPDU.
    pub n_f: u32,
    /// Frames per uplink A-MPDU when it differs from `n_f`.
    pub n_f_up: Option<u32>,
    pub timing: Timing,
    pub n_iteration: u64,
    /// Probability that a successful slot belongs to the AP; `None` means
    /// 1/(M+1).
    pub alpha: Option<f64>,
    pub mc_seed: u64,
    pub tau_model: TauModel,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ModelInputs {
    fn default() -> Self {
        ModelInputs {
            m: 8,
            n: 4,
            cw: 32,
            cw_2nd: 8,
            n_f: 1,
            n_f_up: None,
            timing: Timing::default(),
            n_iteration: 100_000,
            alpha: None,
            mc_seed: 0x5eed,
            tau_model: TauModel::ClosedForm,
            execution: Execution::default(),
        }
    }
}

impl ModelInputs {
    pub fn n_f_up(&self) -> u32 {
        self.n_f_up.unwrap_or(self.n_f)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / (self.m as f64 + 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.cw == 0 || self.cw_2nd == 0 || self.n_f == 0 || self.n_f_up() == 0 {
            return Err(invalid_arg("M, N, CW, CW_2nd and N_f must all be at least 1"));
        }
        if self.n_iteration == 0 {
            return Err(invalid_arg("need at least one Monte-Carlo iteration"));
        }
        let a = self.alpha();
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid_arg(format!("alpha must lie in (0, 1), got {a}")));
        }
        self.timing.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotProbs {
    pub p_i: f64,
    pub p_s: f64,
    pub p_c: f64,
}

/// Distribution of second-round outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondRoundDist {
    /// `p_x_ant[x - 1]`: probability that `x` antennas carry uplink data.
    pub p_x_ant: Vec<f64>,
    /// `p_k_slot[k - 1]`: probability that the round lasts `k` slots. Empty
    /// for a single-antenna AP, which has no second round.
    pub p_k_slot: Vec<f64>,
    pub n_iteration: u64,
}

impl SecondRoundDist {
    /// Expected number of antennas used, Σ x·p_x_ant.
    pub fn mean_antennas(&self) -> f64 {
        self.p_x_ant.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Expected number of second-round slots, Σ k·p_k_slot.
    pub fn mean_slots(&self) -> f64 {
        self.p_k_slot.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }
}

/// Cycle durations in µs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleDurations {
    pub t_s_down: f64,
    pub t_s_up: f64,
    pub t_c: f64,
    pub e_2nd_slots: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResult {
    pub tau: f64,
    pub p_i: f64,
    pub p_s: f64,
    pub p_c: f64,
    pub t_s_down: f64,
    pub t_s_up: f64,
    pub t_c: f64,
    pub t_average: f64,
    pub e_2nd_slots: f64,
    pub n_b_down: f64,
    pub n_b_up: f64,
    /// bit/s.
    pub s_down: f64,
    pub s_up: f64,
    pub p_collision: f64,
    pub second_round: SecondRoundDist,
    pub mc_seed: u64,
    /// Fixed-point iterations used (0 in closed form).
    pub tau_iterations: usize,
}

impl AnalyticResult {
    pub fn s_total(&self) -> f64 {
        self.s_down + self.s_up
    }
}

pub fn tau(cw: u32) -> Result<f64> {
    if cw == 0 {
        return Err(invalid_arg("CW must be at least 1"));
    }
    Ok(2.0 / (f64::from(cw) + 1.0))
}

/// Idle, success and collision probabilities of a slot with `m + 1`
/// independent contenders.
pub fn slot_probs(tau: f64, m: usize) -> SlotProbs {
    let q = 1.0 - tau;
    let p_i = q.powi(m as i32 + 1);
    let p_s = (m as f64 + 1.0) * tau * q.powi(m as i32);
    SlotProbs { p_i, p_s, p_c: 1.0 - p_i - p_s }
}

/// Tallies for one batch of second-round trials.
fn second_round_batch(
    n: u32,
    contenders: usize,
    cw_2nd: u32,
    iterations: u64,
    rng: &mut ChaCha8Rng,
) -> (Vec<u64>, Vec<u64>) {
    let wanted = n as usize - 1;
    let mut antennas = vec![0u64; n as usize];
    let mut slots = vec![0u64; cw_2nd as usize];
    let mut picks = vec![0u32; cw_2nd as usize];
    for _ in 0..iterations {
        picks.fill(0);
        for _ in 0..contenders {
            picks[rng.random_range(0..cw_2nd) as usize] += 1;
        }
        let mut winners = 0;
        let mut used = cw_2nd as usize;
        for (j, &c) in picks.iter().enumerate() {
            if c == 1 {
                winners += 1;
                if winners == wanted {
                    used = j + 1;
                    break;
                }
            }
        }
        antennas[winners] += 1;
        slots[used - 1] += 1;
    }
    (antennas, slots)
}

/// Estimates the antenna-count and round-length distributions.
///
/// Each trial lets the `m − 1` STAs other than the first-round winner pick a
/// slot in `[0, cw_2nd)`. Slots are scanned in order; a slot picked by exactly
/// one STA is a win. The round ends after `n − 1` wins or `cw_2nd` slots.
pub fn second_round_mc(
    n: u32,
    m: usize,
    cw_2nd: u32,
    n_iteration: u64,
    seed: u64,
    exec: Execution,
) -> Result<SecondRoundDist> {
    if n == 0 || m == 0 || cw_2nd == 0 || n_iteration == 0 {
        return Err(invalid_arg("N, M, CW_2nd and the iteration count must be at least 1"));
    }
    if n == 1 {
        return Ok(SecondRoundDist { p_x_ant: vec![1.0], p_k_slot: Vec::new(), n_iteration });
    }
    let contenders = m - 1;
    let parts: Vec<(u64, u64)> = (0..MC_PARTITIONS)
        .map(|i| (i, n_iteration / MC_PARTITIONS + u64::from(i < n_iteration % MC_PARTITIONS)))
        .collect();
    let tallies = par_map(exec, &parts, |&(stream, iters)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        second_round_batch(n, contenders, cw_2nd, iters, &mut rng)
    });
    let mut antennas = vec![0u64; n as usize];
    let mut slots = vec![0u64; cw_2nd as usize];
    for (a, s) in &tallies {
        antennas.iter_mut().zip(a).for_each(|(t, v)| *t += v);
        slots.iter_mut().zip(s).for_each(|(t, v)| *t += v);
    }
    let total = n_iteration as f64;
    let mut p_x_ant: Vec<f64> = antennas.iter().map(|&c| c as f64 / total).collect();
    p_x_ant[0] = 1.0 - p_x_ant[1..].iter().sum::<f64>();
    Ok(SecondRoundDist { p_x_ant, p_k_slot: slots.iter().map(|&c| c as f64 / total).collect(), n_iteration })
}

fn us(t: crate::time::SimTime) -> f64 {
    t.as_micros_f64()
}

/// Successful downlink and uplink cycles, collision cycle and mean
/// second-round length, all in µs.
pub fn cycle_durations(inputs: &ModelInputs, dist: &SecondRoundDist) -> Result<CycleDurations> {
    inputs.validate()?;
    let n = inputs.n;
    let ft = FrameTimes::new(&inputs.timing, n)?;
    let ifs = &inputs.timing.ifs;
    let (aifs, sifs) = (us(ifs.aifs), us(ifs.sifs));
    let ampdu = us(ft.ampdu(inputs.n_f, n));
    let ampdu_up = us(ft.ampdu(inputs.n_f_up(), n));
    let nf = f64::from(n);

    let t_s_down = aifs + us(ft.mu_rts) + nf * (us(ft.mu_cts) + sifs) + ampdu + us(ft.mu_ack) + 2.0 * sifs;
    let e_2nd_slots = us(ft.round2_slot()) * dist.mean_slots();
    let t_s_up = if n > 1 {
        aifs + us(ft.rts) + us(ft.ant_cts) + e_2nd_slots + us(ft.g_cts) + ampdu_up + us(ft.g_ack) + 4.0 * sifs
    } else {
        // No Ant-CTS and no second round: RTS, G-CTS, data, G-ACK.
        aifs + us(ft.rts) + us(ft.g_cts) + ampdu_up + us(ft.g_ack) + 3.0 * sifs
    };
    let t_c = aifs + us(ft.mu_rts) + nf * (us(ft.mu_cts) + sifs);
    Ok(CycleDurations { t_s_down, t_s_up, t_c, e_2nd_slots })
}

/// Throughput for a given τ and second-round distribution.
pub fn throughput_at(inputs: &ModelInputs, tau: f64, dist: &SecondRoundDist) -> Result<AnalyticResult> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid_arg(format!("tau must lie in [0, 1], got {tau}")));
    }
    let d = cycle_durations(inputs, dist)?;
    let sp = slot_probs(tau, inputs.m);
    let alpha = inputs.alpha();
    let l = f64::from(inputs.timing.lengths.l_data);
    let n_b_down = alpha * f64::from(inputs.n) * f64::from(inputs.n_f) * l * sp.p_s;
    let n_b_up = (1.0 - alpha) * f64::from(inputs.n_f_up()) * l * sp.p_s * dist.mean_antennas();
    let sigma = us(inputs.timing.ifs.idle_slot);
    let t_average = alpha * sp.p_s * d.t_s_down + (1.0 - alpha) * sp.p_s * d.t_s_up + sp.p_c * d.t_c + sp.p_i * sigma;
    let per_sec = 1e6 / t_average;
    Ok(AnalyticResult {
        tau,
        p_i: sp.p_i,
        p_s: sp.p_s,
        p_c: sp.p_c,
        t_s_down: d.t_s_down,
        t_s_up: d.t_s_up,
        t_c: d.t_c,
        t_average,
        e_2nd_slots: d.e_2nd_slots,
        n_b_down,
        n_b_up,
        s_down: n_b_down * per_sec,
        s_up: n_b_up * per_sec,
        p_collision: 1.0 - (1.0 - tau).powi(inputs.m as i32),
        second_round: dist.clone(),
        mc_seed: inputs.mc_seed,
        tau_iterations: 0,
    })
}

/// Transmission probability of a node with exponential backoff, given its
/// conditional collision probability `p`. Equals 2/(W+1) when `max_stage` is 0.
pub fn backoff_tau(w: u32, max_stage: u32, p: f64) -> f64 {
    let w = f64::from(w);
    // (1 − (2p)^m) / (1 − 2p) written as a finite sum, which stays defined at p = 1/2.
    let series: f64 = (0..max_stage).map(|i| (2.0 * p).powi(i as i32)).sum();
    2.0 / (1.0 + w + p * w * series)
}

/// Solves τ = f(P_collision(τ)) by damped iteration.
pub fn solve_tau(cw: u32, max_stage: u32, m: usize) -> Result<(f64, usize)> {
    let mut t = tau(cw)?;
    let mut step = f64::INFINITY;
    for it in 1..=FIXED_POINT_MAX_ITER {
        let p = 1.0 - (1.0 - t).powi(m as i32);
        let next = (1.0 - FIXED_POINT_DAMPING) * t + FIXED_POINT_DAMPING * backoff_tau(cw, max_stage, p);
        step = (next - t).abs();
        t = next;
        if step < FIXED_POINT_TOL {
            return Ok((t, it));
        }
    }
    Err(Error::NoConvergence { iterations: FIXED_POINT_MAX_ITER, last_step: step })
}

pub fn saturation_throughput(inputs: &ModelInputs) -> Result<AnalyticResult> {
    inputs.validate()?;
    let dist =
        second_round_mc(inputs.n, inputs.m, inputs.cw_2nd, inputs.n_iteration, inputs.mc_seed, inputs.execution)?;
    let (t, iterations) = match inputs.tau_model {
        TauModel::ClosedForm => (tau(inputs.cw)?, 0),
        TauModel::FixedPoint { max_stage } => solve_tau(inputs.cw, max_stage, inputs.m)?,
    };
    let mut r = throughput_at(inputs, t, &dist)?;
    r.tau_iterations = iterations;
    Ok(r)
}

/// First-round collision probabilities of the AP and of a STA when the two
/// transmit with different per-slot probabilities.
pub fn nonsat_collision_probs(tau_ap: f64, tau_sta: f64, m: usize) -> (f64, f64) {
    let m = m as i32;
    let p_ap = 1.0 - (1.0 - tau_sta).powi(m);
    let p_sta = 1.0 - (1.0 - tau_sta).powi(m - 1) * (1.0 - tau_ap);
    (p_ap, p_sta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dist_one_slot() -> SecondRoundDist {
        SecondRoundDist { p_x_ant: vec![1.0, 0.0, 0.0, 0.0], p_k_slot: vec![1.0], n_iteration: 1 }
    }

    #[test]
    fn tau_values() {
        assert_relative_eq!(tau(32).unwrap(), 2.0 / 33.0);
        assert_eq!(tau(1).unwrap(), 1.0);
        assert_eq!(tau(3).unwrap(), 0.5);
        assert!(tau(0).is_err());
    }

    #[test]
    fn slot_prob_examples() {
        let s = slot_probs(0.0, 8);
        assert_eq!((s.p_i, s.p_s, s.p_c), (1.0, 0.0, 0.0));
        let s = slot_probs(0.5, 1);
        assert_eq!((s.p_i, s.p_s, s.p_c), (0.25, 0.5, 0.25));
        // 9·(2/33)·(31/33)^8, evaluated independently.
        let s = slot_probs(2.0 / 33.0, 8);
        assert_relative_eq!(s.p_s, 0.330_781_031_284_834, epsilon = 1e-14);
    }

    #[test]
    fn durations_with_table_timings() {
        let inputs = ModelInputs { cw_2nd: 1, ..ModelInputs::default() };
        let d = cycle_durations(&inputs, &dist_one_slot()).unwrap();
        assert_eq!(d.t_s_down, 614.0);
        assert_eq!(d.t_c, 330.0);
        assert_eq!(d.e_2nd_slots, 64.0);
        // 34 + 44 + 56 + 64 + 56 + 208 + 56 + 4·16
        assert_eq!(d.t_s_up, 582.0);
    }

    #[test]
    fn single_antenna_has_no_second_round() {
        let dist = second_round_mc(1, 8, 16, 1000, 1, Execution::Sequential).unwrap();
        assert_eq!(dist.p_x_ant, vec![1.0]);
        assert!(dist.p_k_slot.is_empty());
        let inputs = ModelInputs { n: 1, ..ModelInputs::default() };
        let d = cycle_durations(&inputs, &dist).unwrap();
        // 34 + 44 + 44 + 196 + 44 + 3·16
        assert_eq!(d.t_s_up, 410.0);
        assert_eq!(d.t_s_down, 410.0);
    }

    #[test]
    fn single_antenna_ratio_is_one_over_m() {
        for m in [1, 4, 8, 15] {
            let r = saturation_throughput(&ModelInputs { n: 1, m, ..ModelInputs::default() }).unwrap();
            assert_relative_eq!(r.s_down / r.s_up, 1.0 / m as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_tau_gives_zero_throughput() {
        let inputs = ModelInputs::default();
        let r = throughput_at(&inputs, 0.0, &dist_one_slot()).unwrap();
        assert_eq!(r.s_down, 0.0);
        assert_eq!(r.s_up, 0.0);
        assert_eq!(r.t_average, 9.0);
    }

    #[test]
    fn lone_contender_always_wins() {
        // M = 2: one STA besides the winner, so a second antenna is always used.
        let d = second_round_mc(2, 2, 2, 10_000, 3, Execution::Sequential).unwrap();
        assert_eq!(d.p_x_ant, vec![0.0, 1.0]);
        // M = 1: nobody left to contend; the round runs its full length.
        let d = second_round_mc(4, 1, 5, 1_000, 3, Execution::Sequential).unwrap();
        assert_eq!(d.p_x_ant[0], 1.0);
        assert_eq!(d.p_k_slot[4], 1.0);
    }

    #[test]
    fn mc_is_independent_of_execution_mode() {
        let a = second_round_mc(4, 8, 8, 20_000, 9, Execution::Sequential).unwrap();
        let b = second_round_mc(4, 8, 8, 20_000, 9, Execution::Parallel).unwrap();
        let c = second_round_mc(4, 8, 8, 20_000, 9, Execution::Workers(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn fixed_point_without_stages_is_closed_form() {
        let (t, _) = solve_tau(32, 0, 8).unwrap();
        assert_relative_eq!(t, 2.0 / 33.0, epsilon = 1e-9);
    }

    #[test]
    fn fixed_point_is_self_consistent() {
        for (cw, stages, m) in [(32, 3, 8), (16, 5, 15), (8, 6, 30)] {
            let (t, iters) = solve_tau(cw, stages, m).unwrap();
            assert!(iters > 0);
            let p = 1.0 - (1.0 - t).powi(m as i32);
            assert_relative_eq!(t, backoff_tau(cw, stages, p), epsilon = 1e-8);
            assert!(t < tau(cw).unwrap());
        }
        let r = saturation_throughput(&ModelInputs {
            tau_model: TauModel::FixedPoint { max_stage: 3 },
            n_iteration: 10_000,
            ..ModelInputs::default()
        })
        .unwrap();
        assert!(r.tau_iterations > 0);
    }

    #[test]
    fn backoff_tau_is_continuous_at_half() {
        let a = backoff_tau(32, 4, 0.5 - 1e-9);
        let b = backoff_tau(32, 4, 0.5);
        assert_relative_eq!(a, b, epsilon = 1e-8);
    }

    #[test]
    fn nonsat_examples() {
        let (p_ap, p_sta) = nonsat_collision_probs(0.0 + 0.3, 0.0, 5);
        assert_eq!(p_ap, 0.0);
        assert_relative_eq!(p_sta, 0.3);
        let (p_ap, p_sta) = nonsat_collision_probs(0.1, 0.1, 5);
        assert_relative_eq!(p_ap, p_sta);
        assert_relative_eq!(p_ap, 1.0 - 0.9f64.powi(5));
        let (p_ap, p_sta) = nonsat_collision_probs(0.2, 0.05, 8);
        assert!(p_sta > p_ap);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(second_round_mc(0, 8, 8, 10, 0, Execution::Sequential).is_err());
        assert!(saturation_throughput(&ModelInputs { cw_2nd: 0, ..ModelInputs::default() }).is_err());
        assert!(saturation_throughput(&ModelInputs { alpha: Some(1.0), ..ModelInputs::default() }).is_err());
        assert!(throughput_at(&ModelInputs::default(), 1.5, &dist_one_slot()).is_err());
    }

    proptest! {
        #[test]
        fn slot_probs_sum_to_one(tau in 0.0f64..=1.0, m in 1usize..64) {
            let s = slot_probs(tau, m);
            prop_assert!((s.p_i + s.p_s + s.p_c - 1.0).abs() < 1e-15);
            prop_assert!(s.p_i >= 0.0 && s.p_s >= 0.0 && s.p_c >= -1e-15);
        }

        #[test]
        fn mc_distributions_normalized(n in 1u32..6, m in 1usize..20, cw2 in 1u32..20) {
            let d = second_round_mc(n, m, cw2, 2_000, 11, Execution::Sequential).unwrap();
            let tol = 3.0 / (2_000f64).sqrt();
            prop_assert!((d.p_x_ant.iter().sum::<f64>() - 1.0).abs() < tol);
            if n > 1 {
                prop_assert!((d.p_k_slot.iter().sum::<f64>() - 1.0).abs() < tol);
            }
            prop_assert!(d.p_x_ant.iter().chain(&d.p_k_slot).all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn throughput_falls_as_cycles_lengthen(extra_us in 1u64..500, tau in 0.01f64..0.9) {
            // A longer AIFS stretches every busy cycle but leaves the bit
            // counts alone.
            let d = dist_one_slot();
            let base_in = ModelInputs::default();
            let mut long_in = base_in.clone();
            long_in.timing.ifs.aifs += crate::time::SimTime::from_micros(extra_us);
            let base = throughput_at(&base_in, tau, &d).unwrap();
            let long = throughput_at(&long_in, tau, &d).unwrap();
            prop_assert_eq!(base.n_b_down, long.n_b_down);
            prop_assert_eq!(base.n_b_up, long.n_b_up);
            prop_assert!(long.t_average > base.t_average);
            prop_assert!(long.s_down < base.s_down);
            prop_assert!(long.s_up < base.s_up);
        }
    }
}
