//! Counters accumulated during a run and the derived report.

use serde::{Deserialize, Serialize};

use crate::frames::NodeId;
use crate::time::SimTime;

/// Raw counters. Protocol code increments these directly; the kernel takes a
/// snapshot at the end of warm-up and reports the difference.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub bits_down: u64,
    pub bits_up: u64,
    /// Sum of arrival-to-acknowledgment delays, ns.
    pub delay_sum_ap: u64,
    pub delay_sum_sta: u64,
    pub delivered_ap: u64,
    pub delivered_sta: u64,
    pub r1_attempts_ap: u64,
    pub r1_collisions_ap: u64,
    pub r1_attempts_sta: u64,
    pub r1_collisions_sta: u64,
    pub r2_attempts: u64,
    pub r2_collisions: u64,
    /// Contention slot boundaries passed, idle or not.
    pub virtual_slots: u64,
    pub generated_ap: u64,
    pub generated_sta: u64,
    pub drops_ap: u64,
    pub drops_sta: u64,
    /// Per-STA uplink delay sums (ns) and delivered counts, by STA index.
    pub sta_delay_sum: Vec<u64>,
    pub sta_delivered: Vec<u64>,
}

impl Metrics {
    pub fn new(m_stas: usize) -> Self {
        Metrics { sta_delay_sum: vec![0; m_stas], sta_delivered: vec![0; m_stas], ..Metrics::default() }
    }

    pub(crate) fn record_downlink(&mut self, arrival: SimTime, now: SimTime, l_data: u32) {
        self.bits_down += u64::from(l_data);
        self.delivered_ap += 1;
        self.delay_sum_ap += (now - arrival).as_nanos();
    }

    pub(crate) fn record_uplink(&mut self, sta: NodeId, arrival: SimTime, now: SimTime, l_data: u32) {
        let delay = (now - arrival).as_nanos();
        self.bits_up += u64::from(l_data);
        self.delivered_sta += 1;
        self.delay_sum_sta += delay;
        let i = sta.sta_index();
        self.sta_delay_sum[i] += delay;
        self.sta_delivered[i] += 1;
    }

    pub(crate) fn record_generated(&mut self, node: NodeId, n: u64) {
        if node.is_ap() {
            self.generated_ap += n;
        } else {
            self.generated_sta += n;
        }
    }

    pub(crate) fn record_drop(&mut self, node: NodeId) {
        if node.is_ap() {
            self.drops_ap += 1;
        } else {
            self.drops_sta += 1;
        }
    }

    /// Counter increments since `earlier`.
    pub fn since(&self, earlier: &Metrics) -> Metrics {
        let sub = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Metrics {
            bits_down: self.bits_down - earlier.bits_down,
            bits_up: self.bits_up - earlier.bits_up,
            delay_sum_ap: self.delay_sum_ap - earlier.delay_sum_ap,
            delay_sum_sta: self.delay_sum_sta - earlier.delay_sum_sta,
            delivered_ap: self.delivered_ap - earlier.delivered_ap,
            delivered_sta: self.delivered_sta - earlier.delivered_sta,
            r1_attempts_ap: self.r1_attempts_ap - earlier.r1_attempts_ap,
            r1_collisions_ap: self.r1_collisions_ap - earlier.r1_collisions_ap,
            r1_attempts_sta: self.r1_attempts_sta - earlier.r1_attempts_sta,
            r1_collisions_sta: self.r1_collisions_sta - earlier.r1_collisions_sta,
            r2_attempts: self.r2_attempts - earlier.r2_attempts,
            r2_collisions: self.r2_collisions - earlier.r2_collisions,
            virtual_slots: self.virtual_slots - earlier.virtual_slots,
            generated_ap: self.generated_ap - earlier.generated_ap,
            generated_sta: self.generated_sta - earlier.generated_sta,
            drops_ap: self.drops_ap - earlier.drops_ap,
            drops_sta: self.drops_sta - earlier.drops_sta,
            sta_delay_sum: sub(&self.sta_delay_sum, &earlier.sta_delay_sum),
            sta_delivered: sub(&self.sta_delivered, &earlier.sta_delivered),
        }
    }
}

/// Frame accounting over the whole run, warm-up included. Every generated
/// frame is delivered, dropped, or still queued.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.queued
    }
}

/// Measured quantities over the post-warm-up window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Length of the measurement window, seconds.
    pub sim_time: f64,
    pub s_down: f64,
    pub s_up: f64,
    /// Mean delay over all downlink frames, µs.
    pub delay_ap: Option<f64>,
    /// Mean delay over all uplink frames, µs.
    pub delay_sta: Option<f64>,
    /// Mean of per-STA mean uplink delays, µs (STAs with no delivery skipped).
    pub delay_sta_per_node: Option<f64>,
    pub p_r1_ap: Option<f64>,
    pub p_r1_sta: Option<f64>,
    pub p_r2: Option<f64>,
    /// Round-1 attempts per contention slot, AP and mean per STA.
    pub tau_ap: Option<f64>,
    pub tau_sta: Option<f64>,
    pub metrics: Metrics,
    pub conservation: Conservation,
}

impl Report {
    pub fn s_total(&self) -> f64 {
        self.s_down + self.s_up
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Turns windowed counters into rates, delays and probabilities.
///
/// Panics if `window` is zero; the kernel never produces an empty window.
pub fn finalize(m: Metrics, window: SimTime, conservation: Conservation) -> Report {
    assert!(window > SimTime::ZERO, "measurement window must be positive");
    let secs = window.as_secs_f64();
    let ns_to_us = |v: Option<f64>| v.map(|x| x / 1_000.0);
    let per_node: Vec<f64> = m
        .sta_delay_sum
        .iter()
        .zip(&m.sta_delivered)
        .filter(|(_, &n)| n > 0)
        .map(|(&s, &n)| s as f64 / n as f64)
        .collect();
    let n_stas = m.sta_delivered.len() as u64;
    Report {
        sim_time: secs,
        s_down: m.bits_down as f64 / secs,
        s_up: m.bits_up as f64 / secs,
        delay_ap: ns_to_us(ratio(m.delay_sum_ap, m.delivered_ap)),
        delay_sta: ns_to_us(ratio(m.delay_sum_sta, m.delivered_sta)),
        delay_sta_per_node: ns_to_us(
            (!per_node.is_empty()).then(|| per_node.iter().sum::<f64>() / per_node.len() as f64),
        ),
        p_r1_ap: ratio(m.r1_collisions_ap, m.r1_attempts_ap),
        p_r1_sta: ratio(m.r1_collisions_sta, m.r1_attempts_sta),
        p_r2: ratio(m.r2_collisions, m.r2_attempts),
        tau_ap: ratio(m.r1_attempts_ap, m.virtual_slots),
        tau_sta: ratio(m.r1_attempts_sta, m.virtual_slots * n_stas),
        metrics: m,
        conservation,
    }
}
