//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod support;

use std::process::ExitCode;
use std::time::Instant;

use mumac_core::analytic::{cycle_durations, second_round_mc, ModelInputs, SecondRoundDist};
use mumac_core::des::{self, Horizon, Report, Scheme, SimConfig, Traffic};
use mumac_core::experiment::{compare, run_sweep, Experiment, ExperimentOutput, Scenario, SweepSpec, SweepVar};
use mumac_core::parallel::Execution;
use mumac_core::timing::{phy_preamble_duration, FrameTimes, Timing};
use mumac_core::SimTime;

use support::{closed_form_p2ant, enumerate_second_round, hand_airtime_us, hand_ampdu_us, std_err};

const HORIZON: SimTime = SimTime::from_secs(60);
const MC_ITERATIONS: u64 = 100_000;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn saturated(m: usize, n: u32) -> SimConfig {
    SimConfig { m_stas: m, n_antennas: n, horizon: Horizon::Time(HORIZON), ..SimConfig::default() }
}

fn cw2_sweep(base: SimConfig, values: Vec<u64>, analytic: bool) -> ExperimentOutput {
    let exp = Experiment {
        base,
        sweep: Some(SweepSpec::list(SweepVar::Cw2nd, values).unwrap()),
        analytic,
        n_iteration: MC_ITERATIONS,
        ..Experiment::default()
    };
    run_sweep(&exp, Execution::Parallel).expect("sweep runs")
}

fn step2() -> Vec<u64> {
    (4..=34).step_by(2).collect()
}

fn argmax_cw2(out: &ExperimentOutput, f: impl Fn(&mumac_core::experiment::ResultRecord) -> f64) -> u32 {
    out.records.iter().max_by(|a, b| f(a).total_cmp(&f(b))).map(|r| r.cw_2nd).unwrap()
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::MIN, f64::max);
    let min = v.iter().copied().fold(f64::MAX, f64::min);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (max - min) / mean
}

fn analytic_simulation_agreement() -> Outcome {
    let mut worst = (0.0, String::new());
    for m in [8, 15] {
        for n in [1, 2, 4] {
            let base = SimConfig { nf_ap_cap: Some(1), ..saturated(m, n) };
            let out = cw2_sweep(base, vec![4, 8, 16, 32], true);
            let c = compare(&out.records, &out.analytic).unwrap();
            for r in &c.rows {
                for (rel, dir) in [(r.rel_down, "down"), (r.rel_up, "up")] {
                    if rel > worst.0 {
                        worst = (rel, format!("M={m} N={n} CW2={} S_{dir}", r.cw_2nd));
                    }
                }
            }
        }
    }
    outcome(worst.0 <= 0.10, format!("max relative difference {:.4} at {} (limit 0.10)", worst.0, worst.1))
}

fn single_antenna_flatness() -> Outcome {
    let base = SimConfig { nf_ap_cap: Some(1), ..saturated(8, 1) };
    let out = cw2_sweep(base, (4..=34).collect(), true);
    let sim: Vec<f64> = out.records.iter().map(|r| r.s_total_bps).collect();
    let model: Vec<f64> = out.analytic.iter().map(|a| a.s_down_bps + a.s_up_bps).collect();
    let (s, a) = (spread(&sim), spread(&model));
    outcome(
        s < 0.02 && a < 0.02,
        format!("relative spread over CW2 4..34: simulation {s:.4}, model {a:.4} (limit 0.02)"),
    )
}

fn uplink_optimum() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (m, lo, hi) in [(8usize, 8u32, 12u32), (15, 12, 16)] {
        let base = SimConfig { nf_ap_cap: Some(1), ..saturated(m, 4) };
        let out = cw2_sweep(base, step2(), true);
        let sim = argmax_cw2(&out, |r| r.s_up_bps);
        let model = out.analytic.iter().max_by(|a, b| a.s_up_bps.total_cmp(&b.s_up_bps)).map(|a| a.cw_2nd).unwrap();
        let ok = (lo - 2..=hi + 2).contains(&sim);
        pass &= ok;
        notes.push(format!("M={m}: argmax {sim} (model {model}) want [{},{}]", lo - 2, hi + 2));
    }
    outcome(pass, notes.join("; "))
}

fn aggregation_optimum() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for m in [8usize, 15] {
        let out = cw2_sweep(saturated(m, 4), step2(), false);
        let best = argmax_cw2(&out, |r| r.s_total_bps);
        let (lo, hi) = (m as u32 - 4, m as u32 + 4);
        let ok = (lo..=hi).contains(&best);
        pass &= ok;
        notes.push(format!("M={m}: argmax S_total at CW2={best}, want [{lo},{hi}]"));
    }
    outcome(pass, notes.join("; "))
}

/// Both directions carry at least 95% of what was offered.
fn unsaturated(r: &mumac_core::experiment::ResultRecord) -> bool {
    let up = r.sta_load_bps.unwrap() * r.m as f64;
    let down = r.ap_load_bps.unwrap();
    r.s_up_bps >= 0.95 * up && r.s_down_bps >= 0.95 * down
}

fn balanced_symmetry() -> Outcome {
    let exp = Experiment {
        base: saturated(8, 4),
        scenario: Scenario::Balanced,
        sta_load: 0.8e6,
        sweep: Some(SweepSpec::range(SweepVar::MStas, 1, 15, 1).unwrap()),
        cw_2nd_follows_m: true,
        ..Experiment::default()
    };
    let out = run_sweep(&exp, Execution::Parallel).unwrap();
    let points: Vec<_> = out.records.iter().filter(|r| unsaturated(r)).collect();
    let worst = points
        .iter()
        .map(|r| ((r.s_down_bps - r.s_up_bps).abs() / r.s_down_bps.max(r.s_up_bps), r.m))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::NAN, 0));
    outcome(
        !points.is_empty() && worst.0 <= 0.15,
        format!(
            "{} of 15 points unsaturated; max |S_down-S_up|/max {:.4} at M={} (limit 0.15)",
            points.len(),
            worst.0,
            worst.1
        ),
    )
}

fn limac_uplink_equivalence() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for m in [8usize, 15] {
        let cw2 = m as u32;
        let li = des::run(&SimConfig { scheme: Scheme::LiMac, cw_2nd: cw2, ..saturated(m, 4) }).unwrap();
        let uni = des::run(&SimConfig { cw_2nd: cw2, ..saturated(m, 1) }).unwrap();
        let rel = (li.s_up - uni.s_up).abs() / uni.s_up;
        pass &= rel <= 0.03;
        notes.push(format!("M={m}: {:.3} vs {:.3} Mbit/s, rel {rel:.4}", li.s_up / 1e6, uni.s_up / 1e6));
    }
    outcome(pass, format!("{} (limit 0.03)", notes.join("; ")))
}

fn collision_ordering() -> Outcome {
    let mut checked = 0;
    let mut ordering_ok = true;
    let mut worst = 0.0_f64;
    for scenario in [Scenario::DownlinkDominant, Scenario::Balanced] {
        let exp = Experiment {
            base: saturated(8, 4),
            scenario,
            sta_load: 0.8e6,
            replications: 3,
            sweep: Some(SweepSpec::list(SweepVar::MStas, vec![4, 8, 12]).unwrap()),
            cw_2nd_follows_m: true,
            ..Experiment::default()
        };
        let out = run_sweep(&exp, Execution::Parallel).unwrap();
        for r in out.records.iter().filter(|r| unsaturated(r)) {
            let (Some(p_ap), Some(p_sta), Some(t_ap), Some(t_sta)) = (r.p_r1_ap, r.p_r1_sta, r.tau_ap, r.tau_sta)
            else {
                continue;
            };
            checked += 1;
            ordering_ok &= p_sta > p_ap;
            let (e_ap, e_sta) = mumac_core::analytic::nonsat_collision_probs(t_ap, t_sta, r.m);
            worst = worst.max((p_ap - e_ap).abs() / e_ap).max((p_sta - e_sta).abs() / e_sta);
        }
    }
    outcome(
        checked > 0 && ordering_ok && worst <= 0.05,
        format!(
            "{checked} unsaturated replications; p_sta > p_ap in all: {ordering_ok}; worst deviation from the independence formula {worst:.4} (limit 0.05)"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for n in 1..=4u32 {
        for m in 1..=6usize {
            for cw2 in 1..=6u32 {
                cases += 1;
                let mc = second_round_mc(n, m, cw2, MC_ITERATIONS, 0x5eed, Execution::Parallel).unwrap();
                let (px, pk) = enumerate_second_round(n, m, cw2);
                let within = |est: &[f64], exact: &[f64]| {
                    est.len() == exact.len()
                        && est.iter().zip(exact).all(|(e, x)| {
                            let se = std_err(*x, MC_ITERATIONS);
                            (e - x).abs() <= 4.0 * se + 1e-12
                        })
                };
                if !(within(&mc.p_x_ant, &px) && within(&mc.p_k_slot, &pk)) {
                    bad.push(format!("N={n} M={m} CW2={cw2}"));
                }
            }
        }
    }
    let mut closed_bad = Vec::new();
    for m in 2..=10usize {
        let mc = second_round_mc(2, m, 2, MC_ITERATIONS, 0x5eed, Execution::Parallel).unwrap();
        let cf = closed_form_p2ant(m);
        if (mc.p_x_ant[1] - cf).abs() > 4.0 * std_err(cf, MC_ITERATIONS) {
            closed_bad.push(format!("M={m} mc {:.4} vs {:.4}", mc.p_x_ant[1], cf));
        }
    }
    outcome(
        bad.is_empty() && closed_bad.is_empty(),
        format!(
            "enumeration: {}/{cases} cases within 4 SE{}; two-slot closed form: {}/9 within 4 SE{}",
            cases - bad.len(),
            if bad.is_empty() { String::new() } else { format!(" (off: {})", bad.join(", ")) },
            9 - closed_bad.len(),
            if closed_bad.is_empty() { String::new() } else { format!(" (off: {})", closed_bad.join(", ")) },
        ),
    )
}

fn traced(cfg: &SimConfig) -> (Report, Vec<u8>) {
    let mut buf = Vec::new();
    let r = des::run_traced(cfg, &mut buf).unwrap();
    (r, buf)
}

fn determinism() -> Outcome {
    let mut pass = true;
    let cfgs = [
        SimConfig { horizon: Horizon::Time(SimTime::from_secs(2)), ..saturated(8, 4) },
        SimConfig {
            horizon: Horizon::Time(SimTime::from_secs(2)),
            traffic: Traffic::Poisson { sta_load: 1.4e6, ap_load: 11.2e6 },
            seed: 99,
            ..saturated(8, 2)
        },
        SimConfig { scheme: Scheme::LiMac, horizon: Horizon::Slots(50_000), ..saturated(10, 4) },
    ];
    let mut bytes = 0;
    for cfg in &cfgs {
        let (r1, t1) = traced(cfg);
        let (r2, t2) = traced(cfg);
        let j1 = serde_json::to_vec(&r1).unwrap();
        let j2 = serde_json::to_vec(&r2).unwrap();
        pass &= j1 == j2 && t1 == t2 && !t1.is_empty();
        bytes += t1.len();
    }
    let exp = Experiment {
        base: SimConfig { horizon: Horizon::Time(SimTime::from_secs(1)), ..saturated(8, 4) },
        sweep: Some(SweepSpec::list(SweepVar::Cw2nd, vec![4, 8, 12]).unwrap()),
        replications: 2,
        ..Experiment::default()
    };
    let seq = run_sweep(&exp, Execution::Sequential).unwrap();
    let par = run_sweep(&exp, Execution::Workers(4)).unwrap();
    pass &= seq == par;
    outcome(
        pass,
        format!("3 configs traced twice ({bytes} trace bytes each pass), sweep identical across execution modes"),
    )
}

fn unit_exactness() -> Outcome {
    let t = Timing::default();
    let l = t.lengths;
    let us = |s: SimTime| s.as_micros_f64().round() as u64;
    let ft4 = FrameTimes::new(&t, 4).unwrap();
    let ft1 = FrameTimes::new(&t, 1).unwrap();
    let timers = t.compute_timers(4, 8).unwrap();
    let one_slot = SecondRoundDist { p_x_ant: vec![0.0, 1.0, 0.0, 0.0], p_k_slot: vec![1.0], n_iteration: 1 };
    let d4 = cycle_durations(&ModelInputs::default(), &one_slot).unwrap();
    let single = SecondRoundDist { p_x_ant: vec![1.0], p_k_slot: vec![], n_iteration: 1 };
    let d1 = cycle_durations(&ModelInputs { n: 1, ..ModelInputs::default() }, &single).unwrap();

    // (label, library value, longhand value, reference value)
    let hand_mu_cts_timer = 4 * (16 + hand_airtime_us(160, 1));
    let hand_g_cts_timer = 8 * (20 + hand_airtime_us(160, 1));
    let hand_down = 34
        + hand_airtime_us(160, 4)
        + 4 * (hand_airtime_us(160, 1) + 16)
        + hand_ampdu_us(1, 4)
        + hand_airtime_us(160, 1)
        + 2 * 16;
    let hand_tc = 34 + hand_airtime_us(160, 4) + 4 * (hand_airtime_us(160, 1) + 16);
    let hand_up = 34
        + hand_airtime_us(160, 1)
        + hand_airtime_us(120, 4)
        + (20 + hand_airtime_us(160, 1))
        + hand_airtime_us(112, 4)
        + hand_ampdu_us(1, 4)
        + hand_airtime_us(112, 4)
        + 4 * 16;
    let checks: Vec<(&str, u64, u64, u64)> = vec![
        ("preamble N=1", us(phy_preamble_duration(1).unwrap()), 36 + 4, 40),
        ("preamble N=4", us(phy_preamble_duration(4).unwrap()), 36 + 16, 52),
        ("RTS", us(t.frame_airtime(l.l_rts, 1).unwrap()), hand_airtime_us(160, 1), 44),
        ("MU-RTS N=4", us(ft4.mu_rts), hand_airtime_us(160, 4), 56),
        ("A-MPDU Nf=1 N=4", us(t.ampdu_airtime(1, 4).unwrap()), hand_ampdu_us(1, 4), 208),
        ("A-MPDU Nf=1 N=1", us(ft1.ampdu(1, 1)), hand_ampdu_us(1, 1), 196),
        ("MU-CTS timer N=4", us(timers.mu_cts_timer), hand_mu_cts_timer, 240),
        ("G-CTS timer N=4 CW2=8", us(timers.g_cts_timer), hand_g_cts_timer, 512),
        ("T_s,down N=4", d4.t_s_down as u64, hand_down, 614),
        ("T_c N=4", d4.t_c as u64, hand_tc, 330),
        ("T_s,up N=4 one slot", d4.t_s_up as u64, hand_up, 582),
        ("T_s,up N=1", d1.t_s_up as u64, 410, 410),
        ("T_s,down N=1", d1.t_s_down as u64, 410, 410),
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, lib, hand, reference)| !(lib == hand && hand == reference))
        .map(|(name, lib, hand, p)| format!("{name}: {lib}/{hand}/{p}"))
        .collect();
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} durations match longhand and reference values", checks.len())
        } else {
            format!("mismatches: {}", bad.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "analytic/simulation agreement", analytic_simulation_agreement),
        (2, "single-antenna flatness", single_antenna_flatness),
        (3, "uplink optimum location", uplink_optimum),
        (4, "aggregation-mode optimum", aggregation_optimum),
        (5, "balanced-scenario symmetry", balanced_symmetry),
        (6, "LI-MAC uplink equivalence", limac_uplink_equivalence),
        (7, "collision-probability ordering", collision_ordering),
        (8, "second-round oracle equivalence", oracle_equivalence),
        (9, "determinism", determinism),
        (10, "unit exactness", unit_exactness),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("[{tag}] {id:>2} {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
