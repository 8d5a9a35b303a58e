//! Protocol invariants checked against the event trace.

use mumac_core::des::{self, Horizon, Scheme, SimConfig, Traffic};
use mumac_core::timing::Timing;
use mumac_core::SimTime;
use serde_json::Value;

#[derive(Debug)]
struct Rec {
    t: u64,
    node: u64,
    event: String,
    frame: Option<String>,
    outcome: Option<String>,
    group: Vec<u64>,
}

fn trace(cfg: &SimConfig) -> Vec<Rec> {
    let mut buf = Vec::new();
    let report = des::run_traced(cfg, &mut buf).unwrap();
    assert!(report.conservation.holds());
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            Rec {
                t: v["t_ns"].as_u64().unwrap(),
                node: v["node"].as_u64().unwrap(),
                event: v["event"].as_str().unwrap().to_string(),
                frame: v["frame"].as_str().map(str::to_string),
                outcome: v["outcome"].as_str().map(str::to_string),
                group: v["group"]
                    .as_array()
                    .map(|a| a.iter().map(|x| x.as_u64().unwrap()).collect())
                    .unwrap_or_default(),
            }
        })
        .collect()
}

fn cfg(scheme: Scheme, m: usize, n: u32, cw2: u32) -> SimConfig {
    SimConfig {
        scheme,
        m_stas: m,
        n_antennas: n,
        cw_2nd: cw2,
        horizon: Horizon::Time(SimTime::from_micros(300_000)),
        ..SimConfig::default()
    }
}

fn starts<'a>(t: &'a [Rec], frame: &'a str) -> impl Iterator<Item = &'a Rec> + 'a {
    t.iter().filter(move |r| r.event == "tx_start" && r.frame.as_deref() == Some(frame))
}

#[test]
fn timestamps_never_go_backwards() {
    let t = trace(&cfg(Scheme::UniMumac, 8, 4, 8));
    assert!(t.windows(2).all(|w| w[0].t <= w[1].t));
}

#[test]
fn medium_carries_one_burst_at_a_time() {
    for scheme in [Scheme::UniMumac, Scheme::LiMac] {
        let t = trace(&cfg(scheme, 10, 4, 10));
        let mut busy_until = 0;
        let mut burst_start = u64::MAX;
        for r in &t {
            match r.event.as_str() {
                "tx_start" if r.t != burst_start => {
                    assert!(r.t >= busy_until, "{scheme}: overlap at {} ns", r.t);
                    burst_start = r.t;
                }
                "tx_end" => busy_until = busy_until.max(r.t),
                _ => {}
            }
        }
    }
}

#[test]
fn single_antenna_ap_never_opens_a_second_round() {
    let t = trace(&cfg(Scheme::UniMumac, 8, 1, 8));
    assert_eq!(starts(&t, "Ant-CTS").count(), 0);
    assert!(t.iter().all(|r| r.outcome.as_deref() != Some("send_rts2")));
    assert!(starts(&t, "G-CTS").all(|r| r.group.len() == 1));
    assert!(starts(&t, "G-CTS").count() > 0);
}

#[test]
fn limac_has_no_two_round_frames() {
    let t = trace(&cfg(Scheme::LiMac, 8, 4, 8));
    for f in ["Ant-CTS", "G-CTS", "G-ACK"] {
        assert_eq!(starts(&t, f).count(), 0, "{f} in LI-MAC trace");
    }
    assert!(starts(&t, "CTS").count() > 0);
    assert!(starts(&t, "ACK").count() > 0);
    // Uplink data is a single-STA exchange.
    assert!(starts(&t, "A-MPDU").filter(|r| r.node != 0).all(|r| r.group.len() <= 1));
}

#[test]
fn groups_fit_the_antennas() {
    for n in [2u32, 3, 4] {
        let t = trace(&cfg(Scheme::UniMumac, 12, n, 12));
        for f in ["G-CTS", "MU-RTS"] {
            for r in starts(&t, f) {
                assert!(!r.group.is_empty() && r.group.len() <= n as usize, "{f} group {:?} with N={n}", r.group);
                let mut g = r.group.clone();
                g.sort_unstable();
                g.dedup();
                assert_eq!(g.len(), r.group.len(), "duplicate member in {f}");
                assert!(!g.contains(&0), "AP listed in {f}");
            }
        }
    }
}

#[test]
fn second_round_stays_inside_its_window() {
    let (n, cw2) = (4u32, 6u32);
    let timers = Timing::default().compute_timers(n, cw2).unwrap();
    let window = timers.g_cts_timer.as_nanos();
    let t = trace(&cfg(Scheme::UniMumac, 10, n, cw2));
    let mut ant_cts_end = None;
    let mut cycles = 0;
    for r in &t {
        match (r.event.as_str(), r.frame.as_deref()) {
            ("tx_end", Some("Ant-CTS")) => {
                ant_cts_end = Some(r.t);
                cycles += 1;
            }
            ("tx_start", Some("G-CTS")) => ant_cts_end = None,
            ("tx_start", Some("RTS")) if r.outcome.is_some() => {
                if let Some(end) = ant_cts_end {
                    assert!(r.t > end && r.t - end <= window, "round-2 RTS {} ns after Ant-CTS", r.t - end);
                }
            }
            _ => {}
        }
    }
    assert!(cycles > 10);
}

#[test]
fn granted_stas_are_the_ones_that_sent_rts() {
    let t = trace(&cfg(Scheme::UniMumac, 10, 4, 10));
    let mut senders: Vec<u64> = Vec::new();
    for r in &t {
        match (r.event.as_str(), r.frame.as_deref(), r.outcome.as_deref()) {
            ("tx_start", Some("RTS"), Some("ok")) => senders.push(r.node),
            ("tx_start", Some("G-CTS"), _) => {
                for s in &r.group {
                    assert!(senders.contains(s), "STA{} granted without a clean RTS", s);
                }
                senders.clear();
            }
            ("tx_start", Some("MU-RTS"), _) => senders.clear(),
            _ => {}
        }
    }
}

#[test]
fn collisions_are_marked_on_every_frame_of_the_burst() {
    let t = trace(&cfg(Scheme::UniMumac, 15, 4, 8));
    let mut by_time: std::collections::BTreeMap<u64, Vec<&Rec>> = Default::default();
    for r in t.iter().filter(|r| r.event == "tx_start") {
        by_time.entry(r.t).or_default().push(r);
    }
    let mut collided = 0;
    for burst in by_time.values() {
        let contention = burst.iter().filter(|r| matches!(r.frame.as_deref(), Some("RTS") | Some("MU-RTS"))).count();
        let marked = burst.iter().filter(|r| r.outcome.as_deref() == Some("collided")).count();
        if contention >= 2 {
            assert_eq!(marked, burst.len());
            collided += 1;
        } else {
            assert_eq!(marked, 0);
        }
    }
    assert!(collided > 0);
}

#[test]
fn light_poisson_traffic_never_drops() {
    let c =
        SimConfig { traffic: Traffic::Poisson { sta_load: 0.2e6, ap_load: 1.6e6 }, ..cfg(Scheme::UniMumac, 8, 4, 8) };
    let t = trace(&c);
    assert!(t.iter().all(|r| r.event != "drop"));
}
