//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// Exact second-round distribution by enumerating every slot choice of the
/// `m − 1` contending STAs. Returns `(p_x_ant, p_k_slot)` indexed like the
/// Monte Carlo estimate.
pub fn enumerate_second_round(n: u32, m: usize, cw_2nd: u32) -> (Vec<f64>, Vec<f64>) {
    let n = n as usize;
    let cw = cw_2nd as usize;
    if n == 1 {
        return (vec![1.0], Vec::new());
    }
    let contenders = m - 1;
    let total = cw.pow(contenders as u32);
    let weight = 1.0 / total as f64;
    let mut p_x = vec![0.0; n];
    let mut p_k = vec![0.0; cw];
    let mut choice = vec![0usize; contenders];
    for code in 0..total {
        let mut c = code;
        for slot in choice.iter_mut() {
            *slot = c % cw;
            c /= cw;
        }
        // Walk the slots in order; a slot picked by exactly one STA is a win.
        let mut wins = 0;
        let mut last = cw;
        for s in 0..cw {
            if choice.iter().filter(|&&x| x == s).count() == 1 {
                wins += 1;
                if wins == n - 1 {
                    last = s + 1;
                    break;
                }
            }
        }
        p_x[wins] += weight;
        p_k[last - 1] += weight;
    }
    (p_x, p_k)
}

/// The two-antenna, two-slot closed form taken literally: a win in the
/// first slot, plus a win in the second slot weighted by the chance that the
/// first slot failed.
pub fn closed_form_p2ant(m: usize) -> f64 {
    let cw = 2.0_f64;
    let single = (m - 1) as f64 * (1.0 / cw) * (1.0 - 1.0 / cw).powi(m as i32 - 2);
    let p_1_fail = 1.0 - single;
    single + single * p_1_fail
}

/// Airtime in µs worked out longhand: 36 µs legacy preamble plus 4 µs per
/// VHT-LTF, then 4 µs OFDM symbols of 216 data bits covering service (16),
/// body and tail (6).
pub fn hand_airtime_us(body_bits: u64, streams: u64) -> u64 {
    let symbols = (16 + body_bits + 6).div_ceil(216);
    36 + 4 * streams + 4 * symbols
}

/// Same for an A-MPDU of `nf` subframes of 272 + 8000 + 32 bits.
pub fn hand_ampdu_us(nf: u64, streams: u64) -> u64 {
    hand_airtime_us(nf * (272 + 8000 + 32), streams)
}

/// Two-sided binomial standard error.
pub fn std_err(p: f64, n: u64) -> f64 {
    // Summed weights can land a hair outside [0, 1].
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / n as f64).sqrt()
}
