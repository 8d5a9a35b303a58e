//! Turns `key = value` pairs (from a config file or from flags) into an
//! experiment description.

use mumac_core::des::Scheme;
use mumac_core::experiment::{parse_horizon, Experiment, Scenario, SweepSpec};

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("{key}: cannot parse '{v}'"))
}

/// `full` (or `m`, `auto`) leaves the M-derived default in place.
fn optional<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "full" | "m" | "auto" | "default" => Ok(None),
        _ => num(key, v).map(Some),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got '{v}'")),
    }
}

/// Loads in bit/s; accepts `kbps`, `Mbps` and `Gbps` suffixes.
pub fn parse_rate(key: &str, v: &str) -> Result<f64, String> {
    let t = v.trim();
    let lower = t.to_ascii_lowercase();
    let (body, scale) = [("gbps", 1e9), ("mbps", 1e6), ("kbps", 1e3), ("bps", 1.0)]
        .iter()
        .find_map(|(suf, s)| lower.strip_suffix(suf).map(|b| (b.trim().to_string(), *s)))
        .unwrap_or((lower.clone(), 1.0));
    let x: f64 = num(key, &body)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(format!("{key}: load must be finite and non-negative"));
    }
    Ok(x * scale)
}

/// Runtime knobs that are not part of the experiment itself.
#[derive(Debug, Default)]
pub struct RunOptions {
    pub workers: usize,
    pub compare: bool,
}

/// Applies one setting. Unknown keys are rejected so typos do not pass
/// silently.
pub fn apply(exp: &mut Experiment, opts: &mut RunOptions, key: &str, v: &str) -> Result<(), String> {
    let c = &mut exp.base;
    match key {
        // Written by the config echo; accepted on the way back in.
        "schema-version" => {}
        "scheme" => c.scheme = v.parse::<Scheme>().map_err(|e| e.to_string())?,
        "scenario" => exp.scenario = v.parse::<Scenario>().map_err(|e| e.to_string())?,
        "m" => c.m_stas = num(key, v)?,
        "n" => c.n_antennas = num(key, v)?,
        "cw" => c.cw = num(key, v)?,
        "cw2nd" | "cw-2nd" if v.trim().eq_ignore_ascii_case("m") => exp.cw_2nd_follows_m = true,
        "cw2nd" | "cw-2nd" => {
            c.cw_2nd = num(key, v)?;
            exp.cw_2nd_follows_m = false;
        }
        "max-stage" => c.max_backoff_stage = num(key, v)?,
        "q-sta" => c.q_sta = num(key, v)?,
        "q-ap" => c.q_ap = optional(key, v)?,
        "nf-ap" => c.nf_ap_cap = optional(key, v)?,
        "nf-sta" => c.nf_sta = num(key, v)?,
        "sta-load" => exp.sta_load = parse_rate(key, v)?,
        "ap-load" => exp.ap_load = Some(parse_rate(key, v)?),
        "horizon" => c.horizon = parse_horizon(v).map_err(|e| e.to_string())?,
        "warmup" => c.warmup_fraction = num(key, v)?,
        "seed" => c.seed = num(key, v)?,
        "replications" => exp.replications = num(key, v)?,
        "sweep" => exp.sweep = Some(v.parse::<SweepSpec>().map_err(|e| e.to_string())?),
        "analytic" => exp.analytic = boolean(key, v)?,
        "iterations" => exp.n_iteration = num(key, v)?,
        "mc-seed" => exp.mc_seed = num(key, v)?,
        "workers" => opts.workers = num(key, v)?,
        "compare" => opts.compare = boolean(key, v)?,
        _ => return Err(format!("unknown setting '{key}'")),
    }
    Ok(())
}
