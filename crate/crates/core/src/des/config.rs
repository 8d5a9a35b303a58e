use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Error, Result};
use crate::protocol::ProtocolParams;
use crate::time::SimTime;
use crate::timing::{FrameTimes, Timing};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Two-round down/up-link multi-user scheme.
    UniMumac,
    /// Parallel-reply multi-user downlink, single-user uplink.
    LiMac,
    /// Single-antenna, single-user exchange in both directions.
    Baseline,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::UniMumac => "uni-mumac",
            Scheme::LiMac => "li-mac",
            Scheme::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "uni-mumac" | "unimumac" | "uni" => Ok(Scheme::UniMumac),
            "li-mac" | "limac" => Ok(Scheme::LiMac),
            "baseline" | "dcf" => Ok(Scheme::Baseline),
            _ => Err(invalid_config(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Traffic {
    /// Every queue is kept full.
    Saturated,
    /// Poisson arrivals; loads in bit/s per STA and for the AP.
    Poisson { sta_load: f64, ap_load: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    Time(SimTime),
    /// Number of contention slot boundaries.
    Slots(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub m_stas: usize,
    pub n_antennas: u32,
    pub cw: u32,
    pub cw_2nd: u32,
    /// Binary exponential backoff stages; 0 keeps CW fixed.
    pub max_backoff_stage: u32,
    pub traffic: Traffic,
    pub q_sta: usize,
    /// AP queue capacity; `None` means M².
    pub q_ap: Option<usize>,
    /// Frames the AP may aggregate per destination; `None` means M.
    pub nf_ap_cap: Option<u32>,
    pub nf_sta: u32,
    pub horizon: Horizon,
    /// Leading share of the horizon excluded from the report.
    pub warmup_fraction: f64,
    pub seed: u64,
    /// Selects an independent random stream for replications and sweep points.
    pub run_index: u64,
    pub timing: Timing,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scheme: Scheme::UniMumac,
            m_stas: 8,
            n_antennas: 4,
            cw: 32,
            cw_2nd: 8,
            max_backoff_stage: 0,
            traffic: Traffic::Saturated,
            q_sta: 50,
            q_ap: None,
            nf_ap_cap: None,
            nf_sta: 1,
            horizon: Horizon::Time(SimTime::from_secs(60)),
            warmup_fraction: 0.05,
            seed: 1,
            run_index: 0,
            timing: Timing::default(),
        }
    }
}

impl SimConfig {
    pub fn q_ap(&self) -> usize {
        self.q_ap.unwrap_or(self.m_stas * self.m_stas)
    }

    pub fn nf_ap_cap(&self) -> u32 {
        self.nf_ap_cap.unwrap_or(self.m_stas as u32)
    }

    /// Antennas the scheme actually uses; the baseline is single-antenna.
    pub fn effective_antennas(&self) -> u32 {
        match self.scheme {
            Scheme::Baseline => 1,
            _ => self.n_antennas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_stas == 0 {
            return Err(invalid_config("at least one STA is required"));
        }
        if self.m_stas >= usize::from(u16::MAX) {
            return Err(invalid_config("too many STAs"));
        }
        if self.n_antennas == 0 {
            return Err(invalid_config("the AP needs at least one antenna"));
        }
        if self.cw == 0 || self.cw_2nd == 0 {
            return Err(invalid_config("CW and CW_2nd must be at least 1"));
        }
        if self.max_backoff_stage > 16 {
            return Err(invalid_config("at most 16 backoff stages"));
        }
        if self.q_sta == 0 || self.q_ap() == 0 {
            return Err(invalid_config("queue capacities must be positive"));
        }
        if self.nf_sta == 0 || self.nf_ap_cap() == 0 {
            return Err(invalid_config("aggregation limits must be positive"));
        }
        if let Traffic::Poisson { sta_load, ap_load } = self.traffic {
            for (name, v) in [("STA load", sta_load), ("AP load", ap_load)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid_config(format!("{name} must be finite and non-negative, got {v}")));
                }
            }
        }
        match self.horizon {
            Horizon::Time(t) if t == SimTime::ZERO => return Err(invalid_config("horizon must be positive")),
            Horizon::Slots(0) => return Err(invalid_config("horizon must be positive")),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(invalid_config("warm-up fraction must be in [0, 1)"));
        }
        self.timing.validate()
    }

    pub fn protocol_params(&self) -> Result<ProtocolParams> {
        self.validate()?;
        let n = self.effective_antennas();
        let times = FrameTimes::new(&self.timing, n)?;
        let timers = self.timing.compute_timers(n, self.cw_2nd)?;
        let ifs = self.timing.ifs;
        let collision_wait = match self.scheme {
            Scheme::UniMumac => timers.mu_cts_timer,
            // Replies come back in one parallel slot.
            Scheme::LiMac | Scheme::Baseline => ifs.sifs + times.mu_cts,
        };
        Ok(ProtocolParams {
            m_stas: self.m_stas,
            n_antennas: n,
            cw: self.cw,
            cw_2nd: self.cw_2nd,
            max_backoff_stage: self.max_backoff_stage,
            nf_ap_cap: self.nf_ap_cap(),
            nf_sta: self.nf_sta,
            l_data: self.timing.lengths.l_data,
            times,
            timers,
            ifs,
            collision_wait,
            saturated: self.traffic == Traffic::Saturated,
        })
    }

    /// One-line description used in error messages and output echoes.
    pub fn summary(&self) -> String {
        let traffic = match self.traffic {
            Traffic::Saturated => "saturated".to_string(),
            Traffic::Poisson { sta_load, ap_load } => format!("poisson sta={sta_load} ap={ap_load}"),
        };
        format!(
            "scheme={} m={} n={} cw={} cw2nd={} nf_ap={} q_ap={} traffic=({traffic}) seed={} run={}",
            self.scheme,
            self.m_stas,
            self.n_antennas,
            self.cw,
            self.cw_2nd,
            self.nf_ap_cap(),
            self.q_ap(),
            self.seed,
            self.run_index
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_table_values() {
        let c = SimConfig::default();
        assert_eq!(c.q_ap(), 64);
        assert_eq!(c.nf_ap_cap(), 8);
        assert_eq!(c.q_sta, 50);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SimConfig { m_stas: 0, ..SimConfig::default() },
            SimConfig { n_antennas: 0, ..SimConfig::default() },
            SimConfig { cw_2nd: 0, ..SimConfig::default() },
            SimConfig { traffic: Traffic::Poisson { sta_load: -1.0, ap_load: 0.0 }, ..SimConfig::default() },
            SimConfig { horizon: Horizon::Slots(0), ..SimConfig::default() },
            SimConfig { warmup_fraction: 1.0, ..SimConfig::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::UniMumac, Scheme::LiMac, Scheme::Baseline] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("csma".parse::<Scheme>().is_err());
    }

    #[test]
    fn collision_wait_per_scheme() {
        let us = SimTime::from_micros;
        let uni = SimConfig::default().protocol_params().unwrap();
        assert_eq!(uni.collision_wait, us(240));
        let li = SimConfig { scheme: Scheme::LiMac, ..SimConfig::default() }.protocol_params().unwrap();
        assert_eq!(li.collision_wait, us(60));
        let base = SimConfig { scheme: Scheme::Baseline, ..SimConfig::default() }.protocol_params().unwrap();
        assert_eq!(base.n_antennas, 1);
        assert_eq!(base.times.mu_rts, us(44));
    }
}
