//! Airtimes, inter-frame spaces and protocol timers.
//!
//! Both the simulator and the saturation model take every duration from this
//! module. Frame airtime follows the VHT PPDU layout: a preamble whose length
//! grows with the number of VHT-LTF fields, followed by an integer number of
//! OFDM symbols carrying service bits, the MAC body and tail bits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, Result};
use crate::time::SimTime;

/// Fixed part of the VHT preamble (legacy fields plus VHT-SIG/STF), in µs.
const PREAMBLE_BASE_US: u64 = 36;
/// Duration of one VHT-LTF field, in µs.
const PREAMBLE_PER_STREAM_US: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McsParams {
    /// Data bits per OFDM symbol.
    pub l_dbps: u32,
    pub t_symbol: SimTime,
    /// Informational only.
    pub channel_width_mhz: u32,
}

impl Default for McsParams {
    /// 16-QAM rate 1/2 on 40 MHz: 108 data subcarriers x 4 bits x 1/2.
    fn default() -> Self {
        McsParams { l_dbps: 216, t_symbol: SimTime::from_micros(4), channel_width_mhz: 40 }
    }
}

/// Frame and field lengths in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLengths {
    pub l_data: u32,
    pub l_mac: u32,
    pub l_delimiter: u32,
    pub l_service: u32,
    pub l_tail: u32,
    pub l_rts: u32,
    pub l_mu_rts: u32,
    pub l_mu_cts: u32,
    pub l_mu_ack: u32,
    pub l_ant_cts: u32,
    pub l_g_cts: u32,
    pub l_g_ack: u32,
    /// Single-user CTS/ACK used by the reference scheme's uplink.
    pub l_cts: u32,
    pub l_ack: u32,
}

impl Default for FrameLengths {
    fn default() -> Self {
        FrameLengths {
            l_data: 8000,
            l_mac: 272,
            l_delimiter: 32,
            l_service: 16,
            l_tail: 6,
            l_rts: 160,
            l_mu_rts: 160,
            l_mu_cts: 160,
            l_mu_ack: 160,
            l_ant_cts: 120,
            l_g_cts: 112,
            l_g_ack: 112,
            l_cts: 160,
            l_ack: 160,
        }
    }
}

impl FrameLengths {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("l_data", self.l_data),
            ("l_mac", self.l_mac),
            ("l_delimiter", self.l_delimiter),
            ("l_service", self.l_service),
            ("l_tail", self.l_tail),
            ("l_rts", self.l_rts),
            ("l_mu_rts", self.l_mu_rts),
            ("l_mu_cts", self.l_mu_cts),
            ("l_mu_ack", self.l_mu_ack),
            ("l_ant_cts", self.l_ant_cts),
            ("l_g_cts", self.l_g_cts),
            ("l_g_ack", self.l_g_ack),
            ("l_cts", self.l_cts),
            ("l_ack", self.l_ack),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(invalid_config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IfsParams {
    pub sifs: SimTime,
    pub mu_sifs: SimTime,
    pub aifs: SimTime,
    /// Idle backoff slot (sigma).
    pub idle_slot: SimTime,
}

impl Default for IfsParams {
    fn default() -> Self {
        IfsParams {
            sifs: SimTime::from_micros(16),
            mu_sifs: SimTime::from_micros(20),
            aifs: SimTime::from_micros(34),
            idle_slot: SimTime::from_micros(9),
        }
    }
}

impl IfsParams {
    fn validate(&self) -> Result<()> {
        // MU-SIFS must let the AP's G-CTS (sent after SIFS) pre-empt a
        // second-round RTS, and must still read as "busy" against AIFS.
        if !(self.sifs < self.mu_sifs && self.mu_sifs < self.aifs) {
            return Err(invalid_config(format!(
                "need SIFS < MU-SIFS < AIFS, got {} / {} / {}",
                self.sifs, self.mu_sifs, self.aifs
            )));
        }
        if self.idle_slot == SimTime::ZERO {
            return Err(invalid_config("idle slot must be positive"));
        }
        Ok(())
    }
}

/// Timer values armed by senders and listeners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerSet {
    pub cts_timer: SimTime,
    pub eifs: SimTime,
    pub mu_cts_timer: SimTime,
    pub mu_eifs: SimTime,
    pub g_cts_timer: SimTime,
}

/// Complete PHY/MAC timing parameterization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub mcs: McsParams,
    pub lengths: FrameLengths,
    pub ifs: IfsParams,
}

impl Timing {
    pub fn validate(&self) -> Result<()> {
        if self.mcs.l_dbps == 0 {
            return Err(invalid_config("l_dbps must be positive"));
        }
        if self.mcs.t_symbol == SimTime::ZERO {
            return Err(invalid_config("symbol duration must be positive"));
        }
        self.lengths.validate()?;
        self.ifs.validate()
    }

    fn symbols(&self, payload_bits: u64) -> u64 {
        let bits = u64::from(self.lengths.l_service) + payload_bits + u64::from(self.lengths.l_tail);
        bits.div_ceil(u64::from(self.mcs.l_dbps))
    }

    /// Airtime of a single MPDU (control frame) with a `body_bits` MAC body.
    pub fn frame_airtime(&self, body_bits: u32, n_streams: u32) -> Result<SimTime> {
        let preamble = phy_preamble_duration(n_streams)?;
        Ok(preamble + self.mcs.t_symbol * self.symbols(u64::from(body_bits)))
    }

    /// Airtime of an A-MPDU of `n_frames` data MPDUs, each carrying a MAC
    /// header, the payload and one delimiter.
    pub fn ampdu_airtime(&self, n_frames: u32, n_streams: u32) -> Result<SimTime> {
        if n_frames == 0 {
            return Err(invalid_arg("an A-MPDU carries at least one frame"));
        }
        let preamble = phy_preamble_duration(n_streams)?;
        let l = &self.lengths;
        let per_mpdu = u64::from(l.l_mac) + u64::from(l.l_data) + u64::from(l.l_delimiter);
        Ok(preamble + self.mcs.t_symbol * self.symbols(u64::from(n_frames) * per_mpdu))
    }

    pub fn compute_timers(&self, n_antennas: u32, cw_2nd: u32) -> Result<TimerSet> {
        if n_antennas == 0 {
            return Err(invalid_arg("the AP needs at least one antenna"));
        }
        if cw_2nd == 0 {
            return Err(invalid_arg("CW_2nd must be at least 1"));
        }
        let ifs = &self.ifs;
        let t_ant_cts = self.frame_airtime(self.lengths.l_ant_cts, n_antennas)?;
        let t_mu_cts = self.frame_airtime(self.lengths.l_mu_cts, 1)?;
        let t_rts = self.frame_airtime(self.lengths.l_rts, 1)?;

        let cts_timer = ifs.sifs + t_ant_cts;
        let mu_cts_timer = (ifs.sifs + t_mu_cts) * u64::from(n_antennas);
        Ok(TimerSet {
            cts_timer,
            eifs: cts_timer + ifs.aifs,
            mu_cts_timer,
            mu_eifs: mu_cts_timer + ifs.aifs,
            g_cts_timer: (ifs.mu_sifs + t_rts) * u64::from(cw_2nd),
        })
    }
}

/// VHT preamble duration for `n_streams` VHT-LTF fields: 36 + 4·n µs.
pub fn phy_preamble_duration(n_streams: u32) -> Result<SimTime> {
    if n_streams == 0 {
        return Err(invalid_arg("preamble needs at least one stream"));
    }
    Ok(SimTime::from_micros(PREAMBLE_BASE_US + PREAMBLE_PER_STREAM_US * u64::from(n_streams)))
}

/// Airtimes of every frame type for one AP antenna count.
///
/// STA-transmitted frames use a single-stream preamble. Frames sent by the AP
/// as part of a multi-user exchange, and the synchronized uplink data burst,
/// carry one VHT-LTF per AP antenna. The single-user CTS/ACK of the
/// reference scheme is one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameTimes {
    pub n_streams: u32,
    pub rts: SimTime,
    pub mu_rts: SimTime,
    pub mu_cts: SimTime,
    pub mu_ack: SimTime,
    pub ant_cts: SimTime,
    pub g_cts: SimTime,
    pub g_ack: SimTime,
    pub cts: SimTime,
    pub ack: SimTime,
    timing: Timing,
}

impl FrameTimes {
    pub fn new(timing: &Timing, n_antennas: u32) -> Result<Self> {
        timing.validate()?;
        let l = &timing.lengths;
        let n = n_antennas;
        Ok(FrameTimes {
            n_streams: n,
            rts: timing.frame_airtime(l.l_rts, 1)?,
            mu_rts: timing.frame_airtime(l.l_mu_rts, n)?,
            mu_cts: timing.frame_airtime(l.l_mu_cts, 1)?,
            mu_ack: timing.frame_airtime(l.l_mu_ack, 1)?,
            ant_cts: timing.frame_airtime(l.l_ant_cts, n)?,
            g_cts: timing.frame_airtime(l.l_g_cts, n)?,
            g_ack: timing.frame_airtime(l.l_g_ack, n)?,
            cts: timing.frame_airtime(l.l_cts, 1)?,
            ack: timing.frame_airtime(l.l_ack, 1)?,
            timing: *timing,
        })
    }

    pub fn timing(&self) -> &Timing {
        &self.timing
    }

    /// A-MPDU airtime; `n_frames` must be at least one.
    pub fn ampdu(&self, n_frames: u32, n_streams: u32) -> SimTime {
        self.timing.ampdu_airtime(n_frames.max(1), n_streams.max(1)).expect("validated timing")
    }

    /// One second-round slot: MU-SIFS followed by an RTS.
    pub fn round2_slot(&self) -> SimTime {
        self.timing.ifs.mu_sifs + self.rts
    }
}
