//! MAC frame taxonomy and group addressing.
//!
//! A Group-ID is modelled as the explicit ordered list of node ids a frame
//! addresses; the order is the order in which addressed STAs respond.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl NodeId {
    /// The access point is always node 0; STAs are numbered from 1.
    pub const AP: NodeId = NodeId(0);

    pub fn is_ap(self) -> bool {
        self == NodeId::AP
    }

    pub fn sta(index: usize) -> NodeId {
        NodeId(u16::try_from(index + 1).expect("STA index fits in u16"))
    }

    /// Zero-based STA index; panics for the AP.
    pub fn sta_index(self) -> usize {
        assert!(!self.is_ap(), "the AP has no STA index");
        usize::from(self.0) - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ap() {
            f.write_str("AP")
        } else {
            write!(f, "STA{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    Rts,
    MuRts,
    MuCts,
    MuAck,
    AntCts,
    GCts,
    GAck,
    Ampdu,
    /// Single-user CTS of the reference scheme.
    Cts,
    /// Single-user ACK of the reference scheme.
    Ack,
}

impl FrameKind {
    /// Frames sent after a backoff countdown; simultaneous ones collide.
    pub fn is_contention(self) -> bool {
        matches!(self, FrameKind::Rts | FrameKind::MuRts)
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Rts => "RTS",
            FrameKind::MuRts => "MU-RTS",
            FrameKind::MuCts => "MU-CTS",
            FrameKind::MuAck => "MU-ACK",
            FrameKind::AntCts => "Ant-CTS",
            FrameKind::GCts => "G-CTS",
            FrameKind::GAck => "G-ACK",
            FrameKind::Ampdu => "A-MPDU",
            FrameKind::Cts => "CTS",
            FrameKind::Ack => "ACK",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub kind: FrameKind,
    pub tx: NodeId,
    /// Addressed nodes in response order. Empty for frames with a single
    /// implicit receiver (the AP for STA frames).
    pub group: Vec<NodeId>,
    /// Aggregated MPDUs (A-MPDU only; total across the group for a downlink
    /// multi-user PPDU).
    pub n_subframes: u32,
    /// Antennas left for the second round (Ant-CTS only).
    pub advertised_antennas: u32,
    pub airtime: SimTime,
}

impl Frame {
    fn new(kind: FrameKind, tx: NodeId, airtime: SimTime) -> Self {
        Frame { kind, tx, group: Vec::new(), n_subframes: 0, advertised_antennas: 0, airtime }
    }

    pub fn addresses(&self, node: NodeId) -> bool {
        self.group.contains(&node)
    }

    /// Response slot of `node` within the group.
    pub fn position_of(&self, node: NodeId) -> Option<usize> {
        self.group.iter().position(|&n| n == node)
    }

    /// Plain RTS from a STA to the AP.
    pub fn rts(sta: NodeId, airtime: SimTime) -> Frame {
        Frame::new(FrameKind::Rts, sta, airtime)
    }

    /// Control response carrying no addressing (MU-CTS, MU-ACK, CTS, ACK).
    pub fn control(kind: FrameKind, tx: NodeId, airtime: SimTime) -> Frame {
        Frame::new(kind, tx, airtime)
    }

    /// Single-user CTS or ACK from the AP to one STA.
    pub fn unicast(kind: FrameKind, ap: NodeId, sta: NodeId, airtime: SimTime) -> Frame {
        debug_assert!(matches!(kind, FrameKind::Cts | FrameKind::Ack));
        let mut f = Frame::new(kind, ap, airtime);
        f.group = vec![sta];
        f
    }

    /// MU-RTS announcing a downlink group; targets reply in listed order.
    pub fn mu_rts(ap: NodeId, targets: &[NodeId], airtime: SimTime) -> Result<Frame> {
        check_group("MU-RTS", targets)?;
        let mut f = Frame::new(FrameKind::MuRts, ap, airtime);
        f.group = targets.to_vec();
        Ok(f)
    }

    /// Ant-CTS advertising the antennas still free after the first round.
    pub fn ant_cts(ap: NodeId, remaining_antennas: u32, airtime: SimTime) -> Result<Frame> {
        if remaining_antennas == 0 {
            return Err(invalid_arg(
                "Ant-CTS needs at least one free antenna; a single-antenna AP answers with G-CTS directly",
            ));
        }
        let mut f = Frame::new(FrameKind::AntCts, ap, airtime);
        f.advertised_antennas = remaining_antennas;
        Ok(f)
    }

    /// G-CTS listing every STA that won either contention round.
    pub fn g_cts(ap: NodeId, winners: &[NodeId], airtime: SimTime) -> Result<Frame> {
        check_group("G-CTS", winners)?;
        let mut f = Frame::new(FrameKind::GCts, ap, airtime);
        f.group = winners.to_vec();
        Ok(f)
    }

    /// G-ACK for the uplink burst sent by `group`.
    pub fn g_ack(ap: NodeId, group: &[NodeId], airtime: SimTime) -> Result<Frame> {
        check_group("G-ACK", group)?;
        let mut f = Frame::new(FrameKind::GAck, ap, airtime);
        f.group = group.to_vec();
        Ok(f)
    }

    /// Data A-MPDU. Downlink PPDUs address `group`; uplink ones leave it empty.
    pub fn ampdu(tx: NodeId, group: &[NodeId], n_subframes: u32, airtime: SimTime) -> Result<Frame> {
        if n_subframes == 0 {
            return Err(invalid_arg("A-MPDU needs at least one subframe"));
        }
        if tx.is_ap() {
            check_group("A-MPDU", group)?;
        }
        let mut f = Frame::new(FrameKind::Ampdu, tx, airtime);
        f.group = group.to_vec();
        f.n_subframes = n_subframes;
        Ok(f)
    }
}

fn check_group(what: &str, group: &[NodeId]) -> Result<()> {
    if group.is_empty() {
        return Err(invalid_arg(format!("{what} needs a non-empty group")));
    }
    for (i, n) in group.iter().enumerate() {
        if n.is_ap() {
            return Err(invalid_arg(format!("{what} group cannot contain the AP")));
        }
        if group[..i].contains(n) {
            return Err(invalid_arg(format!("{what} group lists {n} twice")));
        }
    }
    Ok(())
}
