//! Node state machines and the pieces they share: backoff, queues and the
//! event/action interface to the simulation kernel.
//!
//! Nodes never touch the clock or the channel directly. The kernel hands each
//! node a [`ChannelEvent`] together with a [`StepCtx`], and the node answers by
//! pushing [`Action`]s. All nodes hear every transmission (no hidden
//! terminals), so a single shared contention timeline is enough; a node only
//! decides whether it counts down or transmits at each slot boundary.

mod ap;
mod sta;

pub use ap::UniAp;
pub use sta::UniSta;

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::des::metrics::Metrics;
use crate::frames::{Frame, FrameKind, NodeId};
use crate::time::SimTime;
use crate::timing::{FrameTimes, IfsParams, TimerSet};

/// Per-run constants every node reads.
#[derive(Clone, Debug)]
pub struct ProtocolParams {
    pub m_stas: usize,
    pub n_antennas: u32,
    pub cw: u32,
    pub cw_2nd: u32,
    /// Binary exponential backoff stages; 0 keeps CW fixed.
    pub max_backoff_stage: u32,
    pub nf_ap_cap: u32,
    pub nf_sta: u32,
    pub l_data: u32,
    pub times: FrameTimes,
    pub timers: TimerSet,
    pub ifs: IfsParams,
    /// How long every node defers after a first-round collision ends, before
    /// counting AIFS again.
    pub collision_wait: SimTime,
    pub saturated: bool,
}

/// Multi-frame bursts start together; the kernel groups every frame that
/// begins at the same instant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Burst {
    pub frames: Vec<Frame>,
    pub collided: bool,
    /// Started at a first-round slot boundary.
    pub contention: bool,
    pub start: SimTime,
    pub end: SimTime,
}

impl Burst {
    pub fn sent_by(&self, node: NodeId) -> bool {
        self.frames.iter().any(|f| f.tx == node)
    }

    /// Kind of the burst's frames; a burst never mixes kinds.
    pub fn kind(&self) -> FrameKind {
        self.frames[0].kind
    }

    pub fn first(&self) -> &Frame {
        &self.frames[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimerKind {
    SendMuCts,
    SendMuAck,
    SendAmpdu,
    SendAntCts,
    SendRts2,
    SendGCts,
    SendData,
    SendGAck,
    SendCts,
    SendAck,
}

impl TimerKind {
    pub fn name(self) -> &'static str {
        match self {
            TimerKind::SendMuCts => "send_mu_cts",
            TimerKind::SendMuAck => "send_mu_ack",
            TimerKind::SendAmpdu => "send_ampdu",
            TimerKind::SendAntCts => "send_ant_cts",
            TimerKind::SendRts2 => "send_rts2",
            TimerKind::SendGCts => "send_g_cts",
            TimerKind::SendData => "send_data",
            TimerKind::SendGAck => "send_g_ack",
            TimerKind::SendCts => "send_cts",
            TimerKind::SendAck => "send_ack",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ChannelEvent<'a> {
    /// A first-round slot boundary: AIFS plus a whole number of idle slots
    /// after the medium last became free.
    Slot,
    BurstStart(&'a Burst),
    BurstEnd(&'a Burst),
    /// A timer this node armed, still current.
    Timer(TimerKind),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// Start transmitting now.
    Transmit(Frame),
    /// Arm the node's timer; replaces any timer already armed.
    SetTimer {
        at: SimTime,
        kind: TimerKind,
    },
    CancelTimer,
    /// The node is ready to contend; AIFS is counted from `from`.
    Resume {
        from: SimTime,
    },
}

pub struct StepCtx<'a> {
    pub now: SimTime,
    pub params: &'a ProtocolParams,
    /// Backoff draws.
    pub rng: &'a mut ChaCha8Rng,
    /// Destinations of regenerated frames in saturated mode.
    pub traffic_rng: &'a mut ChaCha8Rng,
    pub metrics: &'a mut Metrics,
    pub actions: &'a mut Vec<Action>,
}

impl StepCtx<'_> {
    pub fn transmit(&mut self, f: Frame) {
        self.actions.push(Action::Transmit(f));
    }

    pub fn set_timer(&mut self, at: SimTime, kind: TimerKind) {
        self.actions.push(Action::SetTimer { at, kind });
    }

    pub fn cancel_timer(&mut self) {
        self.actions.push(Action::CancelTimer);
    }

    pub fn resume(&mut self, from: SimTime) {
        self.actions.push(Action::Resume { from });
    }
}

/// A node on the shared channel. Node 0 is the AP.
pub trait Station: Send {
    fn id(&self) -> NodeId;

    /// Draws the initial backoff and, in saturated mode, fills the queue.
    fn init(&mut self, ctx: &mut StepCtx<'_>);

    fn on_event(&mut self, ev: &ChannelEvent<'_>, ctx: &mut StepCtx<'_>);

    /// Whether the node needs slot boundaries: it is contending and either has
    /// a frame or is still counting down.
    fn wants_slots(&self) -> bool;

    fn queue(&self) -> &TxQueue;

    /// A newly generated frame. Returns false if the queue was full.
    /// `idle_since` is when the medium last became free, if no exchange is in
    /// progress.
    fn offer(&mut self, p: Payload, idle_since: Option<SimTime>, ctx: &mut StepCtx<'_>) -> bool;
}

/// Outcome of a transmission cycle, as seen by one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Renewal {
    /// Won the first round and delivered.
    InitiatorSuccess,
    /// Delivered in the second round or as a downlink receiver.
    JoinerSuccess,
    Collision,
    /// Did not transmit in the first round.
    Loser,
}

/// First-round backoff counter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Backoff {
    counter: u32,
    stage: u32,
}

impl Backoff {
    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    /// Current contention window, doubled once per backoff stage.
    pub fn window(&self, p: &ProtocolParams) -> u32 {
        p.cw.saturating_mul(1u32.checked_shl(self.stage).unwrap_or(u32::MAX))
    }

    pub fn draw(&mut self, p: &ProtocolParams, rng: &mut ChaCha8Rng) {
        self.counter = rng.random_range(0..self.window(p));
    }

    /// Initiators and colliders draw afresh; joiners and losers keep their
    /// frozen counter.
    pub fn renew(&mut self, outcome: Renewal, p: &ProtocolParams, rng: &mut ChaCha8Rng) {
        match outcome {
            Renewal::InitiatorSuccess => {
                self.stage = 0;
                self.draw(p, rng);
            }
            Renewal::Collision => {
                self.stage = (self.stage + 1).min(p.max_backoff_stage);
                self.draw(p, rng);
            }
            Renewal::JoinerSuccess | Renewal::Loser => {}
        }
    }

    /// One slot boundary. Returns true if the node transmits now; otherwise
    /// the counter moves one step towards zero (also with an empty queue).
    pub fn on_slot(&mut self, has_frame: bool) -> bool {
        if self.counter == 0 {
            has_frame
        } else {
            self.counter -= 1;
            false
        }
    }
}

/// Second-round backoff, drawn fresh at every round-2 start.
pub fn draw_second_round(cw_2nd: u32, rng: &mut ChaCha8Rng) -> u32 {
    rng.random_range(0..cw_2nd)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Payload {
    pub arrival: SimTime,
    pub dest: NodeId,
}

impl Payload {
    /// A frame generated at `owner`: STAs send to the AP, the AP to a STA
    /// chosen uniformly.
    pub fn generate(owner: NodeId, now: SimTime, m_stas: usize, rng: &mut ChaCha8Rng) -> Payload {
        let dest = if owner.is_ap() { NodeId::sta(rng.random_range(0..m_stas)) } else { NodeId::AP };
        Payload { arrival: now, dest }
    }
}

/// FIFO with tail drop. In saturated mode it is topped up to capacity after
/// every removal.
#[derive(Clone, Debug)]
pub struct TxQueue {
    owner: NodeId,
    frames: VecDeque<Payload>,
    capacity: usize,
    saturated: bool,
}

impl TxQueue {
    pub fn new(owner: NodeId, capacity: usize, saturated: bool) -> Self {
        TxQueue { owner, frames: VecDeque::with_capacity(capacity), capacity, saturated }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Payload> {
        self.frames.iter()
    }

    pub fn push(&mut self, p: Payload) -> bool {
        if self.frames.len() >= self.capacity {
            return false;
        }
        self.frames.push_back(p);
        true
    }

    /// Tops the queue up in saturated mode; no-op otherwise.
    pub fn refill(&mut self, now: SimTime, ctx_rng: &mut ChaCha8Rng, m_stas: usize, metrics: &mut Metrics) {
        if !self.saturated {
            return;
        }
        let missing = self.capacity - self.frames.len();
        for _ in 0..missing {
            self.frames.push_back(Payload::generate(self.owner, now, m_stas, ctx_rng));
        }
        metrics.record_generated(self.owner, missing as u64);
    }

    pub fn take_front(&mut self, n: usize) -> Vec<Payload> {
        let n = n.min(self.frames.len());
        self.frames.drain(..n).collect()
    }

    /// Downlink group selection: scanning head to tail, the first `n_max`
    /// distinct destinations, each with up to `nf_cap` of its queued frames.
    pub fn select_targets(&self, n_max: usize, nf_cap: u32) -> Vec<(NodeId, u32)> {
        let mut out: Vec<(NodeId, u32)> = Vec::with_capacity(n_max);
        for p in &self.frames {
            if let Some(entry) = out.iter_mut().find(|(d, _)| *d == p.dest) {
                entry.1 = (entry.1 + 1).min(nf_cap);
            } else if out.len() < n_max {
                out.push((p.dest, 1));
            }
        }
        out
    }

    /// Removes the first `count` frames addressed to `dest`.
    pub fn take_for(&mut self, dest: NodeId, count: u32) -> Vec<Payload> {
        let mut taken = Vec::with_capacity(count as usize);
        let mut kept = VecDeque::with_capacity(self.frames.len());
        for p in self.frames.drain(..) {
            if p.dest == dest && taken.len() < count as usize {
                taken.push(p);
            } else {
                kept.push_back(p);
            }
        }
        self.frames = kept;
        taken
    }
}

/// Common arrival handling. A frame reaching an empty queue whose counter
/// already expired goes out at the next boundary only if the medium has been
/// idle for AIFS; otherwise a fresh backoff is drawn.
pub(crate) fn offer_frame(
    queue: &mut TxQueue,
    backoff: &mut Backoff,
    contending: bool,
    p: Payload,
    idle_since: Option<SimTime>,
    ctx: &mut StepCtx<'_>,
) -> bool {
    let was_empty = queue.is_empty();
    if !queue.push(p) {
        return false;
    }
    if was_empty && backoff.counter() == 0 {
        let idle_long_enough = idle_since.is_some_and(|t| ctx.now >= t + ctx.params.ifs.aifs);
        if !(contending && idle_long_enough) {
            backoff.draw(ctx.params, ctx.rng);
        }
    }
    true
}
