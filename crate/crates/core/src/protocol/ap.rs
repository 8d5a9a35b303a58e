use crate::frames::{Frame, FrameKind, NodeId};
use crate::time::SimTime;

use super::{offer_frame, Backoff, Burst, ChannelEvent, Payload, Renewal, Station, StepCtx, TimerKind, TxQueue};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApPhase {
    Contend,
    Defer,
    /// Running its own MU-RTS / MU-CTS / A-MPDU / MU-ACK sequence.
    Downlink,
    /// Serving an uplink exchange started by a STA's RTS.
    Uplink,
}

/// Access point running the two-round scheme.
#[derive(Clone, Debug)]
pub struct UniAp {
    queue: TxQueue,
    backoff: Backoff,
    phase: ApPhase,
    /// Downlink group with the frame count per destination.
    targets: Vec<(NodeId, u32)>,
    mu_cts_received: usize,
    winners: Vec<NodeId>,
    available: u32,
    round2_open: bool,
}

impl UniAp {
    pub fn new(capacity: usize, saturated: bool) -> Self {
        UniAp {
            queue: TxQueue::new(NodeId::AP, capacity, saturated),
            backoff: Backoff::default(),
            phase: ApPhase::Contend,
            targets: Vec::new(),
            mu_cts_received: 0,
            winners: Vec::new(),
            available: 0,
            round2_open: false,
        }
    }

    pub fn phase(&self) -> ApPhase {
        self.phase
    }

    /// Antennas not yet claimed in the current uplink exchange.
    pub fn available_antennas(&self) -> u32 {
        self.available
    }

    fn start_downlink(&mut self, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        self.targets = self.queue.select_targets(p.n_antennas as usize, p.nf_ap_cap);
        self.mu_cts_received = 0;
        self.phase = ApPhase::Downlink;
        ctx.metrics.r1_attempts_ap += 1;
        let group: Vec<NodeId> = self.targets.iter().map(|t| t.0).collect();
        ctx.transmit(Frame::mu_rts(NodeId::AP, &group, p.times.mu_rts).expect("queue has frames"));
    }

    fn on_burst_end(&mut self, b: &Burst, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        if b.collided {
            if b.contention {
                if b.sent_by(NodeId::AP) {
                    self.backoff.renew(Renewal::Collision, p, ctx.rng);
                }
                self.phase = ApPhase::Contend;
                ctx.resume(b.end + p.collision_wait);
            }
            return;
        }

        let f = b.first();
        match f.kind {
            FrameKind::Rts if b.contention => {
                self.phase = ApPhase::Uplink;
                self.winners.clear();
                self.winners.push(f.tx);
                if p.n_antennas > 1 {
                    self.available = p.n_antennas - 1;
                    ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendAntCts);
                } else {
                    self.available = 0;
                    ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendGCts);
                }
            }
            FrameKind::Rts => {
                if self.round2_open {
                    self.winners.push(f.tx);
                    self.available -= 1;
                    if self.available == 0 {
                        self.round2_open = false;
                        ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendGCts);
                    }
                }
            }
            FrameKind::AntCts => {
                // Deadline for the round: CW_2nd slots, then G-CTS after SIFS.
                self.round2_open = true;
                ctx.set_timer(b.end + p.timers.g_cts_timer + p.ifs.sifs, TimerKind::SendGCts);
            }
            FrameKind::GCts => self.round2_open = false,
            FrameKind::Ampdu if !f.tx.is_ap() => {
                ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendGAck);
            }
            FrameKind::GAck => {
                self.winners.clear();
                self.phase = ApPhase::Contend;
                ctx.resume(ctx.now);
            }
            FrameKind::MuCts if self.phase == ApPhase::Downlink => {
                self.mu_cts_received += b.frames.len();
                if self.mu_cts_received == self.targets.len() {
                    ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendAmpdu);
                }
            }
            FrameKind::MuAck if self.phase == ApPhase::Downlink => {
                self.deliver(ctx);
                self.phase = ApPhase::Contend;
                ctx.resume(ctx.now);
            }
            _ => {}
        }
    }

    fn deliver(&mut self, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        for &(dest, n) in &self.targets {
            for f in self.queue.take_for(dest, n) {
                ctx.metrics.record_downlink(f.arrival, ctx.now, p.l_data);
            }
        }
        self.targets.clear();
        self.queue.refill(ctx.now, ctx.traffic_rng, p.m_stas, ctx.metrics);
        self.backoff.renew(Renewal::InitiatorSuccess, p, ctx.rng);
    }

    fn on_timer(&mut self, kind: TimerKind, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        let t = &p.times;
        let f = match kind {
            TimerKind::SendAntCts => Frame::ant_cts(NodeId::AP, self.available, t.ant_cts),
            TimerKind::SendGCts => Frame::g_cts(NodeId::AP, &self.winners, t.g_cts),
            TimerKind::SendGAck => Frame::g_ack(NodeId::AP, &self.winners, t.g_ack),
            TimerKind::SendAmpdu => {
                let group: Vec<NodeId> = self.targets.iter().map(|t| t.0).collect();
                let total: u32 = self.targets.iter().map(|t| t.1).sum();
                // Streams run in parallel; the PPDU lasts as long as the longest.
                let airtime =
                    self.targets.iter().map(|&(_, n)| t.ampdu(n, p.n_antennas)).max().unwrap_or(SimTime::ZERO);
                Frame::ampdu(NodeId::AP, &group, total, airtime)
            }
            other => unreachable!("AP never arms {other:?}"),
        };
        ctx.transmit(f.expect("AP frames are well formed"));
    }
}

impl Station for UniAp {
    fn id(&self) -> NodeId {
        NodeId::AP
    }

    fn init(&mut self, ctx: &mut StepCtx<'_>) {
        self.queue.refill(ctx.now, ctx.traffic_rng, ctx.params.m_stas, ctx.metrics);
        self.backoff.draw(ctx.params, ctx.rng);
    }

    fn on_event(&mut self, ev: &ChannelEvent<'_>, ctx: &mut StepCtx<'_>) {
        match *ev {
            ChannelEvent::Slot => {
                if self.phase == ApPhase::Contend && self.backoff.on_slot(!self.queue.is_empty()) {
                    self.start_downlink(ctx);
                }
            }
            ChannelEvent::BurstStart(b) => {
                // Counted with the attempt so a warm-up cut never splits them.
                if b.collided && b.contention && b.sent_by(NodeId::AP) {
                    ctx.metrics.r1_collisions_ap += 1;
                }
                if self.phase == ApPhase::Contend {
                    self.phase = ApPhase::Defer;
                }
            }
            ChannelEvent::BurstEnd(b) => self.on_burst_end(b, ctx),
            ChannelEvent::Timer(kind) => self.on_timer(kind, ctx),
        }
    }

    fn wants_slots(&self) -> bool {
        self.phase == ApPhase::Contend && (!self.queue.is_empty() || self.backoff.counter() > 0)
    }

    fn queue(&self) -> &TxQueue {
        &self.queue
    }

    fn offer(&mut self, p: Payload, idle_since: Option<SimTime>, ctx: &mut StepCtx<'_>) -> bool {
        let contending = self.phase == ApPhase::Contend;
        offer_frame(&mut self.queue, &mut self.backoff, contending, p, idle_since, ctx)
    }
}
