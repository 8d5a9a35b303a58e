//! Reference scheme for comparison: multi-user downlink whose control replies
//! are sent in parallel, and a plain single-user RTS/CTS/DATA/ACK uplink.
//!
//! The parallel MU-CTS and ACK replies share one control-frame slot; they are
//! assumed to be separable at the AP, so they never collide.

use crate::frames::{Frame, FrameKind, NodeId};
use crate::protocol::{
    offer_frame, Backoff, Burst, ChannelEvent, Payload, Renewal, Station, StepCtx, TimerKind, TxQueue,
};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Contend,
    Defer,
    /// AP: own downlink sequence. STA: waiting for the CTS to its RTS.
    Exchange,
    /// AP: serving a STA's uplink. STA: sending data after a CTS.
    Uplink,
    /// STA addressed by an MU-RTS.
    DownlinkRx,
}

#[derive(Clone, Debug)]
pub struct LiMacAp {
    queue: TxQueue,
    backoff: Backoff,
    phase: Phase,
    targets: Vec<(NodeId, u32)>,
    uplink_sta: Option<NodeId>,
}

impl LiMacAp {
    pub fn new(capacity: usize, saturated: bool) -> Self {
        LiMacAp {
            queue: TxQueue::new(NodeId::AP, capacity, saturated),
            backoff: Backoff::default(),
            phase: Phase::Contend,
            targets: Vec::new(),
            uplink_sta: None,
        }
    }

    fn on_burst_end(&mut self, b: &Burst, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        if b.collided {
            if b.sent_by(NodeId::AP) {
                self.backoff.renew(Renewal::Collision, p, ctx.rng);
            }
            self.phase = Phase::Contend;
            ctx.resume(b.end + p.collision_wait);
            return;
        }
        let f = b.first();
        match f.kind {
            FrameKind::Rts => {
                self.phase = Phase::Uplink;
                self.uplink_sta = Some(f.tx);
                ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendCts);
            }
            FrameKind::Ampdu if !f.tx.is_ap() => ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendAck),
            FrameKind::Ack => {
                self.uplink_sta = None;
                self.phase = Phase::Contend;
                ctx.resume(ctx.now);
            }
            FrameKind::MuCts if self.phase == Phase::Exchange => {
                // All addressed STAs answer in the same slot.
                debug_assert_eq!(b.frames.len(), self.targets.len());
                ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendAmpdu);
            }
            FrameKind::MuAck if self.phase == Phase::Exchange => {
                for &(dest, n) in &self.targets {
                    for fr in self.queue.take_for(dest, n) {
                        ctx.metrics.record_downlink(fr.arrival, ctx.now, p.l_data);
                    }
                }
                self.targets.clear();
                self.queue.refill(ctx.now, ctx.traffic_rng, p.m_stas, ctx.metrics);
                self.backoff.renew(Renewal::InitiatorSuccess, p, ctx.rng);
                self.phase = Phase::Contend;
                ctx.resume(ctx.now);
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, kind: TimerKind, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        let t = &p.times;
        match kind {
            TimerKind::SendCts => {
                let sta = self.uplink_sta.expect("CTS answers an RTS");
                ctx.transmit(Frame::unicast(FrameKind::Cts, NodeId::AP, sta, t.cts));
            }
            TimerKind::SendAck => {
                let sta = self.uplink_sta.expect("ACK answers data");
                ctx.transmit(Frame::unicast(FrameKind::Ack, NodeId::AP, sta, t.ack));
            }
            TimerKind::SendAmpdu => {
                let group: Vec<NodeId> = self.targets.iter().map(|t| t.0).collect();
                let total: u32 = self.targets.iter().map(|t| t.1).sum();
                let airtime =
                    self.targets.iter().map(|&(_, n)| t.ampdu(n, p.n_antennas)).max().unwrap_or(SimTime::ZERO);
                ctx.transmit(Frame::ampdu(NodeId::AP, &group, total, airtime).expect("non-empty group"));
            }
            other => unreachable!("AP never arms {other:?}"),
        }
    }
}

impl Station for LiMacAp {
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
                if self.phase == Phase::Contend && self.backoff.on_slot(!self.queue.is_empty()) {
                    let p = ctx.params;
                    self.targets = self.queue.select_targets(p.n_antennas as usize, p.nf_ap_cap);
                    self.phase = Phase::Exchange;
                    ctx.metrics.r1_attempts_ap += 1;
                    let group: Vec<NodeId> = self.targets.iter().map(|t| t.0).collect();
                    ctx.transmit(Frame::mu_rts(NodeId::AP, &group, p.times.mu_rts).expect("queue has frames"));
                }
            }
            ChannelEvent::BurstStart(b) => {
                if b.collided && b.sent_by(NodeId::AP) {
                    ctx.metrics.r1_collisions_ap += 1;
                }
                if self.phase == Phase::Contend {
                    self.phase = Phase::Defer;
                }
            }
            ChannelEvent::BurstEnd(b) => self.on_burst_end(b, ctx),
            ChannelEvent::Timer(kind) => self.on_timer(kind, ctx),
        }
    }

    fn wants_slots(&self) -> bool {
        self.phase == Phase::Contend && (!self.queue.is_empty() || self.backoff.counter() > 0)
    }

    fn queue(&self) -> &TxQueue {
        &self.queue
    }

    fn offer(&mut self, p: Payload, idle_since: Option<SimTime>, ctx: &mut StepCtx<'_>) -> bool {
        let contending = self.phase == Phase::Contend;
        offer_frame(&mut self.queue, &mut self.backoff, contending, p, idle_since, ctx)
    }
}

#[derive(Clone, Debug)]
pub struct LiMacSta {
    id: NodeId,
    queue: TxQueue,
    backoff: Backoff,
    phase: Phase,
}

impl LiMacSta {
    pub fn new(id: NodeId, capacity: usize, saturated: bool) -> Self {
        LiMacSta {
            id,
            queue: TxQueue::new(id, capacity, saturated),
            backoff: Backoff::default(),
            phase: Phase::Contend,
        }
    }

    fn on_burst_end(&mut self, b: &Burst, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        if b.collided {
            if b.sent_by(self.id) {
                self.backoff.renew(Renewal::Collision, p, ctx.rng);
            }
            self.phase = Phase::Contend;
            ctx.resume(b.end + p.collision_wait);
            return;
        }
        let f = b.first();
        match f.kind {
            FrameKind::MuRts if f.addresses(self.id) => {
                self.phase = Phase::DownlinkRx;
                ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendMuCts);
            }
            FrameKind::Ampdu if f.tx.is_ap() && f.addresses(self.id) => {
                ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendMuAck);
            }
            FrameKind::Cts if f.addresses(self.id) => {
                self.phase = Phase::Uplink;
                ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendData);
            }
            FrameKind::Ack => {
                if f.addresses(self.id) {
                    let fr = self.queue.take_front(1);
                    for fr in fr {
                        ctx.metrics.record_uplink(self.id, fr.arrival, ctx.now, p.l_data);
                    }
                    self.queue.refill(ctx.now, ctx.traffic_rng, p.m_stas, ctx.metrics);
                    self.backoff.renew(Renewal::InitiatorSuccess, p, ctx.rng);
                }
                self.phase = Phase::Contend;
                ctx.resume(ctx.now);
            }
            FrameKind::MuAck => {
                self.phase = Phase::Contend;
                ctx.resume(ctx.now);
            }
            _ => {}
        }
    }
}

impl Station for LiMacSta {
    fn id(&self) -> NodeId {
        self.id
    }

    fn init(&mut self, ctx: &mut StepCtx<'_>) {
        self.queue.refill(ctx.now, ctx.traffic_rng, ctx.params.m_stas, ctx.metrics);
        self.backoff.draw(ctx.params, ctx.rng);
    }

    fn on_event(&mut self, ev: &ChannelEvent<'_>, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        match *ev {
            ChannelEvent::Slot => {
                if self.phase == Phase::Contend && self.backoff.on_slot(!self.queue.is_empty()) {
                    ctx.metrics.r1_attempts_sta += 1;
                    self.phase = Phase::Exchange;
                    ctx.transmit(Frame::rts(self.id, p.times.rts));
                }
            }
            ChannelEvent::BurstStart(b) => {
                if b.collided && b.sent_by(self.id) {
                    ctx.metrics.r1_collisions_sta += 1;
                }
                if self.phase == Phase::Contend {
                    self.phase = Phase::Defer;
                }
            }
            ChannelEvent::BurstEnd(b) => self.on_burst_end(b, ctx),
            ChannelEvent::Timer(kind) => {
                let f = match kind {
                    TimerKind::SendMuCts => Frame::control(FrameKind::MuCts, self.id, p.times.mu_cts),
                    TimerKind::SendMuAck => Frame::control(FrameKind::MuAck, self.id, p.times.mu_ack),
                    // Single-user data: one MPDU, one stream.
                    TimerKind::SendData => Frame::ampdu(self.id, &[], 1, p.times.ampdu(1, 1)).expect("one MPDU"),
                    other => unreachable!("STA never arms {other:?}"),
                };
                ctx.transmit(f);
            }
        }
    }

    fn wants_slots(&self) -> bool {
        self.phase == Phase::Contend && (!self.queue.is_empty() || self.backoff.counter() > 0)
    }

    fn queue(&self) -> &TxQueue {
        &self.queue
    }

    fn offer(&mut self, p: Payload, idle_since: Option<SimTime>, ctx: &mut StepCtx<'_>) -> bool {
        let contending = self.phase == Phase::Contend;
        offer_frame(&mut self.queue, &mut self.backoff, contending, p, idle_since, ctx)
    }
}
