use crate::frames::{Frame, FrameKind, NodeId};
use crate::time::SimTime;

use super::{
    draw_second_round, offer_frame, Backoff, ChannelEvent, Payload, Renewal, Station, StepCtx, TimerKind, TxQueue,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StaPhase {
    /// Counting down first-round slots (or idle with nothing to send).
    Contend,
    /// Medium busy with someone else's exchange; backoff frozen.
    Defer,
    /// Sent a first-round RTS, waiting for Ant-CTS/G-CTS.
    AwaitResponse,
    /// Addressed by an MU-RTS.
    DownlinkRx,
    /// Round-2 RTS armed.
    Contend2,
    /// Sent a round-2 RTS, waiting for G-CTS.
    AwaitGCts,
    /// Listed in G-CTS; sending data and waiting for G-ACK.
    Uplink,
}

/// Station running the two-round scheme.
#[derive(Clone, Debug)]
pub struct UniSta {
    id: NodeId,
    queue: TxQueue,
    backoff: Backoff,
    phase: StaPhase,
    initiator: bool,
    in_flight: usize,
}

impl UniSta {
    pub fn new(id: NodeId, capacity: usize, saturated: bool) -> Self {
        UniSta {
            id,
            queue: TxQueue::new(id, capacity, saturated),
            backoff: Backoff::default(),
            phase: StaPhase::Contend,
            initiator: false,
            in_flight: 0,
        }
    }

    pub fn phase(&self) -> StaPhase {
        self.phase
    }

    pub fn backoff(&self) -> Backoff {
        self.backoff
    }

    fn sequence_over(&mut self, ctx: &mut StepCtx<'_>) {
        self.phase = StaPhase::Contend;
        ctx.resume(ctx.now);
    }

    fn on_burst_end(&mut self, b: &super::Burst, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        if b.collided {
            if b.contention {
                if b.sent_by(self.id) {
                    self.backoff.renew(Renewal::Collision, p, ctx.rng);
                }
                self.phase = StaPhase::Contend;
                ctx.resume(b.end + p.collision_wait);
            } else if b.sent_by(self.id) {
                // A round-2 collision: no retry inside the round.
                self.phase = StaPhase::Defer;
            }
            return;
        }

        let f = b.first();
        match f.kind {
            FrameKind::MuRts => {
                if let Some(pos) = f.position_of(self.id) {
                    self.phase = StaPhase::DownlinkRx;
                    let at = b.end + p.ifs.sifs + (p.times.mu_cts + p.ifs.sifs) * pos as u64;
                    ctx.set_timer(at, TimerKind::SendMuCts);
                }
            }
            FrameKind::Rts => {
                if !b.contention && b.sent_by(self.id) {
                    self.phase = StaPhase::AwaitGCts;
                }
            }
            FrameKind::AntCts => {
                if self.phase == StaPhase::Defer && !self.queue.is_empty() {
                    let bo2 = draw_second_round(p.cw_2nd, ctx.rng);
                    let at = b.end + p.times.round2_slot() * u64::from(bo2) + p.ifs.mu_sifs;
                    ctx.set_timer(at, TimerKind::SendRts2);
                    self.phase = StaPhase::Contend2;
                }
            }
            FrameKind::GCts => {
                if f.addresses(self.id) {
                    self.initiator = self.phase == StaPhase::AwaitResponse;
                    self.phase = StaPhase::Uplink;
                    ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendData);
                } else {
                    self.phase = StaPhase::Defer;
                }
            }
            FrameKind::Ampdu => {
                if f.tx.is_ap() && f.addresses(self.id) {
                    ctx.set_timer(b.end + p.ifs.sifs, TimerKind::SendMuAck);
                }
            }
            FrameKind::MuAck => self.sequence_over(ctx),
            FrameKind::GAck => {
                if f.addresses(self.id) {
                    self.deliver(ctx);
                }
                self.sequence_over(ctx);
            }
            FrameKind::MuCts | FrameKind::Cts | FrameKind::Ack => {}
        }
    }

    fn deliver(&mut self, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        for f in self.queue.take_front(self.in_flight) {
            ctx.metrics.record_uplink(self.id, f.arrival, ctx.now, p.l_data);
        }
        self.in_flight = 0;
        self.queue.refill(ctx.now, ctx.traffic_rng, p.m_stas, ctx.metrics);
        let outcome = if self.initiator { Renewal::InitiatorSuccess } else { Renewal::JoinerSuccess };
        self.backoff.renew(outcome, p, ctx.rng);
    }

    fn on_timer(&mut self, kind: TimerKind, ctx: &mut StepCtx<'_>) {
        let p = ctx.params;
        match kind {
            TimerKind::SendMuCts => ctx.transmit(Frame::control(FrameKind::MuCts, self.id, p.times.mu_cts)),
            TimerKind::SendMuAck => ctx.transmit(Frame::control(FrameKind::MuAck, self.id, p.times.mu_ack)),
            TimerKind::SendRts2 => {
                ctx.metrics.r2_attempts += 1;
                self.phase = StaPhase::AwaitGCts;
                ctx.transmit(Frame::rts(self.id, p.times.rts));
            }
            TimerKind::SendData => {
                let n = self.queue.len().min(p.nf_sta as usize);
                debug_assert!(n > 0, "G-CTS winner without frames");
                self.in_flight = n;
                let airtime = p.times.ampdu(n as u32, p.n_antennas);
                let f = Frame::ampdu(self.id, &[], n as u32, airtime).expect("non-empty uplink A-MPDU");
                ctx.transmit(f);
            }
            other => unreachable!("STA never arms {other:?}"),
        }
    }
}

impl Station for UniSta {
    fn id(&self) -> NodeId {
        self.id
    }

    fn init(&mut self, ctx: &mut StepCtx<'_>) {
        self.queue.refill(ctx.now, ctx.traffic_rng, ctx.params.m_stas, ctx.metrics);
        self.backoff.draw(ctx.params, ctx.rng);
    }

    fn on_event(&mut self, ev: &ChannelEvent<'_>, ctx: &mut StepCtx<'_>) {
        match *ev {
            ChannelEvent::Slot => {
                if self.phase == StaPhase::Contend && self.backoff.on_slot(!self.queue.is_empty()) {
                    ctx.metrics.r1_attempts_sta += 1;
                    self.phase = StaPhase::AwaitResponse;
                    ctx.transmit(Frame::rts(self.id, ctx.params.times.rts));
                }
            }
            ChannelEvent::BurstStart(b) => {
                // Counted with the attempt so a warm-up cut never splits them.
                if b.collided && b.sent_by(self.id) {
                    if b.contention {
                        ctx.metrics.r1_collisions_sta += 1;
                    } else {
                        ctx.metrics.r2_collisions += 1;
                    }
                }
                match self.phase {
                    StaPhase::Contend => self.phase = StaPhase::Defer,
                    StaPhase::Contend2 if b.kind() == FrameKind::GCts => {
                        // Antennas are all taken or the round is over.
                        ctx.cancel_timer();
                        self.phase = StaPhase::Defer;
                    }
                    _ => {}
                }
            }
            ChannelEvent::BurstEnd(b) => self.on_burst_end(b, ctx),
            ChannelEvent::Timer(kind) => self.on_timer(kind, ctx),
        }
    }

    fn wants_slots(&self) -> bool {
        self.phase == StaPhase::Contend && (!self.queue.is_empty() || self.backoff.counter() > 0)
    }

    fn queue(&self) -> &TxQueue {
        &self.queue
    }

    fn offer(&mut self, p: Payload, idle_since: Option<SimTime>, ctx: &mut StepCtx<'_>) -> bool {
        let contending = self.phase == StaPhase::Contend;
        offer_frame(&mut self.queue, &mut self.backoff, contending, p, idle_since, ctx)
    }
}
