use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::frames::{Frame, NodeId};
use crate::limac::{LiMacAp, LiMacSta};
use crate::protocol::{
    Action, Burst, ChannelEvent, Payload, ProtocolParams, Station, StepCtx, TimerKind, UniAp, UniSta,
};
use crate::time::SimTime;

use super::config::{Horizon, Scheme, SimConfig, Traffic};
use super::metrics::{finalize, Conservation, Metrics, Report};
use super::queue::EventQueue;
use super::trace::Tracer;

// Ordering of events that fall on the same instant.
const CLASS_BURST_END: u8 = 0;
const CLASS_TIMER: u8 = 1;
const CLASS_ARRIVAL: u8 = 2;
const CLASS_SLOT: u8 = 3;
const CLASS_START: u8 = 4;
const CLASS_CONTROL: u8 = 5;

enum Event {
    BurstEnd,
    Timer { node: usize, seq: u64, kind: TimerKind },
    Arrival { node: usize },
    Slot { epoch: u64, index: u64 },
    StartBurst,
    Warmup,
    Horizon,
}

/// Shared first-round contention timeline. Boundaries sit at
/// `origin + AIFS + index·σ`.
#[derive(Default)]
struct Contention {
    open: bool,
    origin: SimTime,
    epoch: u64,
    /// First boundary not yet accounted for.
    next_index: u64,
    scheduled: bool,
}

pub(crate) struct Kernel<'w> {
    queue: EventQueue<Event>,
    nodes: Vec<Box<dyn Station>>,
    timer_seq: Vec<u64>,
    params: ProtocolParams,
    rng: ChaCha8Rng,
    traffic_rng: ChaCha8Rng,
    interarrival: Vec<Option<Exp<f64>>>,
    metrics: Metrics,
    actions: Vec<Action>,
    pending: Vec<Frame>,
    pending_from_slot: bool,
    start_scheduled: bool,
    burst: Option<Burst>,
    contention: Contention,
    tracer: Tracer<'w>,
    horizon: Horizon,
    warmup_fraction: f64,
    warm: Option<(SimTime, Metrics)>,
    done: bool,
}

/// Independent protocol and traffic streams for one run.
pub(crate) fn run_streams(seed: u64, run_index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut proto = ChaCha8Rng::seed_from_u64(seed);
    proto.set_stream(2 * run_index);
    let mut traffic = ChaCha8Rng::seed_from_u64(seed);
    traffic.set_stream(2 * run_index + 1);
    (proto, traffic)
}

impl<'w> Kernel<'w> {
    pub fn new(cfg: &SimConfig, tracer: Tracer<'w>) -> Result<Self> {
        let params = cfg.protocol_params()?;
        let saturated = params.saturated;
        let mut nodes: Vec<Box<dyn Station>> = Vec::with_capacity(cfg.m_stas + 1);
        match cfg.scheme {
            Scheme::UniMumac => {
                nodes.push(Box::new(UniAp::new(cfg.q_ap(), saturated)));
                for i in 0..cfg.m_stas {
                    nodes.push(Box::new(UniSta::new(NodeId::sta(i), cfg.q_sta, saturated)));
                }
            }
            Scheme::LiMac | Scheme::Baseline => {
                nodes.push(Box::new(LiMacAp::new(cfg.q_ap(), saturated)));
                for i in 0..cfg.m_stas {
                    nodes.push(Box::new(LiMacSta::new(NodeId::sta(i), cfg.q_sta, saturated)));
                }
            }
        }
        let l = f64::from(cfg.timing.lengths.l_data);
        let interarrival = (0..=cfg.m_stas)
            .map(|i| match cfg.traffic {
                Traffic::Saturated => None,
                Traffic::Poisson { sta_load, ap_load } => {
                    let load = if i == 0 { ap_load } else { sta_load };
                    // Frames per second.
                    (load > 0.0).then(|| Exp::new(load / l).expect("positive rate"))
                }
            })
            .collect();
        let (rng, traffic_rng) = run_streams(cfg.seed, cfg.run_index);
        Ok(Kernel {
            queue: EventQueue::new(),
            timer_seq: vec![0; nodes.len()],
            nodes,
            params,
            rng,
            traffic_rng,
            interarrival,
            metrics: Metrics::new(cfg.m_stas),
            actions: Vec::new(),
            pending: Vec::new(),
            pending_from_slot: false,
            start_scheduled: false,
            burst: None,
            contention: Contention::default(),
            tracer,
            horizon: cfg.horizon,
            warmup_fraction: cfg.warmup_fraction,
            warm: None,
            done: false,
        })
    }

    fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn run(mut self) -> Result<Report> {
        for i in 0..self.nodes.len() {
            let mut ctx = StepCtx {
                now: SimTime::ZERO,
                params: &self.params,
                rng: &mut self.rng,
                traffic_rng: &mut self.traffic_rng,
                metrics: &mut self.metrics,
                actions: &mut self.actions,
            };
            self.nodes[i].init(&mut ctx);
            self.apply_actions(i)?;
        }
        for i in 0..self.nodes.len() {
            self.schedule_arrival(i)?;
        }
        self.contention.open = true;
        match self.horizon {
            Horizon::Time(t) => {
                let warm = SimTime::from_nanos((t.as_nanos() as f64 * self.warmup_fraction).round() as u64);
                self.queue.push(warm, CLASS_CONTROL, Event::Warmup)?;
                self.queue.push(t, CLASS_CONTROL, Event::Horizon)?;
            }
            Horizon::Slots(_) => {
                if self.warmup_fraction == 0.0 {
                    self.take_warm_snapshot();
                }
            }
        }
        self.schedule_slot()?;

        while !self.done {
            let Some((_, ev)) = self.queue.pop() else { break };
            self.handle(ev)?;
            self.schedule_slot()?;
            self.check_slot_horizon();
        }
        self.tracer.flush()?;
        self.finish()
    }

    fn handle(&mut self, ev: Event) -> Result<()> {
        match ev {
            Event::BurstEnd => {
                let b = self.burst.take().expect("burst end without burst");
                for f in &b.frames {
                    self.tracer.frame(b.end, "tx_end", f, b.collided)?;
                }
                self.broadcast(&ChannelEvent::BurstEnd(&b))?;
            }
            Event::Timer { node, seq, kind } => {
                if seq == self.timer_seq[node] {
                    self.tracer.node_event(self.now(), self.nodes[node].id(), "timer", kind.name())?;
                    self.dispatch(node, &ChannelEvent::Timer(kind))?;
                }
            }
            Event::Arrival { node } => self.arrival(node)?,
            Event::Slot { epoch, index } => {
                if epoch == self.contention.epoch && self.contention.open {
                    self.contention.scheduled = false;
                    self.contention.next_index = index + 1;
                    self.metrics.virtual_slots += 1;
                    self.broadcast(&ChannelEvent::Slot)?;
                    if !self.pending.is_empty() {
                        self.pending_from_slot = true;
                    }
                }
            }
            Event::StartBurst => self.start_burst()?,
            Event::Warmup => {
                self.count_idle_slots();
                self.take_warm_snapshot();
            }
            Event::Horizon => {
                self.count_idle_slots();
                self.done = true;
            }
        }
        Ok(())
    }

    fn take_warm_snapshot(&mut self) {
        self.warm = Some((self.now(), self.metrics.clone()));
    }

    fn check_slot_horizon(&mut self) {
        if let Horizon::Slots(total) = self.horizon {
            let warm_slots = (total as f64 * self.warmup_fraction).ceil() as u64;
            if self.warm.is_none() && self.metrics.virtual_slots >= warm_slots {
                self.take_warm_snapshot();
            }
            if self.metrics.virtual_slots >= total {
                self.done = true;
            }
        }
    }

    fn start_burst(&mut self) -> Result<()> {
        let now = self.now();
        self.start_scheduled = false;
        if self.burst.is_some() {
            return Err(Error::ProtocolViolation {
                at: now,
                what: "transmission started while the medium is busy".into(),
            });
        }
        let frames = std::mem::take(&mut self.pending);
        let contention = std::mem::take(&mut self.pending_from_slot);
        let contenders = frames.iter().filter(|f| f.kind.is_contention()).count();
        let collided = contenders >= 2;
        let mut airtime = frames.iter().map(|f| f.airtime).max().unwrap_or(SimTime::ZERO);
        if collided && contention {
            // Nobody can tell which frames overlapped; the medium is taken
            // for the longest possible first-round frame.
            airtime = airtime.max(self.params.times.mu_rts);
        }
        let b = Burst { frames, collided, contention, start: now, end: now + airtime };
        self.contention.open = false;
        self.contention.scheduled = false;
        self.contention.epoch += 1;
        for f in &b.frames {
            self.tracer.frame(now, "tx_start", f, collided)?;
        }
        self.queue.push(b.end, CLASS_BURST_END, Event::BurstEnd)?;
        self.broadcast(&ChannelEvent::BurstStart(&b))?;
        self.burst = Some(b);
        Ok(())
    }

    fn arrival(&mut self, node: usize) -> Result<()> {
        let now = self.now();
        let id = self.nodes[node].id();
        let p = Payload::generate(id, now, self.params.m_stas, &mut self.traffic_rng);
        let idle_since = self.contention.open.then_some(self.contention.origin);
        self.metrics.record_generated(id, 1);
        let mut ctx = StepCtx {
            now,
            params: &self.params,
            rng: &mut self.rng,
            traffic_rng: &mut self.traffic_rng,
            metrics: &mut self.metrics,
            actions: &mut self.actions,
        };
        if !self.nodes[node].offer(p, idle_since, &mut ctx) {
            self.metrics.record_drop(id);
            self.tracer.node_event(now, id, "drop", "queue_full")?;
        }
        self.apply_actions(node)?;
        self.schedule_arrival(node)
    }

    fn schedule_arrival(&mut self, node: usize) -> Result<()> {
        if let Some(exp) = self.interarrival[node] {
            let gap = exp.sample(&mut self.traffic_rng);
            let at = self.now() + SimTime::from_nanos((gap * 1e9).round() as u64);
            self.queue.push(at, CLASS_ARRIVAL, Event::Arrival { node })?;
        }
        Ok(())
    }

    fn broadcast(&mut self, ev: &ChannelEvent<'_>) -> Result<()> {
        for i in 0..self.nodes.len() {
            self.dispatch(i, ev)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, node: usize, ev: &ChannelEvent<'_>) -> Result<()> {
        let mut ctx = StepCtx {
            now: self.queue.now(),
            params: &self.params,
            rng: &mut self.rng,
            traffic_rng: &mut self.traffic_rng,
            metrics: &mut self.metrics,
            actions: &mut self.actions,
        };
        self.nodes[node].on_event(ev, &mut ctx);
        self.apply_actions(node)
    }

    fn apply_actions(&mut self, node: usize) -> Result<()> {
        let now = self.now();
        let mut actions = std::mem::take(&mut self.actions);
        for a in actions.drain(..) {
            match a {
                Action::Transmit(f) => {
                    self.pending.push(f);
                    if !self.start_scheduled {
                        self.start_scheduled = true;
                        self.queue.push(now, CLASS_START, Event::StartBurst)?;
                    }
                }
                Action::SetTimer { at, kind } => {
                    self.timer_seq[node] += 1;
                    let seq = self.timer_seq[node];
                    self.queue.push(at, CLASS_TIMER, Event::Timer { node, seq, kind })?;
                }
                Action::CancelTimer => self.timer_seq[node] += 1,
                Action::Resume { from } => self.resume(from),
            }
        }
        self.actions = actions;
        Ok(())
    }

    fn resume(&mut self, from: SimTime) {
        let c = &mut self.contention;
        if !c.open || from > c.origin {
            c.open = true;
            c.origin = from;
            c.next_index = 0;
            c.scheduled = false;
            c.epoch += 1;
        }
    }

    fn first_boundary(&self) -> SimTime {
        self.contention.origin + self.params.ifs.aifs
    }

    /// Accounts for boundaries that passed while nobody was contending.
    fn count_idle_slots(&mut self) {
        let now = self.now();
        let first = self.first_boundary();
        let c = &mut self.contention;
        if !c.open || c.scheduled || now < first {
            return;
        }
        let passed = (now - first).as_nanos() / self.params.ifs.idle_slot.as_nanos() + 1;
        if passed > c.next_index {
            self.metrics.virtual_slots += passed - c.next_index;
            c.next_index = passed;
        }
    }

    /// Arms the next slot boundary if the medium is free and someone needs it.
    /// Boundaries skipped while nobody was contending still count as idle
    /// slots.
    fn schedule_slot(&mut self) -> Result<()> {
        if !self.contention.open || self.contention.scheduled || self.start_scheduled {
            return Ok(());
        }
        if !self.nodes.iter().any(|n| n.wants_slots()) {
            return Ok(());
        }
        let now = self.now();
        let first = self.first_boundary();
        let sigma = self.params.ifs.idle_slot.as_nanos();
        let c = &mut self.contention;
        let index = if now <= first { 0 } else { (now - first).as_nanos().div_ceil(sigma) }.max(c.next_index);
        self.metrics.virtual_slots += index - c.next_index;
        c.next_index = index;
        c.scheduled = true;
        let at = first + SimTime::from_nanos(sigma * index);
        let epoch = c.epoch;
        self.queue.push(at, CLASS_SLOT, Event::Slot { epoch, index })
    }

    fn finish(self) -> Result<Report> {
        let now = self.now();
        let (warm_at, warm_metrics) = self.warm.unwrap_or((SimTime::ZERO, Metrics::new(self.params.m_stas)));
        let window = now.saturating_sub(warm_at);
        if window == SimTime::ZERO {
            return Err(Error::InvalidConfig("empty measurement window".into()));
        }
        let m = &self.metrics;
        let conservation = Conservation {
            generated: m.generated_ap + m.generated_sta,
            delivered: m.delivered_ap + m.delivered_sta,
            dropped: m.drops_ap + m.drops_sta,
            queued: self.nodes.iter().map(|n| n.queue().len() as u64).sum(),
        };
        Ok(finalize(self.metrics.since(&warm_metrics), window, conservation))
    }
}
