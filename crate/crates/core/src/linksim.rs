//! Discrete-event model of a bundle of 802.3az links.
//!
//! Each port is a drop-tail FIFO (buffer counted in packets, including the
//! packet in service) in front of a link running the LPI state machine in
//! frame transmission mode:
//!
//! ```text
//!  ACTIVE --queue empties--> GOING_TO_SLEEP --t_sleep, queue empty--> LPI
//!    ^                              |                                  |
//!    |                     t_sleep, queue non-empty               arrival
//!    |                              v                                  |
//!    +-------------t_wake-------- WAKING <------------------------------+
//! ```
//!
//! Sleep cannot be aborted: a packet arriving mid-transition waits for the
//! transition to finish and then for a full wake-up. Both transitions draw
//! full power.
//!
//! Links never interact, but events are still processed in one global order
//! (time, then departures before mode changes before arrivals, then port
//! index) so that event logs are reproducible.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{measured_consumption, ModeTimes, SIGMA_OFF, T_SLEEP_10G, T_WAKE_10G};
use crate::error::{Error, Result};
use crate::flowkey::FlowKey;
use crate::scheduling::{assign_random, Assignment, BundleConfig};
use crate::traffic::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkMode {
    Active,
    GoingToSleep,
    Lpi,
    Waking,
}

impl LinkMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkMode::Active => "ACTIVE",
            LinkMode::GoingToSleep => "GOING_TO_SLEEP",
            LinkMode::Lpi => "LPI",
            LinkMode::Waking => "WAKING",
        }
    }

    /// Whether `self -> next` is an edge of the LPI state machine.
    pub fn can_enter(&self, next: LinkMode) -> bool {
        use LinkMode::*;
        matches!(
            (self, next),
            (Active, GoingToSleep) | (GoingToSleep, Lpi) | (GoingToSleep, Waking) | (Lpi, Waking) | (Waking, Active)
        )
    }
}

impl fmt::Display for LinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EeeTimings {
    pub t_sleep: f64,
    pub t_wake: f64,
    pub sigma_off: f64,
    /// Bits/s.
    pub capacity: f64,
}

impl EeeTimings {
    pub fn standard_10g() -> Self {
        Self {
            t_sleep: T_SLEEP_10G,
            t_wake: T_WAKE_10G,
            sigma_off: SIGMA_OFF,
            capacity: 10e9,
        }
    }

    /// Standard 10 Gb/s behaviour slowed down to `capacity`: transition times
    /// stretch by the same factor as packet transmission times, so a given
    /// load fraction yields the same consumption.
    pub fn time_scaled(capacity: f64) -> Self {
        let stretch = 10e9 / capacity;
        Self {
            t_sleep: T_SLEEP_10G * stretch,
            t_wake: T_WAKE_10G * stretch,
            sigma_off: SIGMA_OFF,
            capacity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_sleep >= 0.0
            && self.t_wake >= 0.0
            && self.t_sleep.is_finite()
            && self.t_wake.is_finite()
            && (0.0..=1.0).contains(&self.sigma_off)
            && self.capacity > 0.0
            && self.capacity.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid EEE timings {self:?}")))
        }
    }
}

/// Cumulative per-link statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkCounters {
    pub mode_times: ModeTimes,
    pub packets_offered: u64,
    pub bytes_offered: u64,
    pub packets_dropped: u64,
    pub packets_sent: u64,
    pub bytes_sent: u64,
    /// Sum of queueing plus transmission delay of sent packets, seconds.
    pub sum_delay: f64,
}

impl LinkCounters {
    fn since(&self, earlier: &LinkCounters) -> LinkCounters {
        LinkCounters {
            mode_times: ModeTimes {
                active: self.mode_times.active - earlier.mode_times.active,
                going_to_sleep: self.mode_times.going_to_sleep - earlier.mode_times.going_to_sleep,
                lpi: self.mode_times.lpi - earlier.mode_times.lpi,
                waking: self.mode_times.waking - earlier.mode_times.waking,
            },
            packets_offered: self.packets_offered - earlier.packets_offered,
            bytes_offered: self.bytes_offered - earlier.bytes_offered,
            packets_dropped: self.packets_dropped - earlier.packets_dropped,
            packets_sent: self.packets_sent - earlier.packets_sent,
            bytes_sent: self.bytes_sent - earlier.bytes_sent,
            sum_delay: self.sum_delay - earlier.sum_delay,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    packet: Packet,
    enqueued_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Pending {
    Departure = 0,
    SleepDone = 1,
    WakeDone = 2,
}

/// One port of the bundle.
#[derive(Debug, Clone)]
pub struct LinkState {
    mode: LinkMode,
    mode_entered_at: f64,
    /// Time of the pending internal event; infinite in LPI.
    next_event: f64,
    queue: VecDeque<Queued>,
    buffer_size: usize,
    counters: LinkCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    Drop,
    Departure,
    SleepStart,
    LpiStart,
    WakeStart,
    ActiveStart,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Drop => "drop",
            EventKind::Departure => "departure",
            EventKind::SleepStart => "sleep_start",
            EventKind::LpiStart => "lpi_start",
            EventKind::WakeStart => "wake_start",
            EventKind::ActiveStart => "active_start",
        }
    }
}

/// Entry of the optional event log. `queue_len` and `mode` are the values
/// after the event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub port: usize,
    pub kind: EventKind,
    pub queue_len: usize,
    pub mode: LinkMode,
    /// Arrival time of the packet involved, for packet events.
    pub packet_time: Option<f64>,
}

impl LinkState {
    fn new(buffer_size: usize) -> Self {
        Self {
            mode: LinkMode::Lpi,
            mode_entered_at: 0.0,
            next_event: f64::INFINITY,
            queue: VecDeque::new(),
            buffer_size,
            counters: LinkCounters::default(),
        }
    }

    pub fn mode(&self) -> LinkMode {
        self.mode
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn counters(&self) -> &LinkCounters {
        &self.counters
    }

    fn pending(&self) -> Option<(f64, Pending)> {
        let kind = match self.mode {
            LinkMode::Active => Pending::Departure,
            LinkMode::GoingToSleep => Pending::SleepDone,
            LinkMode::Waking => Pending::WakeDone,
            LinkMode::Lpi => return None,
        };
        Some((self.next_event, kind))
    }

    fn accrue(&mut self, now: f64) {
        let dt = now - self.mode_entered_at;
        let t = &mut self.counters.mode_times;
        match self.mode {
            LinkMode::Active => t.active += dt,
            LinkMode::GoingToSleep => t.going_to_sleep += dt,
            LinkMode::Lpi => t.lpi += dt,
            LinkMode::Waking => t.waking += dt,
        }
        self.mode_entered_at = now;
    }

    fn enter(&mut self, mode: LinkMode, now: f64) {
        debug_assert!(self.mode.can_enter(mode), "{} -> {}", self.mode, mode);
        self.accrue(now);
        self.mode = mode;
    }

    fn start_service(&mut self, now: f64, timings: &EeeTimings) {
        let head = self.queue.front().expect("service needs a queued packet");
        self.next_event = now + head.packet.service_time(timings.capacity);
    }

    /// Handles the pending internal event, which must be due at `now`.
    fn fire(&mut self, now: f64, timings: &EeeTimings) -> (EventKind, Option<f64>) {
        match self.mode {
            LinkMode::Active => {
                let done = self.queue.pop_front().expect("active link with empty queue");
                let c = &mut self.counters;
                c.packets_sent += 1;
                c.bytes_sent += u64::from(done.packet.size);
                c.sum_delay += now - done.enqueued_at;
                if self.queue.is_empty() {
                    self.enter(LinkMode::GoingToSleep, now);
                    self.next_event = now + timings.t_sleep;
                } else {
                    self.start_service(now, timings);
                }
                (EventKind::Departure, Some(done.enqueued_at))
            }
            LinkMode::GoingToSleep => {
                if self.queue.is_empty() {
                    self.enter(LinkMode::Lpi, now);
                    self.next_event = f64::INFINITY;
                    (EventKind::LpiStart, None)
                } else {
                    self.enter(LinkMode::Waking, now);
                    self.next_event = now + timings.t_wake;
                    (EventKind::WakeStart, None)
                }
            }
            LinkMode::Waking => {
                self.enter(LinkMode::Active, now);
                self.start_service(now, timings);
                (EventKind::ActiveStart, None)
            }
            LinkMode::Lpi => unreachable!("no pending event in LPI"),
        }
    }

    /// Enqueues `packet` at `now`, returning false on a full buffer.
    fn offer(&mut self, packet: Packet, now: f64, timings: &EeeTimings) -> bool {
        self.counters.packets_offered += 1;
        self.counters.bytes_offered += u64::from(packet.size);
        if self.queue.len() >= self.buffer_size {
            self.counters.packets_dropped += 1;
            return false;
        }
        self.queue.push_back(Queued {
            packet,
            enqueued_at: now,
        });
        if self.mode == LinkMode::Lpi {
            self.enter(LinkMode::Waking, now);
            self.next_event = now + timings.t_wake;
        }
        true
    }
}

/// Per-link statistics over a window between two checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub energy_fraction: f64,
    pub loss_count: u64,
    /// Mean delay of packets that departed in the window.
    pub mean_delay: Option<f64>,
    /// Bytes transmitted in the window.
    pub bytes: u64,
    pub delta: LinkCounters,
}

#[derive(Debug, Clone)]
struct Checkpoint {
    time: f64,
    counters: Vec<LinkCounters>,
}

/// The simulated bundle plus the flow table steering packets onto ports.
#[derive(Debug, Clone)]
pub struct BundleSim {
    links: Vec<LinkState>,
    timings: EeeTimings,
    bundle: BundleConfig,
    now: f64,
    routes: HashMap<FlowKey, usize>,
    rng: ChaCha8Rng,
    random_placements: u64,
    checkpoints: Vec<Checkpoint>,
    log: Option<Vec<SimEvent>>,
}

impl BundleSim {
    /// Bundle of `n_ports` idle links, all in LPI at time 0.
    pub fn new(n_ports: usize, timings: EeeTimings, buffer_size: usize, seed: u64) -> Result<Self> {
        timings.validate()?;
        let bundle = BundleConfig::new(n_ports, timings.capacity)?;
        if buffer_size == 0 {
            return Err(Error::arg("buffer size must be at least one packet"));
        }
        let links = vec![LinkState::new(buffer_size); n_ports];
        Ok(Self {
            checkpoints: vec![Checkpoint {
                time: 0.0,
                counters: vec![LinkCounters::default(); n_ports],
            }],
            links,
            timings,
            bundle,
            now: 0.0,
            routes: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            random_placements: 0,
            log: None,
        })
    }

    /// Turns on the per-event log.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn bundle(&self) -> &BundleConfig {
        &self.bundle
    }

    pub fn timings(&self) -> &EeeTimings {
        &self.timings
    }

    pub fn events(&self) -> &[SimEvent] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// Port currently holding `key`, if it has a rule.
    pub fn route(&self, key: &FlowKey) -> Option<usize> {
        self.routes.get(key).copied()
    }

    /// Flows that were placed on a random port because they had no rule.
    pub fn random_placements(&self) -> u64 {
        self.random_placements
    }

    fn record(&mut self, time: f64, port: usize, kind: EventKind, packet_time: Option<f64>) {
        if let Some(log) = self.log.as_mut() {
            let link = &self.links[port];
            log.push(SimEvent {
                time,
                port,
                kind,
                queue_len: link.queue.len(),
                mode: link.mode,
                packet_time,
            });
        }
    }

    /// Processes every internal event due at or before `t`.
    fn advance(&mut self, t: f64) {
        loop {
            let mut next: Option<(f64, Pending, usize)> = None;
            for (port, link) in self.links.iter().enumerate() {
                if let Some((time, kind)) = link.pending() {
                    if time <= t && next.is_none_or(|(bt, bk, _)| (time, kind) < (bt, bk)) {
                        next = Some((time, kind, port));
                    }
                }
            }
            let Some((time, _, port)) = next else { break };
            let (kind, packet_time) = self.links[port].fire(time, &self.timings);
            self.record(time, port, kind, packet_time);
            if kind == EventKind::Departure && self.links[port].mode == LinkMode::GoingToSleep {
                self.record(time, port, EventKind::SleepStart, None);
            }
        }
        self.now = self.now.max(t);
    }

    /// Runs the simulation up to `t` and checkpoints statistics there.
    pub fn run_until(&mut self, t: f64) -> Result<()> {
        if t < self.now {
            return Err(Error::arg(format!("cannot run back to {t}, now is {}", self.now)));
        }
        self.advance(t);
        for link in &mut self.links {
            link.accrue(t);
        }
        let last = self.checkpoints.last().map(|c| c.time).unwrap_or(0.0);
        if t > last {
            self.checkpoints.push(Checkpoint {
                time: t,
                counters: self.links.iter().map(|l| l.counters).collect(),
            });
        }
        Ok(())
    }

    /// Replaces the flow table at time `at`. Packets already queued stay
    /// where they are.
    pub fn apply_assignment(&mut self, assignment: &Assignment, at: f64) -> Result<()> {
        if at < self.now {
            return Err(Error::arg(format!("assignment at {at} is in the past (now {})", self.now)));
        }
        if let Some(&p) = assignment.ports.values().find(|&&p| p >= self.links.len()) {
            return Err(Error::arg(format!("assignment uses port {p} of {}", self.links.len())));
        }
        self.advance(at);
        self.routes.clear();
        self.routes.extend(assignment.ports.iter().map(|(k, p)| (*k, *p)));
        Ok(())
    }

    /// Steers `packet` to the port of `key`; unknown flows get a random port
    /// that sticks until the next assignment. Returns whether the packet was
    /// queued.
    pub fn offer_packet(&mut self, packet: Packet, key: FlowKey) -> Result<bool> {
        let t = packet.timestamp;
        if t < self.now {
            return Err(Error::arg(format!("packet at {t} arrives before now ({})", self.now)));
        }
        self.advance(t);
        let port = match self.routes.get(&key) {
            Some(&p) => p,
            None => {
                let p = assign_random(&key, &self.bundle, &mut self.rng);
                self.routes.insert(key, p);
                self.random_placements += 1;
                p
            }
        };
        let accepted = self.links[port].offer(packet, t, &self.timings);
        if self.log.is_some() {
            let kind = if accepted { EventKind::Arrival } else { EventKind::Drop };
            self.record(t, port, kind, Some(t));
            if accepted && self.links[port].mode == LinkMode::Waking && self.links[port].mode_entered_at == t {
                self.record(t, port, EventKind::WakeStart, None);
            }
        }
        Ok(accepted)
    }

    fn checkpoint_at(&self, t: f64) -> Result<&Checkpoint> {
        let i = self
            .checkpoints
            .binary_search_by(|c| c.time.total_cmp(&t))
            .map_err(|_| Error::arg(format!("no checkpoint at {t}; call run_until({t}) first")))?;
        Ok(&self.checkpoints[i])
    }

    /// Per-link statistics between two times previously passed to
    /// [`BundleSim::run_until`].
    pub fn interval_metrics(&self, from: f64, to: f64) -> Result<Vec<LinkMetrics>> {
        if !(from < to) || to > self.now {
            return Err(Error::arg(format!("bad metrics window [{from}, {to}] at now {}", self.now)));
        }
        let a = self.checkpoint_at(from)?;
        let b = self.checkpoint_at(to)?;
        b.counters
            .iter()
            .zip(&a.counters)
            .map(|(b, a)| {
                let d = b.since(a);
                Ok(LinkMetrics {
                    energy_fraction: measured_consumption(&d.mode_times, self.timings.sigma_off)?,
                    loss_count: d.packets_dropped,
                    mean_delay: (d.packets_sent > 0).then(|| d.sum_delay / d.packets_sent as f64),
                    bytes: d.bytes_sent,
                    delta: d,
                })
            })
            .collect()
    }

    /// Writes the event log as `time,port,event,queue_len,mode`.
    pub fn write_event_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,port,event,queue_len,mode")?;
        for e in self.events() {
            writeln!(out, "{},{},{},{},{}", e.time, e.port, e.kind.as_str(), e.queue_len, e.mode)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timings() -> EeeTimings {
        EeeTimings::standard_10g()
    }

    fn pkt(t: f64, size: u32) -> Packet {
        Packet {
            timestamp: t,
            src_ip: 1,
            dst_ip: 2,
            dst_mac: 3,
            size,
        }
    }

    fn one_port(buffer: usize) -> BundleSim {
        BundleSim::new(1, timings(), buffer, 0).unwrap().with_event_log()
    }

    fn departures(sim: &BundleSim) -> Vec<SimEvent> {
        sim.events().iter().filter(|e| e.kind == EventKind::Departure).copied().collect()
    }

    #[test]
    fn drop_tail_when_buffer_full() {
        let mut sim = one_port(1);
        assert!(sim.offer_packet(pkt(0.0, 1500), FlowKey::bits(0)).unwrap());
        assert!(!sim.offer_packet(pkt(0.0, 1500), FlowKey::bits(0)).unwrap());
        assert_eq!(sim.links()[0].counters().packets_dropped, 1);
    }

    #[test]
    fn wake_from_lpi_then_serve() {
        let mut sim = one_port(10);
        sim.offer_packet(pkt(1e-3, 1500), FlowKey::bits(0)).unwrap();
        sim.run_until(1.0).unwrap();
        let d = departures(&sim);
        assert_eq!(d.len(), 1);
        // 4.48 us wake + 1.2 us serialisation
        let delay = d[0].time - 1e-3;
        assert!((delay - 5.68e-6).abs() < 1e-12, "{delay}");
        assert_eq!(sim.links()[0].mode(), LinkMode::Lpi);
        let c = sim.links()[0].counters();
        assert!((c.sum_delay - 5.68e-6).abs() < 1e-12);
    }

    #[test]
    fn arrival_mid_sleep_waits_for_sleep_and_wake() {
        let mut sim = one_port(10);
        sim.offer_packet(pkt(0.0, 1500), FlowKey::bits(0)).unwrap();
        let sleep_start = 4.48e-6 + 1.2e-6;
        let arrival = sleep_start + 1e-6;
        sim.offer_packet(pkt(arrival, 1500), FlowKey::bits(0)).unwrap();
        sim.run_until(1.0).unwrap();
        let d = departures(&sim);
        let service_start = d[1].time - 1.2e-6;
        let expected = arrival + (2.28e-6 - 1e-6) + 4.48e-6;
        assert!((service_start - expected).abs() < 1e-12, "{service_start} vs {expected}");
    }

    #[test]
    fn single_packet_cycle_returns_to_lpi() {
        let mut sim = one_port(10);
        sim.offer_packet(pkt(0.5, 1500), FlowKey::bits(0)).unwrap();
        sim.run_until(1.5).unwrap();
        let modes: Vec<LinkMode> = sim
            .events()
            .iter()
            .filter(|e| e.kind != EventKind::Arrival && e.kind != EventKind::Departure)
            .map(|e| e.mode)
            .collect();
        assert_eq!(
            modes,
            vec![LinkMode::Waking, LinkMode::Active, LinkMode::GoingToSleep, LinkMode::Lpi]
        );
        let lpi_at = sim.events().last().unwrap().time;
        assert!((lpi_at - (0.5 + 4.48e-6 + 1.2e-6 + 2.28e-6)).abs() < 1e-12);
        let t = sim.links()[0].counters().mode_times;
        assert!((t.total() - 1.5).abs() < 1e-12);
        assert!((t.active - 1.2e-6).abs() < 1e-15);
        assert!((t.waking - 4.48e-6).abs() < 1e-15);
        assert!((t.going_to_sleep - 2.28e-6).abs() < 1e-15);
    }

    #[test]
    fn idle_and_saturated_windows() {
        let mut sim = BundleSim::new(2, timings(), 100_000, 0).unwrap();
        let busy = FlowKey::bits(1);
        let a = Assignment {
            ports: [(busy, 1)].into_iter().collect(),
            loads: vec![0.0, 0.0],
            flow_counts: vec![0, 1],
            active_ports: 1,
        };
        sim.apply_assignment(&a, 0.0).unwrap();
        // back-to-back 1500 B packets keep port 1 busy over [1e-3, 1.1e-3]
        let arrivals: Vec<f64> = (0..1000).map(|i| i as f64 * 1.2e-6).collect();
        for &t in arrivals.iter().filter(|&&t| t < 1e-3) {
            sim.offer_packet(pkt(t, 1500), busy).unwrap();
        }
        sim.run_until(1e-3).unwrap();
        for &t in arrivals.iter().filter(|&&t| (1e-3..1.1e-3).contains(&t)) {
            sim.offer_packet(pkt(t, 1500), busy).unwrap();
        }
        sim.run_until(1.1e-3).unwrap();
        let m = sim.interval_metrics(0.0, 1e-3).unwrap();
        assert!((m[0].energy_fraction - 0.1).abs() < 1e-12);
        assert!(sim.interval_metrics(1e-4, 1e-3).is_err(), "no checkpoint at 1e-4");
        let m = sim.interval_metrics(1e-3, 1.1e-3).unwrap();
        assert!((m[1].energy_fraction - 1.0).abs() < 1e-12);
        assert!((m[0].energy_fraction - 0.1).abs() < 1e-12);
        assert_eq!(m[1].loss_count, 0);
    }

    #[test]
    fn run_until_now_is_noop() {
        let mut sim = one_port(10);
        sim.run_until(0.0).unwrap();
        assert_eq!(sim.now(), 0.0);
        assert!(sim.events().is_empty());
        sim.run_until(2.0).unwrap();
        let before = *sim.links()[0].counters();
        sim.run_until(2.0).unwrap();
        assert_eq!(sim.links()[0].counters(), &before);
        assert_eq!(before.mode_times.lpi, 2.0);
        assert!(sim.run_until(1.0).is_err());
    }

    #[test]
    fn reassignment_moves_future_packets_only() {
        let mut sim = BundleSim::new(2, timings(), 10, 0).unwrap();
        let key = FlowKey::bits(5);
        let on = |p: usize| Assignment {
            ports: [(key, p)].into_iter().collect(),
            loads: vec![0.0; 2],
            flow_counts: vec![0; 2],
            active_ports: 1,
        };
        sim.apply_assignment(&on(0), 0.0).unwrap();
        sim.apply_assignment(&on(0), 0.0).unwrap();
        sim.offer_packet(pkt(0.0, 1500), key).unwrap();
        sim.offer_packet(pkt(0.0, 1500), key).unwrap();
        sim.apply_assignment(&on(1), 0.0).unwrap();
        sim.offer_packet(pkt(0.0, 1500), key).unwrap();
        assert_eq!(sim.links()[0].queue_len(), 2);
        assert_eq!(sim.links()[1].queue_len(), 1);
        assert_eq!(sim.route(&key), Some(1));
        sim.run_until(1.0).unwrap();
        assert!(sim.apply_assignment(&on(0), 0.5).is_err());
    }

    #[test]
    fn unknown_flow_gets_sticky_random_port() {
        let mut sim = BundleSim::new(5, timings(), 10, 42).unwrap();
        let key = FlowKey::bits(77);
        assert_eq!(sim.route(&key), None);
        sim.offer_packet(pkt(0.0, 100), key).unwrap();
        let port = sim.route(&key).unwrap();
        sim.offer_packet(pkt(0.1, 100), key).unwrap();
        assert_eq!(sim.route(&key), Some(port));
        assert_eq!(sim.random_placements(), 1);
        assert_eq!(sim.links()[port].counters().packets_offered, 2);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(BundleSim::new(0, timings(), 10, 0).is_err());
        assert!(BundleSim::new(1, timings(), 0, 0).is_err());
        let mut sim = one_port(10);
        sim.run_until(1.0).unwrap();
        assert!(sim.offer_packet(pkt(0.5, 100), FlowKey::bits(0)).is_err());
    }

    #[test]
    fn event_log_csv() {
        let mut sim = one_port(10);
        sim.offer_packet(pkt(0.0, 1500), FlowKey::bits(0)).unwrap();
        sim.run_until(1.0).unwrap();
        let mut out = Vec::new();
        sim.write_event_log(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,port,event,queue_len,mode");
        assert_eq!(lines[1], "0,0,arrival,1,WAKING");
        assert!(lines.last().unwrap().ends_with("lpi_start,0,LPI"));
    }
}
