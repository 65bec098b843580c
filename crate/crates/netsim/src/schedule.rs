//! Slot-by-slot TDMA schedule with collision, queue and delivery audit.
//!
//! Rules: at slot `t` only bands with `b ≡ t (mod 2)` transmit. Each band has
//! its own clock `τ_b`, advanced on its active slots; group `τ_b mod 3`
//! sends. In group-0 slots exactly one source of the band injects a packet,
//! cycling through the band's `ℓ` sources. A reception succeeds when the
//! receiver is within the sender's range, is not itself sending, and no
//! other sender covers it.

use serde::{Deserialize, Serialize};

use crate::layout::{NetworkLayout, NodeId};
use crate::NetsimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub source: usize,
    pub seq: u64,
    pub injected_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub tx: NodeId,
    pub rx: NodeId,
    pub packet: Packet,
}

/// Deliberate rule violations, for exercising the audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Faults {
    /// Let every band transmit in every slot.
    pub ignore_parity: bool,
    /// Let every group, sources included, send in every active slot.
    pub ignore_groups: bool,
}

/// Failure counts accumulated over slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    /// Receptions spoiled by a second covering transmitter.
    pub collisions: u64,
    /// Receptions addressed to a node that was itself transmitting.
    pub busy_receivers: u64,
    /// Receptions addressed beyond the sender's range.
    pub out_of_range: u64,
    /// Packets lost to any of the above or delivered to the wrong node.
    pub drops: u64,
    /// Largest router queue seen at a slot boundary.
    pub max_queue: usize,
}

impl Audit {
    fn absorb(&mut self, o: &Audit) {
        self.collisions += o.collisions;
        self.busy_receivers += o.busy_receivers;
        self.out_of_range += o.out_of_range;
        self.drops += o.drops;
        self.max_queue = self.max_queue.max(o.max_queue);
    }

    /// The first violated invariant, if any.
    pub fn check(&self) -> Result<(), NetsimError> {
        let fail = |name: &'static str, v: u64| NetsimError::Invariant {
            name,
            detail: format!("{v} occurrences"),
        };
        if self.collisions > 0 {
            return Err(fail("collision", self.collisions));
        }
        if self.busy_receivers > 0 {
            return Err(fail("busy-receiver", self.busy_receivers));
        }
        if self.out_of_range > 0 {
            return Err(fail("out-of-range", self.out_of_range));
        }
        if self.drops > 0 {
            return Err(fail("drop", self.drops));
        }
        if self.max_queue > 1 {
            return Err(NetsimError::Invariant {
                name: "queue-overflow",
                detail: format!("a router held {} packets", self.max_queue),
            });
        }
        Ok(())
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub transmissions: Vec<Transmission>,
    /// `(destination, packet)` for each successful final hop.
    pub delivered: Vec<(usize, Packet)>,
    pub audit: Audit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleState {
    slot: u64,
    clocks: Vec<u64>,
    /// Router queues, band-major.
    queues: Vec<Vec<Packet>>,
    /// Group-0 opportunities seen per band.
    g0_slots: Vec<u64>,
    /// Packets injected per source.
    injected: Vec<u64>,
}

impl ScheduleState {
    pub fn new(layout: &NetworkLayout) -> Self {
        let l = layout.ell();
        Self {
            slot: 0,
            clocks: vec![0; l],
            queues: vec![Vec::new(); l * l],
            g0_slots: vec![0; l],
            injected: vec![0; layout.n()],
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Clock of band `b` (`1..=ℓ`).
    pub fn clock(&self, b: usize) -> u64 {
        self.clocks[b - 1]
    }

    pub fn queue_len(&self, layout: &NetworkLayout, band: usize, k: usize) -> usize {
        self.queues[(band - 1) * layout.ell() + (k - 1)].len()
    }

    /// Packets injected by source `j` so far.
    pub fn injected(&self, j: usize) -> u64 {
        self.injected[j - 1]
    }

    /// Group-0 opportunities of band `b` so far.
    pub fn g0_slots(&self, b: usize) -> u64 {
        self.g0_slots[b - 1]
    }
}

/// Advance the schedule by one slot.
pub fn step_schedule(layout: &NetworkLayout, state: &mut ScheduleState, faults: Faults) -> SlotOutcome {
    let l = layout.ell();
    let t = state.slot;
    let mut txs = Vec::new();
    for b in 1..=l {
        if !faults.ignore_parity && (b as u64 % 2) != t % 2 {
            continue;
        }
        let group = (state.clocks[b - 1] % 3) as usize;
        if group == 0 || faults.ignore_groups {
            let o = state.g0_slots[b - 1];
            let j = (b - 1) * l + 1 + (o % l as u64) as usize;
            state.g0_slots[b - 1] += 1;
            let packet = Packet {
                source: j,
                seq: state.injected[j - 1],
                injected_at: t,
            };
            state.injected[j - 1] += 1;
            txs.push(Transmission {
                tx: NodeId::Source(j),
                rx: layout.next_hop(NodeId::Source(j), j).expect("source has a route"),
                packet,
            });
        }
        for k in 1..=l {
            let node = NodeId::Router { band: b, k };
            if !faults.ignore_groups && layout.group(node) != group {
                continue;
            }
            if let Some(&packet) = state.queues[(b - 1) * l + (k - 1)].first() {
                let rx = layout.next_hop(node, packet.source).expect("router has a next hop");
                txs.push(Transmission { tx: node, rx, packet });
            }
        }
        state.clocks[b - 1] += 1;
    }

    let mut audit = Audit::default();
    let mut ok = vec![false; txs.len()];
    for (i, tr) in txs.iter().enumerate() {
        if !layout.covers(tr.tx, tr.rx) {
            audit.out_of_range += 1;
        } else if txs.iter().any(|o| o.tx == tr.rx) {
            audit.busy_receivers += 1;
        } else if txs
            .iter()
            .enumerate()
            .any(|(j, o)| j != i && layout.covers(o.tx, tr.rx))
        {
            audit.collisions += 1;
        } else {
            ok[i] = true;
        }
    }

    let mut delivered = Vec::new();
    // senders release first, then receivers accept
    for tr in &txs {
        if let NodeId::Router { band, k } = tr.tx {
            state.queues[(band - 1) * l + (k - 1)].remove(0);
        }
    }
    for (tr, good) in txs.iter().zip(&ok) {
        if !good {
            audit.drops += 1;
            continue;
        }
        match tr.rx {
            NodeId::Router { band, k } => state.queues[(band - 1) * l + (k - 1)].push(tr.packet),
            NodeId::Destination(j) if j == tr.packet.source => delivered.push((j, tr.packet)),
            _ => audit.drops += 1,
        }
    }
    audit.max_queue = state.queues.iter().map(Vec::len).max().unwrap_or(0);
    state.slot += 1;
    SlotOutcome {
        transmissions: txs,
        delivered,
        audit,
    }
}

/// Slots in one schedule period: every source injects once per `6ℓ` slots.
pub fn period(layout: &NetworkLayout) -> u64 {
    6 * layout.ell() as u64
}

/// Throughput and audit over whole periods after one warm-up period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportReport {
    pub n: usize,
    pub link_bits: u64,
    pub period_slots: u64,
    pub warmup_slots: u64,
    pub measured_slots: u64,
    /// Bits delivered to each destination inside the measured window.
    pub delivered_bits: Vec<u64>,
    /// Packets injected by each source over the whole run.
    pub injected: Vec<u64>,
    pub audit: Audit,
    /// Every destination received exactly `R/(6ℓ)` bits per measured slot.
    pub rate_exact: bool,
    /// Every source injected once per `ℓ` of its band's group-0 slots.
    pub round_robin_exact: bool,
}

impl TransportReport {
    /// Per-node rate as the exact fraction `(bits, slots)`, reduced.
    pub fn per_node_rate(&self) -> (u64, u64) {
        let (a, b) = (self.link_bits, self.period_slots);
        let g = gcd(a, b);
        (a / g, b / g)
    }

    pub fn verify(&self) -> Result<(), NetsimError> {
        self.audit.check()?;
        if !self.rate_exact {
            return Err(NetsimError::Invariant {
                name: "throughput",
                detail: "delivered bits differ from R/(6√n) per slot".into(),
            });
        }
        if !self.round_robin_exact {
            return Err(NetsimError::Invariant {
                name: "round-robin",
                detail: "a source missed or doubled its injection turn".into(),
            });
        }
        Ok(())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Run one warm-up period and `periods` measured periods.
pub fn run_transport(
    layout: &NetworkLayout,
    periods: u64,
    link_bits: u64,
    faults: Faults,
) -> Result<TransportReport, NetsimError> {
    if periods == 0 || link_bits == 0 {
        return Err(NetsimError::InvalidConfig("need at least one period and R ≥ 1 bit".into()));
    }
    let p = period(layout);
    let mut state = ScheduleState::new(layout);
    let mut audit = Audit::default();
    let mut delivered = vec![0u64; layout.n()];
    for t in 0..p * (periods + 1) {
        let out = step_schedule(layout, &mut state, faults);
        audit.absorb(&out.audit);
        if t >= p {
            for (j, _) in out.delivered {
                delivered[j - 1] += link_bits;
            }
        }
    }
    let measured = p * periods;
    let rate_exact = delivered.iter().all(|&bits| bits * p == link_bits * measured);
    let l = layout.ell() as u64;
    let round_robin_exact = (1..=layout.ell()).all(|b| {
        let o = state.g0_slots(b);
        layout.band_sources(b).all(|j| {
            let c = state.injected(j);
            c == o / l || c == o.div_ceil(l)
        })
    });
    Ok(TransportReport {
        n: layout.n(),
        link_bits,
        period_slots: p,
        warmup_slots: p,
        measured_slots: measured,
        delivered_bits: delivered,
        injected: state.injected.clone(),
        audit,
        rate_exact,
        round_robin_exact,
    })
}
