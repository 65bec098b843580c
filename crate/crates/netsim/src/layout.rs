//! Node placement on the unit square.
//!
//! Sources sit on the left edge, destinations on the right edge, and the `n`
//! routers on an `ℓ × ℓ` grid, `ℓ = √n`. Band `b` (`1..=ℓ`) is the horizontal
//! strip holding sources `j` with `⌈j/ℓ⌉ = b`, the row of routers at height
//! `(b−1)/ℓ + 1/(2ℓ)`, and the matching destinations. A packet from source
//! `j` crosses its band's routers left to right and exits at destination `j`.

use serde::{Deserialize, Serialize};

use crate::NetsimError;

/// Relative slack in the range test; several links sit exactly at range.
pub const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    /// Source `j`, `1..=n`.
    Source(usize),
    /// Router `k` (`1..=ℓ`) of band `b` (`1..=ℓ`).
    Router { band: usize, k: usize },
    /// Destination `j`, `1..=n`.
    Destination(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    n: usize,
    ell: usize,
    source_radius: f64,
    router_radius: f64,
}

/// Build the layout for `n` nodes per role; `√n` must be an even integer.
pub fn build_layout(n: usize) -> Result<NetworkLayout, NetsimError> {
    let ell = (n as f64).sqrt().round() as usize;
    if n == 0 || ell * ell != n {
        return Err(NetsimError::InvalidConfig(format!("n = {n} is not a perfect square")));
    }
    if !ell.is_multiple_of(2) {
        return Err(NetsimError::InvalidConfig(format!("√n = {ell} must be even")));
    }
    Ok(NetworkLayout {
        n,
        ell,
        source_radius: 2f64.sqrt() / (2.0 * ell as f64),
        router_radius: 1.0 / ell as f64,
    })
}

impl NetworkLayout {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn source_radius(&self) -> f64 {
        self.source_radius
    }

    pub fn router_radius(&self) -> f64 {
        self.router_radius
    }

    /// Band of source or destination `j`.
    pub fn band_of(&self, j: usize) -> usize {
        j.div_ceil(self.ell)
    }

    /// Sources of band `b`, in round-robin order.
    pub fn band_sources(&self, b: usize) -> std::ops::RangeInclusive<usize> {
        (b - 1) * self.ell + 1..=b * self.ell
    }

    pub fn position(&self, node: NodeId) -> Point {
        let l = self.ell as f64;
        let n = self.n as f64;
        match node {
            NodeId::Source(j) => Point { x: 0.0, y: j as f64 / n },
            NodeId::Destination(j) => Point { x: 1.0, y: j as f64 / n },
            NodeId::Router { band, k } => Point {
                x: 1.0 / (2.0 * l) + (k as f64 - 1.0) / l,
                y: 1.0 / (2.0 * l) + (band as f64 - 1.0) / l,
            },
        }
    }

    /// Transmission radius; destinations never transmit.
    pub fn radius(&self, node: NodeId) -> f64 {
        match node {
            NodeId::Source(_) => self.source_radius,
            NodeId::Router { .. } => self.router_radius,
            NodeId::Destination(_) => 0.0,
        }
    }

    /// Whether `rx` lies within the range of `tx`.
    pub fn covers(&self, tx: NodeId, rx: NodeId) -> bool {
        let r = self.radius(tx);
        r > 0.0 && self.position(tx).dist(&self.position(rx)) <= r * (1.0 + RANGE_SLACK)
    }

    /// Schedule group of a transmitter: sources are in group 0, router `k`
    /// in group `k mod 3`.
    pub fn group(&self, node: NodeId) -> usize {
        match node {
            NodeId::Source(_) => 0,
            NodeId::Router { k, .. } => k % 3,
            NodeId::Destination(_) => usize::MAX,
        }
    }

    /// Band containing a node.
    pub fn band(&self, node: NodeId) -> usize {
        match node {
            NodeId::Source(j) | NodeId::Destination(j) => self.band_of(j),
            NodeId::Router { band, .. } => band,
        }
    }

    /// Next hop on the route of source `j` after `node`.
    pub fn next_hop(&self, node: NodeId, j: usize) -> Option<NodeId> {
        let band = self.band_of(j);
        match node {
            NodeId::Source(s) if s == j => Some(NodeId::Router { band, k: 1 }),
            NodeId::Router { band: b, k } if b == band && k < self.ell => Some(NodeId::Router { band, k: k + 1 }),
            NodeId::Router { band: b, k } if b == band && k == self.ell => Some(NodeId::Destination(j)),
            _ => None,
        }
    }

    pub fn routers(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.ell).flat_map(move |band| (1..=self.ell).map(move |k| NodeId::Router { band, k }))
    }

    pub fn sources(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.n).map(NodeId::Source)
    }

    pub fn destinations(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.n).map(NodeId::Destination)
    }
}
