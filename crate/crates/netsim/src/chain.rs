//! Chain Wyner-Ziv coding along a row of sensors.
//!
//! Node 1 quantizes its block with a Lloyd-Max quantizer. Node `m ≥ 2` uses
//! a scalar nested lattice code (`Z` with coarse `2^b·Z`) whose decoder sees
//! the already decoded block of node `m−1`. With `σ_{m/n}² = σ²m/n` and
//! `ρ_{m−1,m} = √(1−1/m)` the conditional deviation is `σ/√n` at every node,
//! so a single scale serves the whole chain.
//!
//! A decoded sample equals `Q(x) + o·L` where `L` is the coarse spacing and
//! `o` an integer offset. Offsets are inherited through the side
//! information; a fresh decoding error is a change of offset.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wzlvq::codec::{lloyd_max_gaussian, scale_schedule, ScalarQuantizer};
use wzlvq::mc::{stream_rng, Moments};
use wzlvq::sources::{bridge_sample, BrownianField};
use wzlvq::sublattice::scaling_similarity;
use wzlvq::{Lattice, SideInfoCodec, Sublattice, WzLvq};

use crate::layout::build_layout;
use crate::NetsimError;

/// Largest per-sample bit count the chain accepts.
pub const MAX_SAMPLE_BITS: u32 = 16;

const LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Per-node rate as a fraction `(bits, slots)`.
    pub per_node_rate: (u64, u64),
    /// Decode against the true predecessor sample instead of its estimate.
    pub genie: bool,
    /// `(node, slot)` pairs whose decoder is pushed one coarse cell off.
    pub forced_errors: Vec<(usize, usize)>,
}

impl ChainConfig {
    pub fn new(per_node_rate: (u64, u64)) -> Self {
        Self {
            per_node_rate,
            genie: false,
            forced_errors: Vec::new(),
        }
    }
}

/// Per-node statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub m: usize,
    pub u: f64,
    /// `E|X_{m/n} − X̂_{m/n}|²` per sample.
    pub d_mn: f64,
    pub d_stderr: f64,
    /// MSE over samples with zero offset.
    pub mse_correct: f64,
    pub correct_samples: u64,
    /// Side-information decodes at this node.
    pub decodes: u64,
    /// Fresh decoding errors at this node.
    pub fresh_errors: u64,
    /// Samples whose offset is nonzero.
    pub offset_samples: u64,
    pub p_err_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRunReport {
    pub n: usize,
    pub sigma: f64,
    pub slots: usize,
    pub genie: bool,
    /// Bits spent on each node's block.
    pub block_bits: u64,
    pub bits_per_sample: f64,
    pub nats_per_sample: f64,
    /// Lattice scale used by every side-information node.
    pub scale: f64,
    pub nodes: Vec<NodeStats>,
    /// MSE of error-free side-information decodes, pooled over nodes.
    pub alpha: f64,
    pub alpha_stderr: f64,
    /// Mean squared jump of a fresh decoding error.
    pub beta: f64,
    pub beta_stderr: f64,
    /// Fresh-error probability per side-information decode.
    pub p_err: f64,
    pub p_stderr: f64,
    pub fresh_errors: u64,
    pub decodes: u64,
}

impl ChainRunReport {
    /// Distortion at the last node.
    pub fn end_distortion(&self) -> (f64, f64) {
        let last = self.nodes.last().expect("at least one node");
        (last.d_mn, last.d_stderr)
    }

    /// Mean over nodes of `D_{m/n} − α`, relative to `α`, with its stderr.
    pub fn excess_ratio(&self) -> (f64, f64) {
        let k = self.nodes.len() as f64;
        let mean_d = self.nodes.iter().map(|s| s.d_mn).sum::<f64>() / k;
        let var_d = self.nodes.iter().map(|s| s.d_stderr * s.d_stderr).sum::<f64>() / (k * k);
        let r = (mean_d - self.alpha) / self.alpha;
        let dr_dd = 1.0 / self.alpha;
        let dr_da = -mean_d / (self.alpha * self.alpha);
        let se = (dr_dd * dr_dd * var_d + dr_da * dr_da * self.alpha_stderr * self.alpha_stderr).sqrt();
        (r, se)
    }

    /// `α + β·m·p·(1 + (m−1)p)` at node `m`.
    pub fn model_prediction(&self, m: usize) -> f64 {
        excess_distortion_model(m, self.p_err, self.alpha, self.beta).expect("p within [0, 1]")
    }

    /// CSV with columns `m,u,D_mn,p_err_m,errors_observed`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "m,u,D_mn,p_err_m,errors_observed")?;
        for s in &self.nodes {
            writeln!(out, "{},{},{:e},{:e},{}", s.m, s.u, s.d_mn, s.p_err_m, s.fresh_errors)?;
        }
        Ok(())
    }
}

/// A chain run: the report plus every decoded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub report: ChainRunReport,
    /// Row `k` holds `X̂_{1/n}(k), …, X̂_{n/n}(k)`.
    decoded: Vec<f64>,
}

impl ChainRun {
    /// `X̂_{m/n}(slot)`; `m = 0` is the known origin.
    pub fn decoded(&self, slot: usize, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.decoded[slot * self.report.n + m - 1]
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    xhat: f64,
    offset: i64,
    jump: f64,
    decoded: bool,
    fresh: bool,
}

/// Bits given to sample `k` of a block of `len` samples carrying `total`.
fn sample_bits(total: u64, len: u64, k: u64) -> u32 {
    ((k + 1) * total / len - k * total / len) as u32
}

/// Code every node's block along the chain.
pub fn chain_code(field: &BrownianField, cfg: &ChainConfig) -> Result<ChainRun, NetsimError> {
    let n = field.n();
    build_layout(n)?;
    let (num, den) = cfg.per_node_rate;
    if den == 0 {
        return Err(NetsimError::InvalidConfig("rate denominator must be positive".into()));
    }
    let slots = field.slots();
    let block_bits = (slots as u128 * num as u128 / den as u128) as u64;
    if block_bits == 0 {
        return Err(NetsimError::InvalidConfig(format!(
            "a block of {slots} slots at {num}/{den} bits/slot carries no coset index"
        )));
    }
    let max_bits = block_bits.div_ceil(slots as u64);
    if max_bits > MAX_SAMPLE_BITS as u64 {
        return Err(NetsimError::InvalidConfig(format!(
            "{max_bits} bits per sample exceeds the supported {MAX_SAMPLE_BITS}"
        )));
    }
    for &(m, k) in &cfg.forced_errors {
        if !(2..=n).contains(&m) || k >= slots {
            return Err(NetsimError::InvalidConfig(format!(
                "forced error at node {m}, slot {k} is outside nodes 2..={n} and slots 0..{slots}"
            )));
        }
    }

    let sigma = field.sigma();
    let step_sd = sigma / (n as f64).sqrt();
    let scale = wz_scale(n, sigma)?;
    let mut classical: BTreeMap<u32, ScalarQuantizer> = BTreeMap::new();
    let mut lattice: BTreeMap<u32, WzLvq> = BTreeMap::new();
    for k in 0..slots as u64 {
        let b = sample_bits(block_bits, slots as u64, k);
        if b == 0 || classical.contains_key(&b) {
            continue;
        }
        let (q, _) = lloyd_max_gaussian(1 << b, step_sd * step_sd, LLOYD_ITERS)?;
        classical.insert(b, q);
        let z = Lattice::integer(1)?;
        let kappa = scaling_similarity(&z, 1 << b)?;
        lattice.insert(b, WzLvq::new(Sublattice::new(z, kappa)?, scale)?);
    }

    let forced: BTreeMap<(usize, usize), ()> = cfg.forced_errors.iter().map(|&p| (p, ())).collect();
    let mut cells = vec![Cell::default(); n * slots];
    cells.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        let b = sample_bits(block_bits, slots as u64, k as u64);
        for m in 1..=n {
            let x = field.value(k, m);
            let cell = if m == 1 {
                Cell {
                    xhat: classical.get(&b).map_or(0.0, |q| q.quantize(x)),
                    ..Cell::default()
                }
            } else {
                let prev = row[m - 2];
                let (y, prev_offset) = if cfg.genie {
                    (field.value(k, m - 1), 0)
                } else {
                    (prev.xhat, prev.offset)
                };
                match lattice.get(&b) {
                    None => Cell {
                        xhat: y,
                        offset: prev_offset,
                        ..Cell::default()
                    },
                    Some(codec) => {
                        let idx = codec.encode_unchecked(&[x]);
                        let t_ref = codec.translate(idx, &[x])[0];
                        let push = forced.contains_key(&(m, k)) as i64;
                        let t = codec.translate(idx, &[y])[0] + push;
                        let offset = t - t_ref;
                        let spacing = codec.coarse().basis()[0];
                        Cell {
                            xhat: codec.reconstruct(idx, &[t])[0],
                            offset,
                            jump: spacing * (offset - prev_offset) as f64,
                            decoded: true,
                            fresh: offset != prev_offset,
                        }
                    }
                }
            };
            row[m - 1] = cell;
        }
    });

    let mut nodes = Vec::with_capacity(n);
    let mut alpha = Moments::default();
    let mut beta = Moments::default();
    let mut decodes = 0u64;
    let mut fresh_errors = 0u64;
    for m in 1..=n {
        let mut d = Moments::default();
        let mut correct = Moments::default();
        let (mut dec, mut fresh, mut off) = (0u64, 0u64, 0u64);
        for k in 0..slots {
            let c = cells[k * n + m - 1];
            let e = field.value(k, m) - c.xhat;
            d.push(e * e);
            if c.offset == 0 {
                correct.push(e * e);
            } else {
                off += 1;
            }
            if c.decoded {
                dec += 1;
                if c.offset == 0 {
                    alpha.push(e * e);
                }
                if c.fresh {
                    fresh += 1;
                    beta.push(c.jump * c.jump);
                }
            }
        }
        decodes += dec;
        fresh_errors += fresh;
        nodes.push(NodeStats {
            m,
            u: m as f64 / n as f64,
            d_mn: d.mean(),
            d_stderr: d.stderr(),
            mse_correct: correct.mean(),
            correct_samples: correct.count,
            decodes: dec,
            fresh_errors: fresh,
            offset_samples: off,
            p_err_m: if dec == 0 { 0.0 } else { fresh as f64 / dec as f64 },
        });
    }
    let p_err = if decodes == 0 { 0.0 } else { fresh_errors as f64 / decodes as f64 };
    let p_stderr = if decodes == 0 { 0.0 } else { (p_err * (1.0 - p_err) / decodes as f64).sqrt() };
    let bits_per_sample = block_bits as f64 / slots as f64;
    let report = ChainRunReport {
        n,
        sigma,
        slots,
        genie: cfg.genie,
        block_bits,
        bits_per_sample,
        nats_per_sample: bits_per_sample * std::f64::consts::LN_2,
        scale,
        nodes,
        alpha: alpha.mean(),
        alpha_stderr: alpha.stderr(),
        beta: beta.mean(),
        beta_stderr: beta.stderr(),
        p_err,
        p_stderr,
        fresh_errors,
        decodes,
    };
    let decoded = cells.iter().map(|c| c.xhat).collect();
    Ok(ChainRun { report, decoded })
}

/// Lattice scale of the side-information nodes: the schedule at
/// `ρ = √(1−1/m)`, `σ_X = σ√(m/n)`, which does not depend on `m`.
pub fn wz_scale(n: usize, sigma: f64) -> Result<f64, NetsimError> {
    let m = n.max(2) as f64;
    let rho = (1.0 - 1.0 / m).sqrt();
    Ok(scale_schedule(rho, sigma * (m / n as f64).sqrt())?)
}

/// `α + β·m·p·(1 + (m−1)p)`: the excess-distortion bound when errors among
/// the first `m` nodes are `Binomial(m, p)` and add coherently.
pub fn excess_distortion_model(m: usize, p: f64, alpha: f64, beta: f64) -> Result<f64, NetsimError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NetsimError::InvalidConfig(format!("error probability {p} outside [0, 1]")));
    }
    let m = m as f64;
    Ok(alpha + beta * m * p * (1.0 + (m - 1.0) * p))
}

/// Zero-order-hold distortion at one position `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpPoint {
    pub u: f64,
    /// Sample interval `((m−1)/n, m/n]` containing `u`.
    pub m: usize,
    pub d_u: f64,
    pub stderr: f64,
    /// `D_{(m−1)/n}`, zero at the origin.
    pub base: f64,
    pub base_stderr: f64,
    /// `D_{(m−1)/n} + σ²/n`.
    pub bound: f64,
}

impl InterpPoint {
    /// `D_u ≤ bound` within three combined standard errors.
    pub fn within_bound(&self) -> bool {
        self.d_u <= self.bound + 3.0 * self.stderr.hypot(self.base_stderr)
    }
}

/// Distortion of `X̂_u = X̂_{(m−1)/n}` against a Brownian-bridge draw of the
/// true field between samples. Grid points on a sample use that sample's
/// estimate.
pub fn interpolate(
    field: &BrownianField,
    run: &ChainRun,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<InterpPoint>, NetsimError> {
    let n = field.n();
    if run.report.n != n || run.report.slots != field.slots() {
        return Err(NetsimError::InvalidConfig("run and field shapes differ".into()));
    }
    if let Some(u) = grid.iter().find(|u| !(**u > 0.0 && **u <= 1.0)) {
        return Err(NetsimError::InvalidConfig(format!("grid point {u} outside (0, 1]")));
    }
    let step_var = field.sigma() * field.sigma() / n as f64;
    let place = |u: f64| {
        let pos = u * n as f64;
        let r = pos.round();
        if (pos - r).abs() < 1e-9 {
            (r as usize, None)
        } else {
            let m = pos.ceil() as usize;
            (m, Some(pos - (m - 1) as f64))
        }
    };
    let mut acc = vec![Moments::default(); grid.len()];
    for k in 0..field.slots() {
        let mut rng = stream_rng(seed, k as u64);
        for (g, &u) in grid.iter().enumerate() {
            let e = match place(u) {
                (m, None) => field.value(k, m) - run.decoded(k, m),
                (m, Some(t)) => {
                    let truth = bridge_sample(field.value(k, m - 1), field.value(k, m), t, step_var, &mut rng);
                    truth - run.decoded(k, m - 1)
                }
            };
            acc[g].push(e * e);
        }
    }
    let nodes = &run.report.nodes;
    Ok(grid
        .iter()
        .zip(&acc)
        .map(|(&u, a)| {
            let (m, _) = place(u);
            let (base, base_stderr) = if m <= 1 {
                (0.0, 0.0)
            } else {
                (nodes[m - 2].d_mn, nodes[m - 2].d_stderr)
            };
            InterpPoint {
                u,
                m,
                d_u: a.mean(),
                stderr: a.stderr(),
                base,
                base_stderr,
                bound: base + step_var,
            }
        })
        .collect())
}

/// Measured correlation of adjacent nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub m: usize,
    pub rho_hat: f64,
    /// `√(1−1/m)`.
    pub rho: f64,
    /// `(1−ρ²)/√T`.
    pub stderr: f64,
}

impl LadderPoint {
    pub fn z_score(&self) -> f64 {
        (self.rho_hat - self.rho) / self.stderr
    }
}

/// `ρ̂_{m−1,m}` across slots for `m = 2..=n`.
pub fn correlation_ladder(field: &BrownianField) -> Vec<LadderPoint> {
    let t = field.slots() as f64;
    (2..=field.n())
        .map(|m| {
            let a = field.node_series(m - 1);
            let b = field.node_series(m);
            let rho = (1.0 - 1.0 / m as f64).sqrt();
            LadderPoint {
                m,
                rho_hat: pearson(&a, &b),
                rho,
                stderr: (1.0 - rho * rho) / t.sqrt(),
            }
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use wzlvq::sources::gen_brownian_field;

    #[test]
    fn bit_spreading() {
        let bits: Vec<u32> = (0..6).map(|k| sample_bits(9, 6, k)).collect();
        assert_eq!(bits.iter().sum::<u32>(), 9);
        assert!(bits.iter().all(|b| *b == 1 || *b == 2));
        assert!((0..5).all(|k| sample_bits(10, 5, k) == 2));
    }

    #[test]
    fn model_values() {
        assert_eq!(excess_distortion_model(7, 0.0, 0.3, 9.0).unwrap(), 0.3);
        assert!((excess_distortion_model(1, 0.1, 0.3, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((excess_distortion_model(3, 0.5, 0.0, 1.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(excess_distortion_model(3, 1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn scale_is_node_independent() {
        let s = wz_scale(64, 1.0).unwrap();
        for m in [2usize, 10, 64] {
            let rho = (1.0 - 1.0 / m as f64).sqrt();
            let direct = scale_schedule(rho, (m as f64 / 64.0).sqrt()).unwrap();
            assert!((direct - s).abs() < 1e-12);
        }
        assert!((s - 0.125 * 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_budget() {
        let f = gen_brownian_field(16, 1.0, 10, 1).unwrap();
        assert!(matches!(chain_code(&f, &ChainConfig::new((1, 24))), Err(NetsimError::InvalidConfig(_))));
        assert!(chain_code(&f, &ChainConfig::new((17, 1))).is_err());
        let f = gen_brownian_field(15, 1.0, 10, 1).unwrap();
        assert!(chain_code(&f, &ChainConfig::new((1, 1))).is_err());
    }

    #[test]
    fn high_rate_chain_is_error_free() {
        let f = gen_brownian_field(16, 1.0, 2000, 3).unwrap();
        let run = chain_code(&f, &ChainConfig::new((8, 1))).unwrap();
        let r = &run.report;
        assert_eq!(r.fresh_errors, 0);
        let s = r.scale;
        assert!((r.alpha - s * s / 12.0).abs() < 4.0 * r.alpha_stderr);
        for node in &r.nodes[1..] {
            assert_eq!(node.offset_samples, 0);
        }
    }

    #[test]
    fn forced_error_propagates_downstream() {
        let f = gen_brownian_field(16, 1.0, 200, 4).unwrap();
        let mut cfg = ChainConfig::new((8, 1));
        cfg.forced_errors.push((5, 17));
        let run = chain_code(&f, &cfg).unwrap();
        let clean = chain_code(&f, &ChainConfig::new((8, 1))).unwrap();
        let spacing = 256.0 * run.report.scale;
        for m in 1..=16 {
            let delta = run.decoded(17, m) - clean.decoded(17, m);
            let expect = if m >= 5 { spacing } else { 0.0 };
            assert!((delta - expect).abs() < 1e-9, "node {m}: {delta}");
        }
        assert_eq!(run.report.fresh_errors, 1);
        assert!((run.report.beta - spacing * spacing).abs() < 1e-9);

        cfg.genie = true;
        let genie = chain_code(&f, &cfg).unwrap();
        assert_eq!(genie.report.nodes[4].offset_samples, 1);
        assert_eq!(genie.report.nodes[5].offset_samples, 0);
    }

    #[test]
    fn interpolation_at_samples_and_midpoints() {
        let n = 16;
        let f = gen_brownian_field(n, 1.0, 20_000, 6).unwrap();
        let run = chain_code(&f, &ChainConfig::new((10, 1))).unwrap();
        let pts = interpolate(&f, &run, &[0.25, 0.5 - 0.5 / n as f64, 1.0], 1).unwrap();
        assert_eq!(pts[0].m, 4);
        assert!((pts[0].d_u - run.report.nodes[3].d_mn).abs() < 1e-15);
        let mid = &pts[1];
        assert_eq!(mid.m, 8);
        let excess = mid.d_u - mid.base;
        let half = 0.5 / n as f64;
        assert!((excess - half).abs() < 4.0 * mid.stderr.hypot(mid.base_stderr) + 0.2 * half);
        assert!(pts.iter().all(InterpPoint::within_bound));
        assert!(interpolate(&f, &run, &[0.0], 1).is_err());
    }

    #[test]
    fn ladder_matches() {
        let f = gen_brownian_field(16, 1.0, 5000, 8).unwrap();
        let l = correlation_ladder(&f);
        assert_eq!(l.len(), 15);
        assert!(l.iter().all(|p| p.z_score().abs() < 4.0));
    }

    #[test]
    fn run_is_thread_count_independent() {
        let f = gen_brownian_field(16, 1.0, 3000, 2).unwrap();
        let go = || chain_code(&f, &ChainConfig::new((2, 1))).unwrap().report;
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(go);
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(go);
        assert_eq!(a, b);
    }
}
