//! Encoder/decoder pairs with decoder side information.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg;
use crate::mc::stream_rng;
use crate::sublattice::Sublattice;

/// A fixed-rate code whose decoder sees side information `y`.
///
/// The decoder picks a codeword `c_k` and a coarse translate `t`; the
/// reconstruction is `c_k + t`. Translates are compared in integer coarse
/// coordinates, so the decoding-error event is exact.
pub trait SideInfoCodec: Sync {
    fn dim(&self) -> usize;

    /// Number of distinct indices the encoder emits.
    fn index_count(&self) -> u64;

    /// Index in `0..index_count()`. `x` must be finite and of length `dim()`.
    fn encode_unchecked(&self, x: &[f64]) -> usize;

    /// The coarse lattice used by the decoder, already scaled.
    fn coarse(&self) -> &Lattice;

    /// Codeword `k` inside the zero coarse cell.
    fn codeword(&self, k: usize) -> &[f64];

    /// Coarse coordinates of the translate of codeword `k` nearest to `y`.
    fn translate(&self, k: usize, y: &[f64]) -> Vec<i64> {
        let c = self.codeword(k);
        let d: Vec<f64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
        self.coarse().nearest_coords(&d)
    }

    fn reconstruct(&self, k: usize, t: &[i64]) -> Vec<f64> {
        let shift = self.coarse().embed(t);
        self.codeword(k).iter().zip(shift).map(|(a, b)| a + b).collect()
    }

    /// Reconstruction from index `k` and side information `y`.
    fn decode_unchecked(&self, k: usize, y: &[f64]) -> Vec<f64> {
        self.reconstruct(k, &self.translate(k, y))
    }

    /// What the decoder outputs when `y = x`; any other output is a decoding
    /// error.
    fn reference(&self, x: &[f64]) -> Vec<f64> {
        self.decode_unchecked(self.encode_unchecked(x), x)
    }
}

/// The scale schedule `s = σ ln(1/σ)` with `σ = σ_X √(1−ρ²)`.
///
/// It shrinks to zero with `σ` while `s/σ = ln(1/σ)` grows without bound.
pub fn scale_schedule(rho: f64, sigma_x: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::input(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    if !(sigma_x > 0.0 && sigma_x.is_finite()) {
        return Err(Error::input(format!("σX must be positive, got {sigma_x}")));
    }
    let sc = conditional_sigma(rho, sigma_x);
    if sc >= 1.0 {
        return Err(Error::input(format!(
            "σX·√(1−ρ²) = {sc} ≥ 1: the schedule is only defined at high correlation"
        )));
    }
    Ok(sc * (1.0 / sc).ln())
}

/// Standard deviation of `X` given `Y`, per component.
pub fn conditional_sigma(rho: f64, sigma_x: f64) -> f64 {
    sigma_x * (1.0 - rho * rho).sqrt()
}

/// `ρ` with `√(1−ρ²) = gap`.
pub fn rho_from_gap(gap: f64) -> f64 {
    (1.0 - gap * gap).sqrt()
}

/// The lattice quantizer `(Λ, κ, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WzLvq {
    sub: Sublattice,
    s: f64,
    fine: Lattice,
    coarse: Lattice,
    /// `s·γ_k` for every coset label.
    reps: Vec<Vec<f64>>,
}

impl WzLvq {
    pub fn new(sub: Sublattice, s: f64) -> Result<Self> {
        let fine = sub.fine().scale(s)?;
        let coarse = sub.coarse().scale(s)?;
        let reps = sub
            .cosets()
            .representatives()
            .iter()
            .map(|p| p.embedding.iter().map(|v| v * s).collect())
            .collect();
        Ok(Self {
            sub,
            s,
            fine,
            coarse,
            reps,
        })
    }

    pub fn sublattice(&self) -> &Sublattice {
        &self.sub
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    /// `sΛ`.
    pub fn fine(&self) -> &Lattice {
        &self.fine
    }

    pub fn index(&self) -> u64 {
        self.sub.index()
    }

    /// `s·γ_k`.
    pub fn representative(&self, k: usize) -> Option<&[f64]> {
        self.reps.get(k).map(Vec::as_slice)
    }

    /// Coset label of `Q_{sΛ}(x)`.
    pub fn encode(&self, x: &[f64]) -> Result<usize> {
        self.fine.check_input(x)?;
        Ok(self.encode_unchecked(x))
    }

    /// Coset label computed literally as `Q_{sΛ}(x − Q_{sκΛ}(x))`.
    pub fn encode_two_step(&self, x: &[f64]) -> Result<usize> {
        self.fine.check_input(x)?;
        let r = self.coarse.fold(x);
        Ok(self.sub.cosets().index_of_coords(&self.fine.nearest_coords(&r)))
    }

    /// Point of coset `k` nearest to `y`.
    pub fn decode(&self, k: usize, y: &[f64]) -> Result<Vec<f64>> {
        self.fine.check_input(y)?;
        if k >= self.reps.len() {
            return Err(Error::input(format!(
                "coset index {k} out of range 0..{}",
                self.reps.len()
            )));
        }
        Ok(self.decode_unchecked(k, y))
    }

    /// Fine-lattice coordinates of the decoded point.
    pub fn decode_coords(&self, k: usize, y: &[f64]) -> Result<Vec<i64>> {
        self.fine.check_input(y)?;
        if k >= self.reps.len() {
            return Err(Error::input(format!("coset index {k} out of range 0..{}", self.reps.len())));
        }
        let t = self.translate(k, y);
        let gamma = &self.sub.cosets().representatives()[k].coords;
        Ok(gamma.iter().zip(self.sub.coarse_to_fine(&t)).map(|(a, b)| a + b).collect())
    }

    /// `Q_{sΛ}(x)`.
    pub fn fine_point(&self, x: &[f64]) -> Vec<f64> {
        self.fine.embed(&self.fine.nearest_coords(x))
    }
}

impl SideInfoCodec for WzLvq {
    fn dim(&self) -> usize {
        self.fine.dim()
    }

    fn index_count(&self) -> u64 {
        self.index()
    }

    fn encode_unchecked(&self, x: &[f64]) -> usize {
        self.sub.cosets().index_of_coords(&self.fine.nearest_coords(x))
    }

    fn coarse(&self) -> &Lattice {
        &self.coarse
    }

    fn codeword(&self, k: usize) -> &[f64] {
        &self.reps[k]
    }
}

/// `N` reconstruction points inside the zero cell of the scaled coarse
/// lattice, replacing the fine lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedFineCodebook {
    dim: usize,
    points: Vec<Vec<f64>>,
    /// For `n = 1`: indices sorted by position.
    order: Vec<usize>,
}

impl MatchedFineCodebook {
    pub fn new(coarse: &Lattice, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = coarse.dim();
        if points.is_empty() {
            return Err(Error::input("codebook must be nonempty"));
        }
        for p in &points {
            coarse.check_input(p)?;
            if coarse.nearest_coords(p).iter().any(|&c| c != 0) {
                return Err(Error::input("codebook point outside the zero coarse cell"));
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        if dim == 1 {
            order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
        }
        Ok(Self { dim, points, order })
    }

    /// The untrained codebook: scaled coset representatives.
    pub fn from_lattice(q: &WzLvq) -> Self {
        Self::new(&q.coarse, q.reps.clone()).expect("representatives lie in the zero cell")
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean nearest point; ties to the smaller index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        if self.dim == 1 {
            let v = x[0];
            let pos = self.order.partition_point(|&i| self.points[i][0] < v);
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            // equal positions sit next to each other; scan the neighbourhood
            let lo = pos.saturating_sub(1);
            let mut j = lo;
            while j < self.order.len() {
                let i = self.order[j];
                let d = (self.points[i][0] - v).abs();
                if d < bd || (d == bd && i < best) {
                    bd = d;
                    best = i;
                } else if j > pos && d > bd {
                    break;
                }
                j += 1;
            }
            let mut j = lo;
            while j > 0 {
                j -= 1;
                let i = self.order[j];
                let d = (self.points[i][0] - v).abs();
                if d < bd || (d == bd && i < best) {
                    bd = d;
                    best = i;
                } else if d > bd {
                    break;
                }
            }
            return best;
        }
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    fn squared_error(&self, k: usize, x: &[f64]) -> f64 {
        self.points[k].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// The lattice coarse code with a matched fine codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedCodec {
    coarse: Lattice,
    codebook: MatchedFineCodebook,
    /// Coarse shifts, sorted by length, that can bring a codebook point
    /// nearer to a point of the zero cell.
    shifts: Vec<(f64, Vec<f64>)>,
    max_norm: f64,
}

impl MatchedCodec {
    pub fn new(q: &WzLvq, codebook: MatchedFineCodebook) -> Result<Self> {
        if codebook.dim != q.dim() {
            return Err(Error::input("codebook and quantizer dimensions differ"));
        }
        let coarse = q.coarse.clone();
        // ½Σ‖b_i‖ bounds the covering radius; a better translate lies within
        // ‖x₀‖ + ‖c_k‖ + ‖x₀ − c_{k₀}‖ ≤ 4 of those.
        let cover: f64 = 0.5 * (0..coarse.dim()).map(|j| linalg::norm2(&coarse.basis_vector(j)).sqrt()).sum::<f64>();
        let reach = 4.0 * cover;
        let mut shifts = Vec::new();
        coarse.for_each_point_within(reach * reach, |c, d| shifts.push((d.sqrt(), coarse.embed(c))));
        shifts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_norm = codebook
            .points
            .iter()
            .map(|p| linalg::norm2(p).sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            coarse,
            codebook,
            shifts,
            max_norm,
        })
    }

    pub fn codebook(&self) -> &MatchedFineCodebook {
        &self.codebook
    }

    pub fn encode(&self, x: &[f64]) -> Result<usize> {
        self.coarse.check_input(x)?;
        Ok(self.encode_unchecked(x))
    }

    pub fn decode(&self, k: usize, y: &[f64]) -> Result<Vec<f64>> {
        self.coarse.check_input(y)?;
        if k >= self.codebook.len() {
            return Err(Error::input(format!("index {k} out of range 0..{}", self.codebook.len())));
        }
        Ok(self.decode_unchecked(k, y))
    }
}

impl SideInfoCodec for MatchedCodec {
    fn dim(&self) -> usize {
        self.coarse.dim()
    }

    fn index_count(&self) -> u64 {
        self.codebook.len() as u64
    }

    /// Index of the codebook point with the nearest coarse translate.
    fn encode_unchecked(&self, x: &[f64]) -> usize {
        let x0 = self.coarse.fold(x);
        let norm_x0 = linalg::norm2(&x0).sqrt();
        let mut best = self.codebook.nearest(&x0);
        let mut bd = self.codebook.squared_error(best, &x0);
        let mut shifted = x0.clone();
        for (len, t) in &self.shifts[1..] {
            // ‖x₀ − c − t‖ ≥ ‖t‖ − ‖x₀‖ − ‖c‖, and ‖c‖ ≤ max over the codebook
            if (len - norm_x0 - self.max_norm).max(0.0).powi(2) > bd {
                break;
            }
            for (s, (a, b)) in shifted.iter_mut().zip(x0.iter().zip(t)) {
                *s = a - b;
            }
            let k = self.codebook.nearest(&shifted);
            let d = self.codebook.squared_error(k, &shifted);
            if d < bd || (d == bd && k < best) {
                bd = d;
                best = k;
            }
        }
        best
    }

    fn coarse(&self) -> &Lattice {
        &self.coarse
    }

    fn codeword(&self, k: usize) -> &[f64] {
        &self.codebook.points[k]
    }
}

/// Lloyd training output: the codebook and the training distortion per
/// iteration (mean squared error per component, before each update).
#[derive(Debug, Clone, PartialEq)]
pub struct LloydTrace {
    pub codebook: MatchedFineCodebook,
    pub distortion: Vec<f64>,
}

/// Trains a fine codebook on `X | Y = 0 ~ N(0, σ_X²(1−ρ²) I)`, folded into the
/// zero coarse cell.
///
/// Initial points are the coset representatives companded coordinate-wise to
/// the optimal point density for a Gaussian (variance `σ²(n+2)/n`). An empty
/// cell is re-seeded at the training sample farthest from its assigned point.
pub fn train_matched_fine(
    q: &WzLvq,
    rho: f64,
    sigma_x: f64,
    trials: usize,
    iters: usize,
    seed: u64,
) -> Result<LloydTrace> {
    if !(rho.abs() < 1.0) || !(sigma_x > 0.0) {
        return Err(Error::input("need |ρ| < 1 and σX > 0"));
    }
    if trials == 0 {
        return Err(Error::input("need at least one training sample"));
    }
    let n = q.dim();
    let count = q.index() as usize;
    let sc = conditional_sigma(rho, sigma_x);
    if count == 1 {
        let cb = MatchedFineCodebook::new(&q.coarse, vec![vec![0.0; n]])?;
        return Ok(LloydTrace {
            codebook: cb,
            distortion: Vec::new(),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let samples: Vec<Vec<f64>> = (0..trials)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| sc * rng.sample::<f64, _>(StandardNormal)).collect();
            q.coarse.fold(&x)
        })
        .collect();

    let mut points = compand(&q.reps, sc * ((n as f64 + 2.0) / n as f64).sqrt());
    for p in &mut points {
        *p = q.coarse.fold(p);
    }
    let mut distortion = Vec::with_capacity(iters);
    let mut errors = vec![0.0f64; trials];
    for _ in 0..iters {
        let cb = MatchedFineCodebook::new(&q.coarse, points.clone())?;
        let mut total = 0.0;
        let mut sums = vec![vec![0.0; n]; count];
        let mut counts = vec![0usize; count];
        for (i, x) in samples.iter().enumerate() {
            let k = cb.nearest(x);
            let e = cb.squared_error(k, x);
            errors[i] = e;
            total += e;
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(x) {
                *s += v;
            }
        }
        distortion.push(total / (trials * n) as f64);
        let empty: Vec<usize> = (0..count).filter(|&k| counts[k] == 0).collect();
        let mut farthest: Vec<usize> = Vec::new();
        if !empty.is_empty() {
            farthest = (0..trials).collect();
            farthest.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
        }
        for k in 0..count {
            if counts[k] > 0 {
                points[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            }
        }
        for (j, &k) in empty.iter().enumerate() {
            points[k] = samples[farthest[j % trials]].clone();
        }
    }
    let codebook = MatchedFineCodebook::new(&q.coarse, points)?;
    Ok(LloydTrace {
        codebook,
        distortion,
    })
}

/// Maps each coordinate's distinct values, by rank, onto Gaussian quantiles
/// with standard deviation `spread`.
fn compand(reps: &[Vec<f64>], spread: f64) -> Vec<Vec<f64>> {
    let n = reps[0].len();
    let std = Normal::standard();
    let mut out = reps.to_vec();
    for i in 0..n {
        let mut values: Vec<f64> = reps.iter().map(|p| p[i]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        let m = values.len() as f64;
        for p in &mut out {
            let rank = values.partition_point(|v| *v < p[i] - 1e-12 * p[i].abs().max(1e-300));
            p[i] = spread * std.inverse_cdf((rank as f64 + 0.5) / m);
        }
    }
    out
}

/// A classical scalar quantizer: sorted thresholds and reproduction levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarQuantizer {
    levels: Vec<f64>,
    thresholds: Vec<f64>,
}

impl ScalarQuantizer {
    pub fn from_levels(mut levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("need at least one finite level"));
        }
        levels.sort_by(f64::total_cmp);
        let thresholds = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { levels, thresholds })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn quantize_index(&self, x: f64) -> usize {
        self.thresholds.partition_point(|t| *t < x)
    }

    pub fn quantize(&self, x: f64) -> f64 {
        self.levels[self.quantize_index(x)]
    }
}

/// Lloyd-Max quantizer for `N(0, variance)` with `levels` points, iterated
/// with exact Gaussian centroids. Returns the quantizer and its MSE.
pub fn lloyd_max_gaussian(levels: usize, variance: f64, iters: usize) -> Result<(ScalarQuantizer, f64)> {
    if levels == 0 || !(variance > 0.0) {
        return Err(Error::input("need levels ≥ 1 and positive variance"));
    }
    let sigma = variance.sqrt();
    let std = Normal::standard();
    // companded start: point density ∝ f^{1/3}, a Gaussian with variance 3σ²
    let mut pts: Vec<f64> = (0..levels)
        .map(|i| 3f64.sqrt() * std.inverse_cdf((i as f64 + 0.5) / levels as f64))
        .collect();
    if levels == 1 {
        pts[0] = 0.0;
    }
    let mut edges = vec![0.0; levels + 1];
    for _ in 0..iters {
        edges[0] = f64::NEG_INFINITY;
        edges[levels] = f64::INFINITY;
        for i in 1..levels {
            edges[i] = 0.5 * (pts[i - 1] + pts[i]);
        }
        for i in 0..levels {
            let (a, b) = (edges[i], edges[i + 1]);
            let mass = gauss_mass(a, b);
            if mass > 0.0 {
                pts[i] = (pdf(a) - pdf(b)) / mass;
            }
        }
    }
    edges[0] = f64::NEG_INFINITY;
    edges[levels] = f64::INFINITY;
    for i in 1..levels {
        edges[i] = 0.5 * (pts[i - 1] + pts[i]);
    }
    // E[(Z−c)²; a<Z<b] = P + aφ(a) − bφ(b) − 2c(φ(a)−φ(b)) + c²P
    let mut mse = 0.0;
    for i in 0..levels {
        let (a, b, c) = (edges[i], edges[i + 1], pts[i]);
        let p = gauss_mass(a, b);
        let second = p + tail_term(a) - tail_term(b);
        mse += second - 2.0 * c * (pdf(a) - pdf(b)) + c * c * p;
    }
    let q = ScalarQuantizer::from_levels(pts.iter().map(|v| v * sigma).collect())?;
    Ok((q, mse.max(0.0) * variance))
}

fn pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

fn tail_term(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        z * pdf(z)
    }
}

/// `P(a < Z < b)` for standard normal `Z`, accurate in both tails.
fn gauss_mass(a: f64, b: f64) -> f64 {
    use statrs::function::erf::erfc;
    let upper = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    if a >= 0.0 {
        upper(a) - upper(b)
    } else if b <= 0.0 {
        upper(-b) - upper(-a)
    } else {
        1.0 - upper(-a) - upper(b)
    }
}
