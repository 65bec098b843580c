//! Rate and distortion: Monte Carlo estimators, closed-form bounds and the
//! comparison against Wyner's rate/distortion function.
//!
//! Rates are in nats per sample throughout.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::codec::{conditional_sigma, SideInfoCodec, WzLvq};
use crate::error::{Error, Result};
use crate::lattice::{hexagonal_second_moment, Lattice};
use crate::linalg;
use crate::mc::{self, Merge, Moments};
use crate::sources::{sample_gaussian, sample_pair, GaussianPairSpec};
use crate::sublattice::minimal_norm;

/// Smallest Monte Carlo run the estimators accept.
pub const MIN_TRIALS: u64 = 10_000;

/// Wyner's bound `σX²(1−ρ²)e^{−2R}`.
pub fn wyner_bound(sigma_x: f64, rho: f64, rate: f64) -> f64 {
    sigma_x * sigma_x * (1.0 - rho * rho) * (-2.0 * rate).exp()
}

/// `d̄ / D(R)`.
pub fn figure_of_merit(d_bar: f64, sigma_x: f64, rho: f64, rate: f64) -> f64 {
    d_bar / wyner_bound(sigma_x, rho, rate)
}

/// `(1/n) ln N`.
pub fn high_rate_approx(index: u64, n: usize) -> f64 {
    (index as f64).ln() / n as f64
}

/// How `(x, y)` are drawn for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideInfoModel {
    /// `(x, y)` from the joint Gaussian.
    Joint,
    /// `y = 0` and `x ~ N(0, σX²(1−ρ²) I)`: the conditional law given `Y = 0`.
    Pinned,
}

/// Source parameters for the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub model: SideInfoModel,
}

impl SourceParams {
    pub fn joint(sigma_x: f64, sigma_y: f64, rho: f64) -> Self {
        Self {
            sigma_x,
            sigma_y,
            rho,
            model: SideInfoModel::Joint,
        }
    }

    pub fn pinned(sigma_x: f64, rho: f64) -> Self {
        Self {
            sigma_x,
            sigma_y: sigma_x,
            rho,
            model: SideInfoModel::Pinned,
        }
    }

    fn validate(&self, n: usize) -> Result<GaussianPairSpec> {
        GaussianPairSpec::new(self.sigma_x, self.sigma_y, self.rho, n)
    }

    fn draw<R: rand::Rng + ?Sized>(&self, spec: &GaussianPairSpec, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match self.model {
            SideInfoModel::Joint => sample_pair(spec, rng),
            SideInfoModel::Pinned => {
                let x = sample_gaussian(conditional_sigma(self.rho, self.sigma_x), spec.n, rng);
                (x, vec![0.0; spec.n])
            }
        }
    }
}

/// Monte Carlo distortion split by the decoding-error event.
///
/// `alpha` and `beta` are the unconditional contributions of correct and
/// erroneous decodes, so `d_bar = alpha + beta`; the conditional means are
/// kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub d_bar: f64,
    pub d_bar_stderr: f64,
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub beta: f64,
    pub beta_stderr: f64,
    pub p_err: f64,
    pub p_err_stderr: f64,
    /// `E[MSE | correct]`.
    pub mse_correct: f64,
    /// `E[MSE | error]`, zero when no error was observed.
    pub mse_error: f64,
    pub trials: u64,
    pub errors: u64,
    pub seed: u64,
    pub model: SideInfoModel,
}

impl DistortionReport {
    /// `|d̄ − ((1−p)E[MSE|ok] + p E[MSE|err])|`.
    pub fn recombination_residual(&self) -> f64 {
        (self.d_bar - ((1.0 - self.p_err) * self.mse_correct + self.p_err * self.mse_error)).abs()
    }
}

#[derive(Default, Clone)]
struct DistortionAcc {
    total: Moments,
    alpha: Moments,
    beta: Moments,
    err: Moments,
    ok_only: Moments,
    err_only: Moments,
}

impl Merge for DistortionAcc {
    fn merge_from(&mut self, o: &Self) {
        self.total.merge(&o.total);
        self.alpha.merge(&o.alpha);
        self.beta.merge(&o.beta);
        self.err.merge(&o.err);
        self.ok_only.merge(&o.ok_only);
        self.err_only.merge(&o.err_only);
    }
}

/// Per-sample MSE of `codec` under `source`, split by decode errors.
pub fn mc_distortion<C: SideInfoCodec + ?Sized>(
    codec: &C,
    source: &SourceParams,
    trials: u64,
    seed: u64,
) -> Result<DistortionReport> {
    if trials < MIN_TRIALS {
        return Err(Error::input(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let n = codec.dim();
    let spec = source.validate(n)?;
    let acc = mc::run_batched(trials, seed, DistortionAcc::default, |a, rng, _| {
        let (x, y) = source.draw(&spec, rng);
        let k = codec.encode_unchecked(&x);
        let t = codec.translate(k, &y);
        let wrong = t != codec.translate(k, &x);
        let xhat = codec.reconstruct(k, &t);
        let mse: f64 = x.iter().zip(&xhat).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / n as f64;
        a.total.push(mse);
        a.alpha.push(if wrong { 0.0 } else { mse });
        a.beta.push(if wrong { mse } else { 0.0 });
        a.err.push(if wrong { 1.0 } else { 0.0 });
        if wrong {
            a.err_only.push(mse);
        } else {
            a.ok_only.push(mse);
        }
    });
    Ok(DistortionReport {
        d_bar: acc.total.mean(),
        d_bar_stderr: acc.total.stderr(),
        alpha: acc.alpha.mean(),
        alpha_stderr: acc.alpha.stderr(),
        beta: acc.beta.mean(),
        beta_stderr: acc.beta.stderr(),
        p_err: acc.err.mean(),
        p_err_stderr: acc.err.stderr(),
        mse_correct: acc.ok_only.mean(),
        mse_error: acc.err_only.mean(),
        trials,
        errors: acc.err_only.count,
        seed,
        model: source.model,
    })
}

/// Plug-in entropy of the emitted indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Nats per sample.
    pub empirical_entropy_rate: f64,
    /// `(1/n) ln N`.
    pub high_rate_approx: f64,
    pub per_index_freq: Vec<u64>,
    pub trials: u64,
}

impl RateEstimate {
    /// Largest `|count − T/N|` in units of the binomial standard deviation.
    pub fn max_uniformity_z(&self) -> f64 {
        let t = self.trials as f64;
        let p = 1.0 / self.per_index_freq.len() as f64;
        let sd = (t * p * (1.0 - p)).sqrt();
        if sd == 0.0 {
            return 0.0;
        }
        self.per_index_freq
            .iter()
            .map(|&c| (c as f64 - t * p).abs() / sd)
            .fold(0.0, f64::max)
    }
}

#[derive(Default)]
struct Histogram(Vec<u64>);

impl Merge for Histogram {
    fn merge_from(&mut self, o: &Self) {
        if self.0.len() < o.0.len() {
            self.0.resize(o.0.len(), 0);
        }
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += b;
        }
    }
}

pub fn empirical_rate<C: SideInfoCodec + ?Sized>(
    codec: &C,
    source: &SourceParams,
    trials: u64,
    seed: u64,
) -> Result<RateEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::input(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let n = codec.dim();
    let spec = source.validate(n)?;
    let count = codec.index_count() as usize;
    let hist = mc::run_batched(
        trials,
        seed,
        || Histogram(vec![0; count]),
        |h, rng, _| {
            let (x, _) = source.draw(&spec, rng);
            h.0[codec.encode_unchecked(&x)] += 1;
        },
    );
    let t = trials as f64;
    let entropy: f64 = hist
        .0
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum();
    Ok(RateEstimate {
        empirical_entropy_rate: entropy / n as f64,
        high_rate_approx: high_rate_approx(codec.index_count(), n),
        per_index_freq: hist.0,
        trials,
    })
}

/// Surface area of the unit sphere in `Rⁿ`.
fn sphere_surface(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Volume of the unit ball in `Rⁿ`.
fn ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

/// Inputs to the error-excess bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBoundParams {
    pub n: usize,
    pub index: u64,
    pub s: f64,
    pub sigma_x: f64,
    pub rho: f64,
    /// `ν(sκ(Λ))`.
    pub coarse_volume: f64,
}

impl BetaBoundParams {
    pub fn new(n: usize, index: u64, s: f64, sigma_x: f64, rho: f64, coarse_volume: f64) -> Result<Self> {
        if n == 0 || index == 0 || !(s > 0.0) || !(sigma_x > 0.0) || !(coarse_volume > 0.0) {
            return Err(Error::input("n, N, s, σX and ν must be positive"));
        }
        if !(rho * rho < 1.0) {
            return Err(Error::input("need ρ² < 1"));
        }
        Ok(Self {
            n,
            index,
            s,
            sigma_x,
            rho,
            coarse_volume,
        })
    }

    pub fn for_codec(q: &WzLvq, sigma_x: f64, rho: f64) -> Result<Self> {
        let n = q.dim();
        let vol = q.sublattice().coarse().volume() * q.scale().powi(n as i32);
        Self::new(n, q.index(), q.scale(), sigma_x, rho, vol)
    }

    fn cond_var(&self) -> f64 {
        self.sigma_x * self.sigma_x * (1.0 - self.rho * self.rho)
    }

    /// `s²/(2σX²(1−ρ²))`.
    pub fn exponent(&self) -> f64 {
        self.s * self.s / (2.0 * self.cond_var())
    }

    /// Shell-count constant `c_n / (d_n (N/2)^{n−1})`, with `c_n` the unit
    /// sphere surface in `Rⁿ` and `d_n` the unit ball volume in `Rⁿ⁻¹`.
    pub fn e_n(&self) -> f64 {
        let d_n = if self.n == 1 { 1.0 } else { ball_volume(self.n - 1) };
        sphere_surface(self.n) / (d_n * (self.index as f64 / 2.0).powi(self.n as i32 - 1))
    }

    /// `(1/n)·2ν s²/(2πσX²(1−ρ²))^{n/2}`, shared by the bound and the series.
    fn prefactor(&self) -> f64 {
        2.0 * self.coarse_volume * self.s * self.s
            / (2.0 * PI * self.cond_var()).powf(self.n as f64 / 2.0)
            / self.n as f64
    }
}

/// Closed-form upper bound on the error excess:
/// `prefactor · e_n · e^{−a}/(1−e^{−a})` with `a = s²/(2σX²(1−ρ²))`.
/// Infinite when `a` is too small for the geometric factor to be finite.
pub fn beta_upper_bound(p: &BetaBoundParams) -> f64 {
    let a = p.exponent();
    let denom = -(-a).exp_m1();
    if !(denom > 1e-300) {
        return f64::INFINITY;
    }
    let v = p.prefactor() * p.e_n() * (-a).exp() / denom;
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// `counts[m]` = number of lattice vectors of squared norm `m`, for
/// `m ≤ m_max`. Norms must be integers.
pub fn theta_counts(lattice: &Lattice, m_max: u64) -> Result<Vec<u64>> {
    if m_max > 10_000 {
        return Err(Error::ResourceLimit(format!("m_max {m_max} exceeds 10000")));
    }
    let mut counts = vec![0u64; m_max as usize + 1];
    let mut bad = None;
    lattice.for_each_point_within(m_max as f64, |_, d| {
        let m = d.round();
        if (d - m).abs() > 1e-6 * d.max(1.0) {
            bad = Some(d);
        } else if m as u64 <= m_max {
            counts[m as usize] += 1;
        }
    });
    if let Some(d) = bad {
        return Err(Error::input(format!("lattice has non-integral norm {d}")));
    }
    Ok(counts)
}

/// Sharper form of the bound using exact shell counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSeries {
    pub value: f64,
    /// Rigorous bound on the omitted terms `m > m_max`.
    pub tail_bound: f64,
    pub m_max: u64,
}

/// `prefactor · Σ_{m≥1} N_m e^{−s² n m·scale/(2σX²(1−ρ²))}`.
///
/// `counts` are shell counts in an integral basis; `norm_scale` converts
/// those norms to the coarse lattice actually used (for example `2/√3` for
/// the unit-volume hexagonal lattice). The tail is bounded with
/// `#{‖λ‖² ≤ r²} ≤ V_n(r + √μ/2)ⁿ/ν`, `μ` the smallest nonzero norm.
pub fn exact_beta_series(
    p: &BetaBoundParams,
    counts: &[u64],
    norm_scale: f64,
    coarse_volume_raw: f64,
    tolerance: f64,
) -> Result<BetaSeries> {
    if counts.is_empty() || !(norm_scale > 0.0) || !(coarse_volume_raw > 0.0) {
        return Err(Error::input("need shell counts, positive norm scale and volume"));
    }
    let m_max = counts.len() as u64 - 1;
    let b = p.s * p.s * p.n as f64 * norm_scale / (2.0 * p.cond_var());
    let pre = p.prefactor();
    let mut sum = 0.0;
    for (m, &c) in counts.iter().enumerate().skip(1) {
        if c > 0 {
            sum += c as f64 * (-b * m as f64).exp();
        }
    }
    let mu = counts
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &c)| c > 0)
        .map(|(m, _)| m as f64)
        .ok_or_else(|| Error::Uncertified("no nonzero vector within m_max".into()))?;
    let n = p.n as i32;
    let ball = ball_volume(p.n);
    let within = |m: f64| ball * (m.sqrt() + mu.sqrt() / 2.0).powi(n) / coarse_volume_raw;
    let mut tail = 0.0;
    let mut m = m_max as f64;
    loop {
        let term = within(m + 1.0) * (-b * m).exp();
        tail += term;
        if term <= 1e-18 * tail.max(f64::MIN_POSITIVE) || term == 0.0 {
            break;
        }
        m += 1.0;
        if m > m_max as f64 + 1e7 {
            return Err(Error::Uncertified("tail does not decay".into()));
        }
    }
    let tail = pre * tail;
    let value = pre * sum;
    if !(tail <= tolerance) {
        return Err(Error::Uncertified(format!(
            "tail bound {tail:e} exceeds tolerance {tolerance:e} at m_max = {m_max}"
        )));
    }
    Ok(BetaSeries {
        value,
        tail_bound: tail,
        m_max,
    })
}

/// Bounds on the best normalized second moment in dimension `n`.
pub fn gn_bounds(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::input("n must be at least 1"));
    }
    let nf = n as f64;
    let g = (2.0 / nf * ln_gamma(nf / 2.0 + 1.0)).exp();
    let lower = g / ((nf + 2.0) * PI);
    let upper = g * gamma(1.0 + 2.0 / nf) / (nf * PI);
    Ok((lower, upper))
}

/// Best known normalized second moment for `n = 1, 2`.
pub fn optimal_g(n: usize) -> Option<f64> {
    match n {
        1 => Some(1.0 / 12.0),
        2 => Some(hexagonal_second_moment()),
        _ => None,
    }
}

/// `‖f‖_{n/(n+2)}` of `N(0, v I)` in `Rⁿ`, in closed form:
/// `2πv ((n+2)/n)^{(n+2)/2}`.
pub fn gaussian_norm(n: usize, variance: f64) -> f64 {
    let nf = n as f64;
    2.0 * PI * variance * ((nf + 2.0) / nf).powf((nf + 2.0) / 2.0)
}

/// The same quantity by Simpson quadrature of the one-dimensional factor.
pub fn gaussian_norm_quadrature(n: usize, variance: f64) -> f64 {
    let nf = n as f64;
    let p = nf / (nf + 2.0);
    let sd = variance.sqrt();
    // g(x)^p decays like N(0, v/p); integrate ±40 of those deviations
    let half = 40.0 * sd / p.sqrt();
    let steps = 20_000usize;
    let h = 2.0 * half / steps as f64;
    let g = |x: f64| ((-x * x / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()).powf(p);
    let mut acc = g(-half) + g(half);
    for i in 1..steps {
        let x = -half + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
    }
    let one_dim = acc * h / 3.0;
    (nf * one_dim.ln() / p).exp()
}

/// Which fine quantizer a prediction is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FineVariant {
    Lattice,
    Matched,
}

/// High-rate prediction of the error-free distortion.
///
/// Lattice: `G·S²·e^{−2R}` where `S = s·N^{1/n}` is the linear scale of the
/// coarse cell (so the prediction is the fine-cell moment `G s²`). Matched:
/// `G_n ‖f_{X|Y}‖_{n/(n+2)} e^{−2R}` with the best known `G_n`.
pub fn predicted_alpha(
    n: usize,
    index: u64,
    sigma_x: f64,
    rho: f64,
    variant: FineVariant,
    fine_scale: f64,
    g: f64,
) -> f64 {
    let rate = high_rate_approx(index, n);
    match variant {
        FineVariant::Lattice => {
            let coarse_scale = fine_scale * (index as f64).powf(1.0 / n as f64);
            g * coarse_scale * coarse_scale * (-2.0 * rate).exp()
        }
        FineVariant::Matched => {
            let v = sigma_x * sigma_x * (1.0 - rho * rho);
            g * gaussian_norm(n, v) * (-2.0 * rate).exp()
        }
    }
}

/// `1/(2πe)`, the common limit of the `G_n` bounds.
pub fn sphere_limit() -> f64 {
    1.0 / (2.0 * PI * E)
}

/// Squared norm of the shortest nonzero vector of the scaled coarse lattice.
pub fn coarse_minimal_norm(q: &WzLvq) -> f64 {
    minimal_norm(q.sublattice().coarse()) * q.scale() * q.scale()
}

/// Probability that `N(0, σ²)` lands outside `(−h, h)`.
pub fn two_sided_tail(h: f64, sigma: f64) -> f64 {
    statrs::function::erf::erfc(h / (sigma * std::f64::consts::SQRT_2))
}

/// Mean squared norm of the error `x − x̂` over a codebook-free lattice cell,
/// `G ν^{2/n}`; used to check measured α for lattice codecs.
pub fn lattice_cell_mse(l: &Lattice, g: f64) -> f64 {
    g * l.volume().powf(2.0 / l.dim() as f64)
}

/// Squared Euclidean distance.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    linalg::norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{rho_from_gap, scale_schedule, train_matched_fine, MatchedCodec};
    use crate::sublattice::{eisenstein_similarity, scaling_similarity, Sublattice};

    fn z_codec(k: u64, s: f64) -> WzLvq {
        let z = Lattice::integer(1).unwrap();
        WzLvq::new(Sublattice::new(z.clone(), scaling_similarity(&z, k).unwrap()).unwrap(), s).unwrap()
    }

    fn hex_codec(a: i64, b: i64, s: f64) -> WzLvq {
        let l = Lattice::hexagonal_normalized();
        WzLvq::new(Sublattice::new(l.clone(), eisenstein_similarity(&l, a, b).unwrap()).unwrap(), s).unwrap()
    }

    #[test]
    fn wyner_values() {
        assert_eq!(wyner_bound(1.0, 0.0, 0.0), 1.0);
        assert!((wyner_bound(1.0, 0.99, 1.0) - 0.0199 * (-2f64).exp()).abs() < 1e-15);
        assert!((wyner_bound(1.0, 0.99, 1.0) - 2.693e-3).abs() < 1e-6);
        let r = 0.7;
        let ratio = wyner_bound(2.0, 0.5, r + 2f64.ln() / 2.0) / wyner_bound(2.0, 0.5, r);
        assert!((ratio - 0.5).abs() < 1e-14);
        assert_eq!(figure_of_merit(wyner_bound(1.0, 0.9, 0.3), 1.0, 0.9, 0.3), 1.0);
    }

    #[test]
    fn single_coset_has_zero_rate() {
        let q = z_codec(1, 1.0);
        let r = empirical_rate(&q, &SourceParams::joint(1.0, 1.0, 0.9), 20_000, 1).unwrap();
        assert_eq!(r.empirical_entropy_rate, 0.0);
        assert_eq!(r.high_rate_approx, 0.0);
    }

    #[test]
    fn coarse_scale_rate_falls_short() {
        let q = z_codec(4, 10.0);
        let r = empirical_rate(&q, &SourceParams::joint(1.0, 1.0, 0.5), 50_000, 2).unwrap();
        assert!(r.empirical_entropy_rate < 4f64.ln() - 0.1);
    }

    #[test]
    fn rate_converges_as_scale_shrinks() {
        let mut prev = 0.0;
        for s in [2.0, 0.5, 0.1, 0.02] {
            let q = z_codec(4, s);
            let r = empirical_rate(&q, &SourceParams::joint(1.0, 1.0, 0.5), 100_000, 3).unwrap();
            assert!(r.empirical_entropy_rate > prev - 0.002);
            prev = r.empirical_entropy_rate;
        }
        assert!((prev - 4f64.ln()).abs() < 0.01);
    }

    #[test]
    fn perfect_side_information_never_errs() {
        let q = hex_codec(5, 1, 0.3);
        let rho = 1.0 - 1e-15;
        let r = mc_distortion(&q, &SourceParams::joint(1.0, 1.0, rho), 20_000, 4).unwrap();
        assert_eq!(r.errors, 0);
        let g = hexagonal_second_moment();
        let expect = g * 0.09;
        assert!((r.d_bar - expect).abs() < 4.0 * r.d_bar_stderr);
    }

    #[test]
    fn report_recombines() {
        let q = z_codec(4, 1.0);
        let r = mc_distortion(&q, &SourceParams::joint(1.0, 1.0, 0.9), 50_000, 5).unwrap();
        assert!(r.errors > 0);
        assert!(r.recombination_residual() < 1e-9);
        assert!((r.d_bar - r.alpha - r.beta).abs() < 1e-12);
        assert!(r.p_err <= 1.0 && r.alpha >= 0.0 && r.beta >= 0.0);
    }

    #[test]
    fn scalar_error_rate_matches_tail_integral() {
        // pinned: y = 0, x ~ N(0, σ²); the decode is wrong exactly when
        // Q(x) leaves the zero coarse cell {−1, 0, 1, 2}·s
        let sigma = (1.0f64 - 0.999 * 0.999).sqrt();
        let s = 0.02;
        let q = z_codec(4, s);
        let r = mc_distortion(&q, &SourceParams::pinned(1.0, 0.999), 400_000, 6).unwrap();
        let normal_upper = |z: f64| 0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
        let p = normal_upper(2.5 * s / sigma) + normal_upper(1.5 * s / sigma);
        assert!((r.p_err - p).abs() < 4.0 * r.p_err_stderr.max(1e-6), "{} vs {p}", r.p_err);
    }

    #[test]
    fn e_n_values() {
        let p = BetaBoundParams::new(1, 4, 1.0, 1.0, 0.9, 4.0).unwrap();
        assert!((p.e_n() - 2.0).abs() < 1e-12);
        let p = BetaBoundParams::new(2, 21, 1.0, 1.0, 0.9, 4.0).unwrap();
        assert!((p.e_n() - 2.0 * PI / 21.0).abs() < 1e-12);
    }

    #[test]
    fn bound_geometric_factor() {
        // a = ln 2 makes e^{−a}/(1−e^{−a}) = 1
        let var = 1.0 - 0.6f64 * 0.6;
        let s = (2.0 * var * 2f64.ln()).sqrt();
        let p = BetaBoundParams::new(1, 4, s, 1.0, 0.6, 4.0 * s).unwrap();
        let expect = p.prefactor() * p.e_n();
        assert!((beta_upper_bound(&p) - expect).abs() < 1e-12 * expect);
        let tiny = BetaBoundParams::new(1, 4, 1e-200, 1.0, 0.6, 1e-200).unwrap();
        assert_eq!(beta_upper_bound(&tiny), f64::INFINITY);
    }

    #[test]
    fn bound_decreases_along_schedule() {
        let mut prev = f64::INFINITY;
        for gap in [0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4] {
            let rho = rho_from_gap(gap);
            let q = z_codec(4, scale_schedule(rho, 1.0).unwrap());
            let b = beta_upper_bound(&BetaBoundParams::for_codec(&q, 1.0, rho).unwrap());
            assert!(b < prev, "gap {gap}: {b} ≥ {prev}");
            prev = b;
        }
    }

    #[test]
    fn theta_examples() {
        let a2 = Lattice::hexagonal();
        let c = theta_counts(&a2, 4).unwrap();
        assert_eq!(c[..5], [1, 6, 0, 6, 6]);
        let l = Lattice::hexagonal();
        let s = Sublattice::new(l.clone(), eisenstein_similarity(&l, 5, 1).unwrap()).unwrap();
        let c = theta_counts(s.coarse(), 30).unwrap();
        assert!(c[1..21].iter().all(|&v| v == 0));
        assert_eq!(c[21], 6);
        let z = Lattice::integer(1).unwrap().scale(4.0).unwrap();
        let c = theta_counts(&z, 16).unwrap();
        assert_eq!(c[16], 2);
        assert!(theta_counts(&Lattice::hexagonal_normalized(), 3).is_err());
        assert!(theta_counts(&z, 20_000).is_err());
    }

    #[test]
    fn series_below_bound_and_tail_honest() {
        let z = Lattice::integer(1).unwrap();
        let coarse_raw = z.scale(4.0).unwrap();
        for gap in [0.2, 0.1, 0.05] {
            let rho = rho_from_gap(gap);
            let q = z_codec(4, scale_schedule(rho, 1.0).unwrap());
            let p = BetaBoundParams::for_codec(&q, 1.0, rho).unwrap();
            let short = exact_beta_series(&p, &theta_counts(&coarse_raw, 2000).unwrap(), 1.0, 4.0, 1e-3).unwrap();
            let long = exact_beta_series(&p, &theta_counts(&coarse_raw, 4000).unwrap(), 1.0, 4.0, 1e-3).unwrap();
            assert!(short.value <= beta_upper_bound(&p));
            assert!((long.value - short.value).abs() <= short.tail_bound);
        }
        // nothing within m_max and a certified tail gives ≈ 0
        let p = BetaBoundParams::new(1, 4, 1.0, 1.0, 0.999, 4.0).unwrap();
        let r = exact_beta_series(&p, &theta_counts(&coarse_raw, 16).unwrap(), 1.0, 4.0, 1e-10).unwrap();
        assert!(r.value < 1e-100 && r.tail_bound < 1e-10);
        let r = exact_beta_series(&p, &[1, 0, 0], 1.0, 4.0, 1.0);
        assert!(matches!(r, Err(Error::Uncertified(_))));
    }

    #[test]
    fn gn_values() {
        let (lo, hi) = gn_bounds(1).unwrap();
        assert!((lo - 1.0 / 12.0).abs() < 1e-12 && (hi - 0.5).abs() < 1e-12);
        let (lo, hi) = gn_bounds(1000).unwrap();
        let lim = sphere_limit();
        assert!((lo - lim).abs() < 0.05 * lim && (hi - lim).abs() < 0.05 * lim);
        for n in 1..50 {
            let (lo, hi) = gn_bounds(n).unwrap();
            assert!(lo < hi);
        }
        let (lo, hi) = gn_bounds(2).unwrap();
        assert!(lo < hexagonal_second_moment() && hexagonal_second_moment() < hi);
    }

    #[test]
    fn gaussian_norm_closed_form_vs_quadrature() {
        for (n, v) in [(1, 1.0), (2, 0.3), (5, 2.0), (200, 1e-6)] {
            let a = gaussian_norm(n, v);
            let b = gaussian_norm_quadrature(n, v);
            assert!((a - b).abs() < 1e-6 * a, "n={n}: {a} vs {b}");
        }
        assert!((gaussian_norm(1, 1.0) - 2.0 * PI * 3f64.powf(1.5)).abs() < 1e-12);
        let lim = 2.0 * PI * E;
        assert!((gaussian_norm(200, 1.0) - lim).abs() < 0.01 * lim);
    }

    #[test]
    fn lattice_prediction_scales_with_rate() {
        let a = predicted_alpha(1, 4, 1.0, 0.99, FineVariant::Lattice, 0.1, 1.0 / 12.0);
        let coarse = 0.1 * 4.0;
        // quadrupling N at fixed coarse scale
        let b = predicted_alpha(1, 16, 1.0, 0.99, FineVariant::Lattice, coarse / 16.0, 1.0 / 12.0);
        assert!((b / a - (-2.0 * 4f64.ln()).exp()).abs() < 1e-12);
        assert!((a - 0.01 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn matched_beats_lattice_error_free() {
        let rho = rho_from_gap(1e-2);
        let s = scale_schedule(rho, 1.0).unwrap();
        let q = z_codec(16, s);
        let tr = train_matched_fine(&q, rho, 1.0, 100_000, 60, 7).unwrap();
        let m = MatchedCodec::new(&q, tr.codebook).unwrap();
        let src = SourceParams::pinned(1.0, rho);
        let rl = mc_distortion(&q, &src, 100_000, 8).unwrap();
        let rm = mc_distortion(&m, &src, 100_000, 8).unwrap();
        assert!(rm.mse_correct <= rl.mse_correct + 3.0 * rl.alpha_stderr);
    }
}
