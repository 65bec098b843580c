//! The three experiment commands. Each returns the full output document so
//! that callers decide where it goes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use wzlvq::analysis::{
    beta_upper_bound, empirical_rate, figure_of_merit, high_rate_approx, mc_distortion, optimal_g,
    predicted_alpha, wyner_bound, BetaBoundParams, DistortionReport, FineVariant, RateEstimate,
    SourceParams, SideInfoModel,
};
use wzlvq::codec::{scale_schedule, train_matched_fine};
use wzlvq::lattice::hexagonal_second_moment;
use wzlvq::sublattice::{eisenstein_similarity, scaling_similarity};
use wzlvq::{Lattice, MatchedCodec, SideInfoCodec, Sublattice, WzLvq};
use wzlvq_netsim::chain::{correlation_ladder, interpolate, InterpPoint};
use wzlvq_netsim::{build_layout, chain_code, run_transport, ChainConfig, ChainRunReport, TransportReport};
use wzlvq::sources::gen_brownian_field;

use crate::config::{ExperimentConfig, QuantizerSpec, Similarity};
use crate::{CliError, Format, SCHEMA_VERSION};

const LN2: f64 = std::f64::consts::LN_2;

fn header(command: &str, cfg: &ExperimentConfig, seed: u64) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "build": crate::build_stamp(),
        "config_hash": cfg.hash(),
        "seed": seed,
    })
}

fn csv_preamble(command: &str, cfg: &ExperimentConfig) -> String {
    format!(
        "# wzlvq {command} schema={SCHEMA_VERSION} config_hash={} build={}\n",
        cfg.hash(),
        crate::build_stamp()
    )
}

fn to_json(mut head: Value, body: Value) -> String {
    if let (Value::Object(h), Value::Object(b)) = (&mut head, body) {
        h.extend(b);
    }
    let mut s = serde_json::to_string_pretty(&head).expect("record serializes");
    s.push('\n');
    s
}

/// A codec built from a spec at one correlation.
pub struct BuiltCodec {
    pub lattice: WzLvq,
    pub matched: Option<MatchedCodec>,
}

impl BuiltCodec {
    pub fn codec(&self) -> &dyn SideInfoCodec {
        match &self.matched {
            Some(m) => m,
            None => &self.lattice,
        }
    }
}

pub fn build_codec(spec: &QuantizerSpec, rho: f64, seed: u64) -> Result<BuiltCodec, CliError> {
    let fine = Lattice::from_name(&spec.lattice, spec.dim)?;
    let kappa = match spec.similarity {
        Similarity::Scaling(k) => scaling_similarity(&fine, k)?,
        Similarity::Eisenstein(a, b) => eisenstein_similarity(&fine, a, b)?,
    };
    let s = match spec.s {
        Some(s) => s,
        None => scale_schedule(rho, spec.sigma_x)?,
    };
    let lattice = WzLvq::new(Sublattice::new(fine, kappa)?, s)?;
    let matched = match spec.fine {
        FineVariant::Lattice => None,
        FineVariant::Matched => {
            let trace = train_matched_fine(&lattice, rho, spec.sigma_x, spec.train_trials, spec.lloyd_iters, seed)?;
            Some(MatchedCodec::new(&lattice, trace.codebook)?)
        }
    };
    Ok(BuiltCodec { lattice, matched })
}

fn lattice_g(spec: &QuantizerSpec) -> f64 {
    match spec.lattice.as_str() {
        "Z" => 1.0 / 12.0,
        _ => hexagonal_second_moment(),
    }
}

fn source(spec: &QuantizerSpec, rho: f64) -> SourceParams {
    match spec.model {
        SideInfoModel::Joint => SourceParams::joint(spec.sigma_x, spec.sigma_y, rho),
        SideInfoModel::Pinned => SourceParams::pinned(spec.sigma_x, rho),
    }
}

/// One grid point of a quantizer experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub gap: f64,
    pub s: f64,
    pub index: u64,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub d_bar: f64,
    pub d_bar_stderr: f64,
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub beta: f64,
    pub beta_stderr: f64,
    pub p_err: f64,
    pub errors: u64,
    pub wyner: f64,
    pub figure_of_merit: f64,
    pub figure_of_merit_stderr: f64,
    pub predicted_alpha: f64,
    pub beta_upper_bound: f64,
}

const SWEEP_COLUMNS: &str = "rho,gap,s,index,rate_nats,rate_bits,d_bar,d_bar_stderr,alpha,alpha_stderr,beta,beta_stderr,p_err,errors,wyner,figure_of_merit,figure_of_merit_stderr,predicted_alpha,beta_upper_bound";

impl SweepRow {
    fn csv(&self) -> String {
        format!(
            "{},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e}",
            self.rho,
            self.gap,
            self.s,
            self.index,
            self.rate_nats,
            self.rate_bits,
            self.d_bar,
            self.d_bar_stderr,
            self.alpha,
            self.alpha_stderr,
            self.beta,
            self.beta_stderr,
            self.p_err,
            self.errors,
            self.wyner,
            self.figure_of_merit,
            self.figure_of_merit_stderr,
            self.predicted_alpha,
            self.beta_upper_bound
        )
    }
}

/// Distortion and bounds of one codec at one correlation.
pub fn evaluate(
    spec: &QuantizerSpec,
    rho: f64,
    trials: u64,
    seed: u64,
) -> Result<(SweepRow, DistortionReport, BuiltCodec), CliError> {
    let built = build_codec(spec, rho, seed)?;
    let codec = built.codec();
    let q = &built.lattice;
    let n = spec.dim;
    let rep = mc_distortion(codec, &source(spec, rho), trials, seed)?;
    let rate = high_rate_approx(q.index(), n);
    let wyner = wyner_bound(spec.sigma_x, rho, rate);
    let g = match spec.fine {
        FineVariant::Lattice => lattice_g(spec),
        FineVariant::Matched => optimal_g(n).unwrap_or(lattice_g(spec)),
    };
    let predicted = predicted_alpha(n, q.index(), spec.sigma_x, rho, spec.fine, q.scale(), g);
    let ub = BetaBoundParams::for_codec(q, spec.sigma_x, rho)
        .map(|p| beta_upper_bound(&p))
        .unwrap_or(f64::NAN);
    let row = SweepRow {
        rho,
        gap: (1.0 - rho * rho).sqrt(),
        s: q.scale(),
        index: q.index(),
        rate_nats: rate,
        rate_bits: rate / LN2,
        d_bar: rep.d_bar,
        d_bar_stderr: rep.d_bar_stderr,
        alpha: rep.alpha,
        alpha_stderr: rep.alpha_stderr,
        beta: rep.beta,
        beta_stderr: rep.beta_stderr,
        p_err: rep.p_err,
        errors: rep.errors,
        wyner,
        figure_of_merit: figure_of_merit(rep.d_bar, spec.sigma_x, rho, rate),
        figure_of_merit_stderr: rep.d_bar_stderr / wyner,
        predicted_alpha: predicted,
        beta_upper_bound: ub,
    };
    Ok((row, rep, built))
}

pub fn quantize(cfg: &ExperimentConfig, format: Format) -> Result<String, CliError> {
    cfg.check_command("quantize")?;
    let seed = cfg.seed()?;
    let trials = cfg.trials()?;
    let spec = cfg.quantizer()?;
    let rho = cfg.rho_point()?;
    let (row, rep, built) = evaluate(&spec, rho, trials, seed)?;
    let rate: RateEstimate = empirical_rate(built.codec(), &source(&spec, rho), trials, seed)?;
    Ok(match format {
        Format::Json => to_json(
            header("quantize", cfg, seed),
            json!({
                "params": cfg,
                "summary": row,
                "rate": {
                    "fixed_nats": row.rate_nats,
                    "fixed_bits": row.rate_bits,
                    "empirical_nats": rate.empirical_entropy_rate,
                    "empirical_bits": rate.empirical_entropy_rate / LN2,
                },
                "distortion": rep,
                "rate_estimate": rate,
            }),
        ),
        Format::Csv => {
            let mut out = csv_preamble("quantize", cfg);
            writeln!(out, "{SWEEP_COLUMNS},empirical_rate_nats,empirical_rate_bits,max_uniformity_z").unwrap();
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                row.csv(),
                rate.empirical_entropy_rate,
                rate.empirical_entropy_rate / LN2,
                rate.max_uniformity_z()
            )
            .unwrap();
            out
        }
    })
}

/// Rows in grid order; grid points run concurrently.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.check_command("sweep")?;
    let seed = cfg.seed()?;
    let trials = cfg.trials()?;
    let spec = cfg.quantizer()?;
    let grid = cfg.rho_grid()?;
    grid.par_iter()
        .map(|&rho| evaluate(&spec, rho, trials, seed).map(|(row, _, _)| row))
        .collect()
}

pub fn sweep(cfg: &ExperimentConfig, format: Format) -> Result<String, CliError> {
    let rows = sweep_rows(cfg)?;
    let seed = cfg.seed()?;
    Ok(match format {
        Format::Json => to_json(header("sweep", cfg, seed), json!({ "params": cfg, "rows": rows })),
        Format::Csv => {
            let mut out = csv_preamble("sweep", cfg);
            writeln!(out, "{SWEEP_COLUMNS}").unwrap();
            for r in &rows {
                writeln!(out, "{}", r.csv()).unwrap();
            }
            out
        }
    })
}

/// Everything one network size produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetsimRun {
    pub n: usize,
    pub transport: TransportReport,
    pub chain: ChainRunReport,
    pub interpolation: Vec<InterpPoint>,
    pub ladder_max_abs_z: f64,
    /// `α + β m p (1 + (m−1)p)` per node.
    pub model: Vec<f64>,
}

pub fn netsim_runs(cfg: &ExperimentConfig) -> Result<Vec<NetsimRun>, CliError> {
    cfg.check_command("netsim")?;
    let seed = cfg.seed()?;
    let spec = cfg.netsim()?;
    spec.ns
        .par_iter()
        .map(|&n| {
            let layout = build_layout(n)?;
            let transport = run_transport(&layout, spec.periods, spec.link_bits, spec.faults)?;
            transport.verify()?;
            let field = gen_brownian_field(n, spec.sigma, spec.slots, seed)?;
            let chain_cfg = ChainConfig {
                per_node_rate: transport.per_node_rate(),
                genie: spec.genie,
                forced_errors: spec.forced.clone(),
            };
            let run = chain_code(&field, &chain_cfg)?;
            let grid: Vec<f64> = (1..=spec.interp_points)
                .map(|i| i as f64 / spec.interp_points as f64)
                .collect();
            let interpolation = interpolate(&field, &run, &grid, seed.wrapping_add(1))?;
            let ladder_max_abs_z = correlation_ladder(&field)
                .iter()
                .map(|p| p.z_score().abs())
                .fold(0.0, f64::max);
            let model = (1..=n).map(|m| run.report.model_prediction(m)).collect();
            Ok(NetsimRun {
                n,
                transport,
                chain: run.report,
                interpolation,
                ladder_max_abs_z,
                model,
            })
        })
        .collect()
}

pub fn netsim(cfg: &ExperimentConfig, format: Format) -> Result<String, CliError> {
    let runs = netsim_runs(cfg)?;
    let seed = cfg.seed()?;
    Ok(match format {
        Format::Json => to_json(header("netsim", cfg, seed), json!({ "params": cfg, "runs": runs })),
        Format::Csv => {
            let mut out = csv_preamble("netsim", cfg);
            if let [run] = runs.as_slice() {
                let mut buf = Vec::new();
                run.chain.write_csv(&mut buf)?;
                out.push_str(&String::from_utf8(buf).expect("csv is utf-8"));
            } else {
                writeln!(
                    out,
                    "n,bits_per_sample,nats_per_sample,D_end,D_end_stderr,alpha,beta,p_err,excess_ratio,excess_ratio_stderr"
                )
                .unwrap();
                for r in &runs {
                    let (d, se) = r.chain.end_distortion();
                    let (x, xse) = r.chain.excess_ratio();
                    writeln!(
                        out,
                        "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                        r.n,
                        r.chain.bits_per_sample,
                        r.chain.nats_per_sample,
                        d,
                        se,
                        r.chain.alpha,
                        r.chain.beta,
                        r.chain.p_err,
                        x,
                        xse
                    )
                    .unwrap();
                }
            }
            out
        }
    })
}
