//! Flat key-value experiment configuration and its validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wzlvq::analysis::{FineVariant, SideInfoModel};
use wzlvq::codec::rho_from_gap;

use crate::CliError;

/// Every key a config file may carry. Keys irrelevant to the invoked
/// command are ignored; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,

    pub lattice: Option<String>,
    pub dim: Option<usize>,
    /// Scaling factor of `Zⁿ`.
    pub k: Option<u64>,
    /// Eisenstein generator `a + bω` of an `A2` sublattice.
    pub a: Option<i64>,
    pub b: Option<i64>,
    /// Fixed lattice scale; the correlation schedule is used when absent.
    pub s: Option<f64>,
    /// `lattice` or `matched`.
    pub fine: Option<String>,
    /// `joint` or `pinned`.
    pub model: Option<String>,
    pub sigma_x: Option<f64>,
    pub sigma_y: Option<f64>,
    pub rho: Option<f64>,
    /// `√(1−ρ²)`, an alternative to `rho`.
    pub gap: Option<f64>,
    pub rho_grid: Option<Vec<f64>>,
    pub gap_grid: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub train_trials: Option<usize>,
    pub lloyd_iters: Option<usize>,

    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub sigma: Option<f64>,
    /// Bits per packet on every link.
    pub link_bits: Option<u64>,
    pub slots: Option<usize>,
    pub periods: Option<u64>,
    pub genie: Option<bool>,
    pub interp_points: Option<usize>,
    pub forced_node: Option<usize>,
    pub forced_slot: Option<usize>,
    /// Test hook: `parity` or `groups` breaks the schedule on purpose.
    pub fault: Option<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| invalid("a seed is required: set `seed` or pass --seed"))
    }

    pub fn check_command(&self, name: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != name => Err(invalid(format!("config is for `{c}`, not `{name}`"))),
            _ => Ok(()),
        }
    }

    pub fn trials(&self) -> Result<u64, CliError> {
        let t = self.trials.ok_or_else(|| invalid("`trials` is required"))?;
        if t < wzlvq::analysis::MIN_TRIALS {
            return Err(invalid(format!(
                "`trials` = {t} is below the minimum of {}",
                wzlvq::analysis::MIN_TRIALS
            )));
        }
        Ok(t)
    }

    pub fn quantizer(&self) -> Result<QuantizerSpec, CliError> {
        let name = self.lattice.clone().ok_or_else(|| invalid("`lattice` is required (Z, A2 or A2n)"))?;
        let similarity = match name.as_str() {
            "Z" => {
                if self.a.is_some() || self.b.is_some() {
                    return Err(invalid("`a`, `b` apply to A2 only; use `k` for Z"));
                }
                let k = self.k.ok_or_else(|| invalid("`k` is required for Z"))?;
                if k < 1 {
                    return Err(invalid("`k` must be at least 1"));
                }
                Similarity::Scaling(k)
            }
            "A2" | "A2n" => match (self.a, self.b, self.k) {
                (Some(a), Some(b), None) => Similarity::Eisenstein(a, b),
                (None, None, Some(k)) => Similarity::Scaling(k),
                _ => return Err(invalid("A2 needs either `a` and `b`, or `k`")),
            },
            other => return Err(invalid(format!("unknown lattice `{other}`; expected Z, A2 or A2n"))),
        };
        let dim = match name.as_str() {
            "Z" => self.dim.unwrap_or(1),
            _ => {
                if matches!(self.dim, Some(d) if d != 2) {
                    return Err(invalid("A2 has dimension 2"));
                }
                2
            }
        };
        if dim == 0 {
            return Err(invalid("`dim` must be positive"));
        }
        if let Some(s) = self.s {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("`s` must be positive, got {s}")));
            }
        }
        let fine = match self.fine.as_deref().unwrap_or("lattice") {
            "lattice" => FineVariant::Lattice,
            "matched" => FineVariant::Matched,
            other => return Err(invalid(format!("unknown fine codebook `{other}`; expected lattice or matched"))),
        };
        let model = match self.model.as_deref().unwrap_or("joint") {
            "joint" => SideInfoModel::Joint,
            "pinned" => SideInfoModel::Pinned,
            other => return Err(invalid(format!("unknown model `{other}`; expected joint or pinned"))),
        };
        let sigma_x = self.sigma_x.unwrap_or(1.0);
        let sigma_y = self.sigma_y.unwrap_or(sigma_x);
        for (key, v) in [("sigma_x", sigma_x), ("sigma_y", sigma_y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("`{key}` must be positive, got {v}")));
            }
        }
        let train_trials = self.train_trials.unwrap_or(200_000);
        if fine == FineVariant::Matched && train_trials == 0 {
            return Err(invalid("`train_trials` must be positive"));
        }
        Ok(QuantizerSpec {
            lattice: name,
            dim,
            similarity,
            s: self.s,
            fine,
            model,
            sigma_x,
            sigma_y,
            train_trials,
            lloyd_iters: self.lloyd_iters.unwrap_or(50),
        })
    }

    /// The single correlation of a `quantize` run.
    pub fn rho_point(&self) -> Result<f64, CliError> {
        let rho = match (self.rho, self.gap) {
            (Some(r), None) => r,
            (None, Some(g)) => gap_to_rho(g)?,
            _ => return Err(invalid("exactly one of `rho` and `gap` is required")),
        };
        check_rho(rho)
    }

    /// The correlation grid of a `sweep` run.
    pub fn rho_grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.rho_grid, &self.gap_grid) {
            (Some(r), None) => r.clone(),
            (None, Some(g)) => g.iter().map(|&v| gap_to_rho(v)).collect::<Result<_, _>>()?,
            _ => return Err(invalid("exactly one of `rho_grid` and `gap_grid` is required")),
        };
        if grid.is_empty() {
            return Err(invalid("the correlation grid is empty"));
        }
        grid.into_iter().map(check_rho).collect()
    }

    pub fn netsim(&self) -> Result<NetsimSpec, CliError> {
        let ns = match (self.n, &self.n_grid) {
            (Some(n), None) => vec![n],
            (None, Some(g)) if !g.is_empty() => g.clone(),
            (None, Some(_)) => return Err(invalid("`n_grid` is empty")),
            _ => return Err(invalid("exactly one of `n` and `n_grid` is required")),
        };
        let sigma = self.sigma.unwrap_or(1.0);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("`sigma` must be positive, got {sigma}")));
        }
        let link_bits = self.link_bits.ok_or_else(|| invalid("`link_bits` (R, bits per slot) is required"))?;
        if link_bits == 0 {
            return Err(invalid("`link_bits` must be positive"));
        }
        let slots = self.slots.ok_or_else(|| invalid("`slots` is required"))?;
        if slots == 0 {
            return Err(invalid("`slots` must be positive"));
        }
        let periods = self.periods.unwrap_or(10);
        if periods == 0 {
            return Err(invalid("`periods` must be positive"));
        }
        let forced = match (self.forced_node, self.forced_slot) {
            (Some(m), Some(k)) => vec![(m, k)],
            (None, None) => Vec::new(),
            _ => return Err(invalid("`forced_node` and `forced_slot` go together")),
        };
        let faults = match self.fault.as_deref() {
            None => Default::default(),
            Some("parity") => wzlvq_netsim::Faults {
                ignore_parity: true,
                ..Default::default()
            },
            Some("groups") => wzlvq_netsim::Faults {
                ignore_groups: true,
                ..Default::default()
            },
            Some(other) => return Err(invalid(format!("unknown fault `{other}`; expected parity or groups"))),
        };
        Ok(NetsimSpec {
            ns,
            sigma,
            link_bits,
            slots,
            periods,
            genie: self.genie.unwrap_or(false),
            interp_points: self.interp_points.unwrap_or(0),
            forced,
            faults,
        })
    }
}

fn gap_to_rho(g: f64) -> Result<f64, CliError> {
    if !(g > 0.0 && g <= 1.0) {
        return Err(invalid(format!("gap √(1−ρ²) must lie in (0, 1], got {g}")));
    }
    Ok(rho_from_gap(g))
}

fn check_rho(rho: f64) -> Result<f64, CliError> {
    if !(rho.abs() < 1.0) {
        return Err(invalid(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Similarity {
    Scaling(u64),
    Eisenstein(i64, i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    pub lattice: String,
    pub dim: usize,
    pub similarity: Similarity,
    pub s: Option<f64>,
    pub fine: FineVariant,
    pub model: SideInfoModel,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub train_trials: usize,
    pub lloyd_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetsimSpec {
    pub ns: Vec<usize>,
    pub sigma: f64,
    pub link_bits: u64,
    pub slots: usize,
    pub periods: u64,
    pub genie: bool,
    pub interp_points: usize,
    pub forced: Vec<(usize, usize)>,
    pub faults: wzlvq_netsim::Faults,
}
