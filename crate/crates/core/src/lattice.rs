//! Lattices given by a generator matrix, their nearest-point maps and cell
//! geometry.
//!
//! The generator `V` is stored row-major with the basis vectors as columns,
//! so a point with integer coordinates `c` sits at `V·c`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mc::{self, Moments};

/// Relative slack under which two squared distances count as a tie.
const TIE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    basis: Vec<f64>,
    inverse: Vec<f64>,
    det_normalized: bool,
    /// Diagonal generators round coordinate-wise.
    diagonal: bool,
}

/// A lattice point: integer coordinates in the basis and the embedded vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub coords: Vec<i64>,
    pub embedding: Vec<f64>,
}

/// Monte Carlo estimate of a normalized second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub g: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl Lattice {
    /// Lattice generated by the columns of the row-major `n×n` matrix `basis`.
    pub fn from_basis(dim: usize, basis: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dimension must be positive"));
        }
        if basis.len() != dim * dim {
            return Err(Error::input(format!(
                "basis has {} entries, expected {}",
                basis.len(),
                dim * dim
            )));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("basis entries must be finite"));
        }
        let d = linalg::det(&basis, dim);
        let scale = basis.iter().fold(0.0f64, |m, v| m.max(v.abs())).powi(dim as i32);
        if d.abs() <= 1e-12 * scale || d == 0.0 {
            return Err(Error::SingularBasis(d.abs()));
        }
        let inverse = linalg::inverse(&basis, dim).ok_or(Error::SingularBasis(d.abs()))?;
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || basis[i * dim + j] == 0.0));
        Ok(Self {
            dim,
            basis,
            inverse,
            det_normalized: false,
            diagonal,
        })
    }

    /// Lattice from its basis vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::input("basis vectors must all have length n"));
        }
        let mut basis = vec![0.0; n * n];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                basis[i * n + j] = *v;
            }
        }
        Self::from_basis(n, basis)
    }

    /// The integer lattice `Zⁿ`.
    pub fn integer(n: usize) -> Result<Self> {
        let mut basis = vec![0.0; n * n];
        for i in 0..n {
            basis[i * n + i] = 1.0;
        }
        let mut l = Self::from_basis(n, basis)?;
        l.det_normalized = true;
        Ok(l)
    }

    /// The hexagonal lattice with basis `(1, 0)`, `(1/2, √3/2)`.
    pub fn hexagonal() -> Self {
        let h = 3f64.sqrt() / 2.0;
        Self::from_basis(2, vec![1.0, 0.5, 0.0, h]).expect("hexagonal basis is regular")
    }

    /// The hexagonal lattice rescaled to unit cell volume.
    pub fn hexagonal_normalized() -> Self {
        Self::hexagonal().normalized()
    }

    /// Named constructor: `"Z"` (any `n`), `"A2"` (raw) or `"A2n"` (unit volume).
    pub fn from_name(name: &str, n: usize) -> Result<Self> {
        match name {
            "Z" => Self::integer(n),
            "A2" | "A2n" if n != 2 => Err(Error::input(format!("{name} is two-dimensional, got n={n}"))),
            "A2" => Ok(Self::hexagonal()),
            "A2n" => Ok(Self::hexagonal_normalized()),
            other => Err(Error::input(format!("unknown lattice {other:?}; expected Z, A2 or A2n"))),
        }
    }

    /// Copy rescaled so that its cell volume is 1.
    pub fn normalized(&self) -> Self {
        let f = self.volume().powf(-1.0 / self.dim as f64);
        let mut l = self.scaled_unchecked(f);
        l.det_normalized = true;
        l
    }

    /// The scaled lattice `sΛ`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::input(format!("scale must be positive and finite, got {s}")));
        }
        let mut l = self.scaled_unchecked(s);
        l.det_normalized = self.det_normalized && s == 1.0;
        Ok(l)
    }

    fn scaled_unchecked(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            basis: self.basis.iter().map(|v| v * s).collect(),
            inverse: self.inverse.iter().map(|v| v / s).collect(),
            det_normalized: false,
            diagonal: self.diagonal,
        }
    }

    /// Lattice generated by `V·M` for an integer matrix `M` (row-major).
    pub(crate) fn sublattice_basis(&self, m: &[i64]) -> Result<Self> {
        let mf: Vec<f64> = m.iter().map(|&v| v as f64).collect();
        Self::from_basis(self.dim, linalg::mat_mul(&self.basis, &mf, self.dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major generator matrix; column `j` is the `j`-th basis vector.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn inverse_basis(&self) -> &[f64] {
        &self.inverse
    }

    pub fn basis_vector(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.basis[i * self.dim + j]).collect()
    }

    pub fn is_det_normalized(&self) -> bool {
        self.det_normalized
    }

    /// Cell volume `|det V|`.
    pub fn volume(&self) -> f64 {
        linalg::det(&self.basis, self.dim).abs()
    }

    /// Gram matrix `VᵀV`.
    pub fn gram(&self) -> Vec<f64> {
        linalg::mat_mul(&linalg::transpose(&self.basis, self.dim), &self.basis, self.dim)
    }

    pub fn embed(&self, coords: &[i64]) -> Vec<f64> {
        linalg::mat_vec_int(&self.basis, self.dim, coords)
    }

    pub fn point(&self, coords: Vec<i64>) -> LatticePoint {
        let embedding = self.embed(&coords);
        LatticePoint { coords, embedding }
    }

    /// Real coordinates `V⁻¹x`.
    pub fn coordinates_of(&self, x: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.inverse, self.dim, x)
    }

    /// Nearest lattice point to `x`; ties go to the lexicographically smallest
    /// integer coordinates.
    pub fn nearest_point(&self, x: &[f64]) -> Result<LatticePoint> {
        self.check_input(x)?;
        Ok(self.point(self.nearest_coords(x)))
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::input(format!(
                "vector has length {}, lattice dimension is {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("vector has non-finite components"));
        }
        Ok(())
    }

    /// Integer coordinates of the nearest point. `x` must be finite and of
    /// the right length.
    pub fn nearest_coords(&self, x: &[f64]) -> Vec<i64> {
        let n = self.dim;
        if self.diagonal {
            return (0..n)
                .map(|i| (x[i] * self.inverse[i * n + i] - 0.5).ceil() as i64)
                .collect();
        }
        let t = self.coordinates_of(x);
        let babai: Vec<i64> = t.iter().map(|v| (v - 0.5).ceil() as i64).collect();
        let d2 = self.dist2(x, &babai);
        // Any strictly better point c has |c_i - t_i| <= |row_i(V⁻¹)|·‖x - Vc‖.
        let radius = d2.sqrt() * (1.0 + 1e-9) + 1e-12;
        let ranges: Vec<(i64, i64)> = linalg::row_norms(&self.inverse, n)
            .iter()
            .zip(&t)
            .map(|(r, ti)| ((ti - r * radius).ceil() as i64, (ti + r * radius).floor() as i64))
            .collect();
        let mut best = babai;
        let mut best_d2 = d2;
        let mut c: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 > r.1) {
            return best;
        }
        loop {
            let d = self.dist2(x, &c);
            let tol = TIE_EPS * best_d2;
            if d < best_d2 - tol || (d <= best_d2 + tol && c < best) {
                best_d2 = d.min(best_d2);
                best.clone_from(&c);
            }
            // odometer over the box
            let mut k = n;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if c[k] < ranges[k].1 {
                    c[k] += 1;
                    break;
                }
                c[k] = ranges[k].0;
            }
        }
    }

    fn dist2(&self, x: &[f64], c: &[i64]) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let p: f64 = (0..n).map(|j| self.basis[i * n + j] * c[j] as f64).sum();
                (x[i] - p) * (x[i] - p)
            })
            .sum()
    }

    /// Calls `visit(coords, norm²)` for every lattice point with squared norm
    /// at most `r2`, origin included.
    pub fn for_each_point_within(&self, r2: f64, mut visit: impl FnMut(&[i64], f64)) {
        let n = self.dim;
        let r = r2.max(0.0).sqrt() * (1.0 + 1e-9);
        let bounds: Vec<i64> = linalg::row_norms(&self.inverse, n)
            .iter()
            .map(|w| (w * r).floor() as i64)
            .collect();
        let mut c: Vec<i64> = bounds.iter().map(|b| -b).collect();
        let slack = 1e-9 * r2.max(1e-300);
        loop {
            let d = linalg::norm2(&self.embed(&c));
            if d <= r2 + slack {
                visit(&c, d);
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if c[k] < bounds[k] {
                    c[k] += 1;
                    break;
                }
                c[k] = -bounds[k];
            }
        }
    }

    /// `x − Q(x)`: the offset of `x` from its nearest lattice point.
    pub fn fold(&self, x: &[f64]) -> Vec<f64> {
        let q = self.embed(&self.nearest_coords(x));
        x.iter().zip(q).map(|(a, b)| a - b).collect()
    }

    /// Uniform sample from the Voronoi cell of the origin.
    pub fn sample_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: Vec<f64> = (0..self.dim).map(|_| rng.random::<f64>()).collect();
        let p = linalg::mat_vec(&self.basis, self.dim, &u);
        self.fold(&p)
    }

    /// Normalized second moment `G = E‖e‖²/(n·ν^{2/n})` over the Voronoi cell.
    pub fn second_moment_mc(&self, trials: u64, seed: u64) -> Result<SecondMoment> {
        if trials < 10_000 {
            return Err(Error::input(format!("need at least 10000 trials, got {trials}")));
        }
        let n = self.dim as f64;
        let norm = self.volume().powf(2.0 / n);
        let m = mc::run_batched(trials, seed, Moments::default, |m, rng, _| {
            let e = self.sample_cell(rng);
            m.push(linalg::norm2(&e) / (n * norm));
        });
        Ok(SecondMoment {
            g: m.mean(),
            stderr: m.stderr(),
            trials,
        })
    }
}

/// Exact normalized second moment of the hexagonal cell, `5/(36√3)`.
pub fn hexagonal_second_moment() -> f64 {
    5.0 / (36.0 * 3f64.sqrt())
}
