//! Similarity maps, the coarse sublattices they generate, and coset tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticePoint};
use crate::linalg;

/// Largest quotient group enumerated by default.
pub const DEFAULT_MAX_INDEX: u64 = 1_000_000;

/// A linear map `κ` with `κᵀκ = c·I` that sends a lattice into itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    dim: usize,
    matrix: Vec<f64>,
    norm_c: f64,
    index: u64,
    unitary: Vec<f64>,
    /// `κ` in lattice coordinates: `κ·V = V·M`.
    integer_matrix: Vec<i64>,
}

impl SimilarityMap {
    /// Validates that `matrix` is a similarity mapping `lattice` into itself.
    pub fn new(lattice: &Lattice, matrix: Vec<f64>) -> Result<Self> {
        let n = lattice.dim();
        if matrix.len() != n * n || matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("similarity matrix must be finite n×n"));
        }
        let ktk = linalg::mat_mul(&linalg::transpose(&matrix, n), &matrix, n);
        let c = ktk[0];
        if c <= 0.0 {
            return Err(Error::input("similarity map is degenerate"));
        }
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { c } else { 0.0 };
                if (ktk[i * n + j] - expect).abs() > 1e-9 * c.max(1.0) {
                    return Err(Error::input(format!(
                        "map is not a similarity: (κᵀκ)[{i},{j}] = {}",
                        ktk[i * n + j]
                    )));
                }
            }
        }
        // M = V⁻¹ κ V must be integral.
        let real_m = linalg::mat_mul(
            lattice.inverse_basis(),
            &linalg::mat_mul(&matrix, lattice.basis(), n),
            n,
        );
        let mut integer_matrix = Vec::with_capacity(n * n);
        for &v in &real_m {
            let r = v.round();
            if (v - r).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(Error::NotSublattice(format!(
                    "κ sends a basis vector to non-integer coordinates ({v})"
                )));
            }
            integer_matrix.push(r as i64);
        }
        let det = linalg::det_int(&integer_matrix, n).unsigned_abs();
        let expected = c.powf(n as f64 / 2.0).round();
        if det as f64 != expected {
            return Err(Error::NotSublattice(format!(
                "index {det} disagrees with c^(n/2) = {expected}"
            )));
        }
        let sc = c.sqrt();
        Ok(Self {
            dim: n,
            unitary: matrix.iter().map(|v| v / sc).collect(),
            matrix,
            norm_c: c,
            index: det as u64,
            integer_matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// The constant `c` with `κu·κv = c·u·v`.
    pub fn norm_c(&self) -> f64 {
        self.norm_c
    }

    /// `N = |Λ/κ(Λ)|`.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Orthogonal factor `κ/√c`.
    pub fn unitary(&self) -> &[f64] {
        &self.unitary
    }

    pub fn integer_matrix(&self) -> &[i64] {
        &self.integer_matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.matrix, self.dim, x)
    }

    /// `self ∘ other` on the same lattice.
    pub fn compose(&self, lattice: &Lattice, other: &SimilarityMap) -> Result<Self> {
        Self::new(lattice, linalg::mat_mul(&self.matrix, &other.matrix, self.dim))
    }
}

/// Multiplication by the Eisenstein integer `a + bω`, `ω = e^{2πi/3}`, on a
/// hexagonal lattice (raw or normalized). Index `a² − ab + b²`.
pub fn eisenstein_similarity(lattice: &Lattice, a: i64, b: i64) -> Result<SimilarityMap> {
    if a == 0 && b == 0 {
        return Err(Error::input("a + bω must be nonzero"));
    }
    if lattice.dim() != 2 {
        return Err(Error::input("Eisenstein similarities act on the plane"));
    }
    let (a, b) = (a as f64, b as f64);
    let h = 3f64.sqrt() / 2.0;
    SimilarityMap::new(lattice, vec![a - b / 2.0, -b * h, b * h, a - b / 2.0])
}

/// `κ = k·I`, index `kⁿ`.
pub fn scaling_similarity(lattice: &Lattice, k: u64) -> Result<SimilarityMap> {
    if k == 0 {
        return Err(Error::input("scaling factor must be at least 1"));
    }
    let n = lattice.dim();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = k as f64;
    }
    SimilarityMap::new(lattice, m)
}

/// Coset representatives of `Λ/κ(Λ)`, each reduced into the zero coarse cell.
///
/// Cosets are labelled `0..N` through the Hermite normal form of `M`: the
/// residue of integer coordinates modulo the columns of the lower-triangular
/// `H` is unique, and its mixed-radix reading is the label. Label 0 is the
/// coarse lattice itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosetTable {
    dim: usize,
    hnf: Vec<i64>,
    representatives: Vec<LatticePoint>,
}

impl CosetTable {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn representatives(&self) -> &[LatticePoint] {
        &self.representatives
    }

    pub fn representative(&self, k: usize) -> Option<&LatticePoint> {
        self.representatives.get(k)
    }

    /// Coset label of the lattice point with integer coordinates `coords`.
    pub fn index_of_coords(&self, coords: &[i64]) -> usize {
        let n = self.dim;
        let mut c = coords.to_vec();
        let mut label = 0usize;
        for i in 0..n {
            let d = self.hnf[i * n + i];
            let q = c[i].div_euclid(d);
            if q != 0 {
                for (r, v) in c.iter_mut().enumerate().skip(i) {
                    *v -= q * self.hnf[r * n + i];
                }
            }
            label = label * d as usize + c[i] as usize;
        }
        label
    }

    pub fn coset_index(&self, point: &LatticePoint) -> usize {
        self.index_of_coords(&point.coords)
    }

    /// Residue vector for a label (inverse of the mixed-radix reading).
    fn residue(hnf: &[i64], n: usize, mut label: usize) -> Vec<i64> {
        let mut r = vec![0i64; n];
        for i in (0..n).rev() {
            let d = hnf[i * n + i] as usize;
            r[i] = (label % d) as i64;
            label /= d;
        }
        r
    }
}

/// Column-style Hermite normal form: lower triangular with a positive diagonal,
/// generating the same integer lattice as the columns of `m`.
fn hermite_lower(m: &[i64], n: usize) -> Vec<i64> {
    let mut h = m.to_vec();
    let col_op = |h: &mut Vec<i64>, dst: usize, src: usize, q: i64| {
        for r in 0..n {
            h[r * n + dst] -= q * h[r * n + src];
        }
    };
    let swap = |h: &mut Vec<i64>, a: usize, b: usize| {
        for r in 0..n {
            h.swap(r * n + a, r * n + b);
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            while h[i * n + j] != 0 {
                let q = h[i * n + i].div_euclid(h[i * n + j]);
                col_op(&mut h, i, j, q);
                swap(&mut h, i, j);
            }
        }
        if h[i * n + i] < 0 {
            for r in 0..n {
                h[r * n + i] = -h[r * n + i];
            }
        }
    }
    h
}

/// A fine lattice with its coarse similar sublattice and coset table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sublattice {
    fine: Lattice,
    kappa: SimilarityMap,
    coarse: Lattice,
    cosets: CosetTable,
}

impl Sublattice {
    pub fn new(fine: Lattice, kappa: SimilarityMap) -> Result<Self> {
        Self::with_max_index(fine, kappa, DEFAULT_MAX_INDEX)
    }

    pub fn with_max_index(fine: Lattice, kappa: SimilarityMap, max_index: u64) -> Result<Self> {
        if kappa.dim() != fine.dim() {
            return Err(Error::input("similarity map and lattice dimensions differ"));
        }
        // Re-validate against this lattice; a map built for another one may not fit.
        let kappa = SimilarityMap::new(&fine, kappa.matrix.clone())?;
        let coarse = fine.sublattice_basis(kappa.integer_matrix())?;
        let cosets = enumerate_cosets(&fine, &kappa, &coarse, max_index)?;
        Ok(Self {
            fine,
            kappa,
            coarse,
            cosets,
        })
    }

    pub fn fine(&self) -> &Lattice {
        &self.fine
    }

    pub fn kappa(&self) -> &SimilarityMap {
        &self.kappa
    }

    /// `κ(Λ)` as a lattice.
    pub fn coarse(&self) -> &Lattice {
        &self.coarse
    }

    pub fn cosets(&self) -> &CosetTable {
        &self.cosets
    }

    pub fn index(&self) -> u64 {
        self.kappa.index()
    }

    /// Coarse-lattice coordinates expressed in fine-lattice coordinates.
    pub fn coarse_to_fine(&self, q: &[i64]) -> Vec<i64> {
        let n = self.fine.dim();
        let m = self.kappa.integer_matrix();
        (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * q[j]).sum())
            .collect()
    }

    /// Coset label of a fine lattice point.
    pub fn coset_index(&self, point: &LatticePoint) -> usize {
        self.cosets.coset_index(point)
    }

    /// Squared length of the shortest nonzero coarse vector.
    pub fn minimal_norm(&self) -> f64 {
        minimal_norm(&self.coarse)
    }
}

fn enumerate_cosets(
    fine: &Lattice,
    kappa: &SimilarityMap,
    coarse: &Lattice,
    max_index: u64,
) -> Result<CosetTable> {
    let n = fine.dim();
    let count = kappa.index();
    if count > max_index {
        return Err(Error::ResourceLimit(format!(
            "quotient has {count} cosets, limit is {max_index}"
        )));
    }
    let m = kappa.integer_matrix();
    let hnf = hermite_lower(m, n);
    debug_assert_eq!((0..n).map(|i| hnf[i * n + i] as u64).product::<u64>(), count);
    let representatives = (0..count as usize)
        .map(|label| {
            let r = CosetTable::residue(&hnf, n, label);
            let q = coarse.nearest_coords(&fine.embed(&r));
            let shift: Vec<i64> = (0..n)
                .map(|i| (0..n).map(|j| m[i * n + j] * q[j]).sum())
                .collect();
            let coords: Vec<i64> = r.iter().zip(shift).map(|(a, b)| a - b).collect();
            fine.point(coords)
        })
        .collect();
    Ok(CosetTable {
        dim: n,
        hnf,
        representatives,
    })
}

/// Squared length of the shortest nonzero vector of `lattice`, by exhaustive
/// search inside the ball bounded by the shortest basis vector.
pub fn minimal_norm(lattice: &Lattice) -> f64 {
    let bound = (0..lattice.dim())
        .map(|j| linalg::norm2(&lattice.basis_vector(j)))
        .fold(f64::INFINITY, f64::min);
    let mut best = bound;
    lattice.for_each_point_within(bound, |c, d| {
        if c.iter().any(|&v| v != 0) && d < best {
            best = d;
        }
    });
    best
}

/// The rectangular sublattice spanned by `index·v₁` and `v₂`: same index as
/// an ideal of norm `index`, but not similar to the parent.
pub fn rectangular_sublattice(lattice: &Lattice, index: i64) -> Result<Lattice> {
    if lattice.dim() != 2 || index < 1 {
        return Err(Error::input("rectangular sublattice needs n = 2 and index ≥ 1"));
    }
    lattice.sublattice_basis(&[index, 0, 0, 1])
}
