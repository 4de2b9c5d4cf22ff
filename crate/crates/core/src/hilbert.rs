//! Finite-dimensional state primitives.
//!
//! Internal levels are plain indices `0..d`. For `d = 4` the levels carry the
//! polarization ⊗ OAM meaning
//!
//! ```text
//! 0 = |R,+2>   1 = |R,-2>   2 = |L,+2>   3 = |L,-2>
//! ```
//!
//! and every other module uses the same mapping.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for structural checks (normalization, orthonormality).
pub const STRUCT_TOL: f64 = 1e-12;
/// Tolerance accepted by constructors that validate caller-supplied data.
pub const INPUT_TOL: f64 = 1e-9;
/// Smallest eigenvalue tolerated in a density matrix.
pub const PSD_FLOOR: f64 = -1e-10;

/// Polarization ⊗ OAM labels of the logical levels, in index order.
pub const LOGICAL_LABELS: [&str; 4] = ["R,+2", "R,-2", "L,+2", "L,-2"];

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    Ok(())
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A normalized vector in a `d`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Wraps amplitudes that are already normalized (within [`INPUT_TOL`]).
    /// The stored vector is rescaled to unit norm.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        let n2 = norm_sqr(&amps);
        if (n2 - 1.0).abs() > INPUT_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self::rescaled(amps, n2))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        let n2 = norm_sqr(&amps);
        if !n2.is_finite() || n2 <= 0.0 {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self::rescaled(amps, n2))
    }

    fn rescaled(mut amps: Vec<C64>, n2: f64) -> Self {
        let s = n2.sqrt().recip();
        amps.iter_mut().for_each(|a| *a *= s);
        Self { amps }
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|k>` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        check_dim(d)?;
        if k >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: k + 1,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); d];
        amps[k] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// Haar-random state, drawn as a normalized complex Gaussian vector.
    pub fn haar_random<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Self> {
        check_dim(d)?;
        loop {
            let amps: Vec<C64> = (0..d)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let n2 = norm_sqr(&amps);
            if n2 > 1e-300 {
                return Ok(Self::rescaled(amps, n2));
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|²`.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn projector(&self) -> DensityMatrix {
        let d = self.dim();
        let mat = DMatrix::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj());
        DensityMatrix { mat }
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_phase(&self, theta: f64) -> Self {
        let p = C64::from_polar(1.0, theta);
        Self {
            amps: self.amps.iter().map(|a| a * p).collect(),
        }
    }
}

fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// `<a|b>`.
pub fn inner(a: &PureState, b: &PureState) -> Result<C64> {
    a.inner(b)
}

/// A `d×d` Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace at [`INPUT_TOL`] and positivity at
    /// [`PSD_FLOOR`].
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        let d = mat.nrows();
        if mat.ncols() != d {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is {}x{}",
                d,
                mat.ncols()
            )));
        }
        check_dim(d)?;
        for i in 0..d {
            for j in 0..=i {
                let dev = (mat[(i, j)] - mat[(j, i)].conj()).norm();
                if dev > INPUT_TOL {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "not Hermitian at ({i},{j}), deviation {dev:e}"
                    )));
                }
            }
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > INPUT_TOL || tr.im.abs() > INPUT_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
        }
        let rho = Self { mat };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < PSD_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Builds `Σ w_k ρ_k / Σ w_k`. Weights must be nonnegative with a
    /// positive sum.
    pub fn mixture<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a DensityMatrix)>,
    {
        let mut acc: Option<DMatrix<C64>> = None;
        let mut total = 0.0;
        for (w, rho) in parts {
            if w < 0.0 {
                return Err(Error::InvalidDensityMatrix(format!("negative weight {w}")));
            }
            total += w;
            match &mut acc {
                None => acc = Some(rho.mat.map(|z| z * w)),
                Some(m) => {
                    same_dim(m.nrows(), rho.dim())?;
                    *m += rho.mat.map(|z| z * w);
                }
            }
        }
        let m = acc.ok_or(Error::EmptyState)?;
        if total.is_nan() || total <= 0.0 {
            return Err(Error::EmptyState);
        }
        Ok(Self {
            mat: m.map(|z| z / total),
        })
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let d = probs.len();
        Self::new(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(probs[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    }

    /// `<ψ|ρ|ψ>`.
    pub fn fidelity_pure(&self, psi: &PureState) -> Result<f64> {
        same_dim(self.dim(), psi.dim())?;
        let a = psi.amps();
        let mut f = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                f += a[i].conj() * self.mat[(i, j)] * a[j];
            }
        }
        Ok(f.re.clamp(0.0, 1.0))
    }

    /// Matrix elements `<b_i|ρ|b_j>` in the given basis.
    pub fn in_basis(&self, basis: &LabeledBasis) -> Result<DMatrix<C64>> {
        same_dim(self.dim(), basis.dim())?;
        let d = self.dim();
        let u = DMatrix::from_fn(d, d, |row, col| basis.states[col].amps[row]);
        Ok(u.adjoint() * &self.mat * u)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self
            .mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Sums the `blocks` diagonal `d×d` blocks of a `(blocks·d)`-dimensional
    /// matrix whose index is `block·d + level`, i.e. traces out the block
    /// label.
    pub fn trace_out_blocks(&self, blocks: usize) -> Result<DensityMatrix> {
        let big = self.dim();
        if blocks == 0 || !big.is_multiple_of(blocks) {
            return Err(Error::DimensionMismatch {
                expected: blocks,
                got: big,
            });
        }
        let d = big / blocks;
        check_dim(d)?;
        let mat = DMatrix::from_fn(d, d, |i, j| {
            (0..blocks).map(|b| self.mat[(b * d + i, b * d + j)]).sum()
        });
        Ok(Self { mat })
    }
}

/// `I_d / d`.
pub fn maximally_mixed(d: usize) -> Result<DensityMatrix> {
    check_dim(d)?;
    let w = 1.0 / d as f64;
    Ok(DensityMatrix {
        mat: DMatrix::from_diagonal_element(d, d, C64::new(w, 0.0)),
    })
}

/// `<ψ|ρ|ψ>`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    rho.fidelity_pure(psi)
}

/// An orthonormal basis with human-readable labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBasis {
    name: String,
    states: Vec<PureState>,
    labels: Vec<String>,
}

impl LabeledBasis {
    pub fn new(
        name: impl Into<String>,
        states: Vec<PureState>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let d = states
            .first()
            .map(PureState::dim)
            .ok_or(Error::EmptyState)?;
        same_dim(d, states.len())?;
        same_dim(d, labels.len())?;
        for s in &states {
            same_dim(d, s.dim())?;
        }
        for i in 0..d {
            for j in 0..d {
                let o = states[i].inner(&states[j])?.norm();
                let want = if i == j { 1.0 } else { 0.0 };
                if (o - want).abs() > STRUCT_TOL {
                    return Err(Error::NotOrthonormal { i, j, overlap: o });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            states,
            labels,
        })
    }

    /// Computational basis `|0>,…,|d-1>` labelled by index.
    pub fn computational(d: usize) -> Result<Self> {
        check_dim(d)?;
        let states = (0..d)
            .map(|k| PureState::basis(d, k))
            .collect::<Result<_>>()?;
        let labels = (1..=d).map(|k| k.to_string()).collect();
        Self::new("computational", states, labels)
    }

    /// Completes `phi` to an orthonormal basis by Gram-Schmidt over the
    /// computational vectors. `phi` is the first element.
    pub fn adapted_to(phi: &PureState) -> Result<Self> {
        let d = phi.dim();
        let mut vecs: Vec<Vec<C64>> = vec![phi.amps.clone()];
        for k in 0..d {
            if vecs.len() == d {
                break;
            }
            let mut v = PureState::basis(d, k)?.amps;
            // two passes keep the result orthogonal to machine precision
            for _ in 0..2 {
                for u in &vecs {
                    let c: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
                }
            }
            let n2 = norm_sqr(&v);
            if n2 > 1e-6 {
                let s = n2.sqrt().recip();
                vecs.push(v.into_iter().map(|x| x * s).collect());
            }
        }
        let states = vecs.into_iter().map(|amps| PureState { amps }).collect();
        let labels = (1..=d).map(|k| format!("e{k}")).collect();
        Self::new("adapted", states, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &PureState {
        &self.states[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of the basis element equal to `phi` up to a global phase.
    pub fn index_of(&self, phi: &PureState) -> Result<usize> {
        same_dim(self.dim(), phi.dim())?;
        for (i, s) in self.states.iter().enumerate() {
            if (s.overlap(phi)? - 1.0).abs() < INPUT_TOL {
                return Ok(i);
            }
        }
        Err(Error::NotInBasis)
    }
}

impl fmt::Display for LabeledBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.name, self.labels.join(" | "))
    }
}

/// The logical basis `{|R,+2>, |R,-2>, |L,+2>, |L,-2>}`.
pub fn basis_logical() -> LabeledBasis {
    let states = (0..4).map(|k| PureState::basis(4, k).unwrap()).collect();
    let labels = LOGICAL_LABELS.iter().map(|s| s.to_string()).collect();
    LabeledBasis::new("I", states, labels).expect("logical basis is orthonormal")
}

/// The entangled spin-orbit basis, ordered
///
/// ```text
/// 0: (|R,+2> + |L,-2>)/√2    1: (|R,+2> - |L,-2>)/√2
/// 2: (|L,+2> + |R,-2>)/√2    3: (|L,+2> - |R,-2>)/√2
/// ```
pub fn basis_four() -> LabeledBasis {
    let h = FRAC_1_SQRT_2;
    let rows: [[f64; 4]; 4] = [
        [h, 0.0, 0.0, h],
        [h, 0.0, 0.0, -h],
        [0.0, h, h, 0.0],
        [0.0, -h, h, 0.0],
    ];
    let states = rows
        .iter()
        .map(|r| PureState::from_real(r).unwrap())
        .collect();
    let labels = [
        "(R,+2 + L,-2)/√2",
        "(R,+2 - L,-2)/√2",
        "(L,+2 + R,-2)/√2",
        "(L,+2 - R,-2)/√2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    LabeledBasis::new("IV", states, labels).expect("basis IV is orthonormal")
}

/// Looks up a named basis: `"I"`/`"IV"` (d = 4 only) or `"computational"`.
pub fn basis_by_name(name: &str, d: usize) -> Result<LabeledBasis> {
    match name {
        "I" if d == 4 => Ok(basis_logical()),
        "IV" if d == 4 => Ok(basis_four()),
        // basis I is the computational basis in any dimension
        "I" | "computational" => LabeledBasis::computational(d),
        _ => Err(Error::UnknownBasis(name.to_string())),
    }
}

/// True iff `|<a_i|b_j>|² = 1/d` within `tol` for every pair.
pub fn unbiasedness_check(b1: &LabeledBasis, b2: &LabeledBasis, tol: f64) -> Result<bool> {
    same_dim(b1.dim(), b2.dim())?;
    let target = 1.0 / b1.dim() as f64;
    for a in &b1.states {
        for b in &b2.states {
            if (a.overlap(b)? - target).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// JSON wire formats: complex numbers are `[re, im]` pairs.

#[derive(Serialize, Deserialize)]
struct PureStateWire {
    dim: usize,
    amps: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixWire {
    dim: usize,
    mat: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub(crate) fn unpair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PureStateWire {
            dim: self.dim(),
            amps: self.amps.iter().copied().map(pair).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = PureStateWire::deserialize(d)?;
        if w.dim != w.amps.len() {
            return Err(D::Error::custom(format!(
                "dim {} does not match {} amplitudes",
                w.dim,
                w.amps.len()
            )));
        }
        PureState::new(w.amps.into_iter().map(unpair).collect()).map_err(D::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        DensityMatrixWire {
            dim: d,
            mat: (0..d)
                .map(|i| (0..d).map(|j| pair(self.mat[(i, j)])).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = DensityMatrixWire::deserialize(d)?;
        if w.mat.len() != w.dim || w.mat.iter().any(|r| r.len() != w.dim) {
            return Err(D::Error::custom("matrix shape does not match dim"));
        }
        let mat = DMatrix::from_fn(w.dim, w.dim, |i, j| unpair(w.mat[i][j]));
        DensityMatrix::new(mat).map_err(D::Error::custom)
    }
}
