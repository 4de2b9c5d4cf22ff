//! Optimal cloning: closed forms, the symmetrization channel on the Fock
//! engine, and the cascaded `N → M` cloner.
//!
//! The symmetrization cloner sends the input photon into port 0 and an
//! ancilla photon in `I_d/d` into port 1 of a balanced beam splitter and keeps
//! only the events in which all photons leave through one common port. The
//! maximally mixed ancilla is handled as an exact equal-weight sum over the
//! states of an orthonormal basis, never by sampling.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bosonic::{compress_ensemble, FockState};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, LabeledBasis, PureState};

/// Default upper bound on the output copies of a cascade.
pub const DEFAULT_PHOTON_CAP: usize = 6;

/// Optimal fidelity of estimating a `d`-level state from `n` copies,
/// `(n+1)/(n+d)`.
pub fn f_est(n: usize, d: usize) -> Result<f64> {
    if n < 1 || d < 2 {
        return Err(Error::InvalidCloningSpec(format!(
            "state estimation needs N >= 1 and d >= 2 (got N={n}, d={d})"
        )));
    }
    Ok((n + 1) as f64 / (n + d) as f64)
}

/// Optimal symmetric `n → m` cloning fidelity,
/// `(m - n + n(m + d)) / (m(n + d))`.
pub fn f_clon(n: usize, m: usize, d: usize) -> Result<f64> {
    CloningSpec::new(d, n, m)?;
    let (n, m, d) = (n as f64, m as f64, d as f64);
    Ok((m - n + n * (m + d)) / (m * (n + d)))
}

/// Weight `η` of the input in each optimal clone,
/// `ρ = η |φ><φ| + (1 - η) I/d`.
pub fn shrinking_factor(n: usize, m: usize, d: usize) -> Result<f64> {
    CloningSpec::new(d, n, m)?;
    let (n, m, d) = (n as f64, m as f64, d as f64);
    Ok(n * (m + d) / (m * (n + d)))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloningSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

impl CloningSpec {
    pub fn new(d: usize, n: usize, m: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidCloningSpec(format!(
                "d must be >= 2, got {d}"
            )));
        }
        if n < 1 || n >= m {
            return Err(Error::InvalidCloningSpec(format!(
                "need 1 <= N < M, got N={n}, M={m}"
            )));
        }
        Ok(Self { d, n, m })
    }

    pub fn one_to_two(d: usize) -> Result<Self> {
        Self::new(d, 1, 2)
    }
}

/// Per-clone result of a cloning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CloningOutcome {
    #[serde(flatten)]
    pub spec: CloningSpec,
    pub fidelity: f64,
    pub success_prob: f64,
    pub clone_state: DensityMatrix,
}

/// Closed-form `1 → 2` outcome for an input that is an element of `basis`.
pub fn clone_analytic(phi: &PureState, basis: &LabeledBasis) -> Result<CloningOutcome> {
    basis.index_of(phi)?;
    let d = phi.dim();
    let df = d as f64;
    let spec = CloningSpec::one_to_two(d)?;
    // (d+2)/(2(d+1)) |φ><φ| + I/(2(d+1)), i.e. diag(7,1,1,1)/10 at d = 4
    let a = (df + 2.0) / (2.0 * (df + 1.0));
    let b = 1.0 / (2.0 * (df + 1.0));
    let proj = phi.projector();
    let mat = DMatrix::from_fn(d, d, |i, j| {
        proj.get(i, j) * a
            + if i == j {
                C64::new(b, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
    });
    Ok(CloningOutcome {
        spec,
        fidelity: 0.5 + 1.0 / (df + 1.0),
        success_prob: (df + 1.0) / (2.0 * df),
        clone_state: DensityMatrix::new(mat)?,
    })
}

/// `1 → 2` symmetrization computed on the Fock engine, with the ancilla
/// decomposed over the computational basis.
pub fn clone_oracle(phi: &PureState) -> Result<CloningOutcome> {
    Ok(clone_oracle_in_basis(phi, &LabeledBasis::computational(phi.dim())?)?.outcome)
}

/// Oracle run together with the post-selected weight of each ancilla branch.
#[derive(Clone, Debug)]
pub struct OracleRun {
    pub outcome: CloningOutcome,
    /// `branch_weights[k]`: probability that the ancilla was
    /// `ancilla_basis[k]`, given that the photons coalesced.
    pub branch_weights: Vec<f64>,
}

pub fn clone_oracle_in_basis(phi: &PureState, ancilla_basis: &LabeledBasis) -> Result<OracleRun> {
    let spec = CloningSpec::one_to_two(phi.dim())?;
    let start = vec![(1.0, input_state(phi, 1)?)];
    let stage = symmetrize_stage(&start, ancilla_basis)?;
    let outcome = finish(spec, phi, &stage.ensemble, stage.prob)?;
    let total: f64 = stage.branch_weights.iter().sum();
    Ok(OracleRun {
        outcome,
        branch_weights: stage.branch_weights.iter().map(|w| w / total).collect(),
    })
}

/// Options for [`cascade_clone_with`].
#[derive(Clone, Debug)]
pub struct CascadeOptions {
    pub photon_cap: usize,
    /// Basis the maximally mixed ancillas are decomposed over; computational
    /// when `None`.
    pub ancilla_basis: Option<LabeledBasis>,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self {
            photon_cap: DEFAULT_PHOTON_CAP,
            ancilla_basis: None,
        }
    }
}

/// `N → M` cloning by `M - N` symmetrization stages, each adding one fully
/// mixed ancilla and keeping total coalescence.
pub fn cascade_clone(phi: &PureState, spec: CloningSpec) -> Result<CloningOutcome> {
    cascade_clone_with(phi, spec, &CascadeOptions::default())
}

pub fn cascade_clone_with(
    phi: &PureState,
    spec: CloningSpec,
    opts: &CascadeOptions,
) -> Result<CloningOutcome> {
    let spec = CloningSpec::new(spec.d, spec.n, spec.m)?;
    if phi.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: phi.dim(),
        });
    }
    if spec.m > opts.photon_cap {
        return Err(Error::CascadeTooLarge {
            m: spec.m,
            cap: opts.photon_cap,
        });
    }
    let basis = match &opts.ancilla_basis {
        Some(b) => b.clone(),
        None => LabeledBasis::computational(spec.d)?,
    };
    let mut ensemble = vec![(1.0, input_state(phi, spec.n)?)];
    let mut success = 1.0;
    for stage_index in 0..spec.m - spec.n {
        if stage_index > 0 {
            ensemble = compress_ensemble(&ensemble)?;
        }
        let stage = symmetrize_stage(&ensemble, &basis)?;
        success *= stage.prob;
        ensemble = stage.ensemble;
    }
    finish(spec, phi, &ensemble, success)
}

/// `n` photons in `phi` on port 0 of a two-port system.
fn input_state(phi: &PureState, n: usize) -> Result<FockState> {
    let mut s = FockState::vacuum(2, phi.dim());
    for _ in 0..n {
        s = s.create(0, phi)?;
    }
    Ok(s)
}

struct Stage {
    /// Probability of total coalescence given the incoming ensemble.
    prob: f64,
    /// Coalesced branches, all photons moved to port 0, weights normalized.
    ensemble: Vec<(f64, FockState)>,
    /// Unnormalized coalescence weight per ancilla basis state.
    branch_weights: Vec<f64>,
}

/// Adds one ancilla photon in `I/d` (as a sum over `basis`) on port 1, mixes
/// ports 0 and 1, and keeps the all-photons-in-one-port outcomes of either
/// port.
fn symmetrize_stage(ensemble: &[(f64, FockState)], basis: &LabeledBasis) -> Result<Stage> {
    let d = basis.dim() as f64;
    let incoming: f64 = ensemble.iter().map(|(w, _)| w).sum();
    let mut out = Vec::with_capacity(ensemble.len() * basis.dim() * 2);
    let mut branch_weights = vec![0.0; basis.dim()];
    for (w, state) in ensemble {
        for (k, anc) in basis.states().iter().enumerate() {
            let mixed = state.create(1, anc)?.beam_splitter(0, 1)?;
            for port in 0..2 {
                let sel = mixed.postselect_same_port(port)?;
                if let Some(cond) = sel.conditional {
                    let weight = w / d * sel.prob;
                    branch_weights[k] += weight;
                    let cond = if port == 0 {
                        cond
                    } else {
                        cond.swap_ports(0, 1)?
                    };
                    out.push((weight, cond));
                }
            }
        }
    }
    let kept: f64 = out.iter().map(|(w, _)| w).sum();
    if kept.is_nan() || kept <= 0.0 {
        return Err(Error::EmptyState);
    }
    out.iter_mut().for_each(|(w, _)| *w /= kept);
    Ok(Stage {
        prob: kept / incoming,
        ensemble: out,
        branch_weights,
    })
}

fn finish(
    spec: CloningSpec,
    phi: &PureState,
    ensemble: &[(f64, FockState)],
    success_prob: f64,
) -> Result<CloningOutcome> {
    let reduced = ensemble
        .iter()
        .map(|(w, s)| Ok((*w, s.reduced_single_photon(0)?)))
        .collect::<Result<Vec<_>>>()?;
    let clone_state = DensityMatrix::mixture(reduced.iter().map(|(w, r)| (*w, r)))?;
    let fidelity = clone_state.fidelity_pure(phi)?;
    Ok(CloningOutcome {
        spec,
        fidelity,
        success_prob,
        clone_state,
    })
}
