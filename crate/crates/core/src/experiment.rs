//! Monte Carlo replica of the coincidence-counting cloning experiment.
//!
//! One trial prepares the signal photon (possibly imperfectly), draws the
//! ancilla from the randomization basis, mixes the pair on the cloning beam
//! splitter with wavepacket overlap `v`, routes one output port through a
//! second balanced splitter and asks for a coincidence between detector 1
//! (filtering the input state) and detector 2 (resolving the measurement
//! basis). Trials that end without such a coincidence are discarded, and the
//! run stops once `shots` coincidences have been recorded.
//!
//! Randomness: trial `t` of input `k` draws from a ChaCha8 generator keyed by
//! `seed` and `k` on stream `t`. Trials are evaluated in parallel in fixed
//! blocks and consumed in trial order, so counts depend only on the seed and
//! the configuration, never on the worker count.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{basis_by_name, LabeledBasis, PureState};

const TRIAL_BLOCK: u64 = 4096;
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of recorded coincidences per input state.
    pub shots: u64,
    /// Wavepacket overlap of signal and ancilla at the cloning splitter.
    pub v: f64,
    /// Ancilla randomization weights over the logical basis; uniform when
    /// `None`.
    pub ancilla_weights: Option<Vec<f64>>,
    pub prep_fidelity: f64,
    pub analysis_fidelity: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            shots: 100_000,
            v: 1.0,
            ancilla_weights: None,
            prep_fidelity: 1.0,
            analysis_fidelity: 1.0,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.shots == 0 {
            return bad("shots must be positive".into());
        }
        for (name, x) in [
            ("v", self.v),
            ("prepFidelity", self.prep_fidelity),
            ("analysisFidelity", self.analysis_fidelity),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("{name} = {x} outside [0,1]"));
            }
        }
        if let Some(w) = &self.ancilla_weights {
            if w.len() != d {
                return bad(format!("{} ancilla weights for dimension {d}", w.len()));
            }
            if w.iter().any(|&x| x.is_nan() || x < 0.0) {
                return bad("ancilla weights must be nonnegative".into());
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > WEIGHT_TOL {
                return bad(format!("ancilla weights sum to {total}, not 1"));
            }
        }
        Ok(())
    }

    pub fn ancilla_weights(&self, d: usize) -> Vec<f64> {
        self.ancilla_weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / d as f64; d])
    }
}

/// Draws one element of `basis` with probabilities `config.ancilla_weights`.
pub fn randomize_ancilla<R: Rng + ?Sized>(
    rng: &mut R,
    config: &ExperimentConfig,
    basis: &LabeledBasis,
) -> Result<PureState> {
    config.validate(basis.dim())?;
    let dist = WeightedIndex::new(config.ancilla_weights(basis.dim()))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(basis.state(dist.sample(rng)).clone())
}

/// Probability of keeping the ideal state in a depolarizing channel whose
/// mean overlap with the ideal state is `f` (floored at `1/d`).
fn keep_probability(f: f64, d: usize) -> f64 {
    let d = d as f64;
    ((d * f - 1.0) / (d - 1.0)).clamp(0.0, 1.0)
}

/// Depolarizing preparation error: returns `psi` with probability
/// `q = (d f - 1)/(d - 1)` and a Haar-random state otherwise, so that the
/// mean overlap with `psi` is `f` (or `1/d` when `f < 1/d`).
pub fn apply_infidelity<R: Rng + ?Sized>(
    psi: &PureState,
    f: f64,
    rng: &mut R,
) -> Result<PureState> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidConfig(format!("fidelity {f} outside [0,1]")));
    }
    let q = keep_probability(f, psi.dim());
    if q >= 1.0 || rng.random::<f64>() < q {
        Ok(psi.clone())
    } else {
        PureState::haar_random(rng, psi.dim())
    }
}

/// Coincidence amplitudes `ψ(x, y)` over `(time bin, level)` indices for a
/// signal wavepacket `s` on port 0 and an ancilla wavepacket `a` on port 1:
/// cloning splitter on ports (0, 1), second splitter on ports (0, 2), one
/// photon in port 0 (arm 1) and one in port 2 (arm 2).
///
/// Expanding both splitters gives `ψ(x, y) = -(s_x a_y + a_x s_y) / 4`; the
/// Fock engine reproduces this in the tests.
pub fn coincidence_amplitudes(s: &[C64], a: &[C64]) -> Vec<C64> {
    let n = s.len();
    let mut psi = vec![C64::new(0.0, 0.0); n * n];
    for x in 0..n {
        for y in 0..n {
            psi[x * n + y] = -(s[x] * a[y] + a[x] * s[y]) * 0.25;
        }
    }
    psi
}

/// Which arm carries the filter on the input state.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum DetectorRoles {
    /// Detector 1 (arm 1) filters `|φ>`, detector 2 resolves the basis.
    #[default]
    Standard,
    Swapped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CountsTable {
    pub input_label: String,
    pub basis_label: String,
    pub phi_index: usize,
    /// `counts[i] = N_{φ,i}`.
    pub counts: Vec<u64>,
    /// Trials needed to collect the coincidences.
    pub trials: u64,
    pub config: ExperimentConfig,
}

impl CountsTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Writes `input,outcome,count` rows (with header) as CSV.
    pub fn write_csv<W: Write>(&self, w: W, outcome_labels: &[String]) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        wr.write_record(["input", "outcome", "count"]).map_err(io)?;
        self.write_rows(&mut wr, outcome_labels)?;
        wr.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub(crate) fn write_rows<W: Write>(
        &self,
        wr: &mut csv::Writer<W>,
        outcome_labels: &[String],
    ) -> Result<()> {
        for (i, c) in self.counts.iter().enumerate() {
            let label = outcome_labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| i.to_string());
            wr.write_record([self.input_label.as_str(), label.as_str(), &c.to_string()])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// `p(i|φ)`.
    pub probs: Vec<f64>,
    pub fidelity: f64,
    /// Binomial standard error of `fidelity`.
    pub stderr: f64,
}

/// Clone-state probabilities from coincidence counts.
///
/// Detector 1 only passes `|φ>`, so an orthogonal outcome `i` seen on
/// detector 2 is also expected, equally often, with the detectors exchanged:
/// `N = N_φφ + 2 Σ_{i≠φ} N_φi`, `p(i|φ) = N_φi / N` and
/// `p(φ|φ) = (N_φφ + Σ_{i≠φ} N_φi) / N`.
pub fn estimate_probabilities(t: &CountsTable, phi_index: usize) -> Result<EstimationResult> {
    estimate_from_counts(&t.counts, phi_index)
}

pub fn estimate_from_counts(counts: &[u64], phi_index: usize) -> Result<EstimationResult> {
    if phi_index >= counts.len() {
        return Err(Error::DimensionMismatch {
            expected: counts.len(),
            got: phi_index + 1,
        });
    }
    let same = counts[phi_index] as f64;
    let others: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != phi_index)
        .map(|(_, &c)| c as f64)
        .sum();
    let total = same + 2.0 * others;
    if total == 0.0 {
        return Err(Error::NoCounts);
    }
    let probs: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i == phi_index {
                (same + others) / total
            } else {
                c as f64 / total
            }
        })
        .collect();
    // F = 1/(2 - x) with x = N_φφ / Σ_i N_φi binomial
    let shots = same + others;
    let x = same / shots;
    let stderr = (x * (1.0 - x) / shots).sqrt() / (2.0 - x).powi(2);
    Ok(EstimationResult {
        fidelity: probs[phi_index],
        probs,
        stderr,
    })
}

/// Per-ancilla detection probabilities for the ideal signal, and the
/// quadratic forms used when the signal is replaced.
struct Tables {
    intact: Vec<Vec<f64>>,
    forms: Vec<Vec<DMatrix<C64>>>,
}

fn quadratic_form(m: &DMatrix<C64>, s: &[C64]) -> f64 {
    let n = s.len();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let row: C64 = (0..n).map(|l| m[(j, l)] * s[l]).sum();
        acc += s[j].conj() * row;
    }
    acc.re
}

struct TrialSetup<'a> {
    phi: &'a PureState,
    basis: &'a LabeledBasis,
    randomization: LabeledBasis,
    weights: WeightedIndex<f64>,
    v: f64,
    prep_fidelity: f64,
    analysis_keep: f64,
    roles: DetectorRoles,
}

impl TrialSetup<'_> {
    fn rng(seed: u64, input: usize, trial: u64) -> ChaCha8Rng {
        let key = seed ^ (input as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(trial);
        rng
    }

    /// Outcome index on detector 2, or `None` when no coincidence is
    /// recorded.
    fn run<R: Rng>(&self, rng: &mut R, tables: &Tables) -> Result<Option<usize>> {
        let keep = keep_probability(self.prep_fidelity, self.phi.dim());
        let kept = keep >= 1.0 || rng.random::<f64>() < keep;
        let k = self.weights.sample(rng);
        let fresh;
        let probs = if kept {
            &tables.intact[k]
        } else {
            let signal = PureState::haar_random(rng, self.phi.dim())?;
            fresh = tables.forms[k]
                .iter()
                .map(|m| quadratic_form(m, signal.amps()))
                .collect::<Vec<_>>();
            &fresh
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    fn tables(&self) -> Tables {
        let ancillas = 0..self.randomization.dim();
        let intact = ancillas
            .clone()
            .map(|k| self.outcome_probabilities(self.phi.amps(), k))
            .collect();
        let forms = if self.prep_fidelity < 1.0 {
            ancillas.map(|k| self.signal_forms(k)).collect()
        } else {
            Vec::new()
        };
        Tables { intact, forms }
    }

    /// Detection probabilities are quadratic in the signal amplitudes:
    /// `P_i(s) = s† M_i s`. Recovers each `M_i` by polarization.
    fn signal_forms(&self, ancilla_index: usize) -> Vec<DMatrix<C64>> {
        let d = self.phi.dim();
        let zero = C64::new(0.0, 0.0);
        let probe = |entries: &[(usize, C64)]| {
            let mut s = vec![zero; d];
            for &(j, c) in entries {
                s[j] = c;
            }
            self.outcome_probabilities(&s, ancilla_index)
        };
        let one = C64::new(1.0, 0.0);
        let diag: Vec<Vec<f64>> = (0..d).map(|j| probe(&[(j, one)])).collect();
        let mut forms = vec![DMatrix::from_element(d, d, zero); d];
        for j in 0..d {
            for (i, m) in forms.iter_mut().enumerate() {
                m[(j, j)] = C64::new(diag[j][i], 0.0);
            }
            for l in j + 1..d {
                let re = probe(&[(j, one), (l, one)]);
                let im = probe(&[(j, one), (l, C64::new(0.0, 1.0))]);
                for (i, m) in forms.iter_mut().enumerate() {
                    let base = diag[j][i] + diag[l][i];
                    let c = C64::new((re[i] - base) / 2.0, -(im[i] - base) / 2.0);
                    m[(j, l)] = c;
                    m[(l, j)] = c.conj();
                }
            }
        }
        forms
    }

    fn outcome_probabilities(&self, signal: &[C64], ancilla_index: usize) -> Vec<f64> {
        let d = self.phi.dim();
        let ancilla = self.randomization.state(ancilla_index);
        let w = (1.0 - self.v * self.v).max(0.0).sqrt();
        let mut s = vec![C64::new(0.0, 0.0); 2 * d];
        let mut a = vec![C64::new(0.0, 0.0); 2 * d];
        for k in 0..d {
            s[k] = signal[k];
            a[k] = ancilla.amps()[k] * self.v;
            a[d + k] = ancilla.amps()[k] * w;
        }
        let psi = coincidence_amplitudes(&s, &a);
        self.detection_probabilities(&psi, d)
    }

    /// `P(detector 1 passes φ, detector 2 reports i)` for each `i`, with
    /// depolarized projectors `E = q Π + (1 - q) I/d` on both detectors and
    /// the time bin unresolved.
    fn detection_probabilities(&self, psi: &[C64], d: usize) -> Vec<f64> {
        let n = 2 * d;
        let q = self.analysis_keep;
        let white = (1.0 - q) / d as f64;
        let phi = self.phi.amps();
        let mut probs = vec![0.0; d];
        for t1 in 0..2 {
            for t2 in 0..2 {
                // block B(x, y) with arm-1 level x and arm-2 level y
                let block = |x: usize, y: usize| match self.roles {
                    DetectorRoles::Standard => psi[(t1 * d + x) * n + t2 * d + y],
                    DetectorRoles::Swapped => psi[(t2 * d + y) * n + t1 * d + x],
                };
                let mut norm = 0.0;
                let mut r = vec![C64::new(0.0, 0.0); d];
                for (x, px) in phi.iter().enumerate() {
                    for (y, ry) in r.iter_mut().enumerate() {
                        let b = block(x, y);
                        norm += b.norm_sqr();
                        *ry += px.conj() * b;
                    }
                }
                let r_norm: f64 = r.iter().map(|z| z.norm_sqr()).sum();
                for (i, p) in probs.iter_mut().enumerate() {
                    let bi = self.basis.state(i).amps();
                    let both: C64 = (0..d).map(|y| bi[y].conj() * r[y]).sum();
                    let c_norm: f64 = (0..d)
                        .map(|x| {
                            (0..d)
                                .map(|y| bi[y].conj() * block(x, y))
                                .sum::<C64>()
                                .norm_sqr()
                        })
                        .sum();
                    *p += q * q * both.norm_sqr()
                        + q * white * (r_norm + c_norm)
                        + white * white * norm;
                }
            }
        }
        probs
    }
}

/// Collects `config.shots` coincidences for input `phi`, an element of
/// `basis`.
pub fn run_cloning_experiment(
    phi: &PureState,
    basis: &LabeledBasis,
    config: &ExperimentConfig,
) -> Result<CountsTable> {
    run_cloning_experiment_with(phi, basis, config, DetectorRoles::Standard)
}

pub fn run_cloning_experiment_with(
    phi: &PureState,
    basis: &LabeledBasis,
    config: &ExperimentConfig,
    roles: DetectorRoles,
) -> Result<CountsTable> {
    let d = basis.dim();
    config.validate(d)?;
    let phi_index = basis.index_of(phi)?;
    let setup = TrialSetup {
        phi,
        basis,
        randomization: LabeledBasis::computational(d)?,
        weights: WeightedIndex::new(config.ancilla_weights(d))
            .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        v: config.v,
        prep_fidelity: config.prep_fidelity,
        analysis_keep: keep_probability(config.analysis_fidelity, d),
        roles,
    };
    let tables = setup.tables();
    let mut counts = vec![0u64; d];
    let mut recorded = 0u64;
    let mut next_trial = 0u64;
    while recorded < config.shots {
        let start = next_trial;
        let block: Vec<Option<usize>> = (start..start + TRIAL_BLOCK)
            .into_par_iter()
            .map(|t| {
                let mut rng = TrialSetup::rng(config.seed, phi_index, t);
                setup.run(&mut rng, &tables)
            })
            .collect::<Result<_>>()?;
        for outcome in block {
            next_trial += 1;
            if let Some(i) = outcome {
                counts[i] += 1;
                recorded += 1;
                if recorded == config.shots {
                    break;
                }
            }
        }
        if next_trial == start + TRIAL_BLOCK && recorded == 0 && next_trial >= 64 * TRIAL_BLOCK {
            return Err(Error::InvalidConfig(
                "no coincidences recorded; the configuration cannot produce clone events".into(),
            ));
        }
    }
    Ok(CountsTable {
        input_label: basis.labels()[phi_index].clone(),
        basis_label: basis.name().to_string(),
        phi_index,
        counts,
        trials: next_trial,
        config: config.clone(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicatedRow {
    pub label: String,
    pub counts: CountsTable,
    pub estimate: EstimationResult,
}

/// Fidelity table for every input state of one basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableReplication {
    pub basis: String,
    pub outcome_labels: Vec<String>,
    pub rows: Vec<ReplicatedRow>,
    pub average_fidelity: f64,
    pub average_stderr: f64,
}

impl TableReplication {
    pub fn estimates(&self) -> Vec<EstimationResult> {
        self.rows.iter().map(|r| r.estimate.clone()).collect()
    }

    /// The `p(i|φ)` matrix, one row per input.
    pub fn probability_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.estimate.probs.clone()).collect()
    }

    /// All counts as `input,outcome,count` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["input", "outcome", "count"])
            .map_err(|e| Error::Parse(e.to_string()))?;
        for row in &self.rows {
            row.counts.write_rows(&mut wr, &self.outcome_labels)?;
        }
        wr.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs every input of basis `"I"` or `"IV"` and tabulates the fidelities.
pub fn replicate_table(basis_name: &str, config: &ExperimentConfig) -> Result<TableReplication> {
    if basis_name != "I" && basis_name != "IV" {
        return Err(Error::UnknownBasis(basis_name.to_string()));
    }
    let basis = basis_by_name(basis_name, 4)?;
    replicate_basis(&basis, config)
}

pub fn replicate_basis(
    basis: &LabeledBasis,
    config: &ExperimentConfig,
) -> Result<TableReplication> {
    let mut rows = Vec::with_capacity(basis.dim());
    for (i, phi) in basis.states().iter().enumerate() {
        let counts = run_cloning_experiment(phi, basis, config)?;
        let estimate = estimate_probabilities(&counts, i)?;
        rows.push(ReplicatedRow {
            label: basis.labels()[i].clone(),
            counts,
            estimate,
        });
    }
    let k = rows.len() as f64;
    let average_fidelity = rows.iter().map(|r| r.estimate.fidelity).sum::<f64>() / k;
    let average_stderr = rows
        .iter()
        .map(|r| r.estimate.stderr.powi(2))
        .sum::<f64>()
        .sqrt()
        / k;
    Ok(TableReplication {
        basis: basis.name().to_string(),
        outcome_labels: basis.labels().to_vec(),
        rows,
        average_fidelity,
        average_stderr,
    })
}
