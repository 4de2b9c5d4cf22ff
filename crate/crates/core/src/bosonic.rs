//! Second-quantized few-photon states.
//!
//! A [`FockState`] lives on `ports × dim` modes. Mode `(port, level)` has flat
//! index `port · dim + level`, and a term with occupation `(n_0, n_1, …)`
//! stands for the normalized ket `∏_k (a_k†)^{n_k} / √(n_k!) |0>`.
//!
//! Beam splitters use the symmetric convention
//!
//! ```text
//! a†_{A,k} → (a†_{A,k} + i a†_{B,k}) / √2
//! a†_{B,k} → (i a†_{A,k} + a†_{B,k}) / √2
//! ```
//!
//! applied identically on every internal level `k`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{pair, unpair, DensityMatrix, PureState, STRUCT_TOL};

/// Amplitudes smaller than this are dropped after each evolution step.
pub const PRUNE_TOL: f64 = 1e-14;

/// Speed of light in nm/fs.
const C_NM_PER_FS: f64 = 299.792_458;

type Occupation = Vec<u8>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub port: usize,
    pub level: usize,
}

/// Sparse superposition of occupation-number kets with a fixed photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    ports: usize,
    dim: usize,
    terms: BTreeMap<Occupation, C64>,
}

/// Result of conditioning on every photon leaving through one port.
#[derive(Clone, Debug)]
pub struct PostSelection {
    pub prob: f64,
    /// `None` when `prob` is zero.
    pub conditional: Option<FockState>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Output terms `(p, q, amplitude)` of `|nA, nB>` on one level: `p` photons in
/// port A and `q` in port B.
fn split_level(na: usize, nb: usize) -> Vec<(usize, usize, C64)> {
    let n = na + nb;
    let prefactor = 2f64.powf(-(n as f64) / 2.0) / (factorial(na) * factorial(nb)).sqrt();
    let mut out: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    for j in 0..=na {
        for l in 0..=nb {
            let p = na - j + nb - l;
            let q = j + l;
            let coef = i_pow(j + nb - l) * (binomial(na, j) * binomial(nb, l));
            *out.entry((p, q)).or_default() += coef;
        }
    }
    out.into_iter()
        .map(|((p, q), c)| (p, q, c * prefactor * (factorial(p) * factorial(q)).sqrt()))
        .filter(|(_, _, c)| c.norm() > PRUNE_TOL)
        .collect()
}

impl FockState {
    pub fn vacuum(ports: usize, dim: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; ports * dim], C64::new(1.0, 0.0));
        Self { ports, dim, terms }
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], C64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, occ: &[u8]) -> C64 {
        self.terms.get(occ).copied().unwrap_or_default()
    }

    pub fn mode(&self, m: ModeIndex) -> usize {
        m.port * self.dim + m.level
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Total photon number, taken from any term (all terms agree).
    pub fn photon_number(&self) -> usize {
        self.terms
            .keys()
            .next()
            .map(|o| o.iter().map(|&n| n as usize).sum())
            .unwrap_or(0)
    }

    /// Photons in `port` for every term.
    fn port_count(&self, occ: &[u8], port: usize) -> usize {
        occ[port * self.dim..(port + 1) * self.dim]
            .iter()
            .map(|&n| n as usize)
            .sum()
    }

    fn check_port(&self, port: usize) -> Result<()> {
        if port >= self.ports {
            return Err(Error::InvalidPort {
                port,
                ports: self.ports,
            });
        }
        Ok(())
    }

    fn normalize(mut self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2.is_nan() || n2 <= 0.0 {
            return Err(Error::EmptyState);
        }
        let s = n2.sqrt().recip();
        self.terms.values_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// Applies `Σ_k amps_k a†_{port,k}` and renormalizes.
    pub fn create(&self, port: usize, psi: &PureState) -> Result<Self> {
        self.check_port(port)?;
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: psi.dim(),
            });
        }
        let mut terms: BTreeMap<Occupation, C64> = BTreeMap::new();
        for (occ, amp) in &self.terms {
            for (k, &c) in psi.amps().iter().enumerate() {
                if c.norm() <= PRUNE_TOL {
                    continue;
                }
                let m = port * self.dim + k;
                let mut next = occ.clone();
                next[m] += 1;
                let f = (next[m] as f64).sqrt();
                *terms.entry(next).or_default() += amp * c * f;
            }
        }
        terms.retain(|_, a| a.norm() > PRUNE_TOL);
        Self {
            ports: self.ports,
            dim: self.dim,
            terms,
        }
        .normalize()
    }

    /// Balanced beam splitter between `port_a` and `port_b`.
    pub fn beam_splitter(&self, port_a: usize, port_b: usize) -> Result<Self> {
        self.check_port(port_a)?;
        self.check_port(port_b)?;
        if port_a == port_b {
            return Err(Error::SamePort(port_a));
        }
        let d = self.dim;
        let mut out: BTreeMap<Occupation, C64> = BTreeMap::new();
        for (occ, &amp) in &self.terms {
            // partial products over levels
            let mut partial: Vec<(Occupation, C64)> = vec![(occ.clone(), amp)];
            for k in 0..d {
                let (ia, ib) = (port_a * d + k, port_b * d + k);
                let (na, nb) = (occ[ia] as usize, occ[ib] as usize);
                if na + nb == 0 {
                    continue;
                }
                let split = split_level(na, nb);
                let mut next = Vec::with_capacity(partial.len() * split.len());
                for (o, a) in &partial {
                    for &(p, q, c) in &split {
                        let mut o2 = o.clone();
                        o2[ia] = p as u8;
                        o2[ib] = q as u8;
                        next.push((o2, a * c));
                    }
                }
                partial = next;
            }
            for (o, a) in partial {
                *out.entry(o).or_default() += a;
            }
        }
        out.retain(|_, a| a.norm() > PRUNE_TOL);
        Ok(Self {
            ports: self.ports,
            dim: d,
            terms: out,
        })
    }

    /// Component with all photons in `port`, with its probability.
    pub fn postselect_same_port(&self, port: usize) -> Result<PostSelection> {
        self.check_port(port)?;
        let n = self.photon_number();
        let terms: BTreeMap<Occupation, C64> = self
            .terms
            .iter()
            .filter(|(o, _)| self.port_count(o, port) == n)
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        let prob: f64 = terms.values().map(|a| a.norm_sqr()).sum();
        let conditional = if prob > 0.0 {
            Some(
                Self {
                    ports: self.ports,
                    dim: self.dim,
                    terms,
                }
                .normalize()?,
            )
        } else {
            None
        };
        Ok(PostSelection { prob, conditional })
    }

    /// One-photon reduced state `ρ_kl = <a†_{port,l} a_{port,k}> / n` of a
    /// state whose photons all sit in `port`.
    pub fn reduced_single_photon(&self, port: usize) -> Result<DensityMatrix> {
        self.check_port(port)?;
        if self.terms.is_empty() {
            return Err(Error::EmptyState);
        }
        let n = self.photon_number();
        if n == 0 {
            return Err(Error::EmptyState);
        }
        if self.terms.keys().any(|o| self.port_count(o, port) != n) {
            return Err(Error::PhotonsOutsidePort(port));
        }
        let d = self.dim;
        let base = port * d;
        let mut mat = DMatrix::<C64>::zeros(d, d);
        for (occ, &amp) in &self.terms {
            for k in 0..d {
                let nk = occ[base + k];
                if nk == 0 {
                    continue;
                }
                for l in 0..d {
                    // a†_l a_k |occ>
                    let mut target = occ.clone();
                    target[base + k] -= 1;
                    let f = (nk as f64).sqrt() * ((target[base + l] + 1) as f64).sqrt();
                    target[base + l] += 1;
                    let bra = self.amplitude(&target);
                    mat[(k, l)] += bra.conj() * amp * f;
                }
            }
        }
        let tr = mat.trace().re;
        let mat = mat.map(|z| z / tr);
        // Hermitize away rounding noise before validation
        let mat = (&mat + mat.adjoint()).map(|z| z * 0.5);
        DensityMatrix::new(mat)
    }
}

impl FockState {
    /// Normalized superposition of the given occupation kets.
    pub fn from_terms<I>(ports: usize, dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, C64)>,
    {
        let mut map: BTreeMap<Occupation, C64> = BTreeMap::new();
        let mut photons = None;
        for (occ, amp) in terms {
            if occ.len() != ports * dim {
                return Err(Error::DimensionMismatch {
                    expected: ports * dim,
                    got: occ.len(),
                });
            }
            let n: usize = occ.iter().map(|&x| x as usize).sum();
            if *photons.get_or_insert(n) != n {
                return Err(Error::InvalidConfig(
                    "terms carry different photon numbers".into(),
                ));
            }
            *map.entry(occ).or_default() += amp;
        }
        map.retain(|_, a| a.norm() > PRUNE_TOL);
        Self {
            ports,
            dim,
            terms: map,
        }
        .normalize()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockState) -> C64 {
        self.terms
            .iter()
            .map(|(o, a)| a.conj() * other.amplitude(o))
            .sum()
    }

    /// Multiplies every amplitude by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            ports: self.ports,
            dim: self.dim,
            terms: self.terms.iter().map(|(o, a)| (o.clone(), a * c)).collect(),
        }
    }

    /// Largest amplitude difference over the union of both supports.
    pub fn max_abs_diff(&self, other: &FockState) -> f64 {
        let a = self
            .terms
            .iter()
            .map(|(o, x)| (x - other.amplitude(o)).norm());
        let b = other
            .terms
            .iter()
            .map(|(o, y)| (self.amplitude(o) - y).norm());
        a.chain(b).fold(0.0, f64::max)
    }
}

impl FockState {
    /// Exchanges the roles of two ports.
    pub fn swap_ports(&self, port_a: usize, port_b: usize) -> Result<Self> {
        self.check_port(port_a)?;
        self.check_port(port_b)?;
        let d = self.dim;
        let terms = self
            .terms
            .iter()
            .map(|(o, a)| {
                let mut o2 = o.clone();
                for k in 0..d {
                    o2.swap(port_a * d + k, port_b * d + k);
                }
                (o2, *a)
            })
            .collect();
        Ok(Self {
            ports: self.ports,
            dim: d,
            terms,
        })
    }

    /// Two-photon amplitudes `ψ(x, y)` for one photon at level `x` in
    /// `port_x` and one at level `y` in `port_y`. The returned matrix is not
    /// renormalized; its squared Frobenius norm is the coincidence
    /// probability.
    pub fn coincidence_amplitudes(&self, port_x: usize, port_y: usize) -> Result<DMatrix<C64>> {
        self.check_port(port_x)?;
        self.check_port(port_y)?;
        if port_x == port_y {
            return Err(Error::SamePort(port_x));
        }
        if self.photon_number() != 2 {
            return Err(Error::InvalidConfig(format!(
                "coincidence amplitudes need 2 photons, state has {}",
                self.photon_number()
            )));
        }
        let d = self.dim;
        let mut psi = DMatrix::<C64>::zeros(d, d);
        for (o, a) in &self.terms {
            let x = (0..d).find(|&k| o[port_x * d + k] == 1);
            let y = (0..d).find(|&k| o[port_y * d + k] == 1);
            if let (Some(x), Some(y)) = (x, y) {
                psi[(x, y)] = *a;
            }
        }
        Ok(psi)
    }
}

/// Rewrites a weighted ensemble of pure Fock states as the eigen-ensemble of
/// its density operator. The number of branches drops to at most the rank of
/// the mixture, which for photons confined to one port is bounded by the
/// dimension of the symmetric subspace.
pub fn compress_ensemble(ensemble: &[(f64, FockState)]) -> Result<Vec<(f64, FockState)>> {
    let (ports, dim) = match ensemble.first() {
        Some((_, s)) => (s.ports, s.dim),
        None => return Ok(Vec::new()),
    };
    let mut index: BTreeMap<Occupation, usize> = BTreeMap::new();
    for (_, s) in ensemble {
        for o in s.terms.keys() {
            let next = index.len();
            index.entry(o.clone()).or_insert(next);
        }
    }
    let n = index.len();
    let mut rho = DMatrix::<C64>::zeros(n, n);
    for (w, s) in ensemble {
        let v: Vec<(usize, C64)> = s.terms.iter().map(|(o, a)| (index[o], *a)).collect();
        for &(i, a) in &v {
            for &(j, b) in &v {
                rho[(i, j)] += a * b.conj() * *w;
            }
        }
    }
    let eig = rho.symmetric_eigen();
    let keys: Vec<&Occupation> = {
        let mut k: Vec<(&Occupation, usize)> = index.iter().map(|(o, &i)| (o, i)).collect();
        k.sort_by_key(|&(_, i)| i);
        k.into_iter().map(|(o, _)| o).collect()
    };
    let floor = PRUNE_TOL * eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x));
    let mut out = Vec::new();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= floor {
            continue;
        }
        let col = eig.eigenvectors.column(c);
        let terms: BTreeMap<Occupation, C64> = keys
            .iter()
            .enumerate()
            .filter(|(i, _)| col[*i].norm() > PRUNE_TOL)
            .map(|(i, o)| ((*o).clone(), col[i]))
            .collect();
        let state = FockState { ports, dim, terms }.normalize()?;
        out.push((lambda, state));
    }
    Ok(out)
}

/// One photon in `psi` on `port` of a `ports`-port system.
pub fn single_photon(ports: usize, port: usize, psi: &PureState) -> Result<FockState> {
    FockState::vacuum(ports, psi.dim()).create(port, psi)
}

pub fn beam_splitter(state: &FockState, port_a: usize, port_b: usize) -> Result<FockState> {
    state.beam_splitter(port_a, port_b)
}

pub fn postselect_same_port(state: &FockState, port: usize) -> Result<PostSelection> {
    state.postselect_same_port(port)
}

pub fn reduced_single_photon(state: &FockState, port: usize) -> Result<DensityMatrix> {
    state.reduced_single_photon(port)
}

/// Wavepacket overlap between the two photons meeting on a beam splitter.
///
/// `v` is the peak overlap at zero delay. Away from zero delay the overlap of
/// two identical Gaussian spectra of intensity FWHM `bandwidth_nm` around
/// `center_nm` falls as `v(τ) = v · exp(-(τ/τ_c)²)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityModel {
    pub v: f64,
    pub center_nm: f64,
    pub bandwidth_nm: f64,
}

impl Default for DistinguishabilityModel {
    fn default() -> Self {
        Self {
            v: 1.0,
            center_nm: 795.0,
            bandwidth_nm: 4.5,
        }
    }
}

impl DistinguishabilityModel {
    pub fn with_overlap(v: f64) -> Result<Self> {
        let m = Self {
            v,
            ..Self::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.v) {
            return Err(Error::InvalidConfig(format!(
                "overlap v = {} outside [0,1]",
                self.v
            )));
        }
        if !(self.center_nm > 0.0 && self.bandwidth_nm > 0.0) {
            return Err(Error::InvalidConfig(
                "wavelength and bandwidth must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `τ_c` in femtoseconds.
    pub fn coherence_time_fs(&self) -> f64 {
        let delta_nu = C_NM_PER_FS * self.bandwidth_nm / (self.center_nm * self.center_nm);
        let sigma_omega = 2.0 * PI * delta_nu / (2.0 * (2.0 * LN_2).sqrt());
        2f64.sqrt() / sigma_omega
    }

    /// Overlap at delay `tau_fs`.
    pub fn overlap_at(&self, tau_fs: f64) -> f64 {
        let x = tau_fs / self.coherence_time_fs();
        self.v * (-x * x).exp()
    }
}

/// Number of temporal bins in the wavepacket decomposition.
pub const TIME_BINS: usize = 2;

/// Embeds a `d`-level state into the `2d`-level space of (time bin, level),
/// index `bin · d + level`, as `Σ_b w_b |b>|ψ>`.
pub fn embed_in_time_bins(psi: &PureState, weights: [f64; TIME_BINS]) -> Result<PureState> {
    let d = psi.dim();
    let mut amps = vec![C64::new(0.0, 0.0); TIME_BINS * d];
    for (b, w) in weights.iter().enumerate() {
        for (k, a) in psi.amps().iter().enumerate() {
            amps[b * d + k] = a * w;
        }
    }
    PureState::new(amps)
}

/// Signal wavepacket: entirely in the reference bin.
pub fn signal_wavepacket(psi: &PureState) -> Result<PureState> {
    embed_in_time_bins(psi, [1.0, 0.0])
}

/// Ancilla wavepacket with overlap `v` on the signal's bin and the remainder
/// in an orthogonal bin.
pub fn ancilla_wavepacket(psi: &PureState, v: f64) -> Result<PureState> {
    embed_in_time_bins(psi, [v, (1.0 - v * v).max(0.0).sqrt()])
}

/// Probability that both photons leave one common port (either port) after a
/// balanced beam splitter, signal on port 0 and ancilla on port 1.
fn same_port_probability(s: &PureState, a: &PureState, v: f64) -> Result<f64> {
    let state = single_photon(2, 0, &signal_wavepacket(s)?)?
        .create(1, &ancilla_wavepacket(a, v)?)?
        .beam_splitter(0, 1)?;
    Ok(state.postselect_same_port(0)?.prob + state.postselect_same_port(1)?.prob)
}

/// Same-port pair rate relative to fully distinguishable photons, computed on
/// the Fock engine. Equals `1 + v² |<a|s>|²`.
pub fn coalescence_enhancement(
    psi_s: &PureState,
    psi_a: &PureState,
    model: &DistinguishabilityModel,
) -> Result<f64> {
    model.validate()?;
    enhancement_with_overlap(psi_s, psi_a, model.v)
}

fn enhancement_with_overlap(psi_s: &PureState, psi_a: &PureState, v: f64) -> Result<f64> {
    let with = same_port_probability(psi_s, psi_a, v)?;
    let without = same_port_probability(psi_s, psi_a, 0.0)?;
    Ok(with / without)
}

/// Samples `R(τ)` over the given delays (femtoseconds).
pub fn hom_curve(
    psi_s: &PureState,
    psi_a: &PureState,
    delays_fs: &[f64],
    model: &DistinguishabilityModel,
) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    delays_fs
        .iter()
        .map(|&tau| {
            Ok((
                tau,
                enhancement_with_overlap(psi_s, psi_a, model.overlap_at(tau))?,
            ))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TermWire {
    occ: Vec<u8>,
    amp: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct FockWire {
    ports: usize,
    dim: usize,
    terms: Vec<TermWire>,
}

impl Serialize for FockState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FockWire {
            ports: self.ports,
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(o, a)| TermWire {
                    occ: o.clone(),
                    amp: pair(*a),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FockState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = FockWire::deserialize(d)?;
        let modes = w.ports * w.dim;
        let mut terms = BTreeMap::new();
        let mut n = None;
        for t in w.terms {
            if t.occ.len() != modes {
                return Err(D::Error::custom(
                    "occupation length does not match ports*dim",
                ));
            }
            let total: usize = t.occ.iter().map(|&x| x as usize).sum();
            if *n.get_or_insert(total) != total {
                return Err(D::Error::custom("terms carry different photon numbers"));
            }
            terms.insert(t.occ, unpair(t.amp));
        }
        let s = FockState {
            ports: w.ports,
            dim: w.dim,
            terms,
        };
        if (s.norm_sqr() - 1.0).abs() > STRUCT_TOL.max(1e-9) {
            return Err(D::Error::custom("state is not normalized"));
        }
        Ok(s)
    }
}
