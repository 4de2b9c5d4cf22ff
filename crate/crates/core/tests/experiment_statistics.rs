//! Statistical checks of the simulated coincidence experiment.

use qudit_clone::cloning::f_clon;
use qudit_clone::experiment::{
    estimate_probabilities, replicate_basis, replicate_table, run_cloning_experiment,
    run_cloning_experiment_with, DetectorRoles, ExperimentConfig,
};
use qudit_clone::hilbert::{basis_four, basis_logical, LabeledBasis};

/// Expected fidelity with perfect preparation and analysis and a uniformly
/// drawn ancilla. Averaging the coincidence rates over the ancilla gives
/// `N_φφ ∝ 2 + 2v²` and `N_φi ∝ 1` for each `i ≠ φ`, so
/// `x = (2 + 2v²)/(d + 1 + 2v²)` and `F = 1/(2 - x)`.
fn ideal_fidelity(v: f64, d: usize) -> f64 {
    let d = d as f64;
    (d + 1.0 + 2.0 * v * v) / (2.0 * d + 2.0 * v * v)
}

fn config(shots: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        shots,
        seed,
        ..ExperimentConfig::default()
    }
}

#[test]
fn ideal_oracle_agrees_with_cloning_bound() {
    for d in 2..=8 {
        assert!((ideal_fidelity(1.0, d) - f_clon(1, 2, d).unwrap()).abs() < 1e-15);
    }
    assert_eq!(ideal_fidelity(0.0, 4), 0.625);
}

#[test]
fn estimates_within_three_sigma() {
    for (basis, seed) in [(basis_logical(), 1), (basis_four(), 2)] {
        for v in [1.0, 0.6, 0.0] {
            let cfg = ExperimentConfig {
                v,
                ..config(100_000, seed)
            };
            let want = ideal_fidelity(v, 4);
            for (i, phi) in basis.states().iter().enumerate() {
                let t = run_cloning_experiment(phi, &basis, &cfg).unwrap();
                assert_eq!(t.total(), 100_000);
                let e = estimate_probabilities(&t, i).unwrap();
                assert!(
                    (e.fidelity - want).abs() < 3.0 * e.stderr,
                    "basis {} input {i} v={v}: {} ± {} vs {want}",
                    basis.name(),
                    e.fidelity,
                    e.stderr
                );
                let sum: f64 = e.probs.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn other_dimensions() {
    for d in [2, 3, 5] {
        let basis = LabeledBasis::computational(d).unwrap();
        let table = replicate_basis(&basis, &config(50_000, d as u64)).unwrap();
        let want = ideal_fidelity(1.0, d);
        assert!(
            (table.average_fidelity - want).abs() < 3.0 * table.average_stderr,
            "d={d}: {} ± {}",
            table.average_fidelity,
            table.average_stderr
        );
    }
}

#[test]
fn indistinguishable_limit_is_full_ideal_table() {
    let table = replicate_table("I", &config(100_000, 0)).unwrap();
    assert!((table.average_fidelity - 0.7).abs() < 0.005);
    for row in &table.rows {
        assert!((row.estimate.fidelity - 0.7).abs() < 3.0 * row.estimate.stderr);
    }
}

#[test]
fn fully_distinguishable_photons() {
    let cfg = ExperimentConfig {
        v: 0.0,
        ..config(100_000, 17)
    };
    let table = replicate_table("IV", &cfg).unwrap();
    assert!(
        (table.average_fidelity - 0.625).abs() < 3.0 * table.average_stderr,
        "{} ± {}",
        table.average_fidelity,
        table.average_stderr
    );
}

#[test]
fn seeded_runs_are_reproducible() {
    let basis = basis_four();
    let cfg = ExperimentConfig {
        v: 0.8,
        prep_fidelity: 0.9,
        analysis_fidelity: 0.95,
        ancilla_weights: Some(vec![0.4, 0.3, 0.2, 0.1]),
        ..config(20_000, 42)
    };
    let a = run_cloning_experiment(basis.state(2), &basis, &cfg).unwrap();
    let b = run_cloning_experiment(basis.state(2), &basis, &cfg).unwrap();
    assert_eq!(a, b);
    let c = run_cloning_experiment(
        basis.state(2),
        &basis,
        &ExperimentConfig { seed: 43, ..cfg },
    )
    .unwrap();
    assert_ne!(a.counts, c.counts);
}

#[test]
fn detector_roles_are_interchangeable() {
    let basis = basis_four();
    let cfg = ExperimentConfig {
        v: 0.9,
        ..config(100_000, 5)
    };
    for (i, phi) in basis.states().iter().enumerate() {
        let std = run_cloning_experiment_with(phi, &basis, &cfg, DetectorRoles::Standard).unwrap();
        let swp = run_cloning_experiment_with(phi, &basis, &cfg, DetectorRoles::Swapped).unwrap();
        let (a, b) = (
            estimate_probabilities(&std, i).unwrap(),
            estimate_probabilities(&swp, i).unwrap(),
        );
        let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.fidelity - b.fidelity).abs() < 3.0 * sigma, "input {i}");
    }
}

fn average_fidelity(cfg: &ExperimentConfig) -> f64 {
    replicate_table("I", cfg).unwrap().average_fidelity
}

#[test]
fn fidelity_increases_with_overlap() {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let fids: Vec<f64> = grid
        .iter()
        .map(|&v| {
            average_fidelity(&ExperimentConfig {
                v,
                ..config(100_000, 9)
            })
        })
        .collect();
    for w in fids.windows(2) {
        assert!(w[1] > w[0], "{fids:?}");
    }
}

#[test]
fn fidelity_increases_with_preparation_quality() {
    let grid = [0.25, 0.5, 0.75, 1.0];
    let fids: Vec<f64> = grid
        .iter()
        .map(|&f| {
            average_fidelity(&ExperimentConfig {
                prep_fidelity: f,
                ..config(100_000, 10)
            })
        })
        .collect();
    for w in fids.windows(2) {
        assert!(w[1] > w[0], "{fids:?}");
    }
}

#[test]
fn fidelity_increases_with_analysis_quality() {
    let grid = [0.25, 0.5, 0.75, 1.0];
    let fids: Vec<f64> = grid
        .iter()
        .map(|&f| {
            average_fidelity(&ExperimentConfig {
                analysis_fidelity: f,
                ..config(100_000, 11)
            })
        })
        .collect();
    for w in fids.windows(2) {
        assert!(w[1] > w[0], "{fids:?}");
    }
}
