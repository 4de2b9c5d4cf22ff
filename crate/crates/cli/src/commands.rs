use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use qudit_clone::bosonic::{hom_curve, DistinguishabilityModel};
use qudit_clone::cloning::{
    cascade_clone_with, clone_analytic, clone_oracle, f_clon, f_est, CascadeOptions,
    CloningOutcome, CloningSpec,
};
use qudit_clone::experiment::{replicate_table, ExperimentConfig, TableReplication};
use qudit_clone::hilbert::{DensityMatrix, LabeledBasis};

use crate::format::{sig, sig_complex};
use crate::input::{parse_input, parse_reals, ParsedInput};
use crate::{CascadeArgs, CliError, CloneArgs, CloneMode, ExperimentArgs, FormulasArgs, HomArgs};

type CmdResult = Result<(), CliError>;

/// Most delay points a single `hom` call evaluates.
const MAX_HOM_POINTS: usize = 1_000_001;

fn io_err(e: std::io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: qudit_clone::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn print_json<T: Serialize>(out: &mut impl Write, value: &T) -> CmdResult {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out, "{s}").map_err(io_err)
}

fn warn_if_renormalized(p: &ParsedInput) {
    if let Some(norm) = p.renormalized_from {
        eprintln!(
            "warning: input {:?} had norm {}; normalized",
            p.label,
            sig(norm)
        );
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FormulasReport {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    f_est: f64,
    f_clon: f64,
    gap: f64,
}

pub fn formulas(a: &FormulasArgs, out: &mut impl Write) -> CmdResult {
    let spec = CloningSpec::new(a.d, a.n, a.m).map_err(usage)?;
    let f_e = f_est(spec.n, spec.d)?;
    let f_c = f_clon(spec.n, spec.m, spec.d)?;
    let r = FormulasReport {
        d: spec.d,
        n: spec.n,
        m: spec.m,
        f_est: f_e,
        f_clon: f_c,
        gap: f_c - f_e,
    };
    if a.out.json {
        return print_json(out, &r);
    }
    (|| {
        writeln!(out, "f_est(N={}, d={}) = {}", r.n, r.d, sig(r.f_est))?;
        writeln!(
            out,
            "f_clon(N={}, M={}, d={}) = {}",
            r.n,
            r.m,
            r.d,
            sig(r.f_clon)
        )?;
        writeln!(out, "gap = {}", sig(r.gap))
    })()
    .map_err(io_err)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CloneReport<'a> {
    input: &'a str,
    mode: &'static str,
    #[serde(flatten)]
    outcome: &'a CloningOutcome,
}

fn write_matrix(out: &mut impl Write, rho: &DensityMatrix) -> std::io::Result<()> {
    let d = rho.dim();
    let cells: Vec<Vec<String>> = (0..d)
        .map(|i| (0..d).map(|j| sig_complex(rho.get(i, j))).collect())
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        writeln!(out, "  {}", line.join("  "))?;
    }
    Ok(())
}

pub fn clone(a: &CloneArgs, out: &mut impl Write) -> CmdResult {
    let parsed = parse_input(&a.input, a.d)?;
    if parsed.state.dim() < 2 {
        return Err(CliError::Usage("dimension must be at least 2".into()));
    }
    warn_if_renormalized(&parsed);
    let phi = &parsed.state;
    let (mode, outcome) = match a.mode {
        CloneMode::Oracle => ("oracle", clone_oracle(phi)?),
        CloneMode::Analytic => (
            "analytic",
            clone_analytic(phi, &LabeledBasis::adapted_to(phi)?)?,
        ),
    };
    if a.out.json {
        return print_json(
            out,
            &CloneReport {
                input: &parsed.label,
                mode,
                outcome: &outcome,
            },
        );
    }
    (|| {
        writeln!(out, "input: {}", parsed.label)?;
        writeln!(out, "mode: {mode}")?;
        writeln!(out, "d = {}, N = 1, M = 2", outcome.spec.d)?;
        writeln!(out, "fidelity = {}", sig(outcome.fidelity))?;
        writeln!(out, "success probability = {}", sig(outcome.success_prob))?;
        writeln!(out, "clone state:")?;
        write_matrix(out, &outcome.clone_state)?;
        let mut eig = outcome.clone_state.eigenvalues();
        eig.sort_by(|a, b| b.total_cmp(a));
        let eig: Vec<String> = eig.iter().map(|&x| sig(x)).collect();
        writeln!(out, "eigenvalues: {}", eig.join(", "))
    })()
    .map_err(io_err)
}

#[derive(Serialize)]
struct HomPoint {
    tau_fs: f64,
    #[serde(rename = "R")]
    r: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct HomReport {
    input: String,
    ancilla: String,
    v: f64,
    lambda_nm: f64,
    bandwidth_nm: f64,
    coherence_time_fs: f64,
    points: Vec<HomPoint>,
}

fn delays(a: &HomArgs) -> Result<Vec<f64>, CliError> {
    let bad = |m: &str| Err(CliError::Usage(m.to_string()));
    if !(a.tau_min.is_finite() && a.tau_max.is_finite() && a.tau_step.is_finite()) {
        return bad("delay range must be finite");
    }
    if a.tau_step <= 0.0 {
        return bad("--tau-step must be positive");
    }
    if a.tau_max < a.tau_min {
        return bad("--tau-max is below --tau-min");
    }
    let steps = ((a.tau_max - a.tau_min) / a.tau_step + 1e-9).floor();
    if steps + 1.0 > MAX_HOM_POINTS as f64 {
        return bad("delay range has too many points; increase --tau-step");
    }
    Ok((0..=steps as usize)
        .map(|i| a.tau_min + i as f64 * a.tau_step)
        .collect())
}

pub fn hom(a: &HomArgs, out: &mut impl Write) -> CmdResult {
    let signal = parse_input(&a.input, a.d)?;
    let ancilla = match &a.ancilla {
        Some(s) => parse_input(s, a.d.or(Some(signal.state.dim())))?,
        None => signal.clone(),
    };
    warn_if_renormalized(&signal);
    if a.ancilla.is_some() {
        warn_if_renormalized(&ancilla);
    }
    let model = DistinguishabilityModel {
        v: a.v,
        center_nm: a.lambda_nm,
        bandwidth_nm: a.bandwidth_nm,
    };
    model.validate().map_err(usage)?;
    let taus = delays(a)?;
    let curve = hom_curve(&signal.state, &ancilla.state, &taus, &model)?;

    if let Some(dir) = &a.out_dir {
        let mut csv = String::from("tau_fs,R\n");
        for (t, r) in &curve {
            csv.push_str(&format!("{t},{r}\n"));
        }
        write_file(&dir.join("hom.csv"), csv.as_bytes())?;
    }
    if a.out.json {
        return print_json(
            out,
            &HomReport {
                input: signal.label,
                ancilla: ancilla.label,
                v: a.v,
                lambda_nm: a.lambda_nm,
                bandwidth_nm: a.bandwidth_nm,
                coherence_time_fs: model.coherence_time_fs(),
                points: curve
                    .iter()
                    .map(|&(tau_fs, r)| HomPoint { tau_fs, r })
                    .collect(),
            },
        );
    }
    (|| {
        writeln!(out, "tau_fs,R")?;
        for (t, r) in &curve {
            writeln!(out, "{},{}", sig(*t), sig(*r))?;
        }
        Ok(())
    })()
    .map_err(io_err)
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(x) = a.shots {
        cfg.shots = x;
    }
    if let Some(x) = a.seed {
        cfg.seed = x;
    }
    if let Some(x) = a.v {
        cfg.v = x;
    }
    if let Some(x) = a.prep_fid {
        cfg.prep_fidelity = x;
    }
    if let Some(x) = a.analysis_fid {
        cfg.analysis_fidelity = x;
    }
    if let Some(w) = &a.ancilla_weights {
        cfg.ancilla_weights = Some(parse_reals(w)?);
    }
    cfg.validate(4).map_err(usage)?;
    Ok(cfg)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RowSummary<'a> {
    input: &'a str,
    fidelity: f64,
    stderr: f64,
    counts: &'a [u64],
    trials: u64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExperimentSummary<'a> {
    basis: &'a str,
    config: &'a ExperimentConfig,
    outcome_labels: &'a [String],
    /// `probabilities[φ][i] = p(i|φ)`.
    probabilities: Vec<Vec<f64>>,
    rows: Vec<RowSummary<'a>>,
    average_fidelity: f64,
    average_stderr: f64,
}

fn summarize<'a>(t: &'a TableReplication, cfg: &'a ExperimentConfig) -> ExperimentSummary<'a> {
    ExperimentSummary {
        basis: &t.basis,
        config: cfg,
        outcome_labels: &t.outcome_labels,
        probabilities: t.probability_matrix(),
        rows: t
            .rows
            .iter()
            .map(|r| RowSummary {
                input: &r.label,
                fidelity: r.estimate.fidelity,
                stderr: r.estimate.stderr,
                counts: &r.counts.counts,
                trials: r.counts.trials,
            })
            .collect(),
        average_fidelity: t.average_fidelity,
        average_stderr: t.average_stderr,
    }
}

pub fn experiment(a: &ExperimentArgs, out: &mut impl Write) -> CmdResult {
    if a.basis != "I" && a.basis != "IV" {
        return Err(CliError::Usage(format!(
            "unknown basis {:?}; expected I or IV",
            a.basis
        )));
    }
    let cfg = experiment_config(a)?;
    let table = replicate_table(&a.basis, &cfg)?;
    let summary = summarize(&table, &cfg);

    if let Some(dir) = &a.out_dir {
        let mut csv = Vec::new();
        table.write_csv(&mut csv)?;
        write_file(&dir.join("counts.csv"), &csv)?;
        let json =
            serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(&dir.join("summary.json"), &json)?;
    }
    if a.out.json {
        return print_json(out, &summary);
    }
    write_experiment_text(out, &table, &cfg).map_err(io_err)
}

fn write_experiment_text(
    out: &mut impl Write,
    t: &TableReplication,
    cfg: &ExperimentConfig,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "basis {}: {} coincidences per input, seed {}, v = {}, prep fidelity {}, analysis fidelity {}",
        t.basis,
        cfg.shots,
        cfg.seed,
        sig(cfg.v),
        sig(cfg.prep_fidelity),
        sig(cfg.analysis_fidelity)
    )?;
    let width = t
        .outcome_labels
        .iter()
        .map(|l| l.chars().count())
        .max()
        .unwrap_or(1)
        .max(8);
    writeln!(out, "p(i|phi): rows are inputs phi, columns outcomes i")?;
    write!(out, "{:width$}", "")?;
    for l in &t.outcome_labels {
        write!(out, "  {l:>width$}")?;
    }
    writeln!(out)?;
    for (row, probs) in t.rows.iter().zip(t.probability_matrix()) {
        write!(out, "{:width$}", row.label)?;
        for p in probs {
            write!(out, "  {:>width$}", sig(p))?;
        }
        writeln!(out)?;
    }
    writeln!(out, "fidelities:")?;
    for row in &t.rows {
        writeln!(
            out,
            "{:width$}  {} ± {}",
            row.label,
            sig(row.estimate.fidelity),
            sig(row.estimate.stderr)
        )?;
    }
    writeln!(
        out,
        "average: {} ± {}",
        sig(t.average_fidelity),
        sig(t.average_stderr)
    )?;
    out.flush()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CascadeReport<'a> {
    input: &'a str,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    fidelity: f64,
    formula_fidelity: f64,
    difference: f64,
    success_prob: f64,
}

pub fn cascade(a: &CascadeArgs, out: &mut impl Write) -> CmdResult {
    let spec = CloningSpec::new(a.d, a.n, a.m).map_err(usage)?;
    if a.m > a.cap {
        return Err(CliError::Usage(format!(
            "M = {} exceeds the photon cap {}; pass --cap {} to allow it (cost grows steeply with M)",
            a.m, a.cap, a.m
        )));
    }
    let parsed = parse_input(&a.input, Some(a.d))?;
    warn_if_renormalized(&parsed);
    let opts = CascadeOptions {
        photon_cap: a.cap,
        ..CascadeOptions::default()
    };
    let outcome = cascade_clone_with(&parsed.state, spec, &opts)?;
    let formula = f_clon(spec.n, spec.m, spec.d)?;
    let r = CascadeReport {
        input: &parsed.label,
        d: spec.d,
        n: spec.n,
        m: spec.m,
        fidelity: outcome.fidelity,
        formula_fidelity: formula,
        difference: outcome.fidelity - formula,
        success_prob: outcome.success_prob,
    };
    if a.out.json {
        return print_json(out, &r);
    }
    (|| {
        writeln!(out, "input: {}", r.input)?;
        writeln!(out, "{} -> {} cloning, d = {}", r.n, r.m, r.d)?;
        writeln!(out, "cascade fidelity = {}", sig(r.fidelity))?;
        writeln!(out, "formula fidelity = {}", sig(r.formula_fidelity))?;
        writeln!(out, "difference = {}", sig(r.difference))?;
        writeln!(out, "success probability = {}", sig(r.success_prob))
    })()
    .map_err(io_err)
}
