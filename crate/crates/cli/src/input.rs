//! Input-state grammar: `<basis>:<index>` (1-based) or comma-separated
//! complex amplitudes such as `0.5,0.5j,-0.5+0.1j,0`.

use qudit_clone::hilbert::{basis_by_name, PureState};
use qudit_clone::C64;

use crate::CliError;

/// Deviation of the norm beyond which a warning is printed before
/// normalizing.
const NORM_WARN_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ParsedInput {
    pub state: PureState,
    pub label: String,
    /// Norm of the raw amplitudes when it deviated from 1.
    pub renormalized_from: Option<f64>,
}

/// Parses an input spec. `d` is the requested dimension; raw amplitudes
/// take their dimension from the list and must agree with `d` if given.
pub fn parse_input(spec: &str, d: Option<usize>) -> Result<ParsedInput, CliError> {
    let spec = spec.trim();
    if let Some((name, index)) = spec.split_once(':') {
        let d = d.unwrap_or(4);
        let basis = basis_by_name(name.trim(), d).map_err(|e| CliError::Usage(e.to_string()))?;
        let k: usize = index
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad basis index {index:?} in {spec:?}")))?;
        if k == 0 || k > basis.dim() {
            return Err(CliError::Usage(format!(
                "basis index {k} out of range 1..={} in {spec:?}",
                basis.dim()
            )));
        }
        return Ok(ParsedInput {
            state: basis.state(k - 1).clone(),
            label: format!("{}:{k} = {}", basis.name(), basis.labels()[k - 1]),
            renormalized_from: None,
        });
    }

    let amps = spec
        .split(',')
        .map(parse_complex)
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(d) = d {
        if d != amps.len() {
            return Err(CliError::Usage(format!(
                "{} amplitudes given for dimension {d}",
                amps.len()
            )));
        }
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let state = PureState::normalized(amps).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(ParsedInput {
        state,
        label: spec.to_string(),
        renormalized_from: ((norm - 1.0).abs() > NORM_WARN_TOL).then_some(norm),
    })
}

/// Parses `re`, `imj`, `re+imj` or `re-imj` (a bare `j` means `1j`).
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::Usage(format!("cannot parse amplitude {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    let (re, im) = match t.strip_suffix('j') {
        None => (t.parse::<f64>().map_err(|_| bad())?, 0.0),
        Some(body) => split_parts(body).ok_or_else(bad)?,
    };
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

/// Real and imaginary parts of `re±im` with the trailing `j` removed.
fn split_parts(body: &str) -> Option<(f64, f64)> {
    let coefficient = |x: &str| match x {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => x.parse::<f64>().ok(),
    };
    // split before the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => Some((body[..i].parse::<f64>().ok()?, coefficient(&body[i..])?)),
        None => Some((0.0, coefficient(body)?)),
    }
}

/// Parses a comma-separated list of reals.
pub fn parse_reals(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse number {x:?}")))
        })
        .collect()
}
