//! Operator, state and basis specifications: named presets or files.
//!
//! Files start with a `dim=d` line followed by comma- or whitespace-separated
//! `re,im` pairs in row-major order: `d*d` pairs for a matrix, `d` for a state.
//! A basis file is a matrix whose columns are the basis vectors.

use std::path::Path;

use cval_core::random::{haar_basis, haar_state};
use cval_core::{eigenbasis, OperatorMatrix, OrthonormalBasis, StateVector, C64};
use rand_chacha::ChaCha8Rng;

use crate::config::ConfigError;

type Result<T> = std::result::Result<T, ConfigError>;

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Parses the `dim=d` header and the complex entries that follow.
pub fn parse_complex_file(text: &str) -> Result<(usize, Vec<C64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| err("empty file"))?;
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| err(format!("expected header dim=d, found {header:?}")))?;
    let numbers: Vec<f64> = lines
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| err(format!("not a number: {t:?}"))))
        .collect::<Result<_>>()?;
    if !numbers.len().is_multiple_of(2) {
        return Err(err("odd number of values; entries are re,im pairs"));
    }
    Ok((dim, numbers.chunks(2).map(|p| C64::new(p[0], p[1])).collect()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| err(format!("cannot read {}: {e}", path.display())))
}

fn spin_one(axis: char) -> OperatorMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let r = C64::new(s, 0.0);
    let i = C64::new(0.0, s);
    let entries = match axis {
        'x' => vec![z, r, z, r, z, r, z, r, z],
        'y' => vec![z, -i, z, i, z, -i, z, i, z],
        _ => return OperatorMatrix::diagonal(&[1.0, 0.0, -1.0]),
    };
    OperatorMatrix::from_row_slice(3, &entries).expect("3x3")
}

/// `sigma_x|y|z`, `spin1_x|y|z`, or a matrix file.
pub fn operator(spec: &str) -> Result<OperatorMatrix> {
    match spec {
        "sigma_x" => Ok(OperatorMatrix::pauli_x()),
        "sigma_y" => Ok(OperatorMatrix::pauli_y()),
        "sigma_z" => Ok(OperatorMatrix::pauli_z()),
        "spin1_x" => Ok(spin_one('x')),
        "spin1_y" => Ok(spin_one('y')),
        "spin1_z" => Ok(spin_one('z')),
        path => {
            let (dim, entries) = parse_complex_file(&read(Path::new(path))?)?;
            if entries.len() != dim * dim {
                return Err(err(format!("{path}: expected {} entries, found {}", dim * dim, entries.len())));
            }
            OperatorMatrix::from_row_slice(dim, &entries).map_err(|e| err(format!("{path}: {e}")))
        }
    }
}

/// `random` (Haar), `basis:k`, or a state file.
pub fn state(spec: &str, dim: usize, rng: &mut ChaCha8Rng) -> Result<StateVector> {
    if spec == "random" {
        return Ok(haar_state(dim, rng));
    }
    if let Some(k) = spec.strip_prefix("basis:") {
        let k: usize = k.parse().map_err(|_| err(format!("bad basis index in {spec:?}")))?;
        return StateVector::basis_vector(dim, k).map_err(|e| err(e.to_string()));
    }
    let (d, amps) = parse_complex_file(&read(Path::new(spec))?)?;
    if d != dim || amps.len() != d {
        return Err(err(format!("{spec}: state must have {dim} amplitudes")));
    }
    StateVector::normalized(amps).map_err(|e| err(format!("{spec}: {e}")))
}

/// `computational`, `random` (Haar), `eigen:<operator spec>`, or a basis file.
pub fn basis(spec: &str, dim: usize, rng: &mut ChaCha8Rng) -> Result<OrthonormalBasis> {
    let b = match spec {
        "computational" => OrthonormalBasis::computational(dim),
        "random" => haar_basis(dim, rng),
        _ => {
            if let Some(op) = spec.strip_prefix("eigen:") {
                eigenbasis(&operator(op)?).map_err(|e| err(e.to_string()))?.0
            } else {
                let m = operator(spec)?;
                OrthonormalBasis::from_columns(m.entries()).map_err(|e| err(format!("{spec}: {e}")))?
            }
        }
    };
    if b.dim() != dim {
        return Err(err(format!("basis has dimension {}, operator has {dim}", b.dim())));
    }
    Ok(b)
}
