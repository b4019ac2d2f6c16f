//! Input parsing: rational vectors from the command line, matrices and
//! sample lists from JSON files (or inline JSON), lattice and family
//! presentations, and function tables.

use std::collections::BTreeSet;

use serde::Deserialize;
use serde_json::Value;
use splitweight_core::exact::Rat;
use splitweight_core::latcount::AffineFamily;
use splitweight_core::padic::parse_scalar;

use crate::CliError;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// A single rational: `"3"`, `"-3/2"`.
pub fn parse_rat(s: &str) -> Result<Rat, CliError> {
    s.trim().parse::<Rat>().map_err(|_| usage(format!("cli: bad rational `{s}`")))
}

/// Comma-separated rational vector: `"1,-1"`, `"3/2,0"`.
pub fn parse_vec(s: &str) -> Result<Vec<Rat>, CliError> {
    s.split(',').map(parse_rat).collect()
}

pub fn parse_indices(s: &str) -> Result<BTreeSet<usize>, CliError> {
    if s.trim().is_empty() {
        return Ok(BTreeSet::new());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| usage(format!("cli: bad index `{t}`"))))
        .collect()
}

pub fn parse_degree_list(s: &str) -> Result<Vec<i64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| usage(format!("cli: bad degree `{t}`"))))
        .collect()
}

/// Inclusive degree window: `"0..6"` or `"0..=6"`.
pub fn parse_window(s: &str) -> Result<(i64, i64), CliError> {
    let err = || usage(format!("cli: bad window `{s}`, expected `a..b`"));
    let (a, b) = s.split_once("..").ok_or_else(err)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    Ok((a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?))
}

fn load_json(arg: &str) -> Result<Value, CliError> {
    let text = if arg.trim_start().starts_with(['[', '{']) {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| usage(format!("cli: cannot read `{arg}`: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("cli: bad JSON in `{arg}`: {e}")))
}

fn entry_to_rat(v: &Value, p: u64, ctx: &str) -> Result<Rat, CliError> {
    match v {
        Value::String(s) => {
            parse_scalar(s, p).map_err(|e| usage(format!("padic: {ctx}: {e}")))
        }
        Value::Number(n) => {
            let i = n.as_i64().ok_or_else(|| usage(format!("cli: {ctx}: non-integer number")))?;
            Ok(Rat::from_integer(i as i128))
        }
        other => Err(usage(format!("cli: {ctx}: expected string or integer, got {other}"))),
    }
}

fn value_to_matrix(v: &Value, p: u64, ctx: &str) -> Result<Vec<Vec<Rat>>, CliError> {
    let rows = v.as_array().ok_or_else(|| usage(format!("cli: {ctx}: expected an array")))?;
    rows.iter()
        .map(|row| {
            let cells =
                row.as_array().ok_or_else(|| usage(format!("cli: {ctx}: ragged matrix")))?;
            cells.iter().map(|c| entry_to_rat(c, p, ctx)).collect()
        })
        .collect()
}

/// Matrix from a file path or inline JSON: array of rows whose entries are
/// rational literals or `p^v * u` strings.
pub fn matrix_input(arg: &str, p: u64) -> Result<Vec<Vec<Rat>>, CliError> {
    value_to_matrix(&load_json(arg)?, p, arg)
}

/// A list of matrices in the same entry grammar.
pub fn samples_input(arg: &str, p: u64) -> Result<Vec<Vec<Vec<Rat>>>, CliError> {
    let v = load_json(arg)?;
    let list = v.as_array().ok_or_else(|| usage(format!("cli: {arg}: expected an array")))?;
    list.iter().map(|m| value_to_matrix(m, p, arg)).collect()
}

/// A list of rational vectors (orthogonal-set points).
pub fn points_input(arg: &str) -> Result<Vec<Vec<Rat>>, CliError> {
    let v = load_json(arg)?;
    let list = v.as_array().ok_or_else(|| usage(format!("cli: {arg}: expected an array")))?;
    list.iter()
        .map(|row| {
            let cells =
                row.as_array().ok_or_else(|| usage(format!("cli: {arg}: ragged point")))?;
            // Points never carry prime powers; any prime works for parsing.
            cells.iter().map(|c| entry_to_rat(c, 2, arg)).collect()
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeFile {
    ambient: Vec<Vec<i64>>,
    basis: Vec<Vec<i64>>,
    #[serde(default)]
    cosets: Vec<Vec<i64>>,
}

/// Counting-lattice presentation: `{"ambient": .., "basis": .., "cosets": ..}`
/// with integer rows; a missing coset list means the zero coset.
pub fn lattice_input(path: &str) -> Result<(Vec<Vec<i64>>, Vec<Vec<i64>>, Vec<Vec<i64>>), CliError>
{
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cli: cannot read `{path}`: {e}")))?;
    let file: LatticeFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("latcount: bad lattice file `{path}`: {e}")))?;
    let dim = file.ambient.first().map_or(0, |r| r.len());
    let cosets =
        if file.cosets.is_empty() { vec![vec![0; dim]] } else { file.cosets };
    Ok((file.ambient, file.basis, cosets))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    base: Vec<Vec<Value>>,
    slope: Vec<Vec<Value>>,
}

/// Affine vertex family: `{"base": [[..]], "slope": [[..]]}` of rationals.
pub fn family_input(path: &str) -> Result<AffineFamily, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cli: cannot read `{path}`: {e}")))?;
    let file: FamilyFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("latcount: bad family file `{path}`: {e}")))?;
    let conv = |rows: &[Vec<Value>]| -> Result<Vec<Vec<Rat>>, CliError> {
        rows.iter()
            .map(|r| r.iter().map(|c| entry_to_rat(c, 2, path)).collect())
            .collect()
    };
    Ok(AffineFamily { base: conv(&file.base)?, slope: conv(&file.slope)? })
}

/// Function table on the algebra: a plain array of integers in element
/// order, or an object mapping element indices to integers.
pub fn table_input(path: &str, want: usize) -> Result<Vec<i64>, CliError> {
    let v = load_json(path)?;
    match v {
        Value::Array(items) => {
            let table: Vec<i64> = items
                .iter()
                .map(|x| {
                    x.as_i64().ok_or_else(|| usage(format!("cli: {path}: non-integer value")))
                })
                .collect::<Result<_, _>>()?;
            if table.len() != want {
                return Err(usage(format!(
                    "finfield: table in `{path}` has {} entries, algebra has {want}",
                    table.len()
                )));
            }
            Ok(table)
        }
        Value::Object(map) => {
            let mut table = vec![0i64; want];
            for (k, x) in map {
                let idx: usize = k
                    .parse()
                    .map_err(|_| usage(format!("cli: {path}: bad element index `{k}`")))?;
                if idx >= want {
                    return Err(usage(format!("cli: {path}: index {idx} out of range")));
                }
                table[idx] = x
                    .as_i64()
                    .ok_or_else(|| usage(format!("cli: {path}: non-integer value")))?;
            }
            Ok(table)
        }
        _ => Err(usage(format!("cli: {path}: expected array or object"))),
    }
}
